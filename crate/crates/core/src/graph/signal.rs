use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Graph;
use crate::error::{Error, Result};

/// One scalar per node of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal(DVector<f64>);

impl GraphSignal {
    pub fn new(values: DVector<f64>) -> Self {
        Self(values)
    }

    /// Wraps `values`, checking the length against `g`.
    pub fn on(g: &Graph, values: DVector<f64>) -> Result<Self> {
        crate::error::check_len("graph signal", g.node_count(), values.len())?;
        Ok(Self(values))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    /// Single line of space-separated values.
    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", crate::attachment::join(&self.0))?;
        Ok(())
    }

    pub fn read_text<R: std::io::BufRead>(input: R) -> Result<Self> {
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if !line.trim().is_empty() {
                return Ok(Self(crate::attachment::parse_row(&line, i + 1)?));
            }
        }
        Ok(Self(DVector::zeros(0)))
    }
}

impl From<Vec<f64>> for GraphSignal {
    fn from(v: Vec<f64>) -> Self {
        Self(DVector::from_vec(v))
    }
}

/// Eigenpairs of `L = D - A` in ascending eigenvalue order.
///
/// Ties are ordered by original index (stable sort). Each eigenvector is
/// signed so that its largest-magnitude entry is positive.
pub fn laplacian_eigenbasis(g: &Graph) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if g.is_directed() {
        return Err(Error::InvalidArgument(
            "Laplacian eigenbasis requires an undirected graph".into(),
        ));
    }
    let eig = SymmetricEigen::new(g.laplacian_dense());
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let n = g.node_count();
    let mut basis = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut u = eig.eigenvectors.column(src).into_owned();
        let pivot = u
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, v)| {
                if v.abs() > best.1.abs() {
                    (i, *v)
                } else {
                    best
                }
            })
            .1;
        if pivot < 0.0 {
            u.neg_mut();
        }
        basis.set_column(dst, &u);
        values.push(eig.eigenvalues[src]);
    }
    Ok((values, basis))
}

/// Random low-frequency signal: a standard-normal combination of the `k`
/// Laplacian eigenvectors with smallest eigenvalues, shifted to zero mean.
pub fn smooth_signal(g: &Graph, k: usize, seed: u64) -> Result<GraphSignal> {
    if k == 0 || k > g.node_count() {
        return Err(Error::InvalidArgument(format!(
            "eigenvector count {k} outside 1..={}",
            g.node_count()
        )));
    }
    let (_, basis) = laplacian_eigenbasis(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut x = DVector::zeros(g.node_count());
    for (i, c) in coeffs.iter().enumerate() {
        x.axpy(*c, &basis.column(i), 1.0);
    }
    let mean = x.mean();
    x.add_scalar_mut(-mean);
    Ok(GraphSignal(x))
}
