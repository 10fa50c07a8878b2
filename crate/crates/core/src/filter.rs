//! Polynomial graph filters `y = Σ_{l=1..L} h_l S^l x` and the incoming-node
//! shortcut.
//!
//! On an expanded graph the incoming node receives
//! `[y_+]_{N+1} = a_+^T A_x h` with `A_x = [x, A x, …, A^{L-1} x]`, so the
//! interpolated value is linear in the attachment vector once `A_x h` has
//! been computed on the substrate.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::attachment::{join, parse_row};
use crate::error::{check_len, Error, Result};
use crate::graph::{ExpandedGraph, Graph, GraphSignal};

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Filter coefficients `h_1..h_L` (there is no `h_0` tap).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    h: DVector<f64>,
}

impl FilterSpec {
    pub fn new(h: DVector<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidArgument("filter order must be >= 1".into()));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite filter coefficient".into()));
        }
        Ok(Self { h })
    }

    pub fn order(&self) -> usize {
        self.h.len()
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", join(&self.h))?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if !line.trim().is_empty() {
                return Self::new(parse_row(&line, i + 1)?);
            }
        }
        Err(Error::Parse {
            line: 0,
            msg: "empty filter file".into(),
        })
    }
}

/// `h_l = alpha^l` for `l = 1..=order`.
pub fn geometric_coefficients(alpha: f64, order: usize) -> Result<FilterSpec> {
    FilterSpec::new(DVector::from_iterator(
        order,
        (1..=order).map(|l| alpha.powi(l as i32)),
    ))
}

/// `A_x = [x, A x, …, A^{L-1} x]`, one column per shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedSignalMatrix {
    columns: DMatrix<f64>,
}

impl ShiftedSignalMatrix {
    /// Repeated sparse shifts; `O(L E)`.
    pub fn build(g: &Graph, x: &GraphSignal, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("filter order must be >= 1".into()));
        }
        check_len("graph signal", g.node_count(), x.len())?;
        let n = g.node_count();
        let mut columns = DMatrix::zeros(n, order);
        let mut current = x.values().clone();
        for l in 0..order {
            if l > 0 {
                current = g.shift_unchecked(&current);
            }
            columns.set_column(l, &current);
        }
        Ok(Self { columns })
    }

    pub fn from_columns(columns: DMatrix<f64>) -> Self {
        Self { columns }
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn node_count(&self) -> usize {
        self.columns.nrows()
    }

    pub fn order(&self) -> usize {
        self.columns.ncols()
    }

    /// `A_x h`: the per-node contribution to the incoming node's output.
    pub fn apply(&self, f: &FilterSpec) -> Result<DVector<f64>> {
        check_len("filter order", self.order(), f.order())?;
        Ok(&self.columns * f.coefficients())
    }
}

pub fn build_shifted_matrix(g: &Graph, x: &GraphSignal, order: usize) -> Result<ShiftedSignalMatrix> {
    ShiftedSignalMatrix::build(g, x, order)
}

/// Filter output at the incoming node, `a_+^T A_x h`.
pub fn interpolate_incoming(
    a_plus: &DVector<f64>,
    shifted: &ShiftedSignalMatrix,
    f: &FilterSpec,
) -> Result<f64> {
    check_len("attachment vector", shifted.node_count(), a_plus.len())?;
    Ok(a_plus.dot(&shifted.apply(f)?))
}

/// Full filter on the expanded graph with `x_+ = [x; 0]`, by iterated
/// sparse shifts. Returns all `N + 1` outputs.
pub fn filter_expanded(eg: &ExpandedGraph, x: &GraphSignal, f: &FilterSpec) -> Result<DVector<f64>> {
    let n = eg.base().node_count();
    check_len("graph signal", n, x.len())?;
    let mut current = DVector::zeros(n + 1);
    current.rows_mut(0, n).copy_from(x.values());
    let mut out = DVector::zeros(n + 1);
    for &h in f.coefficients().iter() {
        current = eg.shift(&current)?;
        out.axpy(h, &current, 1.0);
    }
    Ok(out)
}

/// Filter on the substrate alone, `Σ_{l=1..L} h_l A^l x`.
pub fn filter_signal(g: &Graph, x: &GraphSignal, f: &FilterSpec) -> Result<DVector<f64>> {
    check_len("graph signal", g.node_count(), x.len())?;
    let mut current = x.values().clone();
    let mut out = DVector::zeros(g.node_count());
    for &h in f.coefficients().iter() {
        current = g.shift_unchecked(&current);
        out.axpy(h, &current, 1.0);
    }
    Ok(out)
}

/// One training signal for coefficient fitting: the filter sees `signal`,
/// and its output at each node in `observed` should match `targets`.
#[derive(Debug, Clone)]
pub struct FilterObservation {
    pub signal: DVector<f64>,
    pub observed: Vec<usize>,
    pub targets: Vec<f64>,
}

/// Ridge least squares for `h` over all observed entries, solved through
/// the `L x L` normal equations.
pub fn fit_coefficients(
    g: &Graph,
    observations: &[FilterObservation],
    order: usize,
    ridge: f64,
) -> Result<FilterSpec> {
    if order == 0 {
        return Err(Error::InvalidArgument("filter order must be >= 1".into()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge = {ridge}")));
    }
    let mut gram = DMatrix::<f64>::zeros(order, order);
    let mut rhs = DVector::<f64>::zeros(order);
    let mut count = 0usize;
    let mut features = DVector::<f64>::zeros(order);
    for obs in observations {
        check_len("filter observation", g.node_count(), obs.signal.len())?;
        check_len("filter targets", obs.observed.len(), obs.targets.len())?;
        if obs.observed.is_empty() {
            continue;
        }
        let mut shifts = Vec::with_capacity(order);
        let mut current = obs.signal.clone();
        for _ in 0..order {
            current = g.shift_unchecked(&current);
            shifts.push(current.clone());
        }
        for (&i, &t) in obs.observed.iter().zip(&obs.targets) {
            if i >= g.node_count() {
                return Err(Error::InvalidArgument(format!("observed node {i} out of range")));
            }
            for l in 0..order {
                features[l] = shifts[l][i];
            }
            gram.ger(1.0, &features, &features, 1.0);
            rhs.axpy(t, &features, 1.0);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument("no observed entries to fit".into()));
    }
    for l in 0..order {
        gram[(l, l)] += ridge;
    }
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if max == 0.0 || min <= max * 1e-13 {
        return Err(Error::IllConditioned(format!(
            "normal matrix eigenvalues in [{min:e}, {max:e}]"
        )));
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::IllConditioned("normal matrix not positive definite".into()))?;
    FilterSpec::new(chol.solve(&rhs))
}
