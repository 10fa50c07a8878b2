//! Stochastic attachment of an incoming node.
//!
//! The incoming node links to existing node `i` independently with
//! probability `p_i`; when the link forms it carries weight `w_i`. The
//! attachment vector therefore has mean `p ∘ w` and diagonal covariance
//! `w² ∘ p ∘ (1 - p)`.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::graph::Graph;

pub const DEFAULT_W_MAX: f64 = 1.0;

/// Attachment probabilities `p ∈ [0,1]^N` and edge weights `w ∈ [0, w_max]^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttachmentModel {
    p: DVector<f64>,
    w: DVector<f64>,
    w_max: f64,
}

impl AttachmentModel {
    pub fn new(p: DVector<f64>, w: DVector<f64>, w_max: f64) -> Result<Self> {
        check_len("attachment weights", p.len(), w.len())?;
        if !(w_max.is_finite() && w_max >= 0.0) {
            return Err(Error::InvalidArgument(format!("w_max = {w_max}")));
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "p[{i}] = {v} outside [0, 1]"
            )));
        }
        if let Some((i, v)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=w_max).contains(*v))
        {
            return Err(Error::InvalidArgument(format!(
                "w[{i}] = {v} outside [0, {w_max}]"
            )));
        }
        Ok(Self { p, w, w_max })
    }

    /// Unit weights with `w_max = 1`, as used for unweighted substrates.
    pub fn with_unit_weights(p: DVector<f64>) -> Result<Self> {
        let w = DVector::from_element(p.len(), 1.0);
        Self::new(p, w, DEFAULT_W_MAX)
    }

    pub fn p(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Draw one attachment. Deterministic in `seed`.
    pub fn sample(&self, seed: u64) -> AttachmentSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    /// Draw using a caller-owned generator, for long Monte-Carlo loops.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> AttachmentSample {
        let n = self.len();
        let mut a = DVector::zeros(n);
        let mut b = DVector::zeros(n);
        for i in 0..n {
            // random::<f64>() is in [0, 1), so p = 1 always fires and p = 0 never does.
            if rng.random::<f64>() < self.p[i] {
                b[i] = 1.0;
                a[i] = self.w[i];
            }
        }
        AttachmentSample { a_plus: a, b_plus: b }
    }

    /// `E[a_+] = p ∘ w`.
    pub fn mean(&self) -> DVector<f64> {
        self.p.component_mul(&self.w)
    }

    /// Diagonal of the attachment covariance, `w² ∘ p ∘ (1 - p)`.
    pub fn covariance_diag(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.p
                .iter()
                .zip(self.w.iter())
                .map(|(&p, &w)| w * w * p * (1.0 - p)),
        )
    }

    /// `E[A_+] = [[A, 0], [(p ∘ w)^T, 0]]`.
    pub fn expected_expanded_adjacency(&self, g: &Graph) -> Result<DMatrix<f64>> {
        check_len("attachment model", g.node_count(), self.len())?;
        let n = g.node_count();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&g.to_dense());
        let mean = self.mean();
        for j in 0..n {
            m[(n, j)] = mean[j];
        }
        Ok(m)
    }

    /// Text form: `w_max=<v>` then one line of `p` and one line of `w`.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "w_max={}", self.w_max)?;
        writeln!(out, "{}", join(&self.p))?;
        writeln!(out, "{}", join(&self.w))?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().filter(|(_, l)| {
            l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true)
        });
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => Err(Error::Parse {
                    line: 0,
                    msg: format!("missing {what} line"),
                }),
            }
        };
        let (hl, header) = next("header")?;
        let w_max = header
            .trim()
            .strip_prefix("w_max=")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or(Error::Parse {
                line: hl,
                msg: format!("expected `w_max=<value>`, got {header:?}"),
            })?;
        let (pl, p) = next("p")?;
        let p = parse_row(&p, pl)?;
        let (wl, w) = next("w")?;
        let w = parse_row(&w, wl)?;
        Self::new(p, w, w_max)
    }
}

/// One realization of the attachment: weighted row `a_+` and its binary
/// support `b_+`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttachmentSample {
    pub a_plus: DVector<f64>,
    pub b_plus: DVector<f64>,
}

pub(crate) fn join(v: &DVector<f64>) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub(crate) fn parse_row(line: &str, lineno: usize) -> Result<DVector<f64>> {
    let vals = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                msg: format!("bad number {t:?}: {e}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}
