//! Learning the attachment model `(p, w)` from observed incoming nodes.
//!
//! For a fixed substrate signal the incoming node's filter output is
//! `a_+^T c` with `c = A_x h`. Under the Bernoulli attachment model its MSE
//! against a target `x*` splits into a bias and a variance part:
//!
//! ```text
//! MSE(p, w) = ((w∘p)^T c - x*)^2 + Σ_i c_i^2 w_i^2 p_i (1 - p_i)
//! ```
//!
//! The training cost sums this over the training set and adds
//! `μ_p ‖p - b_t‖_q^q + μ_w ‖w - a_t‖_q^q` per sample. Every quantity below
//! is evaluated from per-coordinate sufficient statistics of the training
//! set, so one cost or gradient evaluation is `O(N)` after `c` is known.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attachment::{join, parse_row, AttachmentModel, AttachmentSample, DEFAULT_W_MAX};
use crate::error::{check_len, Error, Result};
use crate::filter::{FilterSpec, ShiftedSignalMatrix};

/// Trailing window used by the optional plateau stop.
pub const PLATEAU_WINDOW: usize = 100;
/// Relative (to the initial cost) range below which a trace has plateaued.
pub const PLATEAU_RTOL: f64 = 1e-6;

/// One historical incoming node: its signal value, weighted attachment
/// and binary attachment pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub x_plus: f64,
    pub a_plus: DVector<f64>,
    pub b_plus: DVector<f64>,
}

impl TrainingSample {
    pub fn new(x_plus: f64, a_plus: DVector<f64>, b_plus: DVector<f64>) -> Result<Self> {
        check_len("attachment pattern", a_plus.len(), b_plus.len())?;
        if !x_plus.is_finite() {
            return Err(Error::InvalidArgument("non-finite training target".into()));
        }
        for i in 0..a_plus.len() {
            let (a, b) = (a_plus[i], b_plus[i]);
            if b != 0.0 && b != 1.0 {
                return Err(Error::InvalidArgument(format!("b_plus[{i}] = {b} is not 0/1")));
            }
            if !a.is_finite() || (b == 0.0 && a != 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "a_plus[{i}] = {a} where b_plus[{i}] = {b}"
                )));
            }
        }
        Ok(Self { x_plus, a_plus, b_plus })
    }

    pub fn len(&self) -> usize {
        self.a_plus.len()
    }

    /// Build from a realized attachment.
    pub fn from_attachment(x_plus: f64, s: &AttachmentSample) -> Result<Self> {
        Self::new(x_plus, s.a_plus.clone(), s.b_plus.clone())
    }

    pub fn is_empty(&self) -> bool {
        self.a_plus.is_empty()
    }
}

/// Training set as CSV with header `x_plus,a_plus,b_plus`; the vector
/// fields hold space-separated values.
pub fn write_training_csv<W: Write>(training: &[TrainingSample], mut out: W) -> Result<()> {
    writeln!(out, "x_plus,a_plus,b_plus")?;
    for s in training {
        writeln!(out, "{},{},{}", s.x_plus, join(&s.a_plus), join(&s.b_plus))?;
    }
    Ok(())
}

pub fn read_training_csv<R: BufRead>(input: R) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || (lineno == 1 && t.starts_with("x_plus")) {
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 3 comma-separated fields, got {}", fields.len()),
            });
        }
        let x = fields[0].trim().parse::<f64>().map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("bad x_plus {:?}: {e}", fields[0]),
        })?;
        let a = parse_row(fields[1], lineno)?;
        let b = parse_row(fields[2], lineno)?;
        out.push(TrainingSample::new(x, a, b).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Regularizer exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn from_exponent(q: u32) -> Result<Self> {
        match q {
            1 => Ok(Norm::L1),
            2 => Ok(Norm::L2),
            _ => Err(Error::InvalidArgument(format!("norm exponent must be 1 or 2, got {q}"))),
        }
    }

    pub fn exponent(self) -> u32 {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub mu_p: f64,
    pub mu_w: f64,
    pub q_p: Norm,
    pub q_w: Norm,
    pub lambda_p: f64,
    pub lambda_w: f64,
    pub iterations: usize,
    pub w_max: f64,
    pub seed: u64,
    /// Stop once the trailing [`PLATEAU_WINDOW`] costs span less than
    /// [`PLATEAU_RTOL`] of the initial cost. Off by default: the trace then
    /// always has `iterations + 1` entries.
    pub stop_on_plateau: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            mu_p: 1.0,
            mu_w: 1.0,
            q_p: Norm::L1,
            q_w: Norm::L2,
            lambda_p: 1e-4,
            lambda_w: 1e-4,
            iterations: 2000,
            w_max: DEFAULT_W_MAX,
            seed: 0,
            stop_on_plateau: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("mu_p", self.mu_p),
            ("mu_w", self.mu_w),
            ("lambda_p", self.lambda_p),
            ("lambda_w", self.lambda_w),
            ("w_max", self.w_max),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} = {v}")));
            }
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Which blocks of `(p, w)` the descent updates.
#[derive(Debug, Clone, PartialEq)]
pub enum Variables {
    Joint,
    /// Learn `p` with `w` held at the given value.
    OnlyP { w: DVector<f64> },
    /// Learn `w` with `p` held at the given value.
    OnlyW { p: DVector<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub p: DVector<f64>,
    pub w: DVector<f64>,
    pub w_max: f64,
    /// Cost at initialization followed by the cost after each iteration.
    pub cost_trace: Vec<f64>,
}

impl FitResult {
    pub fn model(&self) -> Result<AttachmentModel> {
        AttachmentModel::new(self.p.clone(), self.w.clone(), self.w_max)
    }

    pub fn initial_cost(&self) -> f64 {
        self.cost_trace[0]
    }

    pub fn final_cost(&self) -> f64 {
        *self.cost_trace.last().expect("trace is never empty")
    }

    /// `iteration,cost` CSV, iteration 0 being the initialization.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,cost")?;
        for (k, c) in self.cost_trace.iter().enumerate() {
            writeln!(out, "{k},{c}")?;
        }
        Ok(())
    }
}

/// Closed-form MSE of the interpolated incoming-node value against `x_star`.
pub fn closed_form_mse(
    model: &AttachmentModel,
    ax: &ShiftedSignalMatrix,
    f: &FilterSpec,
    x_star: f64,
) -> Result<f64> {
    check_len("attachment model", ax.node_count(), model.len())?;
    let c = ax.apply(f)?;
    let bias = model.mean().dot(&c) - x_star;
    let var: f64 = c
        .iter()
        .zip(model.covariance_diag().iter())
        .map(|(ci, s)| ci * ci * s)
        .sum();
    Ok(bias * bias + var)
}

/// Per-coordinate sufficient statistics of a training set.
#[derive(Debug, Clone)]
pub struct TrainingSummary {
    n: usize,
    count: f64,
    mean_x: f64,
    /// `Σ_t (x_t - mean_x)^2`
    m2_x: f64,
    ones: DVector<f64>,
    mean_a: DVector<f64>,
    m2_a: DVector<f64>,
    /// Per-coordinate sorted `a_{t,i}` and their prefix sums, for the
    /// `q_w = 1` terms.
    sorted_a: Vec<Vec<f64>>,
    prefix_a: Vec<Vec<f64>>,
}

impl TrainingSummary {
    pub fn new(training: &[TrainingSample], n: usize) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        for s in training {
            check_len("training sample", n, s.len())?;
        }
        let count = training.len() as f64;
        let mean_x = training.iter().map(|s| s.x_plus).sum::<f64>() / count;
        let m2_x = training.iter().map(|s| (s.x_plus - mean_x).powi(2)).sum();
        let mut ones = DVector::zeros(n);
        let mut mean_a = DVector::zeros(n);
        for s in training {
            ones += &s.b_plus;
            mean_a += &s.a_plus;
        }
        mean_a /= count;
        let mut m2_a = DVector::zeros(n);
        let mut sorted_a = vec![Vec::with_capacity(training.len()); n];
        for s in training {
            for i in 0..n {
                m2_a[i] += (s.a_plus[i] - mean_a[i]).powi(2);
                sorted_a[i].push(s.a_plus[i]);
            }
        }
        let mut prefix_a = Vec::with_capacity(n);
        for col in sorted_a.iter_mut() {
            col.sort_by(f64::total_cmp);
            let mut acc = 0.0;
            let mut pre = Vec::with_capacity(col.len() + 1);
            pre.push(0.0);
            for v in col.iter() {
                acc += v;
                pre.push(acc);
            }
            prefix_a.push(pre);
        }
        Ok(Self {
            n,
            count,
            mean_x,
            m2_x,
            ones,
            mean_a,
            m2_a,
            sorted_a,
            prefix_a,
        })
    }

    pub fn len(&self) -> usize {
        self.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0.0
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Per-coordinate mean of `b_t`.
    pub fn mean_b(&self) -> DVector<f64> {
        &self.ones / self.count
    }

    /// Per-coordinate mean of `a_t`.
    pub fn mean_a(&self) -> &DVector<f64> {
        &self.mean_a
    }

    /// `Σ_t |w - a_{t,i}|`.
    fn abs_dev_a(&self, i: usize, w: f64) -> f64 {
        let col = &self.sorted_a[i];
        let pre = &self.prefix_a[i];
        let k = col.partition_point(|&a| a < w);
        let below = w * k as f64 - pre[k];
        let above = (pre[col.len()] - pre[k]) - w * (col.len() - k) as f64;
        below + above
    }

    /// `Σ_t sign(w - a_{t,i})`.
    fn sign_sum_a(&self, i: usize, w: f64) -> f64 {
        let col = &self.sorted_a[i];
        let lt = col.partition_point(|&a| a < w);
        let le = col.partition_point(|&a| a <= w);
        lt as f64 - (col.len() - le) as f64
    }
}

/// The training cost for a fixed `c = A_x h`, with its gradients.
#[derive(Debug, Clone)]
pub struct Objective {
    c: DVector<f64>,
    stats: TrainingSummary,
    mu_p: f64,
    mu_w: f64,
    q_p: Norm,
    q_w: Norm,
}

impl Objective {
    pub fn new(
        training: &[TrainingSample],
        ax: &ShiftedSignalMatrix,
        f: &FilterSpec,
        cfg: &OptimizerConfig,
    ) -> Result<Self> {
        let stats = TrainingSummary::new(training, ax.node_count())?;
        Self::from_summary(stats, ax.apply(f)?, cfg)
    }

    pub fn from_summary(stats: TrainingSummary, c: DVector<f64>, cfg: &OptimizerConfig) -> Result<Self> {
        check_len("filtered signal", stats.node_count(), c.len())?;
        Ok(Self {
            c,
            stats,
            mu_p: cfg.mu_p,
            mu_w: cfg.mu_w,
            q_p: cfg.q_p,
            q_w: cfg.q_w,
        })
    }

    pub fn filtered(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn summary(&self) -> &TrainingSummary {
        &self.stats
    }

    fn check(&self, p: &DVector<f64>, w: &DVector<f64>) -> Result<()> {
        check_len("p", self.c.len(), p.len())?;
        check_len("w", self.c.len(), w.len())
    }

    /// Shared mean output `s = (w∘p)^T c`.
    fn mean_output(&self, p: &DVector<f64>, w: &DVector<f64>) -> f64 {
        (0..self.c.len()).map(|i| w[i] * p[i] * self.c[i]).sum()
    }

    pub fn cost(&self, p: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        self.check(p, w)?;
        let st = &self.stats;
        let t = st.count;
        let s = self.mean_output(p, w);
        let mut total = t * (s - st.mean_x).powi(2) + st.m2_x;
        let mut var = 0.0;
        let mut reg_p = 0.0;
        let mut reg_w = 0.0;
        for i in 0..self.c.len() {
            let (pi, wi, ci) = (p[i], w[i], self.c[i]);
            var += ci * ci * wi * wi * pi * (1.0 - pi);
            let n1 = st.ones[i];
            let n0 = t - n1;
            reg_p += match self.q_p {
                Norm::L1 => n0 * pi.abs() + n1 * (1.0 - pi).abs(),
                Norm::L2 => n0 * pi * pi + n1 * (1.0 - pi).powi(2),
            };
            reg_w += match self.q_w {
                Norm::L1 => st.abs_dev_a(i, wi),
                Norm::L2 => t * (wi - st.mean_a[i]).powi(2) + st.m2_a[i],
            };
        }
        total += t * var + self.mu_p * reg_p + self.mu_w * reg_w;
        Ok(total)
    }

    pub fn grad_p(&self, p: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(p, w)?;
        let st = &self.stats;
        let t = st.count;
        let bias = 2.0 * t * (self.mean_output(p, w) - st.mean_x);
        Ok(DVector::from_fn(self.c.len(), |i, _| {
            let (pi, wi, ci) = (p[i], w[i], self.c[i]);
            let n1 = st.ones[i];
            let n0 = t - n1;
            let reg = match self.q_p {
                Norm::L1 => n0 * sign(pi) + n1 * sign(pi - 1.0),
                Norm::L2 => 2.0 * (t * pi - n1),
            };
            bias * wi * ci + t * ci * ci * wi * wi * (1.0 - 2.0 * pi) + self.mu_p * reg
        }))
    }

    pub fn grad_w(&self, p: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(p, w)?;
        let st = &self.stats;
        let t = st.count;
        let bias = 2.0 * t * (self.mean_output(p, w) - st.mean_x);
        Ok(DVector::from_fn(self.c.len(), |i, _| {
            let (pi, wi, ci) = (p[i], w[i], self.c[i]);
            let reg = match self.q_w {
                Norm::L1 => st.sign_sum_a(i, wi),
                Norm::L2 => 2.0 * t * (wi - st.mean_a[i]),
            };
            bias * pi * ci + 2.0 * t * ci * ci * wi * pi * (1.0 - pi) + self.mu_w * reg
        }))
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn empirical_cost(
    p: &DVector<f64>,
    w: &DVector<f64>,
    training: &[TrainingSample],
    ax: &ShiftedSignalMatrix,
    f: &FilterSpec,
    cfg: &OptimizerConfig,
) -> Result<f64> {
    Objective::new(training, ax, f, cfg)?.cost(p, w)
}

pub fn grad_p(
    p: &DVector<f64>,
    w: &DVector<f64>,
    training: &[TrainingSample],
    ax: &ShiftedSignalMatrix,
    f: &FilterSpec,
    cfg: &OptimizerConfig,
) -> Result<DVector<f64>> {
    Objective::new(training, ax, f, cfg)?.grad_p(p, w)
}

pub fn grad_w(
    p: &DVector<f64>,
    w: &DVector<f64>,
    training: &[TrainingSample],
    ax: &ShiftedSignalMatrix,
    f: &FilterSpec,
    cfg: &OptimizerConfig,
) -> Result<DVector<f64>> {
    Objective::new(training, ax, f, cfg)?.grad_w(p, w)
}

/// Euclidean projection onto `[lo, hi]^N`.
pub fn project_box(v: &DVector<f64>, lo: f64, hi: f64) -> Result<DVector<f64>> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidArgument(format!("empty box [{lo}, {hi}]")));
    }
    Ok(v.map(|x| x.clamp(lo, hi)))
}

/// Alternating projected gradient descent over `p ∈ [0,1]^N` and
/// `w ∈ [0, w_max]^N`.
pub fn fit(
    training: &[TrainingSample],
    ax: &ShiftedSignalMatrix,
    f: &FilterSpec,
    cfg: &OptimizerConfig,
) -> Result<FitResult> {
    fit_variables(training, ax, f, cfg, &Variables::Joint)
}

pub fn fit_variables(
    training: &[TrainingSample],
    ax: &ShiftedSignalMatrix,
    f: &FilterSpec,
    cfg: &OptimizerConfig,
    vars: &Variables,
) -> Result<FitResult> {
    cfg.validate()?;
    let objective = Objective::new(training, ax, f, cfg)?;
    fit_objective(&objective, cfg, vars)
}

/// Descent on a prepared objective; lets callers reuse one summary across
/// several configurations.
pub fn fit_objective(objective: &Objective, cfg: &OptimizerConfig, vars: &Variables) -> Result<FitResult> {
    cfg.validate()?;
    let n = objective.c.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut p = DVector::from_fn(n, |_, _| rng.random::<f64>());
    let mut w = DVector::from_fn(n, |_, _| rng.random::<f64>() * cfg.w_max);
    let (update_p, update_w) = match vars {
        Variables::Joint => (true, true),
        Variables::OnlyP { w: fixed } => {
            check_len("fixed w", n, fixed.len())?;
            w = fixed.clone();
            (true, false)
        }
        Variables::OnlyW { p: fixed } => {
            check_len("fixed p", n, fixed.len())?;
            p = fixed.clone();
            (false, true)
        }
    };

    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let c0 = objective.cost(&p, &w)?;
    if !c0.is_finite() {
        return Err(Error::Diverged { iteration: 0, cost: c0 });
    }
    trace.push(c0);
    for k in 1..=cfg.iterations {
        if update_p {
            let g = objective.grad_p(&p, &w)?;
            p.axpy(-cfg.lambda_p, &g, 1.0);
            p.apply(|v| *v = v.clamp(0.0, 1.0));
        }
        if update_w {
            let g = objective.grad_w(&p, &w)?;
            w.axpy(-cfg.lambda_w, &g, 1.0);
            w.apply(|v| *v = v.clamp(0.0, cfg.w_max));
        }
        let cost = objective.cost(&p, &w)?;
        if !cost.is_finite() {
            return Err(Error::Diverged { iteration: k, cost });
        }
        trace.push(cost);
        if cfg.stop_on_plateau && has_plateaued(&trace, PLATEAU_WINDOW, PLATEAU_RTOL) {
            break;
        }
    }
    Ok(FitResult {
        p,
        w,
        w_max: cfg.w_max,
        cost_trace: trace,
    })
}

/// True when the last `window` costs span less than `rtol` times the
/// initial cost.
pub fn has_plateaued(trace: &[f64], window: usize, rtol: f64) -> bool {
    if trace.len() < window + 1 {
        return false;
    }
    let tail = &trace[trace.len() - window..];
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo < rtol * trace[0].abs()
}

/// `w_max^2 max_i c_i^2 - ‖w∘c‖^2`, clamped at zero.
///
/// A commonly quoted regularization floor for convexity in `p`. It is
/// not sufficient in general: the Hessian `2vv^T - 2 diag(v^2) + 2μI`
/// with `v = (1, 1)` and `μ = 0` (the floor is then zero) has eigenvalue
/// `-2`. Use [`safe_convexity_threshold`] when a guarantee is needed.
pub fn convexity_threshold(
    w: &DVector<f64>,
    ax: &ShiftedSignalMatrix,
    f: &FilterSpec,
    w_max: f64,
) -> Result<f64> {
    let c = ax.apply(f)?;
    check_len("w", c.len(), w.len())?;
    let max_c2 = c.iter().map(|v| v * v).fold(0.0, f64::max);
    let norm2: f64 = c.iter().zip(w.iter()).map(|(ci, wi)| (ci * wi).powi(2)).sum();
    Ok((w_max * w_max * max_c2 - norm2).max(0.0))
}

/// `max_i (w_i c_i)^2`. Since `vv^T` is positive semidefinite, the
/// p-Hessian's smallest eigenvalue is at least `2(μ_p - max_i v_i^2)`, so
/// any `μ_p` at or above this value makes the cost convex in `p`.
pub fn safe_convexity_threshold(w: &DVector<f64>, ax: &ShiftedSignalMatrix, f: &FilterSpec) -> Result<f64> {
    let c = ax.apply(f)?;
    check_len("w", c.len(), w.len())?;
    Ok(c.iter()
        .zip(w.iter())
        .map(|(ci, wi)| (ci * wi).powi(2))
        .fold(0.0, f64::max))
}

/// `w_max^2 max_i c_i^2`: a `μ_p` floor valid for every feasible `w`, and
/// the supremum of [`convexity_threshold`] over the weight box.
pub fn uniform_convexity_threshold(ax: &ShiftedSignalMatrix, f: &FilterSpec, w_max: f64) -> Result<f64> {
    let c = ax.apply(f)?;
    Ok(w_max * w_max * c.iter().map(|v| v * v).fold(0.0, f64::max))
}

/// `2vv^T - 2 diag(v^2) + 2 μ_p I` with `v = w∘c`: the Hessian in `p` of a
/// single-sample cost with a squared `p` regularizer. It does not depend
/// on `p`; the argument is only checked for size.
pub fn hessian_p(
    p: &DVector<f64>,
    w: &DVector<f64>,
    ax: &ShiftedSignalMatrix,
    f: &FilterSpec,
    mu_p: f64,
) -> Result<DMatrix<f64>> {
    let c = ax.apply(f)?;
    check_len("p", c.len(), p.len())?;
    check_len("w", c.len(), w.len())?;
    let v = w.component_mul(&c);
    let mut h = 2.0 * &v * v.transpose();
    for i in 0..v.len() {
        h[(i, i)] += -2.0 * v[i] * v[i] + 2.0 * mu_p;
    }
    Ok(h)
}

/// Hessian in `p` of the full training cost with `q_p = 2`: the
/// single-sample form scaled by the number of training samples.
pub fn cost_hessian_p(
    p: &DVector<f64>,
    w: &DVector<f64>,
    ax: &ShiftedSignalMatrix,
    f: &FilterSpec,
    mu_p: f64,
    samples: usize,
) -> Result<DMatrix<f64>> {
    Ok(hessian_p(p, w, ax, f, mu_p)? * samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{build_shifted_matrix, interpolate_incoming};
    use crate::graph::{erdos_renyi, GraphSignal};
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    struct Instance {
        ax: ShiftedSignalMatrix,
        f: FilterSpec,
        training: Vec<TrainingSample>,
        p: DVector<f64>,
        w: DVector<f64>,
    }

    fn instance(n: usize, samples: usize, seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = erdos_renyi(n, 0.3, seed).unwrap();
        let x = GraphSignal::new(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
        let ax = build_shifted_matrix(&g, &x, 3).unwrap();
        let f = FilterSpec::new(DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let training = (0..samples)
            .map(|_| {
                let b = DVector::from_fn(n, |_, _| if rng.random_bool(0.4) { 1.0 } else { 0.0 });
                let a = b.map(|v| v * rng.random_range(0.1..1.0));
                TrainingSample::new(rng.random_range(-2.0..2.0), a, b).unwrap()
            })
            .collect();
        let p = DVector::from_fn(n, |_, _| rng.random_range(0.05..0.95));
        let w = DVector::from_fn(n, |_, _| rng.random_range(0.05..0.95));
        Instance { ax, f, training, p, w }
    }

    fn cfg(mu_p: f64, mu_w: f64, q_p: Norm, q_w: Norm) -> OptimizerConfig {
        OptimizerConfig { mu_p, mu_w, q_p, q_w, ..OptimizerConfig::default() }
    }

    fn naive_cost(inst: &Instance, p: &DVector<f64>, w: &DVector<f64>, cfg: &OptimizerConfig) -> f64 {
        let c = inst.ax.apply(&inst.f).unwrap();
        let mut total = 0.0;
        for s in &inst.training {
            let mut mean = 0.0;
            let mut var = 0.0;
            for i in 0..c.len() {
                mean += w[i] * p[i] * c[i];
                var += c[i] * c[i] * w[i] * w[i] * p[i] * (1.0 - p[i]);
            }
            total += (mean - s.x_plus).powi(2) + var;
            for i in 0..c.len() {
                let dp = (p[i] - s.b_plus[i]).abs();
                let dw = (w[i] - s.a_plus[i]).abs();
                total += cfg.mu_p * dp.powi(cfg.q_p.exponent() as i32);
                total += cfg.mu_w * dw.powi(cfg.q_w.exponent() as i32);
            }
        }
        total
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn training_sample_validation() {
        let ok = TrainingSample::new(1.0, DVector::from_vec(vec![0.5, 0.0]), DVector::from_vec(vec![1.0, 0.0]));
        assert!(ok.is_ok());
        assert!(TrainingSample::new(1.0, DVector::from_vec(vec![0.5, 0.3]), DVector::from_vec(vec![1.0, 0.0])).is_err());
        assert!(TrainingSample::new(1.0, DVector::from_vec(vec![0.5]), DVector::from_vec(vec![0.5])).is_err());
        assert!(TrainingSample::new(f64::NAN, DVector::zeros(1), DVector::zeros(1)).is_err());
    }

    #[test]
    fn closed_form_limits() {
        let inst = instance(6, 1, 1);
        let c = inst.ax.apply(&inst.f).unwrap();
        let zero = AttachmentModel::new(DVector::zeros(6), inst.w.clone(), 1.0).unwrap();
        assert_eq!(closed_form_mse(&zero, &inst.ax, &inst.f, 1.5).unwrap(), 2.25);
        let sure = AttachmentModel::new(DVector::from_element(6, 1.0), inst.w.clone(), 1.0).unwrap();
        let expected = (inst.w.dot(&c) - 0.7).powi(2);
        assert!((closed_form_mse(&sure, &inst.ax, &inst.f, 0.7).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_monte_carlo() {
        let inst = instance(5, 1, 2);
        let model = AttachmentModel::new(inst.p.clone(), inst.w.clone(), 1.0).unwrap();
        let x_star = 0.3;
        let exact = closed_form_mse(&model, &inst.ax, &inst.f, x_star).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let s = model.sample_with(&mut rng);
            let y = interpolate_incoming(&s.a_plus, &inst.ax, &inst.f).unwrap();
            acc += (y - x_star).powi(2);
        }
        let mc = acc / draws as f64;
        assert!(rel_close(mc, exact, 0.01), "mc {mc} exact {exact}");
    }

    #[test]
    fn cost_trivial_examples() {
        let inst = instance(7, 1, 3);
        let s = &inst.training[0];
        let c0 = cfg(0.0, 0.0, Norm::L2, Norm::L2);
        let ones = DVector::from_element(7, 1.0);
        let cost = empirical_cost(&ones, &s.a_plus, &inst.training, &inst.ax, &inst.f, &c0).unwrap();
        let y = interpolate_incoming(&s.a_plus, &inst.ax, &inst.f).unwrap();
        assert!((cost - (y - s.x_plus).powi(2)).abs() < 1e-12);

        // At p = b, w = a the regularizers vanish for any weights.
        for (qp, qw) in [(Norm::L1, Norm::L2), (Norm::L2, Norm::L1)] {
            let with = cfg(3.0, 5.0, qp, qw);
            let a = empirical_cost(&s.b_plus, &s.a_plus, &inst.training, &inst.ax, &inst.f, &with).unwrap();
            let b = empirical_cost(&s.b_plus, &s.a_plus, &inst.training, &inst.ax, &inst.f, &c0).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        assert!(empirical_cost(&inst.p, &inst.w, &[], &inst.ax, &inst.f, &c0).is_err());
    }

    #[test]
    fn cost_matches_naive_summation() {
        for seed in 0..20 {
            let inst = instance(12, 15, seed);
            for (qp, qw) in [(Norm::L1, Norm::L1), (Norm::L1, Norm::L2), (Norm::L2, Norm::L1), (Norm::L2, Norm::L2)] {
                let c = cfg(0.7, 1.3, qp, qw);
                let fast = empirical_cost(&inst.p, &inst.w, &inst.training, &inst.ax, &inst.f, &c).unwrap();
                let slow = naive_cost(&inst, &inst.p, &inst.w, &c);
                assert!(rel_close(fast, slow, 1e-12), "{fast} vs {slow}");
            }
        }
    }

    fn fd_grad(inst: &Instance, c: &OptimizerConfig, wrt_p: bool) -> DVector<f64> {
        let h = 1e-6;
        let n = inst.p.len();
        DVector::from_fn(n, |i, _| {
            let (mut p1, mut w1) = (inst.p.clone(), inst.w.clone());
            let (mut p2, mut w2) = (inst.p.clone(), inst.w.clone());
            if wrt_p {
                p1[i] += h;
                p2[i] -= h;
            } else {
                w1[i] += h;
                w2[i] -= h;
            }
            (naive_cost(inst, &p1, &w1, c) - naive_cost(inst, &p2, &w2, c)) / (2.0 * h)
        })
    }

    fn grads_close(analytic: &DVector<f64>, numeric: &DVector<f64>) -> bool {
        let scale = numeric.amax().max(1e-6);
        (analytic - numeric).amax() <= 1e-4 * scale
    }

    #[test]
    fn gradients_match_finite_differences_q2() {
        for seed in 0..30 {
            let inst = instance(10, 8, seed);
            let c = cfg(0.8, 0.4, Norm::L2, Norm::L2);
            let gp = grad_p(&inst.p, &inst.w, &inst.training, &inst.ax, &inst.f, &c).unwrap();
            let gw = grad_w(&inst.p, &inst.w, &inst.training, &inst.ax, &inst.f, &c).unwrap();
            assert!(grads_close(&gp, &fd_grad(&inst, &c, true)), "seed {seed}");
            assert!(grads_close(&gw, &fd_grad(&inst, &c, false)), "seed {seed}");
        }
    }

    #[test]
    fn gradients_match_finite_differences_q1_off_kinks() {
        let mut checked = 0;
        for seed in 0..60 {
            let inst = instance(10, 8, seed);
            let off_kink = inst.training.iter().all(|s| {
                (0..10).all(|i| (inst.p[i] - s.b_plus[i]).abs() > 1e-3 && (inst.w[i] - s.a_plus[i]).abs() > 1e-3)
            });
            if !off_kink {
                continue;
            }
            checked += 1;
            let c = cfg(0.8, 0.4, Norm::L1, Norm::L1);
            let gp = grad_p(&inst.p, &inst.w, &inst.training, &inst.ax, &inst.f, &c).unwrap();
            let gw = grad_w(&inst.p, &inst.w, &inst.training, &inst.ax, &inst.f, &c).unwrap();
            assert!(grads_close(&gp, &fd_grad(&inst, &c, true)));
            assert!(grads_close(&gw, &fd_grad(&inst, &c, false)));
        }
        assert!(checked >= 20, "only {checked} instances off the kink set");
    }

    #[test]
    fn gradient_trivial_cases() {
        let inst = instance(6, 4, 7);
        let c = cfg(0.0, 0.0, Norm::L2, Norm::L2);
        let g = grad_p(&inst.p, &DVector::zeros(6), &inst.training, &inst.ax, &inst.f, &c).unwrap();
        assert_eq!(g.amax(), 0.0);
        let g = grad_w(&DVector::zeros(6), &inst.w, &inst.training, &inst.ax, &inst.f, &c).unwrap();
        assert_eq!(g.amax(), 0.0);

        // With p binary the variance part of grad_w vanishes: only the bias part remains.
        let p = DVector::from_fn(6, |i, _| (i % 2) as f64);
        let obj = Objective::new(&inst.training, &inst.ax, &inst.f, &c).unwrap();
        let g = obj.grad_w(&p, &inst.w).unwrap();
        let cvec = obj.filtered();
        let t = inst.training.len() as f64;
        let mean_x = inst.training.iter().map(|s| s.x_plus).sum::<f64>() / t;
        let s = (0..6).map(|i| inst.w[i] * p[i] * cvec[i]).sum::<f64>();
        for i in 0..6 {
            let bias_only = 2.0 * t * (s - mean_x) * p[i] * cvec[i];
            assert!((g[i] - bias_only).abs() < 1e-12);
        }
    }

    #[test]
    fn project_box_examples() {
        let v = DVector::from_vec(vec![-0.2, 0.5, 1.3]);
        assert_eq!(project_box(&v, 0.0, 1.0).unwrap().as_slice(), &[0.0, 0.5, 1.0]);
        assert!(project_box(&v, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn project_box_is_idempotent_and_feasible(
            v in prop::collection::vec(-3.0f64..3.0, 1..20),
            lo in -1.0f64..0.5,
            width in 0.0f64..2.0,
        ) {
            let hi = lo + width;
            let once = project_box(&DVector::from_vec(v), lo, hi).unwrap();
            prop_assert!(once.iter().all(|x| (lo..=hi).contains(x)));
            prop_assert_eq!(project_box(&once, lo, hi).unwrap(), once);
        }

        #[test]
        fn project_box_is_nearest_point(x in -2.0f64..3.0, y in -2.0f64..3.0) {
            let v = DVector::from_vec(vec![x, y]);
            let proj = project_box(&v, 0.0, 1.0).unwrap();
            let best = (&v - &proj).norm();
            let steps = 200;
            for i in 0..=steps {
                for j in 0..=steps {
                    let u = DVector::from_vec(vec![i as f64 / steps as f64, j as f64 / steps as f64]);
                    prop_assert!(best <= (&v - u).norm() + 1e-12);
                }
            }
        }

        #[test]
        fn fit_iterates_stay_feasible(seed in 0u64..1000, lambda in 1e-4f64..1.0) {
            let inst = instance(8, 5, seed);
            let c = OptimizerConfig {
                lambda_p: lambda,
                lambda_w: lambda,
                iterations: 30,
                w_max: 0.8,
                seed,
                ..OptimizerConfig::default()
            };
            let obj = Objective::new(&inst.training, &inst.ax, &inst.f, &c).unwrap();
            for k in 1..=30 {
                let r = fit_objective(&obj, &OptimizerConfig { iterations: k, ..c.clone() }, &Variables::Joint).unwrap();
                prop_assert!(r.p.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!(r.w.iter().all(|v| (0.0..=0.8).contains(v)));
            }
        }
    }

    #[test]
    fn zero_step_keeps_initialization() {
        let inst = instance(9, 6, 4);
        let c = OptimizerConfig { lambda_p: 0.0, lambda_w: 0.0, iterations: 50, seed: 17, ..OptimizerConfig::default() };
        let r = fit(&inst.training, &inst.ax, &inst.f, &c).unwrap();
        assert_eq!(r.cost_trace.len(), 51);
        assert!(r.cost_trace.iter().all(|&v| v == r.cost_trace[0]));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p0 = DVector::from_fn(9, |_, _| rng.random::<f64>());
        assert_eq!(r.p, p0);
    }

    #[test]
    fn strong_weight_regularizer_pulls_w_to_sample() {
        let inst = instance(8, 1, 5);
        let s = &inst.training[0];
        let c = OptimizerConfig {
            mu_w: 1e3,
            mu_p: 1.0,
            q_p: Norm::L2,
            q_w: Norm::L2,
            lambda_p: 1e-2,
            lambda_w: 1e-4,
            iterations: 3000,
            ..OptimizerConfig::default()
        };
        let r = fit(&inst.training, &inst.ax, &inst.f, &c).unwrap();
        assert!((&r.w - &s.a_plus).amax() < 1e-2, "{}", (&r.w - &s.a_plus).amax());
        assert!(r.final_cost() < r.initial_cost());
    }

    #[test]
    fn divergence_is_reported() {
        let inst = instance(8, 4, 6);
        // Projection keeps iterates bounded; a huge weight box overflows the cost.
        let c = OptimizerConfig { w_max: 1e300, ..OptimizerConfig::default() };
        let err = fit(&inst.training, &inst.ax, &inst.f, &c).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn plateau_stop_shortens_trace() {
        let inst = instance(8, 4, 8);
        let base = OptimizerConfig { iterations: 5000, lambda_p: 1e-2, lambda_w: 1e-2, q_p: Norm::L2, ..OptimizerConfig::default() };
        let full = fit(&inst.training, &inst.ax, &inst.f, &base).unwrap();
        assert_eq!(full.cost_trace.len(), 5001);
        let early = fit(&inst.training, &inst.ax, &inst.f, &OptimizerConfig { stop_on_plateau: true, ..base }).unwrap();
        assert!(early.cost_trace.len() < 5001);
        assert!(has_plateaued(&early.cost_trace, PLATEAU_WINDOW, PLATEAU_RTOL));
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let r = FitResult { p: DVector::zeros(1), w: DVector::zeros(1), w_max: 1.0, cost_trace: vec![2.0, 1.5] };
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,cost\n0,2\n1,1.5\n");
    }

    #[test]
    fn threshold_examples() {
        let inst = instance(6, 1, 9);
        let zero_f = FilterSpec::new(DVector::zeros(3)).unwrap();
        assert_eq!(convexity_threshold(&inst.w, &inst.ax, &zero_f, 1.0).unwrap(), 0.0);
        let c = inst.ax.apply(&inst.f).unwrap();
        let max_c2 = c.iter().map(|v| v * v).fold(0.0, f64::max);
        assert_eq!(convexity_threshold(&DVector::zeros(6), &inst.ax, &inst.f, 1.0).unwrap(), max_c2);
        assert_eq!(uniform_convexity_threshold(&inst.ax, &inst.f, 1.0).unwrap(), max_c2);
    }

    #[test]
    fn hessian_examples() {
        let inst = instance(6, 1, 10);
        let h = hessian_p(&inst.p, &DVector::zeros(6), &inst.ax, &inst.f, 0.7).unwrap();
        assert_eq!(h, DMatrix::identity(6, 6) * 1.4);

        let ax = ShiftedSignalMatrix::from_columns(DMatrix::from_element(1, 2, 0.8));
        let f = FilterSpec::new(DVector::from_vec(vec![1.5, -0.5])).unwrap();
        let h = hessian_p(&DVector::from_element(1, 0.3), &DVector::from_element(1, 0.9), &ax, &f, 0.25).unwrap();
        assert!((h[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hessian_matches_second_differences() {
        for seed in 0..10 {
            let inst = instance(8, 1, 100 + seed);
            let c = cfg(0.6, 0.0, Norm::L2, Norm::L2);
            let obj = Objective::new(&inst.training, &inst.ax, &inst.f, &c).unwrap();
            let h = 1e-4;
            let n = 8;
            let mut fd = DMatrix::zeros(n, n);
            for i in 0..n {
                let mut pp = inst.p.clone();
                pp[i] += h;
                let mut pm = inst.p.clone();
                pm[i] -= h;
                let col = (obj.grad_p(&pp, &inst.w).unwrap() - obj.grad_p(&pm, &inst.w).unwrap()) / (2.0 * h);
                fd.set_column(i, &col);
            }
            let exact = hessian_p(&inst.p, &inst.w, &inst.ax, &inst.f, 0.6).unwrap();
            assert!((&fd - &exact).amax() <= 1e-3 * exact.amax());
        }
    }

    #[test]
    fn scaled_hessian_matches_multi_sample_cost() {
        let inst = instance(7, 9, 11);
        let c = cfg(0.4, 0.0, Norm::L2, Norm::L2);
        let obj = Objective::new(&inst.training, &inst.ax, &inst.f, &c).unwrap();
        let h = 1e-4;
        let exact = cost_hessian_p(&inst.p, &inst.w, &inst.ax, &inst.f, 0.4, 9).unwrap();
        for i in 0..7 {
            let mut pp = inst.p.clone();
            pp[i] += h;
            let mut pm = inst.p.clone();
            pm[i] -= h;
            let col = (obj.grad_p(&pp, &inst.w).unwrap() - obj.grad_p(&pm, &inst.w).unwrap()) / (2.0 * h);
            assert!((col - exact.column(i)).amax() <= 1e-6 * exact.amax());
        }
    }

    #[test]
    fn safe_threshold_gives_psd_hessian() {
        for seed in 0..100 {
            let inst = instance(1 + (seed as usize % 30), 1, 200 + seed);
            let mu = safe_convexity_threshold(&inst.w, &inst.ax, &inst.f).unwrap();
            let h = hessian_p(&inst.p, &inst.w, &inst.ax, &inst.f, mu).unwrap();
            let min = SymmetricEigen::new(h).eigenvalues.min();
            assert!(min >= -1e-8, "seed {seed}: {min}");
            let uniform = uniform_convexity_threshold(&inst.ax, &inst.f, 1.0).unwrap();
            assert!(uniform >= mu);
        }
    }

    #[test]
    fn gap_threshold_can_fail() {
        // v = w∘c = (1, 1): threshold 1 - 2 < 0 clamps to 0, Hessian has eigenvalue -2.
        let ax = ShiftedSignalMatrix::from_columns(DMatrix::from_element(2, 1, 1.0));
        let f = FilterSpec::new(DVector::from_vec(vec![1.0])).unwrap();
        let w = DVector::from_element(2, 1.0);
        let mu = convexity_threshold(&w, &ax, &f, 1.0).unwrap();
        assert_eq!(mu, 0.0);
        let h = hessian_p(&DVector::zeros(2), &w, &ax, &f, mu).unwrap();
        let min = SymmetricEigen::new(h).eigenvalues.min();
        assert!((min + 2.0).abs() < 1e-12);
    }

    #[test]
    fn cost_is_convex_in_w() {
        for seed in 0..20 {
            let inst = instance(6, 4, 300 + seed);
            let c = cfg(0.5, 0.5, Norm::L2, Norm::L2);
            let obj = Objective::new(&inst.training, &inst.ax, &inst.f, &c).unwrap();
            let h = 1e-4;
            let mut fd = DMatrix::zeros(6, 6);
            for i in 0..6 {
                let mut wp = inst.w.clone();
                wp[i] += h;
                let mut wm = inst.w.clone();
                wm[i] -= h;
                let col = (obj.grad_w(&inst.p, &wp).unwrap() - obj.grad_w(&inst.p, &wm).unwrap()) / (2.0 * h);
                fd.set_column(i, &col);
            }
            let sym = (&fd + fd.transpose()) * 0.5;
            let min = SymmetricEigen::new(sym).eigenvalues.min();
            assert!(min >= -1e-6, "seed {seed}: {min}");
        }
    }

    #[test]
    fn training_csv_round_trip() {
        let inst = instance(5, 4, 12);
        let mut buf = Vec::new();
        write_training_csv(&inst.training, &mut buf).unwrap();
        assert_eq!(read_training_csv(&buf[..]).unwrap(), inst.training);
        let bad = "x_plus,a_plus,b_plus\n1,0.5 0,0 0\n";
        assert!(matches!(read_training_csv(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn norm_exponents() {
        assert_eq!(Norm::from_exponent(1).unwrap(), Norm::L1);
        assert_eq!(Norm::from_exponent(2).unwrap().exponent(), 2);
        assert!(Norm::from_exponent(3).is_err());
    }
}
