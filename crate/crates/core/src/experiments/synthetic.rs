use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::{GraphFamily, SyntheticConfig, TrueModel};
use super::cv::{cross_validate, log_grid};
use super::{derive_seed, mean_std};
use crate::attachment::AttachmentModel;
use crate::baselines::{preferential_attachment, training_mean, uniform_attachment};
use crate::error::{check_len, Result};
use crate::filter::{build_shifted_matrix, geometric_coefficients, FilterSpec, ShiftedSignalMatrix};
use crate::graph::{barabasi_albert, erdos_renyi, smooth_signal, Graph};
use crate::optimizer::{closed_form_mse, fit_objective, Objective, TrainingSample, Variables};

/// Draw `count` incoming nodes from Bernoulli(`true_p`) with unit weights;
/// each target is the noiseless filter output `a^T A_x h`, plus optional
/// Gaussian noise.
pub fn generate_synthetic_training(
    ax: &ShiftedSignalMatrix,
    true_p: &DVector<f64>,
    f: &FilterSpec,
    count: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Vec<TrainingSample>> {
    check_len("true attachment", ax.node_count(), true_p.len())?;
    let model = AttachmentModel::with_unit_weights(true_p.clone())?;
    let c = ax.apply(f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let s = model.sample_with(&mut rng);
            let mut x = s.a_plus.dot(&c);
            if noise_std > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                x += noise_std * z;
            }
            TrainingSample::from_attachment(x, &s)
        })
        .collect()
}

/// Methods scored in the synthetic benchmark, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Proposed,
    Preferential,
    Uniform,
    TrainingMean,
    OnlyP,
    OnlyW,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Proposed,
        Method::Preferential,
        Method::Uniform,
        Method::TrainingMean,
        Method::OnlyP,
        Method::OnlyW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Preferential => "preferential",
            Method::Uniform => "uniform",
            Method::TrainingMean => "training_mean",
            Method::OnlyP => "only_p",
            Method::OnlyW => "only_w",
        }
    }
}

/// One realization: a signal on the fixed graph and its incoming nodes.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub ax: ShiftedSignalMatrix,
    pub filter: FilterSpec,
    pub samples: Vec<TrainingSample>,
}

pub(crate) fn build_graph(cfg: &SyntheticConfig) -> Result<Graph> {
    let seed = derive_seed(cfg.seed, &[0]);
    match cfg.graph.family {
        GraphFamily::Er => erdos_renyi(cfg.graph.nodes, cfg.graph.edge_probability, seed),
        GraphFamily::Ba => barabasi_albert(cfg.graph.nodes, cfg.graph.attach_edges, seed),
    }
}

pub(crate) fn true_attachment(cfg: &SyntheticConfig, g: &Graph) -> Result<DVector<f64>> {
    match cfg.true_model() {
        TrueModel::Uniform => uniform_attachment(g.node_count()),
        TrueModel::Preferential => preferential_attachment(g),
    }
}

pub fn build_instance(cfg: &SyntheticConfig, g: &Graph, realization: usize) -> Result<SyntheticInstance> {
    let r = realization as u64;
    let x = smooth_signal(g, cfg.signal.eigenvectors, derive_seed(cfg.seed, &[1, r]))?;
    let ax = build_shifted_matrix(g, &x, cfg.filter.order)?;
    let filter = geometric_coefficients(cfg.filter.alpha, cfg.filter.order)?;
    let samples = generate_synthetic_training(
        &ax,
        &true_attachment(cfg, g)?,
        &filter,
        cfg.data.samples,
        cfg.data.noise_std,
        derive_seed(cfg.seed, &[2, r]),
    )?;
    Ok(SyntheticInstance { ax, filter, samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub realization: usize,
    pub split: usize,
    pub method: Method,
    pub mu_p: f64,
    pub mu_w: f64,
    /// Mean closed-form MSE over the test incoming nodes.
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticReport {
    pub config: SyntheticConfig,
    pub rows: Vec<TrialRow>,
    pub summary: Vec<MethodSummary>,
}

impl SyntheticReport {
    pub fn method(&self, m: Method) -> &MethodSummary {
        self.summary.iter().find(|s| s.method == m).expect("every method is summarized")
    }

    pub fn write_trials_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "realization,split,method,mu_p,mu_w,mse")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{}", r.realization, r.split, r.method.name(), r.mu_p, r.mu_w, r.mse)?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "method,mean,std,count")?;
        for s in &self.summary {
            writeln!(out, "{},{},{},{}", s.method.name(), s.mean, s.std, s.count)?;
        }
        Ok(())
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<15} {:>12} {:>12} {:>6}", "method", "mse", "std", "n");
        for m in &self.summary {
            let _ = writeln!(s, "{:<15} {:>12.6} {:>12.6} {:>6}", m.method.name(), m.mean, m.std, m.count);
        }
        s
    }
}

fn test_mse(model: &AttachmentModel, inst: &SyntheticInstance, test: &[TrainingSample]) -> Result<f64> {
    let mut total = 0.0;
    for s in test {
        total += closed_form_mse(model, &inst.ax, &inst.filter, s.x_plus)?;
    }
    Ok(total / test.len() as f64)
}

fn run_trial(
    cfg: &SyntheticConfig,
    g: &Graph,
    inst: &SyntheticInstance,
    realization: usize,
    split: usize,
) -> Result<Vec<TrialRow>> {
    let (r, s) = (realization as u64, split as u64);
    let mut order: Vec<usize> = (0..inst.samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[3, r, s])));
    let train: Vec<TrainingSample> = order[..cfg.data.train].iter().map(|&i| inst.samples[i].clone()).collect();
    let test: Vec<TrainingSample> = order[cfg.data.train..].iter().map(|&i| inst.samples[i].clone()).collect();

    let mut opt = cfg.training.optimizer(derive_seed(cfg.seed, &[5, r, s]))?;
    if cfg.training.cross_validate {
        let axis = log_grid(cfg.training.grid_points, cfg.training.grid_min, cfg.training.grid_max)?;
        let grid: Vec<(f64, f64)> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect();
        let (mu_p, mu_w) = cross_validate(
            &train,
            &inst.ax,
            &inst.filter,
            &opt,
            &grid,
            cfg.training.folds,
            derive_seed(cfg.seed, &[4, r, s]),
        )?;
        opt.mu_p = mu_p;
        opt.mu_w = mu_w;
    }

    let objective = Objective::new(&train, &inst.ax, &inst.filter, &opt)?;
    let (pg, wg) = training_mean(&train)?;
    let n = g.node_count();
    let ones = DVector::from_element(n, 1.0);
    let w_max = opt.w_max;

    let mut rows = Vec::with_capacity(Method::ALL.len());
    for method in Method::ALL {
        let model = match method {
            Method::Proposed => fit_objective(&objective, &opt, &Variables::Joint)?.model()?,
            Method::Preferential => AttachmentModel::new(preferential_attachment(g)?, ones.clone(), w_max.max(1.0))?,
            Method::Uniform => AttachmentModel::new(uniform_attachment(n)?, ones.clone(), w_max.max(1.0))?,
            Method::TrainingMean => AttachmentModel::new(pg.clone(), wg.clone(), w_max.max(wg.max()))?,
            Method::OnlyP => fit_objective(&objective, &opt, &Variables::OnlyP { w: wg.clone() })?.model()?,
            Method::OnlyW => fit_objective(&objective, &opt, &Variables::OnlyW { p: pg.clone() })?.model()?,
        };
        rows.push(TrialRow {
            realization,
            split,
            method,
            mu_p: opt.mu_p,
            mu_w: opt.mu_w,
            mse: test_mse(&model, inst, &test)?,
        });
    }
    Ok(rows)
}

/// Fit and score every method over `realizations x splits` trials.
pub fn run_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticReport> {
    cfg.validate()?;
    let g = build_graph(cfg)?;
    let instances: Vec<SyntheticInstance> = (0..cfg.trials.realizations)
        .into_par_iter()
        .map(|r| build_instance(cfg, &g, r))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.trials.realizations)
        .flat_map(|r| (0..cfg.trials.splits).map(move |s| (r, s)))
        .collect();
    let per_job: Vec<Vec<TrialRow>> = jobs
        .par_iter()
        .map(|&(r, s)| run_trial(cfg, &g, &instances[r], r, s))
        .collect::<Result<_>>()?;
    let rows: Vec<TrialRow> = per_job.into_iter().flatten().collect();
    let summary = Method::ALL
        .iter()
        .map(|&m| {
            let v: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.mse).collect();
            let (mean, std) = mean_std(&v);
            MethodSummary { method: m, mean, std, count: v.len() }
        })
        .collect();
    Ok(SyntheticReport {
        config: cfg.clone(),
        rows,
        summary,
    })
}
