use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::SyntheticConfig;
use super::derive_seed;
use super::synthetic::{build_graph, build_instance};
use crate::error::{Error, Result};
use crate::optimizer::{fit_objective, uniform_convexity_threshold, FitResult, Objective, OptimizerConfig, Variables};

/// Restarts sharing one `mu_p`.
#[derive(Debug, Clone)]
pub struct Regime {
    pub name: &'static str,
    pub mu_p: f64,
    pub fits: Vec<FitResult>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// `w_max^2 max_i c_i^2`, the floor `mu_p_convex` was checked against.
    pub threshold: f64,
    pub nonconvex: Regime,
    pub convex: Regime,
}

impl ConvergenceReport {
    pub fn regimes(&self) -> [&Regime; 2] {
        [&self.nonconvex, &self.convex]
    }

    /// One `iteration,cost` file per regime and restart; returns the paths.
    pub fn write_traces(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::new();
        for regime in self.regimes() {
            for (k, fit) in regime.fits.iter().enumerate() {
                let path = dir.join(format!("trace_{}_{k:03}.csv", regime.name));
                fit.write_trace_csv(BufWriter::new(File::create(&path)?))?;
                paths.push(path);
            }
        }
        Ok(paths)
    }

    pub fn write_final_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "regime,restart,mu_p,initial_cost,final_cost")?;
        for regime in self.regimes() {
            for (k, fit) in regime.fits.iter().enumerate() {
                writeln!(
                    out,
                    "{},{k},{},{},{}",
                    regime.name,
                    regime.mu_p,
                    fit.initial_cost(),
                    fit.final_cost()
                )?;
            }
        }
        Ok(())
    }
}

/// Random restarts of the joint descent at the configured `mu_p` and at
/// `mu_p_convex`, on the first realization and split of `cfg`. Restart `k`
/// starts from the same point in both regimes.
pub fn run_convergence_study(cfg: &SyntheticConfig, restarts: usize, mu_p_convex: f64) -> Result<ConvergenceReport> {
    cfg.validate()?;
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be positive".into()));
    }
    let g = build_graph(cfg)?;
    let inst = build_instance(cfg, &g, 0)?;
    let threshold = uniform_convexity_threshold(&inst.ax, &inst.filter, cfg.training.w_max)?;
    if !(mu_p_convex >= threshold) {
        return Err(Error::InvalidArgument(format!(
            "mu_p_convex = {mu_p_convex} is below the convexity floor {threshold}"
        )));
    }
    let mut order: Vec<usize> = (0..inst.samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[3, 0, 0])));
    let train: Vec<_> = order[..cfg.data.train].iter().map(|&i| inst.samples[i].clone()).collect();

    let run = |mu_p: f64| -> Result<Vec<FitResult>> {
        let base = cfg.training.optimizer(0)?;
        let objective = Objective::new(&train, &inst.ax, &inst.filter, &OptimizerConfig { mu_p, ..base.clone() })?;
        (0..restarts)
            .into_par_iter()
            .map(|k| {
                let opt = OptimizerConfig {
                    mu_p,
                    seed: derive_seed(cfg.seed, &[6, k as u64]),
                    ..base.clone()
                };
                fit_objective(&objective, &opt, &Variables::Joint)
            })
            .collect()
    };
    Ok(ConvergenceReport {
        threshold,
        nonconvex: Regime {
            name: "nonconvex",
            mu_p: cfg.training.mu_p,
            fits: run(cfg.training.mu_p)?,
        },
        convex: Regime {
            name: "convex",
            mu_p: mu_p_convex,
            fits: run(mu_p_convex)?,
        },
    })
}
