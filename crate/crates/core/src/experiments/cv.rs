use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::derive_seed;
use crate::error::{Error, Result};
use crate::filter::{FilterSpec, ShiftedSignalMatrix};
use crate::optimizer::{closed_form_mse, fit_objective, Objective, OptimizerConfig, TrainingSample, Variables};

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(points: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if points == 0 || !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("log grid of {points} points on [{lo}, {hi}]")));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..points)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (points - 1) as f64))
        .collect())
}

/// All pairs from a 6-point log grid on `[1e-5, 1]`.
pub fn default_grid() -> Vec<(f64, f64)> {
    let axis = log_grid(6, 1e-5, 1.0).expect("valid constant grid");
    axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect()
}

/// k-fold grid search over `(mu_p, mu_w)` by mean validation MSE.
///
/// Exact ties go to the larger `mu_p`, then the larger `mu_w`.
pub fn cross_validate(
    training: &[TrainingSample],
    ax: &ShiftedSignalMatrix,
    f: &FilterSpec,
    base: &OptimizerConfig,
    grid: &[(f64, f64)],
    folds: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    if folds < 2 || folds > training.len() {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds for {} training samples",
            training.len()
        )));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let mut order: Vec<usize> = (0..training.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: Vec<usize> = {
        let mut v = vec![0; training.len()];
        for (pos, &i) in order.iter().enumerate() {
            v[i] = pos * folds / training.len();
        }
        v
    };
    let splits: Vec<(Vec<TrainingSample>, Vec<TrainingSample>)> = (0..folds)
        .map(|k| {
            let (mut fit_on, mut held) = (Vec::new(), Vec::new());
            for (i, s) in training.iter().enumerate() {
                if fold_of[i] == k {
                    held.push(s.clone());
                } else {
                    fit_on.push(s.clone());
                }
            }
            (fit_on, held)
        })
        .collect();

    let scores: Vec<f64> = grid
        .par_iter()
        .map(|&(mu_p, mu_w)| -> Result<f64> {
            let mut total = 0.0;
            for (k, (fit_on, held)) in splits.iter().enumerate() {
                let cfg = OptimizerConfig {
                    mu_p,
                    mu_w,
                    seed: derive_seed(base.seed, &[k as u64]),
                    ..base.clone()
                };
                let objective = Objective::new(fit_on, ax, f, &cfg)?;
                let model = fit_objective(&objective, &cfg, &Variables::Joint)?.model()?;
                let mut mse = 0.0;
                for s in held {
                    mse += closed_form_mse(&model, ax, f, s.x_plus)?;
                }
                total += mse / held.len() as f64;
            }
            Ok(total / folds as f64)
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for k in 1..grid.len() {
        let better = scores[k] < scores[best]
            || (scores[k] == scores[best] && (grid[k].0, grid[k].1) > (grid[best].0, grid[best].1));
        if better {
            best = k;
        }
    }
    Ok(grid[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::generate_synthetic_training;
    use crate::filter::{build_shifted_matrix, geometric_coefficients};
    use crate::graph::{erdos_renyi, smooth_signal};
    use crate::optimizer::Norm;
    use nalgebra::DVector;

    fn setup(seed: u64, count: usize) -> (ShiftedSignalMatrix, FilterSpec, Vec<TrainingSample>) {
        let g = erdos_renyi(20, 0.25, seed).unwrap();
        let x = smooth_signal(&g, 8, seed + 100).unwrap();
        let ax = build_shifted_matrix(&g, &x, 3).unwrap();
        let f = geometric_coefficients(0.3, 3).unwrap();
        let p = DVector::from_fn(20, |i, _| 0.1 + 0.8 * (i as f64 / 19.0));
        let t = generate_synthetic_training(&ax, &p, &f, count, 0.0, seed + 200).unwrap();
        (ax, f, t)
    }

    fn base() -> OptimizerConfig {
        OptimizerConfig {
            q_p: Norm::L2,
            q_w: Norm::L2,
            lambda_p: 1e-3,
            lambda_w: 1e-3,
            iterations: 500,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn grid_shape() {
        let g = log_grid(6, 1e-5, 1.0).unwrap();
        assert_eq!(g.len(), 6);
        for (k, v) in g.iter().enumerate() {
            assert!((v.log10() - (k as f64 - 5.0)).abs() < 1e-12);
        }
        assert_eq!(default_grid().len(), 36);
        assert!(log_grid(0, 1e-5, 1.0).is_err());
        assert!(log_grid(3, 0.0, 1.0).is_err());
    }

    #[test]
    fn single_point_and_fold_checks() {
        let (ax, f, t) = setup(1, 20);
        assert_eq!(cross_validate(&t, &ax, &f, &base(), &[(0.3, 0.4)], 5, 0).unwrap(), (0.3, 0.4));
        assert!(cross_validate(&t, &ax, &f, &base(), &[(0.3, 0.4)], 21, 0).is_err());
        assert!(cross_validate(&t, &ax, &f, &base(), &[(0.3, 0.4)], 1, 0).is_err());
        assert!(cross_validate(&t, &ax, &f, &base(), &[], 5, 0).is_err());
    }

    #[test]
    fn duplicate_points_break_ties_deterministically() {
        let (ax, f, t) = setup(2, 30);
        let grid = [(0.1, 0.1), (0.1, 0.1), (0.1, 0.1)];
        let a = cross_validate(&t, &ax, &f, &base(), &grid, 3, 9).unwrap();
        assert_eq!(a, (0.1, 0.1));

        // A zero filter makes every score equal: the strongest pair wins.
        let zero = FilterSpec::new(DVector::zeros(3)).unwrap();
        let grid = [(1e-3, 1.0), (1.0, 1e-3), (1.0, 1e-2), (1e-2, 1e-2)];
        assert_eq!(cross_validate(&t, &ax, &zero, &base(), &grid, 3, 9).unwrap(), (1.0, 1e-2));
    }

    #[test]
    fn selects_the_unbiased_pair() {
        // Targets are noiseless filter outputs, so the regularizers only
        // bias the fit: the weakest pair should win almost always.
        let grid = [(1e-5, 1e-5), (1e-5, 3.0), (3.0, 1e-5), (3.0, 3.0)];
        let mut hits = 0;
        for seed in 0..10 {
            let (ax, f, t) = setup(10 + seed, 60);
            if cross_validate(&t, &ax, &f, &base(), &grid, 5, seed).unwrap() == grid[0] {
                hits += 1;
            }
        }
        assert!(hits >= 8, "weakest pair chosen {hits}/10 times");
    }
}
