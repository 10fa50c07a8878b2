//! Reproducible experiment harnesses: synthetic interpolation benchmarks,
//! convergence traces, hyperparameter cross-validation and cold-start
//! rating prediction.
//!
//! Every harness is a pure function of its config. Parallel work items get
//! seeds derived from the config seed and their position, and results are
//! gathered in a fixed order, so reports are identical across thread
//! counts.

mod coldstart;
mod config;
mod convergence;
mod cv;
mod synthetic;

pub use coldstart::{run_cold_start, run_cold_start_on, Bucket, ColdStartReport, ColdStartRow, ColdStartSummary, RatingMethod};
pub use config::{
    ColdStartConfig, ColdStartData, ColdStartEvaluation, ColdStartFilter, FilterSection, GraphFamily, GraphSection,
    SignalSection, SyntheticConfig, SyntheticData, TrainingSection, TrialsSection, TrueModel,
};
pub use convergence::{run_convergence_study, ConvergenceReport, Regime};
pub use cv::{cross_validate, default_grid, log_grid};
pub use synthetic::{
    build_instance, generate_synthetic_training, run_synthetic, Method, MethodSummary, SyntheticInstance,
    SyntheticReport, TrialRow,
};

/// Mix a base seed with a path of indices (splitmix64 finalizer per step).
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut z = base;
    for &p in path {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Median by sorting; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
