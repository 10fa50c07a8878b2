//! TOML experiment configs. Every field has a default, so a config file
//! only needs the keys it changes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{Norm, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFamily {
    Er,
    Ba,
}

/// Attachment rule generating the synthetic incoming nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrueModel {
    Uniform,
    Preferential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub family: GraphFamily,
    pub nodes: usize,
    /// Edge probability for `er`.
    pub edge_probability: f64,
    /// Edges per new node for `ba`.
    pub attach_edges: usize,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            family: GraphFamily::Er,
            nodes: 100,
            edge_probability: 0.1,
            attach_edges: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    /// Number of lowest-frequency Laplacian eigenvectors mixed.
    pub eigenvectors: usize,
}

impl Default for SignalSection {
    fn default() -> Self {
        Self { eigenvectors: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub alpha: f64,
    pub order: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self { alpha: 0.3, order: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticData {
    pub samples: usize,
    pub train: usize,
    /// Defaults to uniform on `er` and preferential on `ba`.
    pub true_model: Option<TrueModel>,
    /// Standard deviation of additive Gaussian noise on `x_+`.
    pub noise_std: f64,
}

impl Default for SyntheticData {
    fn default() -> Self {
        Self {
            samples: 1000,
            train: 800,
            true_model: None,
            noise_std: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub mu_p: f64,
    pub mu_w: f64,
    pub q_p: u32,
    pub q_w: u32,
    pub lambda_p: f64,
    pub lambda_w: f64,
    pub iterations: usize,
    pub w_max: f64,
    /// Pick `(mu_p, mu_w)` by k-fold cross-validation instead of using the
    /// fixed values.
    pub cross_validate: bool,
    pub folds: usize,
    pub grid_points: usize,
    pub grid_min: f64,
    pub grid_max: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            mu_p: 1.0,
            mu_w: 1.0,
            q_p: 2,
            q_w: 2,
            lambda_p: 1e-5,
            lambda_w: 1e-5,
            iterations: 2000,
            w_max: 1.0,
            cross_validate: false,
            folds: 10,
            grid_points: 6,
            grid_min: 1e-5,
            grid_max: 1.0,
        }
    }
}

impl TrainingSection {
    pub fn optimizer(&self, seed: u64) -> Result<OptimizerConfig> {
        let cfg = OptimizerConfig {
            mu_p: self.mu_p,
            mu_w: self.mu_w,
            q_p: Norm::from_exponent(self.q_p)?,
            q_w: Norm::from_exponent(self.q_w)?,
            lambda_p: self.lambda_p,
            lambda_w: self.lambda_w,
            iterations: self.iterations,
            w_max: self.w_max,
            seed,
            stop_on_plateau: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialsSection {
    /// Independent signal and training-set draws on the same graph.
    pub realizations: usize,
    /// Train/test resplits per realization.
    pub splits: usize,
}

impl Default for TrialsSection {
    fn default() -> Self {
        Self {
            realizations: 10,
            splits: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub graph: GraphSection,
    pub signal: SignalSection,
    pub filter: FilterSection,
    pub data: SyntheticData,
    pub training: TrainingSection,
    pub trials: TrialsSection,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self::erdos_renyi()
    }
}

impl SyntheticConfig {
    /// 100-node ER graph, uniform true attachment, `mu_p = mu_w = 1`.
    pub fn erdos_renyi() -> Self {
        Self {
            seed: 1,
            graph: GraphSection::default(),
            signal: SignalSection::default(),
            filter: FilterSection::default(),
            data: SyntheticData::default(),
            training: TrainingSection::default(),
            trials: TrialsSection::default(),
        }
    }

    /// 100-node BA graph (2 edges per new node), preferential true
    /// attachment, `mu_p = 1`, `mu_w = 0.1`.
    pub fn barabasi_albert() -> Self {
        let mut cfg = Self::erdos_renyi();
        cfg.graph.family = GraphFamily::Ba;
        cfg.training.mu_w = 0.1;
        cfg
    }

    pub fn true_model(&self) -> TrueModel {
        self.data.true_model.unwrap_or(match self.graph.family {
            GraphFamily::Er => TrueModel::Uniform,
            GraphFamily::Ba => TrueModel::Preferential,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.graph.nodes < 2 {
            return bad(format!("graph.nodes = {} (need >= 2)", self.graph.nodes));
        }
        if self.signal.eigenvectors == 0 || self.signal.eigenvectors > self.graph.nodes {
            return bad(format!("signal.eigenvectors = {} outside 1..={}", self.signal.eigenvectors, self.graph.nodes));
        }
        if self.filter.order == 0 || !self.filter.alpha.is_finite() {
            return bad("filter needs order >= 1 and finite alpha".into());
        }
        if self.data.train == 0 || self.data.train >= self.data.samples {
            return bad(format!("data.train = {} must be in 1..{}", self.data.train, self.data.samples));
        }
        if !(self.data.noise_std >= 0.0 && self.data.noise_std.is_finite()) {
            return bad(format!("data.noise_std = {}", self.data.noise_std));
        }
        if self.trials.realizations == 0 || self.trials.splits == 0 {
            return bad("trial counts must be positive".into());
        }
        let t = &self.training;
        if t.cross_validate && (t.folds < 2 || t.grid_points == 0 || !(t.grid_min > 0.0 && t.grid_max >= t.grid_min)) {
            return bad("cross-validation needs folds >= 2 and a positive grid range".into());
        }
        t.optimizer(self.seed).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColdStartData {
    /// MovieLens-100K `u.data`.
    pub path: PathBuf,
    pub min_ratings: usize,
    pub core_items: usize,
    pub train_items: usize,
    pub neighbours: usize,
}

impl Default for ColdStartData {
    fn default() -> Self {
        Self {
            path: PathBuf::from("data/ml-100k/u.data"),
            min_ratings: 10,
            core_items: 50,
            train_items: 700,
            neighbours: 35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColdStartEvaluation {
    /// Attachment draws averaged per prediction.
    pub draws: usize,
    /// Users sampled per interaction bucket; 0 evaluates every user.
    pub users_per_bucket: usize,
    /// Users with fewer interactions than this are "low".
    pub low_below: usize,
    /// Users with more interactions than this are "high".
    pub high_above: usize,
}

impl Default for ColdStartEvaluation {
    fn default() -> Self {
        Self {
            draws: 100,
            users_per_bucket: 0,
            low_below: 100,
            high_above: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColdStartConfig {
    pub seed: u64,
    pub data: ColdStartData,
    pub filter: ColdStartFilter,
    pub training: TrainingSection,
    pub evaluation: ColdStartEvaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColdStartFilter {
    pub order: usize,
    pub ridge: f64,
}

impl Default for ColdStartFilter {
    fn default() -> Self {
        Self { order: 5, ridge: 1e-6 }
    }
}

impl Default for ColdStartConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            data: ColdStartData::default(),
            filter: ColdStartFilter::default(),
            training: TrainingSection {
                mu_p: 1e-2,
                mu_w: 1e-2,
                q_p: 1,
                q_w: 2,
                lambda_p: 1e-4,
                lambda_w: 1e-4,
                ..TrainingSection::default()
            },
            evaluation: ColdStartEvaluation::default(),
        }
    }
}

impl ColdStartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.filter.order == 0 || !(self.filter.ridge >= 0.0) {
            return Err(Error::Config("filter needs order >= 1 and ridge >= 0".into()));
        }
        if self.evaluation.draws == 0 {
            return Err(Error::Config("evaluation.draws must be positive".into()));
        }
        if self.evaluation.low_below > self.evaluation.high_above + 1 {
            return Err(Error::Config("bucket bounds overlap".into()));
        }
        self.training
            .optimizer(self.seed)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub(crate) fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

macro_rules! toml_io {
    ($t:ty) => {
        impl $t {
            pub fn from_toml(text: &str) -> Result<Self> {
                let cfg: Self = parse_toml(text)?;
                cfg.validate()?;
                Ok(cfg)
            }

            pub fn load(path: impl AsRef<Path>) -> Result<Self> {
                Self::from_toml(&std::fs::read_to_string(path)?)
            }

            pub fn to_toml(&self) -> Result<String> {
                to_toml(self)
            }
        }
    };
}

toml_io!(SyntheticConfig);
toml_io!(ColdStartConfig);
