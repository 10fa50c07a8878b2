use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ColdStartConfig;
use super::{derive_seed, mean_std, median};
use crate::attachment::{AttachmentModel, AttachmentSample};
use crate::baselines::{preferential_attachment, training_mean, uniform_attachment, user_mean_prediction};
use crate::data::{filter_min_ratings, load_movielens, make_cold_start_split, ItemVectors, RatingsDataset};
use crate::error::Result;
use crate::filter::{build_shifted_matrix, fit_coefficients, FilterObservation, FilterSpec};
use crate::graph::{Graph, GraphSignal};
use crate::optimizer::{fit, TrainingSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bucket {
    Low,
    Medium,
    High,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::Low, Bucket::Medium, Bucket::High];

    pub fn name(self) -> &'static str {
        match self {
            Bucket::Low => "low",
            Bucket::Medium => "medium",
            Bucket::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingMethod {
    Proposed,
    Preferential,
    Uniform,
    TrainingMean,
    UserMean,
}

impl RatingMethod {
    pub const ALL: [RatingMethod; 5] = [
        RatingMethod::Proposed,
        RatingMethod::Preferential,
        RatingMethod::Uniform,
        RatingMethod::TrainingMean,
        RatingMethod::UserMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RatingMethod::Proposed => "proposed",
            RatingMethod::Preferential => "preferential",
            RatingMethod::Uniform => "uniform",
            RatingMethod::TrainingMean => "training_mean",
            RatingMethod::UserMean => "mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColdStartRow {
    /// Raw user id from the ratings file.
    pub user: u32,
    pub bucket: Bucket,
    pub interactions: usize,
    pub method: RatingMethod,
    /// Number of test items the user rated.
    pub test_ratings: usize,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColdStartSummary {
    pub bucket: Bucket,
    pub method: RatingMethod,
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct ColdStartReport {
    pub config: ColdStartConfig,
    pub users: usize,
    pub items: usize,
    pub filter: FilterSpec,
    /// Split manifest text with raw item ids.
    pub split_manifest: String,
    pub rows: Vec<ColdStartRow>,
    pub summary: Vec<ColdStartSummary>,
    pub skipped_no_core: usize,
    pub skipped_no_train: usize,
    pub skipped_no_test: usize,
}

impl ColdStartReport {
    pub fn get(&self, bucket: Bucket, method: RatingMethod) -> &ColdStartSummary {
        self.summary
            .iter()
            .find(|s| s.bucket == bucket && s.method == method)
            .expect("every bucket and method is summarized")
    }

    pub fn write_users_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "user,bucket,interactions,method,test_ratings,mae")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.user,
                r.bucket.name(),
                r.interactions,
                r.method.name(),
                r.test_ratings,
                r.mae
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bucket,method,count,median,mean,std")?;
        for s in &self.summary {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.bucket.name(),
                s.method.name(),
                s.count,
                s.median,
                s.mean,
                s.std
            )?;
        }
        Ok(())
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} users, {} items; skipped users: {} without core ratings, {} without training items, {} without test items",
            self.users, self.items, self.skipped_no_core, self.skipped_no_train, self.skipped_no_test
        );
        let _ = writeln!(s, "{:<8} {:<15} {:>6} {:>8} {:>8} {:>8}", "bucket", "method", "users", "median", "mean", "std");
        for r in &self.summary {
            let _ = writeln!(
                s,
                "{:<8} {:<15} {:>6} {:>8.4} {:>8.4} {:>8.4}",
                r.bucket.name(),
                r.method.name(),
                r.count,
                r.median,
                r.mean,
                r.std
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Core(usize),
    Train(usize),
    Test,
}

enum Outcome {
    Scored(Vec<ColdStartRow>),
    NoCore,
    NoTrain,
    NoTest,
}

struct Pipeline<'a> {
    cfg: &'a ColdStartConfig,
    graph: Graph,
    filter: FilterSpec,
    roles: Vec<Role>,
    train_attachments: Vec<AttachmentSample>,
    preferential: DVector<f64>,
    uniform: DVector<f64>,
}

pub fn run_cold_start(cfg: &ColdStartConfig) -> Result<ColdStartReport> {
    cfg.validate()?;
    let raw = load_movielens(&cfg.data.path)?;
    run_cold_start_on(&raw, cfg)
}

/// The cold-start pipeline on an already loaded dataset.
pub fn run_cold_start_on(raw: &RatingsDataset, cfg: &ColdStartConfig) -> Result<ColdStartReport> {
    cfg.validate()?;
    let d = filter_min_ratings(raw, cfg.data.min_ratings);
    let split = make_cold_start_split(&d, cfg.data.core_items, cfg.data.train_items, derive_seed(cfg.seed, &[10]))?;
    let mut manifest = Vec::new();
    split.write_manifest(&d, &mut manifest)?;

    let vectors = ItemVectors::new(&d);
    let graph = vectors.knn_graph(&split.core_items, cfg.data.neighbours)?;
    let n = split.core_items.len();

    let mut roles = vec![Role::Test; d.item_count()];
    for (pos, &i) in split.core_items.iter().enumerate() {
        roles[i] = Role::Core(pos);
    }
    for (idx, &i) in split.train_items.iter().enumerate() {
        roles[i] = Role::Train(idx);
    }

    let by_user = d.by_user();
    let core_signal = |u: usize| -> DVector<f64> {
        let mut x = DVector::zeros(n);
        for &(item, r) in &by_user[u] {
            if let Role::Core(pos) = roles[item] {
                x[pos] = r;
            }
        }
        x
    };

    // One global filter, fit by predicting each observed core rating from
    // the user's other core ratings.
    let mut observations = Vec::new();
    for u in 0..d.user_count() {
        let x = core_signal(u);
        for i in 0..n {
            if x[i] != 0.0 {
                let mut held = x.clone();
                held[i] = 0.0;
                observations.push(FilterObservation {
                    signal: held,
                    observed: vec![i],
                    targets: vec![x[i]],
                });
            }
        }
    }
    let filter = fit_coefficients(&graph, &observations, cfg.filter.order, cfg.filter.ridge)?;
    log::info!("cold-start filter coefficients: {:?}", filter.coefficients().as_slice());

    let train_attachments: Vec<AttachmentSample> = split
        .train_items
        .par_iter()
        .map(|&item| vectors.attachment(item, &split.core_items, cfg.data.neighbours))
        .collect::<Result<_>>()?;

    let pipeline = Pipeline {
        cfg,
        preferential: preferential_attachment(&graph)?,
        uniform: uniform_attachment(n)?,
        graph,
        filter,
        roles: roles.clone(),
        train_attachments,
    };

    let bucket_of = |count: usize| {
        if count < cfg.evaluation.low_below {
            Bucket::Low
        } else if count > cfg.evaluation.high_above {
            Bucket::High
        } else {
            Bucket::Medium
        }
    };
    let mut selected = Vec::new();
    for (b, bucket) in Bucket::ALL.iter().enumerate() {
        let mut members: Vec<usize> = (0..d.user_count()).filter(|&u| bucket_of(by_user[u].len()) == *bucket).collect();
        let cap = cfg.evaluation.users_per_bucket;
        if cap > 0 && members.len() > cap {
            members.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[11, b as u64])));
            members.truncate(cap);
            members.sort_unstable();
        }
        selected.extend(members.into_iter().map(|u| (u, *bucket)));
    }

    let outcomes: Vec<Outcome> = selected
        .par_iter()
        .map(|&(u, bucket)| pipeline.evaluate_user(&d, &by_user[u], u, bucket, core_signal(u)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let (mut no_core, mut no_train, mut no_test) = (0, 0, 0);
    for o in outcomes {
        match o {
            Outcome::Scored(r) => rows.extend(r),
            Outcome::NoCore => no_core += 1,
            Outcome::NoTrain => no_train += 1,
            Outcome::NoTest => no_test += 1,
        }
    }
    let mut summary = Vec::new();
    for bucket in Bucket::ALL {
        for method in RatingMethod::ALL {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.bucket == bucket && r.method == method)
                .map(|r| r.mae)
                .collect();
            let (mean, std) = mean_std(&v);
            summary.push(ColdStartSummary {
                bucket,
                method,
                count: v.len(),
                median: median(&v),
                mean,
                std,
            });
        }
    }
    Ok(ColdStartReport {
        config: cfg.clone(),
        users: d.user_count(),
        items: d.item_count(),
        filter: pipeline.filter,
        split_manifest: String::from_utf8(manifest).expect("manifest is ASCII"),
        rows,
        summary,
        skipped_no_core: no_core,
        skipped_no_train: no_train,
        skipped_no_test: no_test,
    })
}

impl Pipeline<'_> {
    fn evaluate_user(
        &self,
        d: &RatingsDataset,
        ratings: &[(usize, f64)],
        u: usize,
        bucket: Bucket,
        x: DVector<f64>,
    ) -> Result<Outcome> {
        if x.amax() == 0.0 {
            return Ok(Outcome::NoCore);
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut known: Vec<f64> = x.iter().copied().filter(|&v| v != 0.0).collect();
        for &(item, r) in ratings {
            match self.roles[item] {
                Role::Train(idx) => {
                    train.push(TrainingSample::from_attachment(r, &self.train_attachments[idx])?);
                    known.push(r);
                }
                Role::Test => test.push(r),
                Role::Core(_) => {}
            }
        }
        if train.is_empty() {
            return Ok(Outcome::NoTrain);
        }
        if test.is_empty() {
            return Ok(Outcome::NoTest);
        }

        let ax = build_shifted_matrix(&self.graph, &GraphSignal::new(x), self.filter.order())?;
        let c = ax.apply(&self.filter)?;
        let opt = self.cfg.training.optimizer(derive_seed(self.cfg.seed, &[12, u as u64]))?;
        let learned = fit(&train, &ax, &self.filter, &opt)?;
        let (pg, wg) = training_mean(&train)?;
        let n = c.len();
        let ones = DVector::from_element(n, 1.0);
        let w_max = opt.w_max.max(1.0);

        let mut rows = Vec::with_capacity(RatingMethod::ALL.len());
        for (m, method) in RatingMethod::ALL.iter().enumerate() {
            let model = match method {
                RatingMethod::Proposed => Some(learned.model()?),
                RatingMethod::Preferential => Some(AttachmentModel::new(self.preferential.clone(), ones.clone(), w_max)?),
                RatingMethod::Uniform => Some(AttachmentModel::new(self.uniform.clone(), ones.clone(), w_max)?),
                RatingMethod::TrainingMean => Some(AttachmentModel::new(pg.clone(), wg.clone(), w_max.max(wg.max()))?),
                RatingMethod::UserMean => None,
            };
            let mae = match model {
                Some(model) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, &[13, u as u64, m as u64]));
                    let draws = self.cfg.evaluation.draws;
                    let mut err = 0.0;
                    for &truth in &test {
                        let mut acc = 0.0;
                        for _ in 0..draws {
                            acc += model.sample_with(&mut rng).a_plus.dot(&c);
                        }
                        err += ((acc / draws as f64).clamp(1.0, 5.0) - truth).abs();
                    }
                    err / test.len() as f64
                }
                None => {
                    let mean = user_mean_prediction(&known)?;
                    test.iter().map(|t| (mean - t).abs()).sum::<f64>() / test.len() as f64
                }
            };
            rows.push(ColdStartRow {
                user: d.raw_user_id(u),
                bucket,
                interactions: ratings.len(),
                method: *method,
                test_ratings: test.len(),
                mae,
            });
        }
        Ok(Outcome::Scored(rows))
    }
}
