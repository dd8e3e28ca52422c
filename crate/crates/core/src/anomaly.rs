//! Novelty-based anomaly scoring with iterative filtering and an ensemble
//! of independently seeded members.
//!
//! Each member draws its own random map, trains on all rows, then for every
//! filtering round scores its current training set, drops the highest-scoring
//! `ceil(fraction · size)` rows and retrains from a fresh initialization on
//! the rest. Ensemble scores are the member mean over the full dataset.

use rayon::prelude::*;

use crate::ablation::{run_in_pool, Ablation};
use crate::error::{Error, Result};
use crate::losses::l_aux_ad;
use crate::mapping::Source;
use crate::metrics::{auc_pr, auc_roc};
use crate::network::{train, LossTrace, RdpModel, Task, TrainConfig};
use crate::numerics::{derive_seed, Dataset, Matrix};

/// Novelty of `x` under `model`: `mean_k (φ(x)_k − η(x)_k)²`. Higher is more anomalous.
pub fn anomaly_score(model: &RdpModel, x: &[f64]) -> Result<f64> {
    l_aux_ad(model, x)
}

pub fn score_rows(model: &RdpModel, x: &Matrix) -> Result<Vec<f64>> {
    x.row_iter().map(|r| anomaly_score(model, r)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostConfig {
    pub members: usize,
    pub filter_fraction: f64,
    pub filter_rounds: usize,
    /// Per-member training settings. `m` is replaced by the map's output
    /// dimension and `task` is forced to anomaly.
    pub train: TrainConfig,
    /// Output dimension `K` of the random map (and so of the representation).
    pub dim: usize,
    pub source: Source,
    /// Base seed; member seeds are derived from it.
    pub seed: u64,
    /// Threads used for members; 0 means the global pool.
    pub workers: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            members: 30,
            filter_fraction: 0.05,
            filter_rounds: 1,
            train: TrainConfig::anomaly(),
            dim: 50,
            source: Source::Rff { bandwidth: None },
            seed: 0,
            workers: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.members < 1 {
            problems.push("at least one ensemble member is required".to_string());
        }
        if !(0.0..0.5).contains(&self.filter_fraction) {
            problems.push(format!("filter fraction must lie in [0, 0.5), got {}", self.filter_fraction));
        }
        if self.dim < 1 {
            problems.push("projection dimension must be at least 1".to_string());
        }
        if !problems.is_empty() {
            return Err(Error::InvalidArgument(problems.join("; ")));
        }
        Ok(())
    }

    pub fn member_seeds(&self) -> Vec<u64> {
        (0..self.members as u64).map(|i| derive_seed(self.seed, i)).collect()
    }
}

/// Seeds consumed by one member: the map, then one training run per round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemberSeeds {
    pub member: u64,
}

impl MemberSeeds {
    pub fn map(&self) -> u64 {
        derive_seed(self.member, 0)
    }

    /// Training seed for round `r` (0 = the unfiltered run).
    pub fn round(&self, r: usize) -> u64 {
        derive_seed(self.member, 1 + r as u64)
    }
}

/// Rows removed from a training set of `size` rows.
pub fn removal_count(size: usize, fraction: f64) -> usize {
    let raw = fraction * size as f64;
    let nearest = raw.round();
    // products like 0.05 · 1000 must not round up past an exact integer
    let c = if (raw - nearest).abs() < 1e-9 { nearest } else { raw.ceil() };
    c as usize
}

#[derive(Debug, Clone)]
pub struct Member {
    pub seed: u64,
    pub model: RdpModel,
    /// Training-set size before each round; the last entry is the final set.
    pub train_sizes: Vec<usize>,
    pub trace: LossTrace,
}

/// Trains one ensemble member on `data` (expected as produced by `prepare`).
pub fn boost_train_member(data: &Matrix, config: &BoostConfig, member_seed: u64) -> Result<Member> {
    config.validate()?;
    let seeds = MemberSeeds { member: member_seed };
    let map = config.source.build(data, config.dim, seeds.map())?;
    let mut cfg = config.train.clone();
    cfg.task = Task::Anomaly;
    cfg.m = map.out_dim();
    cfg.seed = seeds.round(0);

    let mut rows: Vec<usize> = (0..data.rows()).collect();
    let mut sizes = vec![rows.len()];
    let (mut model, mut trace) = train(data, &cfg, &map)?;
    if config.filter_fraction > 0.0 {
        for round in 1..=config.filter_rounds {
            let current = data.select_rows(&rows);
            let scores = score_rows(&model, &current)?;
            let remove = removal_count(rows.len(), config.filter_fraction);
            let remaining = rows.len() - remove;
            let required = 2 * cfg.batch_size;
            if remaining < required {
                return Err(Error::FilterExhausted {
                    round,
                    remaining,
                    required,
                });
            }
            let mut by_score: Vec<usize> = (0..rows.len()).collect();
            by_score.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            let mut keep: Vec<usize> = by_score[remove..].iter().map(|&p| rows[p]).collect();
            keep.sort_unstable();
            rows = keep;
            sizes.push(rows.len());
            cfg.seed = seeds.round(round);
            (model, trace) = train(&data.select_rows(&rows), &cfg, &map)?;
        }
    }
    Ok(Member {
        seed: member_seed,
        model,
        train_sizes: sizes,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub members: Vec<Member>,
}

impl Ensemble {
    pub fn models(&self) -> impl Iterator<Item = &RdpModel> {
        self.members.iter().map(|m| &m.model)
    }
}

/// Trains `config.members` members in parallel; results keep seed order.
pub fn fit_ensemble(data: &Matrix, config: &BoostConfig) -> Result<Ensemble> {
    config.validate()?;
    let seeds = config.member_seeds();
    let members: Vec<Result<Member>> = run_in_pool(config.workers, || {
        seeds.par_iter().map(|&s| boost_train_member(data, config, s)).collect()
    })?;
    Ok(Ensemble {
        members: members.into_iter().collect::<Result<_>>()?,
    })
}

/// Mean of the members' scores for every row.
pub fn ensemble_score(ensemble: &Ensemble, x: &Matrix) -> Result<Vec<f64>> {
    let per_member: Vec<Vec<f64>> = ensemble
        .members
        .par_iter()
        .map(|m| score_rows(&m.model, x))
        .collect::<Result<_>>()?;
    mean_scores(&per_member, x.rows())
}

pub(crate) fn mean_scores(per_member: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    if per_member.is_empty() {
        return Err(Error::InvalidArgument("ensemble has no members".into()));
    }
    let mut sum = vec![0.0; n];
    for s in per_member {
        for (a, b) in sum.iter_mut().zip(s) {
            *a += b;
        }
    }
    let count = per_member.len() as f64;
    Ok(sum.into_iter().map(|v| v / count).collect())
}

#[derive(Debug, Clone)]
pub struct AnomalyOutcome {
    pub ensemble: Ensemble,
    pub scores: Vec<f64>,
    pub auc_roc: Option<f64>,
    pub auc_pr: Option<f64>,
    pub train_seconds: f64,
    pub score_seconds: f64,
}

/// Applies the ablation to `config`.
pub fn ablated(config: &BoostConfig, ablation: Ablation) -> Result<BoostConfig> {
    ablation.validate()?;
    let mut cfg = config.clone();
    cfg.train.use_rdp_loss &= !ablation.no_rdp_loss;
    cfg.train.use_aux_loss &= !ablation.no_aux_loss;
    if ablation.no_boosting {
        cfg.filter_rounds = 0;
    }
    cfg.train.objective().validate()?;
    Ok(cfg)
}

/// Fits the ensemble on `data` (expected as produced by `prepare`), scores every row and,
/// when labels are present, evaluates AUC-ROC and AUC-PR.
pub fn run_anomaly(data: &Dataset, config: &BoostConfig, ablation: Ablation) -> Result<AnomalyOutcome> {
    let cfg = ablated(config, ablation)?;
    let started = std::time::Instant::now();
    let ensemble = fit_ensemble(data.features(), &cfg)?;
    let train_seconds = started.elapsed().as_secs_f64();
    let started = std::time::Instant::now();
    let scores = run_in_pool(cfg.workers, || ensemble_score(&ensemble, data.features()))??;
    let score_seconds = started.elapsed().as_secs_f64();
    let (roc, pr) = match data.labels() {
        Some(l) => (Some(auc_roc(&scores, l)?), Some(auc_pr(&scores, l)?)),
        None => (None, None),
    };
    Ok(AnomalyOutcome {
        ensemble,
        scores,
        auc_roc: roc,
        auc_pr: pr,
        train_seconds,
        score_seconds,
    })
}
