//! Embedding, K-means and the clustering evaluation pipeline.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ablation::{run_in_pool, Ablation};
use crate::mapping::Source;
use crate::metrics::{nmi, pairwise_f};
use crate::network::{train, LossTrace, RdpModel, Task, TrainConfig};
use crate::numerics::{derive_seed, dot, squared_distance, Dataset, Matrix, RngStream};

/// `φ` applied to every row.
pub fn embed(model: &RdpModel, data: &Matrix) -> Result<Matrix> {
    if data.cols() != model.d() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            got: data.cols(),
        });
    }
    let mut out = Vec::with_capacity(data.rows() * model.m());
    for r in data.row_iter() {
        out.extend(model.forward(r)?);
    }
    Matrix::from_vec(data.rows(), model.m(), out)
}

/// Scales every nonzero row to unit Euclidean norm.
pub fn l2_normalize_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = dot(row, row).sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// `k × dim`
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
}

pub const DEFAULT_MAX_ITERS: usize = 300;

fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.row_iter().enumerate() {
        let d = squared_distance(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Index drawn with probability proportional to `weights`.
fn weighted_pick(weights: &[f64], total: f64, rng: &mut RngStream) -> usize {
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if acc > target {
                return i;
            }
        }
    }
    last
}

/// Greedy k-means++: each new center is the best of `2 + ⌊ln k⌋`
/// D²-weighted candidates, judged by the resulting potential.
fn kmeans_plus_plus(x: &Matrix, k: usize, rng: &mut RngStream) -> Matrix {
    let n = x.rows();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.index(n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = x.row_iter().map(|r| squared_distance(r, x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            // every point coincides with a chosen centroid
            let pick = rng.index(n);
            centroids.row_mut(c).copy_from_slice(x.row(pick));
            continue;
        }
        let mut best: Option<(f64, Vec<f64>, usize)> = None;
        for _ in 0..trials {
            let cand = weighted_pick(&d2, total, rng);
            let next: Vec<f64> = x
                .row_iter()
                .zip(&d2)
                .map(|(r, &d)| d.min(squared_distance(r, x.row(cand))))
                .collect();
            let potential: f64 = next.iter().sum();
            if best.as_ref().is_none_or(|(p, _, _)| potential < *p) {
                best = Some((potential, next, cand));
            }
        }
        let (_, next, pick) = best.expect("at least one trial");
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        d2 = next;
    }
    centroids
}

/// Lloyd iterations from greedy k-means++ seeding until the assignment stops
/// changing or `max_iters` is reached. A cluster that empties is reseeded at
/// the point farthest from its current centroid.
pub fn kmeans(x: &Matrix, k: usize, max_iters: usize, seed: u64) -> Result<KMeansResult> {
    let n = x.rows();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {n} available points")));
    }
    let mut rng = RngStream::new(seed);
    let mut centroids = kmeans_plus_plus(x, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < max_iters {
        let mut changed = false;
        for (i, r) in x.row_iter().enumerate() {
            let (c, d) = nearest(r, &centroids);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
            dists[i] = d;
        }
        if !changed {
            break;
        }
        iterations += 1;

        let mut counts = vec![0usize; k];
        for &c in &assignments {
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[assignments[i]] -= 1;
                assignments[i] = c;
                counts[c] = 1;
                dists[i] = 0.0;
            }
        }

        let mut sums = Matrix::zeros(k, x.cols());
        for (i, r) in x.row_iter().enumerate() {
            for (s, v) in sums.row_mut(assignments[i]).iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            let cnt = counts[c] as f64;
            let row = sums.row(c).to_vec();
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(row) {
                *dst = s / cnt;
            }
        }
        history.push(inertia_of(x, &assignments, &centroids));
    }

    if assignments.iter().any(|&a| a == usize::MAX) {
        for (i, r) in x.row_iter().enumerate() {
            assignments[i] = nearest(r, &centroids).0;
        }
    }
    let inertia = inertia_of(x, &assignments, &centroids);
    Ok(KMeansResult {
        assignments,
        centroids,
        inertia,
        iterations_run: iterations,
        inertia_history: history,
    })
}

fn inertia_of(x: &Matrix, assignments: &[usize], centroids: &Matrix) -> f64 {
    x.row_iter()
        .zip(assignments)
        .map(|(r, &c)| squared_distance(r, centroids.row(c)))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    /// Training settings; `task` is forced to clustering.
    pub train: TrainConfig,
    /// Output dimension `K` of the random map.
    pub k_proj: usize,
    pub source: Source,
    pub restarts: usize,
    pub max_iters: usize,
    /// Number of clusters; `None` uses the number of distinct labels.
    pub clusters: Option<usize>,
    pub normalize_embeddings: bool,
    /// Base seed for the map, training and restarts.
    pub seed: u64,
    /// Threads used for restarts; 0 means the global pool.
    pub workers: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::clustering(),
            k_proj: 1024,
            source: Source::Rff { bandwidth: None },
            restarts: 30,
            max_iters: DEFAULT_MAX_ITERS,
            clusters: None,
            normalize_embeddings: false,
            seed: 0,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartScore {
    pub seed: u64,
    pub inertia: f64,
    /// Present when the data carries labels.
    pub nmi: Option<f64>,
    pub f_score: Option<f64>,
}

/// Restart-averaged agreement with the labels (population std).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterScores {
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub f_mean: f64,
    pub f_std: f64,
}

#[derive(Debug, Clone)]
pub struct ClusteringOutcome {
    pub model: RdpModel,
    pub trace: LossTrace,
    pub k: usize,
    pub restarts: Vec<RestartScore>,
    /// Assignments of the restart with the lowest inertia.
    pub best_assignments: Vec<usize>,
    pub scores: Option<ClusterScores>,
    pub train_seconds: f64,
    pub cluster_seconds: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains an RDP model on `data` (expected as produced by `prepare`), embeds
/// it, and runs `restarts` independently seeded K-means fits. When labels are
/// present every restart is scored against them.
pub fn run_clustering(data: &Dataset, config: &ClusterConfig, ablation: Ablation) -> Result<ClusteringOutcome> {
    ablation.validate()?;
    let labels = data.labels();
    if config.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let k = config
        .clusters
        .or_else(|| data.class_count())
        .ok_or_else(|| Error::InvalidArgument("cluster count must be given for unlabelled data".into()))?;
    let mut train_cfg = config.train.clone();
    train_cfg.task = Task::Clustering;
    train_cfg.use_rdp_loss &= !ablation.no_rdp_loss;
    train_cfg.use_aux_loss &= !ablation.no_aux_loss;
    train_cfg.seed = derive_seed(config.seed, 1);

    let started = std::time::Instant::now();
    let map = config.source.build(data.features(), config.k_proj, derive_seed(config.seed, 0))?;
    let (model, trace) = train(data.features(), &train_cfg, &map)?;
    let train_seconds = started.elapsed().as_secs_f64();

    let started = std::time::Instant::now();
    let mut emb = embed(&model, data.features())?;
    if config.normalize_embeddings {
        emb = l2_normalize_rows(&emb);
    }
    let restart_seeds: Vec<u64> = (0..config.restarts as u64).map(|r| derive_seed(config.seed, 100 + r)).collect();
    let runs: Vec<Result<(RestartScore, Vec<usize>)>> = run_in_pool(config.workers, || {
        restart_seeds
            .par_iter()
            .map(|&s| {
                let res = kmeans(&emb, k, config.max_iters, s)?;
                let score = RestartScore {
                    seed: s,
                    inertia: res.inertia,
                    nmi: labels.map(|l| nmi(l, &res.assignments)).transpose()?,
                    f_score: labels.map(|l| pairwise_f(l, &res.assignments)).transpose()?,
                };
                Ok((score, res.assignments))
            })
            .collect()
    })?;
    let mut restarts = Vec::with_capacity(runs.len());
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in runs {
        let (score, assign) = r?;
        if best.as_ref().is_none_or(|(i, _)| score.inertia < *i) {
            best = Some((score.inertia, assign));
        }
        restarts.push(score);
    }
    let cluster_seconds = started.elapsed().as_secs_f64();
    let scores = labels.map(|_| {
        let (nmi_mean, nmi_std) = mean_std(&restarts.iter().filter_map(|r| r.nmi).collect::<Vec<_>>());
        let (f_mean, f_std) = mean_std(&restarts.iter().filter_map(|r| r.f_score).collect::<Vec<_>>());
        ClusterScores {
            nmi_mean,
            nmi_std,
            f_mean,
            f_std,
        }
    });
    Ok(ClusteringOutcome {
        model,
        trace,
        k,
        restarts,
        best_assignments: best.expect("at least one restart").1,
        scores,
        train_seconds,
        cluster_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::RandomMap;
    use crate::numerics::{prepare, synth_blobs};

    #[test]
    fn two_identical_pairs() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [10.0, 10.0], [0.0, 0.0], [10.0, 10.0]]).unwrap();
        for seed in 0..10 {
            let r = kmeans(&x, 2, 100, seed).unwrap();
            assert_eq!(r.inertia, 0.0);
            assert_eq!(r.assignments[0], r.assignments[2]);
            assert_eq!(r.assignments[1], r.assignments[3]);
            assert_ne!(r.assignments[0], r.assignments[1]);
        }
    }

    #[test]
    fn single_cluster_is_mean() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 0.0], [2.0, 4.0], [6.0, -2.0]]).unwrap();
        let r = kmeans(&x, 1, 100, 3).unwrap();
        assert_eq!(r.centroids.row(0), &[3.0, 1.0]);
        // squared deviations: (4+1)+(0+1)+(1+9)+(9+9)
        assert!((r.inertia - 34.0).abs() < 1e-12);
        assert!(r.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn k_equals_n_zero_inertia() {
        let mut rng = RngStream::new(1);
        let x = Matrix::from_fn(9, 3, |_, _| rng.normal());
        let r = kmeans(&x, 9, 100, 0).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut a = r.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn k_too_large_rejected() {
        assert!(kmeans(&Matrix::zeros(3, 2), 4, 10, 0).is_err());
        assert!(kmeans(&Matrix::zeros(3, 2), 0, 10, 0).is_err());
    }

    #[test]
    fn duplicate_points_more_clusters_than_distinct() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0], [5.0]]).unwrap();
        let r = kmeans(&x, 3, 50, 2).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert!(r.assignments.iter().all(|&a| a < 3));
    }

    #[test]
    fn lloyd_inertia_nonincreasing() {
        for seed in 0..20 {
            let mut rng = RngStream::new(seed);
            let x = Matrix::from_fn(120, 4, |_, _| rng.normal());
            let r = kmeans(&x, 6, 300, seed).unwrap();
            for w in r.inertia_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{w:?}");
            }
            assert!(r.iterations_run <= 300);
            assert!(r.assignments.iter().all(|&a| a < 6));
        }
    }

    #[test]
    fn kmeans_deterministic() {
        let mut rng = RngStream::new(8);
        let x = Matrix::from_fn(50, 3, |_, _| rng.normal());
        assert_eq!(kmeans(&x, 4, 100, 11).unwrap(), kmeans(&x, 4, 100, 11).unwrap());
    }

    #[test]
    fn embed_matches_forward() {
        let ds = synth_blobs(2, 5, 3, 1.0, 0);
        let map = RandomMap::new_identity(3).unwrap();
        let cfg = TrainConfig {
            m: 4,
            ..TrainConfig::clustering()
        };
        let model = crate::network::init_model(3, &cfg, &map, 1).unwrap();
        let e = embed(&model, ds.features()).unwrap();
        assert_eq!(e.cols(), 4);
        for i in 0..ds.n() {
            assert_eq!(e.row(i), model.forward(ds.features().row(i)).unwrap().as_slice());
        }
        assert_eq!(e, embed(&model, ds.features()).unwrap());
        assert!(embed(&model, &Matrix::zeros(2, 5)).is_err());
    }

    #[test]
    fn normalized_rows_unit_length() {
        let x = Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0]]).unwrap();
        let y = l2_normalize_rows(&x);
        assert_eq!(y.row(0), &[0.6, 0.8]);
        assert_eq!(y.row(1), &[0.0, 0.0]);
    }

    fn small_cluster_config(restarts: usize) -> ClusterConfig {
        ClusterConfig {
            train: TrainConfig {
                epochs: 30,
                m: 16,
                ..TrainConfig::clustering()
            },
            k_proj: 16,
            restarts,
            seed: 4,
            ..ClusterConfig::default()
        }
    }

    #[test]
    fn single_restart_has_zero_std() {
        let (ds, _) = prepare(&synth_blobs(3, 20, 5, 1.0, 1));
        let out = run_clustering(&ds, &small_cluster_config(1), Ablation::NONE).unwrap();
        let s = out.scores.unwrap();
        assert_eq!(s.nmi_std, 0.0);
        assert_eq!(s.f_std, 0.0);
        assert_eq!(out.k, 3);
    }

    #[test]
    fn no_aux_ablation_drops_decoder() {
        let (ds, _) = prepare(&synth_blobs(3, 20, 5, 1.0, 1));
        let ab = Ablation {
            no_aux_loss: true,
            ..Ablation::NONE
        };
        let out = run_clustering(&ds, &small_cluster_config(2), ab).unwrap();
        assert!(out.model.decoder().is_none());
        assert!(!out.model.objective().use_aux_loss);
        let both = Ablation {
            no_rdp_loss: true,
            no_aux_loss: true,
            ..Ablation::NONE
        };
        assert!(matches!(run_clustering(&ds, &small_cluster_config(2), both), Err(Error::NoLossEnabled)));
    }

    #[test]
    fn unlabelled_data_needs_cluster_count() {
        let (ds, _) = prepare(&synth_blobs(3, 20, 5, 1.0, 1));
        let bare = Dataset::new(ds.features().clone(), None).unwrap();
        assert!(run_clustering(&bare, &small_cluster_config(1), Ablation::NONE).is_err());
        let cfg = ClusterConfig {
            clusters: Some(3),
            ..small_cluster_config(2)
        };
        let out = run_clustering(&bare, &cfg, Ablation::NONE).unwrap();
        assert!(out.scores.is_none());
        assert!(out.restarts.iter().all(|r| r.nmi.is_none()));
        let labelled = run_clustering(&ds, &cfg, Ablation::NONE).unwrap();
        assert_eq!(labelled.best_assignments, out.best_assignments);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let (ds, _) = prepare(&synth_blobs(3, 20, 5, 1.0, 1));
        let mut cfg = small_cluster_config(4);
        cfg.workers = 1;
        let a = run_clustering(&ds, &cfg, Ablation::NONE).unwrap();
        cfg.workers = 3;
        let b = run_clustering(&ds, &cfg, Ablation::NONE).unwrap();
        assert_eq!(a.restarts, b.restarts);
    }

    #[test]
    fn mean_std_population() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }
}
