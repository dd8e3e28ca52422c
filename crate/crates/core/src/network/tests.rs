use super::*;
use crate::error::Error;
use crate::losses::{batch_objective, l_rdp, Pair, PairBatch};
use crate::mapping::RandomMap;
use crate::numerics::{dot, prepare, synth_blobs, Matrix, RngStream};

fn obj(task: Task, rdp: bool, aux: bool, w: f64) -> Objective {
    Objective {
        task,
        use_rdp_loss: rdp,
        use_aux_loss: aux,
        aux_weight: w,
    }
}

fn small_config(task: Task, rdp: bool, aux: bool, m: usize) -> TrainConfig {
    TrainConfig {
        m,
        use_rdp_loss: rdp,
        use_aux_loss: aux,
        task,
        ..TrainConfig::anomaly()
    }
}

fn identity_encoder(d: usize, slope: f64) -> RdpModel {
    RdpModel::from_parts(
        Matrix::identity(d),
        vec![0.0; d],
        None,
        slope,
        obj(Task::Anomaly, true, false, 1.0),
        RandomMap::new_identity(d).unwrap(),
    )
    .unwrap()
}

/// Central finite differences of `batch_objective` over every parameter.
fn finite_difference(model: &RdpModel, x: &Matrix, batch: &PairBatch, o: &Objective, h: f64) -> Vec<f64> {
    let n_params = model.clone().parameters_mut().len();
    (0..n_params)
        .map(|p| {
            let mut plus = model.clone();
            *plus.parameters_mut()[p] += h;
            let mut minus = model.clone();
            *minus.parameters_mut()[p] -= h;
            let fp = batch_objective(&plus, x, batch, o).unwrap();
            let fm = batch_objective(&minus, x, batch, o).unwrap();
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = dot(a, a).sqrt().max(dot(b, b).sqrt()).max(1e-12);
    diff / scale
}

/// Random small instance: N=8, D=5, M=K=4, Gaussian targets map.
fn instance(seed: u64, task: Task, rdp: bool, aux: bool) -> (RdpModel, Matrix, RandomMap, Objective) {
    let mut rng = RngStream::new(seed);
    let x = Matrix::from_fn(8, 5, |_, _| rng.normal());
    let map = RandomMap::new_rff(5, 4, 1.5, seed ^ 0xabc).unwrap();
    let cfg = TrainConfig {
        aux_weight: 0.7,
        ..small_config(task, rdp, aux, 4)
    };
    let mut model = init_model(5, &cfg, &map, seed).unwrap();
    // nonzero biases so every term is exercised
    for p in model.parameters_mut().into_iter().skip(20).take(4) {
        *p = rng.normal() * 0.3;
    }
    (model, x, map, cfg.objective())
}

fn random_batch(sup: &Supervision<'_>, seed: u64) -> PairBatch {
    let mut rng = RngStream::new(seed);
    let rows: Vec<usize> = (0..sup.n()).collect();
    PairBatch::new(batch_pairs(&rows, sup, &mut rng), sup.n()).unwrap()
}

#[test]
fn gradients_match_finite_differences() {
    let configs = [
        (Task::Anomaly, true, false),
        (Task::Anomaly, true, true),
        (Task::Clustering, true, true),
        (Task::Anomaly, false, true),
        (Task::Clustering, false, true),
    ];
    for (task, rdp, aux) in configs {
        for seed in 0..20 {
            let (model, x, map, o) = instance(seed, task, rdp, aux);
            let sup = Supervision::new(&map, &x).unwrap();
            let batch = random_batch(&sup, seed + 100);
            let (g, _) = grad_batch(&model, &sup, &batch, &o).unwrap();
            let fd = finite_difference(&model, &x, &batch, &o, 1e-5);
            let err = relative_error(&g.flatten(), &fd);
            assert!(err < 1e-4, "{task:?} rdp={rdp} aux={aux} seed={seed}: rel err {err}");
        }
    }
}

#[test]
fn reported_loss_matches_objective() {
    for (task, aux) in [(Task::Anomaly, true), (Task::Clustering, true), (Task::Anomaly, false)] {
        let (model, x, map, o) = instance(3, task, true, aux);
        let sup = Supervision::new(&map, &x).unwrap();
        let batch = random_batch(&sup, 9);
        let (_, parts) = grad_batch(&model, &sup, &batch, &o).unwrap();
        let direct = batch_objective(&model, &x, &batch, &o).unwrap();
        assert!((parts.total - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }
}

#[test]
fn zero_everything_gives_zero_gradient() {
    let map = RandomMap::new_identity(3).unwrap();
    let cfg = small_config(Task::Anomaly, true, false, 3);
    let mut model = init_model(3, &cfg, &map, 1).unwrap();
    model.parameters_mut().into_iter().for_each(|p| *p = 0.0);
    let x = Matrix::zeros(4, 3);
    let sup = Supervision::new(&map, &x).unwrap();
    let batch = PairBatch::new(vec![Pair { i: 0, j: 1, target: 0.0 }, Pair { i: 2, j: 3, target: 0.0 }], 4).unwrap();
    let (g, parts) = grad_batch(&model, &sup, &batch, &cfg.objective()).unwrap();
    assert!(g.flatten().iter().all(|&v| v == 0.0));
    assert_eq!(parts.total, 0.0);
}

#[test]
fn doubling_lambda_doubles_aux_gradient() {
    for task in [Task::Anomaly, Task::Clustering] {
        let (model, x, map, _) = instance(5, task, true, true);
        let sup = Supervision::new(&map, &x).unwrap();
        let batch = random_batch(&sup, 1);
        // auxiliary term alone: exact doubling
        let g1 = grad_batch(&model, &sup, &batch, &obj(task, false, true, 1.0)).unwrap().0.flatten();
        let g2 = grad_batch(&model, &sup, &batch, &obj(task, false, true, 2.0)).unwrap().0.flatten();
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
        // with the distance term, the contribution above λ = 0 doubles
        let g0 = grad_batch(&model, &sup, &batch, &obj(task, true, true, 0.0)).unwrap().0.flatten();
        let h1 = grad_batch(&model, &sup, &batch, &obj(task, true, true, 1.0)).unwrap().0.flatten();
        let h2 = grad_batch(&model, &sup, &batch, &obj(task, true, true, 2.0)).unwrap().0.flatten();
        for ((a, b), c) in g0.iter().zip(&h1).zip(&h2) {
            let (d1, d2) = (b - a, c - a);
            assert!((d2 - 2.0 * d1).abs() <= 1e-12 * (1.0 + d2.abs()));
        }
    }
}

#[test]
fn forward_regions() {
    let m = identity_encoder(3, 0.01);
    assert_eq!(m.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    let m1 = identity_encoder(1, 0.01);
    assert_eq!(m1.forward(&[-1.0]).unwrap(), vec![-0.01]);
    assert!(matches!(m.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn forward_homogeneous_on_fixed_pattern() {
    let map = RandomMap::new_gaussian_rp(4, 6, 2).unwrap();
    let cfg = TrainConfig {
        leaky_slope: 0.2,
        ..small_config(Task::Clustering, true, false, 6)
    };
    let m = init_model(4, &cfg, &map, 7).unwrap();
    let x = [0.3, -1.0, 0.8, 2.0];
    let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let (a, b) = (m.forward(&x).unwrap(), m.forward(&x2).unwrap());
    for (p, q) in a.iter().zip(&b) {
        assert!((2.0 * p - q).abs() < 1e-12);
    }
}

#[test]
fn decode_identity_zero_linear() {
    let d = 3;
    let model = RdpModel::from_parts(
        Matrix::identity(d),
        vec![0.0; d],
        Some(Decoder {
            weights: Matrix::identity(d),
            bias: vec![0.0; d],
        }),
        0.01,
        obj(Task::Clustering, true, true, 1.0),
        RandomMap::new_identity(d).unwrap(),
    )
    .unwrap();
    assert_eq!(model.decode(&[1.0, -2.0, 0.5]).unwrap(), vec![1.0, -2.0, 0.5]);

    let map = RandomMap::new_identity(d).unwrap();
    let cfg = small_config(Task::Clustering, true, true, 5);
    let mut m = init_model(d, &cfg, &map, 4).unwrap();
    let bias = [0.5, -1.0, 2.0];
    let n = m.parameters_mut().len();
    for (p, b) in m.parameters_mut().into_iter().skip(n - 3).zip(bias) {
        *p = b;
    }
    assert_eq!(m.decode(&[0.0; 5]).unwrap(), bias.to_vec());
    let (h1, h2) = ([1.0, 0.0, 2.0, -1.0, 0.5], [0.3, 0.3, -0.2, 1.0, 0.0]);
    let sum: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| a + b).collect();
    let (z1, z2, zs) = (m.decode(&h1).unwrap(), m.decode(&h2).unwrap(), m.decode(&sum).unwrap());
    for i in 0..d {
        // φ′(h1+h2) = φ′(h1) + φ′(h2) − b′
        assert!((zs[i] - (z1[i] + z2[i] - bias[i])).abs() < 1e-12);
    }
    assert!(matches!(identity_encoder(2, 0.01).decode(&[1.0, 1.0]), Err(Error::DecoderAbsent)));
}

#[test]
fn default_configs() {
    let a = TrainConfig::anomaly();
    assert_eq!((a.m, a.epochs, a.batch_size, a.learning_rate), (50, 200, 192, 0.1));
    let c = TrainConfig::clustering();
    assert_eq!((c.m, c.epochs, c.batch_size, c.learning_rate), (1024, 1000, 192, 0.1));
    assert_eq!(c.task, Task::Clustering);
}

#[test]
fn init_shapes_and_zero_bias() {
    let map = RandomMap::new_rff(7, 50, 1.0, 1).unwrap();
    let m = init_model(7, &TrainConfig::anomaly(), &map, 3).unwrap();
    assert_eq!((m.m(), m.d()), (50, 7));
    assert!(m.bias().iter().all(|&b| b == 0.0));
    assert!(m.decoder().is_none());

    let cfg = TrainConfig {
        m: 20,
        ..TrainConfig::clustering()
    };
    let c = init_model(7, &cfg, &map, 3).unwrap();
    let dec = c.decoder().unwrap();
    assert_eq!((dec.weights.rows(), dec.weights.cols()), (7, 20));
    assert!(dec.bias.iter().all(|&b| b == 0.0));
}

#[test]
fn init_rejects_novelty_dim_mismatch() {
    let map = RandomMap::new_rff(7, 40, 1.0, 1).unwrap();
    assert!(matches!(
        init_model(7, &TrainConfig::anomaly(), &map, 3),
        Err(Error::NoveltyDimMismatch { m: 50, k: 40 })
    ));
    let cfg = TrainConfig {
        use_aux_loss: false,
        ..TrainConfig::anomaly()
    };
    assert!(init_model(7, &cfg, &map, 3).is_ok());
}

#[test]
fn identity_map_identity_encoder_zero_rdp_loss() {
    let mut rng = RngStream::new(4);
    for slope in [0.01, 0.3, -2.0] {
        let m = identity_encoder(4, slope);
        for _ in 0..20 {
            let xi: Vec<f64> = (0..4).map(|_| rng.uniform() + 0.01).collect();
            let xj: Vec<f64> = (0..4).map(|_| rng.uniform() + 0.01).collect();
            let y = m.map().pairwise_target(&xi, &xj).unwrap();
            assert_eq!(l_rdp(&m, &xi, &xj, y).unwrap(), 0.0);
        }
    }
}

#[test]
fn train_requires_a_loss() {
    let ds = synth_blobs(2, 10, 3, 1.0, 0);
    let map = RandomMap::new_identity(3).unwrap();
    let cfg = TrainConfig {
        use_rdp_loss: false,
        use_aux_loss: false,
        ..small_config(Task::Anomaly, true, true, 3)
    };
    let err = train(ds.features(), &cfg, &map).unwrap_err();
    assert!(matches!(err, Error::NoLossEnabled));
    assert!(err.to_string().contains("no loss enabled"));
}

#[test]
fn train_is_deterministic() {
    let ds = synth_blobs(3, 30, 6, 1.0, 2);
    let (ds, _) = prepare(&ds);
    let map = RandomMap::new_rff_median(ds.features(), 8, 11).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 16,
        seed: 99,
        ..small_config(Task::Anomaly, true, true, 8)
    };
    let (a, ta) = train(ds.features(), &cfg, &map).unwrap();
    let (b, tb) = train(ds.features(), &cfg, &map).unwrap();
    let bits = |m: &RdpModel| m.weights().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(ta, tb);
    assert_eq!(ta.epochs(), 5);
    let other = TrainConfig { seed: 100, ..cfg };
    let (c, _) = train(ds.features(), &other, &map).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn training_separates_blobs() {
    let ds = synth_blobs(3, 60, 10, 1.0, 5);
    let labels = ds.labels().unwrap().to_vec();
    let (ds, _) = prepare(&ds);
    let map = RandomMap::new_rff_median(ds.features(), 32, 1).unwrap();
    let cfg = TrainConfig {
        epochs: 100,
        seed: 3,
        ..small_config(Task::Clustering, true, true, 32)
    };
    let (model, trace) = train(ds.features(), &cfg, &map).unwrap();
    assert!(model.is_finite());
    let (head, tail) = trace.head_tail_means(0.1);
    assert!(tail <= head, "loss rose: {head} -> {tail}");
    let h: Vec<Vec<f64>> = ds.features().row_iter().map(|r| model.forward(r).unwrap()).collect();
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0, 0.0, 0);
    for i in 0..h.len() {
        for j in i + 1..h.len() {
            let v = dot(&h[i], &h[j]);
            if labels[i] == labels[j] {
                within += v;
                nw += 1;
            } else {
                between += v;
                nb += 1;
            }
        }
    }
    let (within, between) = (within / nw as f64, between / nb as f64);
    assert!(within > between, "within {within} between {between}");
}
