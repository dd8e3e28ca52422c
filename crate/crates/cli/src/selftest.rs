//! Quick invariant checks runnable from the command line.

use rdp_core::losses::{batch_objective, Pair, PairBatch};
use rdp_core::mapping::{jl_audit, rbf_kernel, RandomMap};
use rdp_core::metrics::{auc_pr, auc_roc, nmi, pairwise_f};
use rdp_core::network::{grad_batch, init_model, Objective, Supervision, Task, TrainConfig};
use rdp_core::numerics::{dot, Matrix, RngStream};
use rdp_core::persist::{decode_model, encode_model};
use rdp_core::{train, Error, RdpModel};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

fn random_instance(task: Task, use_aux: bool, seed: u64) -> rdp_core::Result<(RdpModel, Matrix, RandomMap)> {
    let mut rng = RngStream::new(seed);
    let x = Matrix::from_fn(8, 5, |_, _| rng.normal());
    let map = RandomMap::new_rff(5, 4, 1.5, seed)?;
    let cfg = TrainConfig {
        m: 4,
        task,
        use_aux_loss: use_aux,
        aux_weight: 0.7,
        ..TrainConfig::anomaly()
    };
    let mut model = init_model(5, &cfg, &map, seed)?;
    for p in model.parameters_mut() {
        *p = 0.6 * rng.normal();
    }
    Ok((model, x, map))
}

fn gradient_check() -> rdp_core::Result<Check> {
    let mut worst: f64 = 0.0;
    for (task, aux) in [(Task::Anomaly, false), (Task::Anomaly, true), (Task::Clustering, true)] {
        for seed in 0..5 {
            let (mut model, x, map) = random_instance(task, aux, seed)?;
            let sup = Supervision::new(&map, &x)?;
            let pairs: Vec<Pair> = (0..8).map(|i| sup.pair(i, (i + 3) % 8)).collect();
            let batch = PairBatch::new(pairs, 8)?;
            let obj = *model.objective();
            let (g, _) = grad_batch(&model, &sup, &batch, &obj)?;
            let analytic = g.flatten();
            let h = 1e-5;
            let mut numeric = Vec::with_capacity(analytic.len());
            for i in 0..analytic.len() {
                let orig = *model.parameters_mut()[i];
                *model.parameters_mut()[i] = orig + h;
                let up = batch_objective(&model, &x, &batch, &obj)?;
                *model.parameters_mut()[i] = orig - h;
                let down = batch_objective(&model, &x, &batch, &obj)?;
                *model.parameters_mut()[i] = orig;
                numeric.push((up - down) / (2.0 * h));
            }
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = dot(&numeric, &numeric).sqrt().max(1e-12);
            worst = worst.max(diff / scale);
        }
    }
    Ok(check("gradients_match_finite_differences", worst < 1e-4, format!("max relative error {worst:.2e}")))
}

fn rff_check() -> rdp_core::Result<Check> {
    let mut rng = RngStream::new(5);
    let map = RandomMap::new_rff(6, 4096, 2.0, 11)?;
    let mut err = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        err += (map.pairwise_target(&x, &y)? - rbf_kernel(&x, &y, 2.0)?).abs();
    }
    err /= 20.0;
    Ok(check("rff_approximates_rbf", err <= 0.05, format!("mean abs error {err:.4}")))
}

fn jl_check() -> rdp_core::Result<Check> {
    let mut rng = RngStream::new(2);
    let x = Matrix::from_fn(100, 32, |_, _| rng.normal());
    let map = RandomMap::new_gaussian_rp(32, 1000, 3)?;
    let a = jl_audit(&map, &x, 0.3, 500, 4)?;
    Ok(check(
        "jl_inner_products_preserved",
        a.violation_rate <= a.bound + 0.01,
        format!("violation rate {} vs bound {:.3e}", a.violation_rate, a.bound),
    ))
}

fn metric_check() -> rdp_core::Result<Check> {
    let s = [0.9, 0.8, 0.3, 0.2];
    let l = [1, 0, 1, 0];
    let roc = auc_roc(&s, &l)?;
    let pr = auc_pr(&s, &l)?;
    let scaled: Vec<f64> = s.iter().map(|v| v * 7.3).collect();
    let ok = roc == 0.75
        && (pr - 5.0 / 6.0).abs() < 1e-15
        && auc_roc(&scaled, &l)? == roc
        && auc_pr(&scaled, &l)? == pr
        && nmi(&[0, 0, 1, 1], &[5, 5, 9, 9])? == 1.0
        && nmi(&[0, 0, 1, 1], &[0, 1, 0, 1])? == 0.0
        && (pairwise_f(&[0, 0, 1, 1], &[0, 1, 1, 1])? - 0.4).abs() < 1e-15;
    Ok(check("metric_reference_values", ok, format!("auc_roc {roc}, auc_pr {pr}")))
}

fn persistence_check() -> rdp_core::Result<Check> {
    let (model, x, _) = random_instance(Task::Clustering, true, 9)?;
    let bytes = encode_model(&model);
    let back = decode_model(&bytes)?;
    let same = x.row_iter().all(|r| {
        let a = model.forward(r).expect("width matches");
        let b = back.forward(r).expect("width matches");
        a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits())
    });
    let mut bad = bytes.clone();
    let mid = bad.len() / 2;
    bad[mid] ^= 0x10;
    let caught = matches!(decode_model(&bad), Err(Error::ChecksumMismatch { .. }));
    Ok(check("model_file_round_trip", same && caught, format!("bit-exact {same}, corruption detected {caught}")))
}

fn determinism_check() -> rdp_core::Result<Check> {
    let mut rng = RngStream::new(13);
    let x = Matrix::from_fn(60, 6, |_, _| rng.normal() / 6f64.sqrt());
    let map = RandomMap::new_rff(6, 8, 1.0, 1)?;
    let cfg = TrainConfig {
        m: 8,
        epochs: 5,
        batch_size: 16,
        seed: 3,
        ..TrainConfig::anomaly()
    };
    let (a, _) = train(&x, &cfg, &map)?;
    let (b, _) = train(&x, &cfg, &map)?;
    let same = a.weights().as_slice().iter().zip(b.weights().as_slice()).all(|(p, q)| p.to_bits() == q.to_bits());
    Ok(check("training_is_deterministic", same, format!("bit-identical weights {same}")))
}

fn objective_guard_check() -> Check {
    let obj = Objective {
        task: Task::Anomaly,
        use_rdp_loss: false,
        use_aux_loss: false,
        aux_weight: 1.0,
    };
    let caught = matches!(obj.validate(), Err(Error::NoLossEnabled));
    check("no_loss_configuration_rejected", caught, format!("rejected {caught}"))
}

/// Runs every check; a check that errors counts as failed.
pub fn run_selftest() -> Vec<Check> {
    let fallible: [(&'static str, fn() -> rdp_core::Result<Check>); 6] = [
        ("gradients_match_finite_differences", gradient_check),
        ("rff_approximates_rbf", rff_check),
        ("jl_inner_products_preserved", jl_check),
        ("metric_reference_values", metric_check),
        ("model_file_round_trip", persistence_check),
        ("training_is_deterministic", determinism_check),
    ];
    let mut out: Vec<Check> = fallible
        .into_iter()
        .map(|(name, f)| f().unwrap_or_else(|e| check(name, false, format!("error: {e}"))))
        .collect();
    out.push(objective_guard_check());
    out
}
