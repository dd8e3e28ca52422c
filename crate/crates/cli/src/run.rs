//! Dispatch of a resolved configuration to the pipelines, plus artifact output.

use std::path::Path;
use std::time::Instant;

use rdp_core::anomaly::{AnomalyOutcome, BoostConfig};
use rdp_core::clustering::{ClusterConfig, ClusteringOutcome};
use rdp_core::metrics::{auc_pr, auc_roc, nmi, nmi_with, pairwise_f, NmiNormalization};
use rdp_core::network::{LossTrace, TrainConfig};
use rdp_core::numerics::{derive_seed, load_csv, prepare, Dataset, LabelColumn};
use rdp_core::persist::{save_ensemble, save_model, write_atomic};
use rdp_core::{run_anomaly, run_clustering, Error};

use crate::config::{EvalMode, RunConfig, TaskKind};
use crate::error::{CliError, Result};
use crate::report::{list, Report};

/// Runs the configured task, writes any requested artifacts and the report
/// file, and returns the report.
pub fn run(config: &RunConfig) -> Result<Report> {
    let mut report = Report::new();
    report.push("version", rdp_core::VERSION);
    report.section("config", config.echo());

    match config.task {
        TaskKind::Eval => eval(config, &mut report)?,
        task => {
            let started = Instant::now();
            let data = load(config)?;
            let load_seconds = started.elapsed().as_secs_f64();
            report.push("data.rows", data.n());
            report.push("data.cols", data.d());
            if let Some(c) = data.class_count() {
                report.push("data.classes", c);
            }
            match task {
                TaskKind::Anomaly => anomaly(config, &data, &mut report)?,
                TaskKind::Cluster => cluster(config, &data, &mut report)?,
                TaskKind::Project => project(config, &data, &mut report)?,
                TaskKind::Eval => unreachable!("handled above"),
            }
            report.push("timing.load_seconds", load_seconds);
        }
    }
    if let Some(path) = &config.report {
        write_atomic(path, report.to_string().as_bytes())?;
    }
    Ok(report)
}

fn load(config: &RunConfig) -> Result<Dataset> {
    let label = config.label.as_deref().map(LabelColumn::parse);
    let raw = load_csv(&config.input, label.as_ref(), config.header)?;
    Ok(if config.standardize { prepare(&raw).0 } else { raw })
}

fn train_config(config: &RunConfig, base: TrainConfig) -> TrainConfig {
    TrainConfig {
        epochs: config.epochs,
        batch_size: config.batch,
        learning_rate: config.lr,
        m: config.m,
        leaky_slope: config.leaky_slope,
        aux_weight: config.lambda,
        ..base
    }
}

fn loss_summary(report: &mut Report, trace: &LossTrace) {
    let n = trace.epochs();
    if n == 0 {
        return;
    }
    let (head, tail) = trace.head_tail_means(0.1);
    report.push("loss.epochs", n);
    report.push("loss.first_total", trace.total[0]);
    report.push("loss.last_total", trace.total[n - 1]);
    report.push("loss.last_rdp", trace.rdp[n - 1]);
    report.push("loss.last_aux", trace.aux[n - 1]);
    report.push("loss.head_mean", head);
    report.push("loss.tail_mean", tail);
}

/// Epoch-wise mean of several traces of equal length.
fn mean_trace<'a>(traces: impl IntoIterator<Item = &'a LossTrace>) -> LossTrace {
    let traces: Vec<&LossTrace> = traces.into_iter().collect();
    let Some(first) = traces.first() else {
        return LossTrace::default();
    };
    let n = first.epochs();
    let avg = |f: fn(&LossTrace) -> &Vec<f64>| {
        (0..n)
            .map(|e| traces.iter().map(|t| f(t)[e]).sum::<f64>() / traces.len() as f64)
            .collect()
    };
    LossTrace {
        total: avg(|t| &t.total),
        rdp: avg(|t| &t.rdp),
        aux: avg(|t| &t.aux),
    }
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| CliError::Core(Error::Malformed(e.to_string()));
    w.write_record(header).map_err(to_err)?;
    for r in rows {
        w.write_record(&r).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| CliError::Core(Error::Malformed(e.to_string())))
}

fn write_indexed(path: &Path, column: &str, values: &[String], labels: Option<&[i64]>) -> Result<()> {
    let header: Vec<&str> = match labels {
        Some(_) => vec!["index", column, "label"],
        None => vec!["index", column],
    };
    let rows = values.iter().enumerate().map(|(i, v)| {
        let mut r = vec![i.to_string(), v.clone()];
        if let Some(l) = labels {
            r.push(l[i].to_string());
        }
        r
    });
    write_atomic(path, &csv_bytes(&header, rows)?)?;
    Ok(())
}

fn anomaly(config: &RunConfig, data: &Dataset, report: &mut Report) -> Result<()> {
    let boost = BoostConfig {
        members: config.members,
        filter_fraction: config.filter_fraction,
        filter_rounds: config.filter_rounds,
        train: train_config(config, TrainConfig::anomaly()),
        dim: config.k,
        source: config.source,
        seed: config.seed,
        workers: config.workers,
    };
    let out: AnomalyOutcome = run_anomaly(data, &boost, config.ablation)?;
    let members = &out.ensemble.members;
    report.push("seeds.base", config.seed);
    report.push("seeds.members", list(members.iter().map(|m| m.seed)));
    report.push("boost.train_sizes", list(&members[0].train_sizes));
    report.push("model.m", members[0].model.m());
    if let Some(b) = members[0].model.map().bandwidth() {
        report.push("model.bandwidth", b);
    }
    loss_summary(report, &mean_trace(members.iter().map(|m| &m.trace)));
    if let (Some(roc), Some(pr)) = (out.auc_roc, out.auc_pr) {
        report.push("metrics.auc_roc", roc);
        report.push("metrics.auc_pr", pr);
    }
    let mean = out.scores.iter().sum::<f64>() / out.scores.len() as f64;
    report.push("metrics.score_mean", mean);
    report.push("metrics.score_max", out.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    report.push("timing.train_seconds", out.train_seconds);
    report.push("timing.score_seconds", out.score_seconds);

    if let Some(path) = &config.scores {
        let values: Vec<String> = out.scores.iter().map(|s| s.to_string()).collect();
        write_indexed(path, "score", &values, data.labels())?;
    }
    if let Some(path) = &config.model {
        save_ensemble(path, &out.ensemble)?;
    }
    Ok(())
}

fn cluster(config: &RunConfig, data: &Dataset, report: &mut Report) -> Result<()> {
    let cc = ClusterConfig {
        train: train_config(config, TrainConfig::clustering()),
        k_proj: config.k,
        source: config.source,
        restarts: config.restarts,
        max_iters: config.max_iters,
        clusters: config.clusters,
        normalize_embeddings: config.normalize_embeddings,
        seed: config.seed,
        workers: config.workers,
    };
    let out: ClusteringOutcome = run_clustering(data, &cc, config.ablation)?;
    report.push("seeds.base", config.seed);
    report.push("seeds.map", derive_seed(config.seed, 0));
    report.push("seeds.train", derive_seed(config.seed, 1));
    report.push("seeds.restarts", list(out.restarts.iter().map(|r| r.seed)));
    report.push("model.m", out.model.m());
    if let Some(b) = out.model.map().bandwidth() {
        report.push("model.bandwidth", b);
    }
    loss_summary(report, &out.trace);
    report.push("metrics.k", out.k);
    if let Some(s) = out.scores {
        report.push("metrics.nmi_mean", s.nmi_mean);
        report.push("metrics.nmi_std", s.nmi_std);
        report.push("metrics.f_mean", s.f_mean);
        report.push("metrics.f_std", s.f_std);
        report.push("restarts.nmi", list(out.restarts.iter().filter_map(|r| r.nmi)));
        report.push("restarts.f", list(out.restarts.iter().filter_map(|r| r.f_score)));
    }
    report.push("restarts.inertia", list(out.restarts.iter().map(|r| r.inertia)));
    report.push("timing.train_seconds", out.train_seconds);
    report.push("timing.cluster_seconds", out.cluster_seconds);

    if let Some(path) = &config.assignments {
        let values: Vec<String> = out.best_assignments.iter().map(|a| a.to_string()).collect();
        write_indexed(path, "cluster", &values, data.labels())?;
    }
    if let Some(path) = &config.model {
        save_model(path, &out.model)?;
    }
    Ok(())
}

fn project(config: &RunConfig, data: &Dataset, report: &mut Report) -> Result<()> {
    let started = Instant::now();
    let seed = derive_seed(config.seed, 0);
    let map = config.source.build(data.features(), config.k, seed)?;
    let projected = map.apply(data.features())?;
    let seconds = started.elapsed().as_secs_f64();
    report.push("seeds.map", seed);
    report.push("projection.kind", map.kind().name());
    report.push("projection.in_dim", map.in_dim());
    report.push("projection.out_dim", map.out_dim());
    if let Some(b) = map.bandwidth() {
        report.push("projection.bandwidth", b);
    }
    if let Some(p) = map.density() {
        report.push("projection.density", p);
    }
    let mean_sq = projected.row_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
        / projected.rows() as f64;
    report.push("metrics.mean_self_product", mean_sq);
    report.push("timing.project_seconds", seconds);

    if let Some(path) = &config.output {
        let names: Vec<String> = (0..projected.cols()).map(|j| format!("eta_{j}")).collect();
        let header: Vec<&str> = names.iter().map(String::as_str).collect();
        let rows = projected.row_iter().map(|r| r.iter().map(|v| format!("{v:?}")).collect());
        write_atomic(path, &csv_bytes(&header, rows)?)?;
    }
    Ok(())
}

fn column(data: &Dataset, name: &str) -> Result<usize> {
    data.feature_names()
        .and_then(|names| names.iter().position(|n| n == name))
        .ok_or_else(|| CliError::config(format!("column {name:?} not found in the input header")))
}

fn eval(config: &RunConfig, report: &mut Report) -> Result<()> {
    let started = Instant::now();
    let label = LabelColumn::Name(config.label.clone().expect("eval label resolved"));
    let data = load_csv(&config.input, Some(&label), true)?;
    let labels = data.labels().expect("label column requested");
    report.push("data.rows", data.n());
    match config.eval_mode {
        EvalMode::Binary => {
            let c = column(&data, &config.score_column)?;
            let scores: Vec<f64> = data.features().row_iter().map(|r| r[c]).collect();
            report.push("metrics.auc_roc", auc_roc(&scores, labels)?);
            report.push("metrics.auc_pr", auc_pr(&scores, labels)?);
        }
        EvalMode::Partition => {
            let c = column(&data, &config.prediction_column)?;
            let predicted = data
                .features()
                .row_iter()
                .enumerate()
                .map(|(i, r)| {
                    let v = r[c];
                    if v.fract() == 0.0 {
                        Ok(v as i64)
                    } else {
                        Err(CliError::config(format!("row {}: cluster id {v} is not an integer", i + 1)))
                    }
                })
                .collect::<Result<Vec<i64>>>()?;
            report.push("metrics.nmi", nmi(labels, &predicted)?);
            report.push("metrics.nmi_arithmetic", nmi_with(labels, &predicted, NmiNormalization::Arithmetic)?);
            report.push("metrics.pairwise_f", pairwise_f(labels, &predicted)?);
        }
    }
    report.push("timing.eval_seconds", started.elapsed().as_secs_f64());
    Ok(())
}
