//! Run configuration: a flat TOML key/value file merged with command-line
//! flags (flags win), then resolved against per-task defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use rdp_core::network::{DEFAULT_BATCH_SIZE, DEFAULT_LEAKY_SLOPE, DEFAULT_LEARNING_RATE};
use rdp_core::numerics::LabelColumn;
use rdp_core::{Ablation, Source};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Anomaly,
    Cluster,
    Project,
    Eval,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Anomaly => "anomaly",
            TaskKind::Cluster => "cluster",
            TaskKind::Project => "project",
            TaskKind::Eval => "eval",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "anomaly" => TaskKind::Anomaly,
            "cluster" => TaskKind::Cluster,
            "project" => TaskKind::Project,
            "eval" => TaskKind::Eval,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Scores against binary labels: AUC-ROC and AUC-PR.
    Binary,
    /// Predicted clusters against labels: NMI and pairwise F.
    Partition,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Binary => "binary",
            EvalMode::Partition => "partition",
        }
    }
}

/// Every setting, all optional. Used both as the config-file schema and as
/// the flag set of each subcommand.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Must match the subcommand when given in a file.
    #[arg(skip)]
    pub task: Option<String>,
    /// Input CSV file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Label column: header name or 0-based index.
    #[arg(long)]
    pub label: Option<String>,
    /// Whether the input has a header row [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub header: Option<bool>,
    /// Random map supplying the targets: rff, srp, gaussian or identity [default: rff].
    #[arg(long)]
    pub source: Option<String>,
    /// RFF bandwidth; median heuristic when absent.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Sparse projection density; 1/sqrt(D) when absent.
    #[arg(long)]
    pub density: Option<f64>,
    /// Representation dimension.
    #[arg(long)]
    pub m: Option<usize>,
    /// Random map output dimension.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight of the auxiliary loss.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub leaky_slope: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_rdp_loss: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_aux_loss: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_boosting: Option<bool>,
    /// Ensemble size.
    #[arg(long)]
    pub members: Option<usize>,
    #[arg(long)]
    pub filter_fraction: Option<f64>,
    #[arg(long)]
    pub filter_rounds: Option<usize>,
    /// K-means restarts.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Cluster count; number of distinct labels when absent.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for members and restarts; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Standardize columns and scale rows to unit mean square norm [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize_embeddings: Option<bool>,
    /// Where to write the report; stdout only when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-row anomaly scores CSV.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Per-row cluster assignments CSV.
    #[arg(long)]
    pub assignments: Option<PathBuf>,
    /// Trained model (cluster) or ensemble (anomaly) file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Projected matrix CSV (project).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// eval: binary or partition [default: binary].
    #[arg(long)]
    pub eval_mode: Option<String>,
    /// eval: score column name [default: score].
    #[arg(long)]
    pub score_column: Option<String>,
    /// eval: predicted cluster column name [default: cluster].
    #[arg(long)]
    pub prediction_column: Option<String>,
}

macro_rules! overlay {
    ($top:expr, $base:expr; $($f:ident),* $(,)?) => {
        Settings { $($f: $top.$f.or($base.$f),)* }
    };
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config file: {}", e.message())))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| rdp_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    /// Values in `self` take precedence over `base`.
    pub fn over(self, base: Settings) -> Settings {
        overlay!(self, base; task, input, label, header, source, bandwidth, density, m, k, epochs,
            batch, lr, lambda, leaky_slope, no_rdp_loss, no_aux_loss, no_boosting, members,
            filter_fraction, filter_rounds, restarts, max_iters, clusters, seed, workers,
            standardize, normalize_embeddings, report, scores, assignments, model, output,
            eval_mode, score_column, prediction_column)
    }
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskKind,
    pub input: PathBuf,
    pub label: Option<String>,
    pub header: bool,
    pub source: Source,
    pub m: usize,
    pub k: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub lambda: f64,
    pub leaky_slope: f64,
    pub ablation: Ablation,
    pub members: usize,
    pub filter_fraction: f64,
    pub filter_rounds: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub clusters: Option<usize>,
    pub seed: u64,
    pub workers: usize,
    pub standardize: bool,
    pub normalize_embeddings: bool,
    pub report: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub assignments: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub eval_mode: EvalMode,
    pub score_column: String,
    pub prediction_column: String,
    /// Keys whose values came from defaults rather than the file or flags.
    pub defaulted: Vec<&'static str>,
}

struct Defaults<'a> {
    filled: &'a mut Vec<&'static str>,
}

impl Defaults<'_> {
    fn or<T>(&mut self, key: &'static str, v: Option<T>, default: T) -> T {
        v.unwrap_or_else(|| {
            self.filled.push(key);
            default
        })
    }
}

struct TaskDefaults {
    dim: usize,
    epochs: usize,
}

fn task_defaults(task: TaskKind) -> TaskDefaults {
    match task {
        TaskKind::Cluster => TaskDefaults { dim: 1024, epochs: 1000 },
        _ => TaskDefaults { dim: 50, epochs: 200 },
    }
}

fn parse_source(name: &str, bandwidth: Option<f64>, density: Option<f64>) -> std::result::Result<Source, String> {
    match name {
        "rff" => Ok(Source::Rff { bandwidth }),
        "srp" => Ok(Source::Srp { density }),
        "gaussian" => Ok(Source::GaussianRp),
        "identity" => Ok(Source::Identity),
        other => Err(format!("source must be one of rff, srp, gaussian, identity; got {other:?}")),
    }
}

impl RunConfig {
    /// Fills defaults and validates; every problem is reported at once.
    pub fn resolve(task: TaskKind, s: Settings) -> Result<Self> {
        let mut errors = Vec::new();
        let mut filled = Vec::new();
        let mut d = Defaults { filled: &mut filled };
        let td = task_defaults(task);

        if let Some(t) = &s.task {
            match TaskKind::parse(t) {
                Some(t) if t == task => {}
                Some(t) => errors.push(format!("config task {} does not match subcommand {}", t.name(), task.name())),
                None => errors.push(format!("unknown task {t:?}")),
            }
        }
        let input = match s.input {
            Some(p) => p,
            None => {
                errors.push("input is required".into());
                PathBuf::new()
            }
        };
        let source_name = d.or("source", s.source, "rff".into());
        let source = parse_source(&source_name, s.bandwidth, s.density).unwrap_or_else(|e| {
            errors.push(e);
            Source::Rff { bandwidth: None }
        });
        if let Some(b) = s.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                errors.push(format!("bandwidth must be positive, got {b}"));
            }
            if source_name != "rff" {
                errors.push("bandwidth applies only to the rff source".into());
            }
        }
        if let Some(p) = s.density {
            if !(p > 0.0 && p <= 1.0) {
                errors.push(format!("density must lie in (0, 1], got {p}"));
            }
            if source_name != "srp" {
                errors.push("density applies only to the srp source".into());
            }
        }

        let ablation = Ablation {
            no_rdp_loss: d.or("no_rdp_loss", s.no_rdp_loss, false),
            no_aux_loss: d.or("no_aux_loss", s.no_aux_loss, false),
            no_boosting: d.or("no_boosting", s.no_boosting, false),
        };
        if ablation.no_rdp_loss && ablation.no_aux_loss {
            errors.push("no loss enabled: no_rdp_loss and no_aux_loss cannot both be set".into());
        }

        // anomaly scoring compares φ(x) with η(x), so M follows K
        let (m, k) = match (task, s.m, s.k) {
            (TaskKind::Anomaly, Some(m), Some(k)) if m != k => {
                errors.push(format!("anomaly detection needs m = k, got m = {m}, k = {k}"));
                (m, k)
            }
            (TaskKind::Anomaly, Some(v), None) => {
                filled.push("k");
                (v, v)
            }
            (TaskKind::Anomaly, None, Some(v)) => {
                filled.push("m");
                (v, v)
            }
            (_, m, k) => {
                let mut d = Defaults { filled: &mut filled };
                (d.or("m", m, td.dim), d.or("k", k, td.dim))
            }
        };
        let mut d = Defaults { filled: &mut filled };
        if m == 0 || k == 0 {
            errors.push("m and k must be at least 1".into());
        }
        let epochs = d.or("epochs", s.epochs, td.epochs);
        if epochs == 0 {
            errors.push("epochs must be at least 1".into());
        }
        let batch = d.or("batch", s.batch, DEFAULT_BATCH_SIZE);
        if batch < 2 {
            errors.push(format!("batch must be at least 2, got {batch}"));
        }
        let lr = d.or("lr", s.lr, DEFAULT_LEARNING_RATE);
        if !(lr > 0.0 && lr.is_finite()) {
            errors.push(format!("lr must be positive, got {lr}"));
        }
        let lambda = d.or("lambda", s.lambda, 1.0);
        if !(lambda >= 0.0 && lambda.is_finite()) {
            errors.push(format!("lambda must be nonnegative, got {lambda}"));
        }
        let leaky_slope = d.or("leaky_slope", s.leaky_slope, DEFAULT_LEAKY_SLOPE);
        if !(0.0..1.0).contains(&leaky_slope) {
            errors.push(format!("leaky_slope must lie in [0, 1), got {leaky_slope}"));
        }
        let members = d.or("members", s.members, 30);
        if members == 0 {
            errors.push("members must be at least 1".into());
        }
        let filter_fraction = d.or("filter_fraction", s.filter_fraction, 0.05);
        if !(0.0..0.5).contains(&filter_fraction) {
            errors.push(format!("filter_fraction must lie in [0, 0.5), got {filter_fraction}"));
        }
        let filter_rounds = d.or("filter_rounds", s.filter_rounds, 1);
        let restarts = d.or("restarts", s.restarts, 30);
        if restarts == 0 {
            errors.push("restarts must be at least 1".into());
        }
        let max_iters = d.or("max_iters", s.max_iters, rdp_core::clustering::DEFAULT_MAX_ITERS);
        if s.clusters == Some(0) {
            errors.push("clusters must be at least 1".into());
        }
        let eval_mode = match d.or("eval_mode", s.eval_mode, "binary".into()).as_str() {
            "binary" => EvalMode::Binary,
            "partition" => EvalMode::Partition,
            other => {
                errors.push(format!("eval_mode must be binary or partition, got {other:?}"));
                EvalMode::Binary
            }
        };
        let label = match (task, s.label) {
            (TaskKind::Eval, None) => Some(d.or("label", None, "label".to_string())),
            (_, l) => l,
        };
        if task == TaskKind::Eval && matches!(label.as_deref().map(LabelColumn::parse), Some(LabelColumn::Index(_))) {
            errors.push("eval selects columns by header name".into());
        }

        let config = RunConfig {
            task,
            input,
            label,
            header: d.or("header", s.header, true),
            source,
            m,
            k,
            epochs,
            batch,
            lr,
            lambda,
            leaky_slope,
            ablation,
            members,
            filter_fraction,
            filter_rounds,
            restarts,
            max_iters,
            clusters: s.clusters,
            seed: d.or("seed", s.seed, 0),
            workers: d.or("workers", s.workers, 0),
            standardize: d.or("standardize", s.standardize, true),
            normalize_embeddings: d.or("normalize_embeddings", s.normalize_embeddings, false),
            report: s.report,
            scores: s.scores,
            assignments: s.assignments,
            model: s.model,
            output: s.output,
            eval_mode,
            score_column: d.or("score_column", s.score_column, "score".into()),
            prediction_column: d.or("prediction_column", s.prediction_column, "cluster".into()),
            defaulted: filled,
        };
        if task == TaskKind::Eval && !config.header {
            errors.push("eval needs a header row".into());
        }
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(CliError::Config(errors))
        }
    }
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())
}

impl RunConfig {
    /// `(key, value)` pairs describing every resolved setting.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("task", self.task.name().to_string()),
            ("input", self.input.display().to_string()),
            ("label", self.label.clone().unwrap_or_else(|| "none".into())),
            ("header", self.header.to_string()),
            ("standardize", self.standardize.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
        ];
        if self.task != TaskKind::Eval {
            out.push(("source", self.source.name().to_string()));
            match self.source {
                Source::Rff { bandwidth } => {
                    out.push(("bandwidth", bandwidth.map_or_else(|| "median".into(), |b| b.to_string())))
                }
                Source::Srp { density } => {
                    out.push(("density", density.map_or_else(|| "inverse_sqrt_d".into(), |p| p.to_string())))
                }
                _ => {}
            }
            out.push(("k", self.k.to_string()));
        }
        if matches!(self.task, TaskKind::Anomaly | TaskKind::Cluster) {
            out.extend([
                ("m", self.m.to_string()),
                ("epochs", self.epochs.to_string()),
                ("batch", self.batch.to_string()),
                ("lr", self.lr.to_string()),
                ("lambda", self.lambda.to_string()),
                ("leaky_slope", self.leaky_slope.to_string()),
                ("no_rdp_loss", self.ablation.no_rdp_loss.to_string()),
                ("no_aux_loss", self.ablation.no_aux_loss.to_string()),
                ("model", show_path(&self.model)),
            ]);
        }
        match self.task {
            TaskKind::Anomaly => out.extend([
                ("no_boosting", self.ablation.no_boosting.to_string()),
                ("members", self.members.to_string()),
                ("filter_fraction", self.filter_fraction.to_string()),
                ("filter_rounds", self.filter_rounds.to_string()),
                ("scores", show_path(&self.scores)),
            ]),
            TaskKind::Cluster => out.extend([
                ("restarts", self.restarts.to_string()),
                ("max_iters", self.max_iters.to_string()),
                ("clusters", self.clusters.map_or_else(|| "labels".into(), |c| c.to_string())),
                ("normalize_embeddings", self.normalize_embeddings.to_string()),
                ("assignments", show_path(&self.assignments)),
            ]),
            TaskKind::Project => out.push(("output", show_path(&self.output))),
            TaskKind::Eval => {
                out.push(("eval_mode", self.eval_mode.name().to_string()));
                match self.eval_mode {
                    EvalMode::Binary => out.push(("score_column", self.score_column.clone())),
                    EvalMode::Partition => out.push(("prediction_column", self.prediction_column.clone())),
                }
            }
        }
        out.push(("report", show_path(&self.report)));
        out.push(("defaulted", if self.defaulted.is_empty() { "none".into() } else { self.defaulted.join(",") }));
        out
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_input() -> Settings {
        Settings {
            input: Some("x.csv".into()),
            ..Settings::default()
        }
    }

    #[test]
    fn task_defaults_fill_dims() {
        let a = RunConfig::resolve(TaskKind::Anomaly, with_input()).unwrap();
        assert_eq!((a.m, a.k, a.epochs, a.batch, a.lr), (50, 50, 200, 192, 0.1));
        assert_eq!((a.members, a.filter_fraction, a.filter_rounds), (30, 0.05, 1));
        let c = RunConfig::resolve(TaskKind::Cluster, with_input()).unwrap();
        assert_eq!((c.m, c.k, c.epochs, c.restarts), (1024, 1024, 1000, 30));
        assert!(c.defaulted.contains(&"m") && c.defaulted.contains(&"epochs"));
    }

    #[test]
    fn anomaly_dims_follow_each_other() {
        let s = Settings {
            k: Some(64),
            ..with_input()
        };
        let a = RunConfig::resolve(TaskKind::Anomaly, s).unwrap();
        assert_eq!((a.m, a.k), (64, 64));
        assert!(a.defaulted.contains(&"m"));
    }

    #[test]
    fn all_errors_reported_together() {
        let s = Settings {
            m: Some(3),
            k: Some(4),
            batch: Some(1),
            lr: Some(-1.0),
            no_rdp_loss: Some(true),
            no_aux_loss: Some(true),
            source: Some("pca".into()),
            ..Settings::default()
        };
        match RunConfig::resolve(TaskKind::Anomaly, s) {
            Err(CliError::Config(errs)) => {
                assert_eq!(errs.len(), 6, "{errs:?}");
                assert!(errs.iter().any(|e| e.contains("no loss enabled")));
                assert!(errs.iter().any(|e| e.contains("input is required")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flags_override_file() {
        let file = Settings::from_toml("seed = 3\nlr = 0.05\nsource = \"srp\"\n").unwrap();
        let flags = Settings {
            seed: Some(9),
            ..with_input()
        };
        let merged = flags.over(file);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.lr, Some(0.05));
        assert_eq!(merged.source.as_deref(), Some("srp"));
        assert!(merged.input.is_some());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(Settings::from_toml("learning_rate = 0.1"), Err(CliError::Config(_))));
    }

    #[test]
    fn task_mismatch_rejected() {
        let s = Settings {
            task: Some("cluster".into()),
            ..with_input()
        };
        assert!(RunConfig::resolve(TaskKind::Anomaly, s).is_err());
    }

    #[test]
    fn echo_lists_defaults() {
        let c = RunConfig::resolve(TaskKind::Cluster, with_input()).unwrap();
        let echo = c.echo();
        let get = |k: &str| echo.iter().find(|(key, _)| *key == k).map(|(_, v)| v.clone());
        assert_eq!(get("bandwidth").as_deref(), Some("median"));
        assert_eq!(get("clusters").as_deref(), Some("labels"));
        assert!(get("defaulted").unwrap().contains("restarts"));
    }
}
