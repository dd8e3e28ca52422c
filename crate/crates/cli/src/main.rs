use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rdp_cli::{run, run_selftest, CliError, RunConfig, Settings, TaskKind};

#[derive(Parser)]
#[command(name = "rdp", version, about = "Random distance prediction: anomaly detection, clustering and projections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TaskArgs {
    /// Flat TOML file of settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand)]
enum Command {
    /// Score rows with a boosted ensemble; AUCs are reported when labels are present.
    Anomaly(TaskArgs),
    /// Train an embedding and run K-means restarts on it.
    Cluster(TaskArgs),
    /// Apply a random map and write the projected matrix.
    Project(TaskArgs),
    /// Evaluate a scores or assignments CSV against its labels.
    Eval(TaskArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

fn execute(task: TaskKind, args: TaskArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    let config = RunConfig::resolve(task, args.settings.over(file))?;
    let report = run(&config)?;
    print!("{report}");
    Ok(())
}

fn selftest() -> Result<(), CliError> {
    let checks = run_selftest();
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("[{}] {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if failed > 0 {
        return Err(CliError::SelftestFailed(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Anomaly(a) => execute(TaskKind::Anomaly, a),
        Command::Cluster(a) => execute(TaskKind::Cluster, a),
        Command::Project(a) => execute(TaskKind::Project, a),
        Command::Eval(a) => execute(TaskKind::Eval, a),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
