//! Command-line runner: loads an experiment config, applies flag overrides,
//! runs every algorithm and writes the traces.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fedosaa::algorithms::{AlgoConfig, Variant};
use fedosaa::harness::{emit_traces, run_experiment, ExperimentConfig, PartitionScheme, ProblemConfig, RunStatus};
use fedosaa::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "fedosaa", version, about = "Federated optimization simulator with one-step Anderson acceleration")]
struct Cli {
    /// Experiment config (TOML). Without it, the synthetic logistic defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated algorithms, replacing the config's list.
    #[arg(long, value_delimiter = ',')]
    algo: Vec<String>,
    /// Local step size for every algorithm.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    local_epochs: Option<usize>,
    /// Mini-batch size per client; 0 for full batch.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// LIBSVM file; replaces the configured problem.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// iid, imbalance or label-skew.
    #[arg(long)]
    partition: Option<String>,
    /// Output directory for traces.csv and traces.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn apply(cli: &Cli, cfg: &mut ExperimentConfig) -> Result<()> {
    if !cli.algo.is_empty() {
        cfg.algorithms = cli
            .algo
            .iter()
            .map(|name| Variant::parse(name.trim()).map(AlgoConfig::new))
            .collect::<Result<_>>()?;
    }
    for a in &mut cfg.algorithms {
        if let Some(eta) = cli.eta {
            a.eta = eta;
            a.eta_over_beta = None;
        }
        if let Some(l) = cli.local_epochs {
            a.local_epochs = l;
        }
        if let Some(b) = cli.batch_size {
            a.batch_size = b;
        }
    }
    if let Some(k) = cli.clients {
        cfg.partition.clients = k;
    }
    if let Some(t) = cli.rounds {
        cfg.rounds = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(g) = cli.gamma {
        cfg.gamma = g;
    }
    if let Some(path) = &cli.dataset {
        cfg.problem = ProblemConfig::Libsvm { path: path.clone(), label_map: None, subsample: None, dim: None };
    }
    if let Some(p) = &cli.partition {
        cfg.partition.scheme = PartitionScheme::parse(p)?;
    }
    if let Some(dir) = &cli.out {
        cfg.output.csv = Some(dir.join("traces.csv"));
        cfg.output.json = Some(dir.join("traces.json"));
    }
    cfg.validate()
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    apply(&cli, &mut cfg)?;
    let report = run_experiment(&cfg)?;
    println!("f* = {:.12e}, ‖∇f(w*)‖ = {:.3e}", report.reference.f_star, report.reference.grad_norm);
    for t in &report.traces {
        let last = t.records.last().expect("trace has the starting record");
        let status = match &t.status {
            RunStatus::Converged { round } => format!("converged at round {round}"),
            RunStatus::Exhausted => "round limit".to_string(),
            RunStatus::Diverged { round, reason } => format!("diverged at round {round}: {reason}"),
        };
        println!(
            "{:<20} rel_err {:.3e}  comm_rounds {:>5}  floats {:>9}  {status}",
            t.label, last.relative_error, last.comm_rounds, last.comm_floats
        );
    }
    emit_traces(&report, cfg.output.csv.as_deref(), cfg.output.json.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::InvalidConfig(_) | Error::Toml(_) | Error::Parse { .. })) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
