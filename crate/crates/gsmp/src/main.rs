use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gsmp::workbench::{
    cmd_flow, cmd_ks_report, cmd_potential, cmd_torus, cmd_verify, ExperimentConfig, RunArtifacts, Status,
};

#[derive(Parser)]
#[command(name = "gsmp", version, about = "Finite-gap GSMP matrices, the Jacobi flow and Killip-Simon diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed, overriding `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flow steps, overriding `flow_steps`.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Distance weight, overriding `eta`.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the potential of the interval system.
    Potential,
    /// Sample certified points of the isospectral torus.
    Torus,
    /// Run the Jacobi flow and extract Jacobi coefficients.
    Flow,
    /// Run the flow and write the Killip-Simon report.
    KsReport,
    /// Run the acceptance checks.
    Verify,
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn load_config(c: &Common) -> Result<ExperimentConfig, String> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.steps {
        cfg.flow_steps = n;
    }
    if let Some(e) = c.eta {
        cfg.eta = e;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.display().to_string();
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn configure_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("GSMP_THREADS") {
        let n: usize = v.parse().map_err(|_| format!("GSMP_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            return Err("GSMP_THREADS must be positive".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        return usage_error(&e);
    }
    let cfg = match load_config(&cli.common) {
        Ok(c) => c,
        Err(e) => return usage_error(&e),
    };
    let mut art = match RunArtifacts::new(std::path::Path::new(&cfg.out_dir)) {
        Ok(a) => a,
        Err(e) => return usage_error(&e.to_string()),
    };
    let start = Instant::now();
    let (name, result) = match cli.command {
        Command::Potential => ("potential", cmd_potential(&cfg, &mut art)),
        Command::Torus => ("torus", cmd_torus(&cfg, &mut art)),
        Command::Flow => ("flow", cmd_flow(&cfg, &mut art)),
        Command::KsReport => ("ks-report", cmd_ks_report(&cfg, &mut art)),
        Command::Verify => ("verify", cmd_verify(&mut art)),
    };
    let status = match result {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{name}: {e}");
            Status::Partial
        }
    };
    if let Err(e) = art.finish(name, &cfg, status) {
        eprintln!("{name}: {e}");
        return ExitCode::from(2);
    }
    if !cli.common.quiet {
        for line in &art.log {
            eprintln!("{line}");
        }
        eprintln!(
            "{name}: {} files in {} ({:.2}s)",
            art.files().len(),
            art.out_dir().display(),
            start.elapsed().as_secs_f64()
        );
    }
    ExitCode::from(status.exit_code() as u8)
}
