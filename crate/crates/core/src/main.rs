use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use gridfilter::harness::{self, bounds, report, sweep, ExperimentConfig};
use gridfilter::Result;

#[derive(Parser)]
#[command(name = "gridfilter", version, about = "Grid-based nonlinear filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Worst-case grid filter error against a particle filter, per resolution.
    Sweep(Common),
    /// Quantization error bounds measured on sampled paths.
    Bounds(Common),
    /// Build and store the transition matrix at a single resolution.
    Train(Common),
    /// Conditional-regularity deficits and drift bounds.
    Regularity(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; defaults to the `output` key of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every logical core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// `key=value` override, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        for s in &self.set {
            cfg.apply_override(s)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        cfg.validate()?;
        let out = cfg
            .output
            .clone()
            .ok_or_else(|| gridfilter::Error::Config("no output path (use --out)".into()))?;
        Ok((cfg, out))
    }
}

fn done(path: &Path) {
    info!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(c) => {
            let (cfg, out) = c.load()?;
            let rows = harness::with_jobs(c.jobs, || harness::run_error_sweep(&cfg))??;
            sweep::sweep_table(&cfg, &rows).write(&out)?;
            done(&out);
            let timing = sweep::timing_path(&out);
            sweep::timing_table(&cfg, &rows).write(&timing)?;
            done(&timing);
        }
        Command::Bounds(c) => {
            let (cfg, out) = c.load()?;
            let rows = harness::with_jobs(c.jobs, || harness::run_bound_checks(&cfg))??;
            bounds::bounds_table(&cfg, &rows).write(&out)?;
            done(&out);
            let failed = rows.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                log::warn!("{failed} bound check(s) failed");
            }
        }
        Command::Train(c) => {
            let (cfg, out) = c.load()?;
            let trained = harness::with_jobs(c.jobs, || harness::train_transition(&cfg, &out))??;
            done(&out);
            if trained.visits.is_some() {
                info!(
                    "{} zero-visit column(s); visit counts in {}",
                    trained.zero_visit_columns.len(),
                    harness::train::visits_path(&out).display()
                );
            }
        }
        Command::Regularity(c) => {
            let (cfg, out) = c.load()?;
            let rep = harness::with_jobs(c.jobs, || harness::run_regularity_report(&cfg))??;
            report::regularity_table(&cfg, &rep).write(&out)?;
            done(&out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
