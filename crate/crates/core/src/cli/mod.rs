//! Command-line front end: configuration loading, sweeps, detector-size
//! optimization and the approximation audit.

pub mod config;
pub mod output;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{load_config, parse_config, ExperimentConfig, Format, Metric, Mode};
pub use output::{csv_table, emit_results, json_summary};
pub use sweep::{run_sweep, SweepResult, SweepRow};

use crate::analysis::{audit_approximation, optimal_detector_size, AuditConfig};
use crate::error::{Error, Result};

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "QUADTRACK_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "quadtrack", version, about = "Four-quadrant beam-tracking simulator for ground-to-UAV optical links")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured sweep and write CSV/JSON results.
    Run(RunArgs),
    /// Find the quadrant radius minimizing the analytic tracking error.
    OptimizeRa(OptimizeArgs),
    /// Compare the analytic approximation with exact decisions on an (h, m) grid.
    Audit(AuditArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; overrides the config file and the environment.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; overrides the config file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Smallest quadrant radius, m.
    #[arg(long)]
    pub min: f64,
    /// Largest quadrant radius, m.
    #[arg(long)]
    pub max: f64,
    #[arg(long, default_value_t = 40)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Monte-Carlo draws per grid cell.
    #[arg(long, default_value_t = 200_000)]
    pub draws: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Worker count from, in decreasing priority, the flag, the environment and
/// the config file.
pub fn resolve_workers(flag: Option<usize>, configured: Option<usize>) -> Result<Option<usize>> {
    if let Some(w) = flag {
        if w == 0 {
            return Err(Error::validation("--workers", "must be at least 1"));
        }
        return Ok(Some(w));
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(Some(w)),
            _ => Err(Error::validation(WORKERS_ENV, format!("`{v}` is not a positive integer"))),
        };
    }
    Ok(configured)
}

/// Run `f` on a pool of `workers` threads, or the global pool when unset.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::validation("engine.workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn output_dir(cfg: &ExperimentConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory))
}

/// Execute a parsed command line. Returns the paths of the written files.
pub fn execute(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Run(args) => run_command(args),
        Command::OptimizeRa(args) => optimize_command(args),
        Command::Audit(args) => audit_command(args),
    }
}

fn run_command(args: RunArgs) -> Result<Vec<PathBuf>> {
    let mut cfg = load_config(&args.common.config)?;
    if let Some(t) = args.trials {
        cfg.engine.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.engine.seed = s;
    }
    if let Some(m) = args.mode {
        cfg.engine.mode = m;
    }
    cfg.engine.workers = resolve_workers(args.common.workers, cfg.engine.workers)?;
    cfg.validate()?;
    let result = with_workers(cfg.engine.workers, || run_sweep(&cfg))??;
    let dir = output_dir(&cfg, &args.common.out);
    let paths = emit_results(&result, &dir, &cfg.output.name, &cfg.output.formats)?;
    print!("{}", csv_table(&result));
    Ok(paths)
}

fn optimize_command(args: OptimizeArgs) -> Result<Vec<PathBuf>> {
    let cfg = load_config(&args.common.config)?;
    let workers = resolve_workers(args.common.workers, cfg.engine.workers)?;
    let scenario = cfg.operating_point()?.detector_scenario();
    let opt = with_workers(workers, || optimal_detector_size(&scenario, args.min, args.max, args.points))??;
    let summary = serde_json::json!({
        "version": sweep::VERSION,
        "config": cfg,
        "range": [args.min, args.max],
        "points": args.points,
        "optimum": opt,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Serialize(e.to_string()))? + "\n";
    let dir = output_dir(&cfg, &args.common.out);
    output::ensure_dir(&dir)?;
    let path = dir.join(format!("{}_optimum.json", cfg.output.name));
    output::write_file(&path, &text)?;
    println!(
        "r_a* = {:e} m, P_te* = {:e}, {}",
        opt.r_a,
        opt.value,
        if opt.interior { "interior minimum" } else { "boundary minimum (not bracketed)" }
    );
    Ok(vec![path])
}

fn audit_command(args: AuditArgs) -> Result<Vec<PathBuf>> {
    let cfg = load_config(&args.common.config)?;
    let workers = resolve_workers(args.common.workers, cfg.engine.workers)?;
    let link = *cfg.operating_point()?.link();
    let audit = AuditConfig {
        noise: link.noise,
        l_s: link.l_s,
        p_t: link.p_t,
        h_values: log_grid(link.channel.scale() * 1e-4, link.channel.scale() * 4.0, 13),
        m_values: audit_windows(link.l_s),
        draws: args.draws,
        seed: args.seed.unwrap_or(cfg.engine.seed),
    };
    let rows = with_workers(workers, || audit_approximation(&audit))??;
    let table = output::audit_table(&rows);
    let dir = output_dir(&cfg, &args.common.out);
    output::ensure_dir(&dir)?;
    let path = dir.join(format!("{}_audit.csv", cfg.output.name));
    output::write_file(&path, &table)?;
    print!("{table}");
    Ok(vec![path])
}

/// `n` logarithmically spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

fn audit_windows(l_s: u32) -> Vec<u32> {
    let mut m: Vec<u32> = [1, 2, l_s / 4, l_s / 2, l_s].into_iter().filter(|&m| m >= 1 && m <= l_s).collect();
    m.sort_unstable();
    m.dedup();
    m
}

/// Entry point shared by the binary; maps failures to a non-zero exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", display(&p));
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
