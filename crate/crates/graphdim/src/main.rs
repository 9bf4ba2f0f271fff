//! Command-line front end: synthetic dataset generation, single-cloud
//! estimation, and replicated benchmarks.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 estimation failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use graphdim::harness::{self, Method, THREADS_ENV};
use graphdim::{
    estimate_with, load_cloud, run_bench, run_bench_with_workers, sample, save_cloud,
    stability_search, write_results, BenchConfig, Error, EstimatorConfig, ManifoldKind,
    ManifoldSpec, SampleConfig,
};

#[derive(Parser)]
#[command(
    name = "graphdim",
    version,
    about = "Intrinsic dimension estimation via local quadratic graph structure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic manifold into a CSV point cloud.
    Synth(SynthArgs),
    /// Estimate the intrinsic dimension of a CSV point cloud.
    Estimate(EstimateArgs),
    /// Run a replicated benchmark from a JSON configuration.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Manifold family.
    #[arg(long, value_enum)]
    kind: ManifoldKind,
    /// Intrinsic dimension.
    #[arg(long)]
    d: usize,
    /// Ambient dimension.
    #[arg(long)]
    p: usize,
    /// Number of points.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Standard deviation of added ambient Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Sphere/ball/deformed-sphere radius R.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Gaussian-surface variance.
    #[arg(long, default_value_t = 0.25)]
    variance: f64,
    /// Deformed-sphere minor radius r.
    #[arg(long, default_value_t = 0.5)]
    deform_r: f64,
    /// Deformed-sphere frequency c.
    #[arg(long, default_value_t = 1.0)]
    deform_c: f64,
    /// Skip the random orthogonal embedding (keep zero-padded axes).
    #[arg(long)]
    no_rotation: bool,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV path (one point per row).
    #[arg(long = "in")]
    input: PathBuf,
    /// Input has a single header row to skip.
    #[arg(long)]
    header: bool,
    #[arg(long, value_enum)]
    method: Method,
    /// Neighborhood size for a single-K run.
    #[arg(long, conflicts_with = "k_grid")]
    k: Option<usize>,
    /// Neighborhood sweep `start:stop:step` with stability aggregation.
    #[arg(long)]
    k_grid: Option<String>,
    /// Stability window width (grid points).
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// QE p-value threshold.
    #[arg(long, default_value_t = EstimatorConfig::DEFAULT_ALPHA)]
    alpha: f64,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark configuration (serialized BenchConfig).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.csv / results.json.
    #[arg(long)]
    out: PathBuf,
}

/// JSON document the `estimate` subcommand emits.
#[derive(Serialize)]
struct EstimateReport {
    input: String,
    method: Method,
    d_hat: f64,
    d_rounded: usize,
    per_k: Vec<PerKReport>,
    stability: Option<harness::Stability>,
}

#[derive(Serialize)]
struct PerKReport {
    k: usize,
    d_hat: f64,
    d_rounded: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not failures.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let outcome = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let mut spec = ManifoldSpec::new(args.kind, args.d, args.p);
    spec.params.radius = args.radius;
    spec.params.variance = args.variance;
    spec.params.deform_r = args.deform_r;
    spec.params.deform_c = args.deform_c;
    let cfg = SampleConfig {
        n: args.n,
        seed: args.seed,
        noise_sigma: args.noise,
        embed_rotation: !args.no_rotation,
    };
    let cloud = sample(&spec, &cfg)?;
    save_cloud(&cloud, &args.out)?;
    eprintln!(
        "wrote {} points of dimension {} to {}",
        cloud.len(),
        cloud.dim(),
        args.out.display()
    );
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Error> {
    let cloud = load_cloud(&args.input, args.header)?;
    let grid: Vec<usize> = match (&args.k, &args.k_grid) {
        (Some(k), None) => vec![*k],
        (None, Some(spec)) => harness::parse_k_grid(spec)?,
        (None, None) => {
            return Err(Error::InvalidParameter(
                "either --k or --k-grid is required".into(),
            ));
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };

    let run = || -> Result<EstimateReport, Error> {
        let mut per_k = Vec::with_capacity(grid.len());
        for &k in &grid {
            let mut cfg = EstimatorConfig::new(k);
            cfg.alpha = args.alpha;
            let global = estimate_with(&cloud, args.method, &cfg)?;
            per_k.push(PerKReport {
                k,
                d_hat: global.d_hat,
                d_rounded: global.d_rounded,
            });
        }
        let stability = if per_k.len() >= 2 {
            let lists: Vec<(usize, Vec<f64>)> =
                per_k.iter().map(|r| (r.k, vec![r.d_hat])).collect();
            Some(stability_search(&lists, args.window.min(per_k.len()), 1.0)?)
        } else {
            None
        };
        let d_hat = stability
            .as_ref()
            .map(|s| s.mean)
            .unwrap_or_else(|| per_k[0].d_hat);
        Ok(EstimateReport {
            input: args.input.display().to_string(),
            method: args.method,
            d_hat,
            d_rounded: d_hat.round() as usize,
            per_k,
            stability,
        })
    };
    let report = match worker_cap() {
        Some(w) => build_pool(w)?.install(run),
        None => run(),
    }?;

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize report: {e}")))?;
    std::fs::write(&args.out, json).map_err(|e| Error::Io {
        path: args.out.display().to_string(),
        source: e,
    })?;
    eprintln!("d_hat = {:.4} (rounded {})", report.d_hat, report.d_rounded);
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::Io {
        path: args.config.display().to_string(),
        source: e,
    })?;
    let cfg: BenchConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: args.config.display().to_string(),
        row: e.line(),
        column: Some(e.column()),
        message: e.to_string(),
    })?;
    let results = match worker_cap() {
        Some(w) => run_bench_with_workers(&cfg, w)?,
        None => run_bench(&cfg)?,
    };
    write_results(&results, &args.out)?;
    for result in &results {
        let status = match &result.stability {
            Some(s) if s.stable => format!(
                "{:.3} +- {:.3} (K in [{}, {}])",
                s.mean, s.std, s.k_lo, s.k_hi
            ),
            Some(s) => format!("{:.3} +- {:.3} (unstable, whole grid)", s.mean, s.std),
            None => "no estimates".into(),
        };
        eprintln!("{:<12} {:<9} {status}", result.manifold, result.method);
    }
    eprintln!("results written to {}", args.out.display());
    Ok(())
}

fn worker_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w >= 1)
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))
}
