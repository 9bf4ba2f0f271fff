//! Experiment engine: dataset ingestion, replicated runs over
//! neighborhood-size grids, stability-region aggregation, and result tables.
//!
//! A benchmark expands into independent (manifold, replicate) tasks, each of
//! which samples one cloud (seeded by a hash of the master seed and the task
//! labels) and estimates it at every grid K with every requested method.
//! Tasks run on a worker pool; results are gathered and reduced in fixed key
//! order, so the output is identical no matter how many workers ran.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    local_pca_estimate, qe_estimate, tls_estimate, twonn_estimate, EstimatorConfig, GlobalEstimate,
};
use crate::manifolds::{sample, ManifoldSpec, SampleConfig};
use crate::neighborhood::PointCloud;
use crate::seeding::derive_seed;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "GRAPHDIM_THREADS";

/// Estimation methods the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Qe,
    Tls,
    LocalPca,
    Twonn,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Qe => "qe",
            Method::Tls => "tls",
            Method::LocalPca => "local-pca",
            Method::Twonn => "twonn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Runs one method on a cloud.
pub fn estimate_with(
    cloud: &PointCloud,
    method: Method,
    cfg: &EstimatorConfig,
) -> Result<GlobalEstimate> {
    match method {
        Method::Qe => qe_estimate(cloud, cfg),
        Method::Tls => tls_estimate(cloud, cfg),
        Method::LocalPca => local_pca_estimate(cloud, cfg),
        Method::Twonn => twonn_estimate(cloud, cfg),
    }
}

/// A named manifold inside a benchmark configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldEntry {
    pub id: String,
    #[serde(flatten)]
    pub spec: ManifoldSpec,
}

/// Full benchmark description; serializable as the `bench.json` config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub manifolds: Vec<ManifoldEntry>,
    pub methods: Vec<Method>,
    /// Sample size per replicate.
    pub n: usize,
    pub replicates: usize,
    /// Ascending neighborhood sizes to sweep.
    pub k_grid: Vec<usize>,
    /// Stability window width in grid points.
    #[serde(default = "default_window")]
    pub window: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Pooled-std threshold above which no window counts as stable.
    #[serde(default = "default_stability_cutoff")]
    pub stability_cutoff: f64,
    /// Apply the seeded random orthogonal embedding when sampling.
    #[serde(default = "default_rotate")]
    pub rotate: bool,
}

fn default_window() -> usize {
    5
}
fn default_stability_cutoff() -> f64 {
    1.0
}
fn default_rotate() -> bool {
    true
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.manifolds.is_empty() {
            return Err(Error::InvalidParameter("no manifolds configured".into()));
        }
        let mut ids = std::collections::HashSet::new();
        for entry in &self.manifolds {
            if entry.id.is_empty() {
                return Err(Error::InvalidParameter(
                    "manifold id must not be empty".into(),
                ));
            }
            if !ids.insert(&entry.id) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate manifold id `{}`",
                    entry.id
                )));
            }
            entry.spec.validate()?;
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods configured".into()));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        if self.k_grid.is_empty() {
            return Err(Error::InvalidParameter("k_grid must not be empty".into()));
        }
        if !self.k_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "k_grid must be strictly ascending".into(),
            ));
        }
        if self.k_grid[0] < 3 {
            return Err(Error::InvalidParameter(
                "neighborhood sizes must be at least 3".into(),
            ));
        }
        if *self.k_grid.last().unwrap() >= self.n {
            return Err(Error::InvalidParameter(format!(
                "largest K={} needs n > K, got n={}",
                self.k_grid.last().unwrap(),
                self.n
            )));
        }
        // A single-K grid has nothing to sweep; the window is ignored there.
        if self.k_grid.len() >= 2 && (self.window < 2 || self.window > self.k_grid.len()) {
            return Err(Error::InvalidParameter(format!(
                "window must lie in [2, {}], got {}",
                self.k_grid.len(),
                self.window
            )));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidParameter("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Replicate statistics for one grid K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStats {
    pub k: usize,
    /// Estimates in replicate order (failed replicates omitted).
    pub estimates: Vec<f64>,
    /// Absent when every replicate failed at this K.
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// Stability-region aggregation over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    /// Selected window, inclusive K bounds.
    pub k_lo: usize,
    pub k_hi: usize,
    pub mean: f64,
    pub std: f64,
    /// False when no window beat the cutoff and the whole grid was pooled.
    pub stable: bool,
}

/// Aggregated outcome for one (manifold, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub manifold: String,
    pub method: Method,
    pub per_k: Vec<KStats>,
    pub stability: Option<Stability>,
    /// Total estimation time across replicates and grid points. Excluded
    /// from determinism comparisons.
    pub wall_secs: f64,
    /// Human-readable notes for estimates that failed.
    pub failures: Vec<String>,
}

fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Some((mean, var.sqrt()))
}

/// Searches every contiguous window of the grid for the one with minimal
/// pooled standard deviation; ties resolve to the smallest starting K. When
/// even the best window's pooled std exceeds `cutoff`, the whole grid is
/// pooled instead and the result is flagged unstable.
pub fn stability_search(
    per_k: &[(usize, Vec<f64>)],
    window: usize,
    cutoff: f64,
) -> Result<Stability> {
    if per_k.is_empty() || per_k.iter().all(|(_, v)| v.is_empty()) {
        return Err(Error::InvalidInput(
            "stability search needs at least one estimate".into(),
        ));
    }
    if window > per_k.len() {
        return Err(Error::InvalidParameter(format!(
            "window {window} exceeds grid length {}",
            per_k.len()
        )));
    }

    let mut best: Option<(usize, f64, f64)> = None; // (start, mean, std)
    for start in 0..=(per_k.len() - window) {
        let pooled: Vec<f64> = per_k[start..start + window]
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let Some((mean, std)) = mean_std(&pooled) else {
            continue;
        };
        // Strict comparison keeps the earliest window on ties.
        if best.is_none_or(|(_, _, s)| std < s) {
            best = Some((start, mean, std));
        }
    }
    let (start, mean, std) =
        best.ok_or_else(|| Error::InvalidInput("no window contains any estimates".into()))?;

    if std > cutoff {
        let pooled: Vec<f64> = per_k.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        let (mean, std) = mean_std(&pooled).expect("nonempty by the checks above");
        return Ok(Stability {
            k_lo: per_k[0].0,
            k_hi: per_k.last().unwrap().0,
            mean,
            std,
            stable: false,
        });
    }
    Ok(Stability {
        k_lo: per_k[start].0,
        k_hi: per_k[start + window - 1].0,
        mean,
        std,
        stable: true,
    })
}

struct TaskOutput {
    manifold_idx: usize,
    replicate: usize,
    /// Cell per (k_idx, method_idx): the estimate or a failure note.
    cells: Vec<std::result::Result<f64, String>>,
    /// Estimation time per cell, matching `cells`.
    cell_secs: Vec<f64>,
}

fn worker_count_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w >= 1)
}

/// Runs the benchmark with the worker count taken from `GRAPHDIM_THREADS`
/// (falling back to rayon's default).
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<RunResult>> {
    match worker_count_from_env() {
        Some(w) => run_bench_with_workers(cfg, w),
        None => {
            cfg.validate()?;
            check_seed_collisions(cfg)?;
            Ok(run_bench_inner(cfg))
        }
    }
}

/// Runs the benchmark on a dedicated pool of `workers` threads. The output
/// is identical for any worker count.
pub fn run_bench_with_workers(cfg: &BenchConfig, workers: usize) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    check_seed_collisions(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| run_bench_inner(cfg)))
}

fn check_seed_collisions(cfg: &BenchConfig) -> Result<()> {
    let mut seen: HashMap<u64, (usize, usize)> = HashMap::new();
    for (mi, entry) in cfg.manifolds.iter().enumerate() {
        for rep in 0..cfg.replicates {
            let seed = derive_seed(cfg.master_seed, &entry.id, rep as u64);
            if let Some(prev) = seen.insert(seed, (mi, rep)) {
                return Err(Error::InvalidParameter(format!(
                    "seed collision between tasks {prev:?} and {:?}",
                    (mi, rep)
                )));
            }
        }
    }
    Ok(())
}

fn run_bench_inner(cfg: &BenchConfig) -> Vec<RunResult> {
    let tasks: Vec<(usize, usize)> = (0..cfg.manifolds.len())
        .flat_map(|mi| (0..cfg.replicates).map(move |rep| (mi, rep)))
        .collect();

    let outputs: Vec<TaskOutput> = tasks
        .par_iter()
        .map(|&(mi, rep)| run_task(cfg, mi, rep))
        .collect();

    // Deterministic reduction in (manifold, method) order.
    let effective_window = cfg.window.min(cfg.k_grid.len());
    let mut results = Vec::new();
    for (mi, entry) in cfg.manifolds.iter().enumerate() {
        for (mj, &method) in cfg.methods.iter().enumerate() {
            let mut per_k = Vec::with_capacity(cfg.k_grid.len());
            let mut failures = Vec::new();
            let mut wall = 0.0;
            for (ki, &k) in cfg.k_grid.iter().enumerate() {
                let mut estimates = Vec::new();
                for output in outputs.iter().filter(|o| o.manifold_idx == mi) {
                    let cell_idx = ki * cfg.methods.len() + mj;
                    wall += output.cell_secs[cell_idx];
                    match &output.cells[cell_idx] {
                        Ok(v) => estimates.push(*v),
                        Err(msg) => failures.push(format!(
                            "{} replicate {} K={} {}: {}",
                            entry.id, output.replicate, k, method, msg
                        )),
                    }
                }
                let stats = mean_std(&estimates);
                per_k.push(KStats {
                    k,
                    estimates,
                    mean: stats.map(|(m, _)| m),
                    std: stats.map(|(_, s)| s),
                });
            }
            let grid: Vec<(usize, Vec<f64>)> =
                per_k.iter().map(|s| (s.k, s.estimates.clone())).collect();
            let stability = stability_search(&grid, effective_window, cfg.stability_cutoff).ok();
            results.push(RunResult {
                manifold: entry.id.clone(),
                method,
                per_k,
                stability,
                wall_secs: wall,
                failures,
            });
        }
    }
    results
}

fn run_task(cfg: &BenchConfig, mi: usize, rep: usize) -> TaskOutput {
    let entry = &cfg.manifolds[mi];
    let seed = derive_seed(cfg.master_seed, &entry.id, rep as u64);
    let sample_cfg = SampleConfig {
        n: cfg.n,
        seed,
        noise_sigma: cfg.noise_sigma,
        embed_rotation: cfg.rotate,
    };
    let n_cells = cfg.k_grid.len() * cfg.methods.len();
    let cloud = match sample(&entry.spec, &sample_cfg) {
        Ok(c) => c,
        Err(e) => {
            return TaskOutput {
                manifold_idx: mi,
                replicate: rep,
                cells: vec![Err(e.to_string()); n_cells],
                cell_secs: vec![0.0; n_cells],
            };
        }
    };
    let mut cells = Vec::with_capacity(n_cells);
    let mut cell_secs = Vec::with_capacity(n_cells);
    for &k in &cfg.k_grid {
        for &method in &cfg.methods {
            let est_cfg = EstimatorConfig::new(k);
            let start = Instant::now();
            let cell = estimate_with(&cloud, method, &est_cfg)
                .map(|g| g.d_hat)
                .map_err(|e| e.to_string());
            cell_secs.push(start.elapsed().as_secs_f64());
            cells.push(cell);
        }
    }
    TaskOutput {
        manifold_idx: mi,
        replicate: rep,
        cells,
        cell_secs,
    }
}

/// Parses a `start:stop:step` inclusive grid description.
pub fn parse_k_grid(text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "expected start:stop:step, got `{text}`"
        )));
    }
    let parse = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::InvalidParameter(format!("bad grid number `{s}` in `{text}`")))
    };
    let (start, stop, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
    if step == 0 || stop < start {
        return Err(Error::InvalidParameter(format!(
            "grid `{text}` must ascend with positive step"
        )));
    }
    Ok((start..=stop).step_by(step).collect())
}

/// Loads a CSV point cloud: one point per row, comma-separated decimals,
/// optionally one header row.
pub fn load_cloud(path: &Path, has_header: bool) -> Result<PointCloud> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let path_str = path.display().to_string();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (line_idx, line) in text.lines().enumerate() {
        let row_no = line_idx + 1;
        if has_header && line_idx == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if let Some(w) = width {
            if fields.len() != w {
                return Err(Error::Parse {
                    path: path_str,
                    row: row_no,
                    column: None,
                    message: format!("expected {w} fields, found {}", fields.len()),
                });
            }
        } else {
            width = Some(fields.len());
        }
        let mut row = Vec::with_capacity(fields.len());
        for (col_idx, field) in fields.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path_str.clone(),
                row: row_no,
                column: Some(col_idx + 1),
                message: format!("`{}` is not a number", field.trim()),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: path_str,
                    row: row_no,
                    column: Some(col_idx + 1),
                    message: "non-finite value".into(),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path_str,
            row: 1,
            column: None,
            message: "file contains no data rows".into(),
        });
    }
    PointCloud::from_points(rows)
}

/// Writes a point cloud as CSV with shortest-round-trip decimal formatting,
/// so a save/load cycle is bit-exact.
pub fn save_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..cloud.len() {
        let row: Vec<String> = cloud.point(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes `results.csv` and `results.json` into `dir`.
///
/// The CSV carries one row per grid K plus one summary row per result;
/// the JSON mirrors the `RunResult` records exactly.
pub fn write_results(results: &[RunResult], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    let csv_path = dir.join("results.csv");
    let mut csv = std::fs::File::create(&csv_path)
        .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    let werr = |e: std::io::Error| Error::io(csv_path.display().to_string(), e);
    writeln!(csv, "manifold,method,k,mean,std,stable,window").map_err(werr)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for result in results {
        for stats in &result.per_k {
            writeln!(
                csv,
                "{},{},{},{},{},,",
                result.manifold,
                result.method,
                stats.k,
                opt(stats.mean),
                opt(stats.std)
            )
            .map_err(werr)?;
        }
        if let Some(s) = &result.stability {
            writeln!(
                csv,
                "{},{},,{},{},{},{}:{}",
                result.manifold, result.method, s.mean, s.std, s.stable, s.k_lo, s.k_hi
            )
            .map_err(werr)?;
        }
    }

    let json_path = dir.join("results.json");
    let json = serde_json::to_string_pretty(results)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize results: {e}")))?;
    std::fs::write(&json_path, json).map_err(|e| Error::io(json_path.display().to_string(), e))?;
    Ok(())
}
