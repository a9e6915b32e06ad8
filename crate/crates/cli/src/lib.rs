//! Command implementations behind the `riskcbf` binary.
//!
//! Output layout of `riskcbf run <cfg> --out DIR`:
//!
//! ```text
//! DIR/config.json      resolved scenario (overrides applied)
//! DIR/metrics.json     ensemble metrics
//! DIR/manifest.json    config hash, tool version, timestamp, seeds, paths
//! DIR/runs/run_K.csv   one trajectory table per run index K
//! ```
//!
//! `metrics.json` keys, in order: `controller`, `num_runs`,
//! `horizon_steps`, `violation_rate`, `mean_min_h`,
//! `per_step_violation_freq` (array over `t = 0..=T`),
//! `mean_terminal_norm`, `seed`.

pub mod manifest;
pub mod overrides;
pub mod plot;
pub mod trajectory_csv;

use std::fs;
use std::path::{Path, PathBuf};

use riskcbf::model::ScenarioConfig;
use riskcbf::simulate::{run_ensemble, EnsembleMetrics};
use serde_json::Value;
use thiserror::Error;

use crate::manifest::{config_hash, OutputPaths, RunManifest};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "RISKCBF_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("{0}")]
    Data(String),
    #[error("state has {0} components; choose two with --dims i,j")]
    NeedDims(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Data(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Simulation(_) => 4,
            CliError::NeedDims(_) => 5,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("csv: {e}"))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn scenario(tree: Value) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::from_value(tree).map_err(|e| CliError::Config(e.to_string()))
}

/// Validates a scenario file.
pub fn cmd_check(path: &Path) -> Result<ScenarioConfig, CliError> {
    scenario(read_json(path)?)
}

/// Worker cap from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))),
        },
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub controller: Option<String>,
    pub overrides: Vec<String>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub metrics: EnsembleMetrics,
    pub manifest: RunManifest,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn pretty(value: &impl serde::Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

/// Runs the ensemble described by the config (after overrides) and writes
/// the output layout described in the crate docs.
pub fn cmd_run(opts: &RunOptions) -> Result<RunSummary, CliError> {
    let mut tree = read_json(&opts.config)?;
    for item in &opts.overrides {
        overrides::apply(&mut tree, item)?;
    }
    if let Some(name) = &opts.controller {
        overrides::apply(&mut tree, &format!("controller.method={}", Value::String(name.clone())))?;
    }
    let cfg = scenario(tree.clone())?;

    let ens = run_ensemble(&cfg, cfg.num_runs, opts.threads).map_err(|e| CliError::Simulation(e.to_string()))?;

    let runs_dir = opts.out.join("runs");
    fs::create_dir_all(&runs_dir).map_err(io_err(&runs_dir))?;
    let width = (cfg.num_runs.saturating_sub(1)).to_string().len().max(3);
    let (ny, m) = (cfg.system.ny(), cfg.system.m());
    let mut trajectories = Vec::with_capacity(ens.records.len());
    for (k, rec) in ens.records.iter().enumerate() {
        let name = format!("runs/run_{k:0width$}.csv");
        let path = opts.out.join(&name);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        trajectory_csv::write(rec, ny, m, std::io::BufWriter::new(file))?;
        trajectories.push(name);
    }
    write_file(&opts.out.join("config.json"), &pretty(&cfg.to_value()))?;
    write_file(&opts.out.join("metrics.json"), &pretty(&ens.metrics))?;

    let manifest = RunManifest {
        config_hash: config_hash(&tree),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        seed: cfg.rng_seed,
        controller: ens.metrics.controller.clone(),
        run_seeds: ens.records.iter().map(|r| r.seed).collect(),
        outputs: OutputPaths {
            config: "config.json".into(),
            metrics: "metrics.json".into(),
            trajectories,
        },
    };
    write_file(&opts.out.join("manifest.json"), &pretty(&manifest))?;
    Ok(RunSummary {
        metrics: ens.metrics,
        manifest,
    })
}

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    pub dir: PathBuf,
    /// Run index, or a stream seed listed in the manifest.
    pub run: Option<u64>,
    /// Zero-based component pair.
    pub dims: Option<(usize, usize)>,
    /// Defaults to `DIR/phase_portrait.svg`.
    pub output: Option<PathBuf>,
}

/// Parses a one-based `i,j` pair into zero-based indices.
pub fn parse_dims(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--dims expects two distinct one-based indices `i,j`, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let i: usize = a.trim().parse().map_err(|_| bad())?;
    let j: usize = b.trim().parse().map_err(|_| bad())?;
    if i == 0 || j == 0 || i == j {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}

struct Source {
    config: ScenarioConfig,
    label: String,
    run_seeds: Vec<u64>,
    tables: Vec<PathBuf>,
}

fn load_source(dir: &Path) -> Result<Source, CliError> {
    let config_path = dir.join("config.json");
    if !config_path.is_file() {
        return Err(CliError::Data(format!("{} is missing", config_path.display())));
    }
    let config = scenario(read_json(&config_path)?)?;
    let manifest: Option<RunManifest> = fs::read_to_string(dir.join("manifest.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let label = manifest
        .as_ref()
        .map(|m| m.controller.clone())
        .unwrap_or_else(|| config.controller.kind.name().to_string());
    let runs_dir = dir.join("runs");
    let mut tables: Vec<PathBuf> = match fs::read_dir(&runs_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect(),
        Err(_) => Vec::new(),
    };
    tables.sort();
    Ok(Source {
        config,
        label,
        run_seeds: manifest.map(|m| m.run_seeds).unwrap_or_default(),
        tables,
    })
}

fn run_index(path: &Path) -> Option<u64> {
    path.file_stem()?.to_str()?.strip_prefix("run_")?.parse().ok()
}

/// Renders a phase portrait of the runs under `opts.dir`. The directory
/// is either one `run` output or a parent of several (one per controller),
/// which are overlaid.
pub fn cmd_plot(opts: &PlotOptions) -> Result<PathBuf, CliError> {
    if !opts.dir.is_dir() {
        return Err(CliError::Data(format!("{} is not a directory", opts.dir.display())));
    }
    let dirs: Vec<PathBuf> = if opts.dir.join("config.json").is_file() {
        vec![opts.dir.clone()]
    } else {
        let mut subs: Vec<PathBuf> = fs::read_dir(&opts.dir)
            .map_err(io_err(&opts.dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("config.json").is_file())
            .collect();
        subs.sort();
        subs
    };
    if dirs.is_empty() {
        return Err(CliError::Data(format!("no run outputs under {}", opts.dir.display())));
    }
    let sources = dirs.iter().map(|d| load_source(d)).collect::<Result<Vec<_>, _>>()?;

    let n = sources[0].config.system.n();
    if sources.iter().any(|s| s.config.system.n() != n) {
        return Err(CliError::Data("runs have different state dimensions".into()));
    }
    let dims = match (opts.dims, n) {
        (Some(d), _) => d,
        (None, 2) => (0, 1),
        (None, n) if n > 2 => return Err(CliError::NeedDims(n)),
        (None, _) => return Err(CliError::Data("a phase portrait needs at least two state components".into())),
    };
    if dims.0 >= n || dims.1 >= n {
        return Err(CliError::Usage(format!("--dims out of range for a {n}-component state")));
    }

    let mut series = Vec::new();
    for src in &sources {
        let selected: Vec<&PathBuf> = src
            .tables
            .iter()
            .filter(|p| match (opts.run, run_index(p)) {
                (None, _) => true,
                (Some(sel), Some(k)) => k == sel || src.run_seeds.get(k as usize) == Some(&sel),
                (Some(_), None) => false,
            })
            .collect();
        let mut runs = Vec::new();
        for path in selected {
            let file = fs::File::open(path).map_err(io_err(path))?;
            let rec = trajectory_csv::read(file, &src.label, 0)?;
            let project = |xs: &[nalgebra::DVector<f64>]| xs.iter().map(|x| (x[dims.0], x[dims.1])).collect::<Vec<_>>();
            runs.push((project(&rec.x_true), project(&rec.belief_mean)));
        }
        if !runs.is_empty() {
            series.push(plot::Series {
                label: src.label.clone(),
                runs,
            });
        }
    }
    if series.is_empty() {
        let what = match opts.run {
            Some(r) => format!("run {r} not found"),
            None => "no trajectory tables".to_string(),
        };
        return Err(CliError::Data(format!("{what} under {}", opts.dir.display())));
    }

    let first = &sources[0];
    let slice = plot::Slice {
        dims,
        base: first.config.initial_mean.clone(),
    };
    let svg = plot::render(&series, &first.config.safe_set, &slice);
    let out = opts.output.clone().unwrap_or_else(|| opts.dir.join("phase_portrait.svg"));
    write_file(&out, svg.as_bytes())?;
    Ok(out)
}
