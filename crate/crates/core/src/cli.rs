//! The `rbc-lab` command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid config, 3 parity mode
//! with a scheme other than fixed pi/4, 4 missing input file, 5 oracle
//! validation failure. The worker count comes from `--workers` or
//! `RBC_LAB_WORKERS` (0 = all cores).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    collapse, crossings, fit_area_law, fit_log_profile, fit_time_growth, metadata_for, AnalysisError, CollapseOptions,
    FitOptions, FitResult, SweepDataset,
};
use crate::circuit::{AngleScheme, CircuitError, CircuitParams, EngineMode, InitialPhases};
use crate::config::{load_config, ConfigError, OneOrMany, RunConfig, SchemeKind, TimesSpec};
use crate::ensemble::{params_digest, run_ensemble_with, EnsembleResult};
use crate::lattice::{Boundary, LatticeSpec};
use crate::observables::ObservableId;
use crate::oracle::{coupled_run, OracleError, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing input: {0}")]
    MissingInput(PathBuf),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::ParityScheme) | CliError::Circuit(CircuitError::ParityScheme) => 3,
            CliError::Config(ConfigError::Io { .. }) | CliError::MissingInput(_) => 4,
            CliError::Config(_) | CliError::Circuit(CircuitError::InvalidParams(_)) => 2,
            CliError::Validation(_) => 5,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rbc-lab", version, about = "Measurement-only circuits simulated with rotated Bell clusters")]
pub struct Cli {
    /// Worker threads for trajectories and grid searches (0 = all cores)
    #[arg(long, env = "RBC_LAB_WORKERS", default_value_t = 0, global = true)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One ensemble (single L and p)
    Run(RunArgs),
    /// Ensembles over the L × p grid, resumable
    Sweep(RunArgs),
    /// Time-resolved observables (every step unless the config sets `times`)
    Dynamics(RunArgs),
    /// Fit a scaling form to a sweep CSV
    Fit(FitArgs),
    /// Finite-size-scaling collapse of a sweep CSV
    Collapse(CollapseArgs),
    /// Lockstep runs against the dense oracle
    Validate(ValidateArgs),
    /// Preset sweeps and analyses for each figure
    Recipe(RecipeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML config file
    pub config: PathBuf,
    /// Override the system sizes
    #[arg(short = 'L', long = "size")]
    pub sizes: Vec<usize>,
    /// Override the measurement probabilities
    #[arg(short, long)]
    pub p: Vec<f64>,
    #[arg(long)]
    pub n_traj: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Full,
    Parity,
}

impl From<ModeArg> for EngineMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => EngineMode::Full,
            ModeArg::Parity => EngineMode::Parity,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum FitKind {
    LogProfile,
    TimeGrowth,
    AreaLaw,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sweep CSV
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: FitKind,
    #[arg(long)]
    pub observable: ObservableId,
    #[arg(short = 'L', long = "size")]
    pub size: usize,
    #[arg(short, long)]
    pub p: f64,
    /// Fit window `lo:hi` (inclusive)
    #[arg(long, value_parser = parse_range)]
    pub window: Option<(f64, f64)>,
    /// Write the report here instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CollapseArgs {
    /// Sweep CSV
    pub input: PathBuf,
    #[arg(long, default_value = "topo_magic")]
    pub observable: ObservableId,
    #[arg(long, value_parser = parse_range, default_value = "0.3:0.7")]
    pub pc_range: (f64, f64),
    #[arg(long, value_parser = parse_range, default_value = "0.8:2.0")]
    pub nu_range: (f64, f64),
    /// Directory for `collapse.json` and `landscape.csv`
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum SchemeArg {
    Quarter,
    Clifford,
    Dilute,
    Random,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Linear size (sites on a chain, side on a square lattice)
    #[arg(long, default_value_t = 6)]
    pub sites: usize,
    #[arg(long, default_value_t = 1)]
    pub dimension: u8,
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
    #[arg(short, long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75])]
    pub p: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SchemeArg::Quarter, SchemeArg::Clifford, SchemeArg::Dilute, SchemeArg::Random])]
    pub scheme: Vec<SchemeArg>,
    /// Steps per run (default 2 × sites)
    #[arg(long)]
    pub steps: Option<usize>,
    /// Directory for `validation.json`
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq, Serialize)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
}

#[derive(Debug, Args)]
pub struct RecipeArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    /// Fraction of the largest published system size
    #[arg(long, default_value_t = 0.25)]
    pub scale: f64,
    /// Trajectories per cell (default 10⁴ × scale, at least 100)
    #[arg(long)]
    pub n_traj: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok((lo, hi))
}

/// Per-`(L, p)` output file of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFile {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub params: CircuitParams,
    pub result: EnsembleResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellManifest {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub params_digest: String,
    pub params: CircuitParams,
}

/// Written to every output directory; enough to rerun bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub created_unix: u64,
    pub master_seed: u64,
    pub n_traj: u64,
    pub config: RunConfig,
    pub cells: Vec<CellManifest>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value).expect("serializable").as_bytes())
}

fn cell_name(l: usize, p: f64) -> String {
    format!("L{l}_p{p}")
}

fn apply_overrides(cfg: &mut RunConfig, args: &RunArgs) -> Result<(), ConfigError> {
    if !args.sizes.is_empty() {
        cfg.l = OneOrMany::Many(args.sizes.clone());
    }
    if !args.p.is_empty() {
        cfg.p = OneOrMany::Many(args.p.clone());
    }
    if let Some(n) = args.n_traj {
        cfg.n_traj = n;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &args.output {
        cfg.output = Some(o.clone());
    }
    if let Some(m) = args.mode {
        cfg.mode = Some(m.into());
    }
    cfg.validate()
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("runs").join(cfg.name.as_deref().unwrap_or("run")))
}

/// Runs every `(L, p)` cell of `cfg` into `dir`, skipping cells already on
/// disk with a matching parameter digest. Returns the merged dataset.
pub fn execute_sweep(cfg: &RunConfig, dir: &Path, command: &str, workers: usize) -> Result<SweepDataset, CliError> {
    let cells_dir = dir.join("cells");
    fs::create_dir_all(&cells_dir)?;
    let mut cells = Vec::new();
    for &l in &cfg.sizes() {
        for &p in &cfg.p_values() {
            let params = cfg.params_for(l, p)?;
            cells.push(CellManifest { l, p, params_digest: params_digest(&params), params });
        }
    }
    let manifest = Manifest {
        tool: "rbc-lab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        master_seed: cfg.master_seed,
        n_traj: cfg.n_traj,
        config: cfg.clone(),
        cells: cells.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;

    let first = &cells[0].params;
    let mut ds = SweepDataset::new(metadata_for(first));
    for cell in &cells {
        let path = cells_dir.join(format!("{}.json", cell_name(cell.l, cell.p)));
        let cached: Option<CellFile> = fs::read(&path)
            .ok()
            .and_then(|b| serde_json::from_slice::<CellFile>(&b).ok())
            .filter(|c| c.result.params_digest == cell.params_digest && c.result.n_traj == cfg.n_traj && c.result.master_seed == cfg.master_seed);
        let file = match cached {
            Some(c) => c,
            None => {
                let mut records = if cfg.records {
                    Some(std::io::BufWriter::new(fs::File::create(cells_dir.join(format!("{}.jsonl", cell_name(cell.l, cell.p))))?))
                } else {
                    None
                };
                let mut io_err = None;
                let result = run_ensemble_with(&cell.params, cfg.n_traj, cfg.master_seed, workers, |rec| {
                    if let Some(w) = records.as_mut() {
                        if let Err(e) = serde_json::to_writer(&mut *w, rec).map_err(std::io::Error::from).and_then(|_| w.write_all(b"\n")) {
                            io_err.get_or_insert(e);
                        }
                    }
                })?;
                if let Some(e) = io_err {
                    return Err(e.into());
                }
                if let Some(mut w) = records {
                    w.flush()?;
                }
                let file = CellFile { l: cell.l, p: cell.p, params: cell.params.clone(), result };
                write_json(&path, &file)?;
                file
            }
        };
        ds.extend(SweepDataset::rows_from_ensemble(&file.params, &file.result))?;
    }
    ds.sort();
    Ok(ds)
}

fn cmd_run(args: &RunArgs, workers: usize, kind: &str) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    apply_overrides(&mut cfg, args)?;
    if kind == "dynamics" && matches!(&cfg.times, TimesSpec::Named(s) if s == "final") {
        cfg.times = TimesSpec::Named("every:1".into());
    }
    if kind == "run" && (cfg.sizes().len() != 1 || cfg.p_values().len() != 1) {
        return Err(CliError::Config(ConfigError::Invalid("run takes a single L and p; use sweep for grids".into())));
    }
    let dir = output_dir(&cfg);
    let ds = execute_sweep(&cfg, &dir, kind, workers)?;
    let csv = match kind {
        "run" => "summary.csv",
        "dynamics" => "dynamics.csv",
        _ => "sweep.csv",
    };
    ds.save(&dir.join(csv))?;
    println!("{}", dir.join(csv).display());
    Ok(())
}

fn load_dataset(path: &Path) -> Result<SweepDataset, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    Ok(SweepDataset::load(path)?)
}

fn run_fit(ds: &SweepDataset, kind: FitKind, id: ObservableId, l: usize, p: f64, window: Option<(f64, f64)>) -> Result<FitResult, CliError> {
    let options = FitOptions { window, bootstrap: None };
    let fit = match kind {
        FitKind::LogProfile => fit_log_profile(&ds.profile(id, l, p), l, &options)?,
        FitKind::AreaLaw => fit_area_law(&ds.profile(id, l, p), l, &options)?,
        FitKind::TimeGrowth => fit_time_growth(&ds.time_series(id, l, p), &options)?,
    };
    Ok(fit)
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let ds = load_dataset(&args.input)?;
    let fit = run_fit(&ds, args.kind, args.observable, args.size, args.p, args.window)?;
    let json = serde_json::to_string_pretty(&fit).expect("serializable");
    match &args.output {
        Some(path) => write_atomic(path, json.as_bytes())?,
        None => println!("{json}"),
    }
    Ok(())
}

fn write_collapse(dir: &Path, ds: &SweepDataset, id: ObservableId, options: &CollapseOptions) -> Result<crate::analysis::CollapseResult, CliError> {
    let result = collapse(&ds.final_values(id), options)?;
    fs::create_dir_all(dir)?;
    write_json(&dir.join("collapse.json"), &result)?;
    let mut w = csv::Writer::from_path(dir.join("landscape.csv")).map_err(AnalysisError::from)?;
    w.write_record(["p_c", "nu", "quality"]).map_err(AnalysisError::from)?;
    for pt in &result.trace {
        let q = pt.quality.map_or(String::new(), |q| q.to_string());
        w.write_record([pt.p_c.to_string(), pt.nu.to_string(), q]).map_err(AnalysisError::from)?;
    }
    w.flush()?;
    Ok(result)
}

fn cmd_collapse(args: &CollapseArgs) -> Result<(), CliError> {
    let ds = load_dataset(&args.input)?;
    let options = CollapseOptions { p_c_range: args.pc_range, nu_range: args.nu_range, ..Default::default() };
    let r = write_collapse(&args.output, &ds, args.observable, &options)?;
    println!("p_c = {:.4}, nu = {:.4}, Q = {:.4}", r.p_c, r.nu, r.quality);
    Ok(())
}

/// Totals of a validation campaign; failing reports are kept in full.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub runs: usize,
    pub passed: usize,
    pub max_probability_error: f64,
    pub max_observable_error: f64,
    pub min_fidelity: f64,
    pub failures: Vec<ValidationReport>,
}

/// Validation parameters for one scheme.
pub fn validation_params(lattice: LatticeSpec, p: f64, scheme: SchemeArg) -> CircuitParams {
    match scheme {
        SchemeArg::Quarter => CircuitParams::new(lattice, p, AngleScheme::fixed_pi_4()),
        SchemeArg::Clifford => CircuitParams::new(lattice, p, AngleScheme::Fixed { theta: crate::phase::PhaseValue::ZERO }),
        SchemeArg::Dilute => {
            CircuitParams::new(lattice, p, AngleScheme::Dilute { theta: crate::phase::PhaseValue::PI_4, q: 0.5, per_site: false })
        }
        SchemeArg::Random => CircuitParams::new(lattice, p, AngleScheme::RandomUniform).with_initial(InitialPhases::Random),
    }
}

/// Coupled runs over every `(p, scheme, seed)`.
pub fn validate_campaign(lattice: LatticeSpec, ps: &[f64], schemes: &[SchemeArg], seeds: u64, steps: usize) -> Result<ValidationSummary, CliError> {
    let mut s = ValidationSummary { runs: 0, passed: 0, max_probability_error: 0.0, max_observable_error: 0.0, min_fidelity: 1.0, failures: Vec::new() };
    for &p in ps {
        for &scheme in schemes {
            let params = validation_params(lattice, p, scheme);
            for seed in 0..seeds {
                let r = coupled_run(&params, seed, steps)?;
                s.runs += 1;
                s.max_probability_error = s.max_probability_error.max(r.max_probability_error);
                s.max_observable_error = s.max_observable_error.max(r.max_observable_error);
                s.min_fidelity = s.min_fidelity.min(r.min_fidelity);
                if r.passed() {
                    s.passed += 1;
                } else {
                    s.failures.push(r);
                }
            }
        }
    }
    Ok(s)
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let lattice = LatticeSpec { dimension: args.dimension, l: args.sites, boundary: Boundary::Periodic };
    lattice.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let steps = args.steps.unwrap_or(2 * args.sites);
    let summary = validate_campaign(lattice, &args.p, &args.scheme, args.seeds, steps)?;
    if let Some(dir) = &args.output {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("validation.json"), &summary)?;
    }
    println!(
        "{}/{} runs passed; max |dPr| = {:.2e}, max |dObs| = {:.2e}, min fidelity = {:.12}",
        summary.passed, summary.runs, summary.max_probability_error, summary.max_observable_error, summary.min_fidelity
    );
    if summary.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{} of {} runs had mismatches", summary.failures.len(), summary.runs)))
    }
}

fn scaled(full: usize, scale: f64) -> usize {
    (((full as f64 * scale) / 4.0).round() as usize * 4).max(8)
}

fn p_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| ((lo + step * k as f64) * 1e6).round() / 1e6).collect()
}

fn base_config(sizes: Vec<usize>, ps: Vec<f64>, n_traj: u64, seed: u64) -> RunConfig {
    let mut c = RunConfig::minimal(8, 0.5, n_traj);
    c.l = OneOrMany::Many(sizes);
    c.p = OneOrMany::Many(ps);
    c.master_seed = seed;
    c
}

/// The sweep configs behind a figure at `scale`, keyed by a short label.
pub fn recipe_configs(figure: Figure, scale: f64, n_traj: u64, seed: u64) -> Vec<(String, RunConfig)> {
    let sizes = |full: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = full.iter().map(|&l| scaled(l, scale)).collect();
        v.dedup();
        v
    };
    let all_p = p_grid(0.0, 1.0, 0.05);
    match figure {
        Figure::Fig3 => {
            let mut c = base_config(sizes(&[256, 512, 1024, 2048]), all_p, n_traj, seed);
            c.name = Some("fig3".into());
            vec![("sweep".into(), c)]
        }
        Figure::Fig4 => {
            let big = scaled(2048, scale);
            let mut profile = base_config(vec![big], vec![0.5], n_traj, seed);
            profile.name = Some("fig4-profile".into());
            profile.observables = vec![ObservableId::MutualMagicProfile, ObservableId::EntanglementProfile];
            let mut dynamics = base_config(sizes(&[512, 1024, 2048]), vec![0.5], n_traj, seed);
            dynamics.name = Some("fig4-dynamics".into());
            dynamics.observables = vec![ObservableId::MutualMagicHalf];
            dynamics.times = TimesSpec::Named("log:40".into());
            vec![("profile".into(), profile), ("dynamics".into(), dynamics)]
        }
        Figure::Fig5 => {
            let mut c = base_config(sizes(&[256, 512, 1024]), p_grid(0.35, 0.65, 0.025), n_traj, seed);
            c.name = Some("fig5".into());
            c.boundary = Boundary::Open;
            c.observables = vec![ObservableId::TopoMagic];
            let mut wide = c.clone();
            wide.name = Some("fig5-wide".into());
            wide.p = OneOrMany::Many(all_p);
            vec![("collapse".into(), c), ("wide".into(), wide)]
        }
        Figure::Fig6 => {
            let mut c = base_config(sizes(&[256, 512, 1024, 2048]), all_p, n_traj, seed);
            c.name = Some("fig6".into());
            c.scheme = SchemeKind::Dilute;
            vec![("sweep".into(), c)]
        }
        Figure::Fig7 | Figure::Fig9 => {
            let mut c = base_config(sizes(&[32, 48, 64, 96]), p_grid(0.5, 1.0, 0.02), n_traj, seed);
            c.dimension = 2;
            c.name = Some(if figure == Figure::Fig7 { "fig7" } else { "fig9" }.into());
            if figure == Figure::Fig9 {
                c.scheme = SchemeKind::Dilute;
            }
            vec![("sweep".into(), c)]
        }
        Figure::Fig8 => {
            let mut c = base_config(vec![scaled(128, scale)], vec![0.75], n_traj, seed);
            c.name = Some("fig8".into());
            c.dimension = 2;
            c.observables = vec![ObservableId::MutualMagicProfile];
            vec![("profile".into(), c)]
        }
    }
}

#[derive(Debug, Serialize)]
struct RecipeReport {
    figure: Figure,
    scale: f64,
    fits: Vec<(String, FitResult)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collapse: Option<(f64, f64, f64)>,
    crossings: Vec<(usize, usize, Vec<f64>)>,
}

fn cmd_recipe(args: &RecipeArgs, workers: usize) -> Result<(), CliError> {
    if !(args.scale > 0.0 && args.scale <= 1.0) {
        return Err(CliError::Usage(format!("scale must be in (0, 1], got {}", args.scale)));
    }
    let n_traj = args.n_traj.unwrap_or(((1e4 * args.scale).round() as u64).max(100));
    let root = args.output.clone().unwrap_or_else(|| PathBuf::from("runs").join(format!("{:?}", args.figure).to_lowercase()));
    let mut report = RecipeReport { figure: args.figure, scale: args.scale, fits: Vec::new(), collapse: None, crossings: Vec::new() };
    for (label, cfg) in recipe_configs(args.figure, args.scale, n_traj, args.seed) {
        cfg.validate()?;
        let dir = root.join(&label);
        let ds = execute_sweep(&cfg, &dir, &format!("recipe {:?} {label}", args.figure), workers)?;
        ds.save(&dir.join("sweep.csv"))?;
        match (args.figure, label.as_str()) {
            (Figure::Fig4, "profile") => {
                let l = cfg.sizes()[0];
                for id in [ObservableId::MutualMagicProfile, ObservableId::EntanglementProfile] {
                    report.fits.push((id.as_str().into(), run_fit(&ds, FitKind::LogProfile, id, l, 0.5, None)?));
                }
            }
            (Figure::Fig4, "dynamics") => {
                for l in cfg.sizes() {
                    if let Ok(f) = run_fit(&ds, FitKind::TimeGrowth, ObservableId::MutualMagicHalf, l, 0.5, None) {
                        report.fits.push((format!("time_growth L={l}"), f));
                    }
                }
            }
            (Figure::Fig5, "collapse") => {
                let r = write_collapse(&dir, &ds, ObservableId::TopoMagic, &CollapseOptions::default())?;
                report.collapse = Some((r.p_c, r.nu, r.quality));
            }
            (Figure::Fig8, _) => {
                let l = cfg.sizes()[0];
                report.fits.push(("area_law".into(), run_fit(&ds, FitKind::AreaLaw, ObservableId::MutualMagicProfile, l, 0.75, None)?));
            }
            (Figure::Fig7 | Figure::Fig9, _) => {
                let sizes = cfg.sizes();
                let curves: Vec<Vec<(f64, f64)>> = sizes
                    .iter()
                    .map(|&l| {
                        ds.final_values(ObservableId::MutualMagicHalf)
                            .iter()
                            .filter(|pt| pt.l == l)
                            .map(|pt| (pt.p, pt.value / l as f64))
                            .collect()
                    })
                    .collect();
                for a in 0..sizes.len() {
                    for b in a + 1..sizes.len() {
                        report.crossings.push((sizes[a], sizes[b], crossings(&curves[a], &curves[b])));
                    }
                }
            }
            _ => {}
        }
    }
    fs::create_dir_all(&root)?;
    write_json(&root.join("report.json"), &report)?;
    println!("{}", root.join("report.json").display());
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, cli.workers, "run"),
        Command::Sweep(a) => cmd_run(a, cli.workers, "sweep"),
        Command::Dynamics(a) => cmd_run(a, cli.workers, "dynamics"),
        Command::Fit(a) => cmd_fit(a),
        Command::Collapse(a) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build().map_err(|e| CliError::Usage(e.to_string()))?;
            pool.install(|| cmd_collapse(a))
        }
        Command::Validate(a) => cmd_validate(a),
        Command::Recipe(a) => cmd_recipe(a, cli.workers),
    }
}

/// Parses arguments, runs the command, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse() {
        assert_eq!(parse_range("0.3:0.7"), Ok((0.3, 0.7)));
        assert!(parse_range("0.7:0.3").is_err());
        assert!(parse_range("0.7").is_err());
    }

    #[test]
    fn recipe_sizes_scale() {
        let cfgs = recipe_configs(Figure::Fig5, 0.25, 100, 1);
        assert_eq!(cfgs[0].1.sizes(), vec![64, 128, 256]);
        assert_eq!(cfgs[0].1.p_values().len(), 13);
        let f7 = recipe_configs(Figure::Fig7, 0.25, 100, 1);
        assert_eq!(f7[0].1.sizes(), vec![8, 12, 16, 24]);
        for fig in [Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6, Figure::Fig7, Figure::Fig8, Figure::Fig9] {
            for (_, c) in recipe_configs(fig, 0.25, 100, 1) {
                c.validate().unwrap();
            }
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(ConfigError::ParityScheme).exit_code(), 3);
        assert_eq!(CliError::Config(ConfigError::Invalid("x".into())).exit_code(), 2);
        assert_eq!(CliError::MissingInput("x".into()).exit_code(), 4);
        assert_eq!(CliError::Validation("x".into()).exit_code(), 5);
    }
}
