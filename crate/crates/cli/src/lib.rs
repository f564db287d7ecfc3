//! The `spadal` command line.
//!
//! ```text
//! spadal gen            --out DIR [--classes a,b] [--per-class N] [--size WxH] [--seed S]
//! spadal simulate       --manifest FILE --out DIR [--conditions FILE] [--reference FILE] [--M K] [--seed S]
//! spadal run-al         --data DIR --out DIR [--strategy ID] [--rounds T] [--batch N] [--ncand K] [--seeds 0,1,2]
//! spadal quality-sweep  --data DIR --out FILE.csv [--msppp 0.5,1,2,4,8] [--sbr R] [--seed S]
//! spadal serve          --data DIR [--port P] [--out STORE] [--static DIR]
//! spadal rerun          --config FILE [--out PATH]
//! ```
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error. Every command
//! writes its resolved arguments as JSON next to its outputs; `rerun` replays
//! such a file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use spadal::al::{aggregate, run, write_aggregate_csv, write_metrics_csv, ALConfig, OracleMode, SimulatedOracle};
use spadal::classifier::TrainConfig;
use spadal::dataset::{
    default_reference_condition, default_variant_conditions, generate_dataset, load_dataset, simulate_to_dir,
    GenOptions, Manifest, ShapeClass,
};
use spadal::photon_sim::SimulationCondition;
use spadal::quality::{quality_sweep, write_quality_csv};
use spadal::sampling::Strategy;

pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Parser)]
#[command(name = "spadal", version, about = "Single-photon LiDAR simulation and active learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Render procedural scenes and a manifest.
    Gen(GenArgs),
    /// Simulate photon events for every manifest entry and reconstruct them.
    Simulate(SimulateArgs),
    /// Run active-learning experiments with the simulated oracle.
    RunAl(RunAlArgs),
    /// Mean reconstruction RMSE / SSIM across photon-flux levels.
    QualitySweep(QualitySweepArgs),
    /// Serve human-labeled sessions over HTTP.
    Serve(ServeArgs),
    /// Replay a command from its emitted config JSON.
    #[serde(skip)]
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated class names; all shapes by default.
    #[arg(long, value_delimiter = ',', default_values_t = ShapeClass::ALL.to_vec())]
    pub classes: Vec<ShapeClass>,
    #[arg(long, default_value_t = 10)]
    pub per_class: usize,
    #[arg(long, default_value = "32x32", value_parser = parse_size)]
    pub size: Size,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of each class in the training split.
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Size {
    pub width: usize,
    pub height: usize,
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

fn parse_size(s: &str) -> Result<Size, String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let dim = |v: &str| match v.trim().parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        _ => Err(format!("bad dimension {v:?}")),
    };
    Ok(Size {
        width: dim(w)?,
        height: dim(h)?,
    })
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSON list of variant conditions; four default flux levels otherwise.
    #[arg(long)]
    pub conditions: Option<PathBuf>,
    /// JSON condition of the observed image.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Expected number of variant conditions.
    #[arg(long = "M", visible_alias = "variants")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OracleArg {
    Simulated,
    Human,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RunAlArgs {
    /// Directory written by `simulate`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = Strategy::Duis)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 6)]
    pub rounds: usize,
    #[arg(long, default_value_t = 10)]
    pub batch: usize,
    #[arg(long, default_value_t = 30)]
    pub ncand: usize,
    /// Initial labeled-set size; defaults to the batch size.
    #[arg(long)]
    pub initial: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = OracleArg::Simulated)]
    pub oracle: OracleArg,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct QualitySweepArgs {
    /// Directory written by `gen`.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated mean signal photons per pixel.
    #[arg(long, default_value = "0.5,1,2,4,8")]
    pub msppp: String,
    #[arg(long, default_value_t = 4.0)]
    pub sbr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ServeArgs {
    /// Directory written by `simulate`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Session store; sessions are kept in memory only without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Static files served at `/` (the labeling UI bundle).
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Replaces the recorded output location.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failed command and its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or inputs inconsistent with them; exit 2.
    Usage(String),
    /// Everything else; exit 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<spadal::Error> for CliError {
    fn from(e: spadal::Error) -> Self {
        use spadal::Error as E;
        match e {
            E::UnknownClass(_)
            | E::BudgetInfeasible { .. }
            | E::InvalidRequest(_)
            | E::InvalidCondition(_)
            | E::EmptyConditions
            | E::Empty(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_err(context: impl fmt::Display) -> impl FnOnce(std::io::Error) -> CliError {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Runs one parsed command.
pub fn execute(command: Command) -> CliResult {
    match command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::RunAl(a) => cmd_run_al(&a),
        Command::QualitySweep(a) => cmd_quality_sweep(&a),
        Command::Serve(a) => cmd_serve(&a),
        Command::Rerun(a) => cmd_rerun(&a),
    }
}

/// Writes the resolved command as JSON.
fn emit_config(command: Command, path: &Path) -> CliResult {
    let mut json = serde_json::to_vec_pretty(&command).map_err(|e| CliError::Runtime(e.to_string()))?;
    json.push(b'\n');
    fs::write(path, json).map_err(io_err(path.display()))
}

fn create_out_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(io_err(dir.display()))
}

pub fn cmd_gen(a: &GenArgs) -> CliResult {
    if a.per_class == 0 {
        return Err(CliError::Usage("--per-class must be at least 1".into()));
    }
    create_out_dir(&a.out)?;
    let opts = GenOptions {
        classes: a.classes.clone(),
        per_class: a.per_class,
        width: a.size.width,
        height: a.size.height,
        seed: a.seed,
        train_fraction: a.train_fraction,
    };
    let manifest = generate_dataset(&a.out, &opts)?;
    emit_config(Command::Gen(a.clone()), &a.out.join(CONFIG_FILE))?;
    tracing::info!(entries = manifest.entries.len(), out = %a.out.display(), "scenes written");
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult {
    let manifest = Manifest::load(&a.manifest)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", a.manifest.display())))?;
    let conditions = match &a.conditions {
        Some(p) => SimulationCondition::load_list(p)?,
        None => default_variant_conditions(),
    };
    let reference = match &a.reference {
        Some(p) => SimulationCondition::load(p)?,
        None => default_reference_condition(),
    };
    if let Some(m) = a.m {
        if m != conditions.len() {
            return Err(CliError::Usage(format!("--M {m} but {} variant conditions given", conditions.len())));
        }
    }
    if conditions.is_empty() {
        return Err(CliError::Usage("at least one variant condition is required".into()));
    }
    create_out_dir(&a.out)?;
    let data = simulate_to_dir(&manifest, &conditions, &reference, a.seed, &a.out)?;
    let resolved = SimulateArgs {
        m: Some(conditions.len()),
        ..a.clone()
    };
    emit_config(Command::Simulate(resolved), &a.out.join(CONFIG_FILE))?;
    tracing::info!(pool = data.pools.len(), test = data.test.len(), out = %a.out.display(), "dataset simulated");
    Ok(())
}

impl RunAlArgs {
    pub fn al_config(&self, seed: u64) -> ALConfig {
        ALConfig {
            rounds: self.rounds,
            batch_size: self.batch,
            candidates: self.ncand,
            strategy: self.strategy,
            initial: self.initial,
            train: TrainConfig {
                epochs: self.epochs,
                learning_rate: self.lr,
                ..TrainConfig::default()
            },
            seed,
            oracle: OracleMode::Simulated,
            oracle_timeout_s: None,
        }
    }
}

/// Per-seed metrics file name.
pub fn metrics_file(strategy: Strategy, seed: u64) -> String {
    format!("metrics_{strategy}_seed{seed}.csv")
}

pub fn aggregate_file(strategy: Strategy) -> String {
    format!("aggregate_{strategy}.csv")
}

pub fn cmd_run_al(a: &RunAlArgs) -> CliResult {
    if a.oracle == OracleArg::Human {
        return Err(CliError::Usage("the human oracle needs `spadal serve`".into()));
    }
    if a.seeds.is_empty() {
        return Err(CliError::Usage("--seeds is empty".into()));
    }
    let data = load_dataset(&a.data).map_err(|e| CliError::Runtime(format!("{}: {e}", a.data.display())))?;
    for &seed in &a.seeds {
        a.al_config(seed).validate(data.pools.len())?;
    }
    create_out_dir(&a.out)?;
    emit_config(Command::RunAl(a.clone()), &a.out.join(CONFIG_FILE))?;
    let mut records = Vec::new();
    for &seed in &a.seeds {
        let record = run(a.al_config(seed), data.clone(), &mut SimulatedOracle)?;
        let path = a.out.join(metrics_file(a.strategy, seed));
        let file = fs::File::create(&path).map_err(io_err(path.display()))?;
        write_metrics_csv(file, &record)?;
        if let Some(last) = record.final_entry() {
            tracing::info!(seed, labeled = last.labeled_count, accuracy = last.metrics.accuracy, "run finished");
        }
        records.push(record);
    }
    let path = a.out.join(aggregate_file(a.strategy));
    let file = fs::File::create(&path).map_err(io_err(path.display()))?;
    write_aggregate_csv(file, &aggregate(&records)?)?;
    Ok(())
}

pub fn parse_msppp(list: &str) -> CliResult<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(CliError::Usage(format!("bad msppp value {s:?}"))),
        })
        .collect()
}

/// Config JSON written next to a single-file output.
pub fn sidecar_config(out: &Path) -> PathBuf {
    out.with_extension("config.json")
}

pub fn cmd_quality_sweep(a: &QualitySweepArgs) -> CliResult {
    let levels = parse_msppp(&a.msppp)?;
    if levels.is_empty() {
        return Err(CliError::Usage("empty --msppp sweep".into()));
    }
    let manifest_path = a.data.join("manifest.json");
    let manifest = Manifest::load(&manifest_path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", manifest_path.display())))?;
    let scenes = manifest
        .entries
        .iter()
        .map(|e| manifest.load_scene(e))
        .collect::<spadal::Result<Vec<_>>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let base = default_reference_condition().with_flux(levels[0], a.sbr);
    let rows = quality_sweep(&scenes, &base, &levels, a.seed)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_out_dir(dir)?;
    }
    let file = fs::File::create(&a.out).map_err(io_err(a.out.display()))?;
    write_quality_csv(file, &rows)?;
    emit_config(Command::QualitySweep(a.clone()), &sidecar_config(&a.out))?;
    Ok(())
}

pub fn cmd_serve(a: &ServeArgs) -> CliResult {
    let service = spadal_service::Service::open(&a.data, a.out.clone())
        .map_err(|e| CliError::Runtime(format!("{}: {e}", a.data.display())))?;
    if let Some(store) = &a.out {
        emit_config(Command::Serve(a.clone()), &store.join(CONFIG_FILE))?;
    } else {
        tracing::warn!("no --out store: sessions will not survive a restart");
    }
    let runtime = tokio::runtime::Runtime::new().map_err(io_err("tokio runtime"))?;
    runtime.block_on(async {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(io_err(&addr))?;
        let local = listener.local_addr().map_err(io_err(&addr))?;
        // scripts wait for this line
        println!("listening on http://{local}");
        spadal_service::serve(listener, Arc::clone(&service), a.static_dir.clone(), spadal_service::ctrl_c())
            .await
            .map_err(io_err("server"))
    })?;
    tracing::info!("sessions checkpointed; bye");
    Ok(())
}

pub fn cmd_rerun(a: &RerunArgs) -> CliResult {
    let bytes = fs::read(&a.config).map_err(io_err(a.config.display()))?;
    let mut command: Command =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", a.config.display())))?;
    if let Some(out) = &a.out {
        match &mut command {
            Command::Gen(c) => c.out = out.clone(),
            Command::Simulate(c) => c.out = out.clone(),
            Command::RunAl(c) => c.out = out.clone(),
            Command::QualitySweep(c) => c.out = out.clone(),
            Command::Serve(c) => c.out = Some(out.clone()),
            Command::Rerun(_) => {}
        }
    }
    execute(command)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
