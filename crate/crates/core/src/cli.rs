//! The `dracer` command line: track tooling, every training role and
//! checkpoint evaluation.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error. Progress goes to
//! standard error through `log`; machine-readable output goes to files,
//! except the selected version printed by `eval --select`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, KvFile, ROOT_SECTION};
use crate::eval::{self, evaluate, parse_eval_log, select_checkpoint, EvalConfig, EvalError, Protocol};
use crate::fabric::{
    self, evaluator_loop, run_all_in_one, summary_file_name, trainer_loop, Budget, EvaluatorConfig, FabricConfig,
    FabricError, FabricServer, MetricsWriter, RemoteFabric, RolloutWorker, RunPaths, RunSpec, Scheduling,
    StopSignal, Trainer, TrainerSinks, WorkerLimits,
};
use crate::geometry::{
    centerline_from_mesh, circle_polyline, extract_border_edges, figure_eight_polyline, generate_track,
    oval_polyline, trace_loops, GeometryError, TrackMesh, TrackSpec,
};
use crate::randomize::{self, RandomizationConfig};
use crate::rl::{self, Checkpoint, RlError, TrainerConfig};
use crate::sim::{ActionSpace, ObsMode, SimConfig, SimError, Track};

/// Environment variable naming the config file when `--config` is absent.
pub const CONFIG_ENV: &str = "DRACER_CONFIG";

const SECTIONS: &[&str] = &[ROOT_SECTION, randomize::SECTION, rl::SECTION, eval::SECTION, fabric::SECTION];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("run directory {} already exists; pick another --run-id", .0.display())]
    RunExists(PathBuf),
    #[error("no checkpoints found under {}", .0.display())]
    NoCheckpoints(PathBuf),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Eval(EvalError::Usage(_)) => 2,
            _ => 1,
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

/// Every configuration section, resolved against defaults.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub sim: SimConfig,
    pub randomization: RandomizationConfig,
    pub trainer: TrainerConfig,
    pub eval: EvalConfig,
    pub fabric: FabricConfig,
    /// File the settings came from, if any.
    pub source: Option<PathBuf>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file = KvFile::parse(text)?;
        if let Some(unknown) = file.section_names().find(|n| !SECTIONS.contains(n)) {
            return Err(ConfigError::Invalid(format!("unknown section [{unknown}]")));
        }
        let sim = SimConfig::from_kv(&file)?;
        sim.validate()?;
        Ok(Settings {
            sim,
            randomization: RandomizationConfig::from_kv(&file)?,
            trainer: TrainerConfig::from_kv(&file)?,
            eval: EvalConfig::from_kv(&file)?,
            fabric: FabricConfig::from_kv(&file)?,
            source: None,
        })
    }

    /// Loads `path`, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let path = path.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        match path {
            Some(p) => {
                let mut s = Self::parse(&std::fs::read_to_string(&p)?)?;
                s.source = Some(p);
                Ok(s)
            }
            None => Ok(Settings::default()),
        }
    }

    /// Canonical text of every resolved key.
    pub fn to_text(&self) -> String {
        let mut file = KvFile::default();
        self.sim.write_kv(&mut file);
        self.randomization.write_kv(&mut file);
        self.trainer.write_kv(&mut file);
        self.eval.write_kv(&mut file);
        self.fabric.write_kv(&mut file);
        file.to_text()
    }

    /// CRC32 of the canonical text, as hex.
    pub fn hash(&self) -> String {
        format!("{:08x}", crc32fast::hash(self.to_text().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Store,
    Worker,
    Trainer,
    Eval,
    All,
}

/// Provenance written to a run directory before any training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_path: Option<PathBuf>,
    pub config_hash: String,
    pub role: Role,
    pub endpoints: Vec<String>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub track: String,
    pub obs_mode: ObsMode,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn load(run_dir: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(run_dir.join(Self::FILE_NAME))?;
        serde_json::from_str(&text).map_err(|e| CliError::Io(e.into()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "dracer", version, about = "Train and evaluate racing policies on simulated tracks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build, inspect and extract waypoints from track meshes.
    #[command(subcommand)]
    Track(TrackCommand),
    /// Run one training role, or all of them in this process.
    Train(TrainArgs),
    /// Evaluate a checkpoint, or select one from a run's evaluation log.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Oval,
    Circle,
    FigureEight,
}

#[derive(Debug, Subcommand)]
pub enum TrackCommand {
    Build(BuildArgs),
    /// Print vertex, triangle and loop counts and the lap length.
    Inspect { path: PathBuf },
    /// Write the centerline CSV of a track.
    Waypoints {
        path: PathBuf,
        /// Defaults to the track path with a `.csv` extension.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, value_enum, default_value = "oval")]
    pub shape: Shape,
    /// End-to-end length of an oval, or the size of a figure eight, meters.
    #[arg(long, default_value_t = 8.0)]
    pub length: f64,
    /// Radius of the oval ends or of the circle, meters.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0.6)]
    pub width: f64,
    /// Vertices per side; defaults to one every 15 cm.
    #[arg(long)]
    pub vertices: Option<usize>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub role: Role,
    /// Config file; falls back to $DRACER_CONFIG, then built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Track file; defaults to the generated 8 m oval.
    #[arg(long)]
    pub track: Option<PathBuf>,
    #[arg(long)]
    pub obs: Option<ObsMode>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub budget_steps: Option<u64>,
    #[arg(long)]
    pub budget_updates: Option<u64>,
    #[arg(long)]
    pub budget_seconds: Option<f64>,
    /// Parent of the run directory.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    #[arg(long)]
    pub run_id: Option<String>,
    /// Store address for worker, trainer and eval roles.
    #[arg(long)]
    pub connect: Option<String>,
    /// Listen address of the store role.
    #[arg(long)]
    pub listen: Option<String>,
    /// Seconds to keep retrying an unreachable store.
    #[arg(long, default_value_t = 30.0)]
    pub connect_timeout: f64,
    /// Worker id of the worker role; unique per run.
    #[arg(long, default_value_t = 0)]
    pub worker_id: u32,
    /// Skip the evaluator of `--role all`.
    #[arg(long)]
    pub no_eval: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Naive,
    Robust,
    Both,
}

impl ProtocolArg {
    fn protocols(self) -> Vec<Protocol> {
        match self {
            ProtocolArg::Naive => vec![Protocol::Naive],
            ProtocolArg::Robust => vec![Protocol::Robust],
            ProtocolArg::Both => vec![Protocol::Naive, Protocol::Robust],
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint file or run directory.
    pub path: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub protocol: ProtocolArg,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Robust action noise as a fraction of full scale.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Apply image augmentations to evaluation observations.
    #[arg(long)]
    pub augment: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub track: Option<PathBuf>,
    /// Pick the checkpoint whose neighbourhood scores best in the run's
    /// evaluation log and print its version.
    #[arg(long)]
    pub select: bool,
    #[arg(long)]
    pub window: Option<usize>,
    /// Directory for summary JSON files; defaults next to the checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code() as u8;
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Track(cmd) => track_command(cmd),
        Command::Train(args) => train_command(&args),
        Command::Eval(args) => eval_command(&args),
    }
}

fn track_command(cmd: TrackCommand) -> Result<(), CliError> {
    match cmd {
        TrackCommand::Build(a) => {
            let mesh = build_track(&a)?;
            mesh.save(&a.output)?;
            let cl = centerline_from_mesh(&mesh)?;
            log::info!(
                "wrote {} ({} vertices, {} triangles, lap {:.3} m)",
                a.output.display(),
                mesh.vertices().len(),
                mesh.triangles().len(),
                cl.lap_length
            );
            Ok(())
        }
        TrackCommand::Inspect { path } => {
            print!("{}", inspect(&TrackMesh::load(&path)?));
            Ok(())
        }
        TrackCommand::Waypoints { path, output } => {
            let cl = centerline_from_mesh(&TrackMesh::load(&path)?)?;
            let output = output.unwrap_or_else(|| path.with_extension("csv"));
            std::fs::write(&output, cl.to_csv())?;
            log::info!("wrote {} ({} waypoints, lap {:.3} m)", output.display(), cl.len(), cl.lap_length);
            Ok(())
        }
    }
}

pub fn build_track(a: &BuildArgs) -> Result<TrackMesh, CliError> {
    let (default_name, centerline, perimeter) = match a.shape {
        Shape::Oval => {
            let straight = a.length - 2.0 * a.radius;
            if !(straight > 0.0) {
                return usage("oval --length must exceed twice --radius");
            }
            let perimeter = 2.0 * straight + 2.0 * std::f64::consts::PI * a.radius;
            ("oval", oval_polyline(straight, a.radius, 50.0), perimeter)
        }
        Shape::Circle => {
            let perimeter = 2.0 * std::f64::consts::PI * a.radius;
            ("circle", circle_polyline(a.radius, (perimeter / 0.02).ceil() as usize), perimeter)
        }
        Shape::FigureEight => ("figure-eight", figure_eight_polyline(a.length, 400), 3.0 * a.length),
    };
    let spec = TrackSpec {
        name: a.name.clone().unwrap_or_else(|| default_name.into()),
        centerline,
        half_width: 0.5 * a.width,
        vertices_per_side: a.vertices.unwrap_or((perimeter / 0.15).round() as usize),
    };
    Ok(generate_track(&spec)?)
}

/// Human-readable track summary. Loop counts are reported even when the
/// mesh is not a valid track.
pub fn inspect(mesh: &TrackMesh) -> String {
    let mut out = format!(
        "name {}\nvertices {}\ntriangles {}\n",
        mesh.name(),
        mesh.vertices().len(),
        mesh.triangles().len()
    );
    match extract_border_edges(mesh).and_then(|e| trace_loops(&e)) {
        Ok(loops) => out.push_str(&format!("boundary_loops {}\n", loops.len())),
        Err(e) => out.push_str(&format!("boundary_loops error: {e}\n")),
    }
    match centerline_from_mesh(mesh) {
        Ok(cl) => out.push_str(&format!("waypoints {}\nlap_length {:.6}\n", cl.len(), cl.lap_length)),
        Err(e) => out.push_str(&format!("lap_length unavailable: {e}\n")),
    }
    out
}

fn load_track(path: Option<&Path>) -> Result<Arc<Track>, CliError> {
    Ok(Arc::new(match path {
        Some(p) => Track::load(p)?,
        None => Track::oval(8.0, 1.0, 0.6)?,
    }))
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

fn budget(a: &TrainArgs) -> Result<Budget, CliError> {
    if a.budget_seconds.is_some_and(|s| !(s > 0.0)) {
        return usage("--budget-seconds must be positive");
    }
    Ok(Budget { updates: a.budget_updates, steps: a.budget_steps, seconds: a.budget_seconds })
}

fn check_endpoints(a: &TrainArgs) -> Result<(), CliError> {
    match a.role {
        Role::All if a.connect.is_some() || a.listen.is_some() => {
            usage("--role all runs its own store; --connect and --listen do not apply")
        }
        Role::Store if a.connect.is_some() => usage("--role store listens; use --listen"),
        Role::Worker | Role::Trainer | Role::Eval if a.listen.is_some() => {
            usage("only the store listens; use --connect")
        }
        _ if a.workers == 0 => usage("--workers must be at least 1"),
        _ if a.role != Role::All && a.workers != 1 => {
            usage("--workers applies to --role all; start one worker role per worker")
        }
        _ if !(a.connect_timeout > 0.0) => usage("--connect-timeout must be positive"),
        _ => Ok(()),
    }
}

/// Creates `out/run_id`, refusing an existing one, and writes the manifest
/// and resolved config.
fn create_run_dir(a: &TrainArgs, settings: &Settings, track: &str, endpoint: &str) -> Result<PathBuf, CliError> {
    let run_id = a.run_id.clone().unwrap_or_else(|| format!("{}-s{}-{}", role_name(a.role), a.seed, unix_ms()));
    if run_id.is_empty() || run_id.contains(['/', '\\']) {
        return usage("--run-id must be a plain directory name");
    }
    let dir = a.out.join(&run_id);
    if dir.exists() {
        return Err(CliError::RunExists(dir));
    }
    std::fs::create_dir_all(&a.out)?;
    std::fs::create_dir(&dir)?;
    let manifest = RunManifest {
        run_id,
        config_path: settings.source.clone(),
        config_hash: settings.hash(),
        role: a.role,
        endpoints: if a.role == Role::All { Vec::new() } else { vec![endpoint.to_string()] },
        seed: a.seed,
        output_dir: dir.clone(),
        workers: a.workers,
        track: track.to_string(),
        obs_mode: settings.sim.obs_mode,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.into()))?;
    std::fs::write(dir.join(RunManifest::FILE_NAME), json)?;
    std::fs::write(dir.join("config.ini"), settings.to_text())?;
    Ok(dir)
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::Store => "store",
        Role::Worker => "worker",
        Role::Trainer => "trainer",
        Role::Eval => "eval",
        Role::All => "all",
    }
}

fn train_command(a: &TrainArgs) -> Result<(), CliError> {
    check_endpoints(a)?;
    let budget = budget(a)?;
    let mut settings = Settings::load(a.config.as_deref())?;
    if let Some(obs) = a.obs {
        settings.sim.obs_mode = obs;
    }
    let track = load_track(a.track.as_deref())?;
    let endpoint = match a.role {
        Role::Store => a.listen.clone(),
        _ => a.connect.clone(),
    }
    .unwrap_or_else(|| settings.fabric.addr.clone());
    let track_label = a.track.as_ref().map_or_else(|| "builtin:oval".to_string(), |p| p.display().to_string());
    let dir = create_run_dir(a, &settings, &track_label, &endpoint)?;

    let mut spec = RunSpec::new(track, settings.sim.clone(), settings.trainer.clone(), a.seed, budget);
    spec.randomization = settings.randomization.clone();
    spec.workers = a.workers;
    spec.store = settings.fabric.store;
    spec.config_text = settings.to_text();
    let evaluation = EvaluatorConfig {
        protocols: vec![Protocol::Naive, Protocol::Robust],
        eval: settings.eval.clone(),
        sim: settings.sim.clone(),
    };
    let connect_timeout = Duration::from_secs_f64(a.connect_timeout);
    let paths = RunPaths::new(&dir);

    match a.role {
        Role::All => {
            spec.out_dir = Some(dir.clone());
            spec.evaluation = (!a.no_eval).then_some(evaluation);
            let out = run_all_in_one(&spec)?;
            let last = out.metrics.last();
            log::info!(
                "finished: {} updates, final version {}, last mean progress {:.3}, run dir {}",
                out.metrics.len(),
                out.final_checkpoint.meta.version,
                last.map_or(0.0, |r| r.mean_progress),
                dir.display()
            );
        }
        Role::Store => {
            let mut server = FabricServer::bind(endpoint.as_str(), fabric::LocalFabric::new(spec.store))?;
            log::info!("store listening on {}", server.local_addr());
            let started = Instant::now();
            loop {
                std::thread::sleep(Duration::from_millis(200));
                if budget.seconds.is_some_and(|s| started.elapsed().as_secs_f64() >= s) {
                    break;
                }
            }
            server.shutdown();
        }
        Role::Worker => {
            spec.scheduling = Some(Scheduling::Async);
            let remote = RemoteFabric::new(endpoint, connect_timeout);
            let mut worker = RolloutWorker::new(spec.worker_config(a.worker_id as usize), spec.track.clone())?;
            let stop = StopSignal::default();
            let timer = budget.seconds.map(|s| stop_after(stop.clone(), s));
            worker.run(&remote, &stop, WorkerLimits::default())?;
            drop(timer);
            log::info!("worker {} ran {} episodes", a.worker_id, worker.episodes_run());
        }
        Role::Trainer => {
            spec.scheduling = Some(Scheduling::Async);
            let remote = RemoteFabric::new(endpoint, connect_timeout);
            std::fs::create_dir_all(&paths.checkpoints)?;
            let mut metrics = MetricsWriter::create(&paths.metrics)?;
            let mut trainer = Trainer::new(
                spec.trainer.clone(),
                spec.architecture(),
                ActionSpace::from_config(&spec.sim).count(),
                spec.trainer_seed(),
                spec.config_text.clone(),
                spec.clock(),
            )?;
            let sinks = TrainerSinks { metrics: Some(&mut metrics), checkpoint_dir: Some(&paths.checkpoints) };
            let reports = trainer_loop(&mut trainer, &remote, &budget, &StopSignal::default(), sinks)?;
            log::info!("trainer finished {} updates at version {}", reports.len(), trainer.version());
        }
        Role::Eval => {
            std::fs::create_dir_all(&paths.eval_dir)?;
            let remote = RemoteFabric::new(endpoint, connect_timeout);
            let mut log = eval::EvalLogWriter::open(&paths.eval_log)?;
            let stop = StopSignal::default();
            let _timer = budget.seconds.map(|s| stop_after(stop.clone(), s));
            let reports =
                evaluator_loop(&remote, &spec.track, &evaluation, &stop, Some(&mut log), Some(&paths.eval_dir))?;
            log::info!("evaluator wrote {} reports", reports.len());
        }
    }
    Ok(())
}

/// Raises `stop` after `seconds` on a detached thread.
fn stop_after(stop: StopSignal, seconds: f64) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || {
        std::thread::sleep(Duration::from_secs_f64(seconds));
        stop.stop();
    })
}

fn eval_command(a: &EvalArgs) -> Result<(), CliError> {
    if a.trials == Some(0) {
        return usage("--trials must be at least 1");
    }
    if a.window == Some(0) {
        return usage("--window must be at least 1");
    }
    if a.noise.is_some_and(|n| !(0.0..=1.0).contains(&n)) {
        return usage("--noise must lie in [0, 1]");
    }
    if a.select {
        let version = select_from_run(a)?;
        println!("{version}");
        return Ok(());
    }
    let settings = Settings::load(a.config.as_deref())?;
    let mut cfg = settings.eval.clone();
    cfg.trials = a.trials.unwrap_or(cfg.trials);
    cfg.noise_frac = a.noise.unwrap_or(cfg.noise_frac);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.augment |= a.augment;

    let (ck_path, default_out) = if a.path.is_dir() {
        let paths = RunPaths::new(&a.path);
        (latest_checkpoint(&paths.checkpoints)?, paths.eval_dir)
    } else {
        let parent = a.path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        (a.path.clone(), parent)
    };
    let ck = Checkpoint::load(&ck_path)?;
    let track = load_track(a.track.as_deref())?;
    let sim = sim_for_checkpoint(&ck, &settings)?;
    let out_dir = a.out.clone().unwrap_or(default_out);
    std::fs::create_dir_all(&out_dir)?;
    for protocol in a.protocol.protocols() {
        let report = evaluate(&ck.nets, &track, &sim, protocol, &cfg, ck.meta.version)?;
        let file = out_dir.join(summary_file_name(report.version, protocol));
        std::fs::write(&file, report.summary_json())?;
        log::info!(
            "v{} {}: mean progress {:.3}, completion {:.2} ({})",
            report.version,
            protocol.as_str(),
            report.mean_progress,
            report.completion_rate,
            file.display()
        );
    }
    Ok(())
}

/// Simulator settings matching the checkpoint: its embedded config when
/// present, with the observation shape taken from its architecture.
fn sim_for_checkpoint(ck: &Checkpoint, fallback: &Settings) -> Result<SimConfig, CliError> {
    let mut sim = if ck.meta.config.trim().is_empty() {
        fallback.sim.clone()
    } else {
        Settings::parse(&ck.meta.config)?.sim
    };
    match ck.nets.architecture {
        rl::Architecture::Features { .. } => sim.obs_mode = ObsMode::Features,
        rl::Architecture::Image { width, height, .. } => {
            sim.obs_mode = ObsMode::Image;
            sim.image_w = width;
            sim.image_h = height;
        }
    }
    Ok(sim)
}

fn latest_checkpoint(dir: &Path) -> Result<PathBuf, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|_| CliError::NoCheckpoints(dir.to_path_buf()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "drck"))
        .collect();
    files.sort();
    files.pop().ok_or_else(|| CliError::NoCheckpoints(dir.to_path_buf()))
}

fn select_from_run(a: &EvalArgs) -> Result<u64, CliError> {
    let log_path = if a.path.is_dir() { RunPaths::new(&a.path).eval_log } else { a.path.clone() };
    let text = std::fs::read_to_string(&log_path)?;
    let protocol = match a.protocol {
        ProtocolArg::Naive => Protocol::Naive,
        ProtocolArg::Robust | ProtocolArg::Both => Protocol::Robust,
    };
    let mut reports: Vec<_> = parse_eval_log(&text)?.into_iter().filter(|r| r.protocol == protocol).collect();
    reports.sort_by_key(|r| r.version);
    reports.dedup_by_key(|r| r.version);
    let settings = Settings::load(a.config.as_deref())?;
    let window = a.window.unwrap_or(settings.eval.select_window);
    Ok(select_checkpoint(&reports, window)?)
}
