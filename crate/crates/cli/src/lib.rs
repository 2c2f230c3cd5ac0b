//! The `palpsim` command line: scripted runs, loop benchmarks, skeleton
//! reports, the diagnosis experiment and the session service.

mod args;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use palpsim_core::engine::{self, Engine, EngineError, Mode, SceneSetup, SimConfig, TimingStats};
use palpsim_core::geometry::{LiverShape, Vec3};
use palpsim_core::haptics::{Backend, Trajectory, VirtualDevice};
use palpsim_core::pathology::{make_preset, Calibration, Condition};
use palpsim_core::persistence::{self, write_trace_csv};
use palpsim_core::protocol::{self, ProtocolParams};
use palpsim_service::{Service, ServiceConfig};
use serde::Serialize;
use thiserror::Error;

pub use args::{
    parse_seeds, BenchArgs, CalibrateArgs, ClassifyArgs, Cli, Commands, ConditionList, RunArgs, SceneArgs, SeedList,
    ServeArgs, SkeletonArgs,
};

/// p99 step time above which `bench` reports a budget violation (s).
pub const STEP_BUDGET: f64 = 1e-3;

pub mod exit {
    pub const OK: u8 = 0;
    /// Bad flags or unreadable / invalid input files.
    pub const INPUT: u8 = 2;
    /// `bench` measured p99 step time at or above the budget.
    pub const BUDGET: u8 = 3;
    /// The simulation or experiment failed while running.
    pub const RUNTIME: u8 = 4;
    /// An output file could not be written.
    pub const OUTPUT: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("simulation failed: {0}")]
    Runtime(String),
    #[error("{}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("step budget exceeded: p99 {p99_ms:.3} ms >= {:.3} ms", STEP_BUDGET * 1e3)]
    Budget { p99_ms: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Read { .. } | CliError::Invalid { .. } | CliError::Usage(_) => exit::INPUT,
            CliError::Runtime(_) => exit::RUNTIME,
            CliError::Write { .. } => exit::OUTPUT,
            CliError::Budget { .. } => exit::BUDGET,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Fails before any work if `path` cannot be created.
fn check_writable(path: &Path) -> Result<(), CliError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(CliError::Write {
            path: path.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "directory does not exist"),
        });
    }
    if path.is_dir() {
        return Err(CliError::Write {
            path: path.to_path_buf(),
            source: io::Error::new(io::ErrorKind::InvalidInput, "is a directory"),
        });
    }
    Ok(())
}

/// Loads a scene document, or the built-in liver scene when `path` is None.
pub fn load_setup(path: Option<&Path>) -> Result<SceneSetup, CliError> {
    let Some(path) = path else {
        return Ok(SceneSetup::default_liver());
    };
    if !path.is_file() {
        return Err(CliError::Read {
            path: path.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "no such file"),
        });
    }
    persistence::load_scene_file(path).map_err(|e| match e {
        persistence::PersistenceError::Io { path, source } => CliError::Read { path, source },
        other => CliError::Invalid {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

fn engine_error(e: EngineError) -> CliError {
    match e {
        EngineError::Config(m) => CliError::Usage(m),
        other => CliError::Runtime(other.to_string()),
    }
}

/// Effective node-placement seed: flag or PALPSIM_SEED, else the scene's.
fn seed(flag: Option<u64>, setup: &SceneSetup) -> u64 {
    flag.unwrap_or(setup.skeleton.seed)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Commands::Run(a) => cmd_run(&a),
        Commands::Bench(a) => cmd_bench(&a),
        Commands::Skeleton(a) => cmd_skeleton(&a),
        Commands::Classify(a) => cmd_classify(&a),
        Commands::Calibrate(a) => cmd_calibrate(&a),
        Commands::Serve(a) => cmd_serve(&a),
        Commands::Scene(a) => cmd_scene(&a),
    }
}

/// Default timing output next to the trace: `trace.csv` → `trace.timing.json`.
pub fn default_stats_path(out: &Path) -> PathBuf {
    out.with_extension("timing.json")
}

pub fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let mut setup = load_setup(Some(&a.scene))?;
    let traj_text = read(&a.traj)?;
    let traj = Trajectory::parse(&traj_text).map_err(|e| CliError::Invalid {
        path: a.traj.clone(),
        message: e.to_string(),
    })?;
    if let Some(b) = a.backend {
        setup.backend = b;
    }
    let stats_path = a.stats.clone().unwrap_or_else(|| default_stats_path(&a.out));
    check_writable(&a.out)?;
    check_writable(&stats_path)?;
    let config = SimConfig {
        haptic_rate: a.haptic_rate,
        graphics_rate: a.graphics_rate,
        duration: Some(a.duration),
        mode: a.mode,
        seed: seed(a.seed, &setup),
        backend: setup.backend,
    };
    let engine = Engine::new(config, VirtualDevice::scripted(traj), &setup).map_err(engine_error)?;
    let (trace, stats) = engine.run().map_err(engine_error)?;

    let file = fs::File::create(&a.out).map_err(|source| CliError::Write {
        path: a.out.clone(),
        source,
    })?;
    write_trace_csv(io::BufWriter::new(file), &trace).map_err(|source| CliError::Write {
        path: a.out.clone(),
        source,
    })?;
    write(&stats_path, &to_json(&stats))?;
    eprintln!(
        "{} ticks, {} snapshots, p99 step {:.1} us",
        stats.ticks,
        stats.snapshots,
        stats.p99_step_s * 1e6
    );
    Ok(())
}

/// Press-and-release cycles over the top of the object, covering `duration`.
pub fn bench_trajectory(setup: &SceneSetup, duration: f64) -> Result<Trajectory, CliError> {
    let spec = setup.object_spec().map_err(engine_error)?;
    let b = spec.mesh.map_vertices(|v| spec.transform.apply_point(v)).aabb();
    let (c, top) = (b.center(), b.max.z);
    let above = Vec3::new(c.x, c.y, top + 0.01);
    let deep = Vec3::new(c.x, c.y, top - 0.008);
    let mut points = vec![(0.0, above)];
    let mut t = 0.0;
    while t < duration {
        points.push((t + 0.5, deep));
        points.push((t + 1.0, above));
        t += 1.0;
    }
    Trajectory::new(points).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn bench_stats(setup: &SceneSetup, duration: f64, seed: u64) -> Result<TimingStats, CliError> {
    let config = SimConfig {
        duration: Some(duration),
        mode: Mode::Realtime,
        seed,
        backend: setup.backend,
        ..SimConfig::default()
    };
    let traj = bench_trajectory(setup, duration)?;
    let mut engine = Engine::new(config, VirtualDevice::scripted(traj), setup).map_err(engine_error)?;
    engine.set_recording(false);
    let (_, stats) = engine.run().map_err(engine_error)?;
    Ok(stats)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    let mut setup = load_setup(a.scene.as_deref())?;
    if let Some(b) = a.backend {
        setup.backend = b;
    }
    if !(a.duration.is_finite() && a.duration > 0.0) {
        return Err(CliError::Usage(format!("duration {} s must be positive", a.duration)));
    }
    if let Some(out) = &a.out {
        check_writable(out)?;
    }
    let stats = bench_stats(&setup, a.duration, seed(a.seed, &setup))?;
    let json = to_json(&stats);
    print!("{json}");
    if let Some(out) = &a.out {
        write(out, &json)?;
    }
    if stats.p99_step_s >= STEP_BUDGET {
        return Err(CliError::Budget {
            p99_ms: stats.p99_step_s * 1e3,
        });
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SkeletonReport {
    pub nodes: usize,
    pub links: usize,
    pub anchored: usize,
    pub seed: u64,
    pub min_degree: usize,
    pub max_degree: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    pub rest_length_min: f64,
    pub rest_length_max: f64,
    pub total_mass: f64,
    pub structure_violations: Vec<String>,
    pub mesh_triangles: usize,
    pub build_time_s: f64,
}

pub fn cmd_skeleton(a: &SkeletonArgs) -> Result<(), CliError> {
    let setup = load_setup(a.scene.as_deref())?;
    if let Some(out) = &a.out {
        check_writable(out)?;
    }
    let mut spec = setup.object_spec().map_err(engine_error)?;
    spec.skeleton.seed = seed(a.seed, &setup);
    if let Some(n) = a.nodes {
        spec.skeleton.nodes = n;
    }
    let mesh = spec.preset.shape_mesh(&spec.mesh).map_vertices(|v| spec.transform.apply_point(v));
    let t0 = Instant::now();
    let sk = palpsim_core::deform::build_skeleton(&mesh, &spec.skeleton).map_err(|e| CliError::Runtime(e.to_string()))?;
    let build_time_s = t0.elapsed().as_secs_f64();
    let degrees = sk.degrees();
    let fold = |it: &mut dyn Iterator<Item = f64>| it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let (radius_min, radius_max) = fold(&mut sk.nodes.iter().map(|n| n.radius));
    let (rest_length_min, rest_length_max) = fold(&mut sk.links.iter().map(|l| l.rest_length));
    let report = SkeletonReport {
        nodes: sk.nodes.len(),
        links: sk.links.len(),
        anchored: sk.nodes.iter().filter(|n| n.anchored).count(),
        seed: spec.skeleton.seed,
        min_degree: degrees.iter().copied().min().unwrap_or(0),
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        radius_min,
        radius_max,
        rest_length_min,
        rest_length_max,
        total_mass: sk.nodes.iter().filter(|n| !n.anchored).map(|n| n.mass).sum(),
        structure_violations: sk.structure_violations(),
        mesh_triangles: mesh.triangle_count(),
        build_time_s,
    };
    let json = to_json(&report);
    print!("{json}");
    if let Some(out) = &a.out {
        write(out, &json)?;
    }
    Ok(())
}

fn load_calibration(path: Option<&Path>) -> Result<Calibration, CliError> {
    match path {
        None => Ok(Calibration::shipped()),
        Some(p) => Calibration::parse_tsv(&read(p)?).map_err(|e| CliError::Invalid {
            path: p.to_path_buf(),
            message: e.to_string(),
        }),
    }
}

pub fn cmd_classify(a: &ClassifyArgs) -> Result<(), CliError> {
    let setup = load_setup(a.scene.as_deref())?;
    let calibration = load_calibration(a.calibration.as_deref())?;
    check_writable(&a.out)?;
    let params = if a.noiseless {
        ProtocolParams::noiseless()
    } else {
        ProtocolParams::default()
    };
    let report = protocol::run_experiment(&setup, &a.conditions.0, &a.seeds.0, &params, &calibration)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write(&a.out, &to_json(&report))?;
    let mut stdout = io::stdout().lock();
    let _ = write!(stdout, "{}", report.confusion_tsv());
    let _ = writeln!(stdout, "accuracy\t{}", report.accuracy);
    Ok(())
}

pub fn cmd_calibrate(a: &CalibrateArgs) -> Result<(), CliError> {
    let setup = load_setup(a.scene.as_deref())?;
    check_writable(&a.out)?;
    let cal = protocol::calibrate(&setup, &a.seeds.0, &ProtocolParams::default())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write(&a.out, &cal.to_tsv())
}

pub fn cmd_serve(a: &ServeArgs) -> Result<(), CliError> {
    let mut setup = load_setup(a.scene.as_deref())?;
    if let Some(b) = a.backend {
        setup.backend = b;
    }
    let mut config = ServiceConfig::new(setup);
    config.calibration = load_calibration(a.calibration.as_deref())?;
    config.sim.seed = seed(a.seed, &config.setup);
    let service = Service::start((a.bind.as_str(), a.port), config).map_err(|e| match e {
        palpsim_service::ServiceError::Engine(e) => engine_error(e),
        other => CliError::Usage(other.to_string()),
    })?;
    eprintln!("listening on ws://{}", service.local_addr());
    let stats = service.wait().map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("{}", to_json(&stats));
    Ok(())
}

pub fn cmd_scene(a: &SceneArgs) -> Result<(), CliError> {
    check_writable(&a.out)?;
    let mesh = LiverShape::default().tessellate(a.slices, a.stacks);
    let target = (a.target_triangles > 0).then_some(a.target_triangles);
    let mut setup = SceneSetup::with_mesh(mesh, target);
    setup.preset = make_preset(a.condition, a.seed);
    setup.backend = a.backend;
    persistence::save_setup(&a.out, &setup).map_err(|e| match e {
        persistence::PersistenceError::Io { path, source } => CliError::Write { path, source },
        other => CliError::Usage(other.to_string()),
    })
}

/// Re-exported for tests that compare against a direct engine run.
pub fn run_lockstep(setup: &SceneSetup, config: SimConfig, traj: Trajectory) -> Result<String, CliError> {
    let (trace, _) = engine::run(config, VirtualDevice::scripted(traj), setup).map_err(engine_error)?;
    Ok(persistence::trace_to_csv(&trace))
}

pub fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse()
}

pub fn parse_condition(s: &str) -> Result<Condition, String> {
    s.parse().map_err(|e: palpsim_core::pathology::PathologyError| e.to_string())
}
