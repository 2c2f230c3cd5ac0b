use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use palpsim_core::engine::Mode;
use palpsim_core::haptics::Backend;
use palpsim_core::pathology::Condition;

use crate::{parse_backend, parse_condition};

#[derive(Debug, Parser)]
#[command(name = "palpsim", version, about = "Visuo-haptic liver palpation simulator")]
#[command(after_help = "Exit status: 0 ok, 2 invalid input, 3 step budget exceeded (bench), \
4 simulation failure, 5 output not writable.\nPALPSIM_SEED sets the skeleton seed when --seed is not given.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Debug, Subcommand)]
pub enum Commands {
    /// Run a scripted probe trajectory and write the force trace.
    Run(RunArgs),
    /// Measure haptic step timing in realtime mode.
    Bench(BenchArgs),
    /// Build the gel skeleton for a scene and report its structure.
    Skeleton(SkeletonArgs),
    /// Run the diagnosis experiment and write the confusion matrix.
    Classify(ClassifyArgs),
    /// Fit classifier centroids from protocol runs.
    Calibrate(CalibrateArgs),
    /// Serve one trainer session over WebSocket.
    Serve(ServeArgs),
    /// Write a liver scene document and its mesh asset.
    Scene(SceneArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scene document (XML).
    #[arg(long)]
    pub scene: PathBuf,
    /// Trajectory file: one `t x y z` waypoint per line.
    #[arg(long)]
    pub traj: PathBuf,
    /// Seconds of simulated time.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    #[arg(long, default_value_t = Mode::Lockstep)]
    pub mode: Mode,
    /// Trace CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Timing JSON output [default: OUT with extension .timing.json]
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Override the scene's backend.
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Backend>,
    /// Skeleton node placement seed.
    #[arg(long, env = "PALPSIM_SEED")]
    pub seed: Option<u64>,
    /// Hz
    #[arg(long, default_value_t = 1000.0)]
    pub haptic_rate: f64,
    /// Hz, 20 to 60.
    #[arg(long, default_value_t = 30.0)]
    pub graphics_rate: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scene document [default: built-in liver scene]
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Seconds of wall-clock time.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Backend>,
    #[arg(long, env = "PALPSIM_SEED")]
    pub seed: Option<u64>,
    /// Also write the timing JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SkeletonArgs {
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Override the node count.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long, env = "PALPSIM_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ConditionList(pub Vec<Condition>);

#[derive(Debug, Clone)]
pub struct SeedList(pub Vec<u64>);

fn parse_conditions(s: &str) -> Result<ConditionList, String> {
    if s == "all" {
        return Ok(ConditionList(Condition::ALL.to_vec()));
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let c = parse_condition(part.trim())?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(ConditionList(out))
}

/// `A..B` (end exclusive) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("invalid seed {t:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a >= b {
            return Err(format!("empty seed range {s:?}"));
        }
        return Ok(SeedList((a..b).collect()));
    }
    s.split(',').map(num).collect::<Result<_, _>>().map(SeedList)
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Comma-separated conditions, or `all`.
    #[arg(long, default_value = "all", value_parser = parse_conditions)]
    pub conditions: ConditionList,
    /// `A..B` (end exclusive) or a comma-separated list.
    #[arg(long, default_value = "0..20", value_parser = parse_seeds)]
    pub seeds: SeedList,
    /// JSON report: confusion matrix, accuracy and every trial.
    #[arg(long)]
    pub out: PathBuf,
    /// Calibration table [default: the shipped table]
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Disable site jitter and force noise.
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long)]
    pub scene: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value = "1000..1020", value_parser = parse_seeds)]
    pub seeds: SeedList,
    /// Calibration table output (TSV).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub scene: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Backend>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long, env = "PALPSIM_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Scene document to write; the mesh asset goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "normal", value_parser = parse_condition)]
    pub condition: Condition,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "surface", value_parser = parse_backend)]
    pub backend: Backend,
    /// Liver tessellation: longitudinal slices.
    #[arg(long, default_value_t = 200)]
    pub slices: usize,
    /// Liver tessellation: latitudinal stacks.
    #[arg(long, default_value_t = 101)]
    pub stacks: usize,
    /// Haptic triangle budget; 0 keeps the full mesh.
    #[arg(long, default_value_t = 3200)]
    pub target_triangles: usize,
}
