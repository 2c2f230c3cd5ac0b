//! Dual-rate simulation engine: fixed-rate haptic stepping, snapshot
//! publication at graphics cadence, a bounded command queue and timing
//! statistics. Lockstep mode ignores the wall clock and is bit-deterministic.

mod setup;
mod trace;

pub use setup::{SceneSetup, LIVER_ASSET, LIVER_TARGET_TRIANGLES};
pub use trace::{trace_row, trace_to_csv, write_trace_csv, TRACE_HEADER};

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use arc_swap::ArcSwapOption;
use crossbeam_queue::ArrayQueue;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::Contact;
use crate::deform::DeformError;
use crate::geometry::{GeometryError, Vec3};
use crate::haptics::{Backend, Event, ForceSample, ForceTrace, HapticsError, ProbeState, VirtualDevice, World};
use crate::pathology::{Condition, LiverPreset};

/// Capacity of the command queue.
pub const COMMAND_CAPACITY: usize = 1024;
/// Realtime catch-up limit before the schedule is rebased.
pub const MAX_CATCH_UP: u32 = 5;
/// Step durations kept for percentiles; longer runs keep the most recent.
pub const TIMING_WINDOW: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("simulation halted at tick {tick}: {source}")]
    Halted {
        tick: u64,
        #[source]
        source: HapticsError,
    },
    #[error(transparent)]
    Haptics(#[from] HapticsError),
}

impl From<DeformError> for EngineError {
    fn from(e: DeformError) -> Self {
        EngineError::Haptics(HapticsError::Deform(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Realtime,
    Lockstep,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Realtime => "realtime",
            Mode::Lockstep => "lockstep",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "realtime" => Ok(Mode::Realtime),
            "lockstep" => Ok(Mode::Lockstep),
            _ => Err(format!("unknown mode {s:?} (expected realtime or lockstep)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Hz
    pub haptic_rate: f64,
    /// Hz, within 20..=60.
    pub graphics_rate: f64,
    /// Seconds; `None` runs until stopped.
    pub duration: Option<f64>,
    pub mode: Mode,
    /// Skeleton node placement seed.
    pub seed: u64,
    pub backend: Backend,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            haptic_rate: 1000.0,
            graphics_rate: 30.0,
            duration: Some(1.0),
            mode: Mode::Lockstep,
            seed: 0,
            backend: Backend::Surface,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let err = |m: String| Err(EngineError::Config(m));
        if !(20.0..=60.0).contains(&self.graphics_rate) {
            return err(format!("graphics rate {} Hz outside 20..=60", self.graphics_rate));
        }
        if !(self.haptic_rate.is_finite() && self.haptic_rate >= self.graphics_rate) {
            return err(format!(
                "haptic rate {} Hz must be finite and at least the graphics rate",
                self.haptic_rate
            ));
        }
        if let Some(d) = self.duration {
            if !(d.is_finite() && d >= 0.0) {
                return err(format!("duration {d} s must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.haptic_rate
    }

    /// `floor(duration · haptic_rate)`, or `None` when unbounded.
    pub fn total_ticks(&self) -> Option<u64> {
        // the epsilon absorbs representation error such as 0.3 · 1000
        self.duration.map(|d| (d * self.haptic_rate + 1e-9).floor() as u64)
    }

    /// Whether a snapshot is published after haptic tick `tick`.
    pub fn publishes_after(&self, tick: u64) -> bool {
        let slot = |i: u64| (i as f64 * self.graphics_rate / self.haptic_rate).floor();
        slot(tick + 1) > slot(tick)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    ProbePose(Vec3),
    Preset(LiverPreset),
    Backend(Backend),
    Reset,
}

/// Acknowledgment token: the command's position in submission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommandToken(pub u64);

#[derive(Debug, Clone, PartialEq, Error)]
#[error("command queue full ({COMMAND_CAPACITY} pending)")]
pub struct QueueFull(pub Command);

/// Producer handle for the engine's bounded command queue.
#[derive(Debug, Clone)]
pub struct CommandSender {
    queue: Arc<ArrayQueue<(CommandToken, Command)>>,
    next: Arc<AtomicU64>,
}

impl CommandSender {
    fn new() -> Self {
        CommandSender {
            queue: Arc::new(ArrayQueue::new(COMMAND_CAPACITY)),
            next: Arc::new(AtomicU64::new(1)),
        }
    }

    /// Enqueues `cmd` for the next tick boundary; never blocks.
    pub fn enqueue(&self, cmd: Command) -> Result<CommandToken, QueueFull> {
        if self.queue.is_full() {
            return Err(QueueFull(cmd));
        }
        let token = CommandToken(self.next.fetch_add(1, Ordering::Relaxed));
        self.queue.push((token, cmd)).map_err(|(_, c)| QueueFull(c))?;
        Ok(token)
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresetId {
    pub condition: Condition,
    pub seed: u64,
}

/// Immutable copy of the simulation at a tick boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSnapshot {
    /// Publication sequence number, strictly increasing.
    pub seq: u64,
    /// Haptic tick this snapshot was taken after.
    pub tick: u64,
    pub t: f64,
    pub vertices: Vec<Vec3>,
    pub probe: ProbeState,
    pub force: Vec3,
    pub contacts: Vec<Contact>,
    pub events: Vec<Event>,
    pub preset: PresetId,
    pub backend: Backend,
    /// Token of the last command applied before this tick.
    pub last_command: u64,
}

/// Latest-wins snapshot slot shared with consumers.
#[derive(Debug, Default)]
pub struct SnapshotHub {
    slot: ArcSwapOption<SimSnapshot>,
    published: AtomicU64,
}

impl SnapshotHub {
    fn publish(&self, snap: SimSnapshot) {
        self.slot.store(Some(Arc::new(snap)));
        self.published.fetch_add(1, Ordering::Release);
    }

    pub fn latest(&self) -> Option<Arc<SimSnapshot>> {
        self.slot.load_full()
    }

    pub fn published(&self) -> u64 {
        self.published.load(Ordering::Acquire)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub cpu_model: String,
}

impl MachineInfo {
    pub fn detect() -> Self {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|m| m.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        MachineInfo {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            cpu_model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub mode: Mode,
    pub ticks: u64,
    /// Haptic step compute time percentiles (s).
    pub p50_step_s: f64,
    pub p99_step_s: f64,
    pub max_step_s: f64,
    /// Ticks whose compute time exceeded the period (realtime only).
    pub missed_deadlines: u64,
    /// Deadlines dropped when the catch-up limit was exceeded (realtime only).
    pub skipped_deadlines: u64,
    /// Over wall time in realtime mode, over simulated time in lockstep.
    pub achieved_haptic_rate_hz: f64,
    pub achieved_snapshot_rate_hz: f64,
    pub snapshots: u64,
    pub wall_time_s: f64,
    pub machine: MachineInfo,
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Owns the world state and steps it one haptic tick at a time.
pub struct Engine {
    config: SimConfig,
    world: World,
    device: VirtualDevice,
    tick: u64,
    commands: CommandSender,
    hub: Arc<SnapshotHub>,
    tap: Option<Arc<ArrayQueue<ForceSample>>>,
    stop: Arc<AtomicBool>,
    last_command: u64,
    record: bool,
    trace: ForceTrace,
    step_times: Vec<f64>,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("config", &self.config)
            .field("tick", &self.tick)
            .finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(config: SimConfig, device: VirtualDevice, setup: &SceneSetup) -> Result<Engine, EngineError> {
        config.validate()?;
        let mut spec = setup.object_spec()?;
        spec.skeleton.seed = config.seed;
        spec.skeleton.dt = config.dt();
        if let (crate::haptics::DeviceMode::Scripted(traj), Some(n)) = (&device.mode, config.total_ticks()) {
            let last = n.saturating_sub(1) as f64 * config.dt();
            if n > 0 && (traj.start() > 0.0 || traj.end() < last) {
                return Err(EngineError::Config(format!(
                    "trajectory spans [{}, {}] s but the run needs [0, {last}] s",
                    traj.start(),
                    traj.end()
                )));
            }
        }
        let world = World::new(spec, config.backend)?;
        Ok(Engine {
            config,
            world,
            device,
            tick: 0,
            commands: CommandSender::new(),
            hub: Arc::new(SnapshotHub::default()),
            tap: None,
            stop: Arc::new(AtomicBool::new(false)),
            last_command: 0,
            record: true,
            trace: Vec::new(),
            step_times: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn commands(&self) -> CommandSender {
        self.commands.clone()
    }

    pub fn enqueue_command(&self, cmd: Command) -> Result<CommandToken, QueueFull> {
        self.commands.enqueue(cmd)
    }

    pub fn snapshots(&self) -> Arc<SnapshotHub> {
        self.hub.clone()
    }

    /// Setting this flag ends [`Engine::run`] at the next tick boundary.
    pub fn stop_handle(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    /// Mirrors every sample into a bounded queue, dropping the oldest.
    pub fn sample_tap(&mut self, capacity: usize) -> Arc<ArrayQueue<ForceSample>> {
        let q = Arc::new(ArrayQueue::new(capacity));
        self.tap = Some(q.clone());
        q
    }

    /// Keep (default) or drop the in-memory trace.
    pub fn set_recording(&mut self, record: bool) {
        self.record = record;
    }

    pub fn trace(&self) -> &[ForceSample] {
        &self.trace
    }

    fn apply_commands(&mut self) -> Result<(), EngineError> {
        // only what was queued before this boundary; later pushes wait a tick
        for _ in 0..self.commands.queue.len() {
            let Some((token, cmd)) = self.commands.queue.pop() else { break };
            match cmd {
                Command::ProbePose(p) => {
                    self.device.command(p);
                }
                Command::Preset(p) => self.world.set_preset(p)?,
                Command::Backend(b) => self.world.set_backend(b),
                Command::Reset => self.world.reset(),
            }
            self.last_command = token.0;
        }
        Ok(())
    }

    /// Applies pending commands, runs one haptic tick and publishes a
    /// snapshot when due.
    pub fn step(&mut self) -> Result<ForceSample, EngineError> {
        let tick = self.tick;
        self.apply_commands()?;
        let dt = self.config.dt();
        let t = tick as f64 * dt;
        let halt = |source| EngineError::Halted { tick, source };
        let probe = self.device.tick(t, dt).map_err(halt)?;
        let sample = self.world.haptic_tick(&probe, t, dt).map_err(halt)?;
        if self.config.publishes_after(tick) {
            self.publish_snapshot(&sample);
        }
        if let Some(tap) = &self.tap {
            tap.force_push(sample.clone());
        }
        if self.record {
            self.trace.push(sample.clone());
        }
        self.tick += 1;
        Ok(sample)
    }

    /// Copies the current state into the snapshot slot.
    pub fn publish_snapshot(&self, sample: &ForceSample) {
        let preset = self.world.preset();
        self.hub.publish(SimSnapshot {
            seq: self.hub.published() + 1,
            tick: self.tick,
            t: sample.t,
            vertices: self.world.visual_vertices(),
            probe: sample.probe,
            force: sample.force,
            contacts: self.world.contacts().to_vec(),
            events: sample.events.clone(),
            preset: PresetId {
                condition: preset.condition,
                seed: preset.seed,
            },
            backend: self.world.backend,
            last_command: self.last_command,
        });
    }

    /// Runs to the configured duration (or until stopped) and returns the
    /// trace and timing statistics.
    pub fn run(mut self) -> Result<(ForceTrace, TimingStats), EngineError> {
        let total = self.config.total_ticks();
        let start = Instant::now();
        let period = Duration::from_secs_f64(self.config.dt());
        let mut next_deadline = start + period;
        let (mut missed, mut skipped) = (0u64, 0u64);
        let published_before = self.hub.published();
        while total.is_none_or(|n| self.tick < n) && !self.stop.load(Ordering::Relaxed) {
            let t0 = Instant::now();
            self.step()?;
            let spent = t0.elapsed();
            if self.step_times.len() < TIMING_WINDOW {
                self.step_times.push(spent.as_secs_f64());
            } else {
                self.step_times[(self.tick as usize - 1) % TIMING_WINDOW] = spent.as_secs_f64();
            }
            if self.config.mode == Mode::Realtime {
                if spent > period {
                    missed += 1;
                }
                let now = Instant::now();
                if now > next_deadline + period * MAX_CATCH_UP {
                    let behind = ((now - next_deadline).as_secs_f64() / period.as_secs_f64()) as u64;
                    skipped += behind;
                    next_deadline = now;
                } else {
                    wait_until(next_deadline);
                }
                next_deadline += period;
            }
        }
        let wall = start.elapsed().as_secs_f64();
        let mut sorted = self.step_times.clone();
        sorted.sort_by(f64::total_cmp);
        let ticks = self.tick;
        let snapshots = self.hub.published() - published_before;
        let span = match self.config.mode {
            Mode::Realtime => wall,
            Mode::Lockstep => ticks as f64 * self.config.dt(),
        };
        let rate = |n: u64| if span > 0.0 { n as f64 / span } else { 0.0 };
        let stats = TimingStats {
            mode: self.config.mode,
            ticks,
            p50_step_s: percentile(&sorted, 50.0),
            p99_step_s: percentile(&sorted, 99.0),
            max_step_s: sorted.last().copied().unwrap_or(0.0),
            missed_deadlines: missed,
            skipped_deadlines: skipped,
            achieved_haptic_rate_hz: rate(ticks),
            achieved_snapshot_rate_hz: rate(snapshots),
            snapshots,
            wall_time_s: wall,
            machine: MachineInfo::detect(),
        };
        Ok((self.trace, stats))
    }
}

/// Sleeps most of the remaining time, then yields until the deadline.
fn wait_until(deadline: Instant) {
    const SLACK: Duration = Duration::from_micros(150);
    loop {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        let left = deadline - now;
        if left > SLACK {
            std::thread::sleep(left - SLACK);
        } else {
            std::thread::yield_now();
        }
    }
}

/// Builds an engine and runs it to completion.
pub fn run(config: SimConfig, device: VirtualDevice, setup: &SceneSetup) -> Result<(ForceTrace, TimingStats), EngineError> {
    Engine::new(config, device, setup)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cadence_counts() {
        let c = SimConfig::default();
        assert_eq!((0..1000).filter(|&i| c.publishes_after(i)).count(), 30);
        let c = SimConfig {
            graphics_rate: 60.0,
            ..c
        };
        assert_eq!((0..1000).filter(|&i| c.publishes_after(i)).count(), 60);
    }

    #[test]
    fn tick_totals() {
        for (d, n) in [(1.0, 1000), (0.3, 300), (0.0, 0), (2.5, 2500), (0.0015, 1)] {
            let c = SimConfig {
                duration: Some(d),
                ..SimConfig::default()
            };
            assert_eq!(c.total_ticks(), Some(n));
        }
    }

    #[test]
    fn config_bounds() {
        let bad = SimConfig {
            graphics_rate: 61.0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(SimConfig::default().validate().is_ok());
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&[3.0], 99.0), 3.0);
    }

    #[test]
    fn queue_bound() {
        let s = CommandSender::new();
        let ok = (0..2000).filter(|_| s.enqueue(Command::Reset).is_ok()).count();
        assert_eq!(ok, COMMAND_CAPACITY);
    }
}
