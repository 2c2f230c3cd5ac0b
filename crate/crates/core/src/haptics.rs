//! Virtual probe device, penalty contact law and the per-tick haptic update
//! for both deformation backends.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{probe_vs_index, sphere_sphere, Contact, Feature};
use crate::deform::{build_skeleton, DeformError, GelSkeleton, SkeletonParams, SurfaceModel, SurfaceParams};
use crate::geometry::{Aabb, MeshIndex, TriMesh, Vec3};
use crate::pathology::{tenderness_check, LiverPreset, PathologyError};
use crate::scenegraph::Transform;

/// Force clamp (N).
pub const F_MAX: f64 = 7.0;
pub const DEFAULT_PROBE_RADIUS: f64 = 0.005;
/// Contact damping b (N·s/m).
pub const DEFAULT_DAMPING: f64 = 1.5;
/// Exponential smoothing factor of the commanded-mode velocity estimate.
pub const VELOCITY_SMOOTHING: f64 = 0.2;

#[derive(Debug, Error)]
pub enum HapticsError {
    #[error("trajectory line {line}: {message}")]
    Trajectory { line: usize, message: String },
    #[error("time {t} s outside trajectory span [{start}, {end}]")]
    OutsideTrajectory { t: f64, start: f64, end: f64 },
    #[error("no probe pose has been commanded")]
    NoPose,
    #[error("non-finite state: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Preset(#[from] PathologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub radius: f64,
}

impl ProbeState {
    pub fn at(position: Vec3) -> Self {
        ProbeState {
            position,
            velocity: Vec3::ZERO,
            radius: DEFAULT_PROBE_RADIUS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Event {
    /// Contact force exceeded the preset's tenderness threshold (N).
    Tenderness { magnitude: f64 },
}

impl Event {
    pub fn tag(&self) -> &'static str {
        match self {
            Event::Tenderness { .. } => "tenderness",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    pub t: f64,
    pub probe: ProbeState,
    /// Force on the probe (N).
    pub force: Vec3,
    pub contact: Option<Contact>,
    pub events: Vec<Event>,
}

pub type ForceTrace = Vec<ForceSample>;

/// Unilateral spring-damper: `max(0, k·depth - b·(v·n)) n`, clamped to
/// [`F_MAX`].
pub fn penalty_force(contact: &Contact, probe_vel: Vec3, k: f64, b: f64) -> Vec3 {
    let magnitude = (k * contact.depth - b * probe_vel.dot(contact.normal)).max(0.0);
    contact.normal * magnitude.min(F_MAX)
}

/// Timed waypoints, linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    waypoints: Vec<(f64, Vec3)>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<(f64, Vec3)>) -> Result<Self, HapticsError> {
        if waypoints.is_empty() {
            return Err(HapticsError::Trajectory {
                line: 0,
                message: "no waypoints".into(),
            });
        }
        for (i, w) in waypoints.iter().enumerate() {
            if !w.0.is_finite() || !w.1.is_finite() {
                return Err(HapticsError::Trajectory {
                    line: i + 1,
                    message: "non-finite waypoint".into(),
                });
            }
            if i > 0 && !(w.0 > waypoints[i - 1].0) {
                return Err(HapticsError::Trajectory {
                    line: i + 1,
                    message: "timestamps must be strictly increasing".into(),
                });
            }
        }
        Ok(Trajectory { waypoints })
    }

    /// Parses `t x y z` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, HapticsError> {
        let mut pts: Vec<(f64, Vec3)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| HapticsError::Trajectory { line: i + 1, message };
            let vals = line
                .split_whitespace()
                .map(|f| f.parse::<f64>().map_err(|_| err(format!("bad number {f:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() != 4 {
                return Err(err(format!("expected `t x y z`, found {} fields", vals.len())));
            }
            if let Some(last) = pts.last() {
                if !(vals[0] > last.0) {
                    return Err(err("timestamps must be strictly increasing".into()));
                }
            }
            pts.push((vals[0], Vec3::new(vals[1], vals[2], vals[3])));
        }
        Trajectory::new(pts)
    }

    pub fn to_text(&self) -> String {
        self.waypoints
            .iter()
            .map(|(t, p)| format!("{t} {} {} {}\n", p.x, p.y, p.z))
            .collect()
    }

    pub fn waypoints(&self) -> &[(f64, Vec3)] {
        &self.waypoints
    }

    pub fn start(&self) -> f64 {
        self.waypoints[0].0
    }

    pub fn end(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].0
    }

    /// Position and segment velocity at `t`.
    pub fn sample(&self, t: f64) -> Result<(Vec3, Vec3), HapticsError> {
        let w = &self.waypoints;
        if !(t >= self.start() && t <= self.end()) {
            return Err(HapticsError::OutsideTrajectory {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        if w.len() == 1 {
            return Ok((w[0].1, Vec3::ZERO));
        }
        // segment i spans [w[i], w[i+1]]; the last waypoint uses the final segment
        let i = w.partition_point(|p| p.0 <= t).clamp(1, w.len() - 1) - 1;
        let ((t0, p0), (t1, p1)) = (w[i], w[i + 1]);
        let vel = (p1 - p0) / (t1 - t0);
        let pos = if t == t0 {
            p0
        } else if t == t1 {
            p1
        } else {
            p0.lerp(p1, (t - t0) / (t1 - t0))
        };
        Ok((pos, vel))
    }
}

/// Pose held externally and velocity estimated by smoothed backward
/// differences over ticks. The filter starts from the first difference.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandedProbe {
    target: Option<Vec3>,
    previous: Option<Vec3>,
    velocity: Option<Vec3>,
}

impl CommandedProbe {
    pub fn command(&mut self, position: Vec3) {
        self.target = Some(position);
    }

    /// Advances one tick of length `dt`.
    pub fn advance(&mut self, dt: f64) -> Result<(Vec3, Vec3), HapticsError> {
        let pos = self.target.ok_or(HapticsError::NoPose)?;
        if let Some(prev) = self.previous {
            let raw = (pos - prev) / dt;
            self.velocity = Some(match self.velocity {
                Some(v) => v + (raw - v) * VELOCITY_SMOOTHING,
                None => raw,
            });
        }
        self.previous = Some(pos);
        Ok((pos, self.velocity.unwrap_or(Vec3::ZERO)))
    }

    pub fn current(&self) -> Option<(Vec3, Vec3)> {
        Some((self.previous?, self.velocity.unwrap_or(Vec3::ZERO)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceMode {
    Scripted(Trajectory),
    Commanded(CommandedProbe),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualDevice {
    pub mode: DeviceMode,
    pub radius: f64,
    state: Option<ProbeState>,
}

impl VirtualDevice {
    pub fn scripted(trajectory: Trajectory) -> Self {
        VirtualDevice {
            mode: DeviceMode::Scripted(trajectory),
            radius: DEFAULT_PROBE_RADIUS,
            state: None,
        }
    }

    pub fn commanded() -> Self {
        VirtualDevice {
            mode: DeviceMode::Commanded(CommandedProbe::default()),
            radius: DEFAULT_PROBE_RADIUS,
            state: None,
        }
    }

    /// Sets the commanded pose; scripted devices ignore commands and
    /// report `false`.
    pub fn command(&mut self, position: Vec3) -> bool {
        match &mut self.mode {
            DeviceMode::Commanded(c) => {
                c.command(position);
                true
            }
            DeviceMode::Scripted(_) => false,
        }
    }

    /// Advances the device to the tick at time `t` and returns its state.
    pub fn tick(&mut self, t: f64, dt: f64) -> Result<ProbeState, HapticsError> {
        let (position, velocity) = match &mut self.mode {
            DeviceMode::Scripted(traj) => traj.sample(t)?,
            DeviceMode::Commanded(c) => c.advance(dt)?,
        };
        let s = ProbeState {
            position,
            velocity,
            radius: self.radius,
        };
        self.state = Some(s);
        Ok(s)
    }

    /// Last state produced by [`VirtualDevice::tick`].
    pub fn state(&self) -> Option<ProbeState> {
        self.state
    }
}

/// Probe state of `dev` at time `t` without advancing it. Scripted devices
/// interpolate; commanded devices report the last ticked pose.
pub fn device_pose(dev: &VirtualDevice, t: f64) -> Result<ProbeState, HapticsError> {
    let (position, velocity) = match &dev.mode {
        DeviceMode::Scripted(traj) => traj.sample(t)?,
        DeviceMode::Commanded(c) => c.current().ok_or(HapticsError::NoPose)?,
    };
    Ok(ProbeState {
        position,
        velocity,
        radius: dev.radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Surface,
    Skeleton,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Surface => "surface",
            Backend::Skeleton => "skeleton",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "surface" => Ok(Backend::Surface),
            "skeleton" => Ok(Backend::Skeleton),
            _ => Err(format!("unknown backend {s:?} (expected surface or skeleton)")),
        }
    }
}

/// Everything needed to (re)build a palpable object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    /// Object-local rest mesh before the preset is applied.
    pub mesh: TriMesh,
    pub transform: Transform,
    pub preset: LiverPreset,
    pub surface: SurfaceParams,
    pub skeleton: SkeletonParams,
    /// Contact damping b (N·s/m).
    pub damping: f64,
    pub gravity: Vec3,
}

/// Mutable simulation state of the palpable object.
#[derive(Debug, Clone)]
pub struct World {
    spec: ObjectSpec,
    to_local: Transform,
    index: MeshIndex,
    surface: SurfaceModel,
    skeleton: GelSkeleton,
    pub backend: Backend,
    indented: bool,
    contacts: Vec<Contact>,
    node_forces: Vec<Vec3>,
}

impl World {
    pub fn new(spec: ObjectSpec, backend: Backend) -> Result<World, HapticsError> {
        spec.preset.validate()?;
        let shaped = spec.preset.shape_mesh(&spec.mesh);
        let rest = shaped.map_vertices(|v| spec.transform.apply_point(v));
        let mut skeleton = build_skeleton(&rest, &spec.skeleton)?;
        skeleton.bind(&rest);
        let n = skeleton.nodes.len();
        Ok(World {
            to_local: spec.transform.inverse(),
            index: MeshIndex::new(rest.clone()),
            surface: SurfaceModel::new(rest, spec.surface),
            skeleton,
            backend,
            indented: false,
            contacts: Vec::new(),
            node_forces: vec![Vec3::ZERO; n],
            spec,
        })
    }

    pub fn spec(&self) -> &ObjectSpec {
        &self.spec
    }

    pub fn preset(&self) -> &LiverPreset {
        &self.spec.preset
    }

    /// Haptic (rest) geometry in world coordinates.
    pub fn rest_mesh(&self) -> &TriMesh {
        self.index.mesh()
    }

    pub fn index(&self) -> &MeshIndex {
        &self.index
    }

    pub fn surface(&self) -> &SurfaceModel {
        &self.surface
    }

    pub fn skeleton(&self) -> &GelSkeleton {
        &self.skeleton
    }

    /// Box holding everything the probe can touch: the rest mesh and, for
    /// the skeleton backend, the current node spheres.
    pub fn bounds(&self) -> Aabb {
        let mut b = self.index.mesh().aabb();
        if self.backend == Backend::Skeleton {
            for n in &self.skeleton.nodes {
                b = b.merge(&Aabb::from_points(&[n.position]).inflate(n.radius));
            }
        }
        b
    }

    /// Contacts of the last tick.
    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }

    /// Contact stiffness at a world-space point.
    pub fn stiffness_at(&self, q: Vec3) -> f64 {
        self.spec.preset.stiffness_at(self.to_local.apply_point(q))
    }

    /// Returns the deformable state to rest.
    pub fn reset(&mut self) {
        self.surface.reset();
        self.skeleton.reset();
        self.indented = false;
        self.contacts.clear();
    }

    /// Rebuilds the object for a new preset; state returns to rest.
    pub fn set_preset(&mut self, preset: LiverPreset) -> Result<(), HapticsError> {
        let mut spec = self.spec.clone();
        spec.preset = preset;
        *self = World::new(spec, self.backend)?;
        Ok(())
    }

    pub fn set_backend(&mut self, backend: Backend) {
        self.backend = backend;
        self.reset();
    }

    /// Displayed vertex positions.
    pub fn visual_vertices(&self) -> Vec<Vec3> {
        match self.backend {
            Backend::Surface => self.surface.visual_vertices().to_vec(),
            Backend::Skeleton => self.skeleton.skinned_vertices(self.index.mesh()),
        }
    }

    /// One haptic update at time `t` over period `dt`.
    pub fn haptic_tick(&mut self, probe: &ProbeState, t: f64, dt: f64) -> Result<ForceSample, HapticsError> {
        if !probe.position.is_finite() || !probe.velocity.is_finite() {
            return Err(HapticsError::NonFinite(format!("probe state at t={t}")));
        }
        self.contacts.clear();
        let (force, contact) = match self.backend {
            Backend::Surface => self.surface_tick(probe),
            Backend::Skeleton => self.skeleton_tick(probe, dt)?,
        };
        if !force.is_finite() {
            return Err(HapticsError::NonFinite(format!("probe force at t={t}")));
        }
        let events = tenderness_check(&self.spec.preset, force).into_iter().collect();
        Ok(ForceSample {
            t,
            probe: *probe,
            force,
            contact,
            events,
        })
    }

    fn surface_tick(&mut self, probe: &ProbeState) -> (Vec3, Option<Contact>) {
        let Some(c) = probe_vs_index(probe.position, probe.radius, &self.index) else {
            if self.indented {
                self.surface.reset();
                self.indented = false;
            }
            return (Vec3::ZERO, None);
        };
        let k = self.stiffness_at(c.point);
        let f = penalty_force(&c, probe.velocity, k, self.spec.damping);
        self.surface.indent(c.point, c.normal, c.depth);
        self.indented = true;
        self.contacts.push(c);
        (f, Some(c))
    }

    fn skeleton_tick(&mut self, probe: &ProbeState, dt: f64) -> Result<(Vec3, Option<Contact>), HapticsError> {
        self.node_forces.iter_mut().for_each(|f| *f = Vec3::ZERO);
        let mut deepest: Option<Contact> = None;
        let mut total = Vec3::ZERO;
        for (i, node) in self.skeleton.nodes.iter().enumerate() {
            // normal points out of the node toward the probe
            let Some(mut c) = sphere_sphere(probe.position, probe.radius, node.position, node.radius) else {
                continue;
            };
            c.feature = Feature { object: 0, index: i };
            let k = self.spec.preset.stiffness_at(self.to_local.apply_point(c.point));
            let f = penalty_force(&c, probe.velocity - node.velocity, k, self.spec.damping);
            self.node_forces[i] = -f;
            total += f;
            if deepest.is_none_or(|d| c.depth > d.depth) {
                deepest = Some(c);
            }
            self.contacts.push(c);
        }
        let magnitude = total.norm();
        if magnitude > F_MAX {
            let s = F_MAX / magnitude;
            self.node_forces.iter_mut().for_each(|f| *f = *f * s);
        }
        let mut on_nodes = Vec3::ZERO;
        for f in &self.node_forces {
            on_nodes += *f;
        }
        self.skeleton.step(dt, &self.node_forces, self.spec.gravity)?;
        Ok((-on_nodes, deepest))
    }

    /// Sum of the contact forces applied to skeleton nodes in the last tick.
    pub fn node_forces(&self) -> &[Vec3] {
        &self.node_forces
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contact(depth: f64) -> Contact {
        Contact {
            point: Vec3::ZERO,
            normal: Vec3::Z,
            depth,
            feature: Feature { object: 0, index: 0 },
        }
    }

    #[test]
    fn penalty_law_cases() {
        assert_eq!(penalty_force(&contact(0.0), Vec3::ZERO, 1000.0, 1.5), Vec3::ZERO);
        let f = penalty_force(&contact(0.005), Vec3::ZERO, 1000.0, 1.5);
        assert!((f - Vec3::new(0.0, 0.0, 5.0)).norm() < 1e-12);
        // retracting probe: no sticking
        let f = penalty_force(&contact(0.001), Vec3::new(0.0, 0.0, 1.0), 1000.0, 1.5);
        assert_eq!(f, Vec3::ZERO);
        let f = penalty_force(&contact(0.05), Vec3::ZERO, 1000.0, 1.5);
        assert_eq!(f.norm(), F_MAX);
    }

    #[test]
    fn scripted_interpolation() {
        let traj = Trajectory::new(vec![(0.0, Vec3::ZERO), (1.0, Vec3::X)]).unwrap();
        let (p, v) = traj.sample(0.5).unwrap();
        assert_eq!(p, Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(v, Vec3::X);
        assert_eq!(traj.sample(1.0).unwrap().0, Vec3::X);
        assert_eq!(traj.sample(0.0).unwrap().0, Vec3::ZERO);
        assert!(matches!(traj.sample(1.5), Err(HapticsError::OutsideTrajectory { .. })));
    }

    #[test]
    fn commanded_velocity_difference() {
        let mut dev = VirtualDevice::commanded();
        assert!(matches!(dev.tick(0.0, 1e-3), Err(HapticsError::NoPose)));
        dev.command(Vec3::ZERO);
        dev.tick(0.0, 1e-3).unwrap();
        dev.command(Vec3::new(0.001, 0.0, 0.0));
        let s = dev.tick(1e-3, 1e-3).unwrap();
        assert!((s.velocity.norm() - 1.0).abs() < 1e-12);
        // holding the pose decays the estimate
        let s = dev.tick(2e-3, 1e-3).unwrap();
        assert!((s.velocity.norm() - 0.8).abs() < 1e-12);
        assert_eq!(device_pose(&dev, 0.0).unwrap().position, Vec3::new(0.001, 0.0, 0.0));
    }

    #[test]
    fn trajectory_parse_errors() {
        assert!(Trajectory::parse("0 0 0 0\n1 1 0 0\n").is_ok());
        let e = Trajectory::parse("0 0 0 0\n0 1 0 0\n").unwrap_err();
        assert!(matches!(e, HapticsError::Trajectory { line: 2, .. }));
        let e = Trajectory::parse("# hdr\n0 0 0\n").unwrap_err();
        assert!(matches!(e, HapticsError::Trajectory { line: 2, .. }));
        assert!(Trajectory::parse("").is_err());
    }
}
