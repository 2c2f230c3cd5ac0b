//! Liver anatomy defaults, disease presets as stiffness fields, and the
//! stiffness estimation / diagnosis pipeline.

mod classify;
mod noise;

pub use classify::{
    classify, estimate_stiffness, extract_features, Calibration, CalibrationRow, ConditionScore,
    DiagnosisResult, Features, StiffnessFit, CALIBRATION_VERSION, MIN_FIT_SAMPLES, MIN_SITES,
    QUASI_STATIC_SPEED, SHIPPED_CALIBRATION, SITE_MIN_DEPTH, session_sites,
};
pub use noise::value_noise;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{LiverShape, TriMesh, Vec3};
use crate::haptics::Event;

#[derive(Debug, Error, PartialEq)]
pub enum PathologyError {
    #[error("unknown condition {0:?}")]
    UnknownCondition(String),
    #[error("invalid preset: {0}")]
    InvalidPreset(String),
    #[error("insufficient qualifying samples: {found} (need {needed})")]
    InsufficientSamples { found: usize, needed: usize },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("calibration table line {line}: {message}")]
    Calibration { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Normal,
    Fatty,
    Hepatitis,
    Cirrhosis,
    Neoplasm,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Normal,
        Condition::Fatty,
        Condition::Hepatitis,
        Condition::Cirrhosis,
        Condition::Neoplasm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Normal => "normal",
            Condition::Fatty => "fatty",
            Condition::Hepatitis => "hepatitis",
            Condition::Cirrhosis => "cirrhosis",
            Condition::Neoplasm => "neoplasm",
        }
    }

    /// All conditions sorted by name; the tie-break order for diagnosis.
    pub fn lexicographic() -> [Condition; 5] {
        let mut all = Condition::ALL;
        all.sort_by_key(|c| c.as_str());
        all
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = PathologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| PathologyError::UnknownCondition(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnatomyParams {
    /// Percussion span (m).
    pub span: f64,
    /// Organ mass (kg).
    pub mass: f64,
    pub sex: Sex,
}

impl AnatomyParams {
    pub fn male() -> Self {
        AnatomyParams {
            span: 0.10,
            mass: 1.45,
            sex: Sex::Male,
        }
    }

    pub fn female() -> Self {
        AnatomyParams {
            span: 0.07,
            mass: 1.3,
            sex: Sex::Female,
        }
    }
}

impl Default for AnatomyParams {
    fn default() -> Self {
        AnatomyParams::male()
    }
}

/// Span deviation from normal that counts as abnormal (m).
pub const ABNORMAL_SPAN_DEVIATION: f64 = 0.02;
/// Tenderness threshold of the hepatitis preset (N).
pub const HEPATITIS_TENDERNESS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nodularity {
    /// N/m
    pub amplitude: f64,
    /// 1/m
    pub frequency: f64,
    pub seed: u64,
}

impl Nodularity {
    pub const NONE: Nodularity = Nodularity {
        amplitude: 0.0,
        frequency: 0.0,
        seed: 0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lesion {
    pub center: Vec3,
    pub radius: f64,
    /// N/m
    pub k: f64,
}

/// A disease condition as a parameter field over the liver surface.
/// Positions are in the object's local frame after scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiverPreset {
    pub condition: Condition,
    pub seed: u64,
    pub anatomy: AnatomyParams,
    /// Enlargement about the object origin.
    pub scale: f64,
    pub k_base: f64,
    pub nodularity: Nodularity,
    pub lesions: Vec<Lesion>,
    pub tenderness_threshold: Option<f64>,
    /// Umbrella smoothing passes over the edge band.
    pub edge_rounding: usize,
}

/// Deterministic preset for `(condition, seed)`.
pub fn make_preset(condition: Condition, seed: u64) -> LiverPreset {
    let mut p = LiverPreset {
        condition,
        seed,
        anatomy: AnatomyParams::default(),
        scale: 1.0,
        k_base: 300.0,
        nodularity: Nodularity::NONE,
        lesions: Vec::new(),
        tenderness_threshold: None,
        edge_rounding: 0,
    };
    match condition {
        Condition::Normal => {}
        Condition::Fatty => {
            p.scale = 1.25;
            p.k_base = 350.0;
            p.edge_rounding = 8;
        }
        Condition::Hepatitis => {
            p.scale = 1.22;
            p.k_base = 310.0;
            p.tenderness_threshold = Some(HEPATITIS_TENDERNESS);
        }
        Condition::Cirrhosis => {
            p.scale = 1.22;
            p.k_base = 500.0;
            p.nodularity = Nodularity {
                amplitude: 150.0,
                frequency: 80.0,
                seed,
            };
        }
        Condition::Neoplasm => {
            p.scale = 1.3;
            p.lesions = neoplasm_lesions(p.scale, seed);
        }
    }
    p
}

/// One primary lesion within 8 mm of the anterior center plus two satellites.
fn neoplasm_lesions(scale: f64, seed: u64) -> Vec<Lesion> {
    let shape = LiverShape::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e65_6f70_6c61_736d);
    // (x, y) are in scaled coordinates
    let on_surface = |x: f64, y: f64| {
        shape.anterior_point(x / scale, y / scale).expect("lesion sites lie inside the outline") * scale
    };
    let r = 0.008 * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    let mut lesions = vec![Lesion {
        center: on_surface(r * a.cos(), r * a.sin()),
        radius: 0.01,
        k: 2000.0,
    }];
    for _ in 0..2 {
        let x = rng.random_range(-0.6..0.6) * shape.half_width * scale;
        let y = rng.random_range(-0.6..0.6) * shape.half_span * scale;
        lesions.push(Lesion {
            center: on_surface(x, y),
            radius: 0.006,
            k: 2000.0,
        });
    }
    lesions
}

impl LiverPreset {
    /// Scaled percussion span (m).
    pub fn span(&self) -> f64 {
        self.anatomy.span * self.scale
    }

    pub fn validate(&self) -> Result<(), PathologyError> {
        let bad = |m: &str| Err(PathologyError::InvalidPreset(m.to_string()));
        if !(self.scale >= 1.0) || !self.scale.is_finite() {
            return bad("scale must be >= 1");
        }
        if !(self.k_base > 0.0) {
            return bad("k_base must be positive");
        }
        let n = &self.nodularity;
        if !(n.amplitude >= 0.0 && n.amplitude < self.k_base && n.frequency >= 0.0) {
            return bad("nodularity amplitude must lie in [0, k_base)");
        }
        for l in &self.lesions {
            if !(l.radius > 0.0 && l.k >= self.k_base) || !l.center.is_finite() {
                return bad("lesions need radius > 0 and k >= k_base");
            }
        }
        if let Some(t) = self.tenderness_threshold {
            if !(t > 0.0) {
                return bad("tenderness threshold must be positive");
            }
        }
        if !(self.anatomy.span > 0.0 && self.anatomy.mass > 0.0) {
            return bad("anatomy span and mass must be positive");
        }
        Ok(())
    }

    /// Contact stiffness (N/m) at local point `q`.
    pub fn stiffness_at(&self, q: Vec3) -> f64 {
        let mut k = self.k_base;
        let n = &self.nodularity;
        if n.amplitude != 0.0 {
            k += n.amplitude * value_noise(q * n.frequency, n.seed);
        }
        for l in &self.lesions {
            let d2 = (q - l.center).norm_squared();
            k += (l.k - self.k_base) * (-d2 / (2.0 * l.radius * l.radius)).exp();
        }
        k
    }

    /// Rest geometry for this preset: scaled about the origin, then edge
    /// rounded.
    pub fn shape_mesh(&self, mesh: &TriMesh) -> TriMesh {
        let scaled = mesh.map_vertices(|v| v * self.scale);
        round_edges(&scaled, self.edge_rounding)
    }
}

pub fn stiffness_at(preset: &LiverPreset, q: Vec3) -> f64 {
    preset.stiffness_at(q)
}

/// Vertices whose normal is closer to horizontal than this form the edge band.
const EDGE_BAND_NZ: f64 = 0.5;

/// Umbrella smoothing restricted to the edge band.
pub fn round_edges(mesh: &TriMesh, iterations: usize) -> TriMesh {
    if iterations == 0 {
        return mesh.clone();
    }
    let band: Vec<bool> = mesh.vertex_normals().iter().map(|n| n.z.abs() < EDGE_BAND_NZ).collect();
    let neighbors = mesh.vertex_neighbors();
    let mut v = mesh.vertices().to_vec();
    for _ in 0..iterations {
        let prev = v.clone();
        for (i, nb) in neighbors.iter().enumerate() {
            if !band[i] || nb.is_empty() {
                continue;
            }
            let avg = nb.iter().map(|&j| prev[j]).sum::<Vec3>() / nb.len() as f64;
            v[i] = prev[i] + (avg - prev[i]) * 0.5;
        }
    }
    mesh.with_vertices(v)
}

/// Emits a tenderness event iff the preset has a threshold and `|force|`
/// strictly exceeds it.
pub fn tenderness_check(preset: &LiverPreset, force: Vec3) -> Option<Event> {
    let threshold = preset.tenderness_threshold?;
    let magnitude = force.norm();
    (magnitude > threshold).then_some(Event::Tenderness { magnitude })
}
