use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Condition, PathologyError};
use crate::haptics::{Event, ForceSample, F_MAX};

/// Probe speed below which a sample counts as quasi-static (m/s).
pub const QUASI_STATIC_SPEED: f64 = 0.005;
/// Minimum number of qualifying samples for a stiffness fit.
pub const MIN_FIT_SAMPLES: usize = 10;
/// Minimum number of palpation sites for a diagnosis.
pub const MIN_SITES: usize = 9;
/// Depth below which samples are ignored by the per-site fit (m).
pub const SITE_MIN_DEPTH: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessFit {
    /// N/m
    pub k: f64,
    /// RMS of `|f| - k·depth` over the fitted samples (N).
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares slope through the origin of `|force|` against depth over
/// contact samples deeper than `min_depth`, slower than
/// [`QUASI_STATIC_SPEED`] and below the force clamp.
pub fn estimate_stiffness(trace: &[ForceSample], min_depth: f64) -> Result<StiffnessFit, PathologyError> {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter_map(|s| {
            let c = s.contact.as_ref()?;
            let f = s.force.norm();
            let ok = c.depth > min_depth && s.probe.velocity.norm() < QUASI_STATIC_SPEED && f < F_MAX;
            ok.then_some((c.depth, f))
        })
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(PathologyError::InsufficientSamples {
            found: pts.len(),
            needed: MIN_FIT_SAMPLES,
        });
    }
    let sxy: f64 = pts.iter().map(|(d, f)| d * f).sum();
    let sxx: f64 = pts.iter().map(|(d, _)| d * d).sum();
    let k = sxy / sxx;
    let sse: f64 = pts.iter().map(|(d, f)| (f - k * d).powi(2)).sum();
    Ok(StiffnessFit {
        k,
        residual: (sse / pts.len() as f64).sqrt(),
        samples: pts.len(),
    })
}

/// Splits a free-hand session into palpation sites: maximal runs of contact
/// samples that each support a stiffness fit on their own.
pub fn session_sites(trace: &[ForceSample]) -> Vec<Vec<ForceSample>> {
    trace
        .split(|s| s.contact.is_none())
        .filter(|run| estimate_stiffness(run, SITE_MIN_DEPTH).is_ok())
        .map(<[ForceSample]>::to_vec)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub k_mean: f64,
    pub k_var: f64,
    /// Largest site stiffness; drives the rock-hard gate.
    pub k_max: f64,
    /// Mean probe height at first contact over sites (m).
    pub size: f64,
    /// Fraction of sites with at least one tenderness event.
    pub tenderness_rate: f64,
}

impl Features {
    /// The nearest-centroid coordinates.
    pub fn vector(&self) -> [f64; 4] {
        [self.k_mean, self.k_var, self.size, self.tenderness_rate]
    }
}

/// Per-site features of a palpation session, one trace per site.
pub fn extract_features(sites: &[Vec<ForceSample>]) -> Result<Features, PathologyError> {
    if sites.len() < MIN_SITES {
        return Err(PathologyError::Protocol(format!(
            "{} palpation sites, need at least {MIN_SITES}",
            sites.len()
        )));
    }
    let mut ks = Vec::with_capacity(sites.len());
    let mut heights = Vec::with_capacity(sites.len());
    let mut tender = 0usize;
    for (i, site) in sites.iter().enumerate() {
        let fit = estimate_stiffness(site, SITE_MIN_DEPTH)
            .map_err(|e| PathologyError::Protocol(format!("site {i}: {e}")))?;
        ks.push(fit.k);
        // first contact is the highest contact pose of a descending press
        let top = site
            .iter()
            .filter(|s| s.contact.is_some())
            .map(|s| s.probe.position.z)
            .fold(f64::NEG_INFINITY, f64::max);
        heights.push(top);
        if site
            .iter()
            .any(|s| s.events.iter().any(|e| matches!(e, Event::Tenderness { .. })))
        {
            tender += 1;
        }
    }
    let n = sites.len() as f64;
    let k_mean = ks.iter().sum::<f64>() / n;
    Ok(Features {
        k_mean,
        k_var: ks.iter().map(|k| (k - k_mean).powi(2)).sum::<f64>() / n,
        k_max: ks.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        size: heights.iter().sum::<f64>() / n,
        tenderness_rate: tender as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub condition: Condition,
    pub centroid: [f64; 4],
}

/// Per-condition feature centroids plus the per-feature spread used to
/// normalize distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub version: u32,
    /// Site stiffness above which the liver is called rock hard (N/m).
    pub rock_hard_cut: f64,
    pub rows: Vec<CalibrationRow>,
    pub spread: [f64; 4],
}

pub const CALIBRATION_VERSION: u32 = 1;
/// Calibration table shipped with the library, fitted from protocol runs on
/// seeds 1000..1020.
pub const SHIPPED_CALIBRATION: &str = include_str!("../../assets/calibration.tsv");
const HEADER: &str = "condition\tk_mean\tk_var\tsize\ttenderness_rate";

impl Calibration {
    /// Centroids and spreads from labelled feature sets. Spread is the pooled
    /// within-condition standard deviation, floored so no feature dominates
    /// by having none. The rock-hard cut is the midpoint between the softest
    /// neoplasm and the hardest other liver.
    pub fn fit(samples: &[(Condition, Features)]) -> Result<Calibration, PathologyError> {
        let mut rows = Vec::new();
        let mut pooled = [0.0; 4];
        for c in Condition::ALL {
            let fs: Vec<[f64; 4]> = samples.iter().filter(|s| s.0 == c).map(|s| s.1.vector()).collect();
            if fs.is_empty() {
                return Err(PathologyError::Calibration {
                    line: 0,
                    message: format!("no samples for {c}"),
                });
            }
            let mut centroid = [0.0; 4];
            for f in &fs {
                for d in 0..4 {
                    centroid[d] += f[d] / fs.len() as f64;
                }
            }
            for f in &fs {
                for d in 0..4 {
                    pooled[d] += (f[d] - centroid[d]).powi(2);
                }
            }
            rows.push(CalibrationRow { condition: c, centroid });
        }
        let scale_floor = [1.0, 10.0, 1e-4, 0.02];
        let spread = std::array::from_fn(|d| (pooled[d] / samples.len() as f64).sqrt().max(scale_floor[d]));
        let hardest_other = samples
            .iter()
            .filter(|s| s.0 != Condition::Neoplasm)
            .map(|s| s.1.k_max)
            .fold(f64::NEG_INFINITY, f64::max);
        let softest_neoplasm = samples
            .iter()
            .filter(|s| s.0 == Condition::Neoplasm)
            .map(|s| s.1.k_max)
            .fold(f64::INFINITY, f64::min);
        if softest_neoplasm <= hardest_other {
            return Err(PathologyError::Calibration {
                line: 0,
                message: format!(
                    "rock-hard feature does not separate: neoplasm min {softest_neoplasm}, others max {hardest_other}"
                ),
            });
        }
        Ok(Calibration {
            version: CALIBRATION_VERSION,
            rock_hard_cut: 0.5 * (softest_neoplasm + hardest_other),
            rows,
            spread,
        })
    }

    pub fn shipped() -> Calibration {
        Calibration::parse_tsv(SHIPPED_CALIBRATION).expect("shipped calibration parses")
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# palpsim calibration").unwrap();
        writeln!(s, "# version {}", self.version).unwrap();
        writeln!(s, "# rock_hard_cut {}", self.rock_hard_cut).unwrap();
        writeln!(s, "{HEADER}").unwrap();
        let line = |s: &mut String, name: &str, v: &[f64; 4]| {
            writeln!(s, "{name}\t{}\t{}\t{}\t{}", v[0], v[1], v[2], v[3]).unwrap();
        };
        for r in &self.rows {
            line(&mut s, r.condition.as_str(), &r.centroid);
        }
        line(&mut s, "spread", &self.spread);
        s
    }

    pub fn parse_tsv(text: &str) -> Result<Calibration, PathologyError> {
        let err = |line: usize, message: String| PathologyError::Calibration { line, message };
        let (mut version, mut cut) = (None, None);
        let mut header = false;
        let mut rows = Vec::new();
        let mut spread = None;
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                let mut it = c.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("version"), Some(v)) => {
                        version = Some(v.parse::<u32>().map_err(|e| err(ln, e.to_string()))?)
                    }
                    (Some("rock_hard_cut"), Some(v)) => {
                        cut = Some(v.parse::<f64>().map_err(|e| err(ln, e.to_string()))?)
                    }
                    _ => {}
                }
                continue;
            }
            if !header {
                if line.split_whitespace().collect::<Vec<_>>().join("\t") != HEADER {
                    return Err(err(ln, format!("expected header {HEADER:?}")));
                }
                header = true;
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(err(ln, format!("expected 5 columns, found {}", cols.len())));
            }
            let mut v = [0.0; 4];
            for d in 0..4 {
                v[d] = cols[d + 1].parse().map_err(|_| err(ln, format!("bad number {:?}", cols[d + 1])))?;
            }
            if cols[0] == "spread" {
                if v.iter().any(|s| !(*s > 0.0)) {
                    return Err(err(ln, "spread values must be positive".into()));
                }
                spread = Some(v);
            } else {
                let condition = cols[0].parse().map_err(|e: PathologyError| err(ln, e.to_string()))?;
                rows.push(CalibrationRow { condition, centroid: v });
            }
        }
        let version = version.ok_or_else(|| err(0, "missing version comment".into()))?;
        if version != CALIBRATION_VERSION {
            return Err(err(0, format!("unsupported version {version}")));
        }
        Ok(Calibration {
            version,
            rock_hard_cut: cut.ok_or_else(|| err(0, "missing rock_hard_cut comment".into()))?,
            rows,
            spread: spread.ok_or_else(|| err(0, "missing spread row".into()))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionScore {
    pub condition: Condition,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisResult {
    pub predicted: Condition,
    /// In lexicographic condition order; sums to 1.
    pub scores: Vec<ConditionScore>,
    pub features: Features,
}

/// Nearest-centroid diagnosis over one trace per palpation site.
///
/// A site stiffness above the rock-hard cut forces neoplasm; otherwise
/// neoplasm is excluded. Scores are a softmax of minus half the squared
/// normalized distance over the admissible conditions.
pub fn classify(sites: &[Vec<ForceSample>], calibration: &Calibration) -> Result<DiagnosisResult, PathologyError> {
    let features = extract_features(sites)?;
    Ok(diagnose(features, calibration))
}

pub(crate) fn diagnose(features: Features, calibration: &Calibration) -> DiagnosisResult {
    let rock_hard = features.k_max > calibration.rock_hard_cut;
    let f = features.vector();
    let order = Condition::lexicographic();
    let dist: Vec<Option<f64>> = order
        .iter()
        .map(|&c| {
            if (c == Condition::Neoplasm) != rock_hard {
                return None;
            }
            let row = calibration.rows.iter().find(|r| r.condition == c)?;
            Some(
                (0..4)
                    .map(|d| ((f[d] - row.centroid[d]) / calibration.spread[d]).powi(2))
                    .sum::<f64>(),
            )
        })
        .collect();
    let best = dist.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = dist
        .iter()
        .map(|d| d.map_or(0.0, |d| (-0.5 * (d - best)).exp()))
        .collect();
    let total: f64 = weights.iter().sum();
    let scores: Vec<ConditionScore> = order
        .iter()
        .zip(&weights)
        .map(|(&condition, w)| ConditionScore {
            condition,
            score: if total > 0.0 { w / total } else { 0.2 },
        })
        .collect();
    let mut predicted = order[0];
    let mut top = f64::NEG_INFINITY;
    for s in &scores {
        if s.score > top {
            top = s.score;
            predicted = s.condition;
        }
    }
    DiagnosisResult {
        predicted,
        scores,
        features,
    }
}
