//! Palpation protocol driver and the diagnosis experiment.
//!
//! A scripted examiner presses a 3×3 grid of anterior sites in lockstep:
//! descend until contact, then step deeper in 1 mm increments, holding each
//! depth quasi-statically.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::{Command, Engine, EngineError, Mode, SceneSetup, SimConfig};
use crate::geometry::Vec3;
use crate::haptics::{Backend, ForceSample, ForceTrace, VirtualDevice};
use crate::pathology::{
    classify, extract_features, make_preset, Calibration, Condition, DiagnosisResult, Features, LiverPreset,
    PathologyError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Nominal site (x, y) positions (m).
    pub sites: Vec<(f64, f64)>,
    /// Probe height each press starts from (m).
    pub start_height: f64,
    /// m/s
    pub approach_speed: f64,
    /// Depth increment per step (m).
    pub step_depth: f64,
    pub steps: usize,
    /// m/s
    pub step_speed: f64,
    pub hold_ticks: usize,
    /// Uniform site placement error, ± this in x and y (m).
    pub site_jitter: f64,
    /// Standard deviation of additive force-sensor noise per axis (N).
    pub force_noise: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        let mut sites = Vec::new();
        for y in [-0.025, 0.0, 0.025] {
            for x in [-0.045, 0.0, 0.045] {
                sites.push((x, y));
            }
        }
        ProtocolParams {
            sites,
            start_height: 0.07,
            approach_speed: 0.1,
            step_depth: 0.001,
            steps: 10,
            step_speed: 0.02,
            hold_ticks: 30,
            site_jitter: 0.002,
            force_noise: 0.02,
        }
    }
}

impl ProtocolParams {
    /// Same grid and timing without site jitter or sensor noise.
    pub fn noiseless() -> Self {
        ProtocolParams {
            site_jitter: 0.0,
            force_noise: 0.0,
            ..ProtocolParams::default()
        }
    }
}

struct Examiner {
    engine: Engine,
    speed_step: f64,
}

impl Examiner {
    fn press(&mut self, at: Vec3, out: &mut ForceTrace) -> Result<(), EngineError> {
        self.engine.enqueue_command(Command::ProbePose(at)).expect("examiner queue never fills");
        let s = self.engine.step()?;
        out.push(s);
        Ok(())
    }

    /// Moves in a straight line at `speed`, one pose per tick.
    fn travel(&mut self, from: Vec3, to: Vec3, speed: f64, out: &mut ForceTrace) -> Result<(), EngineError> {
        let n = ((to - from).norm() / (speed * self.speed_step)).ceil().max(1.0) as usize;
        for i in 1..=n {
            self.press(from.lerp(to, i as f64 / n as f64), out)?;
        }
        Ok(())
    }
}

/// Runs the protocol on `preset` and returns one trace per site.
pub fn palpate(
    setup: &SceneSetup,
    preset: &LiverPreset,
    params: &ProtocolParams,
    noise_seed: u64,
) -> Result<Vec<ForceTrace>, EngineError> {
    let mut setup = setup.clone();
    setup.preset = preset.clone();
    let config = SimConfig {
        duration: None,
        mode: Mode::Lockstep,
        backend: Backend::Surface,
        seed: setup.skeleton.seed,
        ..SimConfig::default()
    };
    let mut engine = Engine::new(config, VirtualDevice::commanded(), &setup)?;
    engine.set_recording(false);
    let dt = config.dt();
    let mut ex = Examiner { engine, speed_step: dt };
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = Normal::new(0.0, params.force_noise.max(0.0)).expect("finite sigma");
    let floor = ex.engine.world().rest_mesh().aabb().min.z - 0.01;

    let mut traces = Vec::with_capacity(params.sites.len());
    for (i, &(x, y)) in params.sites.iter().enumerate() {
        let j = params.site_jitter;
        let (x, y) = if j > 0.0 {
            (x + rng.random_range(-j..=j), y + rng.random_range(-j..=j))
        } else {
            (x, y)
        };
        let mut trace = Vec::new();
        let mut pos = Vec3::new(x, y, params.start_height);
        ex.press(pos, &mut trace)?;
        let step = params.approach_speed * dt;
        while trace.last().is_some_and(|s| s.contact.is_none()) {
            if pos.z < floor {
                return Err(EngineError::Scene(format!("site {i} at ({x}, {y}) never touched the surface")));
            }
            pos.z -= step;
            ex.press(pos, &mut trace)?;
        }
        let top = pos;
        for s in 1..=params.steps {
            let target = top - Vec3::Z * (params.step_depth * s as f64);
            ex.travel(pos, target, params.step_speed, &mut trace)?;
            pos = target;
            for _ in 0..params.hold_ticks {
                ex.press(pos, &mut trace)?;
            }
        }
        // lift clear before moving to the next site
        ex.travel(pos, Vec3::new(x, y, params.start_height), params.approach_speed * 4.0, &mut Vec::new())?;
        if params.force_noise > 0.0 {
            add_force_noise(&mut trace, &noise, &mut rng);
        }
        traces.push(trace);
    }
    Ok(traces)
}

fn add_force_noise(trace: &mut [ForceSample], noise: &Normal<f64>, rng: &mut ChaCha8Rng) {
    for s in trace {
        s.force += Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
    }
}

/// Seed of the protocol noise for one experiment cell.
pub fn noise_seed(condition: Condition, seed: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (condition as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03)
}

/// Protocol features for `(condition, seed)`.
pub fn session_features(
    setup: &SceneSetup,
    condition: Condition,
    seed: u64,
    params: &ProtocolParams,
) -> Result<Features, ExperimentError> {
    let traces = palpate(setup, &make_preset(condition, seed), params, noise_seed(condition, seed))?;
    Ok(extract_features(&traces)?)
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Pathology(#[from] PathologyError),
}

/// Fits calibration centroids from protocol runs over `seeds`.
pub fn calibrate(
    setup: &SceneSetup,
    seeds: &[u64],
    params: &ProtocolParams,
) -> Result<Calibration, ExperimentError> {
    let mut samples = Vec::new();
    for c in Condition::ALL {
        for &s in seeds {
            samples.push((c, session_features(setup, c, s, params)?));
        }
    }
    Ok(Calibration::fit(&samples)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub truth: Condition,
    pub seed: u64,
    pub result: DiagnosisResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub conditions: Vec<Condition>,
    /// `confusion[truth][predicted]`, indexed like `conditions`.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub trials: Vec<Trial>,
}

impl ExperimentReport {
    pub fn count(&self, truth: Condition, predicted: Condition) -> usize {
        let idx = |c| self.conditions.iter().position(|&x| x == c);
        match (idx(truth), idx(predicted)) {
            (Some(i), Some(j)) => self.confusion[i][j],
            _ => 0,
        }
    }

    /// Tab-separated confusion matrix with a header row of predictions.
    pub fn confusion_tsv(&self) -> String {
        let mut s = String::from("truth\\predicted");
        for c in &self.conditions {
            s.push('\t');
            s.push_str(c.as_str());
        }
        s.push('\n');
        for (c, row) in self.conditions.iter().zip(&self.confusion) {
            s.push_str(c.as_str());
            for n in row {
                s.push_str(&format!("\t{n}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Runs the protocol for every `(condition, seed)`, classifies each session
/// and tallies the confusion matrix. Predictions outside `conditions` are
/// counted in accuracy but not in the matrix.
pub fn run_experiment(
    setup: &SceneSetup,
    conditions: &[Condition],
    seeds: &[u64],
    params: &ProtocolParams,
    calibration: &Calibration,
) -> Result<ExperimentReport, ExperimentError> {
    let mut conds: Vec<Condition> = conditions.to_vec();
    conds.dedup();
    let index: BTreeMap<Condition, usize> = Condition::ALL.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut confusion = vec![vec![0; Condition::ALL.len()]; Condition::ALL.len()];
    let mut trials = Vec::new();
    let mut correct = 0;
    for &c in &conds {
        for &seed in seeds {
            let traces = palpate(setup, &make_preset(c, seed), params, noise_seed(c, seed))?;
            let result = classify(&traces, calibration)?;
            confusion[index[&c]][index[&result.predicted]] += 1;
            correct += usize::from(result.predicted == c);
            trials.push(Trial {
                truth: c,
                seed,
                result,
            });
        }
    }
    let total = trials.len();
    Ok(ExperimentReport {
        conditions: Condition::ALL.to_vec(),
        confusion,
        accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
        trials,
    })
}
