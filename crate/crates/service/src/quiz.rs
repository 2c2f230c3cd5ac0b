use std::time::{SystemTime, UNIX_EPOCH};

use palpsim_core::engine::PresetId;
use palpsim_core::haptics::ForceSample;
use palpsim_core::pathology::{classify, make_preset, session_sites, Calibration, Condition, LiverPreset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::wire::{ErrorCode, QuizOutcome, QuizReply, QuizState};

/// Samples kept per quiz (ten minutes at 1 kHz); later samples are dropped.
const MAX_RECORDING: usize = 600_000;

/// Quiz session: a hidden preset, the trainee's recorded palpation and at
/// most one answer.
#[derive(Debug, Default)]
pub struct Quiz {
    hidden: Option<PresetId>,
    recording: Vec<ForceSample>,
    outcome: Option<QuizOutcome>,
}

impl Quiz {
    /// Hidden preset drawn for `seed`.
    pub fn draw(seed: u64) -> LiverPreset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let condition = Condition::ALL[rng.random_range(0..Condition::ALL.len())];
        make_preset(condition, seed)
    }

    /// True while a preset is loaded and unanswered.
    pub fn is_hidden(&self) -> bool {
        self.hidden.is_some() && self.outcome.is_none()
    }

    pub fn start(&mut self, seed: Option<u64>) -> LiverPreset {
        let seed = seed.unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_nanos() as u64)
        });
        let preset = Quiz::draw(seed);
        *self = Quiz {
            hidden: Some(PresetId {
                condition: preset.condition,
                seed,
            }),
            recording: Vec::new(),
            outcome: None,
        };
        preset
    }

    pub fn abandon(&mut self) {
        *self = Quiz::default();
    }

    pub fn record(&mut self, s: ForceSample) {
        if self.is_hidden() && self.recording.len() < MAX_RECORDING {
            self.recording.push(s);
        }
    }

    pub fn submit(&mut self, answer: Condition, calibration: &Calibration) -> Result<(), ErrorCode> {
        let Some(truth) = self.hidden else {
            return Err(ErrorCode::NoQuiz);
        };
        if self.outcome.is_some() {
            return Err(ErrorCode::AlreadySubmitted);
        }
        let sites = session_sites(&self.recording);
        let (reference, reference_error) = match classify(&sites, calibration) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.outcome = Some(QuizOutcome {
            answer,
            correct: answer == truth.condition,
            truth,
            reference,
            reference_error,
            sites: sites.len(),
        });
        self.recording = Vec::new();
        Ok(())
    }

    pub fn state(&self) -> QuizState {
        match (&self.hidden, &self.outcome) {
            (None, _) => QuizState::Idle,
            (Some(_), None) => QuizState::Active,
            (Some(_), Some(_)) => QuizState::Answered,
        }
    }

    /// Reply body for client message `re`.
    pub fn reply(&self, seq: u64, re: u64) -> QuizReply {
        QuizReply {
            seq,
            re,
            state: self.state(),
            outcome: self.outcome.clone(),
        }
    }
}
