//! JSON messages exchanged over the session socket.

use palpsim_core::engine::{PresetId, SimSnapshot};
use palpsim_core::haptics::{Backend, Event};
use palpsim_core::pathology::{Condition, DiagnosisResult};
use serde::{Deserialize, Serialize};

/// Wire protocol version announced in `hello`.
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ServerMessage {
    Hello(Hello),
    Snapshot(Snapshot),
    Ack(Ack),
    Error(ErrorReply),
    Quiz(QuizReply),
}

impl ServerMessage {
    pub fn seq(&self) -> u64 {
        match self {
            ServerMessage::Hello(m) => m.seq,
            ServerMessage::Snapshot(m) => m.seq,
            ServerMessage::Ack(m) => m.seq,
            ServerMessage::Error(m) => m.seq,
            ServerMessage::Quiz(m) => m.seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub seq: u64,
    pub version: u32,
    pub vertex_count: usize,
    /// Triangle vertex indices; fixed for the session.
    pub triangles: Vec<[usize; 3]>,
    pub preset_visible: bool,
    pub preset: Option<PresetId>,
    pub backend: Backend,
    pub haptic_rate: f64,
    pub graphics_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireProbe {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    /// Engine publication number; gaps mean dropped frames.
    pub frame: u64,
    pub tick: u64,
    pub t: f64,
    /// Vertex positions flattened as x, y, z triples (m).
    pub vertices: Vec<f64>,
    pub probe: WireProbe,
    pub force: [f64; 3],
    pub contact: bool,
    pub events: Vec<Event>,
    /// Withheld while a quiz is unanswered.
    pub preset: Option<PresetId>,
    pub backend: Backend,
    pub last_command: u64,
}

impl Snapshot {
    pub fn from_sim(seq: u64, s: &SimSnapshot, show_preset: bool) -> Snapshot {
        let mut vertices = Vec::with_capacity(s.vertices.len() * 3);
        for v in &s.vertices {
            vertices.extend_from_slice(&[v.x, v.y, v.z]);
        }
        let p = &s.probe;
        Snapshot {
            seq,
            frame: s.seq,
            tick: s.tick,
            t: s.t,
            vertices,
            probe: WireProbe {
                position: p.position.to_array(),
                velocity: p.velocity.to_array(),
                radius: p.radius,
            },
            force: s.force.to_array(),
            contact: !s.contacts.is_empty(),
            events: s.events.clone(),
            preset: show_preset.then_some(s.preset),
            backend: s.backend,
            last_command: s.last_command,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
    /// The acknowledged client message.
    pub re: u64,
    /// Engine command token, when the message queued a command.
    pub token: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub seq: u64,
    /// Seq of the offending client message, if it could be read.
    pub re: Option<u64>,
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Busy,
    Malformed,
    BadSeq,
    QueueFull,
    QuizActive,
    NoQuiz,
    AlreadySubmitted,
    EngineStopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizReply {
    pub seq: u64,
    pub re: u64,
    pub state: QuizState,
    pub outcome: Option<QuizOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuizState {
    /// No quiz has been started.
    Idle,
    /// A hidden preset is loaded and awaits an answer.
    Active,
    /// The answer is in; the outcome is attached.
    Answered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizOutcome {
    pub answer: Condition,
    pub correct: bool,
    pub truth: PresetId,
    /// Reference diagnosis of the trainee's own palpation, when it covered
    /// enough sites.
    pub reference: Option<DiagnosisResult>,
    pub reference_error: Option<String>,
    /// Palpation sites found in the recorded session.
    pub sites: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClientMessage {
    Command { seq: u64, command: WireCommand },
    Quiz { seq: u64, action: QuizAction },
}

impl ClientMessage {
    pub fn seq(&self) -> u64 {
        match self {
            ClientMessage::Command { seq, .. } | ClientMessage::Quiz { seq, .. } => *seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireCommand {
    ProbePose { position: [f64; 3] },
    Preset { condition: Condition, seed: u64 },
    Backend { backend: Backend },
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum QuizAction {
    /// Loads a hidden preset; the condition is drawn from `seed`.
    Start { seed: Option<u64> },
    Submit { answer: Condition },
    Status,
}

/// Parses a client message; on failure returns the `seq` field if one was
/// readable, and the reason.
pub fn parse_client(text: &str) -> Result<ClientMessage, (Option<u64>, String)> {
    serde_json::from_str(text).map_err(|e| {
        let seq = serde_json::from_str::<serde_json::Value>(text)
            .ok()
            .and_then(|v| v.get("seq").and_then(serde_json::Value::as_u64));
        (seq, e.to_string())
    })
}
