//! WebSocket session bridge between one trainer client and a realtime
//! engine. Snapshots stream out at the engine's graphics cadence; probe,
//! preset, backend and quiz messages come in. The socket side never touches
//! engine state directly: it reads the latest snapshot and enqueues
//! commands.

mod quiz;
pub mod wire;

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_queue::ArrayQueue;
use log::{info, warn};
use palpsim_core::engine::{
    Command, CommandSender, Engine, EngineError, Mode, SceneSetup, SimConfig, SnapshotHub, TimingStats,
};
use palpsim_core::geometry::Vec3;
use palpsim_core::haptics::{ForceSample, VirtualDevice};
use palpsim_core::pathology::{make_preset, Calibration};
use thiserror::Error;
use tungstenite::{Message, WebSocket};

pub use quiz::Quiz;
use wire::{
    parse_client, Ack, ClientMessage, ErrorCode, ErrorReply, Hello, QuizAction, ServerMessage, Snapshot,
    WireCommand, PROTOCOL_VERSION,
};

/// Socket read timeout; also the idle period of a session loop.
const POLL: Duration = Duration::from_millis(2);
const ACCEPT_POLL: Duration = Duration::from_millis(10);
/// Samples buffered between recorder drains.
const TAP_CAPACITY: usize = 8192;
const RECORD_POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0} thread panicked")]
    Panicked(&'static str),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub setup: SceneSetup,
    /// Mode and duration are overridden: the service always runs realtime
    /// until shut down.
    pub sim: SimConfig,
    pub calibration: Calibration,
}

impl ServiceConfig {
    pub fn new(setup: SceneSetup) -> Self {
        ServiceConfig {
            sim: SimConfig {
                backend: setup.backend,
                seed: setup.skeleton.seed,
                ..SimConfig::default()
            },
            setup,
            calibration: Calibration::shipped(),
        }
    }
}

struct Shared {
    hub: Arc<SnapshotHub>,
    commands: CommandSender,
    tap: Arc<ArrayQueue<ForceSample>>,
    quiz: Mutex<Quiz>,
    calibration: Calibration,
    triangles: Vec<[usize; 3]>,
    vertex_count: usize,
    sim: SimConfig,
    busy: AtomicBool,
    stop: Arc<AtomicBool>,
    engine_running: AtomicBool,
}

/// A running service: the engine thread plus the socket acceptor.
pub struct Service {
    addr: SocketAddr,
    shared: Arc<Shared>,
    engine: JoinHandle<Result<TimingStats, EngineError>>,
    acceptor: JoinHandle<()>,
    recorder: JoinHandle<()>,
}

impl Service {
    /// Binds `addr`, starts the engine and begins accepting clients.
    pub fn start(addr: impl ToSocketAddrs + std::fmt::Debug, config: ServiceConfig) -> Result<Service, ServiceError> {
        let shown = format!("{addr:?}");
        let bind = |source| ServiceError::Bind {
            addr: shown.clone(),
            source,
        };
        let listener = TcpListener::bind(addr).map_err(bind)?;
        listener.set_nonblocking(true).map_err(bind)?;
        let local = listener.local_addr().map_err(bind)?;

        let sim = SimConfig {
            mode: Mode::Realtime,
            duration: None,
            ..config.sim
        };
        let mut engine = Engine::new(sim, VirtualDevice::commanded(), &config.setup)?;
        engine.set_recording(false);
        let tap = engine.sample_tap(TAP_CAPACITY);
        let bounds = engine.world().rest_mesh().aabb();
        let park = Vec3::new(bounds.center().x, bounds.center().y, bounds.max.z + 0.05);
        engine
            .enqueue_command(Command::ProbePose(park))
            .expect("fresh queue has room");
        let mesh = engine.world().rest_mesh();
        let shared = Arc::new(Shared {
            hub: engine.snapshots(),
            commands: engine.commands(),
            tap,
            quiz: Mutex::new(Quiz::default()),
            calibration: config.calibration,
            triangles: mesh.triangles().to_vec(),
            vertex_count: mesh.vertex_count(),
            sim,
            busy: AtomicBool::new(false),
            stop: engine.stop_handle(),
            engine_running: AtomicBool::new(true),
        });

        let s = shared.clone();
        let engine = thread::Builder::new()
            .name("haptic".into())
            .spawn(move || {
                let out = engine.run().map(|(_, stats)| stats);
                if let Err(e) = &out {
                    warn!("engine stopped: {e}");
                }
                s.engine_running.store(false, Ordering::Release);
                out
            })
            .expect("spawn haptic thread");
        let s = shared.clone();
        let acceptor = thread::Builder::new()
            .name("accept".into())
            .spawn(move || accept_loop(listener, s))
            .expect("spawn acceptor thread");
        let s = shared.clone();
        let recorder = thread::Builder::new()
            .name("recorder".into())
            .spawn(move || {
                while !s.stop.load(Ordering::Acquire) {
                    drain(&s);
                    thread::sleep(RECORD_POLL);
                }
            })
            .expect("spawn recorder thread");
        info!("serving on ws://{local}");
        Ok(Service {
            addr: local,
            shared,
            engine,
            acceptor,
            recorder,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// True until the engine halts or the service is shut down.
    pub fn is_running(&self) -> bool {
        self.shared.engine_running.load(Ordering::Acquire)
    }

    /// Stops the engine and the acceptor and returns the engine's timing.
    pub fn shutdown(self) -> Result<TimingStats, ServiceError> {
        self.shared.stop.store(true, Ordering::Release);
        self.wait()
    }

    /// Blocks until the engine stops (halt or shutdown from another
    /// thread via the stop handle).
    pub fn wait(self) -> Result<TimingStats, ServiceError> {
        let stats = self.engine.join().map_err(|_| ServiceError::Panicked("haptic"))?;
        self.shared.stop.store(true, Ordering::Release);
        self.acceptor.join().map_err(|_| ServiceError::Panicked("acceptor"))?;
        self.recorder.join().map_err(|_| ServiceError::Panicked("recorder"))?;
        Ok(stats?)
    }

    /// Flag that stops the service when set.
    pub fn stop_handle(&self) -> Arc<AtomicBool> {
        self.shared.stop.clone()
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    let mut sessions: Vec<JoinHandle<()>> = Vec::new();
    while !shared.stop.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((stream, peer)) => {
                if stream.set_nonblocking(false).is_err() {
                    continue;
                }
                if shared.busy.swap(true, Ordering::AcqRel) {
                    info!("refusing {peer}: a session is active");
                    thread::spawn(move || refuse(stream));
                    continue;
                }
                info!("client {peer} connected");
                let s = shared.clone();
                sessions.push(thread::spawn(move || {
                    if let Err(e) = session(stream, &s) {
                        info!("client {peer} left: {e}");
                    }
                    s.busy.store(false, Ordering::Release);
                }));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(ACCEPT_POLL);
            }
        }
        sessions.retain(|h| !h.is_finished());
    }
    for h in sessions {
        let _ = h.join();
    }
}

fn refuse(stream: TcpStream) {
    let _ = stream.set_write_timeout(Some(Duration::from_secs(2)));
    let Ok(mut ws) = tungstenite::accept(stream) else { return };
    let msg = ServerMessage::Error(ErrorReply {
        seq: 1,
        re: None,
        code: ErrorCode::Busy,
        message: "another client is connected; one session at a time".into(),
    });
    let _ = send(&mut ws, &msg);
    let _ = ws.close(None);
    let _ = ws.flush();
}

fn send(ws: &mut WebSocket<TcpStream>, msg: &ServerMessage) -> tungstenite::Result<()> {
    let text = serde_json::to_string(msg).expect("wire messages serialize");
    ws.send(Message::text(text))
}

struct Session<'a> {
    shared: &'a Shared,
    ws: WebSocket<TcpStream>,
    seq: u64,
    last_client_seq: Option<u64>,
}

impl Session<'_> {
    fn next(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn error(&mut self, re: Option<u64>, code: ErrorCode, message: impl Into<String>) -> tungstenite::Result<()> {
        let msg = ServerMessage::Error(ErrorReply {
            seq: self.next(),
            re,
            code,
            message: message.into(),
        });
        send(&mut self.ws, &msg)
    }

    fn ack(&mut self, re: u64, token: Option<u64>) -> tungstenite::Result<()> {
        let msg = ServerMessage::Ack(Ack {
            seq: self.next(),
            re,
            token,
        });
        send(&mut self.ws, &msg)
    }

    fn handle(&mut self, text: &str) -> tungstenite::Result<()> {
        let msg = match parse_client(text) {
            Ok(m) => m,
            Err((seq, why)) => return self.error(seq, ErrorCode::Malformed, why),
        };
        let seq = msg.seq();
        if self.last_client_seq.is_some_and(|last| seq <= last) {
            return self.error(Some(seq), ErrorCode::BadSeq, "seq must increase strictly");
        }
        self.last_client_seq = Some(seq);
        match msg {
            ClientMessage::Command { command, .. } => self.command(seq, command),
            ClientMessage::Quiz { action, .. } => self.quiz(seq, action),
        }
    }

    fn enqueue(&mut self, seq: u64, cmd: Command) -> tungstenite::Result<()> {
        match self.shared.commands.enqueue(cmd) {
            Ok(token) => self.ack(seq, Some(token.0)),
            Err(e) => self.error(Some(seq), ErrorCode::QueueFull, e.to_string()),
        }
    }

    fn command(&mut self, seq: u64, cmd: WireCommand) -> tungstenite::Result<()> {
        let cmd = match cmd {
            WireCommand::ProbePose { position } => {
                let p = Vec3::from_array(position);
                if !p.is_finite() {
                    return self.error(Some(seq), ErrorCode::Malformed, "probe position must be finite");
                }
                Command::ProbePose(p)
            }
            WireCommand::Preset { condition, seed } => {
                if self.shared.quiz.lock().unwrap().is_hidden() {
                    return self.error(Some(seq), ErrorCode::QuizActive, "preset changes wait for the quiz answer");
                }
                Command::Preset(make_preset(condition, seed))
            }
            WireCommand::Backend { backend } => Command::Backend(backend),
            WireCommand::Reset => Command::Reset,
        };
        self.enqueue(seq, cmd)
    }

    fn quiz(&mut self, seq: u64, action: QuizAction) -> tungstenite::Result<()> {
        let shared = self.shared;
        let reply = match action {
            QuizAction::Start { seed } => {
                let mut quiz = shared.quiz.lock().unwrap();
                if quiz.is_hidden() {
                    drop(quiz);
                    return self.error(Some(seq), ErrorCode::QuizActive, "a quiz is already running");
                }
                let preset = quiz.start(seed);
                // samples so far belong to the previous preset
                while shared.tap.pop().is_some() {}
                drop(quiz);
                if let Err(e) = shared.commands.enqueue(Command::Preset(preset)) {
                    shared.quiz.lock().unwrap().abandon();
                    return self.error(Some(seq), ErrorCode::QueueFull, e.to_string());
                }
                shared.quiz.lock().unwrap().reply(0, seq)
            }
            QuizAction::Submit { answer } => {
                drain(shared);
                let mut quiz = shared.quiz.lock().unwrap();
                match quiz.submit(answer, &shared.calibration) {
                    Ok(()) => quiz.reply(0, seq),
                    Err(code) => {
                        drop(quiz);
                        let why = match code {
                            ErrorCode::NoQuiz => "no quiz is running",
                            _ => "the quiz was already answered; the first answer stands",
                        };
                        return self.error(Some(seq), code, why);
                    }
                }
            }
            QuizAction::Status => shared.quiz.lock().unwrap().reply(0, seq),
        };
        let msg = ServerMessage::Quiz(wire::QuizReply {
            seq: self.next(),
            ..reply
        });
        send(&mut self.ws, &msg)
    }

}

/// Moves tapped samples into the quiz recording.
fn drain(shared: &Shared) {
    if shared.tap.is_empty() {
        return;
    }
    let mut quiz = shared.quiz.lock().unwrap();
    while let Some(s) = shared.tap.pop() {
        quiz.record(s);
    }
}

fn session(stream: TcpStream, shared: &Shared) -> tungstenite::Result<()> {
    stream.set_nodelay(true)?;
    stream.set_write_timeout(Some(Duration::from_secs(5)))?;
    let ws = tungstenite::accept(stream.try_clone()?).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    stream.set_read_timeout(Some(POLL))?;
    let mut s = Session {
        shared,
        ws,
        seq: 0,
        last_client_seq: None,
    };
    let latest = shared.hub.latest();
    let visible = !shared.quiz.lock().unwrap().is_hidden();
    let hello = ServerMessage::Hello(Hello {
        seq: s.next(),
        version: PROTOCOL_VERSION,
        vertex_count: shared.vertex_count,
        triangles: shared.triangles.clone(),
        preset_visible: visible,
        preset: latest.as_ref().filter(|_| visible).map(|l| l.preset),
        backend: latest.as_ref().map_or(shared.sim.backend, |l| l.backend),
        haptic_rate: shared.sim.haptic_rate,
        graphics_rate: shared.sim.graphics_rate,
    });
    send(&mut s.ws, &hello)?;

    let mut last_frame = 0;
    loop {
        if shared.stop.load(Ordering::Acquire) || !shared.engine_running.load(Ordering::Acquire) {
            let msg = "the simulation has stopped";
            let _ = s.error(None, ErrorCode::EngineStopped, msg);
            let _ = s.ws.close(None);
            let _ = s.ws.flush();
            return Ok(());
        }
        if let Some(snap) = shared.hub.latest() {
            if snap.seq > last_frame {
                last_frame = snap.seq;
                let show = !shared.quiz.lock().unwrap().is_hidden();
                let seq = s.next();
                send(&mut s.ws, &ServerMessage::Snapshot(Snapshot::from_sim(seq, &snap, show)))?;
            }
        }
        match s.ws.read() {
            Ok(Message::Text(text)) => s.handle(&text)?,
            Ok(Message::Binary(_)) => s.error(None, ErrorCode::Malformed, "binary frames are not supported")?,
            Ok(Message::Close(_)) => {
                let _ = s.ws.flush();
                return Ok(());
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
    }
}
