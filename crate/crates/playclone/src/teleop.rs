//! Teleoperation bridge: a WebSocket server that ticks the simulator at a
//! fixed rate, applies the latest client action and records human play.
//!
//! Frames are JSON text, one object per frame, tagged by `type`.
//!
//! client → server: `hello`, `action{act}`, `reset{seed?}`, `record_start`,
//! `record_stop`.
//!
//! server → client: `hello{hz, scene}`, `state{tick, obs, recording}`,
//! `reset{tick}`, `record_start{tick}`, `record_stop{episode_path, frames}`,
//! `error{msg}`.
//!
//! One thread drives ticks; one thread per connection handles I/O. They
//! share a latest-action mailbox and a latest-state slot. Only the tick
//! driver touches the recording.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use playclone_core::playdata::{Episode, EpisodeHeader, Source};
use playclone_core::scene::{Action, EnvState, SceneConfig, ACT_DIM, OBS_DIM};
use playclone_core::sim::Simulator;
use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

pub const BUSY: &str = "session busy";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    Hello,
    Action { act: Vec<f64> },
    Reset {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    RecordStart,
    RecordStop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Hello { hz: f64, scene: BTreeMap<String, f64> },
    State { tick: u64, obs: Vec<f64>, recording: bool },
    Reset { tick: u64 },
    RecordStart { tick: u64 },
    RecordStop { episode_path: String, frames: usize },
    Error { msg: String },
}

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub scene: SceneConfig,
    /// Dataset directory that finished episodes are appended to.
    pub output: PathBuf,
    pub tick: Duration,
    /// Seed of the initial scene; `reset` without a seed draws the next one.
    pub seed: u64,
    pub read_poll: Duration,
}

impl ServeConfig {
    pub fn new(scene: SceneConfig, output: PathBuf, seed: u64) -> Self {
        let tick = Duration::from_secs_f64(scene.dt());
        ServeConfig { scene, output, tick, seed, read_poll: Duration::from_millis(2) }
    }
}

enum Command {
    Reset(Option<u64>),
    RecordStart,
    RecordStop,
    /// The client went away; finalize any recording as interrupted.
    Disconnect,
}

#[derive(Default)]
struct Shared {
    action: Mutex<Option<[f64; ACT_DIM]>>,
    state: Mutex<Option<(u64, [f64; OBS_DIM], bool)>>,
    busy: AtomicBool,
}

/// Handle to a running server.
pub struct Server {
    pub addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<thread::JoinHandle<()>>,
}

impl Server {
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    /// Blocks until the server stops (it only stops via `shutdown`).
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

pub fn serve(listener: TcpListener, cfg: ServeConfig) -> std::io::Result<Server> {
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let shared = Arc::new(Shared::default());
    let (cmd_tx, cmd_rx) = mpsc::channel::<Command>();
    let (reply_tx, reply_rx) = mpsc::channel::<ServerMsg>();
    let reply_rx = Arc::new(Mutex::new(reply_rx));

    let driver = {
        let (stop, shared, cfg) = (stop.clone(), shared.clone(), cfg.clone());
        thread::spawn(move || tick_driver(cfg, shared, cmd_rx, reply_tx, stop))
    };
    let acceptor = {
        let stop = stop.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                if shared.busy.swap(true, Ordering::SeqCst) {
                    thread::spawn(move || refuse(stream));
                    continue;
                }
                let (shared, cfg, cmd_tx, reply_rx, stop) = (shared.clone(), cfg.clone(), cmd_tx.clone(), reply_rx.clone(), stop.clone());
                thread::spawn(move || {
                    if let Err(e) = client_io(stream, &cfg, &shared, &cmd_tx, &reply_rx, &stop) {
                        log::info!("client session ended: {e}");
                    }
                    let _ = cmd_tx.send(Command::Disconnect);
                    *shared.action.lock().unwrap() = None;
                    shared.busy.store(false, Ordering::SeqCst);
                });
            }
        })
    };
    Ok(Server { addr, stop, threads: vec![driver, acceptor] })
}

fn refuse(stream: TcpStream) {
    if let Ok(mut ws) = tungstenite::accept(stream) {
        let _ = send(&mut ws, &ServerMsg::Error { msg: BUSY.into() });
        let _ = ws.close(None);
        let _ = ws.flush();
    }
}

fn send(ws: &mut WebSocket<TcpStream>, msg: &ServerMsg) -> tungstenite::Result<()> {
    ws.send(Message::text(serde_json::to_string(msg).expect("server messages serialize")))
}

fn scene_map(scene: &SceneConfig) -> BTreeMap<String, f64> {
    scene.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn client_io(
    stream: TcpStream,
    cfg: &ServeConfig,
    shared: &Shared,
    cmd: &Sender<Command>,
    replies: &Mutex<Receiver<ServerMsg>>,
    stop: &AtomicBool,
) -> tungstenite::Result<()> {
    stream.set_nodelay(true)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_ref().set_read_timeout(Some(cfg.read_poll))?;
    let hello = ServerMsg::Hello { hz: cfg.scene.control_hz, scene: scene_map(&cfg.scene) };
    send(&mut ws, &hello)?;
    // Drop replies left over from a previous client.
    let replies = replies.lock().unwrap();
    while replies.try_recv().is_ok() {}
    let mut last_sent = None;
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(t)) => match serde_json::from_str::<ClientMsg>(&t) {
                Ok(ClientMsg::Hello) => send(&mut ws, &hello)?,
                Ok(ClientMsg::Action { act }) => match to_action(&act) {
                    Ok(a) => *shared.action.lock().unwrap() = Some(a),
                    Err(msg) => send(&mut ws, &ServerMsg::Error { msg })?,
                },
                Ok(ClientMsg::Reset { seed }) => cmd.send(Command::Reset(seed)).map_err(|_| tungstenite::Error::ConnectionClosed)?,
                Ok(ClientMsg::RecordStart) => cmd.send(Command::RecordStart).map_err(|_| tungstenite::Error::ConnectionClosed)?,
                Ok(ClientMsg::RecordStop) => cmd.send(Command::RecordStop).map_err(|_| tungstenite::Error::ConnectionClosed)?,
                Err(e) => send(&mut ws, &ServerMsg::Error { msg: format!("malformed frame: {e}") })?,
            },
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e),
        }
        while let Ok(m) = replies.try_recv() {
            send(&mut ws, &m)?;
        }
        let latest = *shared.state.lock().unwrap();
        if let Some((tick, obs, recording)) = latest {
            if last_sent != Some(tick) {
                last_sent = Some(tick);
                send(&mut ws, &ServerMsg::State { tick, obs: obs.to_vec(), recording })?;
            }
        }
    }
    Ok(())
}

fn to_action(v: &[f64]) -> Result<[f64; ACT_DIM], String> {
    if v.len() != ACT_DIM {
        return Err(format!("action must have {ACT_DIM} values, got {}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("action contains a non-finite value".into());
    }
    let mut a = [0.0; ACT_DIM];
    a.copy_from_slice(v);
    Ok(a)
}

struct Recording {
    episode: Episode,
}

fn finish(cfg: &ServeConfig, rec: Recording, interrupted: bool) -> ServerMsg {
    let mut e = rec.episode;
    e.header.interrupted = interrupted;
    if e.is_empty() {
        return ServerMsg::Error { msg: "recording has no frames".into() };
    }
    let frames = e.len();
    match crate::dataset::append_episode(&cfg.output, &e) {
        Ok(p) => ServerMsg::RecordStop { episode_path: p.display().to_string(), frames },
        Err(err) => ServerMsg::Error { msg: format!("saving episode failed: {err}") },
    }
}

fn now_secs() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn tick_driver(cfg: ServeConfig, shared: Arc<Shared>, cmds: Receiver<Command>, replies: Sender<ServerMsg>, stop: Arc<AtomicBool>) {
    let mut sim = Simulator::new(cfg.scene.clone());
    let mut next_seed = cfg.seed;
    let mut s: EnvState = sim.reset_seeded(next_seed);
    next_seed = next_seed.wrapping_add(1);
    let mut rec: Option<Recording> = None;
    let mut tick = 0u64;
    *shared.state.lock().unwrap() = Some((tick, s.to_array(), false));
    let mut deadline = Instant::now() + cfg.tick;
    while !stop.load(Ordering::SeqCst) {
        while let Ok(c) = cmds.try_recv() {
            match c {
                Command::Reset(_) if rec.is_some() => {
                    // A teleport inside an episode would break exact replay.
                    let _ = replies.send(ServerMsg::Error { msg: "stop recording before reset".into() });
                }
                Command::Reset(seed) => {
                    let seed = seed.unwrap_or_else(|| {
                        next_seed = next_seed.wrapping_add(1);
                        next_seed - 1
                    });
                    s = sim.reset_seeded(seed);
                    *shared.action.lock().unwrap() = None;
                    let _ = replies.send(ServerMsg::Reset { tick });
                }
                Command::RecordStart => {
                    if rec.is_some() {
                        let _ = replies.send(ServerMsg::Error { msg: "already recording".into() });
                    } else {
                        let mut h = EpisodeHeader::new(Source::Human, 0);
                        h.created = now_secs();
                        rec = Some(Recording { episode: Episode::new(h) });
                        let _ = replies.send(ServerMsg::RecordStart { tick });
                    }
                }
                Command::RecordStop => {
                    let msg = match rec.take() {
                        Some(r) => finish(&cfg, r, false),
                        None => ServerMsg::Error { msg: "not recording".into() },
                    };
                    let _ = replies.send(msg);
                }
                Command::Disconnect => {
                    if let Some(r) = rec.take() {
                        match finish(&cfg, r, true) {
                            ServerMsg::RecordStop { episode_path, .. } => log::info!("interrupted episode saved to {episode_path}"),
                            other => log::warn!("interrupted episode lost: {other:?}"),
                        }
                    }
                }
            }
        }
        let held = *shared.action.lock().unwrap();
        let a = cfg.scene.clamp_action(&held.map_or(Action::ZERO, |a| Action::from_array(&a)));
        let obs = s.to_array();
        s = sim.step(&a).expect("simulator was reset");
        if let Some(r) = rec.as_mut() {
            r.episode.push(obs, a.to_array());
        }
        tick += 1;
        *shared.state.lock().unwrap() = Some((tick, s.to_array(), rec.is_some()));
        let now = Instant::now();
        if deadline > now {
            thread::sleep(deadline - now);
            deadline += cfg.tick;
        } else {
            // Fell behind; do not try to catch up with a burst of ticks.
            deadline = now + cfg.tick;
        }
    }
    if let Some(r) = rec.take() {
        let _ = finish(&cfg, r, true);
    }
}

/// Blocking convenience used by the `serve` subcommand.
pub fn run(addr: &str, cfg: ServeConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    log::info!("teleop server on ws://{} writing to {}", listener.local_addr()?, cfg.output.display());
    serve(listener, cfg)?.wait();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn message_shapes() {
        let m: ClientMsg = serde_json::from_str(r#"{"type":"action","act":[0,0,0,0,0,0,0.1,0.1]}"#).unwrap();
        assert_eq!(m, ClientMsg::Action { act: vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.1] });
        assert_eq!(serde_json::from_str::<ClientMsg>(r#"{"type":"reset"}"#).unwrap(), ClientMsg::Reset { seed: None });
        assert_eq!(serde_json::from_str::<ClientMsg>(r#"{"type":"reset","seed":4}"#).unwrap(), ClientMsg::Reset { seed: Some(4) });
        let s = serde_json::to_string(&ServerMsg::RecordStop { episode_path: "a".into(), frames: 3 }).unwrap();
        assert_eq!(s, r#"{"type":"record_stop","episode_path":"a","frames":3}"#);
        assert!(to_action(&[0.0; 7]).is_err());
        assert!(to_action(&[f64::NAN; 8]).is_err());
    }
}
