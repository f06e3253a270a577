//! Live control service.
//!
//! One task owns the [`Session`] and paces its scans against the wall
//! clock. Clients talk to it only through channels: commands go in over an
//! mpsc queue with a oneshot reply, snapshots come out through a watch
//! channel (so slow clients see the latest one, never a backlog) and scan
//! failures through a broadcast channel.
//!
//! The wire format is one JSON document per WebSocket text frame,
//! terminated by `\n`. See `docs/protocol.md`.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use grafcet_core::session::{Ack, RejectReason, Rejection, Session, SessionCommand, PROTOCOL_VERSION};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::time::{Instant, MissedTickBehavior};

pub const DEFAULT_PORT: u16 = 7410;
/// Per-client snapshot spacing, keeping each client at or below 30 per second.
const SNAPSHOT_SPACING: Duration = Duration::from_millis(34);
/// Bound on scans run in one wake-up; a larger backlog is dropped rather
/// than replayed.
const MAX_SCANS_PER_WAKE: f64 = 10_000.0;

type Reply = Result<Ack, Rejection>;

struct Request {
    cmd: SessionCommand,
    reply: oneshot::Sender<Reply>,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::Sender<Request>,
    snapshots: watch::Receiver<Arc<str>>,
    events: broadcast::Sender<Arc<str>>,
}

fn encode_snapshot(session: &Session) -> Arc<str> {
    let mut s = serde_json::to_string(&session.snapshot()).expect("snapshot serializes");
    s.push('\n');
    s.into()
}

fn line(v: Value) -> String {
    let mut s = v.to_string();
    s.push('\n');
    s
}

/// Serves the session on `listener` until the listener fails.
pub async fn serve(listener: TcpListener, session: Session) -> std::io::Result<()> {
    let (cmd_tx, cmd_rx) = mpsc::channel(256);
    let (snap_tx, snap_rx) = watch::channel(encode_snapshot(&session));
    let (ev_tx, _) = broadcast::channel(64);
    tokio::spawn(run_loop(session, cmd_rx, snap_tx, ev_tx.clone()));

    let state = AppState { commands: cmd_tx, snapshots: snap_rx, events: ev_tx };
    let app = Router::new().route("/ws", get(ws_handler)).route("/snapshot", get(snapshot_handler)).with_state(state);
    axum::serve(listener, app).await
}

async fn run_loop(
    mut session: Session,
    mut commands: mpsc::Receiver<Request>,
    snapshots: watch::Sender<Arc<str>>,
    events: broadcast::Sender<Arc<str>>,
) {
    let mut ticker = tokio::time::interval(Duration::from_millis(1));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut owed = 0.0_f64;
    let mut last = Instant::now();

    loop {
        tokio::select! {
            req = commands.recv() => {
                let Some(Request { cmd, reply }) = req else { break };
                let was_running = session.is_running();
                let republish = matches!(cmd, SessionCommand::Pause | SessionCommand::Reset);
                let result = session.apply_command(cmd);
                let _ = reply.send(result);
                if !was_running && session.is_running() {
                    owed = 0.0;
                    last = Instant::now();
                }
                if republish {
                    snapshots.send_replace(encode_snapshot(&session));
                }
            }
            _ = ticker.tick() => {
                let now = Instant::now();
                if session.is_running() {
                    owed += now.duration_since(last).as_secs_f64() * session.speed() / session.dt().as_secs();
                    let due = owed.floor().min(MAX_SCANS_PER_WAKE);
                    owed = (owed - due).min(1.0);
                    let mut scanned = false;
                    for _ in 0..due as u64 {
                        match session.step() {
                            Ok(_) => scanned = true,
                            Err(failure) => {
                                tracing::warn!("session paused: {failure}");
                                let msg = line(json!({
                                    "v": PROTOCOL_VERSION,
                                    "t": "error",
                                    "epoch": session.epoch(),
                                    "scan_index": failure.scan_index,
                                    "message": failure.to_string(),
                                }));
                                let _ = events.send(msg.into());
                                scanned = true;
                                break;
                            }
                        }
                    }
                    if scanned {
                        snapshots.send_replace(encode_snapshot(&session));
                    }
                }
                last = now;
            }
        }
    }
}

async fn snapshot_handler(State(state): State<AppState>) -> impl IntoResponse {
    let body = state.snapshots.borrow().to_string();
    ([(header::CONTENT_TYPE, "application/json")], body)
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let (mut tx, mut rx) = socket.split();
    let mut snapshots = state.snapshots.clone();
    let mut events = state.events.subscribe();

    let first = snapshots.borrow_and_update().clone();
    if tx.send(Message::Text(first.as_ref().into())).await.is_err() {
        return;
    }
    let mut next_snapshot = Instant::now() + SNAPSHOT_SPACING;
    let mut snapshot_pending = false;

    loop {
        tokio::select! {
            msg = rx.next() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                    Some(Ok(_)) => continue,
                };
                for l in text.as_str().lines().filter(|l| !l.trim().is_empty()) {
                    let reply = handle_line(l, &state).await;
                    if tx.send(Message::Text(reply.into())).await.is_err() {
                        return;
                    }
                }
            }
            changed = snapshots.changed() => {
                if changed.is_err() {
                    break;
                }
                snapshot_pending = true;
            }
            _ = tokio::time::sleep_until(next_snapshot), if snapshot_pending => {
                let s = snapshots.borrow_and_update().clone();
                if tx.send(Message::Text(s.as_ref().into())).await.is_err() {
                    break;
                }
                snapshot_pending = false;
                next_snapshot = Instant::now() + SNAPSHOT_SPACING;
            }
            ev = events.recv() => match ev {
                Ok(e) => {
                    if tx.send(Message::Text(e.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {}
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
}

/// Parses one inbound line, forwards it to the session loop and formats
/// the reply.
async fn handle_line(text: &str, state: &AppState) -> String {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return reject(Value::Null, None, RejectReason::Malformed, &format!("invalid JSON: {e}")),
    };
    let id = value.get("id").cloned().unwrap_or(Value::Null);
    let cmd: SessionCommand = match serde_json::from_value(value) {
        Ok(c) => c,
        Err(e) => return reject(id, None, RejectReason::Malformed, &format!("invalid command: {e}")),
    };
    let name = cmd.name();
    let (reply_tx, reply_rx) = oneshot::channel();
    if state.commands.send(Request { cmd, reply: reply_tx }).await.is_err() {
        return reject(id, Some(name), RejectReason::Unavailable, "session is not running");
    }
    match reply_rx.await {
        Ok(Ok(ack)) => line(json!({
            "v": PROTOCOL_VERSION,
            "t": "ack",
            "id": id,
            "cmd": name,
            "effective_scan": ack.effective_scan,
        })),
        Ok(Err(r)) => reject(id, Some(name), r.reason, &r.message),
        Err(_) => reject(id, Some(name), RejectReason::Unavailable, "session is not running"),
    }
}

fn reject(id: Value, cmd: Option<&str>, reason: RejectReason, message: &str) -> String {
    line(json!({
        "v": PROTOCOL_VERSION,
        "t": "reject",
        "id": id,
        "cmd": cmd,
        "reason": reason,
        "message": message,
    }))
}
