//! HTTP side of a live run: the `/bridge` socket, the learning-curve
//! endpoint and the static UI mount.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::Receiver;
use std::sync::Arc;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use pvp_core::eval::learning_curve_export;
use pvp_core::runner::Telemetry;
use pvp_core::{HumanHandle, HumanOverride};
use tokio::sync::broadcast;
use tower_http::services::ServeDir;

use crate::bridge::{parse_inbound, Inbound, Outbound, CLOSE_SINGLE_OPERATOR, SINGLE_OPERATOR_REASON};

/// Meeting point of the training loop and the network: the operator's
/// override channel inbound, serialized state frames outbound.
pub struct Hub {
    human: HumanHandle,
    operator: AtomicBool,
    last_tick: AtomicU64,
    frames: broadcast::Sender<Arc<str>>,
}

impl Hub {
    pub fn new(human: HumanHandle) -> Arc<Self> {
        let (frames, _) = broadcast::channel(64);
        Arc::new(Hub {
            human,
            operator: AtomicBool::new(false),
            last_tick: AtomicU64::new(0),
            frames,
        })
    }

    /// Broadcasts a frame to the connected client. Frames that do not
    /// advance the tick are dropped.
    pub fn publish(&self, t: &Telemetry) {
        if self.last_tick.fetch_max(t.tick, Ordering::SeqCst) >= t.tick {
            return;
        }
        let _ = self.frames.send(Outbound::State(t).to_text().into());
    }

    pub fn operator_connected(&self) -> bool {
        self.operator.load(Ordering::SeqCst)
    }
}

/// Forwards the trainer's telemetry into the hub until the trainer hangs up.
pub fn spawn_forwarder(rx: Receiver<Telemetry>, hub: Arc<Hub>) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || {
        for t in rx {
            hub.publish(&t);
        }
    })
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub static_dir: PathBuf,
    /// Parent directory of run directories served under `/runs/{id}`.
    pub runs_dir: PathBuf,
}

#[derive(Clone)]
struct AppState {
    hub: Arc<Hub>,
    runs_dir: Arc<PathBuf>,
}

pub fn router(hub: Arc<Hub>, cfg: ServiceConfig) -> Router {
    let state = AppState {
        hub,
        runs_dir: Arc::new(cfg.runs_dir),
    };
    Router::new()
        .route("/bridge", get(bridge))
        .route("/runs/{id}/curve", get(curve))
        .with_state(state)
        .fallback_service(ServeDir::new(cfg.static_dir))
}

fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

async fn curve(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    if !valid_run_id(&id) {
        return (StatusCode::BAD_REQUEST, "invalid run id").into_response();
    }
    let dir = app.runs_dir.join(&id);
    if !dir.is_dir() {
        return (StatusCode::NOT_FOUND, format!("no run '{id}'")).into_response();
    }
    match tokio::task::spawn_blocking(move || learning_curve_export(&dir)).await {
        Ok(Ok(table)) => ([(header::CONTENT_TYPE, "text/csv")], table.to_csv()).into_response(),
        Ok(Err(e)) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn bridge(State(app): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| session(socket, app.hub))
}

fn close(code: u16, reason: &str) -> Message {
    Message::Close(Some(CloseFrame {
        code,
        reason: reason.into(),
    }))
}

/// Releases the operator slot however the session ends. The trainer sees a
/// release followed by a disconnect, so a later client starts from idle.
struct OperatorSlot(Arc<Hub>);

impl Drop for OperatorSlot {
    fn drop(&mut self) {
        self.0.human.send(HumanOverride {
            takeover: false,
            steer: 0.0,
            accel: 0.0,
            client_time_ms: 0,
        });
        self.0.human.set_connected(false);
        self.0.operator.store(false, Ordering::SeqCst);
        tracing::info!("operator disconnected");
    }
}

async fn session(mut socket: WebSocket, hub: Arc<Hub>) {
    if hub.operator.swap(true, Ordering::SeqCst) {
        tracing::warn!("rejected a second operator");
        let _ = socket.send(close(CLOSE_SINGLE_OPERATOR, SINGLE_OPERATOR_REASON)).await;
        return;
    }
    let _slot = OperatorSlot(hub.clone());
    let mut frames = hub.frames.subscribe();
    hub.human.set_connected(true);
    tracing::info!("operator connected");
    let (mut tx, mut rx) = socket.split();
    loop {
        tokio::select! {
            frame = frames.recv() => match frame {
                Ok(text) => {
                    if tx.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => tracing::debug!("client lagged by {n} frames"),
                Err(broadcast::error::RecvError::Closed) => {
                    let _ = tx.send(close(1000, "run finished")).await;
                    break;
                }
            },
            msg = rx.next() => match msg {
                Some(Ok(Message::Text(text))) => match parse_inbound(&text) {
                    Ok(Inbound::Control(c)) => {
                        hub.human.send(c.into());
                    }
                    Ok(Inbound::Ping { client_time_ms }) => {
                        let pong = Outbound::Pong { client_time_ms }.to_text();
                        if tx.send(Message::Text(pong.into())).await.is_err() {
                            break;
                        }
                    }
                    Ok(Inbound::Pong) => {}
                    Err(v) => {
                        tracing::warn!("closing operator: {}", v.reason);
                        let _ = tx.send(close(v.code, &v.reason)).await;
                        break;
                    }
                },
                Some(Ok(Message::Binary(_))) => {
                    let _ = tx.send(close(crate::bridge::CLOSE_PROTOCOL, "binary frames are not supported")).await;
                    break;
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

/// Serves `router` on `listener` until the process exits.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router).await
}
