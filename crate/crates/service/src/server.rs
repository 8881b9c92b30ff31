//! Websocket transport. One hub task owns the [`SessionService`] and runs
//! the tick loop; socket tasks only forward text and drain their queues.

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::time::MissedTickBehavior;
use tower_http::services::ServeDir;

use crate::clock::Clock;
use crate::service::{ConnId, Outbox, SessionService};

pub const DEFAULT_PORT: u16 = 8741;

/// Frames a slow client may have queued before newer ones are dropped.
pub const DEFAULT_FRAME_BUFFER: usize = 4;

#[derive(Clone, Debug, Default)]
pub struct ServeOptions {
    /// Static files served for any path other than `/ws`.
    pub ui_dir: Option<PathBuf>,
    /// Zero means [`DEFAULT_FRAME_BUFFER`].
    pub frame_buffer: usize,
}

struct ConnTx {
    control: mpsc::UnboundedSender<String>,
    frames: mpsc::Sender<String>,
}

enum HubMsg {
    Connect(oneshot::Sender<ConnId>, ConnTx),
    Text(ConnId, String),
    Disconnect(ConnId),
    Shutdown,
}

#[derive(Clone)]
struct AppState {
    hub: mpsc::UnboundedSender<HubMsg>,
    frame_buffer: usize,
}

/// Serves `/ws` on `listener` until `shutdown` resolves. An active session
/// is finalized and persisted on the way out.
pub async fn serve<C: Clock>(
    listener: TcpListener,
    service: SessionService<C>,
    options: ServeOptions,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let (hub_tx, hub_rx) = mpsc::unbounded_channel();
    let hub = tokio::spawn(run_hub(service, hub_rx));
    let state = AppState {
        hub: hub_tx.clone(),
        frame_buffer: if options.frame_buffer == 0 { DEFAULT_FRAME_BUFFER } else { options.frame_buffer },
    };
    let mut app = Router::new().route("/ws", get(ws_handler)).with_state(state);
    if let Some(dir) = options.ui_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    // Upgraded sockets outlive the HTTP server, so the hub is told directly.
    let _ = hub_tx.send(HubMsg::Shutdown);
    let _ = hub.await;
    Ok(())
}

async fn run_hub<C: Clock>(mut service: SessionService<C>, mut rx: mpsc::UnboundedReceiver<HubMsg>) {
    let period = Duration::from_secs_f64(1.0 / f64::from(service.config().tick_hz.max(1)));
    let mut ticker = tokio::time::interval(period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut conns: HashMap<ConnId, ConnTx> = HashMap::new();
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Some(HubMsg::Connect(reply, tx)) => {
                    let id = service.connect();
                    conns.insert(id, tx);
                    if reply.send(id).is_err() {
                        conns.remove(&id);
                        service.disconnect(id);
                    }
                }
                Some(HubMsg::Text(id, text)) => route(&conns, service.handle_text(id, &text)),
                Some(HubMsg::Disconnect(id)) => {
                    conns.remove(&id);
                    service.disconnect(id);
                }
                Some(HubMsg::Shutdown) | None => break,
            },
            _ = ticker.tick() => route(&conns, service.tick()),
        }
    }
    route(&conns, service.shutdown());
    // Dropping the senders ends every socket task once its queue is drained.
}

fn route(conns: &HashMap<ConnId, ConnTx>, out: Outbox) {
    for (id, env) in out {
        let Some(tx) = conns.get(&id) else { continue };
        let text = env.to_json();
        if env.t == "frame" {
            // Never block the tick loop on a slow client.
            if tx.frames.try_send(text).is_err() {
                tracing::debug!(conn = id, "frame dropped");
            }
        } else {
            let _ = tx.control.send(text);
        }
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| handle_socket(socket, state))
}

async fn handle_socket(mut socket: WebSocket, state: AppState) {
    let (control, mut control_rx) = mpsc::unbounded_channel();
    let (frames, mut frames_rx) = mpsc::channel(state.frame_buffer);
    let (reply, id) = oneshot::channel();
    if state.hub.send(HubMsg::Connect(reply, ConnTx { control, frames })).is_err() {
        return;
    }
    let Ok(id) = id.await else { return };
    loop {
        tokio::select! {
            biased;
            out = control_rx.recv() => match out {
                Some(text) => if socket.send(Message::Text(text.into())).await.is_err() { break },
                None => break,
            },
            out = frames_rx.recv() => match out {
                Some(text) => if socket.send(Message::Text(text.into())).await.is_err() { break },
                None => break,
            },
            inbound = socket.recv() => match inbound {
                Some(Ok(Message::Text(text))) => {
                    if state.hub.send(HubMsg::Text(id, text.to_string())).is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Binary(_))) => tracing::debug!(conn = id, "binary frame ignored"),
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
    let _ = state.hub.send(HubMsg::Disconnect(id));
}
