//! Tick thread, broadcast fan-out and the axum routes.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};

use crate::protocol::{Command, ServerMsg};
use crate::world::{World, WorldConfig};

/// Frames retained per client before the oldest are dropped.
pub const CLIENT_QUEUE: usize = 32;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub world: WorldConfig,
    /// Upper bound on published frames per simulated second.
    pub frame_hz: f64,
    /// Simulated seconds per wall second; the loop runs flat out when it
    /// cannot keep up.
    pub speed: f64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            frame_hz: 30.0,
            speed: 1.0,
        }
    }
}

impl ServeConfig {
    /// Ticks between published frames.
    pub fn frame_stride(&self) -> u64 {
        let tick_hz = 1.0 / self.world.sim.dt();
        (tick_hz / self.frame_hz).ceil().max(1.0) as u64
    }
}

struct Request {
    cmd: Command,
    reply: mpsc::UnboundedSender<ServerMsg>,
}

#[derive(Clone)]
struct AppState {
    frames: broadcast::Sender<Arc<str>>,
    commands: mpsc::UnboundedSender<Request>,
}

/// Running simulation plus the router serving it. The tick thread stops when
/// this is dropped.
pub struct LiveSim {
    router: Router,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl LiveSim {
    pub fn start(cfg: ServeConfig) -> tacfoot_core::Result<Self> {
        if !(cfg.frame_hz > 0.0 && cfg.frame_hz <= 30.0) {
            return Err(tacfoot_core::Error::InvalidArgument(format!(
                "frame rate must be in (0, 30] Hz, got {}",
                cfg.frame_hz
            )));
        }
        if !(cfg.speed.is_finite() && cfg.speed > 0.0) {
            return Err(tacfoot_core::Error::InvalidArgument(format!(
                "speed must be positive, got {}",
                cfg.speed
            )));
        }
        let world = World::new(cfg.world.clone())?;
        let (frames, _) = broadcast::channel(CLIENT_QUEUE);
        let (commands, rx) = mpsc::unbounded_channel();
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let frames = frames.clone();
            let stop = stop.clone();
            std::thread::Builder::new()
                .name("tacfoot-tick".into())
                .spawn(move || tick_loop(world, cfg, rx, frames, stop))
                .map_err(|e| tacfoot_core::Error::InvalidArgument(format!("cannot start tick thread: {e}")))?
        };
        let router = Router::new()
            .route("/ws", get(ws_handler))
            .route("/health", get(health))
            .with_state(AppState { frames, commands });
        Ok(Self {
            router,
            stop,
            thread: Some(thread),
        })
    }

    pub fn router(&self) -> Router {
        self.router.clone()
    }

    /// Serves until the listener fails.
    pub async fn serve(&self, listener: TcpListener) -> std::io::Result<()> {
        axum::serve(listener, self.router()).await
    }
}

impl Drop for LiveSim {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(cfg: ServeConfig, addr: SocketAddr) -> std::io::Result<()> {
    let sim = LiveSim::start(cfg).map_err(std::io::Error::other)?;
    let listener = TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    sim.serve(listener).await
}

fn tick_loop(
    mut world: World,
    cfg: ServeConfig,
    mut rx: mpsc::UnboundedReceiver<Request>,
    frames: broadcast::Sender<Arc<str>>,
    stop: Arc<AtomicBool>,
) {
    let stride = cfg.frame_stride();
    let period = Duration::from_secs_f64(world.dt() / cfg.speed);
    let mut next = Instant::now();
    let mut tick = 0u64;
    while !stop.load(Ordering::Relaxed) {
        while let Ok(req) = rx.try_recv() {
            let msg = match world.apply(&req.cmd) {
                Ok(()) => ServerMsg::Ack {
                    command: req.cmd.name().to_string(),
                    t: world.time(),
                },
                Err(e) => ServerMsg::Error { message: e.to_string() },
            };
            let _ = req.reply.send(msg);
        }
        match world.step() {
            Ok(frame) => {
                if tick.is_multiple_of(stride) {
                    if let Ok(text) = serde_json::to_string(&ServerMsg::Frame(frame)) {
                        // no receivers is fine
                        let _ = frames.send(text.into());
                    }
                }
            }
            Err(e) => {
                log::error!("tick failed: {e}");
                let text = serde_json::to_string(&ServerMsg::Error { message: e.to_string() }).unwrap_or_default();
                let _ = frames.send(text.into());
                let _ = world.apply(&Command::Reset);
            }
        }
        tick += 1;
        next += period;
        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        } else {
            next = now;
        }
    }
}

async fn health() -> impl IntoResponse {
    Json(serde_json::json!({
        "status": "ok",
        "name": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
    }))
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let (mut tx, mut rx) = socket.split();
    let mut frames = state.frames.subscribe();
    let (reply_tx, mut replies) = mpsc::unbounded_channel::<ServerMsg>();
    loop {
        tokio::select! {
            frame = frames.recv() => match frame {
                Ok(text) => {
                    if tx.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::debug!("client lagging, dropped {n} frames"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
            Some(msg) = replies.recv() => {
                let text = serde_json::to_string(&msg).unwrap_or_default();
                if tx.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(text))) => match Command::parse(text.as_str()) {
                    Ok(cmd) => {
                        let req = Request { cmd, reply: reply_tx.clone() };
                        if state.commands.send(req).is_err() {
                            break;
                        }
                    }
                    Err(message) => {
                        let _ = reply_tx.send(ServerMsg::Error { message });
                    }
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}
