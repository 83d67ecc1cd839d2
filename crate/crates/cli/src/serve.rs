//! Live sessions over websocket: one independent world per connection.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use slingdrone_core::session::log::write_log;
use slingdrone_core::{ClientMessage, HandState, SimConfig, TickInput, Vec3, World};
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::time::{interval, MissedTickBehavior};

#[derive(Clone)]
struct AppState {
    cfg: Arc<SimConfig>,
    record: Option<Arc<PathBuf>>,
    sessions: Arc<AtomicU64>,
}

pub fn router(cfg: SimConfig, record: Option<PathBuf>) -> Router {
    let state = AppState { cfg: Arc::new(cfg), record: record.map(Arc::new), sessions: Arc::new(AtomicU64::new(0)) };
    Router::new()
        .route("/", get(|| async { "slingdrone: connect a websocket to /ws\n" }))
        .route("/ws", get(upgrade))
        .with_state(state)
}

/// Binds and serves until the process is stopped. Prints the bound address.
pub async fn run(addr: SocketAddr, cfg: SimConfig, record: Option<PathBuf>) -> anyhow::Result<()> {
    if let Some(dir) = &record {
        std::fs::create_dir_all(dir)?;
    }
    let listener = TcpListener::bind(addr).await?;
    println!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(cfg, record)).await?;
    Ok(())
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| session(socket, state))
}

async fn session(socket: WebSocket, state: AppState) {
    let id = state.sessions.fetch_add(1, Ordering::Relaxed) + 1;
    let mut world = match World::new((*state.cfg).clone()) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("session {id}: {e}");
            return;
        }
    };
    let idle = HandState { position: world.idle_hand(), grabbing: false };
    let (mut sink, mut stream) = socket.split();

    // Latest input wins: the tick loop only ever sees the newest hand state.
    let (tx, mut rx) = watch::channel(idle);
    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = stream.next().await {
            match msg {
                Message::Text(text) => match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(m) => {
                        let hand = m.hand();
                        if hand.position.is_finite() {
                            let _ = tx.send(hand);
                        }
                    }
                    Err(e) => eprintln!("session {id}: ignoring message: {e}"),
                },
                Message::Close(_) => break,
                _ => {}
            }
        }
    });

    let period = Duration::from_secs_f64(state.cfg.dt());
    let mut ticker = interval(period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let mut events = Vec::new();
    loop {
        ticker.tick().await;
        // An error here means the reader has finished: the client is gone.
        if rx.has_changed().is_err() {
            break;
        }
        let input = TickInput { hand: *rx.borrow_and_update(), inject_accel: Vec3::ZERO };
        let out = match world.tick(&input) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("session {id}: {e}");
                break;
            }
        };
        if state.record.is_some() {
            events.extend(out.events);
        }
        if let Some(frame) = out.frame {
            if sink.send(Message::Text(frame.to_json())).await.is_err() {
                break;
            }
        }
        if world.halted().is_some() {
            break;
        }
    }
    reader.abort();
    if let Some(dir) = &state.record {
        let path = dir.join(format!("session-{id}.jsonl"));
        let written = std::fs::File::create(&path)
            .map_err(anyhow::Error::from)
            .and_then(|f| write_log(std::io::BufWriter::new(f), &state.cfg, &events).map_err(Into::into));
        match written {
            Ok(()) => eprintln!("session {id}: recorded {} events to {}", events.len(), path.display()),
            Err(e) => eprintln!("session {id}: recording failed: {e}"),
        }
    }
}
