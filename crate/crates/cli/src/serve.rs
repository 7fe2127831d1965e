//! WebSocket front end for a steering session.
//!
//! One session is shared by all connections. Commands from any client are
//! queued to the simulation task, which applies them between steps and sends
//! every event to every client. Each client has a bounded queue; a full queue
//! makes the simulation task wait, so stepping never outruns a subscriber by
//! more than the buffer.

use std::net::{IpAddr, SocketAddr};

use anyhow::Result;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokenmorph::steer::{parse_request, request_id, Envelope, Event, Session};
use tokio::sync::mpsc;

enum Inbound {
    Connect(mpsc::Sender<String>),
    Text(String),
}

#[derive(Clone)]
struct AppState {
    inbound: mpsc::UnboundedSender<Inbound>,
    buffer: usize,
}

pub fn serve(bind: IpAddr, port: u16, buffer: usize) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(SocketAddr::new(bind, port)).await?;
        println!("listening on ws://{}/ws", listener.local_addr()?);
        let (tx, rx) = mpsc::unbounded_channel();
        tokio::spawn(simulation_task(rx));
        let app = Router::new()
            .route("/ws", get(upgrade))
            .with_state(AppState {
                inbound: tx,
                buffer: buffer.max(1),
            });
        axum::serve(listener, app).await?;
        Ok(())
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::channel::<String>(state.buffer);
    if state.inbound.send(Inbound::Connect(tx)).is_err() {
        return;
    }
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(t) => {
                if state.inbound.send(Inbound::Text(t.to_string())).is_err() {
                    break;
                }
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    writer.abort();
}

async fn broadcast(clients: &mut Vec<mpsc::Sender<String>>, events: Vec<Event>) {
    for ev in events {
        let text = serde_json::to_string(&Envelope::from(ev)).expect("events serialize");
        let mut alive = Vec::with_capacity(clients.len());
        for c in clients.drain(..) {
            // Waiting here is the backpressure.
            if c.send(text.clone()).await.is_ok() {
                alive.push(c);
            }
        }
        *clients = alive;
    }
}

async fn simulation_task(mut inbound: mpsc::UnboundedReceiver<Inbound>) {
    let mut session = Session::new();
    let mut clients: Vec<mpsc::Sender<String>> = Vec::new();
    loop {
        let msg = if session.is_running() {
            match inbound.try_recv() {
                Ok(m) => Some(m),
                Err(mpsc::error::TryRecvError::Empty) => None,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        } else {
            match inbound.recv().await {
                Some(m) => Some(m),
                None => return,
            }
        };
        match msg {
            Some(Inbound::Connect(tx)) => clients.push(tx),
            Some(Inbound::Text(text)) => {
                let events = match parse_request(&text) {
                    Ok(req) => session.handle(req),
                    Err(e) => vec![Event::Error {
                        id: request_id(&text),
                        reason: e.to_string(),
                    }],
                };
                broadcast(&mut clients, events).await;
            }
            None => {
                let events = session.tick();
                broadcast(&mut clients, events).await;
                tokio::task::yield_now().await;
            }
        }
    }
}
