//! TCP framing and the WebSocket bridge, both feeding [`drive`].

use std::sync::Arc;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use scenelab_protocol::{read_frame_async, write_frame_async, FrameError, WS_PATH};
use tokio::io::{AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use tokio::sync::{mpsc, oneshot, watch};

use crate::app::{App, ConnCtx};
use crate::catalog::{confine, AssetError};
use crate::conn::{drive, next_conn_id, Inbound, OUTBOX_DEPTH, QUEUE_DEPTH};

const PLACEHOLDER_PAGE: &str = "<!doctype html>\n<html><head><title>scenelab</title></head>\
<body><p>No viewer installed. Connect a client to <code>/ws</code>.</p></body></html>\n";

pub async fn serve_tcp(app: Arc<App>, stream: TcpStream, shutdown: watch::Receiver<bool>) {
    let _ = stream.set_nodelay(true);
    let (rd, mut wr) = stream.into_split();
    let (in_tx, in_rx) = mpsc::channel(QUEUE_DEPTH);
    let reader = tokio::spawn(async move {
        let mut rd = BufReader::new(rd);
        loop {
            let item = match read_frame_async(&mut rd).await {
                Ok(Some(p)) => Inbound::Payload(p),
                Ok(None) | Err(FrameError::Io(_)) => break,
                Err(FrameError::InvalidUtf8) => Inbound::Rejected("frame payload is not valid UTF-8".into()),
                Err(e) => {
                    let _ = in_tx.send(Inbound::Fatal(e.to_string())).await;
                    break;
                }
            };
            if in_tx.send(item).await.is_err() {
                break;
            }
        }
    });

    let (out_tx, mut out_rx) = mpsc::channel::<String>(OUTBOX_DEPTH);
    let (close_tx, mut close_rx) = oneshot::channel::<()>();
    let writer = tokio::spawn(async move {
        loop {
            tokio::select! {
                biased;
                msg = out_rx.recv() => match msg {
                    Some(p) => if write_frame_async(&mut wr, &p).await.is_err() { return },
                    None => break,
                },
                _ = &mut close_rx => {
                    while let Ok(p) = out_rx.try_recv() {
                        if write_frame_async(&mut wr, &p).await.is_err() {
                            return;
                        }
                    }
                    break;
                }
            }
        }
        let _ = wr.shutdown().await;
    });

    let ctx = Arc::new(ConnCtx::new(next_conn_id(), out_tx.clone()));
    drive(app, ctx, out_tx, in_rx, shutdown).await;
    reader.abort();
    let _ = close_tx.send(());
    let _ = writer.await;
}

async fn serve_ws(app: Arc<App>, socket: WebSocket, shutdown: watch::Receiver<bool>) {
    let (mut sink, mut stream) = socket.split();
    let (in_tx, in_rx) = mpsc::channel(QUEUE_DEPTH);
    let reader = tokio::spawn(async move {
        while let Some(msg) = stream.next().await {
            let item = match msg {
                Ok(WsMessage::Text(t)) => Inbound::Payload(t.as_str().to_owned()),
                Ok(WsMessage::Binary(b)) => match String::from_utf8(b.to_vec()) {
                    Ok(p) => Inbound::Payload(p),
                    Err(_) => Inbound::Rejected("binary message is not valid UTF-8".into()),
                },
                Ok(WsMessage::Close(_)) | Err(_) => break,
                Ok(_) => continue,
            };
            if in_tx.send(item).await.is_err() {
                break;
            }
        }
    });

    let (out_tx, mut out_rx) = mpsc::channel::<String>(OUTBOX_DEPTH);
    let (close_tx, mut close_rx) = oneshot::channel::<()>();
    let writer = tokio::spawn(async move {
        loop {
            tokio::select! {
                biased;
                msg = out_rx.recv() => match msg {
                    Some(p) => if sink.send(WsMessage::Text(p.into())).await.is_err() { return },
                    None => break,
                },
                _ = &mut close_rx => {
                    while let Ok(p) = out_rx.try_recv() {
                        if sink.send(WsMessage::Text(p.into())).await.is_err() {
                            return;
                        }
                    }
                    break;
                }
            }
        }
        let _ = sink.send(WsMessage::Close(None)).await;
    });

    let ctx = Arc::new(ConnCtx::new(next_conn_id(), out_tx.clone()));
    drive(app, ctx, out_tx, in_rx, shutdown).await;
    reader.abort();
    let _ = close_tx.send(());
    let _ = writer.await;
}

#[derive(Clone)]
struct HttpState {
    app: Arc<App>,
    shutdown: watch::Receiver<bool>,
    /// Held by every live WebSocket so shutdown can wait for them.
    alive: mpsc::Sender<()>,
}

async fn ws_upgrade(State(st): State<HttpState>, ws: WebSocketUpgrade) -> Response {
    ws.max_message_size(scenelab_protocol::MAX_PAYLOAD)
        .on_upgrade(move |socket| async move {
            let _alive = st.alive;
            serve_ws(st.app, socket, st.shutdown).await;
        })
}

async fn static_file(State(st): State<HttpState>, uri: Uri) -> Response {
    let Some(dir) = st.app.config.viewer_dir.clone() else {
        return match uri.path() {
            "/" | "/index.html" => Html(PLACEHOLDER_PAGE).into_response(),
            _ => StatusCode::NOT_FOUND.into_response(),
        };
    };
    let path = match uri.path() {
        p if p.ends_with('/') => format!("{p}index.html"),
        p => p.to_owned(),
    };
    let resolved = match confine(&dir, &path) {
        Ok(p) => p,
        Err(AssetError::Forbidden(_)) => return StatusCode::FORBIDDEN.into_response(),
        Err(_) => return StatusCode::NOT_FOUND.into_response(),
    };
    match tokio::fs::read(&resolved).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&resolved))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript",
        "css" => "text/css",
        "json" => "application/json",
        "png" => "image/png",
        "svg" => "image/svg+xml",
        "wasm" => "application/wasm",
        "glb" => "model/gltf-binary",
        "gltf" => "model/gltf+json",
        _ => "application/octet-stream",
    }
}

pub fn router(app: Arc<App>, shutdown: watch::Receiver<bool>, alive: mpsc::Sender<()>) -> Router {
    Router::new()
        .route(WS_PATH, get(ws_upgrade))
        .fallback(static_file)
        .with_state(HttpState { app, shutdown, alive })
}
