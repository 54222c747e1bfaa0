//! Transport-independent connection loop.
//!
//! A reader task turns bytes into [`Inbound`] items, a writer task sends
//! serialized envelopes, and [`drive`] sits between them. Requests from one
//! connection are answered in arrival order; separate connections run
//! concurrently. Responses arriving from a registered worker are routed to
//! its pending classify calls without queueing.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use scenelab_protocol::messages::{ErrorBody, ErrorCode};
use scenelab_protocol::{parse_envelope, Envelope, Message, Request, Response};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;

use crate::app::{App, ConnCtx};

/// Requests buffered per connection before the reader is back-pressured.
pub const QUEUE_DEPTH: usize = 64;
/// Outgoing envelopes buffered per connection.
pub const OUTBOX_DEPTH: usize = 256;

const WORKER_POLL: std::time::Duration = std::time::Duration::from_millis(20);

static CONN_IDS: AtomicU64 = AtomicU64::new(1);

pub fn next_conn_id() -> u64 {
    CONN_IDS.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug)]
pub enum Inbound {
    Payload(String),
    /// A frame that was skipped; the stream is still in sync.
    Rejected(String),
    /// The stream cannot continue.
    Fatal(String),
}

fn error_json(id: &str, code: ErrorCode, message: impl Into<String>) -> String {
    Envelope::response(id, Response::Error(ErrorBody::new(code, message))).to_json()
}

/// Runs one connection until the peer leaves, or until shutdown is signalled
/// and the requests already received have been answered.
pub async fn drive(
    app: Arc<App>,
    ctx: Arc<ConnCtx>,
    out: mpsc::Sender<String>,
    mut inbound: mpsc::Receiver<Inbound>,
    mut shutdown: watch::Receiver<bool>,
) {
    let mut queue: VecDeque<(String, Request)> = VecDeque::new();
    let mut current: Option<JoinHandle<()>> = None;
    let mut shutting = *shutdown.borrow();
    let mut reading = true;

    loop {
        if current.is_none() {
            if let Some((id, req)) = queue.pop_front() {
                let (app, ctx, out) = (app.clone(), ctx.clone(), out.clone());
                current = Some(tokio::spawn(async move {
                    let resp = app.handle(&ctx, req).await;
                    let _ = out.send(Envelope::response(id, resp).to_json()).await;
                }));
            }
        }
        // a worker keeps its connection until classify calls routed to it are answered
        let serving_worker = reading && ctx.backend().is_some_and(|b| b.pending() > 0);
        if current.is_none() && (!reading || (shutting && !serving_worker)) {
            break;
        }
        tokio::select! {
            changed = shutdown.changed(), if !shutting => {
                if changed.is_err() || *shutdown.borrow() {
                    shutting = true;
                }
            }
            item = inbound.recv(), if reading && queue.len() < QUEUE_DEPTH => match item {
                None => {
                    reading = false;
                    // a departing worker must not leave classify calls waiting
                    app.disconnect(&ctx);
                }
                Some(Inbound::Payload(p)) => accept(&ctx, &out, &mut queue, &p, shutting).await,
                Some(Inbound::Rejected(m)) => {
                    let _ = out.send(error_json("", ErrorCode::MalformedMessage, m)).await;
                }
                Some(Inbound::Fatal(m)) => {
                    tracing::warn!(conn = ctx.id, "closing connection: {m}");
                    let _ = out.send(error_json("", ErrorCode::MalformedMessage, m)).await;
                    reading = false;
                    queue.clear();
                    app.disconnect(&ctx);
                }
            },
            _ = tokio::time::sleep(WORKER_POLL), if shutting && current.is_none() => {}
            done = async { current.as_mut().expect("guarded").await }, if current.is_some() => {
                current = None;
                if let Err(e) = done {
                    tracing::error!(conn = ctx.id, "request task failed: {e}");
                }
            }
        }
    }
    app.disconnect(&ctx);
}

async fn accept(
    ctx: &ConnCtx,
    out: &mpsc::Sender<String>,
    queue: &mut VecDeque<(String, Request)>,
    payload: &str,
    shutting: bool,
) {
    match parse_envelope(payload) {
        Err(e) => {
            let _ = out.send(e.to_response().to_json()).await;
        }
        Ok(Envelope {
            id,
            message: Message::Response(resp),
        }) => {
            let delivered = ctx.backend().is_some_and(|b| b.deliver(&id, resp));
            if !delivered {
                tracing::debug!(conn = ctx.id, id, "dropping unsolicited response");
            }
        }
        Ok(Envelope {
            id,
            message: Message::Request(_),
        }) if shutting => {
            let _ = out.send(error_json(&id, ErrorCode::ShuttingDown, "server is shutting down")).await;
        }
        Ok(Envelope {
            id,
            message: Message::Request(req),
        }) => queue.push_back((id, req)),
    }
}
