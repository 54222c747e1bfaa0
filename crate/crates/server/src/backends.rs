//! Registered detection backends, local or reached through a worker connection.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use async_trait::async_trait;
use scenelab_detection::{Detection, DetectionBackend, DetectionBackendInfo, DetectionError};
use scenelab_protocol::messages::{ClassifyRequest, ErrorCode};
use scenelab_protocol::{Envelope, Request, Response};
use tokio::sync::{mpsc, oneshot};

type Pending = Arc<Mutex<HashMap<String, oneshot::Sender<Response>>>>;

/// A worker process that registered over a protocol connection. Classify
/// requests are forwarded as envelopes and answered by id.
pub struct RemoteBackend {
    info: DetectionBackendInfo,
    out: mpsc::Sender<String>,
    pending: Pending,
    next_id: AtomicU64,
    /// One request at a time per worker.
    turn: tokio::sync::Mutex<()>,
}

impl RemoteBackend {
    pub fn new(mut info: DetectionBackendInfo, out: mpsc::Sender<String>) -> Self {
        info.remote = true;
        RemoteBackend {
            info,
            out,
            pending: Arc::default(),
            next_id: AtomicU64::new(1),
            turn: tokio::sync::Mutex::new(()),
        }
    }

    /// Routes a response from the worker. Returns false if nothing was waiting for `id`.
    pub fn deliver(&self, id: &str, response: Response) -> bool {
        let waiter = self.pending.lock().unwrap_or_else(|e| e.into_inner()).remove(id);
        match waiter {
            Some(tx) => tx.send(response).is_ok(),
            None => false,
        }
    }

    pub fn pending(&self) -> usize {
        self.pending.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// Fails every outstanding request; used when the worker disconnects.
    pub fn disconnect(&self) {
        self.pending.lock().unwrap_or_else(|e| e.into_inner()).clear();
    }
}

struct PendingGuard<'a> {
    pending: &'a Pending,
    id: String,
}

impl Drop for PendingGuard<'_> {
    fn drop(&mut self) {
        self.pending.lock().unwrap_or_else(|e| e.into_inner()).remove(&self.id);
    }
}

#[async_trait]
impl DetectionBackend for RemoteBackend {
    fn info(&self) -> &DetectionBackendInfo {
        &self.info
    }

    async fn infer(&self, png: &[u8]) -> Result<Vec<Detection>, DetectionError> {
        let _turn = self.turn.lock().await;
        let id = format!("bk-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let (tx, rx) = oneshot::channel();
        self.pending.lock().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), tx);
        let _guard = PendingGuard {
            pending: &self.pending,
            id: id.clone(),
        };
        let request = Request::Classify(ClassifyRequest {
            session_id: None,
            image: png.to_vec().into(),
            object_id: String::new(),
            vertex_count: 0,
            min_score: None,
        });
        let gone = || DetectionError::BackendUnavailable(format!("worker `{}` disconnected", self.info.backend_id));
        self.out
            .send(Envelope::request(id, request).to_json())
            .await
            .map_err(|_| gone())?;
        match rx.await.map_err(|_| gone())? {
            Response::ClassifyResult(r) => Ok(r.detections),
            Response::Error(e) if e.is(ErrorCode::InvalidImage) => Err(DetectionError::InvalidImage(e.message)),
            Response::Error(e) => Err(DetectionError::BackendProtocol(format!("{}: {}", e.code, e.message))),
            other => Err(DetectionError::BackendProtocol(format!(
                "unexpected `{}` reply to classify",
                other.type_name()
            ))),
        }
    }
}

/// Backends by id. The most recently registered one serves classify requests.
#[derive(Default)]
pub struct BackendRegistry {
    backends: RwLock<Vec<Arc<dyn DetectionBackend>>>,
}

impl BackendRegistry {
    /// Adds `backend`, replacing any backend with the same id.
    pub fn register(&self, backend: Arc<dyn DetectionBackend>) {
        let mut list = self.backends.write().unwrap_or_else(|e| e.into_inner());
        list.retain(|b| b.info().backend_id != backend.info().backend_id);
        list.push(backend);
    }

    /// Removes `backend` if it is still the one registered under its id.
    pub fn unregister(&self, backend: &Arc<dyn DetectionBackend>) {
        let mut list = self.backends.write().unwrap_or_else(|e| e.into_inner());
        list.retain(|b| !Arc::ptr_eq(b, backend));
    }

    pub fn current(&self) -> Option<Arc<dyn DetectionBackend>> {
        self.backends.read().unwrap_or_else(|e| e.into_inner()).last().cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.backends
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .map(|b| b.info().backend_id.clone())
            .collect()
    }
}
