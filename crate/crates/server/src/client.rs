//! Minimal framed TCP client, plus a detection worker loop built on it.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use scenelab_detection::{DetectionBackend, DetectionError};
use scenelab_protocol::messages::{ClassifyResult, ErrorBody, ErrorCode, RegisteredBody};
use scenelab_protocol::{
    parse_envelope, read_frame_async, write_frame_async, Envelope, EnvelopeError, FrameError, Message, Request,
    Response,
};
use thiserror::Error;
use tokio::io::BufReader;
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::task::JoinHandle;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("connection closed")]
    Closed,
    #[error("server error {}: {}", .0.code, .0.message)]
    Server(ErrorBody),
    #[error("unexpected `{0}` message")]
    Unexpected(String),
}

pub struct Client {
    rd: BufReader<OwnedReadHalf>,
    wr: OwnedWriteHalf,
    next_id: u64,
}

impl Client {
    pub async fn connect(addr: SocketAddr) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        let (rd, wr) = stream.into_split();
        Ok(Client {
            rd: BufReader::new(rd),
            wr,
            next_id: 1,
        })
    }

    pub async fn send_raw(&mut self, payload: &str) -> Result<(), ClientError> {
        Ok(write_frame_async(&mut self.wr, payload).await?)
    }

    pub async fn send(&mut self, env: &Envelope) -> Result<(), ClientError> {
        self.send_raw(&env.to_json()).await
    }

    /// Sends `req` with a fresh id and returns the id.
    pub async fn send_request(&mut self, req: Request) -> Result<String, ClientError> {
        let id = format!("c{}", self.next_id);
        self.next_id += 1;
        self.send(&Envelope::request(id.clone(), req)).await?;
        Ok(id)
    }

    pub async fn recv_raw(&mut self) -> Result<String, ClientError> {
        read_frame_async(&mut self.rd).await?.ok_or(ClientError::Closed)
    }

    pub async fn recv(&mut self) -> Result<Envelope, ClientError> {
        Ok(parse_envelope(&self.recv_raw().await?)?)
    }

    /// One request, one response. Messages with other ids are skipped.
    pub async fn call(&mut self, req: Request) -> Result<Response, ClientError> {
        let id = self.send_request(req).await?;
        loop {
            let env = self.recv().await?;
            if env.id != id {
                continue;
            }
            return match env.message {
                Message::Response(r) => Ok(r),
                Message::Request(r) => Err(ClientError::Unexpected(r.type_name().into())),
            };
        }
    }

    /// Like [`call`](Self::call) but turns `error` responses into `Err`.
    pub async fn call_ok(&mut self, req: Request) -> Result<Response, ClientError> {
        match self.call(req).await? {
            Response::Error(e) => Err(ClientError::Server(e)),
            r => Ok(r),
        }
    }
}

/// Registers `backend` with the server at `addr` and answers classify
/// requests on a background task until the connection ends.
pub async fn connect_worker(
    addr: SocketAddr,
    backend: Arc<dyn DetectionBackend>,
) -> Result<JoinHandle<Result<(), ClientError>>, ClientError> {
    let mut client = Client::connect(addr).await?;
    match client.call_ok(Request::RegisterBackend(backend.info().clone())).await? {
        Response::RegisterBackendResult(RegisteredBody { .. }) => {}
        other => return Err(ClientError::Unexpected(other.type_name().into())),
    }
    Ok(tokio::spawn(worker_loop(client, backend)))
}

pub async fn run_worker(addr: SocketAddr, backend: Arc<dyn DetectionBackend>) -> Result<(), ClientError> {
    connect_worker(addr, backend)
        .await?
        .await
        .unwrap_or_else(|e| Err(ClientError::Io(std::io::Error::other(e))))
}

async fn worker_loop(mut client: Client, backend: Arc<dyn DetectionBackend>) -> Result<(), ClientError> {
    loop {
        let env = match client.recv().await {
            Ok(env) => env,
            Err(ClientError::Closed) => return Ok(()),
            Err(ClientError::Envelope(e)) => {
                client.send(&e.to_response()).await?;
                continue;
            }
            Err(e) => return Err(e),
        };
        let reply = match env.message {
            Message::Request(Request::Classify(req)) => {
                let started = Instant::now();
                match backend.infer(&req.image.0).await {
                    Ok(detections) => Response::ClassifyResult(ClassifyResult {
                        detections,
                        backend_id: backend.info().backend_id.clone(),
                        latency_ms: started.elapsed().as_millis() as u64,
                        label: None,
                        warning: None,
                    }),
                    Err(DetectionError::InvalidImage(m)) => Response::error(ErrorCode::InvalidImage, m),
                    Err(e) => Response::error(ErrorCode::BackendError, e.to_string()),
                }
            }
            Message::Request(Request::Ping {}) => Response::Pong {},
            Message::Request(other) => Response::error(
                ErrorCode::UnknownType,
                format!("a detection worker does not handle `{}`", other.type_name()),
            ),
            Message::Response(_) => continue,
        };
        client.send(&Envelope::response(env.id, reply)).await?;
    }
}
