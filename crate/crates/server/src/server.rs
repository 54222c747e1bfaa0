//! Startup, the accept loops, and graceful shutdown.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use scenelab_detection::StubBackend;
use scenelab_logbook::{LogStore, LogbookError, StoreOptions};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;

use crate::app::{App, ServerConfig};
use crate::catalog::{AssetCatalog, AssetError};
use crate::transport::{router, serve_tcp};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("asset root `{0}` is not a directory")]
    AssetRootMissing(PathBuf),
    #[error("cannot scan assets: {0}")]
    Assets(#[from] AssetError),
    #[error("cannot open the log: {0}")]
    Log(#[from] LogbookError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct ServerHandle {
    pub tcp_addr: SocketAddr,
    pub ws_addr: SocketAddr,
    app: Arc<App>,
    shutdown: watch::Sender<bool>,
    done: JoinHandle<()>,
}

impl ServerHandle {
    pub fn app(&self) -> &Arc<App> {
        &self.app
    }

    /// Stops accepting connections and new requests. Requests already
    /// received are still answered.
    pub fn shutdown(&self) {
        let _ = self.shutdown.send(true);
    }

    /// Resolves once every connection has closed.
    pub async fn wait(self) {
        let _ = self.done.await;
    }

    pub async fn stop(self) {
        self.shutdown();
        self.wait().await;
    }
}

async fn bind(addr: SocketAddr) -> Result<TcpListener, ServerError> {
    TcpListener::bind(addr).await.map_err(|source| ServerError::Bind { addr, source })
}

/// Opens the log, scans assets, binds both listeners and starts serving.
pub async fn start(config: ServerConfig) -> Result<ServerHandle, ServerError> {
    if !config.assets.is_dir() {
        return Err(ServerError::AssetRootMissing(config.assets.clone()));
    }
    let catalog = AssetCatalog::scan(&config.assets)?;
    let store = LogStore::open_with(
        &config.log_dir,
        StoreOptions {
            max_bytes: config.log_max_bytes,
        },
    )?;
    if let Some(r) = store.recovery() {
        tracing::warn!(line = r.line, bytes = r.discarded_bytes, "discarded a torn log tail");
    }
    let tcp = bind(config.tcp_addr).await?;
    let ws = bind(config.ws_addr).await?;
    let (tcp_addr, ws_addr) = (tcp.local_addr()?, ws.local_addr()?);

    let stub = config.stub.clone();
    let app = Arc::new(App::new(config, catalog, store));
    if let Some(manifest) = stub {
        app.backends.register(Arc::new(StubBackend::new(manifest)));
    }
    tracing::info!(%tcp_addr, %ws_addr, scenes = app.catalog.len(), "listening");

    let (shutdown_tx, shutdown_rx) = watch::channel(false);
    let (alive_tx, mut alive_rx) = mpsc::channel::<()>(1);

    let tcp_loop = {
        let (app, alive, mut stop) = (app.clone(), alive_tx.clone(), shutdown_rx.clone());
        let conn_shutdown = shutdown_rx.clone();
        tokio::spawn(async move {
            loop {
                tokio::select! {
                    _ = async { let _ = stop.wait_for(|v| *v).await; } => break,
                    accepted = tcp.accept() => match accepted {
                        Ok((stream, peer)) => {
                            tracing::debug!(%peer, "tcp connection");
                            let (app, alive, sd) = (app.clone(), alive.clone(), conn_shutdown.clone());
                            tokio::spawn(async move {
                                serve_tcp(app, stream, sd).await;
                                drop(alive);
                            });
                        }
                        Err(e) => {
                            tracing::warn!("accept failed: {e}");
                            tokio::time::sleep(std::time::Duration::from_millis(20)).await;
                        }
                    }
                }
            }
        })
    };
    let http_loop = {
        let routes = router(app.clone(), shutdown_rx.clone(), alive_tx.clone());
        let mut stop = shutdown_rx.clone();
        tokio::spawn(async move {
            let graceful = async move {
                let _ = stop.wait_for(|v| *v).await;
            };
            if let Err(e) = axum::serve(ws, routes).with_graceful_shutdown(graceful).await {
                tracing::error!("http server failed: {e}");
            }
        })
    };
    drop(alive_tx);

    let done = tokio::spawn(async move {
        let _ = tcp_loop.await;
        let _ = http_loop.await;
        // every connection holds a sender; recv yields None once all are gone
        let _ = alive_rx.recv().await;
    });

    Ok(ServerHandle {
        tcp_addr,
        ws_addr,
        app,
        shutdown: shutdown_tx,
        done,
    })
}

/// Runs until Ctrl-C or SIGTERM, then shuts down gracefully.
pub async fn serve(config: ServerConfig) -> Result<(), ServerError> {
    let signal = shutdown_signal();
    let handle = start(config).await?;
    signal.await;
    tracing::info!("shutting down");
    handle.stop().await;
    Ok(())
}

/// Resolves on Ctrl-C or SIGTERM. The handlers are installed when this is
/// called, not when the future is first polled, so a signal arriving in
/// between is not lost.
pub fn shutdown_signal() -> impl std::future::Future<Output = ()> + Send {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let term = signal(SignalKind::terminate());
        let int = signal(SignalKind::interrupt());
        async move {
            match (term, int) {
                (Ok(mut term), Ok(mut int)) => {
                    tokio::select! {
                        _ = term.recv() => {}
                        _ = int.recv() => {}
                    }
                }
                _ => {
                    let _ = tokio::signal::ctrl_c().await;
                }
            }
        }
    }
    #[cfg(not(unix))]
    {
        async {
            let _ = tokio::signal::ctrl_c().await;
        }
    }
}
