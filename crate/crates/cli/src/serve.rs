use std::io::Write;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use scenelab_detection::{StubBackend, StubManifest};
use scenelab_server::{run_worker, start, shutdown_signal, ServerConfig};

use crate::args::{ServeArgs, WorkerArgs};

pub async fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let stub = a
        .stub_manifest
        .as_deref()
        .map(StubManifest::load)
        .transpose()
        .context("loading the stub manifest")?;
    let mut config = ServerConfig::new(&a.assets, &a.log_dir);
    config.tcp_addr = SocketAddr::new(a.bind, a.port);
    config.ws_addr = SocketAddr::new(a.bind, a.ws_port);
    config.viewer_dir = a.viewer;
    config.stub = stub;
    config.min_score = a.min_score;
    config.classify_timeout = Duration::from_secs_f64(a.classify_timeout);
    config.log_max_bytes = a.max_log_bytes;

    let signal = shutdown_signal();
    let handle = start(config).await?;
    // one machine-readable line so scripts can find ports picked with 0
    let mut out = std::io::stdout().lock();
    writeln!(out, "listening tcp={} ws={}", handle.tcp_addr, handle.ws_addr)?;
    out.flush()?;
    drop(out);

    signal.await;
    tracing::info!("shutting down");
    handle.stop().await;
    Ok(())
}

pub async fn worker(a: WorkerArgs) -> anyhow::Result<()> {
    let manifest = StubManifest::load(&a.manifest)?;
    let backend = Arc::new(StubBackend::new(manifest).with_id(a.name));
    let signal = shutdown_signal();
    tracing::info!(server = %a.server, "registering");
    tokio::select! {
        r = run_worker(a.server, backend) => r.context("worker connection")?,
        _ = signal => {}
    }
    Ok(())
}
