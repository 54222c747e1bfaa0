//! Examination server: framed TCP for workers and tools, a WebSocket bridge
//! and static files for the viewer, all sharing one session table and log.

pub mod app;
pub mod backends;
pub mod catalog;
pub mod client;
pub mod conn;
pub mod server;
pub mod transport;

pub use app::{App, ServerConfig};
pub use backends::{BackendRegistry, RemoteBackend};
pub use catalog::{AssetCatalog, AssetError};
pub use client::{connect_worker, run_worker, Client, ClientError};
pub use server::{serve, start, shutdown_signal, ServerError, ServerHandle};
