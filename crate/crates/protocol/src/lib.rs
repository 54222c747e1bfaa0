//! Wire protocol shared by the server, the CLI and detection workers.
//!
//! Over TCP every message is one length-prefixed frame ([`frame`]); over the
//! WebSocket bridge it is one text message. Either way the payload is a JSON
//! envelope `{"v":1,"id":..,"type":..,"body":..}` ([`envelope`]) whose body
//! is one of the typed [`messages`].

pub mod envelope;
pub mod frame;
pub mod messages;
#[cfg(feature = "testgen")]
pub mod testgen;

pub use envelope::{parse_envelope, Envelope, EnvelopeError, Message, PROTOCOL_VERSION};
pub use frame::{
    encode_frame, read_frame, read_frame_async, write_frame, write_frame_async, FrameDecoder, FrameError, MAX_PAYLOAD,
    MIN_PAYLOAD,
};
pub use messages::{ErrorBody, ErrorCode, Request, Response};

/// Default TCP port for framed connections.
pub const DEFAULT_TCP_PORT: u16 = 7047;
/// Default port of the HTTP server carrying the WebSocket bridge at [`WS_PATH`].
pub const DEFAULT_WS_PORT: u16 = 7048;
pub const WS_PATH: &str = "/ws";
