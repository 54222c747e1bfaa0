//! `{v, id, type, body}` envelopes around typed messages.

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::messages::{is_request_type, is_response_type, ErrorBody, ErrorCode, Request, Response};

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    Request(Request),
    Response(Response),
}

impl Message {
    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Request(r) => r.type_name(),
            Message::Response(r) => r.type_name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub id: String,
    pub message: Message,
}

impl Envelope {
    pub fn request(id: impl Into<String>, r: Request) -> Self {
        Envelope {
            id: id.into(),
            message: Message::Request(r),
        }
    }

    pub fn response(id: impl Into<String>, r: Response) -> Self {
        Envelope {
            id: id.into(),
            message: Message::Response(r),
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a, T> {
            v: u64,
            id: &'a str,
            #[serde(flatten)]
            msg: &'a T,
        }
        let out = match &self.message {
            Message::Request(r) => serde_json::to_string(&Wire { v: PROTOCOL_VERSION, id: &self.id, msg: r }),
            Message::Response(r) => serde_json::to_string(&Wire { v: PROTOCOL_VERSION, id: &self.id, msg: r }),
        };
        out.expect("message bodies serialize")
    }
}

/// Why a payload could not be turned into an [`Envelope`]. Carries the
/// request id when one could be read, so the error can be correlated.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("malformed message: {message}")]
    Malformed { id: Option<String>, message: String },
    #[error("unsupported protocol version {version}")]
    UnsupportedVersion { id: Option<String>, version: Value },
    #[error("unknown message type `{type_name}`")]
    UnknownType { id: Option<String>, type_name: String },
}

impl EnvelopeError {
    pub fn id(&self) -> Option<&str> {
        match self {
            EnvelopeError::Malformed { id, .. }
            | EnvelopeError::UnsupportedVersion { id, .. }
            | EnvelopeError::UnknownType { id, .. } => id.as_deref(),
        }
    }

    pub fn code(&self) -> ErrorCode {
        match self {
            EnvelopeError::Malformed { .. } => ErrorCode::MalformedMessage,
            EnvelopeError::UnsupportedVersion { .. } => ErrorCode::UnsupportedVersion,
            EnvelopeError::UnknownType { .. } => ErrorCode::UnknownType,
        }
    }

    /// The `error` envelope to send back. Uses an empty id when none was readable.
    pub fn to_response(&self) -> Envelope {
        Envelope::response(
            self.id().unwrap_or_default(),
            Response::Error(ErrorBody::new(self.code(), self.to_string())),
        )
    }
}

pub fn parse_envelope(payload: &str) -> Result<Envelope, EnvelopeError> {
    let value: Value = serde_json::from_str(payload).map_err(|e| EnvelopeError::Malformed {
        id: None,
        message: e.to_string(),
    })?;
    let Value::Object(mut obj) = value else {
        return Err(EnvelopeError::Malformed {
            id: None,
            message: "envelope must be an object".into(),
        });
    };
    let id = obj.get("id").and_then(Value::as_str).map(str::to_owned);
    let malformed = |message: String| EnvelopeError::Malformed { id: id.clone(), message };

    match obj.get("v") {
        None => return Err(malformed("missing field `v`".into())),
        Some(v) if v.as_u64() == Some(PROTOCOL_VERSION) => {}
        Some(v) => {
            return Err(EnvelopeError::UnsupportedVersion {
                id: id.clone(),
                version: v.clone(),
            })
        }
    }
    let Some(id_str) = id.clone() else {
        return Err(malformed("missing or non-string field `id`".into()));
    };
    let type_name = match obj.get("type") {
        Some(Value::String(t)) => t.clone(),
        _ => return Err(malformed("missing or non-string field `type`".into())),
    };
    let body = match obj.remove("body") {
        None | Some(Value::Null) => Value::Object(Map::new()),
        Some(b) => b,
    };

    let typed = |t: &str| {
        let mut m = Map::new();
        m.insert("type".into(), Value::String(t.to_owned()));
        m.insert("body".into(), body.clone());
        Value::Object(m)
    };
    let message = if is_request_type(&type_name) {
        serde_json::from_value::<Request>(typed(&type_name)).map(Message::Request)
    } else if is_response_type(&type_name) {
        serde_json::from_value::<Response>(typed(&type_name)).map(Message::Response)
    } else {
        return Err(EnvelopeError::UnknownType { id, type_name });
    }
    .map_err(|e| malformed(format!("{type_name}: {e}")))?;
    Ok(Envelope { id: id_str, message })
}
