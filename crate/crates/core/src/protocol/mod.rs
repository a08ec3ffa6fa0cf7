//! Newline-delimited JSON protocol between the search engine and a prover.
//!
//! Every request is one line:
//!
//! ```text
//! {"id":3,"cmd":"apply","session":"s1","payload":{"step":"intro","full_state":true},"timeout_ms":1000}
//! ```
//!
//! and every response echoes the id with either a payload or an error:
//!
//! ```text
//! {"id":3,"ok":true,"payload":{"subgoals":1,"key":"p ⊢ q","depth":1,"state":"goal (1 subgoal):\n 1. p ⊢ q"}}
//! {"id":4,"ok":false,"error":{"category":"tactic_failure","detail":"goal is not a conjunction"}}
//! ```
//!
//! Error categories are the step-failure categories plus the wire-level
//! ones in [`wire_category`].

mod client;
mod server;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use client::{RemoteBackend, RemoteOptions};
pub use server::{ProtocolServer, ServerOptions};

/// Environment variable that turns on frame tracing to stderr.
pub const TRACE_ENV: &str = "STEPWISE_PROTOCOL_TRACE";

pub fn trace_enabled() -> bool {
    std::env::var(TRACE_ENV).is_ok_and(|v| v == "1")
}

/// Error categories that only exist on the wire.
pub mod wire_category {
    pub const INVALID_REQUEST: &str = "invalid_request";
    pub const UNKNOWN_SESSION: &str = "unknown_session";
    pub const UNKNOWN_SNAPSHOT: &str = "unknown_snapshot";
    pub const UNKNOWN_THEORY: &str = "unknown_theory";
    pub const UNKNOWN_THEOREM: &str = "unknown_theorem";
    pub const THEORY_ERROR: &str = "theory_error";
    pub const UNSUPPORTED: &str = "unsupported";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Init,
    LoadTheory,
    Start,
    Apply,
    State,
    Clone,
    Restore,
    Counterexample,
    Hammer,
    Close,
    Shutdown,
    /// Reserved for dependency queries; no server implements it yet.
    Deps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub cmd: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(default)]
    pub payload: Value,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub category: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

impl Response {
    pub fn success(id: u64, payload: Value) -> Self {
        Response { id, ok: true, payload: Some(payload), error: None }
    }

    pub fn failure(id: u64, category: impl Into<String>, detail: impl Into<String>) -> Self {
        Response {
            id,
            ok: false,
            payload: None,
            error: Some(WireError { category: category.into(), detail: detail.into() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed frame (id {id:?}): {detail}")]
pub struct CodecError {
    /// The frame's id, when one could be read.
    pub id: Option<u64>,
    pub detail: String,
}

/// One line of JSON. serde_json escapes newlines inside strings, so the
/// output never contains a raw newline.
pub fn encode_request(req: &Request) -> String {
    serde_json::to_string(req).expect("requests serialize")
}

pub fn encode_response(resp: &Response) -> String {
    serde_json::to_string(resp).expect("responses serialize")
}

fn frame_id(line: &str) -> Option<u64> {
    serde_json::from_str::<Value>(line).ok()?.get("id")?.as_u64()
}

pub fn decode_request(line: &str) -> Result<Request, CodecError> {
    serde_json::from_str(line).map_err(|e| CodecError { id: frame_id(line), detail: e.to_string() })
}

/// Parses a response and checks that exactly one of payload/error is set,
/// consistently with `ok`.
pub fn decode_response(line: &str) -> Result<Response, CodecError> {
    let resp: Response =
        serde_json::from_str(line).map_err(|e| CodecError { id: frame_id(line), detail: e.to_string() })?;
    let consistent = matches!((resp.ok, &resp.payload, &resp.error), (true, Some(_), None) | (false, None, Some(_)));
    if !consistent {
        return Err(CodecError {
            id: Some(resp.id),
            detail: "response must carry exactly one of payload (ok) or error (not ok)".into(),
        });
    }
    Ok(resp)
}
