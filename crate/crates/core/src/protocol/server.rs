use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::time::Duration;

use serde_json::{json, Value};

use super::{decode_request, encode_response, trace_enabled, wire_category, Command, Request, Response};
use crate::backend::{BackendError, ProverBackend, SessionId, Snapshot, TheoryHandle};
use crate::error::TheoryError;
use crate::prover::{HammerConfig, ToyProver, DEFAULT_ATOM_LIMIT};
use crate::result::StepResult;
use crate::state::ProofState;
use crate::step::parse_step;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServerOptions {
    /// Sleep this long before answering each `apply`; exercises client timeouts.
    pub inject_delay_ms: u64,
    pub trace: bool,
}

impl ServerOptions {
    pub fn from_env() -> Self {
        ServerOptions { inject_delay_ms: 0, trace: trace_enabled() }
    }
}

/// Reference server: the toy prover behind the wire protocol.
pub struct ProtocolServer {
    prover: ToyProver,
    handles: HashMap<String, TheoryHandle>,
    options: ServerOptions,
}

fn state_payload(state: &ProofState) -> Value {
    json!({"state": state.render(), "key": state.key(), "depth": state.depth, "subgoals": state.subgoals.len()})
}

fn backend_failure(id: u64, err: BackendError) -> Response {
    let category = match &err {
        BackendError::UnknownSession(_) => wire_category::UNKNOWN_SESSION,
        BackendError::UnknownSnapshot(_) => wire_category::UNKNOWN_SNAPSHOT,
        BackendError::Theory(TheoryError::UnknownTheorem(_)) => wire_category::UNKNOWN_THEOREM,
        BackendError::Theory(_) => wire_category::THEORY_ERROR,
        _ => wire_category::INVALID_REQUEST,
    };
    Response::failure(id, category, err.to_string())
}

impl ProtocolServer {
    pub fn new(options: ServerOptions) -> Self {
        ProtocolServer { prover: ToyProver::new(), handles: HashMap::new(), options }
    }

    /// Number of theory sources actually parsed; repeated loads hit the cache.
    pub fn theory_loads(&self) -> usize {
        self.prover.theory_loads()
    }

    fn session(req: &Request) -> Result<SessionId, Response> {
        req.session
            .clone()
            .map(SessionId)
            .ok_or_else(|| Response::failure(req.id, wire_category::INVALID_REQUEST, "missing session"))
    }

    fn str_field<'a>(req: &'a Request, field: &str) -> Result<&'a str, Response> {
        req.payload.get(field).and_then(Value::as_str).ok_or_else(|| {
            Response::failure(req.id, wire_category::INVALID_REQUEST, format!("payload needs string field `{field}`"))
        })
    }

    /// Answers one request. Never panics on bad input.
    pub fn handle(&mut self, req: &Request) -> Response {
        match self.dispatch(req) {
            Ok(resp) | Err(resp) => resp,
        }
    }

    fn dispatch(&mut self, req: &Request) -> Result<Response, Response> {
        let id = req.id;
        let budget = Duration::from_millis(req.timeout_ms);
        let resp = match req.cmd {
            Command::Init => {
                Response::success(id, json!({"server": "stepwise-toy", "version": env!("CARGO_PKG_VERSION")}))
            }
            Command::LoadTheory => {
                let source = Self::str_field(req, "source")?;
                match self.prover.load_theory(source) {
                    Ok(handle) => {
                        let theorems: Vec<&str> = handle.theory.provable().map(|e| e.id.as_str()).collect();
                        let payload =
                            json!({"digest": handle.digest, "name": handle.theory.name, "theorems": theorems});
                        self.handles.insert(handle.digest.clone(), handle);
                        Response::success(id, payload)
                    }
                    Err(e) => backend_failure(id, e),
                }
            }
            Command::Start => {
                let digest = Self::str_field(req, "digest")?;
                let theorem = Self::str_field(req, "theorem")?;
                let Some(handle) = self.handles.get(digest).cloned() else {
                    return Err(Response::failure(id, wire_category::UNKNOWN_THEORY, format!("no theory {digest}")));
                };
                match self.prover.start(&handle, theorem) {
                    Ok((session, state)) => {
                        let mut payload = state_payload(&state);
                        payload["session"] = json!(session.0);
                        Response::success(id, payload)
                    }
                    Err(e) => backend_failure(id, e),
                }
            }
            Command::Apply => {
                let session = Self::session(req)?;
                let text = Self::str_field(req, "step")?;
                let full = req.payload.get("full_state").and_then(Value::as_bool).unwrap_or(false);
                if self.options.inject_delay_ms > 0 {
                    std::thread::sleep(Duration::from_millis(self.options.inject_delay_ms));
                }
                let step = match parse_step(text) {
                    Ok(step) => step,
                    Err(e) => return Ok(Response::failure(id, "parse_error", e.to_string())),
                };
                match self.prover.apply(&session, &step, budget) {
                    Ok(StepResult::Success(next)) => {
                        let mut payload =
                            json!({"subgoals": next.subgoals.len(), "key": next.key(), "depth": next.depth});
                        if full {
                            payload["state"] = json!(next.render());
                        }
                        Response::success(id, payload)
                    }
                    Ok(StepResult::Failure { category, detail }) => Response::failure(id, category.as_str(), detail),
                    Err(e) => backend_failure(id, e),
                }
            }
            Command::State => {
                let session = Self::session(req)?;
                match self.prover.state(&session) {
                    Ok(state) => Response::success(id, state_payload(&state)),
                    Err(e) => backend_failure(id, e),
                }
            }
            Command::Clone => {
                let session = Self::session(req)?;
                match self.prover.clone_state(&session) {
                    Ok(snap) => Response::success(id, json!({"snapshot": snap.0})),
                    Err(e) => backend_failure(id, e),
                }
            }
            Command::Restore => {
                let session = Self::session(req)?;
                let snap = Snapshot(Self::str_field(req, "snapshot")?.to_string());
                match self.prover.restore(&session, &snap) {
                    Ok(state) => Response::success(id, state_payload(&state)),
                    Err(e) => backend_failure(id, e),
                }
            }
            Command::Counterexample => {
                let session = Self::session(req)?;
                let limit =
                    req.payload.get("atom_limit").and_then(Value::as_u64).map_or(DEFAULT_ATOM_LIMIT, |n| n as usize);
                match self.prover.counterexample(&session, limit) {
                    Ok(result) => Response::success(id, serde_json::to_value(result).expect("serializes")),
                    Err(e) => backend_failure(id, e),
                }
            }
            Command::Hammer => {
                let session = Self::session(req)?;
                let config: HammerConfig = serde_json::from_value(req.payload.clone()).map_err(|e| {
                    Response::failure(id, wire_category::INVALID_REQUEST, format!("bad hammer config: {e}"))
                })?;
                match self.prover.hammer(&session, &config) {
                    Ok(result) => Response::success(id, serde_json::to_value(result).expect("serializes")),
                    Err(e) => backend_failure(id, e),
                }
            }
            Command::Close => {
                let session = Self::session(req)?;
                match self.prover.close(&session) {
                    Ok(()) => Response::success(id, json!({})),
                    Err(e) => backend_failure(id, e),
                }
            }
            Command::Shutdown => Response::success(id, json!({})),
            Command::Deps => Response::failure(id, wire_category::UNSUPPORTED, "`deps` is reserved"),
        };
        Ok(resp)
    }

    /// Serves one connection until EOF or `shutdown`.
    pub fn serve(&mut self, reader: impl BufRead, mut writer: impl Write) -> std::io::Result<()> {
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if self.options.trace {
                eprintln!("server < {line}");
            }
            let (resp, stop) = match decode_request(&line) {
                Ok(req) => (self.handle(&req), req.cmd == Command::Shutdown),
                Err(e) => (Response::failure(e.id.unwrap_or(0), wire_category::INVALID_REQUEST, e.detail), false),
            };
            let out = encode_response(&resp);
            if self.options.trace {
                eprintln!("server > {out}");
            }
            writer.write_all(out.as_bytes())?;
            writer.write_all(b"\n")?;
            writer.flush()?;
            if stop {
                break;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(id: u64, cmd: Command, session: Option<&str>, payload: Value) -> Request {
        Request { id, cmd, session: session.map(str::to_string), payload, timeout_ms: 1000 }
    }

    #[test]
    fn session_lifecycle() {
        let mut server = ProtocolServer::new(ServerOptions::default());
        let src = "theory t\naxiom f: p -> q\ntheorem g: p -> q\nend\n";
        let loaded = server.handle(&req(1, Command::LoadTheory, None, json!({"source": src})));
        let digest = loaded.payload.unwrap()["digest"].as_str().unwrap().to_string();
        server.handle(&req(2, Command::LoadTheory, None, json!({"source": src})));
        assert_eq!(server.theory_loads(), 1);

        let started = server.handle(&req(3, Command::Start, None, json!({"digest": digest, "theorem": "g"})));
        let session = started.payload.unwrap()["session"].as_str().unwrap().to_string();
        let applied = server.handle(&req(4, Command::Apply, Some(&session), json!({"step": "intro"})));
        let payload = applied.payload.unwrap();
        assert_eq!(payload["subgoals"], 1);
        assert!(payload.get("state").is_none());

        let failed = server.handle(&req(5, Command::Apply, Some(&session), json!({"step": "split"})));
        assert!(!failed.ok);
        assert_eq!(failed.error.unwrap().category, "tactic_failure");

        let missing = server.handle(&req(6, Command::Apply, Some("nope"), json!({"step": "intro"})));
        assert_eq!(missing.error.unwrap().category, wire_category::UNKNOWN_SESSION);
        let bad = server.handle(&req(7, Command::Start, None, json!({"digest": digest, "theorem": "zz"})));
        assert_eq!(bad.error.unwrap().category, wire_category::UNKNOWN_THEOREM);
        let deps = server.handle(&req(8, Command::Deps, None, json!({})));
        assert_eq!(deps.error.unwrap().category, wire_category::UNSUPPORTED);
    }

    #[test]
    fn malformed_lines_get_error_responses() {
        let mut server = ProtocolServer::new(ServerOptions::default());
        let input = "garbage\n{\"id\":9,\"cmd\":\"nonsense\",\"timeout_ms\":1}\n{\"id\":10,\"cmd\":\"shutdown\",\"timeout_ms\":1}\n{\"id\":11,\"cmd\":\"init\",\"timeout_ms\":1}\n";
        let mut out = Vec::new();
        server.serve(input.as_bytes(), &mut out).unwrap();
        let lines: Vec<Response> =
            String::from_utf8(out).unwrap().lines().map(|l| super::super::decode_response(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].id, 0);
        assert_eq!(lines[1].id, 9);
        assert_eq!(lines[1].error.as_ref().unwrap().category, wire_category::INVALID_REQUEST);
        assert!(lines[2].ok);
    }
}
