use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command as Process, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{decode_response, encode_request, trace_enabled, wire_category, Command, Request, Response};
use crate::backend::{BackendError, ProverBackend, SessionId, Snapshot, TheoryHandle};
use crate::error::{ErrorCategory, TheoryError};
use crate::prover::{CexResult, HammerConfig, HammerResult};
use crate::result::StepResult;
use crate::state::{parse_state, FactContext, ProofState};
use crate::step::ProofStep;
use crate::theory::{load_theory, source_digest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteOptions {
    /// Deadline for commands that carry no explicit budget.
    pub command_timeout_ms: u64,
    /// Extra client-side wait on top of each request's `timeout_ms`.
    pub grace_ms: u64,
    pub trace: bool,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        RemoteOptions { command_timeout_ms: 30_000, grace_ms: 250, trace: trace_enabled() }
    }
}

/// Client side of the protocol; implements [`ProverBackend`] over any byte stream.
pub struct RemoteBackend {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    options: RemoteOptions,
    contexts: HashMap<String, Arc<FactContext>>,
    poisoned: HashSet<String>,
    child: Option<Child>,
}

impl RemoteBackend {
    /// Wraps a connected stream pair. A reader thread feeds response lines
    /// to the client so waits can time out.
    pub fn from_streams(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        options: RemoteOptions,
    ) -> Self {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        RemoteBackend {
            writer: Box::new(writer),
            lines: rx,
            next_id: 0,
            options,
            contexts: HashMap::new(),
            poisoned: HashSet::new(),
            child: None,
        }
    }

    pub fn connect_tcp(addr: &str, options: RemoteOptions) -> Result<Self, BackendError> {
        let stream = TcpStream::connect(addr).map_err(|e| BackendError::Transport(format!("{addr}: {e}")))?;
        let reader = stream.try_clone().map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self::from_streams(reader, stream, options))
    }

    /// Launches `program args...` and speaks the protocol over its stdio.
    pub fn spawn(program: &str, args: &[String], options: RemoteOptions) -> Result<Self, BackendError> {
        let mut child = Process::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| BackendError::Transport(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut backend = Self::from_streams(stdout, stdin, options);
        backend.child = Some(child);
        Ok(backend)
    }

    /// `host:port` for TCP, or `exec:<program> [args...]` for a child process.
    pub fn connect(endpoint: &str, options: RemoteOptions) -> Result<Self, BackendError> {
        match endpoint.strip_prefix("exec:") {
            Some(cmdline) => {
                let mut parts = cmdline.split_whitespace().map(str::to_string);
                let program = parts.next().ok_or_else(|| BackendError::Transport("empty exec endpoint".into()))?;
                Self::spawn(&program, &parts.collect::<Vec<_>>(), options)
            }
            None => Self::connect_tcp(endpoint.strip_prefix("tcp://").unwrap_or(endpoint), options),
        }
    }

    pub fn is_poisoned(&self, session: &SessionId) -> bool {
        self.poisoned.contains(&session.0)
    }

    fn check_live(&self, session: &SessionId) -> Result<(), BackendError> {
        if self.is_poisoned(session) {
            return Err(BackendError::Poisoned(session.clone()));
        }
        Ok(())
    }

    /// Sends one request and waits for its response. Responses to earlier,
    /// abandoned requests are discarded. On timeout the session (if any)
    /// is poisoned.
    fn call(
        &mut self,
        cmd: Command,
        session: Option<&SessionId>,
        payload: Value,
        timeout_ms: u64,
    ) -> Result<Response, BackendError> {
        self.next_id += 1;
        let id = self.next_id;
        let req = Request { id, cmd, session: session.map(|s| s.0.clone()), payload, timeout_ms };
        let line = encode_request(&req);
        if self.options.trace {
            eprintln!("client > {line}");
        }
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .and_then(|_| self.writer.flush())
            .map_err(|e| BackendError::Transport(e.to_string()))?;

        let deadline = Instant::now() + Duration::from_millis(timeout_ms.saturating_add(self.options.grace_ms));
        loop {
            let wait = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(wait) {
                Ok(Ok(text)) => {
                    if self.options.trace {
                        eprintln!("client < {text}");
                    }
                    let resp =
                        decode_response(&text).map_err(|e| BackendError::Protocol { id: e.id, detail: e.detail })?;
                    if resp.id < id {
                        continue;
                    }
                    if resp.id > id {
                        return Err(BackendError::Protocol {
                            id: Some(resp.id),
                            detail: format!("response to unsent request (waiting for {id})"),
                        });
                    }
                    return Ok(resp);
                }
                Ok(Err(e)) => return Err(BackendError::Transport(e.to_string())),
                Err(RecvTimeoutError::Timeout) => {
                    if let Some(s) = session {
                        self.poisoned.insert(s.0.clone());
                    }
                    return Err(BackendError::Timeout(format!("{cmd:?} request {id} after {timeout_ms} ms")));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(BackendError::Transport("connection closed".into()));
                }
            }
        }
    }

    fn expect_ok(resp: Response) -> Result<Value, BackendError> {
        if let Some(err) = resp.error {
            return Err(match err.category.as_str() {
                wire_category::UNKNOWN_THEOREM => BackendError::Theory(TheoryError::UnknownTheorem(err.detail)),
                _ => BackendError::Server { category: err.category, detail: err.detail },
            });
        }
        Ok(resp.payload.unwrap_or(Value::Null))
    }

    fn field<'a>(payload: &'a Value, name: &str) -> Result<&'a Value, BackendError> {
        payload.get(name).ok_or_else(|| BackendError::Protocol { id: None, detail: format!("payload lacks `{name}`") })
    }

    fn parse_payload_state(&self, session: &SessionId, payload: &Value) -> Result<ProofState, BackendError> {
        let context =
            self.contexts.get(&session.0).cloned().ok_or_else(|| BackendError::UnknownSession(session.clone()))?;
        let text = Self::field(payload, "state")?.as_str().unwrap_or_default();
        let mut state =
            parse_state(text, context).map_err(|e| BackendError::Protocol { id: None, detail: e.to_string() })?;
        state.depth = Self::field(payload, "depth")?.as_u64().unwrap_or(0) as usize;
        Ok(state)
    }

    pub fn shutdown(&mut self) -> Result<(), BackendError> {
        let timeout = self.options.command_timeout_ms;
        let resp = self.call(Command::Shutdown, None, json!({}), timeout)?;
        Self::expect_ok(resp).map(|_| ())
    }
}

impl Drop for RemoteBackend {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = self.shutdown();
            let _ = child.wait();
        }
    }
}

impl ProverBackend for RemoteBackend {
    fn load_theory(&mut self, source: &str) -> Result<TheoryHandle, BackendError> {
        let theory = Arc::new(load_theory(source)?);
        let timeout = self.options.command_timeout_ms;
        let payload = Self::expect_ok(self.call(Command::LoadTheory, None, json!({"source": source}), timeout)?)?;
        let digest = Self::field(&payload, "digest")?.as_str().unwrap_or_default().to_string();
        if digest != source_digest(source) {
            return Err(BackendError::Protocol {
                id: None,
                detail: format!("server digest {digest} differs from local"),
            });
        }
        Ok(TheoryHandle { digest, theory })
    }

    fn start(&mut self, theory: &TheoryHandle, theorem: &str) -> Result<(SessionId, ProofState), BackendError> {
        let context =
            theory.theory.context_for(theorem).ok_or_else(|| TheoryError::UnknownTheorem(theorem.to_string()))?;
        let timeout = self.options.command_timeout_ms;
        let payload = Self::expect_ok(self.call(
            Command::Start,
            None,
            json!({"digest": theory.digest, "theorem": theorem}),
            timeout,
        )?)?;
        let session = SessionId(Self::field(&payload, "session")?.as_str().unwrap_or_default().to_string());
        self.contexts.insert(session.0.clone(), context);
        let state = self.parse_payload_state(&session, &payload)?;
        Ok((session, state))
    }

    fn apply(&mut self, session: &SessionId, step: &ProofStep, timeout: Duration) -> Result<StepResult, BackendError> {
        self.check_live(session)?;
        let timeout_ms = u64::try_from(timeout.as_millis()).unwrap_or(u64::MAX);
        let resp =
            self.call(Command::Apply, Some(session), json!({"step": step.text(), "full_state": true}), timeout_ms)?;
        if let Some(err) = &resp.error {
            if let Some(category) = ErrorCategory::parse(&err.category) {
                return Ok(StepResult::failure(category, err.detail.clone()));
            }
        }
        let payload = Self::expect_ok(resp)?;
        Ok(StepResult::Success(self.parse_payload_state(session, &payload)?))
    }

    fn state(&mut self, session: &SessionId) -> Result<ProofState, BackendError> {
        self.check_live(session)?;
        let timeout = self.options.command_timeout_ms;
        let payload = Self::expect_ok(self.call(Command::State, Some(session), json!({}), timeout)?)?;
        self.parse_payload_state(session, &payload)
    }

    fn clone_state(&mut self, session: &SessionId) -> Result<Snapshot, BackendError> {
        self.check_live(session)?;
        let timeout = self.options.command_timeout_ms;
        let payload = Self::expect_ok(self.call(Command::Clone, Some(session), json!({}), timeout)?)?;
        Ok(Snapshot(Self::field(&payload, "snapshot")?.as_str().unwrap_or_default().to_string()))
    }

    /// Restoring is the one command a poisoned session accepts; success clears the poison.
    fn restore(&mut self, session: &SessionId, snapshot: &Snapshot) -> Result<ProofState, BackendError> {
        let timeout = self.options.command_timeout_ms;
        let payload =
            Self::expect_ok(self.call(Command::Restore, Some(session), json!({"snapshot": snapshot.0}), timeout)?)?;
        let state = self.parse_payload_state(session, &payload)?;
        self.poisoned.remove(&session.0);
        Ok(state)
    }

    fn counterexample(&mut self, session: &SessionId, atom_limit: usize) -> Result<CexResult, BackendError> {
        self.check_live(session)?;
        let timeout = self.options.command_timeout_ms;
        let payload = Self::expect_ok(self.call(
            Command::Counterexample,
            Some(session),
            json!({"atom_limit": atom_limit}),
            timeout,
        )?)?;
        serde_json::from_value(payload).map_err(|e| BackendError::Protocol { id: None, detail: e.to_string() })
    }

    fn hammer(&mut self, session: &SessionId, config: &HammerConfig) -> Result<HammerResult, BackendError> {
        self.check_live(session)?;
        let payload = serde_json::to_value(config).expect("config serializes");
        let payload = Self::expect_ok(self.call(Command::Hammer, Some(session), payload, config.budget_ms)?)?;
        serde_json::from_value(payload).map_err(|e| BackendError::Protocol { id: None, detail: e.to_string() })
    }

    fn close(&mut self, session: &SessionId) -> Result<(), BackendError> {
        let timeout = self.options.command_timeout_ms;
        let resp = self.call(Command::Close, Some(session), json!({}), timeout)?;
        self.poisoned.remove(&session.0);
        self.contexts.remove(&session.0);
        Self::expect_ok(resp).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ProtocolServer, ServerOptions};
    use super::*;
    use crate::prover::ToyProver;
    use crate::step::parse_step;
    use std::os::unix::net::UnixStream;

    fn pair(options: ServerOptions) -> RemoteBackend {
        let (client, server) = UnixStream::pair().unwrap();
        let server_reader = server.try_clone().unwrap();
        std::thread::spawn(move || {
            let mut s = ProtocolServer::new(options);
            let _ = s.serve(BufReader::new(server_reader), server);
        });
        let reader = client.try_clone().unwrap();
        RemoteBackend::from_streams(reader, client, RemoteOptions { grace_ms: 100, ..Default::default() })
    }

    const SRC: &str = "theory t\naxiom f1: p\naxiom f2: p -> q\ntheorem g: p -> q & p\nend\n";

    #[test]
    fn matches_in_process_execution() {
        let mut remote = pair(ServerOptions::default());
        let mut local = ToyProver::new();
        let rh = remote.load_theory(SRC).unwrap();
        let lh = local.load_theory(SRC).unwrap();
        let (rs, r0) = remote.start(&rh, "g").unwrap();
        let (ls, l0) = local.start(&lh, "g").unwrap();
        assert_eq!(r0, l0);
        for text in ["split", "intro", "apply [f2]", "assumption", "apply [nothere]", "auto"] {
            let step = parse_step(text).unwrap();
            let a = remote.apply(&rs, &step, Duration::from_secs(2)).unwrap();
            let b = local.apply(&ls, &step, Duration::from_secs(2)).unwrap();
            assert_eq!(a.canonical(), b.canonical(), "step {text}");
            if let (StepResult::Success(x), StepResult::Success(y)) = (&a, &b) {
                assert_eq!(x, y);
            }
        }
        assert_eq!(remote.counterexample(&rs, 16).unwrap(), local.counterexample(&ls, 16).unwrap());
    }

    #[test]
    fn clone_restore_and_hammer() {
        let mut remote = pair(ServerOptions::default());
        let h = remote.load_theory(SRC).unwrap();
        let (s, start) = remote.start(&h, "g").unwrap();
        let snap = remote.clone_state(&s).unwrap();
        remote.apply(&s, &parse_step("intro").unwrap(), Duration::from_secs(1)).unwrap();
        assert_eq!(remote.restore(&s, &snap).unwrap(), start);
        let deep = HammerConfig { max_depth: 5, ..HammerConfig::default() };
        assert!(matches!(remote.hammer(&s, &deep).unwrap(), HammerResult::Found { .. }));
        remote.close(&s).unwrap();
        assert!(matches!(remote.state(&s), Err(BackendError::Server { .. } | BackendError::UnknownSession(_))));
    }

    #[test]
    fn slow_server_poisons_until_restore() {
        let mut remote = pair(ServerOptions { inject_delay_ms: 400, trace: false });
        let h = remote.load_theory(SRC).unwrap();
        let (s, _) = remote.start(&h, "g").unwrap();
        let snap = remote.clone_state(&s).unwrap();
        let step = parse_step("intro").unwrap();
        assert!(matches!(remote.apply(&s, &step, Duration::from_millis(10)), Err(BackendError::Timeout(_))));
        assert!(remote.is_poisoned(&s));
        assert!(matches!(remote.apply(&s, &step, Duration::from_secs(5)), Err(BackendError::Poisoned(_))));
        // the late answer to the timed-out apply arrives first and is skipped
        remote.restore(&s, &snap).unwrap();
        assert!(!remote.is_poisoned(&s));
        assert!(remote.apply(&s, &step, Duration::from_secs(5)).unwrap().is_success());
    }

    #[test]
    fn malformed_response_is_a_protocol_error() {
        let (client, server) = UnixStream::pair().unwrap();
        let server_reader = server.try_clone().unwrap();
        std::thread::spawn(move || {
            let mut lines = BufReader::new(server_reader).lines();
            let mut out = server;
            while let Some(Ok(_)) = lines.next() {
                writeln!(out, "{{\"id\":1,\"ok\":true}}").unwrap();
            }
        });
        let reader = client.try_clone().unwrap();
        let mut remote = RemoteBackend::from_streams(reader, client, RemoteOptions::default());
        match remote.load_theory(SRC) {
            Err(BackendError::Protocol { id, .. }) => assert_eq!(id, Some(1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lost_connection_is_a_transport_error() {
        let (client, server) = UnixStream::pair().unwrap();
        drop(server);
        let reader = client.try_clone().unwrap();
        let mut remote = RemoteBackend::from_streams(reader, client, RemoteOptions::default());
        assert!(matches!(remote.load_theory(SRC), Err(BackendError::Transport(_))));
    }
}
