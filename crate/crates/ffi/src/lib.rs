//! C ABI over the toy prover and the proof search engine.
//!
//! Every object crosses the boundary as an opaque pointer owned by the
//! caller and released with its `_free` function. Functions return a
//! [`StepwiseStatus`]; the message for the most recent failure on the
//! calling thread is available from [`stepwise_last_error`]. Strings handed
//! out by the library are released with [`stepwise_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Duration;

use stepwise::engine::prove_theorem;
use stepwise::generator::{GeneratorConfig, MockGenerator};
use stepwise::hammer::HammerFallbackConfig;
use stepwise::prover::ToyProver;
use stepwise::search::SearchConfig;
use stepwise::{BackendError, ProverBackend, SessionId, StepResult, TheoryHandle};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepwiseStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Theory source or proof step text did not parse.
    Parse = 3,
    /// The theorem or session does not exist.
    NotFound = 4,
    /// The step ran and was rejected; the session is unchanged.
    StepFailed = 5,
    /// Any other prover or search error.
    Backend = 6,
    /// A panic was caught at the boundary.
    Panic = 7,
}

/// An in-process prover. Not thread-safe; use one per thread.
pub struct StepwiseProver {
    backend: ToyProver,
}

/// A theory loaded into a prover.
pub struct StepwiseTheory {
    handle: TheoryHandle,
}

/// An open proof session on one theorem.
pub struct StepwiseSession {
    id: SessionId,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

struct Fail(StepwiseStatus, String);

impl From<BackendError> for Fail {
    fn from(e: BackendError) -> Self {
        let status = match &e {
            BackendError::Theory(stepwise::TheoryError::Syntax { .. }) => StepwiseStatus::Parse,
            BackendError::Theory(stepwise::TheoryError::UnknownTheorem(_)) | BackendError::UnknownSession(_) => {
                StepwiseStatus::NotFound
            }
            _ => StepwiseStatus::Backend,
        };
        Fail(status, e.to_string())
    }
}

/// Runs `f`, records any failure message and turns panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> StepwiseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StepwiseStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside stepwise");
            StepwiseStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(StepwiseStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail(StepwiseStatus::InvalidUtf8, e.to_string()))
}

unsafe fn ref_arg<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(StepwiseStatus::NullArgument, "null handle".into()))
}

unsafe fn mut_arg<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(StepwiseStatus::NullArgument, "null handle".into()))
}

unsafe fn out_arg<T>(p: *mut T, value: T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail(StepwiseStatus::NullArgument, "null output pointer".into()));
    }
    p.write(value);
    Ok(())
}

fn c_string(text: String) -> *mut c_char {
    CString::new(text.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn stepwise_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn stepwise_prover_new() -> *mut StepwiseProver {
    Box::into_raw(Box::new(StepwiseProver { backend: ToyProver::new() }))
}

/// # Safety
/// `prover` is null or came from [`stepwise_prover_new`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn stepwise_prover_free(prover: *mut StepwiseProver) {
    if !prover.is_null() {
        drop(Box::from_raw(prover));
    }
}

/// Parses and registers a theory.
///
/// # Safety
/// Pointers are valid; `source` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn stepwise_load_theory(
    prover: *mut StepwiseProver,
    source: *const c_char,
    out_theory: *mut *mut StepwiseTheory,
) -> StepwiseStatus {
    guard(|| {
        let prover = mut_arg(prover)?;
        let handle = prover.backend.load_theory(str_arg(source)?)?;
        out_arg(out_theory, Box::into_raw(Box::new(StepwiseTheory { handle })))
    })
}

/// # Safety
/// `theory` is null or came from [`stepwise_load_theory`].
#[no_mangle]
pub unsafe extern "C" fn stepwise_theory_free(theory: *mut StepwiseTheory) {
    if !theory.is_null() {
        drop(Box::from_raw(theory));
    }
}

/// Opens a session on `theorem`.
///
/// # Safety
/// Pointers are valid; `theory` was loaded into `prover`.
#[no_mangle]
pub unsafe extern "C" fn stepwise_start(
    prover: *mut StepwiseProver,
    theory: *const StepwiseTheory,
    theorem: *const c_char,
    out_session: *mut *mut StepwiseSession,
) -> StepwiseStatus {
    guard(|| {
        let prover = mut_arg(prover)?;
        let theory = ref_arg(theory)?;
        let (id, _) = prover.backend.start(&theory.handle, str_arg(theorem)?)?;
        out_arg(out_session, Box::into_raw(Box::new(StepwiseSession { id })))
    })
}

/// Applies one step such as `apply [f1]`. On success `*out_complete` says
/// whether the proof is finished. A rejected step returns
/// `STEPWISE_STATUS_STEP_FAILED` and leaves the session as it was.
///
/// # Safety
/// Pointers are valid; `session` belongs to `prover`.
#[no_mangle]
pub unsafe extern "C" fn stepwise_apply(
    prover: *mut StepwiseProver,
    session: *const StepwiseSession,
    step: *const c_char,
    timeout_ms: u64,
    out_complete: *mut bool,
) -> StepwiseStatus {
    guard(|| {
        let prover = mut_arg(prover)?;
        let session = ref_arg(session)?;
        let step = stepwise::parse_step(str_arg(step)?).map_err(|e| Fail(StepwiseStatus::Parse, e.to_string()))?;
        match prover.backend.apply(&session.id, &step, Duration::from_millis(timeout_ms))? {
            StepResult::Success(state) => out_arg(out_complete, state.is_complete()),
            StepResult::Failure { category, detail } => {
                Err(Fail(StepwiseStatus::StepFailed, format!("{category}: {detail}")))
            }
        }
    })
}

/// Renders the session's current goals. Free the result with
/// [`stepwise_string_free`].
///
/// # Safety
/// Pointers are valid; `session` belongs to `prover`.
#[no_mangle]
pub unsafe extern "C" fn stepwise_state(
    prover: *mut StepwiseProver,
    session: *const StepwiseSession,
    out_text: *mut *mut c_char,
) -> StepwiseStatus {
    guard(|| {
        let prover = mut_arg(prover)?;
        let session = ref_arg(session)?;
        let state = prover.backend.state(&session.id)?;
        out_arg(out_text, c_string(state.render()))
    })
}

/// Closes the session inside the prover and frees the handle. Either
/// pointer may be null.
///
/// # Safety
/// `session` is null or came from [`stepwise_start`] on `prover`.
#[no_mangle]
pub unsafe extern "C" fn stepwise_session_free(prover: *mut StepwiseProver, session: *mut StepwiseSession) {
    if session.is_null() {
        return;
    }
    let session = Box::from_raw(session);
    if let Some(prover) = prover.as_mut() {
        let _ = catch_unwind(AssertUnwindSafe(|| prover.backend.close(&session.id)));
    }
}

/// Runs the full search with the built-in mock generator and default
/// settings. Writes the theorem report as JSON; a failed search is still
/// `STEPWISE_STATUS_OK` with `"outcome": "failed"` in the report.
///
/// # Safety
/// Pointers are valid; `theory` was loaded into `prover`.
#[no_mangle]
pub unsafe extern "C" fn stepwise_prove(
    prover: *mut StepwiseProver,
    theory: *const StepwiseTheory,
    theorem: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> StepwiseStatus {
    guard(|| {
        let prover = mut_arg(prover)?;
        let theory = ref_arg(theory)?;
        let theorem = str_arg(theorem)?;
        let generator = MockGenerator::new(GeneratorConfig { seed, ..Default::default() });
        let report = prove_theorem(
            &mut prover.backend,
            &theory.handle,
            theorem,
            &generator,
            &SearchConfig::default(),
            &HammerFallbackConfig::default(),
        )
        .map_err(|e| Fail(StepwiseStatus::Backend, e.to_string()))?;
        let json = serde_json::to_string(&report).map_err(|e| Fail(StepwiseStatus::Backend, e.to_string()))?;
        out_arg(out_json, c_string(json))
    })
}

/// # Safety
/// `text` is null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn stepwise_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}
