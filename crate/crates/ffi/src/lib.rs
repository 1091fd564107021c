//! C ABI over the recourse service.
//!
//! A snapshot is loaded once from a run directory and then queried with
//! JSON requests of the same shape the HTTP `/v1/recourse` endpoint takes.
//! Every function returns an `RC_*` status code; on failure a message is
//! available from [`rc_last_error`] on the calling thread. Strings handed
//! out by the library must be released with [`rc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use recourse_core::service::{recourse, ApiError, RecourseRequest, Snapshot};
use recourse_core::Error;

pub const RC_OK: i32 = 0;
/// A required pointer argument was null.
pub const RC_NULL_ARGUMENT: i32 = 1;
/// A string argument was not valid UTF-8.
pub const RC_INVALID_UTF8: i32 = 2;
/// The request was malformed or named unknown features.
pub const RC_BAD_REQUEST: i32 = 3;
/// The request was well-formed but no feasible candidate exists.
pub const RC_UNPROCESSABLE: i32 = 4;
/// Reading artifacts from disk failed.
pub const RC_IO: i32 = 5;
/// Artifacts were present but unusable (corrupt, mismatched schema).
pub const RC_INVALID_ARTIFACT: i32 = 6;
pub const RC_INTERNAL: i32 = 7;
/// A Rust panic was caught at the boundary.
pub const RC_PANIC: i32 = 8;

/// Loaded artifacts. Opaque to C; safe to share between threads for
/// concurrent [`rc_recourse_json`] calls.
pub struct RcSnapshot(Snapshot);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(i32, String);

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        let code = match e {
            ApiError::BadRequest(_) => RC_BAD_REQUEST,
            ApiError::Unprocessable(_) => RC_UNPROCESSABLE,
            ApiError::Internal(_) => RC_INTERNAL,
        };
        Failure(code, e.to_string())
    }
}

fn load_failure(e: Error) -> Failure {
    let code = match e {
        Error::Io { .. } => RC_IO,
        _ => RC_INVALID_ARTIFACT,
    };
    Failure(code, e.to_string())
}

/// Runs `body`, translating failures and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RC_OK
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RC_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(RC_NULL_ARGUMENT, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(RC_INVALID_UTF8, format!("`{name}` is not valid UTF-8")))
}

fn hand_out(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(RC_INTERNAL, "output contains a NUL byte".into()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string(v).map_err(|e| Failure(RC_INTERNAL, e.to_string()))
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn rc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn rc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a run directory written by the `recourse` CLI.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_snapshot_load_dir(dir: *const c_char, out: *mut *mut RcSnapshot) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(Failure(RC_NULL_ARGUMENT, "`out` is null".into()));
        }
        *out = ptr::null_mut();
        let dir = str_arg(dir, "dir")?;
        let snap = Snapshot::load_dir(Path::new(dir)).map_err(load_failure)?;
        *out = Box::into_raw(Box::new(RcSnapshot(snap)));
        Ok(())
    })
}

/// # Safety
/// `snap` must come from [`rc_snapshot_load_dir`] and not be used again.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rc_snapshot_free(snap: *mut RcSnapshot) {
    if !snap.is_null() {
        drop(Box::from_raw(snap));
    }
}

/// Feature schema as JSON, identical to the HTTP `/v1/schema` body.
///
/// # Safety
/// `snap` must be a live snapshot and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_schema_json(snap: *const RcSnapshot, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let (snap, out) = handles(snap, out)?;
        hand_out(json(&snap.0.schema_view())?, out)
    })
}

/// Samples recourse for one instance. `request` is the JSON body accepted
/// by `/v1/recourse`; the response JSON is written to `out`.
///
/// # Safety
/// `snap` must be a live snapshot, `request` a NUL-terminated string and
/// `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_recourse_json(
    snap: *const RcSnapshot,
    request: *const c_char,
    out: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let (snap, out) = handles(snap, out)?;
        let body = str_arg(request, "request")?;
        let req: RecourseRequest =
            serde_json::from_str(body).map_err(|e| Failure(RC_BAD_REQUEST, format!("invalid request: {e}")))?;
        let resp = recourse(&snap.0, &req)?;
        hand_out(json(&resp)?, out)
    })
}

/// # Safety
/// `s` must come from this library and not be used again. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn handles<'a>(
    snap: *const RcSnapshot,
    out: *mut *mut c_char,
) -> Result<(&'a RcSnapshot, *mut *mut c_char), Failure> {
    if out.is_null() {
        return Err(Failure(RC_NULL_ARGUMENT, "`out` is null".into()));
    }
    *out = ptr::null_mut();
    if snap.is_null() {
        return Err(Failure(RC_NULL_ARGUMENT, "`snap` is null".into()));
    }
    Ok((&*snap, out))
}
