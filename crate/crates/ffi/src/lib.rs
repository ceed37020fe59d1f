//! C ABI over `gpnode`: LoG-GP trees behind opaque handles, the ARD-SE
//! kernel, and the datagram codec.
//!
//! Every fallible function returns a [`GpStatus`]. On failure a message is
//! kept per thread; read it with [`gp_last_error_message`]. A tree handle is
//! single-writer: never use one handle from two threads at once. Distinct
//! handles are independent.
//!
//! The header `include/gpnode.h` is generated by the build script.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use gpnode::gp::{kernel_eval, Hyperparameters};
use gpnode::protocol::{self, Message};
use gpnode::tree::{LogGpTree, TreeConfig, DEFAULT_OVERLAP_RATIO};
use gpnode::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    Ok = 0,
    InvalidArgument = 1,
    InvalidConfig = 2,
    Numerical = 3,
    Internal = 4,
    MalformedReply = 5,
    LockedState = 6,
    PortOccupied = 7,
    NotFound = 8,
    InvalidState = 9,
    Io = 10,
    NullPointer = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&Error> for GpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => GpStatus::InvalidArgument,
            Error::InvalidConfig(_) => GpStatus::InvalidConfig,
            Error::Numerical { .. } => GpStatus::Numerical,
            Error::Internal(_) => GpStatus::Internal,
            Error::MalformedReply(_) => GpStatus::MalformedReply,
            Error::Locked { .. } => GpStatus::LockedState,
            Error::PortOccupied { .. } => GpStatus::PortOccupied,
            Error::NotFound { .. } => GpStatus::NotFound,
            Error::InvalidState(_) => GpStatus::InvalidState,
            Error::Io(_) => GpStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpMessageClass {
    Command = 0,
    Sample = 1,
    Malformed = 2,
}

/// Tree settings. `length_scales` points at `d_in` values. An
/// `overlap_ratio` of 0 selects the default (0.1).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GpTreeParams {
    pub sigma_f: f64,
    pub length_scales: *const f64,
    pub d_in: usize,
    pub sigma_n: f64,
    pub d_out: usize,
    pub max_leaves: usize,
    pub max_local_data: usize,
    pub overlap_ratio: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GpInsertOutcome {
    pub stored: bool,
    pub split_occurred: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GpTreeStats {
    pub leaves: usize,
    pub stored_points: usize,
    pub depth: usize,
}

/// Opaque tree handle.
pub struct GpTree {
    inner: LogGpTree,
}

struct Fail {
    status: GpStatus,
    message: String,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail {
            status: GpStatus::from(&e),
            message: e.to_string(),
        }
    }
}

impl Fail {
    fn null(what: &str) -> Self {
        Fail {
            status: GpStatus::NullPointer,
            message: format!("{what} is NULL"),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn run(f: impl FnOnce() -> Result<(), Fail>) -> GpStatus {
    let (status, message) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return GpStatus::Ok,
        Ok(Err(fail)) => (fail.status, fail.message),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            (GpStatus::Panic, format!("panic: {msg}"))
        }
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
    status
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn tree_mut<'a>(tree: *mut GpTree) -> Result<&'a mut GpTree, Fail> {
    tree.as_mut().ok_or_else(|| Fail::null("tree"))
}

/// Copies `bytes` into `buf` (capacity `cap`), reporting the full size in
/// `*written`. Fails with `BUFFER_TOO_SMALL` when `cap` is short.
unsafe fn emit(bytes: &[u8], buf: *mut u8, cap: usize, written: *mut usize) -> Result<(), Fail> {
    let written = written.as_mut().ok_or_else(|| Fail::null("written"))?;
    *written = bytes.len();
    if cap < bytes.len() {
        return Err(Fail {
            status: GpStatus::BufferTooSmall,
            message: format!("buffer holds {cap} bytes, {} needed", bytes.len()),
        });
    }
    output(buf, bytes.len(), "buf")?.copy_from_slice(bytes);
    Ok(())
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `cap` bytes, into `buf`. Returns the size needed including
/// the terminator; pass `buf = NULL` to query it.
///
/// # Safety
/// `buf` must be NULL or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gp_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn gp_status_name(status: GpStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        GpStatus::Ok => b"ok\0",
        GpStatus::InvalidArgument => b"invalid-argument\0",
        GpStatus::InvalidConfig => b"invalid-config\0",
        GpStatus::Numerical => b"numerical\0",
        GpStatus::Internal => b"internal\0",
        GpStatus::MalformedReply => b"malformed-reply\0",
        GpStatus::LockedState => b"locked-state\0",
        GpStatus::PortOccupied => b"port-occupied\0",
        GpStatus::NotFound => b"not-found\0",
        GpStatus::InvalidState => b"invalid-state\0",
        GpStatus::Io => b"io\0",
        GpStatus::NullPointer => b"null-pointer\0",
        GpStatus::BufferTooSmall => b"buffer-too-small\0",
        GpStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}

/// Creates an empty tree. On success `*out` owns a handle to be released
/// with [`gp_tree_free`]; on failure `*out` is set to NULL.
///
/// # Safety
/// `params` must point to a valid `GpTreeParams` whose `length_scales`
/// holds `d_in` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_tree_new(params: *const GpTreeParams, out: *mut *mut GpTree) -> GpStatus {
    run(|| {
        let out = out.as_mut().ok_or_else(|| Fail::null("out"))?;
        *out = ptr::null_mut();
        let p = params.as_ref().ok_or_else(|| Fail::null("params"))?;
        let ls = input(p.length_scales, p.d_in, "length_scales")?.to_vec();
        let hp = Hyperparameters::new(p.sigma_f, ls, p.sigma_n, p.d_out)?;
        let ratio = if p.overlap_ratio == 0.0 {
            DEFAULT_OVERLAP_RATIO
        } else {
            p.overlap_ratio
        };
        let cfg = TreeConfig::new(hp, p.max_leaves, p.max_local_data)
            .with_overlap_ratio(ratio)
            .with_seed(p.seed);
        let inner = LogGpTree::new(cfg)?;
        *out = Box::into_raw(Box::new(GpTree { inner }));
        Ok(())
    })
}

/// Releases a tree. NULL is ignored.
///
/// # Safety
/// `tree` must be NULL or a handle from [`gp_tree_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gp_tree_free(tree: *mut GpTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Inserts one sample. `outcome` may be NULL.
///
/// # Safety
/// `tree` must be a live handle; `x` and `y` must hold `d_in` and `d_out`
/// values; `outcome` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn gp_tree_insert(
    tree: *mut GpTree,
    x: *const f64,
    d_in: usize,
    y: *const f64,
    d_out: usize,
    outcome: *mut GpInsertOutcome,
) -> GpStatus {
    run(|| {
        let tree = tree_mut(tree)?;
        let out = tree.inner.insert(input(x, d_in, "x")?, input(y, d_out, "y")?)?;
        if let Some(o) = outcome.as_mut() {
            *o = GpInsertOutcome {
                stored: out.stored,
                split_occurred: out.split_occurred,
            };
        }
        Ok(())
    })
}

/// Writes the predictive mean at `x` into `mu` (`d_out` values).
///
/// # Safety
/// `tree` must be a live handle; `x` must hold `d_in` values and `mu` must
/// have room for `d_out`.
#[no_mangle]
pub unsafe extern "C" fn gp_tree_predict(
    tree: *const GpTree,
    x: *const f64,
    d_in: usize,
    mu: *mut f64,
    d_out: usize,
) -> GpStatus {
    run(|| {
        let tree = tree.as_ref().ok_or_else(|| Fail::null("tree"))?;
        let want = tree.inner.config().hp.d_out;
        if d_out != want {
            return Err(Error::InvalidArgument(format!("mu has room for {d_out} outputs, model has {want}")).into());
        }
        let pred = tree.inner.predict(input(x, d_in, "x")?)?;
        output(mu, d_out, "mu")?.copy_from_slice(&pred);
        Ok(())
    })
}

/// Drops all data and re-seeds routing, as the `-1` command does.
///
/// # Safety
/// `tree` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gp_tree_reset(tree: *mut GpTree) -> GpStatus {
    run(|| {
        tree_mut(tree)?.inner.reset();
        Ok(())
    })
}

/// # Safety
/// `tree` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gp_tree_stats(tree: *const GpTree, out: *mut GpTreeStats) -> GpStatus {
    run(|| {
        let tree = tree.as_ref().ok_or_else(|| Fail::null("tree"))?;
        let out = out.as_mut().ok_or_else(|| Fail::null("out"))?;
        let s = tree.inner.stats();
        *out = GpTreeStats {
            leaves: s.leaves,
            stored_points: s.stored_points,
            depth: s.depth,
        };
        Ok(())
    })
}

/// ARD-SE kernel `sigma_f^2 exp(-0.5 sum_d (x_d - x2_d)^2 / l_d^2)`.
///
/// # Safety
/// `x`, `x2` and `length_scales` must hold `d` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_kernel_eval(
    x: *const f64,
    x2: *const f64,
    d: usize,
    sigma_f: f64,
    length_scales: *const f64,
    out: *mut f64,
) -> GpStatus {
    run(|| {
        let out = out.as_mut().ok_or_else(|| Fail::null("out"))?;
        // sigma_n does not enter the kernel; any valid value will do
        let hp = Hyperparameters::new(sigma_f, input(length_scales, d, "length_scales")?.to_vec(), 1.0, 1)?;
        *out = kernel_eval(input(x, d, "x")?, input(x2, d, "x2")?, &hp)?;
        Ok(())
    })
}

/// Classifies a datagram. For a sample, `x_out`/`y_out` receive the inputs
/// and targets and `*scalar_out` the timestamp; for a command,
/// `*scalar_out` is its value. Malformed datagrams are not an error.
///
/// # Safety
/// `bytes` must hold `len` bytes; `class_out` and `scalar_out` must be
/// writable; `x_out` and `y_out` must have room for `d_in` and `d_out`
/// values.
#[no_mangle]
pub unsafe extern "C" fn gp_decode_datagram(
    bytes: *const u8,
    len: usize,
    d_in: usize,
    d_out: usize,
    class_out: *mut GpMessageClass,
    x_out: *mut f64,
    y_out: *mut f64,
    scalar_out: *mut f64,
) -> GpStatus {
    run(|| {
        let class_out = class_out.as_mut().ok_or_else(|| Fail::null("class_out"))?;
        let scalar_out = scalar_out.as_mut().ok_or_else(|| Fail::null("scalar_out"))?;
        let data: &[u8] = if len == 0 {
            &[]
        } else if bytes.is_null() {
            return Err(Fail::null("bytes"));
        } else {
            slice::from_raw_parts(bytes, len)
        };
        match protocol::decode_datagram(data, d_in, d_out) {
            Message::Command { value } => {
                *class_out = GpMessageClass::Command;
                *scalar_out = value;
            }
            Message::Sample { x, y, t } => {
                output(x_out, d_in, "x_out")?.copy_from_slice(&x);
                output(y_out, d_out, "y_out")?.copy_from_slice(&y);
                *class_out = GpMessageClass::Sample;
                *scalar_out = t;
            }
            Message::Malformed { .. } => *class_out = GpMessageClass::Malformed,
        }
        Ok(())
    })
}

/// Encodes `[x, y, t]`. `*written` receives the encoded size even when the
/// buffer is too small.
///
/// # Safety
/// `x`/`y` must hold `d_in`/`d_out` values; `buf` must have `cap` writable
/// bytes; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_encode_sample(
    x: *const f64,
    d_in: usize,
    y: *const f64,
    d_out: usize,
    t: f64,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> GpStatus {
    run(|| {
        let bytes = protocol::encode_sample(input(x, d_in, "x")?, input(y, d_out, "y")?, t)?;
        emit(&bytes, buf, cap, written)
    })
}

/// Encodes a single-value command (`-1` resets the model).
///
/// # Safety
/// `buf` must have `cap` writable bytes; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_encode_command(value: f64, buf: *mut u8, cap: usize, written: *mut usize) -> GpStatus {
    run(|| emit(&protocol::encode_command(value), buf, cap, written))
}

/// Encodes the reply `[mu, t]`.
///
/// # Safety
/// `mu` must hold `d_out` values; `buf` must have `cap` writable bytes;
/// `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_encode_reply(
    mu: *const f64,
    d_out: usize,
    t: f64,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> GpStatus {
    run(|| {
        let bytes = protocol::encode_reply(input(mu, d_out, "mu")?, t)?;
        emit(&bytes, buf, cap, written)
    })
}

/// Decodes a reply of `d_out` means plus the echoed timestamp.
///
/// # Safety
/// `bytes` must hold `len` bytes; `mu_out` must have room for `d_out`
/// values; `t_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_decode_reply(
    bytes: *const u8,
    len: usize,
    d_out: usize,
    mu_out: *mut f64,
    t_out: *mut f64,
) -> GpStatus {
    run(|| {
        let t_out = t_out.as_mut().ok_or_else(|| Fail::null("t_out"))?;
        if bytes.is_null() && len > 0 {
            return Err(Fail::null("bytes"));
        }
        let data: &[u8] = if len == 0 {
            &[]
        } else {
            slice::from_raw_parts(bytes, len)
        };
        let reply = protocol::decode_reply(data, d_out)?;
        output(mu_out, d_out, "mu_out")?.copy_from_slice(&reply.mu);
        *t_out = reply.t;
        Ok(())
    })
}
