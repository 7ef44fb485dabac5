//! C ABI over `qcantor`. Objects cross the boundary as opaque handles that
//! the caller frees; every fallible call returns a [`QcStatus`] and leaves a
//! message for [`qc_last_error`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_rational::BigRational;
use num_traits::ToPrimitive;

use qcantor::blocks::Block;
use qcantor::descriptor::DescriptorParser;
use qcantor::diophantine::solve_box;
use qcantor::digits::DigitStream;
use qcantor::error::Error;
use qcantor::sequences::BasicSequence;
use qcantor::stats::{count_stream, predicted_limit, CountOptions, Mode};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidDescriptor = 3,
    Guard = 4,
    InvalidParameter = 5,
    OutOfRange = 6,
    NotConverged = 7,
    Internal = 8,
}

/// A basic sequence `(q_n)`.
pub struct QcSequence(BasicSequence);

/// A digit stream `(E_n)`.
pub struct QcStream(DigitStream);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QcStatus {
    match e {
        Error::Descriptor(_) => QcStatus::InvalidDescriptor,
        Error::BudgetExceeded { .. } | Error::Guard(_) | Error::ScheduleExhausted(_) | Error::Overflow => QcStatus::Guard,
        Error::OutOfRange { .. } => QcStatus::OutOfRange,
        Error::Io(_) => QcStatus::Internal,
        _ => QcStatus::InvalidParameter,
    }
}

fn fail(status: QcStatus, msg: impl Into<String>) -> QcStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, mapping library errors and panics to status codes.
fn guarded(f: impl FnOnce() -> Result<(), QcStatus>) -> QcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(QcStatus::Internal, "internal panic"),
    }
}

fn lib(e: Error) -> QcStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, QcStatus> {
    if p.is_null() {
        return Err(fail(QcStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(QcStatus::InvalidUtf8, "argument is not UTF-8"))
}

fn non_null<T>(p: *const T) -> Result<(), QcStatus> {
    if p.is_null() {
        Err(fail(QcStatus::NullPointer, "null pointer argument"))
    } else {
        Ok(())
    }
}

/// The most recent error message on this thread, or null. Free with
/// [`qc_string_free`].
#[no_mangle]
pub extern "C" fn qc_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn qc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a sequence from a descriptor such as `xi:base=[constant:6];c=2,1,2;d=4`.
///
/// # Safety
/// `descriptor` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qc_sequence_new(descriptor: *const c_char, out: *mut *mut QcSequence) -> QcStatus {
    guarded(|| {
        non_null(out)?;
        let seq = DescriptorParser::new().sequence(text(descriptor)?).map_err(lib)?;
        *out = Box::into_raw(Box::new(QcSequence(seq)));
        Ok(())
    })
}

/// # Safety
/// `seq` must come from [`qc_sequence_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qc_sequence_free(seq: *mut QcSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// `q_n = mantissa * 2^shift`.
///
/// # Safety
/// `seq` must be a live handle; `mantissa` and `shift` writable.
#[no_mangle]
pub unsafe extern "C" fn qc_sequence_q_at(
    seq: *const QcSequence,
    n: u64,
    mantissa: *mut u64,
    shift: *mut u64,
) -> QcStatus {
    guarded(|| {
        non_null(seq)?;
        non_null(mantissa)?;
        non_null(shift)?;
        let q = (*seq).0.q_at(n).map_err(lib)?;
        *mantissa = q.mantissa;
        *shift = q.shift;
        Ok(())
    })
}

/// Builds a digit stream from a descriptor such as `eta:preset=factorial;t=2`.
///
/// # Safety
/// `descriptor` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qc_stream_new(descriptor: *const c_char, out: *mut *mut QcStream) -> QcStatus {
    guarded(|| {
        non_null(out)?;
        let x = DescriptorParser::new().stream(text(descriptor)?).map_err(lib)?;
        *out = Box::into_raw(Box::new(QcStream(x)));
        Ok(())
    })
}

/// # Safety
/// `stream` must come from [`qc_stream_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qc_stream_free(stream: *mut QcStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

/// The digit `E_n`, `n >= 1`.
///
/// # Safety
/// `stream` must be a live handle and `digit` writable.
#[no_mangle]
pub unsafe extern "C" fn qc_stream_digit_at(stream: *const QcStream, n: u64, digit: *mut u64) -> QcStatus {
    guarded(|| {
        non_null(stream)?;
        non_null(digit)?;
        *digit = (*stream).0.digit_at(n).map_err(lib)?;
        Ok(())
    })
}

/// Counts `block` in `stream` up to `horizon` in `mode` (`plain`, `apI:m:r`,
/// `apII:m:r`) and the matching denominator under `seq`.
///
/// # Safety
/// Handles must be live, `digits` must hold `len` values, outputs writable.
#[no_mangle]
pub unsafe extern "C" fn qc_count(
    stream: *const QcStream,
    seq: *const QcSequence,
    digits: *const u64,
    len: usize,
    mode: *const c_char,
    horizon: u64,
    count: *mut u64,
    denominator: *mut f64,
) -> QcStatus {
    guarded(|| {
        non_null(stream)?;
        non_null(seq)?;
        non_null(digits)?;
        non_null(count)?;
        non_null(denominator)?;
        if len == 0 {
            return Err(fail(QcStatus::InvalidParameter, "block must be nonempty"));
        }
        let mode: Mode = text(mode)?.parse().map_err(lib)?;
        let block = Block::new(std::slice::from_raw_parts(digits, len).to_vec());
        let opts = CountOptions { min_denominator: 0.0 };
        let series = count_stream(&(*stream).0, &(*seq).0, &[block], mode, horizon, &[horizon], opts).map_err(lib)?;
        let row = series.rows.last().ok_or_else(|| fail(QcStatus::Internal, "no checkpoint row"))?;
        *count = row.count;
        *denominator = row.denominator;
        Ok(())
    })
}

/// Predicted limit of `N/Q^{(k)}` for a ψ-image under Ξ(P, c, d). `c` is a
/// comma-separated list of rationals such as `2,1/2,2`. Writes the value as a
/// double and, when `exact` is non-null, as a string freed with
/// [`qc_string_free`].
///
/// # Safety
/// Strings must be nul-terminated; `value` writable; `exact` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qc_predicted_limit(
    c: *const c_char,
    d: u64,
    k: u64,
    mode: *const c_char,
    value: *mut f64,
    exact: *mut *mut c_char,
) -> QcStatus {
    guarded(|| {
        non_null(value)?;
        let coeffs = text(c)?
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<BigRational>()
                    .map_err(|_| fail(QcStatus::InvalidDescriptor, format!("bad coefficient {v:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mode: Mode = text(mode)?.parse().map_err(lib)?;
        let lim = predicted_limit(&coeffs, d, k, mode).map_err(lib)?;
        *value = lim.to_f64().unwrap_or(f64::NAN);
        if !exact.is_null() {
            *exact = CString::new(lim.to_string()).expect("no nul in a rational").into_raw();
        }
        Ok(())
    })
}

/// Solves `S_k(c) = 1 + eps_k` inside the box. `eps` may be null for all
/// zeros. `c_out` must hold `t` doubles; it is filled even when the solve
/// stalls, in which case the status is `NotConverged`.
///
/// # Safety
/// `eps` null or `t` readable doubles; `c_out` `t` writable doubles;
/// `max_residual` writable.
#[no_mangle]
pub unsafe extern "C" fn qc_solve_box(t: usize, eps: *const f64, c_out: *mut f64, max_residual: *mut f64) -> QcStatus {
    guarded(|| {
        non_null(c_out)?;
        non_null(max_residual)?;
        let eps = if eps.is_null() { vec![0.0; t] } else { std::slice::from_raw_parts(eps, t).to_vec() };
        let res = solve_box(t, &eps).map_err(lib)?;
        std::slice::from_raw_parts_mut(c_out, t).copy_from_slice(&res.c);
        *max_residual = res.max_residual;
        if res.converged() {
            Ok(())
        } else {
            Err(fail(QcStatus::NotConverged, format!("{:?} after {} iterations", res.status, res.iterations)))
        }
    })
}
