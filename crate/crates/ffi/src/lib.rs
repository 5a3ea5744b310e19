//! C interface to `ell-volterra`.
//!
//! Operators live behind an opaque `EvOperator` handle created by one of
//! the `ev_*` constructors and released with [`ev_operator_free`]. Every
//! fallible function returns an [`EvStatus`]; on failure a description is
//! available from [`ev_last_error`] until the next call on the same thread.
//! Strings returned through `char **` must be released with
//! [`ev_string_free`].
//!
//! Heredity arrays are flat, `P[i][j][k]` at `(i * m + j) * m + k`.
//! Species labels passed as integers (cycle vertices) are 1-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ell_volterra::classify::{detect_ell, extremal_count, ExtremalClass};
use ell_volterra::dynamics::{self, find_fixed_points, Chart};
use ell_volterra::families::{
    cycle_family, m2_operator, m3_analyze, m3_operator, CycleSpec, M2Params, M3SymParams,
};
use ell_volterra::io::{operator_from_json, operator_to_json};
use ell_volterra::report::{self, envelope, to_pretty};
use ell_volterra::{CubicMatrix, QsoError, SimplexPoint};

/// Opaque operator handle.
pub struct EvOperator {
    inner: CubicMatrix,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidOperator = 2,
    DimensionMismatch = 3,
    NotOnSimplex = 4,
    InvalidArgument = 5,
    ParamOutOfRange = 6,
    Overflow = 7,
    SizeGuard = 8,
    Utf8 = 9,
    Panic = 10,
}

/// Which coordinates a Jacobian is taken in.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvChart {
    /// `m x m`, all coordinates.
    Full = 0,
    /// `(m-1) x (m-1)`, last coordinate eliminated.
    Reduced = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &QsoError) -> EvStatus {
    match e {
        QsoError::Shape(_) | QsoError::TooSmall(_) | QsoError::Invalid(_) | QsoError::Json(_) => {
            EvStatus::InvalidOperator
        }
        QsoError::DimensionMismatch { .. } => EvStatus::DimensionMismatch,
        QsoError::NotOnSimplex(_) => EvStatus::NotOnSimplex,
        QsoError::ParamRange(_) => EvStatus::ParamOutOfRange,
        QsoError::SizeGuardExceeded { .. } => EvStatus::SizeGuard,
        _ => EvStatus::InvalidArgument,
    }
}

struct Failure(EvStatus, String);

impl From<QsoError> for Failure {
    fn from(e: QsoError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: EvStatus, msg: &str) -> Failure {
    Failure(status, msg.to_string())
}

/// Runs `f`, turning errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EvStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EvStatus::Panic
        }
    }
}

unsafe fn handle<'a>(op: *const EvOperator) -> Result<&'a CubicMatrix, Failure> {
    op.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| fail(EvStatus::NullPointer, "operator handle is NULL"))
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(fail(EvStatus::NullPointer, "input array is NULL"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(fail(EvStatus::NullPointer, "output array is NULL"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn store_operator(out: *mut *mut EvOperator, v: CubicMatrix) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(EvStatus::NullPointer, "output handle pointer is NULL"));
    }
    *out = Box::into_raw(Box::new(EvOperator { inner: v }));
    Ok(())
}

unsafe fn store_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(EvStatus::NullPointer, "output string pointer is NULL"));
    }
    *out = CString::new(s).expect("JSON has no NUL").into_raw();
    Ok(())
}

fn point(v: &CubicMatrix, x: &[f64]) -> Result<SimplexPoint, Failure> {
    if x.len() != v.m() {
        return Err(QsoError::DimensionMismatch {
            expected: v.m(),
            got: x.len(),
        }
        .into());
    }
    Ok(SimplexPoint::new(x.to_vec())?)
}

/// Message describing the last failure on this thread; empty after a
/// success. Owned by the library and valid until the next `ev_*` call.
#[no_mangle]
pub extern "C" fn ev_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses and validates operator JSON (`{"m": .., "P": [[[..]]]}`).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_from_json(
    json: *const c_char,
    out: *mut *mut EvOperator,
) -> EvStatus {
    guard(|| {
        if json.is_null() {
            return Err(fail(EvStatus::NullPointer, "json is NULL"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| fail(EvStatus::Utf8, &e.to_string()))?;
        store_operator(out, operator_from_json(text)?)
    })
}

/// Builds an operator from `m^3` entries.
///
/// # Safety
/// `entries` must point to `m * m * m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_from_entries(
    m: usize,
    entries: *const f64,
    out: *mut *mut EvOperator,
) -> EvStatus {
    guard(|| {
        let n = m
            .checked_mul(m)
            .and_then(|x| x.checked_mul(m))
            .ok_or_else(|| fail(EvStatus::Overflow, "m^3 overflows"))?;
        let data = slice(entries, n)?;
        store_operator(out, CubicMatrix::new(m, data.to_vec())?)
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `op` must come from an `ev_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_free(op: *mut EvOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Number of species, or 0 for a NULL handle.
///
/// # Safety
/// `op` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_dimension(op: *const EvOperator) -> usize {
    op.as_ref().map_or(0, |h| h.inner.m())
}

/// Operator JSON with sorted keys.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_to_json(
    op: *const EvOperator,
    out: *mut *mut c_char,
) -> EvStatus {
    guard(|| store_string(out, operator_to_json(handle(op)?)))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ev_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Writes `V(x)` to `out`; both arrays have `len == m` entries.
///
/// # Safety
/// `x` and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_apply(
    op: *const EvOperator,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> EvStatus {
    guard(|| {
        let v = handle(op)?;
        let x = point(v, slice(x, len)?)?;
        let y = v.apply(&x)?;
        out_slice(out, len)?.copy_from_slice(y.coords());
        Ok(())
    })
}

/// Writes `x^(0), ..., x^(n)` row by row: `out` holds `(n + 1) * len`
/// doubles.
///
/// # Safety
/// `x0` must point to `len` doubles and `out` to `(n + 1) * len`.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_orbit(
    op: *const EvOperator,
    x0: *const f64,
    len: usize,
    n: usize,
    out: *mut f64,
) -> EvStatus {
    guard(|| {
        let v = handle(op)?;
        let x0 = point(v, slice(x0, len)?)?;
        let total = n
            .checked_add(1)
            .and_then(|r| r.checked_mul(len))
            .ok_or_else(|| fail(EvStatus::Overflow, "orbit buffer size overflows"))?;
        let buf = out_slice(out, total)?;
        let o = dynamics::orbit(v, &x0, n)?;
        for (row, p) in buf.chunks_exact_mut(len).zip(&o.points) {
            row.copy_from_slice(p.coords());
        }
        Ok(())
    })
}

/// Jacobian at `x` in row-major order: `m * m` doubles for
/// [`EvChart::Full`], `(m - 1) * (m - 1)` for [`EvChart::Reduced`].
/// `x` need not lie on the simplex.
///
/// # Safety
/// `x` must point to `len` doubles and `out` to the size above.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_jacobian(
    op: *const EvOperator,
    x: *const f64,
    len: usize,
    chart: EvChart,
    out: *mut f64,
) -> EvStatus {
    guard(|| {
        let v = handle(op)?;
        let x = slice(x, len)?;
        let chart = match chart {
            EvChart::Full => Chart::Full,
            EvChart::Reduced => Chart::LastCoordinateEliminated,
        };
        let j = dynamics::jacobian(v, x, chart)?;
        let buf = out_slice(out, j.nrows() * j.ncols())?;
        for r in 0..j.nrows() {
            for c in 0..j.ncols() {
                buf[r * j.ncols() + c] = j[(r, c)];
            }
        }
        Ok(())
    })
}

/// Largest `ell` such that the Volterra condition holds on `1..=ell`.
///
/// # Safety
/// `op` must be a live handle; `ell` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_detect_ell(
    op: *const EvOperator,
    ell: *mut usize,
) -> EvStatus {
    guard(|| {
        let v = handle(op)?;
        if ell.is_null() {
            return Err(fail(EvStatus::NullPointer, "ell is NULL"));
        }
        *ell = detect_ell(v).ell;
        Ok(())
    })
}

/// Classification report as JSON.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_classify_json(
    op: *const EvOperator,
    out: *mut *mut c_char,
) -> EvStatus {
    guard(|| {
        let v = handle(op)?;
        let body = envelope("classification", report::classification(&detect_ell(v)));
        store_string(out, to_pretty(&body))
    })
}

/// Multistart fixed-point search from a barycentric grid with `grid` points
/// per edge, as JSON.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_operator_fixed_points_json(
    op: *const EvOperator,
    grid: usize,
    out: *mut *mut c_char,
) -> EvStatus {
    guard(|| {
        let v = handle(op)?;
        let s = find_fixed_points(v, grid)?;
        store_string(
            out,
            to_pretty(&envelope("fixed-points", report::fixed_point_search(&s))),
        )
    })
}

fn store_count(m: usize, class: ExtremalClass, out: *mut u64) -> Result<(), Failure> {
    let n = extremal_count(m, class)?;
    let n = u64::try_from(&n).map_err(|_| {
        fail(
            EvStatus::Overflow,
            &format!("count {n} does not fit in 64 bits"),
        )
    })?;
    if out.is_null() {
        return Err(fail(EvStatus::NullPointer, "out is NULL"));
    }
    // SAFETY: checked non-null; the caller guarantees it is writable.
    unsafe { *out = n };
    Ok(())
}

/// Number of 0/1 operators satisfying the Volterra condition on `1..=ell`.
/// Fails with [`EvStatus::Overflow`] past 64 bits.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_extremal_count(m: usize, ell: usize, out: *mut u64) -> EvStatus {
    guard(|| store_count(m, ExtremalClass::Ell(ell), out))
}

/// Number of 0/1 operators without any Volterra condition.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_extremal_count_all(m: usize, out: *mut u64) -> EvStatus {
    guard(|| store_count(m, ExtremalClass::All, out))
}

/// Two-species operator with `P[1][1][1] = a`, `P[1][2][1] = c`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_m2_operator(a: f64, c: f64, out: *mut *mut EvOperator) -> EvStatus {
    guard(|| store_operator(out, m2_operator(&M2Params::new(a, c)?)))
}

/// Symmetric three-species 2-Volterra operator.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_m3_operator(
    a: f64,
    b: f64,
    c: f64,
    out: *mut *mut EvOperator,
) -> EvStatus {
    guard(|| store_operator(out, m3_operator(&M3SymParams::new(a, b, c)?)))
}

/// Closed-form analysis of the symmetric three-species family, as JSON.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ev_m3_analyze_json(
    a: f64,
    b: f64,
    c: f64,
    a2b_tol: f64,
    out: *mut *mut c_char,
) -> EvStatus {
    guard(|| {
        let r = m3_analyze(&M3SymParams::new(a, b, c)?, a2b_tol)?;
        store_string(out, to_pretty(&envelope("family", report::m3(&r))))
    })
}

/// Operator realizing vertex cycles. `vertices` lists all cycles back to
/// back (1-based labels, each above `ell`); `lengths[t]` is the length of
/// cycle `t`.
///
/// # Safety
/// `lengths` must point to `n_cycles` entries and `vertices` to their sum.
#[no_mangle]
pub unsafe extern "C" fn ev_cycle_family(
    m: usize,
    ell: usize,
    vertices: *const usize,
    lengths: *const usize,
    n_cycles: usize,
    out: *mut *mut EvOperator,
) -> EvStatus {
    guard(|| {
        if n_cycles > 0 && (vertices.is_null() || lengths.is_null()) {
            return Err(fail(EvStatus::NullPointer, "cycle arrays are NULL"));
        }
        let lengths: &[usize] = if n_cycles == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(lengths, n_cycles)
        };
        let total = lengths
            .iter()
            .try_fold(0usize, |s, &l| s.checked_add(l))
            .ok_or_else(|| fail(EvStatus::Overflow, "cycle lengths overflow"))?;
        let flat: &[usize] = if total == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(vertices, total)
        };
        let mut cycles = Vec::with_capacity(n_cycles);
        let mut at = 0;
        for &l in lengths {
            let mut cycle = Vec::with_capacity(l);
            for &label in &flat[at..at + l] {
                if label == 0 || label > m {
                    return Err(fail(
                        EvStatus::InvalidArgument,
                        &format!("vertex {label} is outside 1..={m}"),
                    ));
                }
                cycle.push(label - 1);
            }
            at += l;
            cycles.push(cycle);
        }
        store_operator(out, cycle_family(&CycleSpec::new(m, ell, cycles)?)?)
    })
}
