//! C ABI for `pdtn-core`.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns a [`PdtnStatus`]; on failure the message is
//! kept per thread and can be read with [`pdtn_last_error_message`].
//! Boundary traces are `double` arrays in boundary-walk order (counterclockwise
//! from the origin, `4n` entries); fields are row-major node arrays of
//! `(n+1)²` entries.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use pdtn_core::dtn::dtn_apply;
use pdtn_core::forward::SolverOptions;
use pdtn_core::{BoundaryTrace, Error, GammaMask, Grid2D, PotentialSeries, ScalarField};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdtnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    SupportViolation = 4,
    SolverFailure = 5,
    Panic = 6,
}

/// Opaque grid handle.
pub struct PdtnGrid {
    grid: Grid2D,
}

/// Opaque arc handle.
pub struct PdtnMask {
    mask: GammaMask,
}

/// Opaque potential handle; owns a copy of its grid.
pub struct PdtnPotential {
    series: PotentialSeries,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> PdtnStatus {
    match err {
        Error::LengthMismatch { .. } => PdtnStatus::LengthMismatch,
        Error::SupportViolation(_) => PdtnStatus::SupportViolation,
        Error::CgNotConverged { .. }
        | Error::NewtonNotConverged { .. }
        | Error::Conditioning { .. }
        | Error::SmallnessViolated { .. }
        | Error::NegativeReaction { .. } => PdtnStatus::SolverFailure,
        _ => PdtnStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PdtnStatus>) -> PdtnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdtnStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside pdtn".into());
            PdtnStatus::Panic
        }
    }
}

fn lift<T>(r: pdtn_core::Result<T>) -> Result<T, PdtnStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, PdtnStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument".into());
        PdtnStatus::NullPointer
    })
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], PdtnStatus> {
    if p.is_null() {
        set_error("null pointer argument".into());
        return Err(PdtnStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn check_len(what: &str, expected: usize, actual: usize) -> Result<(), PdtnStatus> {
    if expected == actual {
        Ok(())
    } else {
        set_error(format!("{what}: expected {expected} values, got {actual}"));
        Err(PdtnStatus::LengthMismatch)
    }
}

/// Writes the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pdtn_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a grid with `n` cells per side (`n >= 4`).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdtn_grid_new(n: usize, out: *mut *mut PdtnGrid) -> PdtnStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return Err(PdtnStatus::NullPointer);
        }
        let grid = lift(Grid2D::new(n))?;
        *out = Box::into_raw(Box::new(PdtnGrid { grid }));
        Ok(())
    })
}

/// # Safety
/// `grid` must come from [`pdtn_grid_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn pdtn_grid_free(grid: *mut PdtnGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of boundary nodes, `4n`; 0 for a null handle.
///
/// # Safety
/// `grid` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pdtn_grid_boundary_count(grid: *const PdtnGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.boundary_count())
}

/// Number of nodes, `(n+1)²`; 0 for a null handle.
///
/// # Safety
/// `grid` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pdtn_grid_node_count(grid: *const PdtnGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.node_count())
}

/// Creates the arc `[s0, s1)` (arclength modulo 4) on `grid`.
///
/// # Safety
/// `grid` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdtn_mask_new(
    grid: *const PdtnGrid,
    s0: f64,
    s1: f64,
    out: *mut *mut PdtnMask,
) -> PdtnStatus {
    guard(|| {
        let g = deref(grid)?;
        if out.is_null() {
            set_error("null output pointer".into());
            return Err(PdtnStatus::NullPointer);
        }
        let mask = lift(GammaMask::new(s0, s1, &g.grid))?;
        *out = Box::into_raw(Box::new(PdtnMask { mask }));
        Ok(())
    })
}

/// # Safety
/// `mask` must come from [`pdtn_mask_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn pdtn_mask_free(mask: *mut PdtnMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Creates a zero potential with coefficients `V_2..V_kmax` on `grid`.
///
/// # Safety
/// `grid` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdtn_potential_new(
    grid: *const PdtnGrid,
    kmax: usize,
    out: *mut *mut PdtnPotential,
) -> PdtnStatus {
    guard(|| {
        let g = deref(grid)?;
        if out.is_null() {
            set_error("null output pointer".into());
            return Err(PdtnStatus::NullPointer);
        }
        let series = lift(PotentialSeries::zero(&g.grid, kmax))?;
        *out = Box::into_raw(Box::new(PdtnPotential { series }));
        Ok(())
    })
}

/// Sets `V_k` from `len = (n+1)²` node values.
///
/// # Safety
/// `potential` must be a live handle; `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pdtn_potential_set_coefficient(
    potential: *mut PdtnPotential,
    k: usize,
    values: *const f64,
    len: usize,
) -> PdtnStatus {
    guard(|| {
        let p = potential.as_mut().ok_or_else(|| {
            set_error("null pointer argument".into());
            PdtnStatus::NullPointer
        })?;
        let vals = slice(values, len)?;
        let grid = p.series.grid().clone();
        check_len("coefficient", grid.node_count(), len)?;
        let field = lift(ScalarField::from_values(&grid, vals.to_vec()))?;
        lift(p.series.set_coefficient(k, field))
    })
}

/// # Safety
/// `potential` must come from [`pdtn_potential_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn pdtn_potential_free(potential: *mut PdtnPotential) {
    if !potential.is_null() {
        drop(Box::from_raw(potential));
    }
}

/// Applies the partial DtN map: Dirichlet data `f` (zero off the arc) to the
/// outward normal derivative on the arc, written into `out` (zero off the arc).
/// Both buffers hold `len = 4n` values. Uses the default solver settings.
///
/// # Safety
/// Handles must be live; `f` and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pdtn_dtn_apply(
    potential: *const PdtnPotential,
    mask: *const PdtnMask,
    f: *const f64,
    out: *mut f64,
    len: usize,
) -> PdtnStatus {
    guard(|| {
        let p = deref(potential)?;
        let m = deref(mask)?;
        let input = slice(f, len)?;
        if out.is_null() {
            set_error("null output pointer".into());
            return Err(PdtnStatus::NullPointer);
        }
        let grid = p.series.grid();
        check_len("trace", grid.boundary_count(), len)?;
        check_len("arc", grid.boundary_count(), m.mask.flags().len())?;
        let trace = lift(BoundaryTrace::from_values(grid, input.to_vec()))?;
        let sample = lift(dtn_apply(&p.series, &trace, &m.mask, grid, &SolverOptions::default()))?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(sample.output.values());
        Ok(())
    })
}
