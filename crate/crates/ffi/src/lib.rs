//! C interface to the solver. Handles are opaque and owned by the caller,
//! who releases them with the matching `_free`. Every fallible call returns
//! a `TspnStatus`; on failure `tspn_last_error_message` describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use tspn::baseline::is_feasible;
use tspn::geometry::{tour_cost, Binding, Tour};
use tspn::io::read_instance;
use tspn::oracle::{exact_oracle, DEFAULT_TOL};
use tspn::ptas::{solve_ptas, PtasConfig};
use tspn::{Instance, Segment, TspnError};

/// Largest instance `tspn_exact_oracle` accepts.
pub const TSPN_ORACLE_MAX_N: usize = 9;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TspnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidInstance = 3,
    Parse = 4,
    Io = 5,
    TooLarge = 6,
    Infeasible = 7,
    Internal = 8,
    Panic = 9,
    OutOfRange = 10,
}

/// A set of vertical segments under construction or loaded from a file.
pub struct TspnInstance {
    segments: Vec<Segment>,
    lambda: f64,
}

/// A closed tour with its cost.
pub struct TspnTour {
    tour: Tour,
    cost: f64,
    fallback: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &TspnError) -> TspnStatus {
    match e {
        TspnError::Parse { .. } => TspnStatus::Parse,
        TspnError::Invalid(_) | TspnError::Empty | TspnError::DegenerateScale => TspnStatus::InvalidInstance,
        TspnError::Argument(_) | TspnError::Stage { .. } => TspnStatus::InvalidArgument,
        TspnError::TooLarge(_) => TspnStatus::TooLarge,
        TspnError::Infeasible(_) => TspnStatus::Infeasible,
        TspnError::Io(_) => TspnStatus::Io,
        TspnError::VerticalLeg(..) | TspnError::Internal(_) => TspnStatus::Internal,
    }
}

fn fail(e: TspnError) -> TspnStatus {
    set_error(e.to_string());
    status_of(&e)
}

/// Runs `f`, turning panics into `TspnStatus::Panic`.
fn guard(f: impl FnOnce() -> TspnStatus) -> TspnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("panic inside the solver");
            TspnStatus::Panic
        }
    }
}

fn build(inst: &TspnInstance) -> Result<Instance, TspnError> {
    Instance::new(inst.segments.clone(), inst.lambda)
}

fn emit(out: *mut *mut TspnTour, tour: Tour, fallback: bool) -> TspnStatus {
    let cost = tour_cost(&tour);
    // SAFETY: the caller checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(TspnTour { tour, cost, fallback })) };
    TspnStatus::Ok
}

/// Message of the last failure on this thread; empty when none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tspn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates an empty instance with lengths allowed in `[1, lambda]`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn tspn_instance_new(lambda: f64, out: *mut *mut TspnInstance) -> TspnStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return TspnStatus::NullPointer;
        }
        if !(lambda >= 1.0 && lambda.is_finite()) {
            set_error(format!("lambda = {lambda} < 1"));
            return TspnStatus::InvalidArgument;
        }
        *out = Box::into_raw(Box::new(TspnInstance {
            segments: Vec::new(),
            lambda,
        }));
        TspnStatus::Ok
    })
}

/// Appends the segment `{x} × [y_bot, y_top]`.
///
/// # Safety
/// `inst` must come from `tspn_instance_new` or `tspn_instance_read`.
#[no_mangle]
pub unsafe extern "C" fn tspn_instance_add_segment(
    inst: *mut TspnInstance,
    id: usize,
    x: f64,
    y_bot: f64,
    y_top: f64,
) -> TspnStatus {
    guard(|| {
        let Some(inst) = inst.as_mut() else {
            set_error("instance is null");
            return TspnStatus::NullPointer;
        };
        let mut segs = inst.segments.clone();
        segs.push(Segment::new(id, x, y_bot, y_top));
        if let Err(e) = Instance::new(segs.clone(), inst.lambda) {
            return fail(e);
        }
        inst.segments = segs;
        TspnStatus::Ok
    })
}

/// Loads a `TSPN-SEG` file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tspn_instance_read(path: *const c_char, out: *mut *mut TspnInstance) -> TspnStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            set_error("path or out is null");
            return TspnStatus::NullPointer;
        }
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            set_error("path is not UTF-8");
            return TspnStatus::InvalidArgument;
        };
        match read_instance(p) {
            Ok(i) => {
                *out = Box::into_raw(Box::new(TspnInstance {
                    segments: i.segments,
                    lambda: i.lambda,
                }));
                TspnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of segments; 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live instance handle.
#[no_mangle]
pub unsafe extern "C" fn tspn_instance_len(inst: *const TspnInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.segments.len())
}

/// # Safety
/// `inst` must be null or a live instance handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn tspn_instance_free(inst: *mut TspnInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Runs the approximation scheme. `shifts` of 0 means the default.
///
/// # Safety
/// `inst` must be a live instance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tspn_solve_ptas(
    inst: *const TspnInstance,
    epsilon: f64,
    seed: u64,
    shifts: usize,
    out: *mut *mut TspnTour,
) -> TspnStatus {
    guard(|| {
        let Some(inst) = inst.as_ref() else {
            set_error("instance is null");
            return TspnStatus::NullPointer;
        };
        if out.is_null() {
            set_error("out is null");
            return TspnStatus::NullPointer;
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            set_error(format!("epsilon = {epsilon} not in (0, 1]"));
            return TspnStatus::InvalidArgument;
        }
        let cfg = PtasConfig {
            epsilon,
            seed,
            shifts: if shifts == 0 { PtasConfig::default().shifts } else { shifts },
            ..Default::default()
        };
        let run = build(inst).and_then(|i| {
            let rep = solve_ptas(&i, &cfg)?;
            if !is_feasible(&rep.tour, &i) {
                return Err(TspnError::Infeasible("solver returned an infeasible tour".into()));
            }
            Ok(rep)
        });
        match run {
            Ok(rep) => emit(out, rep.tour, rep.fallback),
            Err(e) => fail(e),
        }
    })
}

/// Exact optimum, for at most `TSPN_ORACLE_MAX_N` segments.
///
/// # Safety
/// `inst` must be a live instance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tspn_exact_oracle(inst: *const TspnInstance, out: *mut *mut TspnTour) -> TspnStatus {
    guard(|| {
        let Some(inst) = inst.as_ref() else {
            set_error("instance is null");
            return TspnStatus::NullPointer;
        };
        if out.is_null() {
            set_error("out is null");
            return TspnStatus::NullPointer;
        }
        match build(inst).and_then(|i| exact_oracle(&i, TSPN_ORACLE_MAX_N, DEFAULT_TOL)) {
            Ok(r) => emit(out, r.tour, false),
            Err(e) => fail(e),
        }
    })
}

/// Tour length; NaN for a null handle.
///
/// # Safety
/// `tour` must be null or a live tour handle.
#[no_mangle]
pub unsafe extern "C" fn tspn_tour_cost(tour: *const TspnTour) -> f64 {
    tour.as_ref().map_or(f64::NAN, |t| t.cost)
}

/// Number of tour points; 0 for a null handle.
///
/// # Safety
/// `tour` must be null or a live tour handle.
#[no_mangle]
pub unsafe extern "C" fn tspn_tour_len(tour: *const TspnTour) -> usize {
    tour.as_ref().map_or(0, |t| t.tour.len())
}

/// 1 when the scheme's own tour lost to a baseline, else 0.
///
/// # Safety
/// `tour` must be null or a live tour handle.
#[no_mangle]
pub unsafe extern "C" fn tspn_tour_fallback(tour: *const TspnTour) -> i32 {
    tour.as_ref().map_or(0, |t| i32::from(t.fallback))
}

/// Point `i` of the tour. `segment` receives the id of the segment the
/// point lies on, or -1 for a point bound to none.
///
/// # Safety
/// `tour` must be a live tour handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tspn_tour_point(
    tour: *const TspnTour,
    i: usize,
    x: *mut f64,
    y: *mut f64,
    segment: *mut i64,
) -> TspnStatus {
    guard(|| {
        let Some(t) = tour.as_ref() else {
            set_error("tour is null");
            return TspnStatus::NullPointer;
        };
        if x.is_null() || y.is_null() || segment.is_null() {
            set_error("out pointer is null");
            return TspnStatus::NullPointer;
        }
        let Some(p) = t.tour.points.get(i) else {
            set_error(format!("index {i} out of range for {} points", t.tour.len()));
            return TspnStatus::OutOfRange;
        };
        *x = p.pos.x;
        *y = p.pos.y;
        *segment = match p.binding {
            Binding::Segment(id) => id as i64,
            _ => -1,
        };
        TspnStatus::Ok
    })
}

/// # Safety
/// `tour` must be null or a live tour handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn tspn_tour_free(tour: *mut TspnTour) {
    if !tour.is_null() {
        drop(Box::from_raw(tour));
    }
}
