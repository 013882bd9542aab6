//! C ABI for the `gsmp` library.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `gsmp_*_new`/`solve`/`run` function and released by the matching
//! `gsmp_*_free`. Every fallible function returns a [`GsmpStatus`]; on
//! failure the message is available from [`gsmp_last_error_message`] on the
//! same thread. Array outputs take a capacity and fail with
//! `GSMP_STATUS_BUFFER_TOO_SMALL` when it is short.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gsmp::flow::{extract_jacobi, flow_run, FlowMode, FlowTrace};
use gsmp::gsmp::{check_gsmp_class, GsmpBlockPair, GsmpWindow as Window, CLASS_MARGIN};
use gsmp::isospectral::{sample_torus, IsoPoint};
use gsmp::spectral_sets::{solve_potential, IntervalSystem, PotentialV};
use gsmp::workbench::Perturbation;
use gsmp::Error;
use num_complex::Complex64;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsmpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    AtPole = 4,
    NoConvergence = 5,
    Infeasible = 6,
    OutOfWindow = 7,
    Margin = 8,
    Singular = 9,
    Breakdown = 10,
    Discrepancy = 11,
    RootCount = 12,
    Io = 13,
    BufferTooSmall = 14,
    Panic = 15,
}

/// How each flow step is computed.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsmpFlowMode {
    Fast = 0,
    Reference = 1,
    /// Both paths, compared against `dual_tol`.
    Dual = 2,
}

/// Rational potential of a finite-gap set.
pub struct GsmpPotential(PotentialV);

/// Certified points of an isospectral torus.
pub struct GsmpTorus(Vec<IsoPoint>);

/// Finite window of block coefficients.
pub struct GsmpWindow(Window);

/// Iterates of a flow run.
pub struct GsmpFlowTrace(FlowTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(GsmpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidIntervals(_) | Error::InvalidArgument(_) => GsmpStatus::InvalidArgument,
            Error::Dimension(_) => GsmpStatus::Dimension,
            Error::AtPole(_) => GsmpStatus::AtPole,
            Error::NoConvergence { .. } => GsmpStatus::NoConvergence,
            Error::Infeasible(_) => GsmpStatus::Infeasible,
            Error::OutOfWindow(_) => GsmpStatus::OutOfWindow,
            Error::Margin { .. } => GsmpStatus::Margin,
            Error::Singular(_) => GsmpStatus::Singular,
            Error::Breakdown(_) => GsmpStatus::Breakdown,
            Error::Discrepancy { .. } => GsmpStatus::Discrepancy,
            Error::RootCount { .. } => GsmpStatus::RootCount,
            Error::Io(_) => GsmpStatus::Io,
        };
        Fail(code, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GsmpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(GsmpStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GsmpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GsmpStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            GsmpStatus::Panic
        }
    }
}

unsafe fn href<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_array(out: *mut f64, cap: usize, values: &[f64], what: &str) -> Result<(), Fail> {
    if cap < values.len() {
        return Err(Fail(
            GsmpStatus::BufferTooSmall,
            format!("{what}: capacity {cap} < {}", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null(what));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn gsmp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn gsmp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Solves for the potential of the bands `[edges[0], edges[1]], [edges[2], edges[3]], ...`.
#[no_mangle]
pub unsafe extern "C" fn gsmp_potential_solve(
    edges: *const f64,
    n_edges: usize,
    tol: f64,
    max_iter: usize,
    out: *mut *mut GsmpPotential,
) -> GsmpStatus {
    guard(|| {
        let e = slice(edges, n_edges, "edges")?;
        if e.is_empty() || e.len() % 2 != 0 {
            return Err(invalid(format!("{} band edges; need a positive even count", e.len())));
        }
        let bands: Vec<(f64, f64)> = e.chunks(2).map(|c| (c[0], c[1])).collect();
        let v = solve_potential(&IntervalSystem::from_bands(&bands)?, tol, max_iter)?;
        write(out, boxed(GsmpPotential(v)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn gsmp_potential_free(p: *mut GsmpPotential) {
    free(p)
}

#[no_mangle]
pub unsafe extern "C" fn gsmp_potential_genus(p: *const GsmpPotential, genus: *mut usize) -> GsmpStatus {
    guard(|| write(genus, href(p, "potential")?.0.genus(), "genus"))
}

/// `lambda0`, `c0` and the `g` pairs `(lambda_k, c_k)` in increasing `c_k`.
#[no_mangle]
pub unsafe extern "C" fn gsmp_potential_params(
    p: *const GsmpPotential,
    lambda0: *mut f64,
    c0: *mut f64,
    residues: *mut f64,
    poles: *mut f64,
    cap: usize,
) -> GsmpStatus {
    guard(|| {
        let v = &href(p, "potential")?.0;
        write_array(residues, cap, &v.residues(), "residues")?;
        write_array(poles, cap, &v.pole_positions(), "poles")?;
        write(lambda0, v.lambda0, "lambda0")?;
        write(c0, v.c0, "c0")
    })
}

/// `V(re + i im)`.
#[no_mangle]
pub unsafe extern "C" fn gsmp_potential_eval(
    p: *const GsmpPotential,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> GsmpStatus {
    guard(|| {
        let (val, _) = href(p, "potential")?.0.eval(Complex64::new(re, im))?;
        write(out_re, val.re, "out_re")?;
        write(out_im, val.im, "out_im")
    })
}

/// Samples `count` certified torus points (the `q = 0` point first).
#[no_mangle]
pub unsafe extern "C" fn gsmp_torus_sample(
    p: *const GsmpPotential,
    count: usize,
    seed: u64,
    tol: f64,
    out: *mut *mut GsmpTorus,
) -> GsmpStatus {
    guard(|| {
        let s = sample_torus(&href(p, "potential")?.0, count, seed, tol)?;
        write(out, boxed(GsmpTorus(s.points)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn gsmp_torus_free(t: *mut GsmpTorus) {
    free(t)
}

#[no_mangle]
pub unsafe extern "C" fn gsmp_torus_len(t: *const GsmpTorus, len: *mut usize) -> GsmpStatus {
    guard(|| write(len, href(t, "torus")?.0.len(), "len"))
}

/// Coefficients `p`, `q` (each of length `g + 1`) of point `index`.
#[no_mangle]
pub unsafe extern "C" fn gsmp_torus_point(
    t: *const GsmpTorus,
    index: usize,
    p: *mut f64,
    q: *mut f64,
    cap: usize,
) -> GsmpStatus {
    guard(|| {
        let pts = &href(t, "torus")?.0;
        let pt = pts.get(index).ok_or_else(|| invalid(format!("index {index} of {}", pts.len())))?;
        write_array(p, cap, &pt.p, "p")?;
        write_array(q, cap, &pt.q, "q")
    })
}

/// Window with `n_blocks` blocks starting at `lo`; `p` and `q` hold
/// `n_blocks * (genus + 1)` values, block by block.
#[no_mangle]
pub unsafe extern "C" fn gsmp_window_new(
    poles: *const f64,
    genus: usize,
    lo: i64,
    p: *const f64,
    q: *const f64,
    n_blocks: usize,
    out: *mut *mut GsmpWindow,
) -> GsmpStatus {
    guard(|| {
        let bs = genus + 1;
        let poles = slice(poles, genus, "poles")?.to_vec();
        let p = slice(p, n_blocks * bs, "p")?;
        let q = slice(q, n_blocks * bs, "q")?;
        let blocks = p
            .chunks(bs)
            .zip(q.chunks(bs))
            .map(|(a, b)| GsmpBlockPair::new(a.to_vec(), b.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        let w = Window::new(poles, lo, blocks)?;
        write(out, boxed(GsmpWindow(w)), "out")
    })
}

/// Constant window of the point `(p, q)` on blocks `[-half_width, half_width)`.
#[no_mangle]
pub unsafe extern "C" fn gsmp_window_periodic(
    pot: *const GsmpPotential,
    p: *const f64,
    q: *const f64,
    half_width: usize,
    out: *mut *mut GsmpWindow,
) -> GsmpStatus {
    guard(|| {
        let v = &href(pot, "potential")?.0;
        let n = v.genus() + 1;
        let pair = GsmpBlockPair::new(slice(p, n, "p")?.to_vec(), slice(q, n, "q")?.to_vec())?;
        let pt = IsoPoint { p: pair.p, q: pair.q, residual: 0.0 };
        let w = gsmp::isospectral::build_periodic(&pt, v, half_width)?;
        write(out, boxed(GsmpWindow(w)), "out")
    })
}

/// Adds `amplitude * j^-exponent * U[-1, 1]` to every coefficient of blocks
/// `j >= 1`; fails unless the result is certified.
#[no_mangle]
pub unsafe extern "C" fn gsmp_window_perturb(
    w: *const GsmpWindow,
    exponent: f64,
    amplitude: f64,
    seed: u64,
    out: *mut *mut GsmpWindow,
) -> GsmpStatus {
    guard(|| {
        let pert = Perturbation::PowerDecay { exponent, amplitude, seed };
        let res = pert.apply_certified(&href(w, "window")?.0)?;
        write(out, boxed(GsmpWindow(res)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn gsmp_window_free(w: *mut GsmpWindow) {
    free(w)
}

/// Genus and stored block range `[lo, hi)`.
#[no_mangle]
pub unsafe extern "C" fn gsmp_window_shape(
    w: *const GsmpWindow,
    genus: *mut usize,
    lo: *mut i64,
    hi: *mut i64,
) -> GsmpStatus {
    guard(|| {
        let w = &href(w, "window")?.0;
        write(genus, w.genus(), "genus")?;
        write(lo, w.lo(), "lo")?;
        write(hi, w.hi(), "hi")
    })
}

#[no_mangle]
pub unsafe extern "C" fn gsmp_window_block(
    w: *const GsmpWindow,
    j: i64,
    p: *mut f64,
    q: *mut f64,
    cap: usize,
) -> GsmpStatus {
    guard(|| {
        let b = href(w, "window")?.0.block(j)?;
        write_array(p, cap, &b.p, "p")?;
        write_array(q, cap, &b.q, "q")
    })
}

/// Class check at the default margin: `certified` and the smallest of
/// `Lambda#` and `p_g` over the window.
#[no_mangle]
pub unsafe extern "C" fn gsmp_window_check_class(
    w: *const GsmpWindow,
    certified: *mut bool,
    margin: *mut f64,
) -> GsmpStatus {
    guard(|| {
        let r = check_gsmp_class(&href(w, "window")?.0, CLASS_MARGIN);
        write(certified, r.certified, "certified")?;
        write(margin, r.min_lambda_sharp.min(r.min_pg), "margin")
    })
}

/// Runs `steps` flow steps. A run that stops early still succeeds; see
/// [`gsmp_flow_stop`].
#[no_mangle]
pub unsafe extern "C" fn gsmp_flow_run(
    w: *const GsmpWindow,
    steps: usize,
    mode: GsmpFlowMode,
    dual_tol: f64,
    out: *mut *mut GsmpFlowTrace,
) -> GsmpStatus {
    guard(|| {
        let mode = match mode {
            GsmpFlowMode::Fast => FlowMode::Fast,
            GsmpFlowMode::Reference => FlowMode::Reference,
            GsmpFlowMode::Dual => FlowMode::Dual { tol: dual_tol },
        };
        let t = flow_run(&href(w, "window")?.0, steps, mode)?;
        write(out, boxed(GsmpFlowTrace(t)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn gsmp_flow_free(t: *mut GsmpFlowTrace) {
    free(t)
}

/// Completed steps, and whether (and at which step) the run stopped early.
#[no_mangle]
pub unsafe extern "C" fn gsmp_flow_stop(
    t: *const GsmpFlowTrace,
    steps: *mut usize,
    stopped: *mut bool,
    stop_step: *mut usize,
) -> GsmpStatus {
    guard(|| {
        let t = &href(t, "trace")?.0;
        write(steps, t.steps(), "steps")?;
        write(stopped, t.stopped.is_some(), "stopped")?;
        write(stop_step, t.stopped.as_ref().map_or(t.steps(), |s| s.step), "stop_step")
    })
}

/// Extracted Jacobi coefficients `a(n)`, `b(n)` for `n = 0 .. steps - 1`.
#[no_mangle]
pub unsafe extern "C" fn gsmp_flow_jacobi(
    t: *const GsmpFlowTrace,
    a: *mut f64,
    b: *mut f64,
    cap: usize,
    len: *mut usize,
) -> GsmpStatus {
    guard(|| {
        let j = extract_jacobi(&href(t, "trace")?.0)?;
        write(len, j.len(), "len")?;
        write_array(a, cap, &j.a, "a")?;
        write_array(b, cap, &j.b, "b")
    })
}

/// `delta_J H_+` of the window for the potential.
#[no_mangle]
pub unsafe extern "C" fn gsmp_ks_delta(
    w: *const GsmpWindow,
    pot: *const GsmpPotential,
    out: *mut f64,
) -> GsmpStatus {
    guard(|| {
        let d = gsmp::analysis::ks_delta(&href(w, "window")?.0, &href(pot, "potential")?.0)?;
        write(out, d, "out")
    })
}

/// Runs the acceptance checks; `passed` receives the number that passed.
#[no_mangle]
pub unsafe extern "C" fn gsmp_verify(passed: *mut u32, total: *mut u32) -> GsmpStatus {
    guard(|| {
        let r = gsmp::workbench::run_all();
        write(passed, r.iter().filter(|c| c.passed).count() as u32, "passed")?;
        write(total, r.len() as u32, "total")
    })
}
