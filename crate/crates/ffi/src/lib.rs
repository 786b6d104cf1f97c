//! C ABI for `relwalk`.
//!
//! Every fallible function returns an [`RwStatus`]; on failure a message is
//! available from [`rw_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Complex arrays
//! are interleaved `(re, im)` pairs.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use relwalk::fick::{heuristic_density, heuristic_peak, metric_from_density};
use relwalk::qwalk::{build_coin, step_walk, total_probability, CoinAngles, WalkState};
use relwalk::roup::{default_dt, simulate_profiles, DensityProfile, RoupParams};
use relwalk::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Coin angles, as in the library.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwCoinAngles {
    pub theta: f64,
    pub xi: f64,
    pub zeta: f64,
    pub alpha: f64,
}

impl From<RwCoinAngles> for CoinAngles {
    fn from(a: RwCoinAngles) -> Self {
        CoinAngles { theta: a.theta, xi: a.xi, zeta: a.zeta, alpha: a.alpha }
    }
}

/// Walk on a periodic ring with one coin at every site.
pub struct RwWalk {
    state: WalkState,
    angles: CoinAngles,
}

/// Density profile from one relativistic OU run.
pub struct RwRoupRun {
    profile: DensityProfile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RwStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_config() || matches!(e, Error::Contract(_) | Error::NonPositiveTime(_) | Error::NoInteriorPeak(_)) {
            RwStatus::InvalidArgument
        } else {
            RwStatus::Numerical
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RwStatus::NullPointer, format!("{what} is null"))
}

fn too_small(len: usize, need: usize) -> Failure {
    Failure(RwStatus::BufferTooSmall, format!("buffer holds {len} values, {need} needed"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> RwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RwStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            RwStatus::Panic
        }
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Writes the 2×2 coin row-major into `out` (8 doubles, interleaved).
///
/// # Safety
/// `out` must point to 8 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rw_build_coin(angles: RwCoinAngles, out: *mut f64) -> RwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let b = build_coin(&angles.into());
        let out = std::slice::from_raw_parts_mut(out, 8);
        for (k, z) in b.iter().flatten().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
        Ok(())
    })
}

/// New walk of `sites` sites labelled `0..sites`, all amplitude in the
/// lower component at `sites/2`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn rw_walk_new(sites: usize, angles: RwCoinAngles, out: *mut *mut RwWalk) -> RwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let a: CoinAngles = angles.into();
        if ![a.theta, a.xi, a.zeta, a.alpha].iter().all(|v| v.is_finite()) {
            return Err(Failure(RwStatus::InvalidArgument, "coin angles must be finite".into()));
        }
        let state = WalkState::single_site(sites, 0, (sites / 2) as i64, false)?;
        *out = Box::into_raw(Box::new(RwWalk { state, angles: a }));
        Ok(())
    })
}

/// # Safety
/// `walk` must come from [`rw_walk_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rw_walk_free(walk: *mut RwWalk) {
    if !walk.is_null() {
        drop(Box::from_raw(walk));
    }
}

/// # Safety
/// `walk` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rw_walk_sites(walk: *const RwWalk, out: *mut usize) -> RwStatus {
    guard(|| {
        let walk = walk.as_ref().ok_or_else(|| null("walk"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = walk.state.sites();
        Ok(())
    })
}

/// Replaces the amplitudes. Each array holds `2·len` doubles and `len` must
/// equal the number of sites.
///
/// # Safety
/// Both arrays must hold `2·len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn rw_walk_set_state(
    walk: *mut RwWalk,
    minus: *const f64,
    plus: *const f64,
    len: usize,
) -> RwStatus {
    guard(|| {
        let walk = walk.as_mut().ok_or_else(|| null("walk"))?;
        if minus.is_null() || plus.is_null() {
            return Err(null("amplitude array"));
        }
        if len != walk.state.sites() {
            return Err(Failure(
                RwStatus::InvalidArgument,
                format!("expected {} sites, got {len}", walk.state.sites()),
            ));
        }
        let read = |p: *const f64| -> Vec<Complex64> {
            let s = std::slice::from_raw_parts(p, 2 * len);
            s.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
        };
        walk.state.psi_minus = read(minus);
        walk.state.psi_plus = read(plus);
        Ok(())
    })
}

/// Copies the amplitudes out; each array needs room for `2·sites` doubles.
///
/// # Safety
/// Both arrays must hold `2·len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rw_walk_get_state(
    walk: *const RwWalk,
    minus: *mut f64,
    plus: *mut f64,
    len: usize,
) -> RwStatus {
    guard(|| {
        let walk = walk.as_ref().ok_or_else(|| null("walk"))?;
        if minus.is_null() || plus.is_null() {
            return Err(null("amplitude array"));
        }
        let n = walk.state.sites();
        if len < n {
            return Err(too_small(len, n));
        }
        for (src, dst) in [(&walk.state.psi_minus, minus), (&walk.state.psi_plus, plus)] {
            let d = std::slice::from_raw_parts_mut(dst, 2 * n);
            for (k, z) in src.iter().enumerate() {
                d[2 * k] = z.re;
                d[2 * k + 1] = z.im;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `walk` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rw_walk_step(walk: *mut RwWalk, steps: usize) -> RwStatus {
    guard(|| {
        let walk = walk.as_mut().ok_or_else(|| null("walk"))?;
        let angles = walk.angles;
        let field = move |_: i64, _: i64| angles;
        for _ in 0..steps {
            walk.state = step_walk(&walk.state, &field);
        }
        Ok(())
    })
}

/// `Σ_m |ψ⁻_m|² + |ψ⁺_m|²`.
///
/// # Safety
/// `walk` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rw_walk_probability(walk: *const RwWalk, out: *mut f64) -> RwStatus {
    guard(|| {
        let walk = walk.as_ref().ok_or_else(|| null("walk"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = total_probability(&walk.state);
        Ok(())
    })
}

/// Simulates to time `t` on the default domain `|X| ≤ 1.5 QT`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn rw_roup_run(
    q: f64,
    t: f64,
    p_points: usize,
    x_points: usize,
    out: *mut *mut RwRoupRun,
) -> RwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::NonPositiveTime(t).into());
        }
        let params = RoupParams::with_resolution(q, t, p_points, x_points, default_dt(t))?;
        let profile = simulate_profiles(&params)?.remove(0);
        *out = Box::into_raw(Box::new(RwRoupRun { profile }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`rw_roup_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rw_roup_free(run: *mut RwRoupRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of X samples.
///
/// # Safety
/// `run` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rw_roup_points(run: *const RwRoupRun, out: *mut usize) -> RwStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = run.profile.x.len();
        Ok(())
    })
}

/// Copies `X`, `N` and `J`; any array may be NULL to skip it.
///
/// # Safety
/// Non-null arrays must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rw_roup_density(
    run: *const RwRoupRun,
    x: *mut f64,
    n: *mut f64,
    j: *mut f64,
    len: usize,
) -> RwStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let p = &run.profile;
        if len < p.x.len() {
            return Err(too_small(len, p.x.len()));
        }
        for (src, dst) in [(&p.x, x), (&p.n, n), (&p.j, j)] {
            if !dst.is_null() {
                std::slice::from_raw_parts_mut(dst, src.len()).copy_from_slice(src);
            }
        }
        Ok(())
    })
}

/// Metric `g` and `h` on the X grid, NaN where the density is below the
/// floor; `valid` (optional) receives 1 where defined.
///
/// # Safety
/// Non-null arrays must hold `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn rw_roup_metric(
    run: *const RwRoupRun,
    g: *mut f64,
    h: *mut f64,
    valid: *mut u8,
    len: usize,
) -> RwStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let m = metric_from_density(&run.profile)?;
        if len < m.g.len() {
            return Err(too_small(len, m.g.len()));
        }
        for (src, dst) in [(&m.g, g), (&m.h, h)] {
            if !dst.is_null() {
                std::slice::from_raw_parts_mut(dst, src.len()).copy_from_slice(src);
            }
        }
        if !valid.is_null() {
            let v = std::slice::from_raw_parts_mut(valid, m.valid.len());
            for (d, s) in v.iter_mut().zip(&m.valid) {
                *d = u8::from(*s);
            }
        }
        Ok(())
    })
}

/// Unnormalised short-time density at `(T, X)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rw_heuristic_density(t: f64, x: f64, q: f64, out: *mut f64) -> RwStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(q > 0.0 && q.is_finite()) {
            return Err(Failure(RwStatus::InvalidArgument, format!("Q must be positive, got {q}")));
        }
        *out = heuristic_density(t, x, q);
        Ok(())
    })
}

/// Velocity `|X/T|` of the heuristic maxima; fails for `Q > √3`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rw_heuristic_peak(q: f64, out: *mut f64) -> RwStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = heuristic_peak(q)?;
        Ok(())
    })
}
