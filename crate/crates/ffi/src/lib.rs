//! C ABI over `toa-lab`.
//!
//! Every function returns a [`TlStatus`]; results come back through out-pointers.
//! Objects are opaque handles released with the matching `*_free`. After a
//! failure, [`tl_last_error_message`] describes it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use toa_lab::et::{self, EtApparatusState, EtJointDistribution};
use toa_lab::kijowski;
use toa_lab::numerics::GridSpec;
use toa_lab::phase_space::{ApparatusWindow1D, CohenKernel};
use toa_lab::state::State;
use toa_lab::toa::{self, KwSource, ToaDistribution, ToaKind};
use toa_lab::Error;

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    NonConvergence = 4,
    NonFinite = 5,
    GridTooCoarse = 6,
    KernelSingular = 7,
    EnergyCutoffTooLow = 8,
    Unsupported = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Uniform grid `min, …, max` with `n` points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlGrid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

/// A particle state.
pub struct TlState(State);

/// Energy-time apparatus.
pub struct TlEtApparatus(EtApparatusState);

/// Arrival-time density on a grid.
pub struct TlDistribution(ToaDistribution);

/// Energy-time joint density on a grid, row-major in `μE`.
pub struct TlEtJoint(EtJointDistribution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TlStatus {
    match e {
        Error::NonConvergence { .. } => TlStatus::NonConvergence,
        Error::NonFinite { .. } => TlStatus::NonFinite,
        Error::GridTooCoarse(_) => TlStatus::GridTooCoarse,
        Error::InvalidGrid { .. } => TlStatus::InvalidGrid,
        Error::KernelSingular(_) => TlStatus::KernelSingular,
        Error::EnergyCutoffTooLow { .. } => TlStatus::EnergyCutoffTooLow,
        Error::InvalidInput(_) => TlStatus::InvalidArgument,
        Error::Unsupported(_) => TlStatus::Unsupported,
    }
}

struct Fail(TlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(TlStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, converting errors and panics into a status and the last-error message.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> TlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TlStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            TlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(out: *mut T, v: T, name: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(v);
    Ok(())
}

unsafe fn write_handle<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    write_out(out, Box::into_raw(Box::new(v)), "out")
}

fn grid(g: TlGrid, field: &str) -> Result<GridSpec, Fail> {
    let spec = GridSpec { min: g.min, max: g.max, n: g.n };
    spec.validate(field)?;
    Ok(spec)
}

unsafe fn copy_values(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < values.len() {
        return Err(Fail(TlStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn tl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Single Gaussian packet in atomic units.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_state_gaussian(x0: f64, k0: f64, delta: f64, out: *mut *mut TlState) -> TlStatus {
    guard(|| write_handle(out, TlState(State::gaussian(x0, k0, delta)?)))
}

/// State from a JSON descriptor.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_state_from_json(json: *const c_char, out: *mut *mut TlState) -> TlStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(TlStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        write_handle(out, TlState(State::from_json(text)?))
    })
}

/// # Safety
/// `state` must come from a `tl_state_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_state_free(state: *mut TlState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_et_apparatus_new(spread_i: f64, spread_f: f64, out: *mut *mut TlEtApparatus) -> TlStatus {
    guard(|| write_handle(out, TlEtApparatus(EtApparatusState::new(spread_i, spread_f)?)))
}

/// # Safety
/// `app` must come from [`tl_et_apparatus_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_et_apparatus_free(app: *mut TlEtApparatus) {
    if !app.is_null() {
        drop(Box::from_raw(app));
    }
}

/// Arrival-time densities selectable through [`tl_toa_distribution`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlToaKind {
    /// Position-momentum readout with a Gaussian window of width `sigma`.
    Kw = 0,
    /// Covariant density of the Wigner function; `sigma` is ignored.
    DeltaWigner = 1,
    /// `Π_J̃` with the spectrogram kernel of width `sigma`.
    JTilde = 2,
    /// Kijowski's density; `sigma` is ignored.
    Kijowski = 3,
    /// von Neumann time pointer of width `sigma`.
    VonNeumann = 4,
}

impl TlToaKind {
    fn from_raw(v: c_int) -> Result<Self, Fail> {
        Ok(match v {
            0 => TlToaKind::Kw,
            1 => TlToaKind::DeltaWigner,
            2 => TlToaKind::JTilde,
            3 => TlToaKind::Kijowski,
            4 => TlToaKind::VonNeumann,
            _ => return Err(Fail(TlStatus::InvalidArgument, format!("unknown distribution kind {v}"))),
        })
    }
}

fn toa_table(state: &State, kind: TlToaKind, sigma: f64, t: f64, g: &GridSpec) -> Result<ToaDistribution, Fail> {
    let window = || ApparatusWindow1D::unbiased(sigma);
    Ok(match kind {
        TlToaKind::Kw => toa::pi_kw_distribution(&KwSource::Measured { state, window: window()? }, t, g)?,
        TlToaKind::DeltaWigner => ToaDistribution::tabulate(ToaKind::DeltaWigner, t, g, |tt| toa::pi_delta_wigner(state, tt, t))?,
        TlToaKind::JTilde => {
            let k = CohenKernel::spectrogram(window()?, state.constants().hbar);
            ToaDistribution::tabulate(ToaKind::JTilde(k.id()), t, g, |tt| toa::pi_j_tilde(state, &k, tt, t))?
        }
        TlToaKind::Kijowski => kijowski::pi_k_distribution(state, t, g)?,
        TlToaKind::VonNeumann => kijowski::von_neumann_distribution(state, &window()?, t, g)?,
    })
}

/// Tabulates the [`TlToaKind`] density `kind` over `grid_spec` for reference time `t`.
///
/// # Safety
/// `state` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_toa_distribution(
    state: *const TlState,
    kind: c_int,
    sigma: f64,
    t: f64,
    grid_spec: TlGrid,
    out: *mut *mut TlDistribution,
) -> TlStatus {
    guard(|| {
        let s = &deref(state, "state")?.0;
        let g = grid(grid_spec, "grid")?;
        write_handle(out, TlDistribution(toa_table(s, TlToaKind::from_raw(kind)?, sigma, t, &g)?))
    })
}

/// Kijowski's density at a single `T`.
///
/// # Safety
/// `state` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_pi_kijowski(state: *const TlState, t_arrival: f64, t: f64, out: *mut f64) -> TlStatus {
    guard(|| write_out(out, kijowski::pi_k(&deref(state, "state")?.0, t_arrival, t)?, "out"))
}

/// Number of grid points.
///
/// # Safety
/// `dist` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_distribution_len(dist: *const TlDistribution, out: *mut usize) -> TlStatus {
    guard(|| write_out(out, deref(dist, "dist")?.0.values.len(), "out"))
}

/// Copies the values into `buf`, which holds `len` doubles.
///
/// # Safety
/// `dist` must be a live handle; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tl_distribution_values(dist: *const TlDistribution, buf: *mut f64, len: usize) -> TlStatus {
    guard(|| copy_values(&deref(dist, "dist")?.0.values, buf, len))
}

/// Trapezoid mass over the grid.
///
/// # Safety
/// `dist` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_distribution_norm_estimate(dist: *const TlDistribution, out: *mut f64) -> TlStatus {
    guard(|| write_out(out, deref(dist, "dist")?.0.norm_estimate, "out"))
}

/// # Safety
/// `dist` must come from a distribution constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_distribution_free(dist: *mut TlDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// `ρ(μE,μT)` at one point, with the default energy cutoff.
///
/// # Safety
/// `state` and `app` must be live handles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_rho_et(
    state: *const TlState,
    app: *const TlEtApparatus,
    mu_e: f64,
    mu_t: f64,
    t: f64,
    out: *mut f64,
) -> TlStatus {
    guard(|| {
        let (s, a) = (&deref(state, "state")?.0, &deref(app, "app")?.0);
        write_out(out, et::rho_et_direct(s, a, mu_e, mu_t, t, et::default_energy_cutoff(s, a))?, "out")
    })
}

/// Joint density on `mu_e_grid × mu_t_grid`.
///
/// # Safety
/// `state` and `app` must be live handles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_et_joint(
    state: *const TlState,
    app: *const TlEtApparatus,
    t: f64,
    mu_e_grid: TlGrid,
    mu_t_grid: TlGrid,
    out: *mut *mut TlEtJoint,
) -> TlStatus {
    guard(|| {
        let (s, a) = (&deref(state, "state")?.0, &deref(app, "app")?.0);
        let (ge, gt) = (grid(mu_e_grid, "mu_e_grid")?, grid(mu_t_grid, "mu_t_grid")?);
        write_handle(out, TlEtJoint(et::et_joint_distribution(s, a, t, &ge, &gt)?))
    })
}

/// Number of values (`μE` points times `μT` points).
///
/// # Safety
/// `joint` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_et_joint_len(joint: *const TlEtJoint, out: *mut usize) -> TlStatus {
    guard(|| write_out(out, deref(joint, "joint")?.0.values.len(), "out"))
}

/// Copies the row-major values into `buf`, which holds `len` doubles.
///
/// # Safety
/// `joint` must be a live handle; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tl_et_joint_values(joint: *const TlEtJoint, buf: *mut f64, len: usize) -> TlStatus {
    guard(|| copy_values(&deref(joint, "joint")?.0.values, buf, len))
}

/// Trapezoid mass over both grids.
///
/// # Safety
/// `joint` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_et_joint_mass(joint: *const TlEtJoint, out: *mut f64) -> TlStatus {
    guard(|| write_out(out, deref(joint, "joint")?.0.mass(), "out"))
}

/// `μT` marginal of a joint density as a new distribution handle.
///
/// # Safety
/// `joint` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_et_joint_time_marginal(joint: *const TlEtJoint, out: *mut *mut TlDistribution) -> TlStatus {
    guard(|| write_handle(out, TlDistribution(et::toa_marginal_et(&deref(joint, "joint")?.0)?)))
}

/// # Safety
/// `joint` must come from [`tl_et_joint`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_et_joint_free(joint: *mut TlEtJoint) {
    if !joint.is_null() {
        drop(Box::from_raw(joint));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_a_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, TlStatus::Panic);
        let msg = unsafe { CStr::from_ptr(tl_last_error_message()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
    }
}
