//! C interface to `urnwalk`.
//!
//! A model is built from experiment-config text and handed out as an opaque
//! `UwModel*`. Every call returns a `UwStatus`; on failure the message is
//! available from `uw_last_error_message` on the same thread. Results are
//! written through caller-owned out-pointers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use urnwalk::asymptotics::{analyze, Regime, Scaling};
use urnwalk::config::ExperimentConfig;
use urnwalk::experiment::{run_experiment, write_outputs};
use urnwalk::fixed_point::{solve_fixed_point, FixedPointOptions, FixedPointReport, MapKind};
use urnwalk::operators::{h0_eval, hn_eval};
use urnwalk::simulator::{run_ensemble, DeviationSpec};
use urnwalk::{Error, SimplexPoint};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    SampleSize = 4,
    Domain = 5,
    Convergence = 6,
    Capability = 7,
    Case = 8,
    Hypothesis = 9,
    Io = 10,
    Internal = 11,
}

impl From<&Error> for UwStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::ReinforcementRange { .. } => UwStatus::InvalidArgument,
            Error::SampleSize { .. } | Error::InvalidSize => UwStatus::SampleSize,
            Error::Domain(_) | Error::Integration { .. } => UwStatus::Domain,
            Error::Capability(_) | Error::CostGuard { .. } => UwStatus::Capability,
            Error::Convergence { .. } => UwStatus::Convergence,
            Error::Hypothesis(_) => UwStatus::Hypothesis,
            Error::Case(_) => UwStatus::Case,
            Error::Config { .. } => UwStatus::Config,
            Error::Replication { source, .. } => UwStatus::from(source.as_ref()),
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => UwStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UwRegime {
    D1Critical = 0,
    D2Superdiffusive = 1,
    D3aGaussian = 2,
    D3bGaussian = 3,
    D3cGaussianJordan = 4,
}

impl From<Regime> for UwRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::D1Critical => UwRegime::D1Critical,
            Regime::D2Superdiffusive => UwRegime::D2Superdiffusive,
            Regime::D3aGaussian => UwRegime::D3aGaussian,
            Regime::D3bGaussian => UwRegime::D3bGaussian,
            Regime::D3cGaussianJordan => UwRegime::D3cGaussianJordan,
        }
    }
}

/// Opaque model handle.
pub struct UwModel {
    config: ExperimentConfig,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UwFixedPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub rho: f64,
    pub residual: f64,
    /// NaN when no margin could be computed.
    pub margin: f64,
    pub iterations: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UwAsymptotics {
    pub regime: UwRegime,
    /// Deviations are multiplied by `n^scaling_exponent`, further divided
    /// by `sqrt(log n)` when `log_correction` is set.
    pub scaling_exponent: f64,
    pub log_correction: bool,
    pub has_sigma: bool,
    /// Row-major 3×3 limit covariance.
    pub sigma: [f64; 9],
    pub has_direction: bool,
    pub direction: [f64; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UwEnsembleSummary {
    pub n: u64,
    pub replications: u64,
    pub mean: [f64; 3],
    /// Row-major sample covariance of the proportions.
    pub cov: [f64; 9],
    pub has_deviation: bool,
    /// Row-major sample covariance of the scaled deviations.
    pub deviation_cov: [f64; 9],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (UwStatus, String)>) -> UwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            UwStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (UwStatus, String) {
    (UwStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (UwStatus, String) {
    (UwStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (UwStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (UwStatus::InvalidArgument, format!("`{what}` is not valid UTF-8")))
}

unsafe fn model_arg<'a>(m: *const UwModel) -> Result<&'a UwModel, (UwStatus, String)> {
    // SAFETY: non-null handles come from `uw_model_new`.
    unsafe { m.as_ref() }.ok_or_else(|| null("model"))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (UwStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null out-pointers point to writable storage for a `T`.
    unsafe { out.write(value) };
    Ok(())
}

fn fixed_point(model: &UwModel) -> Result<FixedPointReport, Error> {
    let run = &model.config.run;
    solve_fixed_point(MapKind::for_law(&run.law), &run.spec, &run.params, &run.law, &FixedPointOptions::default())
}

fn rows_to_flat(r: &[[f64; 3]; 3]) -> [f64; 9] {
    std::array::from_fn(|i| r[i / 3][i % 3])
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn uw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses experiment-config text into a new model.
///
/// # Safety
/// `config_text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uw_model_new(config_text: *const c_char, out: *mut *mut UwModel) -> UwStatus {
    guard(|| {
        let text = unsafe { str_arg(config_text, "config_text") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ExperimentConfig::parse(text).map_err(lib_err)?;
        let handle = Box::into_raw(Box::new(UwModel { config }));
        unsafe { write_out(out, handle, "out") }
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from `uw_model_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn uw_model_free(model: *mut UwModel) {
    if !model.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uw_fixed_point(model: *const UwModel, out: *mut UwFixedPoint) -> UwStatus {
    guard(|| {
        let m = unsafe { model_arg(model) }?;
        let r = fixed_point(m).map_err(lib_err)?;
        let fp = UwFixedPoint {
            x: r.x_star,
            y: r.y_star,
            z: r.z_star,
            alpha: r.alpha_star,
            beta: r.beta_star,
            kappa: r.kappa,
            rho: r.rho,
            residual: r.residual,
            margin: r.margin.unwrap_or(f64::NAN),
            iterations: r.iterations as u64,
        };
        unsafe { write_out(out, fp, "out") }
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uw_asymptotics(model: *const UwModel, out: *mut UwAsymptotics) -> UwStatus {
    guard(|| {
        let m = unsafe { model_arg(model) }?;
        let a = fixed_point(m).and_then(|fp| analyze(&fp)).map_err(lib_err)?;
        let (scaling_exponent, log_correction) = match a.scaling {
            Scaling::SqrtN => (0.5, false),
            Scaling::SqrtNOverLogN => (0.5, true),
            Scaling::PowerRho { rho } => (rho, false),
        };
        let res = UwAsymptotics {
            regime: a.regime.into(),
            scaling_exponent,
            log_correction,
            has_sigma: a.sigma.is_some(),
            sigma: a.sigma.as_ref().map_or([0.0; 9], rows_to_flat),
            has_direction: a.direction.is_some(),
            direction: a.direction.unwrap_or([0.0; 3]),
        };
        unsafe { write_out(out, res, "out") }
    })
}

/// Runs the configured ensemble and reports the final checkpoint.
/// Deviations are scaled for the model's regime when one applies.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uw_simulate(model: *const UwModel, out: *mut UwEnsembleSummary) -> UwStatus {
    guard(|| {
        let m = unsafe { model_arg(model) }?;
        let fp = fixed_point(m).map_err(lib_err)?;
        let deviation = analyze(&fp)
            .ok()
            .map(|a| DeviationSpec { centre: [fp.x_star, fp.y_star, fp.z_star], scaling: a.scaling });
        let stats = run_ensemble(&m.config.run, deviation).map_err(lib_err)?;
        let last = stats.last();
        let res = UwEnsembleSummary {
            n: last.n,
            replications: stats.replications,
            mean: last.mean,
            cov: rows_to_flat(&last.cov),
            has_deviation: last.dev_cov.is_some(),
            deviation_cov: last.dev_cov.as_ref().map_or([0.0; 9], rows_to_flat),
        };
        unsafe { write_out(out, res, "out") }
    })
}

/// Runs the full experiment, writes the report files to `out_dir` (or the
/// configured directory when NULL) and stores the exit status (0 pass,
/// 1 statistical failure) in `exit_status`.
///
/// # Safety
/// `model` must be a live handle; `out_dir` NULL or NUL-terminated;
/// `exit_status` writable.
#[no_mangle]
pub unsafe extern "C" fn uw_run_experiment(
    model: *const UwModel,
    out_dir: *const c_char,
    exit_status: *mut i32,
) -> UwStatus {
    guard(|| {
        let m = unsafe { model_arg(model) }?;
        if exit_status.is_null() {
            return Err(null("exit_status"));
        }
        let dir = if out_dir.is_null() {
            m.config.output.clone()
        } else {
            PathBuf::from(unsafe { str_arg(out_dir, "out_dir") }?)
        };
        let report = run_experiment(&m.config).map_err(lib_err)?;
        write_outputs(&report, &dir).map_err(lib_err)?;
        unsafe { write_out(exit_status, report.exit_status(), "exit_status") }
    })
}

/// `g(x, y) = p F(x, y) + (1 - p)(1 - F(x, y))`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uw_g_eval(model: *const UwModel, x: f64, y: f64, out: *mut f64) -> UwStatus {
    guard(|| {
        let m = unsafe { model_arg(model) }?;
        let run = &m.config.run;
        let pt = SimplexPoint::new(x, y).map_err(lib_err)?;
        let v = run.spec.eval_g(&run.params, pt).map_err(lib_err)?;
        unsafe { write_out(out, v, "out") }
    })
}

/// `H_0(x, y)`; needs a fixed sample-size law.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uw_h0_eval(model: *const UwModel, x: f64, y: f64, out: *mut f64) -> UwStatus {
    guard(|| {
        let m = unsafe { model_arg(model) }?;
        let run = &m.config.run;
        let pt = SimplexPoint::new(x, y).map_err(lib_err)?;
        let v = h0_eval(&run.spec, &run.params, &run.law, pt).map_err(lib_err)?;
        unsafe { write_out(out, v, "out") }
    })
}

/// `H_n(x, y)` for the configured law at epoch `n`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uw_hn_eval(model: *const UwModel, n: u64, x: f64, y: f64, out: *mut f64) -> UwStatus {
    guard(|| {
        let m = unsafe { model_arg(model) }?;
        let run = &m.config.run;
        let pt = SimplexPoint::new(x, y).map_err(lib_err)?;
        let v = hn_eval(&run.spec, &run.params, &run.law, n, pt).map_err(lib_err)?;
        unsafe { write_out(out, v, "out") }
    })
}
