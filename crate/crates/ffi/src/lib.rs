//! C ABI over `structkde`.
//!
//! Objects cross the boundary as opaque handles created by `sk_*_new` and
//! released by the matching `sk_*_free`. Every fallible call returns an
//! [`SkStatus`] and writes its result through an out-pointer only on success;
//! the message of the last failure on the calling thread is available from
//! [`sk_last_error`]. Angles are in degrees. Panics are caught at the
//! boundary and reported as `SK_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use structkde::cli::run_experiment;
use structkde::config::ExperimentConfig;
use structkde::estimator::{auxiliary_estimate, product_estimate, UStatMode};
use structkde::selector::{minimax_select, AdaptiveRule, MinimaxOptions};
use structkde::{Error, Kernel, Marginal, Model, Rotation, RotationNet, Sample};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SampleTooSmall = 3,
    Certification = 4,
    Numeric = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

/// U-statistic evaluation strategy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkMode {
    Naive = 0,
    Pruned = 1,
}

/// Outcome of a selection rule.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SkSelection {
    pub h_hat: f64,
    /// Selected rotation angle in degrees.
    pub theta_q: f64,
    pub q_index: usize,
    pub estimate: f64,
    /// `Û_n` of the adaptive stage.
    pub u_hat: f64,
}

pub struct SkKernel(Kernel);
pub struct SkSample(Sample);
pub struct SkModel(Model);
pub struct SkNet(RotationNet);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &Error) -> SkStatus {
    match e {
        Error::InvalidArgument { .. } | Error::Parse(_) => SkStatus::InvalidArgument,
        Error::SampleTooSmall { .. } => SkStatus::SampleTooSmall,
        Error::Certification(_) => SkStatus::Certification,
        Error::QuadratureNotConverged { .. } => SkStatus::Numeric,
        Error::Replication { source, .. } => status_of(source),
        Error::Config { .. } => SkStatus::Config,
        Error::Io(_) => SkStatus::Io,
    }
}

fn call<F>(f: F) -> SkStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SkStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error(&format!("null pointer passed as `{name}`"));
            SkStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("panic inside structkde");
            SkStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or points to a live `T`.
unsafe fn get<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

/// # Safety
/// `p` is null or valid for writes of `T`.
unsafe fn put<T>(p: *mut T, name: &'static str, v: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    p.write(v);
    Ok(())
}

fn check_out<T>(p: *mut T, name: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::Null(name))
    } else {
        Ok(())
    }
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Legendre kernel with vanishing moments up to `2 * order_floor + 1`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_kernel_new(order_floor: usize, out: *mut *mut SkKernel) -> SkStatus {
    call(|| {
        check_out(out, "out")?;
        if order_floor > 12 {
            return Err(Error::InvalidArgument {
                name: "order_floor",
                reason: format!("must be at most 12, got {order_floor}"),
            }
            .into());
        }
        put(out, "out", boxed(SkKernel(Kernel::new(order_floor))))
    })
}

/// # Safety
/// `k` must be null or a handle from [`sk_kernel_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_kernel_free(k: *mut SkKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// # Safety
/// `k` must be a live kernel handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_kernel_eval(k: *const SkKernel, u: f64, out: *mut f64) -> SkStatus {
    call(|| {
        let k = get(k, "kernel")?;
        put(out, "out", k.0.eval(u))
    })
}

/// Sample from `n` interleaved coordinate pairs `x0, y0, x1, y1, ...`.
///
/// # Safety
/// `xy` must point to `2 * n` readable doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_sample_new(xy: *const f64, n: usize, out: *mut *mut SkSample) -> SkStatus {
    call(|| {
        check_out(out, "out")?;
        if xy.is_null() {
            return Err(Failure::Null("xy"));
        }
        let flat = std::slice::from_raw_parts(xy, 2 * n);
        let points = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        put(out, "out", boxed(SkSample(Sample::from_points(points)?)))
    })
}

/// # Safety
/// `s` must be a live sample handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_sample_len(s: *const SkSample, out: *mut usize) -> SkStatus {
    call(|| put(out, "out", get(s, "sample")?.0.len()))
}

/// # Safety
/// `s` must be null or a sample handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_sample_free(s: *mut SkSample) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Perturbed Gaussian marginals (`ε = eps`) in `H(beta, l)`, rotated by `theta` degrees.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_model_perturbed(beta: f64, l: f64, eps: f64, theta: f64, out: *mut *mut SkModel) -> SkStatus {
    call(|| {
        check_out(out, "out")?;
        let m = Marginal::perturbed(beta, l, eps)?;
        let model = Model::new(m.clone(), m, Rotation::from_degrees(theta)?, beta, l)?;
        put(out, "out", boxed(SkModel(model)))
    })
}

/// Independent Gaussian marginals with scales `sigma1`, `sigma2`, rotated by `theta` degrees.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_model_gaussian(
    sigma1: f64,
    sigma2: f64,
    theta: f64,
    beta: f64,
    l: f64,
    out: *mut *mut SkModel,
) -> SkStatus {
    call(|| {
        check_out(out, "out")?;
        let model = Model::new(
            Marginal::gaussian(sigma1)?,
            Marginal::gaussian(sigma2)?,
            Rotation::from_degrees(theta)?,
            beta,
            l,
        )?;
        put(out, "out", boxed(SkModel(model)))
    })
}

/// # Safety
/// `m` must be a live model handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_model_density(m: *const SkModel, x: f64, y: f64, out: *mut f64) -> SkStatus {
    call(|| put(out, "out", get(m, "model")?.0.density([x, y])))
}

/// # Safety
/// `m` must be a live model handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_model_sample(m: *const SkModel, n: usize, seed: u64, out: *mut *mut SkSample) -> SkStatus {
    call(|| {
        check_out(out, "out")?;
        let s = get(m, "model")?.0.sample(n, seed)?;
        put(out, "out", boxed(SkSample(s)))
    })
}

/// # Safety
/// `m` must be null or a model handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_model_free(m: *mut SkModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Uniform net on `[0°, 90°)` with separation at least `delta`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_net_new(delta: f64, out: *mut *mut SkNet) -> SkStatus {
    call(|| {
        check_out(out, "out")?;
        put(out, "out", boxed(SkNet(RotationNet::build(delta)?)))
    })
}

/// # Safety
/// `net` must be a live net handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_net_len(net: *const SkNet, out: *mut usize) -> SkStatus {
    call(|| put(out, "out", get(net, "net")?.0.len()))
}

/// Angle of member `index` in degrees.
///
/// # Safety
/// `net` must be a live net handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_net_angle(net: *const SkNet, index: usize, out: *mut f64) -> SkStatus {
    call(|| {
        let net = get(net, "net")?;
        let m = net.0.members().get(index).ok_or_else(|| Error::InvalidArgument {
            name: "index",
            reason: format!("{index} out of range for a net of {}", net.0.len()),
        })?;
        put(out, "out", m.theta().to_degrees())
    })
}

/// # Safety
/// `net` must be null or a net handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_net_free(net: *mut SkNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Product estimator along the rotation `theta_d` (degrees).
///
/// # Safety
/// Handles must be live and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_product_estimate(
    k: *const SkKernel,
    s: *const SkSample,
    x: f64,
    y: f64,
    h: f64,
    theta_d: f64,
    out: *mut f64,
) -> SkStatus {
    call(|| {
        let (k, s) = (get(k, "kernel")?, get(s, "sample")?);
        check_out(out, "out")?;
        let v = product_estimate(&k.0, &s.0, [x, y], h, &Rotation::from_degrees(theta_d)?)?;
        put(out, "out", v)
    })
}

/// Combined estimator for the rotation pair `(theta_d, theta_q)` (degrees).
///
/// # Safety
/// Handles must be live and `out` valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sk_auxiliary_estimate(
    k: *const SkKernel,
    s: *const SkSample,
    x: f64,
    y: f64,
    h: f64,
    theta_d: f64,
    theta_q: f64,
    mode: SkMode,
    out: *mut f64,
) -> SkStatus {
    call(|| {
        let (k, s) = (get(k, "kernel")?, get(s, "sample")?);
        check_out(out, "out")?;
        let mode = match mode {
            SkMode::Naive => UStatMode::Naive,
            SkMode::Pruned => UStatMode::Pruned,
        };
        let d = Rotation::from_degrees(theta_d)?;
        let q = Rotation::from_degrees(theta_q)?;
        put(out, "out", auxiliary_estimate(&k.0, &s.0, [x, y], h, &d, &q, mode)?)
    })
}

/// Adaptive rule with multiplier `a_mult` on the theoretical constant.
///
/// # Safety
/// Handles must be live and `out` valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sk_adaptive_select(
    k: *const SkKernel,
    s: *const SkSample,
    net: *const SkNet,
    x: f64,
    y: f64,
    p: f64,
    a_mult: f64,
    out: *mut SkSelection,
) -> SkStatus {
    call(|| {
        let (k, s, net) = (get(k, "kernel")?, get(s, "sample")?, get(net, "net")?);
        check_out(out, "out")?;
        let mb = k.0.order_floor().max(1) as f64;
        let r = AdaptiveRule::new(k.0.clone(), net.0.clone(), p, a_mult, mb)?.select(&s.0, [x, y])?;
        put(
            out,
            "out",
            SkSelection {
                h_hat: r.h_hat,
                theta_q: r.q_hat.theta().to_degrees(),
                q_index: r.q_index,
                estimate: r.estimate,
                u_hat: r.u_hat,
            },
        )
    })
}

/// Minimax rule for known `(beta, l)` with multiplier `b_mult`.
///
/// # Safety
/// Handles must be live and `out` valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sk_minimax_select(
    k: *const SkKernel,
    s: *const SkSample,
    net: *const SkNet,
    x: f64,
    y: f64,
    beta: f64,
    l: f64,
    p: f64,
    b_mult: f64,
    no_split: bool,
    out: *mut SkSelection,
) -> SkStatus {
    call(|| {
        let (k, s, net) = (get(k, "kernel")?, get(s, "sample")?, get(net, "net")?);
        check_out(out, "out")?;
        let opts = MinimaxOptions {
            b_mult,
            p,
            no_split,
            ..MinimaxOptions::default()
        };
        let r = minimax_select(&s.0, [x, y], &net.0, &k.0, beta, l, opts)?;
        put(
            out,
            "out",
            SkSelection {
                h_hat: r.h_hat,
                theta_q: r.q_hat.theta().to_degrees(),
                q_index: r.q_index,
                estimate: r.estimate,
                u_hat: r.stage0.u_hat,
            },
        )
    })
}

/// Runs a risk experiment from its JSON config and returns the report CSV,
/// to be released with [`sk_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sk_risk_report(config_json: *const c_char, out: *mut *mut c_char) -> SkStatus {
    call(|| {
        check_out(out, "out")?;
        if config_json.is_null() {
            return Err(Failure::Null("config_json"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| Error::Parse(format!("config is not UTF-8: {e}")))?;
        let cfg = ExperimentConfig::from_json(text)?;
        let (_, _, csv) = run_experiment(&cfg)?;
        let c = CString::new(csv).map_err(|e| Error::Parse(e.to_string()))?;
        put(out, "out", c.into_raw())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
