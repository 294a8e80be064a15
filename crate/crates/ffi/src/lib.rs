//! C ABI for `fracint`.
//!
//! Every fallible function returns a [`FracStatus`] and writes its result
//! through an out-pointer. On failure a human-readable message is kept per
//! thread and can be fetched with [`frac_last_error_message`]. Rules and
//! states are opaque heap handles released with their `*_free` function.
//!
//! Sources are passed as a [`FracSource`]: either a builtin tag (`"const"`,
//! `"zero"`, `"poly:<beta>"`, `"sin"`, `"cos"`, `"exp"`) or a callback with
//! a user-data pointer. The callback is only invoked during the call that
//! receives it and must not unwind.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use fracint::{
    binom_alternating_sum, build_diffusive_rule, evaluate_on_grid, gamma, init_state, make_order, phi_direct,
    rl_direct, rl_power_closed_form, DiffusiveState, Error, FractionalOrder, QuadratureRule, SourceFunction, Stepper,
    TimeGrid, TransformSpec,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracStatus {
    Ok = 0,
    NullPointer = 1,
    NonPositiveOrder = 2,
    IntegerOrder = 3,
    Pole = 4,
    Range = 5,
    Domain = 6,
    ToleranceNotMet = 7,
    Convergence = 8,
    UnsupportedTransform = 9,
    OrderOutOfRange = 10,
    InvalidArgument = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&Error> for FracStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonPositiveOrder(_) => FracStatus::NonPositiveOrder,
            Error::IntegerOrder(_) => FracStatus::IntegerOrder,
            Error::Pole(_) => FracStatus::Pole,
            Error::Range { .. } => FracStatus::Range,
            Error::Domain { .. } => FracStatus::Domain,
            Error::ToleranceNotMet { .. } => FracStatus::ToleranceNotMet,
            Error::Convergence(_) => FracStatus::Convergence,
            Error::UnsupportedTransform(_) => FracStatus::UnsupportedTransform,
            Error::OrderOutOfRange(_) => FracStatus::OrderOutOfRange,
            Error::InvalidArgument(_) => FracStatus::InvalidArgument,
        }
    }
}

/// Builtin transform families.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracTransformKind {
    /// `psi = exp(w)` on the real line.
    Exp = 0,
    /// `psi = w^2` on `(0, inf)`.
    Square = 1,
    /// `psi = w^(1 - alpha)` on `(0, inf)`, with alpha taken from the order.
    Power = 2,
    /// `psi = tan(pi w / 2)` on `(0, 1)`.
    Tan = 3,
    /// `psi = w^sigma / (1 - w)^rho` on `(0, 1)`.
    Rational = 4,
}

/// Transform descriptor. `sigma` and `rho` are read only for `Rational`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FracTransform {
    pub kind: FracTransformKind,
    pub sigma: f64,
    pub rho: f64,
}

/// Time-stepping schemes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracStepper {
    BackwardEuler = 0,
    /// Trapezoidal rule with a damped first step.
    Trapezoidal = 1,
    TrapezoidalUndamped = 2,
}

/// `f(t, user_data)`.
pub type FracSourceFn = Option<unsafe extern "C" fn(t: f64, user_data: *mut c_void) -> f64>;

/// Source function: a builtin `tag` if non-null, else `callback`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FracSource {
    pub tag: *const c_char,
    pub callback: FracSourceFn,
    pub user_data: *mut c_void,
}

/// Quadrature rule handle.
pub struct FracRule {
    inner: Arc<QuadratureRule>,
}

/// Diffusive state handle.
pub struct FracState {
    inner: DiffusiveState,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(FracStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(FracStatus::from(&e), e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn null(what: &str) -> Failure {
    Failure(FracStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(FracStatus::InvalidArgument, msg.into())
}

/// Runs `body`, records any error and converts panics to `Panic`.
fn guard(body: impl FnOnce() -> Outcome<()>) -> FracStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FracStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            FracStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T) -> Outcome<()> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn transform(order: &FractionalOrder, t: *const FracTransform) -> Outcome<TransformSpec> {
    let t = t.as_ref().ok_or_else(|| null("transform"))?;
    Ok(match t.kind {
        FracTransformKind::Exp => TransformSpec::Exp,
        FracTransformKind::Square => TransformSpec::Square,
        FracTransformKind::Power => TransformSpec::power_one_minus_alpha(order.alpha())?,
        FracTransformKind::Tan => TransformSpec::TanHalfPi,
        FracTransformKind::Rational => TransformSpec::rational(t.sigma, t.rho)?,
    })
}

struct Callback {
    f: unsafe extern "C" fn(f64, *mut c_void) -> f64,
    data: *mut c_void,
}

// The callback is used only on the calling thread for the duration of the
// call that received it.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Callback {
    fn call(&self, t: f64) -> f64 {
        unsafe { (self.f)(t, self.data) }
    }
}

unsafe fn source(s: *const FracSource, a: f64) -> Outcome<SourceFunction> {
    let s = s.as_ref().ok_or_else(|| null("source"))?;
    if !s.tag.is_null() {
        let tag = CStr::from_ptr(s.tag)
            .to_str()
            .map_err(|_| invalid("source tag is not UTF-8"))?;
        return Ok(SourceFunction::from_tag(tag, a)?);
    }
    let f = s.callback.ok_or_else(|| invalid("source needs a tag or a callback"))?;
    let cb = Callback { f, data: s.user_data };
    Ok(SourceFunction::custom(move |t| cb.call(t)))
}

fn stepper(s: FracStepper) -> Stepper {
    match s {
        FracStepper::BackwardEuler => Stepper::BackwardEuler,
        FracStepper::Trapezoidal => Stepper::Trapezoidal,
        FracStepper::TrapezoidalUndamped => Stepper::TrapezoidalUndamped,
    }
}

unsafe fn copy_out(src: &[f64], out: *mut f64, capacity: usize) -> Outcome<()> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if capacity < src.len() {
        return Err(Failure(
            FracStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", src.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns the full length
/// including the terminator. An empty message means the last call succeeded.
#[no_mangle]
pub unsafe extern "C" fn frac_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn frac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `n = ceil(alpha)` and the constant `c_alpha` of the diffusive kernel.
#[no_mangle]
pub unsafe extern "C" fn frac_order_constants(alpha: f64, n_out: *mut u32, c_alpha_out: *mut f64) -> FracStatus {
    guard(|| {
        let o = make_order(alpha)?;
        write(n_out, o.n())?;
        write(c_alpha_out, o.c_alpha())
    })
}

#[no_mangle]
pub unsafe extern "C" fn frac_gamma(x: f64, out: *mut f64) -> FracStatus {
    guard(|| write(out, gamma(x)?))
}

/// `sum_k (-1)^k C(n, k) k^mu`, which is zero for `mu < n`.
#[no_mangle]
pub unsafe extern "C" fn frac_binom_alternating_sum(n: u32, mu: u32, out: *mut i64) -> FracStatus {
    guard(|| {
        let v = binom_alternating_sum(n, mu)?;
        let v = i64::try_from(v).map_err(|_| Failure(FracStatus::Range, format!("sum {v} does not fit in 64 bits")))?;
        write(out, v)
    })
}

/// Fractional integral of `(t - a)^beta` in closed form.
#[no_mangle]
pub unsafe extern "C" fn frac_rl_power_closed_form(alpha: f64, beta: f64, a: f64, t: f64, out: *mut f64) -> FracStatus {
    guard(|| {
        let o = make_order(alpha)?;
        write(out, rl_power_closed_form(&o, beta, a, t)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn frac_psi(
    alpha: f64,
    transform_desc: *const FracTransform,
    omega: f64,
    out: *mut f64,
) -> FracStatus {
    guard(|| {
        let o = make_order(alpha)?;
        write(out, transform(&o, transform_desc)?.psi(omega)?)
    })
}

/// Builds the diffusive quadrature rule for times up to `horizon` after the
/// start. `alpha` must lie in `(0, 1)`.
#[no_mangle]
pub unsafe extern "C" fn frac_rule_build(
    alpha: f64,
    transform_desc: *const FracTransform,
    m_half: usize,
    horizon: f64,
    out: *mut *mut FracRule,
) -> FracStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output handle"));
        }
        let o = make_order(alpha)?;
        let spec = transform(&o, transform_desc)?;
        let rule = build_diffusive_rule(&o, &spec, m_half, horizon)?;
        write(out, Box::into_raw(Box::new(FracRule { inner: Arc::new(rule) })))
    })
}

/// Number of nodes, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn frac_rule_len(rule: *const FracRule) -> usize {
    rule.as_ref().map_or(0, |r| r.inner.len())
}

#[no_mangle]
pub unsafe extern "C" fn frac_rule_nodes(rule: *const FracRule, out: *mut f64, capacity: usize) -> FracStatus {
    guard(|| {
        let r = rule.as_ref().ok_or_else(|| null("rule"))?;
        copy_out(r.inner.nodes(), out, capacity)
    })
}

#[no_mangle]
pub unsafe extern "C" fn frac_rule_weights(rule: *const FracRule, out: *mut f64, capacity: usize) -> FracStatus {
    guard(|| {
        let r = rule.as_ref().ok_or_else(|| null("rule"))?;
        copy_out(r.inner.weights(), out, capacity)
    })
}

#[no_mangle]
pub unsafe extern "C" fn frac_rule_free(rule: *mut FracRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// Zero state at time `a`. The state keeps its own reference to the rule,
/// so the rule handle may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn frac_state_new(
    alpha: f64,
    transform_desc: *const FracTransform,
    rule: *const FracRule,
    a: f64,
    out: *mut *mut FracState,
) -> FracStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output handle"));
        }
        let r = rule.as_ref().ok_or_else(|| null("rule"))?;
        let o = make_order(alpha)?;
        let spec = transform(&o, transform_desc)?;
        let state = init_state(&o, r.inner.clone(), &spec, a)?;
        write(out, Box::into_raw(Box::new(FracState { inner: state })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn frac_state_step_backward_euler(state: *mut FracState, h: f64, f_next: f64) -> FracStatus {
    guard(|| {
        let s = state.as_mut().ok_or_else(|| null("state"))?;
        Ok(s.inner.step_backward_euler(h, f_next)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn frac_state_step_trapezoidal(
    state: *mut FracState,
    h: f64,
    f_cur: f64,
    f_next: f64,
) -> FracStatus {
    guard(|| {
        let s = state.as_mut().ok_or_else(|| null("state"))?;
        Ok(s.inner.step_trapezoidal(h, f_cur, f_next)?)
    })
}

/// Current approximation of the fractional integral.
#[no_mangle]
pub unsafe extern "C" fn frac_state_read(state: *const FracState, out: *mut f64) -> FracStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        write(out, s.inner.read_value())
    })
}

#[no_mangle]
pub unsafe extern "C" fn frac_state_time(state: *const FracState, out: *mut f64) -> FracStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        write(out, s.inner.t_current())
    })
}

#[no_mangle]
pub unsafe extern "C" fn frac_state_free(state: *mut FracState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Evaluates the fractional integral at the `len` increasing points
/// `points[0..len]` (all `>= a`) and writes `len` values to `out`.
#[no_mangle]
pub unsafe extern "C" fn frac_evaluate_grid(
    alpha: f64,
    transform_desc: *const FracTransform,
    src: *const FracSource,
    a: f64,
    points: *const f64,
    len: usize,
    m_half: usize,
    scheme: FracStepper,
    out: *mut f64,
) -> FracStatus {
    guard(|| {
        if points.is_null() {
            return Err(null("points"));
        }
        let o = make_order(alpha)?;
        let spec = transform(&o, transform_desc)?;
        let f = source(src, a)?;
        let grid = TimeGrid::new(a, std::slice::from_raw_parts(points, len).to_vec())?;
        let values = evaluate_on_grid(&o, &spec, &f, &grid, m_half, stepper(scheme))?;
        copy_out(&values, out, len)
    })
}

/// Reference value by adaptive quadrature of the defining integral.
#[no_mangle]
pub unsafe extern "C" fn frac_rl_direct(
    alpha: f64,
    src: *const FracSource,
    a: f64,
    t: f64,
    tol: f64,
    out: *mut f64,
) -> FracStatus {
    guard(|| {
        let o = make_order(alpha)?;
        let f = source(src, a)?;
        write(out, rl_direct(&o, &f, a, t, tol)?)
    })
}

/// Diffusive kernel `phi(t, omega)` by adaptive quadrature.
#[no_mangle]
pub unsafe extern "C" fn frac_phi_direct(
    alpha: f64,
    transform_desc: *const FracTransform,
    src: *const FracSource,
    a: f64,
    t: f64,
    omega: f64,
    tol: f64,
    out: *mut f64,
) -> FracStatus {
    guard(|| {
        let o = make_order(alpha)?;
        let spec = transform(&o, transform_desc)?;
        let f = source(src, a)?;
        write(out, phi_direct(&o, &spec, &f, a, t, omega, tol)?)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_variants_map_to_distinct_codes() {
        let errors = [
            Error::NonPositiveOrder(-1.0),
            Error::IntegerOrder(1.0),
            Error::Pole(0.0),
            Error::OrderOutOfRange(1.5),
            Error::InvalidArgument("x".into()),
            Error::Convergence("x".into()),
            Error::UnsupportedTransform("x".into()),
        ];
        let mut codes: Vec<i32> = errors.iter().map(|e| FracStatus::from(e) as i32).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), errors.len());
    }

    #[test]
    fn messages_are_truncated_and_terminated() {
        set_error("abcdefgh".into());
        let mut buf = [1 as c_char; 4];
        let full = unsafe { frac_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(full, 9);
        assert_eq!(buf, [b'a' as c_char, b'b' as c_char, b'c' as c_char, 0]);
        assert_eq!(unsafe { frac_last_error_message(std::ptr::null_mut(), 0) }, 9);
    }

    #[test]
    fn panics_become_a_status() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, FracStatus::Panic);
        let mut buf = [0 as c_char; 64];
        unsafe { frac_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
    }
}
