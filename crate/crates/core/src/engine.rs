//! The fast path: one scalar linear ODE per quadrature node, marched with an
//! implicit one-step method, and the weighted read-out.
//!
//! For `0 < alpha < 1` each node obeys
//!
//! ```text
//! phi_m' = -lambda_m phi_m + kappa_m f(t),   phi_m(a) = 0,
//! lambda_m = psi(omega_m),  kappa_m = c_alpha psi'(omega_m) psi(omega_m)^(-alpha)
//! ```
//!
//! and the integral is read back as `sum_m w_m phi_m`. The equations are
//! linear, so the implicit updates are solved in closed form.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fractional::{binomial, gamma_unchecked, FractionalOrder};
use crate::oracle::{phi_direct, SourceFunction};
use crate::quadrature::{build_diffusive_rule, compensated_sum, QuadratureRule, RuleMeta, RuleMethod};
use crate::transform::TransformSpec;

/// Oracle tolerance used by [`residual_check_ode`].
pub const RESIDUAL_ORACLE_TOL: f64 = 1e-13;

/// Time-stepping scheme for the node ODEs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stepper {
    /// Backward Euler; first order, L-stable.
    BackwardEuler,
    /// Trapezoidal rule whose first interval is replaced by two backward
    /// Euler half-steps. Second order even with the weakly singular start.
    Trapezoidal,
    /// Trapezoidal rule from the first step on.
    TrapezoidalUndamped,
}

impl Stepper {
    pub fn cli_name(self) -> &'static str {
        match self {
            Stepper::BackwardEuler => "be",
            Stepper::Trapezoidal => "trap",
            Stepper::TrapezoidalUndamped => "trap-plain",
        }
    }
}

impl fmt::Display for Stepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Stepper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "be" | "backward-euler" => Ok(Stepper::BackwardEuler),
            "trap" | "trapezoidal" => Ok(Stepper::Trapezoidal),
            "trap-plain" => Ok(Stepper::TrapezoidalUndamped),
            other => Err(Error::invalid(format!(
                "unknown stepper '{other}' (expected be|trap|trap-plain)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scheme {
    Euler,
    Trap,
}

/// Per-node update coefficients for one step size.
#[derive(Debug, Clone)]
struct StepCache {
    scheme: Scheme,
    h_bits: u64,
    decay: Vec<f64>,
    gain: Vec<f64>,
}

/// Values of the kernel at the quadrature nodes at the current time.
#[derive(Debug, Clone)]
pub struct DiffusiveState {
    t_current: f64,
    phi: Vec<f64>,
    lambda: Vec<f64>,
    kappa: Vec<f64>,
    rule: Arc<QuadratureRule>,
    cache: Option<StepCache>,
}

/// Sets up the zero state at `t = a` for the fast path.
pub fn init_state(
    order: &FractionalOrder,
    rule: impl Into<Arc<QuadratureRule>>,
    spec: &TransformSpec,
    a: f64,
) -> Result<DiffusiveState> {
    if !order.is_sub_unit() {
        return Err(Error::OrderOutOfRange(order.alpha()));
    }
    let rule = rule.into();
    if rule.is_empty() {
        return Err(Error::invalid("quadrature rule is empty"));
    }
    if !a.is_finite() {
        return Err(Error::invalid(format!("start time must be finite, got {a}")));
    }
    let domain = spec.domain();
    let ln_c = order.c_alpha().ln();
    let mut lambda = Vec::with_capacity(rule.len());
    let mut kappa = Vec::with_capacity(rule.len());
    for &w in rule.nodes() {
        domain.check(w)?;
        let ln_psi = spec.ln_psi_unchecked(w);
        let l = spec.psi_unchecked(w);
        let k = (ln_c + spec.ln_psi_prime_unchecked(w) - order.alpha() * ln_psi).exp();
        if !(l > 0.0 && l.is_finite() && k.is_finite()) {
            return Err(Error::invalid(format!(
                "node omega = {w} gives lambda = {l}, kappa = {k}"
            )));
        }
        lambda.push(l);
        kappa.push(k);
    }
    DiffusiveState::assemble(a, rule, lambda, kappa)
}

impl DiffusiveState {
    fn assemble(a: f64, rule: Arc<QuadratureRule>, lambda: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        let m = rule.len();
        if lambda.len() != m || kappa.len() != m {
            return Err(Error::invalid("lambda, kappa and the rule must have equal length"));
        }
        if lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) || kappa.iter().any(|k| !k.is_finite()) {
            return Err(Error::invalid("lambda must be positive and finite, kappa finite"));
        }
        Ok(DiffusiveState {
            t_current: a,
            phi: vec![0.0; m],
            lambda,
            kappa,
            rule,
            cache: None,
        })
    }

    /// A state from raw weights, decay rates and forcing coefficients. Node
    /// positions are not needed for stepping and are set to `0, 1, 2, ...`.
    pub fn from_parts(a: f64, weights: Vec<f64>, lambda: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        let nodes = (0..weights.len()).map(|i| i as f64).collect();
        let meta = RuleMeta {
            method: RuleMethod::Explicit,
            m_half: weights.len().div_ceil(2),
            horizon: f64::NAN,
            alpha: f64::NAN,
            center: f64::NAN,
            window: (f64::NAN, f64::NAN),
            panels: 0,
            panel_order: 0,
            laguerre: (0, 0),
            omega_max: None,
            truncation_level: None,
        };
        let rule = QuadratureRule::new(nodes, weights, meta)?;
        if rule.is_empty() {
            return Err(Error::invalid("quadrature rule is empty"));
        }
        Self::assemble(a, Arc::new(rule), lambda, kappa)
    }

    pub fn t_current(&self) -> f64 {
        self.t_current
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Overwrites the node values, e.g. to start from a non-zero state.
    pub fn set_phi(&mut self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.phi.len() {
            return Err(Error::invalid(format!(
                "expected {} values, got {}",
                self.phi.len(),
                phi.len()
            )));
        }
        self.phi.copy_from_slice(phi);
        Ok(())
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Number of nodes `M`.
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Bytes held by the state's own buffers (excluding the shared rule).
    /// Depends on `M` only.
    pub fn footprint_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        let cache = self
            .cache
            .as_ref()
            .map_or(0, |c| (c.decay.capacity() + c.gain.capacity()) * f);
        std::mem::size_of::<Self>() + (self.phi.capacity() + self.lambda.capacity() + self.kappa.capacity()) * f + cache
    }

    fn refresh_coefficients(&mut self, scheme: Scheme, h: f64) {
        let bits = h.to_bits();
        let stale = !matches!(&self.cache, Some(c) if c.scheme == scheme && c.h_bits == bits);
        if stale {
            let m = self.lambda.len();
            let mut cache = self.cache.take().unwrap_or(StepCache {
                scheme,
                h_bits: bits,
                decay: Vec::with_capacity(m),
                gain: Vec::with_capacity(m),
            });
            cache.scheme = scheme;
            cache.h_bits = bits;
            cache.decay.clear();
            cache.gain.clear();
            for (&l, &k) in self.lambda.iter().zip(&self.kappa) {
                let (d, g) = match scheme {
                    Scheme::Euler => euler_coefficients(h, l, k),
                    Scheme::Trap => trapezoid_coefficients(h, l, k),
                };
                cache.decay.push(d);
                cache.gain.push(g);
            }
            self.cache = Some(cache);
        }
    }

    fn advance(&mut self, scheme: Scheme, h: f64, forcing: f64) {
        self.refresh_coefficients(scheme, h);
        let cache = self.cache.as_ref().expect("cache filled above");
        for ((p, d), g) in self.phi.iter_mut().zip(&cache.decay).zip(&cache.gain) {
            *p = d * *p + g * forcing;
        }
        self.t_current += h;
    }

    /// One backward Euler step: `phi <- (phi + h kappa f_next) / (1 + h lambda)`.
    pub fn step_backward_euler(&mut self, h: f64, f_next: f64) -> Result<()> {
        check_step(h)?;
        self.advance(Scheme::Euler, h, f_next);
        Ok(())
    }

    /// One trapezoidal step:
    /// `phi <- ((1 - h lambda/2) phi + (h/2) kappa (f_cur + f_next)) / (1 + h lambda/2)`.
    pub fn step_trapezoidal(&mut self, h: f64, f_cur: f64, f_next: f64) -> Result<()> {
        check_step(h)?;
        self.advance(Scheme::Trap, h, f_cur + f_next);
        Ok(())
    }

    /// `sum_m w_m phi_m`, compensated, in ascending node order.
    pub fn read_value(&self) -> f64 {
        compensated_sum(self.rule.weights().iter().zip(&self.phi).map(|(w, p)| w * p))
    }
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "step size must be positive and finite, got {h}"
        )))
    }
}

/// `(1 / (1 + h lambda), h kappa / (1 + h lambda))`.
fn euler_coefficients(h: f64, lambda: f64, kappa: f64) -> (f64, f64) {
    let denom = 1.0 + h * lambda;
    (1.0 / denom, h * kappa / denom)
}

/// `((1 - q) / (1 + q), (h/2) kappa / (1 + q))` with `q = h lambda / 2`.
///
/// For `q > 1` the ratio is formed from `1/q`, which keeps it accurate near
/// `-1` and guarantees `|ratio| <= 1` after rounding. The gain multiplies
/// `f_cur + f_next`.
fn trapezoid_coefficients(h: f64, lambda: f64, kappa: f64) -> (f64, f64) {
    let q = 0.5 * h * lambda;
    let ratio = if q <= 1.0 {
        (1.0 - q) / (1.0 + q)
    } else {
        let p = 1.0 / q;
        (p - 1.0) / (p + 1.0)
    };
    (ratio, 0.5 * h * kappa / (1.0 + q))
}

/// Free-function form of [`DiffusiveState::step_backward_euler`].
pub fn step_backward_euler(state: &mut DiffusiveState, h: f64, f_next: f64) -> Result<()> {
    state.step_backward_euler(h, f_next)
}

/// Free-function form of [`DiffusiveState::step_trapezoidal`].
pub fn step_trapezoidal(state: &mut DiffusiveState, h: f64, f_cur: f64, f_next: f64) -> Result<()> {
    state.step_trapezoidal(h, f_cur, f_next)
}

/// Free-function form of [`DiffusiveState::read_value`].
pub fn read_value(state: &DiffusiveState) -> f64 {
    state.read_value()
}

/// Evaluation points `a <= t_1 < ... < t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    a: f64,
    points: Vec<f64>,
    uniform_step: Option<f64>,
}

impl TimeGrid {
    /// Relative spacing variation below which a grid counts as uniform.
    pub const UNIFORM_TOLERANCE: f64 = 1e-12;

    pub fn new(a: f64, points: Vec<f64>) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::invalid(format!("grid start must be finite, got {a}")));
        }
        if points.is_empty() {
            return Err(Error::invalid("grid has no points"));
        }
        if points.iter().any(|t| !t.is_finite()) || points[0] < a {
            return Err(Error::invalid("grid points must be finite and not below a"));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("grid points must be strictly increasing"));
        }
        let uniform_step = Self::detect_uniform(a, &points);
        Ok(TimeGrid {
            a,
            points,
            uniform_step,
        })
    }

    /// `n` equal steps from `a` to `b`: `t_k = a + k (b - a) / n`, `k = 1..n`.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid needs at least one point"));
        }
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::invalid(format!("need finite a < b, got a = {a}, b = {b}")));
        }
        let nf = n as f64;
        let mut points: Vec<f64> = (1..=n).map(|k| a + (b - a) * (k as f64 / nf)).collect();
        points[n - 1] = b;
        Ok(TimeGrid {
            a,
            points,
            uniform_step: Some((b - a) / nf),
        })
    }

    fn detect_uniform(a: f64, points: &[f64]) -> Option<f64> {
        let start = if points[0] == a { 1 } else { 0 };
        let pts = &points[start..];
        if pts.is_empty() {
            return None;
        }
        let span = pts[pts.len() - 1] - a;
        let h = span / pts.len() as f64;
        let mut prev = a;
        for &t in pts {
            if ((t - prev) - h).abs() > Self::UNIFORM_TOLERANCE * span {
                return None;
            }
            prev = t;
        }
        Some(h)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform_step.is_some()
    }

    /// The nominal step of a uniform grid.
    pub fn uniform_step(&self) -> Option<f64> {
        self.uniform_step
    }

    /// `t_N - a`.
    pub fn horizon(&self) -> f64 {
        self.points[self.points.len() - 1] - self.a
    }
}

/// Approximates `J_a^alpha f(t_k)` for every grid point with one rule, one
/// state and one step per grid interval.
pub fn evaluate_on_grid(
    order: &FractionalOrder,
    spec: &TransformSpec,
    f: &SourceFunction,
    grid: &TimeGrid,
    m_half: usize,
    stepper: Stepper,
) -> Result<Vec<f64>> {
    if !order.is_sub_unit() {
        return Err(Error::OrderOutOfRange(order.alpha()));
    }
    let horizon = grid.horizon();
    if horizon == 0.0 {
        return Ok(vec![0.0; grid.len()]);
    }
    let rule = build_diffusive_rule(order, spec, m_half, horizon)?;
    evaluate_with_rule(order, spec, rule, f, grid, stepper)
}

/// [`evaluate_on_grid`] with a prebuilt rule.
pub fn evaluate_with_rule(
    order: &FractionalOrder,
    spec: &TransformSpec,
    rule: impl Into<Arc<QuadratureRule>>,
    f: &SourceFunction,
    grid: &TimeGrid,
    stepper: Stepper,
) -> Result<Vec<f64>> {
    let mut state = init_state(order, rule, spec, grid.a())?;
    let mut out = Vec::with_capacity(grid.len());
    let mut t_prev = grid.a();
    let mut f_prev = f.eval(t_prev);
    let mut first = true;
    for &t in grid.points() {
        if t == t_prev {
            out.push(state.read_value());
            continue;
        }
        let h = grid.uniform_step().unwrap_or(t - t_prev);
        let f_next = f.eval(t);
        match stepper {
            Stepper::BackwardEuler => state.advance(Scheme::Euler, h, f_next),
            Stepper::Trapezoidal if first => {
                let half = 0.5 * h;
                state.advance(Scheme::Euler, half, f.eval(t_prev + half));
                state.advance(Scheme::Euler, half, f_next);
            }
            Stepper::Trapezoidal | Stepper::TrapezoidalUndamped => state.advance(Scheme::Trap, h, f_prev + f_next),
        }
        first = false;
        // Pin the clock to the grid so rounding in h does not accumulate.
        state.t_current = t;
        t_prev = t;
        f_prev = f_next;
        out.push(state.read_value());
    }
    Ok(out)
}

/// 4th-order central difference weights for derivatives 1 to 4, with their
/// half-width and denominator multiplier.
fn fd_stencil(k: u32) -> (&'static [f64], f64) {
    match k {
        1 => (&[1.0, -8.0, 0.0, 8.0, -1.0], 12.0),
        2 => (&[-1.0, 16.0, -30.0, 16.0, -1.0], 12.0),
        3 => (&[1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0], 8.0),
        4 => (&[-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0], 6.0),
        _ => (&[], 1.0),
    }
}

/// Residual of the auxiliary ODE
/// `sum_k C(n,k) psi^(n-k) d^k phi/dt^k = c psi' psi^(n-1-alpha) (n-1)! f(t)`
/// with the derivatives taken by central differences of the direct kernel,
/// normalised by the magnitude of the right-hand side (absolute when it
/// vanishes).
pub fn residual_check_ode(
    order: &FractionalOrder,
    spec: &TransformSpec,
    f: &SourceFunction,
    a: f64,
    t: f64,
    omega: f64,
    h_fd: f64,
) -> Result<f64> {
    let n = order.n();
    if n > 4 {
        return Err(Error::range(
            "alpha",
            format!("residual check supports alpha < 4, got {}", order.alpha()),
        ));
    }
    if !(h_fd > 0.0 && h_fd.is_finite()) {
        return Err(Error::invalid(format!(
            "finite-difference step must be positive, got {h_fd}"
        )));
    }
    let reach = if n <= 2 { 2.0 } else { 3.0 };
    if !(t - reach * h_fd >= a) {
        return Err(Error::invalid(format!(
            "t = {t} is too close to a = {a} for step {h_fd} (need t - {reach} h >= a)"
        )));
    }
    let psi = spec.psi(omega)?;
    let phi_at = |s: f64| phi_direct(order, spec, f, a, s, omega, RESIDUAL_ORACLE_TOL);

    let width = if n <= 2 { 2 } else { 3 };
    let mut samples = Vec::with_capacity(2 * width + 1);
    for j in -(width as i32)..=(width as i32) {
        samples.push(phi_at(t + f64::from(j) * h_fd)?);
    }
    let mut lhs = psi.powi(n as i32) * samples[width];
    for k in 1..=n {
        let (w, denom) = fd_stencil(k);
        let off = width - w.len() / 2;
        let d: f64 = w.iter().zip(&samples[off..]).map(|(c, s)| c * s).sum::<f64>() / (denom * h_fd.powi(k as i32));
        lhs += binomial(n, k) as f64 * psi.powi((n - k) as i32) * d;
    }
    let forcing = order.c_alpha()
        * spec.psi_prime(omega)?
        * psi.powf(f64::from(n) - 1.0 - order.alpha())
        * gamma_unchecked(f64::from(n))
        * f.eval(t);
    let r = (lhs - forcing).abs();
    Ok(if forcing == 0.0 { r } else { r / forcing.abs() })
}
