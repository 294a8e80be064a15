//! Slow reference computations: the diffusive kernel by direct quadrature,
//! the Riemann–Liouville integral by singularity-free quadrature, and decay
//! probes of the kernel in `omega`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fractional::{gamma, gamma_unchecked, rl_power_closed_form, FractionalOrder};
use crate::quadrature::gl15;
use crate::transform::TransformSpec;

/// Panel budget of the adaptive integrator.
pub const PANEL_BUDGET: usize = 1 << 14;

/// Above this value of `psi(omega) (t - a)` the kernel integral is pre-split.
pub const BOUNDARY_LAYER_THRESHOLD: f64 = 50.0;

/// Split point of the boundary layer, in units of `1 / psi(omega)`.
pub const BOUNDARY_LAYER_SPLIT: f64 = 30.0;

/// Largest tolerance the oracles accept.
pub const MAX_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Builtin {
    Const,
    Zero,
    Poly(f64),
    Sin,
    Exp,
    Cos,
    Custom,
}

/// A real source term `f` on `[a, b]`.
///
/// The callable must be reentrant: the oracles and the engine may call it
/// from several threads and in any order.
#[derive(Clone)]
pub struct SourceFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    tag: String,
    builtin: Builtin,
    anchor: f64,
    smoothness: Option<u32>,
}

impl fmt::Debug for SourceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceFunction")
            .field("tag", &self.tag)
            .field("smoothness", &self.smoothness)
            .finish_non_exhaustive()
    }
}

impl SourceFunction {
    /// Wraps an arbitrary callable under the tag `custom`.
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        SourceFunction {
            f: Arc::new(f),
            tag: "custom".to_string(),
            builtin: Builtin::Custom,
            anchor: 0.0,
            smoothness: None,
        }
    }

    /// Attaches a smoothness hint (number of continuous derivatives).
    pub fn with_smoothness(mut self, l: u32) -> Self {
        self.smoothness = Some(l);
        self
    }

    /// Builds a named source. `a` is the left end of the interval; it anchors
    /// `poly:<beta>`, which is `(t - a)^beta`.
    ///
    /// Recognised tags: `const`, `zero`, `poly:<beta>`, `sin`, `exp`, `cos`.
    pub fn from_tag(tag: &str, a: f64) -> Result<Self> {
        let (builtin, f): (Builtin, Arc<dyn Fn(f64) -> f64 + Send + Sync>) = match tag {
            "const" => (Builtin::Const, Arc::new(|_| 1.0)),
            "zero" => (Builtin::Zero, Arc::new(|_| 0.0)),
            "sin" => (Builtin::Sin, Arc::new(f64::sin)),
            "exp" => (Builtin::Exp, Arc::new(f64::exp)),
            "cos" => (Builtin::Cos, Arc::new(f64::cos)),
            _ => {
                let beta: f64 = tag
                    .strip_prefix("poly:")
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "unknown source '{tag}' (expected const|zero|poly:<beta>|sin|exp|cos)"
                        ))
                    })?;
                if !(beta >= 0.0 && beta.is_finite()) {
                    return Err(Error::invalid(format!("poly exponent must be >= 0, got {beta}")));
                }
                let f: Arc<dyn Fn(f64) -> f64 + Send + Sync> = if beta == 0.0 {
                    Arc::new(|_| 1.0)
                } else {
                    Arc::new(move |t: f64| (t - a).max(0.0).powf(beta))
                };
                (Builtin::Poly(beta), f)
            }
        };
        let smoothness = match builtin {
            Builtin::Poly(beta) if beta.fract() != 0.0 => Some(beta.floor() as u32),
            _ => None,
        };
        Ok(SourceFunction {
            f,
            tag: tag.to_string(),
            builtin,
            anchor: a,
            smoothness,
        })
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn smoothness(&self) -> Option<u32> {
        self.smoothness
    }

    /// True for the identically vanishing builtin.
    pub fn is_zero(&self) -> bool {
        self.builtin == Builtin::Zero
    }

    /// The exact fractional integral when one is known in closed form
    /// (`const`, `zero` and `poly:<beta>` anchored at `a`).
    pub fn closed_form(&self, order: &FractionalOrder, a: f64, t: f64) -> Option<Result<f64>> {
        match self.builtin {
            Builtin::Zero => Some(Ok(0.0)),
            Builtin::Const => Some(rl_power_closed_form(order, 0.0, a, t)),
            Builtin::Poly(beta) if beta == 0.0 || self.anchor == a => Some(rl_power_closed_form(order, beta, a, t)),
            _ => None,
        }
    }
}

/// An integral estimate together with the integral of the absolute value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub l1: f64,
    pub panels: usize,
}

fn composite_gl15(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> (f64, f64) {
    let rule = gl15();
    let width = (hi - lo) / panels as f64;
    let half = 0.5 * width;
    let mut value = 0.0;
    let mut l1 = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        let mut pv = 0.0;
        let mut pa = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let y = g(mid + half * x);
            pv += w * y;
            pa += w * y.abs();
        }
        value += half * pv;
        l1 += half * pa;
    }
    (value, l1)
}

/// Composite 15-point Gauss–Legendre quadrature with global panel halving.
///
/// Stops when two successive levels differ by at most
/// `max(tol * L1, abs_floor)`, where `L1` is the finer estimate of the
/// integral of `|g|`.
pub fn integrate_adaptive(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64, abs_floor: f64) -> Result<Integral> {
    if hi <= lo {
        return Ok(Integral {
            value: 0.0,
            l1: 0.0,
            panels: 0,
        });
    }
    let mut panels = 1;
    let (mut prev, _) = composite_gl15(g, lo, hi, panels);
    loop {
        panels *= 2;
        let (value, l1) = composite_gl15(g, lo, hi, panels);
        if !value.is_finite() {
            return Err(Error::invalid(format!("integrand is not finite on [{lo}, {hi}]")));
        }
        let diff = (value - prev).abs();
        if diff <= (tol * l1).max(abs_floor) {
            return Ok(Integral { value, l1, panels });
        }
        if panels >= PANEL_BUDGET {
            return Err(Error::ToleranceNotMet {
                tol,
                achieved: diff / l1.max(f64::MIN_POSITIVE),
                panels,
            });
        }
        prev = value;
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= MAX_TOLERANCE {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "tolerance must lie in (0, {MAX_TOLERANCE}], got {tol}"
        )))
    }
}

fn check_interval(a: f64, t: f64) -> Result<()> {
    if a.is_finite() && t.is_finite() && t >= a {
        Ok(())
    } else {
        Err(Error::invalid(format!("need finite t >= a, got a = {a}, t = {t}")))
    }
}

/// `Gamma(n, x) / (n - 1)!` for integer `n >= 1`.
fn upper_gamma_regularized(n: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..n {
        term *= x / f64::from(k);
        sum += term;
    }
    (-x).exp() * sum
}

/// The diffusive kernel
/// `phi(t, w) = c psi'(w) psi(w)^(n-alpha-1) int_a^t (t-tau)^(n-1) exp(-(t-tau) psi(w)) f(tau) dtau`
/// by adaptive quadrature.
///
/// With `s = (t - tau) psi(w)` this is
/// `c psi' psi^(-alpha-1) int_0^X s^(n-1) e^(-s) f(t - s/psi) ds`, `X = (t-a) psi`,
/// and the prefactor is combined in log space so extreme `omega` neither
/// overflows nor underflows early.
pub fn phi_direct(
    order: &FractionalOrder,
    spec: &TransformSpec,
    f: &SourceFunction,
    a: f64,
    t: f64,
    omega: f64,
    tol: f64,
) -> Result<f64> {
    spec.domain().check(omega)?;
    check_tol(tol)?;
    check_interval(a, t)?;
    if t == a {
        return Ok(0.0);
    }
    let ln_psi = spec.ln_psi_unchecked(omega);
    let psi = ln_psi.exp();
    let ln_pref = order.c_alpha().ln() + spec.ln_psi_prime_unchecked(omega) - (order.alpha() + 1.0) * ln_psi;
    let n = order.n();
    let nm1 = f64::from(n - 1);
    let x_end = (t - a) * psi;

    // Scale s so that the integration variable stays O(1): for X below one we
    // integrate over u = s / X in [0, 1] and fold X^n into the prefactor.
    let (integral, ln_scale) = if x_end <= 1.0 {
        let g = |u: f64| {
            let s = u * x_end;
            let w = if n == 1 { 1.0 } else { u.powi(n as i32 - 1) };
            w * (-s).exp() * f.eval(t - (t - a) * u)
        };
        let r = integrate_adaptive(&g, 0.0, 1.0, tol, 0.0)?;
        (r.value, f64::from(n) * x_end.ln())
    } else {
        let g = |s: f64| {
            let w = if n == 1 { 1.0 } else { s.powf(nm1) };
            w * (-s).exp() * f.eval(t - s / psi)
        };
        if x_end > BOUNDARY_LAYER_THRESHOLD {
            let main = integrate_adaptive(&g, 0.0, BOUNDARY_LAYER_SPLIT, tol, 0.0)?;
            let sup_f = sample_sup(f, a, t);
            let tail_bound =
                2.0 * sup_f * gamma_unchecked(f64::from(n)) * upper_gamma_regularized(n, BOUNDARY_LAYER_SPLIT);
            let mut value = main.value;
            if tail_bound > tol * main.l1 {
                // exp(-s) underflows long before s = 800.
                let tail_end = x_end.min(BOUNDARY_LAYER_SPLIT + 800.0 + nm1 * 10.0);
                let tail = integrate_adaptive(&g, BOUNDARY_LAYER_SPLIT, tail_end, tol, tol * main.l1)?;
                value += tail.value;
            }
            (value, 0.0)
        } else {
            (integrate_adaptive(&g, 0.0, x_end, tol, 0.0)?.value, 0.0)
        }
    };
    if integral == 0.0 {
        return Ok(0.0);
    }
    Ok(integral.signum() * (ln_pref + ln_scale + integral.abs().ln()).exp())
}

fn sample_sup(f: &SourceFunction, a: f64, t: f64) -> f64 {
    (0..=32)
        .map(|i| f.eval(a + (t - a) * f64::from(i) / 32.0).abs())
        .fold(0.0, f64::max)
}

/// The Riemann–Liouville integral
/// `J_a^alpha f(t) = 1/Gamma(alpha) int_a^t (t-tau)^(alpha-1) f(tau) dtau`.
///
/// The weak singularity at `tau = t` is removed by `t - tau = (t-a) v^(1/q)`
/// with `q = alpha - n + 1`, which leaves the bounded integrand
/// `v^((n-1)/q) f(t - (t-a) v^(1/q))` on `[0, 1]`.
pub fn rl_direct(order: &FractionalOrder, f: &SourceFunction, a: f64, t: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    check_interval(a, t)?;
    if t == a {
        return Ok(0.0);
    }
    let q = order.fractional_part();
    let p = f64::from(order.n() - 1) / q;
    let inv_q = 1.0 / q;
    let g = |v: f64| {
        let w = if p == 0.0 { 1.0 } else { v.powf(p) };
        w * f.eval(t - (t - a) * v.powf(inv_q))
    };
    let r = integrate_adaptive(&g, 0.0, 1.0, tol, 0.0)?;
    Ok((t - a).powf(order.alpha()) / (q * gamma(order.alpha())?) * r.value)
}

/// `(psi(omega), |phi(t, omega)|)` for each probe, for fitting the decay of
/// the kernel toward the ends of the transform domain.
pub fn phi_decay_probe(
    order: &FractionalOrder,
    spec: &TransformSpec,
    f: &SourceFunction,
    a: f64,
    t: f64,
    omegas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if omegas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("probe points must be strictly increasing"));
    }
    if !omegas.is_empty() && !(t > a) {
        return Err(Error::invalid(format!("need t > a, got a = {a}, t = {t}")));
    }
    omegas
        .iter()
        .map(|&w| {
            let psi = spec.psi(w)?;
            let phi = phi_direct(order, spec, f, a, t, w, 1e-10)?;
            Ok((psi, phi.abs()))
        })
        .collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("slope fit needs two or more paired samples"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs distinct abscissae"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional::make_order;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn one() -> SourceFunction {
        SourceFunction::from_tag("const", 0.0).unwrap()
    }

    #[test]
    fn phi_examples_for_constant_source() {
        let o = make_order(0.5).unwrap();
        let v = phi_direct(&o, &TransformSpec::Exp, &one(), 0.0, 1.0, 0.0, 1e-12).unwrap();
        assert!(rel(v, (1.0 - (-1f64).exp()) / PI) < 1e-11, "{v}");
        assert!((v - 0.201_210_223_135_152).abs() < 1e-13);

        let v = phi_direct(&o, &TransformSpec::Exp, &one(), 0.0, 1.0, 2.0, 1e-12).unwrap();
        let psi = 2f64.exp();
        let exact = psi.powf(-0.5) * (1.0 - (-psi).exp()) / PI;
        assert!(rel(v, exact) < 1e-11, "{v} vs {exact}");
        assert!((v - 0.117_027_297_917_217).abs() < 1e-13);

        assert_eq!(
            phi_direct(&o, &TransformSpec::Exp, &one(), 0.3, 0.3, 1.0, 1e-8).unwrap(),
            0.0
        );
    }

    #[test]
    fn phi_closed_form_across_extreme_omegas() {
        // phi = c psi^(-alpha) (1 - exp(-psi)) for f = 1, t - a = 1, Exp.
        for alpha in [0.25, 0.5, 0.75] {
            let o = make_order(alpha).unwrap();
            for w in [-40.0, -12.0, -1.0, 0.5, 4.0, 12.0, 30.0, 40.0] {
                let psi: f64 = f64::exp(w);
                let exact = o.c_alpha() * (-alpha * w).exp() * (-(-psi).exp_m1());
                let v = phi_direct(&o, &TransformSpec::Exp, &one(), 0.0, 1.0, w, 1e-12).unwrap();
                assert!(rel(v, exact) < 1e-10, "alpha {alpha} w {w}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn phi_rejects_bad_inputs() {
        let o = make_order(0.5).unwrap();
        assert!(matches!(
            phi_direct(&o, &TransformSpec::Square, &one(), 0.0, 1.0, -1.0, 1e-8),
            Err(Error::Domain { .. })
        ));
        assert!(phi_direct(&o, &TransformSpec::Exp, &one(), 0.0, 1.0, 0.0, 1e-2).is_err());
        assert!(phi_direct(&o, &TransformSpec::Exp, &one(), 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(phi_direct(&o, &TransformSpec::Exp, &one(), 1.0, 0.0, 0.0, 1e-8).is_err());
    }

    #[test]
    fn rl_direct_examples() {
        let o = make_order(0.5).unwrap();
        let v = rl_direct(&o, &one(), 0.0, 1.0, 1e-12).unwrap();
        assert!(rel(v, 2.0 / PI.sqrt()) < 1e-12);
        assert!((v - 1.128_379_167_1).abs() < 1e-9);
        let sq = SourceFunction::custom(|t| t * t);
        let v = rl_direct(&o, &sq, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 0.601_802_222_450_940).abs() < 1e-13);
        assert!(rel(v, 2.0 / gamma(3.5).unwrap()) < 1e-12);
        assert_eq!(rl_direct(&o, &sq, 2.0, 2.0, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn rl_direct_for_higher_orders() {
        for alpha in [1.5, 2.5, 3.3] {
            let o = make_order(alpha).unwrap();
            let f = SourceFunction::from_tag("poly:1", 0.5).unwrap();
            let v = rl_direct(&o, &f, 0.5, 2.0, 1e-13).unwrap();
            let exact = rl_power_closed_form(&o, 1.0, 0.5, 2.0).unwrap();
            assert!(rel(v, exact) < 1e-11, "{alpha}: {v} vs {exact}");
        }
    }

    #[test]
    fn tolerance_failure_is_reported() {
        let wild = |x: f64| (1e6 * x).sin();
        let err = integrate_adaptive(&wild, 0.0, 1.0, 1e-14, 0.0);
        assert!(matches!(err, Err(Error::ToleranceNotMet { panels, .. }) if panels == PANEL_BUDGET));
    }

    #[test]
    fn decay_probe_examples() {
        let o = make_order(0.5).unwrap();
        let up: Vec<f64> = (6..=12).map(f64::from).collect();
        let pairs = phi_decay_probe(&o, &TransformSpec::Exp, &one(), 0.0, 1.0, &up).unwrap();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
        let s = fit_slope(&up, &ys).unwrap();
        assert!((s + 0.5).abs() < 0.05, "{s}");

        let lo: Vec<f64> = (-12..=-6).map(f64::from).collect();
        let pairs = phi_decay_probe(&o, &TransformSpec::Exp, &one(), 0.0, 1.0, &lo).unwrap();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
        let s = fit_slope(&lo, &ys).unwrap();
        assert!((s - 0.5).abs() < 0.05, "{s}");

        assert!(phi_decay_probe(&o, &TransformSpec::Exp, &one(), 0.0, 1.0, &[])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn source_tags() {
        let p = SourceFunction::from_tag("poly:2", 1.0).unwrap();
        assert_eq!(p.eval(3.0), 4.0);
        assert_eq!(p.tag(), "poly:2");
        assert_eq!(SourceFunction::from_tag("poly:0", 1.0).unwrap().eval(0.0), 1.0);
        assert_eq!(SourceFunction::from_tag("zero", 0.0).unwrap().eval(5.0), 0.0);
        assert!((SourceFunction::from_tag("sin", 0.0).unwrap().eval(1.0) - 1f64.sin()).abs() < 1e-16);
        assert!(SourceFunction::from_tag("poly:-1", 0.0).is_err());
        assert!(SourceFunction::from_tag("tanh", 0.0).is_err());
        assert_eq!(SourceFunction::from_tag("poly:1.5", 0.0).unwrap().smoothness(), Some(1));
        let o = make_order(0.5).unwrap();
        assert!(SourceFunction::from_tag("sin", 0.0)
            .unwrap()
            .closed_form(&o, 0.0, 1.0)
            .is_none());
        let c = SourceFunction::from_tag("poly:1", 0.0)
            .unwrap()
            .closed_form(&o, 0.0, 1.0)
            .unwrap()
            .unwrap();
        assert!((c - 0.752_252_778_1).abs() < 1e-9);
    }

    #[test]
    fn slope_fit_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.7 * x).collect();
        assert!((fit_slope(&xs, &ys).unwrap() + 0.7).abs() < 1e-14);
        assert!(fit_slope(&[1.0], &[1.0]).is_err());
        assert!(fit_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }
}
