//! Admissible transformations `psi: Omega -> (0, inf)`.
//!
//! A transformation is admissible when its domain is an open interval, it is
//! `C^1`, strictly increasing, tends to 0 at the lower end of the domain and to
//! `+inf` at the upper end. Five closed-form variants are built in; anything
//! else can be plugged in through [`CustomTransform`].

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// An interval endpoint on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl Endpoint {
    pub fn finite(self) -> Option<f64> {
        match self {
            Endpoint::Finite(x) => Some(x),
            _ => None,
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::NegInfinity => write!(f, "-inf"),
            Endpoint::Finite(x) => write!(f, "{x}"),
            Endpoint::PosInfinity => write!(f, "+inf"),
        }
    }
}

/// An open interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: Endpoint,
    pub hi: Endpoint,
}

impl Domain {
    pub const REAL_LINE: Domain = Domain {
        lo: Endpoint::NegInfinity,
        hi: Endpoint::PosInfinity,
    };
    pub const POSITIVE: Domain = Domain {
        lo: Endpoint::Finite(0.0),
        hi: Endpoint::PosInfinity,
    };
    pub const UNIT: Domain = Domain {
        lo: Endpoint::Finite(0.0),
        hi: Endpoint::Finite(1.0),
    };

    pub fn new(lo: Endpoint, hi: Endpoint) -> Result<Self> {
        let ok = match (lo, hi) {
            (Endpoint::PosInfinity, _) | (_, Endpoint::NegInfinity) => false,
            (Endpoint::Finite(a), Endpoint::Finite(b)) => a.is_finite() && b.is_finite() && a < b,
            (Endpoint::Finite(a), _) => a.is_finite(),
            (_, Endpoint::Finite(b)) => b.is_finite(),
            _ => true,
        };
        if ok {
            Ok(Domain { lo, hi })
        } else {
            Err(Error::invalid(format!("({lo}, {hi}) is not a non-empty open interval")))
        }
    }

    /// Strict membership; NaN is never inside.
    pub fn contains(&self, omega: f64) -> bool {
        let above = match self.lo {
            Endpoint::NegInfinity => omega > f64::NEG_INFINITY,
            Endpoint::Finite(a) => omega > a,
            Endpoint::PosInfinity => false,
        };
        let below = match self.hi {
            Endpoint::PosInfinity => omega < f64::INFINITY,
            Endpoint::Finite(b) => omega < b,
            Endpoint::NegInfinity => false,
        };
        above && below
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.finite().is_some() && self.hi.finite().is_some()
    }

    pub(crate) fn check(&self, omega: f64) -> Result<()> {
        if self.contains(omega) {
            Ok(())
        } else {
            Err(Error::Domain {
                omega,
                lo: self.lo.to_string(),
                hi: self.hi.to_string(),
            })
        }
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied transformation. `psi` and `psi_prime` must be pure.
#[derive(Clone)]
pub struct CustomTransform {
    name: String,
    domain: Domain,
    psi: RealFn,
    psi_prime: RealFn,
}

impl CustomTransform {
    pub fn new<P, D>(name: impl Into<String>, domain: Domain, psi: P, psi_prime: D) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        CustomTransform {
            name: name.into(),
            domain,
            psi: Arc::new(psi),
            psi_prime: Arc::new(psi_prime),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomTransform")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

/// The variant tag of a [`TransformSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Exp,
    Square,
    PowerOneMinusAlpha,
    TanHalfPi,
    Rational,
    Custom,
}

impl TransformKind {
    /// The name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            TransformKind::Exp => "exp",
            TransformKind::Square => "square",
            TransformKind::PowerOneMinusAlpha => "power",
            TransformKind::TanHalfPi => "tan",
            TransformKind::Rational => "rational",
            TransformKind::Custom => "custom",
        }
    }
}

/// An admissible transformation.
#[derive(Debug, Clone)]
pub enum TransformSpec {
    /// `psi(w) = e^w` on the real line.
    Exp,
    /// `psi(w) = w^2` on `(0, inf)`.
    Square,
    /// `psi(w) = w^(1 - alpha)` on `(0, inf)`; tied to an order in `(0, 1)`.
    PowerOneMinusAlpha {
        alpha: f64,
    },
    /// `psi(w) = tan(w pi / 2)` on `(0, 1)`.
    TanHalfPi,
    /// `psi(w) = w^sigma / (1 - w)^rho` on `(0, 1)`.
    Rational {
        sigma: f64,
        rho: f64,
    },
    Custom(CustomTransform),
}

impl TransformSpec {
    pub fn power_one_minus_alpha(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(TransformSpec::PowerOneMinusAlpha { alpha })
        } else {
            Err(Error::invalid(format!(
                "the w^(1-alpha) transform needs 0 < alpha < 1, got {alpha}"
            )))
        }
    }

    pub fn rational(sigma: f64, rho: f64) -> Result<Self> {
        if sigma > 0.0 && rho > 0.0 && sigma.is_finite() && rho.is_finite() {
            Ok(TransformSpec::Rational { sigma, rho })
        } else {
            Err(Error::invalid(format!(
                "rational transform needs sigma, rho > 0, got sigma = {sigma}, rho = {rho}"
            )))
        }
    }

    pub fn custom(t: CustomTransform) -> Self {
        TransformSpec::Custom(t)
    }

    /// Parses a command-line transform name. `alpha` is only consulted for
    /// `power`, `sigma`/`rho` only for `rational`.
    pub fn from_cli(name: &str, alpha: f64, sigma: f64, rho: f64) -> Result<Self> {
        match name {
            "exp" => Ok(TransformSpec::Exp),
            "square" => Ok(TransformSpec::Square),
            "power" => TransformSpec::power_one_minus_alpha(alpha),
            "tan" => Ok(TransformSpec::TanHalfPi),
            "rational" => TransformSpec::rational(sigma, rho),
            other => Err(Error::invalid(format!(
                "unknown transform '{other}' (expected exp|square|power|tan|rational)"
            ))),
        }
    }

    pub fn kind(&self) -> TransformKind {
        match self {
            TransformSpec::Exp => TransformKind::Exp,
            TransformSpec::Square => TransformKind::Square,
            TransformSpec::PowerOneMinusAlpha { .. } => TransformKind::PowerOneMinusAlpha,
            TransformSpec::TanHalfPi => TransformKind::TanHalfPi,
            TransformSpec::Rational { .. } => TransformKind::Rational,
            TransformSpec::Custom(_) => TransformKind::Custom,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            TransformSpec::Exp => Domain::REAL_LINE,
            TransformSpec::Square | TransformSpec::PowerOneMinusAlpha { .. } => Domain::POSITIVE,
            TransformSpec::TanHalfPi | TransformSpec::Rational { .. } => Domain::UNIT,
            TransformSpec::Custom(c) => c.domain,
        }
    }

    pub fn psi(&self, omega: f64) -> Result<f64> {
        self.domain().check(omega)?;
        Ok(self.psi_unchecked(omega))
    }

    pub fn psi_prime(&self, omega: f64) -> Result<f64> {
        self.domain().check(omega)?;
        Ok(self.psi_prime_unchecked(omega))
    }

    /// `ln psi(omega)`, finite even where `psi` itself would over- or underflow.
    pub fn ln_psi(&self, omega: f64) -> Result<f64> {
        self.domain().check(omega)?;
        Ok(self.ln_psi_unchecked(omega))
    }

    /// `ln psi'(omega)`.
    pub fn ln_psi_prime(&self, omega: f64) -> Result<f64> {
        self.domain().check(omega)?;
        Ok(self.ln_psi_prime_unchecked(omega))
    }

    pub(crate) fn psi_unchecked(&self, w: f64) -> f64 {
        match self {
            TransformSpec::Exp => w.exp(),
            TransformSpec::Square => w * w,
            TransformSpec::PowerOneMinusAlpha { alpha } => w.powf(1.0 - alpha),
            TransformSpec::TanHalfPi => tan_half_pi(w),
            TransformSpec::Rational { sigma, rho } => w.powf(*sigma) / (1.0 - w).powf(*rho),
            TransformSpec::Custom(c) => (c.psi)(w),
        }
    }

    pub(crate) fn psi_prime_unchecked(&self, w: f64) -> f64 {
        match self {
            TransformSpec::Exp => w.exp(),
            TransformSpec::Square => 2.0 * w,
            TransformSpec::PowerOneMinusAlpha { alpha } => (1.0 - alpha) * w.powf(-alpha),
            TransformSpec::TanHalfPi => {
                let c = cos_half_pi(w);
                FRAC_PI_2 / (c * c)
            }
            TransformSpec::Rational { sigma, rho } => {
                let v = 1.0 - w;
                w.powf(sigma - 1.0) * v.powf(-rho - 1.0) * (sigma * v + rho * w)
            }
            TransformSpec::Custom(c) => (c.psi_prime)(w),
        }
    }

    pub(crate) fn ln_psi_unchecked(&self, w: f64) -> f64 {
        match self {
            TransformSpec::Exp => w,
            TransformSpec::Square => 2.0 * w.ln(),
            TransformSpec::PowerOneMinusAlpha { alpha } => (1.0 - alpha) * w.ln(),
            TransformSpec::TanHalfPi => tan_half_pi(w).ln(),
            TransformSpec::Rational { sigma, rho } => sigma * w.ln() - rho * (-w).ln_1p(),
            TransformSpec::Custom(c) => (c.psi)(w).ln(),
        }
    }

    pub(crate) fn ln_psi_prime_unchecked(&self, w: f64) -> f64 {
        match self {
            TransformSpec::Exp => w,
            TransformSpec::Square => (2.0 * w).ln(),
            TransformSpec::PowerOneMinusAlpha { alpha } => (1.0 - alpha).ln() - alpha * w.ln(),
            TransformSpec::TanHalfPi => FRAC_PI_2.ln() - 2.0 * cos_half_pi(w).ln(),
            TransformSpec::Rational { sigma, rho } => {
                let v = 1.0 - w;
                (sigma - 1.0) * w.ln() - (rho + 1.0) * v.ln() + (sigma * v + rho * w).ln()
            }
            TransformSpec::Custom(c) => (c.psi_prime)(w).ln(),
        }
    }

    /// Solves `psi(omega) = target` by bisection. Used to centre rules and probes.
    pub(crate) fn inverse(&self, target: f64) -> Option<f64> {
        let ln_target = target.ln();
        match self {
            TransformSpec::Exp => return Some(ln_target),
            TransformSpec::Square => return Some(target.sqrt()),
            TransformSpec::PowerOneMinusAlpha { alpha } => return Some((ln_target / (1.0 - alpha)).exp()),
            TransformSpec::TanHalfPi => return Some(target.atan() / FRAC_PI_2),
            _ => {}
        }
        let d = self.domain();
        let (mut lo, mut hi) = match (d.lo, d.hi) {
            (Endpoint::Finite(a), Endpoint::Finite(b)) => (a, b),
            (Endpoint::Finite(a), Endpoint::PosInfinity) => {
                let mut hi = a + 1.0;
                let mut step = 1.0;
                while self.ln_psi_unchecked(hi) < ln_target {
                    step *= 2.0;
                    hi = a + step;
                    if !hi.is_finite() {
                        return None;
                    }
                }
                (a, hi)
            }
            (Endpoint::NegInfinity, Endpoint::Finite(b)) => {
                let mut lo = b - 1.0;
                let mut step = 1.0;
                while self.ln_psi_unchecked(lo) > ln_target {
                    step *= 2.0;
                    lo = b - step;
                    if !lo.is_finite() {
                        return None;
                    }
                }
                (lo, b)
            }
            _ => {
                let mut lo = -1.0;
                let mut hi = 1.0;
                while self.ln_psi_unchecked(hi) < ln_target {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return None;
                    }
                }
                while self.ln_psi_unchecked(lo) > ln_target {
                    lo *= 2.0;
                    if !lo.is_finite() {
                        return None;
                    }
                }
                (lo, hi)
            }
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.ln_psi_unchecked(mid) < ln_target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// `tan(w pi / 2)` on `(0, 1)`, using the cotangent of the distance to 1 in
/// the upper half so the pole is approached accurately.
fn tan_half_pi(w: f64) -> f64 {
    if w <= 0.5 {
        (w * FRAC_PI_2).tan()
    } else {
        1.0 / ((1.0 - w) * FRAC_PI_2).tan()
    }
}

fn cos_half_pi(w: f64) -> f64 {
    if w <= 0.5 {
        (w * FRAC_PI_2).cos()
    } else {
        ((1.0 - w) * FRAC_PI_2).sin()
    }
}

/// What [`check_admissible`] observed on its probe mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub probes: usize,
    /// Smallest sampled `psi'`.
    pub min_psi_prime: f64,
    /// Probes where `psi <= 0`, `psi' <= 0` or either is not finite.
    pub positivity_violations: usize,
    /// Consecutive probe pairs where `psi` failed to increase strictly.
    pub monotonicity_violations: usize,
    /// Largest relative gap between `psi'` and a central difference of `psi`.
    pub max_derivative_deviation: f64,
    /// Number of probes that took part in the derivative comparison.
    pub derivative_checks: usize,
    /// `psi` at the probe closest to the lower end of the domain.
    pub psi_at_lower_probe: f64,
    /// `psi` at the probe closest to the upper end of the domain.
    pub psi_at_upper_probe: f64,
}

impl AdmissibilityReport {
    pub const DERIVATIVE_TOLERANCE: f64 = 1e-6;
    pub const LOWER_LIMIT_EVIDENCE: f64 = 1e-6;
    pub const UPPER_LIMIT_EVIDENCE: f64 = 1e6;

    pub fn lower_limit_ok(&self) -> bool {
        self.psi_at_lower_probe < Self::LOWER_LIMIT_EVIDENCE
    }

    pub fn upper_limit_ok(&self) -> bool {
        self.psi_at_upper_probe > Self::UPPER_LIMIT_EVIDENCE
    }

    pub fn is_admissible(&self) -> bool {
        self.positivity_violations == 0
            && self.monotonicity_violations == 0
            && self.min_psi_prime > 0.0
            && self.max_derivative_deviation < Self::DERIVATIVE_TOLERANCE
            && self.lower_limit_ok()
            && self.upper_limit_ok()
    }
}

/// Samples `spec` on a mesh graded toward the ends of its domain and reports
/// on positivity, monotonicity, derivative consistency and endpoint limits.
pub fn check_admissible(spec: &TransformSpec, probe_count: usize) -> Result<AdmissibilityReport> {
    if probe_count < 3 {
        return Err(Error::invalid(format!("need at least 3 probes, got {probe_count}")));
    }
    let probes = graded_probes(spec, probe_count);
    let domain = spec.domain();

    let mut report = AdmissibilityReport {
        probes: probes.len(),
        min_psi_prime: f64::INFINITY,
        positivity_violations: 0,
        monotonicity_violations: 0,
        max_derivative_deviation: 0.0,
        derivative_checks: 0,
        psi_at_lower_probe: f64::NAN,
        psi_at_upper_probe: f64::NAN,
    };

    let mut prev_psi: Option<f64> = None;
    for &w in &probes {
        let psi = spec.psi_unchecked(w);
        let dpsi = spec.psi_prime_unchecked(w);
        if !(psi > 0.0 && psi.is_finite() && dpsi > 0.0 && dpsi.is_finite()) {
            report.positivity_violations += 1;
        }
        report.min_psi_prime = report.min_psi_prime.min(dpsi);
        if let Some(p) = prev_psi {
            if !(psi > p) {
                report.monotonicity_violations += 1;
            }
        }
        prev_psi = Some(psi);

        if let Some(h) = derivative_step(&domain, w) {
            let (wp, wm) = (w + h, w - h);
            if domain.contains(wp) && domain.contains(wm) {
                let fd = (spec.psi_unchecked(wp) - spec.psi_unchecked(wm)) / (wp - wm);
                let dev = ((fd - dpsi) / dpsi).abs();
                report.max_derivative_deviation = report.max_derivative_deviation.max(dev);
                report.derivative_checks += 1;
            }
        }
    }
    report.psi_at_lower_probe = spec.psi_unchecked(probes[0]);
    report.psi_at_upper_probe = spec.psi_unchecked(probes[probes.len() - 1]);
    Ok(report)
}

/// Central-difference step for the derivative check, or `None` when the probe
/// sits too close to a finite endpoint for a meaningful difference.
fn derivative_step(domain: &Domain, w: f64) -> Option<f64> {
    const REL_STEP: f64 = 1e-4;
    let dist = [domain.lo.finite().map(|a| w - a), domain.hi.finite().map(|b| b - w)]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    if dist.is_infinite() {
        return Some(REL_STEP);
    }
    let width = match (domain.lo.finite(), domain.hi.finite()) {
        (Some(a), Some(b)) => b - a,
        _ => dist.max(1.0),
    };
    if dist < 1e-6 * width {
        None
    } else {
        Some(REL_STEP * dist)
    }
}

/// Probe points covering the domain, strictly increasing, graded toward the
/// endpoints where the limiting behaviour has to be observed.
pub fn graded_probes(spec: &TransformSpec, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let u = |i: usize| -1.0 + 2.0 * i as f64 / (count - 1) as f64;
    let domain = spec.domain();
    match (domain.lo, domain.hi) {
        (Endpoint::NegInfinity, Endpoint::PosInfinity) => {
            // tanh spacing reaching |w| = 40 concentrates probes at the extremes.
            const REACH: f64 = 40.0;
            const STEEPNESS: f64 = 2.0;
            (0..count)
                .map(|i| REACH * (STEEPNESS * u(i)).tanh() / STEEPNESS.tanh())
                .collect()
        }
        (Endpoint::Finite(a), Endpoint::Finite(b)) => {
            // Distance to the nearer endpoint shrinks geometrically from half
            // the width down to 1e-12 of it.
            let width = b - a;
            (0..count)
                .map(|i| {
                    let ui = u(i);
                    let d = 0.5 * width * (2e-12f64).powf(ui.abs());
                    if ui < 0.0 {
                        a + d
                    } else if ui > 0.0 {
                        b - d
                    } else {
                        a + 0.5 * width
                    }
                })
                .collect()
        }
        (Endpoint::Finite(a), Endpoint::PosInfinity) => {
            let (dmin, dmax) = half_line_reach(spec, a);
            let (lmin, lmax) = (dmin.ln(), dmax.ln());
            (0..count)
                .map(|i| a + (lmin + (lmax - lmin) * (u(i) + 1.0) / 2.0).exp())
                .collect()
        }
        (Endpoint::NegInfinity, Endpoint::Finite(b)) => (0..count).map(|i| b - 1e8f64.powf(-u(i))).collect(),
        _ => Vec::new(),
    }
}

/// Offsets from the finite endpoint of a half-line domain at which `psi`
/// reaches roughly `1e-8` and `1e8`.
fn half_line_reach(spec: &TransformSpec, a: f64) -> (f64, f64) {
    let clamp = |x: f64| x.clamp(1e-300, 1e300);
    match spec {
        TransformSpec::Square => (1e-4, 1e4),
        TransformSpec::PowerOneMinusAlpha { alpha } => {
            let e = 1.0 / (1.0 - alpha);
            (clamp(1e-8f64.powf(e)), clamp(1e8f64.powf(e)))
        }
        _ => {
            let lo = spec.inverse(1e-8).map(|w| w - a).filter(|d| *d > 0.0);
            let hi = spec.inverse(1e8).map(|w| w - a).filter(|d| *d > 0.0);
            (clamp(lo.unwrap_or(1e-8)), clamp(hi.unwrap_or(1e8)))
        }
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformSpec::Exp => write!(f, "exp"),
            TransformSpec::Square => write!(f, "square"),
            TransformSpec::PowerOneMinusAlpha { alpha } => write!(f, "power(1-{alpha})"),
            TransformSpec::TanHalfPi => write!(f, "tan(w*pi/2)"),
            TransformSpec::Rational { sigma, rho } => write!(f, "rational(sigma={sigma}, rho={rho})"),
            TransformSpec::Custom(c) => write!(f, "custom({})", c.name),
        }
    }
}
