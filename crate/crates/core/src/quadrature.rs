//! Gaussian rules and the `omega`-space quadrature of the diffusive
//! representation.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fractional::FractionalOrder;
use crate::transform::{Endpoint, TransformKind, TransformSpec};

pub const MAX_LAGUERRE: usize = 128;
pub const MAX_LEGENDRE: usize = 64;

/// Order of the Gauss–Legendre panels used on finite and half-line domains.
pub const PANEL_ORDER: usize = 8;

/// Relative level of the decay envelope at which half-line domains are cut.
pub const TRUNCATION_LEVEL: f64 = 1e-16;

/// A Gaussian rule on its reference interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Laguerre rule for `int_0^inf p(x) e^(-x) dx`, exact for degree
/// `<= 2M - 1`.
pub fn gauss_laguerre(m: usize) -> Result<GaussRule> {
    let (nodes, ln_w) = laguerre_log_weights(m)?;
    Ok(GaussRule {
        nodes,
        weights: ln_w.into_iter().map(f64::exp).collect(),
    })
}

/// Laguerre recurrence: returns `(L_k(x), L_{k-1}(x))`.
fn laguerre_pair(k: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = 1.0 - x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 1..k {
        let j = j as f64;
        let next = ((2.0 * j + 1.0 - x) * cur - j * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Nodes and natural-log weights of the `m`-point Gauss–Laguerre rule.
///
/// Nodes start from the eigenvalues of the Jacobi matrix (diagonal `2k+1`,
/// off-diagonal `k`) and are polished by Newton on `L_m`. The weights are
/// kept in log form because the largest nodes carry weights far below
/// `1e-200`.
pub(crate) fn laguerre_log_weights(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if m == 0 || m > MAX_LAGUERRE {
        return Err(Error::range(
            "M",
            format!("Gauss–Laguerre needs 1 <= M <= {MAX_LAGUERRE}, got {m}"),
        ));
    }
    let jacobi = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            2.0 * i as f64 + 1.0
        } else if i + 1 == j || j + 1 == i {
            i.max(j) as f64
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let mf = m as f64;
    for x in nodes.iter_mut() {
        // The eigenvalues are already close; Newton settles within a few
        // iterations and then only jitters at rounding level.
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            let (l, lm1) = laguerre_pair(m, *x);
            let dl = mf * (l - lm1) / *x;
            let dx = l / dl;
            *x -= dx;
            last = dx.abs();
            if last <= f64::EPSILON * x.abs() {
                break;
            }
        }
        if !(last <= 1e-10 * x.abs()) || !(*x > 0.0) {
            return Err(Error::Convergence(format!("Laguerre node near {x} (M = {m})")));
        }
    }
    if nodes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Convergence(format!("Laguerre nodes not distinct for M = {m}")));
    }
    // Christoffel form 1 / sum_{k<m} L_k(x)^2: every term is smooth in x, so
    // rounding in the node barely moves the weight.
    let ln_w = nodes
        .iter()
        .map(|&x| {
            let mut prev = 1.0;
            let mut cur = 1.0 - x;
            let mut sum = 1.0;
            for j in 1..m {
                sum += cur * cur;
                let jf = j as f64;
                let next = ((2.0 * jf + 1.0 - x) * cur - jf * prev) / (jf + 1.0);
                prev = cur;
                cur = next;
            }
            -sum.ln()
        })
        .collect();
    Ok((nodes, ln_w))
}

/// Gauss–Legendre rule on `[-1, 1]`, exact for degree `<= 2M - 1`.
pub fn gauss_legendre(m: usize) -> Result<GaussRule> {
    if m == 0 || m > MAX_LEGENDRE {
        return Err(Error::range(
            "M",
            format!("Gauss–Legendre needs 1 <= M <= {MAX_LEGENDRE}, got {m}"),
        ));
    }
    let mf = m as f64;
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let (p, pm1) = legendre_pair(m, x);
            dp = mf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 2.0 * f64::EPSILON {
                let (p, pm1) = legendre_pair(m, x);
                dp = mf * (x * p - pm1) / (x * x - 1.0);
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence(format!("Legendre node {i} (M = {m})")));
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    Ok(GaussRule { nodes, weights })
}

fn legendre_pair(m: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    for j in 1..m {
        let j = j as f64;
        let next = ((2.0 * j + 1.0) * x * cur - j * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    if m == 0 {
        (1.0, 0.0)
    } else {
        (cur, prev)
    }
}

/// The 15-point Gauss–Legendre rule, computed once.
pub(crate) fn gl15() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(15).expect("15-point Gauss–Legendre"))
}

/// Neumaier-compensated sum in iteration order.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// How a [`QuadratureRule`] was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleMethod {
    /// Gauss–Laguerre tails on both sides of a window of Gauss–Legendre
    /// panels (the exponential transform).
    LaguerreHybrid,
    /// Composite Gauss–Legendre panels graded geometrically toward both ends
    /// of a bounded domain.
    GradedPanels,
    /// Graded panels on a half-line cut at `omega_max`.
    TruncatedPanels,
    /// Nodes and weights supplied directly by the caller.
    Explicit,
}

impl fmt::Display for RuleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleMethod::LaguerreHybrid => "laguerre-hybrid",
            RuleMethod::GradedPanels => "graded-panels",
            RuleMethod::TruncatedPanels => "truncated-panels",
            RuleMethod::Explicit => "explicit",
        })
    }
}

/// Construction parameters recorded alongside a rule.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleMeta {
    pub method: RuleMethod,
    pub m_half: usize,
    pub horizon: f64,
    pub alpha: f64,
    /// `omega` with `psi(omega) = 1 / horizon`, where the kernel changes
    /// from its lower to its upper decay regime.
    pub center: f64,
    /// Bounds of the panel window (hybrid rule) or of the panelled region.
    pub window: (f64, f64),
    pub panels: usize,
    pub panel_order: usize,
    /// Laguerre node counts of the lower and upper tails (hybrid rule only).
    pub laguerre: (usize, usize),
    /// Cut-off of a half-line domain and the envelope level it corresponds to.
    pub omega_max: Option<f64>,
    pub truncation_level: Option<f64>,
}

/// Nodes and weights approximating `int_Omega phi(t, omega) d omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    meta: RuleMeta,
}

impl QuadratureRule {
    /// Validates and wraps a rule: equal lengths, strictly increasing nodes,
    /// finite weights.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, meta: RuleMeta) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("rule nodes must be strictly increasing"));
        }
        if weights.iter().chain(&nodes).any(|v| !v.is_finite()) {
            return Err(Error::invalid("rule nodes and weights must be finite"));
        }
        Ok(QuadratureRule { nodes, weights, meta })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn meta(&self) -> &RuleMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_m w_m g(omega_m)` with compensated summation in node order.
    pub fn apply(&self, g: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)))
    }

    /// Like [`apply`](Self::apply) for a fallible integrand.
    pub fn try_apply(&self, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let terms = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| g(x).map(|v| w * v))
            .collect::<Result<Vec<f64>>>()?;
        Ok(compensated_sum(terms))
    }
}

/// `ln` of the decay envelope of the kernel at `omega`:
/// `psi' min(psi^(-alpha-1), H^n psi^(n-alpha-1))`.
///
/// The first branch bounds the kernel where `psi` is large, the second where
/// `psi` is small; they cross at `psi = 1 / H`.
pub fn decay_envelope(order: &FractionalOrder, spec: &TransformSpec, omega: f64, horizon: f64) -> Result<f64> {
    spec.domain().check(omega)?;
    Ok(ln_envelope(order, spec, omega, horizon))
}

fn ln_envelope(order: &FractionalOrder, spec: &TransformSpec, omega: f64, horizon: f64) -> f64 {
    let a = order.alpha();
    let n = f64::from(order.n());
    let lp = spec.ln_psi_unchecked(omega);
    spec.ln_psi_prime_unchecked(omega) + (-(a + 1.0) * lp).min(n * horizon.ln() + (n - a - 1.0) * lp)
}

/// Builds the `omega`-space rule for `order` and `spec` serving
/// `0 < t - a <= horizon`.
///
/// * Exponential transform: `2 M_half` nodes. A window of Gauss–Legendre
///   panels is centred at `omega_c = -ln(horizon)`; beyond it, Gauss–Laguerre
///   tails are scaled to the decay rates `n - alpha` (below) and `alpha`
///   (above).
/// * Bounded domains: `M_half` Gauss–Legendre panels of order 8, graded by a
///   factor 2 toward both endpoints and split at `psi = 1 / horizon`.
/// * Half-lines `(lo, inf)`: the same grading toward `lo`, geometric panels
///   above `omega_c`, cut where the decay envelope has fallen by `1e-16`.
pub fn build_diffusive_rule(
    order: &FractionalOrder,
    spec: &TransformSpec,
    m_half: usize,
    horizon: f64,
) -> Result<QuadratureRule> {
    if m_half == 0 {
        return Err(Error::range("M_half", "must be at least 1"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    if let TransformSpec::PowerOneMinusAlpha { alpha } = spec {
        if *alpha != order.alpha() {
            return Err(Error::invalid(format!(
                "power transform is tied to alpha = {alpha} but the order is {}",
                order.alpha()
            )));
        }
    }
    let domain = spec.domain();
    match (spec.kind(), domain.lo, domain.hi) {
        (TransformKind::Exp, _, _) => exp_hybrid_rule(order, m_half, horizon),
        (_, Endpoint::Finite(lo), Endpoint::Finite(hi)) => bounded_rule(order, spec, m_half, horizon, lo, hi),
        (_, Endpoint::Finite(lo), Endpoint::PosInfinity) => half_line_rule(order, spec, m_half, horizon, lo),
        _ => Err(Error::UnsupportedTransform(spec.to_string())),
    }
}

fn exp_hybrid_rule(order: &FractionalOrder, m_half: usize, horizon: f64) -> Result<QuadratureRule> {
    let alpha = order.alpha();
    let lower_rate = f64::from(order.n()) - alpha;
    let total = 2 * m_half;
    let tail = (m_half / 5).max(1);
    let rem = total - 2 * tail;
    let q = if rem >= 16 { 8 } else { 4 };
    let panels = rem / q;
    let (lag_lo, lag_hi) = (tail, tail + rem - panels * q);
    if lag_hi > MAX_LAGUERRE {
        return Err(Error::range(
            "M_half",
            format!("{m_half} needs more than {MAX_LAGUERRE} Laguerre nodes"),
        ));
    }

    // The window shrinks for coarse rules so the Laguerre tails take over.
    let s = (0.35 * (m_half as f64).sqrt()).min(1.0);
    let (width_lo, width_hi) = if panels == 0 {
        (0.0, 0.0)
    } else {
        (4.0 * s / lower_rate.sqrt(), 12.0 * s)
    };
    let center = -horizon.ln();
    let (w_lo, w_hi) = (center - width_lo, center + width_hi);

    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);

    let (x, lw) = laguerre_log_weights(lag_lo)?;
    for (xi, lwi) in x.iter().zip(&lw).rev() {
        nodes.push(w_lo - xi / lower_rate);
        weights.push((lwi + xi).exp() / lower_rate);
    }
    if panels > 0 {
        let gl = gauss_legendre(q)?;
        let h = (w_hi - w_lo) / panels as f64;
        for p in 0..panels {
            let mid = w_lo + (p as f64 + 0.5) * h;
            for (xi, wi) in gl.nodes.iter().zip(&gl.weights) {
                nodes.push(mid + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
    }
    let (x, lw) = laguerre_log_weights(lag_hi)?;
    for (xi, lwi) in x.iter().zip(&lw) {
        nodes.push(w_hi + xi / alpha);
        weights.push((lwi + xi).exp() / alpha);
    }

    QuadratureRule::new(
        nodes,
        weights,
        RuleMeta {
            method: RuleMethod::LaguerreHybrid,
            m_half,
            horizon,
            alpha,
            center,
            window: (w_lo, w_hi),
            panels,
            panel_order: q,
            laguerre: (lag_lo, lag_hi),
            omega_max: None,
            truncation_level: None,
        },
    )
}

/// `count` panels on `[from, to]` with widths halving toward `to`; the last
/// panel reaches `to` itself.
fn graded_edges(from: f64, to: f64, count: usize) -> Vec<f64> {
    let mut edges = Vec::with_capacity(count + 1);
    let d = to - from;
    for j in 0..count {
        edges.push(to - d * 0.5f64.powi(j as i32));
    }
    edges.push(to);
    edges
}

fn push_panels(edges: &[f64], gl: &GaussRule, nodes: &mut Vec<f64>, weights: &mut Vec<f64>) {
    for e in edges.windows(2) {
        let (a, b) = if e[0] < e[1] { (e[0], e[1]) } else { (e[1], e[0]) };
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
}

fn center_of(spec: &TransformSpec, horizon: f64) -> Result<f64> {
    let c = spec
        .inverse(1.0 / horizon)
        .ok_or_else(|| Error::UnsupportedTransform(format!("{spec}: cannot locate psi = 1/horizon")))?;
    spec.domain().check(c)?;
    Ok(c)
}

fn sort_rule(nodes: Vec<f64>, weights: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = nodes.into_iter().zip(weights).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn bounded_rule(
    order: &FractionalOrder,
    spec: &TransformSpec,
    m_half: usize,
    horizon: f64,
    lo: f64,
    hi: f64,
) -> Result<QuadratureRule> {
    let center = center_of(spec, horizon)?;
    let k_lo = m_half.div_ceil(2);
    let k_hi = m_half / 2;
    let gl = gauss_legendre(PANEL_ORDER)?;
    let mut nodes = Vec::with_capacity(m_half * PANEL_ORDER);
    let mut weights = Vec::with_capacity(m_half * PANEL_ORDER);
    push_panels(&graded_edges(center, lo, k_lo), &gl, &mut nodes, &mut weights);
    if k_hi > 0 {
        push_panels(&graded_edges(center, hi, k_hi), &gl, &mut nodes, &mut weights);
    }
    let (nodes, weights) = sort_rule(nodes, weights);
    let domain = spec.domain();
    if nodes.iter().any(|&x| !domain.contains(x)) {
        return Err(Error::range(
            "M_half",
            format!("{m_half} panels grade below floating-point resolution"),
        ));
    }
    QuadratureRule::new(
        nodes,
        weights,
        RuleMeta {
            method: RuleMethod::GradedPanels,
            m_half,
            horizon,
            alpha: order.alpha(),
            center,
            window: (lo, hi),
            panels: m_half,
            panel_order: PANEL_ORDER,
            laguerre: (0, 0),
            omega_max: None,
            truncation_level: None,
        },
    )
}

fn half_line_rule(
    order: &FractionalOrder,
    spec: &TransformSpec,
    m_half: usize,
    horizon: f64,
    lo: f64,
) -> Result<QuadratureRule> {
    let center = center_of(spec, horizon)?;
    let ln_ref = ln_envelope(order, spec, center, horizon);
    let cutoff = ln_ref + TRUNCATION_LEVEL.ln();
    // Geometric search in the distance from the lower endpoint.
    let mut omega_max;
    let mut dist = center - lo;
    loop {
        dist *= 2.0;
        omega_max = lo + dist;
        if !omega_max.is_finite() || dist > 1e300 {
            return Err(Error::UnsupportedTransform(format!(
                "{spec}: decay envelope does not fall below {TRUNCATION_LEVEL:e} of its reference value"
            )));
        }
        if ln_envelope(order, spec, omega_max, horizon) <= cutoff {
            break;
        }
    }
    // Tighten by bisection on [omega_max / 2, omega_max].
    let mut a = lo + 0.5 * dist;
    let mut b = omega_max;
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if ln_envelope(order, spec, mid, horizon) <= cutoff {
            b = mid;
        } else {
            a = mid;
        }
    }
    omega_max = b.max(center * (1.0 + 1e-12));

    let k_lo = m_half.div_ceil(2);
    let k_hi = m_half / 2;
    let gl = gauss_legendre(PANEL_ORDER)?;
    let mut nodes = Vec::with_capacity(m_half * PANEL_ORDER);
    let mut weights = Vec::with_capacity(m_half * PANEL_ORDER);
    push_panels(&graded_edges(center, lo, k_lo), &gl, &mut nodes, &mut weights);
    if k_hi > 0 {
        let (c0, c1) = (center - lo, omega_max - lo);
        let ratio = (c1 / c0).powf(1.0 / k_hi as f64);
        let edges: Vec<f64> = (0..=k_hi)
            .map(|j| {
                if j == k_hi {
                    omega_max
                } else {
                    lo + c0 * ratio.powi(j as i32)
                }
            })
            .collect();
        push_panels(&edges, &gl, &mut nodes, &mut weights);
    }
    let (nodes, weights) = sort_rule(nodes, weights);
    QuadratureRule::new(
        nodes,
        weights,
        RuleMeta {
            method: RuleMethod::TruncatedPanels,
            m_half,
            horizon,
            alpha: order.alpha(),
            center,
            window: (lo, omega_max),
            panels: m_half,
            panel_order: PANEL_ORDER,
            laguerre: (0, 0),
            omega_max: Some(omega_max),
            truncation_level: Some(TRUNCATION_LEVEL),
        },
    )
}
