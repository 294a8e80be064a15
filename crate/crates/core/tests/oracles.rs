//! Cross-checks between the reference computations.

use fracint::engine::RESIDUAL_ORACLE_TOL;
use fracint::fractional::FractionalOrder;
use fracint::oracle::fit_slope;
use fracint::{
    gamma, make_order, phi_decay_probe, phi_direct, residual_check_ode, rl_direct, rl_power_closed_form,
    SourceFunction, TransformSpec,
};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn rl_direct_matches_power_closed_form() {
    for alpha in [0.3, 0.5, 0.7, 1.5, 2.5] {
        let o = make_order(alpha).unwrap();
        for beta in [0.0, 1.0, 2.0] {
            for span in [0.5, 1.0, 2.0] {
                let a = -0.25;
                let f = SourceFunction::from_tag(&format!("poly:{beta}"), a).unwrap();
                let direct = rl_direct(&o, &f, a, a + span, 1e-13).unwrap();
                let exact = rl_power_closed_form(&o, beta, a, a + span).unwrap();
                assert!(
                    rel(direct, exact) < 1e-8,
                    "alpha {alpha} beta {beta} span {span}: {direct} vs {exact}"
                );
            }
        }
    }
}

#[test]
#[allow(clippy::approx_constant)] // quoted reference values
fn closed_form_examples() {
    let o = make_order(0.5).unwrap();
    let v = rl_power_closed_form(&o, 0.0, 0.0, 1.0).unwrap();
    assert!((v - 1.128_379_167_1).abs() < 1e-10);
    let v = rl_power_closed_form(&o, 1.0, 0.0, 1.0).unwrap();
    assert!((v - 0.752_252_778_1).abs() < 1e-10);
    let v = rl_power_closed_form(&o, 2.0, 0.0, 1.0).unwrap();
    assert!((v - 2.0 / gamma(3.5).unwrap()).abs() < 1e-15);
    assert_eq!(rl_power_closed_form(&o, 1.7, 3.0, 3.0).unwrap(), 0.0);
}

/// `int phi(t, w) dw` over `[-40, 40]` by the trapezoidal rule, plus the
/// leading-order tails beyond the window when `with_tails` is set.
fn diffusive_integral(o: &FractionalOrder, f: &SourceFunction, t: f64, with_tails: bool) -> f64 {
    let (lo, hi, n) = (-40.0, 40.0, 1600);
    let h = (hi - lo) / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let w = lo + i as f64 * h;
        let p = phi_direct(o, &TransformSpec::Exp, f, 0.0, t, w, 1e-12).unwrap();
        sum += if i == 0 || i == n { 0.5 * p } else { p };
    }
    let mut total = sum * h;
    if with_tails {
        // Large psi: phi ~ c (n-1)! f(t) e^(-alpha w).
        // Small psi: phi ~ c e^((n-alpha) w) int_0^t (t-s)^(n-1) f(s) ds.
        let alpha = o.alpha();
        let nn = f64::from(o.n());
        let fact = gamma(nn).unwrap();
        let m = {
            let k = 4000;
            let hs = t / k as f64;
            (0..k)
                .map(|j| {
                    let s = (j as f64 + 0.5) * hs;
                    (t - s).powf(nn - 1.0) * f.eval(s)
                })
                .sum::<f64>()
                * hs
        };
        total += o.c_alpha() * fact * f.eval(t) * (-alpha * hi).exp() / alpha;
        total += o.c_alpha() * m * ((nn - alpha) * lo).exp() / (nn - alpha);
    }
    total
}

#[test]
fn diffusive_identity_reproduces_the_integral() {
    let sources = [
        ("const", SourceFunction::from_tag("const", 0.0).unwrap()),
        ("id", SourceFunction::custom(|t| t)),
    ];
    for alpha in [0.25, 0.5, 0.75, 1.5] {
        let o = make_order(alpha).unwrap();
        for (name, f) in &sources {
            let reference = rl_direct(&o, f, 0.0, 1.0, 1e-13).unwrap();
            let v = diffusive_integral(&o, f, 1.0, true);
            assert!(rel(v, reference) < 1e-6, "alpha {alpha} f {name}: {v} vs {reference}");
        }
    }
}

#[test]
fn diffusive_identity_on_the_plain_window() {
    // Without tail terms the window [-40, 40] suffices whenever both decay
    // rates alpha and n - alpha are at least one half.
    let f = SourceFunction::from_tag("const", 0.0).unwrap();
    for alpha in [0.5, 1.5] {
        let o = make_order(alpha).unwrap();
        let reference = rl_direct(&o, &f, 0.0, 1.0, 1e-13).unwrap();
        let v = diffusive_integral(&o, &f, 1.0, false);
        assert!(rel(v, reference) < 1e-6, "alpha {alpha}: {v} vs {reference}");
    }
}

#[test]
fn ode_residuals_are_small() {
    let f = SourceFunction::from_tag("sin", 0.0).unwrap();
    let g = SourceFunction::from_tag("const", 0.0).unwrap();
    for (alpha, bound) in [(0.5, 1e-6), (0.25, 1e-6), (1.5, 1e-4)] {
        let o = make_order(alpha).unwrap();
        for t in [0.2, 0.5, 0.9] {
            for w in [-2.0, 0.0, 2.0] {
                for src in [&f, &g] {
                    let r = residual_check_ode(&o, &TransformSpec::Exp, src, 0.0, t, w, 1e-3).unwrap();
                    assert!(r < bound, "alpha {alpha} t {t} w {w} {}: {r}", src.tag());
                }
            }
        }
    }
}

#[test]
fn ode_residual_of_third_order_kernel() {
    let o = make_order(2.5).unwrap();
    let f = SourceFunction::from_tag("const", 0.0).unwrap();
    let r = residual_check_ode(&o, &TransformSpec::Exp, &f, 0.0, 0.5, 0.0, 1e-2).unwrap();
    assert!(r < 1e-4, "{r}");
}

#[test]
fn kernel_starts_from_rest() {
    // phi and its first n - 1 time derivatives vanish at t = a.
    let f = SourceFunction::from_tag("cos", 0.0).unwrap();
    let h = 1e-4;
    for alpha in [0.5, 1.5, 2.5] {
        let o = make_order(alpha).unwrap();
        for w in [-1.0, 0.0, 1.5] {
            let p = |t: f64| phi_direct(&o, &TransformSpec::Exp, &f, 0.0, t, w, RESIDUAL_ORACLE_TOL).unwrap();
            let (p0, p1, p2, p3) = (p(0.0), p(h), p(2.0 * h), p(3.0 * h));
            assert_eq!(p0, 0.0);
            if o.n() >= 2 {
                // Second-order one-sided first derivative.
                let d1 = (-3.0 * p0 + 4.0 * p1 - p2) / (2.0 * h);
                assert!(d1.abs() < 1e-6, "alpha {alpha} w {w}: {d1}");
            }
            if o.n() >= 3 {
                let d2 = (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) / (h * h);
                assert!(d2.abs() < 1e-6, "alpha {alpha} w {w}: {d2}");
            }
        }
    }
}

#[test]
fn kernel_is_smooth_in_omega() {
    // Divided differences up to order 4 stay bounded as the mesh is refined.
    let o = make_order(0.5).unwrap();
    let f = SourceFunction::from_tag("sin", 0.0).unwrap();
    let sup_diff = |h: f64, k: usize| {
        let n = (16.0 / h) as usize;
        let vals: Vec<f64> = (0..=n)
            .map(|i| phi_direct(&o, &TransformSpec::Exp, &f, 0.0, 1.0, -8.0 + i as f64 * h, 1e-12).unwrap())
            .collect();
        let mut d = vals;
        for _ in 0..k {
            d = d.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        }
        d.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    };
    for k in 1..=4 {
        let coarse = sup_diff(0.1, k);
        let fine = sup_diff(0.05, k);
        assert!(
            fine.is_finite() && fine < 1.2 * coarse + 1e-12,
            "order {k}: {coarse} -> {fine}"
        );
        assert!(fine < 10.0, "order {k}: {fine}");
    }
}

#[test]
fn decay_slopes_match_the_asymptotic_rates() {
    let f = SourceFunction::from_tag("const", 0.0).unwrap();
    for alpha in [0.25, 0.5, 0.75, 1.5] {
        let o = make_order(alpha).unwrap();
        let up: Vec<f64> = (0..=6).map(|i| 6.0 + i as f64).collect();
        let lo: Vec<f64> = (0..=6).map(|i| -12.0 + i as f64).collect();
        let fit = |ws: &[f64]| {
            let pairs = phi_decay_probe(&o, &TransformSpec::Exp, &f, 0.0, 1.0, ws).unwrap();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
            fit_slope(ws, &ys).unwrap()
        };
        let s_up = fit(&up);
        let s_lo = fit(&lo);
        assert!((s_up + alpha).abs() < 0.05, "alpha {alpha}: upper slope {s_up}");
        assert!(
            (s_lo - (f64::from(o.n()) - alpha)).abs() < 0.05,
            "alpha {alpha}: lower slope {s_lo}"
        );
    }
}

#[test]
fn decay_in_psi_for_the_square_transform() {
    // After dividing out psi', log|phi| against log psi has slope -alpha-1
    // at the upper end and n-alpha-1 at the lower end.
    let o = make_order(0.5).unwrap();
    let f = SourceFunction::from_tag("const", 0.0).unwrap();
    let spec = TransformSpec::Square;
    let fit = |ws: &[f64]| {
        let pairs = phi_decay_probe(&o, &spec, &f, 0.0, 1.0, ws).unwrap();
        let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pairs
            .iter()
            .zip(ws)
            .map(|(p, w)| p.1.ln() - spec.psi_prime(*w).unwrap().ln())
            .collect();
        fit_slope(&xs, &ys).unwrap()
    };
    let up: Vec<f64> = (0..8).map(|i| 100.0 * 2f64.powi(i)).collect();
    let lo: Vec<f64> = (0..8).map(|i| 1e-4 * 2f64.powi(i)).collect();
    assert!((fit(&up) + 1.5).abs() < 0.05);
    assert!((fit(&lo) + 0.5).abs() < 0.05);
}
