//! Fast path against the oracles.

use std::sync::Arc;

use fracint::engine::evaluate_with_rule;
use fracint::quadrature::{build_diffusive_rule, decay_envelope};
use fracint::{
    evaluate_on_grid, init_state, make_order, rl_direct, rl_power_closed_form, SourceFunction, Stepper, TimeGrid,
    TransformSpec,
};

fn end_error(alpha: f64, f: &SourceFunction, exact: f64, n: usize, m: usize, stepper: Stepper) -> f64 {
    let o = make_order(alpha).unwrap();
    let g = TimeGrid::uniform(0.0, 1.0, n).unwrap();
    let v = evaluate_on_grid(&o, &TransformSpec::Exp, f, &g, m, stepper).unwrap();
    ((v[n - 1] - exact) / exact).abs()
}

fn orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn empirical_orders_of_both_steppers() {
    let o = make_order(0.5).unwrap();
    let f = SourceFunction::custom(|t| t + 1.0);
    let exact = rl_power_closed_form(&o, 1.0, 0.0, 1.0).unwrap() + rl_power_closed_form(&o, 0.0, 0.0, 1.0).unwrap();
    let ns = [64, 128, 256, 512];
    for (stepper, target) in [(Stepper::BackwardEuler, 1.0), (Stepper::Trapezoidal, 2.0)] {
        let errs: Vec<f64> = ns.iter().map(|&n| end_error(0.5, &f, exact, n, 60, stepper)).collect();
        for p in orders(&errs) {
            assert!((p - target).abs() < 0.2, "{stepper}: {errs:?}");
        }
    }
}

#[test]
fn undamped_trapezoid_loses_order_for_small_alpha() {
    // Without the damped start the stiff nodes keep an O(h^(2 alpha)) error.
    let o = make_order(0.25).unwrap();
    let f = SourceFunction::from_tag("const", 0.0).unwrap();
    let exact = rl_power_closed_form(&o, 0.0, 0.0, 1.0).unwrap();
    let errs: Vec<f64> = [128, 256, 512, 1024]
        .iter()
        .map(|&n| end_error(0.25, &f, exact, n, 60, Stepper::TrapezoidalUndamped))
        .collect();
    let damped: Vec<f64> = [128, 256, 512, 1024]
        .iter()
        .map(|&n| end_error(0.25, &f, exact, n, 60, Stepper::Trapezoidal))
        .collect();
    let p_plain = orders(&errs);
    let p_damped = orders(&damped);
    assert!(p_plain.iter().all(|p| *p < 1.0), "{p_plain:?}");
    assert!(p_damped.iter().all(|p| (p - 2.0).abs() < 0.2), "{p_damped:?}");
}

#[test]
fn matches_rl_direct_on_smooth_sources() {
    let n = 4096;
    let g = TimeGrid::uniform(0.0, 1.0, n).unwrap();
    for alpha in [0.25, 0.5, 0.75] {
        let o = make_order(alpha).unwrap();
        for tag in ["const", "poly:1", "sin"] {
            let f = SourceFunction::from_tag(tag, 0.0).unwrap();
            let v = evaluate_on_grid(&o, &TransformSpec::Exp, &f, &g, 60, Stepper::Trapezoidal).unwrap();
            for k in [n / 4 - 1, n / 2 - 1, n - 1] {
                let t = g.points()[k];
                let r = rl_direct(&o, &f, 0.0, t, 1e-13).unwrap();
                assert!(
                    ((v[k] - r) / r).abs() < 1e-5,
                    "alpha {alpha} f {tag} t {t}: {} vs {r}",
                    v[k]
                );
            }
        }
    }
}

#[test]
fn shifted_interval_and_long_horizon() {
    let o = make_order(0.6).unwrap();
    let (a, b) = (2.0, 12.0);
    let f = SourceFunction::from_tag("poly:2", a).unwrap();
    let g = TimeGrid::uniform(a, b, 8000).unwrap();
    let v = evaluate_on_grid(&o, &TransformSpec::Exp, &f, &g, 60, Stepper::Trapezoidal).unwrap();
    let exact = rl_power_closed_form(&o, 2.0, a, b).unwrap();
    assert!(((v[7999] - exact) / exact).abs() < 1e-5, "{} vs {exact}", v[7999]);
}

#[test]
fn non_uniform_grid() {
    let o = make_order(0.5).unwrap();
    let f = SourceFunction::from_tag("const", 0.0).unwrap();
    // Graded toward a.
    let pts: Vec<f64> = (1..=2000).map(|k| (k as f64 / 2000.0).powi(2)).collect();
    let g = TimeGrid::new(0.0, pts).unwrap();
    assert!(!g.is_uniform());
    let v = evaluate_on_grid(&o, &TransformSpec::Exp, &f, &g, 60, Stepper::Trapezoidal).unwrap();
    for (k, &t) in g.points().iter().enumerate().skip(50) {
        let exact = rl_power_closed_form(&o, 0.0, 0.0, t).unwrap();
        assert!(((v[k] - exact) / exact).abs() < 1e-4, "t {t}");
    }
}

#[test]
fn other_transforms_also_converge() {
    let o = make_order(0.5).unwrap();
    let f = SourceFunction::from_tag("const", 0.0).unwrap();
    let g = TimeGrid::uniform(0.0, 1.0, 2048).unwrap();
    let exact = rl_power_closed_form(&o, 0.0, 0.0, 1.0).unwrap();
    for (spec, m, tol) in [
        (TransformSpec::TanHalfPi, 40, 1e-4),
        (TransformSpec::rational(1.0, 1.0).unwrap(), 40, 1e-4),
        (TransformSpec::Square, 40, 1e-4),
    ] {
        let v = evaluate_on_grid(&o, &spec, &f, &g, m, Stepper::Trapezoidal).unwrap();
        let e = ((v[2047] - exact) / exact).abs();
        assert!(e < tol, "{spec}: {e}");
    }
}

#[test]
fn power_transform_converges_slowly_but_steadily() {
    // The integrand decays only algebraically in omega at both ends.
    let o = make_order(0.5).unwrap();
    let f = SourceFunction::from_tag("const", 0.0).unwrap();
    let g = TimeGrid::uniform(0.0, 1.0, 2048).unwrap();
    let exact = rl_power_closed_form(&o, 0.0, 0.0, 1.0).unwrap();
    let spec = TransformSpec::power_one_minus_alpha(0.5).unwrap();
    let errs: Vec<f64> = [10, 20, 40, 80]
        .iter()
        .map(|&m| {
            let v = evaluate_on_grid(&o, &spec, &f, &g, m, Stepper::Trapezoidal).unwrap();
            ((v[2047] - exact) / exact).abs()
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < 0.5 * w[0]), "{errs:?}");
    assert!(errs[3] < 1e-3, "{errs:?}");
}

#[test]
fn results_are_bit_identical_across_runs() {
    let o = make_order(0.37).unwrap();
    let f = SourceFunction::from_tag("sin", 0.0).unwrap();
    let g = TimeGrid::uniform(0.0, 3.0, 1000).unwrap();
    let runs: Vec<Vec<f64>> = (0..3)
        .map(|_| evaluate_on_grid(&o, &TransformSpec::Exp, &f, &g, 30, Stepper::Trapezoidal).unwrap())
        .collect();
    for r in &runs[1..] {
        assert!(r.iter().zip(&runs[0]).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn results_are_identical_across_threads() {
    let o = make_order(0.5).unwrap();
    let f = SourceFunction::from_tag("cos", 0.0).unwrap();
    let g = TimeGrid::uniform(0.0, 1.0, 512).unwrap();
    let rule = Arc::new(build_diffusive_rule(&o, &TransformSpec::Exp, 20, 1.0).unwrap());
    let serial = evaluate_with_rule(&o, &TransformSpec::Exp, rule.clone(), &f, &g, Stepper::BackwardEuler).unwrap();
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let (rule, f, g) = (rule.clone(), f.clone(), g.clone());
            std::thread::spawn(move || {
                evaluate_with_rule(&o, &TransformSpec::Exp, rule, &f, &g, Stepper::BackwardEuler).unwrap()
            })
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), serial);
    }
}

#[test]
fn streaming_interface_matches_grid_evaluation() {
    let o = make_order(0.5).unwrap();
    let f = SourceFunction::from_tag("exp", 0.0).unwrap();
    let g = TimeGrid::uniform(0.0, 1.0, 100).unwrap();
    let rule = build_diffusive_rule(&o, &TransformSpec::Exp, 20, 1.0).unwrap();
    let batch = evaluate_with_rule(&o, &TransformSpec::Exp, rule.clone(), &f, &g, Stepper::BackwardEuler).unwrap();
    let mut s = init_state(&o, rule, &TransformSpec::Exp, 0.0).unwrap();
    for (k, &t) in g.points().iter().enumerate() {
        s.step_backward_euler(0.01, f.eval(t)).unwrap();
        assert_eq!(s.read_value(), batch[k]);
    }
}

#[test]
fn state_size_is_independent_of_grid_length() {
    let o = make_order(0.5).unwrap();
    let rule = Arc::new(build_diffusive_rule(&o, &TransformSpec::Exp, 40, 1.0).unwrap());
    let sizes: Vec<usize> = [1000, 10_000, 100_000]
        .iter()
        .map(|&n| {
            let mut s = init_state(&o, rule.clone(), &TransformSpec::Exp, 0.0).unwrap();
            let h = 1.0 / n as f64;
            for _ in 0..n {
                s.step_trapezoidal(h, 1.0, 1.0).unwrap();
            }
            s.footprint_bytes()
        })
        .collect();
    assert!(sizes.windows(2).all(|w| w[0] == w[1]), "{sizes:?}");
}

#[test]
fn nodes_are_denser_where_the_envelope_is_large() {
    // Relative psi-gaps between neighbouring nodes are compared in the
    // region where the decay envelope is within 1e-3 of its peak and where it
    // has dropped below 1e-12 of it.
    let o = make_order(0.5).unwrap();
    for (spec, m) in [
        (TransformSpec::Exp, 40),
        (TransformSpec::Square, 30),
        (TransformSpec::TanHalfPi, 30),
    ] {
        let rule = build_diffusive_rule(&o, &spec, m, 1.0).unwrap();
        let env: Vec<f64> = rule
            .nodes()
            .iter()
            .map(|&w| decay_envelope(&o, &spec, w, 1.0).unwrap())
            .collect();
        let peak = env.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut dense = Vec::new();
        let mut sparse = Vec::new();
        for i in 0..rule.len() - 1 {
            let (w0, w1) = (rule.nodes()[i], rule.nodes()[i + 1]);
            let (p0, p1) = (spec.psi(w0).unwrap(), spec.psi(w1).unwrap());
            let gap = (p1 / p0).ln();
            let e = env[i].max(env[i + 1]) - peak;
            if e > (1e-3f64).ln() {
                dense.push(gap);
            } else if e < (1e-12f64).ln() {
                sparse.push(gap);
            }
        }
        if sparse.is_empty() {
            continue;
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&dense) < mean(&sparse),
            "{spec}: dense {} sparse {}",
            mean(&dense),
            mean(&sparse)
        );
    }
}

#[test]
fn rule_built_for_a_horizon_serves_shorter_times() {
    let o = make_order(0.5).unwrap();
    let f = SourceFunction::from_tag("const", 0.0).unwrap();
    for horizon in [1e-2, 1.0, 100.0] {
        let g = TimeGrid::uniform(0.0, horizon, 4096).unwrap();
        let v = evaluate_on_grid(&o, &TransformSpec::Exp, &f, &g, 60, Stepper::Trapezoidal).unwrap();
        for k in [1023, 2047, 4095] {
            let t = g.points()[k];
            let exact = rl_power_closed_form(&o, 0.0, 0.0, t).unwrap();
            assert!(((v[k] - exact) / exact).abs() < 1e-6, "horizon {horizon} t {t}");
        }
    }
}
