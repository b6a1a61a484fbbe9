//! Randomized invariants of the exponent family, the boundary ODE
//! solution, and the closed-form spectrum.

use proptest::prelude::*;
use wpsle::exponents::{
    a_of_gamma, exponent_set, in_t_kappa, theorem_spectrum, transitions, Parameters,
};
use wpsle::hyper::build_g0;
use wpsle::pde::bulk_quadratic_coefficient;

fn p(kappa: f64, t: f64) -> Parameters {
    Parameters::new(kappa, t).unwrap()
}

/// Map a unit sample to t in [3 t1, t3], well inside every branch domain.
fn t_in_range(kappa: f64, s: f64) -> f64 {
    let tr = transitions(kappa);
    3.0 * tr.t1 + s * (tr.t3 - 3.0 * tr.t1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn spectrum_is_continuous(kappa in 0.5..8.0f64, s in 0.0..0.999f64) {
        let t = t_in_range(kappa, s);
        let h = 1e-7;
        for tip in [true, false] {
            let lo = theorem_spectrum(&p(kappa, t), tip).value;
            let hi = theorem_spectrum(&p(kappa, t + h), tip).value;
            prop_assert!((hi - lo).abs() < 1e-5, "jump {} at t = {t}", hi - lo);
        }
    }

    #[test]
    fn spectrum_is_convex(kappa in 0.5..8.0f64, s in 0.001..0.999f64) {
        let t = t_in_range(kappa, s);
        let h = 1e-3;
        for tip in [true, false] {
            let f = |t: f64| theorem_spectrum(&p(kappa, t), tip).value;
            let second = f(t - h) + f(t + h) - 2.0 * f(t);
            prop_assert!(second >= -1e-9, "concave dip {second} at t = {t}");
        }
    }

    #[test]
    fn gamma_sum_is_strictly_decreasing(
        kappa in 0.5..8.0f64,
        s1 in 0.0..1.0f64,
        s2 in 0.0..1.0f64,
    ) {
        // both gamma0 and gamma1 are real up to t = 1/(2 kappa)
        let hi = 1.0 / (2.0 * kappa) - 1e-9;
        let lo = 3.0 * transitions(kappa).t1;
        let mut ta = lo + s1 * (hi - lo);
        let mut tb = lo + s2 * (hi - lo);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        prop_assume!(tb - ta > 1e-9);
        let sum = |t: f64| {
            let xs = exponent_set(&p(kappa, t));
            xs.gamma0().unwrap() + xs.gamma1().unwrap()
        };
        prop_assert!(sum(ta) > sum(tb));
    }
}

proptest! {
    // each case builds a hypergeometric solution, so fewer of them
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn u_dlog_slope_matches_alpha(kappa in 0.5..8.0f64, s in 0.0..1.0f64) {
        let t = t_in_range(kappa, s * 0.9);
        prop_assume!(!in_t_kappa(kappa, t, 1e-2));
        let xs = exponent_set(&p(kappa, t));
        let alpha = xs.alpha().unwrap();
        // the sub-leading term decays like u^gap relative to the leading
        // one; the window [1e-6, 1e-4] only shows a clean power law when
        // the two exponents are well separated
        let gap = ((0.5 - xs.a_plus_b().unwrap()) - 1.0).abs();
        prop_assume!(gap > 0.5);
        let sol = build_g0(&p(kappa, t)).unwrap();
        let (u_lo, u_hi) = (1e-6, 1e-4);
        let v_lo = sol.u_dlog(u_lo).unwrap();
        let v_hi = sol.u_dlog(u_hi).unwrap();
        prop_assume!(v_lo.abs() > 1e-300 && v_hi.abs() > 1e-300);
        let slope = (v_hi.abs().ln() - v_lo.abs().ln()) / (u_hi / u_lo).ln();
        prop_assert!(
            (slope - alpha).abs() < 0.02,
            "u g0'/g0 slope {slope} vs alpha {alpha} at kappa = {kappa}, t = {t}"
        );
    }

    #[test]
    fn bulk_quadratic_coefficient_decays_like_u_alpha(
        kappa in 0.5..8.0f64,
        s in 0.0..1.0f64,
    ) {
        let t = t_in_range(kappa, s * 0.9);
        prop_assume!(!in_t_kappa(kappa, t, 1e-2));
        let pp = p(kappa, t);
        let xs = exponent_set(&pp);
        let alpha = xs.alpha().unwrap();
        let gap = ((0.5 - xs.a_plus_b().unwrap()) - 1.0).abs();
        prop_assume!(gap > 0.5);
        let sol = build_g0(&pp).unwrap();
        let (u_lo, u_hi) = (1e-6, 1e-4);
        let c_lo = bulk_quadratic_coefficient(&pp, &sol, u_lo).unwrap();
        let c_hi = bulk_quadratic_coefficient(&pp, &sol, u_hi).unwrap();
        prop_assume!(c_lo.abs() > 1e-300 && c_hi.abs() > 1e-300);
        let slope = (c_hi.abs().ln() - c_lo.abs().ln()) / (u_hi / u_lo).ln();
        prop_assert!(
            (slope - alpha).abs() < 0.05,
            "coefficient slope {slope} vs alpha {alpha} at kappa = {kappa}, t = {t}"
        );
    }
}

/// At the outer endpoint the log-derivative has the limit
/// kappa g0'/g0 -> A(gamma0): the (4 - u)^-1 factor in the action stays
/// bounded only because the numerator vanishes at the same rate.
#[test]
fn endpoint_log_derivative_limit() {
    for (kappa, t) in [(2.0, -1.0), (4.0, -1.0), (6.0, 0.5), (8.0 / 3.0, -3.0)] {
        let pp = p(kappa, t);
        let gamma0 = exponent_set(&pp).gamma0().unwrap();
        let a_g = a_of_gamma(&pp, gamma0);
        let sol = build_g0(&pp).unwrap();
        let gap = |du: f64| {
            let u = 4.0 - du;
            (kappa * sol.u_dlog(u).unwrap() / u - a_g).abs()
        };
        let near = gap(1e-3);
        let far = gap(2e-3);
        assert!(
            near < 0.05 * (1.0 + a_g.abs()),
            "kappa g0'/g0 = A gap {near} at kappa = {kappa}, t = {t}"
        );
        // the gap closes linearly in 4 - u
        assert!(near < 0.75 * far, "no decay: {near} vs {far}");
    }
}
