//! Closed-form exponents, transition points and branch selection for the
//! averaged integral means spectrum of exterior whole-plane SLE.
//!
//! Everything in this module is elementary algebra on the pair `(kappa, t)`:
//! the quadratics `beta`, `A`, `C`, the distinguished roots `gamma0` and
//! `gamma1`, the four spectrum branches and the transition orders
//! `t1 < t2 < t3`, plus the packing-spectrum / derivative-exponent pair.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExponentError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("exponent `{0}` is outside its real domain")]
    AbsentExponent(&'static str),
    #[error("domain error: {0}")]
    DomainError(String),
}

/// The pair driving everything: SLE parameter `kappa > 0` and moment order `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    kappa: f64,
    t: f64,
}

impl Parameters {
    pub fn new(kappa: f64, t: f64) -> Result<Self, ExponentError> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(ExponentError::InvalidParameters(format!(
                "kappa must be finite and positive, got {kappa}"
            )));
        }
        if !t.is_finite() {
            return Err(ExponentError::InvalidParameters(format!(
                "t must be finite, got {t}"
            )));
        }
        Ok(Self { kappa, t })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

/// beta(gamma) = kappa*gamma^2 - (kappa/2 + 2)*gamma + t
pub fn beta_of_gamma(p: &Parameters, gamma: f64) -> f64 {
    p.kappa * gamma * gamma - (p.kappa / 2.0 + 2.0) * gamma + p.t
}

/// A(gamma) = -(kappa/2)*gamma^2 + gamma - t
pub fn a_of_gamma(p: &Parameters, gamma: f64) -> f64 {
    -(p.kappa / 2.0) * gamma * gamma + gamma - p.t
}

/// C(gamma) = A(gamma) + (1 + kappa/2)*gamma
pub fn c_of_gamma(p: &Parameters, gamma: f64) -> f64 {
    a_of_gamma(p, gamma) + (1.0 + p.kappa / 2.0) * gamma
}

/// The three quadratics at once: `(beta, A, C)` evaluated at `gamma`.
pub fn quadratics(p: &Parameters, gamma: f64) -> (f64, f64, f64) {
    (
        beta_of_gamma(p, gamma),
        a_of_gamma(p, gamma),
        c_of_gamma(p, gamma),
    )
}

/// Sign of g0(0), alternating across the intervals cut out by `T_kappa`.
pub type Sign = i8;

/// All derived exponents for one `(kappa, t)`.
///
/// Fields whose defining square root would be negative are `None` rather
/// than NaN, so domain bugs surface in the type system instead of
/// propagating silently.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSet {
    pub kappa: f64,
    pub t: f64,
    pub gamma0: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma_plus: Option<f64>,
    pub gamma_minus: Option<f64>,
    pub beta0: Option<f64>,
    pub beta1: Option<f64>,
    pub beta_tip: Option<f64>,
    pub beta_lin: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub a_prime: Option<f64>,
    pub b_prime: Option<f64>,
    pub c_prime: Option<f64>,
    /// Leading small-u exponent of u*g0'/g0.
    pub alpha: Option<f64>,
    /// Sign of g0(0); +1 above t1, alternating below.
    pub sigma: Sign,
}

macro_rules! getter {
    ($name:ident) => {
        pub fn $name(&self) -> Result<f64, ExponentError> {
            self.$name
                .ok_or(ExponentError::AbsentExponent(stringify!($name)))
        }
    };
}

impl ExponentSet {
    getter!(gamma0);
    getter!(gamma1);
    getter!(gamma_plus);
    getter!(gamma_minus);
    getter!(beta0);
    getter!(beta1);
    getter!(beta_tip);
    getter!(a);
    getter!(b);
    getter!(c);
    getter!(a_prime);
    getter!(b_prime);
    getter!(c_prime);
    getter!(alpha);

    /// a + b = 2*gamma0 - 2/kappa; real whenever gamma0 is, even when the
    /// individual a, b form a complex-conjugate pair (t > 1/(2 kappa)).
    pub fn a_plus_b(&self) -> Result<f64, ExponentError> {
        let g0 = self.gamma0()?;
        Ok(2.0 * g0 - 2.0 / self.kappa)
    }
}

/// Compute every exponent of the set that is real at this `(kappa, t)`.
pub fn exponent_set(p: &Parameters) -> ExponentSet {
    let (kappa, t) = (p.kappa, p.t);
    let disc0 = (4.0 + kappa).powi(2) - 8.0 * kappa * t;
    let disc1 = 1.0 - 2.0 * kappa * t;

    let gamma0 = (disc0 >= 0.0).then(|| (4.0 + kappa - disc0.sqrt()) / (2.0 * kappa));
    let gamma_plus = (disc1 >= 0.0).then(|| (1.0 + disc1.sqrt()) / kappa);
    let gamma_minus = (disc1 >= 0.0).then(|| (1.0 - disc1.sqrt()) / kappa);
    let gamma1 = gamma_plus;

    let beta0 = gamma0.map(|g| beta_of_gamma(p, g));
    let beta1 = gamma1.map(|g| beta_of_gamma(p, g));
    let beta_tip = match (beta0, gamma0) {
        (Some(b0), Some(g0)) => Some(b0 - 2.0 * g0 - 1.0),
        _ => None,
    };
    let beta_lin = t - (4.0 + kappa).powi(2) / (16.0 * kappa);

    let a = match (gamma0, gamma_plus) {
        (Some(g0), Some(gp)) => Some(g0 - gp),
        _ => None,
    };
    let b = match (gamma0, gamma_minus) {
        (Some(g0), Some(gm)) => Some(g0 - gm),
        _ => None,
    };
    let c = match (a, b) {
        (Some(a), Some(b)) => Some(0.5 + a + b),
        _ => None,
    };
    let a_prime = a.map(|a| 0.5 - a);
    let b_prime = b.map(|b| 0.5 - b);
    let c_prime = match (a_prime, b_prime) {
        (Some(ap), Some(bp)) => Some(0.5 + ap + bp),
        _ => None,
    };

    // alpha = min(1/2 - a - b, 1); when C0 = 0 (t in T_kappa) the u^1 term is
    // absent and alpha = 1/2 - a - b regardless. a + b is real whenever
    // gamma0 is.
    let alpha = gamma0.map(|g0| {
        let half_ab = 0.5 - (2.0 * g0 - 2.0 / kappa);
        if in_t_kappa(kappa, t, 1e-12) {
            half_ab
        } else {
            half_ab.min(1.0)
        }
    });

    ExponentSet {
        kappa,
        t,
        gamma0,
        gamma1,
        gamma_plus,
        gamma_minus,
        beta0,
        beta1,
        beta_tip,
        beta_lin,
        a,
        b,
        c,
        a_prime,
        b_prime,
        c_prime,
        alpha,
        sigma: sigma(kappa, t),
    }
}

/// Which closed form of the spectrum applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// beta_tip, t <= t2 in the tip-included variant.
    Tip,
    /// beta_1, t <= t1 in the tip-excluded variant.
    One,
    /// beta_0, the bulk spectrum.
    Bulk,
    /// beta_lin = t - (4+kappa)^2/(16 kappa), t >= t3.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumValue {
    pub value: f64,
    pub branch: Branch,
}

/// The transition orders of the spectrum plus the discrete set `T_kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSet {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    /// `(n, t_{1-n})` for n in `J_kappa`, decreasing in value, with any n
    /// satisfying n*kappa = 1 excluded (divergent denominator).
    pub t_seq: Vec<(u32, f64)>,
    pub j_max: u32,
    /// Members of `J_kappa` excluded because n*kappa = 1.
    pub excluded: Vec<u32>,
}

/// `t_{1-n}` of the half-integer-b family; `None` when n*kappa = 1.
pub fn t_one_minus_n(kappa: f64, n: u32) -> Option<f64> {
    let n = n as f64;
    let d = 1.0 - n * kappa;
    if d.abs() < 1e-9 {
        return None;
    }
    Some(
        -(1.0 + 2.0 * n) * (8.0 + kappa - 2.0 * n * kappa) * (4.0 + kappa + 2.0 * n * kappa)
            * (4.0 + kappa - 2.0 * n * kappa)
            / (128.0 * d * d),
    )
}

pub fn transitions(kappa: f64) -> TransitionSet {
    let t1 = -(4.0 + kappa).powi(2) * (8.0 + kappa) / 128.0;
    let t2 = -1.0 - 3.0 * kappa / 8.0;
    let t3 = 3.0 * (4.0 + kappa).powi(2) / (32.0 * kappa);
    let j_max = (1.0 / kappa).floor() as u32;
    let mut t_seq = Vec::new();
    let mut excluded = Vec::new();
    for n in 0..=j_max {
        match t_one_minus_n(kappa, n) {
            Some(v) => t_seq.push((n, v)),
            None => excluded.push(n),
        }
    }
    TransitionSet {
        t1,
        t2,
        t3,
        t_seq,
        j_max,
        excluded,
    }
}

/// True when `t` lies within `tol` of a member of `T_kappa`.
pub fn in_t_kappa(kappa: f64, t: f64, tol: f64) -> bool {
    transitions(kappa)
        .t_seq
        .iter()
        .any(|&(_, tk)| (t - tk).abs() <= tol)
}

/// Interval index n such that `t` lies in `(t_{-n}, t_{1-n})`, for t < t1.
/// Returns `None` for t >= t1.
pub fn interval_index(kappa: f64, t: f64) -> Option<u32> {
    let tr = transitions(kappa);
    if t >= tr.t1 {
        return None;
    }
    // t_seq values decrease with n; count how many lie above t. The last
    // interval extends to -infinity.
    let above = tr.t_seq.iter().filter(|&&(_, tk)| tk > t).count() as u32;
    Some(above.saturating_sub(1))
}

/// Sign of g0(0): +1 for t > t1, (-1)^(n-1) on `(t_{-n}, t_{1-n})` below.
pub fn sigma(kappa: f64, t: f64) -> Sign {
    match interval_index(kappa, t) {
        None => 1,
        Some(n) => {
            if n % 2 == 0 {
                -1
            } else {
                1
            }
        }
    }
}

/// The spectrum of the main theorem, both variants.
///
/// `tip_included = true` keeps the neighbourhood of theta = 0 in the
/// integral means (tip branch below t2); `false` excludes it (beta_1 branch
/// below t1). At an exact transition the lower-t branch is reported; the
/// value is the common one.
pub fn theorem_spectrum(p: &Parameters, tip_included: bool) -> SpectrumValue {
    let tr = transitions(p.kappa);
    let xs = exponent_set(p);
    if tip_included {
        if p.t <= tr.t2 {
            return SpectrumValue {
                value: xs.beta_tip.expect("beta_tip real for t <= t2"),
                branch: Branch::Tip,
            };
        }
    } else if p.t <= tr.t1 {
        return SpectrumValue {
            value: xs.beta1.expect("beta1 real for t <= t1"),
            branch: Branch::One,
        };
    }
    if p.t <= tr.t3 {
        SpectrumValue {
            value: xs.beta0.expect("beta0 real for t <= t3"),
            branch: Branch::Bulk,
        }
    } else {
        SpectrumValue {
            value: xs.beta_lin,
            branch: Branch::Linear,
        }
    }
}

/// Packing spectrum s(t) = beta_1(t) - t + 1, defined for t <= t1.
pub fn packing_s(kappa: f64, t: f64) -> Result<f64, ExponentError> {
    let tr = transitions(kappa);
    if t > tr.t1 {
        return Err(ExponentError::DomainError(format!(
            "packing spectrum needs t <= t1 = {}, got t = {t}",
            tr.t1
        )));
    }
    Ok(-2.0 * t + 0.5 - 0.5 * (1.0 - 2.0 * kappa * t).sqrt())
}

/// Derivative exponent nu(s), inverse of the packing spectrum: t = -nu(s(t)).
pub fn nu_of_s(kappa: f64, s: f64) -> Result<f64, ExponentError> {
    let tr = transitions(kappa);
    let s_min = packing_s(kappa, tr.t1)?;
    if s < s_min - 1e-12 {
        return Err(ExponentError::DomainError(format!(
            "s = {s} below the forward image boundary s(t1) = {s_min}"
        )));
    }
    let disc = (4.0 - kappa).powi(2) + 16.0 * kappa * s;
    Ok(s / 2.0 + (kappa - 4.0 + disc.sqrt()) / 16.0)
}

/// Forward/inverse selector mirroring the packing/nu pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackingDirection {
    Forward,
    Inverse,
}

pub fn packing_and_nu(
    kappa: f64,
    t_or_s: f64,
    direction: PackingDirection,
) -> Result<f64, ExponentError> {
    match direction {
        PackingDirection::Forward => packing_s(kappa, t_or_s),
        PackingDirection::Inverse => nu_of_s(kappa, t_or_s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(kappa: f64, t: f64) -> Parameters {
        Parameters::new(kappa, t).unwrap()
    }

    #[test]
    fn quadratics_vanish_at_origin() {
        let (beta, a, c) = quadratics(&p(4.0, 0.0), 0.0);
        assert_eq!(beta, 0.0);
        assert_eq!(a, 0.0);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn c_vanishes_at_gamma0_of_t2() {
        // gamma0(t2) = -0.5 at kappa = 4 since sqrt((4+kappa)^2 - 8 kappa t) = 12
        let (_, _, c) = quadratics(&p(4.0, -2.5), -0.5);
        assert!(c.abs() < 1e-12, "C = {c}");
    }

    #[test]
    fn a_vanishes_at_gamma_plus() {
        for &kappa in &[0.5, 2.0, 4.0, 8.0] {
            for &t in &[-10.0, -1.0, 0.0, 1.0 / (2.0 * kappa)] {
                let xs = exponent_set(&p(kappa, t));
                let gp = xs.gamma_plus().unwrap();
                let a = a_of_gamma(&p(kappa, t), gp);
                assert!(a.abs() < 1e-10, "A(gamma+) = {a} at kappa={kappa} t={t}");
            }
        }
    }

    #[test]
    fn exponents_at_kappa4_t0() {
        let xs = exponent_set(&p(4.0, 0.0));
        assert!((xs.gamma0().unwrap() - 0.0).abs() < 1e-15);
        assert!((xs.gamma1().unwrap() - 0.5).abs() < 1e-15);
        assert!((xs.beta0().unwrap() - 0.0).abs() < 1e-15);
        assert!((xs.beta1().unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn exponents_at_kappa4_t1_coincidence() {
        // sqrt(1+48) = 7, sqrt(64+192) = 16
        let xs = exponent_set(&p(4.0, -6.0));
        assert!((xs.beta0().unwrap() - 2.0).abs() < 1e-12);
        assert!((xs.beta1().unwrap() - 2.0).abs() < 1e-12);
        assert!((xs.b().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sigma_below_t1() {
        assert_eq!(sigma(4.0, -7.0), -1);
        assert_eq!(sigma(4.0, -1.0), 1);
        // kappa = 0.5: t1 ~ -1.3447, t0 ~ -13.535; n = 1 interval has sigma = +1
        assert_eq!(sigma(0.5, -1.0), 1);
        assert_eq!(sigma(0.5, -5.0), -1);
        assert_eq!(sigma(0.5, -20.0), 1);
    }

    #[test]
    fn transitions_kappa4_and_6() {
        let tr = transitions(4.0);
        assert!((tr.t1 + 6.0).abs() < 1e-12);
        assert!((tr.t2 + 2.5).abs() < 1e-12);
        assert!((tr.t3 - 1.5).abs() < 1e-12);
        assert!((transitions(6.0).t2 + 3.25).abs() < 1e-12);
    }

    #[test]
    fn t_seq_starts_at_t1_and_decreases() {
        for &kappa in &[0.5, 1.0, 0.3, 4.0] {
            let tr = transitions(kappa);
            assert_eq!(tr.t_seq[0].0, 0);
            assert!((tr.t_seq[0].1 - tr.t1).abs() < 1e-10 * tr.t1.abs());
            for w in tr.t_seq.windows(2) {
                assert!(w[1].1 < w[0].1, "t_seq not decreasing at kappa={kappa}");
            }
        }
    }

    #[test]
    fn excluded_when_n_kappa_is_one() {
        let tr = transitions(0.5);
        assert_eq!(tr.j_max, 2);
        assert_eq!(tr.excluded, vec![2]);
        assert_eq!(tr.t_seq.len(), 2);
    }

    #[test]
    fn spectrum_boundary_values() {
        // Bulk/Linear boundary at kappa = 4, t = t3 = 1.5: value 0.5
        let sv = theorem_spectrum(&p(4.0, 1.5), true);
        assert!((sv.value - 0.5).abs() < 1e-12);
        let sv2 = theorem_spectrum(&p(4.0, 1.5), false);
        assert!((sv2.value - 0.5).abs() < 1e-12);
        // Tip/Bulk boundary at t2 = -2.5: common value 0.5
        let sv3 = theorem_spectrum(&p(4.0, -2.5), true);
        assert!((sv3.value - 0.5).abs() < 1e-12);
        assert_eq!(sv3.branch, Branch::Tip);
        // t = 0 gives 0 in both variants
        for tip in [true, false] {
            assert!(theorem_spectrum(&p(4.0, 0.0), tip).value.abs() < 1e-15);
        }
    }

    #[test]
    fn packing_forward_and_inverse() {
        // kappa=4, t=-6: sqrt(49) = 7, s = 12.5 - 3.5 = 9
        let s = packing_s(4.0, -6.0).unwrap();
        assert!((s - 9.0).abs() < 1e-12);
        let nu = nu_of_s(4.0, 9.0).unwrap();
        assert!((nu - 6.0).abs() < 1e-12);
        assert!(packing_s(4.0, 0.0).is_err());
    }

    #[test]
    fn packing_round_trip_on_grid() {
        let t1 = transitions(4.0).t1;
        for i in 0..200 {
            let t = -50.0 + (t1 + 50.0) * (i as f64) / 199.0;
            let s = packing_s(4.0, t).unwrap();
            let back = -nu_of_s(4.0, s).unwrap();
            assert!((back - t).abs() < 1e-9 * (1.0 + t.abs()), "t={t} back={back}");
        }
    }

    #[test]
    fn absent_exponents_flagged() {
        // t > t3 region where 1 - 2 kappa t < 0 but gamma0 still real
        let xs = exponent_set(&p(4.0, 1.9));
        assert!(xs.gamma1.is_none());
        assert!(matches!(
            xs.beta1(),
            Err(ExponentError::AbsentExponent("beta1"))
        ));
        assert!(xs.gamma0.is_some());
        // far above: gamma0 also gone
        let xs2 = exponent_set(&p(4.0, 10.0));
        assert!(xs2.gamma0.is_none());
        assert!(xs2.alpha.is_none());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Parameters::new(0.0, 1.0).is_err());
        assert!(Parameters::new(-1.0, 1.0).is_err());
        assert!(Parameters::new(4.0, f64::NAN).is_err());
        assert!(Parameters::new(f64::INFINITY, 1.0).is_err());
    }
}
