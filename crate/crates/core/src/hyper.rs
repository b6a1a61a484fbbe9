//! Real-argument Gauss hypergeometric and log-gamma kernels, and the
//! boundary solution g0 with its connection coefficients C0, C0'.
//!
//! The series machinery works with the parameter pair (a, b) in one of two
//! states: both real, or a complex-conjugate pair (which happens for the
//! g0 parameters whenever t > 1/(2 kappa)). In the conjugate case every
//! quantity that actually enters g0 — Pochhammer products, gamma-function
//! products, connection coefficients — is real, so the evaluation stays in
//! f64 end to end.

use crate::exponents::{exponent_set, in_t_kappa, transitions, ExponentSet, Parameters};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HyperError {
    #[error("c = {0} is within 1e-8 of a nonpositive integer (logarithmic case not implemented)")]
    DegenerateC(f64),
    #[error("hypergeometric series did not converge (a={a}, b={b}, c={c}, x={x})")]
    NonConvergent { a: f64, b: f64, c: f64, x: f64 },
    #[error("gamma pole at nonpositive integer x = {0}")]
    PoleError(f64),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("zero grid too coarse: multiple sign changes in one cell near u = {0}")]
    GridTooCoarse(f64),
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_nonpos_int(x: f64, tol: f64) -> bool {
    x <= tol && (x - x.round()).abs() < tol
}

/// sin(pi x) with argument reduction, plus its sign.
fn sin_pi(x: f64) -> f64 {
    let k = x.floor();
    let r = x - k;
    let s = (PI * r).sin();
    if (k as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

fn lanczos_ln_gamma_pos(x: f64) -> f64 {
    // valid for x >= 0.5
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let tt = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * tt.ln() - tt + acc.ln()
}

/// log|Gamma(x)| and sign(Gamma(x)); reflection formula for x < 0.5.
pub fn log_gamma(x: f64) -> Result<(f64, i8), HyperError> {
    if !x.is_finite() {
        return Err(HyperError::DomainError(format!("log_gamma({x})")));
    }
    if is_nonpos_int(x, 1e-12) {
        return Err(HyperError::PoleError(x));
    }
    if x >= 0.5 {
        Ok((lanczos_ln_gamma_pos(x), 1))
    } else {
        // Gamma(x) = pi / (sin(pi x) Gamma(1 - x))
        let s = sin_pi(x);
        let lg = PI.ln() - s.abs().ln() - lanczos_ln_gamma_pos(1.0 - x);
        Ok((lg, if s > 0.0 { 1 } else { -1 }))
    }
}

/// Principal log-Gamma for complex argument (Lanczos + reflection).
pub fn ln_gamma_complex(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let one = Complex64::new(1.0, 0.0);
        Complex64::new(PI.ln(), 0.0) - (Complex64::new(PI, 0.0) * z).sin().ln()
            - ln_gamma_complex(one - z)
    } else {
        let zm = z - 1.0;
        let mut acc = Complex64::new(LANCZOS_COEF[0], 0.0);
        for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += Complex64::new(c, 0.0) / (zm + i as f64);
        }
        let tt = zm + LANCZOS_G + 0.5;
        Complex64::new(0.5 * (2.0 * PI).ln(), 0.0) + (zm + 0.5) * tt.ln() - tt + acc.ln()
    }
}

/// Upper-row parameters of a 2F1: two reals or a conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamPair {
    Real(f64, f64),
    /// (re, |im|): the pair re +/- i*im.
    Conjugate(f64, f64),
}

impl ParamPair {
    fn from_complex(a: Complex64, b: Complex64) -> Self {
        if a.im == 0.0 && b.im == 0.0 {
            ParamPair::Real(a.re, b.re)
        } else {
            debug_assert!((a.im + b.im).abs() < 1e-12 * (1.0 + a.im.abs()));
            ParamPair::Conjugate(a.re, a.im.abs())
        }
    }

    /// (a + n)(b + n), always real for a conjugate pair.
    fn poch_factor(&self, n: f64) -> f64 {
        match *self {
            ParamPair::Real(a, b) => (a + n) * (b + n),
            ParamPair::Conjugate(re, im) => (re + n) * (re + n) + im * im,
        }
    }

    fn a_plus_b(&self) -> f64 {
        match *self {
            ParamPair::Real(a, b) => a + b,
            ParamPair::Conjugate(re, _) => 2.0 * re,
        }
    }

    /// Does the series terminate (a or b an exact nonpositive integer)?
    fn terminates_at(&self) -> Option<usize> {
        if let ParamPair::Real(a, b) = *self {
            let mut m: Option<usize> = None;
            for v in [a, b] {
                if v <= 0.0 && v == v.round() {
                    let k = (-v) as usize;
                    m = Some(m.map_or(k, |cur| cur.min(k)));
                }
            }
            m
        } else {
            None
        }
    }

    /// 1 / (Gamma(a) Gamma(b)); zero at poles.
    fn recip_gamma_product(&self) -> f64 {
        match *self {
            ParamPair::Real(a, b) => {
                let ga = log_gamma(a);
                let gb = log_gamma(b);
                match (ga, gb) {
                    (Ok((la, sa)), Ok((lb, sb))) => {
                        (sa as f64) * (sb as f64) * (-la - lb).exp()
                    }
                    _ => 0.0,
                }
            }
            ParamPair::Conjugate(re, im) => {
                let lg = ln_gamma_complex(Complex64::new(re, im));
                (-2.0 * lg.re).exp()
            }
        }
    }

    /// The pair (c - a, c - b) for real c.
    fn complement(&self, c: f64) -> Self {
        match *self {
            ParamPair::Real(a, b) => ParamPair::Real(c - a, c - b),
            ParamPair::Conjugate(re, im) => ParamPair::Conjugate(c - re, im),
        }
    }
}

const SERIES_MAX_TERMS: usize = 4000;
const SERIES_EPS: f64 = 1e-16;

/// 2F1(a,b;c;x) with d/dx and d2/dx2, by term-wise differentiated series.
/// Requires |x| < 1 (or a terminating series).
fn series_2f1(ab: ParamPair, c: f64, x: f64) -> Result<(f64, f64, f64), HyperError> {
    let term_cap = ab.terminates_at();
    if term_cap.is_none() && is_nonpos_int(c, 1e-8) {
        return Err(HyperError::DegenerateC(c));
    }
    let mut f = 0.0_f64;
    let mut f1 = 0.0_f64;
    let mut f2 = 0.0_f64;
    let mut cf = 0.0_f64; // Kahan compensation for f
    let mut term = 1.0_f64; // coefficient * x^n
    let mut n = 0usize;
    loop {
        // accumulate
        let y = term - cf;
        let t = f + y;
        cf = (t - f) - y;
        f = t;
        if n >= 1 && x != 0.0 {
            f1 += (n as f64) * term / x;
        }
        if n >= 2 && x != 0.0 {
            f2 += (n as f64) * ((n - 1) as f64) * term / (x * x);
        }
        if let Some(m) = term_cap {
            if n >= m {
                break;
            }
        }
        let nf = n as f64;
        let num = ab.poch_factor(nf);
        if num == 0.0 {
            break;
        }
        let den = (c + nf) * (nf + 1.0);
        if den == 0.0 || (c + nf).abs() < 1e-10 {
            return Err(HyperError::DegenerateC(c));
        }
        term *= num / den * x;
        n += 1;
        if n > SERIES_MAX_TERMS {
            let (a, b) = match ab {
                ParamPair::Real(a, b) => (a, b),
                ParamPair::Conjugate(re, im) => (re, im),
            };
            return Err(HyperError::NonConvergent { a, b, c, x });
        }
        if term.abs() < SERIES_EPS * (1.0 + f.abs()) && n > 4 && x.abs() < 0.9 {
            break;
        }
        if term.abs() < 1e-3 * SERIES_EPS * (1.0 + f.abs()) {
            break;
        }
    }
    Ok((f, f1, f2))
}

/// Full evaluation with the 1-x connection formula for x > 1/2 and the
/// Gauss summation at x = 1. Returns (F, F', F'') in x; the second and
/// third entries are NaN at exactly x = 1.
fn eval_2f1(ab: ParamPair, c: f64, x: f64) -> Result<(f64, f64, f64), HyperError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(HyperError::DomainError(format!(
            "2F1 argument x = {x} outside [0, 1]"
        )));
    }
    if ab.terminates_at().is_some() {
        return series_2f1(ab, c, x);
    }
    if x <= 0.5 {
        return series_2f1(ab, c, x);
    }
    let s = c - ab.a_plus_b();
    if (s - s.round()).abs() < 1e-8 {
        return Err(HyperError::DegenerateC(c));
    }
    if is_nonpos_int(c, 1e-8) {
        return Err(HyperError::DegenerateC(c));
    }
    let (lg_c, sg_c) = log_gamma(c)?;
    if x >= 1.0 {
        if s <= 0.0 {
            return Err(HyperError::DomainError(format!(
                "2F1 divergent at x = 1 (c - a - b = {s} <= 0)"
            )));
        }
        let (lg_s, sg_s) = log_gamma(s)?;
        let v = (sg_c as f64) * (sg_s as f64) * (lg_c + lg_s).exp()
            * ab.complement(c).recip_gamma_product();
        return Ok((v, f64::NAN, f64::NAN));
    }
    let y = 1.0 - x;
    // P = G(c)G(s)/(G(c-a)G(c-b)), Q = G(c)G(-s)/(G(a)G(b))
    let (lg_s, sg_s) = log_gamma(s)?;
    let (lg_ms, sg_ms) = log_gamma(-s)?;
    let p = (sg_c as f64) * (sg_s as f64) * (lg_c + lg_s).exp()
        * ab.complement(c).recip_gamma_product();
    let q = (sg_c as f64) * (sg_ms as f64) * (lg_c + lg_ms).exp() * ab.recip_gamma_product();
    let (g1, g1p, g1pp) = series_2f1(ab, 1.0 - s, y)?;
    let (g2, g2p, g2pp) = series_2f1(ab.complement(c), 1.0 + s, y)?;
    let ys = y.powf(s);
    let f = p * g1 + q * ys * g2;
    // F(x) = P g1(y) + Q y^s g2(y) with y = 1 - x, so d/dx = -d/dy
    let h1 = s * y.powf(s - 1.0) * g2 + ys * g2p;
    let f1 = -(p * g1p + q * h1);
    let h2 = s * (s - 1.0) * y.powf(s - 2.0) * g2 + 2.0 * s * y.powf(s - 1.0) * g2p + ys * g2pp;
    let f2 = p * g1pp + q * h2;
    Ok((f, f1, f2))
}

/// Gauss hypergeometric function 2F1(a, b; c; x) for real parameters and
/// x in [0, 1]; x = 1 requires c - a - b > 0.
pub fn gauss_2f1(a: f64, b: f64, c: f64, x: f64) -> Result<f64, HyperError> {
    eval_2f1(ParamPair::Real(a, b), c, x).map(|(f, _, _)| f)
}

/// The boundary solution g0 on u in [0, 4] with its connection
/// coefficients, for the Beliaev-Smirnov exponent pair (beta0, gamma0).
#[derive(Debug, Clone)]
pub struct HypergeometricSolution {
    pub params: ExponentSet,
    kappa: f64,
    t: f64,
    ab: ParamPair,
    c: f64,
    ab_prime: ParamPair,
    c_prime: f64,
    /// 1/2 - a - b, the exponent of the second Frobenius branch.
    pub s: f64,
    pub c0: f64,
    pub c0_prime: f64,
    /// Set when t is within 1e-6 of a member of T_kappa (C0 ~ 0).
    pub near_tk: bool,
}

impl HypergeometricSolution {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

/// Build g0 for the given parameters. Requires t < t3(kappa).
pub fn build_g0(p: &Parameters) -> Result<HypergeometricSolution, HyperError> {
    let (kappa, t) = (p.kappa(), p.t());
    let tr = transitions(kappa);
    if t >= tr.t3 {
        return Err(HyperError::DomainError(format!(
            "build_g0 requires t < t3 = {}, got t = {t}",
            tr.t3
        )));
    }
    let xs = exponent_set(p);
    let gamma0 = xs
        .gamma0()
        .map_err(|e| HyperError::DomainError(e.to_string()))?;
    let disc1 = 1.0 - 2.0 * kappa * t;
    let (a, b) = if disc1 >= 0.0 {
        let r = disc1.sqrt();
        (
            Complex64::new(gamma0 - (1.0 + r) / kappa, 0.0),
            Complex64::new(gamma0 - (1.0 - r) / kappa, 0.0),
        )
    } else {
        let q = (-disc1).sqrt() / kappa;
        (
            Complex64::new(gamma0 - 1.0 / kappa, -q),
            Complex64::new(gamma0 - 1.0 / kappa, q),
        )
    };
    let ab = ParamPair::from_complex(a, b);
    let apb = ab.a_plus_b();
    let c = 0.5 + apb;
    let s = 0.5 - apb;
    let ab_prime = match ab {
        ParamPair::Real(a, b) => ParamPair::Real(0.5 - a, 0.5 - b),
        ParamPair::Conjugate(re, im) => ParamPair::Conjugate(0.5 - re, im),
    };
    let c_prime = 0.5 + ab_prime.a_plus_b();
    // degenerate c only matters when the series does not terminate first
    if ab.terminates_at().is_none() && is_nonpos_int(c, 1e-8) {
        return Err(HyperError::DegenerateC(c));
    }
    if ab_prime.terminates_at().is_none() && is_nonpos_int(c_prime, 1e-8) {
        return Err(HyperError::DegenerateC(c_prime));
    }
    // C0 = G(3/2-a-b) / (G(1/2-a)G(1/2-b)), C0' = G(c) / (G(a)G(b))
    let (lg_n, sg_n) = log_gamma(1.0 + s)?;
    let c0 = (sg_n as f64) * lg_n.exp() * ab_prime.recip_gamma_product();
    let c0_prime = match log_gamma(c) {
        Ok((lg_c, sg_c)) => (sg_c as f64) * lg_c.exp() * ab.recip_gamma_product(),
        // Gamma(c) pole with a terminating first series: the ratio
        // G(c)/(G(a)G(b)) is finite; here it only occurs together with
        // a zero of 1/G(a)G(b) at t = 0 where gamma0 = 0 and b = 0,
        // making the second branch absent.
        Err(HyperError::PoleError(_)) if ab.terminates_at().is_some() => 0.0,
        Err(e) => return Err(e),
    };
    let near_tk = in_t_kappa(kappa, t, 1e-6);
    Ok(HypergeometricSolution {
        params: xs,
        kappa,
        t,
        ab,
        c,
        ab_prime,
        c_prime,
        s,
        c0,
        c0_prime,
        near_tk,
    })
}

impl HypergeometricSolution {
    /// g0(u), u in [0, 4].
    pub fn eval(&self, u: f64) -> Result<f64, HyperError> {
        self.eval_all(u).map(|(g, _, _)| g)
    }

    /// (g0, g0', g0'') at u in [0, 4); derivatives are NaN at u = 4.
    pub fn eval_all(&self, u: f64) -> Result<(f64, f64, f64), HyperError> {
        if !(0.0..=4.0).contains(&u) {
            return Err(HyperError::DomainError(format!(
                "g0 argument u = {u} outside [0, 4]"
            )));
        }
        let x = u / 4.0;
        let (f1, f1x, f1xx) = eval_2f1(self.ab, self.c, x)?;
        if u == 0.0 {
            // second branch: x^s with s > 0 vanishes; derivative singular
            // when s < 1 (reported as the leading behaviour elsewhere)
            return Ok((self.c0 * f1, f64::NAN, f64::NAN));
        }
        let (f2, f2x, f2xx) = eval_2f1(self.ab_prime, self.c_prime, x)?;
        let s = self.s;
        let xs = x.powf(s);
        let g = self.c0 * f1 - self.c0_prime * xs * f2;
        // d/du = (1/4) d/dx
        let h1 = s * x.powf(s - 1.0) * f2 + xs * f2x;
        let gp = 0.25 * (self.c0 * f1x - self.c0_prime * h1);
        let h2 =
            s * (s - 1.0) * x.powf(s - 2.0) * f2 + 2.0 * s * x.powf(s - 1.0) * f2x + xs * f2xx;
        let gpp = 0.0625 * (self.c0 * f1xx - self.c0_prime * h2);
        Ok((g, gp, gpp))
    }

    /// u * g0'(u) / g0(u), the logarithmic derivative entering the action.
    pub fn u_dlog(&self, u: f64) -> Result<f64, HyperError> {
        let (g, gp, _) = self.eval_all(u)?;
        Ok(u * gp / g)
    }
}

/// Residuals of the two ODEs satisfied by g0 and g = u^gamma0 g0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeResidual {
    /// Relative residual of the hypergeometric-form equation for g0.
    pub hypergeom: f64,
    /// Relative residual of the boundary equation for g = u^gamma0 g0
    /// with beta = beta0.
    pub boundary: f64,
}

/// Evaluate both ODE residuals at u in (0, 4), using analytic term-wise
/// derivatives of the series (no finite differences). Residuals are
/// normalized by the largest participating term.
pub fn ode_residual(sol: &HypergeometricSolution, u: f64) -> Result<OdeResidual, HyperError> {
    if !(u > 0.0 && u < 4.0) {
        return Err(HyperError::DomainError(format!(
            "ode_residual requires u in (0, 4), got {u}"
        )));
    }
    let kappa = sol.kappa;
    let p = Parameters::new(kappa, sol.t).expect("validated at construction");
    let gamma0 = sol.params.gamma0().expect("g0 exists only when real");
    let beta0 = sol.params.beta0().expect("beta0 real when gamma0 is");
    let a_g = crate::exponents::a_of_gamma(&p, gamma0);
    let (g, gp, gpp) = sol.eval_all(u)?;

    // hypergeometric form
    let t1 = a_g * g;
    let t2 = (kappa / 2.0 * (2.0 - u) + (kappa * gamma0 - 1.0) * (4.0 - u)) * gp;
    let t3 = kappa / 2.0 * (4.0 - u) * u * gpp;
    let scale = t1.abs().max(t2.abs()).max(t3.abs()).max(f64::MIN_POSITIVE);
    let hypergeom = (t1 + t2 + t3) / scale;

    // boundary equation for the full g(u) = u^gamma0 g0(u)
    let ug = u.powf(gamma0);
    let gg = ug * g;
    let ggp = ug * (gamma0 / u * g + gp);
    let ggpp = ug * (gamma0 * (gamma0 - 1.0) / (u * u) * g + 2.0 * gamma0 / u * gp + gpp);
    let b1 = (sol.t * (2.0 - u) - 2.0 * beta0) * gg;
    let b2 = (kappa / 2.0 * (2.0 - u) - (4.0 - u)) * u * ggp;
    let b3 = kappa / 2.0 * (4.0 - u) * u * u * ggpp;
    let bscale = b1.abs().max(b2.abs()).max(b3.abs()).max(f64::MIN_POSITIVE);
    let boundary = (b1 + b2 + b3) / bscale;

    Ok(OdeResidual {
        hypergeom,
        boundary,
    })
}

/// Sign-change census of g0 over (0, 4).
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroReport {
    pub count: usize,
    pub locations: Vec<f64>,
    pub refinement_width: f64,
}

const ZERO_GRID: usize = 10_000;
const ZERO_WIDTH: f64 = 1e-9;

/// Count the simple zeros of g0 on (0, 4) by sign scan on a 10^4-point
/// grid with bisection refinement. Requires t < t1 and t outside T_kappa.
pub fn count_zeros(sol: &HypergeometricSolution) -> Result<ZeroReport, HyperError> {
    let tr = transitions(sol.kappa);
    if sol.t >= tr.t1 {
        return Err(HyperError::DomainError(format!(
            "count_zeros requires t < t1 = {}, got t = {}",
            tr.t1, sol.t
        )));
    }
    if in_t_kappa(sol.kappa, sol.t, 1e-9) {
        return Err(HyperError::DomainError(format!(
            "count_zeros requires t outside T_kappa, got t = {}",
            sol.t
        )));
    }
    let h = 4.0 / (ZERO_GRID as f64 + 1.0);
    let mut locations = Vec::new();
    let mut prev_u = h;
    let mut prev = sol.eval(prev_u)?;
    for i in 2..=ZERO_GRID {
        let u = h * i as f64;
        let v = sol.eval(u)?;
        if prev == 0.0 {
            locations.push(prev_u);
        } else if prev.signum() != v.signum() && v != 0.0 {
            // one refinement pass: make sure the cell holds a single change
            let mut changes = 0usize;
            let mut last = prev;
            for k in 1..=16 {
                let um = prev_u + (u - prev_u) * (k as f64) / 16.0;
                let vm = sol.eval(um)?;
                if last.signum() != vm.signum() && vm != 0.0 {
                    changes += 1;
                }
                last = vm;
            }
            if changes > 1 {
                return Err(HyperError::GridTooCoarse(0.5 * (prev_u + u)));
            }
            let (mut lo, mut hi) = (prev_u, u);
            let (mut flo, _) = (prev, v);
            while hi - lo > ZERO_WIDTH {
                let mid = 0.5 * (lo + hi);
                let fm = sol.eval(mid)?;
                if flo.signum() != fm.signum() && fm != 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            locations.push(0.5 * (lo + hi));
        }
        prev = v;
        prev_u = u;
    }
    Ok(ZeroReport {
        count: locations.len(),
        locations,
        refinement_width: ZERO_WIDTH,
    })
}
