//! The stationary operator on the exterior disk, evaluated two ways:
//! numerically via 4th-order finite differences in (r, theta), and
//! analytically via the closed-form action on trial functions
//! psi = (z zbar - 1)^(-beta) u^gamma g(u), optionally carrying a
//! logarithmic factor ell_delta = (-log(z zbar - 1))^delta.
//!
//! On top of the pointwise evaluations sit the two verification scans:
//! positivity of sigma psi0 + psi1 near the unit circle, and constancy of
//! the sign of Lambda(psi ell_delta) opposite to sign(delta).

use crate::exponents::{
    a_of_gamma, beta_of_gamma, sigma, transitions, ExponentError, Parameters,
};
use crate::hyper::{build_g0, HyperError, HypergeometricSolution};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("finite-difference stencil does not fit the grid at index ({0}, {1})")]
    StencilOutOfGrid(usize, usize),
    #[error("no annulus radius with constant sign (innermost ladder radius already mixed)")]
    NoValidAnnulus,
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

/// u = |1 - z|^2 in polar coordinates.
pub fn u_of(r: f64, theta: f64) -> f64 {
    r * r - 2.0 * r * theta.cos() + 1.0
}

/// Which trial function the operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialKind {
    /// psi0 = (z zbar - 1)^(-beta0) u^gamma0 g0(u).
    BeliaevSmirnov,
    /// psi1 = (z zbar - 1)^(-beta1) u^gamma1.
    PurePower,
    /// sigma psi0 + psi1.
    Mixed,
}

/// A trial function together with its optional logarithmic exponent.
#[derive(Debug, Clone)]
pub struct TrialFunction {
    pub kind: TrialKind,
    pub kappa: f64,
    pub t: f64,
    /// (beta0, gamma0) when the kind uses psi0.
    bs: Option<(f64, f64)>,
    /// (beta1, gamma1) when the kind uses psi1.
    power: Option<(f64, f64)>,
    pub g0: Option<HypergeometricSolution>,
    /// Logarithmic exponent; 0 means no ell_delta factor.
    pub delta: f64,
    /// Sign in front of psi0 for the Mixed kind.
    pub sigma: i8,
}

impl TrialFunction {
    pub fn beliaev_smirnov(p: &Parameters) -> Result<Self, PdeError> {
        let sol = build_g0(p)?;
        let beta0 = sol.params.beta0()?;
        let gamma0 = sol.params.gamma0()?;
        Ok(Self {
            kind: TrialKind::BeliaevSmirnov,
            kappa: p.kappa(),
            t: p.t(),
            bs: Some((beta0, gamma0)),
            power: None,
            g0: Some(sol),
            delta: 0.0,
            sigma: 1,
        })
    }

    pub fn pure_power(p: &Parameters) -> Result<Self, PdeError> {
        let xs = crate::exponents::exponent_set(p);
        let beta1 = xs.beta1()?;
        let gamma1 = xs.gamma1()?;
        Ok(Self {
            kind: TrialKind::PurePower,
            kappa: p.kappa(),
            t: p.t(),
            bs: None,
            power: Some((beta1, gamma1)),
            g0: None,
            delta: 0.0,
            sigma: 1,
        })
    }

    pub fn mixed(p: &Parameters) -> Result<Self, PdeError> {
        let sol = build_g0(p)?;
        let beta0 = sol.params.beta0()?;
        let gamma0 = sol.params.gamma0()?;
        let beta1 = sol.params.beta1()?;
        let gamma1 = sol.params.gamma1()?;
        Ok(Self {
            kind: TrialKind::Mixed,
            kappa: p.kappa(),
            t: p.t(),
            bs: Some((beta0, gamma0)),
            power: Some((beta1, gamma1)),
            g0: Some(sol),
            delta: 0.0,
            sigma: sigma(p.kappa(), p.t()),
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// psi0 at (r, theta); requires the BS component.
    pub fn psi0(&self, r: f64, theta: f64) -> Result<f64, PdeError> {
        let (beta0, gamma0) = self
            .bs
            .ok_or_else(|| PdeError::DomainError("trial function has no psi0 component".into()))?;
        let u = u_of(r, theta);
        let w = r * r - 1.0;
        let g = self.g0.as_ref().expect("bs implies g0").eval(u)?;
        Ok(w.powf(-beta0) * u.powf(gamma0) * g)
    }

    /// psi1 at (r, theta); requires the power component.
    pub fn psi1(&self, r: f64, theta: f64) -> Result<f64, PdeError> {
        let (beta1, gamma1) = self.power.ok_or_else(|| {
            PdeError::DomainError("trial function has no psi1 component".into())
        })?;
        let u = u_of(r, theta);
        let w = r * r - 1.0;
        Ok(w.powf(-beta1) * u.powf(gamma1))
    }

    /// The bare trial function psi (no logarithmic factor).
    pub fn psi(&self, r: f64, theta: f64) -> Result<f64, PdeError> {
        match self.kind {
            TrialKind::BeliaevSmirnov => self.psi0(r, theta),
            TrialKind::PurePower => self.psi1(r, theta),
            TrialKind::Mixed => {
                Ok(self.sigma as f64 * self.psi0(r, theta)? + self.psi1(r, theta)?)
            }
        }
    }

    /// ell_delta = (-log(z zbar - 1))^delta; requires |z|^2 - 1 in (0, 1).
    pub fn ell(&self, r: f64) -> f64 {
        if self.delta == 0.0 {
            1.0
        } else {
            (-(r * r - 1.0).ln()).powf(self.delta)
        }
    }

    /// psi * ell_delta.
    pub fn eval(&self, r: f64, theta: f64) -> Result<f64, PdeError> {
        Ok(self.psi(r, theta)? * self.ell(r))
    }
}

fn check_point(r: f64, u: f64) -> Result<(), PdeError> {
    if r <= 1.0 {
        return Err(PdeError::DomainError(format!(
            "point must lie in the exterior disk, |z| = {r}"
        )));
    }
    if !(u > 0.0 && u <= 4.0) {
        return Err(PdeError::DomainError(format!(
            "u = {u} outside (0, 4]"
        )));
    }
    Ok(())
}

/// Closed-form Lambda psi / psi for g = u^gamma g0(u) and beta = beta(gamma).
///
/// `u_dlog` is u g0'(u)/g0(u); pass 0 for a constant g0. The 1/(4-u)
/// singularity is carried by the single factor (kappa L - A(gamma))/(4-u),
/// which cancels to O(4-u) thanks to the regularity of g0 at u = 4.
fn action_general(
    p: &Parameters,
    gamma: f64,
    u: f64,
    w: f64,
    u_dlog: f64,
) -> f64 {
    let kappa = p.kappa();
    let t = p.t();
    let beta = beta_of_gamma(p, gamma);
    let a_g = a_of_gamma(p, gamma);
    let l = if u > 0.0 { u_dlog / u } else { 0.0 }; // g0'/g0
    let d = (kappa * l - a_g) / (4.0 - u);
    let first = w * ((t + gamma - beta) / u - (kappa / 2.0 - 1.0) * l) + 2.0 * w * d;
    let second = (w * w) / (u * u)
        * (kappa * u_dlog / u - 4.0 * d + (1.0 + kappa / 2.0) * (gamma + u_dlog));
    first + second
}

/// The logarithmic correction to the action: -2 delta z zbar / (u (-log w)).
fn log_term(delta: f64, u: f64, w: f64) -> f64 {
    -2.0 * delta * (w + 1.0) / (u * (-w.ln()))
}

/// Analytic action of the operator on a trial function at z in the
/// exterior disk.
///
/// For the BeliaevSmirnov and PurePower kinds this returns
/// Lambda(psi ell_delta) / (psi ell_delta); for the Mixed kind it returns
/// Lambda(psi ell_delta) / ell_delta (the trial function changes sign, so
/// the unnormalized value is the meaningful one).
pub fn action_analytic(tf: &TrialFunction, z: Complex64) -> Result<f64, PdeError> {
    let r = z.norm();
    let u = (1.0 - z).norm_sqr();
    action_analytic_polar(tf, r, u)
}

/// Same as [`action_analytic`] with the point given as (|z|, u).
pub fn action_analytic_polar(tf: &TrialFunction, r: f64, u: f64) -> Result<f64, PdeError> {
    check_point(r, u)?;
    let w = r * r - 1.0;
    let p = Parameters::new(tf.kappa, tf.t)?;
    let lg = if tf.delta != 0.0 {
        log_term(tf.delta, u, w)
    } else {
        0.0
    };
    match tf.kind {
        TrialKind::BeliaevSmirnov => {
            let (_, gamma0) = tf.bs.expect("bs kind has bs exponents");
            let udl = tf.g0.as_ref().expect("bs kind has g0").u_dlog(u)?;
            Ok(action_general(&p, gamma0, u, w, udl) + lg)
        }
        TrialKind::PurePower => {
            let (_, gamma1) = tf.power.expect("power kind has power exponents");
            Ok(action_general(&p, gamma1, u, w, 0.0) + lg)
        }
        TrialKind::Mixed => {
            let (_, gamma0) = tf.bs.expect("mixed kind has bs exponents");
            let (_, gamma1) = tf.power.expect("mixed kind has power exponents");
            let udl = tf.g0.as_ref().expect("mixed kind has g0").u_dlog(u)?;
            let act0 = action_general(&p, gamma0, u, w, udl);
            let act1 = action_general(&p, gamma1, u, w, 0.0);
            // theta only enters through u; recover psi0, psi1 from (r, u)
            let theta = theta_of(r, u);
            let s0 = tf.sigma as f64 * tf.psi0(r, theta)?;
            let s1 = tf.psi1(r, theta)?;
            Ok(s0 * act0 + s1 * act1 + (s0 + s1) * lg)
        }
    }
}

fn theta_of(r: f64, u: f64) -> f64 {
    let c = (r * r + 1.0 - u) / (2.0 * r);
    c.clamp(-1.0, 1.0).acos()
}

/// The coefficient of (z zbar - 1)^2 / u^2 in the psi0 action; decays like
/// u^alpha as u -> 0 because C(gamma0) = 0.
pub fn bulk_quadratic_coefficient(
    p: &Parameters,
    sol: &HypergeometricSolution,
    u: f64,
) -> Result<f64, PdeError> {
    let gamma0 = sol.params.gamma0()?;
    let kappa = p.kappa();
    let udl = sol.u_dlog(u)?;
    let a_g = a_of_gamma(p, gamma0);
    let d = (kappa * udl / u - a_g) / (4.0 - u);
    Ok(kappa * udl / u - 4.0 * d + (1.0 + kappa / 2.0) * (gamma0 + udl))
}

/// Numeric application of the stationary operator to an arbitrary grid
/// function, with 4th-order central differences of local steps
/// (h_r, h_theta).
pub fn lambda_numeric<F: Fn(f64, f64) -> f64>(
    p: &Parameters,
    f: F,
    r: f64,
    theta: f64,
    h_r: f64,
    h_theta: f64,
) -> f64 {
    let kappa = p.kappa();
    let t = p.t();
    let u = u_of(r, theta);
    let n = r.powi(4) + 4.0 * r * r * (1.0 - r * theta.cos()) - 1.0;
    let coef0 = t * (n / (u * u) - 1.0);
    let coef_r = r * (r * r - 1.0) / u;
    let coef_th = -2.0 * r * theta.sin() / u;

    let fr = (-f(r + 2.0 * h_r, theta) + 8.0 * f(r + h_r, theta) - 8.0 * f(r - h_r, theta)
        + f(r - 2.0 * h_r, theta))
        / (12.0 * h_r);
    let fth = (-f(r, theta + 2.0 * h_theta) + 8.0 * f(r, theta + h_theta)
        - 8.0 * f(r, theta - h_theta)
        + f(r, theta - 2.0 * h_theta))
        / (12.0 * h_theta);
    let fthth = (-f(r, theta + 2.0 * h_theta) + 16.0 * f(r, theta + h_theta)
        - 30.0 * f(r, theta)
        + 16.0 * f(r, theta - h_theta)
        - f(r, theta - 2.0 * h_theta))
        / (12.0 * h_theta * h_theta);

    coef0 * f(r, theta) + coef_r * fr + coef_th * fth + kappa / 2.0 * fthth
}

/// A function tabulated on a uniform (r, theta) mesh, for stencil
/// application with grid-bound checking.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub r0: f64,
    pub h_r: f64,
    pub n_r: usize,
    pub theta0: f64,
    pub h_theta: f64,
    pub n_theta: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn tabulate<F: Fn(f64, f64) -> f64>(
        r0: f64,
        h_r: f64,
        n_r: usize,
        theta0: f64,
        h_theta: f64,
        n_theta: usize,
        f: F,
    ) -> Self {
        let mut values = Vec::with_capacity(n_r * n_theta);
        for i in 0..n_r {
            for j in 0..n_theta {
                values.push(f(r0 + h_r * i as f64, theta0 + h_theta * j as f64));
            }
        }
        Self {
            r0,
            h_r,
            n_r,
            theta0,
            h_theta,
            n_theta,
            values,
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_theta + j]
    }

    /// Apply the operator at grid index (i, j); the 5-point stencil must
    /// fit inside the tabulated mesh.
    pub fn lambda_at(&self, p: &Parameters, i: usize, j: usize) -> Result<f64, PdeError> {
        if i < 2 || j < 2 || i + 2 >= self.n_r || j + 2 >= self.n_theta {
            return Err(PdeError::StencilOutOfGrid(i, j));
        }
        let r = self.r0 + self.h_r * i as f64;
        let theta = self.theta0 + self.h_theta * j as f64;
        let kappa = p.kappa();
        let t = p.t();
        let u = u_of(r, theta);
        let n = r.powi(4) + 4.0 * r * r * (1.0 - r * theta.cos()) - 1.0;
        let coef0 = t * (n / (u * u) - 1.0);
        let coef_r = r * (r * r - 1.0) / u;
        let coef_th = -2.0 * r * theta.sin() / u;
        let fr = (-self.at(i + 2, j) + 8.0 * self.at(i + 1, j) - 8.0 * self.at(i - 1, j)
            + self.at(i - 2, j))
            / (12.0 * self.h_r);
        let fth = (-self.at(i, j + 2) + 8.0 * self.at(i, j + 1) - 8.0 * self.at(i, j - 1)
            + self.at(i, j - 2))
            / (12.0 * self.h_theta);
        let fthth = (-self.at(i, j + 2) + 16.0 * self.at(i, j + 1) - 30.0 * self.at(i, j)
            + 16.0 * self.at(i, j - 1)
            - self.at(i, j - 2))
            / (12.0 * self.h_theta * self.h_theta);
        Ok(coef0 * self.at(i, j) + coef_r * fr + coef_th * fth + kappa / 2.0 * fthth)
    }
}

/// Scan grid: geometric ladder in r - 1, uniform theta on (0, pi].
#[derive(Debug, Clone)]
pub struct AnnulusGrid {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    /// Local radial step for finite differences, as a fraction of r - 1.
    pub h_r_fraction: f64,
    pub h_theta: f64,
}

impl Default for AnnulusGrid {
    fn default() -> Self {
        // r - 1 in {2^-4, ..., 2^-14}; 2^9 theta points on (0, pi]
        let r = (4..=14).map(|k| 1.0 + 2.0_f64.powi(-k)).collect();
        let n = 512;
        let theta = (1..=n)
            .map(|j| std::f64::consts::PI * j as f64 / n as f64)
            .collect();
        Self {
            r,
            theta,
            h_r_fraction: 1.0 / 64.0,
            h_theta: 2.0 * std::f64::consts::PI / 8192.0,
        }
    }
}

impl AnnulusGrid {
    /// Smaller grid for quick scans and tests.
    pub fn coarse() -> Self {
        let r = (4..=10).map(|k| 1.0 + 2.0_f64.powi(-k)).collect();
        let n = 128;
        let theta = (1..=n)
            .map(|j| std::f64::consts::PI * j as f64 / n as f64)
            .collect();
        Self {
            r,
            theta,
            h_r_fraction: 1.0 / 64.0,
            h_theta: 2.0 * std::f64::consts::PI / 8192.0,
        }
    }
}

/// Outcome of the positivity scan for psi = sigma psi0 + psi1.
#[derive(Debug, Clone)]
pub struct PositivityReport {
    pub ok: bool,
    /// Largest ladder radius below which psi > 0 at every sampled point.
    pub r0: f64,
    pub violations: Vec<(f64, f64)>,
}

/// Evaluate psi = sigma psi0 + psi1 on the grid and report the largest
/// inner annulus on which it is positive everywhere sampled. Grid points
/// with u > 4 (outside the boundary-solution domain) are skipped.
pub fn positivity_scan(p: &Parameters, grid: &AnnulusGrid) -> Result<PositivityReport, PdeError> {
    let tf = TrialFunction::mixed(p)?;
    let mut violations = Vec::new();
    let mut radius_ok = vec![true; grid.r.len()];
    for (i, &r) in grid.r.iter().enumerate() {
        for &theta in &grid.theta {
            let u = u_of(r, theta);
            if u > 4.0 {
                continue;
            }
            let v = tf.psi(r, theta)?;
            if !(v > 0.0) {
                radius_ok[i] = false;
                violations.push((r, theta));
            }
        }
    }
    // ladder radii are decreasing in r - 1 order? keep them as given
    // (decreasing r): r0 = largest radius such that it and all smaller
    // ladder radii are clean.
    let mut sorted: Vec<usize> = (0..grid.r.len()).collect();
    sorted.sort_by(|&a, &b| grid.r[a].partial_cmp(&grid.r[b]).unwrap());
    let mut r0 = f64::NAN;
    for &idx in &sorted {
        if radius_ok[idx] {
            r0 = grid.r[idx];
        } else {
            break;
        }
    }
    Ok(PositivityReport {
        ok: !r0.is_nan(),
        r0,
        violations,
    })
}

/// Four-term decomposition of Lambda(psi ell_delta)/ell_delta at a point.
#[derive(Debug, Clone, Copy)]
pub struct TermProfile {
    pub r: f64,
    pub theta: f64,
    /// I = sigma psi0 * log-term
    pub term_i: f64,
    /// II = psi1 * (w/u) (2t + (1 + kappa/2) gamma1)
    pub term_ii: f64,
    /// III = psi1 * (w/u)^2 (1 + kappa/2) gamma1
    pub term_iii: f64,
    /// IV = psi1 * log-term
    pub term_iv: f64,
}

/// Evaluate the four-term decomposition of the mixed trial's action at a
/// point. Terms I and IV flip sign with delta; II and III do not.
pub fn term_profile(tf: &TrialFunction, r: f64, theta: f64) -> Result<TermProfile, PdeError> {
    if tf.kind != TrialKind::Mixed {
        return Err(PdeError::DomainError(
            "term decomposition is defined for the mixed trial function".into(),
        ));
    }
    let u = u_of(r, theta);
    check_point(r, u)?;
    let gamma1 = tf.power.expect("mixed").1;
    let (kappa, t) = (tf.kappa, tf.t);
    let w = r * r - 1.0;
    let lg = log_term(tf.delta, u, w);
    let s0 = tf.sigma as f64 * tf.psi0(r, theta)?;
    let p1 = tf.psi1(r, theta)?;
    Ok(TermProfile {
        r,
        theta,
        term_i: s0 * lg,
        term_ii: p1 * w / u * (2.0 * t + (1.0 + kappa / 2.0) * gamma1),
        term_iii: p1 * (w / u).powi(2) * (1.0 + kappa / 2.0) * gamma1,
        term_iv: p1 * lg,
    })
}

#[derive(Debug, Clone)]
pub struct SignScanReport {
    pub delta: f64,
    /// Largest inner annulus radius with constant sign everywhere sampled.
    pub r0_empirical: f64,
    pub violations: Vec<(f64, f64)>,
    /// Term magnitudes at the point where the logarithmic terms dominate
    /// least (the worst ratio of non-log to log terms).
    pub term_profile: Option<TermProfile>,
    /// Points skipped because u > 4.
    pub skipped: usize,
}

/// Sign scan of Lambda(psi ell_delta) for the mixed trial function
/// (t < t1), or of the log-domination inequality for the Beliaev-Smirnov
/// one (t1 < t < t3). The sign must be opposite to sign(delta) on the
/// reported annulus.
pub fn sign_scan(
    p: &Parameters,
    delta: f64,
    grid: &AnnulusGrid,
) -> Result<SignScanReport, PdeError> {
    if delta == 0.0 {
        return Err(PdeError::DomainError("sign scan requires delta != 0".into()));
    }
    let tr = transitions(p.kappa());
    if p.t() < tr.t1 {
        mixed_sign_scan(p, delta, grid)
    } else if p.t() < tr.t3 {
        log_domination_scan(p, delta, grid)
    } else {
        Err(PdeError::DomainError(format!(
            "sign scan requires t < t3 = {}",
            tr.t3
        )))
    }
}

fn scan_common(
    grid: &AnnulusGrid,
    mut point_ok: impl FnMut(f64, f64, f64) -> Result<Option<bool>, PdeError>,
) -> Result<(f64, Vec<(f64, f64)>, usize), PdeError> {
    let mut violations = Vec::new();
    let mut radius_ok = vec![true; grid.r.len()];
    let mut skipped = 0usize;
    for (i, &r) in grid.r.iter().enumerate() {
        for &theta in &grid.theta {
            let u = u_of(r, theta);
            match point_ok(r, theta, u)? {
                None => skipped += 1,
                Some(true) => {}
                Some(false) => {
                    radius_ok[i] = false;
                    violations.push((r, theta));
                }
            }
        }
    }
    let mut sorted: Vec<usize> = (0..grid.r.len()).collect();
    sorted.sort_by(|&a, &b| grid.r[a].partial_cmp(&grid.r[b]).unwrap());
    let mut r0 = f64::NAN;
    for &idx in &sorted {
        if radius_ok[idx] {
            r0 = grid.r[idx];
        } else {
            break;
        }
    }
    if r0.is_nan() {
        return Err(PdeError::NoValidAnnulus);
    }
    Ok((r0, violations, skipped))
}

fn mixed_sign_scan(
    p: &Parameters,
    delta: f64,
    grid: &AnnulusGrid,
) -> Result<SignScanReport, PdeError> {
    let tf = TrialFunction::mixed(p)?.with_delta(delta);
    let target = -delta.signum();

    let mut worst_ratio = -1.0_f64;
    let mut profile = None;
    let (r0, violations, skipped) = scan_common(grid, |r, theta, u| {
        if u > 4.0 {
            return Ok(None);
        }
        let v = action_analytic_polar(&tf, r, u)?;
        let ok = v.signum() == target;
        let tp = term_profile(&tf, r, theta)?;
        let logs = tp.term_i.abs() + tp.term_iv.abs();
        let ratio = (tp.term_ii.abs() + tp.term_iii.abs()) / logs.max(f64::MIN_POSITIVE);
        if ratio > worst_ratio {
            worst_ratio = ratio;
            profile = Some(tp);
        }
        Ok(Some(ok))
    })?;
    Ok(SignScanReport {
        delta,
        r0_empirical: r0,
        violations,
        term_profile: profile,
        skipped,
    })
}

/// For t in (t1, t3): check |Lambda psi0 / psi0| <= 2 |delta| z zbar /
/// (u (-log(z zbar - 1))) so that the log term of psi0 ell_delta fixes
/// the sign.
fn log_domination_scan(
    p: &Parameters,
    delta: f64,
    grid: &AnnulusGrid,
) -> Result<SignScanReport, PdeError> {
    let tf = TrialFunction::beliaev_smirnov(p)?;
    let (r0, violations, skipped) = scan_common(grid, |r, _theta, u| {
        if u > 4.0 {
            return Ok(None);
        }
        let w = r * r - 1.0;
        let act = action_analytic_polar(&tf, r, u)?;
        let bound = 2.0 * delta.abs() * (w + 1.0) / (u * (-w.ln()));
        Ok(Some(act.abs() <= bound))
    })?;
    Ok(SignScanReport {
        delta,
        r0_empirical: r0,
        violations,
        term_profile: None,
        skipped,
    })
}

/// Sampled check of the Case-3 domination: at points with
/// r - 1 > u^(1/2 + eps), the ratio psi1 / (sigma psi0) must scale at
/// least like u^(1/2) as u -> 0.
#[derive(Debug, Clone)]
pub struct Case3Report {
    pub eps: f64,
    /// Fitted log-log slope of psi1/(sigma psi0) against u.
    pub slope: f64,
    /// Max of psi1 / (sigma psi0 u^(1/2)) over the sampled points.
    pub max_ratio: f64,
    pub n_points: usize,
}

pub fn case3_scan(p: &Parameters, eps: f64) -> Result<Case3Report, PdeError> {
    let tf = TrialFunction::mixed(p)?;
    let (beta0, gamma0) = tf.bs.expect("mixed");
    let (beta1, gamma1) = tf.power.expect("mixed");
    let sol = tf.g0.as_ref().expect("mixed");
    let sg = tf.sigma as f64;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut max_ratio = 0.0_f64;
    // log-spaced u down to small values; for each u pick r - 1 slightly above
    // u^(1/2+eps) (admissible: r - 1 <= u^(1/2) always holds there).
    for k in 0..60 {
        let u = 10.0_f64.powf(-0.5 - 5.0 * k as f64 / 59.0); // u in [1e-5.5, 1e-0.5]
        let rm1 = 1.5 * u.powf(0.5 + eps);
        if rm1 >= u.sqrt() {
            continue; // outside the geometric constraint
        }
        let r = 1.0 + rm1;
        let w = r * r - 1.0;
        let g = sol.eval(u)?;
        if sg * g <= 0.0 {
            continue; // outside the u0 neighbourhood where sigma g0 > 0
        }
        // log of psi1/(sigma psi0)
        let log_ratio = -beta1 * w.ln() + gamma1 * u.ln()
            - (-beta0 * w.ln() + gamma0 * u.ln() + (sg * g).ln());
        xs.push(u.ln());
        ys.push(log_ratio);
        max_ratio = max_ratio.max((log_ratio - 0.5 * u.ln()).exp());
    }
    let n = xs.len();
    if n < 8 {
        return Err(PdeError::DomainError(
            "too few admissible Case-3 sample points".into(),
        ));
    }
    let xm = xs.iter().sum::<f64>() / n as f64;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    Ok(Case3Report {
        eps,
        slope: sxy / sxx,
        max_ratio,
        n_points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(kappa: f64, t: f64) -> Parameters {
        Parameters::new(kappa, t).unwrap()
    }

    #[test]
    fn lambda_numeric_kills_constants_at_t0() {
        let pr = p(4.0, 0.0);
        for &(r, th) in &[(1.1, 0.5), (1.02, 2.0), (1.3, 3.0)] {
            let v = lambda_numeric(&pr, |_, _| 2.5, r, th, 1e-3, 1e-3);
            assert!(v.abs() < 1e-9, "Lambda(const) = {v}");
        }
    }

    #[test]
    fn action_tilde_coefficients() {
        // Lambda psi1/psi1 = w/u (2t + (1+k/2) g1) + w^2/u^2 (1+k/2) g1
        let pr = p(6.0, -5.0);
        let tf = TrialFunction::pure_power(&pr).unwrap();
        let gamma1 = tf.power.unwrap().1;
        for &(r, th) in &[(1.05, 1.0), (1.01, 2.5), (1.2, 0.3)] {
            let u = u_of(r, th);
            if u > 4.0 {
                continue;
            }
            let w = r * r - 1.0;
            let expect = w / u * (2.0 * pr.t() + (1.0 + pr.kappa() / 2.0) * gamma1)
                + (w / u).powi(2) * (1.0 + pr.kappa() / 2.0) * gamma1;
            let v = action_analytic_polar(&tf, r, u).unwrap();
            assert!(
                (v - expect).abs() < 1e-12 * expect.abs().max(1.0),
                "{v} vs {expect}"
            );
        }
    }

    #[test]
    fn numeric_matches_analytic_psi1() {
        let pr = p(6.0, -5.0);
        let tf = TrialFunction::pure_power(&pr).unwrap();
        let (r, th) = (1.05, 1.2);
        let f = |rr: f64, tt: f64| tf.psi(rr, tt).unwrap();
        let num = lambda_numeric(&pr, f, r, th, (r - 1.0) / 64.0, 2.0 * PI / 8192.0);
        let ana = action_analytic_polar(&tf, r, u_of(r, th)).unwrap() * tf.psi(r, th).unwrap();
        assert!(
            ((num - ana) / ana).abs() < 1e-6,
            "num = {num}, analytic = {ana}"
        );
    }

    #[test]
    fn numeric_matches_analytic_psi0() {
        let pr = p(4.0, -1.0);
        let tf = TrialFunction::beliaev_smirnov(&pr).unwrap();
        let (r, th) = (1.0625, 1.0);
        let f = |rr: f64, tt: f64| tf.psi(rr, tt).unwrap();
        let num = lambda_numeric(&pr, f, r, th, (r - 1.0) / 64.0, 2.0 * PI / 8192.0);
        let ana = action_analytic_polar(&tf, r, u_of(r, th)).unwrap() * tf.psi(r, th).unwrap();
        assert!(
            ((num - ana) / ana).abs() < 1e-5,
            "num = {num}, analytic = {ana}"
        );
    }

    #[test]
    fn action_finite_near_u4() {
        // the 1/(4-u) singularity cancels for the regular g0
        let pr = p(4.0, -1.0);
        let tf = TrialFunction::beliaev_smirnov(&pr).unwrap();
        let r = 1.001_f64;
        let u = 3.999;
        let v = action_analytic_polar(&tf, r, u).unwrap();
        assert!(v.is_finite());
        // comparable to the generic O(w) scale, not 1/(4-u)-blown-up
        let w = r * r - 1.0;
        assert!(v.abs() < 1e3 * w, "action at u ~ 4: {v}");
    }

    #[test]
    fn action_domain_errors() {
        let pr = p(4.0, -1.0);
        let tf = TrialFunction::beliaev_smirnov(&pr).unwrap();
        assert!(matches!(
            action_analytic_polar(&tf, 0.9, 1.0),
            Err(PdeError::DomainError(_))
        ));
        assert!(matches!(
            action_analytic_polar(&tf, 1.1, 4.5),
            Err(PdeError::DomainError(_))
        ));
    }

    #[test]
    fn positivity_above_t1() {
        // t in (t1, t3): both terms positive
        let rep = positivity_scan(&p(4.0, -1.0), &AnnulusGrid::coarse()).unwrap();
        assert!(rep.ok);
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn positivity_below_t1() {
        let rep = positivity_scan(&p(4.0, -7.0), &AnnulusGrid::coarse()).unwrap();
        assert!(rep.ok, "violations: {:?}", &rep.violations[..rep.violations.len().min(5)]);
    }

    #[test]
    fn positivity_kappa_half_second_interval() {
        // kappa = 0.5, t in (t0, t1) with sigma = -1
        let pr = p(0.5, -5.0);
        assert_eq!(sigma(0.5, -5.0), -1);
        let rep = positivity_scan(&pr, &AnnulusGrid::coarse()).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn sign_scan_opposite_to_delta() {
        let pr = p(4.0, -7.0);
        let grid = AnnulusGrid::coarse();
        let rep_plus = sign_scan(&pr, 0.5, &grid).unwrap();
        let rep_minus = sign_scan(&pr, -0.5, &grid).unwrap();
        assert!(rep_plus.r0_empirical > 1.0);
        assert!(rep_minus.r0_empirical > 1.0);
        assert!(rep_plus.term_profile.is_some());
    }

    #[test]
    fn sign_antisymmetry_in_delta() {
        // flipping delta flips the sign of Lambda(psi ell_delta) pointwise
        // wherever the scan accepts the point
        let pr = p(4.0, -7.0);
        let tf_p = TrialFunction::mixed(&pr).unwrap().with_delta(0.5);
        let tf_m = TrialFunction::mixed(&pr).unwrap().with_delta(-0.5);
        let grid = AnnulusGrid::coarse();
        for &r in &grid.r {
            for &theta in grid.theta.iter().step_by(17) {
                let u = u_of(r, theta);
                if u > 4.0 {
                    continue;
                }
                let vp = action_analytic_polar(&tf_p, r, u).unwrap();
                let vm = action_analytic_polar(&tf_m, r, u).unwrap();
                if vp.signum() == -1.0 && vm.signum() == 1.0 {
                    continue;
                }
                // points where the log term does not yet dominate may agree
                // in magnitude ordering but the delta-odd part must flip:
                let odd = 0.5 * (vp - vm);
                let w = r * r - 1.0;
                let lg = log_term(0.5, u, w);
                let s0 = tf_p.sigma as f64 * tf_p.psi0(r, theta).unwrap();
                let s1 = tf_p.psi1(r, theta).unwrap();
                let expect = (s0 + s1) * lg;
                assert!(
                    (odd - expect).abs() < 1e-9 * expect.abs().max(1e-30),
                    "delta-odd part mismatch at r={r} theta={theta}"
                );
            }
        }
    }

    #[test]
    fn log_domination_between_t1_t3() {
        let pr = p(4.0, -1.0);
        let rep = sign_scan(&pr, 0.5, &AnnulusGrid::coarse()).unwrap();
        assert!(rep.r0_empirical > 1.0);
    }

    #[test]
    fn case3_ratio_scales_like_sqrt_u() {
        let rep = case3_scan(&p(4.0, -7.0), 0.05).unwrap();
        assert!(rep.slope > 0.45, "slope {}", rep.slope);
    }

    #[test]
    fn grid_function_stencil_bounds() {
        let pr = p(4.0, 0.0);
        let gf = GridFunction::tabulate(1.05, 1e-3, 8, 0.5, 1e-3, 8, |_, _| 1.0);
        assert!(matches!(
            gf.lambda_at(&pr, 0, 4),
            Err(PdeError::StencilOutOfGrid(0, 4))
        ));
        assert!(gf.lambda_at(&pr, 3, 3).unwrap().abs() < 1e-9);
    }
}
