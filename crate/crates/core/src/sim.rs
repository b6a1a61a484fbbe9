//! Monte Carlo estimation of integral means through the backward radial
//! Loewner flow
//!
//!   df/dtau = f (f + xi) / (f - xi),   f_0(z) = z,   |z| > 1,
//!
//! driven by xi(tau) = exp(i sqrt(kappa) B(tau)). The log-derivative
//! log f'_tau(z) is integrated jointly via the exact z-derivative of the
//! vector field, and moments of |e^{-T} f'_T| feed the spectrum fit.

mod estimate;

pub use estimate::{
    estimate_moments, estimate_moments_multi, fit_from_estimates, fit_spectrum,
    fit_spectrum_multi, horizon, midpoint_angles, McConfig, MomentEstimate, SpectrumFit,
};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("flow came within 1e-9 of the driving point at tau = {0}")]
    SingularApproach(f64),
    #[error("flow state overflowed at tau = {0}")]
    NonFinite(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Past this modulus the remaining compensated log-derivative change is
/// below 1e-7 and the flow is continued in closed form.
const ESCAPE_RADIUS_SQ: f64 = 1e8;

const SINGULAR_DIST_SQ: f64 = 1e-18;

/// Mix a master seed and a path index into an independent stream seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut x = master ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// One sampled Brownian driving path on [0, T].
#[derive(Debug, Clone)]
pub struct DrivingPath {
    pub seed: u64,
    pub kappa: f64,
    pub horizon: f64,
    pub dtau: f64,
    /// B at the nodes k * dtau, B(0) = 0.
    pub b: Vec<f64>,
}

pub fn sample_driving(
    seed: u64,
    kappa: f64,
    horizon: f64,
    dtau: f64,
) -> Result<DrivingPath, SimError> {
    if !(horizon > 0.0) {
        return Err(SimError::InvalidConfig(format!("horizon {horizon} <= 0")));
    }
    if !(dtau > 0.0 && dtau <= 1e-2) {
        return Err(SimError::InvalidConfig(format!(
            "dtau {dtau} outside (0, 1e-2]"
        )));
    }
    let n = (horizon / dtau).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = dtau.sqrt();
    let mut b = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    b.push(0.0);
    for _ in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        acc += sd * g;
        b.push(acc);
    }
    Ok(DrivingPath {
        seed,
        kappa,
        horizon,
        dtau,
        b,
    })
}

impl DrivingPath {
    /// B(tau) with linear interpolation between nodes.
    pub fn b_at(&self, tau: f64) -> f64 {
        let s = (tau / self.dtau).clamp(0.0, (self.b.len() - 1) as f64);
        let k = (s.floor() as usize).min(self.b.len() - 2);
        let frac = s - k as f64;
        self.b[k] + frac * (self.b[k + 1] - self.b[k])
    }

    /// xi(tau) = exp(i sqrt(kappa) B(tau)).
    pub fn xi(&self, tau: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.kappa.sqrt() * self.b_at(tau))
    }
}

/// Maximum driving phase advance sqrt(kappa) |dB| per integration step
/// for the bulk estimator, where statistical error dominates. RK4's
/// truncation is O(phase^5) per step.
const PHASE_CAP: f64 = 0.1;

/// Tighter cap for the single-point flow API, where callers compare
/// against finite differences and need the log-derivative accurate to
/// ~1e-5 over a full flow.
const PHASE_CAP_FINE: f64 = 0.05;

/// Per-interval driving data shared across all starting points that use
/// the same path: xi at the nodes, the number of equal substeps needed to
/// respect the phase cap, and the rotation of xi per half-substep.
pub(crate) struct XiTable {
    xi_node: Vec<Complex64>,
    m: Vec<u32>,
    rot_half: Vec<Complex64>,
    phase_cap: f64,
}

impl XiTable {
    pub(crate) fn build(path: &DrivingPath, phase_cap: f64) -> Self {
        let n = path.b.len() - 1;
        let root = path.kappa.sqrt();
        let mut xi_node = Vec::with_capacity(n + 1);
        let mut m = Vec::with_capacity(n);
        let mut rot_half = Vec::with_capacity(n);
        for k in 0..=n {
            xi_node.push(Complex64::from_polar(1.0, root * path.b[k]));
        }
        for k in 0..n {
            let phase = root * (path.b[k + 1] - path.b[k]);
            let subs = (phase.abs() / phase_cap).ceil().max(1.0) as u32;
            m.push(subs);
            rot_half.push(Complex64::from_polar(1.0, phase / (2 * subs) as f64));
        }
        Self {
            xi_node,
            m,
            rot_half,
            phase_cap,
        }
    }
}

/// Flow position, accumulated log f', and the time reached.
#[derive(Debug, Clone, Copy)]
pub struct FlowState {
    pub f: Complex64,
    pub logd: Complex64,
    pub tau: f64,
}

#[inline]
fn vector_field(f: Complex64, xi: Complex64) -> (Complex64, Complex64) {
    let inv = (f - xi).inv();
    let df = f * (f + xi) * inv;
    let q = xi * inv;
    let dld = Complex64::new(1.0, 0.0) - 2.0 * q * q;
    (df, dld)
}

struct Integrator<'a> {
    path: &'a DrivingPath,
    table: &'a XiTable,
    c_step: f64,
    /// When false, the flow is integrated all the way to the horizon
    /// instead of switching to the far-field closed form.
    allow_escape: bool,
}

impl<'a> Integrator<'a> {
    fn run(
        &self,
        z: Complex64,
        mut observe: impl FnMut(&FlowState),
    ) -> Result<FlowState, SimError> {
        let dtau = self.path.dtau;
        let horizon = self.path.horizon;
        let n = self.path.b.len() - 1;
        let mut f = z;
        let mut logd = Complex64::new(0.0, 0.0);

        for k in 0..n {
            let t0 = k as f64 * dtau;
            let span = (horizon - t0).min(dtau);
            if span <= 0.0 {
                break;
            }
            let subs = self.table.m[k];
            let rot = self.table.rot_half[k];
            let h0 = span / subs as f64;
            let mut xi = self.table.xi_node[k];
            for sub in 0..subs {
                let gap = (f - xi).norm_sqr();
                if gap < SINGULAR_DIST_SQ {
                    return Err(SimError::SingularApproach(t0 + sub as f64 * h0));
                }
                let bound = self.c_step * gap / f.norm();
                let xih = xi * rot;
                let xi1 = xih * rot;
                if bound >= h0 && span == dtau {
                    step_rk4(&mut f, &mut logd, h0, xi, xih, xi1);
                } else {
                    // near the driving point (or a partial last interval):
                    // refine further with on-demand driving values
                    let s0 = t0 + sub as f64 * h0;
                    let phase_bound = if self.path.kappa > 0.0 {
                        let db = self.path.b[k + 1] - self.path.b[k];
                        if db == 0.0 {
                            f64::INFINITY
                        } else {
                            self.table.phase_cap * dtau / (self.path.kappa.sqrt() * db.abs())
                        }
                    } else {
                        f64::INFINITY
                    };
                    let mut s = 0.0;
                    while s < h0 - 1e-13 {
                        let tau = s0 + s;
                        let xi0 = self.path.xi(tau);
                        let gap = (f - xi0).norm_sqr();
                        if gap < SINGULAR_DIST_SQ {
                            return Err(SimError::SingularApproach(tau));
                        }
                        let h = (self.c_step * gap / f.norm())
                            .min(phase_bound)
                            .min(h0 - s);
                        let xih = self.path.xi(tau + 0.5 * h);
                        let xi1 = self.path.xi(tau + h);
                        step_rk4(&mut f, &mut logd, h, xi0, xih, xi1);
                        if !f.is_finite() || !logd.is_finite() {
                            return Err(SimError::NonFinite(tau + h));
                        }
                        s += h;
                    }
                }
                xi = xi1;
            }
            let tau = t0 + span;
            if !f.is_finite() || !logd.is_finite() {
                return Err(SimError::NonFinite(tau));
            }
            observe(&FlowState { f, logd, tau });
            if self.allow_escape && f.norm_sqr() > ESCAPE_RADIUS_SQ {
                // far field: df/dtau = f + O(1), dlogd/dtau = 1 + O(|f|^-2)
                let rest = horizon - tau;
                f *= rest.exp();
                logd += rest;
                break;
            }
        }
        Ok(FlowState {
            f,
            logd,
            tau: horizon,
        })
    }
}

fn step_rk4(
    f: &mut Complex64,
    logd: &mut Complex64,
    h: f64,
    xi0: Complex64,
    xih: Complex64,
    xi1: Complex64,
) {
    // the caller checks the start-of-step gap; a stage landing on the
    // driving point overflows and is caught by the NonFinite check
    let (k1f, k1d) = vector_field(*f, xi0);
    let (k2f, k2d) = vector_field(*f + 0.5 * h * k1f, xih);
    let (k3f, k3d) = vector_field(*f + 0.5 * h * k2f, xih);
    let (k4f, k4d) = vector_field(*f + h * k3f, xi1);
    *f += h / 6.0 * (k1f + 2.0 * (k2f + k3f) + k4f);
    *logd += h / 6.0 * (k1d + 2.0 * (k2d + k3d) + k4d);
}

/// Integrate the backward flow started at z to the path horizon.
pub fn reverse_flow(path: &DrivingPath, z: Complex64) -> Result<FlowState, SimError> {
    if z.norm_sqr() <= 1.0 {
        return Err(SimError::InvalidConfig(format!(
            "starting point {z} not in the exterior disk"
        )));
    }
    let table = XiTable::build(path, PHASE_CAP_FINE);
    Integrator {
        path,
        table: &table,
        c_step: 0.03,
        allow_escape: false,
    }
    .run(z, |_| {})
}

/// Estimator-internal variant: shares a driving table across angles and
/// may finish the far field in closed form (only Re logd is consumed
/// downstream; the shortcut error there is ~1/ESCAPE_RADIUS^2).
pub(crate) fn reverse_flow_with(
    path: &DrivingPath,
    table: &XiTable,
    z: Complex64,
    c_step: f64,
) -> Result<FlowState, SimError> {
    if z.norm_sqr() <= 1.0 {
        return Err(SimError::InvalidConfig(format!(
            "starting point {z} not in the exterior disk"
        )));
    }
    Integrator {
        path,
        table,
        c_step,
        allow_escape: true,
    }
    .run(z, |_| {})
}

/// Like [`reverse_flow`] but records (tau, Re log f' ) at every driving
/// node, with no far-field shortcut; used for decay diagnostics.
pub fn reverse_flow_trace(
    path: &DrivingPath,
    z: Complex64,
) -> Result<Vec<(f64, f64)>, SimError> {
    if z.norm_sqr() <= 1.0 {
        return Err(SimError::InvalidConfig(format!(
            "starting point {z} not in the exterior disk"
        )));
    }
    let table = XiTable::build(path, PHASE_CAP);
    let mut out = Vec::new();
    Integrator {
        path,
        table: &table,
        c_step: 0.1,
        allow_escape: false,
    }
    .run(z, |st| out.push((st.tau, st.logd.re)))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driving_is_reproducible() {
        let a = sample_driving(7, 4.0, 2.0, 0.01).unwrap();
        let b = sample_driving(7, 4.0, 2.0, 0.01).unwrap();
        assert_eq!(a.b, b.b);
        let c = sample_driving(8, 4.0, 2.0, 0.01).unwrap();
        assert_ne!(a.b, c.b);
    }

    #[test]
    fn zero_kappa_driving_is_constant() {
        let p = sample_driving(3, 0.0, 1.0, 0.01).unwrap();
        for k in 0..=10 {
            let xi = p.xi(0.1 * k as f64);
            assert!((xi - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn driving_preconditions() {
        assert!(matches!(
            sample_driving(0, 4.0, -1.0, 0.01),
            Err(SimError::InvalidConfig(_))
        ));
        assert!(matches!(
            sample_driving(0, 4.0, 1.0, 0.5),
            Err(SimError::InvalidConfig(_))
        ));
    }

    #[test]
    fn brownian_variance_matches_horizon() {
        let t = 1.0;
        let n = 10_000;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let p = sample_driving(derive_seed(42, i), 4.0, t, 0.01).unwrap();
            let end = *p.b.last().unwrap();
            sum_sq += end * end;
        }
        let var = sum_sq / n as f64;
        // sample variance of N(0, T) has std error T sqrt(2/n)
        let se = t * (2.0 / n as f64).sqrt();
        assert!(
            (var - t).abs() < 5.0 * se,
            "var = {var}, expected {t} +- {se}"
        );
    }

    #[test]
    fn deterministic_flow_compensation_converges() {
        // kappa = 0: xi == 1, |e^{-tau} f| has a limit, monotone tail
        let p = sample_driving(0, 0.0, 12.0, 0.01).unwrap();
        let z = Complex64::new(1.3, 0.4);
        let trace = reverse_flow_trace(&p, z).unwrap();
        let comp: Vec<f64> = trace.iter().map(|&(tau, ld)| ld - tau).collect();
        let m = comp.len();
        let tail = &comp[m / 2..];
        for w in tail.windows(2) {
            assert!((w[1] - w[0]).abs() <= (w[0] - comp[m / 2 - 1]).abs().max(1e-12));
        }
        assert!((tail[tail.len() - 1] - tail[tail.len() - 2]).abs() < 1e-8);
    }

    #[test]
    fn chain_rule_against_finite_difference() {
        let h = 1e-6;
        for i in 0..20 {
            let path = sample_driving(derive_seed(11, i), 6.0, 6.0, 0.01).unwrap();
            let ang = 0.3 + 0.12 * i as f64;
            let z = Complex64::from_polar(1.2, ang);
            let dz = Complex64::new(h, 0.0);
            let fp = reverse_flow(&path, z + dz).unwrap().f;
            let fm = reverse_flow(&path, z - dz).unwrap().f;
            let fd = (fp - fm) / (2.0 * h);
            let d = reverse_flow(&path, z).unwrap().logd.exp();
            let rel = (fd - d).norm() / d.norm();
            assert!(rel < 1e-4, "path {i}: relative error {rel}");
        }
    }

    #[test]
    fn compensation_tail_decays_like_exp_minus_2tau() {
        // |x(tau) - x(T)| ~ e^{-2 tau} for x = Re log f' - tau
        let mut slopes = Vec::new();
        for i in 0..5 {
            let path = sample_driving(derive_seed(5, i), 6.0, 14.0, 0.01).unwrap();
            let z = Complex64::from_polar(1.3, 1.0 + 0.3 * i as f64);
            let trace = reverse_flow_trace(&path, z).unwrap();
            let comp: Vec<(f64, f64)> =
                trace.iter().map(|&(tau, ld)| (tau, ld - tau)).collect();
            let x_end = comp.last().unwrap().1;
            let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &(tau, x) in &comp {
                if tau < 5.0 || tau > 10.0 {
                    continue;
                }
                let d = (x - x_end).abs();
                if d < 1e-14 {
                    continue;
                }
                let y = d.ln();
                sx += tau;
                sy += y;
                sxx += tau * tau;
                sxy += tau * y;
                n += 1.0;
            }
            slopes.push((n * sxy - sx * sy) / (n * sxx - sx * sx));
        }
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        assert!(
            (mean + 2.0).abs() < 0.3,
            "tail log-slope {mean}, slopes {slopes:?}"
        );
    }

    #[test]
    fn singular_start_is_reported() {
        let path = sample_driving(1, 4.0, 1.0, 0.01).unwrap();
        // xi(0) = 1; start within 1e-9 of it (still outside the disk)
        let z = Complex64::new(1.0 + 1e-12, 0.0);
        assert!(matches!(
            reverse_flow(&path, z),
            Err(SimError::SingularApproach(_))
        ));
    }

    #[test]
    fn interior_start_rejected() {
        let path = sample_driving(1, 4.0, 1.0, 0.01).unwrap();
        assert!(matches!(
            reverse_flow(&path, Complex64::new(0.5, 0.0)),
            Err(SimError::InvalidConfig(_))
        ));
    }
}
