//! Subcommand implementations. Each command reads one config file, derives
//! the config hash, writes CSV tables into the output directory, and maps
//! failures to process exit codes: 2 config, 3 numeric, 4 acceptance.

use std::fmt;
use std::path::{Path, PathBuf};

use wpsle::exponents::{
    self, exponent_set, theorem_spectrum, transitions, Branch, Parameters,
};
use wpsle::hyper::{build_g0, ode_residual};
use wpsle::pde::{
    action_analytic_polar, lambda_numeric, sign_scan, term_profile, u_of, AnnulusGrid,
    TrialFunction, TrialKind,
};
use wpsle::sim::{
    estimate_moments_multi, fit_from_estimates, horizon, midpoint_angles, MomentEstimate,
    SimError,
};

use crate::checkpoint::{Checkpoint, CheckpointError, MomentRecord};
use crate::config::{ConfigError, RunConfig};
use crate::table::{Cell, ResultTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Exponents,
    SpectrumTable,
    G0Profile,
    PdeVerify,
    SubsolutionScan,
    Simulate,
    Fit,
    Compare,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub resume: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Acceptance(_) => "acceptance",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Acceptance(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    /// One line, machine-parsable: `error kind=... exit=N msg="..."`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg: String = self
            .message()
            .chars()
            .map(|c| if c == '\n' || c == '"' { ' ' } else { c })
            .collect();
        write!(
            f,
            "error kind={} exit={} msg=\"{}\"",
            self.kind(),
            self.exit_code(),
            msg
        )
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.message)
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::HashMismatch { .. } => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

macro_rules! numeric_from {
    ($($err:ty),*) => {$(
        impl From<$err> for CliError {
            fn from(e: $err) -> Self {
                CliError::Numeric(e.to_string())
            }
        }
    )*};
}

numeric_from!(
    wpsle::exponents::ExponentError,
    wpsle::hyper::HyperError,
    wpsle::pde::PdeError
);

fn params(kappa: f64, t: f64) -> Result<Parameters, CliError> {
    Parameters::new(kappa, t).map_err(|e| CliError::Config(e.to_string()))
}

fn write_table(
    out_dir: &Path,
    name: &str,
    table: &ResultTable,
    hash: u64,
) -> Result<PathBuf, CliError> {
    let path = out_dir.join(name);
    table
        .write(&path, hash)
        .map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn run(inv: &Invocation) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&inv.config_path).map_err(|e| {
        CliError::Config(format!(
            "cannot read config {}: {e}",
            inv.config_path.display()
        ))
    })?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = inv.seed {
        cfg.set("sim.seed", seed);
    }
    let hash = cfg.hash();
    std::fs::create_dir_all(&inv.out_dir).map_err(|e| {
        CliError::Numeric(format!(
            "cannot create output directory {}: {e}",
            inv.out_dir.display()
        ))
    })?;
    match inv.command {
        Command::Exponents => cmd_exponents(&cfg, hash, &inv.out_dir),
        Command::SpectrumTable => cmd_spectrum_table(&cfg, hash, &inv.out_dir),
        Command::G0Profile => cmd_g0_profile(&cfg, hash, &inv.out_dir),
        Command::PdeVerify => cmd_pde_verify(&cfg, hash, &inv.out_dir),
        Command::SubsolutionScan => cmd_subsolution_scan(&cfg, hash, &inv.out_dir),
        Command::Simulate => cmd_simulate(&cfg, hash, &inv.out_dir, inv.resume.as_deref()),
        Command::Fit => cmd_fit(&cfg, hash, &inv.out_dir, inv.resume.as_deref()).map(|_| ()),
        Command::Compare => cmd_compare(&cfg, hash, &inv.out_dir, inv.resume.as_deref()),
    }
}

fn grid_pairs(cfg: &RunConfig) -> Result<Vec<(f64, f64)>, CliError> {
    let kappas = cfg.f64_list("run.kappa")?;
    let ts = cfg.f64_list("run.t")?;
    let mut pairs = Vec::with_capacity(kappas.len() * ts.len());
    for &kappa in &kappas {
        for &t in &ts {
            params(kappa, t)?;
            pairs.push((kappa, t));
        }
    }
    Ok(pairs)
}

fn cmd_exponents(cfg: &RunConfig, hash: u64, out: &Path) -> Result<(), CliError> {
    let mut table = ResultTable::new(vec![
        "kappa",
        "t",
        "gamma0",
        "gamma1",
        "gamma_plus",
        "gamma_minus",
        "beta0",
        "beta1",
        "beta_tip",
        "beta_lin",
        "a",
        "b",
        "c",
        "a_prime",
        "b_prime",
        "c_prime",
        "alpha",
        "sigma",
    ]);
    for (kappa, t) in grid_pairs(cfg)? {
        let xs = exponent_set(&params(kappa, t)?);
        table.push(vec![
            Cell::Float(kappa),
            Cell::Float(t),
            Cell::opt(xs.gamma0),
            Cell::opt(xs.gamma1),
            Cell::opt(xs.gamma_plus),
            Cell::opt(xs.gamma_minus),
            Cell::opt(xs.beta0),
            Cell::opt(xs.beta1),
            Cell::opt(xs.beta_tip),
            Cell::Float(xs.beta_lin),
            Cell::opt(xs.a),
            Cell::opt(xs.b),
            Cell::opt(xs.c),
            Cell::opt(xs.a_prime),
            Cell::opt(xs.b_prime),
            Cell::opt(xs.c_prime),
            Cell::opt(xs.alpha),
            Cell::Int(xs.sigma as i64),
        ]);
    }
    write_table(out, "exponents.csv", &table, hash)?;
    Ok(())
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Tip => "tip",
        Branch::One => "one",
        Branch::Bulk => "bulk",
        Branch::Linear => "linear",
    }
}

fn cmd_spectrum_table(cfg: &RunConfig, hash: u64, out: &Path) -> Result<(), CliError> {
    let mut table = ResultTable::new(vec![
        "kappa", "t", "beta_tip", "beta0", "beta1", "beta_lin", "branch_i", "branch_ii", "t1",
        "t2", "t3", "s", "nu",
    ]);
    for (kappa, t) in grid_pairs(cfg)? {
        let p = params(kappa, t)?;
        let xs = exponent_set(&p);
        let tr = transitions(kappa);
        let (s, nu) = if t <= tr.t1 {
            let s = exponents::packing_s(kappa, t)?;
            (Some(s), Some(exponents::nu_of_s(kappa, s)?))
        } else {
            (None, None)
        };
        table.push(vec![
            Cell::Float(kappa),
            Cell::Float(t),
            Cell::opt(xs.beta_tip),
            Cell::opt(xs.beta0),
            Cell::opt(xs.beta1),
            Cell::Float(xs.beta_lin),
            Cell::Text(branch_name(theorem_spectrum(&p, true).branch)),
            Cell::Text(branch_name(theorem_spectrum(&p, false).branch)),
            Cell::Float(tr.t1),
            Cell::Float(tr.t2),
            Cell::Float(tr.t3),
            Cell::opt(s),
            Cell::opt(nu),
        ]);
    }
    write_table(out, "spectrum_table.csv", &table, hash)?;
    Ok(())
}

fn cmd_g0_profile(cfg: &RunConfig, hash: u64, out: &Path) -> Result<(), CliError> {
    let kappa = cfg.f64("run.kappa")?;
    let t = cfg.f64("run.t")?;
    let u_min = cfg.f64_or("g0.u_min", 0.05)?;
    let u_max = cfg.f64_or("g0.u_max", 3.95)?;
    let n = cfg.usize_or("g0.n", 80)?;
    if !(0.0 < u_min && u_min < u_max && u_max < 4.0) || n < 2 {
        return Err(CliError::Config(format!(
            "g0 grid needs 0 < u_min < u_max < 4 and n >= 2, got [{u_min}, {u_max}] with n = {n}"
        )));
    }
    let sol = build_g0(&params(kappa, t)?)?;
    let mut table = ResultTable::new(vec![
        "kappa",
        "t",
        "u",
        "g0",
        "g0_prime",
        "g0_pprime",
        "u_dlog",
        "res_hypergeom",
        "res_boundary",
    ]);
    for i in 0..n {
        let u = u_min + (u_max - u_min) * i as f64 / (n - 1) as f64;
        let (g, gp, gpp) = sol.eval_all(u)?;
        let res = ode_residual(&sol, u)?;
        table.push(vec![
            Cell::Float(kappa),
            Cell::Float(t),
            Cell::Float(u),
            Cell::Float(g),
            Cell::Float(gp),
            Cell::Float(gpp),
            Cell::Float(sol.u_dlog(u)?),
            Cell::Float(res.hypergeom),
            Cell::Float(res.boundary),
        ]);
    }
    write_table(out, "g0_profile.csv", &table, hash)?;
    Ok(())
}

fn parse_trials(cfg: &RunConfig) -> Result<Vec<(&'static str, TrialKind)>, CliError> {
    let spec = cfg.get("pde.trials").unwrap_or("bs,power,mixed");
    let mut out = Vec::new();
    for name in spec.split(',') {
        out.push(match name.trim() {
            "bs" => ("bs", TrialKind::BeliaevSmirnov),
            "power" => ("power", TrialKind::PurePower),
            "mixed" => ("mixed", TrialKind::Mixed),
            other => {
                return Err(CliError::Config(format!(
                    "key pde.trials: unknown trial {other}, expected bs, power, or mixed"
                )))
            }
        });
    }
    Ok(out)
}

fn build_trial(kind: TrialKind, p: &Parameters, delta: f64) -> Result<TrialFunction, CliError> {
    let tf = match kind {
        TrialKind::BeliaevSmirnov => TrialFunction::beliaev_smirnov(p),
        TrialKind::PurePower => TrialFunction::pure_power(p),
        TrialKind::Mixed => TrialFunction::mixed(p),
    }?;
    Ok(tf.with_delta(delta))
}

fn cmd_pde_verify(cfg: &RunConfig, hash: u64, out: &Path) -> Result<(), CliError> {
    let kappa = cfg.f64("run.kappa")?;
    let t = cfg.f64("run.t")?;
    let p = params(kappa, t)?;
    let r = cfg.f64_or("pde.r", 1.0625)?;
    let thetas = match cfg.get("pde.theta") {
        Some(_) => cfg.f64_list("pde.theta")?,
        None => vec![0.7, 1.3, 2.2],
    };
    let divisors = match cfg.get("pde.divisors") {
        Some(_) => cfg.f64_list("pde.divisors")?,
        None => vec![32.0, 64.0, 128.0],
    };
    let delta = cfg.f64_or("pde.delta", 0.5)?;
    let threshold = cfg.f64_or("pde.max_mismatch", 1e-4)?;
    if r <= 1.0 {
        return Err(CliError::Config(format!("key pde.r: need r > 1, got {r}")));
    }
    for &d in &divisors {
        if d < 4.0 || d.fract() != 0.0 {
            return Err(CliError::Config(format!(
                "key pde.divisors: need integers >= 4, got {d}"
            )));
        }
    }

    let mut table = ResultTable::new(vec![
        "kappa",
        "t",
        "trial",
        "theta",
        "divisor",
        "h",
        "analytic",
        "numeric",
        "rel_mismatch",
    ]);
    let finest = divisors.iter().cloned().fold(f64::MIN, f64::max);
    let mut worst_finest = 0.0_f64;
    for (name, kind) in parse_trials(cfg)? {
        let tf = build_trial(kind, &p, delta)?;
        let uses_g0 = kind != TrialKind::PurePower;
        for &theta in &thetas {
            for &div in &divisors {
                let h = (r - 1.0) / div;
                if uses_g0 && u_of(r + 2.0 * h, theta + 2.0 * h) >= 4.0 {
                    return Err(CliError::Config(format!(
                        "stencil at theta = {theta} leaves the domain of g0 (u >= 4)"
                    )));
                }
                let numeric = lambda_numeric(
                    &p,
                    |rr, th| tf.eval(rr, th).unwrap_or(f64::NAN),
                    r,
                    theta,
                    h,
                    h,
                );
                let u = u_of(r, theta);
                let act = action_analytic_polar(&tf, r, u)?;
                let analytic = match kind {
                    TrialKind::Mixed => act * tf.ell(r),
                    _ => act * tf.eval(r, theta)?,
                };
                let scale = analytic.abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
                let rel = (numeric - analytic).abs() / scale;
                if !rel.is_finite() {
                    return Err(CliError::Numeric(format!(
                        "non-finite mismatch at theta = {theta}, divisor = {div}"
                    )));
                }
                if div == finest {
                    worst_finest = worst_finest.max(rel);
                }
                table.push(vec![
                    Cell::Float(kappa),
                    Cell::Float(t),
                    Cell::Text(name),
                    Cell::Float(theta),
                    Cell::Int(div as i64),
                    Cell::Float(h),
                    Cell::Float(analytic),
                    Cell::Float(numeric),
                    Cell::Float(rel),
                ]);
            }
        }
    }
    write_table(out, "pde_verify.csv", &table, hash)?;
    if worst_finest >= threshold {
        return Err(CliError::Acceptance(format!(
            "max relative mismatch {worst_finest:e} at finest step exceeds {threshold:e}"
        )));
    }
    Ok(())
}

fn cmd_subsolution_scan(cfg: &RunConfig, hash: u64, out: &Path) -> Result<(), CliError> {
    let kappa = cfg.f64("run.kappa")?;
    let t = cfg.f64("run.t")?;
    let p = params(kappa, t)?;
    let delta = cfg.f64_or("scan.delta", 0.5)?;
    if delta == 0.0 {
        return Err(CliError::Config("key scan.delta: must be nonzero".into()));
    }
    let tr = transitions(kappa);
    if t >= tr.t1 {
        return Err(CliError::Config(format!(
            "scan needs the mixed trial function, so t < t1 = {}, got t = {t}",
            tr.t1
        )));
    }
    let grid = if cfg.get("scan.fine") == Some("true") {
        AnnulusGrid::default()
    } else {
        AnnulusGrid::coarse()
    };
    let tf = TrialFunction::mixed(&p)?.with_delta(delta);

    let mut table = ResultTable::new(vec![
        "kappa", "t", "r", "theta", "u", "psi", "lambda_over_psi", "sign", "term_I", "term_II",
        "term_III", "term_IV",
    ]);
    for &r in &grid.r {
        for &theta in &grid.theta {
            let u = u_of(r, theta);
            if u > 4.0 {
                continue;
            }
            let psi = tf.psi(r, theta)?;
            let lambda = action_analytic_polar(&tf, r, u)?;
            let tp = term_profile(&tf, r, theta)?;
            // the delta-odd part of the action; its sign flips exactly
            // under delta -> -delta
            let odd = tp.term_i + tp.term_iv;
            table.push(vec![
                Cell::Float(kappa),
                Cell::Float(t),
                Cell::Float(r),
                Cell::Float(theta),
                Cell::Float(u),
                Cell::Float(psi),
                Cell::Float(lambda / psi),
                Cell::Int(odd.signum() as i64),
                Cell::Float(tp.term_i),
                Cell::Float(tp.term_ii),
                Cell::Float(tp.term_iii),
                Cell::Float(tp.term_iv),
            ]);
        }
    }
    write_table(out, "scan.csv", &table, hash)?;

    let report = sign_scan(&p, delta, &grid)?;
    let mut summary = ResultTable::new(vec![
        "kappa",
        "t",
        "delta",
        "r0_empirical",
        "violations",
        "skipped",
    ]);
    summary.push(vec![
        Cell::Float(kappa),
        Cell::Float(t),
        Cell::Float(delta),
        Cell::Float(report.r0_empirical),
        Cell::Int(report.violations.len() as i64),
        Cell::Int(report.skipped as i64),
    ]);
    write_table(out, "scan_summary.csv", &summary, hash)?;
    Ok(())
}

struct SimKeys {
    kappa: f64,
    ts: Vec<f64>,
    radii: Vec<f64>,
    n_paths: usize,
    n_theta: usize,
    dtau: f64,
    c_step: f64,
    seed: u64,
}

fn sim_keys(cfg: &RunConfig) -> Result<SimKeys, CliError> {
    let kappa = cfg.f64("run.kappa")?;
    let ts = cfg.f64_list("run.t")?;
    for &t in &ts {
        params(kappa, t)?;
    }
    let radii = match cfg.get("sim.r") {
        Some(_) => cfg.f64_list("sim.r")?,
        None => (4..=9).map(|k| 1.0 + 2.0_f64.powi(-k)).collect(),
    };
    for &r in &radii {
        if r <= 1.0 {
            return Err(CliError::Config(format!("key sim.r: need r > 1, got {r}")));
        }
    }
    Ok(SimKeys {
        kappa,
        ts,
        radii,
        n_paths: cfg.usize_or("sim.n_paths", 2000)?,
        n_theta: cfg.usize_or("sim.n_theta", 128)?,
        dtau: cfg.f64_or("sim.dtau", 1e-2)?,
        c_step: cfg.f64_or("sim.c_step", 0.1)?,
        seed: cfg.u64_or("sim.seed", 1)?,
    })
}

fn estimate_from_record(
    rec: &MomentRecord,
    theta_set: &[f64],
    dtau: f64,
) -> Result<MomentEstimate, CliError> {
    if rec.raw.len() != theta_set.len() {
        return Err(CliError::Config(format!(
            "checkpoint record at r = {} has {} angles, config asks for {}",
            rec.r,
            rec.raw.len(),
            theta_set.len()
        )));
    }
    let mut mean = Vec::with_capacity(rec.raw.len());
    let mut std_err = Vec::with_capacity(rec.raw.len());
    for &(count, sum, sum_sq) in &rec.raw {
        let n = count as f64;
        mean.push(if count > 0 { sum / n } else { f64::NAN });
        let var = if count > 1 {
            ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0)
        } else {
            f64::NAN
        };
        std_err.push((var / n).sqrt());
    }
    Ok(MomentEstimate {
        r: rec.r,
        t: rec.t,
        theta_set: theta_set.to_vec(),
        mean,
        std_err,
        n_paths: rec.raw.first().map_or(0, |&(c, _, _)| c as usize),
        n_rejected: 0,
        t_used: horizon(rec.r),
        dtau_used: dtau,
        top_share: 0.0,
        heavy_tail_flagged: false,
        raw: rec.raw.clone(),
    })
}

/// Per-radius, per-t estimates, reusing any radii already present in the
/// resume checkpoint and saving progress after every radius.
fn gather_estimates(
    sk: &SimKeys,
    hash: u64,
    out: &Path,
    resume: Option<&Path>,
) -> Result<Vec<Vec<MomentEstimate>>, CliError> {
    let theta_set = midpoint_angles(sk.n_theta);
    let resumed = match resume {
        Some(path) => Some(Checkpoint::load(path, hash)?),
        None => None,
    };
    let mut ckpt = Checkpoint {
        config_hash: hash,
        records: Vec::new(),
    };
    let ckpt_path = out.join("moments.ckpt");
    let mut per_radius = Vec::with_capacity(sk.radii.len());
    for &r in &sk.radii {
        let recs: Option<Vec<&MomentRecord>> = resumed
            .as_ref()
            .map(|c| sk.ts.iter().map(|&t| c.find(r, t)).collect::<Option<_>>())
            .unwrap_or(None);
        let ests = match recs {
            Some(recs) => {
                let mut v = Vec::with_capacity(recs.len());
                for rec in recs {
                    ckpt.records.push(rec.clone());
                    v.push(estimate_from_record(rec, &theta_set, sk.dtau)?);
                }
                v
            }
            None => {
                let ests = estimate_moments_multi(
                    sk.kappa,
                    &sk.ts,
                    r,
                    &theta_set,
                    sk.n_paths,
                    horizon(r),
                    sk.dtau,
                    sk.c_step,
                    sk.seed,
                )?;
                for est in &ests {
                    ckpt.records.push(MomentRecord {
                        r,
                        t: est.t,
                        raw: est.raw.clone(),
                    });
                }
                ests
            }
        };
        ckpt.save(&ckpt_path)?;
        per_radius.push(ests);
    }
    Ok(per_radius)
}

fn cmd_simulate(
    cfg: &RunConfig,
    hash: u64,
    out: &Path,
    resume: Option<&Path>,
) -> Result<(), CliError> {
    let sk = sim_keys(cfg)?;
    let per_radius = gather_estimates(&sk, hash, out, resume)?;
    let mut table = ResultTable::new(vec!["kappa", "t", "r", "theta", "mean", "stderr", "n"]);
    for ests in &per_radius {
        for est in ests {
            for (j, &theta) in est.theta_set.iter().enumerate() {
                table.push(vec![
                    Cell::Float(sk.kappa),
                    Cell::Float(est.t),
                    Cell::Float(est.r),
                    Cell::Float(theta),
                    Cell::Float(est.mean[j]),
                    Cell::Float(est.std_err[j]),
                    Cell::Int(est.raw[j].0 as i64),
                ]);
            }
        }
    }
    write_table(out, "moments.csv", &table, hash)?;
    Ok(())
}

fn fit_arcs(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    match cfg.get("fit.arcs") {
        Some(_) => Ok(cfg.f64_list("fit.arcs")?),
        None => Ok(vec![0.0]),
    }
}

type FitMatrix = Vec<Vec<wpsle::sim::SpectrumFit>>;

fn cmd_fit(
    cfg: &RunConfig,
    hash: u64,
    out: &Path,
    resume: Option<&Path>,
) -> Result<(SimKeys, Vec<f64>, FitMatrix), CliError> {
    let sk = sim_keys(cfg)?;
    let arcs = fit_arcs(cfg)?;
    let per_radius = gather_estimates(&sk, hash, out, resume)?;
    let fits = fit_from_estimates(sk.kappa, &sk.ts, &sk.radii, &arcs, sk.n_theta, &per_radius)?;

    let mut points = ResultTable::new(vec!["kappa", "t", "arc", "r", "g", "log_g", "fitted"]);
    let mut summary = ResultTable::new(vec![
        "kappa",
        "t",
        "arc",
        "slope",
        "slope_err",
        "intercept",
        "heavy_tail_flagged",
        "n_rejected",
    ]);
    for row in &fits {
        for fit in row {
            for (i, &r) in fit.r_ladder.iter().enumerate() {
                let x = -(r - 1.0).ln();
                points.push(vec![
                    Cell::Float(fit.kappa),
                    Cell::Float(fit.t),
                    Cell::Float(fit.exclusion_arc),
                    Cell::Float(r),
                    Cell::Float(fit.g[i]),
                    Cell::Float(fit.g[i].ln()),
                    Cell::Float(fit.intercept + fit.slope * x),
                ]);
            }
            summary.push(vec![
                Cell::Float(fit.kappa),
                Cell::Float(fit.t),
                Cell::Float(fit.exclusion_arc),
                Cell::Float(fit.slope),
                Cell::Float(fit.slope_err),
                Cell::Float(fit.intercept),
                Cell::Int(fit.heavy_tail_flagged as i64),
                Cell::Int(fit.n_rejected as i64),
            ]);
        }
    }
    write_table(out, "fits.csv", &points, hash)?;
    write_table(out, "fit_summary.csv", &summary, hash)?;
    Ok((sk, arcs, fits))
}

fn cmd_compare(
    cfg: &RunConfig,
    hash: u64,
    out: &Path,
    resume: Option<&Path>,
) -> Result<(), CliError> {
    let (sk, _arcs, fits) = cmd_fit(cfg, hash, out, resume)?;
    let threshold = cfg.f64_or("accept.max_deviation", 0.1)?;
    let mut table = ResultTable::new(vec![
        "kappa",
        "t",
        "arc",
        "slope",
        "slope_err",
        "theorem",
        "branch",
        "deviation",
        "z_score",
    ]);
    let mut violations = 0usize;
    let mut worst = 0.0_f64;
    for row in &fits {
        for fit in row {
            let p = params(sk.kappa, fit.t)?;
            // an exclusion arc around theta = 0 removes the tip
            // contribution, so compare against the tip-excluded variant
            let sv = theorem_spectrum(&p, fit.exclusion_arc == 0.0);
            let deviation = (fit.slope - sv.value).abs();
            if deviation >= threshold {
                violations += 1;
                worst = worst.max(deviation);
            }
            table.push(vec![
                Cell::Float(fit.kappa),
                Cell::Float(fit.t),
                Cell::Float(fit.exclusion_arc),
                Cell::Float(fit.slope),
                Cell::Float(fit.slope_err),
                Cell::Float(sv.value),
                Cell::Text(branch_name(sv.branch)),
                Cell::Float(deviation),
                Cell::Float(deviation / fit.slope_err),
            ]);
        }
    }
    write_table(out, "compare.csv", &table, hash)?;
    if violations > 0 {
        return Err(CliError::Acceptance(format!(
            "{violations} fitted slope(s) deviate from the theorem by >= {threshold}, worst {worst}"
        )));
    }
    Ok(())
}
