//! End-to-end studies: the chaos-rate sweep, concentration curves, moment
//! propagation, the mollification Cauchy estimate, the transport-distance
//! profile, and the explicit-constants ledger.
//!
//! Every study is reproducible byte-for-byte from a config plus seed:
//! replicas own disjoint noise substreams, run concurrently, and reduce in
//! replica-index order.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::concentration::{
    binomial_tail_check, gamma_fluctuation_terms, increment_deviation_check, lambda_fluctuation,
    sup_infnorm_deviation, ConcentrationError, TailCurve, TailCurvePoint,
};
use crate::config::LabConfig;
use crate::dynamics::{
    simulate_coupled, simulate_linear_sde_paths, simulate_particle_system, step_linear_sde,
    CoupledRunOptions, DynamicsError, IntegratorConfig, ParticleState,
};
use crate::kernel::{rope_majorant_holds, KernelSpec};
use crate::meanfield::{
    mollify_density, solve_vpfp, weighted_norm_e, FieldHistory, FieldTable, GridDensity,
    MeanfieldError, PdeSolution, SolverOptions,
};
use crate::metrics::{coupling_discrepancy, w1_2d_exact, w1_2d_sliced, MetricsError};
use crate::rng::{NoiseStreamSpec, StreamClass};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Meanfield(#[from] MeanfieldError),
    #[error(transparent)]
    Concentration(#[from] ConcentrationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("constants require finite positive moments, got {0}")]
    BadMoments(f64),
    #[error("lambda and kappa must be > 0")]
    BadConstantsInput,
}

/// Distinct experiments draw from disjoint seed spaces.
fn experiment_noise(seed: u64, tag: u64, replica: u64) -> NoiseStreamSpec {
    NoiseStreamSpec::new(seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15), replica)
}

const TAG_CHAOS: u64 = 1;
const TAG_CONCENTRATION: u64 = 2;
const TAG_MOMENTS: u64 = 3;
const TAG_CAUCHY: u64 = 4;
const TAG_W1: u64 = 5;
const TAG_LAMBDA: u64 = 6;
const TAG_GAMMA: u64 = 7;
const TAG_BINOMIAL: u64 = 8;
const TAG_INFNORM: u64 = 9;
const TAG_INCREMENT: u64 = 10;
const TAG_ROPE: u64 = 11;
const TAG_OU: u64 = 12;

/// Product-Gaussian initial family with closed-form moments.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct F0Spec {
    pub sigma_x: f64,
    pub sigma_v: f64,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// `E e^{lambda |sigma Z|} = 2 e^{(lambda sigma)^2 / 2} Phi(lambda sigma)`.
fn folded_gaussian_exp_moment(lambda: f64, sigma: f64) -> f64 {
    let a = lambda * sigma;
    2.0 * (0.5 * a * a).exp() * std_normal_cdf(a)
}

impl F0Spec {
    pub fn from_config(cfg: &LabConfig) -> Self {
        F0Spec {
            sigma_x: cfg.sigma_x,
            sigma_v: cfg.sigma_v,
        }
    }

    pub fn grid(&self, cfg: &LabConfig) -> Result<GridDensity, MeanfieldError> {
        GridDensity::gaussian(
            cfg.x_min,
            cfg.x_max,
            cfg.v_min,
            cfg.v_max,
            cfg.nx,
            cfg.nv,
            self.sigma_x,
            self.sigma_v,
        )
    }

    pub fn sample(&self, n: usize, noise: &NoiseStreamSpec) -> Result<ParticleState, DynamicsError> {
        ParticleState::gaussian_iid(n, self.sigma_x, self.sigma_v, noise)
    }

    pub fn exp_moment_w(&self, lambda: f64) -> f64 {
        folded_gaussian_exp_moment(lambda, self.sigma_v)
    }

    pub fn exp_moment_xv(&self, lambda: f64) -> f64 {
        folded_gaussian_exp_moment(lambda, self.sigma_x)
            * folded_gaussian_exp_moment(lambda, self.sigma_v)
    }

    pub fn mean_abs_w(&self) -> f64 {
        self.sigma_v * (2.0 / std::f64::consts::PI).sqrt()
    }

    /// Exact spatial CDF of the initial position marginal.
    pub fn rho_cdf(&self) -> impl Fn(f64) -> f64 + '_ {
        move |x: f64| std_normal_cdf(x / self.sigma_x)
    }
}

/// The explicit constants controlling the concentration bounds, evaluated
/// from the initial moments, the horizon, and the density sup `kappa_t`.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsLedger {
    pub lambda: f64,
    pub t: f64,
    pub kappa_t: f64,
    pub c_lambda: f64,
    pub b_t: f64,
    pub a_t: f64,
    pub a_t_prime: f64,
    pub a_t_second: f64,
    pub c_t: f64,
    pub d_t: f64,
    pub exp_moment_w: f64,
    pub exp_moment_xv: f64,
    /// `a_t_second <= a_t`, as printed.
    pub a_t_dominates: bool,
}

/// Evaluate the closed-form constants ledger.
pub fn compute_constants(
    exp_moment_w: f64,
    exp_moment_xv: f64,
    lambda: f64,
    t: f64,
    kappa_t: f64,
) -> Result<ConstantsLedger, ExperimentError> {
    if !(lambda > 0.0) || !(kappa_t > 0.0) {
        return Err(ExperimentError::BadConstantsInput);
    }
    if !exp_moment_w.is_finite() || !exp_moment_xv.is_finite() || exp_moment_w < 1.0 {
        return Err(ExperimentError::BadMoments(exp_moment_w));
    }
    let ln_mw = exp_moment_w.ln();
    let c_lambda = 2.5 + ln_mw / lambda;
    let c_t = 36.0 + 80.0 * kappa_t + (1.0 + 3.0 * kappa_t) * (8.0 / lambda) * ln_mw;
    let b_t = 37.0 + 2.0 / lambda + 80.0 * kappa_t + (1.0 + 3.0 * kappa_t) * (8.0 / lambda) * ln_mw;
    let grow = (lambda * (0.5 + lambda) * t).exp();
    let d_t = 10.0 + kappa_t * kappa_t / lambda + grow * exp_moment_xv;
    let a_t = (12.0 + kappa_t * kappa_t / lambda + 2.0 * grow * exp_moment_xv) / lambda
        * (1.0 + (2.0 * kappa_t + 1.0) * c_lambda);
    let a_t_prime = (10.0 + kappa_t * kappa_t / lambda + grow * exp_moment_xv) / lambda
        * (2.0 * kappa_t + 1.0);
    let a_t_second = (d_t * (1.0 + (2.0 * kappa_t + 1.0) * c_lambda)
        + 5.0
        + 4.0 * kappa_t
        + grow * exp_moment_xv)
        / lambda;
    Ok(ConstantsLedger {
        lambda,
        t,
        kappa_t,
        c_lambda,
        b_t,
        a_t,
        a_t_prime,
        a_t_second,
        c_t,
        d_t,
        exp_moment_w,
        exp_moment_xv,
        a_t_dominates: a_t_second <= a_t,
    })
}

/// Solve the reference kinetic equation for the configured initial family
/// and kernel over `[0, t]`, recording force tables at every solver step.
pub fn solve_reference_pde(cfg: &LabConfig) -> Result<PdeSolution, ExperimentError> {
    let f0 = F0Spec::from_config(cfg).grid(cfg)?;
    let opts = SolverOptions {
        interp: cfg.interp,
        boundary_tol: cfg.boundary_tol,
        force_scale: 1.0,
    };
    let stride = if cfg.pde_snapshot_stride == 0 {
        ((cfg.t / cfg.pde_dt).round() as usize / 8).max(1)
    } else {
        cfg.pde_snapshot_stride
    };
    Ok(solve_vpfp(
        f0,
        cfg.kernel_spec(),
        cfg.pde_dt,
        cfg.t,
        stride,
        opts,
    )?)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosRateRow {
    pub n: usize,
    pub replicas: usize,
    pub mean: f64,
    pub std_err: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosRateReport {
    pub rows: Vec<ChaosRateRow>,
    /// Weighted log-log slope of mean discrepancy against N; `None` when any
    /// mean vanishes (control runs).
    pub slope: Option<f64>,
    pub kappa_t: f64,
    pub int_rho_sup: f64,
}

/// Mean coupling discrepancy per ensemble size, with the stability-rate
/// companion bound `(9/sqrt(N)) e^{t + 8 int ||rho_s|| ds}` from the solved
/// reference density.
pub fn chaos_rate_sweep(
    cfg: &LabConfig,
    pde: &PdeSolution,
) -> Result<ChaosRateReport, ExperimentError> {
    let f0 = F0Spec::from_config(cfg);
    let fields = FieldHistory::from_solution(pde);
    let icfg = IntegratorConfig::new(cfg.dt, cfg.t, cfg.scheme)?;
    let spec = cfg.kernel_spec();
    let int_rho = pde.int_rho_sup();
    let rate_bound = (cfg.t + 8.0 * int_rho).exp();

    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let discrepancies: Vec<f64> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| -> Result<f64, ExperimentError> {
                let noise = experiment_noise(cfg.seed, TAG_CHAOS, r as u64);
                let initial = f0.sample(n, &noise)?;
                let out = simulate_coupled(
                    &initial,
                    &spec,
                    &fields,
                    &icfg,
                    &noise,
                    &CoupledRunOptions::default(),
                )?;
                Ok(coupling_discrepancy(&out.stats))
            })
            .collect::<Result<_, _>>()?;
        let (mean, std_err) = mean_and_se(&discrepancies);
        rows.push(ChaosRateRow {
            n,
            replicas: cfg.replicas,
            mean,
            std_err,
            bound: 9.0 / (n as f64).sqrt() * rate_bound,
        });
    }

    let slope = fit_loglog_slope(&rows);
    Ok(ChaosRateReport {
        rows,
        slope,
        kappa_t: pde.kappa(),
        int_rho_sup: int_rho,
    })
}

/// Inverse-variance weighted least squares on `(ln N, ln mean)`.
fn fit_loglog_slope(rows: &[ChaosRateRow]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|r| r.mean <= 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            let se_log = (r.std_err / r.mean).max(1e-6);
            ((r.n as f64).ln(), r.mean.ln(), 1.0 / (se_log * se_log))
        })
        .collect();
    let wsum: f64 = pts.iter().map(|p| p.2).sum();
    let xbar = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / wsum;
    let ybar = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / wsum;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar) * (p.0 - xbar)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar) * (p.1 - ybar)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub replicas: usize,
    pub curve: TailCurve,
    pub ledger: ConstantsLedger,
    pub admissible: (f64, f64),
    pub empty_range: bool,
}

/// Tail curve of the averaged sup-in-time coupling discrepancy against the
/// explicit bound `(t + eps)(A_t + A_t' sqrt(N) eps) N^{3/2} e^{-2 N eps^2}`
/// at thresholds `B_t eps`.
pub fn concentration_sweep(
    cfg: &LabConfig,
    pde: &PdeSolution,
) -> Result<ConcentrationReport, ExperimentError> {
    let f0 = F0Spec::from_config(cfg);
    let n = cfg.concentration_n;
    let replicas = cfg.concentration_replicas;
    let kappa = pde.kappa();
    let ledger = compute_constants(
        f0.exp_moment_w(cfg.lambda),
        f0.exp_moment_xv(cfg.lambda),
        cfg.lambda,
        cfg.t,
        kappa,
    )?;

    let lo = cfg.lambda / (n as f64).sqrt();
    let hi = (5.0 * kappa).min(1.0)
        * (1.0f64 / 16.0)
            .min(cfg.lambda / 2.0)
            .min(cfg.lambda.powi(-2));
    let empty_range = hi < lo;
    let eps_grid: Vec<f64> = if !cfg.epsilon_grid.is_empty() {
        cfg.epsilon_grid.clone()
    } else if empty_range {
        vec![lo]
    } else {
        let m = 6;
        (0..m)
            .map(|k| lo * (hi / lo).powf(k as f64 / (m - 1) as f64))
            .collect()
    };

    let fields = FieldHistory::from_solution(pde);
    let icfg = IntegratorConfig::new(cfg.dt, cfg.t, cfg.scheme)?;
    let spec = cfg.kernel_spec();
    let discrepancies: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<f64, ExperimentError> {
            let noise = experiment_noise(cfg.seed, TAG_CONCENTRATION, r as u64);
            let initial = f0.sample(n, &noise)?;
            let out = simulate_coupled(
                &initial,
                &spec,
                &fields,
                &icfg,
                &noise,
                &CoupledRunOptions::default(),
            )?;
            Ok(coupling_discrepancy(&out.stats))
        })
        .collect::<Result<_, _>>()?;

    let nf = n as f64;
    let points = eps_grid
        .iter()
        .map(|&eps| {
            let cut = ledger.b_t * eps;
            let exceed = discrepancies.iter().filter(|&&d| d >= cut).count();
            let bound = (cfg.t + eps)
                * (ledger.a_t + ledger.a_t_prime * nf.sqrt() * eps)
                * nf.powf(1.5)
                * (-2.0 * nf * eps * eps).exp();
            TailCurvePoint::new(eps, exceed as f64 / replicas as f64, bound)
        })
        .collect();

    Ok(ConcentrationReport {
        n,
        replicas,
        curve: TailCurve { points, replicas },
        ledger,
        admissible: (lo, hi),
        empty_range,
    })
}

/// One bound assertion: `empirical <= bound + slack` unless vacuous.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub empirical: f64,
    pub bound: f64,
    pub slack: f64,
    pub vacuous: bool,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(name: &str, empirical: f64, bound: f64, slack: f64) -> Self {
        BoundCheck {
            name: name.to_string(),
            empirical,
            bound,
            slack,
            vacuous: false,
            pass: empirical <= bound + slack,
        }
    }

    pub fn vacuous(mut self) -> Self {
        self.vacuous = true;
        self.pass = true;
        self
    }

    pub fn margin(&self) -> f64 {
        self.bound + self.slack - self.empirical
    }
}

/// Empirical mean of the force fluctuation statistic for i.i.d. draws from
/// the initial position marginal, against `1/sqrt(2N)`.
pub fn lambda_bound_check(
    cfg: &LabConfig,
    n: usize,
    replicas: usize,
) -> Result<BoundCheck, ExperimentError> {
    let f0 = F0Spec::from_config(cfg);
    let spec = KernelSpec::exact(cfg.sign);
    let cdf = f0.rho_cdf();
    let sign = cfg.sign.as_f64();
    let field = FieldTable::from_fn(
        cfg.x_min * 1.5,
        cfg.x_max * 1.5,
        16 * 1024 + 1,
        |x| sign * (cdf(x) - 0.5),
    );
    let values: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<f64, ExperimentError> {
            let noise = experiment_noise(cfg.seed, TAG_LAMBDA, r as u64);
            let positions: Vec<f64> = (0..n)
                .map(|i| cfg.sigma_x * noise.gaussian(StreamClass::InitialPosition, i as u64, 0))
                .collect();
            Ok(lambda_fluctuation(&positions, &spec, &field)?)
        })
        .collect::<Result<_, _>>()?;
    let (mean, se) = mean_and_se(&values);
    Ok(BoundCheck::new(
        "lambda_fluctuation_mean",
        mean,
        1.0 / (2.0 * n as f64).sqrt(),
        3.0 * se,
    ))
}

/// Exceedance curve of the fluctuation statistic against the deviation bound
/// `2 N e^{-2 alpha^2 (N-1)}` for a diffuse common law.
pub fn lambda_deviation_curve(
    cfg: &LabConfig,
    n: usize,
    replicas: usize,
    alphas: &[f64],
) -> Result<TailCurve, ExperimentError> {
    let f0 = F0Spec::from_config(cfg);
    let spec = KernelSpec::exact(cfg.sign);
    let cdf = f0.rho_cdf();
    let sign = cfg.sign.as_f64();
    let field = FieldTable::from_fn(
        cfg.x_min * 1.5,
        cfg.x_max * 1.5,
        16 * 1024 + 1,
        |x| sign * (cdf(x) - 0.5),
    );
    let values: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<f64, ExperimentError> {
            let noise = experiment_noise(cfg.seed, TAG_LAMBDA, r as u64);
            let positions: Vec<f64> = (0..n)
                .map(|i| cfg.sigma_x * noise.gaussian(StreamClass::InitialPosition, i as u64, 0))
                .collect();
            Ok(lambda_fluctuation(&positions, &spec, &field)?)
        })
        .collect::<Result<_, _>>()?;
    let nf = n as f64;
    let points = alphas
        .iter()
        .map(|&alpha| {
            let exceed = values.iter().filter(|&&v| v >= alpha).count();
            let bound = 2.0 * nf * (-2.0 * alpha * alpha * (nf - 1.0)).exp();
            TailCurvePoint::new(alpha, exceed as f64 / replicas as f64, bound)
        })
        .collect();
    Ok(TailCurve {
        points,
        replicas,
    })
}

/// Mean per-point window fluctuation for i.i.d. draws, against `3/sqrt(N)`.
pub fn gamma_bound_check(
    cfg: &LabConfig,
    n: usize,
    replicas: usize,
) -> Result<BoundCheck, ExperimentError> {
    let f0 = F0Spec::from_config(cfg);
    let per_replica: Vec<(f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64), ExperimentError> {
            let noise = experiment_noise(cfg.seed, TAG_GAMMA, r as u64);
            let positions: Vec<f64> = (0..n)
                .map(|i| cfg.sigma_x * noise.gaussian(StreamClass::InitialPosition, i as u64, 0))
                .collect();
            let cdf = f0.rho_cdf();
            let terms = gamma_fluctuation_terms(&positions, &cdf)?;
            let (m, _) = mean_and_se(&terms);
            Ok((m, terms[0]))
        })
        .collect::<Result<_, _>>()?;
    // Average the per-point expectation over replicas; replica means are
    // i.i.d., so their spread gives the standard error.
    let means: Vec<f64> = per_replica.iter().map(|p| p.0).collect();
    let (mean, se) = mean_and_se(&means);
    Ok(BoundCheck::new(
        "gamma_fluctuation_per_point_mean",
        mean,
        3.0 / (n as f64).sqrt(),
        3.0 * se,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub checks: Vec<BoundCheck>,
    pub t: f64,
    pub s: f64,
    pub copies: usize,
}

/// Empirical exponential and first-order moments of the mean-field copies
/// against the propagation bounds.
pub fn moment_propagation_check(
    cfg: &LabConfig,
    fields: &FieldHistory,
) -> Result<MomentReport, ExperimentError> {
    let f0 = F0Spec::from_config(cfg);
    let lambda = cfg.lambda;
    let t = cfg.t;
    let copies = cfg.moment_copies.max(2);
    let noise = experiment_noise(cfg.seed, TAG_MOMENTS, 0);
    let initial = f0.sample(copies, &noise)?;
    let icfg = IntegratorConfig::new(cfg.dt, t, cfg.scheme)?;
    let steps = icfg.steps();
    // Increment window [s, t] with t - s <= 1/4, s on the step grid.
    let s_steps = if t <= 0.25 {
        0
    } else {
        steps - ((0.25 / cfg.dt).round() as usize).min(steps)
    };
    let rec = simulate_linear_sde_paths(&initial, fields, &icfg, &noise, s_steps.max(1))?;
    let s_time = rec
        .times
        .iter()
        .cloned()
        .find(|&u| (u - s_steps as f64 * cfg.dt).abs() < 1e-9)
        .unwrap_or(0.0);
    let y_s = rec
        .times
        .iter()
        .position(|&u| (u - s_time).abs() < 1e-9)
        .map(|k| rec.positions[k].clone())
        .unwrap_or_else(|| rec.positions[0].clone());
    let y_t = rec.positions.last().unwrap();
    let w_t = rec.velocities.last().unwrap();

    let mut checks = Vec::new();

    let ew: Vec<f64> = w_t.iter().map(|w| (lambda * w.abs()).exp()).collect();
    let (m, se) = mean_and_se(&ew);
    let bound_i = (0.5 * lambda * (3.0 + lambda)).exp()
        * folded_gaussian_exp_moment(lambda * (-t).exp(), f0.sigma_v);
    checks.push(BoundCheck::new("exp_moment_w_t", m, bound_i, 3.0 * se));

    let ey: Vec<f64> = y_t.iter().map(|y| (lambda * y.abs()).exp()).collect();
    let (m, se) = mean_and_se(&ey);
    let bound_ii = 2.0 * (lambda * t * (0.5 + lambda)).exp() * f0.exp_moment_xv(lambda);
    checks.push(BoundCheck::new("exp_moment_y_t", m, bound_ii, 3.0 * se));

    let aw: Vec<f64> = w_t.iter().map(|w| w.abs()).collect();
    let (m, se) = mean_and_se(&aw);
    let bound_iv = (-t).exp() * f0.mean_abs_w() + 2.0;
    checks.push(BoundCheck::new("mean_abs_w_t", m, bound_iv, 3.0 * se));

    if s_time < t {
        let dy: Vec<f64> = y_t
            .iter()
            .zip(&y_s)
            .map(|(a, b)| (a - b).abs())
            .collect();
        let (m, se) = mean_and_se(&dy);
        let bound_inc = (t - s_time) * (f0.mean_abs_w() + 3.0);
        checks.push(BoundCheck::new("mean_abs_y_increment", m, bound_inc, 3.0 * se));
    }

    Ok(MomentReport {
        checks,
        t,
        s: s_time,
        copies,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyReport {
    pub eta: f64,
    pub eta_prime: f64,
    pub mean: f64,
    pub std_err: f64,
    pub bound: f64,
    pub k_const: f64,
    pub check: BoundCheck,
}

/// Two mollified mean-field systems sharing base initial data, bump jitter,
/// and Brownian noise; reports the mean sup-in-time discrepancy against
/// `(3/2)(eta + eta') e^{(1 + 8 K) t}`.
pub fn cauchy_eta_check(
    cfg: &LabConfig,
    eta: f64,
    eta_prime: f64,
) -> Result<CauchyReport, ExperimentError> {
    if !(eta > 0.0) || !(eta_prime > 0.0) {
        return Err(ExperimentError::BadConstantsInput);
    }
    let f0 = F0Spec::from_config(cfg);
    let f0_grid = f0.grid(cfg)?;
    let opts = SolverOptions {
        interp: cfg.interp,
        boundary_tol: cfg.boundary_tol,
        force_scale: 1.0,
    };
    let solve_for = |width: f64| -> Result<PdeSolution, ExperimentError> {
        let spec = KernelSpec::mollified(cfg.sign, width).expect("eta > 0");
        let smoothed = mollify_density(&f0_grid, width);
        Ok(solve_vpfp(smoothed, spec, cfg.pde_dt, cfg.t, 0, opts.clone())?)
    };
    let sol_a = solve_for(eta)?;
    let sol_b = solve_for(eta_prime)?;
    let fields_a = FieldHistory::from_solution(&sol_a);
    let fields_b = FieldHistory::from_solution(&sol_b);

    let icfg = IntegratorConfig::new(cfg.dt, cfg.t, cfg.scheme)?;
    let n = cfg.cauchy_n.max(1);
    let per_replica: Vec<f64> = (0..cfg.cauchy_replicas.max(1))
        .into_par_iter()
        .map(|r| -> Result<f64, ExperimentError> {
            let noise = experiment_noise(cfg.seed, TAG_CAUCHY, r as u64);
            let base = f0.sample(n, &noise)?;
            let mut state_a = base.clone();
            let mut state_b = base;
            for i in 0..n {
                let u = noise.bump(StreamClass::MollifierPosition, i as u64, 0);
                let v = noise.bump(StreamClass::MollifierVelocity, i as u64, 0);
                state_a.positions[i] += eta * u;
                state_a.velocities[i] += eta * v;
                state_b.positions[i] += eta_prime * u;
                state_b.velocities[i] += eta_prime * v;
            }
            let pair_gap = |a: &ParticleState, b: &ParticleState, i: usize| {
                (a.positions[i] - b.positions[i]).abs()
                    + (a.velocities[i] - b.velocities[i]).abs()
            };
            let mut sup_sum: Vec<f64> =
                (0..n).map(|i| pair_gap(&state_a, &state_b, i)).collect();
            let mut xi = vec![0.0; n];
            let mut buf = Vec::with_capacity(n);
            for k in 0..icfg.steps() {
                let t_k = k as f64 * icfg.dt;
                for (i, x) in xi.iter_mut().enumerate() {
                    *x = noise.gaussian(StreamClass::DynamicsNoise, i as u64, k as u64);
                }
                step_linear_sde(&mut state_a, fields_a.at_time(t_k)?, icfg.dt, &xi, &mut buf)?;
                step_linear_sde(&mut state_b, fields_b.at_time(t_k)?, icfg.dt, &xi, &mut buf)?;
                for (i, sup) in sup_sum.iter_mut().enumerate() {
                    let d = pair_gap(&state_a, &state_b, i);
                    if d > *sup {
                        *sup = d;
                    }
                }
            }
            Ok(sup_sum.iter().sum::<f64>() / n as f64)
        })
        .collect::<Result<_, _>>()?;

    let (mean, std_err) = mean_and_se(&per_replica);
    let lambda = cfg.lambda;
    let width_sum = eta + eta_prime;
    let norm0 = weighted_norm_e(&f0_grid, lambda * (-cfg.t).exp());
    let k_const = 4.0 / lambda
        * (cfg.t + 0.5 * lambda + 0.5 * lambda * lambda).exp()
        * (lambda * width_sum).exp()
        * norm0;
    let bound = 1.5 * width_sum * ((1.0 + 8.0 * k_const) * cfg.t).exp();
    let check = BoundCheck::new("cauchy_mollification", mean, bound, 3.0 * std_err);
    Ok(CauchyReport {
        eta,
        eta_prime,
        mean,
        std_err,
        bound,
        k_const,
        check,
    })
}

/// Polynomial-tail branch of the norm propagation bound:
/// `||f_t||_{p,gamma} <= C_gamma e^{gamma t} ||f_0||_{p,gamma}` with
/// `C_gamma = 2^{3 gamma / 2} (1 + 2^gamma m_gamma)` and `m_gamma` the
/// standard normal absolute moment of order gamma. The smoothing-width
/// factor is taken as 1 (exact kernel limit).
pub fn polynomial_norm_bound_check(
    cfg: &LabConfig,
    pde: &PdeSolution,
    gamma: f64,
) -> Result<BoundCheck, ExperimentError> {
    if !(gamma > 1.0) {
        return Err(ExperimentError::BadConstantsInput);
    }
    let m_gamma = (2.0f64).powf(0.5 * gamma)
        * statrs::function::gamma::gamma(0.5 * (gamma + 1.0))
        / std::f64::consts::PI.sqrt();
    let c_gamma = (2.0f64).powf(1.5 * gamma) * (1.0 + (2.0f64).powf(gamma) * m_gamma);
    let f0 = F0Spec::from_config(cfg).grid(cfg)?;
    let base = crate::meanfield::weighted_norm_p(&f0, gamma);
    let mut worst = 0.0f64;
    for (t, f) in &pde.snapshots {
        let lhs = crate::meanfield::weighted_norm_p(f, gamma);
        let rhs = c_gamma * (gamma * t).exp() * base;
        worst = worst.max(lhs / rhs);
    }
    Ok(BoundCheck::new(
        &format!("polynomial_norm_ratio_gamma_{gamma}"),
        worst,
        1.0,
        0.0,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct W1ProfileRow {
    pub t: f64,
    pub n: usize,
    /// Exact assignment distance; computed on a systematic subsample when
    /// the ensemble exceeds the matcher cap.
    pub mean_w1: f64,
    pub std_err: f64,
    /// Sliced surrogate on the full clouds, reported alongside.
    pub mean_sliced: f64,
    pub subsampled: bool,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct W1ProfileReport {
    pub rows: Vec<W1ProfileRow>,
    /// max/min of the per-N ratio at the final time; qualitative flatness.
    pub ratio_spread: f64,
}

/// Systematic cloud from the grid: one point per mass quantile, placed inside
/// its cell with low-discrepancy offsets.
fn sample_grid_cloud(f: &GridDensity, n: usize) -> Vec<(f64, f64)> {
    let total: f64 = f.values.iter().sum();
    let mut cum = 0.0;
    let mut cloud = Vec::with_capacity(n);
    let mut cell = 0usize;
    let golden = 0.618_033_988_749_894_9_f64;
    let mut cum_next = f.values[0] / total;
    for k in 0..n {
        let target = (k as f64 + 0.5) / n as f64;
        while cum_next < target && cell + 1 < f.values.len() {
            cell += 1;
            cum += f.values[cell - 1] / total;
            cum_next = cum + f.values[cell] / total;
        }
        let ix = cell / f.nv;
        let iv = cell % f.nv;
        let frac_x = ((target - cum) / (f.values[cell] / total).max(1e-300)).clamp(0.0, 1.0);
        let frac_v = (k as f64 * golden).fract();
        cloud.push((
            f.x_min + (ix as f64 + frac_x) * f.dx,
            f.v_min + (iv as f64 + frac_v) * f.dv,
        ));
    }
    cloud
}

/// Transport distance between the particle ensemble at the horizon and a
/// systematic cloud from the solved density, across the N sweep; the ratio
/// column divides by `ln(1+N)/sqrt(N)`.
pub fn w1_profile_check(
    cfg: &LabConfig,
    pde: &PdeSolution,
) -> Result<W1ProfileReport, ExperimentError> {
    let f0 = F0Spec::from_config(cfg);
    let spec = cfg.kernel_spec();
    let mut rows = Vec::new();
    let (t_final, f_final) = pde.snapshots.last().expect("solution has snapshots");
    for &n in &cfg.w1_n_list {
        let exact_n = n.min(crate::metrics::ASSIGNMENT_CAP);
        let subsampled = exact_n < n;
        let grid_cloud = sample_grid_cloud(f_final, exact_n);
        let grid_cloud_full = if subsampled {
            sample_grid_cloud(f_final, n)
        } else {
            grid_cloud.clone()
        };
        let pairs: Vec<(f64, f64)> = (0..cfg.w1_replicas.max(1))
            .into_par_iter()
            .map(|r| -> Result<(f64, f64), ExperimentError> {
                let noise = experiment_noise(cfg.seed, TAG_W1, r as u64);
                let initial = f0.sample(n, &noise)?;
                let icfg = IntegratorConfig::new(cfg.dt, *t_final, cfg.scheme)?;
                let state = simulate_particle_system(&initial, &spec, &icfg, &noise)?;
                let cloud: Vec<(f64, f64)> = state
                    .positions
                    .iter()
                    .zip(&state.velocities)
                    .map(|(&x, &v)| (x, v))
                    .collect();
                // Exact distance on a systematic subsample past the cap.
                let exact = if subsampled {
                    let sub: Vec<(f64, f64)> = (0..exact_n)
                        .map(|k| cloud[k * n / exact_n])
                        .collect();
                    w1_2d_exact(&sub, &grid_cloud)?
                } else {
                    w1_2d_exact(&cloud, &grid_cloud)?
                };
                let sliced = w1_2d_sliced(&cloud, &grid_cloud_full, 64, &noise)?;
                Ok((exact, sliced))
            })
            .collect::<Result<_, _>>()?;
        let exacts: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let (mean, std_err) = mean_and_se(&exacts);
        let mean_sliced = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
        let scale = (1.0 + n as f64).ln() / (n as f64).sqrt();
        rows.push(W1ProfileRow {
            t: *t_final,
            n,
            mean_w1: mean,
            std_err,
            mean_sliced,
            subsampled,
            ratio: mean / scale,
        });
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let spread = ratios.iter().cloned().fold(0.0f64, f64::max)
        / ratios.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-12);
    Ok(W1ProfileReport {
        rows,
        ratio_spread: spread,
    })
}

/// Exceedance of the running windowed sup-norm of copy positions against the
/// explicit deviation bound, driven by the reference fields.
pub fn infnorm_deviation_check(
    cfg: &LabConfig,
    pde: &PdeSolution,
) -> Result<TailCurve, ExperimentError> {
    let f0 = F0Spec::from_config(cfg);
    let ledger = compute_constants(
        f0.exp_moment_w(cfg.lambda),
        f0.exp_moment_xv(cfg.lambda),
        cfg.lambda,
        cfg.t,
        pde.kappa(),
    )?;
    let fields = FieldHistory::from_solution(pde);
    let icfg = IntegratorConfig::new(cfg.dt, cfg.t, cfg.scheme)?;
    let n = cfg.concentration_n;
    let stride = (icfg.steps() / 32).max(1);
    let paths: Vec<_> = (0..cfg.concentration_replicas.max(1))
        .into_par_iter()
        .map(|r| -> Result<_, ExperimentError> {
            let noise = experiment_noise(cfg.seed, TAG_INFNORM, r as u64);
            let initial = f0.sample(n, &noise)?;
            Ok(simulate_linear_sde_paths(
                &initial, &fields, &icfg, &noise, stride,
            )?)
        })
        .collect::<Result<_, _>>()?;
    let kappa = pde.kappa();
    let epsilon = 0.25;
    let gammas = [0.5 * kappa, kappa, 2.0 * kappa];
    Ok(sup_infnorm_deviation(
        &paths,
        epsilon,
        &gammas,
        kappa,
        cfg.lambda,
        ledger.c_lambda,
        ledger.d_t,
    )?)
}

/// Short-window increment deviation of copies against
/// `e^{-(beta/2) min(beta, lambda)}`.
pub fn increment_check(cfg: &LabConfig, beta: f64) -> Result<TailCurvePoint, ExperimentError> {
    let f0 = F0Spec::from_config(cfg);
    let window = (1.0f64 / 16.0).min(cfg.lambda.powi(-2));
    let steps = (window / cfg.dt).floor().max(1.0);
    let t_end = steps * cfg.dt;
    let icfg = IntegratorConfig::new(cfg.dt, t_end, cfg.scheme)?;
    let noise = experiment_noise(cfg.seed, TAG_INCREMENT, 0);
    let initial = f0.sample(cfg.moment_copies.clamp(2, 4096), &noise)?;
    let rec = simulate_linear_sde_paths(&initial, &FieldHistory::zero(), &icfg, &noise, 1)?;
    Ok(increment_deviation_check(
        &[rec],
        0.0,
        t_end,
        cfg.lambda,
        beta,
        f0.exp_moment_w(cfg.lambda),
    )?)
}

/// Kolmogorov-Smirnov distance of a sample against a reference CDF.
pub fn ks_distance(sample: &[f64], cdf: &dyn Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        worst = worst.max((i as f64 / n - f).abs());
        worst = worst.max(((i + 1) as f64 / n - f).abs());
    }
    worst
}

/// Force-free velocity marginal against the exact Gaussian transition law.
pub fn ou_marginal_ks(cfg: &LabConfig, draws: usize, v0: f64, t: f64) -> Result<f64, ExperimentError> {
    let noise = experiment_noise(cfg.seed, TAG_OU, 0);
    let initial = ParticleState::new(0.0, vec![0.0; draws], vec![v0; draws])?;
    let icfg = IntegratorConfig::new(cfg.dt.min(t), t, cfg.scheme)?;
    let rec = simulate_linear_sde_paths(&initial, &FieldHistory::zero(), &icfg, &noise, 0)?;
    let vs = rec.velocities.last().unwrap();
    let mean = v0 * (-t).exp();
    let sd = (1.0 - (-2.0 * t).exp()).sqrt();
    Ok(ks_distance(vs, &|x| std_normal_cdf((x - mean) / sd)))
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSuiteReport {
    pub checks: Vec<BoundCheck>,
    pub constants: ConstantsLedger,
    pub chaos: ChaosRateReport,
    pub concentration: ConcentrationReport,
    pub w1: W1ProfileReport,
    pub pass: bool,
    pub wall_ms: u128,
}

/// Run every invariant and bound assertion at the configured scale.
pub fn run_check_suite(cfg: &LabConfig) -> Result<CheckSuiteReport, ExperimentError> {
    let start = crate::output::now_ms();
    let mut checks: Vec<BoundCheck> = Vec::new();
    let f0 = F0Spec::from_config(cfg);
    let lambda = cfg.lambda;

    // Reference solve and its guarantees.
    let pde = solve_reference_pde(cfg)?;
    checks.push(BoundCheck::new(
        "pde_mass_drift_per_step",
        pde.mass_drift_max,
        1e-4,
        0.0,
    ));
    let boundary_max = pde
        .snapshots
        .iter()
        .map(|(_, f)| f.boundary_mass())
        .fold(0.0f64, f64::max);
    checks.push(BoundCheck::new(
        "pde_boundary_mass",
        boundary_max,
        cfg.boundary_tol,
        0.0,
    ));
    let f0_grid = f0.grid(cfg)?;
    let mut worst_norm_ratio = 0.0f64;
    let mut worst_rho_ratio = 0.0f64;
    for (t, f) in &pde.snapshots {
        let lhs = weighted_norm_e(f, lambda);
        let rhs = 2.0
            * (t + lambda + 0.5 * lambda * lambda).exp()
            * weighted_norm_e(&f0_grid, lambda * (-t).exp());
        worst_norm_ratio = worst_norm_ratio.max(lhs / rhs);
        let rho_bound = 4.0 / lambda
            * (t + 0.5 * lambda + 0.5 * lambda * lambda).exp()
            * weighted_norm_e(&f0_grid, lambda * (-t).exp());
        let rho_sup = crate::meanfield::rho_from_f(f).sup();
        worst_rho_ratio = worst_rho_ratio.max(rho_sup / rho_bound);
    }
    checks.push(BoundCheck::new(
        "fk_weighted_norm_ratio",
        worst_norm_ratio,
        1.0,
        0.0,
    ));
    checks.push(BoundCheck::new(
        "rho_sup_norm_ratio",
        worst_rho_ratio,
        1.0,
        0.0,
    ));

    // Exact velocity transition.
    let ks = ou_marginal_ks(cfg, 20_000.min(cfg.moment_copies.max(1000)), 0.7, cfg.t)?;
    checks.push(BoundCheck::new("ou_marginal_ks", ks, 0.01, 0.0));

    // Moment propagation.
    let fields = FieldHistory::from_solution(&pde);
    let moments = moment_propagation_check(cfg, &fields)?;
    checks.extend(moments.checks.iter().cloned());

    // Fluctuation statistics.
    checks.push(lambda_bound_check(cfg, cfg.lambda_check_n, cfg.lambda_check_replicas)?);
    checks.push(gamma_bound_check(cfg, cfg.gamma_check_n, cfg.gamma_check_replicas)?);

    let lam_curve = lambda_deviation_curve(
        cfg,
        cfg.lambda_check_n,
        cfg.lambda_check_replicas,
        &[0.25],
    )?;
    let p = &lam_curve.points[0];
    let slack = 3.0 * (p.bound.max(0.0) / lam_curve.replicas as f64).sqrt();
    let mut check = BoundCheck::new("lambda_deviation_curve", p.empirical, p.bound, slack);
    if p.vacuous {
        check = check.vacuous();
    }
    checks.push(check);

    // Binomial deviation with its bound.
    let noise = experiment_noise(cfg.seed, TAG_BINOMIAL, 0);
    let b = binomial_tail_check(200, 0.3, 0.1, cfg.binomial_replicas, &noise)?;
    let slack = 3.0 * (b.bound * (1.0 - b.bound).max(0.0) / cfg.binomial_replicas as f64)
        .sqrt()
        .max(1e-9);
    checks.push(BoundCheck::new(
        "binomial_tail",
        b.empirical,
        b.bound,
        slack,
    ));

    // Rope majorant sampling.
    let noise = experiment_noise(cfg.seed, TAG_ROPE, 0);
    let mut violations = 0usize;
    for k in 0..cfg.rope_samples {
        let g = |j: u64| 2.0 * noise.gaussian(StreamClass::InitialPosition, j, k as u64);
        if !rope_majorant_holds(g(0), g(1), g(2), g(3)) {
            violations += 1;
        }
    }
    checks.push(BoundCheck::new(
        "rope_majorant_violations",
        violations as f64,
        0.0,
        0.0,
    ));

    // Chaos rate sweep: per-N means against the stability bound.
    let chaos = chaos_rate_sweep(cfg, &pde)?;
    for row in &chaos.rows {
        checks.push(BoundCheck::new(
            &format!("chaos_mean_n{}", row.n),
            row.mean,
            row.bound,
            3.0 * row.std_err,
        ));
    }

    // Concentration tail curve (non-vacuous points only).
    let concentration = concentration_sweep(cfg, &pde)?;
    for p in &concentration.curve.points {
        let slack = 3.0
            * (p.bound.clamp(0.0, 1.0) / concentration.replicas as f64)
                .sqrt()
                .max(1e-9);
        let mut c = BoundCheck::new(
            &format!("concentration_eps_{:.4}", p.threshold),
            p.empirical,
            p.bound,
            slack,
        );
        if p.vacuous {
            c = c.vacuous();
        }
        checks.push(c);
    }

    // Windowed sup-norm deviation (Prop-style bound) and increments.
    let inf_curve = infnorm_deviation_check(cfg, &pde)?;
    for p in &inf_curve.points {
        let slack = 3.0 * (p.bound.clamp(0.0, 1.0) / inf_curve.replicas as f64).sqrt().max(1e-9);
        let mut c = BoundCheck::new(
            &format!("infnorm_gamma_{:.3}", p.threshold),
            p.empirical,
            p.bound,
            slack,
        );
        if p.vacuous {
            c = c.vacuous();
        }
        checks.push(c);
    }
    let inc = increment_check(cfg, 1.0)?;
    let slack = 3.0 * (inc.bound.clamp(0.0, 1.0) / cfg.moment_copies.clamp(2, 4096) as f64)
        .sqrt()
        .max(1e-9);
    let mut c = BoundCheck::new("increment_deviation", inc.empirical, inc.bound, slack);
    if inc.vacuous {
        c = c.vacuous();
    }
    checks.push(c);

    // Mollification stability.
    let cauchy = cauchy_eta_check(cfg, cfg.cauchy_eta, cfg.cauchy_eta_prime)?;
    checks.push(cauchy.check.clone());

    // Transport-distance profile: qualitative flatness of the ratio.
    let w1 = w1_profile_check(cfg, &pde)?;
    checks.push(BoundCheck::new("w1_ratio_spread", w1.ratio_spread, 4.0, 0.0));

    let constants = concentration.ledger.clone();
    checks.push(BoundCheck::new(
        "constants_a_t_dominates",
        if constants.a_t_dominates { 0.0 } else { 1.0 },
        0.0,
        0.0,
    ));

    let pass = checks.iter().all(|c| c.pass);
    Ok(CheckSuiteReport {
        checks,
        constants,
        chaos,
        concentration,
        w1,
        pass,
        wall_ms: crate::output::now_ms() - start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_ledger_examples() {
        // Deterministic W0 = 0 corresponds to E e^{lambda |W0|} = 1.
        let ledger = compute_constants(1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(ledger.c_lambda, 2.5);
        assert_eq!(ledger.b_t, 119.0);
        assert_eq!(ledger.c_t, 116.0);
        // D_t at t = 0: 10 + 1 + 1 = 12.
        assert_eq!(ledger.d_t, 12.0);
        assert!(ledger.a_t_dominates, "A_t'' must not exceed A_t");
        assert!(compute_constants(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(compute_constants(f64::NAN, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn constants_dominance_across_parameters() {
        for &lambda in &[0.25, 0.5, 1.0, 2.0] {
            for &t in &[0.1, 0.5, 1.0, 2.0] {
                for &kappa in &[0.1, 0.5, 1.0, 3.0] {
                    let mw = folded_gaussian_exp_moment(lambda, 1.0);
                    let mxv = mw * mw;
                    let ledger = compute_constants(mw, mxv, lambda, t, kappa).unwrap();
                    assert!(
                        ledger.a_t_dominates,
                        "A_t''={} > A_t={} at lambda={lambda}, t={t}, kappa={kappa}",
                        ledger.a_t_second,
                        ledger.a_t
                    );
                    assert!(ledger.b_t > 0.0 && ledger.b_t.is_finite());
                }
            }
        }
    }

    #[test]
    fn gaussian_moment_closed_forms() {
        let f0 = F0Spec {
            sigma_x: 1.0,
            sigma_v: 1.0,
        };
        // Monte Carlo agreement for E e^{|Z|}.
        let noise = NoiseStreamSpec::new(8, 0);
        let n = 200_000;
        let mut acc = 0.0;
        for k in 0..n {
            acc += (noise.gaussian(StreamClass::InitialVelocity, 0, k)).abs().exp();
        }
        let mc = acc / n as f64;
        assert!(
            (mc - f0.exp_moment_w(1.0)).abs() < 0.02,
            "mc {mc} vs closed form {}",
            f0.exp_moment_w(1.0)
        );
        assert!((f0.mean_abs_w() - 0.7978845608).abs() < 1e-9);
    }

    #[test]
    fn loglog_slope_recovers_exact_power_law() {
        let rows: Vec<ChaosRateRow> = [64usize, 128, 256, 512]
            .iter()
            .map(|&n| ChaosRateRow {
                n,
                replicas: 8,
                mean: 3.0 / (n as f64).sqrt(),
                std_err: 0.01 / (n as f64).sqrt(),
                bound: 1.0,
            })
            .collect();
        let slope = fit_loglog_slope(&rows).unwrap();
        assert!((slope + 0.5).abs() < 1e-9, "slope {slope}");
        // Control run: zero means leave the slope undefined.
        let zeros: Vec<ChaosRateRow> = rows
            .iter()
            .map(|r| ChaosRateRow { mean: 0.0, ..r.clone() })
            .collect();
        assert!(fit_loglog_slope(&zeros).is_none());
    }

    #[test]
    fn grid_cloud_is_mass_faithful() {
        let f = GridDensity::gaussian(-8.0, 8.0, -8.0, 8.0, 64, 64, 1.0, 1.0).unwrap();
        let cloud = sample_grid_cloud(&f, 512);
        assert_eq!(cloud.len(), 512);
        let mean_x: f64 = cloud.iter().map(|p| p.0).sum::<f64>() / 512.0;
        let mean_v: f64 = cloud.iter().map(|p| p.1).sum::<f64>() / 512.0;
        assert!(mean_x.abs() < 0.05, "cloud x mean {mean_x}");
        assert!(mean_v.abs() < 0.1, "cloud v mean {mean_v}");
        let var_x: f64 = cloud.iter().map(|p| p.0 * p.0).sum::<f64>() / 512.0;
        assert!((var_x - 1.0).abs() < 0.1, "cloud x variance {var_x}");
    }
}
