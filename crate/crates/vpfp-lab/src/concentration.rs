//! Fluctuation statistics of mean-field copies against their reference law,
//! and empirical exceedance curves paired with the explicit deviation bounds.
//!
//! Bounds larger than 1 say nothing about a probability; such points are
//! flagged vacuous and excluded from pass/fail decisions.

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::PathRecord;
use crate::kernel::KernelSpec;
use crate::meanfield::FieldTable;
use crate::metrics::discrete_inf_norm;
use crate::rng::{NoiseStreamSpec, StreamClass};

#[derive(Debug, Error, PartialEq)]
pub enum ConcentrationError {
    #[error("statistic requires at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("probability parameter must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("alpha must be > 0, got {0}")]
    BadAlpha(f64),
    #[error("kernel must be exact (eta = 0) for the rank computation")]
    MollifiedKernel,
    #[error("no stored snapshots in the trajectory record")]
    NoSnapshots,
    #[error(
        "window [{s}, {t}] too long for the hypothesis: t - s must be in (0, {max}]"
    )]
    WindowTooLong { s: f64, t: f64, max: f64 },
    #[error("window endpoints must satisfy s < t within the stored horizon")]
    BadWindow,
}

/// One exceedance point: empirical frequency over the replicas against the
/// companion theoretical bound.
#[derive(Debug, Clone, Serialize)]
pub struct TailCurvePoint {
    pub threshold: f64,
    pub empirical: f64,
    pub bound: f64,
    pub vacuous: bool,
}

impl TailCurvePoint {
    pub fn new(threshold: f64, empirical: f64, bound: f64) -> Self {
        TailCurvePoint {
            threshold,
            empirical,
            bound,
            vacuous: bound > 1.0,
        }
    }

    /// Pass when vacuous or when the empirical frequency is within three
    /// binomial standard errors of the bound.
    pub fn holds(&self, replicas: usize) -> bool {
        if self.vacuous {
            return true;
        }
        let se = (self.bound.clamp(0.0, 1.0) * (1.0 - self.bound.clamp(0.0, 1.0)).max(0.0)
            / replicas.max(1) as f64)
            .sqrt()
            .max((self.bound / replicas.max(1) as f64).sqrt());
        self.empirical <= self.bound + 3.0 * se
    }
}

/// Empirical exceedance probabilities of a statistic over replicas, with
/// theoretical-bound companions where available.
#[derive(Debug, Clone, Serialize)]
pub struct TailCurve {
    pub points: Vec<TailCurvePoint>,
    pub replicas: usize,
}

impl TailCurve {
    /// Non-vacuous points all hold with three-standard-error slack.
    pub fn holds(&self) -> bool {
        self.points.iter().all(|p| p.holds(self.replicas))
    }

    /// CSV body with header `threshold,empirical,bound,vacuous`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,empirical,bound,vacuous\r\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\r\n",
                p.threshold, p.empirical, p.bound, p.vacuous as u8
            ));
        }
        out
    }
}

/// Mean leave-one-out force fluctuation of a sample against its reference
/// field: `(1/N) sum_i |(1/(N-1)) sum_{j != i} K(Y_i - Y_j) - F(Y_i)|`.
///
/// The inner sums use the rank shortcut; the self term vanishes since
/// `K(0) = 0`, so only the `1/(N-1)` normalization distinguishes the
/// leave-one-out average from the full one.
pub fn lambda_fluctuation(
    positions: &[f64],
    spec: &KernelSpec,
    field: &FieldTable,
) -> Result<f64, ConcentrationError> {
    if !spec.is_exact() {
        return Err(ConcentrationError::MollifiedKernel);
    }
    let n = positions.len();
    if n < 2 {
        return Err(ConcentrationError::TooFewPoints(n));
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&a, &b| positions[a as usize].total_cmp(&positions[b as usize]));
    let s = spec.sign.as_f64();
    let denom = 2.0 * (n - 1) as f64;
    // Per-point deviations land in original index order so the accumulation
    // matches the double-sum reference bit for bit.
    let mut dev = vec![0.0; n];
    let mut lo = 0usize;
    while lo < n {
        let x = positions[order[lo] as usize];
        let mut hi = lo + 1;
        while hi < n && positions[order[hi] as usize] == x {
            hi += 1;
        }
        let inner = s * (lo as f64 - (n - hi) as f64) / denom;
        let d = (inner - field.eval(x)).abs();
        for &idx in &order[lo..hi] {
            dev[idx as usize] = d;
        }
        lo = hi;
    }
    Ok(dev.iter().sum::<f64>() / n as f64)
}

/// `O(N^2)` reference implementation of [`lambda_fluctuation`]; the two agree
/// exactly.
pub fn lambda_fluctuation_brute(
    positions: &[f64],
    spec: &KernelSpec,
    field: &FieldTable,
) -> Result<f64, ConcentrationError> {
    if !spec.is_exact() {
        return Err(ConcentrationError::MollifiedKernel);
    }
    let n = positions.len();
    if n < 2 {
        return Err(ConcentrationError::TooFewPoints(n));
    }
    let mut acc = 0.0;
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if j != i {
                sum += crate::kernel::k_eval(spec, positions[i] - positions[j]);
            }
        }
        acc += (sum / (n - 1) as f64 - field.eval(positions[i])).abs();
    }
    Ok(acc / n as f64)
}

/// Per-point window fluctuations
/// `sup_{u >= 0} |(1/(N-1)) #{j != i : |Y_i - Y_j| <= u} - rho([Y_i-u, Y_i+u])|`.
///
/// The reference window is closed on both ends:
/// `rho([a, b]) = CDF(b) - CDF(a^-)`, with the left limit taken one ulp below
/// so a right-continuous step CDF contributes its atoms. The sup is exact —
/// candidates are the sorted pair distances approached from both sides.
pub fn gamma_fluctuation_terms(
    positions: &[f64],
    reference_cdf: &dyn Fn(f64) -> f64,
) -> Result<Vec<f64>, ConcentrationError> {
    let n = positions.len();
    if n < 2 {
        return Err(ConcentrationError::TooFewPoints(n));
    }
    let m = (n - 1) as f64;
    let mut terms = Vec::with_capacity(n);
    let mut dist = Vec::with_capacity(n - 1);
    for i in 0..n {
        dist.clear();
        for j in 0..n {
            if j != i {
                dist.push((positions[i] - positions[j]).abs());
            }
        }
        dist.sort_unstable_by(f64::total_cmp);
        let y = positions[i];
        let mut sup = 0.0f64;
        let mut lo = 0usize;
        while lo < dist.len() {
            let d = dist[lo];
            let mut hi = lo + 1;
            while hi < dist.len() && dist[hi] == d {
                hi += 1;
            }
            let closed = reference_cdf(y + d) - reference_cdf((y - d).next_down());
            sup = sup.max((hi as f64 / m - closed).abs());
            if d > 0.0 {
                // Left limit of both sides: open window against the open count.
                let open = reference_cdf((y + d).next_down()) - reference_cdf(y - d);
                sup = sup.max((lo as f64 / m - open).abs());
            }
            lo = hi;
        }
        terms.push(sup);
    }
    Ok(terms)
}

/// Full fluctuation statistic `(2/N) sum_i` of the per-point sups.
pub fn gamma_fluctuation(
    positions: &[f64],
    reference_cdf: &dyn Fn(f64) -> f64,
) -> Result<f64, ConcentrationError> {
    let terms = gamma_fluctuation_terms(positions, reference_cdf)?;
    Ok(2.0 * terms.iter().sum::<f64>() / positions.len() as f64)
}

/// Empirical frequency of `|X - np| >= n alpha` for binomial draws, paired
/// with the Hoeffding-type bound `2 e^{-2 alpha^2 n}`.
pub fn binomial_tail_check(
    n: u64,
    p: f64,
    alpha: f64,
    replicas: usize,
    noise: &NoiseStreamSpec,
) -> Result<TailCurvePoint, ConcentrationError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ConcentrationError::BadProbability(p));
    }
    if !(alpha > 0.0) {
        return Err(ConcentrationError::BadAlpha(alpha));
    }
    let cut = alpha * n as f64;
    let np = p * n as f64;
    let mut exceed = 0usize;
    for r in 0..replicas {
        let mut x = 0u64;
        for k in 0..n {
            if noise.uniform(StreamClass::BernoulliUniform, r as u64, k) < p {
                x += 1;
            }
        }
        if (x as f64 - np).abs() >= cut {
            exceed += 1;
        }
    }
    let bound = 2.0 * (-2.0 * alpha * alpha * n as f64).exp();
    Ok(TailCurvePoint::new(
        alpha,
        exceed as f64 / replicas.max(1) as f64,
        bound,
    ))
}

/// Exceedance of the running-in-time windowed sup-norm over i.i.d.-copy
/// trajectories: frequency of
/// `sup_s ||rho^N_s||_{inf,eps} >= kappa_t + gamma` per gamma, against
/// `C_t (1 + t (2 kappa_t + gamma)/lambda (c_lambda + sqrt(N) eps gamma)) N^{3/2} e^{-2 N (eps gamma)^2}`.
#[allow(clippy::too_many_arguments)]
pub fn sup_infnorm_deviation(
    trajectories: &[PathRecord],
    epsilon: f64,
    gammas: &[f64],
    kappa_t: f64,
    lambda: f64,
    c_lambda: f64,
    big_c_t: f64,
) -> Result<TailCurve, ConcentrationError> {
    if trajectories.is_empty() || trajectories.iter().any(|p| p.times.is_empty()) {
        return Err(ConcentrationError::NoSnapshots);
    }
    if !(epsilon > 0.0) {
        return Err(ConcentrationError::BadAlpha(epsilon));
    }
    let n = trajectories[0].positions[0].len() as f64;
    let t = trajectories[0].times.last().unwrap() - trajectories[0].times[0];
    let sups: Vec<f64> = trajectories
        .iter()
        .map(|rec| {
            rec.positions
                .iter()
                .map(|pos| discrete_inf_norm(pos, epsilon).unwrap_or(0.0))
                .fold(0.0f64, f64::max)
        })
        .collect();
    let replicas = sups.len();
    let points = gammas
        .iter()
        .map(|&gamma| {
            let exceed = sups.iter().filter(|&&s| s >= kappa_t + gamma).count();
            let eg = epsilon * gamma;
            let bound = big_c_t
                * (1.0 + t * (2.0 * kappa_t + gamma) / lambda * (c_lambda + n.sqrt() * eg))
                * n.powf(1.5)
                * (-2.0 * n * eg * eg).exp();
            TailCurvePoint::new(gamma, exceed as f64 / replicas as f64, bound)
        })
        .collect();
    Ok(TailCurve { points, replicas })
}

/// Exceedance of the short-window position increment over independent copies:
/// frequency of `sup_{u in [s,t]} |Y_u - Y_s| >= (t-s)(c_lambda + beta)`
/// against `e^{-(beta/2) min(beta, lambda)}`, with
/// `c_lambda = 5/2 + (1/lambda) ln E e^{lambda |W_0|}`.
pub fn increment_deviation_check(
    trajectories: &[PathRecord],
    s: f64,
    t: f64,
    lambda: f64,
    beta: f64,
    exp_moment_w0: f64,
) -> Result<TailCurvePoint, ConcentrationError> {
    if trajectories.is_empty() {
        return Err(ConcentrationError::NoSnapshots);
    }
    if !(s < t) {
        return Err(ConcentrationError::BadWindow);
    }
    let max = (1.0f64 / 16.0).min(lambda.powi(-2));
    if t - s > max + 1e-12 {
        return Err(ConcentrationError::WindowTooLong { s, t, max });
    }
    let c_lambda = 2.5 + exp_moment_w0.ln() / lambda;
    let cut = (t - s) * (c_lambda + beta);
    let mut exceed = 0usize;
    let mut copies = 0usize;
    for rec in trajectories {
        let base_idx = rec
            .times
            .iter()
            .position(|&u| u >= s - 1e-12)
            .ok_or(ConcentrationError::BadWindow)?;
        let n = rec.positions[base_idx].len();
        let base = &rec.positions[base_idx];
        let mut sup = vec![0.0f64; n];
        for (k, &u) in rec.times.iter().enumerate().skip(base_idx) {
            if u > t + 1e-12 {
                break;
            }
            for i in 0..n {
                sup[i] = sup[i].max((rec.positions[k][i] - base[i]).abs());
            }
        }
        copies += n;
        exceed += sup.iter().filter(|&&v| v >= cut).count();
    }
    let bound = (-0.5 * beta * beta.min(lambda)).exp();
    Ok(TailCurvePoint::new(
        beta,
        exceed as f64 / copies.max(1) as f64,
        bound,
    ))
}
