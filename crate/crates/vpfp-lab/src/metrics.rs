//! Distances and norms between empirical measures and densities:
//! Wasserstein-1 in one and two dimensions, the windowed sup-norm of an
//! atomic measure, and moment functionals.
//!
//! The 2D distance uses the l1 ground cost `|dx| + |dv|`, matching the
//! coordinate-sum discrepancies it is compared against; it is solved exactly
//! by a shortest-augmenting-path assignment. Distances depend on the ground
//! metric, so this choice is part of the contract.

use thiserror::Error;

use crate::dynamics::CoupledTrajectoryStats;
use crate::meanfield::Density1D;
use crate::rng::{NoiseStreamSpec, StreamClass};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("input sample must be non-empty")]
    EmptyInput,
    #[error("samples must have equal size, got {a} and {b}")]
    SizeMismatch { a: usize, b: usize },
    #[error("sample size {got} exceeds the exact-matching cap {cap}")]
    OverCap { got: usize, cap: usize },
    #[error("epsilon must be > 0, got {0}")]
    BadEpsilon(f64),
    #[error("lambda must be > 0, got {0}")]
    BadLambda(f64),
    #[error("n_projections must be >= 1")]
    NoProjections,
    #[error("density has non-positive total mass")]
    ZeroMass,
}

/// Exact-matching size cap; beyond it callers subsample and report the
/// sliced surrogate alongside.
pub const ASSIGNMENT_CAP: usize = 2048;

/// Exact Wasserstein-1 between two 1D samples (any sizes) via the quantile
/// coupling / CDF-difference integral.
pub fn w1_1d(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable_by(f64::total_cmp);
    sb.sort_unstable_by(f64::total_cmp);
    if sa.len() == sb.len() {
        let n = sa.len() as f64;
        return Ok(sa
            .iter()
            .zip(&sb)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / n);
    }
    // Unequal sizes: integrate |F_a - F_b| between consecutive breakpoints,
    // where both empirical CDFs are constant.
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut acc = 0.0;
    let mut z = f64::NEG_INFINITY;
    while ia < sa.len() || ib < sb.len() {
        let next = match (sa.get(ia), sb.get(ib)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        if z > f64::NEG_INFINITY && next > z {
            let fa = ia as f64 / na;
            let fb = ib as f64 / nb;
            acc += (fa - fb).abs() * (next - z);
        }
        while ia < sa.len() && sa[ia] <= next {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= next {
            ib += 1;
        }
        z = next;
    }
    Ok(acc)
}

/// Exact Wasserstein-1 between a 1D sample and a cell-averaged density:
/// piecewise integration of |empirical CDF - density CDF|, splitting each
/// linear piece at its sign change.
pub fn w1_1d_vs_density(sample: &[f64], rho: &Density1D) -> Result<f64, MetricsError> {
    if sample.is_empty() || rho.values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let total = rho.mass();
    if !(total > 0.0) {
        return Err(MetricsError::ZeroMass);
    }
    let mut pts = sample.to_vec();
    pts.sort_unstable_by(f64::total_cmp);
    let n = pts.len() as f64;

    let ncells = rho.values.len();
    let mut cum = vec![0.0; ncells + 1];
    for i in 0..ncells {
        cum[i + 1] = cum[i] + rho.values[i].max(0.0) * rho.dx / total;
    }
    let grid_lo = rho.x_min;
    let grid_hi = rho.x_min + ncells as f64 * rho.dx;
    let rho_cdf = |x: f64| -> f64 {
        if x <= grid_lo {
            0.0
        } else if x >= grid_hi {
            1.0
        } else {
            let f = (x - grid_lo) / rho.dx;
            let i = (f.floor() as usize).min(ncells - 1);
            cum[i] + (f - i as f64) * (cum[i + 1] - cum[i])
        }
    };

    // Breakpoints: all cell edges and all sample points.
    let mut brk: Vec<f64> = (0..=ncells).map(|i| grid_lo + i as f64 * rho.dx).collect();
    brk.extend_from_slice(&pts);
    brk.sort_unstable_by(f64::total_cmp);
    brk.dedup();

    let mut acc = 0.0;
    let mut idx = 0usize; // samples strictly consumed so far
    for w in brk.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        while idx < pts.len() && pts[idx] <= lo {
            idx += 1;
        }
        let fa = idx as f64 / n;
        let ha = rho_cdf(lo) - fa;
        let hb = rho_cdf(hi) - fa;
        let len = hi - lo;
        if ha * hb >= 0.0 {
            acc += 0.5 * (ha.abs() + hb.abs()) * len;
        } else {
            let root = len * ha.abs() / (ha.abs() + hb.abs());
            acc += 0.5 * (ha.abs() * root + hb.abs() * (len - root));
        }
    }
    Ok(acc)
}

fn validate_cloud(points: &[(f64, f64)]) -> Result<(), MetricsError> {
    if points.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

/// Exact Wasserstein-1 on the plane with ground cost `|dx| + |dv|`:
/// minimum-cost perfect matching divided by n, solved by the shortest
/// augmenting path (Jonker-Volgenant) algorithm in `O(n^3)`.
pub fn w1_2d_exact(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64, MetricsError> {
    validate_cloud(a)?;
    validate_cloud(b)?;
    if a.len() != b.len() {
        return Err(MetricsError::SizeMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.len() > ASSIGNMENT_CAP {
        return Err(MetricsError::OverCap {
            got: a.len(),
            cap: ASSIGNMENT_CAP,
        });
    }
    let n = a.len();
    let cost = |i: usize, j: usize| -> f64 {
        (a[i].0 - b[j].0).abs() + (a[i].1 - b[j].1).abs()
    };
    let mut matrix = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            matrix[i * n + j] = cost(i, j);
        }
    }

    // Potentials-based Hungarian with 1-based sentinel column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut assigned_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = matrix[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=n {
        total += matrix[(assigned_row[j] - 1) * n + (j - 1)];
    }
    Ok(total / n as f64)
}

/// Sliced surrogate: average over random directions of the 1D distance of
/// the projected samples. Each projected distance is a lower bound for the
/// l1-cost exact distance, so the average never exceeds it.
pub fn w1_2d_sliced(
    a: &[(f64, f64)],
    b: &[(f64, f64)],
    n_projections: usize,
    noise: &NoiseStreamSpec,
) -> Result<f64, MetricsError> {
    validate_cloud(a)?;
    validate_cloud(b)?;
    if n_projections == 0 {
        return Err(MetricsError::NoProjections);
    }
    let mut acc = 0.0;
    let mut pa = Vec::with_capacity(a.len());
    let mut pb = Vec::with_capacity(b.len());
    for k in 0..n_projections {
        let theta = std::f64::consts::PI * noise.uniform(StreamClass::Projection, k as u64, 0);
        let (c, s) = (theta.cos(), theta.sin());
        pa.clear();
        pa.extend(a.iter().map(|&(x, v)| c * x + s * v));
        pb.clear();
        pb.extend(b.iter().map(|&(x, v)| c * x + s * v));
        acc += w1_1d(&pa, &pb)?;
    }
    Ok(acc / n_projections as f64)
}

/// Axis-aligned single projection used by tests: direction `(1, 0)`.
pub fn w1_2d_projected_x(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64, MetricsError> {
    let pa: Vec<f64> = a.iter().map(|p| p.0).collect();
    let pb: Vec<f64> = b.iter().map(|p| p.0).collect();
    w1_1d(&pa, &pb)
}

/// Windowed sup-norm of an atomic measure:
/// `sup_x #{points in [x - eps, x + eps]} / (2 N eps)`.
///
/// The sup is attained with the window's left edge at a sample point, so a
/// sorted two-pointer sweep is exact, ties included.
pub fn discrete_inf_norm(sample: &[f64], epsilon: f64) -> Result<f64, MetricsError> {
    if sample.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(epsilon > 0.0) {
        return Err(MetricsError::BadEpsilon(epsilon));
    }
    let mut s = sample.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len();
    let width = 2.0 * epsilon;
    let mut best = 0usize;
    let mut hi = 0usize;
    for lo in 0..n {
        if hi < lo {
            hi = lo;
        }
        while hi < n && s[hi] <= s[lo] + width {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    Ok(best as f64 / (2.0 * n as f64 * epsilon))
}

/// `(1/N) sum_i (sup_dx_i + sup_dv_i)` of one coupled run.
pub fn coupling_discrepancy(stats: &CoupledTrajectoryStats) -> f64 {
    let n = stats.sup_dx.len();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = stats
        .sup_dx
        .iter()
        .zip(&stats.sup_dv)
        .map(|(a, b)| a + b)
        .sum();
    total / n as f64
}

/// Empirical exponential moment `(1/N) sum e^{lambda |x_i|}`.
pub fn exp_moment(sample: &[f64], lambda: f64) -> Result<f64, MetricsError> {
    if sample.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(lambda > 0.0) {
        return Err(MetricsError::BadLambda(lambda));
    }
    Ok(sample.iter().map(|x| (lambda * x.abs()).exp()).sum::<f64>() / sample.len() as f64)
}

/// Log of the empirical exponential moment computed by log-sum-exp; use when
/// the direct accumulation would overflow.
pub fn exp_moment_log(sample: &[f64], lambda: f64) -> Result<f64, MetricsError> {
    if sample.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(lambda > 0.0) {
        return Err(MetricsError::BadLambda(lambda));
    }
    let m = sample
        .iter()
        .map(|x| lambda * x.abs())
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = sample.iter().map(|x| (lambda * x.abs() - m).exp()).sum();
    Ok(m + sum.ln() - (sample.len() as f64).ln())
}
