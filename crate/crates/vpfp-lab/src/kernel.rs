//! The singular sign interaction kernel, its compactly supported
//! mollification, and fast empirical mean-field forces.
//!
//! The exact kernel is `K(x) = ±(1/2) sgn(x)` with `sgn(0) = 0`; the sign
//! selects repulsion or attraction. The mollified kernel `K_eta = K * chi_eta`
//! uses the quartic bump `chi(y) = (15/16)(1 - y^2)^2` on `[-1, 1]`, which has
//! unit mass and a closed-form convolution against the sign function, so no
//! quadrature is needed at runtime.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("position array must be non-empty")]
    EmptyInput,
    #[error("output buffer length {out} does not match input length {input}")]
    LengthMismatch { input: usize, out: usize },
    #[error("mollification width must be > 0, got {0}")]
    NonPositiveEta(f64),
    #[error("operation requires the exact kernel (eta = 0), got eta = {0}")]
    RequiresExactKernel(f64),
}

/// Orientation of the interaction: repulsive maps to `+1`, attractive to `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum InteractionSign {
    Repulsive,
    Attractive,
}

impl InteractionSign {
    pub fn as_f64(self) -> f64 {
        match self {
            InteractionSign::Repulsive => 1.0,
            InteractionSign::Attractive => -1.0,
        }
    }
}

impl std::str::FromStr for InteractionSign {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "repulsive" => Ok(InteractionSign::Repulsive),
            "attractive" => Ok(InteractionSign::Attractive),
            other => Err(format!(
                "unknown kernel sign `{other}` (expected `repulsive` or `attractive`)"
            )),
        }
    }
}

impl std::fmt::Display for InteractionSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InteractionSign::Repulsive => write!(f, "repulsive"),
            InteractionSign::Attractive => write!(f, "attractive"),
        }
    }
}

/// Interaction sign plus mollification width; `eta = 0` selects the exact
/// kernel. Kernel values always lie in `[-1/2, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub sign: InteractionSign,
    pub eta: f64,
}

impl KernelSpec {
    pub fn exact(sign: InteractionSign) -> Self {
        KernelSpec { sign, eta: 0.0 }
    }

    pub fn mollified(sign: InteractionSign, eta: f64) -> Result<Self, KernelError> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(KernelError::NonPositiveEta(eta));
        }
        Ok(KernelSpec { sign, eta })
    }

    pub fn is_exact(&self) -> bool {
        self.eta == 0.0
    }

    /// Kernel value at `x`, dispatching on the mollification width.
    pub fn eval(&self, x: f64) -> f64 {
        if self.is_exact() {
            k_eval(self, x)
        } else {
            mollified_sign_kernel(x / self.eta) * self.sign.as_f64()
        }
    }
}

/// Exact kernel `sign * (1/2) sgn(x)` with `sgn(0) = 0`.
///
/// Note `f64::signum` maps `±0.0` to `±1.0`, so the zero case is explicit.
pub fn k_eval(spec: &KernelSpec, x: f64) -> f64 {
    let half_sgn = if x > 0.0 {
        0.5
    } else if x < 0.0 {
        -0.5
    } else {
        0.0
    };
    spec.sign.as_f64() * half_sgn
}

/// `(K * chi_eta)(x)` for the repulsive unit kernel, as a function of
/// `u = x / eta`.
///
/// With `X` the CDF of the bump, `K * chi_eta = X(x/eta) - 1/2`, an odd quintic
/// on `[-1, 1]` that saturates at `±1/2` outside.
fn mollified_sign_kernel(u: f64) -> f64 {
    if u >= 1.0 {
        return 0.5;
    }
    if u <= -1.0 {
        return -0.5;
    }
    let u2 = u * u;
    // The quintic touches ±1/2 with zero slope at u = ±1; clamp away the
    // last-ulp overshoot so the kernel bound is exact.
    ((15.0 / 16.0) * u * (1.0 - u2 * (2.0 / 3.0 - u2 / 5.0))).clamp(-0.5, 0.5)
}

/// Mollified kernel `K_eta(x) = (K * chi_eta)(x)`; rejects `eta <= 0`.
///
/// Equals the exact kernel for `|x| > eta` and differs from it by at most 1 on
/// `[-eta, eta]`.
pub fn k_eta_eval(spec: &KernelSpec, x: f64) -> Result<f64, KernelError> {
    if !(spec.eta > 0.0) {
        return Err(KernelError::NonPositiveEta(spec.eta));
    }
    Ok(spec.sign.as_f64() * mollified_sign_kernel(x / spec.eta))
}

/// Empirical mean-field force `F_i = (1/N) sum_j K(x_i - x_j)` for the exact
/// kernel, computed in `O(N log N)` by sorting.
///
/// With `s = ±1` the force equals `s (below_i - above_i) / (2N)` where
/// `below_i` / `above_i` count strictly smaller / larger positions; ties
/// (including `j = i`) contribute 0, matching `sgn(0) = 0`. Results are
/// written into the caller-provided buffer and agree bit-for-bit with
/// [`mean_force_brute`].
pub fn mean_force_ranks(
    spec: &KernelSpec,
    positions: &[f64],
    out: &mut [f64],
) -> Result<(), KernelError> {
    if !spec.is_exact() {
        return Err(KernelError::RequiresExactKernel(spec.eta));
    }
    let n = positions.len();
    if n == 0 {
        return Err(KernelError::EmptyInput);
    }
    if out.len() != n {
        return Err(KernelError::LengthMismatch {
            input: n,
            out: out.len(),
        });
    }

    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&a, &b| positions[a as usize].total_cmp(&positions[b as usize]));

    let s = spec.sign.as_f64();
    let two_n = 2.0 * n as f64;
    let mut lo = 0usize;
    while lo < n {
        let x = positions[order[lo] as usize];
        let mut hi = lo + 1;
        while hi < n && positions[order[hi] as usize] == x {
            hi += 1;
        }
        // Duplicate block [lo, hi): every member sees the same counts.
        let force = s * (lo as f64 - (n - hi) as f64) / two_n;
        for &idx in &order[lo..hi] {
            out[idx as usize] = force;
        }
        lo = hi;
    }
    Ok(())
}

/// Allocating convenience wrapper around [`mean_force_ranks`].
pub fn mean_force_ranks_vec(spec: &KernelSpec, positions: &[f64]) -> Result<Vec<f64>, KernelError> {
    let mut out = vec![0.0; positions.len()];
    mean_force_ranks(spec, positions, &mut out)?;
    Ok(out)
}

/// Direct `O(N^2)` double sum `F_i = (1/N) sum_j K(x_i - x_j)`.
///
/// Validates [`mean_force_ranks`] and serves the mollified kernel, where no
/// rank shortcut exists.
pub fn mean_force_brute(
    spec: &KernelSpec,
    positions: &[f64],
    out: &mut [f64],
) -> Result<(), KernelError> {
    let n = positions.len();
    if n == 0 {
        return Err(KernelError::EmptyInput);
    }
    if out.len() != n {
        return Err(KernelError::LengthMismatch {
            input: n,
            out: out.len(),
        });
    }
    let n_f = n as f64;
    for (i, o) in out.iter_mut().enumerate() {
        let xi = positions[i];
        let mut sum = 0.0;
        for &xj in positions {
            sum += spec.eval(xi - xj);
        }
        *o = sum / n_f;
    }
    Ok(())
}

/// Checks the rope majorant for the exact kernel:
/// `|K(x - xbar) - K(y - ybar)| <= 1_{|y-ybar| <= 2|x-y|} + 1_{|y-ybar| <= 2|xbar-ybar|}`.
///
/// Test helper; must return `true` for every quadruple.
pub fn rope_majorant_holds(x: f64, xbar: f64, y: f64, ybar: f64) -> bool {
    let spec = KernelSpec::exact(InteractionSign::Repulsive);
    let lhs = (k_eval(&spec, x - xbar) - k_eval(&spec, y - ybar)).abs();
    let d = (y - ybar).abs();
    let mut rhs = 0.0;
    if d <= 2.0 * (x - y).abs() {
        rhs += 1.0;
    }
    if d <= 2.0 * (xbar - ybar).abs() {
        rhs += 1.0;
    }
    lhs <= rhs
}
