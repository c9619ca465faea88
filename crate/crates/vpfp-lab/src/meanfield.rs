//! Phase-space grid solver for the kinetic Fokker-Planck dynamics with the
//! sign-kernel force, plus the weighted norms and a Monte Carlo backward-path
//! density estimator.
//!
//! The density `f(x, v)` lives on a rectangular grid of cell averages. One
//! step is a Strang composition: half transport in `x`, a friction-diffusion
//! update in `v` with the self-consistent force frozen for the step, half
//! transport in `x`. The `v`-update is a Crank-Nicolson solve of the
//! conservative flux form `d_t f = d_v((v - F) f) + d_vv f` per `x` column:
//! zero-flux boundaries make it conserve mass to rounding, it is
//! unconditionally stable, and its consistency error scales with the step, so
//! refining the step never amplifies the spatial bias. Negatives from
//! interpolation are clipped once per step and the total mass renormalized; a
//! boundary monitor aborts when mass reaches the domain edge.

use serde::Serialize;
use thiserror::Error;

use crate::kernel::{InteractionSign, KernelSpec};
use crate::rng::{NoiseStreamSpec, StreamClass};

#[derive(Debug, Error)]
pub enum MeanfieldError {
    #[error("grid dimensions must be >= 4 cells per axis, got {nx} x {nv}")]
    GridTooSmall { nx: usize, nv: usize },
    #[error("domain bounds must be finite with min < max")]
    BadBounds,
    #[error("values length {got} does not match nx*nv = {expected}")]
    ValuesLength { got: usize, expected: usize },
    #[error("density has negative mass cell at index {index}: {value}")]
    NegativeMass { index: usize, value: f64 },
    #[error("density is empty (zero total mass)")]
    ZeroMass,
    #[error("time step must satisfy 0 < dt <= {max}, got {got}")]
    BadTimeStep { got: f64, max: f64 },
    #[error(
        "boundary mass {mass:.3e} exceeds tolerance {tol:.3e} at t = {t}: domain too small"
    )]
    BoundaryMassBreach { mass: f64, tol: f64, t: f64 },
    #[error("field table is empty")]
    EmptyField,
    #[error("field history covers [0, {covered}], requested time {requested}")]
    HorizonExceeded { covered: f64, requested: f64 },
    #[error("sample count must be >= 1")]
    NoSamples,
}

/// Largest admissible solver step; splitting accuracy degrades beyond it.
pub const MAX_PDE_DT: f64 = 0.1;

/// Discretized phase-space density: cell-averaged values on a uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct GridDensity {
    pub x_min: f64,
    pub x_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub nx: usize,
    pub nv: usize,
    pub dx: f64,
    pub dv: f64,
    /// Row-major values, index `ix * nv + iv`.
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(
        x_min: f64,
        x_max: f64,
        v_min: f64,
        v_max: f64,
        nx: usize,
        nv: usize,
        values: Vec<f64>,
    ) -> Result<Self, MeanfieldError> {
        if nx < 4 || nv < 4 {
            return Err(MeanfieldError::GridTooSmall { nx, nv });
        }
        if !(x_min < x_max && v_min < v_max)
            || !x_min.is_finite()
            || !x_max.is_finite()
            || !v_min.is_finite()
            || !v_max.is_finite()
        {
            return Err(MeanfieldError::BadBounds);
        }
        if values.len() != nx * nv {
            return Err(MeanfieldError::ValuesLength {
                got: values.len(),
                expected: nx * nv,
            });
        }
        let dx = (x_max - x_min) / nx as f64;
        let dv = (v_max - v_min) / nv as f64;
        Ok(GridDensity {
            x_min,
            x_max,
            v_min,
            v_max,
            nx,
            nv,
            dx,
            dv,
            values,
        })
    }

    pub fn zeros(
        x_min: f64,
        x_max: f64,
        v_min: f64,
        v_max: f64,
        nx: usize,
        nv: usize,
    ) -> Result<Self, MeanfieldError> {
        GridDensity::new(x_min, x_max, v_min, v_max, nx, nv, vec![0.0; nx * nv])
    }

    /// Centered product Gaussian, cell-center sampled and renormalized to
    /// unit mass.
    #[allow(clippy::too_many_arguments)]
    pub fn gaussian(
        x_min: f64,
        x_max: f64,
        v_min: f64,
        v_max: f64,
        nx: usize,
        nv: usize,
        sigma_x: f64,
        sigma_v: f64,
    ) -> Result<Self, MeanfieldError> {
        let mut g = GridDensity::zeros(x_min, x_max, v_min, v_max, nx, nv)?;
        for ix in 0..nx {
            let x = g.x_center(ix);
            let gx = (-0.5 * (x / sigma_x) * (x / sigma_x)).exp();
            for iv in 0..nv {
                let v = g.v_center(iv);
                let gv = (-0.5 * (v / sigma_v) * (v / sigma_v)).exp();
                g.values[ix * nv + iv] = gx * gv;
            }
        }
        g.renormalize();
        Ok(g)
    }

    #[inline]
    pub fn x_center(&self, ix: usize) -> f64 {
        self.x_min + (ix as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn v_center(&self, iv: usize) -> f64 {
        self.v_min + (iv as f64 + 0.5) * self.dv
    }

    #[inline]
    pub fn at(&self, ix: usize, iv: usize) -> f64 {
        self.values[ix * self.nv + iv]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx * self.dv
    }

    /// Mass sitting in the outermost two cells of either axis.
    pub fn boundary_mass(&self) -> f64 {
        let mut m = 0.0;
        for ix in 0..self.nx {
            for iv in 0..self.nv {
                if ix < 2 || ix >= self.nx - 2 || iv < 2 || iv >= self.nv - 2 {
                    m += self.values[ix * self.nv + iv];
                }
            }
        }
        m * self.dx * self.dv
    }

    /// Scale so the total mass is exactly 1.
    pub fn renormalize(&mut self) {
        let m = self.mass();
        if m > 0.0 {
            let inv = 1.0 / m;
            for v in &mut self.values {
                *v *= inv;
            }
        }
    }

    /// Bilinear interpolation between cell centers, clamped at the edges.
    pub fn bilinear(&self, x: f64, v: f64) -> f64 {
        let fx = ((x - self.x_min) / self.dx - 0.5).clamp(0.0, (self.nx - 1) as f64);
        let fv = ((v - self.v_min) / self.dv - 0.5).clamp(0.0, (self.nv - 1) as f64);
        let ix = (fx.floor() as usize).min(self.nx - 2);
        let iv = (fv.floor() as usize).min(self.nv - 2);
        let tx = fx - ix as f64;
        let tv = fv - iv as f64;
        let f00 = self.at(ix, iv);
        let f01 = self.at(ix, iv + 1);
        let f10 = self.at(ix + 1, iv);
        let f11 = self.at(ix + 1, iv + 1);
        (1.0 - tx) * ((1.0 - tv) * f00 + tv * f01) + tx * ((1.0 - tv) * f10 + tv * f11)
    }
}

/// 1D density on the `x` grid (cell averages), e.g. the spatial marginal.
#[derive(Debug, Clone)]
pub struct Density1D {
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl Density1D {
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }
}

/// Spatial marginal `rho_j = sum_k f_{j,k} dv`.
pub fn rho_from_f(f: &GridDensity) -> Density1D {
    let values: Vec<f64> = f
        .values
        .chunks_exact(f.nv)
        .map(|row| row.iter().sum::<f64>() * f.dv)
        .collect();
    Density1D {
        x_min: f.x_min,
        dx: f.dx,
        values,
    }
}

/// Tabulated force field `F(x)`: linear interpolation between nodes, clamped
/// to the end values outside the grid. All values lie in `[-1/2, 1/2]`.
#[derive(Debug, Clone)]
pub struct FieldTable {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl FieldTable {
    pub fn constant(value: f64) -> Self {
        FieldTable {
            xs: vec![-1.0, 1.0],
            values: vec![value, value],
        }
    }

    pub fn from_fn(x_min: f64, x_max: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let n = n.max(2);
        let dx = (x_max - x_min) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| x_min + i as f64 * dx).collect();
        let values = xs.iter().map(|&x| f(x)).collect();
        FieldTable { xs, values }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.values[0];
        }
        if x >= self.xs[n - 1] {
            return self.values[n - 1];
        }
        // Uniform node spacing is the construction invariant.
        let step = self.xs[1] - self.xs[0];
        let fi = ((x - self.xs[0]) / step).floor();
        let i = (fi as usize).min(n - 2);
        let t = (x - self.xs[i]) / step;
        (1.0 - t) * self.values[i] + t * self.values[i + 1]
    }

    /// Largest absolute slope between adjacent nodes.
    pub fn lipschitz_bound(&self) -> f64 {
        let mut l = 0.0f64;
        for w in self.values.windows(2) {
            l = l.max((w[1] - w[0]).abs());
        }
        let step = self.xs[1] - self.xs[0];
        l / step
    }
}

/// Mean-field force of a spatial density: `F(x) = sign * (CDF(x) - 1/2)`,
/// with the midpoint-of-cell convention so a symmetric density yields zero
/// force at its center, consistent with `sgn(0) = 0`.
pub fn field_from_rho(
    rho: &Density1D,
    sign: InteractionSign,
) -> Result<FieldTable, MeanfieldError> {
    for (i, &c) in rho.values.iter().enumerate() {
        if c < 0.0 {
            return Err(MeanfieldError::NegativeMass { index: i, value: c });
        }
    }
    let total: f64 = rho.values.iter().sum::<f64>() * rho.dx;
    if total <= 0.0 {
        return Err(MeanfieldError::ZeroMass);
    }
    let s = sign.as_f64();
    let n = rho.values.len();
    let mut xs = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut below = 0.0;
    for i in 0..n {
        let cell = rho.values[i] * rho.dx;
        xs.push(rho.x_center(i));
        values.push(s * ((below + 0.5 * cell) / total - 0.5));
        below += cell;
    }
    Ok(FieldTable { xs, values })
}

/// Weighted sup norm with exponential velocity weight: `max f(x,v) e^{lambda |v|}`
/// over cell centers.
pub fn weighted_norm_e(f: &GridDensity, lambda: f64) -> f64 {
    let mut best = 0.0f64;
    for iv in 0..f.nv {
        let w = (lambda * f.v_center(iv).abs()).exp();
        for ix in 0..f.nx {
            best = best.max(f.at(ix, iv) * w);
        }
    }
    best
}

/// Weighted sup norm with polynomial velocity weight: `max f(x,v) (1+v^2)^{-gamma/2}`.
pub fn weighted_norm_p(f: &GridDensity, gamma: f64) -> f64 {
    let mut best = 0.0f64;
    for iv in 0..f.nv {
        let v = f.v_center(iv);
        let w = (1.0 + v * v).powf(-0.5 * gamma);
        for ix in 0..f.nx {
            best = best.max(f.at(ix, iv) * w);
        }
    }
    best
}

/// Cell-integrated weights of the quartic bump `chi_eta` on the grid spacing
/// `d`; exact integrals of the bump over cell-width bins, renormalized.
fn bump_cell_weights(eta: f64, d: f64) -> Vec<f64> {
    let cdf = |y: f64| {
        let u = (y / eta).clamp(-1.0, 1.0);
        0.5 + (15.0 / 16.0) * u * (1.0 - u * u * (2.0 / 3.0 - u * u / 5.0))
    };
    let half = (eta / d).ceil() as i64 + 1;
    let mut w = Vec::with_capacity((2 * half + 1) as usize);
    let mut sum = 0.0;
    for j in -half..=half {
        let a = (j as f64 - 0.5) * d;
        let b = (j as f64 + 0.5) * d;
        let m = cdf(b) - cdf(a);
        w.push(m);
        sum += m;
    }
    for m in &mut w {
        *m /= sum;
    }
    w
}

fn convolve_1d(src: &[f64], weights: &[f64]) -> Vec<f64> {
    let half = weights.len() / 2;
    let n = src.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &w) in weights.iter().enumerate() {
            let k = i as i64 + j as i64 - half as i64;
            if k >= 0 && (k as usize) < n {
                acc += w * src[k as usize];
            }
        }
        *o = acc;
    }
    out
}

/// Convolve the grid data with the product quartic bump `chi_eta(x) chi_eta(v)`,
/// the mollified initial condition. `eta = 0` returns a plain clone.
pub fn mollify_density(f: &GridDensity, eta: f64) -> GridDensity {
    if eta <= 0.0 {
        return f.clone();
    }
    let wx = bump_cell_weights(eta, f.dx);
    let wv = bump_cell_weights(eta, f.dv);
    let mut out = f.clone();
    // Along v (contiguous rows), then along x (strided columns).
    for ix in 0..f.nx {
        let row = convolve_1d(&f.values[ix * f.nv..(ix + 1) * f.nv], &wv);
        out.values[ix * f.nv..(ix + 1) * f.nv].copy_from_slice(&row);
    }
    let mut column = vec![0.0; f.nx];
    for iv in 0..f.nv {
        for (ix, c) in column.iter_mut().enumerate() {
            *c = out.values[ix * f.nv + iv];
        }
        let conv = convolve_1d(&column, &wx);
        for (ix, c) in conv.iter().enumerate() {
            out.values[ix * f.nv + iv] = *c;
        }
    }
    out.renormalize();
    out
}

/// Tridiagonal Crank-Nicolson update of one `v` column for
/// `d_t f = d_v((v - F) f) + d_vv f` in conservative flux form with zero-flux
/// boundaries. `edge_drift[k] = (F - v_{k+1/2}) / 2` at the interior cell
/// edges. Mass is conserved exactly: the flux differences telescope.
struct VelocityUpdate {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl VelocityUpdate {
    fn new(nv: usize) -> Self {
        VelocityUpdate {
            lower: vec![0.0; nv],
            diag: vec![0.0; nv],
            upper: vec![0.0; nv],
            rhs: vec![0.0; nv],
            scratch: vec![0.0; nv],
        }
    }

    /// Generator row coefficients `(a_k, b_k, c_k)` acting on
    /// `(f_{k-1}, f_k, f_{k+1})`.
    fn generator_row(
        k: usize,
        nv: usize,
        dv: f64,
        force: f64,
        v_min: f64,
    ) -> (f64, f64, f64) {
        let inv = 1.0 / dv;
        let alpha = |edge: usize| (force - (v_min + (edge + 1) as f64 * dv)) * 0.5;
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        if k > 0 {
            let al = alpha(k - 1);
            a += (al + inv) * inv;
            b += (al - inv) * inv;
        }
        if k + 1 < nv {
            let ar = alpha(k);
            b -= (ar + inv) * inv;
            c += (inv - ar) * inv;
        }
        (a, b, c)
    }

    fn apply(&mut self, column: &mut [f64], dv: f64, v_min: f64, force: f64, dt: f64) {
        let nv = column.len();
        let h = 0.5 * dt;
        for k in 0..nv {
            let (a, b, c) = Self::generator_row(k, nv, dv, force, v_min);
            // rhs = (I + (dt/2) L) f
            let mut r = column[k] * (1.0 + h * b);
            if k > 0 {
                r += h * a * column[k - 1];
            }
            if k + 1 < nv {
                r += h * c * column[k + 1];
            }
            self.rhs[k] = r;
            self.lower[k] = -h * a;
            self.diag[k] = 1.0 - h * b;
            self.upper[k] = -h * c;
        }
        // Thomas solve of (I - (dt/2) L) f_new = rhs.
        let w = &mut self.scratch;
        w[0] = self.upper[0] / self.diag[0];
        self.rhs[0] /= self.diag[0];
        for k in 1..nv {
            let denom = self.diag[k] - self.lower[k] * w[k - 1];
            w[k] = self.upper[k] / denom;
            self.rhs[k] = (self.rhs[k] - self.lower[k] * self.rhs[k - 1]) / denom;
        }
        column[nv - 1] = self.rhs[nv - 1];
        for k in (0..nv - 1).rev() {
            column[k] = self.rhs[k] - w[k] * column[k + 1];
        }
    }
}

/// Interpolation used by the semi-Lagrangian transport substeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransportInterp {
    /// Four-point cubic Lagrange; keeps the self-convergence order high.
    #[default]
    Cubic,
    /// Two-point linear; more diffusive, kept as a cross-check.
    Linear,
}

/// `out[j] = src[j - shift_cells]` with off-grid sources read as zero.
fn shift_series(src: &[f64], out: &mut [f64], shift_cells: f64, interp: TransportInterp) {
    let n = src.len() as i64;
    let get = |k: i64| -> f64 {
        if k >= 0 && k < n {
            src[k as usize]
        } else {
            0.0
        }
    };
    match interp {
        TransportInterp::Linear => {
            for (j, o) in out.iter_mut().enumerate() {
                let q = j as f64 - shift_cells;
                let p = q.floor();
                let t = q - p;
                let p = p as i64;
                *o = (1.0 - t) * get(p) + t * get(p + 1);
            }
        }
        TransportInterp::Cubic => {
            for (j, o) in out.iter_mut().enumerate() {
                let q = j as f64 - shift_cells;
                let p = q.floor();
                let t = q - p;
                let p = p as i64;
                let wm1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
                let w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
                let w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
                let w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
                *o = wm1 * get(p - 1) + w0 * get(p) + w1 * get(p + 1) + w2 * get(p + 2);
            }
        }
    }
}

/// Options for [`VpfpSolver`].
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub interp: TransportInterp,
    /// Boundary-mass abort threshold.
    pub boundary_tol: f64,
    /// Multiplier on the self-consistent force; 0 gives the kinetic
    /// transport-diffusion dynamics with the interaction switched off.
    pub force_scale: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            interp: TransportInterp::Cubic,
            boundary_tol: 1e-6,
            force_scale: 1.0,
        }
    }
}

/// Time stepper owning one density; single writer per instance.
pub struct VpfpSolver {
    f: GridDensity,
    spec: KernelSpec,
    dt: f64,
    time: f64,
    velocity: VelocityUpdate,
    opts: SolverOptions,
    scratch: Vec<f64>,
    row: Vec<f64>,
    /// Largest pre-renormalization mass drift `|m - 1|` seen so far.
    pub mass_drift_max: f64,
    /// `sup_x rho_t(x)` after each completed step.
    pub rho_sup_series: Vec<(f64, f64)>,
}

impl VpfpSolver {
    pub fn new(f0: GridDensity, spec: KernelSpec, dt: f64) -> Result<Self, MeanfieldError> {
        VpfpSolver::with_options(f0, spec, dt, SolverOptions::default())
    }

    pub fn with_options(
        f0: GridDensity,
        spec: KernelSpec,
        dt: f64,
        opts: SolverOptions,
    ) -> Result<Self, MeanfieldError> {
        if !(dt > 0.0) || dt > MAX_PDE_DT {
            return Err(MeanfieldError::BadTimeStep {
                got: dt,
                max: MAX_PDE_DT,
            });
        }
        let rho0 = rho_from_f(&f0);
        let nv = f0.nv;
        let nx = f0.nx;
        Ok(VpfpSolver {
            velocity: VelocityUpdate::new(nv),
            f: f0,
            spec,
            dt,
            time: 0.0,
            opts,
            scratch: vec![0.0; nx.max(nv)],
            row: vec![0.0; nx.max(nv)],
            mass_drift_max: 0.0,
            rho_sup_series: vec![(0.0, rho0.sup())],
        })
    }

    pub fn density(&self) -> &GridDensity {
        &self.f
    }

    pub fn into_density(self) -> GridDensity {
        self.f
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn advect_x(&mut self, h: f64) {
        let nv = self.f.nv;
        let nx = self.f.nx;
        for iv in 0..nv {
            let v = self.f.v_center(iv);
            let shift = v * h / self.f.dx;
            for ix in 0..nx {
                self.row[ix] = self.f.values[ix * nv + iv];
            }
            shift_series(&self.row[..nx], &mut self.scratch[..nx], shift, self.opts.interp);
            for ix in 0..nx {
                self.f.values[ix * nv + iv] = self.scratch[ix];
            }
        }
    }

    /// Force table of the current density: `K * rho`, with the kernel
    /// mollification realized as `K * (chi_eta * rho)`.
    pub fn current_field(&self) -> Result<FieldTable, MeanfieldError> {
        let mut rho = rho_from_f(&self.f);
        for c in &mut rho.values {
            // Transport interpolation may undershoot; the clipped density is
            // what the force sees mid-step.
            *c = c.max(0.0);
        }
        if self.spec.eta > 0.0 {
            let w = bump_cell_weights(self.spec.eta, rho.dx);
            rho.values = convolve_1d(&rho.values, &w);
        }
        field_from_rho(&rho, self.spec.sign)
    }

    /// Advance the density by one step of `dt`.
    pub fn step(&mut self) -> Result<(), MeanfieldError> {
        let dt = self.dt;
        self.advect_x(0.5 * dt);
        let field = self.current_field()?;

        let nv = self.f.nv;
        let (dv, v_min) = (self.f.dv, self.f.v_min);
        for ix in 0..self.f.nx {
            let force = self.opts.force_scale * field.eval(self.f.x_center(ix));
            let column = &mut self.f.values[ix * nv..(ix + 1) * nv];
            self.velocity.apply(column, dv, v_min, force, dt);
        }

        self.advect_x(0.5 * dt);

        for v in &mut self.f.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mass = self.f.mass();
        self.mass_drift_max = self.mass_drift_max.max((mass - 1.0).abs());
        if mass <= 0.0 {
            return Err(MeanfieldError::ZeroMass);
        }
        let inv = 1.0 / mass;
        for v in &mut self.f.values {
            *v *= inv;
        }
        self.time += dt;

        let bmass = self.f.boundary_mass();
        if bmass > self.opts.boundary_tol {
            return Err(MeanfieldError::BoundaryMassBreach {
                mass: bmass,
                tol: self.opts.boundary_tol,
                t: self.time,
            });
        }
        let rho = rho_from_f(&self.f);
        self.rho_sup_series.push((self.time, rho.sup()));
        Ok(())
    }
}

/// One step of the splitting scheme as a standalone operation.
pub fn vpfp_step(
    f: &GridDensity,
    sign: InteractionSign,
    dt: f64,
) -> Result<GridDensity, MeanfieldError> {
    let mut solver = VpfpSolver::new(f.clone(), KernelSpec::exact(sign), dt)?;
    solver.step()?;
    Ok(solver.into_density())
}

/// Reference solution artifacts: per-step force tables, the sup-norm series
/// of the spatial density and its time integral, and periodic snapshots.
pub struct PdeSolution {
    pub dt: f64,
    pub t_end: f64,
    /// `fields[k]` is the force at time `k * dt`; length `steps + 1`.
    pub fields: Vec<FieldTable>,
    pub rho_sup: Vec<(f64, f64)>,
    pub snapshots: Vec<(f64, GridDensity)>,
    pub final_density: GridDensity,
    pub mass_drift_max: f64,
}

impl PdeSolution {
    /// `sup_{s <= t} ||rho_s||_inf`.
    pub fn kappa(&self) -> f64 {
        self.rho_sup.iter().fold(0.0f64, |a, &(_, s)| a.max(s))
    }

    /// Trapezoidal `int_0^T ||rho_s||_inf ds` over the per-step series.
    pub fn int_rho_sup(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.rho_sup.windows(2) {
            acc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        }
        acc
    }
}

/// Solve from `f0` up to `t_end`, recording the field at every step time and
/// snapshots every `snapshot_stride` steps (0 disables snapshots beyond the
/// endpoints).
pub fn solve_vpfp(
    f0: GridDensity,
    spec: KernelSpec,
    dt: f64,
    t_end: f64,
    snapshot_stride: usize,
    opts: SolverOptions,
) -> Result<PdeSolution, MeanfieldError> {
    if !(t_end > 0.0) {
        return Err(MeanfieldError::BadTimeStep {
            got: t_end,
            max: f64::INFINITY,
        });
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let mut solver = VpfpSolver::with_options(f0, spec, dt, opts)?;
    let mut fields = Vec::with_capacity(steps + 1);
    let mut snapshots = vec![(0.0, solver.density().clone())];
    fields.push(solver.current_field()?);
    for k in 0..steps {
        solver.step()?;
        fields.push(solver.current_field()?);
        let at_stride = snapshot_stride > 0 && (k + 1) % snapshot_stride == 0;
        if at_stride || k + 1 == steps {
            snapshots.push((solver.time(), solver.density().clone()));
        }
    }
    Ok(PdeSolution {
        dt,
        t_end: solver.time(),
        rho_sup: solver.rho_sup_series.clone(),
        mass_drift_max: solver.mass_drift_max,
        final_density: solver.density().clone(),
        fields,
        snapshots,
    })
}

/// Time-indexed force tables driving the linear SDE.
pub enum FieldHistory {
    Constant(FieldTable),
    Sequence { dt: f64, tables: Vec<FieldTable> },
}

impl FieldHistory {
    pub fn zero() -> Self {
        FieldHistory::Constant(FieldTable::constant(0.0))
    }

    pub fn from_solution(sol: &PdeSolution) -> Self {
        FieldHistory::Sequence {
            dt: sol.dt,
            tables: sol.fields.clone(),
        }
    }

    pub fn covered_horizon(&self) -> f64 {
        match self {
            FieldHistory::Constant(_) => f64::INFINITY,
            FieldHistory::Sequence { dt, tables } => dt * (tables.len().saturating_sub(1)) as f64,
        }
    }

    /// Table in force at time `t` (piecewise constant over the solver grid).
    pub fn at_time(&self, t: f64) -> Result<&FieldTable, MeanfieldError> {
        match self {
            FieldHistory::Constant(table) => Ok(table),
            FieldHistory::Sequence { dt, tables } => {
                if tables.is_empty() {
                    return Err(MeanfieldError::EmptyField);
                }
                let idx = (t / dt).round() as i64;
                if idx < 0 || t > self.covered_horizon() + 1e-9 {
                    return Err(MeanfieldError::HorizonExceeded {
                        covered: self.covered_horizon(),
                        requested: t,
                    });
                }
                Ok(&tables[(idx as usize).min(tables.len() - 1)])
            }
        }
    }
}

/// Monte Carlo estimate of the density at `(x, v)` and time `t` by the
/// backward-path representation: paths drift position with `-W`, velocity
/// with `-F + W` plus `sqrt(2)` noise, and the estimate is
/// `e^t * mean(f0_smoothed at the path endpoint)`. Returns `(mean, std_error)`.
pub fn fk_density_estimate(
    f0_smoothed: &GridDensity,
    fields: &FieldHistory,
    t: f64,
    x: f64,
    v: f64,
    m_samples: usize,
    noise: &NoiseStreamSpec,
) -> Result<(f64, f64), MeanfieldError> {
    if m_samples == 0 {
        return Err(MeanfieldError::NoSamples);
    }
    if t > fields.covered_horizon() + 1e-9 {
        return Err(MeanfieldError::HorizonExceeded {
            covered: fields.covered_horizon(),
            requested: t,
        });
    }
    if t == 0.0 {
        return Ok((f0_smoothed.bilinear(x, v), 0.0));
    }
    let h = match fields {
        FieldHistory::Constant(_) => (t / 256.0).min(1e-2),
        FieldHistory::Sequence { dt, .. } => *dt,
    };
    let steps = (t / h).round().max(1.0) as usize;
    let h = t / steps as f64;
    // Exact sub-transition of dW = W du + sqrt(2) dB.
    let grow = h.exp();
    let noise_scale = ((2.0 * h).exp() - 1.0).sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for path in 0..m_samples {
        let (mut y, mut w) = (x, v);
        for k in 0..steps {
            let s = k as f64 * h;
            let field = fields.at_time((t - s).max(0.0))?;
            let xi = noise.gaussian(StreamClass::BackwardNoise, path as u64, k as u64);
            y -= 0.5 * h * w;
            w -= h * field.eval(y);
            w = w * grow + noise_scale * xi;
            y -= 0.5 * h * w;
        }
        let val = f0_smoothed.bilinear(y, w);
        sum += val;
        sum_sq += val * val;
    }
    let m = m_samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0);
    let se = if m_samples > 1 {
        (var / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok((t.exp() * mean, t.exp() * se))
}
