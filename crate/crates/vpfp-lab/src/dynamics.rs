//! Time stepping for the N-particle system, the linear SDE driven by an
//! external force table, and synchronous coupling of the two.
//!
//! The default scheme is Strang-type splitting with an exact
//! Ornstein-Uhlenbeck velocity substep: half position drift, force kick
//! `v += dt F(x)`, exact friction-diffusion transition, half position drift.
//! The force is frozen within a step. A plain Euler-Maruyama scheme is kept
//! as a cross-check. Coupled runs advance both systems in lockstep with the
//! same Gaussian increment per particle per step.

use serde::Serialize;
use thiserror::Error;

use crate::kernel::{mean_force_brute, mean_force_ranks, KernelError, KernelSpec};
use crate::meanfield::{FieldHistory, FieldTable, MeanfieldError};
use crate::rng::{NoiseStreamSpec, StreamClass};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("time step must be > 0, got {0}")]
    BadTimeStep(f64),
    #[error("horizon must satisfy 0 < dt <= t_end, got dt = {dt}, t_end = {t_end}")]
    BadHorizon { dt: f64, t_end: f64 },
    #[error("positions ({nx}) and velocities ({nv}) must have equal length >= 1")]
    DimensionMismatch { nx: usize, nv: usize },
    #[error("noise buffer length {got} does not match particle count {expected}")]
    NoiseLength { got: usize, expected: usize },
    #[error("state entries must be finite")]
    NonFinite,
    #[error("paired initial state has {got} particles, expected {expected}")]
    PairedSizeMismatch { got: usize, expected: usize },
    #[error("field history horizon {covered} does not cover the run horizon {needed}")]
    MismatchedHorizons { covered: f64, needed: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Meanfield(#[from] MeanfieldError),
}

/// Positions and velocities of one ensemble at a common time.
#[derive(Debug, Clone, Serialize)]
pub struct ParticleState {
    pub t: f64,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl ParticleState {
    pub fn new(t: f64, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self, DynamicsError> {
        if positions.is_empty() || positions.len() != velocities.len() {
            return Err(DynamicsError::DimensionMismatch {
                nx: positions.len(),
                nv: velocities.len(),
            });
        }
        if positions.iter().chain(velocities.iter()).any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite);
        }
        Ok(ParticleState {
            t,
            positions,
            velocities,
        })
    }

    /// i.i.d. product-Gaussian draw addressed by the noise spec; particle `i`
    /// always receives the same pair regardless of the ensemble size.
    pub fn gaussian_iid(
        n: usize,
        sigma_x: f64,
        sigma_v: f64,
        noise: &NoiseStreamSpec,
    ) -> Result<Self, DynamicsError> {
        let positions = (0..n)
            .map(|i| sigma_x * noise.gaussian(StreamClass::InitialPosition, i as u64, 0))
            .collect();
        let velocities = (0..n)
            .map(|i| sigma_v * noise.gaussian(StreamClass::InitialVelocity, i as u64, 0))
            .collect();
        ParticleState::new(0.0, positions, velocities)
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }
}

/// Integration scheme for the velocity dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Scheme {
    #[default]
    SplittingExactOu,
    EulerMaruyama,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "splitting_exact_ou" => Ok(Scheme::SplittingExactOu),
            "euler_maruyama" => Ok(Scheme::EulerMaruyama),
            other => Err(format!(
                "unknown scheme `{other}` (expected `splitting_exact_ou` or `euler_maruyama`)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64, scheme: Scheme) -> Result<Self, DynamicsError> {
        if !(dt > 0.0) {
            return Err(DynamicsError::BadTimeStep(dt));
        }
        if !(t_end > 0.0) || dt > t_end || t_end / dt > 1e12 {
            return Err(DynamicsError::BadHorizon { dt, t_end });
        }
        Ok(IntegratorConfig { dt, t_end, scheme })
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Exact one-step transition of `dV = -V dt + sqrt(2) dB`:
/// `v e^{-dt} + sqrt(1 - e^{-2 dt}) xi`.
pub fn ou_velocity_step(v: f64, dt: f64, xi: f64) -> Result<f64, DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::BadTimeStep(dt));
    }
    Ok(OuCoeffs::new(dt).apply(v, xi))
}

/// Precomputed decay/noise coefficients of the exact OU transition.
#[derive(Debug, Clone, Copy)]
pub struct OuCoeffs {
    pub decay: f64,
    pub noise_scale: f64,
}

impl OuCoeffs {
    pub fn new(dt: f64) -> Self {
        OuCoeffs {
            decay: (-dt).exp(),
            noise_scale: (1.0 - (-2.0 * dt).exp()).sqrt(),
        }
    }

    #[inline]
    pub fn apply(&self, v: f64, xi: f64) -> f64 {
        v * self.decay + self.noise_scale * xi
    }
}

enum Force<'a> {
    Empirical(&'a KernelSpec),
    External(&'a FieldTable),
}

fn fill_forces(
    force: &Force<'_>,
    positions: &[f64],
    out: &mut [f64],
) -> Result<(), DynamicsError> {
    match force {
        Force::Empirical(spec) => {
            if spec.is_exact() {
                mean_force_ranks(spec, positions, out)?;
            } else {
                mean_force_brute(spec, positions, out)?;
            }
        }
        Force::External(table) => {
            if table.xs.is_empty() {
                return Err(MeanfieldError::EmptyField.into());
            }
            for (o, &x) in out.iter_mut().zip(positions) {
                *o = table.eval(x);
            }
        }
    }
    Ok(())
}

fn step_in_place(
    state: &mut ParticleState,
    force: Force<'_>,
    dt: f64,
    scheme: Scheme,
    noise: &[f64],
    force_buf: &mut Vec<f64>,
) -> Result<(), DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::BadTimeStep(dt));
    }
    let n = state.n();
    if noise.len() != n {
        return Err(DynamicsError::NoiseLength {
            got: noise.len(),
            expected: n,
        });
    }
    force_buf.resize(n, 0.0);
    match scheme {
        Scheme::SplittingExactOu => {
            let half = 0.5 * dt;
            for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
                *x += half * v;
            }
            fill_forces(&force, &state.positions, force_buf)?;
            let ou = OuCoeffs::new(dt);
            for i in 0..n {
                let kicked = state.velocities[i] + dt * force_buf[i];
                state.velocities[i] = ou.apply(kicked, noise[i]);
            }
            for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
                *x += half * v;
            }
        }
        Scheme::EulerMaruyama => {
            fill_forces(&force, &state.positions, force_buf)?;
            let noise_scale = (2.0 * dt).sqrt();
            for i in 0..n {
                state.positions[i] += dt * state.velocities[i];
                state.velocities[i] +=
                    dt * (force_buf[i] - state.velocities[i]) + noise_scale * noise[i];
            }
        }
    }
    state.t += dt;
    Ok(())
}

/// One splitting step of the interacting system under its own empirical
/// mean-field force. Deterministic given `(state, noise)`.
pub fn step_particle_system(
    state: &mut ParticleState,
    spec: &KernelSpec,
    dt: f64,
    noise: &[f64],
    force_buf: &mut Vec<f64>,
) -> Result<(), DynamicsError> {
    step_in_place(
        state,
        Force::Empirical(spec),
        dt,
        Scheme::SplittingExactOu,
        noise,
        force_buf,
    )
}

/// One splitting step under an interpolated external force table; particles
/// evolve independently.
pub fn step_linear_sde(
    state: &mut ParticleState,
    field: &FieldTable,
    dt: f64,
    noise: &[f64],
    force_buf: &mut Vec<f64>,
) -> Result<(), DynamicsError> {
    step_in_place(
        state,
        Force::External(field),
        dt,
        Scheme::SplittingExactOu,
        noise,
        force_buf,
    )
}

/// Per-particle running suprema of the coupling distances, plus a sampled
/// time series of the averaged discrepancy.
#[derive(Debug, Clone, Serialize)]
pub struct CoupledTrajectoryStats {
    pub sup_dx: Vec<f64>,
    pub sup_dv: Vec<f64>,
    /// `(step, t, mean |dx| + |dv| at t, mean running sup)` every series stride.
    pub series: Vec<(u64, f64, f64, f64)>,
}

/// One dumped trajectory row: `(step, t, i, x, v, y, w)`.
pub type SnapshotRow = (u64, f64, u32, f64, f64, f64, f64);

#[derive(Debug, Clone, Default)]
pub struct CoupledRunOptions {
    /// Mean-field copies start here instead of at the particle initial state
    /// (pre-paired couplings); `None` means identical initial conditions.
    pub paired_initial: Option<ParticleState>,
    /// Stride of the averaged-discrepancy series; 0 keeps endpoints only.
    pub series_stride: usize,
    /// Stride of full trajectory snapshot rows; `None` disables dumping.
    pub snapshot_stride: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CoupledOutput {
    pub stats: CoupledTrajectoryStats,
    pub particles: ParticleState,
    pub copies: ParticleState,
    pub snapshots: Vec<SnapshotRow>,
}

/// Advance the particle system and its mean-field copies in lockstep with the
/// same Gaussian increments per particle per step, updating running suprema
/// after every step.
pub fn simulate_coupled(
    initial: &ParticleState,
    spec: &KernelSpec,
    fields: &FieldHistory,
    cfg: &IntegratorConfig,
    noise: &NoiseStreamSpec,
    opts: &CoupledRunOptions,
) -> Result<CoupledOutput, DynamicsError> {
    let n = initial.n();
    let steps = cfg.steps();
    let needed = initial.t + cfg.t_end;
    if fields.covered_horizon() + 1e-9 < needed - cfg.dt {
        return Err(DynamicsError::MismatchedHorizons {
            covered: fields.covered_horizon(),
            needed,
        });
    }
    let mut particles = initial.clone();
    let mut copies = match &opts.paired_initial {
        Some(paired) => {
            if paired.n() != n {
                return Err(DynamicsError::PairedSizeMismatch {
                    got: paired.n(),
                    expected: n,
                });
            }
            paired.clone()
        }
        None => initial.clone(),
    };

    let mut sup_dx = vec![0.0; n];
    let mut sup_dv = vec![0.0; n];
    for i in 0..n {
        sup_dx[i] = (particles.positions[i] - copies.positions[i]).abs();
        sup_dv[i] = (particles.velocities[i] - copies.velocities[i]).abs();
    }
    let mut series = Vec::new();
    let mut snapshots = Vec::new();
    let mut xi = vec![0.0; n];
    let mut force_buf = Vec::with_capacity(n);

    let record_series = |series: &mut Vec<(u64, f64, f64, f64)>,
                         step: u64,
                         p: &ParticleState,
                         c: &ParticleState,
                         sup_dx: &[f64],
                         sup_dv: &[f64]| {
        let mut inst = 0.0;
        let mut sup = 0.0;
        for i in 0..p.n() {
            inst += (p.positions[i] - c.positions[i]).abs()
                + (p.velocities[i] - c.velocities[i]).abs();
            sup += sup_dx[i] + sup_dv[i];
        }
        let nf = p.n() as f64;
        series.push((step, p.t, inst / nf, sup / nf));
    };
    let record_snapshot =
        |rows: &mut Vec<SnapshotRow>, step: u64, p: &ParticleState, c: &ParticleState| {
            for i in 0..p.n() {
                rows.push((
                    step,
                    p.t,
                    i as u32,
                    p.positions[i],
                    p.velocities[i],
                    c.positions[i],
                    c.velocities[i],
                ));
            }
        };

    record_series(&mut series, 0, &particles, &copies, &sup_dx, &sup_dv);
    if opts.snapshot_stride.is_some() {
        record_snapshot(&mut snapshots, 0, &particles, &copies);
    }

    for k in 0..steps {
        let t_k = initial.t + k as f64 * cfg.dt;
        for (i, x) in xi.iter_mut().enumerate() {
            *x = noise.gaussian(StreamClass::DynamicsNoise, i as u64, k as u64);
        }
        step_in_place(
            &mut particles,
            Force::Empirical(spec),
            cfg.dt,
            cfg.scheme,
            &xi,
            &mut force_buf,
        )?;
        step_in_place(
            &mut copies,
            Force::External(fields.at_time(t_k)?),
            cfg.dt,
            cfg.scheme,
            &xi,
            &mut force_buf,
        )?;
        for i in 0..n {
            let dx = (particles.positions[i] - copies.positions[i]).abs();
            let dv = (particles.velocities[i] - copies.velocities[i]).abs();
            if dx > sup_dx[i] {
                sup_dx[i] = dx;
            }
            if dv > sup_dv[i] {
                sup_dv[i] = dv;
            }
        }
        let step = (k + 1) as u64;
        let last = k + 1 == steps;
        if last || (opts.series_stride > 0 && (k + 1) % opts.series_stride == 0) {
            record_series(&mut series, step, &particles, &copies, &sup_dx, &sup_dv);
        }
        if let Some(stride) = opts.snapshot_stride {
            if last || (stride > 0 && (k + 1) % stride == 0) {
                record_snapshot(&mut snapshots, step, &particles, &copies);
            }
        }
    }

    Ok(CoupledOutput {
        stats: CoupledTrajectoryStats {
            sup_dx,
            sup_dv,
            series,
        },
        particles,
        copies,
        snapshots,
    })
}

/// Sampled trajectory of one linear-SDE ensemble: positions/velocities every
/// stored step.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

/// Drive an ensemble of independent copies by the force history, recording
/// the state every `stride` steps (and always the endpoints).
pub fn simulate_linear_sde_paths(
    initial: &ParticleState,
    fields: &FieldHistory,
    cfg: &IntegratorConfig,
    noise: &NoiseStreamSpec,
    stride: usize,
) -> Result<PathRecord, DynamicsError> {
    let steps = cfg.steps();
    let needed = initial.t + cfg.t_end;
    if fields.covered_horizon() + 1e-9 < needed - cfg.dt {
        return Err(DynamicsError::MismatchedHorizons {
            covered: fields.covered_horizon(),
            needed,
        });
    }
    let mut state = initial.clone();
    let n = state.n();
    let mut xi = vec![0.0; n];
    let mut force_buf = Vec::with_capacity(n);
    let mut rec = PathRecord {
        times: vec![state.t],
        positions: vec![state.positions.clone()],
        velocities: vec![state.velocities.clone()],
    };
    for k in 0..steps {
        let t_k = initial.t + k as f64 * cfg.dt;
        for (i, x) in xi.iter_mut().enumerate() {
            *x = noise.gaussian(StreamClass::DynamicsNoise, i as u64, k as u64);
        }
        step_in_place(
            &mut state,
            Force::External(fields.at_time(t_k)?),
            cfg.dt,
            cfg.scheme,
            &xi,
            &mut force_buf,
        )?;
        if k + 1 == steps || (stride > 0 && (k + 1) % stride == 0) {
            rec.times.push(state.t);
            rec.positions.push(state.positions.clone());
            rec.velocities.push(state.velocities.clone());
        }
    }
    Ok(rec)
}

/// Advance the interacting system alone (no coupled copies) to the horizon.
pub fn simulate_particle_system(
    initial: &ParticleState,
    spec: &KernelSpec,
    cfg: &IntegratorConfig,
    noise: &NoiseStreamSpec,
) -> Result<ParticleState, DynamicsError> {
    let mut state = initial.clone();
    let n = state.n();
    let mut xi = vec![0.0; n];
    let mut force_buf = Vec::with_capacity(n);
    for k in 0..cfg.steps() {
        for (i, x) in xi.iter_mut().enumerate() {
            *x = noise.gaussian(StreamClass::DynamicsNoise, i as u64, k as u64);
        }
        step_in_place(
            &mut state,
            Force::Empirical(spec),
            cfg.dt,
            cfg.scheme,
            &xi,
            &mut force_buf,
        )?;
    }
    Ok(state)
}

/// Endpoint-only variant of [`simulate_linear_sde_paths`].
pub fn simulate_linear_sde(
    initial: &ParticleState,
    fields: &FieldHistory,
    cfg: &IntegratorConfig,
    noise: &NoiseStreamSpec,
) -> Result<ParticleState, DynamicsError> {
    let rec = simulate_linear_sde_paths(initial, fields, cfg, noise, 0)?;
    ParticleState::new(
        *rec.times.last().unwrap(),
        rec.positions.last().unwrap().clone(),
        rec.velocities.last().unwrap().clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::InteractionSign;

    fn repulsive() -> KernelSpec {
        KernelSpec::exact(InteractionSign::Repulsive)
    }

    #[test]
    fn ou_step_examples() {
        // Identity limit.
        assert!((ou_velocity_step(1.0, 1e-12, 0.0).unwrap() - 1.0).abs() < 1e-11);
        // Large time: the noise coefficient reaches the stationary unit std.
        let coeffs = OuCoeffs::new(50.0);
        assert!((coeffs.noise_scale - 1.0).abs() < 1e-12);
        assert!(coeffs.decay < 1e-20);
        // Closed form.
        let v = ou_velocity_step(2.0, 0.5, 0.0).unwrap();
        assert!((v - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 1.2130613194252668).abs() < 1e-12);
        assert!(ou_velocity_step(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn single_particle_feels_no_empirical_force() {
        let mut state = ParticleState::new(0.0, vec![0.3], vec![1.0]).unwrap();
        let mut buf = Vec::new();
        step_particle_system(&mut state, &repulsive(), 0.01, &[0.0], &mut buf).unwrap();
        // Pure kinetic OU motion: kick is zero.
        let ou = OuCoeffs::new(0.01);
        let v_expect = ou.apply(1.0, 0.0);
        assert_eq!(state.velocities[0], v_expect);
        assert_eq!(state.positions[0], 0.3 + 0.005 * 1.0 + 0.005 * v_expect);
    }

    #[test]
    fn mirror_symmetry_is_preserved() {
        let mut state =
            ParticleState::new(0.0, vec![0.7, -0.7], vec![0.2, -0.2]).unwrap();
        let mut buf = Vec::new();
        for k in 0..50 {
            let xi = 0.1 + 0.01 * k as f64;
            step_particle_system(&mut state, &repulsive(), 0.01, &[xi, -xi], &mut buf).unwrap();
            assert!((state.positions[0] + state.positions[1]).abs() < 1e-14);
            assert!((state.velocities[0] + state.velocities[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn three_body_step_matches_brute_force_oracle() {
        let positions = vec![0.1, -0.4, 0.8];
        let velocities = vec![0.0, 0.5, -0.2];
        let noise = [0.3, -0.1, 0.2];
        let dt = 0.02;

        let mut fast = ParticleState::new(0.0, positions.clone(), velocities.clone()).unwrap();
        let mut buf = Vec::new();
        step_particle_system(&mut fast, &repulsive(), dt, &noise, &mut buf).unwrap();

        // Same splitting with the O(N^2) force oracle.
        let mut state = ParticleState::new(0.0, positions, velocities).unwrap();
        let half = 0.5 * dt;
        for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
            *x += half * v;
        }
        let mut forces = vec![0.0; 3];
        mean_force_brute(&repulsive(), &state.positions, &mut forces).unwrap();
        let ou = OuCoeffs::new(dt);
        for i in 0..3 {
            state.velocities[i] = ou.apply(state.velocities[i] + dt * forces[i], noise[i]);
        }
        for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
            *x += half * v;
        }

        assert_eq!(fast.positions, state.positions);
        assert_eq!(fast.velocities, state.velocities);
    }

    #[test]
    fn zero_field_linear_sde_is_kinetic_ou() {
        let mut state = ParticleState::new(0.0, vec![1.0, 2.0], vec![0.5, -0.5]).unwrap();
        let mut buf = Vec::new();
        let field = FieldTable::constant(0.0);
        step_linear_sde(&mut state, &field, 0.1, &[0.0, 0.0], &mut buf).unwrap();
        let ou = OuCoeffs::new(0.1);
        assert_eq!(state.velocities[0], ou.apply(0.5, 0.0));
        assert_eq!(state.velocities[1], ou.apply(-0.5, 0.0));
    }

    #[test]
    fn constant_field_shifts_velocity_by_kick() {
        let mut state = ParticleState::new(0.0, vec![0.0], vec![0.0]).unwrap();
        let mut buf = Vec::new();
        let field = FieldTable::constant(0.5);
        let dt = 0.01;
        step_linear_sde(&mut state, &field, dt, &[0.0], &mut buf).unwrap();
        // Kick dt * 1/2 enters before the exact OU contraction.
        let expect = (0.5 * dt) * (-dt).exp();
        assert!((state.velocities[0] - expect).abs() < 1e-16);
    }

    #[test]
    fn coupled_run_with_zero_force_and_zero_field_has_zero_discrepancy() {
        // A kernel force that is identically zero: all particles at one point
        // stay together only if noise matches; instead use N = 1 where the
        // empirical force vanishes identically.
        let initial = ParticleState::new(0.0, vec![0.4], vec![-0.3]).unwrap();
        let cfg = IntegratorConfig::new(0.01, 0.5, Scheme::SplittingExactOu).unwrap();
        let noise = NoiseStreamSpec::new(11, 0);
        let out = simulate_coupled(
            &initial,
            &repulsive(),
            &FieldHistory::zero(),
            &cfg,
            &noise,
            &CoupledRunOptions::default(),
        )
        .unwrap();
        assert_eq!(out.stats.sup_dx, vec![0.0]);
        assert_eq!(out.stats.sup_dv, vec![0.0]);
    }

    #[test]
    fn running_suprema_are_monotone_and_series_consistent() {
        let noise = NoiseStreamSpec::new(5, 2);
        let initial = ParticleState::gaussian_iid(16, 1.0, 1.0, &noise).unwrap();
        let cfg = IntegratorConfig::new(0.01, 0.3, Scheme::SplittingExactOu).unwrap();
        let opts = CoupledRunOptions {
            series_stride: 5,
            ..Default::default()
        };
        let out = simulate_coupled(
            &initial,
            &repulsive(),
            &FieldHistory::zero(),
            &cfg,
            &noise,
            &opts,
        )
        .unwrap();
        let sups: Vec<f64> = out.stats.series.iter().map(|r| r.3).collect();
        for w in sups.windows(2) {
            assert!(w[1] >= w[0] - 1e-15, "running sup decreased: {w:?}");
        }
        // Instantaneous discrepancy never exceeds the running sup.
        for row in &out.stats.series {
            assert!(row.2 <= row.3 + 1e-15);
        }
    }

    #[test]
    fn identical_noise_spec_reproduces_bit_identical_trajectories() {
        let noise = NoiseStreamSpec::new(321, 7);
        let initial = ParticleState::gaussian_iid(8, 1.0, 1.0, &noise).unwrap();
        let cfg = IntegratorConfig::new(0.005, 0.2, Scheme::SplittingExactOu).unwrap();
        let run = |opts: &CoupledRunOptions| {
            simulate_coupled(
                &initial,
                &repulsive(),
                &FieldHistory::zero(),
                &cfg,
                &noise,
                opts,
            )
            .unwrap()
        };
        let a = run(&CoupledRunOptions::default());
        let b = run(&CoupledRunOptions::default());
        assert_eq!(a.particles.positions, b.particles.positions);
        assert_eq!(a.particles.velocities, b.particles.velocities);
        assert_eq!(a.copies.positions, b.copies.positions);
    }

    #[test]
    fn paired_initial_states_seed_the_running_suprema() {
        // Generic pre-paired coupling: copies start offset from the particles
        // and the suprema include the initial gap from step zero.
        let particles = ParticleState::new(0.0, vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let copies = ParticleState::new(0.0, vec![0.5, 1.0], vec![0.0, -0.25]).unwrap();
        let cfg = IntegratorConfig::new(0.01, 0.05, Scheme::SplittingExactOu).unwrap();
        let noise = NoiseStreamSpec::new(4, 0);
        let opts = CoupledRunOptions {
            paired_initial: Some(copies),
            ..Default::default()
        };
        let out = simulate_coupled(
            &particles,
            &repulsive(),
            &FieldHistory::zero(),
            &cfg,
            &noise,
            &opts,
        )
        .unwrap();
        assert!(out.stats.sup_dx[0] >= 0.5);
        assert!(out.stats.sup_dv[1] >= 0.25);

        let wrong_size = ParticleState::new(0.0, vec![0.0], vec![0.0]).unwrap();
        let opts = CoupledRunOptions {
            paired_initial: Some(wrong_size),
            ..Default::default()
        };
        assert!(matches!(
            simulate_coupled(
                &particles,
                &repulsive(),
                &FieldHistory::zero(),
                &cfg,
                &noise,
                &opts
            ),
            Err(DynamicsError::PairedSizeMismatch { .. })
        ));
    }

    #[test]
    fn mismatched_horizon_is_rejected() {
        let initial = ParticleState::new(0.0, vec![0.0], vec![0.0]).unwrap();
        let cfg = IntegratorConfig::new(0.01, 1.0, Scheme::SplittingExactOu).unwrap();
        let noise = NoiseStreamSpec::new(1, 0);
        let short = FieldHistory::Sequence {
            dt: 0.01,
            tables: vec![FieldTable::constant(0.0); 11],
        };
        assert!(matches!(
            simulate_coupled(
                &initial,
                &repulsive(),
                &short,
                &cfg,
                &noise,
                &CoupledRunOptions::default()
            ),
            Err(DynamicsError::MismatchedHorizons { .. })
        ));
    }

    #[test]
    fn euler_maruyama_tracks_the_exact_scheme_weakly() {
        // Cross-check scheme: velocity variance after t = 1 close to the
        // stationary value for both integrators.
        let noise = NoiseStreamSpec::new(99, 0);
        let n = 4000;
        let initial = ParticleState::new(0.0, vec![0.0; n], vec![0.0; n]).unwrap();
        let var = |scheme: Scheme, dt: f64| {
            let cfg = IntegratorConfig::new(dt, 1.0, scheme).unwrap();
            let rec =
                simulate_linear_sde_paths(&initial, &FieldHistory::zero(), &cfg, &noise, 0)
                    .unwrap();
            let vs = rec.velocities.last().unwrap();
            vs.iter().map(|v| v * v).sum::<f64>() / n as f64
        };
        let target = 1.0 - (-2.0f64).exp();
        let exact = var(Scheme::SplittingExactOu, 0.01);
        let em = var(Scheme::EulerMaruyama, 0.001);
        assert!((exact - target).abs() < 0.05, "exact {exact} vs {target}");
        assert!((em - target).abs() < 0.05, "em {em} vs {target}");
    }
}
