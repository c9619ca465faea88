//! Deterministic counter-based noise streams for replica simulations.
//!
//! Every draw is a pure function of `(master_seed, replica_id, stream class,
//! unit index, step index)`, so identical coordinates always yield the
//! identical Gaussian increment regardless of scheduling — the synchronous
//! coupling contract. The generator is a splitmix64-style avalanche applied to
//! the counter words, with Box-Muller for the Gaussian transform; random
//! access means a coupled pair of systems, or a re-run with more particles,
//! replays the exact same increments per particle per step.

/// Addresses one family of draws so distinct purposes never share counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamClass {
    /// Velocity noise of the forward dynamics, one substream per particle.
    DynamicsNoise = 1,
    /// Initial positions of an ensemble.
    InitialPosition = 2,
    /// Initial velocities of an ensemble.
    InitialVelocity = 3,
    /// Bump-distributed jitter applied to initial positions.
    MollifierPosition = 4,
    /// Bump-distributed jitter applied to initial velocities.
    MollifierVelocity = 5,
    /// Noise driving backward Feynman-Kac paths.
    BackwardNoise = 6,
    /// Random directions for sliced transport distances.
    Projection = 7,
    /// Uniform draws for Bernoulli/binomial sampling.
    BernoulliUniform = 8,
}

/// Identifies the noise source of one replica; copy it around freely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NoiseStreamSpec {
    pub master_seed: u64,
    pub replica_id: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl NoiseStreamSpec {
    pub fn new(master_seed: u64, replica_id: u64) -> Self {
        NoiseStreamSpec {
            master_seed,
            replica_id,
        }
    }

    /// Same master seed, different replica substream.
    pub fn with_replica(self, replica_id: u64) -> Self {
        NoiseStreamSpec {
            master_seed: self.master_seed,
            replica_id,
        }
    }

    #[inline]
    fn raw(&self, class: u64, unit: u64, counter: u64) -> u64 {
        let mut h = self.master_seed ^ 0x243f_6a88_85a3_08d3;
        for w in [self.replica_id, class, unit, counter] {
            h = mix64(h.wrapping_add(w).wrapping_add(GOLDEN));
        }
        mix64(h)
    }

    /// Uniform draw in the open interval `(0, 1)`.
    #[inline]
    pub fn uniform(&self, class: StreamClass, unit: u64, counter: u64) -> f64 {
        let bits = self.raw(class as u64, unit, counter);
        ((bits >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Standard Gaussian draw via Box-Muller; `(unit, step)` addresses it.
    #[inline]
    pub fn gaussian(&self, class: StreamClass, unit: u64, step: u64) -> f64 {
        let u1 = self.uniform(class, unit, 2 * step);
        let u2 = self.uniform(class, unit, 2 * step + 1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Draw from the quartic bump density `(15/16)(1 - y^2)^2` on `[-1, 1]`
    /// by bisecting its CDF; used for mollified initial conditions.
    pub fn bump(&self, class: StreamClass, unit: u64, step: u64) -> f64 {
        let target = self.uniform(class, unit, step);
        let cdf = |u: f64| 0.5 + (15.0 / 16.0) * u * (1.0 - u * u * (2.0 / 3.0 - u * u / 5.0));
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
