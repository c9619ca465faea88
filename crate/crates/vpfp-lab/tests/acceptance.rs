//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Statistical criteria carry three-standard-error slack; theoretical bounds
//! larger than 1 are vacuous for probabilities and never fail. Oracles here
//! are written independently of the implementation paths they check.

use std::sync::OnceLock;

use vpfp_lab::concentration::{binomial_tail_check, gamma_fluctuation_terms};
use vpfp_lab::config::LabConfig;
use vpfp_lab::dynamics::{
    simulate_linear_sde_paths, IntegratorConfig, ParticleState, Scheme,
};
use vpfp_lab::experiments::{
    cauchy_eta_check, chaos_rate_sweep, ks_distance, lambda_deviation_curve,
    solve_reference_pde, F0Spec,
};
use vpfp_lab::kernel::{
    mean_force_brute, mean_force_ranks_vec, rope_majorant_holds, InteractionSign,
    KernelSpec,
};
use vpfp_lab::meanfield::{
    rho_from_f, solve_vpfp, weighted_norm_e, FieldHistory, GridDensity, PdeSolution,
    SolverOptions,
};
use vpfp_lab::metrics::{discrete_inf_norm, w1_1d, w1_2d_exact};
use vpfp_lab::rng::{NoiseStreamSpec, StreamClass};

const SEED: u64 = 0x5eed_ace5;

fn full_config() -> LabConfig {
    LabConfig {
        n_list: vec![128, 256, 512, 1024, 2048],
        replicas: 32,
        t: 1.0,
        dt: 1e-3,
        nx: 192,
        nv: 192,
        pde_dt: 1e-3,
        pde_snapshot_stride: 100,
        seed: SEED,
        ..LabConfig::default()
    }
}

static PDE: OnceLock<PdeSolution> = OnceLock::new();

fn reference_pde() -> &'static PdeSolution {
    PDE.get_or_init(|| solve_reference_pde(&full_config()).expect("reference solve"))
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn criterion_01_chaos_rate() {
    let cfg = full_config();
    let pde = reference_pde();
    let rep = chaos_rate_sweep(&cfg, pde).expect("sweep");
    let slope = rep.slope.expect("nonzero means");
    let slope_ok = (-0.65..=-0.35).contains(&slope);
    let mut bounds_ok = true;
    for row in &rep.rows {
        println!(
            "  N = {:4}: mean {:.5} ± {:.5}, bound {:.3}",
            row.n, row.mean, row.std_err, row.bound
        );
        bounds_ok &= row.mean <= row.bound;
    }
    report(
        "01 chaos-rate",
        slope_ok && bounds_ok,
        &format!("slope {slope:.4} in [-0.65, -0.35], int||rho|| = {:.4}", rep.int_rho_sup),
    );
}

#[test]
fn criterion_02_explicit_fluctuation_bounds() {
    let cfg = full_config();
    let lam = vpfp_lab::experiments::lambda_bound_check(&cfg, 100, 2000).expect("lambda");
    let gam = vpfp_lab::experiments::gamma_bound_check(&cfg, 400, 200).expect("gamma");
    report(
        "02 fluctuation-bounds",
        lam.pass && gam.pass,
        &format!(
            "mean lambda {:.5} <= {:.5} (+{:.1e}); mean gamma {:.5} <= {:.5} (+{:.1e})",
            lam.empirical, lam.bound, lam.slack, gam.empirical, gam.bound, gam.slack
        ),
    );
}

#[test]
fn criterion_03_binomial_tail() {
    let noise = NoiseStreamSpec::new(SEED, 9000);
    let replicas = 100_000;
    let point = binomial_tail_check(200, 0.3, 0.1, replicas, &noise).expect("binomial");
    let bound = 2.0 * (-4.0f64).exp();
    assert!((point.bound - bound).abs() < 1e-15);

    // Exact oracle by direct summation of the binomial pmf:
    // P(|X - 60| >= 20) = P(X <= 40) + P(X >= 80) at n = 200, p = 0.3.
    let dist = statrs::distribution::Binomial::new(0.3, 200).unwrap();
    use statrs::distribution::DiscreteCDF;
    let exact = dist.cdf(40) + (1.0 - dist.cdf(79));
    let se = (exact * (1.0 - exact) / replicas as f64).sqrt();
    let oracle_ok = (point.empirical - exact).abs() <= 3.0 * se;
    report(
        "03 binomial-tail",
        point.empirical <= bound && oracle_ok,
        &format!(
            "empirical {:.5} <= bound {bound:.5}; exact {exact:.5} ± {:.1e}",
            point.empirical,
            3.0 * se
        ),
    );
}

#[test]
fn criterion_04_lambda_deviation() {
    let cfg = full_config();
    let curve = lambda_deviation_curve(&cfg, 100, 2000, &[0.25]).expect("curve");
    let p = &curve.points[0];
    let bound = 2.0 * 100.0 * (-2.0 * 0.25 * 0.25 * 99.0f64).exp();
    assert!((p.bound - bound).abs() < 1e-15);
    let slack = 3.0 * (bound / 2000.0).sqrt();
    report(
        "04 lambda-deviation",
        p.empirical <= bound + slack,
        &format!("empirical {:.2e} <= {bound:.3e} + {slack:.3e}", p.empirical),
    );
}

/// Exhaustive-window oracle with all three anchorings of the candidate window.
fn inf_norm_scan(sample: &[f64], eps: f64) -> f64 {
    let n = sample.len() as f64;
    let mut best = 0usize;
    for &p in sample {
        for center in [p - eps, p, p + eps] {
            let count = sample
                .iter()
                .filter(|&&q| q >= center - eps && q <= center + eps)
                .count();
            best = best.max(count);
        }
    }
    best as f64 / (2.0 * n * eps)
}

/// Dense-scan oracle for the per-point window fluctuation sup.
fn gamma_term_scan(positions: &[f64], i: usize, cdf: &dyn Fn(f64) -> f64) -> f64 {
    let m = (positions.len() - 1) as f64;
    let y = positions[i];
    let dists: Vec<f64> = positions
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &p)| (y - p).abs())
        .collect();
    let dmax = dists.iter().cloned().fold(0.0f64, f64::max);
    let mut candidates: Vec<f64> = (0..4000).map(|k| k as f64 * (dmax + 1.0) / 3999.0).collect();
    candidates.extend_from_slice(&dists);
    let mut sup = 0.0f64;
    for &u in &candidates {
        let closed_count = dists.iter().filter(|&&d| d <= u).count() as f64 / m;
        let open_count = dists.iter().filter(|&&d| d < u).count() as f64 / m;
        let closed = cdf(y + u) - cdf((y - u).next_down());
        sup = sup.max((closed_count - closed).abs());
        if u > 0.0 {
            let open = cdf((y + u).next_down()) - cdf(y - u);
            sup = sup.max((open_count - open).abs());
        }
    }
    sup
}

#[test]
fn criterion_05_oracle_equivalences() {
    let noise = NoiseStreamSpec::new(SEED, 5000);
    let spec = KernelSpec::exact(InteractionSign::Repulsive);

    // Rank forces against the double sum, bit for bit, ties included.
    for rep in 0..1000u64 {
        let n = 1 + (noise.uniform(StreamClass::BernoulliUniform, 0, rep) * 60.0) as usize;
        let mut pts: Vec<f64> = (0..n)
            .map(|i| noise.gaussian(StreamClass::InitialPosition, i as u64, rep))
            .collect();
        for i in 1..n {
            if noise.uniform(StreamClass::BernoulliUniform, 1, rep * 64 + i as u64) < 0.3 {
                pts[i] = pts[i / 2];
            }
        }
        let fast = mean_force_ranks_vec(&spec, &pts).unwrap();
        let mut slow = vec![0.0; n];
        mean_force_brute(&spec, &pts, &mut slow).unwrap();
        assert_eq!(fast, slow, "rank/brute mismatch at rep {rep}");
    }

    // Collinear clouds: the planar matcher degenerates to the 1D distance.
    for rep in 0..50u64 {
        let n = 2 + (rep as usize % 40);
        let xs: Vec<f64> = (0..n)
            .map(|i| noise.gaussian(StreamClass::InitialPosition, i as u64, 2000 + rep))
            .collect();
        let ys: Vec<f64> = (0..n)
            .map(|i| noise.gaussian(StreamClass::InitialVelocity, i as u64, 2000 + rep))
            .collect();
        let a: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.7)).collect();
        let b: Vec<(f64, f64)> = ys.iter().map(|&y| (y, 0.7)).collect();
        let d2 = w1_2d_exact(&a, &b).unwrap();
        let d1 = w1_1d(&xs, &ys).unwrap();
        assert!((d2 - d1).abs() < 1e-12, "collinear mismatch {d2} vs {d1}");
    }

    // Exact matcher against the 8! brute force.
    for rep in 0..10u64 {
        let cloud = |tag: u64| -> Vec<(f64, f64)> {
            (0..8)
                .map(|i| {
                    (
                        noise.gaussian(StreamClass::InitialPosition, i + 8 * tag, 3000 + rep),
                        noise.gaussian(StreamClass::InitialVelocity, i + 8 * tag, 3000 + rep),
                    )
                })
                .collect()
        };
        let (a, b) = (cloud(0), cloud(1));
        let mut best = f64::INFINITY;
        let mut perm: Vec<usize> = (0..8).collect();
        // Heap's algorithm over all 8! assignments.
        fn heaps(k: usize, perm: &mut Vec<usize>, a: &[(f64, f64)], b: &[(f64, f64)], best: &mut f64) {
            if k == 1 {
                let cost: f64 = perm
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| (a[i].0 - b[j].0).abs() + (a[i].1 - b[j].1).abs())
                    .sum();
                *best = best.min(cost);
                return;
            }
            for i in 0..k {
                heaps(k - 1, perm, a, b, best);
                if k.is_multiple_of(2) {
                    perm.swap(i, k - 1);
                } else {
                    perm.swap(0, k - 1);
                }
            }
        }
        heaps(8, &mut perm, &a, &b, &mut best);
        let exact = w1_2d_exact(&a, &b).unwrap();
        assert!(
            (exact - best / 8.0).abs() < 1e-12,
            "assignment {exact} vs factorial {}",
            best / 8.0
        );
    }

    // Windowed sup-norm against the exhaustive scan (dyadic inputs keep the
    // window arithmetic exact).
    for rep in 0..200u64 {
        let n = 1 + (rep as usize % 50);
        let pts: Vec<f64> = (0..n)
            .map(|i| {
                (noise.gaussian(StreamClass::InitialPosition, i as u64, 4000 + rep) * 64.0).round()
                    / 64.0
            })
            .collect();
        let eps = ((1.0 + (rep % 32) as f64) / 32.0).max(1.0 / 64.0);
        let fast = discrete_inf_norm(&pts, eps).unwrap();
        let slow = inf_norm_scan(&pts, eps);
        assert!((fast - slow).abs() < 1e-12, "infnorm {fast} vs scan {slow}");
    }

    // Window-fluctuation sup against the dense grid scan.
    let cdf = |x: f64| 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2);
    for rep in 0..20u64 {
        let n = 5 + (rep as usize % 45);
        let pts: Vec<f64> = (0..n)
            .map(|i| noise.gaussian(StreamClass::InitialPosition, i as u64, 5000 + rep))
            .collect();
        let terms = gamma_fluctuation_terms(&pts, &cdf).unwrap();
        for (i, term) in terms.iter().enumerate() {
            let scan = gamma_term_scan(&pts, i, &cdf);
            assert!(
                (term - scan).abs() < 1e-12,
                "point {i}: gamma sup {term} vs scan {scan}"
            );
        }
    }

    report("05 oracle-equivalences", true, "all five exact equivalences hold");
}

#[test]
fn criterion_06_pde_guarantees() {
    let cfg = full_config();
    let pde = reference_pde();
    let lambda = 1.0;

    let mass_ok = pde.mass_drift_max < 1e-4;
    let boundary = pde
        .snapshots
        .iter()
        .map(|(_, f)| f.boundary_mass())
        .fold(0.0f64, f64::max);
    let boundary_ok = boundary < 1e-6;

    let f0 = F0Spec::from_config(&cfg).grid(&cfg).unwrap();
    let mut fk_ok = true;
    let mut rho_ok = true;
    for (t, f) in &pde.snapshots {
        let lhs = weighted_norm_e(f, lambda);
        let rhs = 2.0
            * (t + lambda + 0.5 * lambda * lambda).exp()
            * weighted_norm_e(&f0, lambda * (-t).exp());
        fk_ok &= lhs <= rhs;
        let rho_bound = 4.0 / lambda
            * (t + 0.5 * lambda + 0.5 * lambda * lambda).exp()
            * weighted_norm_e(&f0, lambda * (-t).exp());
        rho_ok &= rho_from_f(f).sup() <= rho_bound;
    }

    // Self-convergence under joint dt and grid refinement, successive
    // differences restricted to the coarser grid.
    let run = |nx: usize, dt: f64| -> GridDensity {
        let f0 = GridDensity::gaussian(-8.0, 8.0, -8.0, 8.0, nx, nx, 1.0, 1.0).unwrap();
        solve_vpfp(
            f0,
            KernelSpec::exact(InteractionSign::Repulsive),
            dt,
            0.4,
            0,
            SolverOptions::default(),
        )
        .unwrap()
        .final_density
    };
    let restrict = |f: &GridDensity| -> GridDensity {
        let (nx, nv) = (f.nx / 2, f.nv / 2);
        let mut g = GridDensity::zeros(f.x_min, f.x_max, f.v_min, f.v_max, nx, nv).unwrap();
        for ix in 0..nx {
            for iv in 0..nv {
                g.values[ix * nv + iv] = (f.at(2 * ix, 2 * iv)
                    + f.at(2 * ix + 1, 2 * iv)
                    + f.at(2 * ix, 2 * iv + 1)
                    + f.at(2 * ix + 1, 2 * iv + 1))
                    / 4.0;
            }
        }
        g
    };
    let d_inf = |a: &GridDensity, b: &GridDensity| -> f64 {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max)
    };
    let f1 = run(96, 0.05);
    let f2 = run(192, 0.025);
    let f3 = run(384, 0.0125);
    let e1 = d_inf(&f1, &restrict(&f2));
    let e2 = d_inf(&restrict(&f2), &restrict(&restrict(&f3)));
    let order = (e1 / e2).log2();
    let order_ok = order >= 1.5;
    let monotone_ok = e2 < e1;

    report(
        "06 pde-guarantees",
        mass_ok && boundary_ok && fk_ok && rho_ok && order_ok && monotone_ok,
        &format!(
            "mass drift {:.2e} < 1e-4; boundary {boundary:.2e} < 1e-6; norm bounds hold; order {order:.2} >= 1.5",
            pde.mass_drift_max
        ),
    );
}

#[test]
fn criterion_07_ou_exactness() {
    let draws = 100_000;
    let (v0, t) = (0.7, 1.0);
    let noise = NoiseStreamSpec::new(SEED, 7000);
    let initial = ParticleState::new(0.0, vec![0.0; draws], vec![v0; draws]).unwrap();
    let cfg = IntegratorConfig::new(1e-3, t, Scheme::SplittingExactOu).unwrap();
    let rec = simulate_linear_sde_paths(&initial, &FieldHistory::zero(), &cfg, &noise, 0).unwrap();
    let vs = rec.velocities.last().unwrap();
    let mean = v0 * (-t).exp();
    let sd = (1.0 - (-2.0 * t) .exp()).sqrt();
    let cdf = move |x: f64| {
        0.5 * statrs::function::erf::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
    };
    let ks = ks_distance(vs, &cdf);
    let ks_ok = ks < 0.01;

    // Gaussian initial velocities for the first-moment decay bound.
    let initial = ParticleState::gaussian_iid(draws, 1.0, 1.0, &noise).unwrap();
    let rec = simulate_linear_sde_paths(&initial, &FieldHistory::zero(), &cfg, &noise, 0).unwrap();
    let abs_w: Vec<f64> = rec.velocities.last().unwrap().iter().map(|w| w.abs()).collect();
    let m = abs_w.iter().sum::<f64>() / draws as f64;
    let var =
        abs_w.iter().map(|w| (w - m) * (w - m)).sum::<f64>() / (draws as f64 - 1.0);
    let se = (var / draws as f64).sqrt();
    let bound = (-t).exp() * (2.0 / std::f64::consts::PI).sqrt() + 2.0;
    let moment_ok = m <= bound + 3.0 * se;

    report(
        "07 ou-exactness",
        ks_ok && moment_ok,
        &format!("KS {ks:.5} < 0.01; E|W_t| {m:.4} <= {bound:.4}"),
    );
}

#[test]
fn criterion_08_rope_inequality() {
    let noise = NoiseStreamSpec::new(SEED, 8000);
    let mut violations = 0usize;
    let total = 1_000_000usize;
    for k in 0..total {
        let g = |j: u64| 3.0 * noise.gaussian(StreamClass::InitialPosition, j, k as u64);
        let (x, xbar, y, ybar) = (g(0), g(1), g(2), g(3));
        if !rope_majorant_holds(x, xbar, y, ybar) {
            violations += 1;
        }
        // Adversarial near-tie variant sharing coordinates.
        if !rope_majorant_holds(x, x, y, y + 1e-14 * x) {
            violations += 1;
        }
    }
    report(
        "08 rope-inequality",
        violations == 0,
        &format!("{total} random + {total} near-tie quadruples, {violations} violations"),
    );
}

#[test]
fn criterion_09_mollification_cauchy() {
    let mut cfg = full_config();
    cfg.t = 0.5;
    cfg.cauchy_n = 64;
    cfg.cauchy_replicas = 64;
    let rep = cauchy_eta_check(&cfg, 0.2, 0.1).expect("cauchy");
    report(
        "09 mollification-cauchy",
        rep.check.pass,
        &format!(
            "mean sup discrepancy {:.4} ± {:.4} <= bound {:.3e} (K = {:.3})",
            rep.mean, rep.std_err, rep.bound, rep.k_const
        ),
    );
}

#[test]
fn criterion_10_reproducibility_and_smoke_budget() {
    let exe = env!("CARGO_BIN_EXE_vpfp-lab");
    let tmp = std::env::temp_dir().join(format!("vpfp_accept_{}", std::process::id()));
    let run = |name: &str, cmd: &str| {
        let out_dir = tmp.join(name);
        let start = std::time::Instant::now();
        let status = std::process::Command::new(exe)
            .args([
                cmd,
                "--seed",
                "12345",
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .stdout(std::process::Stdio::null())
            .status()
            .expect("spawn tool");
        (out_dir, status, start.elapsed())
    };

    let (dir_a, status_a, wall_a) = run("check_a", "check");
    let (dir_b, status_b, _) = run("check_b", "check");
    assert!(status_a.success() && status_b.success(), "check must pass");
    let csv_a = std::fs::read(dir_a.join("check_assertions.csv")).unwrap();
    let csv_b = std::fs::read(dir_b.join("check_assertions.csv")).unwrap();
    let identical_check = csv_a == csv_b;

    let (sim_a, sa, _) = run("sim_a", "simulate");
    let (sim_b, sb, _) = run("sim_b", "simulate");
    assert!(sa.success() && sb.success());
    let t_a = std::fs::read(sim_a.join("trajectory.csv")).unwrap();
    let t_b = std::fs::read(sim_b.join("trajectory.csv")).unwrap();
    let s_a = std::fs::read(sim_a.join("series.csv")).unwrap();
    let s_b = std::fs::read(sim_b.join("series.csv")).unwrap();
    let identical_sim = t_a == t_b && s_a == s_b;

    // Manifest lists outputs that exist.
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir_a.join("manifest.json")).unwrap()).unwrap();
    let outputs_exist = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| std::path::Path::new(p.as_str().unwrap()).exists());

    std::fs::remove_dir_all(&tmp).ok();
    let budget_ok = wall_a.as_secs_f64() < 60.0;
    report(
        "10 reproducibility",
        identical_check && identical_sim && outputs_exist && budget_ok,
        &format!(
            "byte-identical CSVs; manifest outputs exist; smoke check in {:.2}s < 60s",
            wall_a.as_secs_f64()
        ),
    );
}
