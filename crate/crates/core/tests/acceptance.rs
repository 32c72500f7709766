//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p emfg --test acceptance`.

use std::time::{Duration, Instant};

use emfg::em::{run_em, EmConfig, Init};
use emfg::gaussian::GaussianMoment;
use emfg::multiplier::{em_message, marginals, MultiplierKind, MultiplierSpec};
use emfg::oracle::{
    check_em_message_kind, check_fixed_output, check_marginals_kind, dense_smoother,
    likelihood_grid, mc_moments, random_instance, random_spd, rel_err,
};
use emfg::state_space::{log_likelihood, simulate, sweep, LinearModel, ModelKind, Observations};
use emfg::vectorize::{cvect, kron, rvect};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Coefficients of a stable AR model with real roots in `(-0.8, 0.8)`.
fn stable_ar<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    // Π (z - r_i) = zⁿ - θ₁ zⁿ⁻¹ - … - θ_n.
    let mut poly = vec![1.0];
    for _ in 0..n {
        let r: f64 = rng.random_range(-0.8..0.8);
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= r * c;
        }
        poly = next;
    }
    DVector::from_fn(n, |i, _| -poly[i + 1])
}

fn random_model<R: Rng>(rng: &mut R, kind: ModelKind, len: usize) -> (LinearModel, DVector<f64>) {
    let n = rng.random_range(1..=3);
    let su = rng.random_range(0.5..2.0);
    let sz = rng.random_range(0.05..0.5);
    let model = LinearModel::new(kind, n, len, su, sz).unwrap();
    let theta = match kind {
        ModelKind::Fir => DVector::from_fn(n, |_, _| rng.random_range(-1.5..1.5)),
        ModelKind::Ar => stable_ar(rng, n),
    };
    (model, theta)
}

fn monotonicity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut jobs = Vec::new();
    for seed in 0..10u64 {
        let th = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
        jobs.push((ModelKind::Fir, th, 1000 + seed));
    }
    for seed in 0..10u64 {
        jobs.push((ModelKind::Ar, stable_ar(&mut rng, 2), 1100 + seed));
    }
    let results: Vec<(usize, f64)> = jobs
        .par_iter()
        .map(|(kind, th, seed)| {
            let m = LinearModel::new(*kind, th.len(), 500, 1.0, 0.1).unwrap();
            let sim = simulate(&m, th, *seed).unwrap();
            let cfg = EmConfig {
                max_iter: 50,
                tol: 1e-15,
                ..EmConfig::default()
            };
            let r = run_em(&m, &sim.y, &cfg).unwrap();
            let drops = r.log_liks.windows(2).map(|w| w[0] - w[1]);
            let bad = drops.clone().filter(|d| d.is_nan() || *d > 1e-9).count();
            (bad, drops.fold(f64::NEG_INFINITY, f64::max))
        })
        .collect();
    let elapsed = start.elapsed();
    let violations: usize = results.iter().map(|r| r.0).sum();
    let worst = results
        .iter()
        .map(|r| r.1)
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        violations == 0 && elapsed < Duration::from_secs(10),
        format!(
            "10 FIR (n=3) + 10 AR (n=2) runs, N=500, 50 iterations: {violations} violations, \
             largest drop {worst:.3e} (slack 1e-9), {:.2}s (budget 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn em_messages_vs_quadrature() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (i, kind) in MultiplierKind::ALL.into_iter().enumerate() {
        let r = check_em_message_kind(kind, 100, 2000 + i as u64, false).unwrap();
        worst = worst.max(r.max_rel_err);
        lines.push(format!("{}={:.1e}", kind.name(), r.max_rel_err));
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-6 && elapsed < Duration::from_secs(60),
        format!(
            "100 per kind, max rel err {worst:.2e} (tol 1e-6) [{}], {:.2}s (budget 60s)",
            lines.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

fn marginals_vs_conditioning() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (i, kind) in MultiplierKind::ALL.into_iter().enumerate() {
        let r = check_marginals_kind(kind, 100, 3000 + i as u64, false).unwrap();
        worst = worst.max(r.max_rel_err);
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-9 && elapsed < Duration::from_secs(5),
        format!(
            "100 per kind, max rel err {worst:.2e} (tol 1e-9), {:.3}s (budget 5s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn specializations() -> Outcome {
    let fixed = check_fixed_output(100, 4000, false).unwrap().max_rel_err;

    // General matrix with a single output row vs inner product.
    let mut rng = ChaCha8Rng::seed_from_u64(4001);
    let mut general = 0.0f64;
    for _ in 0..100 {
        let inst = random_instance(MultiplierKind::InnerProduct, 3, &mut rng);
        let s2 = inst.spec.sigma2().unwrap();
        let gm =
            MultiplierSpec::general_matrix(inst.spec.n(), DMatrix::from_element(1, 1, s2)).unwrap();
        let a = em_message(
            &inst.spec,
            &marginals(&inst.spec, &inst.theta, &inst.fwd_x, &inst.bwd_y).unwrap(),
        )
        .unwrap();
        let b = em_message(
            &gm,
            &marginals(&gm, &inst.theta, &inst.fwd_x, &inst.bwd_y).unwrap(),
        )
        .unwrap();
        general = general.max(rel_err(b.weight(), a.weight())).max(rel_err(
            &DMatrix::from_column_slice(b.dim(), 1, b.weighted_mean().as_slice()),
            &DMatrix::from_column_slice(a.dim(), 1, a.weighted_mean().as_slice()),
        ));
    }

    // Every kind with n = m = 1 and the same scalar noise.
    let mut scalar = 0.0f64;
    for _ in 0..100 {
        let s2: f64 = rng.random_range(0.2..2.0);
        let v = DMatrix::from_element(1, 1, s2);
        let specs = [
            MultiplierSpec::inner_product(1, s2).unwrap(),
            MultiplierSpec::scalar_times_vector(v.clone()).unwrap(),
            MultiplierSpec::componentwise(v.clone()).unwrap(),
            MultiplierSpec::autoregression(1, s2).unwrap(),
            MultiplierSpec::general_matrix(1, v).unwrap(),
        ];
        let th = DVector::from_element(1, rng.random_range(-1.5..1.5));
        let fwd = GaussianMoment::new(
            DVector::from_element(1, rng.random_range(-2.0..2.0)),
            DMatrix::from_element(1, 1, rng.random_range(0.2..2.0)),
        )
        .unwrap();
        let bwd = GaussianMoment::new(
            DVector::from_element(1, rng.random_range(-2.0..2.0)),
            DMatrix::from_element(1, 1, rng.random_range(0.2..2.0)),
        )
        .unwrap();
        let msgs: Vec<_> = specs
            .iter()
            .map(|s| em_message(s, &marginals(s, &th, &fwd, &bwd).unwrap()).unwrap())
            .collect();
        for m in &msgs[1..] {
            scalar = scalar.max(rel_err(m.weight(), msgs[0].weight())).max(
                (m.weighted_mean()[0] - msgs[0].weighted_mean()[0]).abs()
                    / msgs[0].weighted_mean()[0].abs().max(1e-8),
            );
        }
    }
    let worst = fixed.max(general).max(scalar);
    outcome(
        worst < 1e-10,
        format!(
            "exact output {fixed:.2e}, single-row matrix {general:.2e}, \
             all kinds at n=m=1 {scalar:.2e} (tol 1e-10, 100 instances each)"
        ),
    )
}

fn identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=4);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
        let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
        let w = random_spd(&mut rng, m, 0.0);
        let ax = &a * &x;
        let r = rvect(&a);

        let lhs = (ax.transpose() * &w * &ax)[(0, 0)];
        let rhs = (&r * kron(&w, &(&x * x.transpose())) * r.transpose())[(0, 0)];
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));

        let lhs = (ax.transpose() * &w * &y)[(0, 0)];
        let rhs = (&r * kron(&w, &DMatrix::identity(n, n)) * cvect(&(&x * y.transpose())))[(0, 0)];
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }

    let mut mc_fail = 0;
    let mut max_z = 0.0f64;
    for i in 0..20u64 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.5..1.5));
        let fwd = GaussianMoment::new(
            DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            random_spd(&mut rng, n, 0.1),
        )
        .unwrap();
        let v_z = random_spd(&mut rng, m, 0.1);
        let w = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let r = mc_moments(&a, &fwd, &v_z, &w, 100_000, 5100 + i).unwrap();
        let z = (r.sample_mean - r.closed_form).abs() / r.std_error;
        max_z = max_z.max(z);
        if z > 3.0 {
            mc_fail += 1;
        }
    }
    outcome(
        worst < 1e-12 && mc_fail == 0,
        format!(
            "stacking identities max rel err {worst:.2e} (tol 1e-12); Monte Carlo 20 cases, \
             largest deviation {max_z:.2} standard errors (limit 3)"
        ),
    )
}

fn smoothing_vs_dense() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let mut worst = 0.0f64;
    for kind in [ModelKind::Fir, ModelKind::Ar] {
        for _ in 0..50 {
            let len = rng.random_range(1..=5);
            let (m, th) = random_model(&mut rng, kind, len);
            let sim = simulate(&m, &th, rng.random()).unwrap();
            let s = sweep(&m, &th, &sim.y).unwrap();
            let dense = dense_smoother(&m, &th, &sim.y).unwrap();
            for k in 0..=len {
                let post = s.posterior(k).unwrap();
                let want = &dense.states[k];
                worst = worst.max(rel_err(post.cov(), want.cov())).max(rel_err(
                    &DMatrix::from_column_slice(post.dim(), 1, post.mean().as_slice()),
                    &DMatrix::from_column_slice(want.dim(), 1, want.mean().as_slice()),
                ));
            }
            let ll = log_likelihood(&m, &th, &sim.y).unwrap();
            worst =
                worst.max((ll - dense.log_likelihood).abs() / dense.log_likelihood.abs().max(1.0));
        }
    }
    outcome(
        worst < 1e-8,
        format!("100 models, N <= 5, max rel err {worst:.2e} (tol 1e-8)"),
    )
}

/// Central differences with step 1e-4.
fn gradient(m: &LinearModel, y: &Observations, th: &DVector<f64>) -> DVector<f64> {
    let h = 1e-4;
    let mut grid = Vec::new();
    for i in 0..th.len() {
        let mut up = th.clone();
        let mut dn = th.clone();
        up[i] += h;
        dn[i] -= h;
        grid.push(up);
        grid.push(dn);
    }
    let ll = likelihood_grid(m, y, &grid).unwrap();
    DVector::from_fn(th.len(), |i, _| (ll[2 * i] - ll[2 * i + 1]) / (2.0 * h))
}

fn stationary_point() -> Outcome {
    let cases = [
        (
            ModelKind::Fir,
            DVector::from_vec(vec![1.0, -0.5, 0.25]),
            0.1,
        ),
        (ModelKind::Ar, DVector::from_vec(vec![0.5, -0.3]), 0.1),
    ];
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for (i, (kind, th, sz)) in cases.into_iter().enumerate() {
        let m = LinearModel::new(kind, th.len(), 500, 1.0, sz).unwrap();
        let sim = simulate(&m, &th, 7000 + i as u64).unwrap();
        let cfg = EmConfig {
            max_iter: 100_000,
            tol: 1e-10,
            ..EmConfig::default()
        };
        let r = run_em(&m, &sim.y, &cfg).unwrap();
        let g = gradient(&m, &sim.y, r.theta()).norm();
        worst = worst.max(if r.converged { g } else { f64::INFINITY });
        notes.push(format!(
            "{kind:?}: |grad| {g:.2e} after {} iterations",
            r.iterations_used
        ));
    }
    outcome(worst < 1e-4, format!("{} (limit 1e-4)", notes.join("; ")))
}

fn consistency() -> Outcome {
    let th = DVector::from_vec(vec![1.0, 0.5]);
    // 10 dB: ‖θ‖² σ_U² / σ_Z² = 10.
    let sz = th.norm_squared() / 10.0;
    let median_err = |len: usize| -> f64 {
        let m = LinearModel::new(ModelKind::Fir, 2, len, 1.0, sz).unwrap();
        let mut errs: Vec<f64> = (0..20u64)
            .into_par_iter()
            .map(|seed| {
                let sim = simulate(&m, &th, 8000 + seed).unwrap();
                let cfg = EmConfig {
                    max_iter: 2000,
                    tol: 1e-8,
                    init: Init::Auto,
                    ..EmConfig::default()
                };
                (run_em(&m, &sim.y, &cfg).unwrap().theta() - &th).norm()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        0.5 * (errs[9] + errs[10])
    };
    let short = median_err(200);
    let long = median_err(2000);
    outcome(
        long < short,
        format!("median error N=200: {short:.4}, N=2000: {long:.4} (20 seeds)"),
    )
}

type Criterion = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("1 monotone log-likelihood", monotonicity),
        ("2 EM messages vs quadrature", em_messages_vs_quadrature),
        (
            "3 local marginals vs conditioning",
            marginals_vs_conditioning,
        ),
        ("4 specializations", specializations),
        ("5 identities", identities),
        ("6 smoothing vs dense joint", smoothing_vs_dense),
        ("7 stationary point", stationary_point),
        ("8 consistency", consistency),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
