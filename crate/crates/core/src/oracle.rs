//! Brute-force references for the closed-form message computations.
//!
//! Nothing in here calls the table formulas of [`crate::multiplier`] or the
//! recursive sweeps of [`crate::state_space`]:
//!
//! * [`em_message_quadrature`] integrates `log g(x, y, θ)` against the local
//!   posterior on a tensor grid and fits the quadratic in θ;
//! * [`condition_joint`] builds the joint moments of `(X, Y)` and conditions
//!   on the backward message like a Kalman update;
//! * [`dense_smoother`] conditions the full joint of `(X₀, U₁…U_N)` on all
//!   observations at once;
//! * [`mc_moments`] samples the trace identity for `E[Xᵀ W Y]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::GaussianMoment;
use crate::multiplier::{
    em_message, em_message_fixed_y, marginals, MultiplierKind, MultiplierMarginals, MultiplierSpec,
    Noise,
};
use crate::state_space::{log_likelihood, LinearModel, Observations};

/// Tensor grid in whitened coordinates of the local posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub points_per_dim: usize,
    /// Half width of the grid in posterior standard deviations.
    pub half_width: f64,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid {
            points_per_dim: 32,
            half_width: 8.0,
        }
    }
}

/// Quadratic fitted to `θ ↦ E[log g(X, Y, θ)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureFit {
    pub weight: DMatrix<f64>,
    pub weighted_mean: DVector<f64>,
    /// Largest fit residual relative to `max(1, max |η|)`.
    pub residual: f64,
}

/// Probe points around `center`: the center, `center ± e_i`,
/// `center + e_i + e_j` and three random offsets.
pub fn default_probes(center: &DVector<f64>, seed: u64) -> Vec<DVector<f64>> {
    let d = center.len();
    let mut out = vec![center.clone()];
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut p = center.clone();
            p[i] += s;
            out.push(p);
        }
        for j in i + 1..d {
            let mut p = center.clone();
            p[i] += 1.0;
            p[j] += 1.0;
            out.push(p);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..3 {
        out.push(center + DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)));
    }
    out
}

fn lu_inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    m.clone().try_inverse().ok_or(Error::SingularSystem(what))
}

/// Symmetric square root factor `S` with `S Sᵀ = M` for a PSD `M`.
fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let mut q = e.eigenvectors;
    for (i, l) in e.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        q.column_mut(i).scale_mut(s);
    }
    q
}

/// Numerical EM message: quadrature of `log g` against the local posterior
/// of `(X, Z)` for `Θ = θ̂`, fitted as `c + bᵀθ - ½ θᵀ W θ` over `probes`.
///
/// Both incoming messages must have invertible covariances. Fails with
/// [`Error::IllConditionedFit`] if the fit residual exceeds `1e-6`.
pub fn em_message_quadrature(
    spec: &MultiplierSpec,
    theta_hat: &DVector<f64>,
    fwd_x: &GaussianMoment,
    bwd_y: &GaussianMoment,
    grid: &QuadratureGrid,
    probes: &[DVector<f64>],
) -> Result<QuadratureFit> {
    if grid.points_per_dim < 2 || !grid.half_width.is_finite() || grid.half_width <= 0.0 {
        return Err(Error::invalid(
            "grid",
            "need >= 2 points and a positive width",
        ));
    }
    let (n, m) = (spec.n(), spec.m());
    let d = spec.theta_dim();
    let n_coef = 1 + d + d * (d + 1) / 2;
    if probes.len() < n_coef {
        return Err(Error::invalid(
            "probes",
            format!("{} probes cannot fit {n_coef} coefficients", probes.len()),
        ));
    }
    let a_hat = spec.build_a(theta_hat)?;
    // Z = L E with E standard normal on the range of V_Z.
    let l = {
        let e = SymmetricEigen::new(spec.v_z().clone());
        let keep: Vec<usize> = (0..m).filter(|&i| e.eigenvalues[i] > 1e-14).collect();
        DMatrix::from_fn(m, keep.len(), |i, j| {
            e.eigenvectors[(i, keep[j])] * e.eigenvalues[keep[j]].sqrt()
        })
    };
    let r = l.ncols();
    let dim = n + r;
    let p_z = spec
        .v_z()
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(Error::dims)?;

    let w_fx = lu_inverse(fwd_x.cov(), "forward covariance")?;
    let w_by = lu_inverse(bwd_y.cov(), "backward covariance")?;
    let (m_fx, m_by) = (fwd_x.mean().clone(), bwd_y.mean().clone());

    // w = (x, e), y = A x + L e.
    let mut h = DMatrix::zeros(m, dim);
    h.view_mut((0, 0), (m, n)).copy_from(&a_hat);
    h.view_mut((0, n), (m, r)).copy_from(&l);
    // Grid placement only: the exact posterior of w. Any error here would
    // show up as a quadrature mismatch, not mask one.
    let mut prec = h.transpose() * &w_by * &h;
    {
        let mut top = prec.view_mut((0, 0), (n, n));
        top += &w_fx;
    }
    for i in 0..r {
        prec[(n + i, n + i)] += 1.0;
    }
    let mut lin = h.transpose() * &w_by * &m_by;
    {
        let mut top = lin.rows_mut(0, n);
        top += &w_fx * &m_fx;
    }
    let cov = lu_inverse(&prec, "quadrature placement")?;
    let center = &cov * lin;
    let chol = psd_factor(&cov);

    // Unnormalized posterior density of w, written out so that the grid
    // loop does not allocate. Also fills in y = H w.
    let log_density = |w: &[f64], y: &mut [f64]| -> f64 {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..dim).map(|j| h[(i, j)] * w[j]).sum();
        }
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += (w[i] - m_fx[i]) * w_fx[(i, j)] * (w[j] - m_fx[j]);
            }
        }
        q += w[n..].iter().map(|e| e * e).sum::<f64>();
        for i in 0..m {
            for j in 0..m {
                q += (y[i] - m_by[i]) * w_by[(i, j)] * (y[j] - m_by[j]);
            }
        }
        -0.5 * q
    };
    let log_peak = log_density(center.as_slice(), &mut vec![0.0; m]);

    let p = grid.points_per_dim;
    let step = 2.0 * grid.half_width / (p - 1) as f64;
    let total = p
        .checked_pow(dim as u32)
        .ok_or(Error::invalid("grid", "too many points"))?;
    let stride = n + m;
    // Grid sums of the weight and of v vᵀ with v = (x, y).
    // Fixed chunks summed in index order keep the result independent of the
    // thread count.
    const CHUNK: usize = 4096;
    let partials: Vec<(f64, Vec<f64>)> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut mass = 0.0;
            let mut mom = vec![0.0; stride * stride];
            let mut z = vec![0.0; dim];
            let mut w = vec![0.0; dim];
            let mut v = vec![0.0; stride];
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let mut rest = idx;
                let mut tw = 1.0;
                for zi in z.iter_mut() {
                    let k = rest % p;
                    rest /= p;
                    *zi = -grid.half_width + step * k as f64;
                    if k == 0 || k == p - 1 {
                        tw *= 0.5;
                    }
                }
                if z.iter().map(|v| v * v).sum::<f64>() > 90.0 {
                    continue;
                }
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi = center[i] + (0..dim).map(|j| chol[(i, j)] * z[j]).sum::<f64>();
                }
                v[..n].copy_from_slice(&w[..n]);
                let wt = tw * (log_density(&w, &mut v[n..]) - log_peak).exp();
                mass += wt;
                for i in 0..stride {
                    let wi = wt * v[i];
                    for j in i..stride {
                        mom[i * stride + j] += wi * v[j];
                    }
                }
            }
            (mass, mom)
        })
        .collect();
    let mut mass = 0.0;
    let mut moments = vec![0.0; stride * stride];
    for (m, mom) in &partials {
        mass += m;
        moments.iter_mut().zip(mom).for_each(|(x, y)| *x += y);
    }
    let second = DMatrix::from_fn(stride, stride, |i, j| {
        moments[i.min(j) * stride + i.max(j)] / mass
    });

    // E[(y - A x)ᵀ V_Z⁺ (y - A x)] from the grid moments of (x, y).
    let eta: Vec<f64> = probes
        .iter()
        .map(|th| -> Result<f64> {
            let a = spec.build_a(th)?;
            let mut t = DMatrix::zeros(m, stride);
            t.view_mut((0, 0), (m, n)).copy_from(&(-a));
            t.view_mut((0, n), (m, m)).fill_with_identity();
            let e_res = &t * &second * t.transpose();
            Ok(-0.5 * (&p_z * e_res).trace())
        })
        .collect::<Result<_>>()?;

    // η(θ) = c + b'ᵀδ - ½ δᵀWδ with δ = θ - θ̂.
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let design = DMatrix::from_fn(probes.len(), n_coef, |row, col| {
        let delta = &probes[row] - theta_hat;
        if col == 0 {
            1.0
        } else if col <= d {
            delta[col - 1]
        } else {
            let (i, j) = pairs[col - 1 - d];
            if i == j {
                -0.5 * delta[i] * delta[i]
            } else {
                -delta[i] * delta[j]
            }
        }
    });
    let rhs = DVector::from_vec(eta.clone());
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(Error::dims)?;
    let fitted = &design * &coef;
    let scale = eta.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let residual = (fitted - rhs).amax() / scale;
    if residual > 1e-6 {
        return Err(Error::IllConditionedFit { residual });
    }
    let mut w = DMatrix::zeros(d, d);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        w[(i, j)] = coef[1 + d + k];
        w[(j, i)] = coef[1 + d + k];
    }
    let b = coef.rows(1, d).into_owned() + &w * theta_hat;
    Ok(QuadratureFit {
        weight: w,
        weighted_mean: b,
        residual,
    })
}

/// Local marginals by conditioning the joint of `(X, Y)` on the backward
/// message, treated as a noisy observation of `Y`.
pub fn condition_joint(
    spec: &MultiplierSpec,
    theta_hat: &DVector<f64>,
    fwd_x: &GaussianMoment,
    bwd_y: &GaussianMoment,
) -> Result<MultiplierMarginals> {
    let (n, m) = (spec.n(), spec.m());
    if fwd_x.dim() != n || bwd_y.dim() != m {
        return Err(Error::dims("message dimensions do not match the spec"));
    }
    let a = spec.build_a(theta_hat)?;
    let v = fwd_x.cov();
    let mut joint = DMatrix::zeros(n + m, n + m);
    joint.view_mut((0, 0), (n, n)).copy_from(v);
    let vat = v * a.transpose();
    joint.view_mut((0, n), (n, m)).copy_from(&vat);
    joint.view_mut((n, 0), (m, n)).copy_from(&vat.transpose());
    joint
        .view_mut((n, n), (m, m))
        .copy_from(&(&a * &vat + spec.v_z()));
    let mut mean = DVector::zeros(n + m);
    mean.rows_mut(0, n).copy_from(fwd_x.mean());
    mean.rows_mut(n, m).copy_from(&(&a * fwd_x.mean()));

    let cross = joint.columns(n, m).into_owned();
    let s = joint.view((n, n), (m, m)) + bwd_y.cov();
    let s_inv = lu_inverse(&s, "innovation covariance")?;
    let gain = &cross * s_inv;
    let post_mean = &mean + &gain * (bwd_y.mean() - mean.rows(n, m));
    let post_cov = &joint - &gain * cross.transpose();
    Ok(MultiplierMarginals {
        m_x: post_mean.rows(0, n).into_owned(),
        m_y: post_mean.rows(n, m).into_owned(),
        v_x: post_cov.view((0, 0), (n, n)).into_owned(),
        v_xy: post_cov.view((0, n), (n, m)).into_owned(),
    })
}

/// Monte Carlo estimate of `E[Xᵀ W Y]` for `Y = A X + Z`, next to the
/// closed form `tr(W V_{XY}ᵀ) + m_Xᵀ W m_Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMoments {
    pub sample_mean: f64,
    pub std_error: f64,
    pub closed_form: f64,
}

pub fn mc_moments(
    a: &DMatrix<f64>,
    fwd_x: &GaussianMoment,
    v_z: &DMatrix<f64>,
    w: &DMatrix<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<McMoments> {
    let (m, n) = a.shape();
    if fwd_x.dim() != n || v_z.shape() != (m, m) || w.shape() != (n, m) {
        return Err(Error::dims("mc_moments: inconsistent shapes"));
    }
    if n_samples < 10_000 {
        return Err(Error::invalid("n_samples", "need at least 10^4"));
    }
    let sx = psd_factor(fwd_x.cov());
    let sz = psd_factor(v_z);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n_samples {
        let ex = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let ez = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let x = fwd_x.mean() + &sx * ex;
        let y = a * &x + &sz * ez;
        let v = (x.transpose() * w * y)[(0, 0)];
        sum += v;
        sum2 += v * v;
    }
    let k = n_samples as f64;
    let mean = sum / k;
    let var = (sum2 / k - mean * mean) * k / (k - 1.0);
    let v_xy = fwd_x.cov() * a.transpose();
    let m_y = a * fwd_x.mean();
    let closed = (w * v_xy.transpose()).trace() + (fwd_x.mean().transpose() * w * m_y)[(0, 0)];
    Ok(McMoments {
        sample_mean: mean,
        std_error: (var.max(0.0) / k).sqrt(),
        closed_form: closed,
    })
}

/// `log p(y | θ)` at each grid point.
pub fn likelihood_grid(
    model: &LinearModel,
    y: &Observations,
    grid: &[DVector<f64>],
) -> Result<Vec<f64>> {
    grid.iter().map(|t| log_likelihood(model, t, y)).collect()
}

/// Smoothed state posteriors and evidence from the dense joint Gaussian.
#[derive(Debug, Clone)]
pub struct DenseSmoother {
    /// Posterior of `X_0 … X_N`.
    pub states: Vec<GaussianMoment>,
    pub log_likelihood: f64,
}

/// Conditions the joint of `(X₀, U₁ … U_N)` on `y`. Cubic in `N`; meant for
/// short records. Requires a proper `X₀` prior.
pub fn dense_smoother(
    model: &LinearModel,
    theta: &DVector<f64>,
    y: &Observations,
) -> Result<DenseSmoother> {
    let n = model.order();
    let len = model.len();
    if theta.len() != n || y.len() != len {
        return Err(Error::dims("dense_smoother: θ or y has the wrong length"));
    }
    let prior = model.x0_prior().to_moment()?;
    let dim = n + len;
    let mut mu = DVector::zeros(dim);
    mu.rows_mut(0, n).copy_from(prior.mean());
    let mut p = DMatrix::zeros(dim, dim);
    p.view_mut((0, 0), (n, n)).copy_from(prior.cov());
    for j in 0..len {
        p[(n + j, n + j)] = model.sigma_u2();
    }

    // x_k = S_k v.
    let a = model.transition(theta);
    let c = model.observation(theta);
    let mut maps = Vec::with_capacity(len + 1);
    let mut s = DMatrix::zeros(n, dim);
    s.view_mut((0, 0), (n, n)).fill_with_identity();
    maps.push(s.clone());
    for k in 1..=len {
        s = &a * s;
        s[(0, n + k - 1)] += 1.0;
        maps.push(s.clone());
    }
    let phi = DMatrix::from_fn(len, dim, |k, j| c.dot(&maps[k + 1].column(j)));

    let cov_y = &phi * &p * phi.transpose() + DMatrix::identity(len, len) * model.sigma_z2();
    let chol = cov_y
        .clone()
        .cholesky()
        .ok_or(Error::SingularSystem("output covariance"))?;
    let yv = DVector::from_column_slice(y.as_slice());
    let resid = &yv - &phi * &mu;
    let alpha = chol.solve(&resid);
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let ll = -0.5 * (len as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + resid.dot(&alpha));

    let pphi = &p * phi.transpose();
    let post_mu = &mu + &pphi * alpha;
    let post_p = &p - &pphi * chol.solve(&pphi.transpose());
    let states = maps
        .iter()
        .map(|s| GaussianMoment::new_unchecked(s * &post_mu, s * &post_p * s.transpose()))
        .collect();
    Ok(DenseSmoother {
        states,
        log_likelihood: ll,
    })
}

/// A randomly drawn multiplier node with incoming messages.
#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: MultiplierSpec,
    pub theta: DVector<f64>,
    pub fwd_x: GaussianMoment,
    pub bwd_y: GaussianMoment,
}

impl Instance {
    /// Plain-data copy of the inputs, for reproducing a failing case.
    pub fn record(&self) -> InstanceRecord {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        InstanceRecord {
            kind: self.spec.kind().name(),
            n: self.spec.n(),
            m: self.spec.m(),
            v_z: rows(self.spec.v_z()),
            theta: self.theta.as_slice().to_vec(),
            fwd_mean: self.fwd_x.mean().as_slice().to_vec(),
            fwd_cov: rows(self.fwd_x.cov()),
            bwd_mean: self.bwd_y.mean().as_slice().to_vec(),
            bwd_cov: rows(self.bwd_y.cov()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub kind: &'static str,
    pub n: usize,
    pub m: usize,
    pub v_z: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub fwd_mean: Vec<f64>,
    pub fwd_cov: Vec<Vec<f64>>,
    pub bwd_mean: Vec<f64>,
    pub bwd_cov: Vec<Vec<f64>>,
}

/// Random SPD matrix `B Bᵀ + floor·I`.
pub fn random_spd<R: Rng>(rng: &mut R, d: usize, floor: f64) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(d, d) * floor
}

fn random_vec<R: Rng>(rng: &mut R, d: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-r..r))
}

/// Random instance of `kind` with `n, m ≤ max_dim` and well-conditioned
/// messages.
pub fn random_instance<R: Rng>(kind: MultiplierKind, max_dim: usize, rng: &mut R) -> Instance {
    let n = rng.random_range(1..=max_dim);
    let spec = match kind {
        MultiplierKind::InnerProduct => {
            MultiplierSpec::inner_product(n, rng.random_range(0.2..2.0))
        }
        MultiplierKind::Autoregression => {
            MultiplierSpec::autoregression(n, rng.random_range(0.2..2.0))
        }
        MultiplierKind::ScalarTimesVector => {
            MultiplierSpec::scalar_times_vector(random_spd(rng, n, 0.3))
        }
        MultiplierKind::Componentwise => MultiplierSpec::componentwise(random_spd(rng, n, 0.3)),
        MultiplierKind::GeneralMatrix => {
            let m = rng.random_range(1..=max_dim);
            MultiplierSpec::new(kind, n, m, Noise::Matrix(random_spd(rng, m, 0.3)))
        }
    }
    .expect("random spec is valid");
    let theta = random_vec(rng, spec.theta_dim(), 1.5);
    let fwd_x = GaussianMoment::new(random_vec(rng, n, 2.0), random_spd(rng, n, 0.2))
        .expect("SPD by construction");
    let bwd_y = GaussianMoment::new(
        random_vec(rng, spec.m(), 2.0),
        random_spd(rng, spec.m(), 0.2),
    )
    .expect("SPD by construction");
    Instance {
        spec,
        theta,
        fwd_x,
        bwd_y,
    }
}

/// `‖a - b‖_F / ‖b‖_F`, with the denominator floored at `1e-8`.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-8)
}

fn rel_err_v(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-8)
}

/// Outcome of one verification case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub instances: usize,
    /// Inputs of the instance with the largest error.
    pub worst: Option<InstanceRecord>,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

fn track(worst: &mut f64, record: &mut Option<InstanceRecord>, err: f64, inst: &Instance) {
    // NaN counts as the worst possible error.
    if err.is_nan() || err > *worst || record.is_none() {
        *worst = if err.is_nan() {
            f64::INFINITY
        } else {
            err.max(*worst)
        };
        *record = Some(inst.record());
    }
}

/// Closed-form EM message vs quadrature, worst relative error over
/// `instances` random cases of `kind`. `fault` perturbs the closed form.
pub fn check_em_message_kind(
    kind: MultiplierKind,
    instances: usize,
    seed: u64,
    fault: bool,
) -> Result<CaseResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = QuadratureGrid::default();
    let mut worst = 0.0f64;
    let mut record = None;
    for i in 0..instances {
        let inst = random_instance(kind, 2, &mut rng);
        let marg = marginals(&inst.spec, &inst.theta, &inst.fwd_x, &inst.bwd_y)?;
        let mut msg = em_message(&inst.spec, &marg)?;
        if fault {
            msg = msg.scaled(1.0 + 1e-3);
        }
        let probes = default_probes(&inst.theta, seed ^ i as u64);
        let fit = em_message_quadrature(
            &inst.spec,
            &inst.theta,
            &inst.fwd_x,
            &inst.bwd_y,
            &grid,
            &probes,
        )?;
        let err = rel_err(msg.weight(), &fit.weight)
            .max(rel_err_v(msg.weighted_mean(), &fit.weighted_mean));
        track(&mut worst, &mut record, err, &inst);
    }
    Ok(CaseResult {
        name: format!("em_message/{}", kind.name()),
        max_rel_err: worst,
        tolerance: 1e-6,
        instances,
        worst: record,
    })
}

/// Closed-form local marginals vs joint conditioning.
pub fn check_marginals_kind(
    kind: MultiplierKind,
    instances: usize,
    seed: u64,
    fault: bool,
) -> Result<CaseResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut record = None;
    for _ in 0..instances {
        let inst = random_instance(kind, 3, &mut rng);
        let mut got = marginals(&inst.spec, &inst.theta, &inst.fwd_x, &inst.bwd_y)?;
        if fault {
            got.v_xy *= 1.0 + 1e-6;
        }
        let want = condition_joint(&inst.spec, &inst.theta, &inst.fwd_x, &inst.bwd_y)?;
        let err = rel_err_v(&got.m_x, &want.m_x)
            .max(rel_err_v(&got.m_y, &want.m_y))
            .max(rel_err(&got.v_x, &want.v_x))
            .max(rel_err(&got.v_xy, &want.v_xy));
        track(&mut worst, &mut record, err, &inst);
    }
    Ok(CaseResult {
        name: format!("marginals/{}", kind.name()),
        max_rel_err: worst,
        tolerance: 1e-9,
        instances,
        worst: record,
    })
}

/// Exactly observed inner-product output vs the general inner-product
/// message with `←V_Y = 0`.
pub fn check_fixed_output(instances: usize, seed: u64, fault: bool) -> Result<CaseResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut record = None;
    for _ in 0..instances {
        let inst = random_instance(MultiplierKind::InnerProduct, 3, &mut rng);
        let s2 = inst.spec.sigma2().expect("scalar noise");
        let y = inst.bwd_y.mean()[0];
        let mut fixed = em_message_fixed_y(&inst.fwd_x.to_weight()?, y, s2, &inst.theta)?;
        if fault {
            fixed = fixed.scaled(1.0 + 1e-6);
        }
        let exact = GaussianMoment::new(inst.bwd_y.mean().clone(), DMatrix::zeros(1, 1))?;
        let marg = marginals(&inst.spec, &inst.theta, &inst.fwd_x, &exact)?;
        let general = em_message(&inst.spec, &marg)?;
        let err = rel_err(fixed.weight(), general.weight())
            .max(rel_err_v(fixed.weighted_mean(), general.weighted_mean()));
        track(&mut worst, &mut record, err, &inst);
    }
    Ok(CaseResult {
        name: "em_message/fixed_output".into(),
        max_rel_err: worst,
        tolerance: 1e-10,
        instances,
        worst: record,
    })
}

/// Every table check. `fault` names a multiplier kind whose closed-form
/// results are deliberately perturbed.
pub fn check_tables(
    seed: u64,
    instances: usize,
    fault: Option<MultiplierKind>,
) -> Result<Vec<CaseResult>> {
    let mut out = Vec::new();
    for (i, kind) in MultiplierKind::ALL.into_iter().enumerate() {
        let f = fault == Some(kind);
        let s = seed.wrapping_add(i as u64);
        out.push(check_em_message_kind(kind, instances, s, f)?);
        out.push(check_marginals_kind(
            kind,
            instances,
            s.wrapping_add(100),
            f,
        )?);
    }
    out.push(check_fixed_output(
        instances,
        seed.wrapping_add(200),
        fault == Some(MultiplierKind::InnerProduct),
    )?);
    Ok(out)
}
