//! FIR and autoregressive state space models with an unknown coefficient
//! vector θ.
//!
//! Both models share the state recursion `X_k = A X_{k-1} + b U_k` with
//! `b = e₁`, `U_k ~ N(0, σ_U²)`, and a scalar observation
//! `Y_k = cᵀ X_k + Z_k`, `Z_k ~ N(0, σ_Z²)`:
//!
//! | model | `A`                          | `c`  |
//! |-------|------------------------------|------|
//! | FIR   | shift matrix                 | `θ`  |
//! | AR    | companion matrix of `θ`      | `e₁` |
//!
//! Forward messages are carried in weight form so that a flat initial-state
//! prior is representable. Observations are folded into the state message
//! as rank-one weight updates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{spd_inverse, GaussianMoment, GaussianWeight, Tolerances};
use crate::multiplier::companion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fir,
    Ar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    kind: ModelKind,
    order: usize,
    len: usize,
    sigma_u2: f64,
    sigma_z2: f64,
    x0_prior: GaussianWeight,
}

impl LinearModel {
    /// Model of the given order `n` over `len` observations, with initial
    /// state prior `N(0, σ_U² I)`.
    pub fn new(
        kind: ModelKind,
        order: usize,
        len: usize,
        sigma_u2: f64,
        sigma_z2: f64,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("order", "must be >= 1"));
        }
        if len == 0 {
            return Err(Error::invalid("length", "must be >= 1"));
        }
        for (field, v) in [("sigma_u2", sigma_u2), ("sigma_z2", sigma_z2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("{v} must be > 0")));
            }
        }
        let x0_prior = GaussianWeight::new_unchecked(
            DMatrix::identity(order, order) / sigma_u2,
            DVector::zeros(order),
        );
        Ok(LinearModel {
            kind,
            order,
            len,
            sigma_u2,
            sigma_z2,
            x0_prior,
        })
    }

    /// Replaces the initial state prior. A zero weight matrix is the
    /// uninformative prior.
    pub fn with_x0_prior(mut self, prior: GaussianWeight) -> Result<Self> {
        if prior.dim() != self.order {
            return Err(Error::dims(format!(
                "x0 prior has dim {}, model order is {}",
                prior.dim(),
                self.order
            )));
        }
        GaussianWeight::new(prior.weight().clone(), prior.weighted_mean().clone())?;
        self.x0_prior = prior;
        Ok(self)
    }

    /// Same model over a different number of observations.
    pub fn with_len(mut self, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("length", "must be >= 1"));
        }
        self.len = len;
        Ok(self)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sigma_u2(&self) -> f64 {
        self.sigma_u2
    }

    pub fn sigma_z2(&self) -> f64 {
        self.sigma_z2
    }

    pub fn x0_prior(&self) -> &GaussianWeight {
        &self.x0_prior
    }

    /// First row of `A(θ)`; the remaining rows are the shift.
    fn transition_row(&self, theta: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            ModelKind::Fir => DVector::zeros(self.order),
            ModelKind::Ar => theta.clone(),
        }
    }

    /// State transition matrix `A(θ)`.
    pub fn transition(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        companion(&self.transition_row(theta))
    }

    /// Observation vector `c(θ)`.
    pub fn observation(&self, theta: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            ModelKind::Fir => theta.clone(),
            ModelKind::Ar => {
                let mut c = DVector::zeros(self.order);
                c[0] = 1.0;
                c
            }
        }
    }

    pub(crate) fn check_theta(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.order {
            return Err(Error::dims(format!(
                "θ has length {}, model order is {}",
                theta.len(),
                self.order
            )));
        }
        if !theta.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid("theta", "non-finite entry"));
        }
        Ok(())
    }

    fn check_obs(&self, y: &Observations) -> Result<()> {
        if y.len() != self.len {
            return Err(Error::dims(format!(
                "{} observations, model length is {}",
                y.len(),
                self.len
            )));
        }
        Ok(())
    }
}

/// Observed outputs `y_1 … y_N`, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations(Vec<f64>);

impl Observations {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if let Some(k) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "y",
                format!("entry {} is not finite", k + 1),
            ));
        }
        Ok(Observations(y))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `y_k` for `k` in `1..=N`.
    pub fn at(&self, k: usize) -> f64 {
        self.0[k - 1]
    }
}

/// A simulated data set together with its latent variables.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub y: Observations,
    /// `x_0 … x_N`.
    pub states: Vec<DVector<f64>>,
    /// `u_1 … u_N`.
    pub inputs: Vec<f64>,
}

/// Draws a data set from `model` with coefficients `theta`. Deterministic in
/// `seed`. `x_0` is drawn from the prior, or set to zero if the prior is not
/// a proper density.
pub fn simulate(model: &LinearModel, theta: &DVector<f64>, seed: u64) -> Result<Simulation> {
    model.check_theta(theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.order;
    let mut x = match model.x0_prior.to_moment() {
        Ok(g) => {
            let l = g.cov().clone().cholesky().map(|c| c.l());
            let e = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            match l {
                Some(l) => g.mean() + l * e,
                None => g.mean().clone(),
            }
        }
        Err(_) => DVector::zeros(n),
    };
    let a = model.transition(theta);
    let c = model.observation(theta);
    let (su, sz) = (model.sigma_u2.sqrt(), model.sigma_z2.sqrt());

    let mut states = Vec::with_capacity(model.len + 1);
    let mut inputs = Vec::with_capacity(model.len);
    let mut y = Vec::with_capacity(model.len);
    states.push(x.clone());
    for _ in 0..model.len {
        let u = su * sample_normal(&mut rng);
        let z = sz * sample_normal(&mut rng);
        let mut next = &a * &x;
        next[0] += u;
        x = next;
        y.push(c.dot(&x) + z);
        inputs.push(u);
        states.push(x.clone());
    }
    Ok(Simulation {
        y: Observations(y),
        states,
        inputs,
    })
}

fn sample_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Messages along the state edges `X_0 … X_N` for a fixed θ̂.
#[derive(Debug, Clone)]
pub struct SweepResult {
    /// `[0]` is the prior; `[k]` is the forward message at `X_k` before `y_k`.
    pub predicted: Vec<GaussianWeight>,
    /// `[0]` is the prior; `[k]` is the forward message at `X_k` including
    /// `y_1 … y_k`.
    pub fwd: Vec<GaussianWeight>,
    /// `[k]` is the backward message at `X_k` carrying `y_{k+1} … y_N`;
    /// `[N]` is flat.
    pub bwd: Vec<GaussianWeight>,
}

impl SweepResult {
    /// Smoothed posterior of `X_k` given all observations.
    pub fn posterior(&self, k: usize) -> Result<GaussianMoment> {
        self.fwd[k].combine_parallel(&self.bwd[k])?.to_moment()
    }

    /// The forward message at `X_k` in moment form, once it is proper.
    pub fn forward_moment(&self, k: usize) -> Result<GaussianMoment> {
        self.fwd[k].to_moment()
    }
}

/// Forward-backward sum-product sweep with θ̂ plugged into every section.
pub fn sweep(model: &LinearModel, theta: &DVector<f64>, y: &Observations) -> Result<SweepResult> {
    model.check_theta(theta)?;
    model.check_obs(y)?;
    let (predicted, fwd) = forward_pass(model, theta, y);
    let bwd = backward_pass(model, theta, y)?;
    Ok(SweepResult {
        predicted,
        fwd,
        bwd,
    })
}

pub(crate) fn forward_pass(
    model: &LinearModel,
    theta: &DVector<f64>,
    y: &Observations,
) -> (Vec<GaussianWeight>, Vec<GaussianWeight>) {
    let row = model.transition_row(theta);
    let c = model.observation(theta);
    let mut predicted = Vec::with_capacity(model.len + 1);
    let mut fwd = Vec::with_capacity(model.len + 1);
    predicted.push(model.x0_prior.clone());
    fwd.push(model.x0_prior.clone());
    for k in 1..=model.len {
        let p = predict(&fwd[k - 1], &row, model.sigma_u2);
        fwd.push(observe(&p, &c, y.at(k), model.sigma_z2));
        predicted.push(p);
    }
    (predicted, fwd)
}

pub(crate) fn backward_pass(
    model: &LinearModel,
    theta: &DVector<f64>,
    y: &Observations,
) -> Result<Vec<GaussianWeight>> {
    let row = model.transition_row(theta);
    let c = model.observation(theta);
    let n = model.order;
    let mut bwd = vec![GaussianWeight::uninformative(n); model.len + 1];
    for k in (1..=model.len).rev() {
        let with_obs = observe(&bwd[k], &c, y.at(k), model.sigma_z2);
        bwd[k - 1] = retrodict(&with_obs, &row, model.sigma_u2);
    }
    Ok(bwd)
}

/// Folds the observation `y = cᵀx + Z` into a state message.
pub(crate) fn observe(
    msg: &GaussianWeight,
    c: &DVector<f64>,
    y: f64,
    sigma_z2: f64,
) -> GaussianWeight {
    let w = msg.weight() + c * c.transpose() / sigma_z2;
    let wm = msg.weighted_mean() + c * (y / sigma_z2);
    GaussianWeight::new_unchecked(w, wm)
}

/// Weight-form time update through `x' = A x + e₁ u`, where `A` has first
/// row `row` and the shift below.
///
/// With `z = (x, u)` we have `z = G x' + N t` for a free scalar `t` (the
/// dropped last state component), so the outgoing message is the integral
/// over `t`. When the incoming message is flat along `N`, the integral is an
/// infinite constant and is dropped.
pub(crate) fn predict(msg: &GaussianWeight, row: &DVector<f64>, sigma_u2: f64) -> GaussianWeight {
    let n = msg.dim();
    let mut lambda = DMatrix::zeros(n + 1, n + 1);
    lambda.view_mut((0, 0), (n, n)).copy_from(msg.weight());
    lambda[(n, n)] = 1.0 / sigma_u2;
    let mut xi = DVector::zeros(n + 1);
    xi.rows_mut(0, n).copy_from(msg.weighted_mean());

    let mut g = DMatrix::zeros(n + 1, n);
    for i in 0..n - 1 {
        g[(i, i + 1)] = 1.0;
        g[(n, i + 1)] = -row[i];
    }
    g[(n, 0)] = 1.0;
    let mut nul = DVector::zeros(n + 1);
    nul[n - 1] = 1.0;
    nul[n] = -row[n - 1];

    let gt = g.transpose();
    let lg = &lambda * &g;
    let mut w = &gt * &lg;
    let mut wm = &gt * &xi;
    let ln = &lambda * &nul;
    let m = nul.dot(&ln);
    let scale = lambda.trace().max(f64::MIN_POSITIVE);
    if m > 1e-14 * scale {
        let cross = &gt * &ln;
        w -= &cross * cross.transpose() / m;
        wm -= &cross * (nul.dot(&xi) / m);
    }
    GaussianWeight::new_unchecked(w, wm)
}

/// Weight-form backward update through `x' = A x + e₁ u`: the message at
/// `x` given the message at `x'`.
pub(crate) fn retrodict(msg: &GaussianWeight, row: &DVector<f64>, sigma_u2: f64) -> GaussianWeight {
    let n = msg.dim();
    // H = [A  e₁] maps z = (x, u) to x'.
    let a = companion(row);
    let mut h = DMatrix::zeros(n, n + 1);
    h.view_mut((0, 0), (n, n)).copy_from(&a);
    h[(0, n)] = 1.0;
    let ht = h.transpose();
    let mut lambda = &ht * msg.weight() * &h;
    lambda[(n, n)] += 1.0 / sigma_u2;
    let xi = &ht * msg.weighted_mean();

    let m = lambda[(n, n)];
    let cross = lambda.view((0, n), (n, 1)).into_owned();
    let w = lambda.view((0, 0), (n, n)) - &cross * cross.transpose() / m;
    let wm = xi.rows(0, n) - cross.column(0) * (xi[n] / m);
    GaussianWeight::new_unchecked(w, wm.into_owned())
}

/// Exact `log p(y | θ̂)` from the one-step predictive densities of the
/// forward sweep.
pub fn log_likelihood(model: &LinearModel, theta: &DVector<f64>, y: &Observations) -> Result<f64> {
    model.check_theta(theta)?;
    model.check_obs(y)?;
    let row = model.transition_row(theta);
    let c = model.observation(theta);
    let mut msg = model.x0_prior.clone();
    let mut total = 0.0;
    for k in 1..=model.len {
        let p = predict(&msg, &row, model.sigma_u2);
        let (mean, var) = predictive(&p, &c, k)?;
        let s = var + model.sigma_z2;
        let e = y.at(k) - mean;
        total += -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + e * e / s);
        msg = observe(&p, &c, y.at(k), model.sigma_z2);
    }
    Ok(total)
}

/// Mean and variance of `cᵀX` under a weight-form message. Fails if `c`
/// has a component along a flat direction of the message.
fn predictive(msg: &GaussianWeight, c: &DVector<f64>, k: usize) -> Result<(f64, f64)> {
    let tol = Tolerances::default();
    if let Some(v) = spd_inverse(msg.weight(), tol.solve) {
        let m = &v * msg.weighted_mean();
        return Ok((c.dot(&m), (c.transpose() * &v * c)[(0, 0)]));
    }
    let eig = SymmetricEigen::new(msg.weight().clone());
    let lmax = eig.eigenvalues.amax();
    let cut = tol.solve.max(1e-12) * lmax.max(f64::MIN_POSITIVE);
    let cnorm = c.norm().max(f64::MIN_POSITIVE);
    let (mut mean, mut var) = (0.0, 0.0);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let q = eig.eigenvectors.column(i);
        let cq = q.dot(c);
        if l <= cut {
            if cq.abs() > 1e-9 * cnorm {
                return Err(Error::ImproperLikelihood(k));
            }
            continue;
        }
        mean += cq * q.dot(msg.weighted_mean()) / l;
        var += cq * cq / l;
    }
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn model_validation() {
        assert!(LinearModel::new(ModelKind::Fir, 0, 10, 1.0, 1.0).is_err());
        assert!(LinearModel::new(ModelKind::Fir, 2, 0, 1.0, 1.0).is_err());
        assert!(LinearModel::new(ModelKind::Ar, 2, 10, 0.0, 0.0).is_err());
        assert!(LinearModel::new(ModelKind::Ar, 2, 10, 1.0, -1.0).is_err());
        let m = LinearModel::new(ModelKind::Ar, 2, 10, 1.0, 1.0).unwrap();
        assert!(m
            .clone()
            .with_x0_prior(GaussianWeight::uninformative(3))
            .is_err());
        assert!(m.with_x0_prior(GaussianWeight::uninformative(2)).is_ok());
        assert!(Observations::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn simulate_is_deterministic() {
        let m = LinearModel::new(ModelKind::Ar, 2, 50, 1.0, 0.1).unwrap();
        let th = dvector![0.5, -0.3];
        let a = simulate(&m, &th, 9).unwrap();
        let b = simulate(&m, &th, 9).unwrap();
        assert_eq!(a.y, b.y);
        let c = simulate(&m, &th, 10).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn simulate_fir_zero_theta_is_pure_noise() {
        let m = LinearModel::new(ModelKind::Fir, 1, 100_000, 1.0, 0.3).unwrap();
        let sim = simulate(&m, &dvector![0.0], 4).unwrap();
        let n = sim.y.len() as f64;
        let mean = sim.y.as_slice().iter().sum::<f64>() / n;
        let var = sim
            .y
            .as_slice()
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n;
        assert!((var / 0.3 - 1.0).abs() < 0.05, "sample variance {var}");
    }

    #[test]
    fn simulate_respects_recursions() {
        let m = LinearModel::new(ModelKind::Fir, 3, 20, 1.0, 0.1).unwrap();
        let th = dvector![1.0, -0.5, 0.25];
        let sim = simulate(&m, &th, 1).unwrap();
        for k in 1..=20 {
            let x = &sim.states[k];
            assert_eq!(x[0], sim.inputs[k - 1]);
            assert_eq!(x[1], sim.states[k - 1][0]);
            assert_eq!(x[2], sim.states[k - 1][1]);
        }
    }

    #[test]
    fn fir_order_one_prediction_is_fresh_input() {
        let m = LinearModel::new(ModelKind::Fir, 1, 6, 2.5, 0.1).unwrap();
        let y = Observations::new(vec![0.3, -1.0, 2.0, 0.1, 0.0, 1.5]).unwrap();
        let s = sweep(&m, &dvector![0.7], &y).unwrap();
        for k in 1..=6 {
            let p = s.predicted[k].to_moment().unwrap();
            assert!((p.cov()[(0, 0)] - 2.5).abs() < 1e-14);
            assert!(p.mean()[0].abs() < 1e-14);
        }
    }

    #[test]
    fn ar_zero_theta_is_a_shift_register() {
        // With θ̂ = 0 the state holds the last n innovations. Each innovation
        // is seen once, at its own time step.
        let (su, sz) = (1.5, 0.5);
        let m = LinearModel::new(ModelKind::Ar, 3, 8, su, sz).unwrap();
        let y = Observations::new((0..8).map(|k| (k as f64 * 0.7).sin()).collect()).unwrap();
        let s = sweep(&m, &DVector::zeros(3), &y).unwrap();
        let post = su * sz / (su + sz);
        for k in 3..=8 {
            let p = s.predicted[k].to_moment().unwrap();
            let expected = DMatrix::from_diagonal(&dvector![su, post, post]);
            assert!((p.cov() - expected).amax() < 1e-12, "k={k}");
            let mean = p.mean();
            assert!(mean[0].abs() < 1e-12);
            assert!((mean[1] - su / (su + sz) * y.at(k - 1)).abs() < 1e-12);
            assert!((mean[2] - su / (su + sz) * y.at(k - 2)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_posterior_matches_conditioning() {
        // N = 1: X₁ ~ N(A m₀, A P₀ Aᵀ + σ_U² e₁e₁ᵀ), y = cᵀX₁ + Z.
        let m = LinearModel::new(ModelKind::Ar, 2, 1, 0.8, 0.2)
            .unwrap()
            .with_x0_prior(
                GaussianMoment::new(dvector![0.5, -0.2], dmatrix![1.0, 0.3; 0.3, 0.5])
                    .unwrap()
                    .to_weight()
                    .unwrap(),
            )
            .unwrap();
        let th = dvector![0.4, 0.3];
        let y = Observations::new(vec![1.1]).unwrap();
        let s = sweep(&m, &th, &y).unwrap();
        let post = s.posterior(1).unwrap();

        let a = m.transition(&th);
        let prior = GaussianMoment::new(dvector![0.5, -0.2], dmatrix![1.0, 0.3; 0.3, 0.5])
            .unwrap()
            .propagate_affine(&a, &dmatrix![0.8, 0.0; 0.0, 0.0])
            .unwrap();
        let c = m.observation(&th);
        let pc = prior.cov() * &c;
        let sv = c.dot(&pc) + 0.2;
        let mean = prior.mean() + &pc * ((1.1 - c.dot(prior.mean())) / sv);
        let cov = prior.cov() - &pc * pc.transpose() / sv;
        assert!((post.mean() - mean).amax() < 1e-12);
        assert!((post.cov() - cov).amax() < 1e-12);
    }

    #[test]
    fn fir_order_one_log_likelihood_single_observation() {
        let (su, sz, th, y1) = (1.3, 0.4, 0.9, 0.75);
        let m = LinearModel::new(ModelKind::Fir, 1, 1, su, sz)
            .unwrap()
            .with_x0_prior(GaussianWeight::uninformative(1))
            .unwrap();
        let y = Observations::new(vec![y1]).unwrap();
        let ll = log_likelihood(&m, &dvector![th], &y).unwrap();
        let s2: f64 = th * th * su + sz;
        let expected = -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - y1 * y1 / (2.0 * s2);
        assert!((ll - expected).abs() < 1e-13);
    }

    #[test]
    fn flat_prior_makes_ar_likelihood_improper() {
        let m = LinearModel::new(ModelKind::Ar, 2, 3, 1.0, 0.5)
            .unwrap()
            .with_x0_prior(GaussianWeight::uninformative(2))
            .unwrap();
        let y = Observations::new(vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(
            log_likelihood(&m, &dvector![0.5, 0.1], &y),
            Err(Error::ImproperLikelihood(1))
        );
        // θ̂ = 0 decouples the flat initial state from the output.
        assert!(log_likelihood(&m, &dvector![0.0, 0.0], &y).is_ok());
    }

    #[test]
    fn flat_prior_fir_sweep_gives_proper_posteriors() {
        let m = LinearModel::new(ModelKind::Fir, 2, 10, 1.0, 0.1)
            .unwrap()
            .with_x0_prior(GaussianWeight::uninformative(2))
            .unwrap();
        let th = dvector![1.0, 0.5];
        let sim = simulate(&m, &th, 3).unwrap();
        let s = sweep(&m, &th, &sim.y).unwrap();
        for k in 1..=10 {
            assert!(s.posterior(k).is_ok(), "k={k}");
        }
        assert!(log_likelihood(&m, &th, &sim.y).is_err());
    }

    #[test]
    fn log_likelihood_is_finite_and_grows_with_data() {
        let m = LinearModel::new(ModelKind::Fir, 2, 40, 1.0, 0.2).unwrap();
        let th = dvector![1.0, 0.5];
        let sim = simulate(&m, &th, 2).unwrap();
        let full = log_likelihood(&m, &th, &sim.y).unwrap();
        let short = Observations::new(sim.y.as_slice()[..39].to_vec()).unwrap();
        let part = log_likelihood(&m.clone().with_len(39).unwrap(), &th, &short).unwrap();
        assert!(full.is_finite() && part.is_finite());
        // One more observation adds log p(y_40 | y_1..39), bounded above by
        // the density peak of the predictive.
        let inc = full - part;
        assert!(inc < -0.5 * (2.0 * std::f64::consts::PI * 0.2).ln());
    }

    #[test]
    fn backward_then_forward_order_is_irrelevant() {
        let m = LinearModel::new(ModelKind::Ar, 2, 12, 1.0, 0.3).unwrap();
        let th = dvector![0.6, -0.2];
        let sim = simulate(&m, &th, 5).unwrap();
        let bwd = backward_pass(&m, &th, &sim.y).unwrap();
        let (_, fwd) = forward_pass(&m, &th, &sim.y);
        let s = sweep(&m, &th, &sim.y).unwrap();
        assert_eq!(s.bwd, bwd);
        assert_eq!(s.fwd, fwd);
    }
}
