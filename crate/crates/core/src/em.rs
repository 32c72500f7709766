//! The EM loop over an equality chain of parameter copies.
//!
//! Every section `k` of the state space model holds its own copy `Θ_k` of the
//! coefficient vector; the copies are tied by equality constraints. One EM
//! iteration is:
//!
//! 1. a sum-product sweep with `Θ = θ̂` in every section;
//! 2. one EM message `←μ_{Θ_k}` per section, from the local marginals;
//! 3. the equality constraints add the messages (and an optional prior);
//! 4. `θ̂` becomes the maximizer of the combined Gaussian.
//!
//! The [`Schedule::Serial`] variant updates `θ̂` after every section on the
//! forward pass instead of after the full sweep.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianWeight;
use crate::multiplier::{
    em_message, em_message_fixed_y, marginals_information, EmGaussian, MultiplierSpec,
};
use crate::state_space::{
    backward_pass, forward_pass, log_likelihood, observe, predict, LinearModel, ModelKind,
    Observations,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Batch,
    Serial,
}

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Zeros for AR. For FIR `(s, 0, …, 0)` with `s` matched to the output
    /// power, because `θ = 0` is a stationary point of the FIR likelihood.
    Auto,
    Zeros,
    Vector(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Stop when `‖θ⁽ᵏ⁺¹⁾ - θ⁽ᵏ⁾‖ < tol · max(1, ‖θ⁽ᵏ⁾‖)`.
    pub tol: f64,
    pub schedule: Schedule,
    pub init: Init,
    /// Gaussian prior on θ, in weight form, added at the equality chain.
    pub prior: Option<GaussianWeight>,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iter: 500,
            tol: 1e-8,
            schedule: Schedule::Batch,
            init: Init::Auto,
            prior: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmWarning {
    /// The log-likelihood dropped by more than round-off between iterates.
    NonMonotone {
        iteration: usize,
        before: f64,
        after: f64,
    },
    /// The log-likelihood could not be evaluated (improper x₀ prior).
    LikelihoodUnavailable { iteration: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmReport {
    /// `θ⁽⁰⁾, θ⁽¹⁾, …`; the first entry is the starting point.
    pub iterates: Vec<DVector<f64>>,
    /// `log p(y | θ⁽ᵏ⁾)` for each iterate, `NaN` where unavailable.
    pub log_liks: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
    pub warnings: Vec<EmWarning>,
}

impl EmReport {
    pub fn theta(&self) -> &DVector<f64> {
        self.iterates.last().expect("at least the starting point")
    }
}

/// Absolute slack for the monotonicity check.
const MONOTONE_SLACK: f64 = 1e-9;

/// Resolves the starting point of the iteration.
pub fn initial_theta(model: &LinearModel, y: &Observations, init: &Init) -> Result<DVector<f64>> {
    let n = model.order();
    let theta = match init {
        Init::Zeros => DVector::zeros(n),
        Init::Vector(v) => v.clone(),
        Init::Auto => match model.kind() {
            ModelKind::Ar => DVector::zeros(n),
            ModelKind::Fir => {
                let ys = y.as_slice();
                let power = ys.iter().map(|v| v * v).sum::<f64>() / ys.len() as f64;
                let excess = (power - model.sigma_z2()).max(0.1 * model.sigma_z2());
                let mut t = DVector::zeros(n);
                t[0] = (excess / model.sigma_u2()).sqrt();
                t
            }
        },
    };
    model.check_theta(&theta)?;
    Ok(theta)
}

/// One EM message per section for the current estimate `theta`.
pub fn section_messages(
    model: &LinearModel,
    theta: &DVector<f64>,
    y: &Observations,
) -> Result<Vec<EmGaussian>> {
    model.check_theta(theta)?;
    if y.len() != model.len() {
        return Err(Error::dims(format!(
            "{} observations, model length is {}",
            y.len(),
            model.len()
        )));
    }
    let (predicted, fwd) = forward_pass(model, theta, y);
    let bwd = backward_pass(model, theta, y)?;
    let c = model.observation(theta);
    let ar = ar_spec(model)?;
    (1..=model.len())
        .map(|k| match model.kind() {
            ModelKind::Fir => {
                let into = predicted[k].combine_parallel(&bwd[k])?;
                em_message_fixed_y(&into, y.at(k), model.sigma_z2(), theta)
            }
            ModelKind::Ar => {
                let bwd_y = observe(&bwd[k], &c, y.at(k), model.sigma_z2());
                let marg = marginals_information(ar.as_ref().unwrap(), theta, &fwd[k - 1], &bwd_y)?;
                em_message(ar.as_ref().unwrap(), &marg)
            }
        })
        .collect()
}

fn ar_spec(model: &LinearModel) -> Result<Option<MultiplierSpec>> {
    Ok(match model.kind() {
        ModelKind::Ar => Some(MultiplierSpec::autoregression(
            model.order(),
            model.sigma_u2(),
        )?),
        ModelKind::Fir => None,
    })
}

/// Sum of EM messages and an optional prior.
fn combine(
    msgs: &[EmGaussian],
    prior: Option<&GaussianWeight>,
    dim: usize,
) -> Result<GaussianWeight> {
    let mut total = match prior {
        Some(p) => p.clone(),
        None => GaussianWeight::uninformative(dim),
    };
    for m in msgs {
        total = total.combine_parallel(m)?;
    }
    Ok(total)
}

/// One batch EM step, `θ̂ → argmax Σ_k ←μ_{Θ_k}`.
pub fn em_update(
    model: &LinearModel,
    theta: &DVector<f64>,
    y: &Observations,
) -> Result<DVector<f64>> {
    em_update_with_prior(model, theta, y, None)
}

/// [`em_update`] with a Gaussian prior on θ.
pub fn em_update_with_prior(
    model: &LinearModel,
    theta: &DVector<f64>,
    y: &Observations,
    prior: Option<&GaussianWeight>,
) -> Result<DVector<f64>> {
    if let Some(p) = prior {
        if p.dim() != model.order() {
            return Err(Error::dims("prior dimension differs from model order"));
        }
    }
    let msgs = section_messages(model, theta, y)?;
    combine(&msgs, prior, model.order())?.argmax()
}

/// Runs EM from `config.init` until convergence or `config.max_iter`.
pub fn run_em(model: &LinearModel, y: &Observations, config: &EmConfig) -> Result<EmReport> {
    match config.schedule {
        Schedule::Batch => run_batch(model, y, config),
        Schedule::Serial => run_em_serial(model, y, config),
    }
}

fn check_config(config: &EmConfig) -> Result<()> {
    if !(config.tol.is_finite() && config.tol > 0.0) {
        return Err(Error::invalid("tol", format!("{} must be > 0", config.tol)));
    }
    if config.max_iter == 0 {
        return Err(Error::invalid("max_iter", "must be >= 1"));
    }
    Ok(())
}

struct Tracker {
    report: EmReport,
}

impl Tracker {
    fn new(model: &LinearModel, y: &Observations, theta0: DVector<f64>) -> Self {
        let mut t = Tracker {
            report: EmReport {
                iterates: Vec::new(),
                log_liks: Vec::new(),
                converged: false,
                iterations_used: 0,
                warnings: Vec::new(),
            },
        };
        t.push(model, y, theta0);
        t
    }

    fn push(&mut self, model: &LinearModel, y: &Observations, theta: DVector<f64>) {
        let it = self.report.iterates.len();
        let ll = match log_likelihood(model, &theta, y) {
            Ok(v) => v,
            Err(e) => {
                self.report.warnings.push(EmWarning::LikelihoodUnavailable {
                    iteration: it,
                    reason: e.to_string(),
                });
                f64::NAN
            }
        };
        if let Some(&prev) = self.report.log_liks.last() {
            if ll < prev - MONOTONE_SLACK {
                self.report.warnings.push(EmWarning::NonMonotone {
                    iteration: it,
                    before: prev,
                    after: ll,
                });
            }
        }
        self.report.log_liks.push(ll);
        self.report.iterates.push(theta);
    }

    fn step_small(&self, tol: f64) -> bool {
        let k = self.report.iterates.len();
        if k < 2 {
            return false;
        }
        let (a, b) = (&self.report.iterates[k - 2], &self.report.iterates[k - 1]);
        (b - a).norm() < tol * a.norm().max(1.0)
    }
}

fn run_batch(model: &LinearModel, y: &Observations, config: &EmConfig) -> Result<EmReport> {
    check_config(config)?;
    let mut theta = initial_theta(model, y, &config.init)?;
    let mut tr = Tracker::new(model, y, theta.clone());
    for _ in 0..config.max_iter {
        theta = em_update_with_prior(model, &theta, y, config.prior.as_ref())?;
        tr.push(model, y, theta.clone());
        tr.report.iterations_used += 1;
        if tr.step_small(config.tol) {
            tr.report.converged = true;
            break;
        }
    }
    Ok(tr.report)
}

/// EM with the serial schedule.
///
/// The section messages are first computed at the starting point. Each
/// iteration then runs the backward sweep at the current estimate and walks
/// the sections left to right: the forward message is propagated with the
/// running estimate, section `k`'s EM message is replaced, and the running
/// estimate is reset to the maximizer of the updated sum. With a single
/// section this is the batch schedule.
pub fn run_em_serial(model: &LinearModel, y: &Observations, config: &EmConfig) -> Result<EmReport> {
    check_config(config)?;
    let n = model.order();
    let theta0 = initial_theta(model, y, &config.init)?;
    let mut msgs = section_messages(model, &theta0, y)?;
    let ar = ar_spec(model)?;
    let mut tr = Tracker::new(model, y, theta0.clone());
    let mut theta = theta0;

    for _ in 0..config.max_iter {
        let bwd = backward_pass(model, &theta, y)?;
        let mut run = theta.clone();
        let mut fwd_prev = model.x0_prior().clone();
        for k in 1..=model.len() {
            let row = match model.kind() {
                ModelKind::Fir => DVector::zeros(n),
                ModelKind::Ar => run.clone(),
            };
            let c = model.observation(&run);
            let predicted = predict(&fwd_prev, &row, model.sigma_u2());
            msgs[k - 1] = match model.kind() {
                ModelKind::Fir => {
                    let into = predicted.combine_parallel(&bwd[k])?;
                    em_message_fixed_y(&into, y.at(k), model.sigma_z2(), &run)?
                }
                ModelKind::Ar => {
                    let bwd_y = observe(&bwd[k], &c, y.at(k), model.sigma_z2());
                    let spec = ar.as_ref().unwrap();
                    em_message(spec, &marginals_information(spec, &run, &fwd_prev, &bwd_y)?)?
                }
            };
            fwd_prev = observe(&predicted, &c, y.at(k), model.sigma_z2());
            match combine(&msgs, config.prior.as_ref(), n)?.argmax() {
                Ok(t) => run = t,
                Err(Error::UnidentifiableParameter) => {}
                Err(e) => return Err(e),
            }
        }
        theta = run;
        tr.push(model, y, theta.clone());
        tr.report.iterations_used += 1;
        if tr.step_small(config.tol) {
            tr.report.converged = true;
            break;
        }
    }
    Ok(tr.report)
}
