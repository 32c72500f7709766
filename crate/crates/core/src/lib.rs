//! Expectation maximization as Gaussian message passing on factor graphs.
//!
//! The crate is organized bottom-up:
//!
//! * [`gaussian`]: Gaussian messages in moment and weight form and the
//!   elementary sum-product rules.
//! * [`multiplier`] and [`vectorize`]: closed-form EM messages out of
//!   multiplier nodes grouped with Gaussian noise, plus the local marginals
//!   they consume.
//! * [`state_space`]: FIR and autoregressive state space models, simulation,
//!   forward/backward sweeps and the exact log-likelihood.
//! * [`em`]: the EM loop, with EM messages combined over the equality chain
//!   of parameter copies.
//! * [`oracle`]: brute-force references (quadrature, dense conditioning,
//!   Monte Carlo) used to verify everything above.
//!
//! ```
//! use emfg::em::{run_em, EmConfig};
//! use emfg::state_space::{simulate, LinearModel, ModelKind};
//! use nalgebra::dvector;
//!
//! let model = LinearModel::new(ModelKind::Fir, 2, 400, 1.0, 0.1).unwrap();
//! let sim = simulate(&model, &dvector![1.0, 0.5], 7).unwrap();
//! let report = run_em(&model, &sim.y, &EmConfig::default()).unwrap();
//! let theta = report.iterates.last().unwrap();
//! assert!((theta - dvector![1.0, 0.5]).norm() < 0.2);
//! ```

pub mod em;
pub mod error;
pub mod gaussian;
pub mod multiplier;
pub mod oracle;
pub mod state_space;
pub mod vectorize;

pub use error::{Error, Result};
