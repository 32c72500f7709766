//! Subcommand implementations.

use std::path::Path;
use std::time::Instant;

use emfg::em::{run_em, EmConfig, EmWarning, Init, Schedule};
use emfg::multiplier::MultiplierKind;
use emfg::oracle;
use emfg::state_space::{simulate as draw, LinearModel, ModelKind, Observations};
use emfg::Error;
use nalgebra::DVector;
use thiserror::Error;

use crate::files::{self, Report, Sidecar, SCHEMA};
use crate::{CheckArgs, IdentifyArgs, ModelArg, ScheduleArg, SimulateArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },
    #[error("parameter is not identifiable from these data")]
    Unidentifiable,
    #[error(transparent)]
    Model(Error),
    #[error("case {case} exceeds tolerance; inputs {inputs}")]
    TablesFailed { case: String, inputs: String },
}

impl CliError {
    pub fn io(path: &Path, e: impl Into<std::io::Error>) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source: e.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::TablesFailed { .. } | CliError::Model(_) => 1,
            CliError::Unidentifiable => 2,
            CliError::Parse { .. } => 3,
            CliError::Config(_) => 4,
            CliError::Io { .. } => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnidentifiableParameter => CliError::Unidentifiable,
            Error::Invalid { .. } | Error::DimensionMismatch(_) => CliError::Config(e.to_string()),
            other => CliError::Model(other),
        }
    }
}

fn kind(m: ModelArg) -> ModelKind {
    match m {
        ModelArg::Fir => ModelKind::Fir,
        ModelArg::Ar => ModelKind::Ar,
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    if a.theta.len() != a.order {
        return Err(CliError::Config(format!(
            "theta: {} values given, order is {}",
            a.theta.len(),
            a.order
        )));
    }
    let model = LinearModel::new(kind(a.model), a.order, a.length, a.sigma_u, a.sigma_z)?;
    let theta = DVector::from_column_slice(&a.theta);
    let sim = draw(&model, &theta, a.seed)?;
    files::write_csv(&a.out, sim.y.as_slice())?;
    let side = Sidecar {
        schema: SCHEMA,
        model: model.kind(),
        order: a.order,
        length: a.length,
        sigma_u2: a.sigma_u,
        sigma_z2: a.sigma_z,
        theta_true: a.theta.clone(),
        seed: a.seed,
    };
    files::write_json(&files::sidecar_path(&a.out), &side)
}

pub fn identify(a: &IdentifyArgs) -> Result<(), CliError> {
    let y = files::read_csv(&a.input)?;
    let side_path = files::sidecar_path(&a.input);
    let side = if side_path.exists() {
        Some(files::read_sidecar(&side_path)?)
    } else {
        None
    };
    let missing =
        |field: &str| CliError::Config(format!("{field}: not given and no sidecar found"));
    let model_kind = match (a.model, &side) {
        (Some(m), _) => kind(m),
        (None, Some(s)) => s.model,
        (None, None) => return Err(missing("model")),
    };
    let order = a
        .order
        .or(side.as_ref().map(|s| s.order))
        .ok_or_else(|| missing("order"))?;
    let sigma_u2 = a
        .sigma_u
        .or(side.as_ref().map(|s| s.sigma_u2))
        .ok_or_else(|| missing("sigma-u"))?;
    let sigma_z2 = a
        .sigma_z
        .or(side.as_ref().map(|s| s.sigma_z2))
        .ok_or_else(|| missing("sigma-z"))?;

    let model = LinearModel::new(model_kind, order, y.len(), sigma_u2, sigma_z2)?;
    let obs = Observations::new(y)?;
    let config = EmConfig {
        max_iter: a.max_iter,
        tol: a.tol,
        schedule: match a.schedule {
            ScheduleArg::Batch => Schedule::Batch,
            ScheduleArg::Serial => Schedule::Serial,
        },
        init: match &a.theta {
            Some(t) => Init::Vector(DVector::from_column_slice(t)),
            None => Init::Auto,
        },
        prior: None,
    };
    let start = Instant::now();
    let r = run_em(&model, &obs, &config)?;
    let elapsed = start.elapsed().as_secs_f64();

    let warnings = r
        .warnings
        .iter()
        .map(|w| match w {
            EmWarning::NonMonotone {
                iteration,
                before,
                after,
            } => format!("log-likelihood dropped at iteration {iteration}: {before} -> {after}"),
            EmWarning::LikelihoodUnavailable { iteration, reason } => {
                format!("log-likelihood unavailable at iteration {iteration}: {reason}")
            }
        })
        .collect();
    let report = Report {
        schema: SCHEMA,
        model: model_kind,
        order,
        length: model.len(),
        sigma_u2,
        sigma_z2,
        schedule: match config.schedule {
            Schedule::Batch => "batch",
            Schedule::Serial => "serial",
        },
        theta_hat: r.theta().as_slice().to_vec(),
        iterates: r.iterates.iter().map(|t| t.as_slice().to_vec()).collect(),
        log_liks: r
            .log_liks
            .iter()
            .map(|&l| if l.is_finite() { Some(l) } else { None })
            .collect(),
        converged: r.converged,
        iterations_used: r.iterations_used,
        warnings,
        wall_clock_seconds: elapsed,
    };
    files::write_json(&a.out, &report)
}

pub fn check_tables(a: &CheckArgs) -> Result<(), CliError> {
    if a.instances == 0 {
        return Err(CliError::Config("instances: must be >= 1".into()));
    }
    let fault = match &a.inject_fault {
        None => None,
        Some(name) => Some(
            MultiplierKind::ALL
                .into_iter()
                .find(|k| k.name() == name)
                .ok_or_else(|| CliError::Config(format!("inject-fault: unknown kind `{name}`")))?,
        ),
    };
    let results = oracle::check_tables(a.seed, a.instances, fault)?;
    let mut first_failure = None;
    for r in &results {
        let status = if r.passed() { "ok" } else { "FAIL" };
        println!(
            "{:<36} max_rel_err {:.3e}  tol {:.0e}  {status}",
            r.name, r.max_rel_err, r.tolerance
        );
        if !r.passed() && first_failure.is_none() {
            first_failure = Some(r);
        }
    }
    match first_failure {
        None => Ok(()),
        Some(r) => Err(CliError::TablesFailed {
            case: r.name.clone(),
            inputs: serde_json::to_string(&r.worst).expect("plain data serializes"),
        }),
    }
}
