//! Runs configured algorithms against a reference solution.

use std::time::Instant;

use crate::algorithms::{damped_newton, run_round, AlgoConfig, RoundState};
use crate::error::{Error, Result};
use crate::linalg::{norm, sub};
use crate::objective::{LossModel, Scope};

use super::config::{build_model, ExperimentConfig};
use super::trace::{AlgoTrace, ExperimentReport, Reference, RunStatus, Summary, TraceRecord};

pub const REFERENCE_MAX_NEWTON: usize = 500;

/// `(w*, f*)`: a direct solve for quadratics; for logistic models, damped
/// Newton from 0 until `‖∇f(w*)‖ ≤ tol`, by default
/// `1e−12 · max(1, ‖∇f(0)‖)`.
pub fn reference_minimizer(model: &LossModel, tol: Option<f64>) -> Result<(Vec<f64>, f64)> {
    let w = match model {
        LossModel::Quadratic(q) => q.minimizer()?,
        LossModel::Logistic(_) => {
            let zero = vec![0.0; model.dim()];
            let tol = tol.unwrap_or_else(|| 1e-12 * norm(&model.gradient(Scope::Global, &zero).unwrap()).max(1.0));
            let w = damped_newton(
                |w| model.value(Scope::Global, w),
                |w| model.gradient(Scope::Global, w),
                |w| model.hessian(Scope::Global, w),
                &zero,
                tol,
                REFERENCE_MAX_NEWTON,
            )?;
            debug_assert!(norm(&model.gradient(Scope::Global, &w)?) <= tol);
            w
        }
    };
    let f = model.value(Scope::Global, &w)?;
    Ok((w, f))
}

pub fn reference(model: &LossModel, tol: Option<f64>) -> Result<Reference> {
    let (w_star, f_star) = reference_minimizer(model, tol)?;
    Ok(Reference {
        grad_norm: norm(&model.gradient(Scope::Global, &w_star)?),
        f_star,
        w_star,
        beta: model.smoothness(),
    })
}

/// Replaces a relative step size by the absolute `η = ratio / β`.
pub fn resolve_step(cfg: &AlgoConfig, beta: f64) -> AlgoConfig {
    let mut out = cfg.clone();
    if let Some(r) = out.eta_over_beta.take() {
        out.eta = r / beta;
    }
    out
}

fn record(
    model: &LossModel,
    reference: &Reference,
    state: &RoundState,
    started: Instant,
    diagnostics: &[Option<crate::anderson::AaDiagnostics>],
) -> Result<TraceRecord> {
    let w_norm = norm(&reference.w_star);
    let err = norm(&sub(&state.w, &reference.w_star));
    let present: Vec<_> = diagnostics.iter().flatten().collect();
    Ok(TraceRecord {
        t: state.t,
        relative_error: if w_norm > 0.0 { err / w_norm } else { err },
        loss_gap: model.value(Scope::Global, &state.w)? - reference.f_star,
        grad_norm: norm(&model.gradient(Scope::Global, &state.w)?),
        comm_rounds: state.comm.rounds,
        comm_floats: state.comm.floats_down,
        comm_floats_up: state.comm.floats_up,
        wall_seconds: started.elapsed().as_secs_f64(),
        theta: Summary::of(present.iter().map(|d| d.theta)),
        delta: Summary::of(present.iter().filter_map(|d| d.delta)),
    })
}

/// Runs one algorithm from `w^0 = 0` for up to `rounds` rounds, stopping
/// once the relative error is at most `tolerance`. A failing round ends the
/// trace with [`RunStatus::Diverged`] instead of an error.
pub fn run_algorithm(
    model: &LossModel,
    reference: &Reference,
    cfg: &AlgoConfig,
    rounds: usize,
    tolerance: f64,
    seed: u64,
) -> Result<AlgoTrace> {
    let cfg = resolve_step(cfg, reference.beta);
    cfg.validate()?;
    let mut state = RoundState::new(model, vec![0.0; model.dim()], seed)?;
    let started = Instant::now();
    let mut records = vec![record(model, reference, &state, started, &[])?];
    let mut status = RunStatus::Exhausted;
    if records[0].relative_error <= tolerance {
        status = RunStatus::Converged { round: 0 };
    } else {
        for _ in 0..rounds {
            let round = state.t;
            match run_round(&mut state, &cfg, model) {
                Ok(report) => {
                    let r = record(model, reference, &state, started, &report.diagnostics)?;
                    let done = r.relative_error <= tolerance;
                    records.push(r);
                    if done {
                        status = RunStatus::Converged { round: state.t };
                        break;
                    }
                }
                Err(e @ Error::InvalidConfig(_)) | Err(e @ Error::DimensionMismatch { .. }) => return Err(e),
                Err(e) => {
                    status = RunStatus::Diverged { round, reason: e.to_string() };
                    break;
                }
            }
        }
    }
    Ok(AlgoTrace { label: cfg.label(), config: cfg, status, records })
}

/// Builds the problem, solves for the reference and runs every configured
/// algorithm on the same partition and seeds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let config = config.resolved();
    let model = build_model(&config)?;
    let reference = reference(&model, config.reference_tolerance)?;
    let traces = config
        .algorithms
        .iter()
        .map(|a| run_algorithm(&model, &reference, a, config.rounds, config.tolerance, config.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { config, reference, traces })
}
