//! Client-side local updates.

use serde::{Deserialize, Serialize};

use crate::anderson::{aa_step, build_history, filter_history, AaDiagnostics, AaHistory};
use crate::error::{Error, Result};
use crate::linalg::{axpy, cg_solve, dot, gmres_solve, norm, sub};
use crate::objective::{sample_batch, GradientCorrection, LossModel, Scope};
use crate::sampling::SimRng;

use super::newton::damped_newton;
use super::{AlgoConfig, ScaffoldAnchor, Variant};

/// Per-client mutable state: its own RNG and any carried AA history.
#[derive(Debug, Clone)]
pub struct ClientSlot {
    pub rng: SimRng,
    pub carried: Option<AaHistory>,
}

/// What the server broadcast this round.
#[derive(Debug, Clone, Copy)]
pub struct LocalContext<'a> {
    pub w: &'a [f64],
    pub global_gradient: Option<&'a [f64]>,
    pub server_cv: &'a [f64],
    pub client_cv: &'a [Vec<f64>],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub weights: Vec<f64>,
    pub diagnostics: Option<AaDiagnostics>,
    /// The accelerated step was unavailable and the plain endpoint was used.
    pub fell_back: bool,
}

impl LocalResult {
    fn plain(weights: Vec<f64>) -> Self {
        Self { weights, diagnostics: None, fell_back: false }
    }
}

/// Local iterates `w_{k,0..}` and the corrected gradients evaluated at them.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTrajectory {
    pub iterates: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
}

impl LocalTrajectory {
    pub fn endpoint(&self) -> &[f64] {
        self.iterates.last().expect("trajectory holds w_{k,0}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KrylovSolver {
    Cg,
    Gmres,
}

fn draw_batch(cfg: &AlgoConfig, n_k: usize, rng: &mut SimRng) -> Option<Vec<usize>> {
    if cfg.batch_size == 0 || cfg.batch_size >= n_k {
        None
    } else {
        Some(sample_batch(rng, n_k, cfg.batch_size))
    }
}

/// `L` steps `w_{ℓ+1} = w_ℓ − η r_ℓ` on corrected gradients from `w_t`, a
/// fresh mini-batch per step. With `final_residual`, the corrected gradient
/// at `w_{k,L}` is evaluated too (the `L+1`-th evaluation), so the residual
/// list matches the iterate list.
pub fn local_update_first_order(
    model: &LossModel,
    k: usize,
    w_t: &[f64],
    correction: &GradientCorrection,
    cfg: &AlgoConfig,
    rng: &mut SimRng,
    final_residual: bool,
) -> Result<LocalTrajectory> {
    if cfg.local_epochs == 0 {
        return Err(Error::InvalidConfig("local epochs L must be ≥ 1".into()));
    }
    let n_k = model.client_sizes()[k];
    let mut iterates = vec![w_t.to_vec()];
    let mut residuals = Vec::with_capacity(cfg.local_epochs + 1);
    for step in 0..cfg.local_epochs {
        let batch = draw_batch(cfg, n_k, rng);
        let current = &iterates[step];
        let r = model.corrected_gradient(k, current, correction, batch.as_deref())?;
        let mut next = current.clone();
        axpy(-cfg.eta, &r, &mut next);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        residuals.push(r);
        iterates.push(next);
    }
    if final_residual {
        let batch = draw_batch(cfg, n_k, rng);
        let last = iterates.last().unwrap();
        residuals.push(model.corrected_gradient(k, last, correction, batch.as_deref())?);
    }
    Ok(LocalTrajectory { iterates, residuals })
}

/// Local first-order steps followed by one Anderson step anchored at `w_t`
/// with anchor residual `anchor` (`∇f(w^t)`, `c`, or `∇f_k(w^t)` depending on
/// the flavor). A degenerate history falls back to `w_{k,L}`.
pub fn local_update_fedosaa(
    model: &LossModel,
    k: usize,
    w_t: &[f64],
    anchor: &[f64],
    correction: &GradientCorrection,
    cfg: &AlgoConfig,
    slot: &mut ClientSlot,
) -> Result<LocalResult> {
    let d = w_t.len();
    let traj = local_update_first_order(model, k, w_t, correction, cfg, &mut slot.rng, true)?;
    let fresh = build_history(&traj.iterates, &traj.residuals)?;
    let mut history = match (&slot.carried, cfg.history_carry) {
        (Some(old), carry) if carry > 0 => fresh.with_prefix(&old.newest(carry), fresh.len() + carry)?,
        _ => fresh.clone(),
    };
    if cfg.history_carry > 0 {
        slot.carried = Some(fresh);
    }
    if let Some(tol) = cfg.filter_tol {
        history = filter_history(&history, tol);
    }
    if history.len() > d {
        history = history.newest(d);
    }

    match aa_step(w_t, anchor, &history, cfg.eta, &cfg.aa) {
        Ok(step) => {
            let residual = model.corrected_gradient(k, &step.weights, correction, None)?;
            let anchor_norm = norm(anchor);
            let delta = (anchor_norm > 0.0).then(|| norm(&residual) / anchor_norm);
            Ok(LocalResult {
                weights: step.weights,
                diagnostics: Some(AaDiagnostics { theta: step.theta, delta, rank: step.rank, cond_s: step.cond_s }),
                fell_back: false,
            })
        }
        Err(Error::DegenerateHistory) => Ok(LocalResult {
            weights: traj.endpoint().to_vec(),
            diagnostics: None,
            fell_back: true,
        }),
        Err(e) => Err(e),
    }
}

/// `w_t − p` with `p` from `q` CG or GMRES iterations on
/// `∇²f_k(w_t) p = ∇f(w_t)`.
pub fn local_update_newton_krylov(
    model: &LossModel,
    k: usize,
    w_t: &[f64],
    global_gradient: &[f64],
    cfg: &AlgoConfig,
    solver: KrylovSolver,
) -> Result<Vec<f64>> {
    let op = |v: &[f64]| {
        model
            .hessian_vec(Scope::Client(k), w_t, v)
            .expect("dimensions checked by caller")
    };
    if global_gradient.len() != w_t.len() {
        return Err(Error::DimensionMismatch { expected: w_t.len(), got: global_gradient.len() });
    }
    let sol = match solver {
        KrylovSolver::Cg => cg_solve(op, global_gradient, cfg.krylov_iters, cfg.krylov_tol)?,
        KrylovSolver::Gmres => gmres_solve(op, global_gradient, cfg.krylov_iters, cfg.krylov_tol)?,
    };
    Ok(sub(w_t, &sol.x))
}

/// Two-loop recursion: `H g` for the L-BFGS inverse built from `(s, y)`
/// pairs (oldest first) with `H₀ = (sᵀy / yᵀy) I` from the newest pair.
pub fn lbfgs_two_loop(pairs: &[(Vec<f64>, Vec<f64>)], g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let Some((s_last, y_last)) = pairs.last() else {
        return q;
    };
    let rho: Vec<f64> = pairs.iter().map(|(s, y)| 1.0 / dot(s, y)).collect();
    let mut alpha = vec![0.0; pairs.len()];
    for (i, (s, y)) in pairs.iter().enumerate().rev() {
        alpha[i] = rho[i] * dot(s, &q);
        axpy(-alpha[i], y, &mut q);
    }
    let h0 = dot(s_last, y_last) / dot(y_last, y_last);
    q.iter_mut().for_each(|v| *v *= h0);
    for (i, (s, y)) in pairs.iter().enumerate() {
        let beta = rho[i] * dot(y, &q);
        axpy(alpha[i] - beta, s, &mut q);
    }
    q
}

/// Collects `(s, y)` exactly as FedOSAA does, keeps the pairs with
/// `sᵀy > 1e-12 ‖s‖‖y‖`, and returns `w_t − H ∇f(w_t)` from the two-loop
/// recursion. With no usable pair it falls back to `w_{k,L}`.
pub fn local_update_lbfgs(
    model: &LossModel,
    k: usize,
    w_t: &[f64],
    global_gradient: &[f64],
    correction: &GradientCorrection,
    cfg: &AlgoConfig,
    rng: &mut SimRng,
) -> Result<LocalResult> {
    let traj = local_update_first_order(model, k, w_t, correction, cfg, rng, true)?;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = traj
        .iterates
        .windows(2)
        .zip(traj.residuals.windows(2))
        .map(|(w, r)| (sub(&w[1], &w[0]), sub(&r[1], &r[0])))
        .filter(|(s, y)| dot(s, y) > 1e-12 * norm(s) * norm(y))
        .collect();
    if pairs.is_empty() {
        return Ok(LocalResult { weights: traj.endpoint().to_vec(), diagnostics: None, fell_back: true });
    }
    let direction = lbfgs_two_loop(&pairs, global_gradient);
    Ok(LocalResult::plain(sub(w_t, &direction)))
}

/// Exact minimizer of the corrected local objective
/// `f_k(w) + ⟨∇f(w_t) − ∇f_k(w_t), w⟩` by damped Newton from `w_t`.
pub fn local_update_dane(model: &LossModel, k: usize, w_t: &[f64], global_gradient: &[f64]) -> Result<Vec<f64>> {
    let correction = GradientCorrection::Svrg { anchor: w_t.to_vec(), global_gradient: global_gradient.to_vec() };
    let offset = model.correction_offset(k, &correction)?;
    let tol = 1e-12 * norm(global_gradient).max(1.0);
    damped_newton(
        |w| model.corrected_value(k, w, &offset),
        |w| {
            let mut g = model.gradient(Scope::Client(k), w)?;
            axpy(1.0, &offset, &mut g);
            Ok(g)
        },
        |w| model.hessian(Scope::Client(k), w),
        w_t,
        tol,
        DANE_MAX_NEWTON,
    )
}

const DANE_MAX_NEWTON: usize = 200;

fn svrg_correction(ctx: &LocalContext<'_>) -> Result<GradientCorrection> {
    let g = ctx
        .global_gradient
        .ok_or_else(|| Error::InvalidConfig("global gradient missing for a corrected method".into()))?;
    Ok(GradientCorrection::Svrg { anchor: ctx.w.to_vec(), global_gradient: g.to_vec() })
}

fn global_gradient<'a>(ctx: &LocalContext<'a>) -> Result<&'a [f64]> {
    ctx.global_gradient
        .ok_or_else(|| Error::InvalidConfig("global gradient missing".into()))
}

/// Dispatches the local update of client `k` for the configured variant.
pub fn local_update(
    model: &LossModel,
    k: usize,
    ctx: &LocalContext<'_>,
    cfg: &AlgoConfig,
    slot: &mut ClientSlot,
) -> Result<LocalResult> {
    let w_t = ctx.w;
    let scaffold = || GradientCorrection::Scaffold {
        client: ctx.client_cv[k].clone(),
        server: ctx.server_cv.to_vec(),
    };
    match cfg.variant {
        Variant::FedAvg => {
            let traj = local_update_first_order(model, k, w_t, &GradientCorrection::None, cfg, &mut slot.rng, false)?;
            Ok(LocalResult::plain(traj.endpoint().to_vec()))
        }
        Variant::FedSvrg => {
            let traj = local_update_first_order(model, k, w_t, &svrg_correction(ctx)?, cfg, &mut slot.rng, false)?;
            Ok(LocalResult::plain(traj.endpoint().to_vec()))
        }
        Variant::Scaffold => {
            let traj = local_update_first_order(model, k, w_t, &scaffold(), cfg, &mut slot.rng, false)?;
            Ok(LocalResult::plain(traj.endpoint().to_vec()))
        }
        Variant::FedosaaSvrg => {
            let g = global_gradient(ctx)?;
            local_update_fedosaa(model, k, w_t, g, &svrg_correction(ctx)?, cfg, slot)
        }
        Variant::FedosaaScaffold => {
            let corr = scaffold();
            match cfg.scaffold_anchor {
                ScaffoldAnchor::ServerVariate => local_update_fedosaa(model, k, w_t, ctx.server_cv, &corr, cfg, slot),
                ScaffoldAnchor::LocalResidual => {
                    let r0 = model.corrected_gradient(k, w_t, &corr, None)?;
                    local_update_fedosaa(model, k, w_t, &r0, &corr, cfg, slot)
                }
            }
        }
        Variant::FedosaaAvg => {
            let local = model.gradient(Scope::Client(k), w_t)?;
            local_update_fedosaa(model, k, w_t, &local, &GradientCorrection::None, cfg, slot)
        }
        Variant::Giant => {
            local_update_newton_krylov(model, k, w_t, global_gradient(ctx)?, cfg, KrylovSolver::Cg).map(LocalResult::plain)
        }
        Variant::NewtonGmres => {
            local_update_newton_krylov(model, k, w_t, global_gradient(ctx)?, cfg, KrylovSolver::Gmres)
                .map(LocalResult::plain)
        }
        Variant::Lbfgs => {
            let g = global_gradient(ctx)?;
            local_update_lbfgs(model, k, w_t, g, &svrg_correction(ctx)?, cfg, &mut slot.rng)
        }
        Variant::Dane => local_update_dane(model, k, w_t, global_gradient(ctx)?).map(LocalResult::plain),
    }
}
