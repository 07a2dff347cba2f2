//! One aggregation round of each federated method, simulated server-side.

mod local;
mod newton;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anderson::{AaDiagnostics, AaOptions};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::objective::{LossModel, Scope};
use crate::sampling::seeded_rng;

pub use local::{
    local_update, local_update_dane, local_update_fedosaa, local_update_first_order, local_update_lbfgs,
    local_update_newton_krylov, lbfgs_two_loop, ClientSlot, KrylovSolver, LocalContext, LocalResult,
    LocalTrajectory,
};
pub use newton::{armijo_backtrack, damped_newton, ARMIJO_C1, MAX_BACKTRACKS};

/// Federated methods in the comparison roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "fedsvrg")]
    FedSvrg,
    Scaffold,
    FedosaaSvrg,
    FedosaaScaffold,
    /// One-step AA on the uncorrected FedAvg local iterations.
    FedosaaAvg,
    Giant,
    NewtonGmres,
    Lbfgs,
    Dane,
}

impl Variant {
    pub const ALL: [Variant; 10] = [
        Variant::FedAvg,
        Variant::FedSvrg,
        Variant::Scaffold,
        Variant::FedosaaSvrg,
        Variant::FedosaaScaffold,
        Variant::FedosaaAvg,
        Variant::Giant,
        Variant::NewtonGmres,
        Variant::Lbfgs,
        Variant::Dane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FedAvg => "fedavg",
            Variant::FedSvrg => "fedsvrg",
            Variant::Scaffold => "scaffold",
            Variant::FedosaaSvrg => "fedosaa-svrg",
            Variant::FedosaaScaffold => "fedosaa-scaffold",
            Variant::FedosaaAvg => "fedosaa-avg",
            Variant::Giant => "giant",
            Variant::NewtonGmres => "newton-gmres",
            Variant::Lbfgs => "lbfgs",
            Variant::Dane => "dane",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm {s:?}")))
    }

    /// Uses SCAFFOLD control variates instead of a fresh global gradient.
    pub fn is_scaffold_family(self) -> bool {
        matches!(self, Variant::Scaffold | Variant::FedosaaScaffold)
    }

    /// Server computes and broadcasts `∇f(w^t)` before local work.
    pub fn needs_global_gradient(self) -> bool {
        !matches!(self, Variant::FedAvg | Variant::FedosaaAvg | Variant::Scaffold | Variant::FedosaaScaffold)
    }

    pub fn is_fedosaa(self) -> bool {
        matches!(self, Variant::FedosaaSvrg | Variant::FedosaaScaffold | Variant::FedosaaAvg)
    }

    /// Per aggregation round: (communication rounds, floats broadcast to each
    /// client, floats uploaded by each client). The broadcast volume is the
    /// per-round communication cost of the comparison table.
    pub fn comm_cost(self, d: usize) -> (u64, u64, u64) {
        let d = d as u64;
        match self {
            Variant::FedAvg | Variant::FedosaaAvg => (1, d, d),
            Variant::Scaffold | Variant::FedosaaScaffold => (1, 2 * d, 2 * d),
            Variant::FedSvrg
            | Variant::FedosaaSvrg
            | Variant::Giant
            | Variant::NewtonGmres
            | Variant::Lbfgs
            | Variant::Dane => (2, 2 * d, 2 * d),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_eta() -> f64 {
    1.0
}
fn default_local_epochs() -> usize {
    10
}
fn default_krylov_iters() -> usize {
    10
}
fn default_krylov_tol() -> f64 {
    1e-14
}
fn default_filter_tol() -> Option<f64> {
    Some(1e-10)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoConfig {
    pub variant: Variant,
    /// Trace label; defaults to the variant name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Local step size η.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// When set, the harness resolves `η = eta_over_beta / β` for the
    /// problem's smoothness constant `β` and clears this field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_over_beta: Option<f64>,
    /// Local epochs L.
    #[serde(default = "default_local_epochs")]
    pub local_epochs: usize,
    /// Mini-batch size per client; 0 means full batch.
    #[serde(default)]
    pub batch_size: usize,
    /// Krylov iterations q (GIANT, Newton-GMRES).
    #[serde(default = "default_krylov_iters")]
    pub krylov_iters: usize,
    #[serde(default = "default_krylov_tol")]
    pub krylov_tol: f64,
    /// Server-side Armijo backtracking on the aggregated step.
    #[serde(default)]
    pub line_search: bool,
    #[serde(default)]
    pub aa: AaOptions,
    /// Drop dependent history columns before the AA solve; `None` disables.
    #[serde(default = "default_filter_tol")]
    pub filter_tol: Option<f64>,
    /// Columns of previous rounds' histories kept for the next AA step.
    #[serde(default)]
    pub history_carry: usize,
    /// SCAFFOLD family: refresh `c_k` from a mini-batch instead of the full
    /// client gradient.
    #[serde(default)]
    pub minibatch_control_variate: bool,
    /// Residual the FedOSAA-SCAFFOLD Anderson step is anchored at.
    #[serde(default)]
    pub scaffold_anchor: ScaffoldAnchor,
}

/// Anchor residual of the FedOSAA-SCAFFOLD Anderson step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaffoldAnchor {
    /// The broadcast server variate `c = ∇f(w^{t−1})`.
    #[default]
    ServerVariate,
    /// The client's corrected residual `∇f_k(w^t) − c_k + c` at `w^t`; its
    /// client average is `∇f(w^t)`.
    LocalResidual,
}

impl AlgoConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            label: None,
            eta: default_eta(),
            eta_over_beta: None,
            local_epochs: default_local_epochs(),
            batch_size: 0,
            krylov_iters: default_krylov_iters(),
            krylov_tol: default_krylov_tol(),
            line_search: false,
            aa: AaOptions::default(),
            filter_tol: default_filter_tol(),
            history_carry: 0,
            minibatch_control_variate: false,
            scaffold_anchor: ScaffoldAnchor::ServerVariate,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_local_epochs(mut self, l: usize) -> Self {
        self.local_epochs = l;
        self
    }

    pub fn with_krylov_iters(mut self, q: usize) -> Self {
        self.krylov_iters = q;
        self
    }

    pub fn with_batch_size(mut self, b: usize) -> Self {
        self.batch_size = b;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.variant.name().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.eta_over_beta {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidConfig(format!("eta_over_beta = {r} must be positive")));
            }
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidConfig(format!("step size η = {} must be positive", self.eta)));
        }
        if self.local_epochs == 0 {
            return Err(Error::InvalidConfig("local epochs L must be ≥ 1".into()));
        }
        if self.krylov_iters == 0 {
            return Err(Error::InvalidConfig("Krylov iterations q must be ≥ 1".into()));
        }
        self.aa.validate()
    }
}

/// Cumulative communication counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    pub rounds: u64,
    pub floats_down: u64,
    pub floats_up: u64,
}

impl CommLedger {
    pub fn charge(&mut self, rounds: u64, down: u64, up: u64) {
        self.rounds += rounds;
        self.floats_down += down;
        self.floats_up += up;
    }
}

/// Server state between aggregation rounds.
#[derive(Debug, Clone)]
pub struct RoundState {
    pub t: usize,
    pub w: Vec<f64>,
    /// Server control variate `c` (SCAFFOLD family).
    pub server_cv: Vec<f64>,
    /// Client control variates `c_k`.
    pub client_cv: Vec<Vec<f64>>,
    pub clients: Vec<ClientSlot>,
    pub comm: CommLedger,
}

impl RoundState {
    /// `w^0 = w0`, zero control variates, one RNG stream per client.
    pub fn new(model: &LossModel, w0: Vec<f64>, seed: u64) -> Result<Self> {
        let d = model.dim();
        if w0.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: w0.len() });
        }
        let k = model.num_clients();
        Ok(Self {
            t: 0,
            w: w0,
            server_cv: vec![0.0; d],
            client_cv: vec![vec![0.0; d]; k],
            clients: (0..k)
                .map(|i| ClientSlot { rng: seeded_rng(seed, 1 + i as u64), carried: None })
                .collect(),
            comm: CommLedger::default(),
        })
    }
}

/// What one round produced besides the new state.
#[derive(Debug, Clone, Default)]
pub struct RoundReport {
    /// Per client, for Anderson-type updates.
    pub diagnostics: Vec<Option<AaDiagnostics>>,
    /// Clients that fell back to the plain local endpoint.
    pub fallbacks: usize,
    /// Accepted server step length when line search is on.
    pub step_length: Option<f64>,
}

/// `Σ (N_k/N) w_k`, computed as `(Σ N_k w_k) / N` in client order so equal
/// sizes weigh exactly equally.
pub fn aggregate(updates: &[Vec<f64>], sizes: &[usize]) -> Result<Vec<f64>> {
    if updates.is_empty() || updates.len() != sizes.len() {
        return Err(Error::InvalidConfig("one update per client required".into()));
    }
    let d = updates[0].len();
    let n: usize = sizes.iter().sum();
    let mut out = vec![0.0; d];
    for (u, &s) in updates.iter().zip(sizes) {
        if u.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: u.len() });
        }
        axpy(s as f64, u, &mut out);
    }
    out.iter_mut().for_each(|v| *v /= n as f64);
    Ok(out)
}

/// Runs one aggregation round in place.
pub fn run_round(state: &mut RoundState, cfg: &AlgoConfig, model: &LossModel) -> Result<RoundReport> {
    cfg.validate()?;
    let d = model.dim();
    let variant = cfg.variant;
    let global_gradient = if variant.needs_global_gradient() || cfg.line_search {
        Some(model.gradient(Scope::Global, &state.w)?)
    } else {
        None
    };
    let ctx = LocalContext {
        w: &state.w,
        global_gradient: global_gradient.as_deref(),
        server_cv: &state.server_cv,
        client_cv: &state.client_cv,
    };

    let results: Vec<Result<LocalResult>> = state
        .clients
        .par_iter_mut()
        .enumerate()
        .map(|(k, slot)| local_update(model, k, &ctx, cfg, slot))
        .collect();
    let results: Vec<LocalResult> = results.into_iter().collect::<Result<_>>()?;

    if variant.is_scaffold_family() {
        let mut cvs = Vec::with_capacity(state.clients.len());
        for (k, slot) in state.clients.iter_mut().enumerate() {
            let ck = if cfg.minibatch_control_variate && cfg.batch_size > 0 {
                let nk = model.client_sizes()[k];
                let batch = crate::objective::sample_batch(&mut slot.rng, nk, cfg.batch_size);
                model.minibatch_gradient(k, &state.w, &batch)?
            } else {
                model.gradient(Scope::Client(k), &state.w)?
            };
            cvs.push(ck);
        }
        state.server_cv = aggregate(&cvs, &model.client_sizes())?;
        state.client_cv = cvs;
    }

    let updates: Vec<Vec<f64>> = results.iter().map(|r| r.weights.clone()).collect();
    let mut next = aggregate(&updates, &model.client_sizes())?;

    let (rounds, down, up) = variant.comm_cost(d);
    state.comm.charge(rounds, down, up);

    let mut step_length = None;
    if cfg.line_search {
        let g = global_gradient.as_deref().expect("computed when line search is on");
        let p: Vec<f64> = next.iter().zip(&state.w).map(|(a, b)| a - b).collect();
        let f0 = model.value(Scope::Global, &state.w)?;
        let w = &state.w;
        let (alpha, trials) = armijo_backtrack(
            |a| model.value(Scope::Global, &w.iter().zip(&p).map(|(wi, pi)| wi + a * pi).collect::<Vec<_>>()),
            f0,
            dot(g, &p),
        )?;
        next = w.iter().zip(&p).map(|(wi, pi)| wi + alpha * pi).collect();
        // Direction broadcast, one local value per trial step returned.
        state.comm.charge(1, d as u64, trials as u64);
        step_length = Some(alpha);
    }

    if !next.iter().all(|v| v.is_finite()) || norm(&next) > DIVERGENCE_NORM {
        return Err(Error::Divergence { step: state.t });
    }
    state.w = next;
    state.t += 1;
    Ok(RoundReport {
        fallbacks: results.iter().filter(|r| r.fell_back).count(),
        diagnostics: results.into_iter().map(|r| r.diagnostics).collect(),
        step_length,
    })
}

/// Iterates beyond this norm count as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[cfg(test)]
mod tests;
