//! Loss families: ℓ2-regularized logistic regression over partitioned sparse
//! data, and per-client quadratics with known minimizer.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Example, Label, Partition};
use crate::error::{Error, Result};
use crate::linalg::{axpy, cholesky_solve, dot, norm, DenseMatrix};
use crate::sampling::{sample_without_replacement, seeded_rng, standard_normal, unit_uniform};

/// Which objective to evaluate: one client's `f_k`, or the weighted global
/// `f = Σ (N_k/N) f_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Global,
    Client(usize),
}

/// Variance-reduction correction added to a client's local gradient.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientCorrection {
    /// Plain local gradient (FedAvg).
    None,
    /// `∇f_k(w; ζ) − ∇f_k(anchor; ζ) + ∇f(anchor)`, same ζ in both local terms.
    Svrg { anchor: Vec<f64>, global_gradient: Vec<f64> },
    /// `∇f_k(w; ζ) − c_k + c`.
    Scaffold { client: Vec<f64>, server: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct LogisticProblem {
    data: Arc<Dataset>,
    partition: Partition,
    gamma: f64,
}

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    hessians: Vec<DenseMatrix>,
    linear: Vec<Vec<f64>>,
    sizes: Vec<usize>,
    /// Known eigenvalues per client, when the fixture was built from them.
    spectra: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub enum LossModel {
    Logistic(LogisticProblem),
    Quadratic(QuadraticProblem),
}

/// `log(1 + exp(z))` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(z))`.
#[inline]
fn logistic_tail(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

impl LogisticProblem {
    pub fn new(data: Arc<Dataset>, partition: Partition, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidConfig(format!("regularization γ = {gamma} must be positive")));
        }
        if partition.assignments().iter().flatten().any(|&i| i >= data.len()) {
            return Err(Error::InvalidConfig("partition index out of range".into()));
        }
        Ok(Self { data, partition, gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    fn example(&self, k: usize, pos: usize) -> &Example {
        &self.data.examples()[self.partition.client(k)[pos]]
    }

    fn loss_sum(&self, k: usize, w: &[f64], positions: impl Iterator<Item = usize>) -> f64 {
        positions
            .map(|p| {
                let ex = self.example(k, p);
                softplus(-ex.label.sign() * ex.dot(w))
            })
            .sum()
    }

    fn value(&self, k: usize, w: &[f64]) -> f64 {
        let nk = self.partition.client(k).len();
        self.loss_sum(k, w, 0..nk) / nk as f64 + 0.5 * self.gamma * dot(w, w)
    }

    fn gradient_over(&self, k: usize, w: &[f64], positions: &[usize]) -> Vec<f64> {
        let mut g = vec![0.0; w.len()];
        let scale = 1.0 / positions.len() as f64;
        for &p in positions {
            let ex = self.example(k, p);
            let y = ex.label.sign();
            let coeff = -y * logistic_tail(y * ex.dot(w));
            ex.add_scaled_to(coeff * scale, &mut g);
        }
        axpy(self.gamma, w, &mut g);
        g
    }

    fn gradient(&self, k: usize, w: &[f64]) -> Vec<f64> {
        let all: Vec<usize> = (0..self.partition.client(k).len()).collect();
        self.gradient_over(k, w, &all)
    }

    fn hessian_vec(&self, k: usize, w: &[f64], v: &[f64]) -> Vec<f64> {
        let nk = self.partition.client(k).len();
        let mut out = vec![0.0; w.len()];
        for p in 0..nk {
            let ex = self.example(k, p);
            let m = ex.label.sign() * ex.dot(w);
            let curvature = logistic_tail(m) * logistic_tail(-m);
            ex.add_scaled_to(curvature * ex.dot(v) / nk as f64, &mut out);
        }
        axpy(self.gamma, v, &mut out);
        out
    }

    fn hessian(&self, k: usize, w: &[f64]) -> DenseMatrix {
        let d = w.len();
        let nk = self.partition.client(k).len();
        let mut h = DenseMatrix::zeros(d, d);
        for p in 0..nk {
            let ex = self.example(k, p);
            let m = ex.label.sign() * ex.dot(w);
            let c = logistic_tail(m) * logistic_tail(-m) / nk as f64;
            for &(i, vi) in &ex.features {
                for &(j, vj) in &ex.features {
                    h[(i as usize - 1, j as usize - 1)] += c * vi * vj;
                }
            }
        }
        for i in 0..d {
            h[(i, i)] += self.gamma;
        }
        h
    }

    /// `γ + max_j ‖x_j‖² / 4`, an upper bound on every local smoothness
    /// constant.
    pub fn smoothness_bound(&self) -> f64 {
        let max_sq = self
            .partition
            .assignments()
            .iter()
            .flatten()
            .map(|&i| self.data.examples()[i].squared_norm())
            .fold(0.0, f64::max);
        self.gamma + 0.25 * max_sq
    }
}

impl QuadraticProblem {
    /// Client `k` contributes `½ wᵀA_k w − b_kᵀw` with weight `N_k/N`.
    pub fn new(hessians: Vec<DenseMatrix>, linear: Vec<Vec<f64>>, sizes: Vec<usize>) -> Result<Self> {
        let k = hessians.len();
        if k == 0 || linear.len() != k || sizes.len() != k {
            return Err(Error::InvalidConfig("quadratic clients need matching A_k, b_k, N_k".into()));
        }
        let d = hessians[0].rows();
        for (a, b) in hessians.iter().zip(&linear) {
            if a.rows() != d || a.cols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: a.rows().max(a.cols()) });
            }
            if b.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: b.len() });
            }
            for i in 0..d {
                for j in 0..i {
                    if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * (a[(i, j)].abs() + a[(j, i)].abs() + 1.0) {
                        return Err(Error::InvalidConfig("quadratic Hessian is not symmetric".into()));
                    }
                }
            }
            if cholesky_solve(a, &vec![0.0; d]).is_err() {
                return Err(Error::NotPositiveDefinite);
            }
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("client with zero weight".into()));
        }
        Ok(Self { hessians, linear, sizes, spectra: None })
    }

    pub fn hessian(&self, k: usize) -> &DenseMatrix {
        &self.hessians[k]
    }

    pub fn linear(&self, k: usize) -> &[f64] {
        &self.linear[k]
    }

    /// Eigenvalues of `A_k`, if known from construction.
    pub fn spectrum(&self, k: usize) -> Option<&[f64]> {
        self.spectra.as_ref().map(|s| s[k].as_slice())
    }

    fn weights(&self) -> Vec<f64> {
        let n: usize = self.sizes.iter().sum();
        self.sizes.iter().map(|&s| s as f64 / n as f64).collect()
    }

    /// `(Σ (N_k/N) A_k, Σ (N_k/N) b_k)`.
    pub fn global_system(&self) -> (DenseMatrix, Vec<f64>) {
        let d = self.linear[0].len();
        let mut a = DenseMatrix::zeros(d, d);
        let mut b = vec![0.0; d];
        for ((ak, bk), wk) in self.hessians.iter().zip(&self.linear).zip(self.weights()) {
            for j in 0..d {
                axpy(wk, ak.col(j), a.col_mut(j));
            }
            axpy(wk, bk, &mut b);
        }
        (a, b)
    }

    /// Global minimizer by a direct solve of the averaged system.
    pub fn minimizer(&self) -> Result<Vec<f64>> {
        let (a, b) = self.global_system();
        cholesky_solve(&a, &b)
    }

    fn value(&self, k: usize, w: &[f64]) -> f64 {
        0.5 * dot(w, &self.hessians[k].matvec(w)) - dot(&self.linear[k], w)
    }

    fn gradient(&self, k: usize, w: &[f64]) -> Vec<f64> {
        let mut g = self.hessians[k].matvec(w);
        axpy(-1.0, &self.linear[k], &mut g);
        g
    }
}

impl LossModel {
    pub fn dim(&self) -> usize {
        match self {
            LossModel::Logistic(p) => p.data.dim(),
            LossModel::Quadratic(p) => p.linear[0].len(),
        }
    }

    pub fn num_clients(&self) -> usize {
        match self {
            LossModel::Logistic(p) => p.partition.num_clients(),
            LossModel::Quadratic(p) => p.hessians.len(),
        }
    }

    /// `N_k` per client.
    pub fn client_sizes(&self) -> Vec<usize> {
        match self {
            LossModel::Logistic(p) => p.partition.client_sizes(),
            LossModel::Quadratic(p) => p.sizes.clone(),
        }
    }

    /// `N_k / N` per client, with `N = Σ N_k`.
    pub fn client_weights(&self) -> Vec<f64> {
        let sizes = self.client_sizes();
        let n: usize = sizes.iter().sum();
        sizes.iter().map(|&s| s as f64 / n as f64).collect()
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: w.len() });
        }
        Ok(())
    }

    fn check_client(&self, k: usize) -> Result<()> {
        if k >= self.num_clients() {
            return Err(Error::InvalidConfig(format!("client {k} out of range")));
        }
        Ok(())
    }

    pub fn value(&self, scope: Scope, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        match scope {
            Scope::Client(k) => {
                self.check_client(k)?;
                Ok(self.client_value(k, w))
            }
            Scope::Global => Ok(self
                .client_weights()
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * self.client_value(k, w))
                .sum()),
        }
    }

    fn client_value(&self, k: usize, w: &[f64]) -> f64 {
        match self {
            LossModel::Logistic(p) => p.value(k, w),
            LossModel::Quadratic(p) => p.value(k, w),
        }
    }

    fn client_gradient(&self, k: usize, w: &[f64]) -> Vec<f64> {
        match self {
            LossModel::Logistic(p) => p.gradient(k, w),
            LossModel::Quadratic(p) => p.gradient(k, w),
        }
    }

    pub fn gradient(&self, scope: Scope, w: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        match scope {
            Scope::Client(k) => {
                self.check_client(k)?;
                Ok(self.client_gradient(k, w))
            }
            Scope::Global => {
                let mut g = vec![0.0; w.len()];
                for (k, wk) in self.client_weights().into_iter().enumerate() {
                    axpy(wk, &self.client_gradient(k, w), &mut g);
                }
                Ok(g)
            }
        }
    }

    /// Client gradient over the batch `batch` (positions within the client's
    /// example list), normalized by `|batch|`, plus the full `γw` term.
    /// Quadratic clients have no examples and return the full gradient.
    pub fn minibatch_gradient(&self, k: usize, w: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        self.check_client(k)?;
        if batch.is_empty() {
            return Err(Error::InvalidConfig("empty mini-batch".into()));
        }
        match self {
            LossModel::Logistic(p) => {
                let nk = p.partition.client(k).len();
                if let Some(&bad) = batch.iter().find(|&&b| b >= nk) {
                    return Err(Error::InvalidConfig(format!("batch position {bad} outside client {k}")));
                }
                Ok(p.gradient_over(k, w, batch))
            }
            LossModel::Quadratic(p) => Ok(p.gradient(k, w)),
        }
    }

    fn batch_or_full(&self, k: usize, w: &[f64], batch: Option<&[usize]>) -> Result<Vec<f64>> {
        match batch {
            Some(b) => self.minibatch_gradient(k, w, b),
            None => self.gradient(Scope::Client(k), w),
        }
    }

    /// Matrix-free `∇²f v` for a client or the global objective.
    pub fn hessian_vec(&self, scope: Scope, w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        self.check_dim(v)?;
        let client = |k: usize| match self {
            LossModel::Logistic(p) => p.hessian_vec(k, w, v),
            LossModel::Quadratic(p) => p.hessians[k].matvec(v),
        };
        match scope {
            Scope::Client(k) => {
                self.check_client(k)?;
                Ok(client(k))
            }
            Scope::Global => {
                let mut out = vec![0.0; v.len()];
                for (k, wk) in self.client_weights().into_iter().enumerate() {
                    axpy(wk, &client(k), &mut out);
                }
                Ok(out)
            }
        }
    }

    /// Dense Hessian, for the small direct solves in Newton-type inner loops.
    pub fn hessian(&self, scope: Scope, w: &[f64]) -> Result<DenseMatrix> {
        self.check_dim(w)?;
        let client = |k: usize| match self {
            LossModel::Logistic(p) => p.hessian(k, w),
            LossModel::Quadratic(p) => p.hessians[k].clone(),
        };
        match scope {
            Scope::Client(k) => {
                self.check_client(k)?;
                Ok(client(k))
            }
            Scope::Global => {
                let d = self.dim();
                let mut h = DenseMatrix::zeros(d, d);
                for (k, wk) in self.client_weights().into_iter().enumerate() {
                    let hk = client(k);
                    for j in 0..d {
                        axpy(wk, hk.col(j), h.col_mut(j));
                    }
                }
                Ok(h)
            }
        }
    }

    /// Corrected local gradient, the residual driving the local iterations.
    /// `batch = None` means full batch.
    pub fn corrected_gradient(
        &self,
        k: usize,
        w: &[f64],
        correction: &GradientCorrection,
        batch: Option<&[usize]>,
    ) -> Result<Vec<f64>> {
        let mut g = self.batch_or_full(k, w, batch)?;
        match correction {
            GradientCorrection::None => {}
            GradientCorrection::Svrg { anchor, global_gradient } => {
                self.check_dim(anchor)?;
                self.check_dim(global_gradient)?;
                let at_anchor = self.batch_or_full(k, anchor, batch)?;
                for ((gi, ai), ci) in g.iter_mut().zip(&at_anchor).zip(global_gradient) {
                    *gi = *gi - ai + ci;
                }
            }
            GradientCorrection::Scaffold { client, server } => {
                self.check_dim(client)?;
                self.check_dim(server)?;
                for ((gi, ck), c) in g.iter_mut().zip(client).zip(server) {
                    *gi = *gi - ck + c;
                }
            }
        }
        Ok(g)
    }

    /// Full-batch linear offset `c_corr` of the corrected local objective
    /// `f^t_k(w) = f_k(w) + ⟨c_corr, w⟩`.
    pub fn correction_offset(&self, k: usize, correction: &GradientCorrection) -> Result<Vec<f64>> {
        let d = self.dim();
        match correction {
            GradientCorrection::None => Ok(vec![0.0; d]),
            GradientCorrection::Svrg { anchor, global_gradient } => {
                let local = self.gradient(Scope::Client(k), anchor)?;
                Ok(global_gradient.iter().zip(&local).map(|(g, l)| g - l).collect())
            }
            GradientCorrection::Scaffold { client, server } => {
                Ok(server.iter().zip(client).map(|(c, ck)| c - ck).collect())
            }
        }
    }

    /// `f_k(w) + ⟨offset, w⟩`.
    pub fn corrected_value(&self, k: usize, w: &[f64], offset: &[f64]) -> Result<f64> {
        Ok(self.value(Scope::Client(k), w)? + dot(offset, w))
    }

    /// Upper bound on the smoothness constant of every `f_k`.
    pub fn smoothness(&self) -> f64 {
        match self {
            LossModel::Logistic(p) => p.smoothness_bound(),
            LossModel::Quadratic(p) => (0..p.hessians.len())
                .map(|k| self.client_curvature_bounds(k).1)
                .fold(0.0, f64::max),
        }
    }

    /// Lower bound on the strong-convexity constant of every `f_k`.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            LossModel::Logistic(p) => p.gamma,
            LossModel::Quadratic(p) => (0..p.hessians.len())
                .map(|k| self.client_curvature_bounds(k).0)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// `(μ_k, β_k)`: exact for quadratics (known spectrum, else power
    /// iteration); `(γ, smoothness bound)` for logistic clients.
    pub fn client_curvature_bounds(&self, k: usize) -> (f64, f64) {
        match self {
            LossModel::Logistic(p) => (p.gamma, p.smoothness_bound()),
            LossModel::Quadratic(p) => match p.spectrum(k) {
                Some(s) => (
                    s.iter().copied().fold(f64::INFINITY, f64::min),
                    s.iter().copied().fold(0.0, f64::max),
                ),
                None => {
                    let a = &p.hessians[k];
                    crate::linalg::spectral_bounds(|v| a.matvec(v), a.rows(), 2000, 17)
                }
            },
        }
    }
}

/// Parameters of the synthetic quadratic fixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub dim: usize,
    pub clients: usize,
    /// `β/μ` of every client Hessian; `β = 1`.
    pub condition_number: f64,
    /// Spread of the per-client linear terms around a common vector.
    pub heterogeneity: f64,
    /// Log-scale spread of the per-client eigenvalues around a shared
    /// spectrum; 0 gives identical Hessians.
    #[serde(default = "default_hessian_spread")]
    pub hessian_spread: f64,
    pub seed: u64,
}

fn default_hessian_spread() -> f64 {
    0.25
}

/// Quadratic fixture and its global minimizer.
#[derive(Debug, Clone)]
pub struct QuadraticFixture {
    pub model: LossModel,
    pub minimizer: Vec<f64>,
}

fn random_orthogonal(d: usize, rng: &mut crate::sampling::SimRng) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
        // Two Gram–Schmidt passes for orthogonality to working precision.
        for _ in 0..2 {
            for q in &cols {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            cols.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    DenseMatrix::from_columns(d, &cols).unwrap()
}

/// `A_k = Q diag(λ_k) Qᵀ` with one seeded random orthogonal `Q` shared by all
/// clients. A base spectrum is log-uniform in `[1/κ, 1]` with both endpoints
/// included when `d ≥ 2`; each client scales the interior eigenvalues by
/// `exp(hessian_spread · ξ)` and clamps them back into `[1/κ, 1]`.
/// `b_k = b₀ + heterogeneity · ξ_k`. Client weights are equal.
pub fn generate_quadratic(spec: &QuadraticSpec) -> Result<QuadraticFixture> {
    let QuadraticSpec { dim: d, clients, condition_number: kappa, heterogeneity, hessian_spread, seed } = *spec;
    if d == 0 || clients == 0 {
        return Err(Error::InvalidConfig("quadratic fixture needs d ≥ 1 and K ≥ 1".into()));
    }
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidConfig(format!("condition number {kappa} must be ≥ 1")));
    }
    if !(hessian_spread >= 0.0) || !(heterogeneity >= 0.0) {
        return Err(Error::InvalidConfig("heterogeneity scales must be non-negative".into()));
    }
    let mut rng = seeded_rng(seed, 0);
    let (mu, beta) = (1.0 / kappa, 1.0);
    let q = random_orthogonal(d, &mut rng);
    let base: Vec<f64> = (0..d)
        .map(|i| match i {
            0 => mu,
            1 => beta,
            _ => {
                let u = unit_uniform(&mut rng);
                (mu.ln() + u * (beta.ln() - mu.ln())).exp()
            }
        })
        .collect();
    let b0: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
    let mut hessians = Vec::with_capacity(clients);
    let mut linear = Vec::with_capacity(clients);
    let mut spectra = Vec::with_capacity(clients);
    for _ in 0..clients {
        let lambdas: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(i, &lam)| {
                let xi = standard_normal(&mut rng);
                if i < 2 {
                    lam
                } else {
                    (lam * (hessian_spread * xi).exp()).clamp(mu, beta)
                }
            })
            .collect();
        let mut a = DenseMatrix::zeros(d, d);
        for (l, &lam) in lambdas.iter().enumerate() {
            let ql = q.col(l);
            for j in 0..d {
                let s = lam * ql[j];
                for i in 0..d {
                    a[(i, j)] += s * ql[i];
                }
            }
        }
        // Exact symmetry.
        for j in 0..d {
            for i in 0..j {
                let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = avg;
                a[(j, i)] = avg;
            }
        }
        let b: Vec<f64> = b0.iter().map(|&x| x + heterogeneity * standard_normal(&mut rng)).collect();
        hessians.push(a);
        linear.push(b);
        spectra.push(lambdas);
    }
    let mut problem = QuadraticProblem::new(hessians, linear, vec![1; clients])?;
    problem.spectra = Some(spectra);
    let minimizer = problem.minimizer()?;
    Ok(QuadraticFixture { model: LossModel::Quadratic(problem), minimizer })
}

/// Parameters of the synthetic logistic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticSpec {
    pub examples: usize,
    pub dim: usize,
    /// Ratio between the largest and smallest feature standard deviation;
    /// the largest is 1.
    #[serde(default = "default_feature_spread")]
    pub feature_spread: f64,
    /// Norm of the planted separator.
    #[serde(default = "default_signal")]
    pub signal: f64,
    pub seed: u64,
}

fn default_feature_spread() -> f64 {
    10.0
}

fn default_signal() -> f64 {
    3.0
}

/// Dense Gaussian features with geometrically decaying scales and labels
/// drawn from a logistic model around a planted separator.
pub fn generate_logistic(spec: &LogisticSpec) -> Result<Dataset> {
    let LogisticSpec { examples: n, dim: d, feature_spread, signal, seed } = *spec;
    if n == 0 || d == 0 || !(feature_spread >= 1.0) {
        return Err(Error::InvalidConfig("synthetic logistic needs N, d ≥ 1 and spread ≥ 1".into()));
    }
    let mut rng = seeded_rng(seed, 0);
    let scales: Vec<f64> = (0..d)
        .map(|i| {
            let t = if d == 1 { 0.0 } else { i as f64 / (d - 1) as f64 };
            feature_spread.powf(-t)
        })
        .collect();
    let mut truth: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
    let tn = norm(&truth);
    truth.iter_mut().zip(&scales).for_each(|(t, s)| *t *= signal / (tn * s));
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = scales
            .iter()
            .map(|s| s * standard_normal(&mut rng) / (d as f64).sqrt())
            .collect();
        let margin = dot(&truth, &x);
        let p_pos = logistic_tail(-margin);
        let label = if unit_uniform(&mut rng) < p_pos { Label::Positive } else { Label::Negative };
        let features = x.iter().enumerate().map(|(i, &v)| (i as u32 + 1, v)).collect();
        out.push(Example { label, features });
    }
    Dataset::new(out, Some(d))
}

/// Draws `batch` distinct positions from a client's `n_k` examples; the whole
/// client when `batch ≥ n_k`.
pub fn sample_batch(rng: &mut crate::sampling::SimRng, n_k: usize, batch: usize) -> Vec<usize> {
    if batch >= n_k {
        return (0..n_k).collect();
    }
    sample_without_replacement(rng, n_k, batch)
}
