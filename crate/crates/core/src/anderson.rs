//! One-step Anderson acceleration over a window of local iterates.
//!
//! The step is written in multisecant form: with `S` the iterate differences
//! and `Y` the residual differences,
//!
//! ```text
//! H⁻¹ = ηI + (S − ηY)(YᵀY)⁺Yᵀ,    w_new = w − H⁻¹ g,
//! ```
//!
//! where the pseudo-inverse is applied through a rank-revealing least-squares
//! solve `z = argmin ‖Yz − g‖`, so `w_new = w − ηg − (S − ηY)z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, least_squares, norm, sub, DenseMatrix, LeastSquares, DEFAULT_RCOND};

/// Iterate differences `S` and residual differences `Y`, columns ordered
/// oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct AaHistory {
    s: DenseMatrix,
    y: DenseMatrix,
}

impl AaHistory {
    pub fn new(s: DenseMatrix, y: DenseMatrix) -> Result<Self> {
        if s.rows() != y.rows() || s.cols() != y.cols() {
            return Err(Error::DimensionMismatch { expected: s.cols(), got: y.cols() });
        }
        Ok(Self { s, y })
    }

    pub fn s(&self) -> &DenseMatrix {
        &self.s
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn dim(&self) -> usize {
        self.s.rows()
    }

    /// Number of column pairs.
    pub fn len(&self) -> usize {
        self.s.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when every `y` column is exactly zero, e.g. a converged window.
    pub fn is_degenerate(&self) -> bool {
        self.y.columns().all(|c| c.iter().all(|&v| v == 0.0))
    }

    /// The newest `n` column pairs.
    pub fn newest(&self, n: usize) -> Self {
        let skip = self.len().saturating_sub(n);
        let keep: Vec<bool> = (0..self.len()).map(|j| j >= skip).collect();
        Self { s: self.s.select_columns(&keep), y: self.y.select_columns(&keep) }
    }

    /// Prepends older pairs, keeping at most `max_len` newest columns overall.
    pub fn with_prefix(&self, older: &AaHistory, max_len: usize) -> Result<Self> {
        if older.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: older.dim() });
        }
        let pick = |a: &DenseMatrix, b: &DenseMatrix| -> Vec<Vec<f64>> {
            let cols: Vec<Vec<f64>> = a.columns().chain(b.columns()).map(<[f64]>::to_vec).collect();
            let skip = cols.len().saturating_sub(max_len);
            cols.into_iter().skip(skip).collect()
        };
        let d = self.dim();
        Ok(Self {
            s: DenseMatrix::from_columns(d, &pick(&older.s, &self.s))?,
            y: DenseMatrix::from_columns(d, &pick(&older.y, &self.y))?,
        })
    }
}

/// `s_ℓ = w_{ℓ+1} − w_ℓ` and `y_ℓ = r_{ℓ+1} − r_ℓ` for `ℓ = 0..L−1`, from
/// `L+1` iterates and the `L+1` residuals evaluated at them.
pub fn build_history(iterates: &[Vec<f64>], residuals: &[Vec<f64>]) -> Result<AaHistory> {
    if iterates.len() != residuals.len() {
        return Err(Error::DimensionMismatch { expected: iterates.len(), got: residuals.len() });
    }
    if iterates.len() < 2 {
        return Err(Error::InvalidConfig("Anderson history needs at least two iterates".into()));
    }
    let d = iterates[0].len();
    if let Some(bad) = iterates.iter().chain(residuals).find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
    }
    let diffs = |v: &[Vec<f64>]| -> Vec<Vec<f64>> { v.windows(2).map(|p| sub(&p[1], &p[0])).collect() };
    AaHistory::new(
        DenseMatrix::from_columns(d, &diffs(iterates))?,
        DenseMatrix::from_columns(d, &diffs(residuals))?,
    )
}

/// Drops pairs whose `y` column is (numerically) dependent on the columns
/// already kept: a Gram–Schmidt sweep, oldest first, removes `y_ℓ` when its
/// component orthogonal to the retained columns has norm `≤ drop_tol ‖y_ℓ‖`.
pub fn filter_history(history: &AaHistory, drop_tol: f64) -> AaHistory {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = vec![false; history.len()];
    for (j, y) in history.y.columns().enumerate() {
        let ny = norm(y);
        if ny == 0.0 {
            continue;
        }
        let mut v = y.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let nv = norm(&v);
        if nv > drop_tol * ny {
            basis.push(v.into_iter().map(|x| x / nv).collect());
            keep[j] = true;
        }
    }
    AaHistory { s: history.s.select_columns(&keep), y: history.y.select_columns(&keep) }
}

/// Knobs of the Anderson step. The defaults give the plain undamped,
/// unregularized step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AaOptions {
    /// Damping `β ∈ (0, 1]`: `w − βηg − (S − βηY)z`.
    pub damping: f64,
    /// Tikhonov weight `λ`, relative to `‖Y‖_F²`, added to the least-squares
    /// problem for `z`.
    pub regularization: f64,
    /// Relative rank tolerance of the pivoted QR.
    pub rcond: f64,
}

impl Default for AaOptions {
    fn default() -> Self {
        Self { damping: 1.0, regularization: 0.0, rcond: DEFAULT_RCOND }
    }
}

impl AaOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.regularization >= 0.0) || !(self.rcond >= 0.0) {
            return Err(Error::InvalidConfig("AA regularization and rcond must be non-negative".into()));
        }
        Ok(())
    }
}

/// `argmin ‖Yz − g‖² + λ‖Y‖_F²‖z‖²`; returns the solve and `‖Yz − g‖`.
fn project(history: &AaHistory, g: &[f64], opts: &AaOptions) -> Result<(LeastSquares, f64)> {
    let y = &history.y;
    let (d, m) = (y.rows(), y.cols());
    if m > d {
        return Err(Error::InvalidConfig(format!("history of {m} columns exceeds dimension {d}")));
    }
    let ls = if opts.regularization > 0.0 {
        let shift = (opts.regularization).sqrt() * y.frobenius_norm();
        let mut aug = DenseMatrix::zeros(d + m, m);
        for j in 0..m {
            aug.col_mut(j)[..d].copy_from_slice(y.col(j));
            aug[(d + j, j)] = shift;
        }
        let mut rhs = g.to_vec();
        rhs.resize(d + m, 0.0);
        least_squares(&aug, &rhs, opts.rcond)?
    } else {
        least_squares(y, g, opts.rcond)?
    };
    let residual = if opts.regularization > 0.0 { norm(&sub(&y.matvec(&ls.x), g)) } else { ls.residual_norm };
    Ok((ls, residual))
}

/// Result of one Anderson step with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AaStep {
    pub weights: Vec<f64>,
    /// Least-squares coefficients `z`.
    pub coefficients: Vec<f64>,
    /// Optimization gain `‖Yz − g‖ / ‖g‖`.
    pub theta: f64,
    pub rank: usize,
    /// Condition estimate of `S` from its pivoted QR.
    pub cond_s: f64,
}

/// `w − H⁻¹ g` for the history's multisecant inverse.
///
/// Fails with [`Error::DegenerateHistory`] when `Y` has numerical rank zero;
/// callers then fall back to the last plain local iterate.
pub fn aa_step(w: &[f64], g: &[f64], history: &AaHistory, eta: f64, opts: &AaOptions) -> Result<AaStep> {
    let d = w.len();
    if g.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: g.len() });
    }
    if history.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: history.dim() });
    }
    if history.is_empty() || history.is_degenerate() {
        return Err(Error::DegenerateHistory);
    }
    let (ls, residual) = project(history, g, opts)?;
    if ls.rank == 0 {
        return Err(Error::DegenerateHistory);
    }
    let step = opts.damping * eta;
    let mut out = w.to_vec();
    axpy(-step, g, &mut out);
    let correction = history.s.sub_scaled(step, &history.y).matvec(&ls.x);
    axpy(-1.0, &correction, &mut out);
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("Anderson step"));
    }
    let gnorm = norm(g);
    let theta = if gnorm == 0.0 { 0.0 } else { residual / gnorm };
    let cond_s = least_squares(&history.s, &vec![0.0; d], opts.rcond)?.cond_estimate;
    Ok(AaStep { weights: out, coefficients: ls.x, theta, rank: ls.rank, cond_s })
}

/// `θ = ‖(I − Proj_Y) g‖ / ‖g‖`; 1 for a rank-zero `Y`, 0 for `g = 0`.
pub fn optimization_gain(history: &AaHistory, g: &[f64]) -> Result<f64> {
    let gnorm = norm(g);
    if gnorm == 0.0 {
        return Ok(0.0);
    }
    if history.is_empty() {
        return Ok(1.0);
    }
    let (ls, residual) = project(history, g, &AaOptions::default())?;
    Ok(if ls.rank == 0 { 1.0 } else { residual / gnorm })
}

/// `H⁻¹ v = ηv + (S − ηY)(YᵀY)⁺Yᵀ v`.
pub fn apply_inverse_hessian(history: &AaHistory, eta: f64, v: &[f64], opts: &AaOptions) -> Result<Vec<f64>> {
    let (ls, _) = project(history, v, opts)?;
    let step = opts.damping * eta;
    let mut out: Vec<f64> = v.iter().map(|x| step * x).collect();
    axpy(1.0, &history.s.sub_scaled(step, &history.y).matvec(&ls.x), &mut out);
    Ok(out)
}

/// Per-client diagnostics of one Anderson step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AaDiagnostics {
    pub theta: f64,
    /// `‖∇f^t_k(w^t_k)‖ / ‖∇f(w^t)‖`, when measured.
    pub delta: Option<f64>,
    pub rank: usize,
    pub cond_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{aa_coefficients, gmres_solve};
    use crate::sampling::{seeded_rng, standard_normal};

    fn random_matrix(d: usize, m: usize, seed: u64) -> DenseMatrix {
        let mut rng = seeded_rng(seed, 3);
        DenseMatrix::from_col_major(d, m, (0..d * m).map(|_| standard_normal(&mut rng)).collect()).unwrap()
    }

    fn random_spd(d: usize, seed: u64) -> DenseMatrix {
        let g = random_matrix(d, d, seed);
        let mut a = g.transpose().matmul(&g);
        for i in 0..d {
            a[(i, i)] += 0.5 * d as f64;
        }
        // scale so the largest eigenvalue is O(1)
        let s = 1.0 / (3.0 * d as f64);
        DenseMatrix::from_col_major(d, d, (0..d * d).map(|i| a[(i % d, i / d)] * s).collect()).unwrap()
    }

    /// Picard iterates `w_{ℓ+1} = w_ℓ − η(Aw_ℓ − b)` and their residuals.
    fn picard(a: &DenseMatrix, b: &[f64], w0: &[f64], eta: f64, steps: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let grad = |w: &[f64]| sub(&a.matvec(w), b);
        let mut ws = vec![w0.to_vec()];
        let mut rs = vec![grad(w0)];
        for l in 0..steps {
            let mut next = ws[l].clone();
            axpy(-eta, &rs[l], &mut next);
            rs.push(grad(&next));
            ws.push(next);
        }
        (ws, rs)
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        norm(&sub(a, b)) / norm(b)
    }

    #[test]
    fn single_difference_history() {
        let h = build_history(&[vec![0.0], vec![1.0]], &[vec![2.0], vec![1.0]]).unwrap();
        assert_eq!(h.s().col(0), &[1.0]);
        assert_eq!(h.y().col(0), &[-1.0]);
    }

    #[test]
    fn gd_history_columns_are_scaled_residuals() {
        let a = random_spd(4, 1);
        let b = vec![1.0, -1.0, 0.5, 2.0];
        let eta = 0.3;
        let (ws, rs) = picard(&a, &b, &[0.0; 4], eta, 3);
        let h = build_history(&ws, &rs).unwrap();
        for l in 0..3 {
            let expect: Vec<f64> = rs[l].iter().map(|r| -eta * r).collect();
            assert!(rel(h.s().col(l), &expect) < 1e-15);
        }
    }

    #[test]
    fn converged_history_is_degenerate() {
        let w = vec![vec![1.0, 2.0]; 3];
        let r = vec![vec![0.0, 0.0]; 3];
        let h = build_history(&w, &r).unwrap();
        assert!(h.is_degenerate());
        assert!(matches!(aa_step(&w[0], &[1.0, 0.0], &h, 0.1, &AaOptions::default()), Err(Error::DegenerateHistory)));
    }

    #[test]
    fn build_history_errors() {
        assert!(build_history(&[vec![0.0]], &[vec![0.0]]).is_err());
        assert!(build_history(&[vec![0.0], vec![1.0]], &[vec![0.0]]).is_err());
        assert!(build_history(&[vec![0.0], vec![1.0, 2.0]], &[vec![0.0], vec![1.0]]).is_err());
    }

    #[test]
    fn scalar_secant_step() {
        let (s, y, g, w) = (0.7, -1.3, 2.0, 5.0);
        let h = AaHistory::new(
            DenseMatrix::from_columns(1, &[vec![s]]).unwrap(),
            DenseMatrix::from_columns(1, &[vec![y]]).unwrap(),
        )
        .unwrap();
        let out = aa_step(&[w], &[g], &h, 0.4, &AaOptions::default()).unwrap();
        assert!((out.weights[0] - (w - s / y * g)).abs() < 1e-14);
    }

    #[test]
    fn multisecant_equation_holds() {
        for seed in 0..10 {
            let m = 1 + seed as usize % 6;
            let h = AaHistory::new(random_matrix(15, m, seed), random_matrix(15, m, seed + 100)).unwrap();
            for j in 0..m {
                let hy = apply_inverse_hessian(&h, 0.3, h.y().col(j), &AaOptions::default()).unwrap();
                assert!(rel(&hy, h.s().col(j)) < 1e-10);
            }
        }
    }

    #[test]
    fn aa_step_is_gmres_point_plus_one_gradient_step() {
        // On a quadratic, L Picard steps then one AA step land on the
        // GMRES(L) point followed by one gradient step from it.
        let d = 8;
        let a = random_spd(d, 5);
        let b: Vec<f64> = random_matrix(d, 1, 6).col(0).to_vec();
        let w0 = vec![0.0; d];
        let eta = 0.5;
        for l in 1..=d {
            let (ws, rs) = picard(&a, &b, &w0, eta, l);
            let h = build_history(&ws, &rs).unwrap();
            let g = rs[0].clone();
            let step = aa_step(&w0, &g, &h, eta, &AaOptions::default()).unwrap();

            let p = gmres_solve(|v| a.matvec(v), &g, l, 0.0).unwrap().x;
            let wg = sub(&w0, &p);
            let grad_g = sub(&a.matvec(&wg), &b);
            let expect = sub(&wg, &grad_g.iter().map(|v| eta * v).collect::<Vec<_>>());
            assert!(rel(&step.weights, &expect) < 1e-8, "L={l}: {}", rel(&step.weights, &expect));
        }
    }

    #[test]
    fn full_window_reaches_minimizer() {
        let d = 6;
        let a = random_spd(d, 7);
        let b: Vec<f64> = random_matrix(d, 1, 8).col(0).to_vec();
        let (ws, rs) = picard(&a, &b, &[0.0; 6], 0.5, d);
        let step = aa_step(&ws[0], &rs[0], &build_history(&ws, &rs).unwrap(), 0.5, &AaOptions::default()).unwrap();
        let wstar = crate::linalg::cholesky_solve(&a, &b).unwrap();
        assert!(rel(&step.weights, &wstar) < 1e-9);
        assert!(step.theta < 1e-8);
    }

    #[test]
    fn gain_limits() {
        let y = DenseMatrix::from_columns(3, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let h = AaHistory::new(y.clone(), y).unwrap();
        assert!(optimization_gain(&h, &[2.0, -1.0, 0.0]).unwrap() < 1e-15);
        assert!((optimization_gain(&h, &[0.0, 0.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(optimization_gain(&h, &[0.0; 3]).unwrap(), 0.0);
        let zero = AaHistory::new(DenseMatrix::zeros(3, 2), DenseMatrix::zeros(3, 2)).unwrap();
        assert_eq!(optimization_gain(&zero, &[1.0, 0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn gain_matches_mixing_residual() {
        for seed in 0..10 {
            let a = random_spd(10, seed);
            let b: Vec<f64> = random_matrix(10, 1, seed + 50).col(0).to_vec();
            let (ws, rs) = picard(&a, &b, &[0.0; 10], 0.4, 1 + seed as usize % 5);
            let h = build_history(&ws, &rs).unwrap();
            let theta = optimization_gain(&h, &rs[0]).unwrap();
            let coeffs = aa_coefficients(&DenseMatrix::from_columns(10, &rs).unwrap()).unwrap();
            let mixed = coeffs.residual_norm / norm(&rs[0]);
            assert!((theta - mixed).abs() <= 1e-10, "{theta} vs {mixed}");
            assert!((0.0..=1.0 + 1e-12).contains(&theta));
        }
    }

    #[test]
    fn multisecant_and_mixing_forms_agree() {
        for seed in 0..10 {
            let a = random_spd(9, seed + 20);
            let b: Vec<f64> = random_matrix(9, 1, seed + 70).col(0).to_vec();
            let eta = 0.4;
            let (ws, rs) = picard(&a, &b, &random_matrix(9, 1, seed).col(0).to_vec(), eta, 4);
            let h = build_history(&ws, &rs).unwrap();
            let step = aa_step(&ws[0], &rs[0], &h, eta, &AaOptions::default()).unwrap();
            let alpha = aa_coefficients(&DenseMatrix::from_columns(9, &rs).unwrap()).unwrap().alpha;
            let mut mixed = vec![0.0; 9];
            for (i, ai) in alpha.iter().enumerate() {
                axpy(*ai, &ws[i], &mut mixed);
                axpy(-eta * ai, &rs[i], &mut mixed);
            }
            assert!(rel(&step.weights, &mixed) < 1e-9);
        }
    }

    #[test]
    fn filter_drops_dependent_columns() {
        let y0 = vec![1.0, 2.0, 0.0];
        let y1 = vec![0.0, 1.0, 1.0];
        let dup = AaHistory::new(
            DenseMatrix::from_columns(3, &[vec![1.0; 3], vec![2.0; 3]]).unwrap(),
            DenseMatrix::from_columns(3, &[y0.clone(), y0.clone()]).unwrap(),
        )
        .unwrap();
        let f = filter_history(&dup, 1e-10);
        assert_eq!(f.len(), 1);
        assert_eq!(f.s().col(0), &[1.0; 3]);

        let ortho = AaHistory::new(DenseMatrix::identity(3), DenseMatrix::identity(3)).unwrap();
        assert_eq!(filter_history(&ortho, 1e-10).len(), 3);

        let y2: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| a + b).collect();
        let dep = AaHistory::new(DenseMatrix::identity(3), DenseMatrix::from_columns(3, &[y0, y1, y2]).unwrap()).unwrap();
        let f = filter_history(&dep, 1e-10);
        assert_eq!(f.len(), 2);
        assert_eq!(f.s().col(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn quadratic_gain_and_delta_bound() {
        // ∇f(w_new) = (I − ηA)(g − Yz), so δ ≤ (1 − ημ)θ.
        let d = 10;
        let a = random_spd(d, 30);
        let b: Vec<f64> = random_matrix(d, 1, 31).col(0).to_vec();
        let mu = crate::linalg::spectral_bounds(|v| a.matvec(v), d, 5000, 1).0;
        let eta = 0.5;
        for l in 1..d {
            let (ws, rs) = picard(&a, &b, &[0.0; 10], eta, l);
            let step = aa_step(&ws[0], &rs[0], &build_history(&ws, &rs).unwrap(), eta, &AaOptions::default()).unwrap();
            let delta = norm(&sub(&a.matvec(&step.weights), &b)) / norm(&rs[0]);
            assert!(delta <= (1.0 - eta * mu) * step.theta * (1.0 + 1e-9), "L={l}");
        }
    }

    #[test]
    fn damping_and_regularization() {
        let h = AaHistory::new(random_matrix(6, 3, 1), random_matrix(6, 3, 2)).unwrap();
        let g = random_matrix(6, 1, 3).col(0).to_vec();
        let w = vec![0.0; 6];
        let base = aa_step(&w, &g, &h, 0.2, &AaOptions::default()).unwrap();
        let damped = aa_step(&w, &g, &h, 0.2, &AaOptions { damping: 0.5, ..AaOptions::default() }).unwrap();
        // Same z, so the difference is exactly the damped share of η(g − Yz).
        let ez = sub(&g, &h.y().matvec(&base.coefficients));
        let diff = sub(&damped.weights, &base.weights);
        let expect: Vec<f64> = ez.iter().map(|v| 0.5 * 0.2 * v).collect();
        assert!(rel(&diff, &expect) < 1e-10);

        let reg = aa_step(&w, &g, &h, 0.2, &AaOptions { regularization: 1e-2, ..AaOptions::default() }).unwrap();
        assert!(norm(&reg.coefficients) < norm(&base.coefficients));
        assert!(reg.theta >= base.theta && reg.theta <= 1.0);
        assert!(AaOptions { damping: 0.0, ..AaOptions::default() }.validate().is_err());
    }

    #[test]
    fn prefix_keeps_newest_columns() {
        let old = AaHistory::new(DenseMatrix::identity(3), DenseMatrix::identity(3)).unwrap();
        let new = AaHistory::new(
            DenseMatrix::from_columns(3, &[vec![5.0; 3]]).unwrap(),
            DenseMatrix::from_columns(3, &[vec![6.0; 3]]).unwrap(),
        )
        .unwrap();
        let h = new.with_prefix(&old, 2).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.s().col(0), &[0.0, 0.0, 1.0]);
        assert_eq!(h.s().col(1), &[5.0; 3]);
    }
}
