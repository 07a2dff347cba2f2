//! Unpreconditioned Krylov solvers started from `x₀ = 0`.

use super::dense::{axpy, dot, norm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual `‖Bx − g‖ / ‖g‖` after each iteration; the recursive
    /// residual, not recomputed from `x`.
    pub residual_history: Vec<f64>,
}

impl KrylovSolution {
    pub fn relative_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(1.0)
    }
}

fn zero_rhs(d: usize) -> KrylovSolution {
    KrylovSolution { x: vec![0.0; d], iterations: 0, residual_history: vec![0.0] }
}

/// Conjugate gradients for symmetric positive definite `H`, at most
/// `max_iter` steps, stopping once `‖Hx − g‖ ≤ tol ‖g‖`.
///
/// Non-positive or non-finite curvature `pᵀHp` is reported as a breakdown
/// carrying the last finite iterate.
pub fn cg_solve<F>(mut hvp: F, g: &[f64], max_iter: usize, tol: f64) -> Result<KrylovSolution>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if max_iter == 0 {
        return Err(Error::InvalidConfig("CG needs at least one iteration".into()));
    }
    let d = g.len();
    let gnorm = norm(g);
    if gnorm == 0.0 {
        return Ok(zero_rhs(d));
    }
    let mut x = vec![0.0; d];
    let mut r = g.to_vec();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let mut history = Vec::new();
    for it in 0..max_iter {
        let hp = hvp(&p);
        let curvature = dot(&p, &hp);
        if !curvature.is_finite() || curvature <= 0.0 {
            return Err(Error::SolverBreakdown { iteration: it, last: x });
        }
        let alpha = rs / curvature;
        let mut next = x.clone();
        axpy(alpha, &p, &mut next);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::SolverBreakdown { iteration: it, last: x });
        }
        x = next;
        axpy(-alpha, &hp, &mut r);
        let rs_new = dot(&r, &r);
        history.push(rs_new.sqrt() / gnorm);
        if rs_new.sqrt() <= tol * gnorm {
            break;
        }
        let beta = rs_new / rs;
        rs = rs_new;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    Ok(KrylovSolution { iterations: history.len(), x, residual_history: history })
}

/// GMRES without restarts: Arnoldi with modified Gram–Schmidt and a Givens
/// QR of the Hessenberg matrix. Returns the minimizer of `‖Bx − g‖` over
/// `K_q(B, g)`, or the exact subspace solution on happy breakdown.
pub fn gmres_solve<F>(mut op: F, g: &[f64], max_iter: usize, tol: f64) -> Result<KrylovSolution>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if max_iter == 0 {
        return Err(Error::InvalidConfig("GMRES needs at least one iteration".into()));
    }
    let d = g.len();
    let gnorm = norm(g);
    if !gnorm.is_finite() {
        return Err(Error::NonFinite("GMRES right-hand side"));
    }
    if gnorm == 0.0 {
        return Ok(zero_rhs(d));
    }
    let q = max_iter.min(d);

    let mut basis: Vec<Vec<f64>> = vec![g.iter().map(|v| v / gnorm).collect()];
    // Column j of the rotated Hessenberg matrix, upper-triangular part only.
    let mut rcols: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut cs: Vec<f64> = Vec::with_capacity(q);
    let mut sn: Vec<f64> = Vec::with_capacity(q);
    let mut e = vec![gnorm];
    let mut history = Vec::with_capacity(q);

    for j in 0..q {
        let mut w = op(&basis[j]);
        let w_norm0 = norm(&w);
        if !w_norm0.is_finite() {
            return Err(Error::SolverBreakdown { iteration: j, last: vec![0.0; d] });
        }
        let mut h = Vec::with_capacity(j + 2);
        for v in &basis {
            let hij = dot(&w, v);
            axpy(-hij, v, &mut w);
            h.push(hij);
        }
        let h_next = norm(&w);
        let happy = h_next <= 1e-14 * w_norm0.max(f64::MIN_POSITIVE);

        for i in 0..j {
            let (a, b) = (h[i], h[i + 1]);
            h[i] = cs[i] * a + sn[i] * b;
            h[i + 1] = -sn[i] * a + cs[i] * b;
        }
        let (a, b) = (h[j], if happy { 0.0 } else { h_next });
        let rho = a.hypot(b);
        let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, b / rho) };
        h[j] = rho;
        h.truncate(j + 1);
        cs.push(c);
        sn.push(s);
        let ej = e[j];
        e[j] = c * ej;
        e.push(-s * ej);
        rcols.push(h);

        let rel = e[j + 1].abs() / gnorm;
        history.push(rel);
        if happy || rel <= tol {
            break;
        }
        basis.push(w.into_iter().map(|v| v / h_next).collect());
    }

    let k = rcols.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = e[i];
        for (l, yl) in y.iter().enumerate().take(k).skip(i + 1) {
            s -= rcols[l][i] * yl;
        }
        // A zero pivot only arises when B annihilates the Krylov vector.
        y[i] = if rcols[i][i] == 0.0 { 0.0 } else { s / rcols[i][i] };
    }
    let mut x = vec![0.0; d];
    for (v, &yi) in basis.iter().zip(&y) {
        axpy(yi, v, &mut x);
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::SolverBreakdown { iteration: k, last: vec![0.0; d] });
    }
    Ok(KrylovSolution { x, iterations: k, residual_history: history })
}
