//! Damped Newton with Armijo backtracking, used for exact local solves and
//! for the reference minimizer.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, norm, DenseMatrix};

pub const ARMIJO_C1: f64 = 1e-4;
pub const MAX_BACKTRACKS: usize = 30;

/// Backtracking on `φ(α) = f(w + αp)` from `α = 1`, halving up to
/// [`MAX_BACKTRACKS`] times. Returns the accepted step and the number of
/// trial evaluations; when no trial passes, the smallest step tried.
///
/// A few ulps of slack on `f(w)` keep steps at the rounding floor from being
/// rejected.
pub fn armijo_backtrack<F>(mut value: F, f0: f64, slope: f64) -> Result<(f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let slack = 4.0 * f64::EPSILON * f0.abs();
    let mut alpha = 1.0;
    for trial in 1..=MAX_BACKTRACKS + 1 {
        let f = value(alpha)?;
        if f.is_finite() && f <= f0 + ARMIJO_C1 * alpha * slope + slack {
            return Ok((alpha, trial));
        }
        if trial <= MAX_BACKTRACKS {
            alpha *= 0.5;
        }
    }
    Ok((alpha, MAX_BACKTRACKS + 1))
}

/// Minimizes a smooth strongly convex function from `start` until
/// `‖∇f‖ ≤ tol`.
pub fn damped_newton<V, G, H>(
    mut value: V,
    mut gradient: G,
    mut hessian: H,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>>
where
    V: FnMut(&[f64]) -> Result<f64>,
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
    H: FnMut(&[f64]) -> Result<DenseMatrix>,
{
    let mut w = start.to_vec();
    for _ in 0..max_iter {
        let g = gradient(&w)?;
        if norm(&g) <= tol {
            return Ok(w);
        }
        let h = hessian(&w)?;
        let p: Vec<f64> = cholesky_solve(&h, &g)?.into_iter().map(|v| -v).collect();
        let f0 = value(&w)?;
        let slope = dot(&g, &p);
        let (alpha, _) = armijo_backtrack(
            |a| value(&w.iter().zip(&p).map(|(wi, pi)| wi + a * pi).collect::<Vec<_>>()),
            f0,
            slope,
        )?;
        w.iter_mut().zip(&p).for_each(|(wi, pi)| *wi += alpha * pi);
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("Newton iterate"));
        }
    }
    if norm(&gradient(&w)?) <= tol {
        return Ok(w);
    }
    Err(Error::NewtonNonConvergence { iterations: max_iter })
}
