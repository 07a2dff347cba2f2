//! Least squares by Householder QR with column pivoting, and the
//! affine-constrained Anderson mixing problem built on it.

use super::dense::{dot, norm, sub, DenseMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    /// Number of retained (pivoted) columns.
    pub rank: usize,
    /// `‖A x − b‖`.
    pub residual_norm: f64,
    /// `|R₀₀| / |R_{r−1,r−1}|`, a cheap lower estimate of the condition number
    /// of the retained columns. Infinite for rank 0.
    pub cond_estimate: f64,
}

/// Minimizes `‖A x − b‖` over the columns whose pivoted R-diagonal exceeds
/// `rcond · |R₀₀|`. Dropped columns get `x = 0`.
pub fn least_squares(a: &DenseMatrix, b: &[f64], rcond: f64) -> Result<LeastSquares> {
    let (d, m) = (a.rows(), a.cols());
    if m > d {
        return Err(Error::InvalidConfig(format!("least squares with {m} columns and {d} rows")));
    }
    if b.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: b.len() });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("least-squares matrix"));
    }
    if !b.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("least-squares right-hand side"));
    }

    let mut r = a.clone();
    let mut qtb = b.to_vec();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut diag = vec![0.0; m];

    for j in 0..m {
        // Pivot: largest trailing column norm, first index on ties.
        let mut best = j;
        let mut best_norm = -1.0;
        for c in j..m {
            let nc = norm(&r.col(c)[j..]);
            if nc > best_norm {
                best = c;
                best_norm = nc;
            }
        }
        if best != j {
            for i in 0..d {
                let tmp = r[(i, j)];
                r[(i, j)] = r[(i, best)];
                r[(i, best)] = tmp;
            }
            perm.swap(j, best);
        }

        let alpha = best_norm;
        if alpha == 0.0 {
            // Remaining columns are all zero.
            break;
        }
        let x0 = r[(j, j)];
        let beta = if x0 >= 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = r.col(j)[j..].to_vec();
        v[0] -= beta;
        let vnorm2 = dot(&v, &v);
        diag[j] = beta;
        r[(j, j)] = beta;
        for i in j + 1..d {
            r[(i, j)] = 0.0;
        }
        if vnorm2 == 0.0 {
            continue;
        }
        for c in j + 1..m {
            let col = &mut r.col_mut(c)[j..];
            let s = 2.0 * dot(&v, col) / vnorm2;
            col.iter_mut().zip(&v).for_each(|(ci, vi)| *ci -= s * vi);
        }
        let tail = &mut qtb[j..];
        let s = 2.0 * dot(&v, tail) / vnorm2;
        tail.iter_mut().zip(&v).for_each(|(ti, vi)| *ti -= s * vi);
    }

    let lead = diag.first().map_or(0.0, |v| v.abs());
    let rank = if lead == 0.0 {
        0
    } else {
        diag.iter().take_while(|v| v.abs() > rcond * lead).count()
    };

    let mut xp = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut s = qtb[i];
        for k in i + 1..rank {
            s -= r[(i, k)] * xp[k];
        }
        xp[i] = s / r[(i, i)];
    }
    let mut x = vec![0.0; m];
    for (i, &v) in xp.iter().enumerate() {
        x[perm[i]] = v;
    }
    // Dropped columns have x = 0, so the residual is exactly the tail of Qᵀb;
    // recomputing A x − b would cancel badly for ill-conditioned A.
    let residual_norm = norm(&qtb[rank..]);
    let cond_estimate = if rank == 0 { f64::INFINITY } else { lead / diag[rank - 1].abs() };
    Ok(LeastSquares { x, rank, residual_norm, cond_estimate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaCoefficients {
    /// Mixing weights, one per residual column, summing to one.
    pub alpha: Vec<f64>,
    /// `‖Σ αᵢ rᵢ‖`.
    pub residual_norm: f64,
    pub rank: usize,
}

/// Affine mixing weights for residual columns `[r₀, …, r_m]` with the default
/// rank tolerance.
pub fn aa_coefficients(residuals: &DenseMatrix) -> Result<AaCoefficients> {
    aa_coefficients_with(residuals, DEFAULT_RCOND)
}

/// Minimizes `‖Σ αᵢ rᵢ‖` subject to `Σ αᵢ = 1` by solving the unconstrained
/// problem `min_γ ‖r₀ − D γ‖` with `D = [r₀−r₁, …, r_{m−1}−r_m]` and mapping
/// back `α₀ = 1 − γ₀`, `αᵢ = γ_{i−1} − γᵢ`, `α_m = γ_{m−1}`.
pub fn aa_coefficients_with(residuals: &DenseMatrix, rcond: f64) -> Result<AaCoefficients> {
    let (d, cols) = (residuals.rows(), residuals.cols());
    if cols == 0 {
        return Err(Error::InvalidConfig("no residual columns".into()));
    }
    if !residuals.is_finite() {
        return Err(Error::NonFinite("residual matrix"));
    }
    let m = cols - 1;
    if m == 0 {
        return Ok(AaCoefficients { alpha: vec![1.0], residual_norm: norm(residuals.col(0)), rank: 0 });
    }
    let diffs: Vec<Vec<f64>> = (0..m).map(|i| sub(residuals.col(i), residuals.col(i + 1))).collect();
    let dmat = DenseMatrix::from_columns(d, &diffs)?;
    let r0 = residuals.col(0);
    // More differences than rows: keep the first d, the rest are dependent.
    let ls = if m > d {
        let keep: Vec<bool> = (0..m).map(|i| i < d).collect();
        let mut ls = least_squares(&dmat.select_columns(&keep), r0, rcond)?;
        ls.x.resize(m, 0.0);
        ls
    } else {
        least_squares(&dmat, r0, rcond)?
    };
    let g = &ls.x;
    let mut alpha = Vec::with_capacity(cols);
    alpha.push(1.0 - g[0]);
    for i in 1..m {
        alpha.push(g[i - 1] - g[i]);
    }
    alpha.push(g[m - 1]);
    Ok(AaCoefficients { alpha, residual_norm: ls.residual_norm, rank: ls.rank })
}
