//! Closed-form ridge regression and generalized cross-validation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Posterior of a ridge fit: `sigma = (XᵀX + λI)⁻¹`, `theta = sigma Xᵀ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub theta: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

fn check_inputs(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.ncols() == 0 {
        return Err(Error::invalid("design matrix needs at least one column"));
    }
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows but target has {}",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target vector"));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("ridge penalty must be finite and > 0, got {lambda}")))
    }
}

/// Fits ridge regression through a Cholesky factorization of `XᵀX + λI`.
/// Cost is `O(D²(D + n))`.
pub fn fit_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<RidgeFit> {
    check_inputs(x, y)?;
    check_lambda(lambda)?;
    let d = x.ncols();
    if x.nrows() == 0 {
        return Ok(RidgeFit {
            theta: DVector::zeros(d),
            sigma: DMatrix::identity(d, d) / lambda,
        });
    }
    let mut a = x.tr_mul(x);
    for i in 0..d {
        a[(i, i)] += lambda;
    }
    let xty = x.tr_mul(y);
    fit_from_normal(a, &xty)
}

/// Same as [`fit_ridge`] but from precomputed `XᵀX + λI` and `Xᵀy`.
pub fn fit_from_normal(a: DMatrix<f64>, xty: &DVector<f64>) -> Result<RidgeFit> {
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numerical("XᵀX + λI is not positive definite".into()))?;
    let theta = chol.solve(xty);
    let inv = chol.inverse();
    let sigma = (&inv + inv.transpose()) * 0.5;
    if theta.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("ridge solution is not finite".into()));
    }
    Ok(RidgeFit { theta, sigma })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcvSelection {
    pub lambda: f64,
    /// `(λ, GCV(λ))` in ascending λ order.
    pub scores: Vec<(f64, f64)>,
}

/// Sorted, validated copy of a λ grid.
fn sorted_candidates(candidates: &[f64]) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::Empty("lambda candidates"));
    }
    candidates.iter().try_for_each(|&l| check_lambda(l))?;
    let mut c = candidates.to_vec();
    c.sort_by(f64::total_cmp);
    c.dedup();
    Ok(c)
}

/// Lower median of a λ grid; the choice for cells with no data.
pub fn median_lambda(candidates: &[f64]) -> Result<f64> {
    let c = sorted_candidates(candidates)?;
    Ok(c[(c.len() - 1) / 2])
}

/// Picks λ minimizing
/// `GCV(λ) = (‖(I − H)y‖² / n) / (tr(I − H) / n)²`, `H = X(XᵀX + λI)⁻¹Xᵀ`.
///
/// One eigendecomposition of `XᵀX` serves every candidate. Ties go to the
/// smallest λ; an empty dataset yields the median candidate.
pub fn select_lambda_gcv(x: &DMatrix<f64>, y: &DVector<f64>, candidates: &[f64]) -> Result<GcvSelection> {
    check_inputs(x, y)?;
    let grid = sorted_candidates(candidates)?;
    let n = x.nrows();
    if n == 0 {
        let lambda = grid[(grid.len() - 1) / 2];
        return Ok(GcvSelection {
            lambda,
            scores: grid.iter().map(|&l| (l, f64::NAN)).collect(),
        });
    }
    let eig = SymmetricEigen::new(x.tr_mul(x));
    let z = eig.eigenvectors.tr_mul(&x.tr_mul(y));
    let evals: Vec<f64> = eig.eigenvalues.iter().map(|e| e.max(0.0)).collect();
    let nf = n as f64;

    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let shrunk = DVector::from_iterator(z.len(), z.iter().zip(&evals).map(|(zi, e)| zi / (e + lambda)));
        let theta = &eig.eigenvectors * shrunk;
        let resid = y - x * theta;
        let trace_h: f64 = evals.iter().map(|e| e / (e + lambda)).sum();
        let denom = (1.0 - trace_h / nf).powi(2);
        let score = if denom > 0.0 && denom.is_finite() {
            (resid.norm_squared() / nf) / denom
        } else {
            f64::INFINITY
        };
        scores.push((lambda, score));
    }

    let mut best = 0;
    for (i, &(_, s)) in scores.iter().enumerate().skip(1) {
        if s < scores[best].1 {
            best = i;
        }
    }
    Ok(GcvSelection {
        lambda: scores[best].0,
        scores,
    })
}

/// Log-spaced grid from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..points)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
                .collect()
        }
    }
}
