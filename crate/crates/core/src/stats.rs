//! Two-sample comparison for arm metrics.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; needs two or more values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Two-sided tail `P(|T| ≥ |t|)` of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() || df.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Student's t CDF.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = student_t_two_sided(t, df) / 2.0;
    if t < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Welch's unequal-variance t-test of `mean(a) − mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("each sample needs at least two values"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test sample"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (sample_variance(a) / a.len() as f64, sample_variance(b) / b.len() as f64);
    let se2 = qa + qb;
    if se2 == 0.0 {
        let (t, p) = if ma == mb { (0.0, 1.0) } else { ((ma - mb).signum() * f64::INFINITY, 0.0) };
        return Ok(TTest {
            t,
            df: (a.len() + b.len() - 2) as f64,
            p,
            mean_a: ma,
            mean_b: mb,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (a.len() as f64 - 1.0) + qb * qb / (b.len() as f64 - 1.0));
    Ok(TTest {
        t,
        df,
        p: student_t_two_sided(t, df),
        mean_a: ma,
        mean_b: mb,
    })
}

/// `(test − control) / control`; `None` when the control is zero.
pub fn relative_delta(control: f64, test: f64) -> Option<f64> {
    (control != 0.0).then(|| (test - control) / control)
}
