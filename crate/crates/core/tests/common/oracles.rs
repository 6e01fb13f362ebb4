// Reference computations written without nalgebra or any library code, used
// as ground truth by the integration and acceptance tests.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    (0..rows)
        .map(|_| (0..cols).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn transpose(a: &Mat) -> Mat {
    if a.is_empty() {
        return vec![];
    }
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn matvec(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Gaussian elimination with partial pivoting on `[A | B]`.
pub fn solve_many(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Mat = a.iter().zip(b).map(|(ra, rb)| ra.iter().chain(rb).copied().collect()).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        assert!(p != 0.0, "singular system");
        for row in 0..n {
            if row != col {
                let f = aug[row][col] / p;
                if f != 0.0 {
                    for k in col..n + m {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    (0..n).map(|i| (0..m).map(|k| aug[i][n + k] / aug[i][i]).collect()).collect()
}

pub fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

pub fn inverse(a: &Mat) -> Mat {
    solve_many(a, &identity(a.len()))
}

/// `(XᵀX + λI)` built entry by entry.
pub fn gram_plus(x: &Mat, d: usize, lambda: f64) -> Mat {
    let mut g = vec![vec![0.0; d]; d];
    for row in x {
        for i in 0..d {
            for j in 0..d {
                g[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, r) in g.iter_mut().enumerate() {
        r[i] += lambda;
    }
    g
}

/// Normal-equations ridge solution `(θ, Σ)`.
pub fn ridge(x: &Mat, y: &[f64], d: usize, lambda: f64) -> (Vec<f64>, Mat) {
    let g = gram_plus(x, d, lambda);
    let mut xty = vec![0.0; d];
    for (row, yi) in x.iter().zip(y) {
        for i in 0..d {
            xty[i] += row[i] * yi;
        }
    }
    let theta: Vec<f64> = solve_many(&g, &xty.iter().map(|v| vec![*v]).collect()).into_iter().map(|r| r[0]).collect();
    (theta, inverse(&g))
}

/// GCV score from the explicit n×n hat matrix.
pub fn gcv_score(x: &Mat, y: &[f64], d: usize, lambda: f64) -> f64 {
    let n = x.len();
    let ginv = inverse(&gram_plus(x, d, lambda));
    let h = matmul(&matmul(x, &ginv), &transpose(x));
    let hy = matvec(&h, y);
    let rss: f64 = y.iter().zip(&hy).map(|(a, b)| (a - b).powi(2)).sum();
    let tr: f64 = (0..n).map(|i| 1.0 - h[i][i]).sum();
    (rss / n as f64) / (tr / n as f64).powi(2)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Φ(1/√2): probability that N(0,1) < N(1,1) for independent draws.
pub const PHI_INV_SQRT2: f64 = 0.760_249_938_906_523_3;

/// Welch test on a = [1..5], b = [2..6], reference statistics package.
pub const WELCH_SHIFTED: (f64, f64) = (-1.0, 0.346_593_507_087_334_16);
/// Welch test on unequal sizes and variances.
pub const WELCH_UNEQUAL_A: [f64; 6] = [1.2, 3.4, 2.2, 5.1, 4.4, 0.3];
pub const WELCH_UNEQUAL_B: [f64; 4] = [10.0, 7.5, 8.8, 9.1];
pub const WELCH_UNEQUAL: (f64, f64) = (-6.611_494_364_623_408, 0.000_178_785_480_526_424_6);

/// One MPC instance solved by enumeration: per-entity, per-action,
/// per-metric means; metric kinds (true = abuse); candidate weights;
/// candidate distances; constraints `(metric, bound)`.
pub struct MpcCase {
    pub means: Vec<Vec<Vec<f64>>>,
    pub abuse: Vec<bool>,
    pub weights: Vec<Vec<f64>>,
    pub distances: Vec<f64>,
    pub bounds: Vec<(usize, f64)>,
}

impl MpcCase {
    /// Predicted (abuse, costs) of one weight vector, straight from the
    /// definition: each entity takes its lowest weighted mean, earliest
    /// action on ties; costs are relative to action 0.
    pub fn totals(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let nm = self.abuse.len();
        let mut abuse = 0.0;
        let mut cost = vec![0.0; nm];
        for ent in &self.means {
            let scores: Vec<f64> = ent.iter().map(|m| m.iter().zip(w).map(|(a, b)| a * b).sum()).collect();
            let mut k = 0;
            for (i, s) in scores.iter().enumerate() {
                if *s < scores[k] {
                    k = i;
                }
            }
            for j in 0..nm {
                if self.abuse[j] {
                    abuse += ent[k][j];
                } else {
                    cost[j] += ent[k][j] - ent[0][j];
                }
            }
        }
        (abuse, cost)
    }

    pub fn select(&self) -> usize {
        let totals: Vec<(f64, Vec<f64>)> = self.weights.iter().map(|w| self.totals(w)).collect();
        let feasible: Vec<bool> = totals
            .iter()
            .map(|(_, c)| self.bounds.iter().all(|&(j, b)| c[j] <= b))
            .collect();
        let violation = |c: &Vec<f64>| -> f64 {
            self.bounds
                .iter()
                .map(|&(j, b)| {
                    let ex = (c[j] - b).max(0.0);
                    if ex == 0.0 {
                        0.0
                    } else if b > 0.0 {
                        ex / b
                    } else {
                        ex
                    }
                })
                .sum()
        };
        let any = feasible.iter().any(|f| *f);
        let objective: Vec<f64> = totals
            .iter()
            .zip(&feasible)
            .map(|((a, c), f)| match (any, f) {
                (true, true) => *a,
                (true, false) => f64::INFINITY,
                (false, _) => violation(c),
            })
            .collect();
        let best_obj = objective.iter().copied().fold(f64::INFINITY, f64::min);
        let tied: Vec<usize> = (0..objective.len())
            .filter(|&i| objective[i] == best_obj && (!any || feasible[i]))
            .collect();
        let best_dist = tied.iter().map(|&i| self.distances[i]).fold(f64::INFINITY, f64::min);
        *tied.iter().find(|&&i| self.distances[i] == best_dist).unwrap()
    }
}
