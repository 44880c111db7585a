//! Independent reference implementations used to check the library.
//!
//! Nothing here calls into the code under test for the quantity it checks.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

/// Dense instance: feature values by column.
pub type Dense = Vec<f64>;

fn softplus(z: f64) -> f64 {
    // ln(1 + e^z)
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// ½‖θ‖² + Σ cᵢ ln(1 + exp(−yᵢ θ·x̃ᵢ)), θ = (w, b) and x̃ = (x, 1) when a
/// bias is used.
pub fn reference_objective(x: &[Dense], y: &[f64], costs: &[f64], theta: &[f64], with_bias: bool) -> f64 {
    let mut total = 0.5 * theta.iter().map(|t| t * t).sum::<f64>();
    for i in 0..x.len() {
        let mut z = 0.0;
        for j in 0..x[i].len() {
            z += theta[j] * x[i][j];
        }
        if with_bias {
            z += theta[x[i].len()];
        }
        total += costs[i] * softplus(-y[i] * z);
    }
    total
}

/// Damped Newton's method on the augmented dense problem. Returns θ.
pub fn newton_minimize(x: &[Dense], y: &[f64], costs: &[f64], n: usize, with_bias: bool) -> Vec<f64> {
    let dim = if with_bias { n + 1 } else { n };
    let aug = |i: usize| -> Vec<f64> {
        let mut v = x[i].clone();
        if with_bias {
            v.push(1.0);
        }
        v
    };
    let rows: Vec<Vec<f64>> = (0..x.len()).map(aug).collect();
    let mut theta = vec![0.0; dim];
    for _ in 0..200 {
        let mut grad = theta.clone();
        let mut hess = vec![vec![0.0; dim]; dim];
        for d in 0..dim {
            hess[d][d] = 1.0;
        }
        for (i, r) in rows.iter().enumerate() {
            let z: f64 = r.iter().zip(&theta).map(|(a, b)| a * b).sum();
            let p = logistic(-y[i] * z);
            for a in 0..dim {
                grad[a] -= costs[i] * y[i] * p * r[a];
                for b in 0..dim {
                    hess[a][b] += costs[i] * p * (1.0 - p) * r[a] * r[b];
                }
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-13 {
            break;
        }
        let step = solve(hess, grad.clone());
        let f0 = reference_objective(x, y, costs, &theta, with_bias);
        let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            if reference_objective(x, y, costs, &cand, with_bias) <= f0 - 1e-4 * t * slope || t < 1e-12 {
                theta = cand;
                break;
            }
            t *= 0.5;
        }
    }
    theta
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut out = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * out[k];
        }
        out[row] = s / a[row][row];
    }
    out
}

/// Sublinear TF-IDF evaluated directly.
pub fn scalar_tfidf(tf: f64, df: f64, n: f64) -> f64 {
    let tf_part = 1.0 + tf.ln();
    let idf = (n / df).ln();
    tf_part * idf
}

/// Okapi BM25 evaluated directly, with the dl/avg_dl length factor.
pub fn scalar_bm25(tf: f64, df: f64, n: f64, dl: f64, avg_dl: f64, k1: f64, b: f64) -> f64 {
    let denom = tf + k1 * (1.0 - b + b * (dl / avg_dl));
    let idf = ((n - df + 0.5) / (df + 0.5)).ln();
    (tf / denom) * idf
}

/// Per-class precision/recall/F1 from raw label lists, averaged unweighted.
pub fn brute_force_macro_f1(gold: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    let mut f1s = Vec::new();
    for c in 0..n_classes {
        let tp = gold.iter().zip(pred).filter(|(g, p)| **g == c && **p == c).count() as f64;
        let predicted = pred.iter().filter(|p| **p == c).count() as f64;
        let actual = gold.iter().filter(|g| **g == c).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1s.push(f1);
    }
    let mut sum = 0.0;
    for f in &f1s {
        sum += f;
    }
    sum / n_classes as f64
}

/// Team score divided by the best score of its problem, averaged per team
/// over the listed problems.
pub fn brute_force_transformed_mean(rows: &[(&str, &str, f64)], problems: &[&str]) -> BTreeMap<String, f64> {
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for &(_, p, s) in rows {
        let e = best.entry(p).or_insert(0.0);
        if s > *e {
            *e = s;
        }
    }
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for &(t, p, s) in rows {
        if problems.contains(&p) {
            let e = acc.entry(t.to_string()).or_insert((0.0, 0));
            e.0 += s / best[p];
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(t, (s, n))| (t, s / n as f64)).collect()
}
