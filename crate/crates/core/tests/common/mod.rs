//! Reference computations written independently of the library code paths.
#![allow(dead_code)]

use ndarray::Array2;

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..k {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least squares with intercept: `[β₀, β₁, …]`.
pub fn ols(x: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let (n, p) = x.dim();
    let k = p + 1;
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    let mut row = vec![0.0; k];
    for i in 0..n {
        row[0] = 1.0;
        for j in 0..p {
            row[j + 1] = x[[i, j]];
        }
        for r in 0..k {
            for c in 0..k {
                a[r][c] += row[r] * row[c];
            }
            b[r] += row[r] * y[i];
        }
    }
    solve(a, b)
}

/// Unpenalized logit by Newton–Raphson: `[β₀, β₁, …]`.
pub fn logit_mle(x: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let (n, p) = x.dim();
    let k = p + 1;
    let mut beta = vec![0.0; k];
    for _ in 0..50 {
        let mut h = vec![vec![0.0; k]; k];
        let mut g = vec![0.0; k];
        for i in 0..n {
            let mut row = vec![1.0];
            row.extend(x.row(i).iter());
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let pr = 1.0 / (1.0 + (-eta).exp());
            for r in 0..k {
                g[r] += row[r] * (y[i] - pr);
                for c in 0..k {
                    h[r][c] += pr * (1.0 - pr) * row[r] * row[c];
                }
            }
        }
        let step = solve(h, g);
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-13 {
            break;
        }
    }
    beta
}

/// Sylvester Hadamard matrix of order `2^k`.
pub fn hadamard(k: u32) -> Array2<f64> {
    let n = 1usize << k;
    Array2::from_shape_fn((n, n), |(i, j)| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
}

/// Largest violation of the lasso optimality conditions for
/// `(1/2n)Σr² + (λ/n)Σ|bⱼ|` on columns standardized to mean 0 and
/// population sd 1, given coefficients on the original scale.
pub fn lasso_kkt_violation(x: &Array2<f64>, y: &[f64], intercept: f64, coef: &[f64], lambda: f64) -> f64 {
    let (n, p) = x.dim();
    let nf = n as f64;
    let resid: Vec<f64> = (0..n)
        .map(|i| y[i] - intercept - (0..p).map(|j| x[[i, j]] * coef[j]).sum::<f64>())
        .collect();
    let kappa = lambda / nf;
    let mut worst = (resid.iter().sum::<f64>() / nf).abs();
    for j in 0..p {
        let col = x.column(j);
        let mean = col.sum() / nf;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
        let grad = col.iter().zip(&resid).map(|(v, r)| (v - mean) / sd * r).sum::<f64>() / nf;
        let b_std = coef[j] * sd;
        let v = if b_std == 0.0 { (grad.abs() - kappa).max(0.0) } else { (grad - kappa * b_std.signum()).abs() };
        worst = worst.max(v);
    }
    worst
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm_erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes `erfcc`, |error| < 1.2e-7).
fn libm_erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t * (-z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807 + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}
