//! Scalar-generic numeric kernels shared across the crate.
//!
//! Everything here is generic over [`num_traits::Float`] so the low-level
//! machinery works for `f32` and `f64` alike; the rest of the crate uses the
//! [`crate::Real`] alias (`f64`).

use num_traits::Float;

/// Stable log(sum(exp(x_k))). Returns -inf for an empty slice or when every
/// entry is -inf.
pub fn log_sum_exp<F: Float>(xs: &[F]) -> F {
    let mut m = F::neg_infinity();
    for &x in xs {
        if x > m {
            m = x;
        }
    }
    if m == F::neg_infinity() {
        return F::neg_infinity();
    }
    let mut acc = F::zero();
    for &x in xs {
        acc = acc + (x - m).exp();
    }
    m + acc.ln()
}

/// log(mean(exp(x_k))).
pub fn log_mean_exp<F: Float>(xs: &[F]) -> F {
    log_sum_exp(xs) - F::from(xs.len()).unwrap().ln()
}

/// Normalize log-weights in place so that sum(exp(w)) = 1.
/// Returns the log normalizing constant, or `None` if all weights are -inf.
pub fn normalize_log_weights<F: Float>(log_w: &mut [F]) -> Option<F> {
    let z = log_sum_exp(log_w);
    if !z.is_finite() {
        return None;
    }
    for w in log_w.iter_mut() {
        *w = *w - z;
    }
    Some(z)
}

/// Normalized effective sample size (sum w)^2 / (S * sum w^2) for normalized
/// log-weights; lies in (0, 1], equal to 1 iff the weights are uniform.
pub fn normalized_ess<F: Float>(log_w: &[F]) -> F {
    let s = F::from(log_w.len()).unwrap();
    let mut sum = F::zero();
    let mut sum_sq = F::zero();
    for &lw in log_w {
        let w = lw.exp();
        sum = sum + w;
        sum_sq = sum_sq + w * w;
    }
    (sum * sum) / (s * sum_sq)
}

/// Trapezoid quadrature weights for an arbitrary strictly increasing grid.
pub fn trapezoid_weights<F: Float>(grid: &[F]) -> Vec<F> {
    let n = grid.len();
    assert!(n >= 2, "trapezoid rule needs at least two points");
    let half = F::from(0.5).unwrap();
    let mut w = vec![F::zero(); n];
    for k in 0..n - 1 {
        let h = half * (grid[k + 1] - grid[k]);
        w[k] = w[k] + h;
        w[k + 1] = w[k + 1] + h;
    }
    w
}

/// Sample mean.
pub fn mean<F: Float>(xs: &[F]) -> F {
    let n = F::from(xs.len()).unwrap();
    xs.iter().fold(F::zero(), |a, &x| a + x) / n
}

/// Unbiased sample variance (n - 1 divisor).
pub fn sample_variance<F: Float>(xs: &[F]) -> F {
    let n = xs.len();
    assert!(n >= 2, "sample variance needs n >= 2");
    let m = mean(xs);
    let ss = xs.iter().fold(F::zero(), |a, &x| a + (x - m) * (x - m));
    ss / F::from(n - 1).unwrap()
}

/// Weighted mean with normalized weights.
pub fn weighted_mean<F: Float>(xs: &[F], w: &[F]) -> F {
    xs.iter().zip(w).fold(F::zero(), |a, (&x, &wi)| a + wi * x)
}

/// Weighted variance about the weighted mean (normalized weights).
pub fn weighted_variance<F: Float>(xs: &[F], w: &[F]) -> F {
    let m = weighted_mean(xs, w);
    xs.iter()
        .zip(w)
        .fold(F::zero(), |a, (&x, &wi)| a + wi * (x - m) * (x - m))
}

/// Cholesky factor L (row-major lower triangular, p x p) of a symmetric
/// positive definite matrix, or `None` when the matrix is not SPD.
pub fn cholesky<F: Float>(matrix: &[F], p: usize) -> Option<Vec<F>> {
    assert_eq!(matrix.len(), p * p);
    let mut l = vec![F::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = matrix[i * p + j];
            for k in 0..j {
                sum = sum - l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if sum <= F::zero() {
                    return None;
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    Some(l)
}

/// Equally spaced grid of `n` points on [lo, hi], endpoints included.
pub fn linspace<F: Float>(lo: F, hi: F, n: usize) -> Vec<F> {
    assert!(n >= 2);
    let step = (hi - lo) / F::from(n - 1).unwrap();
    (0..n).map(|k| lo + step * F::from(k).unwrap()).collect()
}
