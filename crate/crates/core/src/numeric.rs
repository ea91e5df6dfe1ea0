//! Scalar and vector helpers shared by every module: stable log-sum-exp,
//! softargmax, sigmoid-family functions and small dense linear algebra.

use crate::error::{Error, Result};

/// `log Σ exp(v_i)`, max-shifted so entries up to ±700 never overflow.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Empty("log_sum_exp of an empty vector"));
    }
    Ok(log_sum_exp_unchecked(v))
}

pub(crate) fn log_sum_exp_unchecked(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// SoftArgMax `e^{z_j} / Σ_k e^{z_k}`.
pub fn softargmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for o in &mut out {
        *o /= total;
    }
    out
}

/// Logarithm of [`softargmax`], computed without forming the probabilities.
pub fn log_softargmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp_unchecked(z);
    z.iter().map(|&x| x - lse).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log σ(x) = -softplus(-x)`.
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_examples() {
        assert_eq!(log_sum_exp(&[0.0]).unwrap(), 0.0);
        let a = 3.5;
        assert!((log_sum_exp(&[a, a]).unwrap() - (a + 2f64.ln())).abs() < 1e-15);
        // 1000 + ln 2, evaluated in extended precision offline.
        assert!((log_sum_exp(&[1000.0, 1000.0]).unwrap() - 1_000.693_147_180_559_9).abs() < 1e-12);
        assert!(log_sum_exp(&[]).is_err());
    }

    #[test]
    fn lse_large_negative() {
        let v = log_sum_exp(&[-700.0, -700.0]).unwrap();
        assert!((v - (-700.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn softargmax_is_shift_invariant() {
        let a = softargmax(&[0.3, -1.0, 2.0]);
        let b = softargmax(&[100.3, 99.0, 102.0]);
        assert!(max_abs_diff(&a, &b) < 1e-15);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_tails() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() <= f64::EPSILON);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-12);
        assert!((logit(sigmoid(1.3)) - 1.3).abs() < 1e-12);
    }
}
