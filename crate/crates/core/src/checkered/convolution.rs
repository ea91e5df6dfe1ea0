//! Circular convolution of probability vectors: direct folding, a
//! log-domain fold, and an FFT path.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{check_len, Error, Result};
use crate::numeric::log_sum_exp_unchecked;

/// `(u ⊛ v)_k = Σ_{i+j ≡ k mod c} u_i v_j`.
pub fn circular_convolution(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.is_empty() {
        return Err(Error::Empty("circular_convolution"));
    }
    check_len("circular_convolution", u.len(), v.len())?;
    Ok(convolve(u, v))
}

pub(crate) fn convolve(u: &[f64], v: &[f64]) -> Vec<f64> {
    let c = u.len();
    let mut out = vec![0.0; c];
    for (i, &ui) in u.iter().enumerate() {
        for (j, &vj) in v.iter().enumerate() {
            out[(i + j) % c] += ui * vj;
        }
    }
    out
}

/// Same as [`convolve`] on log-weights; `-∞` entries are allowed.
pub(crate) fn log_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let c = a.len();
    let mut terms = vec![0.0; c];
    (0..c)
        .map(|k| {
            for (i, t) in terms.iter_mut().enumerate() {
                *t = a[i] + b[(k + c - i) % c];
            }
            log_sum_exp_unchecked(&terms)
        })
        .collect()
}

/// Log of the unit impulse at class 0, the neutral element of ⊛.
pub(crate) fn log_delta(c: usize) -> Vec<f64> {
    let mut d = vec![f64::NEG_INFINITY; c];
    d[0] = 0.0;
    d
}

fn check_vectors(vectors: &[Vec<f64>]) -> Result<usize> {
    let first = vectors.first().ok_or(Error::Empty("convolution of an empty list"))?;
    let c = first.len();
    if c == 0 {
        return Err(Error::Empty("zero-length vector"));
    }
    for v in vectors {
        check_len("circular_convolution", c, v.len())?;
    }
    Ok(c)
}

/// Left fold of [`circular_convolution`] over the list, `O(m c²)`.
pub fn circular_convolution_direct(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_vectors(vectors)?;
    let mut acc = vectors[0].clone();
    for v in &vectors[1..] {
        acc = convolve(&acc, v);
    }
    Ok(acc)
}

/// ⊛ of all vectors through the DFT: transform each, multiply pointwise,
/// invert. Round-off negatives are clamped to zero and the result is
/// renormalized to sum to one, so inputs must be probability vectors.
pub fn circular_convolution_fft(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let c = check_vectors(vectors)?;
    if vectors.len() == 1 {
        return Ok(vectors[0].clone());
    }
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(c);
    let inverse = planner.plan_fft_inverse(c);

    let mut product = vec![Complex::new(1.0, 0.0); c];
    let mut buffer = vec![Complex::new(0.0, 0.0); c];
    for v in vectors {
        for (b, &x) in buffer.iter_mut().zip(v) {
            *b = Complex::new(x, 0.0);
        }
        forward.process(&mut buffer);
        for (p, b) in product.iter_mut().zip(&buffer) {
            *p *= b;
        }
    }
    inverse.process(&mut product);

    let mut out: Vec<f64> = product.iter().map(|z| (z.re / c as f64).max(0.0)).collect();
    let total: f64 = out.iter().sum();
    for o in &mut out {
        *o /= total;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::max_abs_diff;

    #[test]
    fn delta_is_identity() {
        let v = [0.2, 0.5, 0.3];
        assert_eq!(circular_convolution(&[1.0, 0.0, 0.0], &v).unwrap(), v.to_vec());
    }

    #[test]
    fn uniform_absorbs() {
        let u = [0.25; 4];
        let out = circular_convolution(&u, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(max_abs_diff(&out, &u) < 1e-16);
    }

    #[test]
    fn shift_by_index() {
        // δ_1 ⊛ δ_2 = δ_0 for c = 3.
        let out = circular_convolution(&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(out, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(circular_convolution(&[1.0], &[0.5, 0.5]).is_err());
        assert!(circular_convolution_fft(&[]).is_err());
        assert!(circular_convolution_direct(&[vec![1.0], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn fft_single_vector() {
        let v = vec![0.1, 0.9];
        assert_eq!(circular_convolution_fft(std::slice::from_ref(&v)).unwrap(), v);
    }

    #[test]
    fn log_fold_matches_direct() {
        let a = [0.1, 0.6, 0.3];
        let b = [0.5, 0.25, 0.25];
        let direct = convolve(&a, &b);
        let la: Vec<f64> = a.iter().map(|x: &f64| x.ln()).collect();
        let lb: Vec<f64> = b.iter().map(|x: &f64| x.ln()).collect();
        let logged: Vec<f64> = log_convolve(&la, &lb).iter().map(|x| x.exp()).collect();
        assert!(max_abs_diff(&direct, &logged) < 1e-15);
        let with_delta: Vec<f64> = log_convolve(&log_delta(3), &la).iter().map(|x| x.exp()).collect();
        assert!(max_abs_diff(&with_delta, &a) < 1e-15);
    }
}
