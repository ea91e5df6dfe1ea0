//! Central finite differences, the reference every analytic gradient in the
//! crate is checked against.

use crate::numeric::{norm, sub};

/// Default step for central differences in double precision.
pub const FD_STEP: f64 = 1e-5;

/// `∂f/∂θ_i ≈ (f(θ + h e_i) - f(θ - h e_i)) / 2h`.
pub fn central_difference<F>(f: F, theta: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `‖analytic - reference‖ / (1 + ‖reference‖)`.
pub fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    norm(&sub(analytic, reference)) / (1.0 + norm(reference))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_derivative() {
        let g = central_difference(|t| t[0].powi(3) + t[0] * t[1], &[2.0, -1.0], FD_STEP);
        assert!((g[0] - 11.0).abs() < 1e-8);
        assert!((g[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
        assert!((relative_error(&[1e-3], &[0.0]) - 1e-3).abs() < 1e-18);
    }
}
