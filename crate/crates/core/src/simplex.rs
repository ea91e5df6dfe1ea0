use crate::error::{check_len, Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// A probability vector in the simplex Δ_S.
///
/// Used both for mixture weights π(θ) and for the reference law μ of XGD.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexLaw {
    weights: Vec<f64>,
}

impl SimplexLaw {
    /// Validates nonnegativity and that the entries sum to one within 1e-12.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("probability vector"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidLaw(format!("entry {w} is negative or non-finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidLaw(format!("entries sum to {total}")));
        }
        Ok(Self { weights })
    }

    /// Divides nonnegative weights by their total.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("probability vector"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidLaw("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidLaw("weights sum to zero".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { weights })
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Empty("probability vector"));
        }
        Ok(Self { weights: vec![1.0 / len as f64; len] })
    }

    pub fn point_mass(len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::InvalidArgument(format!("atom {index} outside a law of size {len}")));
        }
        let mut weights = vec![0.0; len];
        weights[index] = 1.0;
        Ok(Self { weights })
    }

    /// Caller guarantees the invariants (softargmax outputs and the like).
    pub(crate) fn from_trusted(weights: Vec<f64>) -> Self {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Outer product μ ⊗ ν flattened row-major (index `s * ν.len() + r`).
    pub fn outer(&self, other: &SimplexLaw) -> SimplexLaw {
        let weights = self.weights.iter().flat_map(|a| other.weights.iter().map(move |b| a * b)).collect();
        SimplexLaw { weights }
    }

    /// Index of the largest weight; ties go to the smallest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = i;
            }
        }
        best
    }
}

/// `KL(μ ‖ ν) = Σ μ_s log(μ_s / ν_s)` with `0 log(0/x) = 0`.
///
/// Returns `+∞` when some `μ_s > 0` meets `ν_s = 0`.
pub fn kl_divergence(mu: &SimplexLaw, nu: &SimplexLaw) -> Result<f64> {
    check_len("kl_divergence", mu.len(), nu.len())?;
    let mut total = 0.0;
    for (&m, &n) in mu.weights.iter().zip(&nu.weights) {
        if m == 0.0 {
            continue;
        }
        if n == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += m * (m / n).ln();
    }
    Ok(total.max(0.0))
}

/// KL against a law given by its log-weights; never hits the `+∞` branch
/// unless a log-weight is itself `-∞`.
pub(crate) fn kl_to_log_weights(mu: &SimplexLaw, log_nu: &[f64]) -> f64 {
    mu.weights.iter().zip(log_nu).filter(|(m, _)| **m > 0.0).map(|(&m, &ln)| m * (m.ln() - ln)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_laws() {
        assert!(SimplexLaw::new(vec![]).is_err());
        assert!(SimplexLaw::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexLaw::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexLaw::new(vec![0.9, 0.1]).is_ok());
    }

    #[test]
    fn kl_examples() {
        let half = SimplexLaw::uniform(2).unwrap();
        assert_eq!(kl_divergence(&half, &half).unwrap(), 0.0);
        let atom = SimplexLaw::point_mass(2, 0).unwrap();
        assert!((kl_divergence(&atom, &half).unwrap() - 2f64.ln()).abs() < 1e-15);
        let q = SimplexLaw::new(vec![0.25, 0.75]).unwrap();
        let expected = 0.25 * 0.5f64.ln() + 0.75 * 1.5f64.ln();
        assert!((kl_divergence(&q, &half).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.130_812).abs() < 1e-6);
        assert_eq!(kl_divergence(&half, &atom).unwrap(), f64::INFINITY);
        assert!(kl_divergence(&half, &SimplexLaw::uniform(3).unwrap()).is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(SimplexLaw::uniform(4).unwrap().argmax(), 0);
        assert_eq!(SimplexLaw::new(vec![0.2, 0.4, 0.4]).unwrap().argmax(), 1);
    }
}
