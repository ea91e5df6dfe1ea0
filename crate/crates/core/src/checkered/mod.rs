//! Checkered regression.
//!
//! The binary model predicts `p(0|x) = Ξ_m(ω_1ᵀx, …, ω_mᵀx)` with the
//! checkoid `Ξ_m(z) = ½(1 + Π_k tanh(z_k/2))`; its decision regions are the
//! tiles cut by the `m` hyperplanes `ω_kᵀx = 0`, colored in a checkerboard
//! pattern. The multiclass model replaces the sigmoids by SoftArgMax rows
//! and combines them by circular convolution (see [`multiclass`]).
//!
//! Parameters carry no bias; append a constant-1 feature to get one.

pub mod convolution;
pub mod multiclass;

use ndarray::{Array2, Array3, ArrayView1};

use crate::error::{check_len, Error, Result};
use crate::numeric::sigmoid;
use crate::rng::{stream, uniform_open};
use crate::simplex::SimplexLaw;

pub use convolution::{circular_convolution, circular_convolution_direct, circular_convolution_fft};
pub use multiclass::{
    binary_cr_family, binary_cr_gradient, binary_cr_law_gradient, binary_law_marginals,
    binary_logit_loss_grad, checkoid_log_loss, class_components, cr_as_family, cr_cross_gradient,
    cr_gradient, cr_law_gradient, cr_log_loss, log_multiclass_checkoid, multiclass_checkoid,
    multiclass_cr_predict, ENUMERATION_LIMIT,
};

/// Points closer than this to a model hyperplane have no defined side.
pub const HYPERPLANE_MARGIN: f64 = 1e-9;

/// Binary parameters `ω = (ω_1, …, ω_m)`, stored as the rows of an `m × d`
/// matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryParams {
    weights: Array2<f64>,
}

impl BinaryParams {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::InvalidArgument("binary parameters need m >= 1 and d >= 1".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        Ok(Self { weights })
    }

    pub fn from_flat(m: usize, d: usize, flat: &[f64]) -> Result<Self> {
        check_len("binary parameter vector", m * d, flat.len())?;
        let weights = Array2::from_shape_vec((m, d), flat.to_vec())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(weights)
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn m(&self) -> usize {
        self.weights.nrows()
    }

    pub fn d(&self) -> usize {
        self.weights.ncols()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.weights.iter().copied().collect()
    }

    /// `z_k = ω_kᵀx`.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("feature vector", self.d(), x.len())?;
        Ok(self.weights.dot(&ArrayView1::from(x)).to_vec())
    }
}

/// Multiclass parameters `Ω = (Ω_1, …, Ω_m)`, each `c × d`.
#[derive(Clone, Debug, PartialEq)]
pub struct MulticlassParams {
    weights: Array3<f64>,
}

impl MulticlassParams {
    pub fn new(weights: Array3<f64>) -> Result<Self> {
        let (m, c, d) = weights.dim();
        if m == 0 || d == 0 || c < 2 {
            return Err(Error::InvalidArgument(format!(
                "multiclass parameters need m >= 1, c >= 2, d >= 1 (got {m}, {c}, {d})"
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        Ok(Self { weights })
    }

    pub fn from_flat(m: usize, c: usize, d: usize, flat: &[f64]) -> Result<Self> {
        check_len("multiclass parameter vector", m * c * d, flat.len())?;
        let weights = Array3::from_shape_vec((m, c, d), flat.to_vec())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(weights)
    }

    /// Embeds a binary model as `Ω_k = [ω_kᵀ; 0]`, so that class 0 of the
    /// two-class model is the binary `p(0|x)`.
    pub fn from_binary(binary: &BinaryParams) -> Self {
        let (m, d) = binary.weights.dim();
        let mut weights = Array3::zeros((m, 2, d));
        for k in 0..m {
            for i in 0..d {
                weights[[k, 0, i]] = binary.weights[[k, i]];
            }
        }
        Self { weights }
    }

    pub fn weights(&self) -> &Array3<f64> {
        &self.weights
    }

    pub fn m(&self) -> usize {
        self.weights.dim().0
    }

    pub fn c(&self) -> usize {
        self.weights.dim().1
    }

    pub fn d(&self) -> usize {
        self.weights.dim().2
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.weights.iter().copied().collect()
    }

    /// The `m × c` matrix with rows `Ω_k x`.
    pub fn logits(&self, x: &[f64]) -> Result<Array2<f64>> {
        check_len("feature vector", self.d(), x.len())?;
        let (m, c, _) = self.weights.dim();
        let xv = ArrayView1::from(x);
        let mut z = Array2::zeros((m, c));
        for k in 0..m {
            for j in 0..c {
                z[[k, j]] = self.weights.slice(ndarray::s![k, j, ..]).dot(&xv);
            }
        }
        Ok(z)
    }
}

/// Either flavor of checkered-regression parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum CheckeredParams {
    Binary(BinaryParams),
    Multiclass(MulticlassParams),
}

impl CheckeredParams {
    pub fn classes(&self) -> usize {
        match self {
            CheckeredParams::Binary(_) => 2,
            CheckeredParams::Multiclass(p) => p.c(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<SimplexLaw> {
        match self {
            CheckeredParams::Binary(p) => {
                let p0 = binary_cr_predict(p, x)?;
                Ok(SimplexLaw::from_trusted(vec![p0, 1.0 - p0]))
            }
            CheckeredParams::Multiclass(p) => multiclass_cr_predict(p, x),
        }
    }
}

/// `Π_k tanh(z_k/2) = 2Ξ_m(z) - 1`; its sign is the predicted side of ½.
pub fn checkoid_centered(z: &[f64]) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::Empty("checkoid needs m >= 1"));
    }
    Ok(z.iter().map(|&zk| (0.5 * zk).tanh()).product())
}

/// `Ξ_m(z) = ½(1 + Π_k tanh(z_k/2))`.
pub fn checkoid(z: &[f64]) -> Result<f64> {
    Ok(0.5 * (1.0 + checkoid_centered(z)?))
}

/// `(Ξ_m(z), Ξ_m(z'))` where `z'` flips the sign of coordinate `k` (0-based).
/// The two values sum to one.
pub fn checkoid_antisym_check(z: &[f64], k: usize) -> Result<(f64, f64)> {
    if k >= z.len() {
        return Err(Error::InvalidArgument(format!("coordinate {k} out of range for m = {}", z.len())));
    }
    let mut flipped = z.to_vec();
    flipped[k] = -flipped[k];
    Ok((checkoid(z)?, checkoid(&flipped)?))
}

/// `p_ω(0 | x) = Ξ_m(ω_1ᵀx, …, ω_mᵀx)`.
pub fn binary_cr_predict(params: &BinaryParams, x: &[f64]) -> Result<f64> {
    checkoid(&params.logits(x)?)
}

/// Predicted class of the binary model; a tie at exactly ½ goes to class 0.
pub fn binary_cr_label(params: &BinaryParams, x: &[f64]) -> Result<usize> {
    Ok(if checkoid_centered(&params.logits(x)?)? >= 0.0 { 0 } else { 1 })
}

/// Checks the Hamming-parity characterization of the decision regions on
/// one pair of points. Returns `(same predicted label, even Hamming distance
/// between sign patterns)`; the two always agree.
pub fn hamming_parity_predicts_same(
    params: &BinaryParams,
    x: &[f64],
    x_prime: &[f64],
) -> Result<(bool, bool)> {
    let z = params.logits(x)?;
    let z_prime = params.logits(x_prime)?;
    for (k, (a, b)) in z.iter().zip(&z_prime).enumerate() {
        if a.abs() <= HYPERPLANE_MARGIN || b.abs() <= HYPERPLANE_MARGIN {
            return Err(Error::OnHyperplane { hyperplane: k });
        }
    }
    let side = checkoid_centered(&z)? > 0.0;
    let side_prime = checkoid_centered(&z_prime)? > 0.0;
    let distance = z.iter().zip(&z_prime).filter(|(a, b)| (**a > 0.0) != (**b > 0.0)).count();
    Ok((side == side_prime, distance % 2 == 0))
}

/// Monte-Carlo estimate of P(even number of failures) over `m` independent
/// coins with success probability `σ(z_k)`; it converges to `Ξ_m(z)`.
pub fn parity_probability_mc(z: &[f64], samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if z.is_empty() {
        return Err(Error::Empty("parity needs m >= 1"));
    }
    let success: Vec<f64> = z.iter().map(|&zk| sigmoid(zk)).collect();
    let mut rng = stream(seed, 0);
    let mut even = 0usize;
    for _ in 0..samples {
        let failures = success.iter().filter(|&&p| uniform_open(&mut rng) > p).count();
        if failures % 2 == 0 {
            even += 1;
        }
    }
    Ok(even as f64 / samples as f64)
}
