//! Sum-log-concave families.
//!
//! A family stores `S` convex partial losses `ℓ_s = -log p_s` on `ℝ^m` and
//! represents the objective `F(θ) = -log Σ_s p_s(θ)`. Everything is computed
//! on the partial losses, never on `p_s`, so large parameters do not
//! underflow the densities.
//!
//! Convexity of each partial loss is a caller contract. It is not checked at
//! construction.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};

use crate::error::{check_len, Error, Result};
use crate::numeric::{axpy, dot, log_softargmax, log_sum_exp_unchecked, softargmax, sub};
use crate::simplex::{kl_to_log_weights, SimplexLaw};

/// One convex partial loss `ℓ_s` with its gradient oracle.
pub trait PartialLoss: Send + Sync {
    fn value(&self, theta: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;
}

struct FnLoss<V, G> {
    value: V,
    gradient: G,
}

impl<V, G> PartialLoss for FnLoss<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn value(&self, theta: &[f64]) -> f64 {
        (self.value)(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        (self.gradient)(theta)
    }
}

/// Wraps a value/gradient closure pair as a partial loss.
pub fn partial_loss<V, G>(value: V, gradient: G) -> Arc<dyn PartialLoss>
where
    V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    Arc::new(FnLoss { value, gradient })
}

struct SumLoss {
    left: Arc<dyn PartialLoss>,
    right: Arc<dyn PartialLoss>,
}

impl PartialLoss for SumLoss {
    fn value(&self, theta: &[f64]) -> f64 {
        self.left.value(theta) + self.right.value(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = self.left.gradient(theta);
        axpy(1.0, &self.right.gradient(theta), &mut g);
        g
    }
}

struct AffineLoss {
    inner: Arc<dyn PartialLoss>,
    matrix: Arc<Array2<f64>>,
    offset: Arc<Vec<f64>>,
}

impl AffineLoss {
    fn map(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.matrix.dot(&ArrayView1::from(z)).to_vec();
        axpy(1.0, &self.offset, &mut out);
        out
    }
}

impl PartialLoss for AffineLoss {
    fn value(&self, z: &[f64]) -> f64 {
        self.inner.value(&self.map(z))
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let g = self.inner.gradient(&self.map(z));
        self.matrix.t().dot(&ArrayView1::from(&g[..])).to_vec()
    }
}

/// `F(θ) = -log Σ_s exp(-ℓ_s(θ))` over `ℝ^dim`.
///
/// Immutable once built; cloning shares the partial losses.
#[derive(Clone)]
pub struct SumLogConcaveFamily {
    dim: usize,
    losses: Vec<Arc<dyn PartialLoss>>,
}

impl fmt::Debug for SumLogConcaveFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SumLogConcaveFamily")
            .field("dim", &self.dim)
            .field("count", &self.losses.len())
            .finish()
    }
}

impl SumLogConcaveFamily {
    pub fn new(dim: usize, losses: Vec<Arc<dyn PartialLoss>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("family dimension must be positive".into()));
        }
        if losses.is_empty() {
            return Err(Error::Empty("family needs at least one partial loss"));
        }
        Ok(Self { dim, losses })
    }

    /// Parameter dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of partial losses `S`.
    pub fn count(&self) -> usize {
        self.losses.len()
    }

    pub fn losses(&self) -> &[Arc<dyn PartialLoss>] {
        &self.losses
    }

    fn check_point(&self, theta: &[f64]) -> Result<()> {
        check_len("family parameter", self.dim, theta.len())
    }

    /// `[ℓ_s(θ)]_s`
    pub fn partial_values(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_point(theta)?;
        Ok(self.losses.iter().map(|l| l.value(theta)).collect())
    }

    /// `F(θ) = -log Σ_s p_s(θ)`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        let neg: Vec<f64> = self.partial_values(theta)?.iter().map(|l| -l).collect();
        Ok(-log_sum_exp_unchecked(&neg))
    }

    /// `log π_s(θ)`, the log of the mixture weights.
    pub fn log_mixture_weights(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let neg: Vec<f64> = self.partial_values(theta)?.iter().map(|l| -l).collect();
        Ok(log_softargmax(&neg))
    }

    /// `π(θ) = [p_s(θ) / Σ_{s'} p_{s'}(θ)]_s`, a softargmax of the negated losses.
    pub fn mixture_weights(&self, theta: &[f64]) -> Result<SimplexLaw> {
        let neg: Vec<f64> = self.partial_values(theta)?.iter().map(|l| -l).collect();
        Ok(SimplexLaw::from_trusted(softargmax(&neg)))
    }

    /// `∇^μ F(θ) = Σ_s μ_s ∇ℓ_s(θ)`.
    pub fn cross_gradient_from_law(&self, theta: &[f64], law: &SimplexLaw) -> Result<Vec<f64>> {
        self.check_point(theta)?;
        check_len("reference law", self.count(), law.len())?;
        let mut out = vec![0.0; self.dim];
        for (loss, &w) in self.losses.iter().zip(law.weights()) {
            if w != 0.0 {
                axpy(w, &loss.gradient(theta), &mut out);
            }
        }
        Ok(out)
    }

    /// Cross gradient at `θ` seen from `η`: the law is `π(η)`.
    pub fn cross_gradient_from_point(&self, theta: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        self.check_point(theta)?;
        let law = self.mixture_weights(eta)?;
        self.cross_gradient_from_law(theta, &law)
    }

    /// The usual gradient, i.e. the cross gradient seen from `θ` itself.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.cross_gradient_from_point(theta, theta)
    }

    /// `F(η) - F(θ) - ∇^μF(θ)ᵀ(η-θ) - KL(μ‖π(θ)) + KL(μ‖π(η))`.
    ///
    /// Nonnegative for every input when the partial losses are convex. The
    /// KL terms use log-domain mixture weights so they stay finite.
    pub fn cross_convexity_gap(&self, theta: &[f64], eta: &[f64], law: &SimplexLaw) -> Result<f64> {
        self.check_point(eta)?;
        let g = self.cross_gradient_from_law(theta, law)?;
        let f_theta = self.evaluate(theta)?;
        let f_eta = self.evaluate(eta)?;
        let kl_theta = kl_to_log_weights(law, &self.log_mixture_weights(theta)?);
        let kl_eta = kl_to_log_weights(law, &self.log_mixture_weights(eta)?);
        Ok(f_eta - f_theta - dot(&g, &sub(eta, theta)) - kl_theta + kl_eta)
    }
}

/// `F_1 + F_2` as a family with `S_1·S_2` terms `ℓ_s + ℓ_r`, indexed
/// `s * S_2 + r` (the outer-product order of [`SimplexLaw::outer`]).
pub fn sum_families(
    first: &SumLogConcaveFamily,
    second: &SumLogConcaveFamily,
) -> Result<SumLogConcaveFamily> {
    check_len("sum_families", first.dim, second.dim)?;
    let mut losses: Vec<Arc<dyn PartialLoss>> = Vec::with_capacity(first.count() * second.count());
    for left in &first.losses {
        for right in &second.losses {
            losses.push(Arc::new(SumLoss { left: Arc::clone(left), right: Arc::clone(right) }));
        }
    }
    SumLogConcaveFamily::new(first.dim, losses)
}

/// `z ↦ F(Az + b)` over `ℝ^p`, with `A` of shape `m × p`.
pub fn affine_reparam(
    family: &SumLogConcaveFamily,
    matrix: &Array2<f64>,
    offset: &[f64],
) -> Result<SumLogConcaveFamily> {
    check_len("affine_reparam rows", family.dim, matrix.nrows())?;
    check_len("affine_reparam offset", family.dim, offset.len())?;
    let matrix = Arc::new(matrix.clone());
    let offset = Arc::new(offset.to_vec());
    let losses = family
        .losses
        .iter()
        .map(|inner| {
            Arc::new(AffineLoss {
                inner: Arc::clone(inner),
                matrix: Arc::clone(&matrix),
                offset: Arc::clone(&offset),
            }) as Arc<dyn PartialLoss>
        })
        .collect();
    SumLogConcaveFamily::new(matrix.ncols(), losses)
}

/// Cross gradient of `F_1 + … + F_K` under `μ^(1) ⊗ … ⊗ μ^(K)`, computed as
/// `Σ_k ∇^{μ^(k)} F_k(θ)` without building the product family.
pub fn tensor_cross_gradient(
    families: &[SumLogConcaveFamily],
    laws: &[SimplexLaw],
    theta: &[f64],
) -> Result<Vec<f64>> {
    if families.is_empty() {
        return Err(Error::Empty("tensor_cross_gradient needs at least one family"));
    }
    check_len("tensor_cross_gradient laws", families.len(), laws.len())?;
    let mut out = vec![0.0; theta.len()];
    for (family, law) in families.iter().zip(laws) {
        axpy(1.0, &family.cross_gradient_from_law(theta, law)?, &mut out);
    }
    Ok(out)
}
