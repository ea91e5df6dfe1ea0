//! Smooth XOR classifier, SoftMin regression and the Bradley-Terry model.

use std::sync::Arc;

use crate::checkered::{binary_cr_family, checkoid, BinaryParams};
use crate::error::{check_len, Error, Result};
use crate::family::{partial_loss, SumLogConcaveFamily};
use crate::numeric::{dot, log_sum_exp, sigmoid, softplus};

/// `χ(a, b) = σ(a)σ(-b) + σ(-a)σ(b)`, the probability that exactly one of
/// two independent coins comes up. Equals `1 - Ξ_2(a, b)`.
pub fn smooth_xor(a: f64, b: f64) -> f64 {
    sigmoid(a) * sigmoid(-b) + sigmoid(-a) * sigmoid(b)
}

/// `-log χ(a, b)`, kept accurate when `χ` is tiny.
pub fn smooth_xor_log_loss(a: f64, b: f64) -> f64 {
    let l1 = softplus(-a) + softplus(b);
    let l2 = softplus(a) + softplus(-b);
    -log_sum_exp(&[-l1, -l2]).expect("two finite terms")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothXorParams {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl SmoothXorParams {
    pub fn new(w1: Vec<f64>, w2: Vec<f64>) -> Result<Self> {
        check_len("smooth XOR weights", w1.len(), w2.len())?;
        if w1.is_empty() {
            return Err(Error::Empty("smooth XOR weights"));
        }
        if w1.iter().chain(&w2).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite smooth XOR weight".into()));
        }
        Ok(Self { w1, w2 })
    }

    pub fn zeros(d: usize) -> Self {
        Self { w1: vec![0.0; d], w2: vec![0.0; d] }
    }

    /// `θ = (ω1, ω2)` of length `2d`.
    pub fn from_flat(theta: &[f64]) -> Result<Self> {
        if !theta.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "smooth XOR parameter vector has odd length {}",
                theta.len()
            )));
        }
        let (a, b) = theta.split_at(theta.len() / 2);
        Self::new(a.to_vec(), b.to_vec())
    }

    pub fn d(&self) -> usize {
        self.w1.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.w1.iter().chain(&self.w2).copied().collect()
    }

    /// P(label +1 | x) = χ(ω1ᵀx, ω2ᵀx).
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_len("feature vector", self.d(), x.len())?;
        Ok(smooth_xor(dot(&self.w1, x), dot(&self.w2, x)))
    }

    /// The same model as binary checkered regression with `m = 2`: label
    /// `+1` is class 1, label `-1` is class 0.
    pub fn as_checkered(&self) -> BinaryParams {
        BinaryParams::from_flat(2, self.d(), &self.flatten()).expect("consistent shape")
    }
}

fn label_class(label: i8) -> Result<usize> {
    match label {
        1 => Ok(1),
        -1 => Ok(0),
        other => Err(Error::InvalidArgument(format!("label must be +1 or -1, got {other}"))),
    }
}

/// Log-loss of predicting `label` (±1) at `x`, as a two-term family over
/// `θ = (ω1, ω2)`. For label `+1` the terms are
/// `softplus(-ω1ᵀx) + softplus(ω2ᵀx)` and `softplus(ω1ᵀx) + softplus(-ω2ᵀx)`.
pub fn smooth_xor_family(params: &SmoothXorParams, x: &[f64], label: i8) -> Result<SumLogConcaveFamily> {
    binary_cr_family(&params.as_checkered(), x, label_class(label)?)
}

/// The smooth XOR family with `d = 1`, `x = 1`, label `+1`: a two-term
/// family on the plane with `F(θ) = -log χ(θ1, θ2)`.
pub fn smooth_xor_plane() -> SumLogConcaveFamily {
    smooth_xor_family(&SmoothXorParams::zeros(1), &[1.0], 1).expect("valid planar family")
}

/// One SoftMin branch: pairs `(y_k, w_k)` with loss `½ Σ_k (y_k - xᵀw_k)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMinBranch {
    pub targets: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

/// SoftMin regression `F(x) = -log Σ_s exp(-½ Σ_k (y_{s,k} - xᵀw_{s,k})²)`.
/// The optimization variable is `x ∈ R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMinSpec {
    branches: Vec<SoftMinBranch>,
    d: usize,
}

impl SoftMinSpec {
    pub fn new(branches: Vec<SoftMinBranch>) -> Result<Self> {
        let first = branches.first().ok_or(Error::Empty("SoftMin needs S >= 1"))?;
        let d = first.weights.first().ok_or(Error::Empty("SoftMin branch needs K >= 1"))?.len();
        for b in &branches {
            if b.weights.is_empty() {
                return Err(Error::Empty("SoftMin branch needs K >= 1"));
            }
            check_len("SoftMin branch targets", b.weights.len(), b.targets.len())?;
            for w in &b.weights {
                check_len("SoftMin weight", d, w.len())?;
            }
        }
        Ok(Self { branches, d })
    }

    pub fn branches(&self) -> &[SoftMinBranch] {
        &self.branches
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

fn branch_loss(branch: &SoftMinBranch, x: &[f64]) -> f64 {
    branch.targets.iter().zip(&branch.weights).map(|(y, w)| 0.5 * (y - dot(x, w)).powi(2)).sum()
}

fn branch_gradient(branch: &SoftMinBranch, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for (y, w) in branch.targets.iter().zip(&branch.weights) {
        let r = dot(x, w) - y;
        for (gi, wi) in g.iter_mut().zip(w) {
            *gi += r * wi;
        }
    }
    g
}

/// Value of the SoftMin loss; lies in `[min_s ℓ_s - log S, min_s ℓ_s]`.
pub fn softmin_loss(spec: &SoftMinSpec, x: &[f64]) -> Result<f64> {
    check_len("SoftMin point", spec.d, x.len())?;
    let neg: Vec<f64> = spec.branches.iter().map(|b| -branch_loss(b, x)).collect();
    Ok(-log_sum_exp(&neg)?)
}

/// SoftMin as a family with one quadratic term per branch.
pub fn softmin_family(spec: &SoftMinSpec) -> Result<SumLogConcaveFamily> {
    let losses = spec
        .branches
        .iter()
        .map(|b| {
            let (bv, bg) = (Arc::new(b.clone()), Arc::new(b.clone()));
            partial_loss(move |x| branch_loss(&bv, x), move |x| branch_gradient(&bg, x))
        })
        .collect();
    SumLogConcaveFamily::new(spec.d, losses)
}

/// One utility per item; `p(i beats j) = σ(u_i - u_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BradleyTerryParams {
    pub utilities: Vec<f64>,
}

impl BradleyTerryParams {
    pub fn new(utilities: Vec<f64>) -> Result<Self> {
        if utilities.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidArgument("non-finite utility".into()));
        }
        Ok(Self { utilities })
    }

    /// Score of a difference-encoded duel `x = e_i - e_j`, i.e. `u_i - u_j`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_len("duel encoding", self.utilities.len(), x.len())?;
        Ok(dot(&self.utilities, x))
    }
}

pub fn bradley_terry_prob(params: &BradleyTerryParams, i: usize, j: usize) -> Result<f64> {
    let n = params.utilities.len();
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidArgument(format!("invalid duel ({i}, {j}) over {n} items")));
    }
    Ok(sigmoid(params.utilities[i] - params.utilities[j]))
}

/// `Ξ_2(a, b)`; the complement of [`smooth_xor`].
pub fn smooth_xnor(a: f64, b: f64) -> f64 {
    checkoid(&[a, b]).expect("two coordinates")
}
