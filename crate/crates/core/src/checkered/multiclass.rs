//! Multiclass checkoid `Ξ⃗_m(Z) = σ⃗(Z_1) ⊛ … ⊛ σ⃗(Z_m)`, its log-loss,
//! gradient and cross gradient, and the sum-log-concave form of the loss.
//!
//! Class indices `y - l` are always reduced modulo `c`.

use ndarray::{Array2, ArrayView1};

use super::convolution::{circular_convolution_direct, circular_convolution_fft, log_convolve, log_delta};
use super::{BinaryParams, MulticlassParams};
use crate::error::{check_len, Error, Result};
use crate::family::{partial_loss, PartialLoss, SumLogConcaveFamily};
use crate::numeric::{log_softargmax, sigmoid, softargmax, softplus};
use crate::simplex::SimplexLaw;

/// Largest number of mixture components (`c^m`) we agree to enumerate.
pub const ENUMERATION_LIMIT: f64 = (1u64 << 20) as f64;

/// Above this `m·c²` the FFT path is used for the forward pass.
const FFT_THRESHOLD: usize = 4096;

fn check_scores(z: &Array2<f64>) -> Result<(usize, usize)> {
    let (m, c) = z.dim();
    if m == 0 {
        return Err(Error::InvalidArgument("checkoid needs m >= 1 rows".into()));
    }
    if c < 2 {
        return Err(Error::InvalidArgument(format!("multiclass checkoid needs c >= 2, got {c}")));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    Ok((m, c))
}

fn check_class(y: usize, c: usize) -> Result<()> {
    if y < c {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("class {y} outside 0..{c}")))
    }
}

fn rows_softargmax(z: &Array2<f64>) -> Vec<Vec<f64>> {
    z.rows().into_iter().map(|r| softargmax(&r.to_vec())).collect()
}

fn rows_log_softargmax(z: &Array2<f64>) -> Vec<Vec<f64>> {
    z.rows().into_iter().map(|r| log_softargmax(&r.to_vec())).collect()
}

/// The class law `Ξ⃗_m(Z)` for an `m × c` score matrix.
pub fn multiclass_checkoid(z: &Array2<f64>) -> Result<SimplexLaw> {
    let (m, c) = check_scores(z)?;
    let rows = rows_softargmax(z);
    let law = if m * c * c > FFT_THRESHOLD {
        circular_convolution_fft(&rows)?
    } else {
        let mut v = circular_convolution_direct(&rows)?;
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|p| *p /= total);
        v
    };
    Ok(SimplexLaw::from_trusted(law))
}

/// `log Ξ⃗_m(Z)` folded entirely in the log domain.
pub fn log_multiclass_checkoid(z: &Array2<f64>) -> Result<Vec<f64>> {
    let (_, c) = check_scores(z)?;
    Ok(rows_log_softargmax(z).iter().fold(log_delta(c), |acc, row| log_convolve(&acc, row)))
}

/// `-log Ξ_{m,y}(Z)`.
pub fn checkoid_log_loss(z: &Array2<f64>, y: usize) -> Result<f64> {
    let logs = log_multiclass_checkoid(z)?;
    check_class(y, logs.len())?;
    Ok(-logs[y])
}

/// `log Ξ⃗_{m-1}(Z_{-k})` for every `k` via prefix/suffix folds, plus the
/// full `log Ξ⃗_m(Z)`.
fn leave_one_out(log_rows: &[Vec<f64>], c: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = log_rows.len();
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(log_delta(c));
    for row in log_rows {
        let next = log_convolve(prefix.last().unwrap(), row);
        prefix.push(next);
    }
    let mut suffix = vec![log_delta(c); m + 1];
    for k in (0..m).rev() {
        suffix[k] = log_convolve(&log_rows[k], &suffix[k + 1]);
    }
    let without = (0..m).map(|k| log_convolve(&prefix[k], &suffix[k + 1])).collect();
    (without, prefix.pop().unwrap())
}

/// `w_{k,j} = σ_j(Z_k) Ξ_{m-1,y-j}(Z_{-k}) / Ξ_{m,y}(Z)`, the posterior
/// probability that factor `k` sits in class `j` given the total is `y`.
fn responsibilities(z: &Array2<f64>, y: usize) -> Result<Array2<f64>> {
    let (m, c) = check_scores(z)?;
    check_class(y, c)?;
    let log_rows = rows_log_softargmax(z);
    let (without, full) = leave_one_out(&log_rows, c);
    let mut w = Array2::zeros((m, c));
    for k in 0..m {
        for j in 0..c {
            w[[k, j]] = (log_rows[k][j] + without[k][(y + c - j) % c] - full[y]).exp();
        }
    }
    Ok(w)
}

/// `-∇_Z log Ξ_{m,y}(Z)`; row `k`, entry `l` equals
/// `σ_l(Z_k)(1 - Ξ_{m-1,y-l}(Z_{-k}) / Ξ_{m,y}(Z))`.
pub fn cr_gradient(z: &Array2<f64>, y: usize) -> Result<Array2<f64>> {
    cr_cross_gradient(z, z, y)
}

/// Cross gradient of `-log Ξ_{m,y}` at `Z` seen from `Z_ref`:
/// row `k` is `Σ_j w_{k,j}(Z_ref) (σ⃗(Z_k) - e_j) = σ⃗(Z_k) - w_k(Z_ref)`.
pub fn cr_cross_gradient(z: &Array2<f64>, z_ref: &Array2<f64>, y: usize) -> Result<Array2<f64>> {
    check_scores(z)?;
    if z.dim() != z_ref.dim() {
        return Err(Error::InvalidArgument(format!(
            "score shapes differ: {:?} vs {:?}",
            z.dim(),
            z_ref.dim()
        )));
    }
    let w = responsibilities(z_ref, y)?;
    let probs = rows_softargmax(z);
    let mut g = Array2::zeros(z.dim());
    for ((k, l), out) in g.indexed_iter_mut() {
        *out = probs[k][l] - w[[k, l]];
    }
    Ok(g)
}

/// Component tuples `υ ∈ {0..c-1}^m` with `|υ| ≡ y (mod c)`, in
/// lexicographic order of their first `m - 1` entries.
pub fn class_components(m: usize, c: usize, y: usize) -> Result<Vec<Vec<usize>>> {
    if m == 0 || c < 2 {
        return Err(Error::InvalidArgument(format!("need m >= 1 and c >= 2, got m={m}, c={c}")));
    }
    check_class(y, c)?;
    let total = (c as f64).powi(m as i32);
    if total > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit { components: total });
    }
    let count = c.pow(m as u32 - 1);
    Ok((0..count)
        .map(|mut index| {
            let mut upsilon = vec![0; m];
            for slot in (0..m - 1).rev() {
                upsilon[slot] = index % c;
                index /= c;
            }
            let partial: usize = upsilon[..m - 1].iter().sum();
            upsilon[m - 1] = (y + c * m - partial % c) % c;
            upsilon
        })
        .collect())
}

/// Cross gradient of `-log Ξ_{m,y}` under a law on the components of
/// [`class_components`]: row `k` is `σ⃗(Z_k) - Σ_υ μ_υ e_{υ_k}`.
pub fn cr_law_gradient(z: &Array2<f64>, y: usize, law: &SimplexLaw) -> Result<Array2<f64>> {
    let (m, c) = check_scores(z)?;
    let components = class_components(m, c, y)?;
    check_len("component law", components.len(), law.len())?;
    let probs = rows_softargmax(z);
    let mut g = Array2::zeros((m, c));
    for ((k, l), out) in g.indexed_iter_mut() {
        *out = probs[k][l];
    }
    for (upsilon, &mu) in components.iter().zip(law.weights()) {
        for (k, &j) in upsilon.iter().enumerate() {
            g[[k, j]] -= mu;
        }
    }
    Ok(g)
}

/// `p_Ω(· | x) = Ξ⃗_m(Ω_1 x, …, Ω_m x)`.
pub fn multiclass_cr_predict(params: &MulticlassParams, x: &[f64]) -> Result<SimplexLaw> {
    multiclass_checkoid(&params.logits(x)?)
}

/// `-log p_Ω(y | x)`.
pub fn cr_log_loss(params: &MulticlassParams, x: &[f64], y: usize) -> Result<f64> {
    checkoid_log_loss(&params.logits(x)?, y)
}

/// `-log p_Ω(y|x)` as a sum-log-concave family over the flattened `Ω`
/// (row-major `m × c × d`). Term `υ` has loss `Σ_k -log σ_{υ_k}(Ω_k x)`,
/// in the order of [`class_components`].
pub fn cr_as_family(params: &MulticlassParams, x: &[f64], y: usize) -> Result<SumLogConcaveFamily> {
    check_len("feature vector", params.d(), x.len())?;
    let (m, c, d) = (params.m(), params.c(), params.d());
    let components = class_components(m, c, y)?;
    let x = std::sync::Arc::new(x.to_vec());
    let losses = components
        .into_iter()
        .map(|upsilon| multiclass_term(upsilon, std::sync::Arc::clone(&x), c, d))
        .collect();
    SumLogConcaveFamily::new(m * c * d, losses)
}

fn scores_of(theta: &[f64], x: &[f64], k: usize, c: usize, d: usize) -> Vec<f64> {
    (0..c)
        .map(|j| {
            let start = (k * c + j) * d;
            ArrayView1::from(&theta[start..start + d]).dot(&ArrayView1::from(x))
        })
        .collect()
}

fn multiclass_term(
    upsilon: Vec<usize>,
    x: std::sync::Arc<Vec<f64>>,
    c: usize,
    d: usize,
) -> std::sync::Arc<dyn PartialLoss> {
    let (u_v, x_v) = (upsilon.clone(), std::sync::Arc::clone(&x));
    partial_loss(
        move |theta| {
            u_v.iter().enumerate().map(|(k, &j)| -log_softargmax(&scores_of(theta, &x_v, k, c, d))[j]).sum()
        },
        move |theta| {
            let mut g = vec![0.0; theta.len()];
            for (k, &target) in upsilon.iter().enumerate() {
                let p = softargmax(&scores_of(theta, &x, k, c, d));
                for (j, pj) in p.iter().enumerate() {
                    let coef = pj - if j == target { 1.0 } else { 0.0 };
                    let start = (k * c + j) * d;
                    for (gi, xi) in g[start..start + d].iter_mut().zip(x.iter()) {
                        *gi = coef * xi;
                    }
                }
            }
            g
        },
    )
}

/// Binary checkered regression loss `-log p_ω(y|x)` as a family over the
/// flattened `ω` (row-major `m × d`). Terms follow [`class_components`]
/// with `c = 2`: `υ_k = 0` contributes `softplus(-z_k)`, `υ_k = 1`
/// contributes `softplus(z_k)`.
pub fn binary_cr_family(params: &BinaryParams, x: &[f64], y: usize) -> Result<SumLogConcaveFamily> {
    check_len("feature vector", params.d(), x.len())?;
    let (m, d) = (params.m(), params.d());
    let components = class_components(m, 2, y)?;
    let x = std::sync::Arc::new(x.to_vec());
    let losses = components
        .into_iter()
        .map(|upsilon| {
            let (u_v, x_v) = (upsilon.clone(), std::sync::Arc::clone(&x));
            let x_g = std::sync::Arc::clone(&x);
            let logit = move |theta: &[f64], xs: &[f64], k: usize| {
                ArrayView1::from(&theta[k * d..(k + 1) * d]).dot(&ArrayView1::from(xs))
            };
            partial_loss(
                move |theta| {
                    u_v.iter()
                        .enumerate()
                        .map(|(k, &j)| {
                            let z = logit(theta, &x_v, k);
                            if j == 0 {
                                softplus(-z)
                            } else {
                                softplus(z)
                            }
                        })
                        .sum()
                },
                move |theta| {
                    let mut g = vec![0.0; theta.len()];
                    for (k, &j) in upsilon.iter().enumerate() {
                        let z = logit(theta, &x_g, k);
                        let coef = if j == 0 { sigmoid(z) - 1.0 } else { sigmoid(z) };
                        for (gi, xi) in g[k * d..(k + 1) * d].iter_mut().zip(x_g.iter()) {
                            *gi = coef * xi;
                        }
                    }
                    g
                },
            )
        })
        .collect();
    SumLogConcaveFamily::new(m * d, losses)
}

/// `log(e^a + e^b)` for two terms, `-∞` allowed.
fn lse2(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        hi
    } else {
        hi + ((a - hi).exp() + (b - hi).exp()).ln()
    }
}

/// Parity convolution of two log-laws on `{0, 1}`.
fn parity_convolve(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    [lse2(p[0] + q[0], p[1] + q[1]), lse2(p[0] + q[1], p[1] + q[0])]
}

/// `-log p(y | z)` for the binary model, `p(0 | z) = Ξ_m(z)`, and its
/// derivative with respect to each logit `z_k`. Works in the log domain on
/// parity prefix/suffix folds, so it stays finite for any finite `z`.
pub fn binary_logit_loss_grad(z: &[f64], y: usize) -> Result<(f64, Vec<f64>)> {
    if z.is_empty() {
        return Err(Error::Empty("binary model needs m >= 1"));
    }
    check_class(y, 2)?;
    let m = z.len();
    let factors: Vec<[f64; 2]> = z.iter().map(|&v| [-softplus(-v), -softplus(v)]).collect();
    let start = [0.0, f64::NEG_INFINITY];
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(start);
    for f in &factors {
        let next = parity_convolve(*prefix.last().unwrap(), *f);
        prefix.push(next);
    }
    let full = prefix[m][y];
    let mut suffix = start;
    let mut grad = vec![0.0; m];
    for k in (0..m).rev() {
        let without = parity_convolve(prefix[k], suffix);
        // Posterior probability that factor k lands on 0 given total parity y.
        let w0 = (factors[k][0] + without[y] - full).exp();
        grad[k] = sigmoid(z[k]) - w0;
        suffix = parity_convolve(factors[k], suffix);
    }
    Ok((-full, grad))
}

/// `q_k = P_μ(υ_k = 0)` for a law on the `2^{m-1}` components of class `y`.
/// The XGD direction in logit `k` is `σ(z_k) - q_k`.
pub fn binary_law_marginals(m: usize, y: usize, law: &SimplexLaw) -> Result<Vec<f64>> {
    let components = class_components(m, 2, y)?;
    check_len("component law", components.len(), law.len())?;
    let mut q = vec![0.0; m];
    for (upsilon, &mu) in components.iter().zip(law.weights()) {
        for (qk, &u) in q.iter_mut().zip(upsilon) {
            if u == 0 {
                *qk += mu;
            }
        }
    }
    Ok(q)
}

fn chain_binary(dz: &[f64], x: &[f64]) -> Vec<f64> {
    dz.iter().flat_map(|&g| x.iter().map(move |xi| g * xi)).collect()
}

/// Loss and gradient (flattened `m × d`) of the binary model at one example.
pub fn binary_cr_gradient(params: &BinaryParams, x: &[f64], y: usize) -> Result<(f64, Vec<f64>)> {
    let (loss, dz) = binary_logit_loss_grad(&params.logits(x)?, y)?;
    Ok((loss, chain_binary(&dz, x)))
}

/// Loss and XGD direction of the binary model at one example, under a law
/// on the `2^{m-1}` components of class `y`.
pub fn binary_cr_law_gradient(
    params: &BinaryParams,
    x: &[f64],
    y: usize,
    law: &SimplexLaw,
) -> Result<(f64, Vec<f64>)> {
    let z = params.logits(x)?;
    let q = binary_law_marginals(z.len(), y, law)?;
    let (loss, _) = binary_logit_loss_grad(&z, y)?;
    let dz: Vec<f64> = z.iter().zip(&q).map(|(&zk, qk)| sigmoid(zk) - qk).collect();
    Ok((loss, chain_binary(&dz, x)))
}
