//! Cross gradient descent (XGD), plain gradient descent, and the averaged
//! excess-risk bound that XGD satisfies against any point of `E(μ)`.

use crate::error::{check_len, Error, Result};
use crate::family::SumLogConcaveFamily;
use crate::numeric::{axpy, logit, max_abs_diff, norm, sub};
use crate::simplex::SimplexLaw;

/// Learning-rate schedule `γ_t`, `t ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    /// `γ_t = γ`
    Constant(f64),
    /// `γ_t = base / √t`, with `base = D / B` in the usual tuning.
    InverseSqrt(f64),
}

impl Schedule {
    pub fn constant(rate: f64) -> Result<Self> {
        positive("constant learning rate", rate)?;
        Ok(Schedule::Constant(rate))
    }

    pub fn inverse_sqrt(base: f64) -> Result<Self> {
        positive("inverse-sqrt base", base)?;
        Ok(Schedule::InverseSqrt(base))
    }

    pub fn step(&self, t: usize) -> f64 {
        match *self {
            Schedule::Constant(rate) => rate,
            Schedule::InverseSqrt(base) => base / (t.max(1) as f64).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Constant(v) => positive("constant learning rate", v),
            Schedule::InverseSqrt(v) => positive("inverse-sqrt base", v),
        }
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be positive, got {v}")))
    }
}

/// Record of a descent run.
///
/// `values[t] = F(θ_t)` for `t = 0..=T`; `step_sizes[t-1] = γ_t` and
/// `grad_norms[t-1]` is the norm of the direction taken at `θ_{t-1}`.
/// Iterates are kept every `stride` steps; the final one is always kept.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub iterates: Vec<Vec<f64>>,
    pub stride: usize,
    pub step_sizes: Vec<f64>,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub final_iterate: Vec<f64>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.step_sizes.len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.iterates[0]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Keep every `stride`-th iterate.
    pub stride: usize,
    /// Abort once `F(θ_t) > F(θ_0) + divergence_margin`.
    pub divergence_margin: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { stride: 1, divergence_margin: 1e3 }
    }
}

/// Per-step source of the reference law. XGD proper keeps it fixed.
pub trait LawStrategy {
    fn law(&mut self, step: usize, theta: &[f64]) -> Result<SimplexLaw>;
}

#[derive(Clone, Debug)]
pub struct FixedLaw(pub SimplexLaw);

impl LawStrategy for FixedLaw {
    fn law(&mut self, _step: usize, _theta: &[f64]) -> Result<SimplexLaw> {
        Ok(self.0.clone())
    }
}

/// Generic first-order loop `θ_t = θ_{t-1} - γ_t d_t(θ_{t-1})`.
///
/// `direction(t, θ)` supplies the descent direction for step `t` and
/// `value(θ)` the objective recorded in the trajectory.
pub fn descend<D, V>(
    theta0: &[f64],
    schedule: &Schedule,
    steps: usize,
    options: &RunOptions,
    mut direction: D,
    value: V,
) -> Result<Trajectory>
where
    D: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
    V: Fn(&[f64]) -> Result<f64>,
{
    if steps == 0 {
        return Err(Error::InvalidArgument("a run needs at least one step".into()));
    }
    schedule.validate()?;
    let stride = options.stride.max(1);

    let mut theta = theta0.to_vec();
    let f0 = value(&theta)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut values = Vec::with_capacity(steps + 1);
    values.push(f0);
    let mut iterates = vec![theta.clone()];
    let mut step_sizes = Vec::with_capacity(steps);
    let mut grad_norms = Vec::with_capacity(steps);

    for t in 1..=steps {
        let d = direction(t, &theta)?;
        check_len("descent direction", theta.len(), d.len())?;
        let gamma = schedule.step(t);
        axpy(-gamma, &d, &mut theta);
        let f = value(&theta)?;
        if !f.is_finite() || theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { iteration: t });
        }
        if f > f0 + options.divergence_margin {
            return Err(Error::Diverged { iteration: t, value: f, margin: options.divergence_margin });
        }
        step_sizes.push(gamma);
        grad_norms.push(norm(&d));
        values.push(f);
        if t % stride == 0 {
            iterates.push(theta.clone());
        }
    }

    Ok(Trajectory { iterates, stride, step_sizes, values, grad_norms, final_iterate: theta })
}

/// One XGD update `θ - γ ∇^μF(θ)`.
pub fn xgd_step(
    family: &SumLogConcaveFamily,
    theta: &[f64],
    law: &SimplexLaw,
    rate: f64,
) -> Result<Vec<f64>> {
    positive("step size", rate)?;
    let g = family.cross_gradient_from_law(theta, law)?;
    let mut next = theta.to_vec();
    axpy(-rate, &g, &mut next);
    Ok(next)
}

/// XGD with a fixed reference law.
pub fn run_xgd(
    family: &SumLogConcaveFamily,
    theta0: &[f64],
    law: &SimplexLaw,
    schedule: &Schedule,
    steps: usize,
) -> Result<Trajectory> {
    run_xgd_with(family, theta0, &mut FixedLaw(law.clone()), schedule, steps, &RunOptions::default())
}

/// XGD with a caller-provided law strategy and run options.
pub fn run_xgd_with(
    family: &SumLogConcaveFamily,
    theta0: &[f64],
    strategy: &mut dyn LawStrategy,
    schedule: &Schedule,
    steps: usize,
    options: &RunOptions,
) -> Result<Trajectory> {
    check_len("initial point", family.dim(), theta0.len())?;
    descend(
        theta0,
        schedule,
        steps,
        options,
        |t, theta| {
            let law = strategy.law(t, theta)?;
            family.cross_gradient_from_law(theta, &law)
        },
        |theta| family.evaluate(theta),
    )
}

/// Gradient descent: the law is re-read from the current iterate each step.
pub fn run_gd(
    family: &SumLogConcaveFamily,
    theta0: &[f64],
    schedule: &Schedule,
    steps: usize,
) -> Result<Trajectory> {
    check_len("initial point", family.dim(), theta0.len())?;
    descend(
        theta0,
        schedule,
        steps,
        &RunOptions::default(),
        |_, theta| family.gradient(theta),
        |theta| family.evaluate(theta),
    )
}

/// `Σ_t γ_t (F(θ_{t-1}) - F(η)) / Σ_t γ_t` over the whole run.
pub fn averaged_excess(trajectory: &Trajectory, family: &SumLogConcaveFamily, eta: &[f64]) -> Result<f64> {
    let f_eta = family.evaluate(eta)?;
    excess_curve(trajectory, f_eta).last().copied().ok_or(Error::Empty("trajectory has no steps"))
}

/// The averaged excess for every horizon `T = 1..=steps` of the run.
pub fn excess_curve(trajectory: &Trajectory, f_eta: f64) -> Vec<f64> {
    let mut weighted = 0.0;
    let mut total = 0.0;
    trajectory
        .step_sizes
        .iter()
        .zip(&trajectory.values)
        .map(|(&gamma, &f_prev)| {
            weighted += gamma * (f_prev - f_eta);
            total += gamma;
            weighted / total
        })
        .collect()
}

/// `‖θ_0 - η‖² / (2 Σγ_t) + B² Σγ_t² / (2 Σγ_t)`.
pub fn theorem_bound(
    theta0: &[f64],
    eta: &[f64],
    lipschitz: f64,
    schedule: &Schedule,
    steps: usize,
) -> Result<f64> {
    bound_curve(theta0, eta, lipschitz, schedule, steps)?
        .last()
        .copied()
        .ok_or(Error::Empty("bound over zero steps"))
}

/// [`theorem_bound`] for every horizon `T = 1..=steps`.
pub fn bound_curve(
    theta0: &[f64],
    eta: &[f64],
    lipschitz: f64,
    schedule: &Schedule,
    steps: usize,
) -> Result<Vec<f64>> {
    check_len("theorem_bound", theta0.len(), eta.len())?;
    positive("Lipschitz constant", lipschitz)?;
    schedule.validate()?;
    if steps == 0 {
        return Err(Error::InvalidArgument("bound needs T >= 1".into()));
    }
    let dist2 = norm(&sub(theta0, eta)).powi(2);
    let b2 = lipschitz * lipschitz;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    Ok((1..=steps)
        .map(|t| {
            let g = schedule.step(t);
            sum += g;
            sum_sq += g * g;
            dist2 / (2.0 * sum) + b2 * sum_sq / (2.0 * sum)
        })
        .collect())
}

/// Default Lipschitz constant for checkered-regression partial losses over
/// `dim` coordinates: every partial derivative lies in (-1, 1).
pub fn checkered_lipschitz(dim: usize) -> f64 {
    (dim as f64).sqrt()
}

/// A point `η` of `E(μ)` for the planar smooth-XOR family
/// (`ℓ_1 = -log σ(z_1)σ(-z_2)`, `ℓ_2 = -log σ(-z_1)σ(z_2)`):
/// `η_1 - η_2 = logit(μ_1)` and `η_1 + η_2 = 2·anchor`.
pub fn eta_in_e_mu_smooth_xor(mu1: f64, anchor: f64) -> Result<[f64; 2]> {
    if !(mu1 > 0.0 && mu1 < 1.0) {
        return Err(Error::InvalidArgument(format!("mu1 must lie in (0, 1), got {mu1}")));
    }
    let half = 0.5 * logit(mu1);
    Ok([anchor + half, anchor - half])
}

/// Largest deviation `‖∇^η F(θ) - ∇^μ F(θ)‖_∞` over the probe points; zero
/// (up to rounding) when `η ∈ E(μ)`.
pub fn cross_field_deviation(
    family: &SumLogConcaveFamily,
    eta: &[f64],
    law: &SimplexLaw,
    probes: &[Vec<f64>],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for theta in probes {
        let seen = family.cross_gradient_from_point(theta, eta)?;
        let fixed = family.cross_gradient_from_law(theta, law)?;
        worst = worst.max(max_abs_diff(&seen, &fixed));
    }
    Ok(worst)
}
