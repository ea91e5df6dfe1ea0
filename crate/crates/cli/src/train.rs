//! Training loops shared by the experiments.

use std::cell::RefCell;
use std::time::Instant;

use ndarray::Array2;
use sumlogcone::checkered::{
    binary_cr_label, binary_law_marginals, binary_logit_loss_grad, checkoid_log_loss, cr_gradient,
    cr_law_gradient, multiclass_checkoid, BinaryParams, MulticlassParams,
};
use sumlogcone::data::LabeledDataset;
use sumlogcone::models::{smooth_xor_family, SmoothXorParams};
use sumlogcone::numeric::{axpy, dot, sigmoid, softplus};
use sumlogcone::xgd::{descend, RunOptions, Schedule, Trajectory};
use sumlogcone::{SimplexLaw, SumLogConcaveFamily};

use crate::error::CliResult;
use crate::output::{records_from, MetricsRecord};

/// A finished run with optional wall-clock stamps (`timings[t]` in ms after
/// step `t`, index 0 being the initial evaluation).
#[derive(Clone, Debug)]
pub struct Fit {
    pub trajectory: Trajectory,
    pub timings: Option<Vec<f64>>,
}

impl Fit {
    pub fn final_loss(&self) -> f64 {
        *self.trajectory.values.last().expect("at least one value")
    }

    pub fn params(&self) -> &[f64] {
        &self.trajectory.final_iterate
    }

    pub fn records(&self) -> Vec<MetricsRecord> {
        records_from(&self.trajectory, self.timings.as_deref())
    }
}

/// [`descend`] with iterates thinned to the endpoints, optionally stamping
/// each objective evaluation with the elapsed time.
pub fn tracked_descent<D, V>(
    theta0: &[f64],
    schedule: &Schedule,
    epochs: usize,
    timed: bool,
    direction: D,
    value: V,
) -> CliResult<Fit>
where
    D: FnMut(usize, &[f64]) -> sumlogcone::Result<Vec<f64>>,
    V: Fn(&[f64]) -> sumlogcone::Result<f64>,
{
    let start = Instant::now();
    let stamps = RefCell::new(Vec::with_capacity(if timed { epochs + 1 } else { 0 }));
    let options = RunOptions { stride: epochs, ..RunOptions::default() };
    let trajectory = descend(theta0, schedule, epochs, &options, direction, |theta| {
        let v = value(theta)?;
        if timed {
            stamps.borrow_mut().push(start.elapsed().as_secs_f64() * 1e3);
        }
        Ok(v)
    })?;
    Ok(Fit { trajectory, timings: timed.then(|| stamps.into_inner()) })
}

/// Rows of a dataset as owned vectors.
fn rows(data: &LabeledDataset) -> Vec<Vec<f64>> {
    data.features().rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Smooth XOR on a set of duels: one family per duel, trained on the summed
/// log-loss; the recorded loss is the per-duel mean.
pub struct SmoothXorProblem {
    families: Vec<SumLogConcaveFamily>,
}

impl SmoothXorProblem {
    pub fn new(data: &LabeledDataset) -> CliResult<Self> {
        let zeros = SmoothXorParams::zeros(data.dim());
        let families = rows(data)
            .iter()
            .zip(data.labels())
            .map(|(x, &y)| smooth_xor_family(&zeros, x, if y == 1 { 1 } else { -1 }))
            .collect::<sumlogcone::Result<Vec<_>>>()?;
        Ok(Self { families })
    }

    pub fn families(&self) -> &[SumLogConcaveFamily] {
        &self.families
    }

    pub fn dim(&self) -> usize {
        self.families[0].dim()
    }

    pub fn mean_loss(&self, theta: &[f64]) -> sumlogcone::Result<f64> {
        let mut total = 0.0;
        for f in &self.families {
            total += f.evaluate(theta)?;
        }
        Ok(total / self.families.len() as f64)
    }

    pub fn summed_gradient(&self, theta: &[f64]) -> sumlogcone::Result<Vec<f64>> {
        let mut g = vec![0.0; theta.len()];
        for f in &self.families {
            axpy(1.0, &f.gradient(theta)?, &mut g);
        }
        Ok(g)
    }

    pub fn train(&self, theta0: &[f64], schedule: &Schedule, epochs: usize, timed: bool) -> CliResult<Fit> {
        tracked_descent(
            theta0,
            schedule,
            epochs,
            timed,
            |_, theta| self.summed_gradient(theta),
            |theta| self.mean_loss(theta),
        )
    }
}

/// Bradley-Terry on difference-encoded duels: `p(label 1) = σ(uᵀx)`.
pub struct BradleyTerryProblem {
    rows: Vec<Vec<f64>>,
    signs: Vec<f64>,
}

impl BradleyTerryProblem {
    pub fn new(data: &LabeledDataset) -> Self {
        let signs = data.labels().iter().map(|&y| if y == 1 { 1.0 } else { -1.0 }).collect();
        Self { rows: rows(data), signs }
    }

    pub fn mean_loss(&self, u: &[f64]) -> f64 {
        let total: f64 = self.rows.iter().zip(&self.signs).map(|(x, s)| softplus(-s * dot(u, x))).sum();
        total / self.rows.len() as f64
    }

    pub fn summed_gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; u.len()];
        for (x, s) in self.rows.iter().zip(&self.signs) {
            axpy(-s * sigmoid(-s * dot(u, x)), x, &mut g);
        }
        g
    }

    pub fn train(&self, u0: &[f64], schedule: &Schedule, epochs: usize, timed: bool) -> CliResult<Fit> {
        tracked_descent(
            u0,
            schedule,
            epochs,
            timed,
            |_, u| Ok(self.summed_gradient(u)),
            |u| Ok(self.mean_loss(u)),
        )
    }
}

/// Descent direction for checkered regression.
#[derive(Clone, Debug)]
pub enum Method {
    /// Plain gradient of the mean log-loss.
    Gradient,
    /// XGD with one law over the `c^{m-1}` components of each class.
    Cross(SimplexLaw),
}

/// Checkered regression with `m` factors on a labeled dataset, trained on
/// the mean log-loss. Two classes use the binary parametrization
/// (`m × d`), more use the multiclass one (`m × c × d`).
pub struct CheckeredProblem {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    m: usize,
    c: usize,
    d: usize,
}

impl CheckeredProblem {
    pub fn new(data: &LabeledDataset, m: usize) -> Self {
        Self { rows: rows(data), labels: data.labels().to_vec(), m, c: data.classes(), d: data.dim() }
    }

    pub fn dim(&self) -> usize {
        if self.c == 2 {
            self.m * self.d
        } else {
            self.m * self.c * self.d
        }
    }

    pub fn kind(&self) -> &'static str {
        if self.c == 2 {
            "binary"
        } else {
            "multiclass"
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.m, self.c, self.d)
    }

    fn binary_logits(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        theta.chunks(self.d).map(|w| dot(w, x)).collect()
    }

    fn multiclass_scores(&self, theta: &[f64], x: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn((self.m, self.c), |(k, l)| {
            let start = (k * self.c + l) * self.d;
            dot(&theta[start..start + self.d], x)
        })
    }

    pub fn mean_loss(&self, theta: &[f64]) -> sumlogcone::Result<f64> {
        let mut total = 0.0;
        for (x, &y) in self.rows.iter().zip(&self.labels) {
            total += if self.c == 2 {
                binary_logit_loss_grad(&self.binary_logits(theta, x), y)?.0
            } else {
                checkoid_log_loss(&self.multiclass_scores(theta, x), y)?
            };
        }
        Ok(total / self.rows.len() as f64)
    }

    pub fn direction(&self, theta: &[f64], method: &Method) -> sumlogcone::Result<Vec<f64>> {
        let mut g = vec![0.0; theta.len()];
        let marginals = match (method, self.c) {
            (Method::Cross(law), 2) => {
                Some([binary_law_marginals(self.m, 0, law)?, binary_law_marginals(self.m, 1, law)?])
            }
            _ => None,
        };
        for (x, &y) in self.rows.iter().zip(&self.labels) {
            if self.c == 2 {
                let z = self.binary_logits(theta, x);
                let dz: Vec<f64> = match &marginals {
                    Some(q) => z.iter().zip(&q[y]).map(|(&zk, qk)| sigmoid(zk) - qk).collect(),
                    None => binary_logit_loss_grad(&z, y)?.1,
                };
                for (k, dk) in dz.iter().enumerate() {
                    axpy(*dk, x, &mut g[k * self.d..(k + 1) * self.d]);
                }
            } else {
                let z = self.multiclass_scores(theta, x);
                let dz = match method {
                    Method::Gradient => cr_gradient(&z, y)?,
                    Method::Cross(law) => cr_law_gradient(&z, y, law)?,
                };
                for ((k, l), dk) in dz.indexed_iter() {
                    let start = (k * self.c + l) * self.d;
                    axpy(*dk, x, &mut g[start..start + self.d]);
                }
            }
        }
        let n = self.rows.len() as f64;
        g.iter_mut().for_each(|v| *v /= n);
        Ok(g)
    }

    pub fn predict(&self, theta: &[f64], x: &[f64]) -> sumlogcone::Result<usize> {
        if self.c == 2 {
            binary_cr_label(&BinaryParams::from_flat(self.m, self.d, theta)?, x)
        } else {
            Ok(multiclass_checkoid(&self.multiclass_scores(theta, x))?.argmax())
        }
    }

    /// Multiclass view of the parameters, for saving.
    pub fn multiclass_params(&self, theta: &[f64]) -> sumlogcone::Result<MulticlassParams> {
        if self.c == 2 {
            Ok(MulticlassParams::from_binary(&BinaryParams::from_flat(self.m, self.d, theta)?))
        } else {
            MulticlassParams::from_flat(self.m, self.c, self.d, theta)
        }
    }

    pub fn train(
        &self,
        theta0: &[f64],
        method: &Method,
        schedule: &Schedule,
        epochs: usize,
        timed: bool,
    ) -> CliResult<Fit> {
        tracked_descent(
            theta0,
            schedule,
            epochs,
            timed,
            |_, theta| self.direction(theta, method),
            |theta| self.mean_loss(theta),
        )
    }
}

/// Fraction of rows of `data` the model labels correctly.
pub fn accuracy(problem: &CheckeredProblem, theta: &[f64], data: &LabeledDataset) -> CliResult<f64> {
    let mut hits = 0usize;
    for (i, &y) in data.labels().iter().enumerate() {
        if problem.predict(theta, &data.row(i).to_vec())? == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sumlogcone::data::{rps_dataset, sample_checkered_gmm, CheckeredGmmSpec};
    use sumlogcone::gradcheck::{central_difference, relative_error, FD_STEP};

    #[test]
    fn bradley_terry_gradient() {
        let p = BradleyTerryProblem::new(&rps_dataset());
        let u = [0.3, -0.8, 1.1];
        let fd = central_difference(|v| 3.0 * p.mean_loss(v), &u, FD_STEP);
        assert!(relative_error(&p.summed_gradient(&u), &fd) < 1e-8);
        assert!((p.mean_loss(&[0.0; 3]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn checkered_direction_matches_finite_differences() {
        let spec = CheckeredGmmSpec::xor_gmm();
        let data = sample_checkered_gmm(&spec, 40, 1).unwrap();
        let problem = CheckeredProblem::new(&data, 2);
        let theta = [0.4, -0.3, 0.7, 0.2];
        let g = problem.direction(&theta, &Method::Gradient).unwrap();
        let fd = central_difference(|t| problem.mean_loss(t).unwrap(), &theta, FD_STEP);
        assert!(relative_error(&g, &fd) < 1e-7);

        let three =
            LabeledDataset::new(data.features().clone(), data.labels().iter().map(|y| y * 2).collect(), 3)
                .unwrap();
        let problem = CheckeredProblem::new(&three, 2);
        let theta: Vec<f64> = (0..problem.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let g = problem.direction(&theta, &Method::Gradient).unwrap();
        let fd = central_difference(|t| problem.mean_loss(t).unwrap(), &theta, FD_STEP);
        assert!(relative_error(&g, &fd) < 1e-7);
    }

    #[test]
    fn cross_direction_at_posterior_law() {
        // With m = 1 there is one component per class, so XGD is GD.
        let spec = CheckeredGmmSpec::xor_gmm();
        let data = sample_checkered_gmm(&spec, 20, 2).unwrap();
        let problem = CheckeredProblem::new(&data, 1);
        let theta = [0.5, -1.0];
        let a = problem.direction(&theta, &Method::Gradient).unwrap();
        let b = problem.direction(&theta, &Method::Cross(SimplexLaw::uniform(1).unwrap())).unwrap();
        assert!(relative_error(&a, &b) < 1e-14);
    }

    #[test]
    fn timing_is_optional() {
        let p = BradleyTerryProblem::new(&rps_dataset());
        let s = Schedule::constant(0.1).unwrap();
        let untimed = p.train(&[0.1, 0.2, 0.3], &s, 3, false).unwrap();
        assert!(untimed.timings.is_none());
        assert!(untimed.records().iter().all(|r| r.ms == 0.0));
        let timed = p.train(&[0.1, 0.2, 0.3], &s, 3, true).unwrap();
        assert_eq!(timed.timings.as_ref().unwrap().len(), 4);
        assert_eq!(timed.records().len(), 3);
    }
}
