use std::path::Path;

use serde_json::json;
use sumlogcone::data::{load_csv, oracle_accuracy, sample_checkered_gmm, CheckeredGmmSpec, LabeledDataset};
use sumlogcone::rng::normal_vector;
use sumlogcone::SimplexLaw;

use super::{out_dirs, per_seed, sub_seed, Check, Report};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::{write_metrics, ModelFile};
use crate::train::{accuracy, CheckeredProblem, Fit, Method};

/// Outcome of one seed: best-of-restarts fits and their test accuracies.
pub struct XorGmmSeed {
    pub seed: u64,
    pub gd: Fit,
    pub gd_accuracy: f64,
    pub xgd: Fit,
    pub xgd_accuracy: f64,
    pub zero_init: Fit,
    /// Oracle accuracy on the test set, when the generating mixture is known.
    pub oracle_accuracy: Option<f64>,
    /// Oracle accuracy on fresh samples with its 3σ half-width.
    pub oracle_mc: Option<(f64, f64)>,
    pub shape: (usize, usize, usize),
    pub kind: &'static str,
}

impl XorGmmSeed {
    /// The largest deviation of the zero-init loss from `log c`.
    pub fn zero_init_drift(&self) -> f64 {
        let ln_c = (self.shape.1 as f64).ln();
        self.zero_init.trajectory.values.iter().map(|v| (v - ln_c).abs()).fold(0.0, f64::max)
    }
}

/// The checkered mixture the config describes: `d = m`, base mean `-1`,
/// directions `2 e_k`, uniform prior.
pub fn configured_spec(cfg: &ExperimentConfig) -> CliResult<CheckeredGmmSpec> {
    let (m, c) = (cfg.model.m, cfg.model.c);
    let directions = (0..m)
        .map(|k| {
            let mut v = vec![0.0; m];
            v[k] = 2.0;
            v
        })
        .collect();
    Ok(CheckeredGmmSpec::new(vec![-1.0; m], directions, cfg.data.scale, c, SimplexLaw::uniform(c)?)?)
}

fn component_count(m: usize, c: usize) -> usize {
    c.pow(m as u32 - 1)
}

fn cross_law(cfg: &ExperimentConfig) -> CliResult<SimplexLaw> {
    let count = component_count(cfg.model.m, cfg.model.c);
    match cfg.law()? {
        Some(law) if law.len() == count => Ok(law),
        Some(law) => Err(CliError::Config(format!(
            "model.mu has {} entries; xor-gmm needs one per class component ({count})",
            law.len()
        ))),
        None => Ok(SimplexLaw::uniform(count)?),
    }
}

fn best_of_restarts(
    problem: &CheckeredProblem,
    method: &Method,
    cfg: &ExperimentConfig,
    seed: u64,
    tag: u64,
) -> CliResult<Fit> {
    let schedule = cfg.schedule.build()?;
    let mut best: Option<Fit> = None;
    for r in 0..cfg.model.restarts as u64 {
        let theta0 = normal_vector(seed, tag + r, problem.dim());
        let fit = problem.train(&theta0, method, &schedule, cfg.epochs, cfg.record_timing)?;
        if best.as_ref().is_none_or(|b| fit.final_loss() < b.final_loss()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn read_dataset(path: &Path, classes: usize) -> CliResult<LabeledDataset> {
    load_csv(path, classes).map_err(|e| match e {
        sumlogcone::Error::Io(io) => CliError::io(path, io),
        other => CliError::Config(format!("{}: {other}", path.display())),
    })
}

fn datasets(
    cfg: &ExperimentConfig,
    spec: Option<&CheckeredGmmSpec>,
    seed: u64,
) -> CliResult<(LabeledDataset, LabeledDataset)> {
    let (train, test) = match (&cfg.data.train_path, &cfg.data.test_path, spec) {
        (Some(a), Some(b), _) => (read_dataset(a, cfg.model.c)?, read_dataset(b, cfg.model.c)?),
        (None, None, Some(spec)) => (
            sample_checkered_gmm(spec, cfg.data.n_train, sub_seed(seed, 0))?,
            sample_checkered_gmm(spec, cfg.data.n_test, sub_seed(seed, 1))?,
        ),
        _ => return Err(CliError::Config("set both data.train_path and data.test_path, or neither".into())),
    };
    if train.dim() != test.dim() {
        return Err(CliError::Config("train and test files have different widths".into()));
    }
    Ok((train, test))
}

/// Trains by GD and XGD on one seed's train split and scores the test split.
pub fn xor_gmm_seed(cfg: &ExperimentConfig, seed: u64) -> CliResult<XorGmmSeed> {
    let spec = match cfg.data.train_path {
        None => Some(configured_spec(cfg)?),
        Some(_) => None,
    };
    let (raw_train, raw_test) = datasets(cfg, spec.as_ref(), seed)?;
    let (train, test) = if cfg.model.bias {
        (raw_train.with_bias_column(), raw_test.with_bias_column())
    } else {
        (raw_train, raw_test.clone())
    };
    let problem = CheckeredProblem::new(&train, cfg.model.m);
    let gd = best_of_restarts(&problem, &Method::Gradient, cfg, seed, 10)?;
    let xgd = best_of_restarts(&problem, &Method::Cross(cross_law(cfg)?), cfg, seed, 1000)?;
    let schedule = cfg.schedule.build()?;
    let zero_init =
        problem.train(&vec![0.0; problem.dim()], &Method::Gradient, &schedule, cfg.epochs, false)?;

    let (oracle_accuracy, oracle_mc) = match &spec {
        Some(spec) => {
            let n = cfg.data.oracle_samples;
            let fresh = sample_checkered_gmm(spec, n, sub_seed(seed, 2))?;
            let p = oracle_accuracy(spec, &fresh)?;
            (Some(oracle_accuracy(spec, &raw_test)?), Some((p, 3.0 * (p * (1.0 - p) / n as f64).sqrt())))
        }
        None => (None, None),
    };

    Ok(XorGmmSeed {
        seed,
        gd_accuracy: accuracy(&problem, gd.params(), &test)?,
        xgd_accuracy: accuracy(&problem, xgd.params(), &test)?,
        gd,
        xgd,
        zero_init,
        oracle_accuracy,
        oracle_mc,
        shape: problem.shape(),
        kind: problem.kind(),
    })
}

pub fn cmd_xor_gmm(cfg: &ExperimentConfig) -> CliResult<Report> {
    cross_law(cfg)?;
    let seeds = per_seed(cfg, |seed| xor_gmm_seed(cfg, seed))?;
    let dirs = out_dirs(cfg)?;
    let mut summary = Vec::new();
    let mut checks = Vec::new();
    for s in &seeds {
        let (m, c, d) = s.shape;
        for (name, fit) in [("gd", &s.gd), ("xgd", &s.xgd), ("gd_zero_init", &s.zero_init)] {
            write_metrics(&dirs.metrics.join(format!("{name}_seed{}.csv", s.seed)), &fit.records())?;
        }
        for (name, fit) in [("gd", &s.gd), ("xgd", &s.xgd)] {
            ModelFile::from_flat(s.kind, m, c, d, fit.params())
                .save(&dirs.models.join(format!("{name}_seed{}.csv", s.seed)))?;
        }
        summary.push(json!({
            "experiment": "xor-gmm",
            "seed": s.seed,
            "gd_train_loss": s.gd.final_loss(),
            "gd_test_accuracy": s.gd_accuracy,
            "xgd_train_loss": s.xgd.final_loss(),
            "xgd_test_accuracy": s.xgd_accuracy,
            "zero_init_drift": s.zero_init_drift(),
            "oracle_test_accuracy": s.oracle_accuracy,
            "oracle_mc_accuracy": s.oracle_mc.map(|p| p.0),
            "oracle_mc_band": s.oracle_mc.map(|p| p.1),
        }));

        let drift = s.zero_init_drift();
        checks.push(Check::new(
            &format!("seed{}_zero_init_stuck", s.seed),
            drift <= 1e-9,
            true,
            format!("zero-init GD loss stays within {drift:.3e} of log c"),
        ));
        if let Some(oracle) = s.oracle_accuracy {
            checks.push(Check::new(
                &format!("seed{}_gd_near_oracle", s.seed),
                s.gd_accuracy >= oracle - 0.02,
                true,
                format!(
                    "GD test accuracy {:.4} vs oracle {oracle:.4} (need >= oracle - 0.02)",
                    s.gd_accuracy
                ),
            ));
            checks.push(Check::new(
                &format!("seed{}_xgd_near_oracle", s.seed),
                s.xgd_accuracy >= oracle - 0.02,
                false,
                format!("XGD test accuracy {:.4} vs oracle {oracle:.4}", s.xgd_accuracy),
            ));
        }
        if let Some((p, band)) = s.oracle_mc {
            checks.push(Check::new(
                &format!("seed{}_oracle_mc", s.seed),
                true,
                false,
                format!("oracle accuracy on fresh samples {p:.4} +/- {band:.4} (3 sigma)"),
            ));
        }
    }
    let report = Report { experiment: Experiment::XorGmm, summary, checks };
    report.save(&dirs.root)?;
    Ok(report)
}
