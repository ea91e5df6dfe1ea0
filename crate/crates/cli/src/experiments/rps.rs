use serde_json::json;
use sumlogcone::data::rps_dataset;
use sumlogcone::rng::normal_vector;

use super::{mean, out_dirs, per_seed, Check, Report};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliResult;
use crate::output::{write_metrics, MetricsRecord, ModelFile};
use crate::train::{BradleyTerryProblem, Fit, SmoothXorProblem};

/// One smooth-XOR and one Bradley-Terry run per seed, in seed order.
pub struct RpsRuns {
    pub seeds: Vec<u64>,
    pub smooth_xor: Vec<Fit>,
    pub bradley_terry: Vec<Fit>,
}

impl RpsRuns {
    pub fn mean_final(fits: &[Fit]) -> f64 {
        mean(&fits.iter().map(Fit::final_loss).collect::<Vec<_>>())
    }
}

/// Trains both models from standard-normal initial points on every seed.
pub fn rps_runs(cfg: &ExperimentConfig) -> CliResult<RpsRuns> {
    let data = rps_dataset();
    let xor = SmoothXorProblem::new(&data)?;
    let bt = BradleyTerryProblem::new(&data);
    let schedule = cfg.schedule.build()?;
    let fits = per_seed(cfg, |seed| {
        let theta0 = normal_vector(seed, 0, xor.dim());
        let u0 = normal_vector(seed, 1, data.dim());
        let a = xor.train(&theta0, &schedule, cfg.epochs, cfg.record_timing)?;
        let b = bt.train(&u0, &schedule, cfg.epochs, cfg.record_timing)?;
        Ok((a, b))
    })?;
    let (smooth_xor, bradley_terry) = fits.into_iter().unzip();
    Ok(RpsRuns { seeds: cfg.seeds.clone(), smooth_xor, bradley_terry })
}

/// Per-iteration arithmetic mean of the seed curves.
fn mean_curve(fits: &[Fit]) -> Vec<MetricsRecord> {
    let per_seed: Vec<Vec<MetricsRecord>> = fits.iter().map(Fit::records).collect();
    let n = per_seed.len() as f64;
    (0..per_seed[0].len())
        .map(|i| MetricsRecord {
            t: per_seed[0][i].t,
            loss: per_seed.iter().map(|r| r[i].loss).sum::<f64>() / n,
            grad_norm: per_seed.iter().map(|r| r[i].grad_norm).sum::<f64>() / n,
            ms: per_seed.iter().map(|r| r[i].ms).sum::<f64>() / n,
        })
        .collect()
}

pub fn cmd_rps(cfg: &ExperimentConfig) -> CliResult<Report> {
    let runs = rps_runs(cfg)?;
    let dirs = out_dirs(cfg)?;
    let d = rps_dataset().dim();
    let mut summary = Vec::new();
    for (model, fits) in [("smooth_xor", &runs.smooth_xor), ("bradley_terry", &runs.bradley_terry)] {
        for (seed, fit) in runs.seeds.iter().zip(fits) {
            write_metrics(&dirs.metrics.join(format!("{model}_seed{seed}.csv")), &fit.records())?;
            let file = if model == "smooth_xor" {
                ModelFile::from_flat("smooth-xor", 2, 2, d, fit.params())
            } else {
                ModelFile::from_flat("bradley-terry", 1, 2, d, fit.params())
            };
            file.save(&dirs.models.join(format!("{model}_seed{seed}.csv")))?;
            summary.push(json!({
                "experiment": "rps",
                "model": model,
                "seed": seed,
                "final_loss": fit.final_loss(),
                "final_grad_norm": fit.trajectory.grad_norms.last(),
            }));
        }
        write_metrics(&dirs.metrics.join(format!("{model}_mean.csv")), &mean_curve(fits))?;
        summary.push(json!({
            "experiment": "rps",
            "model": model,
            "seeds": runs.seeds.len(),
            "mean_final_loss": RpsRuns::mean_final(fits),
        }));
    }

    let xor = RpsRuns::mean_final(&runs.smooth_xor);
    let bt = RpsRuns::mean_final(&runs.bradley_terry);
    let ln2 = 2f64.ln();
    let checks = vec![
        Check::new("smooth_xor_fits", xor < 0.05, false, format!("mean final loss {xor:.6} (target < 0.05)")),
        Check::new(
            "bradley_terry_plateau",
            (bt - ln2).abs() <= 0.01,
            false,
            format!("mean final loss {bt:.6} (target log 2 = {ln2:.6} +/- 0.01)"),
        ),
    ];
    let report = Report { experiment: Experiment::Rps, summary, checks };
    report.save(&dirs.root)?;
    Ok(report)
}
