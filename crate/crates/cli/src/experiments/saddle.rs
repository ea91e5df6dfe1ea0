use serde_json::json;
use sumlogcone::data::rps_dataset;
use sumlogcone::family::sum_families;
use sumlogcone::models::{smooth_xor_family, smooth_xor_plane, SmoothXorParams};
use sumlogcone::numeric::norm;
use sumlogcone::xgd::{run_gd, run_xgd, Schedule, Trajectory};
use sumlogcone::{SimplexLaw, SumLogConcaveFamily};

use super::{out_dirs, Check, Report};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliResult;
use crate::output::{records_from, write_metrics};

/// Norms along a zero-initialized run.
#[derive(Clone, Debug)]
pub struct SaddleOutcome {
    pub trajectory: Trajectory,
    /// `‖θ_t‖` for `t = 0..=T`.
    pub norms: Vec<f64>,
    /// Largest `|F(θ_t) - F(0)|`.
    pub loss_drift: f64,
}

impl SaddleOutcome {
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn final_norm(&self) -> f64 {
        *self.norms.last().expect("at least the initial point")
    }

    /// `‖θ_1 - θ_0‖`.
    pub fn first_step(&self) -> f64 {
        self.norms.get(1).copied().unwrap_or(0.0)
    }

    /// Whether `‖θ_t‖` strictly increases over the first `k` steps.
    pub fn increasing_for(&self, k: usize) -> bool {
        self.norms.iter().take(k + 1).collect::<Vec<_>>().windows(2).all(|w| w[1] > w[0])
    }
}

/// Runs GD (`law = None`) or XGD from `θ = 0`.
pub fn saddle_outcome(
    family: &SumLogConcaveFamily,
    law: Option<&SimplexLaw>,
    schedule: &Schedule,
    steps: usize,
) -> CliResult<SaddleOutcome> {
    let zero = vec![0.0; family.dim()];
    let trajectory = match law {
        None => run_gd(family, &zero, schedule, steps)?,
        Some(law) => run_xgd(family, &zero, law, schedule, steps)?,
    };
    let norms = trajectory.iterates.iter().map(|t| norm(t)).collect();
    let f0 = trajectory.values[0];
    let loss_drift = trajectory.values.iter().map(|v| (v - f0).abs()).fold(0.0, f64::max);
    Ok(SaddleOutcome { trajectory, norms, loss_drift })
}

/// Smooth XOR on the single duel paper vs rock, over `θ ∈ R^6`.
pub fn duel_family() -> SumLogConcaveFamily {
    let data = rps_dataset();
    let x = data.row(0).to_vec();
    smooth_xor_family(&SmoothXorParams::zeros(data.dim()), &x, 1).expect("valid duel")
}

/// The three duels combined into one family, so that one law covers all of
/// them.
fn all_duels_family() -> CliResult<SumLogConcaveFamily> {
    let data = rps_dataset();
    let zeros = SmoothXorParams::zeros(data.dim());
    let mut acc: Option<SumLogConcaveFamily> = None;
    for i in 0..data.len() {
        let f = smooth_xor_family(&zeros, &data.row(i).to_vec(), 1)?;
        acc = Some(match acc {
            None => f,
            Some(a) => sum_families(&a, &f)?,
        });
    }
    Ok(acc.expect("three duels"))
}

pub fn cmd_saddle(cfg: &ExperimentConfig) -> CliResult<Report> {
    let schedule = cfg.schedule.build()?;
    let law = cfg.law()?.expect("validated: saddle has model.mu");
    let uniform = SimplexLaw::uniform(2)?;
    let steps = cfg.epochs;
    let dirs = out_dirs(cfg)?;
    let mut summary = Vec::new();
    let mut checks = Vec::new();

    for (name, family) in [("duel", duel_family()), ("plane", smooth_xor_plane())] {
        let gd = saddle_outcome(&family, None, &schedule, steps)?;
        let xgd = saddle_outcome(&family, Some(&law), &schedule, steps)?;
        let flat = saddle_outcome(&family, Some(&uniform), &schedule, steps)?;
        let zero = vec![0.0; family.dim()];
        let expected_first = schedule.step(1) * norm(&family.cross_gradient_from_law(&zero, &law)?);
        for (method, run) in [("gd", &gd), ("xgd", &xgd), ("xgd_uniform", &flat)] {
            for seed in &cfg.seeds {
                write_metrics(
                    &dirs.metrics.join(format!("{name}_{method}_seed{seed}.csv")),
                    &records_from(&run.trajectory, None),
                )?;
            }
            summary.push(json!({
                "experiment": "saddle",
                "family": name,
                "method": method,
                "max_norm": run.max_norm(),
                "final_norm": run.final_norm(),
                "first_step": run.first_step(),
                "loss_drift": run.loss_drift,
            }));
        }
        let tag = |s: &str| format!("{name}_{s}");
        checks.push(Check::new(
            &tag("gd_stuck"),
            gd.max_norm() <= 1e-12 && gd.loss_drift <= 1e-12,
            true,
            format!("GD max norm {:.3e}, loss drift {:.3e}", gd.max_norm(), gd.loss_drift),
        ));
        checks.push(Check::new(
            &tag("xgd_escapes"),
            xgd.final_norm() >= 0.1,
            true,
            format!("XGD norm after {steps} steps {:.6} (need >= 0.1)", xgd.final_norm()),
        ));
        checks.push(Check::new(
            &tag("xgd_first_step"),
            (xgd.first_step() - expected_first).abs() <= 1e-12 && expected_first > 0.0,
            true,
            format!(
                "first step {:.6e} vs rate times cross-gradient norm {expected_first:.6e}",
                xgd.first_step()
            ),
        ));
        checks.push(Check::new(
            &tag("xgd_norm_increasing"),
            xgd.increasing_for(10.min(steps)),
            false,
            "XGD norm over the first 10 steps".to_string(),
        ));
        checks.push(Check::new(
            &tag("uniform_law_stuck"),
            flat.max_norm() <= 1e-12,
            true,
            format!("uniform-law XGD max norm {:.3e}", flat.max_norm()),
        ));
    }

    // With one law shared by the three duels the drifts cancel at zero.
    let shared = saddle_outcome(&all_duels_family()?, Some(&law.outer(&law).outer(&law)), &schedule, steps)?;
    summary.push(json!({
        "experiment": "saddle",
        "family": "all_duels_shared_law",
        "method": "xgd",
        "final_norm": shared.final_norm(),
    }));

    let report = Report { experiment: Experiment::Saddle, summary, checks };
    report.save(&dirs.root)?;
    Ok(report)
}
