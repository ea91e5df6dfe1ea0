use serde_json::json;
use sumlogcone::data::format_float;
use sumlogcone::models::smooth_xor_plane;
use sumlogcone::rng::normal_vector;
use sumlogcone::xgd::{bound_curve, eta_in_e_mu_smooth_xor, excess_curve};
use sumlogcone::SimplexLaw;

use super::{log_log_slope, out_dirs, per_seed, Check, Report};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::{write_metrics, write_table};
use crate::train::{tracked_descent, Fit};

/// One XGD run on the planar smooth-XOR family with its per-horizon
/// averaged excess and bound.
pub struct ConvergeRun {
    pub seed: u64,
    pub theta0: Vec<f64>,
    pub eta: [f64; 2],
    pub fit: Fit,
    pub excess: Vec<f64>,
    pub bound: Vec<f64>,
}

impl ConvergeRun {
    /// First horizon `T` (1-based) where the excess tops the bound by more
    /// than `slack`.
    pub fn first_violation(&self, slack: f64) -> Option<usize> {
        self.excess.iter().zip(&self.bound).position(|(e, b)| *e > b + slack).map(|i| i + 1)
    }

    /// Log-log slope of the bound over the last decade of horizons.
    pub fn bound_slope(&self) -> Option<f64> {
        let t = self.bound.len();
        if t < 10 {
            return None;
        }
        let pts: Vec<(f64, f64)> = (t / 10..=t).map(|h| (h as f64, self.bound[h - 1])).collect();
        Some(log_log_slope(&pts))
    }
}

pub fn converge_run(cfg: &ExperimentConfig, seed: u64) -> CliResult<ConvergeRun> {
    let law = cfg.law()?.ok_or_else(|| CliError::Config("converge needs model.mu".into()))?;
    let family = smooth_xor_plane();
    let eta = eta_in_e_mu_smooth_xor(law.weights()[0], cfg.converge.anchor)?;
    let theta0 = cfg.converge.theta0.clone().unwrap_or_else(|| normal_vector(seed, 0, 2));
    let schedule = cfg.schedule.build()?;
    let fit = xgd_fit(&family, &law, &theta0, cfg)?;
    let excess = excess_curve(&fit.trajectory, family.evaluate(&eta)?);
    let bound = bound_curve(&theta0, &eta, cfg.converge.lipschitz, &schedule, cfg.epochs)?;
    Ok(ConvergeRun { seed, theta0, eta, fit, excess, bound })
}

fn xgd_fit(
    family: &sumlogcone::SumLogConcaveFamily,
    law: &SimplexLaw,
    theta0: &[f64],
    cfg: &ExperimentConfig,
) -> CliResult<Fit> {
    tracked_descent(
        theta0,
        &cfg.schedule.build()?,
        cfg.epochs,
        cfg.record_timing,
        |_, theta| family.cross_gradient_from_law(theta, law),
        |theta| family.evaluate(theta),
    )
}

pub fn cmd_converge(cfg: &ExperimentConfig) -> CliResult<Report> {
    let runs = per_seed(cfg, |seed| converge_run(cfg, seed))?;
    let dirs = out_dirs(cfg)?;
    let mut summary = Vec::new();
    let mut checks = Vec::new();
    for run in &runs {
        write_metrics(&dirs.metrics.join(format!("xgd_seed{}.csv", run.seed)), &run.fit.records())?;
        write_table(
            &dirs.metrics.join(format!("bound_seed{}.csv", run.seed)),
            &["T", "averaged_excess", "theorem_bound"],
            run.excess
                .iter()
                .zip(&run.bound)
                .enumerate()
                .map(|(i, (e, b))| vec![(i + 1).to_string(), format_float(*e), format_float(*b)]),
        )?;
        let violation = run.first_violation(1e-9);
        let slope = run.bound_slope();
        summary.push(json!({
            "experiment": "converge",
            "seed": run.seed,
            "theta0": run.theta0,
            "eta": run.eta,
            "final_averaged_excess": run.excess.last(),
            "final_bound": run.bound.last(),
            "first_violation": violation,
            "bound_slope_last_decade": slope,
        }));
        checks.push(Check::new(
            &format!("seed{}_excess_below_bound", run.seed),
            violation.is_none(),
            true,
            match violation {
                None => format!("averaged excess <= bound for every T <= {}", run.excess.len()),
                Some(t) => format!(
                    "averaged excess {} exceeds bound {} at T = {t}",
                    run.excess[t - 1],
                    run.bound[t - 1]
                ),
            },
        ));
        if let Some(slope) = slope {
            checks.push(Check::new(
                &format!("seed{}_bound_slope", run.seed),
                true,
                false,
                format!("bound log-log slope over the last decade {slope:.4}"),
            ));
        }
    }
    let report = Report { experiment: Experiment::Converge, summary, checks };
    report.save(&dirs.root)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_start_keeps_only_the_step_term() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Converge);
        let law = [0.5, 0.5];
        cfg.model.mu = Some(law.to_vec());
        cfg.converge.theta0 = Some(eta_in_e_mu_smooth_xor(0.5, 0.3).unwrap().to_vec());
        cfg.converge.anchor = 0.3;
        cfg.epochs = 200;
        let run = converge_run(&cfg, 0).unwrap();
        // With θ0 = η the bound is B²γ/2.
        assert!((run.bound[199] - 2.0 * 0.1 / 2.0).abs() < 1e-12);
        assert_eq!(run.first_violation(1e-9), None);
    }

    #[test]
    fn inverse_sqrt_bound_slope() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Converge);
        cfg.schedule =
            crate::config::ScheduleConfig { kind: crate::config::ScheduleKind::InverseSqrt, rate: 1.0 };
        let slope = converge_run(&cfg, 1).unwrap().bound_slope().unwrap();
        assert!((-0.6..=-0.4).contains(&slope), "slope {slope}");
    }
}
