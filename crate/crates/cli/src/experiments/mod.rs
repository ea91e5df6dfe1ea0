//! The five experiment commands.
//!
//! Each command writes its files under the configured output directory:
//! `metrics/*.csv` (one per run, `t,loss,grad_norm,ms`), `models/*.csv`,
//! and `summary.jsonl`. Seeds run on a worker pool; results are gathered
//! and written in seed order, so output never depends on scheduling.

mod converge;
mod gradcheck;
mod rps;
mod saddle;
mod xor_gmm;

use std::fmt;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

pub use converge::{cmd_converge, converge_run, ConvergeRun};
pub use gradcheck::{cmd_gradcheck, gradcheck_sweep, GradcheckStats};
pub use rps::{cmd_rps, rps_runs, RpsRuns};
pub use saddle::{cmd_saddle, duel_family, saddle_outcome, SaddleOutcome};
pub use xor_gmm::{cmd_xor_gmm, xor_gmm_seed, XorGmmSeed};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_summary};

/// A named pass/fail outcome. Required checks turn the exit code to 2.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub required: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, required: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, required, detail }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, self.required) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: Experiment,
    pub summary: Vec<Value>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.required)
    }

    /// Writes `summary.jsonl`: the summary objects followed by the checks.
    pub fn save(&self, out: &Path) -> CliResult<()> {
        let mut lines = self.summary.clone();
        for c in &self.checks {
            let mut v = serde_json::to_value(c).map_err(|e| CliError::Config(e.to_string()))?;
            v["experiment"] = Value::from(self.experiment.name());
            v["kind"] = Value::from("check");
            lines.push(v);
        }
        write_summary(&out.join("summary.jsonl"), &lines)
    }

    pub fn into_result(self) -> CliResult<Self> {
        if self.passed() {
            Ok(self)
        } else {
            let failed: Vec<String> =
                self.checks.iter().filter(|c| c.required && !c.passed).map(|c| c.to_string()).collect();
            Err(CliError::Check(failed.join("; ")))
        }
    }
}

/// Runs the configured experiment and writes its files.
pub fn run(cfg: &ExperimentConfig) -> CliResult<Report> {
    match cfg.experiment {
        Experiment::Rps => cmd_rps(cfg),
        Experiment::XorGmm => cmd_xor_gmm(cfg),
        Experiment::Converge => cmd_converge(cfg),
        Experiment::Gradcheck => cmd_gradcheck(cfg),
        Experiment::Saddle => cmd_saddle(cfg),
    }
}

/// Maps `job` over the seeds on a pool of `cfg.workers` threads and returns
/// the results in seed order.
pub fn per_seed<T, F>(cfg: &ExperimentConfig, job: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> CliResult<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    pool.install(|| cfg.seeds.par_iter().map(|&s| job(s)).collect())
}

/// A seed for an independent sub-task, derived from ChaCha stream `tag`.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    sumlogcone::rng::stream(seed, tag).next_u64()
}

pub(crate) struct OutDirs {
    pub root: PathBuf,
    pub metrics: PathBuf,
    pub models: PathBuf,
}

pub(crate) fn out_dirs(cfg: &ExperimentConfig) -> CliResult<OutDirs> {
    let root = cfg.out.clone();
    let metrics = root.join("metrics");
    let models = root.join("models");
    ensure_dir(&metrics)?;
    ensure_dir(&models)?;
    Ok(OutDirs { root, metrics, models })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, 3.0 * (i as f64).powf(-0.5))).collect();
        assert!((log_log_slope(&pts) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn sub_seeds_differ() {
        assert_ne!(sub_seed(1, 0), sub_seed(1, 1));
        assert_eq!(sub_seed(1, 0), sub_seed(1, 0));
    }
}
