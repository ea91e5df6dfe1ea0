//! Experiment configuration.
//!
//! Config files are TOML: a few top-level keys plus `[schedule]`, `[model]`,
//! `[data]`, `[converge]` and `[gradcheck]` sections. Every key is optional
//! and falls back to the experiment's default; unknown keys are rejected.
//!
//! ```toml
//! experiment = "rps"
//! seeds = [0, 1, 2]
//! epochs = 5000
//! workers = 4
//! out = "runs/rps"
//! record_timing = false
//!
//! [schedule]
//! kind = "constant"      # or "inverse-sqrt"
//! rate = 0.01
//!
//! [model]
//! m = 2
//! mu = [0.9, 0.1]        # XGD reference law
//! restarts = 5
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use sumlogcone::numeric::sigmoid;
use sumlogcone::xgd::Schedule;
use sumlogcone::SimplexLaw;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Rps,
    XorGmm,
    Converge,
    Gradcheck,
    Saddle,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Rps,
        Experiment::XorGmm,
        Experiment::Converge,
        Experiment::Gradcheck,
        Experiment::Saddle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Rps => "rps",
            Experiment::XorGmm => "xor-gmm",
            Experiment::Converge => "converge",
            Experiment::Gradcheck => "gradcheck",
            Experiment::Saddle => "saddle",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    InverseSqrt,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub rate: f64,
}

impl ScheduleConfig {
    pub fn build(&self) -> CliResult<Schedule> {
        let s = match self.kind {
            ScheduleKind::Constant => Schedule::constant(self.rate),
            ScheduleKind::InverseSqrt => Schedule::inverse_sqrt(self.rate),
        };
        s.map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub m: usize,
    pub c: usize,
    /// XGD reference law; its meaning depends on the experiment.
    pub mu: Option<Vec<f64>>,
    pub restarts: usize,
    /// Append a constant-1 feature before training.
    pub bias: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub scale: f64,
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub oracle_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergeConfig {
    pub anchor: f64,
    pub theta0: Option<Vec<f64>>,
    pub lipschitz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckConfig {
    pub trials: usize,
    pub max_m: usize,
    pub max_c: usize,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub out: PathBuf,
    pub record_timing: bool,
    pub schedule: ScheduleConfig,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub converge: ConvergeConfig,
    pub gradcheck: GradcheckConfig,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let (seeds, epochs, rate) = match experiment {
            Experiment::Rps => ((0..100).collect(), 5000, 0.01),
            Experiment::XorGmm => (vec![0], 1000, 2.0),
            Experiment::Converge => (vec![0], 10_000, 0.1),
            Experiment::Gradcheck => (vec![0], 1, 0.1),
            Experiment::Saddle => (vec![0], 100, 0.1),
        };
        let mu = match experiment {
            Experiment::Converge => Some(vec![sigmoid(1.0), 1.0 - sigmoid(1.0)]),
            Experiment::Saddle => Some(vec![0.9, 0.1]),
            _ => None,
        };
        Self {
            experiment,
            seeds,
            epochs,
            workers: 0,
            out: PathBuf::from("runs").join(experiment.name()),
            record_timing: false,
            schedule: ScheduleConfig { kind: ScheduleKind::Constant, rate },
            model: ModelConfig { m: 2, c: 2, mu, restarts: 5, bias: false },
            data: DataConfig {
                n_train: 1000,
                n_test: 1000,
                scale: 0.2,
                train_path: None,
                test_path: None,
                oracle_samples: 100_000,
            },
            converge: ConvergeConfig { anchor: 0.0, theta0: None, lipschitz: 2f64.sqrt() },
            gradcheck: GradcheckConfig { trials: 100, max_m: 4, max_c: 5, tolerance: 1e-5 },
        }
    }

    /// Defaults for `experiment`, overridden by the TOML text.
    pub fn from_toml(experiment: Experiment, text: &str) -> CliResult<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = Self::defaults(experiment);
        cfg.apply(file)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(experiment: Experiment, path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(experiment, &text)
    }

    fn apply(&mut self, file: ConfigFile) -> CliResult<()> {
        if let Some(name) = file.experiment {
            let named: Experiment = name.parse()?;
            if named != self.experiment {
                return Err(CliError::Config(format!(
                    "config is for {named}, but the command is {}",
                    self.experiment
                )));
            }
        }
        set(&mut self.seeds, file.seeds);
        set(&mut self.epochs, file.epochs);
        set(&mut self.workers, file.workers);
        set(&mut self.out, file.out);
        set(&mut self.record_timing, file.record_timing);
        if let Some(s) = file.schedule {
            set(&mut self.schedule.kind, s.kind);
            set(&mut self.schedule.rate, s.rate);
        }
        if let Some(m) = file.model {
            set(&mut self.model.m, m.m);
            set(&mut self.model.c, m.c);
            if m.mu.is_some() {
                self.model.mu = m.mu;
            }
            set(&mut self.model.restarts, m.restarts);
            set(&mut self.model.bias, m.bias);
        }
        if let Some(d) = file.data {
            set(&mut self.data.n_train, d.n_train);
            set(&mut self.data.n_test, d.n_test);
            set(&mut self.data.scale, d.scale);
            set(&mut self.data.oracle_samples, d.oracle_samples);
            if d.train_path.is_some() {
                self.data.train_path = d.train_path;
            }
            if d.test_path.is_some() {
                self.data.test_path = d.test_path;
            }
        }
        if let Some(c) = file.converge {
            set(&mut self.converge.anchor, c.anchor);
            set(&mut self.converge.lipschitz, c.lipschitz);
            if c.theta0.is_some() {
                self.converge.theta0 = c.theta0;
            }
        }
        if let Some(g) = file.gradcheck {
            set(&mut self.gradcheck.trials, g.trials);
            set(&mut self.gradcheck.max_m, g.max_m);
            set(&mut self.gradcheck.max_c, g.max_c);
            set(&mut self.gradcheck.tolerance, g.tolerance);
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        self.schedule.build()?;
        if self.model.m == 0 {
            return bad("model.m must be at least 1".into());
        }
        if self.model.c < 2 {
            return bad("model.c must be at least 2".into());
        }
        if self.model.restarts == 0 {
            return bad("model.restarts must be at least 1".into());
        }
        if let Some(mu) = &self.model.mu {
            SimplexLaw::new(mu.clone()).map_err(|e| CliError::Config(format!("model.mu: {e}")))?;
        }
        if self.experiment == Experiment::Converge || self.experiment == Experiment::Saddle {
            match &self.model.mu {
                Some(mu) if mu.len() == 2 => {}
                _ => return bad(format!("{} needs model.mu with two entries", self.experiment)),
            }
        }
        if self.experiment == Experiment::Converge {
            let mu1 = self.model.mu.as_ref().map(|m| m[0]).unwrap_or(0.5);
            if !(mu1 > 0.0 && mu1 < 1.0) {
                return bad("converge needs model.mu in the interior of the simplex".into());
            }
            if let Some(t) = &self.converge.theta0 {
                if t.len() != 2 {
                    return bad("converge.theta0 must have two entries".into());
                }
            }
            if self.converge.lipschitz.is_nan() || self.converge.lipschitz <= 0.0 {
                return bad("converge.lipschitz must be positive".into());
            }
        }
        if !(self.data.scale > 0.0 && self.data.scale.is_finite()) {
            return bad("data.scale must be positive".into());
        }
        if self.data.n_train == 0 || self.data.n_test == 0 {
            return bad("data.n_train and data.n_test must be positive".into());
        }
        if self.gradcheck.trials == 0 || self.gradcheck.max_m == 0 || self.gradcheck.max_c < 2 {
            return bad("gradcheck needs trials >= 1, max_m >= 1, max_c >= 2".into());
        }
        Ok(())
    }

    /// Applies command-line overrides and revalidates.
    pub fn override_with(
        &mut self,
        out: Option<PathBuf>,
        seeds: Option<Vec<u64>>,
        epochs: Option<usize>,
        lr: Option<f64>,
    ) -> CliResult<()> {
        set(&mut self.out, out);
        set(&mut self.seeds, seeds);
        set(&mut self.epochs, epochs);
        set(&mut self.schedule.rate, lr);
        self.validate()
    }

    /// Reference law as a [`SimplexLaw`], if configured.
    pub fn law(&self) -> CliResult<Option<SimplexLaw>> {
        self.model
            .mu
            .as_ref()
            .map(|mu| SimplexLaw::new(mu.clone()).map_err(|e| CliError::Config(e.to_string())))
            .transpose()
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses `a,b,c` seed lists.
pub fn parse_seeds(text: &str) -> CliResult<Vec<u64>> {
    text.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| CliError::Config(format!("bad seed {s:?}"))))
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<String>,
    seeds: Option<Vec<u64>>,
    epochs: Option<usize>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    record_timing: Option<bool>,
    schedule: Option<ScheduleSection>,
    model: Option<ModelSection>,
    data: Option<DataSection>,
    converge: Option<ConvergeSection>,
    gradcheck: Option<GradcheckSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleSection {
    kind: Option<ScheduleKind>,
    rate: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    m: Option<usize>,
    c: Option<usize>,
    mu: Option<Vec<f64>>,
    restarts: Option<usize>,
    bias: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    n_train: Option<usize>,
    n_test: Option<usize>,
    scale: Option<f64>,
    train_path: Option<PathBuf>,
    test_path: Option<PathBuf>,
    oracle_samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvergeSection {
    anchor: Option<f64>,
    theta0: Option<Vec<f64>>,
    lipschitz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GradcheckSection {
    trials: Option<usize>,
    max_m: Option<usize>,
    max_c: Option<usize>,
    tolerance: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for e in Experiment::ALL {
            ExperimentConfig::defaults(e).validate().unwrap();
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }

    #[test]
    fn toml_overrides() {
        let cfg = ExperimentConfig::from_toml(
            Experiment::Saddle,
            "seeds = [3, 4]\n[schedule]\nkind = \"inverse-sqrt\"\nrate = 0.5\n[model]\nmu = [0.25, 0.75]\n",
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.schedule.kind, ScheduleKind::InverseSqrt);
        assert_eq!(cfg.model.mu, Some(vec![0.25, 0.75]));
        assert_eq!(cfg.epochs, 100);
    }

    #[test]
    fn rejects_bad_input() {
        let err = |text: &str| ExperimentConfig::from_toml(Experiment::Rps, text).unwrap_err();
        assert!(matches!(err("colour = 1\n"), CliError::Config(_)));
        assert!(matches!(err("[model]\nwidth = 3\n"), CliError::Config(_)));
        assert!(matches!(err("epochs = 0\n"), CliError::Config(_)));
        assert!(matches!(err("seeds = []\n"), CliError::Config(_)));
        assert!(matches!(err("experiment = \"saddle\"\n"), CliError::Config(_)));
        assert!(matches!(err("[model]\nmu = [0.5, 0.6]\n"), CliError::Config(_)));
        assert!(matches!(err("[schedule]\nrate = -1.0\n"), CliError::Config(_)));
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_seeds("1,x").is_err());
    }
}
