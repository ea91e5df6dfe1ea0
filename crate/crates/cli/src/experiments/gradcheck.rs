use ndarray::Array2;
use rand::Rng;
use serde_json::json;
use sumlogcone::checkered::{cr_as_family, cr_cross_gradient, cr_gradient, cr_log_loss, MulticlassParams};
use sumlogcone::data::format_float;
use sumlogcone::gradcheck::{central_difference, relative_error, FD_STEP};
use sumlogcone::numeric::{max_abs_diff, softargmax};
use sumlogcone::rng::{stream, BoxMuller};

use super::{out_dirs, per_seed, Check, Report};
use crate::config::{Experiment, ExperimentConfig, GradcheckConfig};
use crate::error::CliResult;
use crate::output::write_table;

/// Errors measured on one random instance.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial: usize,
    pub m: usize,
    pub c: usize,
    pub d: usize,
    /// Analytic parameter gradient against central differences.
    pub rel_err: f64,
    /// `cr_cross_gradient(Z, Z)` against `cr_gradient(Z)`.
    pub self_err: f64,
    /// Largest `|∂ℓ/∂z|`; must stay below 1.
    pub max_entry: f64,
    /// Enumerated family against the convolution loss and gradient.
    pub family_err: f64,
    /// `m = 1` gradient against softargmax minus one-hot.
    pub reduction_err: f64,
}

#[derive(Clone, Debug)]
pub struct GradcheckStats {
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
}

impl GradcheckStats {
    fn worst(&self, f: impl Fn(&TrialRecord) -> f64) -> f64 {
        self.trials.iter().map(f).fold(0.0, f64::max)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.worst(|t| t.rel_err)
    }

    pub fn max_self_err(&self) -> f64 {
        self.worst(|t| t.self_err)
    }

    pub fn max_entry(&self) -> f64 {
        self.worst(|t| t.max_entry)
    }

    pub fn max_family_err(&self) -> f64 {
        self.worst(|t| t.family_err)
    }

    pub fn max_reduction_err(&self) -> f64 {
        self.worst(|t| t.reduction_err)
    }
}

/// `∂ℓ/∂W[k,l,:] = (∂ℓ/∂z_{kl}) x`, flattened like the parameters.
fn chain(dz: &Array2<f64>, x: &[f64]) -> Vec<f64> {
    dz.iter().flat_map(|&g| x.iter().map(move |&xi| g * xi)).collect()
}

fn trial(seed: u64, index: usize, cfg: &GradcheckConfig) -> sumlogcone::Result<TrialRecord> {
    let mut rng = stream(seed, index as u64);
    let mut normal = BoxMuller::new();
    let m = rng.random_range(1..=cfg.max_m);
    let c = rng.random_range(2..=cfg.max_c);
    let d = rng.random_range(1..=3);
    let y = rng.random_range(0..c);
    let flat: Vec<f64> = normal.vector(&mut rng, m * c * d);
    let x = normal.vector(&mut rng, d);
    let params = MulticlassParams::from_flat(m, c, d, &flat)?;
    let z = params.logits(&x)?;

    let dz = cr_gradient(&z, y)?;
    let analytic = chain(&dz, &x);
    let fd = central_difference(
        |theta| {
            let p = MulticlassParams::from_flat(m, c, d, theta).expect("same shape");
            cr_log_loss(&p, &x, y).expect("finite loss")
        },
        &flat,
        FD_STEP,
    );
    let rel_err = relative_error(&analytic, &fd);

    let self_err = max_abs_diff(
        cr_cross_gradient(&z, &z, y)?.as_slice().expect("standard layout"),
        dz.as_slice().expect("standard layout"),
    );
    let max_entry = dz.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let family = cr_as_family(&params, &x, y)?;
    let family_err = (family.evaluate(&flat)? - cr_log_loss(&params, &x, y)?)
        .abs()
        .max(max_abs_diff(&family.gradient(&flat)?, &analytic));

    let row: Vec<f64> = z.row(0).to_vec();
    let single = Array2::from_shape_vec((1, c), row.clone()).expect("one row");
    let mut expected = softargmax(&row);
    expected[y] -= 1.0;
    let reduction_err =
        max_abs_diff(cr_gradient(&single, y)?.as_slice().expect("standard layout"), &expected);

    Ok(TrialRecord { trial: index, m, c, d, rel_err, self_err, max_entry, family_err, reduction_err })
}

/// `cfg.trials` random instances drawn from `seed`.
pub fn gradcheck_sweep(seed: u64, cfg: &GradcheckConfig) -> CliResult<GradcheckStats> {
    let trials = (0..cfg.trials).map(|i| trial(seed, i, cfg)).collect::<sumlogcone::Result<Vec<_>>>()?;
    Ok(GradcheckStats { seed, trials })
}

pub fn cmd_gradcheck(cfg: &ExperimentConfig) -> CliResult<Report> {
    let sweeps = per_seed(cfg, |seed| gradcheck_sweep(seed, &cfg.gradcheck))?;
    let dirs = out_dirs(cfg)?;
    let mut summary = Vec::new();
    let mut checks = Vec::new();
    let tol = cfg.gradcheck.tolerance;
    for s in &sweeps {
        write_table(
            &dirs.metrics.join(format!("gradcheck_seed{}.csv", s.seed)),
            &["trial", "m", "c", "d", "rel_err", "self_err", "max_entry", "family_err", "reduction_err"],
            s.trials.iter().map(|t| {
                vec![
                    t.trial.to_string(),
                    t.m.to_string(),
                    t.c.to_string(),
                    t.d.to_string(),
                    format_float(t.rel_err),
                    format_float(t.self_err),
                    format_float(t.max_entry),
                    format_float(t.family_err),
                    format_float(t.reduction_err),
                ]
            }),
        )?;
        summary.push(json!({
            "experiment": "gradcheck",
            "seed": s.seed,
            "trials": s.trials.len(),
            "max_rel_err": s.max_rel_err(),
            "max_self_err": s.max_self_err(),
            "max_entry": s.max_entry(),
            "max_family_err": s.max_family_err(),
            "max_reduction_err": s.max_reduction_err(),
        }));
        let tag = |name: &str| format!("seed{}_{name}", s.seed);
        checks.push(Check::new(
            &tag("finite_differences"),
            s.max_rel_err() <= tol,
            true,
            format!("max relative error {:.3e} (tolerance {tol:.0e})", s.max_rel_err()),
        ));
        checks.push(Check::new(
            &tag("cross_at_self"),
            s.max_self_err() <= 1e-12,
            true,
            format!("cross gradient at Z vs gradient {:.3e}", s.max_self_err()),
        ));
        checks.push(Check::new(
            &tag("bounded_entries"),
            s.max_entry() < 1.0,
            true,
            format!("largest logit derivative {:.6}", s.max_entry()),
        ));
        checks.push(Check::new(
            &tag("single_factor"),
            s.max_reduction_err() <= 1e-12,
            true,
            format!("m = 1 vs softargmax minus one-hot {:.3e}", s.max_reduction_err()),
        ));
        checks.push(Check::new(
            &tag("family_agreement"),
            s.max_family_err() <= 1e-10,
            true,
            format!("enumerated family vs convolution {:.3e}", s.max_family_err()),
        ));
    }
    let report = Report { experiment: Experiment::Gradcheck, summary, checks };
    report.save(&dirs.root)?;
    Ok(report)
}
