//! Recovery success rate as the prior dimension crosses the thresholds.

use crate::bounds::{verdict_phase_retrieval, verdict_real_auto};
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, RunSpec, SpecDescriptor};
use crate::experiments::report::{Outcome, Report, TrialRecord};
use crate::experiments::{relative_error, run_trials, trial_rng};
use crate::invariants::gram_blocks;
use crate::priors::{Prior, PriorSet, TransformClass, TranslatedPrior};
use crate::recovery::{recover, GridOptions, LocalOptions, Measurement, RecoveryConfig, Status};
use crate::repr::Signal;

/// Relative error under which a recovered candidate counts as the signal.
pub const SUCCESS_TOL: f64 = 1e-6;

pub(crate) fn run(config: &ExperimentConfig) -> Result<Report> {
    let RunSpec::RecoverSweep {
        spec,
        dims,
        class,
        method,
    } = &config.run
    else {
        unreachable!("dispatched on the experiment kind")
    };
    let rs = spec.build()?;
    let t = &config.tolerances;
    let recovery = RecoveryConfig {
        method: *method,
        tol_in: t.tol_in,
        tol_sep: t.tol_sep,
        grid: GridOptions {
            steps: t.grid_steps,
            budget: t.grid_budget as u128,
            special: false,
        },
        ..RecoveryConfig::default()
    };
    let exact = *class == TransformClass::Aff;
    let per = config.trials;
    let trials = run_trials(config.base_seed, dims.len() * per, |i, seed| {
        let m = dims[i / per];
        let group = format!("M={m}");
        let mut rng = trial_rng(seed);
        let base = Prior::coordinate_subspace(rs.dim(), m)?;
        let prior = TranslatedPrior::sample_generic(base, *class, &mut rng);
        let x = Signal::from_flat(&rs, &prior.sample(&mut rng))?;
        let mut cfg = recovery;
        cfg.local = LocalOptions {
            restarts: t.restarts,
            seed,
            ..LocalOptions::default()
        };
        let result = match recover(&Measurement::Gram(gram_blocks(&x)), &prior, &cfg) {
            Ok(r) => r,
            Err(e @ Error::BudgetExceeded { .. }) => {
                return Ok(TrialRecord::skipped(i, seed, group, e.to_string()))
            }
            Err(e) => return Err(e),
        };
        let xf = x.flatten();
        let error = result
            .candidates
            .iter()
            .map(|c| relative_error(&c.signal.flatten(), &xf, exact))
            .fold(f64::INFINITY, f64::min);
        let unique = if exact {
            result.sign_resolved()
        } else {
            result.status == Status::UniqueUpToSign
        };
        let success = unique && error <= SUCCESS_TOL;
        let mut rec = TrialRecord::new(i, seed, group, if success { Outcome::Success } else { Outcome::Failure })
            .with_error(error)
            .with_residual(result.best_residual());
        rec.success = Some(success);
        rec.nontrivial = Some(result.status == Status::Ambiguous);
        rec.candidates = result.candidates.len();
        if !success {
            rec.note = Some(format!("{:?}", result.status));
        }
        Ok(rec)
    })?;

    let mut report = Report::new(config, trials);
    for &m in dims {
        let key = format!("M={m}");
        report.set_verdict(&key, verdict_real_auto(&rs, m, *class));
        if let SpecDescriptor::Dihedral { n } = spec {
            if let Ok(v) = verdict_phase_retrieval(*n, m, *class) {
                report.set_verdict(&format!("{key} (power spectrum)"), v);
            }
        }
    }
    let rates: Vec<Option<f64>> = dims
        .iter()
        .map(|m| report.aggregates.get(&format!("M={m}")).and_then(|a| a.success_rate))
        .collect();
    report.set_summary("dims", dims);
    report.set_summary("success_rates", rates);
    report.set_summary("effective_dim", rs.effective_dim().effective);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::run;
    use crate::recovery::Method;

    #[test]
    fn small_dihedral_sweep() {
        let cfg = ExperimentConfig::new(
            5,
            4,
            RunSpec::RecoverSweep {
                spec: SpecDescriptor::Dihedral { n: 8 },
                dims: vec![1, 8],
                class: TransformClass::O,
                method: Method::Grid,
            },
        );
        let mut cfg = cfg;
        cfg.tolerances.grid_steps = 400;
        let rep = run(&cfg).unwrap();
        assert_eq!(rep.aggregates["M=1"].success_rate, Some(1.0));
        // the whole space: every orbit point is in the prior
        assert_eq!(rep.aggregates["M=8"].success_rate, Some(0.0));
        assert_eq!(rep.verdicts["M=1 (power spectrum)"]["scope"], "all_points");
    }
}
