//! Recovery error from noisy multi-reference alignment data as the number
//! of observations grows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bounds::verdict_real_auto;
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, RunSpec};
use crate::experiments::report::{Outcome, Report, TrialRecord};
use crate::experiments::{relative_error, trial_rng, trial_seed};
use crate::invariants::empirical_second_moment;
use crate::priors::{Prior, PriorSet, TransformClass, TranslatedPrior};
use crate::recovery::{
    recover, statistical_error, to_data_coordinates, GridOptions, Measurement, Method,
    RecoveryConfig, Status,
};
use rayon::prelude::*;

/// The first search threshold is the statistical error of the moment
/// estimate divided by this.
const START_DIVISOR: f64 = 8.0;
/// Candidates closer than this multiple of the statistical error are merged.
const SEP_FACTOR: f64 = 10.0;
const MAX_WIDENINGS: usize = 40;

pub(crate) fn run(config: &ExperimentConfig) -> Result<Report> {
    let RunSpec::MraNoise {
        group,
        sigma,
        m,
        sample_sizes,
        class,
        signal_norm,
    } = &config.run
    else {
        unreachable!("dispatched on the experiment kind")
    };
    let dim = group.ambient_dim();
    let spec = group.isotypic_spec()?;
    let t = config.tolerances;
    let exact = *class == TransformClass::Aff;
    let per = config.trials;
    let count = per * sample_sizes.len();

    let trials: Vec<TrialRecord> = (0..count)
        .into_par_iter()
        .map(|index| {
            // the signal and prior depend on the seed only, so every sample
            // size sees the same instances
            let k = index / per;
            let trial = index % per;
            let n = sample_sizes[k];
            let seed = trial_seed(config.base_seed, trial);
            let mut rng = trial_rng(seed);
            let base = Prior::coordinate_subspace(dim, *m)?;
            let prior = TranslatedPrior::sample_generic(base, *class, &mut rng);
            let mut x = prior.sample(&mut rng);
            if !exact {
                let target = signal_norm.unwrap_or((dim as f64).sqrt());
                x *= target / x.norm().max(f64::MIN_POSITIVE);
            }
            let mut data_rng = ChaCha8Rng::seed_from_u64(seed);
            data_rng.set_stream(1 + k as u64);
            let estimate = empirical_second_moment(group, &x, n, *sigma, &mut data_rng)?;
            let stat = statistical_error(&estimate);
            let mut recovery = RecoveryConfig {
                method: Method::Grid,
                tol_in: t.tol_in.max(stat / START_DIVISOR),
                tol_sep: t.tol_sep.max(SEP_FACTOR * stat),
                tol_gram: f64::INFINITY,
                grid: GridOptions {
                    steps: t.grid_steps,
                    budget: t.grid_budget as u128,
                    special: false,
                },
                ..RecoveryConfig::default()
            };
            let group_key = format!("n={n}");
            let measurement = Measurement::SecondMoment { group: *group, estimate };
            // raise the threshold until the closest approach is inside it
            let mut attempt = 0;
            let result = loop {
                let r = match recover(&measurement, &prior, &recovery) {
                    Ok(r) => r,
                    Err(e @ Error::BudgetExceeded { .. }) => {
                        return Ok(TrialRecord::skipped(index, seed, group_key, e.to_string()))
                    }
                    Err(e) => return Err(e),
                };
                attempt += 1;
                if !r.candidates.is_empty() || attempt >= MAX_WIDENINGS {
                    break r;
                }
                recovery.tol_in = (2.0 * recovery.tol_in).min(r.best_residual() * (1.0 + 1e-9));
            };
            // the closest approach to the prior is the estimate
            let Some(best) = &result.best else {
                return Ok(TrialRecord::skipped(index, seed, group_key, "empty search".into()));
            };
            let xhat = to_data_coordinates(group, &best.signal)?;
            let error = relative_error(&xhat, &x, exact);
            let success = result.status == Status::UniqueUpToSign;
            let mut rec = TrialRecord::new(index, seed, group_key, if success { Outcome::Success } else { Outcome::Failure })
                .with_error(error)
                .with_residual(best.residual);
            rec.success = Some(success);
            rec.candidates = result.candidates.len();
            rec.note = Some(format!("statistical error {stat:.3e}"));
            Ok(rec)
        })
        .collect::<Result<_>>()?;

    let mut report = Report::new(config, trials);
    let medians: Vec<Option<f64>> = sample_sizes
        .iter()
        .map(|n| report.aggregates.get(&format!("n={n}")).and_then(|a| a.error_median))
        .collect();
    let slope = loglog_slope(sample_sizes, &medians);
    let decreasing = medians.windows(2).all(|w| matches!(w, [Some(a), Some(b)] if b < a));
    report.set_summary("sample_sizes", sample_sizes);
    report.set_summary("median_errors", &medians);
    report.set_summary("loglog_slope", slope);
    report.set_summary("strictly_decreasing", decreasing);
    report.set_verdict("prior", verdict_real_auto(&spec, *m, *class));
    Ok(report)
}

/// Least-squares slope of `log(error)` against `log(n)`.
pub fn loglog_slope(sizes: &[usize], errors: &[Option<f64>]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .zip(errors)
        .filter_map(|(&n, e)| e.filter(|v| *v > 0.0).map(|v| ((n as f64).ln(), v.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
