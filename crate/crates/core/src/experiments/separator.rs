//! Brute-force check that rowsort separates orbits of the column
//! permutation action on a generic translate.

use nalgebra::{DMatrix, DVector};

use crate::bounds::verdict_rowsort;
use crate::error::Result;
use crate::experiments::config::{ExperimentConfig, RunSpec};
use crate::experiments::report::{Outcome, Report, TrialRecord};
use crate::experiments::{run_trials, trial_rng};
use crate::invariants::rowsort_flat;
use crate::priors::{Prior, PriorSet, TransformClass, TranslatedPrior};
use crate::repr::permutations;

/// The set of `2 × 3` matrices `[(a+b)(1,2,3); (a, b, 0)]`. Swapping the
/// first two entries of the second row alone stays inside it.
pub fn witness_prior() -> Result<TranslatedPrior> {
    let basis = DMatrix::from_column_slice(6, 2, &[1.0, 2.0, 3.0, 1.0, 0.0, 0.0, 1.0, 2.0, 3.0, 0.0, 1.0, 0.0]);
    Ok(TranslatedPrior::identity(Prior::subspace(basis)?))
}

/// Applies one permutation per row of a row-major `d × n` matrix.
fn permute_rows(x: &DVector<f64>, perms: &[&[usize]], n: usize) -> DVector<f64> {
    let mut y = DVector::zeros(x.len());
    for (r, p) in perms.iter().enumerate() {
        for j in 0..n {
            y[r * n + j] = x[r * n + p[j]];
        }
    }
    y
}

/// All of `(S_n)^d` as lists of per-row permutations.
fn row_permutation_tuples(d: usize, n: usize) -> Vec<Vec<usize>> {
    let count = permutations(n).len();
    let mut out = Vec::new();
    let total = count.pow(d as u32);
    for mut k in 0..total {
        let mut idx = Vec::with_capacity(d);
        for _ in 0..d {
            idx.push(k % count);
            k /= count;
        }
        out.push(idx);
    }
    out
}

pub(crate) fn run(config: &ExperimentConfig) -> Result<Report> {
    let RunSpec::Separator { d, n, m, witness } = config.run else {
        unreachable!("dispatched on the experiment kind")
    };
    let perms = permutations(n);
    let tuples = row_permutation_tuples(d, n);
    let t = config.tolerances;
    let fixed = if witness { Some(witness_prior()?) } else { None };

    let trials = run_trials(config.base_seed, config.trials, |i, seed| {
        let mut rng = trial_rng(seed);
        let prior = match &fixed {
            Some(p) => p.clone(),
            None => {
                let base = Prior::coordinate_subspace(d * n, m)?;
                TranslatedPrior::sample_generic(base, TransformClass::Aff, &mut rng)
            }
        };
        let x = prior.sample(&mut rng);
        let scale = x.norm().max(1.0);
        let related = |y: &DVector<f64>| {
            perms.iter().any(|p| {
                let diag: Vec<&[usize]> = vec![p.as_slice(); d];
                (permute_rows(&x, &diag, n) - y).norm() <= t.tol_sep * scale
            })
        };
        // every tuple is a rowsort collision; inside the prior it must be
        // a diagonal permutation
        let mut in_prior = 0;
        let mut violations = 0;
        for tuple in &tuples {
            let rows: Vec<&[usize]> = tuple.iter().map(|&k| perms[k].as_slice()).collect();
            let y = permute_rows(&x, &rows, n);
            if prior.distance(&y) <= t.tol_in * scale {
                in_prior += 1;
                if !related(&y) {
                    violations += 1;
                }
            }
        }
        // an independent pair collides only if related
        let z = prior.sample(&mut rng);
        let collide = (rowsort_flat(&x, d, n)? - rowsort_flat(&z, d, n)?).norm() <= t.tol_sep * scale;
        if collide && !related(&z) {
            violations += 1;
        }
        let ok = violations == 0;
        let mut rec = TrialRecord::new(i, seed, "pairs", if ok { Outcome::Pass } else { Outcome::Fail });
        rec.success = Some(ok);
        rec.nontrivial = Some(!ok);
        rec.candidates = in_prior;
        if !ok {
            rec.note = Some(format!("{violations} non-diagonal collisions inside the prior"));
        }
        Ok(rec)
    })?;

    let mut report = Report::new(config, trials);
    report.set_verdict("rowsort", verdict_rowsort(d, n, m)?);
    let violations = report.trials.iter().filter(|r| r.success == Some(false)).count();
    report.set_summary("elements_per_trial", tuples.len());
    report.set_summary("trials_with_violations", violations);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::run;

    fn config(witness: bool) -> ExperimentConfig {
        ExperimentConfig::new(9, 50, RunSpec::Separator { d: 2, n: 3, m: 2, witness })
    }

    #[test]
    fn generic_prior_has_no_violations() {
        let rep = run(&config(false)).unwrap();
        assert_eq!(rep.summary["elements_per_trial"], 36);
        assert_eq!(rep.summary["trials_with_violations"], 0);
        // the identity is always a collision inside the prior
        assert!(rep.trials.iter().all(|r| r.candidates >= 1));
    }

    #[test]
    fn witness_prior_breaks_separation() {
        let rep = run(&config(true)).unwrap();
        assert!(rep.summary["trials_with_violations"].as_u64().unwrap() >= 1);
    }

    #[test]
    fn tuples_cover_the_product() {
        let t = row_permutation_tuples(2, 3);
        assert_eq!(t.len(), 36);
        let mut s = t.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 36);
    }
}
