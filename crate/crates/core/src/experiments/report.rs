//! Experiment reports: per-trial records plus aggregates that can be
//! recomputed from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The orbit meets the prior only at `±x` (`x` for affine priors).
    Trivial,
    Nontrivial,
    Success,
    Failure,
    /// A check that holds.
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub index: usize,
    /// Seeds the trial's generator on its own.
    pub seed: u64,
    /// Aggregation key, e.g. `M=3` or `n=1000`.
    pub group: String,
    pub outcome: Outcome,
    pub success: Option<bool>,
    pub nontrivial: Option<bool>,
    pub residual: Option<f64>,
    pub error: Option<f64>,
    pub candidates: usize,
    pub note: Option<String>,
}

impl TrialRecord {
    pub fn new(index: usize, seed: u64, group: impl Into<String>, outcome: Outcome) -> Self {
        TrialRecord {
            index,
            seed,
            group: group.into(),
            outcome,
            success: None,
            nontrivial: None,
            residual: None,
            error: None,
            candidates: 0,
            note: None,
        }
    }

    pub fn skipped(index: usize, seed: u64, group: impl Into<String>, why: String) -> Self {
        let mut r = TrialRecord::new(index, seed, group, Outcome::Skipped);
        r.note = Some(why);
        r
    }

    pub fn with_residual(mut self, v: f64) -> Self {
        self.residual = finite(v);
        self
    }

    pub fn with_error(mut self, v: f64) -> Self {
        self.error = finite(v);
        self
    }
}

/// Non-finite values do not survive JSON, so they are dropped up front.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aggregate {
    pub trials: usize,
    pub skipped: usize,
    pub successes: usize,
    pub success_rate: Option<f64>,
    pub nontrivial: usize,
    pub nontrivial_rate: Option<f64>,
    pub error_median: Option<f64>,
    pub error_p90: Option<f64>,
    pub error_max: Option<f64>,
}

impl Aggregate {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> Aggregate {
        let mut trials = 0;
        let mut skipped = 0;
        let (mut successes, mut judged) = (0, 0);
        let (mut nontrivial, mut classified) = (0, 0);
        let mut errors = Vec::new();
        for r in records {
            trials += 1;
            if r.outcome == Outcome::Skipped {
                skipped += 1;
            }
            if let Some(s) = r.success {
                judged += 1;
                successes += s as usize;
            }
            if let Some(n) = r.nontrivial {
                classified += 1;
                nontrivial += n as usize;
            }
            if let Some(e) = r.error {
                errors.push(e);
            }
        }
        errors.sort_by(f64::total_cmp);
        let rate = |k: usize, n: usize| (n > 0).then(|| k as f64 / n as f64);
        Aggregate {
            trials,
            skipped,
            successes,
            success_rate: rate(successes, judged),
            nontrivial,
            nontrivial_rate: rate(nontrivial, classified),
            error_median: quantile(&errors, 0.5),
            error_p90: quantile(&errors, 0.9),
            error_max: errors.last().copied(),
        }
    }
}

/// Linear interpolation between order statistics of a sorted slice.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    Some(sorted[lo] + t * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: u32,
    pub experiment: String,
    /// Fully resolved configuration, seed included.
    pub config: ExperimentConfig,
    pub seed: u64,
    /// Predictions from the bound calculators, keyed like the aggregates.
    pub verdicts: BTreeMap<String, Value>,
    pub trials: Vec<TrialRecord>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub summary: BTreeMap<String, Value>,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn new(config: &ExperimentConfig, trials: Vec<TrialRecord>) -> Report {
        let aggregates = aggregate(&trials);
        Report {
            schema: SCHEMA_VERSION,
            experiment: config.run.kind().name().to_string(),
            config: config.clone(),
            seed: config.base_seed,
            verdicts: BTreeMap::new(),
            trials,
            aggregates,
            summary: BTreeMap::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn overall(&self) -> Aggregate {
        Aggregate::from_records(&self.trials)
    }

    pub fn set_summary(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(
            key.to_string(),
            serde_json::to_value(value).expect("summary values serialise"),
        );
    }

    pub fn set_verdict(&mut self, key: &str, value: impl Serialize) {
        self.verdicts.insert(
            key.to_string(),
            serde_json::to_value(value).expect("verdicts serialise"),
        );
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Parses a report and checks that the aggregates match the records.
    pub fn from_json(text: &str) -> Result<Report> {
        let report: Report = serde_json::from_str(text)?;
        report.check_consistency()?;
        Ok(report)
    }

    pub fn check_consistency(&self) -> Result<()> {
        let fresh = aggregate(&self.trials);
        if fresh != self.aggregates {
            return Err(Error::Config(
                "report aggregates do not match the per-trial records".into(),
            ));
        }
        Ok(())
    }

    /// Flat per-trial table with a header row.
    pub fn to_csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            experiment: &'a str,
            index: usize,
            seed: u64,
            group: &'a str,
            outcome: Outcome,
            success: Option<bool>,
            nontrivial: Option<bool>,
            residual: Option<f64>,
            error: Option<f64>,
            candidates: usize,
            note: Option<&'a str>,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for t in &self.trials {
            w.serialize(Row {
                experiment: &self.experiment,
                index: t.index,
                seed: t.seed,
                group: &t.group,
                outcome: t.outcome,
                success: t.success,
                nontrivial: t.nontrivial,
                residual: t.residual,
                error: t.error,
                candidates: t.candidates,
                note: t.note.as_deref(),
            })
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn aggregate(trials: &[TrialRecord]) -> BTreeMap<String, Aggregate> {
    let mut groups: BTreeMap<String, Vec<&TrialRecord>> = BTreeMap::new();
    for t in trials {
        groups.entry(t.group.clone()).or_default().push(t);
    }
    groups
        .into_iter()
        .map(|(k, v)| (k, Aggregate::from_records(v)))
        .collect()
}
