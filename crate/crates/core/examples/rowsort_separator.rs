//! Rowsort on `2 × 3` matrices: no false collisions on a generic affine
//! translate of a plane, and a hand-built plane where permuting one row
//! alone stays in the set.

use orbitlab::experiments::{run, ExperimentConfig, RunSpec};

fn main() -> orbitlab::Result<()> {
    for witness in [false, true] {
        let cfg = ExperimentConfig::new(3, 1000, RunSpec::Separator { d: 2, n: 3, m: 2, witness });
        let report = run(&cfg)?;
        println!(
            "{}: {} of {} trials with non-diagonal collisions ({} group elements each)",
            if witness { "witness plane " } else { "generic plane " },
            report.summary["trials_with_violations"],
            report.trials.len(),
            report.summary["elements_per_trial"],
        );
    }
    Ok(())
}
