//! Reproduces the examples at the threshold: a translated parabola with
//! sign-symmetric points, and the square `{(±1, 0), (0, ±1)}` under the
//! quarter-turn group and under all rotations.

use orbitlab::experiments::{run, ExperimentConfig, RunSpec, SharpnessCase};

fn main() -> orbitlab::Result<()> {
    for case in [
        SharpnessCase::ParabolaGl,
        SharpnessCase::ParabolaAff,
        SharpnessCase::Z4Grid,
        SharpnessCase::So2Points,
    ] {
        let report = run(&ExperimentConfig::new(0, 100, RunSpec::Sharpness { case }))?;
        let all = report.overall();
        println!("{case:?}: {}/{} checks hold", all.successes, all.trials);
        for (k, v) in &report.summary {
            println!("    {k}: {v}");
        }
    }
    Ok(())
}
