//! The three planar pictures of orbit/prior intersections: a grid and a
//! ray-plus-circle under coordinate sign changes, and two lines under
//! rotations, plus the ten-dimensional sign-group run.
//!
//! ```text
//! cargo run --release --example transversality -- [trials]
//! ```

use orbitlab::experiments::{run, transversality_preset, ExperimentConfig};

fn main() -> orbitlab::Result<()> {
    let trials = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    for preset in ["sign-grid-2d", "sign-ray-circle-2d", "so2-two-lines", "sign-subspace"] {
        let run_spec = transversality_preset(preset).expect("known preset");
        let report = run(&ExperimentConfig::new(1, trials, run_spec))?;
        let generic = &report.aggregates["generic"];
        println!(
            "{preset:<20} verdict {:<14} nontrivial {}/{}",
            report.verdicts["generic"]["scope"].as_str().unwrap_or("?"),
            generic.nontrivial,
            generic.trials - generic.skipped,
        );
        if let Some(probe) = report.trials.iter().find(|t| t.group == "probe") {
            println!(
                "{:<20} targeted probe: {:?} ({})",
                "",
                probe.outcome,
                probe.note.as_deref().unwrap_or("")
            );
        }
    }
    Ok(())
}
