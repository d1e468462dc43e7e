//! Multi-reference alignment with Gaussian noise: recovery error of a
//! signal on a generic line in `ℝ⁸` from the debiased empirical second
//! moment, as the number of observations grows.
//!
//! ```text
//! cargo run --release --example mra_noise -- [seeds] [sigma]
//! ```

use orbitlab::experiments::{run, ExperimentConfig, ExperimentKind, RunSpec};

fn main() -> orbitlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let noise: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1.0);

    let mut cfg = ExperimentConfig::default_for(ExperimentKind::MraNoise);
    cfg.trials = seeds;
    if let RunSpec::MraNoise { sigma, .. } = &mut cfg.run {
        *sigma = noise;
    }
    let report = run(&cfg)?;
    for (group, agg) in &report.aggregates {
        println!(
            "{group:>9}: median error {:.4e}, 90% {:.4e}",
            agg.error_median.unwrap_or(f64::NAN),
            agg.error_p90.unwrap_or(f64::NAN)
        );
    }
    println!("log-log slope {}", report.summary["loglog_slope"]);
    Ok(())
}
