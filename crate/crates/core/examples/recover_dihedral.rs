//! End-to-end recovery on the dihedral power-spectrum problem: sample a
//! signal from an `O`-generic subspace prior, keep only its Gram blocks, and
//! recover it with the grid oracle and with local search.
//!
//! ```text
//! cargo run --release --example recover_dihedral -- [N] [M] [trials]
//! ```

use std::time::Instant;

use orbitlab::invariants::gram_blocks;
use orbitlab::priors::{Prior, PriorSet, TransformClass, TranslatedPrior};
use orbitlab::recovery::{recover, Measurement, Method, RecoveryConfig};
use orbitlab::{RepresentationSpec, Signal};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> orbitlab::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(16);
    let m = args.get(1).copied().unwrap_or(3);
    let trials = args.get(2).copied().unwrap_or(10);

    let spec = RepresentationSpec::dihedral(n)?;
    let verdict = orbitlab::bounds::verdict_phase_retrieval(n, m, TransformClass::O)?;
    println!("dihedral N={n}, M={m}: {:?} (margin {})", verdict.scope, verdict.margin);

    for method in [Method::Grid, Method::Local] {
        let config = RecoveryConfig { method, ..RecoveryConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut ok, mut evals) = (0, 0u64);
        let start = Instant::now();
        for _ in 0..trials {
            let base = Prior::coordinate_subspace(n, m)?;
            let prior = TranslatedPrior::sample_generic(base, TransformClass::O, &mut rng);
            let x = Signal::from_flat(&spec, &prior.sample(&mut rng))?;
            let result = recover(&Measurement::Gram(gram_blocks(&x)), &prior, &config)?;
            evals += result.evaluated;
            if result.status == orbitlab::recovery::Status::UniqueUpToSign && result.contains(&x, 1e-6, false) {
                ok += 1;
            }
        }
        println!(
            "{method:?}: {ok}/{trials} recovered, {:.0} evaluations/trial, {:.2?}",
            evals as f64 / trials as f64,
            start.elapsed()
        );
    }
    Ok(())
}
