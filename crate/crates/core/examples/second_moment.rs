//! From observations `y = g·x + ε` of a cyclic shift model to Gram blocks:
//! the empirical second moment converges to the group average, and its
//! isotypic blocks are the Gram matrices of the signal's Fourier blocks.

use nalgebra::DVector;
use orbitlab::invariants::{
    empirical_second_moment, exact_second_moment, gram_blocks, second_moment_to_gram,
    SecondMomentEstimate,
};
use orbitlab::{DataGroupSpec, Signal};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> orbitlab::Result<()> {
    let group = DataGroupSpec::Cyclic { n: 8 };
    let x = DVector::from_vec(vec![1.0, 0.5, -0.3, 0.8, 0.0, -1.2, 0.4, 0.9]);
    let exact = exact_second_moment(&group, &x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    println!("{:>8} {:>8} {:>12}", "n", "sigma", "rel. error");
    for sigma in [0.0, 1.0] {
        for n in [100, 1_000, 10_000, 100_000] {
            let est = empirical_second_moment(&group, &x, n, sigma, &mut rng)?;
            println!("{n:>8} {sigma:>8.1} {:>12.4e}", (&est.matrix - &exact).norm() / exact.norm());
        }
    }

    let spec = group.isotypic_spec()?;
    let basis = group.isotypic_basis()?;
    let iso = Signal::from_flat(&spec, &(basis.transpose() * &x))?;
    let from_moment = second_moment_to_gram(&group, &SecondMomentEstimate::exact(exact))?;
    println!("\nGram blocks from the exact moment vs directly: {:.2e}", from_moment.distance(&gram_blocks(&iso)));
    for (l, b) in from_moment.blocks().iter().enumerate() {
        println!("  block {l} ({}×{}): {:.6}", spec.blocks()[l].dim, spec.blocks()[l].mult, b[(0, 0)]);
    }
    Ok(())
}
