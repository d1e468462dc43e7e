//! Cryo-EM style recovery at the level of Gram blocks: a signal with
//! `(L+1)²` coefficient blocks of `R` radial columns, rotated blockwise by
//! `∏ SO(2ℓ+1)`, factored back from its Gram blocks up to the orbit.

use orbitlab::bounds::verdict_cryoem;
use orbitlab::invariants::gram_blocks;
use orbitlab::priors::TransformClass;
use orbitlab::recovery::canonical_factor;
use orbitlab::{AmbiguityElement, RepresentationSpec, Signal};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> orbitlab::Result<()> {
    let (l, r) = (3, 9);
    let spec = RepresentationSpec::cryoem(l, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = Signal::random(&spec, &mut rng);
    let h = AmbiguityElement::haar_special(&spec, &mut rng);
    let rotated = h.act(&x)?;

    let b = gram_blocks(&rotated);
    let xhat = canonical_factor(&b)?;
    println!("dim V = {}, K = {}", spec.dim(), spec.effective_dim().effective);
    println!("‖gram(x̂) − B‖ = {:.2e}", gram_blocks(&xhat).distance(&b));
    println!("canonical factor independent of the rotation: {:.2e}", canonical_factor(&gram_blocks(&x))?.distance(&xhat));

    for m in [10, 60, 120, 200] {
        let v = verdict_cryoem(l, r, m, TransformClass::Gl)?;
        println!("M = {m:>3}: {:?}, margin {}", v.scope, v.margin);
    }
    Ok(())
}
