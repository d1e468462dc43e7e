//! Tabulates recoverability verdicts: the dihedral power-spectrum problem
//! against the prior dimension, and the cryo-EM effective dimension against
//! bandlimit and radial resolution.

use orbitlab::bounds::{verdict_cryoem, verdict_phase_retrieval, verdict_real_auto, Scope};
use orbitlab::priors::TransformClass;
use orbitlab::RepresentationSpec;

fn scope(s: Scope) -> &'static str {
    match s {
        Scope::None => "-",
        Scope::GenericPoint => "generic",
        Scope::AllPoints => "all",
    }
}

fn main() -> orbitlab::Result<()> {
    let n = 16;
    let spec = RepresentationSpec::dihedral(n)?;
    println!("dihedral N = {n}, K = {}", spec.effective_dim().effective);
    println!("{:>3} {:>10} {:>10} {:>10} | {:>10} {:>10} {:>10}", "M", "GL", "Aff", "O", "ps GL", "ps Aff", "ps O");
    for m in 0..=9 {
        let mut row = format!("{m:>3}");
        for class in [TransformClass::Gl, TransformClass::Aff, TransformClass::O] {
            row += &format!(" {:>10}", scope(verdict_real_auto(&spec, m, class).scope));
        }
        row += " |";
        for class in [TransformClass::Gl, TransformClass::Aff, TransformClass::O] {
            row += &format!(" {:>10}", scope(verdict_phase_retrieval(n, m, class)?.scope));
        }
        println!("{row}");
    }

    println!("\ncryo-EM K / dim V");
    print!("{:>4}", "L\\R");
    let radial = [5, 9, 13, 17, 21];
    for r in radial {
        print!(" {r:>7}");
    }
    println!();
    for l in 0..=10 {
        print!("{l:>4}");
        for r in radial {
            match verdict_cryoem(l, r, 0, TransformClass::Gl) {
                Ok(v) => print!(" {:>7.3}", v.effective_dim as f64 / ((l + 1) * (l + 1) * r) as f64),
                Err(_) => print!(" {:>7}", "·"),
            }
        }
        println!();
    }
    Ok(())
}
