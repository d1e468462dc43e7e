//! Recoverability verdicts from dimension counting.
//!
//! Every calculator compares the effective dimension `K = dim V − k(H)`
//! against thresholds in the prior dimension `M`. The generic-point
//! threshold is always the weaker one, so `AllPoints` implies the
//! generic-point condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::TransformClass;
use crate::repr::{Block, RepresentationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    None,
    GenericPoint,
    AllPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambiguity {
    Exact,
    UpToSign,
    UpToPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexClass {
    Gl,
    Aff,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub scope: Scope,
    pub ambiguity: Ambiguity,
    /// `K` minus the threshold actually compared against (the all-points
    /// threshold when `scope` is `AllPoints`, the generic one otherwise).
    pub margin: i64,
    pub connected_orbits: bool,
    /// The quantity compared against the thresholds (`K`, or `N` for the
    /// phase retrieval inequalities).
    pub effective_dim: i64,
    pub generic_threshold: i64,
    pub all_threshold: i64,
    /// `true` when the comparisons are `≥` rather than `>`.
    pub inclusive: bool,
}

impl Verdict {
    fn evaluate(
        k: i64,
        generic: i64,
        all: i64,
        inclusive: bool,
        ambiguity: Ambiguity,
        connected_orbits: bool,
    ) -> Verdict {
        let holds = |t: i64| if inclusive { k >= t } else { k > t };
        let scope = if holds(all) && holds(generic) {
            Scope::AllPoints
        } else if holds(generic) {
            Scope::GenericPoint
        } else {
            Scope::None
        };
        let compared = if scope == Scope::AllPoints { all } else { generic };
        Verdict {
            scope,
            ambiguity,
            margin: k - compared,
            connected_orbits,
            effective_dim: k,
            generic_threshold: generic,
            all_threshold: all,
            inclusive,
        }
    }
}

fn ambiguity_of(class: TransformClass) -> Ambiguity {
    match class {
        TransformClass::Aff => Ambiguity::Exact,
        TransformClass::Gl | TransformClass::O => Ambiguity::UpToSign,
    }
}

/// Real orthogonal ambiguity group `∏ O(N_ℓ)`.
pub fn verdict_real(
    spec: &RepresentationSpec,
    m: usize,
    class: TransformClass,
    connected: bool,
) -> Verdict {
    let k = spec.effective_dim().effective as i64;
    let m = m as i64;
    let (generic, all) = match class {
        TransformClass::Gl | TransformClass::Aff => (m, 2 * m),
        TransformClass::O if connected => (m + 1, 2 * m + 1),
        TransformClass::O => (m + 2, 2 * m + 2),
    };
    Verdict::evaluate(k, generic, all, false, ambiguity_of(class), connected)
}

/// [`verdict_real`] with the connectivity flag derived from the representation.
pub fn verdict_real_auto(spec: &RepresentationSpec, m: usize, class: TransformClass) -> Verdict {
    verdict_real(spec, m, class, spec.orbits_connected())
}

/// Effective real dimension for unitary blocks on `ℂ^{N×R}`:
/// `K = 2 Σ N_ℓ R_ℓ − Σ (N_ℓ² − max(N_ℓ − R_ℓ, 0)²)`.
pub fn effective_dim_complex(blocks: &[Block]) -> i64 {
    let dim_u = |m: usize| (m * m) as i64;
    blocks
        .iter()
        .map(|b| {
            2 * (b.dim * b.mult) as i64 - (dim_u(b.dim) - dim_u(b.dim.saturating_sub(b.mult)))
        })
        .sum()
}

/// Complex signals with unitary ambiguity `∏ U(N_ℓ)`.
pub fn verdict_complex(blocks: &[Block], m: usize, class: ComplexClass) -> Verdict {
    let k = effective_dim_complex(blocks);
    let m = m as i64;
    match class {
        ComplexClass::Gl => Verdict::evaluate(k, m, 2 * m, false, Ambiguity::UpToPhase, true),
        ComplexClass::Aff => Verdict::evaluate(k, m + 1, 2 * m + 1, false, Ambiguity::Exact, true),
        // unitary groups are connected, so the improved constants apply
        ComplexClass::U => Verdict::evaluate(k, m + 2, 2 * m + 2, false, Ambiguity::UpToPhase, true),
    }
}

/// Power-spectrum inequalities for the dihedral action on `ℝ^N`, encoded as
/// stated: `N ≥ 2M` / `N ≥ 4M` for `GL`/`Aff`, `N ≥ 2M+4` / `N ≥ 4M+4` for `O`.
pub fn verdict_phase_retrieval(n: usize, m: usize, class: TransformClass) -> Result<Verdict> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("signal length {n} must be at least 2")));
    }
    let (n, m) = (n as i64, m as i64);
    let (generic, all) = match class {
        TransformClass::Gl | TransformClass::Aff => (2 * m, 4 * m),
        TransformClass::O => (2 * m + 4, 4 * m + 4),
    };
    Ok(Verdict::evaluate(n, generic, all, true, ambiguity_of(class), false))
}

/// Rotation/radial blocks `[(2ℓ+1, R)]`, valid when `R ≥ 2L+1`.
pub fn verdict_cryoem(l: usize, r: usize, m: usize, class: TransformClass) -> Result<Verdict> {
    if r < 2 * l + 1 {
        return Err(Error::Precondition(format!(
            "R = {r} < 2L+1 = {}: orbits are not of full dimension",
            2 * l + 1
        )));
    }
    let spec = RepresentationSpec::cryoem(l, r)?;
    Ok(verdict_real_auto(&spec, m, class))
}

/// `(L+1)(R(L+1) − L(4L+5)/6)`, exact in integers for `R ≥ 2L+1`.
pub fn cryoem_effective_dim(l: usize, r: usize) -> i64 {
    let (l, r) = (l as i64, r as i64);
    // L(4L+5) is always divisible by 6 after multiplying by (L+1)
    ((l + 1) * (6 * r * (l + 1) - l * (4 * l + 5))) / 6
}

/// Single block `[(N, R)]`.
pub fn verdict_gram(n: usize, r: usize, m: usize, class: TransformClass) -> Result<Verdict> {
    let spec = RepresentationSpec::new(vec![Block::new(n, r)])?;
    Ok(verdict_real_auto(&spec, m, class))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowsortVerdict {
    /// `M < nd/2`.
    pub all_points: bool,
    /// `M < nd`.
    pub generic_point: bool,
}

/// The permutation group `(S_n)^d` is finite, so `K = nd` with `Aff`
/// thresholds.
pub fn verdict_rowsort(d: usize, n: usize, m: usize) -> Result<RowsortVerdict> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidArgument("rowsort needs d, n ≥ 1".into()));
    }
    Ok(RowsortVerdict {
        all_points: 2 * m < n * d,
        generic_point: m < n * d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use TransformClass::*;

    fn spec(pairs: &[(usize, usize)]) -> RepresentationSpec {
        RepresentationSpec::from_pairs(pairs).unwrap()
    }

    #[test]
    fn sign_changes_aff() {
        let s = spec(&[(1, 1); 10]);
        let v = verdict_real_auto(&s, 4, Aff);
        assert_eq!(v.scope, Scope::AllPoints);
        assert_eq!(v.ambiguity, Ambiguity::Exact);
        assert_eq!(v.margin, 2);
    }

    #[test]
    fn k_equals_m_is_none() {
        let s = spec(&[(2, 1)]);
        for class in [Gl, Aff, O] {
            assert_eq!(verdict_real_auto(&s, 1, class).scope, Scope::None);
        }
    }

    #[test]
    fn dihedral_eight_orthogonal() {
        let s = RepresentationSpec::dihedral(8).unwrap();
        assert_eq!(s.effective_dim().effective, 5);
        let v = verdict_real(&s, 1, O, false);
        assert_eq!(v.scope, Scope::AllPoints);
        assert_eq!(v.ambiguity, Ambiguity::UpToSign);
        assert_eq!(v.margin, 1);
        assert!(!s.orbits_connected());
    }

    #[test]
    fn connected_constants() {
        let s = spec(&[(2, 1); 3]);
        assert_eq!(s.effective_dim().effective, 3);
        assert!(s.orbits_connected());
        assert_eq!(verdict_real(&s, 1, O, true).scope, Scope::GenericPoint);
        assert_eq!(verdict_real(&s, 1, O, false).scope, Scope::None);
    }

    #[test]
    fn complex_examples() {
        assert_eq!(effective_dim_complex(&[Block::new(1, 1)]), 1);
        assert_eq!(effective_dim_complex(&[Block::new(2, 1)]), 1);
        let b3 = [Block::new(1, 1), Block::new(1, 1), Block::new(1, 1)];
        assert_eq!(effective_dim_complex(&b3), 3);
        let v = verdict_complex(&b3, 0, ComplexClass::U);
        assert_eq!(v.scope, Scope::AllPoints);
        assert_eq!(v.ambiguity, Ambiguity::UpToPhase);
        assert_eq!(verdict_complex(&b3, 1, ComplexClass::Aff).ambiguity, Ambiguity::Exact);
        assert_eq!(verdict_complex(&b3, 1, ComplexClass::Gl).scope, Scope::AllPoints);
    }

    #[test]
    fn phase_retrieval_examples() {
        let v = verdict_phase_retrieval(8, 4, Gl).unwrap();
        assert_eq!(v.scope, Scope::GenericPoint);
        assert!(v.inclusive);
        assert_eq!(verdict_phase_retrieval(16, 3, O).unwrap().scope, Scope::AllPoints);
        for class in [Gl, Aff, O] {
            assert_eq!(verdict_phase_retrieval(4, 3, class).unwrap().scope, Scope::None);
        }
        assert!(verdict_phase_retrieval(1, 0, Gl).is_err());
    }

    #[test]
    fn phase_retrieval_matches_real_gl_for_even_n() {
        for n in (2..=40).step_by(2) {
            let s = RepresentationSpec::dihedral(n).unwrap();
            for m in 0..=n {
                let pr = verdict_phase_retrieval(n, m, Gl).unwrap();
                let real = verdict_real_auto(&s, m, Gl);
                assert_eq!(pr.scope >= Scope::GenericPoint, real.scope >= Scope::GenericPoint);
            }
        }
    }

    #[test]
    fn cryoem_examples() {
        let v = verdict_cryoem(2, 5, 20, Gl).unwrap();
        assert_eq!(v.effective_dim, 32);
        assert_eq!(v.scope, Scope::GenericPoint);
        let v = verdict_cryoem(0, 1, 0, Aff).unwrap();
        assert_eq!((v.scope, v.ambiguity), (Scope::AllPoints, Ambiguity::Exact));
        assert!(matches!(verdict_cryoem(3, 6, 0, Gl), Err(Error::Precondition(_))));
        for l in 0..=6 {
            for r in 2 * l + 1..=20 {
                let k = RepresentationSpec::cryoem(l, r).unwrap().effective_dim().effective as i64;
                assert_eq!(cryoem_effective_dim(l, r), k, "L={l} R={r}");
            }
        }
    }

    #[test]
    fn gram_examples() {
        assert_eq!(verdict_gram(3, 1, 0, Gl).unwrap().scope, Scope::AllPoints);
        assert_eq!(verdict_gram(3, 1, 0, Gl).unwrap().effective_dim, 1);
        let v = verdict_gram(2, 2, 1, Gl).unwrap();
        assert_eq!(v.effective_dim, 3);
        assert_eq!(v.scope, Scope::AllPoints);
        assert_eq!(verdict_gram(2, 2, 3, Gl).unwrap().scope, Scope::None);
    }

    #[test]
    fn rowsort_examples() {
        assert_eq!(
            verdict_rowsort(2, 3, 2).unwrap(),
            RowsortVerdict { all_points: true, generic_point: true }
        );
        assert_eq!(
            verdict_rowsort(2, 3, 3).unwrap(),
            RowsortVerdict { all_points: false, generic_point: true }
        );
        assert!(verdict_rowsort(4, 1, 0).unwrap().all_points);
        assert!(verdict_rowsort(0, 3, 0).is_err());
    }

    #[test]
    fn verdict_serialises_snake_case() {
        let v = verdict_gram(2, 2, 1, Gl).unwrap();
        let json = serde_json::to_value(v).unwrap();
        assert_eq!(json["scope"], "all_points");
        assert_eq!(json["ambiguity"], "up_to_sign");
    }
}
