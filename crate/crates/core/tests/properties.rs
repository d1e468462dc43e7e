use nalgebra::{DMatrix, DVector};
use orbitlab::bounds::{verdict_real, verdict_real_auto, Scope};
use orbitlab::experiments::{Outcome, Report, TrialRecord};
use orbitlab::experiments::{ExperimentConfig, ExperimentKind};
use orbitlab::invariants::{gram_blocks, rowsort};
use orbitlab::priors::TransformClass;
use orbitlab::recovery::{canonical_factor, same_up_to_sign};
use orbitlab::{AmbiguityElement, RepresentationSpec, Signal};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec_strategy() -> impl Strategy<Value = RepresentationSpec> {
    prop::collection::vec((1usize..5, 1usize..5), 1..5)
        .prop_map(|pairs| RepresentationSpec::from_pairs(&pairs).unwrap())
}

fn class_strategy() -> impl Strategy<Value = TransformClass> {
    prop_oneof![
        Just(TransformClass::Gl),
        Just(TransformClass::Aff),
        Just(TransformClass::O)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn all_points_implies_generic(spec in spec_strategy(), m in 0usize..12, class in class_strategy(), connected: bool) {
        let v = verdict_real(&spec, m, class, connected);
        let k = v.effective_dim;
        if v.scope == Scope::AllPoints {
            prop_assert!(k > v.generic_threshold && k > v.all_threshold);
        }
        prop_assert!(v.all_threshold >= v.generic_threshold);
    }

    #[test]
    fn scope_shrinks_as_prior_grows(spec in spec_strategy(), m in 0usize..12, class in class_strategy()) {
        let a = verdict_real_auto(&spec, m, class);
        let b = verdict_real_auto(&spec, m + 1, class);
        prop_assert!(b.scope <= a.scope);
    }

    #[test]
    fn gram_blocks_are_invariant(spec in spec_strategy(), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Signal::random(&spec, &mut rng);
        let h = AmbiguityElement::haar(&spec, &mut rng);
        let y = h.act(&x).unwrap();
        prop_assert!((y.norm() - x.norm()).abs() <= 1e-12 * x.norm().max(1.0));
        let d = gram_blocks(&x).distance(&gram_blocks(&y));
        prop_assert!(d <= 1e-10 * gram_blocks(&x).frobenius_norm().max(1.0));
    }

    #[test]
    fn canonical_factor_reproduces_the_gram(spec in spec_strategy(), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Signal::random(&spec, &mut rng);
        let b = gram_blocks(&x);
        let xhat = canonical_factor(&b).unwrap();
        prop_assert!(gram_blocks(&xhat).distance(&b) <= 1e-9 * b.frobenius_norm().max(1.0));
        // the factor depends on the orbit only
        let h = AmbiguityElement::haar(&spec, &mut rng);
        let again = canonical_factor(&gram_blocks(&h.act(&x).unwrap())).unwrap();
        prop_assert!(again.distance(&xhat) <= 1e-6 * x.norm().max(1.0));
    }

    #[test]
    fn comparator_is_sign_symmetric(spec in spec_strategy(), seed: u64, tol in 1e-9f64..1e-2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Signal::random(&spec, &mut rng);
        let y = Signal::random(&spec, &mut rng);
        prop_assert!(same_up_to_sign(&x, &x.scale(-1.0), tol));
        let h = AmbiguityElement::haar(&spec, &mut rng);
        prop_assert!(same_up_to_sign(&x.scale(-1.0), &x, tol));
        prop_assert!(!same_up_to_sign(&x, &y, 1e-9));
        // equal norms make the comparison symmetric
        prop_assert_eq!(same_up_to_sign(&x, &h.act(&x).unwrap(), tol), same_up_to_sign(&h.act(&x).unwrap(), &x, tol));
    }

    #[test]
    fn rowsort_ignores_row_permutations(d in 1usize..4, n in 1usize..6, seed: u64) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(d, n, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let mut y = x.clone();
        for r in 0..d {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            for j in 0..n {
                y[(r, j)] = x[(r, p[j])];
            }
        }
        prop_assert_eq!(rowsort(&x), rowsort(&y));
    }

    #[test]
    fn report_aggregates_survive_round_trip(
        rows in prop::collection::vec((0u8..4, prop::option::of(any::<bool>()), prop::option::of(0.0f64..1.0)), 0..40)
    ) {
        let cfg = ExperimentConfig::default_for(ExperimentKind::Separator);
        let trials: Vec<TrialRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, (g, s, e))| {
                let mut r = TrialRecord::new(i, i as u64, format!("g{g}"), Outcome::Pass);
                r.success = *s;
                r.error = *e;
                r
            })
            .collect();
        let report = Report::new(&cfg, trials);
        let back = Report::from_json(&report.to_json()).unwrap();
        prop_assert_eq!(back, report);
    }
}

#[test]
fn flatten_round_trips() {
    let spec = RepresentationSpec::dihedral(9).unwrap();
    let flat = DVector::from_fn(spec.dim(), |i, _| i as f64);
    let x = Signal::from_flat(&spec, &flat).unwrap();
    assert_eq!(x.flatten(), flat);
}
