//! Library results against independent brute-force computations.

use nalgebra::{DMatrix, DVector};
use orbitlab::invariants::{gram_blocks, power_spectrum};
use orbitlab::priors::{Prior, PriorSet, TransformClass, TranslatedPrior};
use orbitlab::recovery::{orbit_search_grid, recover, GridOptions, Measurement, RecoveryConfig, Status};
use orbitlab::{RepresentationSpec, Signal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Orthogonal Procrustes: the `Q ∈ O(n)` closest to carrying `a` onto `b`.
fn procrustes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = (b * a.transpose()).svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

#[test]
fn recovered_candidates_lie_on_the_orbit() {
    let spec = RepresentationSpec::dihedral(12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        let prior = TranslatedPrior::sample_generic(Prior::coordinate_subspace(12, 2).unwrap(), TransformClass::O, &mut rng);
        let x = Signal::from_flat(&spec, &prior.sample(&mut rng)).unwrap();
        let result = recover(&Measurement::Gram(gram_blocks(&x)), &prior, &RecoveryConfig::default()).unwrap();
        assert_eq!(result.status, Status::UniqueUpToSign);
        for c in &result.candidates {
            for (xb, cb) in x.blocks().iter().zip(c.signal.blocks()) {
                let q = procrustes(xb, cb);
                assert!((&q * xb - cb).norm() <= 1e-8 * x.norm().max(1.0));
            }
            assert!(prior.distance(&c.signal.flatten()) <= 1e-6);
        }
    }
}

/// Distance from `v` to the column span of `basis` by normal equations.
fn span_distance(basis: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let gram = basis.transpose() * basis;
    let coeffs = gram.lu().solve(&(basis.transpose() * v)).unwrap();
    (v - basis * coeffs).norm()
}

/// Every point of the `∏ O(N_ℓ)` orbit of `x ∈ ℝ ⊕ ℝ² ⊕ ℝ` lying on the span,
/// by a fine scan of the angle with golden-section refinement.
fn brute_force_dihedral4(x: &DVector<f64>, basis: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let point = |s0: f64, reflect: bool, s3: f64, t: f64| {
        let (s, c) = t.sin_cos();
        let (u, v) = (x[1], x[2]);
        let (p, q) = if reflect { (c * u + s * v, s * u - c * v) } else { (c * u - s * v, s * u + c * v) };
        DVector::from_vec(vec![s0 * x[0], p, q, s3 * x[3]])
    };
    const STEPS: usize = 20_000;
    let h = std::f64::consts::TAU / STEPS as f64;
    let mut found: Vec<DVector<f64>> = Vec::new();
    for s0 in [1.0, -1.0] {
        for s3 in [1.0, -1.0] {
            for reflect in [false, true] {
                let f = |t: f64| span_distance(basis, &point(s0, reflect, s3, t));
                let vals: Vec<f64> = (0..STEPS).map(|k| f(k as f64 * h)).collect();
                for k in 0..STEPS {
                    let (prev, next) = (vals[(k + STEPS - 1) % STEPS], vals[(k + 1) % STEPS]);
                    if vals[k] > prev || vals[k] > next || vals[k] > 1e-2 {
                        continue;
                    }
                    // golden section on the bracketing interval
                    let (mut a, mut b) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
                    let g = 0.5 * (5f64.sqrt() - 1.0);
                    for _ in 0..200 {
                        let c = b - g * (b - a);
                        let d = a + g * (b - a);
                        if f(c) < f(d) {
                            b = d;
                        } else {
                            a = c;
                        }
                    }
                    let t = 0.5 * (a + b);
                    if f(t) <= 1e-9 {
                        let y = point(s0, reflect, s3, t);
                        if found.iter().all(|z| (z - &y).norm() > 1e-5) {
                            found.push(y);
                        }
                    }
                }
            }
        }
    }
    found
}

#[test]
fn grid_oracle_matches_brute_force_on_dihedral4() {
    let spec = RepresentationSpec::dihedral(4).unwrap();
    assert_eq!(spec.offsets(), vec![0, 1, 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut nontrivial = 0;
    for _ in 0..12 {
        let prior = TranslatedPrior::sample_generic(Prior::coordinate_subspace(4, 2).unwrap(), TransformClass::O, &mut rng);
        let basis = prior.transform().linear().columns(0, 2).into_owned();
        let x = prior.sample(&mut rng);
        let expected = brute_force_dihedral4(&x, &basis);
        let xs = Signal::from_flat(&spec, &x).unwrap();
        let result = orbit_search_grid(&xs, &prior, 1e-6, 1e-3, GridOptions::default()).unwrap();
        assert_eq!(result.candidates.len(), expected.len(), "x = {x}");
        for c in &result.candidates {
            let y = c.signal.flatten();
            assert!(expected.iter().any(|z| (z - &y).norm() <= 1e-4));
        }
        if expected.len() > 2 {
            nontrivial += 1;
        }
    }
    println!("{nontrivial}/12 instances with nontrivial intersections");
}

#[test]
fn power_spectrum_matches_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [1, 2, 5, 8, 13] {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ps = power_spectrum(&x);
        for (k, p) in ps.iter().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                let ang = -std::f64::consts::TAU * (j * k) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            assert!((p - (re * re + im * im)).abs() < 1e-10);
        }
    }
}
