//! Group-invariant measurements: Gram blocks, second moments, power spectra
//! and rowsort.
//!
//! The DFT convention is the unnormalised forward transform
//! `x̂[k] = Σ_j x[j] e^{−2πi jk/N}`, so Parseval reads `Σ_k |x̂[k]|² = N‖x‖²`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};
use crate::repr::{data_action, DataGroupSpec, GroupElement, RepresentationSpec, Signal};

/// Relative tolerance below which an eigenvalue of a Gram block counts as 0.
pub const PSD_CLIP: f64 = 1e-10;

/// The tuple `(B_1, …, B_L)` with `B_ℓ = X_ℓᵀ X_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlocks {
    spec: RepresentationSpec,
    blocks: Vec<DMatrix<f64>>,
}

impl GramBlocks {
    /// Validates shapes, symmetry (1e−12 relative) and positive
    /// semidefiniteness (eigenvalues ≥ −1e−10·‖B‖).
    pub fn new(spec: RepresentationSpec, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.len() != spec.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} Gram blocks for {} isotypic blocks",
                blocks.len(),
                spec.len()
            )));
        }
        for (l, (b, blk)) in blocks.iter().zip(spec.blocks()).enumerate() {
            if b.shape() != (blk.mult, blk.mult) {
                return Err(Error::ShapeMismatch(format!(
                    "Gram block {l} is {:?}, expected {}×{}",
                    b.shape(),
                    blk.mult,
                    blk.mult
                )));
            }
            let scale = b.norm().max(1.0);
            if (b - b.transpose()).amax() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!("Gram block {l} is not symmetric")));
            }
            let min_eig = b.clone().symmetric_eigenvalues().min();
            if min_eig < -PSD_CLIP * b.norm() {
                return Err(Error::InvalidArgument(format!(
                    "Gram block {l} is not positive semidefinite (eigenvalue {min_eig:.3e})"
                )));
            }
        }
        Ok(GramBlocks { spec, blocks })
    }

    /// Symmetrises each block and projects it onto the PSD cone, zeroing
    /// eigenvalues below `PSD_CLIP·‖B‖`.
    pub fn from_symmetric_clipped(
        spec: RepresentationSpec,
        blocks: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let blocks = blocks.into_iter().map(|b| clip_psd(&b)).collect();
        Self::new(spec, blocks)
    }

    pub fn spec(&self) -> &RepresentationSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &GramBlocks) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// `(B + Bᵀ)/2` projected onto the PSD cone.
pub fn clip_psd(b: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (b + b.transpose()) * 0.5;
    let norm = sym.norm();
    let eig = sym.symmetric_eigen();
    let vals = eig
        .eigenvalues
        .map(|v| if v <= PSD_CLIP * norm { 0.0 } else { v });
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    (&out + out.transpose()) * 0.5
}

pub fn gram_blocks(x: &Signal) -> GramBlocks {
    GramBlocks {
        spec: x.spec().clone(),
        blocks: x.blocks().iter().map(|m| m.transpose() * m).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondMomentEstimate {
    pub matrix: DMatrix<f64>,
    pub n: usize,
    pub sigma: f64,
}

impl SecondMomentEstimate {
    pub fn exact(matrix: DMatrix<f64>) -> Self {
        SecondMomentEstimate {
            matrix,
            n: 0,
            sigma: 0.0,
        }
    }
}

/// `(1/n) Σ y_i y_iᵀ − σ² I` with `y_i = g_i·x + ε_i`, `g_i` uniform on the
/// group and `ε_i ~ N(0, σ² I)`.
pub fn empirical_second_moment<R: Rng + ?Sized>(
    group: &DataGroupSpec,
    x: &DVector<f64>,
    n: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<SecondMomentEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise level {sigma} must be ≥ 0")));
    }
    let dim = group.ambient_dim();
    if x.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "signal of length {} for ambient dimension {dim}",
            x.len()
        )));
    }
    // small finite groups: precompute the orbit once
    let orbit: Option<Vec<DVector<f64>>> = match group.order() {
        Some(order) if order <= 4096 => Some(
            group
                .elements()?
                .iter()
                .map(|g| data_action(group, g, x))
                .collect::<Result<_>>()?,
        ),
        _ => None,
    };
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    let mut y = DVector::<f64>::zeros(dim);
    for _ in 0..n {
        match &orbit {
            Some(orbit) => y.copy_from(&orbit[rng.random_range(0..orbit.len())]),
            None => {
                let g = group.sample_element(rng);
                y.copy_from(&data_action(group, &g, x)?);
            }
        }
        if sigma > 0.0 {
            for v in y.iter_mut() {
                *v += noise.sample(rng);
            }
        }
        acc.ger(1.0, &y, &y, 1.0);
    }
    acc /= n as f64;
    for i in 0..dim {
        acc[(i, i)] -= sigma * sigma;
    }
    let matrix = (&acc + acc.transpose()) * 0.5;
    Ok(SecondMomentEstimate { matrix, n, sigma })
}

/// `E_g[(g·x)(g·x)ᵀ]`: an average over all elements for finite groups, the
/// Schur-orthogonality closed form for `AbstractSo3`.
pub fn exact_second_moment(group: &DataGroupSpec, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let dim = group.ambient_dim();
    if x.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "signal of length {} for ambient dimension {dim}",
            x.len()
        )));
    }
    if let DataGroupSpec::AbstractSo3 { .. } = group {
        let spec = group.isotypic_spec()?;
        let gram = gram_blocks(&Signal::from_flat(&spec, x)?);
        let mut out = DMatrix::zeros(dim, dim);
        for ((blk, off), b) in spec.blocks().iter().zip(spec.offsets()).zip(gram.blocks()) {
            let n = blk.dim;
            for r in 0..blk.mult {
                for s in 0..blk.mult {
                    for i in 0..n {
                        out[(off + r * n + i, off + s * n + i)] = b[(r, s)] / n as f64;
                    }
                }
            }
        }
        return Ok(out);
    }
    let elements = group.elements()?;
    let mut acc = DMatrix::zeros(dim, dim);
    for g in &elements {
        let y = data_action(group, g, x)?;
        acc.ger(1.0, &y, &y, 1.0);
    }
    Ok(acc / elements.len() as f64)
}

/// Reads the Gram blocks off a second moment: conjugate into isotypic
/// coordinates and sum the `N_ℓ` diagonal sub-blocks of each isotypic block.
pub fn second_moment_to_gram(
    group: &DataGroupSpec,
    est: &SecondMomentEstimate,
) -> Result<GramBlocks> {
    let spec = group.isotypic_spec()?;
    let basis = group.isotypic_basis()?;
    let dim = spec.dim();
    if est.matrix.shape() != (dim, dim) {
        return Err(Error::ShapeMismatch(format!(
            "second moment is {:?}, expected {dim}×{dim}",
            est.matrix.shape()
        )));
    }
    let iso = basis.transpose() * &est.matrix * &basis;
    let mut blocks = Vec::with_capacity(spec.len());
    for (blk, off) in spec.blocks().iter().zip(spec.offsets()) {
        let n = blk.dim;
        let b = DMatrix::from_fn(blk.mult, blk.mult, |r, s| {
            (0..n)
                .map(|i| iso[(off + r * n + i, off + s * n + i)])
                .sum::<f64>()
        });
        blocks.push(b);
    }
    GramBlocks::from_symmetric_clipped(spec, blocks)
}

/// Squared moduli of the unnormalised DFT.
pub fn power_spectrum(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(x.len()).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr()).collect()
}

/// Sorts each row ascending, independently.
pub fn rowsort(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let mut vals: Vec<f64> = row.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        for (dst, v) in row.iter_mut().zip(vals) {
            *dst = v;
        }
    }
    out
}

/// Rowsort of a row-major flattened `d × n` matrix.
pub fn rowsort_flat(x: &DVector<f64>, d: usize, n: usize) -> Result<DVector<f64>> {
    if x.len() != d * n {
        return Err(Error::ShapeMismatch(format!("length {} is not {d}×{n}", x.len())));
    }
    let m = DMatrix::from_row_slice(d, n, x.as_slice());
    let s = rowsort(&m);
    Ok(DVector::from_iterator(d * n, s.transpose().iter().copied()))
}

/// The group elements as ambient matrices, for diagnostics.
pub fn element_matrix(group: &DataGroupSpec, g: &GroupElement) -> Result<DMatrix<f64>> {
    let n = group.ambient_dim();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        m.set_column(j, &data_action(group, g, &e)?);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::{AmbiguityElement, RepresentationSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gram_examples() {
        let spec = RepresentationSpec::from_pairs(&[(2, 1), (3, 2)]).unwrap();
        let g = gram_blocks(&Signal::zeros(&spec));
        assert!(g.blocks().iter().all(|b| b.amax() == 0.0));

        let spec = RepresentationSpec::from_pairs(&[(2, 1)]).unwrap();
        let x = Signal::new(spec, vec![DMatrix::from_column_slice(2, 1, &[3.0, 4.0])]).unwrap();
        assert_eq!(gram_blocks(&x).blocks()[0][(0, 0)], 25.0);
    }

    #[test]
    fn gram_is_ambiguity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = RepresentationSpec::from_pairs(&[(1, 2), (2, 3), (3, 1), (4, 2)]).unwrap();
        for _ in 0..100 {
            let x = Signal::random(&spec, &mut rng);
            let h = AmbiguityElement::haar(&spec, &mut rng);
            let d = gram_blocks(&h.act(&x).unwrap()).distance(&gram_blocks(&x));
            assert!(d < 1e-10, "{d}");
        }
    }

    #[test]
    fn gram_blocks_validation() {
        let spec = RepresentationSpec::from_pairs(&[(2, 2)]).unwrap();
        let not_sym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(GramBlocks::new(spec.clone(), vec![not_sym]).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(GramBlocks::new(spec.clone(), vec![indefinite.clone()]).is_err());
        let clipped = GramBlocks::from_symmetric_clipped(spec, vec![indefinite]).unwrap();
        assert!((clipped.blocks()[0][(0, 0)] - 1.0).abs() < 1e-12);
        assert!(clipped.blocks()[0][(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn zero_signal_zero_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = DataGroupSpec::Cyclic { n: 6 };
        let est = empirical_second_moment(&g, &DVector::zeros(6), 100, 0.0, &mut rng).unwrap();
        assert_eq!(est.matrix.amax(), 0.0);
        let gram = second_moment_to_gram(&g, &SecondMomentEstimate::exact(DMatrix::zeros(6, 6)))
            .unwrap();
        assert!(gram.blocks().iter().all(|b| b.amax() == 0.0));
    }

    #[test]
    fn empirical_rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = DataGroupSpec::Cyclic { n: 4 };
        let x = DVector::zeros(4);
        assert!(empirical_second_moment(&g, &x, 0, 0.0, &mut rng).is_err());
        assert!(empirical_second_moment(&g, &x, 10, -1.0, &mut rng).is_err());
        assert!(empirical_second_moment(&g, &DVector::zeros(3), 10, 0.0, &mut rng).is_err());
    }

    #[test]
    fn no_isotypic_basis_for_sign_group() {
        let g = DataGroupSpec::SignChange { n: 3 };
        let est = SecondMomentEstimate::exact(DMatrix::identity(3, 3));
        assert!(matches!(
            second_moment_to_gram(&g, &est),
            Err(Error::NoIsotypicBasis(_))
        ));
    }

    #[test]
    fn power_spectrum_examples() {
        let mut delta = vec![0.0; 7];
        delta[0] = 1.0;
        assert!(power_spectrum(&delta).iter().all(|&p| (p - 1.0).abs() < 1e-12));
        let ones = vec![1.0; 5];
        let p = power_spectrum(&ones);
        assert!((p[0] - 25.0).abs() < 1e-12);
        assert!(p[1..].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn rowsort_examples() {
        let x = DMatrix::from_row_slice(2, 3, &[3.0, 1.0, 2.0, 6.0, 5.0, 4.0]);
        let s = rowsort(&x);
        assert_eq!(s, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert_eq!(rowsort(&s), s);
        let flat = DVector::from_vec(vec![3.0, 1.0, 2.0, 6.0, 5.0, 4.0]);
        assert_eq!(
            rowsort_flat(&flat, 2, 3).unwrap().as_slice(),
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        );
    }

    #[test]
    fn so3_closed_form_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = DataGroupSpec::AbstractSo3 { bandlimit: 1, radial: 2 };
        let x = DVector::from_fn(8, |_, _| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng));
        let exact = exact_second_moment(&g, &x).unwrap();
        let est = empirical_second_moment(&g, &x, 20_000, 0.0, &mut rng).unwrap();
        let rel = (&est.matrix - &exact).norm() / exact.norm();
        assert!(rel < 0.05, "{rel}");
        let spec = g.isotypic_spec().unwrap();
        let gram = second_moment_to_gram(&g, &SecondMomentEstimate::exact(exact)).unwrap();
        let direct = gram_blocks(&Signal::from_flat(&spec, &x).unwrap());
        assert!(gram.distance(&direct) < 1e-10);
    }
}
