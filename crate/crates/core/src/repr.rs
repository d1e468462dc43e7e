//! Orthogonal representations described by their isotypic decomposition.
//!
//! A representation `V = ⊕ V_ℓ^{⊕R_ℓ}` is stored as a list of blocks
//! `(N_ℓ, R_ℓ)`: irreducible dimension and multiplicity. A signal in `V` is a
//! tuple of coefficient matrices `X_ℓ` of shape `N_ℓ × R_ℓ`, and the
//! ambiguity group of the second moment is `H = ∏ O(N_ℓ)`, acting on each
//! block by left multiplication.
//!
//! The flat layout used to bridge to ambient-space priors is block-major:
//! block `ℓ` occupies `N_ℓ·R_ℓ` consecutive entries, stored column by column
//! (entry `(i, r)` of `X_ℓ` sits at `offset_ℓ + r·N_ℓ + i`).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One isotypic block: `dim` is the irreducible dimension `N_ℓ`, `mult` the
/// multiplicity `R_ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub dim: usize,
    pub mult: usize,
}

impl Block {
    pub fn new(dim: usize, mult: usize) -> Self {
        Block { dim, mult }
    }

    /// Dimension of a generic `O(N_ℓ)`-orbit in `V_ℓ^{⊕R_ℓ}`.
    pub fn orbit_dim(&self) -> usize {
        dim_orthogonal(self.dim) - dim_orthogonal(self.dim.saturating_sub(self.mult))
    }
}

/// `dim O(m) = m(m−1)/2`; `m = 0` gives 0.
pub fn dim_orthogonal(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// `dim U(m) = m²` (real dimension).
pub fn dim_unitary(m: usize) -> usize {
    m * m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectiveDim {
    /// `dim V`
    pub ambient: usize,
    /// `k(H)`, the maximal orbit dimension
    pub orbit: usize,
    /// `K = dim V − k(H)`
    pub effective: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, usize)>", into = "Vec<(usize, usize)>")]
pub struct RepresentationSpec {
    blocks: Vec<Block>,
}

impl TryFrom<Vec<(usize, usize)>> for RepresentationSpec {
    type Error = Error;

    fn try_from(pairs: Vec<(usize, usize)>) -> Result<Self> {
        RepresentationSpec::from_pairs(&pairs)
    }
}

impl From<RepresentationSpec> for Vec<(usize, usize)> {
    fn from(spec: RepresentationSpec) -> Self {
        spec.blocks.iter().map(|b| (b.dim, b.mult)).collect()
    }
}

impl RepresentationSpec {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidSpec("no blocks".into()));
        }
        if let Some((i, b)) = blocks
            .iter()
            .enumerate()
            .find(|(_, b)| b.dim == 0 || b.mult == 0)
        {
            return Err(Error::InvalidSpec(format!(
                "block {i} has non-positive size ({}, {})",
                b.dim, b.mult
            )));
        }
        Ok(RepresentationSpec { blocks })
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(n, r)| Block::new(n, r)).collect())
    }

    /// `L+1` blocks `(2ℓ+1, R)` for `ℓ = 0..=L`: the bandlimited
    /// spherical-harmonic model with `R` radial samples.
    pub fn cryoem(bandlimit: usize, radial: usize) -> Result<Self> {
        if radial == 0 {
            return Err(Error::InvalidSpec("cryo-EM model needs R ≥ 1".into()));
        }
        Self::new((0..=bandlimit).map(|l| Block::new(2 * l + 1, radial)).collect())
    }

    /// Real irreducible decomposition of `ℝ^N` under the dihedral (or
    /// cyclic) group: the trivial block, one plane per frequency
    /// `1..⌈N/2⌉`, and the alternating block when `N` is even.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpec(format!(
                "dihedral decomposition needs N ≥ 2, got {n}"
            )));
        }
        let mut blocks = vec![Block::new(1, 1)];
        let planes = if n % 2 == 0 { n / 2 - 1 } else { (n - 1) / 2 };
        blocks.extend(std::iter::repeat_n(Block::new(2, 1), planes));
        if n % 2 == 0 {
            blocks.push(Block::new(1, 1));
        }
        Self::new(blocks)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim * b.mult).sum()
    }

    /// Start of each block in the flat layout.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = acc;
                acc += b.dim * b.mult;
                o
            })
            .collect()
    }

    pub fn effective_dim(&self) -> EffectiveDim {
        let ambient = self.dim();
        let orbit: usize = self.blocks.iter().map(Block::orbit_dim).sum();
        EffectiveDim {
            ambient,
            orbit,
            effective: ambient - orbit,
        }
    }

    /// Generic `H`-orbits are connected exactly when every factor acts with a
    /// nontrivial stabiliser, i.e. `N_ℓ > R_ℓ` for all blocks. For
    /// multiplicity one this is the condition `N_ℓ > 1`.
    pub fn orbits_connected(&self) -> bool {
        self.blocks.iter().all(|b| b.dim > b.mult)
    }
}

pub fn effective_dim(spec: &RepresentationSpec) -> EffectiveDim {
    spec.effective_dim()
}

pub fn cryoem_spec(bandlimit: usize, radial: usize) -> Result<RepresentationSpec> {
    RepresentationSpec::cryoem(bandlimit, radial)
}

pub fn dihedral_decomposition(n: usize) -> Result<RepresentationSpec> {
    RepresentationSpec::dihedral(n)
}

/// A vector of `V` stored blockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    spec: RepresentationSpec,
    blocks: Vec<DMatrix<f64>>,
}

impl Signal {
    pub fn new(spec: RepresentationSpec, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.len() != spec.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficient blocks for a spec with {} blocks",
                blocks.len(),
                spec.len()
            )));
        }
        for (i, (m, b)) in blocks.iter().zip(spec.blocks()).enumerate() {
            if m.shape() != (b.dim, b.mult) {
                return Err(Error::ShapeMismatch(format!(
                    "block {i} is {:?}, expected ({}, {})",
                    m.shape(),
                    b.dim,
                    b.mult
                )));
            }
        }
        Ok(Signal { spec, blocks })
    }

    pub fn zeros(spec: &RepresentationSpec) -> Self {
        let blocks = spec
            .blocks()
            .iter()
            .map(|b| DMatrix::zeros(b.dim, b.mult))
            .collect();
        Signal {
            spec: spec.clone(),
            blocks,
        }
    }

    /// I.i.d. standard normal coefficients.
    pub fn random<R: Rng + ?Sized>(spec: &RepresentationSpec, rng: &mut R) -> Self {
        let blocks = spec
            .blocks()
            .iter()
            .map(|b| DMatrix::from_fn(b.dim, b.mult, |_, _| rng.sample(StandardNormal)))
            .collect();
        Signal {
            spec: spec.clone(),
            blocks,
        }
    }

    pub fn from_flat(spec: &RepresentationSpec, flat: &DVector<f64>) -> Result<Self> {
        if flat.len() != spec.dim() {
            return Err(Error::ShapeMismatch(format!(
                "flat vector of length {} for dim V = {}",
                flat.len(),
                spec.dim()
            )));
        }
        let mut blocks = Vec::with_capacity(spec.len());
        let mut at = 0;
        for b in spec.blocks() {
            let len = b.dim * b.mult;
            blocks.push(DMatrix::from_column_slice(
                b.dim,
                b.mult,
                &flat.as_slice()[at..at + len],
            ));
            at += len;
        }
        Ok(Signal {
            spec: spec.clone(),
            blocks,
        })
    }

    pub fn flatten(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.spec.dim());
        for m in &self.blocks {
            out.extend_from_slice(m.as_slice());
        }
        DVector::from_vec(out)
    }

    pub fn spec(&self) -> &RepresentationSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, l: usize) -> &DMatrix<f64> {
        &self.blocks[l]
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|m| m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, s: f64) -> Signal {
        Signal {
            spec: self.spec.clone(),
            blocks: self.blocks.iter().map(|m| m * s).collect(),
        }
    }

    /// Euclidean distance of the flattened coefficients.
    pub fn distance(&self, other: &Signal) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// An element `(Q_1, …, Q_L)` of `∏ O(N_ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityElement {
    factors: Vec<DMatrix<f64>>,
}

pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// Largest entry of `QᵀQ − I`.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let n = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(n, n)).amax()
}

impl AmbiguityElement {
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        for (i, q) in factors.iter().enumerate() {
            if !q.is_square() {
                return Err(Error::ShapeMismatch(format!("factor {i} is not square")));
            }
            let defect = orthogonality_defect(q);
            if defect > 1e-10 {
                return Err(Error::InvalidElement(format!(
                    "factor {i} is not orthogonal (defect {defect:.3e})"
                )));
            }
        }
        Ok(AmbiguityElement { factors })
    }

    /// Skips the orthogonality check; callers guarantee it.
    pub(crate) fn from_factors_unchecked(factors: Vec<DMatrix<f64>>) -> Self {
        AmbiguityElement { factors }
    }

    pub fn identity(spec: &RepresentationSpec) -> Self {
        AmbiguityElement {
            factors: spec
                .blocks()
                .iter()
                .map(|b| DMatrix::identity(b.dim, b.dim))
                .collect(),
        }
    }

    /// Haar-random element of `∏ O(N_ℓ)`.
    pub fn haar<R: Rng + ?Sized>(spec: &RepresentationSpec, rng: &mut R) -> Self {
        AmbiguityElement {
            factors: spec
                .blocks()
                .iter()
                .map(|b| haar_orthogonal(b.dim, rng))
                .collect(),
        }
    }

    /// Haar-random element of `∏ SO(N_ℓ)`.
    pub fn haar_special<R: Rng + ?Sized>(spec: &RepresentationSpec, rng: &mut R) -> Self {
        AmbiguityElement {
            factors: spec
                .blocks()
                .iter()
                .map(|b| haar_special_orthogonal(b.dim, rng))
                .collect(),
        }
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    /// `self · other`: `other` acts first.
    pub fn compose(&self, other: &AmbiguityElement) -> Result<AmbiguityElement> {
        if self.factors.len() != other.factors.len() {
            return Err(Error::ShapeMismatch("factor counts differ".into()));
        }
        self.factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| {
                if a.shape() != b.shape() {
                    Err(Error::ShapeMismatch("factor shapes differ".into()))
                } else {
                    Ok(a * b)
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(|factors| AmbiguityElement { factors })
    }

    pub fn inverse(&self) -> AmbiguityElement {
        AmbiguityElement {
            factors: self.factors.iter().map(|q| q.transpose()).collect(),
        }
    }

    pub fn act(&self, x: &Signal) -> Result<Signal> {
        act(self, x)
    }

    pub fn max_orthogonality_defect(&self) -> f64 {
        self.factors
            .iter()
            .map(orthogonality_defect)
            .fold(0.0, f64::max)
    }
}

/// `h · x = (Q_1 X_1, …, Q_L X_L)`.
pub fn act(h: &AmbiguityElement, x: &Signal) -> Result<Signal> {
    if h.factors.len() != x.blocks.len() {
        return Err(Error::ShapeMismatch(format!(
            "element has {} factors, signal has {} blocks",
            h.factors.len(),
            x.blocks.len()
        )));
    }
    let mut blocks = Vec::with_capacity(x.blocks.len());
    for (i, (q, m)) in h.factors.iter().zip(&x.blocks).enumerate() {
        if q.ncols() != m.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "factor {i} is {}×{} but block has {} rows",
                q.nrows(),
                q.ncols(),
                m.nrows()
            )));
        }
        blocks.push(q * m);
    }
    Ok(Signal {
        spec: x.spec.clone(),
        blocks,
    })
}

/// Haar-distributed `O(m)` matrix: QR of a Gaussian matrix with the signs of
/// `diag(R)` absorbed into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(m, m, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed `SO(m)` matrix: an `O(m)` draw with the first column
/// negated when the determinant is `−1`.
pub fn haar_special_orthogonal<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let mut q = haar_orthogonal(m, rng);
    if m > 0 && q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

pub fn rotation2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Reflection `rotation2(θ)·diag(1, −1)`.
pub fn reflection2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
}

/// The group `G` that acts on the data, together with its ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataGroupSpec {
    /// `ℤ_N` acting on `ℝ^N` by circular shifts.
    Cyclic { n: usize },
    /// `D_{2N}`: circular shifts and reversal.
    Dihedral { n: usize },
    /// `{±1}^N` acting coordinate-wise.
    SignChange { n: usize },
    /// `S_n` permuting the columns of a `d × n` matrix (row-major ambient).
    RowPermutation { d: usize, n: usize },
    /// `∏ SO(2ℓ+1)` acting on the coefficient blocks of
    /// `⊕_{ℓ≤L} V_ℓ^{⊕R}`; stands in for the rotation action at the level
    /// of second moments.
    AbstractSo3 { bandlimit: usize, radial: usize },
}

/// One element of a [`DataGroupSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Shift(usize),
    ShiftReflect { shift: usize, reflect: bool },
    Signs(Vec<i8>),
    /// `y[:, j] = x[:, perm[j]]` (0-based).
    Permutation(Vec<usize>),
    Rotation(AmbiguityElement),
}

impl DataGroupSpec {
    pub fn ambient_dim(&self) -> usize {
        match *self {
            DataGroupSpec::Cyclic { n } | DataGroupSpec::Dihedral { n } => n,
            DataGroupSpec::SignChange { n } => n,
            DataGroupSpec::RowPermutation { d, n } => d * n,
            DataGroupSpec::AbstractSo3 { bandlimit, radial } => radial * (bandlimit + 1).pow(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DataGroupSpec::Cyclic { n } | DataGroupSpec::Dihedral { n } => n >= 2,
            DataGroupSpec::SignChange { n } => n >= 1,
            DataGroupSpec::RowPermutation { d, n } => d >= 1 && n >= 1,
            DataGroupSpec::AbstractSo3 { radial, .. } => radial >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("inconsistent group parameters {self:?}")))
        }
    }

    pub fn name(&self) -> String {
        match *self {
            DataGroupSpec::Cyclic { n } => format!("Cyclic({n})"),
            DataGroupSpec::Dihedral { n } => format!("Dihedral({n})"),
            DataGroupSpec::SignChange { n } => format!("SignChange({n})"),
            DataGroupSpec::RowPermutation { d, n } => format!("RowPermutation({d},{n})"),
            DataGroupSpec::AbstractSo3 { bandlimit, radial } => {
                format!("AbstractSO3({bandlimit},{radial})")
            }
        }
    }

    /// Isotypic decomposition of the ambient space, for groups that have a
    /// registered basis.
    pub fn isotypic_spec(&self) -> Result<RepresentationSpec> {
        match *self {
            DataGroupSpec::Cyclic { n } | DataGroupSpec::Dihedral { n } => {
                RepresentationSpec::dihedral(n)
            }
            DataGroupSpec::AbstractSo3 { bandlimit, radial } => {
                RepresentationSpec::cryoem(bandlimit, radial)
            }
            _ => Err(Error::NoIsotypicBasis(self.name())),
        }
    }

    /// Orthogonal change of basis `F` with ambient `x = F · flatten(X)`.
    pub fn isotypic_basis(&self) -> Result<DMatrix<f64>> {
        match *self {
            DataGroupSpec::Cyclic { n } | DataGroupSpec::Dihedral { n } => {
                Ok(real_fourier_basis(n))
            }
            DataGroupSpec::AbstractSo3 { .. } => {
                let d = self.ambient_dim();
                Ok(DMatrix::identity(d, d))
            }
            _ => Err(Error::NoIsotypicBasis(self.name())),
        }
    }

    /// Number of elements for finite groups.
    pub fn order(&self) -> Option<u128> {
        match *self {
            DataGroupSpec::Cyclic { n } => Some(n as u128),
            DataGroupSpec::Dihedral { n } => Some(2 * n as u128),
            DataGroupSpec::SignChange { n } => 1u128.checked_shl(n as u32),
            DataGroupSpec::RowPermutation { n, .. } => {
                (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k))
            }
            DataGroupSpec::AbstractSo3 { .. } => None,
        }
    }

    /// All elements of a finite group.
    pub fn elements(&self) -> Result<Vec<GroupElement>> {
        match *self {
            DataGroupSpec::Cyclic { n } => Ok((0..n).map(GroupElement::Shift).collect()),
            DataGroupSpec::Dihedral { n } => Ok((0..n)
                .flat_map(|shift| {
                    [false, true]
                        .into_iter()
                        .map(move |reflect| GroupElement::ShiftReflect { shift, reflect })
                })
                .collect()),
            DataGroupSpec::SignChange { n } => {
                if n > 24 {
                    return Err(Error::BudgetExceeded {
                        needed: 1u128 << n,
                        budget: 1 << 24,
                    });
                }
                Ok((0..1usize << n)
                    .map(|mask| {
                        GroupElement::Signs(
                            (0..n)
                                .map(|i| if mask >> i & 1 == 1 { -1 } else { 1 })
                                .collect(),
                        )
                    })
                    .collect())
            }
            DataGroupSpec::RowPermutation { n, .. } => {
                if n > 10 {
                    return Err(Error::BudgetExceeded {
                        needed: self.order().unwrap_or(u128::MAX),
                        budget: 3_628_800,
                    });
                }
                Ok(permutations(n).into_iter().map(GroupElement::Permutation).collect())
            }
            DataGroupSpec::AbstractSo3 { .. } => Err(Error::InvalidArgument(
                "AbstractSO3 is not a finite group".into(),
            )),
        }
    }

    /// Uniform (Haar) random element.
    pub fn sample_element<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        match *self {
            DataGroupSpec::Cyclic { n } => GroupElement::Shift(rng.random_range(0..n)),
            DataGroupSpec::Dihedral { n } => GroupElement::ShiftReflect {
                shift: rng.random_range(0..n),
                reflect: rng.random_bool(0.5),
            },
            DataGroupSpec::SignChange { n } => GroupElement::Signs(
                (0..n).map(|_| if rng.random_bool(0.5) { -1 } else { 1 }).collect(),
            ),
            DataGroupSpec::RowPermutation { n, .. } => {
                let mut p: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    let j = rng.random_range(0..=i);
                    p.swap(i, j);
                }
                GroupElement::Permutation(p)
            }
            DataGroupSpec::AbstractSo3 { bandlimit, radial } => {
                let spec = RepresentationSpec::cryoem(bandlimit, radial)
                    .expect("validated cryo-EM parameters");
                GroupElement::Rotation(AmbiguityElement::haar_special(&spec, rng))
            }
        }
    }

    pub fn act(&self, g: &GroupElement, x: &DVector<f64>) -> Result<DVector<f64>> {
        data_action(self, g, x)
    }
}

/// Action of a data-group element on an ambient vector.
pub fn data_action(
    group: &DataGroupSpec,
    g: &GroupElement,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let dim = group.ambient_dim();
    if x.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {} for {} (ambient {dim})",
            x.len(),
            group.name()
        )));
    }
    match (group, g) {
        (DataGroupSpec::Cyclic { n }, GroupElement::Shift(s)) if s < n => Ok(shift(x, *s)),
        (DataGroupSpec::Dihedral { n }, GroupElement::Shift(s)) if s < n => Ok(shift(x, *s)),
        (DataGroupSpec::Dihedral { n }, GroupElement::ShiftReflect { shift: s, reflect })
            if s < n =>
        {
            let y = shift(x, *s);
            if *reflect {
                Ok(DVector::from_fn(*n, |i, _| y[(n - i) % n]))
            } else {
                Ok(y)
            }
        }
        (DataGroupSpec::SignChange { n }, GroupElement::Signs(signs))
            if signs.len() == *n && signs.iter().all(|&s| s == 1 || s == -1) =>
        {
            Ok(DVector::from_fn(*n, |i, _| f64::from(signs[i]) * x[i]))
        }
        (DataGroupSpec::RowPermutation { d, n }, GroupElement::Permutation(p))
            if is_permutation(p, *n) =>
        {
            let mut y = DVector::zeros(d * n);
            for r in 0..*d {
                for j in 0..*n {
                    y[r * n + j] = x[r * n + p[j]];
                }
            }
            Ok(y)
        }
        (DataGroupSpec::AbstractSo3 { bandlimit, radial }, GroupElement::Rotation(h)) => {
            let spec = RepresentationSpec::cryoem(*bandlimit, *radial)?;
            let sig = Signal::from_flat(&spec, x)?;
            Ok(act(h, &sig)?.flatten())
        }
        _ => Err(Error::InvalidElement(format!(
            "{g:?} is not an element of {}",
            group.name()
        ))),
    }
}

/// `y[i] = x[(i − s) mod N]`.
fn shift(x: &DVector<f64>, s: usize) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(n, |i, _| x[(i + n - s % n) % n])
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    if p.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    p.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
        out.push(p.clone());
    }
    out
}

/// Orthonormal real Fourier basis of `ℝ^N`, columns ordered to match
/// [`RepresentationSpec::dihedral`]: constant, then `(cos, sin)` per
/// frequency, then `(−1)^i` for even `N`.
pub fn real_fourier_basis(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    let mut f = DMatrix::zeros(n, n);
    let c0 = 1.0 / nf.sqrt();
    for i in 0..n {
        f[(i, 0)] = c0;
    }
    let planes = if n % 2 == 0 { n / 2 - 1 } else { (n - 1) / 2 };
    let amp = (2.0 / nf).sqrt();
    for k in 1..=planes {
        for i in 0..n {
            let phase = 2.0 * PI * (k * i % n) as f64 / nf;
            f[(i, 2 * k - 1)] = amp * phase.cos();
            f[(i, 2 * k)] = amp * phase.sin();
        }
    }
    if n % 2 == 0 {
        for i in 0..n {
            f[(i, n - 1)] = if i % 2 == 0 { c0 } else { -c0 };
        }
    }
    f
}
