//! Semi-algebraic prior sets and their generic translates.
//!
//! A [`Prior`] is a base set in canonical position (a coordinate subspace,
//! an axis-aligned grid, a parabola, ...). Genericity comes from a random
//! [`GenericTransform`] `θ` drawn from `GL`, `Aff` or `O`; the translate
//! `θ·M` is a [`TranslatedPrior`]. Both compile their geometry once so that
//! projection, the workhorse of every orbit search, is cheap.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repr::haar_orthogonal;

/// Condition-number cap for `GL`/`Aff` draws.
pub const MAX_CONDITION: f64 = 1e6;
/// Largest point set enumerated when projecting onto a transformed grid.
const MAX_ENUMERATED_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformClass {
    Gl,
    Aff,
    O,
}

impl TransformClass {
    pub fn name(self) -> &'static str {
        match self {
            TransformClass::Gl => "GL",
            TransformClass::Aff => "Aff",
            TransformClass::O => "O",
        }
    }
}

/// An invertible affine map `v ↦ A v + b` (`b = 0` unless `Aff`).
#[derive(Debug, Clone, PartialEq)]
pub struct GenericTransform {
    class: TransformClass,
    linear: DMatrix<f64>,
    inverse: DMatrix<f64>,
    shift: DVector<f64>,
    resamples: usize,
}

impl GenericTransform {
    pub fn identity(dim: usize) -> Self {
        GenericTransform {
            class: TransformClass::O,
            linear: DMatrix::identity(dim, dim),
            inverse: DMatrix::identity(dim, dim),
            shift: DVector::zeros(dim),
            resamples: 0,
        }
    }

    pub fn from_parts(
        class: TransformClass,
        linear: DMatrix<f64>,
        shift: Option<DVector<f64>>,
    ) -> Result<Self> {
        if !linear.is_square() {
            return Err(Error::ShapeMismatch("transform must be square".into()));
        }
        let dim = linear.nrows();
        let shift = shift.unwrap_or_else(|| DVector::zeros(dim));
        if shift.len() != dim {
            return Err(Error::ShapeMismatch("shift length differs from dimension".into()));
        }
        if class != TransformClass::Aff && shift.amax() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{} transforms carry no shift",
                class.name()
            )));
        }
        let inverse = match class {
            TransformClass::O => {
                if crate::repr::orthogonality_defect(&linear) > 1e-12 {
                    return Err(Error::InvalidArgument("O-class map is not orthogonal".into()));
                }
                linear.transpose()
            }
            _ => linear
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::InvalidArgument("linear part is singular".into()))?,
        };
        Ok(GenericTransform {
            class,
            linear,
            inverse,
            shift,
            resamples: 0,
        })
    }

    /// Draws from an absolutely continuous law on the class: Gaussian
    /// matrices (conditioned on `κ ≤ 10⁶`) for `GL`, plus a Gaussian shift for
    /// `Aff`, Haar measure for `O`.
    pub fn sample<R: Rng + ?Sized>(class: TransformClass, dim: usize, rng: &mut R) -> Self {
        assert!(dim >= 1, "transform dimension must be positive");
        if class == TransformClass::O {
            let q = haar_orthogonal(dim, rng);
            return GenericTransform {
                class,
                inverse: q.transpose(),
                linear: q,
                shift: DVector::zeros(dim),
                resamples: 0,
            };
        }
        let mut resamples = 0;
        let (linear, inverse) = loop {
            let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
            if condition_number(&a) <= MAX_CONDITION {
                if let Some(inv) = a.clone().try_inverse() {
                    break (a, inv);
                }
            }
            resamples += 1;
        };
        let shift = if class == TransformClass::Aff {
            DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
        } else {
            DVector::zeros(dim)
        };
        GenericTransform {
            class,
            linear,
            inverse,
            shift,
            resamples,
        }
    }

    pub fn class(&self) -> TransformClass {
        self.class
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn dim(&self) -> usize {
        self.linear.nrows()
    }

    /// Number of rejected draws before the condition-number cap was met.
    pub fn resamples(&self) -> usize {
        self.resamples
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.linear)
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.linear * v + &self.shift
    }

    pub fn apply_inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.inverse * (v - &self.shift)
    }

    /// `v ↦ F·θ(v)` for an orthogonal `F`; stays in the class of `θ`.
    pub fn then_orthogonal(&self, f: &DMatrix<f64>) -> Result<GenericTransform> {
        if f.shape() != self.linear.shape() || crate::repr::orthogonality_defect(f) > 1e-10 {
            return Err(Error::InvalidArgument(
                "basis change must be orthogonal of matching size".into(),
            ));
        }
        Ok(GenericTransform {
            class: self.class,
            linear: f * &self.linear,
            inverse: &self.inverse * f.transpose(),
            shift: f * &self.shift,
            resamples: self.resamples,
        })
    }
}

pub fn sample_transform<R: Rng + ?Sized>(
    class: TransformClass,
    dim: usize,
    rng: &mut R,
) -> GenericTransform {
    GenericTransform::sample(class, dim, rng)
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// One affine layer `z ↦ W z + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// `x = A_k ∘ η ∘ A_{k−1} ∘ … ∘ η ∘ A_1(z)` with `η = max(·, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluGenerator {
    layers: Vec<AffineLayer>,
}

impl ReluGenerator {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("generator needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.nrows() {
                return Err(Error::ShapeMismatch(format!("layer {i}: bias length")));
            }
            if i > 0 && layers[i - 1].weight.nrows() != l.weight.ncols() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} expects {} inputs, previous layer emits {}",
                    l.weight.ncols(),
                    layers[i - 1].weight.nrows()
                )));
            }
        }
        Ok(ReluGenerator { layers })
    }

    /// Gaussian weights scaled by `1/√fan_in`, Gaussian biases scaled by 0.1.
    pub fn random<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(
                "widths must list latent and output sizes".into(),
            ));
        }
        let layers = widths
            .windows(2)
            .map(|w| {
                let scale = 1.0 / (w[0] as f64).sqrt();
                AffineLayer {
                    weight: DMatrix::from_fn(w[1], w[0], |_, _| {
                        scale * rng.sample::<f64, _>(StandardNormal)
                    }),
                    bias: DVector::from_fn(w[1], |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal)),
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.nrows()
    }

    pub fn forward(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::ShapeMismatch(format!(
                "latent of length {} for a generator with latent dim {}",
                z.len(),
                self.latent_dim()
            )));
        }
        Ok(self.forward_unchecked(z))
    }

    fn forward_unchecked(&self, z: &DVector<f64>) -> DVector<f64> {
        let last = self.layers.len() - 1;
        let mut h = z.clone();
        for (i, l) in self.layers.iter().enumerate() {
            h = &l.weight * h + &l.bias;
            if i < last {
                h.apply(|v| *v = v.max(0.0));
            }
        }
        h
    }

    /// Composes an affine map after the last layer.
    fn mapped(&self, linear: &DMatrix<f64>, shift: &DVector<f64>) -> ReluGenerator {
        let mut layers = self.layers.clone();
        let last = layers.last_mut().unwrap();
        last.weight = linear * &last.weight;
        last.bias = linear * &last.bias + shift;
        ReluGenerator { layers }
    }

    /// `‖G(z) − v‖²` and its gradient in `z`.
    fn loss_and_grad(&self, z: &DVector<f64>, v: &DVector<f64>) -> (f64, DVector<f64>) {
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = z.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let a = &l.weight * &h + &l.bias;
            h = if i < last { a.map(|x| x.max(0.0)) } else { a.clone() };
            pre.push(a);
        }
        let r = &h - v;
        let loss = r.norm_squared();
        let mut g = r * 2.0;
        for i in (0..self.layers.len()).rev() {
            if i < last {
                g.zip_apply(&pre[i], |gi, a| {
                    if a <= 0.0 {
                        *gi = 0.0
                    }
                });
            }
            g = self.layers[i].weight.transpose() * g;
        }
        (loss, g)
    }
}

pub fn relu_forward(gen: &ReluGenerator, z: &DVector<f64>) -> Result<DVector<f64>> {
    gen.forward(z)
}

/// Ray together with a circle in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayCircle {
    pub ray_origin: [f64; 2],
    pub ray_direction: [f64; 2],
    pub center: [f64; 2],
    pub radius: f64,
}

impl Default for RayCircle {
    fn default() -> Self {
        RayCircle {
            ray_origin: [0.2, -0.3],
            ray_direction: [0.8, 0.6],
            center: [-0.8, 0.6],
            radius: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind {
    /// The product grid `levels^ambient_dim`.
    Grid { levels: Vec<f64>, ambient_dim: usize },
    /// Column span of an orthonormal basis.
    Subspace { basis: DMatrix<f64> },
    /// Vectors with at most `sparsity` nonzero coefficients in the columns of
    /// `dictionary`.
    SparseUnion {
        dictionary: DMatrix<f64>,
        sparsity: usize,
    },
    /// `{(t, t²)}`.
    Parabola2D,
    RayCircleUnion2D(RayCircle),
    /// Two lines through the origin.
    TwoLines2D { directions: [[f64; 2]; 2] },
    ReluGenerator(ReluGenerator),
}

/// Orthogonal projection result.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: DVector<f64>,
    pub distance: f64,
    pub quality: ProjectionQuality,
    /// `false` when an iterative solver hit its cap; `point` is then the
    /// best iterate.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionQuality {
    Exact,
    /// Local optimum of a non-convex problem.
    Approximate,
    /// Distance to a point of the set, which bounds the true distance from
    /// above.
    UpperBound,
}

/// A set that can be sampled and projected onto.
pub trait PriorSet: Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn declared_dim(&self) -> usize;
    fn project(&self, v: &DVector<f64>) -> Projection;
    fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64>;
    /// Whether `project` is a certified nearest point.
    fn exact_projection(&self) -> bool;

    /// `(offset, Q)` with orthonormal `Q` when the set is exactly the affine
    /// subspace `offset + span Q`.
    fn as_affine_subspace(&self) -> Option<(DVector<f64>, DMatrix<f64>)> {
        None
    }

    fn distance(&self, v: &DVector<f64>) -> f64 {
        self.project(v).distance
    }

    fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        self.distance(v) <= tol
    }
}

impl<T: PriorSet + ?Sized> PriorSet for &T {
    fn ambient_dim(&self) -> usize {
        (**self).ambient_dim()
    }
    fn declared_dim(&self) -> usize {
        (**self).declared_dim()
    }
    fn project(&self, v: &DVector<f64>) -> Projection {
        (**self).project(v)
    }
    fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        (**self).sample(rng)
    }
    fn exact_projection(&self) -> bool {
        (**self).exact_projection()
    }
    fn as_affine_subspace(&self) -> Option<(DVector<f64>, DMatrix<f64>)> {
        (**self).as_affine_subspace()
    }
}

impl<T: PriorSet + ?Sized> PriorSet for Box<T> {
    fn ambient_dim(&self) -> usize {
        (**self).ambient_dim()
    }
    fn declared_dim(&self) -> usize {
        (**self).declared_dim()
    }
    fn project(&self, v: &DVector<f64>) -> Projection {
        (**self).project(v)
    }
    fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        (**self).sample(rng)
    }
    fn exact_projection(&self) -> bool {
        (**self).exact_projection()
    }
    fn as_affine_subspace(&self) -> Option<(DVector<f64>, DMatrix<f64>)> {
        (**self).as_affine_subspace()
    }
}

pub fn sample_point(prior: &dyn PriorSet, rng: &mut dyn RngCore) -> DVector<f64> {
    prior.sample(rng)
}

pub fn membership(prior: &dyn PriorSet, v: &DVector<f64>, tol: f64) -> bool {
    prior.contains(v, tol)
}

pub fn project(prior: &dyn PriorSet, v: &DVector<f64>) -> Projection {
    prior.project(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    kind: PriorKind,
    geometry: Geometry,
}

impl Prior {
    pub fn new(kind: PriorKind) -> Result<Self> {
        validate_kind(&kind)?;
        let geometry = Geometry::build(&kind, None);
        Ok(Prior { kind, geometry })
    }

    pub fn grid(levels: Vec<f64>, ambient_dim: usize) -> Result<Self> {
        Self::new(PriorKind::Grid { levels, ambient_dim })
    }

    /// Span of the first `dim` coordinate vectors of `ℝ^ambient`.
    pub fn coordinate_subspace(ambient: usize, dim: usize) -> Result<Self> {
        if dim > ambient {
            return Err(Error::InvalidArgument(format!(
                "subspace dimension {dim} exceeds ambient {ambient}"
            )));
        }
        Self::new(PriorKind::Subspace {
            basis: DMatrix::identity(ambient, dim),
        })
    }

    /// Span of `basis` after orthonormalisation.
    pub fn subspace(basis: DMatrix<f64>) -> Result<Self> {
        let q = orthonormal_columns(&basis)?;
        Self::new(PriorKind::Subspace { basis: q })
    }

    pub fn sparse_union(dictionary: DMatrix<f64>, sparsity: usize) -> Result<Self> {
        Self::new(PriorKind::SparseUnion {
            dictionary,
            sparsity,
        })
    }

    pub fn parabola() -> Self {
        Self::new(PriorKind::Parabola2D).expect("parabola is valid")
    }

    pub fn ray_circle(rc: RayCircle) -> Result<Self> {
        Self::new(PriorKind::RayCircleUnion2D(rc))
    }

    pub fn two_lines(directions: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(PriorKind::TwoLines2D { directions })
    }

    pub fn relu(gen: ReluGenerator) -> Self {
        Self::new(PriorKind::ReluGenerator(gen)).expect("generator validated on construction")
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    fn sample_base(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        match &self.kind {
            PriorKind::Grid { levels, ambient_dim } => DVector::from_fn(*ambient_dim, |_, _| {
                levels[rng.random_range(0..levels.len())]
            }),
            PriorKind::Subspace { basis } => {
                let c = DVector::from_fn(basis.ncols(), |_, _| rng.sample(StandardNormal));
                basis * c
            }
            PriorKind::SparseUnion {
                dictionary,
                sparsity,
            } => {
                let p = dictionary.ncols();
                let m = (*sparsity).min(p);
                let mut out = DVector::zeros(dictionary.nrows());
                for j in sample_indices(rng, p, m) {
                    let c: f64 = rng.sample(StandardNormal);
                    out.axpy(c, &dictionary.column(j), 1.0);
                }
                out
            }
            PriorKind::Parabola2D => {
                let t = rng.random_range(-1.5..1.5);
                DVector::from_vec(vec![t, t * t])
            }
            PriorKind::RayCircleUnion2D(rc) => {
                if rng.random_bool(0.5) {
                    let s = rng.random_range(0.0..2.0);
                    let d = normalize2(rc.ray_direction);
                    DVector::from_vec(vec![
                        rc.ray_origin[0] + s * d[0],
                        rc.ray_origin[1] + s * d[1],
                    ])
                } else {
                    let phi = rng.random_range(0.0..2.0 * PI);
                    DVector::from_vec(vec![
                        rc.center[0] + rc.radius * phi.cos(),
                        rc.center[1] + rc.radius * phi.sin(),
                    ])
                }
            }
            PriorKind::TwoLines2D { directions } => {
                let d = normalize2(directions[rng.random_range(0..2)]);
                let t = rng.random_range(-2.0..2.0);
                DVector::from_vec(vec![t * d[0], t * d[1]])
            }
            PriorKind::ReluGenerator(g) => {
                let z = DVector::from_fn(g.latent_dim(), |_, _| rng.sample(StandardNormal));
                g.forward_unchecked(&z)
            }
        }
    }
}

impl PriorSet for Prior {
    fn ambient_dim(&self) -> usize {
        kind_ambient_dim(&self.kind)
    }

    fn declared_dim(&self) -> usize {
        kind_declared_dim(&self.kind)
    }

    fn project(&self, v: &DVector<f64>) -> Projection {
        self.geometry.project(v)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        self.sample_base(rng)
    }

    fn exact_projection(&self) -> bool {
        self.geometry.exact()
    }

    fn as_affine_subspace(&self) -> Option<(DVector<f64>, DMatrix<f64>)> {
        self.geometry.affine()
    }
}

/// `θ·M` for a base prior `M` and transform `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatedPrior {
    base: Prior,
    transform: GenericTransform,
    geometry: Geometry,
}

impl TranslatedPrior {
    pub fn new(base: Prior, transform: GenericTransform) -> Result<Self> {
        if transform.dim() != base.ambient_dim() {
            return Err(Error::ShapeMismatch(format!(
                "transform of size {} for a prior in dimension {}",
                transform.dim(),
                base.ambient_dim()
            )));
        }
        let geometry = Geometry::build(&base.kind, Some(&transform));
        Ok(TranslatedPrior {
            base,
            transform,
            geometry,
        })
    }

    pub fn identity(base: Prior) -> Self {
        let dim = base.ambient_dim();
        Self::new(base, GenericTransform::identity(dim)).expect("identity matches dimension")
    }

    pub fn sample_generic<R: Rng + ?Sized>(
        base: Prior,
        class: TransformClass,
        rng: &mut R,
    ) -> Self {
        let t = GenericTransform::sample(class, base.ambient_dim(), rng);
        Self::new(base, t).expect("sampled transform matches dimension")
    }

    pub fn base(&self) -> &Prior {
        &self.base
    }

    pub fn transform(&self) -> &GenericTransform {
        &self.transform
    }

    /// The same set expressed in coordinates `c = Fᵀ v` for orthogonal `F`.
    pub fn in_basis(&self, f: &DMatrix<f64>) -> Result<TranslatedPrior> {
        let t = self.transform.then_orthogonal(&f.transpose())?;
        TranslatedPrior::new(self.base.clone(), t)
    }
}

impl PriorSet for TranslatedPrior {
    fn ambient_dim(&self) -> usize {
        self.base.ambient_dim()
    }

    fn declared_dim(&self) -> usize {
        self.base.declared_dim()
    }

    fn project(&self, v: &DVector<f64>) -> Projection {
        self.geometry.project(v)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        self.transform.apply(&self.base.sample_base(rng))
    }

    fn exact_projection(&self) -> bool {
        self.geometry.exact()
    }

    fn as_affine_subspace(&self) -> Option<(DVector<f64>, DMatrix<f64>)> {
        self.geometry.affine()
    }
}

/// A prior seen through an orthogonal change of coordinates: `c` is a member
/// iff `F c` is a member of the inner set.
pub struct InBasis<P> {
    inner: P,
    basis: DMatrix<f64>,
}

impl<P: PriorSet> InBasis<P> {
    pub fn new(inner: P, basis: DMatrix<f64>) -> Result<Self> {
        if basis.shape() != (inner.ambient_dim(), inner.ambient_dim())
            || crate::repr::orthogonality_defect(&basis) > 1e-10
        {
            return Err(Error::InvalidArgument(
                "basis must be orthogonal of the prior's dimension".into(),
            ));
        }
        Ok(InBasis { inner, basis })
    }
}

impl<P: PriorSet> PriorSet for InBasis<P> {
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }
    fn declared_dim(&self) -> usize {
        self.inner.declared_dim()
    }
    fn project(&self, v: &DVector<f64>) -> Projection {
        let mut p = self.inner.project(&(&self.basis * v));
        p.point = self.basis.transpose() * p.point;
        p
    }
    fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        self.basis.transpose() * self.inner.sample(rng)
    }
    fn exact_projection(&self) -> bool {
        self.inner.exact_projection()
    }
    fn as_affine_subspace(&self) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let (offset, q) = self.inner.as_affine_subspace()?;
        let ft = self.basis.transpose();
        Some((&ft * offset, ft * q))
    }
}

fn validate_kind(kind: &PriorKind) -> Result<()> {
    match kind {
        PriorKind::Grid { levels, ambient_dim } => {
            if levels.is_empty() || *ambient_dim == 0 {
                return Err(Error::InvalidArgument("grid needs levels and a dimension".into()));
            }
            if levels.iter().any(|l| !l.is_finite()) {
                return Err(Error::InvalidArgument("grid levels must be finite".into()));
            }
        }
        PriorKind::Subspace { basis } => {
            if basis.nrows() == 0 || basis.ncols() > basis.nrows() {
                return Err(Error::InvalidArgument("subspace basis has bad shape".into()));
            }
            if basis.ncols() > 0 && crate::repr::orthogonality_defect(basis) > 1e-10 {
                return Err(Error::InvalidArgument("subspace basis is not orthonormal".into()));
            }
        }
        PriorKind::SparseUnion {
            dictionary,
            sparsity,
        } => {
            if dictionary.nrows() == 0 || *sparsity > dictionary.ncols() {
                return Err(Error::InvalidArgument("sparsity exceeds dictionary size".into()));
            }
        }
        PriorKind::RayCircleUnion2D(rc) => {
            if !(rc.radius > 0.0) || norm2(rc.ray_direction) == 0.0 {
                return Err(Error::InvalidArgument("degenerate ray or circle".into()));
            }
        }
        PriorKind::TwoLines2D { directions } => {
            if directions.iter().any(|d| norm2(*d) == 0.0) {
                return Err(Error::InvalidArgument("line direction is zero".into()));
            }
        }
        PriorKind::Parabola2D | PriorKind::ReluGenerator(_) => {}
    }
    Ok(())
}

fn kind_ambient_dim(kind: &PriorKind) -> usize {
    match kind {
        PriorKind::Grid { ambient_dim, .. } => *ambient_dim,
        PriorKind::Subspace { basis } => basis.nrows(),
        PriorKind::SparseUnion { dictionary, .. } => dictionary.nrows(),
        PriorKind::Parabola2D | PriorKind::RayCircleUnion2D(_) | PriorKind::TwoLines2D { .. } => 2,
        PriorKind::ReluGenerator(g) => g.output_dim(),
    }
}

fn kind_declared_dim(kind: &PriorKind) -> usize {
    match kind {
        PriorKind::Grid { .. } => 0,
        PriorKind::Subspace { basis } => basis.ncols(),
        PriorKind::SparseUnion { sparsity, .. } => *sparsity,
        PriorKind::Parabola2D | PriorKind::RayCircleUnion2D(_) | PriorKind::TwoLines2D { .. } => 1,
        PriorKind::ReluGenerator(g) => g.latent_dim().min(g.output_dim()),
    }
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn normalize2(v: [f64; 2]) -> [f64; 2] {
    let n = norm2(v);
    [v[0] / n, v[1] / n]
}

fn orthonormal_columns(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.ncols() == 0 {
        return Ok(a.clone());
    }
    if a.ncols() > a.nrows() {
        return Err(Error::InvalidArgument("more columns than rows".into()));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    if (0..a.ncols()).any(|j| r[(j, j)].abs() <= 1e-12 * scale) {
        return Err(Error::InvalidArgument("columns are linearly dependent".into()));
    }
    Ok(qr.q())
}

/// 1-D pieces of the planar priors.
#[derive(Debug, Clone, PartialEq)]
enum Curve {
    Parabola,
    Ray { origin: [f64; 2], dir: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
    Line { dir: [f64; 2] },
}

/// Prior geometry after an affine map, in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
enum Geometry {
    Points(Vec<DVector<f64>>),
    /// Per-axis rounding in base coordinates; exact without a map.
    AxisGrid {
        levels: Vec<f64>,
        map: Option<GenericTransform>,
    },
    Affine {
        offset: DVector<f64>,
        q: DMatrix<f64>,
    },
    Union {
        offset: DVector<f64>,
        atoms: DMatrix<f64>,
        sparsity: usize,
        /// Orthonormal bases of every support, when exhaustive search is
        /// affordable.
        supports: Option<Vec<DMatrix<f64>>>,
    },
    Curves {
        pieces: Vec<Curve>,
        linear: DMatrix<f64>,
        shift: DVector<f64>,
    },
    Generator(ReluGenerator),
}

impl Geometry {
    fn build(kind: &PriorKind, map: Option<&GenericTransform>) -> Geometry {
        let dim = kind_ambient_dim(kind);
        let (linear, shift) = match map {
            Some(t) => (t.linear.clone(), t.shift.clone()),
            None => (DMatrix::identity(dim, dim), DVector::zeros(dim)),
        };
        match kind {
            PriorKind::Grid { levels, ambient_dim } => {
                let count = (levels.len() as f64).powi(*ambient_dim as i32);
                match map {
                    Some(t) if count <= MAX_ENUMERATED_POINTS as f64 => {
                        let mut points = Vec::with_capacity(count as usize);
                        let mut idx = vec![0usize; *ambient_dim];
                        loop {
                            let p = DVector::from_fn(*ambient_dim, |i, _| levels[idx[i]]);
                            points.push(t.apply(&p));
                            let mut k = 0;
                            while k < *ambient_dim {
                                idx[k] += 1;
                                if idx[k] < levels.len() {
                                    break;
                                }
                                idx[k] = 0;
                                k += 1;
                            }
                            if k == *ambient_dim {
                                break;
                            }
                        }
                        Geometry::Points(points)
                    }
                    _ => {
                        let mut levels = levels.clone();
                        levels.sort_by(f64::total_cmp);
                        Geometry::AxisGrid {
                            levels,
                            map: map.cloned(),
                        }
                    }
                }
            }
            PriorKind::Subspace { basis } => {
                let q = if basis.ncols() == 0 {
                    basis.clone()
                } else if map.is_none_or(|t| t.class == TransformClass::O) {
                    &linear * basis
                } else {
                    orthonormal_columns(&(&linear * basis))
                        .expect("invertible image of independent columns")
                };
                Geometry::Affine { offset: shift, q }
            }
            PriorKind::SparseUnion {
                dictionary,
                sparsity,
            } => {
                let atoms = &linear * dictionary;
                let exhaustive = *sparsity <= 3 && atoms.nrows() <= 20;
                let supports = exhaustive.then(|| {
                    combinations(atoms.ncols(), *sparsity)
                        .into_iter()
                        .filter_map(|s| {
                            let cols = atoms.select_columns(&s);
                            orthonormal_columns(&cols).ok()
                        })
                        .collect()
                });
                Geometry::Union {
                    offset: shift,
                    atoms,
                    sparsity: *sparsity,
                    supports,
                }
            }
            PriorKind::Parabola2D => Geometry::Curves {
                pieces: vec![Curve::Parabola],
                linear,
                shift,
            },
            PriorKind::RayCircleUnion2D(rc) => Geometry::Curves {
                pieces: vec![
                    Curve::Ray {
                        origin: rc.ray_origin,
                        dir: normalize2(rc.ray_direction),
                    },
                    Curve::Circle {
                        center: rc.center,
                        radius: rc.radius,
                    },
                ],
                linear,
                shift,
            },
            PriorKind::TwoLines2D { directions } => Geometry::Curves {
                pieces: directions
                    .iter()
                    .map(|d| Curve::Line { dir: normalize2(*d) })
                    .collect(),
                linear,
                shift,
            },
            PriorKind::ReluGenerator(g) => Geometry::Generator(g.mapped(&linear, &shift)),
        }
    }

    fn affine(&self) -> Option<(DVector<f64>, DMatrix<f64>)> {
        match self {
            Geometry::Affine { offset, q } => Some((offset.clone(), q.clone())),
            Geometry::Union {
                offset,
                atoms,
                sparsity,
                ..
            } if *sparsity >= atoms.ncols() => {
                orthonormal_columns(atoms).ok().map(|q| (offset.clone(), q))
            }
            _ => None,
        }
    }

    fn exact(&self) -> bool {
        match self {
            Geometry::AxisGrid { map, .. } => map.is_none(),
            Geometry::Union { supports, .. } => supports.is_some(),
            Geometry::Generator(_) => false,
            _ => true,
        }
    }

    fn project(&self, v: &DVector<f64>) -> Projection {
        match self {
            Geometry::Points(points) => {
                let (best, dist) = points
                    .iter()
                    .map(|p| (p, (p - v).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("grid has at least one point");
                exact(best.clone(), dist)
            }
            Geometry::AxisGrid { levels, map } => {
                let base = match map {
                    Some(t) => t.apply_inverse(v),
                    None => v.clone(),
                };
                let rounded = base.map(|x| nearest_level(levels, x));
                match map {
                    None => {
                        let d = (&rounded - v).norm();
                        exact(rounded, d)
                    }
                    Some(t) => {
                        let point = t.apply(&rounded);
                        let distance = (&point - v).norm();
                        Projection {
                            point,
                            distance,
                            quality: ProjectionQuality::UpperBound,
                            converged: true,
                        }
                    }
                }
            }
            Geometry::Affine { offset, q } => {
                let w = v - offset;
                let point = offset + q * (q.transpose() * &w);
                let distance = (&point - v).norm();
                exact(point, distance)
            }
            Geometry::Union {
                offset,
                atoms,
                sparsity,
                supports,
            } => {
                let w = v - offset;
                match supports {
                    Some(bases) => {
                        let mut best = (offset.clone(), w.norm());
                        for q in bases {
                            let p = q * (q.transpose() * &w);
                            let d = (&w - &p).norm();
                            if d < best.1 {
                                best = (offset + p, d);
                            }
                        }
                        exact(best.0, best.1)
                    }
                    None => {
                        let point = offset + hard_threshold(atoms, &w, *sparsity);
                        let distance = (&point - v).norm();
                        Projection {
                            point,
                            distance,
                            quality: ProjectionQuality::Approximate,
                            converged: true,
                        }
                    }
                }
            }
            Geometry::Curves {
                pieces,
                linear,
                shift,
            } => {
                let mut best: Option<(DVector<f64>, f64)> = None;
                for c in pieces {
                    let p = project_curve(c, linear, shift, v);
                    let d = (&p - v).norm();
                    if best.as_ref().is_none_or(|b| d < b.1) {
                        best = Some((p, d));
                    }
                }
                let (p, d) = best.expect("at least one curve");
                exact(p, d)
            }
            Geometry::Generator(g) => project_generator(g, v),
        }
    }
}

fn exact(point: DVector<f64>, distance: f64) -> Projection {
    Projection {
        point,
        distance,
        quality: ProjectionQuality::Exact,
        converged: true,
    }
}

fn nearest_level(levels: &[f64], x: f64) -> f64 {
    let i = levels.partition_point(|&l| l < x);
    match (i.checked_sub(1).map(|j| levels[j]), levels.get(i)) {
        (Some(lo), Some(&hi)) => {
            if x - lo <= hi - x {
                lo
            } else {
                hi
            }
        }
        (Some(lo), None) => lo,
        (None, Some(&hi)) => hi,
        (None, None) => unreachable!("levels are non-empty"),
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] != i + n - k) else {
            return out;
        };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Least squares on the whole dictionary, keep the `k` largest coefficients,
/// refit on that support.
fn hard_threshold(atoms: &DMatrix<f64>, w: &DVector<f64>, k: usize) -> DVector<f64> {
    if k == 0 {
        return DVector::zeros(w.len());
    }
    let svd = atoms.clone().svd(true, true);
    let coef = svd
        .solve(w, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(atoms.ncols()));
    let mut idx: Vec<usize> = (0..coef.len()).collect();
    idx.sort_by(|&a, &b| coef[b].abs().total_cmp(&coef[a].abs()));
    idx.truncate(k);
    idx.sort_unstable();
    let sub = atoms.select_columns(&idx);
    let sub_svd = sub.clone().svd(true, true);
    let c = sub_svd
        .solve(w, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(idx.len()));
    sub * c
}

fn map2(linear: &DMatrix<f64>, shift: &DVector<f64>, p: [f64; 2]) -> DVector<f64> {
    linear * DVector::from_vec(vec![p[0], p[1]]) + shift
}

fn project_curve(
    curve: &Curve,
    linear: &DMatrix<f64>,
    shift: &DVector<f64>,
    v: &DVector<f64>,
) -> DVector<f64> {
    let w = v - shift;
    match curve {
        Curve::Line { dir } => {
            let a = linear * DVector::from_vec(dir.to_vec());
            let t = a.dot(&w) / a.norm_squared();
            a * t + shift
        }
        Curve::Ray { origin, dir } => {
            let o = map2(linear, shift, *origin);
            let a = linear * DVector::from_vec(dir.to_vec());
            let t = (a.dot(&(v - &o)) / a.norm_squared()).max(0.0);
            o + a * t
        }
        Curve::Parabola => {
            // f(t) = ‖t a1 + t² a2 − w‖²; f'(t)/2 is a cubic in t
            let a1 = linear.column(0).into_owned();
            let a2 = linear.column(1).into_owned();
            let c3 = 2.0 * a2.norm_squared();
            let c2 = 3.0 * a1.dot(&a2);
            let c1 = a1.norm_squared() - 2.0 * a2.dot(&w);
            let c0 = -a1.dot(&w);
            let f = |t: f64| (&a1 * t + &a2 * (t * t) - &w).norm_squared();
            let best = real_cubic_roots(c3, c2, c1, c0)
                .into_iter()
                .min_by(|&a, &b| f(a).total_cmp(&f(b)))
                .unwrap_or(0.0);
            a1 * best + a2 * (best * best) + shift
        }
        Curve::Circle { center, radius } => {
            let m = map2(linear, shift, *center);
            let a1 = linear.column(0) * *radius;
            let a2 = linear.column(1) * *radius;
            let point = |phi: f64| &m + &a1 * phi.cos() + &a2 * phi.sin();
            let f = |phi: f64| (point(phi) - v).norm_squared();
            let df = |phi: f64| {
                let tangent = -&a1 * phi.sin() + &a2 * phi.cos();
                2.0 * (point(phi) - v).dot(&tangent)
            };
            let phi = minimize_periodic(f, df, 256);
            point(phi)
        }
    }
}

/// Global minimiser of a smooth `2π`-periodic function: bracket the sign
/// changes of `df` on a uniform grid, then refine each with 64 bisection
/// steps.
fn minimize_periodic(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, samples: usize) -> f64 {
    let h = 2.0 * PI / samples as f64;
    let mut best = (0.0, f(0.0));
    let mut prev = df(0.0);
    for k in 1..=samples {
        let t1 = k as f64 * h;
        let d1 = df(t1);
        if prev < 0.0 && d1 >= 0.0 {
            let (mut lo, mut hi) = (t1 - h, t1);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                if df(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            let ft = f(t);
            if ft < best.1 {
                best = (t, ft);
            }
        }
        let ft1 = f(t1);
        if ft1 < best.1 {
            best = (t1, ft1);
        }
        prev = d1;
    }
    best.0
}

/// Real roots of `a t³ + b t² + c t + d`, polished by Newton steps.
pub(crate) fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return vec![0.0];
    }
    let mut roots = if a.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            if c.abs() <= 1e-14 * scale {
                vec![]
            } else {
                vec![-d / c]
            }
        } else {
            let disc = c * c - 4.0 * b * d;
            if disc < 0.0 {
                vec![]
            } else {
                let s = disc.sqrt();
                vec![(-c + s) / (2.0 * b), (-c - s) / (2.0 * b)]
            }
        }
    } else {
        let (b, c, d) = (b / a, c / a, d / a);
        // depressed cubic t = u − b/3: u³ + p u + q = 0
        let p = c - b * b / 3.0;
        let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
        let shift = -b / 3.0;
        let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
        if disc > 0.0 {
            let s = disc.sqrt();
            vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt() + shift]
        } else if p == 0.0 {
            vec![shift]
        } else {
            let r = (-p / 3.0).sqrt();
            let arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
            let phi = arg.acos();
            (0..3)
                .map(|k| 2.0 * r * ((phi + 2.0 * PI * k as f64) / 3.0).cos() + shift)
                .collect()
        }
    };
    for t in roots.iter_mut() {
        for _ in 0..4 {
            let f = ((a * *t + b) * *t + c) * *t + d;
            let df = (3.0 * a * *t + 2.0 * b) * *t + c;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *t -= step;
        }
    }
    roots
}

const RELU_STARTS: usize = 8;
const RELU_ITERS: usize = 500;

/// Multi-start gradient descent in latent space with backtracking.
fn project_generator(g: &ReluGenerator, v: &DVector<f64>) -> Projection {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best: Option<(DVector<f64>, f64, bool)> = None;
    for start in 0..RELU_STARTS {
        let mut z = if start == 0 {
            DVector::zeros(g.latent_dim())
        } else {
            DVector::from_fn(g.latent_dim(), |_, _| rng.sample(StandardNormal))
        };
        let (mut loss, mut grad) = g.loss_and_grad(&z, v);
        let mut step = 1.0;
        let mut converged = false;
        for _ in 0..RELU_ITERS {
            let gn = grad.norm_squared();
            if gn <= 1e-24 * (1.0 + loss) {
                converged = true;
                break;
            }
            let mut accepted = false;
            for _ in 0..40 {
                let cand = &z - &grad * step;
                let (l, gr) = g.loss_and_grad(&cand, v);
                if l <= loss - 1e-4 * step * gn {
                    z = cand;
                    loss = l;
                    grad = gr;
                    accepted = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                converged = true;
                break;
            }
        }
        if best.as_ref().is_none_or(|b| loss < b.1) {
            best = Some((z, loss, converged));
        }
    }
    let (z, _, converged) = best.expect("at least one start");
    let point = g.forward_unchecked(&z);
    let distance = (&point - v).norm();
    Projection {
        point,
        distance,
        quality: ProjectionQuality::Approximate,
        converged,
    }
}

/// Serialisable prior description used by experiment configs. Base sets are
/// in canonical position; genericity is supplied by a transform class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Grid { levels: Vec<f64>, ambient_dim: usize },
    /// Span of the first `dim` coordinate vectors.
    Subspace { ambient_dim: usize, dim: usize },
    /// Explicit spanning columns.
    SubspaceBasis { columns: Vec<Vec<f64>> },
    /// `sparsity`-sparse vectors in the standard basis.
    SparseUnion { ambient_dim: usize, sparsity: usize },
    Parabola {},
    RayCircle {
        #[serde(default)]
        geometry: Option<RayCircle>,
    },
    TwoLines { directions: [[f64; 2]; 2] },
    /// Random generator with the listed layer widths (latent first).
    Relu { widths: Vec<usize>, seed: u64 },
}

impl PriorSpec {
    pub fn build(&self) -> Result<Prior> {
        match self {
            PriorSpec::Grid { levels, ambient_dim } => Prior::grid(levels.clone(), *ambient_dim),
            PriorSpec::Subspace { ambient_dim, dim } => {
                Prior::coordinate_subspace(*ambient_dim, *dim)
            }
            PriorSpec::SubspaceBasis { columns } => {
                let rows = columns.first().map_or(0, Vec::len);
                if rows == 0 || columns.iter().any(|c| c.len() != rows) {
                    return Err(Error::InvalidArgument("ragged basis columns".into()));
                }
                let flat: Vec<f64> = columns.iter().flatten().copied().collect();
                Prior::subspace(DMatrix::from_column_slice(rows, columns.len(), &flat))
            }
            PriorSpec::SparseUnion {
                ambient_dim,
                sparsity,
            } => Prior::sparse_union(DMatrix::identity(*ambient_dim, *ambient_dim), *sparsity),
            PriorSpec::Parabola {} => Ok(Prior::parabola()),
            PriorSpec::RayCircle { geometry } => Prior::ray_circle(geometry.unwrap_or_default()),
            PriorSpec::TwoLines { directions } => Prior::two_lines(*directions),
            PriorSpec::Relu { widths, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(Prior::relu(ReluGenerator::random(widths, &mut rng)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn transform_classes() {
        let mut r = rng(1);
        let o = GenericTransform::sample(TransformClass::O, 5, &mut r);
        assert!(crate::repr::orthogonality_defect(o.linear()) < 1e-12);
        let gl = GenericTransform::sample(TransformClass::Gl, 5, &mut r);
        assert!(gl.linear().determinant().abs() > 0.0);
        assert!(gl.condition_number() <= MAX_CONDITION);
        assert_eq!(gl.shift().amax(), 0.0);
        let a1 = GenericTransform::sample(TransformClass::Aff, 4, &mut r);
        let a2 = GenericTransform::sample(TransformClass::Aff, 4, &mut r);
        assert_ne!(a1, a2);
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        assert!((a1.apply_inverse(&a1.apply(&v)) - &v).norm() < 1e-10);
    }

    #[test]
    fn from_parts_validation() {
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(GenericTransform::from_parts(TransformClass::Gl, sing, None).is_err());
        let shear = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(GenericTransform::from_parts(TransformClass::O, shear.clone(), None).is_err());
        assert!(GenericTransform::from_parts(
            TransformClass::Gl,
            shear,
            Some(DVector::from_vec(vec![1.0, 0.0]))
        )
        .is_err());
    }

    #[test]
    fn subspace_samples_lie_in_span() {
        let mut r = rng(2);
        let basis = DMatrix::from_fn(6, 2, |_, _| r.sample(StandardNormal));
        let p = Prior::subspace(basis).unwrap();
        let PriorKind::Subspace { basis: q } = p.kind() else { unreachable!() };
        for _ in 0..20 {
            let s = p.sample(&mut r);
            let resid = &s - q * (q.transpose() * &s);
            assert!(resid.norm() <= 1e-10);
            assert!(p.contains(&s, 1e-9));
        }
        // v in the subspace projects to itself
        let v = q.column(0) * 2.5 - q.column(1);
        let proj = p.project(&v);
        assert!(proj.distance < 1e-12);
        assert!((proj.point - v).norm() < 1e-12);
    }

    #[test]
    fn parabola_samples_and_projection() {
        let mut r = rng(3);
        let p = Prior::parabola();
        for _ in 0..20 {
            let s = p.sample(&mut r);
            assert_eq!(s[1] - s[0] * s[0], 0.0);
        }
        let proj = p.project(&DVector::from_vec(vec![0.0, 1.0]));
        assert!((proj.distance - 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((proj.point[0].abs() - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((proj.point[1] - 0.5).abs() < 1e-9);
        assert!(p.contains(&DVector::from_vec(vec![0.125, 0.015625 + 1e-12]), 1e-9));
        assert!(!p.contains(&DVector::from_vec(vec![0.125, 0.0625]), 1e-9));
    }

    #[test]
    fn sparse_samples_have_small_support() {
        let mut r = rng(4);
        let p = Prior::sparse_union(DMatrix::identity(8, 8), 2).unwrap();
        for _ in 0..20 {
            let s = p.sample(&mut r);
            assert!(s.iter().filter(|v| **v != 0.0).count() <= 2);
            assert!(p.contains(&s, 1e-9));
        }
        let v = DVector::from_vec(vec![0.1, 3.0, -0.2, 0.0, -2.0, 0.05, 0.0, 0.0]);
        let proj = p.project(&v);
        assert_eq!(proj.quality, ProjectionQuality::Exact);
        assert!((proj.point[1] - 3.0).abs() < 1e-12 && (proj.point[4] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn large_sparse_union_uses_thresholding() {
        let mut r = rng(5);
        let p = Prior::sparse_union(DMatrix::identity(30, 30), 4).unwrap();
        assert!(!p.exact_projection());
        let s = p.sample(&mut r);
        let proj = p.project(&s);
        assert_eq!(proj.quality, ProjectionQuality::Approximate);
        assert!(proj.distance < 1e-10);
    }

    #[test]
    fn grid_projection_rounds_per_axis() {
        let p = Prior::grid(vec![-1.0, 1.0], 2).unwrap();
        let proj = p.project(&DVector::from_vec(vec![0.9, -1.2]));
        assert_eq!(proj.point.as_slice(), &[1.0, -1.0]);
        assert!((proj.distance - (0.01f64 + 0.04).sqrt()).abs() < 1e-12);
        let p = Prior::grid(vec![0.0, 1.0], 1).unwrap();
        assert!(!p.contains(&DVector::from_vec(vec![0.5]), 1e-6));
    }

    #[test]
    fn relu_forward_examples() {
        let id = ReluGenerator::new(vec![AffineLayer {
            weight: DMatrix::identity(3, 3),
            bias: DVector::zeros(3),
        }])
        .unwrap();
        let z = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(relu_forward(&id, &z).unwrap(), z);

        let kill = ReluGenerator::new(vec![
            AffineLayer {
                weight: -DMatrix::identity(3, 3),
                bias: DVector::zeros(3),
            },
            AffineLayer {
                weight: DMatrix::identity(3, 3),
                bias: DVector::zeros(3),
            },
        ])
        .unwrap();
        let z = DVector::from_vec(vec![0.5, 0.0, 2.0]);
        assert_eq!(relu_forward(&kill, &z).unwrap().amax(), 0.0);
        assert!(relu_forward(&kill, &DVector::zeros(2)).is_err());

        let bad = ReluGenerator::new(vec![
            AffineLayer {
                weight: DMatrix::zeros(4, 2),
                bias: DVector::zeros(4),
            },
            AffineLayer {
                weight: DMatrix::zeros(3, 5),
                bias: DVector::zeros(3),
            },
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn relu_positive_homogeneity_without_biases() {
        let mut r = rng(6);
        let mut g = ReluGenerator::random(&[3, 6, 5], &mut r).unwrap();
        for l in g.layers.iter_mut() {
            l.bias.fill(0.0);
        }
        let z = DVector::from_vec(vec![0.3, -1.0, 0.7]);
        let a = 2.7;
        let lhs = g.forward(&(&z * a)).unwrap();
        let rhs = g.forward(&z).unwrap() * a;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn relu_projection_recovers_samples() {
        let mut r = rng(7);
        let p = Prior::relu(ReluGenerator::random(&[2, 8, 5], &mut r).unwrap());
        assert_eq!(p.declared_dim(), 2);
        let s = p.sample(&mut r);
        let proj = p.project(&s);
        assert_eq!(proj.quality, ProjectionQuality::Approximate);
        assert!(proj.distance < 1e-4, "{}", proj.distance);
    }

    #[test]
    fn ray_circle_and_lines_membership() {
        let mut r = rng(8);
        for p in [
            Prior::ray_circle(RayCircle::default()).unwrap(),
            Prior::two_lines([[1.0, 0.0], [1.0, 1.0]]).unwrap(),
        ] {
            for _ in 0..50 {
                let s = p.sample(&mut r);
                assert!(p.contains(&s, 1e-9));
            }
        }
        let c = Prior::ray_circle(RayCircle::default()).unwrap();
        // centre of the circle: nearest points are on the circle, at distance r
        let proj = c.project(&DVector::from_vec(vec![-0.8, 0.6]));
        assert!(proj.distance <= 0.7 + 1e-9);
    }

    #[test]
    fn orthogonal_translate_preserves_distance() {
        let mut r = rng(9);
        let bases = [
            Prior::coordinate_subspace(5, 2).unwrap(),
            Prior::sparse_union(DMatrix::identity(5, 5), 2).unwrap(),
            Prior::grid(vec![-1.0, 0.0, 1.0], 3).unwrap(),
            Prior::parabola(),
            Prior::ray_circle(RayCircle::default()).unwrap(),
        ];
        for base in bases {
            let dim = base.ambient_dim();
            let t = GenericTransform::sample(TransformClass::O, dim, &mut r);
            let tp = TranslatedPrior::new(base.clone(), t.clone()).unwrap();
            for _ in 0..20 {
                let v = DVector::from_fn(dim, |_, _| r.sample::<f64, _>(StandardNormal));
                let d0 = base.distance(&v);
                let d1 = tp.distance(&t.apply(&v));
                assert!((d0 - d1).abs() < 1e-10, "{d0} vs {d1}");
            }
        }
    }

    #[test]
    fn translated_membership_matches_base() {
        let mut r = rng(10);
        for class in [TransformClass::Gl, TransformClass::Aff, TransformClass::O] {
            let base = Prior::coordinate_subspace(4, 2).unwrap();
            let tp = TranslatedPrior::sample_generic(base.clone(), class, &mut r);
            for _ in 0..20 {
                let s = tp.sample(&mut r);
                assert!(tp.contains(&s, 1e-9));
                assert!(base.contains(&tp.transform().apply_inverse(&s), 1e-9));
                let off = &s + DVector::from_fn(4, |_, _| r.sample::<f64, _>(StandardNormal));
                assert_eq!(
                    tp.contains(&off, 1e-6),
                    base.contains(&tp.transform().apply_inverse(&off), 1e-6)
                );
            }
        }
    }

    #[test]
    fn projection_beats_random_samples() {
        let mut r = rng(11);
        let priors: Vec<TranslatedPrior> = vec![
            TranslatedPrior::sample_generic(Prior::grid(vec![-1.0, 0.0, 1.0], 2).unwrap(), TransformClass::Aff, &mut r),
            TranslatedPrior::sample_generic(Prior::coordinate_subspace(4, 2).unwrap(), TransformClass::Gl, &mut r),
            TranslatedPrior::sample_generic(Prior::sparse_union(DMatrix::identity(4, 4), 2).unwrap(), TransformClass::Aff, &mut r),
            TranslatedPrior::sample_generic(Prior::parabola(), TransformClass::Aff, &mut r),
            TranslatedPrior::sample_generic(Prior::ray_circle(RayCircle::default()).unwrap(), TransformClass::Aff, &mut r),
            TranslatedPrior::sample_generic(Prior::two_lines([[1.0, 0.2], [-0.3, 1.0]]).unwrap(), TransformClass::Gl, &mut r),
        ];
        for p in &priors {
            assert!(p.exact_projection());
            let v = DVector::from_fn(p.ambient_dim(), |_, _| 2.0 * r.sample::<f64, _>(StandardNormal));
            let d = p.distance(&v);
            for _ in 0..100 {
                let s = p.sample(&mut r);
                assert!(d <= (&s - &v).norm() + 1e-9);
            }
        }
    }

    #[test]
    fn cubic_roots() {
        let mut roots = real_cubic_roots(1.0, -6.0, 11.0, -6.0);
        roots.sort_by(f64::total_cmp);
        for (r, e) in roots.iter().zip([1.0, 2.0, 3.0]) {
            assert!((r - e).abs() < 1e-10);
        }
        assert_eq!(real_cubic_roots(0.0, 0.0, 2.0, -4.0), vec![2.0]);
        assert_eq!(real_cubic_roots(1.0, 0.0, 1.0, 0.0).len(), 1);
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn prior_spec_round_trip() {
        let spec: PriorSpec =
            serde_json::from_str(r#"{"kind":"subspace","ambient_dim":6,"dim":2}"#).unwrap();
        let p = spec.build().unwrap();
        assert_eq!((p.ambient_dim(), p.declared_dim()), (6, 2));
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<PriorSpec>(&json).unwrap(), spec);
        assert!(serde_json::from_str::<PriorSpec>(r#"{"kind":"parabola","x":1}"#).is_err());
    }

    #[test]
    fn declared_dim_never_exceeds_ambient() {
        let mut r = rng(12);
        let priors = [
            Prior::grid(vec![0.0], 3).unwrap(),
            Prior::coordinate_subspace(3, 3).unwrap(),
            Prior::sparse_union(DMatrix::identity(3, 3), 3).unwrap(),
            Prior::parabola(),
            Prior::relu(ReluGenerator::random(&[5, 4, 2], &mut r).unwrap()),
        ];
        for p in priors {
            assert!(p.declared_dim() <= p.ambient_dim());
        }
    }
}
