//! Recovery from Gram blocks: factor each block, then search the orbit of
//! the factor under `∏ O(N_ℓ)` for points of the prior.
//!
//! Three searches are provided. [`orbit_search_enumerate`] scans an explicit
//! finite list of group elements. [`orbit_search_grid`] certifies the
//! intersection for groups made of `O(1)` and `O(2)` factors by a
//! branch-and-bound over the angle grid: every box of angles carries a
//! rigorous lower bound on the distance to the prior, so pruned boxes contain
//! no solution. [`orbit_search_local`] runs Riemannian gradient descent from
//! random starts and scales to any block size, without a global certificate.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::{gram_blocks, PSD_CLIP, second_moment_to_gram, GramBlocks, SecondMomentEstimate};
use crate::priors::{InBasis, PriorSet};
use crate::repr::{
    haar_orthogonal, haar_special_orthogonal, reflection2, rotation2, AmbiguityElement,
    DataGroupSpec, RepresentationSpec, Signal,
};

pub const DEFAULT_TOL_IN: f64 = 1e-6;
pub const DEFAULT_TOL_SEP: f64 = 1e-3;
/// Angle grid steps per `O(2)` factor, `δ = 2π / DEFAULT_GRID_STEPS`.
pub const DEFAULT_GRID_STEPS: usize = 2000;
pub const DEFAULT_GRID_BUDGET: u128 = 100_000_000;
pub const DEFAULT_RESTARTS: usize = 64;
pub const DEFAULT_ITERS: usize = 1000;
pub const DEFAULT_PATIENCE: usize = 200;
/// Candidates kept per search; further distinct ones only mark the result
/// as truncated.
pub const MAX_CANDIDATES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Enumerate,
    Grid,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    UniqueUpToSign,
    Ambiguous,
    NotFound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub signal: Signal,
    /// Distance to the prior.
    pub residual: f64,
    /// `‖gram(candidate) − B‖_F / max(1, ‖B‖_F)`.
    pub gram_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub candidates: Vec<Candidate>,
    pub status: Status,
    pub method: Method,
    /// Closest approach to the prior seen anywhere in the search, kept even
    /// when nothing met `tol_in`.
    pub best: Option<Candidate>,
    /// Distance evaluations performed.
    pub evaluated: u64,
    /// Grid leaves whose lower bound admitted a solution that refinement
    /// could not reach.
    pub unresolved: u64,
    pub truncated: bool,
    pub seed: Option<u64>,
}

impl RecoveryResult {
    pub fn best_residual(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |c| c.residual)
    }

    /// A single candidate: the global sign was resolved as well.
    pub fn sign_resolved(&self) -> bool {
        self.status == Status::UniqueUpToSign && self.candidates.len() == 1
    }

    /// Whether some candidate equals `±x` (or `x` when `exact`) within
    /// `tol·max(1, ‖x‖)`.
    pub fn contains(&self, x: &Signal, tol: f64, exact: bool) -> bool {
        self.candidates.iter().any(|c| {
            if exact {
                c.signal.distance(x) <= tol * x.norm().max(1.0)
            } else {
                same_up_to_sign(&c.signal, x, tol)
            }
        })
    }
}

/// `min(‖x − y‖, ‖x + y‖) ≤ tol·max(1, ‖x‖)`.
pub fn same_up_to_sign(x: &Signal, y: &Signal, tol: f64) -> bool {
    let a = x.flatten();
    let b = y.flatten();
    same_up_to_sign_flat(&a, &b, tol)
}

pub fn same_up_to_sign_flat(x: &DVector<f64>, y: &DVector<f64>, tol: f64) -> bool {
    let bound = tol * x.norm().max(1.0);
    (x - y).norm() <= bound || (x + y).norm() <= bound
}

/// `X̂_ℓ = [Λ^{1/2} Uᵀ; 0]` from `B_ℓ = U Λ Uᵀ`, eigenvalues descending and
/// each eigenvector's first nonzero entry positive.
pub fn canonical_factor(b: &GramBlocks) -> Result<Signal> {
    let spec = b.spec().clone();
    let mut blocks = Vec::with_capacity(spec.len());
    for (l, (g, blk)) in b.blocks().iter().zip(spec.blocks()).enumerate() {
        let sym = (g + g.transpose()) * 0.5;
        let cut = PSD_CLIP * sym.norm();
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..blk.mult).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > cut).count();
        if rank > blk.dim {
            return Err(Error::InfeasibleRank {
                block: l,
                rank,
                dim: blk.dim,
            });
        }
        let mut x = DMatrix::zeros(blk.dim, blk.mult);
        for (row, &i) in order.iter().take(rank).enumerate() {
            let mut u = eig.eigenvectors.column(i).into_owned();
            if let Some(first) = u.iter().find(|v| v.abs() > 1e-12) {
                if *first < 0.0 {
                    u.neg_mut();
                }
            }
            let s = eig.eigenvalues[i].sqrt();
            for c in 0..blk.mult {
                x[(row, c)] = s * u[c];
            }
        }
        blocks.push(x);
    }
    Signal::new(spec, blocks)
}

/// The prior's affine structure, when it is a single affine subspace.
struct AffineModel {
    offset: DVector<f64>,
    q: DMatrix<f64>,
}

impl AffineModel {
    fn complement(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.q * (self.q.transpose() * v)
    }
}

/// Evaluates distances to the prior, counting calls.
struct Target<'a> {
    prior: &'a dyn PriorSet,
    affine: Option<AffineModel>,
    evaluated: u64,
}

impl<'a> Target<'a> {
    fn new(prior: &'a dyn PriorSet) -> Self {
        let affine = prior
            .as_affine_subspace()
            .map(|(offset, q)| AffineModel { offset, q });
        Target {
            prior,
            affine,
            evaluated: 0,
        }
    }

    fn residual(&mut self, y: &DVector<f64>) -> DVector<f64> {
        self.evaluated += 1;
        match &self.affine {
            Some(a) => a.complement(&(y - &a.offset)),
            None => y - self.prior.project(y).point,
        }
    }

    fn distance(&mut self, y: &DVector<f64>) -> f64 {
        self.residual(y).norm()
    }
}

/// Merges candidates within `radius` of each other, keeping the smaller
/// residual.
struct CandidateSet {
    items: Vec<(DVector<f64>, f64)>,
    radius: f64,
    up_to_sign: bool,
    truncated: bool,
}

impl CandidateSet {
    fn new(radius: f64, up_to_sign: bool) -> Self {
        CandidateSet {
            items: Vec::new(),
            radius,
            up_to_sign,
            truncated: false,
        }
    }

    fn insert(&mut self, y: DVector<f64>, residual: f64) {
        for (z, r) in self.items.iter_mut() {
            let close = (&*z - &y).norm() <= self.radius
                || (self.up_to_sign && (&*z + &y).norm() <= self.radius);
            if close {
                if residual < *r {
                    *z = y;
                    *r = residual;
                }
                return;
            }
        }
        if self.items.len() >= MAX_CANDIDATES {
            self.truncated = true;
        } else {
            self.items.push((y, residual));
        }
    }
}

struct Best(Option<(DVector<f64>, f64)>);

impl Best {
    fn offer(&mut self, y: &DVector<f64>, d: f64) {
        if self.0.as_ref().is_none_or(|b| d < b.1) {
            self.0 = Some((y.clone(), d));
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    spec: &RepresentationSpec,
    reference: &GramBlocks,
    set: CandidateSet,
    best: Best,
    method: Method,
    tol_sep: f64,
    evaluated: u64,
    unresolved: u64,
    seed: Option<u64>,
) -> Result<RecoveryResult> {
    let bnorm = reference.frobenius_norm().max(1.0);
    let make = |y: DVector<f64>, residual: f64| -> Result<Candidate> {
        let signal = Signal::from_flat(spec, &y)?;
        let gram_error = gram_blocks(&signal).distance(reference) / bnorm;
        Ok(Candidate {
            signal,
            residual,
            gram_error,
        })
    };
    let truncated = set.truncated;
    let mut candidates = set
        .items
        .into_iter()
        .map(|(y, r)| make(y, r))
        .collect::<Result<Vec<_>>>()?;
    candidates.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    let status = classify(&candidates, tol_sep, truncated);
    let best = best.0.map(|(y, r)| make(y, r)).transpose()?;
    Ok(RecoveryResult {
        candidates,
        status,
        method,
        best,
        evaluated,
        unresolved,
        truncated,
        seed,
    })
}

fn classify(candidates: &[Candidate], tol_sep: f64, truncated: bool) -> Status {
    if candidates.is_empty() {
        return Status::NotFound;
    }
    if truncated {
        return Status::Ambiguous;
    }
    let flat: Vec<_> = candidates.iter().map(|c| c.signal.flatten()).collect();
    for i in 0..flat.len() {
        for j in i + 1..flat.len() {
            if !same_up_to_sign_flat(&flat[i], &flat[j], tol_sep) {
                return Status::Ambiguous;
            }
        }
    }
    Status::UniqueUpToSign
}

fn check_prior(spec: &RepresentationSpec, prior: &dyn PriorSet) -> Result<()> {
    if prior.ambient_dim() != spec.dim() {
        return Err(Error::ShapeMismatch(format!(
            "prior lives in dimension {} but dim V = {}",
            prior.ambient_dim(),
            spec.dim()
        )));
    }
    Ok(())
}

fn check_tolerances(tol_in: f64, tol_sep: f64) -> Result<()> {
    if !(tol_in >= 0.0) || !(tol_sep >= 0.0) {
        return Err(Error::InvalidArgument("tolerances must be non-negative".into()));
    }
    Ok(())
}

/// Every element of `∏ O(1)` (or only the identity for `SO(1)`), for specs
/// made of one-dimensional blocks.
pub fn sign_group(spec: &RepresentationSpec) -> Result<Vec<AmbiguityElement>> {
    if spec.blocks().iter().any(|b| b.dim != 1) {
        return Err(Error::Precondition(
            "sign enumeration needs one-dimensional blocks".into(),
        ));
    }
    let l = spec.len();
    if l > 24 {
        return Err(Error::BudgetExceeded {
            needed: 1u128 << l,
            budget: 1 << 24,
        });
    }
    Ok((0..1usize << l)
        .map(|mask| {
            AmbiguityElement::from_factors_unchecked(
                (0..l)
                    .map(|i| {
                        let s = if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
                        DMatrix::from_element(1, 1, s)
                    })
                    .collect(),
            )
        })
        .collect())
}

/// Scans `h·xhat` for every `h` in `elements`.
pub fn orbit_search_enumerate(
    elements: &[AmbiguityElement],
    xhat: &Signal,
    prior: &dyn PriorSet,
    tol_in: f64,
    tol_sep: f64,
) -> Result<RecoveryResult> {
    check_prior(xhat.spec(), prior)?;
    check_tolerances(tol_in, tol_sep)?;
    let mut target = Target::new(prior);
    let mut set = CandidateSet::new(tol_sep * xhat.norm().max(1.0), false);
    let mut best = Best(None);
    for h in elements {
        let y = h.act(xhat)?.flatten();
        let d = target.distance(&y);
        best.offer(&y, d);
        if d <= tol_in {
            set.insert(y, d);
        }
    }
    let reference = gram_blocks(xhat);
    finish(
        xhat.spec(),
        &reference,
        set,
        best,
        Method::Enumerate,
        tol_sep,
        target.evaluated,
        0,
        None,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Grid steps per full turn.
    pub steps: usize,
    pub budget: u128,
    /// Restrict to `∏ SO(N_ℓ)`.
    pub special: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            steps: DEFAULT_GRID_STEPS,
            budget: DEFAULT_GRID_BUDGET,
            special: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BlockVar {
    /// Acts as the identity: the block is zero.
    Fixed,
    /// `±1`.
    Sign,
    /// Angle on `SO(2)`, optionally with the reflected sheet.
    Angle { reflect: bool },
}

#[derive(Debug, Clone)]
struct Cell {
    /// Per block: sign for `Sign`, sheet (`-1` reflected) for `Angle`.
    discrete: Vec<f64>,
    lo: Vec<u32>,
    hi: Vec<u32>,
}

struct GridSearch<'a> {
    x: &'a Signal,
    offsets: Vec<usize>,
    vars: Vec<BlockVar>,
    norms: Vec<f64>,
    delta: f64,
}

impl GridSearch<'_> {
    fn angle(&self, cell: &Cell, l: usize) -> (f64, f64) {
        let lo = cell.lo[l] as f64;
        let hi = cell.hi[l] as f64;
        let center = 0.5 * (lo + hi - 1.0) * self.delta;
        let half_width = 0.5 * (hi - lo) * self.delta;
        (center, half_width)
    }

    fn factors(&self, cell: &Cell, angles: Option<&[f64]>) -> Vec<DMatrix<f64>> {
        self.vars
            .iter()
            .enumerate()
            .map(|(l, v)| {
                let n = self.x.spec().blocks()[l].dim;
                match v {
                    BlockVar::Fixed => DMatrix::identity(n, n),
                    BlockVar::Sign => DMatrix::from_element(1, 1, cell.discrete[l]),
                    BlockVar::Angle { .. } => {
                        let theta = angles.map_or_else(|| self.angle(cell, l).0, |a| a[l]);
                        if cell.discrete[l] < 0.0 {
                            reflection2(theta)
                        } else {
                            rotation2(theta)
                        }
                    }
                }
            })
            .collect()
    }

    fn is_leaf(&self, cell: &Cell) -> bool {
        self.vars
            .iter()
            .enumerate()
            .all(|(l, v)| !matches!(v, BlockVar::Angle { .. }) || cell.hi[l] - cell.lo[l] <= 1)
    }

    /// Rigorous lower bound on the distance to the prior over every group
    /// element in the cell, together with the distance at its centre.
    fn lower_bound(&self, cell: &Cell, target: &mut Target) -> (DVector<f64>, f64, f64) {
        let factors = self.factors(cell, None);
        let y = apply_flat(self.x, &factors);
        let res = target.residual(&y);
        let d = res.norm();
        let mut r2 = 0.0;
        let mut angle_blocks = Vec::new();
        for (l, v) in self.vars.iter().enumerate() {
            if let BlockVar::Angle { .. } = v {
                let (_, w) = self.angle(cell, l);
                let chord = 2.0 * (w.min(PI) / 2.0).sin();
                r2 += (chord * self.norms[l]).powi(2);
                angle_blocks.push((l, w));
            }
        }
        let mut lb = d - r2.sqrt();
        if let Some(aff) = &target.affine {
            if !angle_blocks.is_empty() && d > 0.0 {
                lb = lb.max(self.linear_bound(&y, &res, aff, &angle_blocks));
            }
        }
        (y, d, lb)
    }

    /// For an affine prior the residual over the cell is
    /// `u + Σ sin φ_j a_j + Σ (cos φ_j − 1) b_j` with `|φ_j| ≤ w_j`, so any
    /// unit `λ` gives `λᵀu − Σ |a_jᵀλ| sin w_j − Σ (1 − cos w_j) ‖b_j‖`.
    fn linear_bound(
        &self,
        y: &DVector<f64>,
        u: &DVector<f64>,
        aff: &AffineModel,
        angle_blocks: &[(usize, f64)],
    ) -> f64 {
        let dim = y.len();
        let k = angle_blocks.len();
        let mut a = DMatrix::zeros(dim, k);
        let mut sigma = Vec::with_capacity(k);
        let mut rho = 0.0;
        for (j, &(l, w)) in angle_blocks.iter().enumerate() {
            let off = self.offsets[l];
            let mult = self.x.spec().blocks()[l].mult;
            // J·Y with J the quarter turn, Y the 2×R block of y
            let mut t = DVector::zeros(dim);
            for c in 0..mult {
                let y0 = y[off + 2 * c];
                let y1 = y[off + 2 * c + 1];
                t[off + 2 * c] = -y1;
                t[off + 2 * c + 1] = y0;
            }
            a.set_column(j, &aff.complement(&t));
            sigma.push(w.min(PI / 2.0).sin());
            rho += (1.0 - w.min(PI).cos()) * self.norms[l];
        }
        let dual = |lambda: &DVector<f64>| -> f64 {
            let at = a.transpose() * lambda;
            lambda.dot(u) - at.iter().zip(&sigma).map(|(v, s)| v.abs() * s).sum::<f64>() - rho
        };
        let un = u.norm();
        let mut best = dual(&(u / un));
        let ata = a.transpose() * &a;
        let ridge = 1e-12 * ata.trace().max(1e-300);
        let reg = &ata + DMatrix::identity(k, k) * ridge;
        if let Some(ch) = reg.cholesky() {
            let mut s = -ch.solve(&(a.transpose() * u));
            for (v, sg) in s.iter_mut().zip(&sigma) {
                *v = v.clamp(-sg, *sg);
            }
            let r = u + &a * s;
            let rn = r.norm();
            if rn > 0.0 {
                best = best.max(dual(&(r / rn)));
            }
        }
        best
    }

    fn split(&self, cell: Cell) -> (Cell, Cell) {
        let l = self
            .vars
            .iter()
            .enumerate()
            .filter(|(l, v)| matches!(v, BlockVar::Angle { .. }) && cell.hi[*l] - cell.lo[*l] > 1)
            .max_by(|(a, _), (b, _)| {
                let wa = self.norms[*a] * (cell.hi[*a] - cell.lo[*a]) as f64;
                let wb = self.norms[*b] * (cell.hi[*b] - cell.lo[*b]) as f64;
                wa.total_cmp(&wb).then(b.cmp(a))
            })
            .map(|(l, _)| l)
            .expect("non-leaf cell has a splittable angle");
        let mid = (cell.lo[l] + cell.hi[l]) / 2;
        let mut left = cell.clone();
        let mut right = cell;
        left.hi[l] = mid;
        right.lo[l] = mid;
        (left, right)
    }
}

/// `(Q_ℓ X_ℓ)_ℓ` flattened.
fn apply_flat(x: &Signal, factors: &[DMatrix<f64>]) -> DVector<f64> {
    let mut out = Vec::with_capacity(x.spec().dim());
    for (q, m) in factors.iter().zip(x.blocks()) {
        out.extend_from_slice((q * m).as_slice());
    }
    DVector::from_vec(out)
}

/// Branch-and-bound over the `δ`-grid of `∏ O(N_ℓ)`, `N_ℓ ≤ 2`.
///
/// Boxes of angles are pruned when a lower bound on the distance to the prior
/// over the whole box exceeds `tol_in`; surviving single-cell boxes are
/// refined by Gauss–Newton on the group and kept when the refined distance is
/// at most `tol_in`. The budget caps the number of boxes evaluated.
pub fn orbit_search_grid(
    xhat: &Signal,
    prior: &dyn PriorSet,
    tol_in: f64,
    tol_sep: f64,
    options: GridOptions,
) -> Result<RecoveryResult> {
    let spec = xhat.spec();
    check_prior(spec, prior)?;
    check_tolerances(tol_in, tol_sep)?;
    if spec.blocks().iter().any(|b| b.dim > 2) {
        return Err(Error::Precondition(
            "grid search needs irreducible dimensions ≤ 2".into(),
        ));
    }
    if options.steps < 4 || options.steps > u32::MAX as usize / 2 {
        return Err(Error::InvalidArgument("grid steps out of range".into()));
    }
    let norms: Vec<f64> = xhat.blocks().iter().map(|m| m.norm()).collect();
    let vars: Vec<BlockVar> = spec
        .blocks()
        .iter()
        .zip(xhat.blocks())
        .zip(&norms)
        .map(|((b, m), &n)| {
            if n == 0.0 {
                BlockVar::Fixed
            } else if b.dim == 1 {
                if options.special {
                    BlockVar::Fixed
                } else {
                    BlockVar::Sign
                }
            } else {
                // O(2)·X = SO(2)·X unless X has rank 2
                let rank2 = m.clone().singular_values().min() > 1e-12 * n && m.ncols() >= 2;
                BlockVar::Angle {
                    reflect: rank2 && !options.special,
                }
            }
        })
        .collect();
    let search = GridSearch {
        x: xhat,
        offsets: spec.offsets(),
        vars,
        norms,
        delta: 2.0 * PI / options.steps as f64,
    };

    // roots: every combination of signs and sheets
    let l = spec.len();
    let choices: Vec<Vec<f64>> = search
        .vars
        .iter()
        .map(|v| match v {
            BlockVar::Fixed => vec![1.0],
            BlockVar::Sign | BlockVar::Angle { reflect: true } => vec![1.0, -1.0],
            BlockVar::Angle { reflect: false } => vec![1.0],
        })
        .collect();
    let roots = choices.iter().map(|c| c.len() as u128).product::<u128>();
    if roots > options.budget {
        return Err(Error::BudgetExceeded {
            needed: roots,
            budget: options.budget,
        });
    }
    let mut stack = Vec::new();
    let mut idx = vec![0usize; l];
    loop {
        let discrete = (0..l).map(|i| choices[i][idx[i]]).collect();
        let hi = search
            .vars
            .iter()
            .map(|v| match v {
                BlockVar::Angle { .. } => options.steps as u32,
                _ => 1,
            })
            .collect();
        stack.push(Cell {
            discrete,
            lo: vec![0; l],
            hi,
        });
        let mut k = 0;
        while k < l {
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == l {
            break;
        }
    }
    stack.reverse();

    let mut target = Target::new(prior);
    let mut set = CandidateSet::new(tol_sep * xhat.norm().max(1.0), false);
    let mut best = Best(None);
    let mut unresolved = 0u64;
    let mut boxes: u128 = 0;
    while let Some(cell) = stack.pop() {
        boxes += 1;
        if boxes > options.budget {
            return Err(Error::BudgetExceeded {
                needed: boxes,
                budget: options.budget,
            });
        }
        let (y, d, lb) = search.lower_bound(&cell, &mut target);
        best.offer(&y, d);
        if lb > tol_in {
            continue;
        }
        if search.is_leaf(&cell) {
            let factors = search.factors(&cell, None);
            let (yr, dr) = refine(xhat, factors, &mut target, 50);
            best.offer(&yr, dr);
            if dr <= tol_in {
                set.insert(yr, dr);
            } else if d <= tol_in {
                set.insert(y, d);
            } else {
                unresolved += 1;
            }
            if set.truncated {
                break;
            }
        } else {
            let (a, b) = search.split(cell);
            stack.push(b);
            stack.push(a);
        }
    }
    let reference = gram_blocks(xhat);
    finish(
        spec,
        &reference,
        set,
        best,
        Method::Grid,
        tol_sep,
        target.evaluated,
        unresolved,
        None,
    )
}

/// Number of cells of the plain `δ`-grid, `(2⌈2π/δ⌉)^{#2-dim}·2^{#1-dim}`.
pub fn full_grid_size(spec: &RepresentationSpec, steps: usize) -> u128 {
    spec.blocks()
        .iter()
        .map(|b| if b.dim == 1 { 2u128 } else { 2 * steps as u128 })
        .fold(1u128, |acc, v| acc.saturating_mul(v))
}

fn skew_basis(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push((i, j));
        }
    }
    out
}

/// `(I − Ω/2)⁻¹ (I + Ω/2)`.
fn cayley(omega: &DMatrix<f64>) -> DMatrix<f64> {
    let n = omega.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let half = omega * 0.5;
    (&id - &half)
        .lu()
        .solve(&(&id + &half))
        .unwrap_or_else(|| id.clone())
}

/// Levenberg–Marquardt on `‖y − proj(y)‖²` over left perturbations
/// `Q_ℓ ← cay(Ω_ℓ) Q_ℓ`. Exact Jacobians for affine priors, forward
/// differences otherwise.
fn refine(
    x: &Signal,
    mut factors: Vec<DMatrix<f64>>,
    target: &mut Target,
    max_iter: usize,
) -> (DVector<f64>, f64) {
    let spec = x.spec();
    let offsets = spec.offsets();
    let params: Vec<(usize, usize, usize)> = spec
        .blocks()
        .iter()
        .enumerate()
        .flat_map(|(l, b)| skew_basis(b.dim).into_iter().map(move |(i, j)| (l, i, j)))
        .collect();
    let mut y = apply_flat(x, &factors);
    let mut res = target.residual(&y);
    let mut cost = res.norm_squared();
    if params.is_empty() {
        return (y, cost.sqrt());
    }
    let scale = x.norm().max(f64::MIN_POSITIVE);
    let mut mu = 1e-6;
    for _ in 0..max_iter {
        if cost.sqrt() <= 1e-15 * scale {
            break;
        }
        let mut jac = DMatrix::zeros(y.len(), params.len());
        for (k, &(l, i, j)) in params.iter().enumerate() {
            let blk = spec.blocks()[l];
            let mut t = DVector::zeros(y.len());
            // (E_ij − E_ji) Y_ℓ
            for c in 0..blk.mult {
                let base = offsets[l] + c * blk.dim;
                t[base + i] = y[base + j];
                t[base + j] = -y[base + i];
            }
            let col = match &target.affine {
                Some(a) => a.complement(&t),
                None => {
                    let h = 1e-7;
                    let rp = target.residual(&(&y + &t * h));
                    (rp - &res) / h
                }
            };
            jac.set_column(k, &col);
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &res;
        let mut improved = false;
        for _ in 0..12 {
            let diag = DMatrix::from_diagonal(&jtj.diagonal().map(|v| v.max(1e-12)));
            let Some(ch) = (&jtj + diag * mu).cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = -ch.solve(&g);
            let mut trial = factors.clone();
            let mut k = 0;
            for (l, blk) in spec.blocks().iter().enumerate() {
                let basis = skew_basis(blk.dim);
                if basis.is_empty() {
                    continue;
                }
                let mut omega = DMatrix::zeros(blk.dim, blk.dim);
                for &(i, j) in &basis {
                    omega[(i, j)] = step[k];
                    omega[(j, i)] = -step[k];
                    k += 1;
                }
                trial[l] = cayley(&omega) * &factors[l];
            }
            let ty = apply_flat(x, &trial);
            let tres = target.residual(&ty);
            let tcost = tres.norm_squared();
            if tcost < cost {
                let gain = cost - tcost;
                factors = trial;
                y = ty;
                res = tres;
                cost = tcost;
                mu = (mu * 0.3).max(1e-12);
                improved = gain > 1e-30 * scale * scale;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (y, cost.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    pub restarts: usize,
    pub iters: usize,
    pub patience: usize,
    pub seed: u64,
    pub special: bool,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions {
            restarts: DEFAULT_RESTARTS,
            iters: DEFAULT_ITERS,
            patience: DEFAULT_PATIENCE,
            seed: 0,
            special: false,
        }
    }
}

/// Riemannian gradient descent on `f(Q) = dist(prior, Q·xhat)²` over
/// `∏ O(N_ℓ)` from Haar-random starts (restart 0 starts at the identity),
/// finished by Levenberg–Marquardt. Restart `i` draws from stream `i` of a
/// generator seeded with `options.seed`.
pub fn orbit_search_local(
    xhat: &Signal,
    prior: &dyn PriorSet,
    tol_in: f64,
    tol_sep: f64,
    options: LocalOptions,
) -> Result<RecoveryResult> {
    let spec = xhat.spec();
    check_prior(spec, prior)?;
    check_tolerances(tol_in, tol_sep)?;
    if options.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is needed".into()));
    }
    let mut target = Target::new(prior);
    let mut set = CandidateSet::new(tol_sep * xhat.norm().max(1.0), true);
    let mut best = Best(None);
    let scale = xhat.norm().max(f64::MIN_POSITIVE);
    let offsets = spec.offsets();
    for restart in 0..options.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(restart as u64);
        let mut factors: Vec<DMatrix<f64>> = if restart == 0 {
            AmbiguityElement::identity(spec).factors().to_vec()
        } else {
            spec.blocks()
                .iter()
                .map(|b| {
                    if options.special {
                        haar_special_orthogonal(b.dim, &mut rng)
                    } else {
                        haar_orthogonal(b.dim, &mut rng)
                    }
                })
                .collect()
        };
        let mut y = apply_flat(xhat, &factors);
        let mut res = target.residual(&y);
        let mut cost = res.norm_squared();
        let mut best_cost = cost;
        let mut stall = 0;
        let mut step = 1.0;
        for _ in 0..options.iters {
            if cost.sqrt() <= 0.1 * tol_in {
                break;
            }
            // Riemannian gradient Q·skew(Qᵀ G) with G_ℓ = 2 R_ℓ X_ℓᵀ;
            // written as a left perturbation Ω_ℓ = skew(G_ℓ Q_ℓᵀ)
            let mut omegas = Vec::with_capacity(spec.len());
            let mut gnorm2 = 0.0;
            for (l, blk) in spec.blocks().iter().enumerate() {
                let r = DMatrix::from_column_slice(
                    blk.dim,
                    blk.mult,
                    &res.as_slice()[offsets[l]..offsets[l] + blk.dim * blk.mult],
                );
                let ycur = &factors[l] * xhat.block(l);
                let g = &r * ycur.transpose() * 2.0;
                let omega = (&g - g.transpose()) * 0.5;
                gnorm2 += omega.norm_squared();
                omegas.push(omega);
            }
            if gnorm2 <= 1e-30 * scale.powi(4) {
                break;
            }
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<DMatrix<f64>> = factors
                    .iter()
                    .zip(&omegas)
                    .map(|(q, om)| cayley(&(om * -step)) * q)
                    .collect();
                let ty = apply_flat(xhat, &trial);
                let tres = target.residual(&ty);
                let tcost = tres.norm_squared();
                if tcost <= cost - 1e-4 * step * gnorm2 {
                    factors = trial;
                    y = ty;
                    res = tres;
                    cost = tcost;
                    accepted = true;
                    step = (step * 2.0).min(1e6);
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            if cost < best_cost * (1.0 - 1e-9) {
                best_cost = cost;
                stall = 0;
            } else {
                stall += 1;
                if stall >= options.patience {
                    break;
                }
            }
        }
        best.offer(&y, cost.sqrt());
        let (yr, dr) = refine(xhat, factors, &mut target, 50);
        best.offer(&yr, dr);
        if dr <= tol_in {
            set.insert(yr, dr);
        }
    }
    let reference = gram_blocks(xhat);
    finish(
        spec,
        &reference,
        set,
        best,
        Method::Local,
        tol_sep,
        target.evaluated,
        0,
        Some(options.seed),
    )
}

/// What was observed about the unknown signal.
#[derive(Debug, Clone)]
pub enum Measurement {
    Gram(GramBlocks),
    /// A second moment of the data-space action; the prior is then given in
    /// data coordinates.
    SecondMoment {
        group: DataGroupSpec,
        estimate: SecondMomentEstimate,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    pub method: Method,
    pub tol_in: f64,
    pub tol_sep: f64,
    /// Candidates whose Gram mismatch exceeds this are discarded.
    pub tol_gram: f64,
    pub grid: GridOptions,
    pub local: LocalOptions,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            method: Method::Grid,
            tol_in: DEFAULT_TOL_IN,
            tol_sep: DEFAULT_TOL_SEP,
            tol_gram: 1e-6,
            grid: GridOptions::default(),
            local: LocalOptions::default(),
        }
    }
}

/// Heuristic size of the statistical error of `h·x̂` in signal space for an
/// empirical second moment: `(tr Ĉ + σ² N)/√n` spread over `‖x̂‖`.
pub fn statistical_error(estimate: &SecondMomentEstimate) -> f64 {
    if estimate.n == 0 {
        return 0.0;
    }
    let dim = estimate.matrix.nrows() as f64;
    let energy = estimate.matrix.trace().max(0.0);
    let spread = (energy + estimate.sigma * estimate.sigma * dim) / (estimate.n as f64).sqrt();
    spread / energy.sqrt().max(1e-12)
}

/// Factor the (possibly estimated) Gram blocks and search the orbit for the
/// prior. Candidates are in isotypic coordinates; for a
/// [`Measurement::SecondMoment`] input use [`to_data_coordinates`] to map
/// them back.
pub fn recover(
    measurement: &Measurement,
    prior: &dyn PriorSet,
    config: &RecoveryConfig,
) -> Result<RecoveryResult> {
    match measurement {
        Measurement::Gram(b) => {
            let clipped = GramBlocks::from_symmetric_clipped(b.spec().clone(), b.blocks().to_vec())?;
            search(&clipped, prior, config)
        }
        Measurement::SecondMoment { group, estimate } => {
            let b = second_moment_to_gram(group, estimate)?;
            let basis = group.isotypic_basis()?;
            if prior.ambient_dim() != basis.nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "prior lives in dimension {} but the data group acts on {}",
                    prior.ambient_dim(),
                    basis.nrows()
                )));
            }
            let view = InBasis::new(prior, basis)?;
            search(&b, &view, config)
        }
    }
}

fn search(b: &GramBlocks, prior: &dyn PriorSet, config: &RecoveryConfig) -> Result<RecoveryResult> {
    let xhat = canonical_factor(b)?;
    let mut result = match config.method {
        Method::Enumerate => {
            let elements = sign_group(b.spec())?;
            orbit_search_enumerate(&elements, &xhat, prior, config.tol_in, config.tol_sep)?
        }
        Method::Grid => orbit_search_grid(&xhat, prior, config.tol_in, config.tol_sep, config.grid)?,
        Method::Local => {
            orbit_search_local(&xhat, prior, config.tol_in, config.tol_sep, config.local)?
        }
    };
    let bnorm = b.frobenius_norm().max(1.0);
    let rescore = |c: &mut Candidate| {
        c.gram_error = gram_blocks(&c.signal).distance(b) / bnorm;
    };
    result.candidates.iter_mut().for_each(rescore);
    if let Some(c) = result.best.as_mut() {
        rescore(c);
    }
    result.candidates.retain(|c| c.gram_error <= config.tol_gram);
    result.status = classify(&result.candidates, config.tol_sep, result.truncated);
    Ok(result)
}

/// `F·flatten(x)` for the isotypic basis `F` of `group`.
pub fn to_data_coordinates(group: &DataGroupSpec, x: &Signal) -> Result<DVector<f64>> {
    Ok(group.isotypic_basis()? * x.flatten())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{GenericTransform, Prior, TransformClass, TranslatedPrior};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn canonical_factor_examples() {
        let spec = RepresentationSpec::from_pairs(&[(3, 2)]).unwrap();
        let zero = GramBlocks::new(spec.clone(), vec![DMatrix::zeros(2, 2)]).unwrap();
        assert_eq!(canonical_factor(&zero).unwrap().norm(), 0.0);

        let sq = RepresentationSpec::from_pairs(&[(3, 3)]).unwrap();
        let id = GramBlocks::new(sq, vec![DMatrix::identity(3, 3)]).unwrap();
        let x = canonical_factor(&id).unwrap();
        assert!(crate::repr::orthogonality_defect(x.block(0)) < 1e-12);

        // rank 2 Gram block with N = 1
        let thin = RepresentationSpec::from_pairs(&[(1, 2)]).unwrap();
        let b = GramBlocks::new(thin, vec![DMatrix::identity(2, 2)]).unwrap();
        assert!(matches!(
            canonical_factor(&b),
            Err(Error::InfeasibleRank { block: 0, rank: 2, dim: 1 })
        ));
    }

    #[test]
    fn canonical_factor_reproduces_gram() {
        let mut r = rng(1);
        let spec = RepresentationSpec::from_pairs(&[(1, 2), (2, 3), (4, 2), (3, 3)]).unwrap();
        for _ in 0..20 {
            let x = Signal::random(&spec, &mut r);
            let b = gram_blocks(&x);
            let xh = canonical_factor(&b).unwrap();
            let err = gram_blocks(&xh).distance(&b);
            assert!(err <= 1e-10 * (1.0 + b.frobenius_norm()), "{err}");
        }
    }

    #[test]
    fn comparator_is_symmetric_and_reflexive() {
        let mut r = rng(2);
        let spec = RepresentationSpec::from_pairs(&[(2, 2)]).unwrap();
        let x = Signal::random(&spec, &mut r);
        let y = Signal::random(&spec, &mut r);
        assert!(same_up_to_sign(&x, &x, 0.0));
        assert!(same_up_to_sign(&x, &x.scale(-1.0), 0.0));
        assert_eq!(same_up_to_sign(&x, &y, 1e-3), same_up_to_sign(&y, &x, 1e-3));
    }

    #[test]
    fn enumerate_sign_group() {
        let mut r = rng(3);
        let spec = RepresentationSpec::from_pairs(&[(1, 1); 10]).unwrap();
        let elements = sign_group(&spec).unwrap();
        assert_eq!(elements.len(), 1024);
        let base = Prior::coordinate_subspace(10, 2).unwrap();
        let prior = TranslatedPrior::sample_generic(base, TransformClass::Gl, &mut r);
        let x = Signal::from_flat(&spec, &prior.sample(&mut r)).unwrap();
        let res = orbit_search_enumerate(&elements, &x, &prior, 1e-8, 1e-3).unwrap();
        assert_eq!(res.status, Status::UniqueUpToSign);
        assert_eq!(res.candidates.len(), 2);
        assert!(res.contains(&x, 1e-10, true));
        assert!(res.contains(&x.scale(-1.0), 1e-10, true));
        assert_eq!(res.evaluated, 1024);
    }

    #[test]
    fn enumerate_zero_tolerance_on_noisy_input() {
        let mut r = rng(4);
        let spec = RepresentationSpec::from_pairs(&[(1, 1); 6]).unwrap();
        let prior = TranslatedPrior::sample_generic(
            Prior::coordinate_subspace(6, 2).unwrap(),
            TransformClass::Aff,
            &mut r,
        );
        let mut v = prior.sample(&mut r);
        v[0] += 1e-3;
        let x = Signal::from_flat(&spec, &v).unwrap();
        let res = orbit_search_enumerate(&sign_group(&spec).unwrap(), &x, &prior, 0.0, 1e-3).unwrap();
        assert_eq!(res.status, Status::NotFound);
        assert!(res.best_residual() > 0.0);
    }

    #[test]
    fn grid_dihedral_eight_line_prior() {
        let mut r = rng(5);
        let spec = RepresentationSpec::dihedral(8).unwrap();
        for _ in 0..5 {
            let prior = TranslatedPrior::sample_generic(
                Prior::coordinate_subspace(8, 1).unwrap(),
                TransformClass::O,
                &mut r,
            );
            let x = Signal::from_flat(&spec, &prior.sample(&mut r)).unwrap();
            let xhat = canonical_factor(&gram_blocks(&x)).unwrap();
            let res = orbit_search_grid(&xhat, &prior, 1e-6, 1e-3, GridOptions::default()).unwrap();
            assert_eq!(res.status, Status::UniqueUpToSign, "{res:?}");
            assert!(res.contains(&x, 1e-6, false));
            assert_eq!(res.unresolved, 0);
        }
    }

    #[test]
    fn grid_full_space_is_ambiguous() {
        let mut r = rng(6);
        let spec = RepresentationSpec::from_pairs(&[(2, 1)]).unwrap();
        let prior = Prior::coordinate_subspace(2, 2).unwrap();
        let x = Signal::random(&spec, &mut r);
        let opts = GridOptions {
            steps: 200,
            ..GridOptions::default()
        };
        let res = orbit_search_grid(&x, &prior, 1e-6, 1e-3, opts).unwrap();
        assert_eq!(res.status, Status::Ambiguous);
        assert_eq!(res.candidates.len(), 200);
    }

    #[test]
    fn grid_so2_two_lines_finds_four_points() {
        let mut r = rng(7);
        let spec = RepresentationSpec::from_pairs(&[(2, 1)]).unwrap();
        let prior = Prior::two_lines([[1.0, 0.0], [0.6, 0.8]]).unwrap();
        let v = prior.sample(&mut r);
        let x = Signal::from_flat(&spec, &v).unwrap();
        let opts = GridOptions {
            special: true,
            ..GridOptions::default()
        };
        let res = orbit_search_grid(&x, &prior, 1e-6, 1e-3, opts).unwrap();
        assert_eq!(res.status, Status::Ambiguous);
        assert_eq!(res.candidates.len(), 4);
    }

    #[test]
    fn grid_rejects_large_blocks_and_budget() {
        let spec = RepresentationSpec::from_pairs(&[(3, 1)]).unwrap();
        let x = Signal::zeros(&spec);
        let prior = Prior::coordinate_subspace(3, 1).unwrap();
        assert!(matches!(
            orbit_search_grid(&x, &prior, 1e-6, 1e-3, GridOptions::default()),
            Err(Error::Precondition(_))
        ));
        let mut r = rng(8);
        let spec = RepresentationSpec::dihedral(16).unwrap();
        let prior = Prior::coordinate_subspace(16, 16).unwrap();
        let x = Signal::random(&spec, &mut r);
        let opts = GridOptions {
            budget: 1000,
            ..GridOptions::default()
        };
        assert!(matches!(
            orbit_search_grid(&x, &prior, 1e-6, 1e-3, opts),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn local_converges_immediately_in_prior() {
        let mut r = rng(9);
        let spec = RepresentationSpec::from_pairs(&[(3, 2), (2, 1)]).unwrap();
        let prior = TranslatedPrior::sample_generic(
            Prior::coordinate_subspace(8, 2).unwrap(),
            TransformClass::O,
            &mut r,
        );
        let x = Signal::from_flat(&spec, &prior.sample(&mut r)).unwrap();
        let opts = LocalOptions {
            restarts: 1,
            ..LocalOptions::default()
        };
        let res = orbit_search_local(&x, &prior, 1e-6, 1e-3, opts).unwrap();
        assert_eq!(res.status, Status::UniqueUpToSign);
        assert!(res.candidates[0].residual <= 1e-10);
    }

    #[test]
    fn local_recovers_from_rotated_factor() {
        let mut r = rng(10);
        let spec = RepresentationSpec::dihedral(10).unwrap();
        let prior = TranslatedPrior::sample_generic(
            Prior::coordinate_subspace(10, 1).unwrap(),
            TransformClass::O,
            &mut r,
        );
        let x = Signal::from_flat(&spec, &prior.sample(&mut r)).unwrap();
        let xhat = canonical_factor(&gram_blocks(&x)).unwrap();
        let res = orbit_search_local(&xhat, &prior, 1e-6, 1e-3, LocalOptions::default()).unwrap();
        assert!(res.contains(&x, 1e-6, false), "{:?}", res.status);
        assert_eq!(res.seed, Some(0));
    }

    #[test]
    fn recover_aff_resolves_sign() {
        let mut r = rng(11);
        let spec = RepresentationSpec::from_pairs(&[(1, 1); 8]).unwrap();
        let prior = TranslatedPrior::sample_generic(
            Prior::coordinate_subspace(8, 3).unwrap(),
            TransformClass::Aff,
            &mut r,
        );
        let x = Signal::from_flat(&spec, &prior.sample(&mut r)).unwrap();
        let config = RecoveryConfig {
            method: Method::Enumerate,
            ..RecoveryConfig::default()
        };
        let res = recover(&Measurement::Gram(gram_blocks(&x)), &prior, &config).unwrap();
        assert!(res.sign_resolved());
        assert!(res.contains(&x, 1e-8, true));
        assert!(res.candidates[0].gram_error < 1e-12);
    }

    #[test]
    fn recover_outside_prior_is_not_found() {
        let mut r = rng(12);
        let spec = RepresentationSpec::from_pairs(&[(1, 1); 6]).unwrap();
        let prior = TranslatedPrior::sample_generic(
            Prior::coordinate_subspace(6, 2).unwrap(),
            TransformClass::Gl,
            &mut r,
        );
        let x = Signal::random(&spec, &mut r);
        let config = RecoveryConfig {
            method: Method::Enumerate,
            ..RecoveryConfig::default()
        };
        let res = recover(&Measurement::Gram(gram_blocks(&x)), &prior, &config).unwrap();
        assert_eq!(res.status, Status::NotFound);
    }

    #[test]
    fn recover_from_exact_second_moment() {
        let mut r = rng(13);
        let group = DataGroupSpec::Dihedral { n: 8 };
        let prior = TranslatedPrior::sample_generic(
            Prior::coordinate_subspace(8, 1).unwrap(),
            TransformClass::O,
            &mut r,
        );
        let x = prior.sample(&mut r);
        let m = crate::invariants::exact_second_moment(&group, &x).unwrap();
        let meas = Measurement::SecondMoment {
            group: group.clone(),
            estimate: SecondMomentEstimate::exact(m),
        };
        let res = recover(&meas, &prior, &RecoveryConfig::default()).unwrap();
        assert_eq!(res.status, Status::UniqueUpToSign);
        let c = to_data_coordinates(&group, &res.candidates[0].signal).unwrap();
        assert!(same_up_to_sign_flat(&c, &x, 1e-6));
    }

    #[test]
    fn cayley_is_orthogonal() {
        let mut r = rng(14);
        let a = DMatrix::<f64>::from_fn(4, 4, |_, _| r.sample(StandardNormal));
        let om = &a - a.transpose();
        assert!(crate::repr::orthogonality_defect(&cayley(&om)) < 1e-12);
        let _ = GenericTransform::identity(2);
    }
}
