//! Examples showing that the dimension thresholds cannot be lowered.

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use rand::Rng;

use crate::bounds::verdict_real_auto;
use crate::error::Result;
use crate::experiments::config::{ExperimentConfig, SharpnessCase};
use crate::experiments::report::{Outcome, Report, TrialRecord};
use crate::experiments::{run_trials, trial_rng};
use crate::priors::{GenericTransform, Prior, PriorSet, TransformClass, TranslatedPrior};
use crate::repr::{rotation2, RepresentationSpec};

type Q = Rational64;

/// Coefficients of `a x + b y + A − (c x + d y + B)² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaCoefficients {
    pub a: Q,
    pub b: Q,
    pub c: Q,
    pub d: Q,
    pub shift_a: Q,
    pub shift_b: Q,
}

impl ParabolaCoefficients {
    pub fn linear(a: i64, b: i64, c: i64, d: i64) -> Self {
        ParabolaCoefficients {
            a: Q::from_integer(a),
            b: Q::from_integer(b),
            c: Q::from_integer(c),
            d: Q::from_integer(d),
            shift_a: Q::from_integer(0),
            shift_b: Q::from_integer(0),
        }
    }

    pub fn residual(&self, x: Q, y: Q) -> Q {
        let inner = self.c * x + self.d * y + self.shift_b;
        self.a * x + self.b * y + self.shift_a - inner * inner
    }

    /// Residual at `(±√xx, y)` split into the part odd in `x` (a multiple
    /// of `x`) and the even part; both vanish iff both points lie on the
    /// curve.
    pub fn mirrored_residual(&self, xx: Q, y: Q) -> (Q, Q) {
        let inner = self.d * y + self.shift_b;
        let odd = self.a - Q::from_integer(2) * self.c * inner;
        let even = self.b * y + self.shift_a - self.c * self.c * xx - inner * inner;
        (odd, even)
    }

    /// The mirrored pair `(±x, y)` as `(x², y)`, when it exists with
    /// `x y ≠ 0`.
    pub fn mirrored_pair(&self) -> Option<(Q, Q)> {
        let zero = Q::from_integer(0);
        if self.c == zero || self.d == zero {
            return None;
        }
        let y = (self.a / (Q::from_integer(2) * self.c) - self.shift_b) / self.d;
        let inner = self.d * y + self.shift_b;
        let xx = (self.b * y + self.shift_a - inner * inner) / (self.c * self.c);
        (xx > zero && y != zero).then_some((xx, y))
    }

    fn determinant(&self) -> Q {
        self.c * self.b - self.d * self.a
    }

    /// The translate `θ·{y = x²}` cut out by these coefficients:
    /// `θ⁻¹(v) = [[c, d], [a, b]] v + (B, A)`.
    fn translate(&self) -> Option<TranslatedPrior> {
        if self.determinant() == Q::from_integer(0) {
            return None;
        }
        let f = |q: Q| *q.numer() as f64 / *q.denom() as f64;
        let inv = DMatrix::from_row_slice(2, 2, &[f(self.c), f(self.d), f(self.a), f(self.b)]);
        let lin = inv.try_inverse()?;
        let offset = DVector::from_vec(vec![f(self.shift_b), f(self.shift_a)]);
        let shift = -(&lin * offset);
        let affine = self.shift_a != Q::from_integer(0) || self.shift_b != Q::from_integer(0);
        let (class, shift) = if affine {
            (TransformClass::Aff, Some(shift))
        } else {
            (TransformClass::Gl, None)
        };
        let t = GenericTransform::from_parts(class, lin, shift).ok()?;
        TranslatedPrior::new(Prior::parabola(), t).ok()
    }
}

/// Numerator range of the `k/1000` perturbations of each coefficient.
const PERTURBATION: i64 = 20;

pub(crate) fn run(config: &ExperimentConfig, case: SharpnessCase) -> Result<Report> {
    match case {
        SharpnessCase::ParabolaGl | SharpnessCase::ParabolaAff => parabola(config, case),
        SharpnessCase::Z4Grid => z4(config),
        SharpnessCase::So2Points => so2(config),
    }
}

fn parabola(config: &ExperimentConfig, case: SharpnessCase) -> Result<Report> {
    let affine = case == SharpnessCase::ParabolaAff;
    let base = ParabolaCoefficients::linear(1, 2, 2, 4);
    let x = Q::new(1, 8);
    let y = Q::new(1, 16);
    let identities = [base.residual(x, y), base.residual(-x, y)];
    let exact = identities.iter().all(|r| *r == Q::from_integer(0));

    let trials = run_trials(config.base_seed, config.trials, |i, seed| {
        let mut rng = trial_rng(seed);
        let mut nudge = |q: Q| q + Q::new(rng.random_range(-PERTURBATION..=PERTURBATION), 1000);
        // singular draws are not group elements
        let coeffs = loop {
            let mut coeffs = ParabolaCoefficients {
                a: nudge(base.a),
                b: nudge(base.b),
                c: nudge(base.c),
                d: nudge(base.d),
                shift_a: base.shift_a,
                shift_b: base.shift_b,
            };
            if affine {
                coeffs.shift_a = nudge(base.shift_a);
                coeffs.shift_b = nudge(base.shift_b);
            }
            if coeffs.determinant() != Q::from_integer(0) {
                break coeffs;
            }
        };
        let mut rec = TrialRecord::new(i, seed, "perturbed", Outcome::Fail);
        let Some((xx, y)) = coeffs.mirrored_pair() else {
            rec.success = Some(false);
            rec.note = Some("no mirrored pair".into());
            return Ok(rec);
        };
        let zero = Q::from_integer(0);
        let holds = coeffs.mirrored_residual(xx, y) == (zero, zero);
        // cross-check against the floating-point prior
        let xf = (*xx.numer() as f64 / *xx.denom() as f64).sqrt();
        let yf = *y.numer() as f64 / *y.denom() as f64;
        let distance = coeffs.translate().map(|p| {
            let d1 = p.distance(&DVector::from_vec(vec![xf, yf]));
            let d2 = p.distance(&DVector::from_vec(vec![-xf, yf]));
            d1.max(d2)
        });
        let ok = holds && coeffs.determinant() != zero && distance.is_some_and(|d| d <= 1e-6);
        rec.outcome = if ok { Outcome::Pass } else { Outcome::Fail };
        rec.success = Some(ok);
        rec.nontrivial = Some(ok);
        rec.candidates = 2;
        rec.residual = distance;
        rec.note = Some(format!("x² = {xx}, y = {y}"));
        Ok(rec)
    })?;

    let mut report = Report::new(config, trials);
    report.set_summary("identities_exact", exact);
    report.set_summary("identity_residuals", identities.map(|r| r.to_string()));
    report.set_summary(
        "base_determinant",
        base.determinant().to_string(),
    );
    let signs = RepresentationSpec::from_pairs(&[(1, 1), (1, 1)])?;
    let class = if affine { TransformClass::Aff } else { TransformClass::Gl };
    report.set_verdict("prior_dim_1", verdict_real_auto(&signs, 1, class));
    Ok(report)
}

/// Generator of the quarter-turn group: `(x, y) ↦ (y, −x)`.
fn quarter_turn(p: [f64; 2]) -> [f64; 2] {
    [p[1], -p[0]]
}

fn z4(config: &ExperimentConfig) -> Result<Report> {
    let trials = run_trials(config.base_seed, config.trials, |i, seed| {
        let mut rng = trial_rng(seed);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let (s, c) = theta.sin_cos();
        let points = [[c, s], [-c, -s], [-s, c], [s, -c]];
        let mut orbit = vec![points[0]];
        for k in 1..4 {
            orbit.push(quarter_turn(orbit[k - 1]));
        }
        let ok = points.iter().all(|p| orbit.contains(p));
        let mut rec = TrialRecord::new(i, seed, "rotations", if ok { Outcome::Pass } else { Outcome::Fail });
        rec.success = Some(ok);
        rec.nontrivial = Some(ok);
        rec.candidates = points.iter().filter(|p| orbit.contains(p)).count();
        Ok(rec)
    })?;
    let mut report = Report::new(config, trials);
    // a finite group has k = 0, which the sign-pair spec reproduces
    let spec = RepresentationSpec::from_pairs(&[(1, 1), (1, 1)])?;
    report.set_verdict("prior_dim_0", verdict_real_auto(&spec, 0, TransformClass::O));
    Ok(report)
}

fn so2(config: &ExperimentConfig) -> Result<Report> {
    let steps = config.tolerances.grid_steps;
    let delta = std::f64::consts::TAU / steps as f64;
    let trials = run_trials(config.base_seed, config.trials, |i, seed| {
        let mut rng = trial_rng(seed);
        let rot = rotation2(rng.random_range(0.0..std::f64::consts::TAU));
        let points: Vec<DVector<f64>> = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
            .iter()
            .map(|p| &rot * DVector::from_column_slice(p))
            .collect();
        let p = &points[0];
        // nearest grid rotation carrying p to each other point
        let worst = points
            .iter()
            .map(|q| {
                let angle = q[1].atan2(q[0]) - p[1].atan2(p[0]);
                let k = (angle / delta).round();
                (rotation2(k * delta) * p - q).norm()
            })
            .fold(0.0, f64::max);
        let ok = worst <= delta * p.norm();
        let mut rec = TrialRecord::new(i, seed, "rotations", if ok { Outcome::Pass } else { Outcome::Fail })
            .with_residual(worst);
        rec.success = Some(ok);
        rec.nontrivial = Some(ok);
        rec.candidates = points.len();
        Ok(rec)
    })?;
    let mut report = Report::new(config, trials);
    let spec = RepresentationSpec::from_pairs(&[(2, 1)])?;
    report.set_verdict("prior_dim_0", verdict_real_auto(&spec, 0, TransformClass::O));
    report.set_summary("grid_step", delta);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::RunSpec;
    use crate::experiments::run;

    fn report(case: SharpnessCase) -> Report {
        run(&ExperimentConfig::new(3, 100, RunSpec::Sharpness { case })).unwrap()
    }

    #[test]
    fn parabola_identities_are_exact() {
        let c = ParabolaCoefficients::linear(1, 2, 2, 4);
        assert_eq!(c.residual(Q::new(1, 8), Q::new(1, 16)), Q::from_integer(0));
        assert_eq!(c.residual(Q::new(-1, 8), Q::new(1, 16)), Q::from_integer(0));
        assert_ne!(c.residual(Q::new(1, 8), Q::new(1, 8)), Q::from_integer(0));
        assert_eq!(c.mirrored_pair(), Some((Q::new(1, 64), Q::new(1, 16))));
    }

    #[test]
    fn perturbed_parabolas_keep_mirrored_points() {
        for case in [SharpnessCase::ParabolaGl, SharpnessCase::ParabolaAff] {
            let rep = report(case);
            assert_eq!(rep.summary["identities_exact"], true);
            assert_eq!(rep.overall().success_rate, Some(1.0), "{case:?}");
        }
    }

    #[test]
    fn rotated_square_is_one_orbit() {
        for case in [SharpnessCase::Z4Grid, SharpnessCase::So2Points] {
            let rep = report(case);
            assert_eq!(rep.overall().successes, 100, "{case:?}");
            assert_eq!(rep.verdicts["prior_dim_0"]["scope"], "none");
        }
    }
}
