//! Does the orbit of a point of a generic translate meet the translate
//! anywhere else?

use nalgebra::{DVector, Vector2};

use crate::bounds::{verdict_real_auto, Scope};
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, RunSpec};
use crate::experiments::report::{Outcome, Report, TrialRecord};
use crate::experiments::{run_trials, trial_rng, trial_seed};
use crate::priors::{Prior, PriorSet, PriorSpec, RayCircle, TransformClass, TranslatedPrior};
use crate::recovery::{
    orbit_search_enumerate, orbit_search_grid, orbit_search_local, sign_group, GridOptions,
    LocalOptions, Method, RecoveryResult,
};
use crate::repr::{AmbiguityElement, RepresentationSpec, Signal};

const MAX_ZERO_RESAMPLES: usize = 100;
const PROBE_ATTEMPTS: usize = 20;

struct Setup<'a> {
    spec: RepresentationSpec,
    base: Prior,
    class: TransformClass,
    method: Method,
    special: bool,
    elements: Option<Vec<AmbiguityElement>>,
    config: &'a ExperimentConfig,
}

impl Setup<'_> {
    fn search(&self, x: &Signal, prior: &TranslatedPrior, seed: u64) -> Result<RecoveryResult> {
        let t = &self.config.tolerances;
        match self.method {
            Method::Enumerate => {
                let elements = self.elements.as_ref().expect("enumeration elements prepared");
                orbit_search_enumerate(elements, x, prior, t.tol_in, t.tol_sep)
            }
            Method::Grid => orbit_search_grid(
                x,
                prior,
                t.tol_in,
                t.tol_sep,
                GridOptions {
                    steps: t.grid_steps,
                    budget: t.grid_budget as u128,
                    special: self.special,
                },
            ),
            Method::Local => orbit_search_local(
                x,
                prior,
                t.tol_in,
                t.tol_sep,
                LocalOptions {
                    restarts: t.restarts,
                    seed,
                    special: self.special,
                    ..LocalOptions::default()
                },
            ),
        }
    }

    /// Some point of the orbit in the prior other than `x` (or `−x` unless
    /// the class is affine).
    fn is_nontrivial(&self, x: &Signal, result: &RecoveryResult) -> bool {
        if result.truncated {
            return true;
        }
        let xf = x.flatten();
        let bound = self.config.tolerances.tol_sep * xf.norm().max(1.0);
        result.candidates.iter().any(|c| {
            let y = c.signal.flatten();
            let minus = (&y - &xf).norm();
            if self.class == TransformClass::Aff {
                minus > bound
            } else {
                minus.min((&y + &xf).norm()) > bound
            }
        })
    }

    fn record(&self, index: usize, seed: u64, group: &str, x: &Signal, prior: &TranslatedPrior) -> Result<TrialRecord> {
        match self.search(x, prior, seed) {
            Ok(result) => {
                let nontrivial = self.is_nontrivial(x, &result);
                let outcome = if nontrivial { Outcome::Nontrivial } else { Outcome::Trivial };
                let mut rec = TrialRecord::new(index, seed, group, outcome)
                    .with_residual(prior.distance(&x.flatten()));
                rec.nontrivial = Some(nontrivial);
                rec.candidates = result.candidates.len();
                if prior.transform().resamples() > 0 {
                    rec.note = Some(format!("transform resampled {} times", prior.transform().resamples()));
                }
                Ok(rec)
            }
            Err(e @ Error::BudgetExceeded { .. }) => Ok(TrialRecord::skipped(index, seed, group, e.to_string())),
            Err(e) => Err(e),
        }
    }
}

pub(crate) fn run(config: &ExperimentConfig) -> Result<Report> {
    let RunSpec::Transversality {
        spec,
        prior,
        class,
        method,
        special,
        probe,
    } = &config.run
    else {
        unreachable!("dispatched on the experiment kind")
    };
    let rs = spec.build()?;
    let base = prior.build()?;
    let elements = match method {
        Method::Enumerate => {
            let all = sign_group(&rs)?;
            // SO(1) is trivial
            Some(if *special { all.into_iter().take(1).collect() } else { all })
        }
        _ => None,
    };
    let setup = Setup {
        spec: rs.clone(),
        base: base.clone(),
        class: *class,
        method: *method,
        special: *special,
        elements,
        config,
    };
    let trials = run_trials(config.base_seed, config.trials, |i, seed| {
        let mut rng = trial_rng(seed);
        let prior = TranslatedPrior::sample_generic(setup.base.clone(), setup.class, &mut rng);
        let mut x = prior.sample(&mut rng);
        let mut draws = 0;
        while x.norm() < 1e-9 {
            draws += 1;
            if draws > MAX_ZERO_RESAMPLES {
                return Ok(TrialRecord::skipped(i, seed, "generic", "prior samples are all zero".into()));
            }
            x = prior.sample(&mut rng);
        }
        let signal = Signal::from_flat(&setup.spec, &x)?;
        setup.record(i, seed, "generic", &signal, &prior)
    })?;

    let mut trials = trials;
    if *probe {
        let index = trials.len();
        let seed = trial_seed(config.base_seed, index);
        trials.push(run_probe(&setup, prior, index, seed)?);
    }

    let verdict = verdict_real_auto(&rs, base.declared_dim(), *class);
    let mut report = Report::new(config, trials);
    report.set_verdict("generic", verdict);
    let rate = report.aggregates.get("generic").and_then(|a| a.nontrivial_rate);
    report.set_summary("nontrivial_rate", rate);
    report.set_summary("prior_dim", base.declared_dim());
    report.set_summary("effective_dim", rs.effective_dim().effective);
    // all-points verdicts promise no nontrivial intersection at all
    if verdict.scope == Scope::AllPoints && *method != Method::Local {
        report.set_summary("coherent_with_verdict", rate.is_none_or(|r| r == 0.0));
    }
    Ok(report)
}

/// Finds a point of a translated ray ∪ circle whose sign-flipped copy lies on
/// the same set, then searches its orbit.
fn run_probe(setup: &Setup, spec: &PriorSpec, index: usize, seed: u64) -> Result<TrialRecord> {
    let PriorSpec::RayCircle { geometry } = spec else {
        return Err(Error::Config("the targeted probe needs a ray_circle prior".into()));
    };
    let geometry = geometry.unwrap_or_default();
    let mut rng = trial_rng(seed);
    for attempt in 0..PROBE_ATTEMPTS {
        let prior = TranslatedPrior::sample_generic(setup.base.clone(), setup.class, &mut rng);
        if let Some(point) = coincidence_point(&prior, &geometry, setup.config.tolerances.tol_sep) {
            let signal = Signal::from_flat(&setup.spec, &point)?;
            let mut rec = setup.record(index, seed, "probe", &signal, &prior)?;
            rec.note = Some(format!(
                "coincidence point ({:.6}, {:.6}) after {} redraws",
                point[0], point[1], attempt
            ));
            return Ok(rec);
        }
    }
    let mut rec = TrialRecord::new(index, seed, "probe", Outcome::Fail);
    rec.note = Some(format!("no coincidence point in {PROBE_ATTEMPTS} translates"));
    Ok(rec)
}

/// The translated set as an implicit description.
struct Shapes {
    /// Ellipse `{v : φ(v) = 0}` with `φ(v) = ‖A⁻¹(v − b) − c‖² − r²`.
    inv: nalgebra::Matrix2<f64>,
    shift: Vector2<f64>,
    center: Vector2<f64>,
    radius: f64,
    ray_origin: Vector2<f64>,
    ray_direction: Vector2<f64>,
    fwd: nalgebra::Matrix2<f64>,
}

impl Shapes {
    fn new(prior: &TranslatedPrior, rc: &RayCircle) -> Self {
        let t = prior.transform();
        let fwd = nalgebra::Matrix2::from_iterator(t.linear().iter().copied());
        let shift = Vector2::new(t.shift()[0], t.shift()[1]);
        let inv = fwd.try_inverse().expect("generic transforms are invertible");
        let o = Vector2::from(rc.ray_origin);
        let d = Vector2::from(rc.ray_direction);
        Shapes {
            inv,
            shift,
            center: Vector2::from(rc.center),
            radius: rc.radius,
            ray_origin: fwd * o + shift,
            ray_direction: fwd * d,
            fwd,
        }
    }

    fn ellipse(&self, v: &Vector2<f64>) -> f64 {
        (self.inv * (v - self.shift) - self.center).norm_squared() - self.radius * self.radius
    }

    fn ellipse_point(&self, t: f64) -> Vector2<f64> {
        self.fwd * (self.center + self.radius * Vector2::new(t.cos(), t.sin())) + self.shift
    }

    /// Signed distance-like function of the ray's supporting line and the
    /// position along it.
    fn ray(&self, v: &Vector2<f64>) -> (f64, f64) {
        let w = v - self.ray_origin;
        let d = self.ray_direction;
        ((d.x * w.y - d.y * w.x) / d.norm(), w.dot(&d) / d.norm_squared())
    }

    fn ray_point(&self, s: f64) -> Vector2<f64> {
        self.ray_origin + s * self.ray_direction
    }
}

fn coincidence_point(prior: &TranslatedPrior, rc: &RayCircle, sep: f64) -> Option<DVector<f64>> {
    let shapes = Shapes::new(prior, rc);
    let flips = [Vector2::new(-1.0, 1.0), Vector2::new(1.0, -1.0), Vector2::new(-1.0, -1.0)];
    let separated = |p: &Vector2<f64>, h: &Vector2<f64>| (p.component_mul(h) - p).norm() > sep * p.norm().max(1.0);
    const SAMPLES: usize = 4096;

    // points of the ellipse whose flip lies on the ellipse or on the ray
    for h in &flips {
        let on_ellipse = |t: f64| shapes.ellipse(&shapes.ellipse_point(t).component_mul(h));
        let on_ray = |t: f64| shapes.ray(&shapes.ellipse_point(t).component_mul(h)).0;
        let tau = std::f64::consts::TAU;
        for f in [&on_ellipse as &dyn Fn(f64) -> f64, &on_ray] {
            for k in 0..SAMPLES {
                let (a, b) = (tau * k as f64 / SAMPLES as f64, tau * (k + 1) as f64 / SAMPLES as f64);
                if let Some(t) = bisect(f, a, b) {
                    let p = shapes.ellipse_point(t);
                    let q = p.component_mul(h);
                    let lands = shapes.ellipse(&q).abs() < 1e-9 || shapes.ray(&q).1 >= 0.0;
                    if lands && separated(&p, h) {
                        return Some(DVector::from_column_slice(p.as_slice()));
                    }
                }
            }
        }
        // points of the ray whose flip lies on the ellipse
        let along = |s: f64| shapes.ellipse(&shapes.ray_point(s).component_mul(h));
        let reach = 10.0 * (1.0 + shapes.shift.norm() + shapes.fwd.norm()) / shapes.ray_direction.norm();
        for k in 0..SAMPLES {
            let (a, b) = (reach * k as f64 / SAMPLES as f64, reach * (k + 1) as f64 / SAMPLES as f64);
            if let Some(s) = bisect(&along, a, b) {
                let p = shapes.ray_point(s);
                if separated(&p, h) {
                    return Some(DVector::from_column_slice(p.as_slice()));
                }
            }
        }
    }
    None
}

fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) < 1e-15 * (1.0 + m.abs()) {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}
