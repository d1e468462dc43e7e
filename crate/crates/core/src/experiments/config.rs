//! Versioned JSON experiment configuration.

use serde::{Deserialize, Serialize};

use crate::bounds::ComplexClass;
use crate::error::{Error, Result};
use crate::priors::{PriorSpec, RayCircle, TransformClass};
use crate::recovery::{
    Method, DEFAULT_GRID_BUDGET, DEFAULT_GRID_STEPS, DEFAULT_RESTARTS, DEFAULT_TOL_IN,
    DEFAULT_TOL_SEP,
};
use crate::repr::{Block, DataGroupSpec, RepresentationSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub base_seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub run: RunSpec,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub tol_in: f64,
    pub tol_sep: f64,
    pub grid_steps: usize,
    pub grid_budget: u64,
    pub restarts: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_in: DEFAULT_TOL_IN,
            tol_sep: DEFAULT_TOL_SEP,
            grid_steps: DEFAULT_GRID_STEPS,
            grid_budget: DEFAULT_GRID_BUDGET as u64,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

/// Representation given by name or by explicit blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpecDescriptor {
    Dihedral { n: usize },
    Cryoem { bandlimit: usize, radial: usize },
    /// `(N_ℓ, R_ℓ)` pairs.
    Blocks { blocks: Vec<(usize, usize)> },
}

impl SpecDescriptor {
    pub fn build(&self) -> Result<RepresentationSpec> {
        match self {
            SpecDescriptor::Dihedral { n } => RepresentationSpec::dihedral(*n),
            SpecDescriptor::Cryoem { bandlimit, radial } => {
                RepresentationSpec::cryoem(*bandlimit, *radial)
            }
            SpecDescriptor::Blocks { blocks } => RepresentationSpec::from_pairs(blocks),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "calculator", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundsQuery {
    Real {
        spec: SpecDescriptor,
        m: usize,
        class: TransformClass,
        /// Derived from the representation when absent.
        #[serde(default)]
        connected: Option<bool>,
    },
    Complex {
        blocks: Vec<(usize, usize)>,
        m: usize,
        class: ComplexClass,
    },
    PhaseRetrieval {
        n: usize,
        m: usize,
        class: TransformClass,
    },
    Cryoem {
        bandlimit: usize,
        radial: usize,
        m: usize,
        class: TransformClass,
    },
    Gram {
        n: usize,
        r: usize,
        m: usize,
        class: TransformClass,
    },
    Rowsort {
        d: usize,
        n: usize,
        m: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpnessCase {
    ParabolaGl,
    ParabolaAff,
    Z4Grid,
    So2Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RunSpec {
    Bounds {
        query: BoundsQuery,
    },
    Transversality {
        spec: SpecDescriptor,
        prior: PriorSpec,
        class: TransformClass,
        method: Method,
        /// Search `∏ SO(N_ℓ)` instead of `∏ O(N_ℓ)`.
        #[serde(default)]
        special: bool,
        /// Also construct a point whose orbit meets the prior nontrivially
        /// (ray ∪ circle priors under sign changes of the plane).
        #[serde(default)]
        probe: bool,
    },
    Sharpness {
        case: SharpnessCase,
    },
    RecoverSweep {
        spec: SpecDescriptor,
        /// Subspace prior dimensions to sweep.
        dims: Vec<usize>,
        class: TransformClass,
        method: Method,
    },
    Separator {
        d: usize,
        n: usize,
        m: usize,
        /// Use the untranslated witness prior instead of a generic one.
        #[serde(default)]
        witness: bool,
    },
    MraNoise {
        group: DataGroupSpec,
        sigma: f64,
        m: usize,
        sample_sizes: Vec<usize>,
        class: TransformClass,
        /// Norm of the sampled signal; `√N` when absent.
        #[serde(default)]
        signal_norm: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Bounds,
    Transversality,
    Sharpness,
    RecoverSweep,
    Separator,
    MraNoise,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Bounds,
        ExperimentKind::Transversality,
        ExperimentKind::Sharpness,
        ExperimentKind::RecoverSweep,
        ExperimentKind::Separator,
        ExperimentKind::MraNoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::Transversality => "transversality",
            ExperimentKind::Sharpness => "sharpness",
            ExperimentKind::RecoverSweep => "recover-sweep",
            ExperimentKind::Separator => "separator",
            ExperimentKind::MraNoise => "mra-noise",
        }
    }
}

impl RunSpec {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            RunSpec::Bounds { .. } => ExperimentKind::Bounds,
            RunSpec::Transversality { .. } => ExperimentKind::Transversality,
            RunSpec::Sharpness { .. } => ExperimentKind::Sharpness,
            RunSpec::RecoverSweep { .. } => ExperimentKind::RecoverSweep,
            RunSpec::Separator { .. } => ExperimentKind::Separator,
            RunSpec::MraNoise { .. } => ExperimentKind::MraNoise,
        }
    }
}

impl ExperimentConfig {
    pub fn new(base_seed: u64, trials: usize, run: RunSpec) -> Self {
        ExperimentConfig {
            schema: SCHEMA_VERSION,
            base_seed,
            trials,
            tolerances: Tolerances::default(),
            run,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let t = &self.tolerances;
        if !(t.tol_in >= 0.0 && t.tol_sep >= 0.0) {
            return bad("tolerances must be non-negative".into());
        }
        if t.grid_steps < 4 || t.restarts == 0 || t.grid_budget == 0 {
            return bad("grid_steps ≥ 4, restarts ≥ 1 and grid_budget ≥ 1 are required".into());
        }
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(e.to_string()));
        match &self.run {
            RunSpec::Bounds { query } => wrap(validate_query(query)),
            RunSpec::Transversality {
                spec, prior, probe, ..
            } => {
                let rs = spec.build().map_err(|e| Error::Config(e.to_string()))?;
                let p = prior.build().map_err(|e| Error::Config(e.to_string()))?;
                if crate::priors::PriorSet::ambient_dim(&p) != rs.dim() {
                    return bad(format!(
                        "prior dimension {} differs from dim V = {}",
                        crate::priors::PriorSet::ambient_dim(&p),
                        rs.dim()
                    ));
                }
                if *probe && !matches!(prior, PriorSpec::RayCircle { .. }) {
                    return bad("the targeted probe needs a ray_circle prior".into());
                }
                if *probe && rs.blocks().iter().any(|b| b.dim != 1) {
                    return bad("the targeted probe needs a sign-change group".into());
                }
                Ok(())
            }
            RunSpec::Sharpness { .. } => Ok(()),
            RunSpec::RecoverSweep { spec, dims, .. } => {
                let rs = spec.build().map_err(|e| Error::Config(e.to_string()))?;
                if dims.is_empty() || dims.iter().any(|&m| m > rs.dim()) {
                    return bad(format!("dims must be non-empty and at most dim V = {}", rs.dim()));
                }
                Ok(())
            }
            RunSpec::Separator { d, n, m, witness } => {
                if *d == 0 || *n == 0 || *m > d * n {
                    return bad("separator needs d, n ≥ 1 and m ≤ dn".into());
                }
                let count = (1..=*n as u128).product::<u128>().checked_pow(*d as u32);
                if count.is_none_or(|c| c > 1_000_000) {
                    return bad("(n!)^d must not exceed 10⁶".into());
                }
                if *witness && (*d, *n, *m) != (2, 3, 2) {
                    return bad("the witness prior is defined for d = 2, n = 3, m = 2".into());
                }
                Ok(())
            }
            RunSpec::MraNoise {
                group,
                sigma,
                m,
                sample_sizes,
                signal_norm,
                ..
            } => {
                if !(*sigma >= 0.0) || !sigma.is_finite() {
                    return bad("sigma must be finite and non-negative".into());
                }
                if !matches!(group, DataGroupSpec::Cyclic { .. } | DataGroupSpec::Dihedral { .. }) {
                    return bad("mra-noise supports cyclic and dihedral groups".into());
                }
                wrap(group.validate())?;
                if *m > group.ambient_dim() {
                    return bad("prior dimension exceeds the signal length".into());
                }
                if sample_sizes.is_empty() || sample_sizes.contains(&0) {
                    return bad("sample_sizes must be non-empty and positive".into());
                }
                if signal_norm.is_some_and(|s| !(s > 0.0)) {
                    return bad("signal_norm must be positive".into());
                }
                Ok(())
            }
        }
    }

    /// Built-in configuration for each subcommand, used when no config file
    /// is given.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let run = match kind {
            ExperimentKind::Bounds => RunSpec::Bounds {
                query: BoundsQuery::Cryoem {
                    bandlimit: 2,
                    radial: 5,
                    m: 20,
                    class: TransformClass::Gl,
                },
            },
            ExperimentKind::Transversality => RunSpec::Transversality {
                spec: SpecDescriptor::Blocks {
                    blocks: vec![(1, 1); 10],
                },
                prior: PriorSpec::Subspace {
                    ambient_dim: 10,
                    dim: 4,
                },
                class: TransformClass::Aff,
                method: Method::Enumerate,
                special: false,
                probe: false,
            },
            ExperimentKind::Sharpness => RunSpec::Sharpness {
                case: SharpnessCase::ParabolaGl,
            },
            ExperimentKind::RecoverSweep => RunSpec::RecoverSweep {
                spec: SpecDescriptor::Dihedral { n: 16 },
                dims: vec![1, 2, 3, 4, 5],
                class: TransformClass::O,
                method: Method::Grid,
            },
            ExperimentKind::Separator => RunSpec::Separator {
                d: 2,
                n: 3,
                m: 2,
                witness: false,
            },
            ExperimentKind::MraNoise => RunSpec::MraNoise {
                group: DataGroupSpec::Cyclic { n: 8 },
                sigma: 1.0,
                m: 1,
                sample_sizes: vec![1_000, 10_000, 100_000],
                class: TransformClass::O,
                signal_norm: None,
            },
        };
        let trials = match kind {
            ExperimentKind::Bounds => 1,
            ExperimentKind::Sharpness => 100,
            ExperimentKind::RecoverSweep => 20,
            ExperimentKind::MraNoise => 20,
            _ => 1000,
        };
        ExperimentConfig::new(0, trials, run)
    }
}

fn validate_query(q: &BoundsQuery) -> Result<()> {
    match q {
        BoundsQuery::Real { spec, .. } => spec.build().map(|_| ()),
        BoundsQuery::Complex { blocks, .. } => {
            if blocks.is_empty() || blocks.iter().any(|&(n, r)| n == 0 || r == 0) {
                return Err(Error::InvalidSpec("complex blocks need N, R ≥ 1".into()));
            }
            Ok(())
        }
        BoundsQuery::PhaseRetrieval { n, .. } => {
            if *n < 2 {
                return Err(Error::InvalidArgument("N must be at least 2".into()));
            }
            Ok(())
        }
        BoundsQuery::Cryoem { radial, .. } => {
            if *radial == 0 {
                return Err(Error::InvalidArgument("R must be at least 1".into()));
            }
            Ok(())
        }
        BoundsQuery::Gram { n, r, .. } => RepresentationSpec::new(vec![Block::new(*n, *r)]).map(|_| ()),
        BoundsQuery::Rowsort { d, n, .. } => {
            if *d == 0 || *n == 0 {
                return Err(Error::InvalidArgument("d, n must be at least 1".into()));
            }
            Ok(())
        }
    }
}

/// Figure-style presets for the transversality experiment.
pub fn transversality_preset(name: &str) -> Option<RunSpec> {
    let signs2 = SpecDescriptor::Blocks {
        blocks: vec![(1, 1), (1, 1)],
    };
    Some(match name {
        "sign-grid-2d" => RunSpec::Transversality {
            spec: signs2,
            prior: PriorSpec::Grid {
                levels: vec![-1.0, 0.0, 1.0],
                ambient_dim: 2,
            },
            class: TransformClass::Aff,
            method: Method::Enumerate,
            special: false,
            probe: false,
        },
        "sign-ray-circle-2d" => RunSpec::Transversality {
            spec: signs2,
            prior: PriorSpec::RayCircle {
                geometry: Some(RayCircle::default()),
            },
            class: TransformClass::Aff,
            method: Method::Enumerate,
            special: false,
            probe: true,
        },
        "so2-two-lines" => RunSpec::Transversality {
            spec: SpecDescriptor::Blocks {
                blocks: vec![(2, 1)],
            },
            prior: PriorSpec::TwoLines {
                directions: [[1.0, 0.0], [0.0, 1.0]],
            },
            class: TransformClass::Gl,
            method: Method::Grid,
            special: true,
            probe: false,
        },
        "sign-subspace" => ExperimentConfig::default_for(ExperimentKind::Transversality).run,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for kind in ExperimentKind::ALL {
            let cfg = ExperimentConfig::default_for(kind);
            cfg.validate().unwrap();
            assert_eq!(cfg.run.kind(), kind);
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
        }
        for name in ["sign-grid-2d", "sign-ray-circle-2d", "so2-two-lines", "sign-subspace"] {
            let cfg = ExperimentConfig::new(1, 10, transversality_preset(name).unwrap());
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = serde_json::to_value(ExperimentConfig::default_for(ExperimentKind::Separator)).unwrap();
        v["run"]["bogus"] = serde_json::json!(1);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        let mut v = serde_json::to_value(ExperimentConfig::default_for(ExperimentKind::Separator)).unwrap();
        v["extra"] = serde_json::json!(true);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        let mut v = serde_json::to_value(ExperimentConfig::default_for(ExperimentKind::Bounds)).unwrap();
        v["tolerances"]["tol_typo"] = serde_json::json!(1.0);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::MraNoise);
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::MraNoise);
        if let RunSpec::MraNoise { sigma, .. } = &mut cfg.run {
            *sigma = -1.0;
        }
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Separator);
        cfg.schema = 2;
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::new(
            0,
            1,
            RunSpec::Separator { d: 2, n: 10, m: 1, witness: false },
        );
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Transversality);
        if let RunSpec::Transversality { prior, .. } = &mut cfg.run {
            *prior = PriorSpec::Parabola {};
        }
        assert!(cfg.validate().is_err());
    }
}
