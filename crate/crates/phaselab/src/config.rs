//! JSON experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use phaselab_core::geometry::{gamma2_budget, matrix_budget};
use phaselab_core::stability::ChaosVariant;
use phaselab_core::{EnsembleSpec, MatrixSetDescriptor, SolverConfig, VectorSetDescriptor};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Recover,
    Stability,
    Injectivity,
    Embed,
    Smallball,
    Chaos,
    Adversarial,
    Sweep,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Recover => "recover",
            Kind::Stability => "stability",
            Kind::Injectivity => "injectivity",
            Kind::Embed => "embed",
            Kind::Smallball => "smallball",
            Kind::Chaos => "chaos",
            Kind::Adversarial => "adversarial",
            Kind::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Signal set or matrix set; the `kind` tags of the two families are
/// disjoint, so either parses from the same field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetDescriptor {
    Vector(VectorSetDescriptor),
    Matrix(MatrixSetDescriptor),
}

impl SetDescriptor {
    pub fn n(&self) -> usize {
        match self {
            SetDescriptor::Vector(s) => s.n(),
            SetDescriptor::Matrix(s) => s.n(),
        }
    }

    /// Unit-constant measurement budget: `gamma_2^2` for signal sets, the
    /// full matrix budget for matrix sets.
    pub fn budget(&self) -> f64 {
        match self {
            SetDescriptor::Vector(s) => gamma2_budget(s).powi(2),
            SetDescriptor::Matrix(s) => matrix_budget(s).m_budget,
        }
    }

    /// Compact label used in CSV output, e.g. `sparse(128,4)`.
    pub fn label(&self) -> String {
        match self {
            SetDescriptor::Vector(VectorSetDescriptor::Full { n }) => format!("full({n})"),
            SetDescriptor::Vector(VectorSetDescriptor::Sparse { n, s }) => format!("sparse({n},{s})"),
            SetDescriptor::Vector(VectorSetDescriptor::Finite { n, members }) => {
                format!("finite({n},{})", members.len())
            }
            SetDescriptor::Matrix(MatrixSetDescriptor::FullSymmetric { n }) => format!("full_symmetric({n})"),
            SetDescriptor::Matrix(MatrixSetDescriptor::LowRank { n, rank }) => format!("low_rank({n},{rank})"),
            SetDescriptor::Matrix(MatrixSetDescriptor::SparseLowRank { n, rank, s }) => {
                format!("sparse_low_rank({n},{rank},{s})")
            }
            SetDescriptor::Matrix(MatrixSetDescriptor::Finite { n, members }) => {
                format!("finite_matrix({n},{})", members.len())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    None,
    /// I.i.d. `N(0, level^2)` added to every measurement.
    Gaussian { level: f64 },
    /// A `fraction` of the measurements (chosen uniformly) receive
    /// `level * rms(b) * g` with `g ~ N(0, 1)`.
    Outliers { fraction: f64, level: f64 },
}

/// Kind-specific knobs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// `1` (amplitude) or `2` (intensity) for signal-set experiments.
    pub ell: u8,
    /// `l_q` exponent of certificates and adversarial ratios.
    pub q: f64,
    /// Embedding exponent in `[1/2, 1]`.
    pub p: f64,
    /// Small-ball level.
    pub xi: f64,
    /// Pairs / matrices sampled per certificate.
    pub samples: usize,
    /// Fresh vectors per small-ball tail probability.
    pub tail_trials: usize,
    /// Matrices standing in for a supremum.
    pub mc_inner: usize,
    /// Outer draws of the Rademacher complexity.
    pub mc_outer: usize,
    pub variant: ChaosVariant,
    pub noise: NoiseModel,
    /// Recovery counts as a success below this relative error.
    pub success_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            ell: 2,
            q: 2.0,
            p: 1.0,
            xi: 0.5,
            samples: 1000,
            tail_trials: 2000,
            mc_inner: 100,
            mc_outer: 50,
            variant: ChaosVariant::Stilde,
            noise: NoiseModel::None,
            success_tol: 1e-2,
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; when present it must match the CLI subcommand.
    #[serde(default)]
    pub kind: Option<Kind>,
    pub ensemble: EnsembleSpec,
    pub set: SetDescriptor,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    pub trials: usize,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
    /// When non-empty, the experiment is repeated with
    /// `m = ceil(factor * budget)` for each factor instead of `ensemble.m`.
    #[serde(default)]
    pub oversample_factors: Vec<f64>,
    #[serde(default)]
    pub params: Params,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn check_q(name: &str, q: f64) -> Result<()> {
    if q >= 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be finite and >= 1, got {q}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn solver(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_default()
    }

    /// The measurement counts to run: one per oversampling factor, or
    /// `ensemble.m`.
    pub fn m_values(&self) -> Vec<(Option<f64>, usize)> {
        if self.oversample_factors.is_empty() {
            return vec![(None, self.ensemble.m)];
        }
        let budget = self.set.budget();
        self.oversample_factors
            .iter()
            .map(|&f| (Some(f), ((f * budget).ceil() as usize).max(1)))
            .collect()
    }

    /// Checks kind-independent invariants and the requirements of `kind`.
    pub fn validate(&self, kind: Kind) -> Result<()> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(config_err(format!("config is for `{k}` but `{kind}` was requested")));
            }
        }
        if self.trials == 0 {
            return Err(config_err("trials must be positive"));
        }
        self.ensemble.sampler()?;
        if self.set.n() != self.ensemble.n {
            return Err(config_err(format!(
                "set dimension {} does not match ensemble dimension {}",
                self.set.n(),
                self.ensemble.n
            )));
        }
        match &self.set {
            SetDescriptor::Vector(s) => s.validate()?,
            SetDescriptor::Matrix(s) => s.validate()?,
        }
        if self.oversample_factors.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(config_err("oversample factors must be positive"));
        }
        let p = &self.params;
        if p.ell != 1 && p.ell != 2 {
            return Err(config_err(format!("ell must be 1 or 2, got {}", p.ell)));
        }
        check_q("params.q", p.q)?;
        if let Some(s) = &self.solver {
            s.validate()?;
        }
        match &p.noise {
            NoiseModel::None => {}
            NoiseModel::Gaussian { level } if *level >= 0.0 => {}
            NoiseModel::Outliers { fraction, level } if (0.0..=1.0).contains(fraction) && *level >= 0.0 => {}
            other => return Err(config_err(format!("invalid noise model {other:?}"))),
        }
        let needs_matrix = matches!(kind, Kind::Injectivity | Kind::Smallball | Kind::Chaos);
        let needs_vector = matches!(kind, Kind::Embed);
        match (&self.set, needs_matrix, needs_vector) {
            (SetDescriptor::Vector(_), true, _) => {
                return Err(config_err(format!("`{kind}` needs a matrix set")));
            }
            (SetDescriptor::Matrix(_), _, true) => {
                return Err(config_err(format!("`{kind}` needs a signal set")));
            }
            _ => {}
        }
        if kind == Kind::Sweep && self.oversample_factors.is_empty() {
            return Err(config_err("`sweep` needs oversample_factors"));
        }
        if kind == Kind::Embed && !(0.5..=1.0).contains(&p.p) {
            return Err(config_err(format!("p must lie in [1/2, 1], got {}", p.p)));
        }
        if kind == Kind::Smallball && !(p.xi > 0.0 && p.xi < 1.0) {
            return Err(config_err(format!("xi must lie in (0, 1), got {}", p.xi)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use phaselab_core::FieldTag;

    fn base(set: SetDescriptor) -> ExperimentConfig {
        ExperimentConfig {
            kind: None,
            ensemble: EnsembleSpec::gaussian(FieldTag::Real, set.n(), 10, 1),
            set,
            solver: None,
            trials: 1,
            output_path: default_output(),
            oversample_factors: Vec::new(),
            params: Params::default(),
        }
    }

    fn low_rank() -> SetDescriptor {
        SetDescriptor::Matrix(MatrixSetDescriptor::LowRank { n: 32, rank: 1 })
    }

    #[test]
    fn oversampled_m_rounds_up() {
        let mut cfg = base(low_rank());
        assert_eq!(cfg.m_values(), vec![(None, 10)]);
        cfg.oversample_factors = vec![0.25, 8.0];
        assert_eq!(cfg.m_values(), vec![(Some(0.25), 17), (Some(8.0), 528)]);
        let sparse = SetDescriptor::Vector(VectorSetDescriptor::Sparse { n: 128, s: 4 });
        assert_eq!(sparse.label(), "sparse(128,4)");
        assert!((sparse.budget() - 17.86).abs() < 0.01);
    }

    #[test]
    fn kind_requirements() {
        let vector = base(SetDescriptor::Vector(VectorSetDescriptor::Full { n: 4 }));
        let matrix = base(SetDescriptor::Matrix(MatrixSetDescriptor::LowRank { n: 4, rank: 1 }));
        assert!(vector.validate(Kind::Recover).is_ok());
        assert!(vector.validate(Kind::Chaos).is_err());
        assert!(matrix.validate(Kind::Embed).is_err());
        assert!(matrix.validate(Kind::Smallball).is_ok());
        assert!(vector.validate(Kind::Sweep).is_err());
        let mut tagged = vector.clone();
        tagged.kind = Some(Kind::Embed);
        assert!(tagged.validate(Kind::Recover).is_err());
        assert!(tagged.validate(Kind::Embed).is_ok());
    }

    #[test]
    fn parameter_ranges() {
        let ok = base(SetDescriptor::Vector(VectorSetDescriptor::Full { n: 4 }));
        let cases: Vec<fn(&mut ExperimentConfig)> = vec![
            |c| c.params.q = 0.5,
            |c| c.params.ell = 3,
            |c| c.params.p = 0.4,
            |c| c.trials = 0,
            |c| c.ensemble.n = 5,
            |c| c.params.noise = NoiseModel::Outliers { fraction: 1.5, level: 1.0 },
            |c| c.params.noise = NoiseModel::Gaussian { level: f64::NAN },
            |c| {
                c.solver = Some(SolverConfig {
                    q: 0.5,
                    ..Default::default()
                })
            },
        ];
        for (i, edit) in cases.into_iter().enumerate() {
            let mut c = ok.clone();
            edit(&mut c);
            let err = c.validate(Kind::Embed).unwrap_err();
            assert_eq!(err.exit_code(), crate::error::EXIT_CONFIG, "case {i}: {err}");
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = base(low_rank());
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        assert!(ExperimentConfig::from_json("{").is_err());
    }
}
