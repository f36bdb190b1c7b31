//! Experiment configuration: a single versioned JSON document, validated
//! before any computation runs. Unknown keys are rejected so a config file
//! is always an exact description of the run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{make_test_states, DensityMatrix, FockError, TestStateKind};
use crate::imperfection::ReferenceModel;
use crate::optics::{BeamSplitterSpec, OpticsError};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config invalid: {0}")]
    Validation(String),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
}

/// The signal state under measurement.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    Fock { n: usize },
    Coherent { mean: f64 },
    Superposition { levels: Vec<usize> },
    Thermal { mean: f64 },
    Random { seed: u64 },
    /// Load a density matrix from a JSON or CSV file.
    Matrix { path: String },
}

/// Reference-field model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
#[derive(Default)]
pub enum ReferenceModelSpec {
    #[default]
    Pure,
    PhaseDiffused { sigma: f64 },
    Matrix { path: String },
}


#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Mean photon number of the coherent (or dephased-coherent) reference.
    /// Ignored when the model is an explicit matrix.
    #[serde(default)]
    pub alpha_sq: Option<f64>,
    #[serde(default)]
    pub model: ReferenceModelSpec,
}

/// First beam splitter: a fixed `(t/r)^2` ratio or `"auto"`, which resolves
/// per element to the optimum and caps the diagonal fallback.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Bs1Spec {
    Keyword(String),
    Fixed { t_over_r_sq: f64 },
}

impl Default for Bs1Spec {
    fn default() -> Self {
        Bs1Spec::Keyword("auto".into())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum EfficiencySpec {
    Uniform(f64),
    PerDetector { a: f64, b: f64, c: f64 },
}

impl Default for EfficiencySpec {
    fn default() -> Self {
        EfficiencySpec::Uniform(1.0)
    }
}

impl EfficiencySpec {
    pub fn as_triple(&self) -> [f64; 3] {
        match *self {
            EfficiencySpec::Uniform(eta) => [eta, eta, eta],
            EfficiencySpec::PerDetector { a, b, c } => [a, b, c],
        }
    }
}

/// How probabilities are produced.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
#[derive(Default)]
pub enum ModeSpec {
    /// Analytic probabilities, ideal detectors.
    #[default]
    Exact,
    /// Analytic probabilities smeared by the detector efficiencies.
    Smeared,
    /// Smeared probabilities estimated from seeded multinomial sampling.
    Sampled { shots: u64, seed: u64 },
}


/// The top-level config document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub signal: SignalSpec,
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub bs1: Bs1Spec,
    /// Fock cutoff of the signal space.
    pub cutoff: usize,
    /// Total-photon cutoff for joint distributions and oracle checks;
    /// defaults to `n_max + lambda_max + ceil(|alpha|^2 + 6 |alpha|)`.
    #[serde(default)]
    pub total_cutoff: Option<usize>,
    #[serde(default)]
    pub efficiency: EfficiencySpec,
    #[serde(default)]
    pub mode: ModeSpec,
    /// Reconstruct all elements with `N + lambda <= n_max`.
    pub n_max: usize,
    /// Default output directory; the CLI `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(config)
    }

    pub fn from_file(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validate and build every runtime object the pipeline needs.
    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Validation(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.n_max > self.cutoff {
            return Err(ConfigError::Validation(format!(
                "n_max {} exceeds cutoff {}",
                self.n_max, self.cutoff
            )));
        }
        let signal = self.build_signal()?;
        let reference = self.build_reference()?;
        let alpha_sq = match &self.reference.model {
            ReferenceModelSpec::Matrix { .. } => None,
            _ => {
                let a = self.reference.alpha_sq.ok_or_else(|| {
                    ConfigError::Validation("reference.alpha_sq required".into())
                })?;
                if !a.is_finite() || a < 0.0 {
                    return Err(ConfigError::Validation(format!(
                        "reference.alpha_sq must be finite and >= 0, got {a}"
                    )));
                }
                Some(a)
            }
        };
        let bs1 = match &self.bs1 {
            Bs1Spec::Keyword(word) if word == "auto" => Bs1Resolution::Auto {
                diagonal_cap: diagonal_ratio_cap(self.n_max),
            },
            Bs1Spec::Keyword(word) => {
                return Err(ConfigError::Validation(format!(
                    "bs1 must be \"auto\" or {{\"t_over_r_sq\": x}}, got \"{word}\""
                )))
            }
            Bs1Spec::Fixed { t_over_r_sq } => {
                Bs1Resolution::Fixed(BeamSplitterSpec::from_t_over_r_sq(*t_over_r_sq)?)
            }
        };
        let etas = self.efficiency.as_triple();
        for eta in etas {
            if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
                return Err(ConfigError::Validation(format!(
                    "efficiency {eta} outside [0, 1]"
                )));
            }
        }
        if matches!(self.mode, ModeSpec::Exact) && etas != [1.0, 1.0, 1.0] {
            return Err(ConfigError::Validation(
                "exact mode requires unit efficiencies; use smeared or sampled".into(),
            ));
        }
        if let ModeSpec::Sampled { shots, .. } = self.mode {
            if shots == 0 {
                return Err(ConfigError::Validation("shots must be >= 1".into()));
            }
        }
        let reference_mean = match alpha_sq {
            Some(a) => a,
            None => reference_mean_photons(&reference, self.cutoff)?,
        };
        let total_cutoff = self.total_cutoff.unwrap_or_else(|| {
            crate::oracle::OracleConfig::default_total_cutoff(
                self.n_max,
                self.n_max,
                reference_mean,
            )
        });
        if let Some(t) = self.total_cutoff {
            if t < self.n_max {
                return Err(ConfigError::Validation(format!(
                    "total_cutoff {t} below n_max {}",
                    self.n_max
                )));
            }
        }
        Ok(ResolvedConfig {
            config: self.clone(),
            signal,
            reference,
            alpha_sq,
            bs1,
            etas,
            mode: self.mode,
            cutoff: self.cutoff,
            total_cutoff,
            n_max: self.n_max,
        })
    }

    fn build_signal(&self) -> Result<DensityMatrix, ConfigError> {
        let kind = match &self.signal {
            SignalSpec::Fock { n } => TestStateKind::Fock(*n),
            SignalSpec::Coherent { mean } => TestStateKind::Coherent { mean: *mean },
            SignalSpec::Superposition { levels } => TestStateKind::Superposition {
                levels: levels.clone(),
            },
            SignalSpec::Thermal { mean } => TestStateKind::Thermal { mean: *mean },
            SignalSpec::Random { seed } => TestStateKind::Random { seed: *seed },
            SignalSpec::Matrix { path } => {
                return load_matrix(path);
            }
        };
        Ok(make_test_states(&kind, self.cutoff)?)
    }

    fn build_reference(&self) -> Result<ReferenceModel, ConfigError> {
        let alpha_mag = self
            .reference
            .alpha_sq
            .unwrap_or(0.0)
            .max(0.0)
            .sqrt();
        Ok(match &self.reference.model {
            ReferenceModelSpec::Pure => ReferenceModel::PureCoherent { alpha_mag },
            ReferenceModelSpec::PhaseDiffused { sigma } => {
                if *sigma < 0.0 {
                    return Err(ConfigError::Validation(format!(
                        "phase diffusion width must be >= 0, got {sigma}"
                    )));
                }
                ReferenceModel::PhaseDiffused {
                    alpha_mag,
                    sigma: *sigma,
                }
            }
            ReferenceModelSpec::Matrix { path } => ReferenceModel::Explicit(load_matrix(path)?),
        })
    }
}

/// `(t/r)^2` compromise used for diagonal elements under `"auto"`:
/// `2 n_max / lambda_max` with `lambda_max = max(1, n_max)`.
pub fn diagonal_ratio_cap(n_max: usize) -> f64 {
    2.0 * n_max as f64 / n_max.max(1) as f64
}

fn load_matrix(path: &str) -> Result<DensityMatrix, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })?;
    let rho = if path.ends_with(".csv") {
        DensityMatrix::from_csv(&text)?
    } else {
        DensityMatrix::from_json(&text)?
    };
    Ok(rho)
}

fn reference_mean_photons(model: &ReferenceModel, cutoff: usize) -> Result<f64, ConfigError> {
    let rho = model
        .density(cutoff)
        .map_err(|e| ConfigError::Validation(format!("reference model: {e}")))?;
    Ok((0..rho.dim()).map(|n| n as f64 * rho.entry(n, n).re).sum())
}

/// How BS1 is chosen per element.
#[derive(Debug, Clone, Copy)]
pub enum Bs1Resolution {
    Fixed(BeamSplitterSpec),
    /// Optimal `(t/r)^2 = 2N/lambda` per element; diagonals use the
    /// compromise cap.
    Auto { diagonal_cap: f64 },
}

impl Bs1Resolution {
    /// The splitter used for the element `(n, lambda)`.
    pub fn for_element(&self, n: usize, lambda: usize) -> Result<BeamSplitterSpec, OpticsError> {
        match self {
            Bs1Resolution::Fixed(spec) => Ok(*spec),
            Bs1Resolution::Auto { diagonal_cap } => {
                let params = crate::scheme::optimal_params(n, lambda);
                let ratio = if lambda == 0 {
                    *diagonal_cap
                } else {
                    params.t_over_r_sq
                };
                BeamSplitterSpec::from_t_over_r_sq(ratio)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Bs1Resolution::Fixed(spec) => format!(
                "fixed (t/r)^2 = {:.6}",
                (spec.t() / spec.r()).powi(2)
            ),
            Bs1Resolution::Auto { diagonal_cap } => format!(
                "auto: (t/r)^2 = 2N/lambda per element, {diagonal_cap} for diagonals"
            ),
        }
    }
}

/// A validated configuration with every runtime object constructed.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    /// Echo of the raw document (after any CLI overrides).
    pub config: ExperimentConfig,
    pub signal: DensityMatrix,
    pub reference: ReferenceModel,
    pub alpha_sq: Option<f64>,
    pub bs1: Bs1Resolution,
    pub etas: [f64; 3],
    pub mode: ModeSpec,
    pub cutoff: usize,
    pub total_cutoff: usize,
    pub n_max: usize,
}
