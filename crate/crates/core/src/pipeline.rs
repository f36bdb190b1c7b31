//! Orchestration: turns a resolved configuration into measured elements and
//! full matrix estimates, with exact, smeared, or sampled probabilities.
//!
//! Probabilities flow through one of three sources:
//!
//! - `exact`: per-setting POM probabilities straight from the q vectors;
//! - `smeared`: a joint count distribution per phase setting, thinned by the
//!   detector efficiencies, with event probabilities read off it;
//! - `sampled`: the smeared joint sampled `shots` times per phase setting on
//!   an independent, reproducible substream per experiment.
//!
//! Every element carries its conditioning factor (the `|4 c|` corner
//! magnitude the inversion divides by) and, in sampled mode, an estimated
//! standard error.

use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use serde::Serialize;

use crate::config::{Bs1Resolution, ExperimentConfig, ModeSpec, ResolvedConfig};
use crate::fock::{DensityMatrix, FockError, FockVector};
use crate::imperfection::{
    sample_events_stream, JointDistribution, ReferenceModel, SampledCounts,
};
use crate::optics::BeamSplitterSpec;
use crate::scheme::{
    cycled_probability, norm_constant, pom_probability, q_vector, q_vector_with_reference,
    reconstruct_diag_with_reference, reconstruct_offdiag, Beta, DetectionEvent, NormConstant,
    NormReference, PhaseSchedule, SchemeError,
};

/// Reference handled either in closed form (pure coherent) or through its
/// spectral decomposition.
enum RefKind {
    Pure { alpha_mag: f64 },
    Mixed { pairs: Vec<(f64, FockVector)> },
}

type JointKey = (u64, Ratio<i64>);
type RunKey = (u64, usize, i64, i64, usize);

/// A measurement pipeline bound to one signal state and configuration.
pub struct Experiment {
    signal: DensityMatrix,
    reference: ReferenceModel,
    ref_kind: RefKind,
    bs1: Bs1Resolution,
    etas: [f64; 3],
    mode: ModeSpec,
    total_cutoff: usize,
    n_max: usize,
    smeared_joints: HashMap<JointKey, Rc<JointDistribution>>,
    sampled_runs: HashMap<RunKey, Rc<SampledCounts>>,
    max_joint_tail: f64,
}

/// Probabilities that fed one element.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ProbabilityRecord {
    Diagonal {
        p: f64,
    },
    Cycled {
        p0: f64,
        p1: f64,
        p_half: f64,
        p_three_halves: f64,
    },
}

/// One reconstructed element with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct ElementRecord {
    pub n: usize,
    pub lambda: usize,
    pub re: f64,
    pub im: f64,
    /// `|4 c|` for off-diagonals, the diagonal divisor for `lambda = 0`:
    /// the probability-to-element scale factor the inversion divides by.
    pub conditioning: f64,
    pub probabilities: Option<ProbabilityRecord>,
    /// Estimated standard error `[re, im]` in sampled mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<[f64; 2]>,
    /// Phase settings per cycling family, as multiples of pi.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<ScheduleRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleRecord {
    pub beta: String,
    pub phis_over_pi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub class: String,
    pub message: String,
}

/// Self-describing run report: everything needed to reproduce the run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    /// How probabilities were produced: `exact`, `analytic-smearing`, or
    /// `monte-carlo`.
    pub mode_used: String,
    pub bs1: String,
    pub efficiencies: [f64; 3],
    pub signal_truncation_tail: f64,
    pub total_cutoff: usize,
    /// Largest probability weight missing from any joint grid used.
    pub max_joint_tail: f64,
    pub elements: Vec<ElementRecord>,
    pub failures: usize,
}

/// A full-matrix estimate. Not necessarily a physical density matrix:
/// smeared or sampled probabilities generally break positivity and
/// normalization, which is the point of simulating them.
pub struct MatrixEstimate {
    pub entries: DMatrix<Complex64>,
    pub report: RunReport,
}

impl MatrixEstimate {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(m, n)]
    }

    /// Validate the estimate as a physical density matrix (exact-mode round
    /// trips); the trace deficit plus the signal tail is the accepted budget.
    pub fn to_density_matrix(&self) -> Result<DensityMatrix, FockError> {
        let tail = (1.0 - self.entries.trace().re).abs() + 1e-12;
        DensityMatrix::new(self.entries.clone(), tail)
    }
}

fn fnv1a(parts: &[u64]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for byte in part.to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

fn mode_name(mode: &ModeSpec) -> &'static str {
    match mode {
        ModeSpec::Exact => "exact",
        ModeSpec::Smeared => "analytic-smearing",
        ModeSpec::Sampled { .. } => "monte-carlo",
    }
}

impl Experiment {
    pub fn new(resolved: &ResolvedConfig) -> Result<Self, SchemeError> {
        let ref_kind = match &resolved.reference {
            ReferenceModel::PureCoherent { alpha_mag } => RefKind::Pure {
                alpha_mag: *alpha_mag,
            },
            model => RefKind::Mixed {
                pairs: model
                    .eigenpairs(resolved.cutoff)
                    .map_err(|e| SchemeError::InvalidArgument(format!("reference model: {e}")))?,
            },
        };
        Ok(Self {
            signal: resolved.signal.clone(),
            reference: resolved.reference.clone(),
            ref_kind,
            bs1: resolved.bs1,
            etas: resolved.etas,
            mode: resolved.mode,
            total_cutoff: resolved.total_cutoff,
            n_max: resolved.n_max,
            smeared_joints: HashMap::new(),
            sampled_runs: HashMap::new(),
            max_joint_tail: 0.0,
        })
    }

    pub fn signal(&self) -> &DensityMatrix {
        &self.signal
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Weighted q vectors for one event, truncated to the signal dimension.
    fn build_q(
        &self,
        bs1: &BeamSplitterSpec,
        e: DetectionEvent,
    ) -> Result<Vec<(f64, FockVector)>, SchemeError> {
        let internal_cutoff = e.total().max(self.signal.cutoff());
        let dim = self.signal.dim();
        let truncate = |v: FockVector| -> FockVector {
            FockVector::unnormalized(v.amplitudes()[..dim].to_vec())
        };
        match &self.ref_kind {
            RefKind::Pure { alpha_mag } => Ok(vec![(
                1.0,
                truncate(q_vector(
                    e.n_a,
                    e.n_b,
                    e.n_c,
                    bs1,
                    *alpha_mag,
                    internal_cutoff,
                )?),
            )]),
            RefKind::Mixed { pairs } => pairs
                .iter()
                .map(|(w, psi)| {
                    Ok((
                        *w,
                        truncate(q_vector_with_reference(
                            e.n_a,
                            e.n_b,
                            e.n_c,
                            bs1,
                            psi,
                            internal_cutoff,
                        )?),
                    ))
                })
                .collect(),
        }
    }

    /// Ideal-detector probability of one event at one phase setting.
    fn setting_probability(
        &self,
        bs1: &BeamSplitterSpec,
        e: DetectionEvent,
        phi: f64,
    ) -> Result<f64, SchemeError> {
        let mut acc = 0.0;
        for (w, q) in self.build_q(bs1, e)? {
            acc += w * pom_probability(&self.signal, &q, phi)?;
        }
        Ok(acc)
    }

    /// Ideal joint count distribution at one phase setting, on a grid wide
    /// enough that the recorded tail bounds everything discarded.
    fn raw_joint(
        &self,
        bs1: &BeamSplitterSpec,
        phi: f64,
    ) -> Result<JointDistribution, SchemeError> {
        let ab_max = self.total_cutoff;
        let c_max = self.signal.cutoff();
        let mut joint = JointDistribution::zeros([ab_max, ab_max, c_max]);
        for n_a in 0..=ab_max {
            for n_b in 0..=ab_max {
                for n_c in 0..=c_max {
                    let e = DetectionEvent::new(n_a, n_b, n_c);
                    joint.set(e, self.setting_probability(bs1, e, phi)?);
                }
            }
        }
        Ok(joint)
    }

    fn smeared_joint(
        &mut self,
        bs1: &BeamSplitterSpec,
        phi_over_pi: Ratio<i64>,
    ) -> Result<Rc<JointDistribution>, SchemeError> {
        let key: JointKey = (bs1.mixing_angle().to_bits(), phi_over_pi);
        if let Some(joint) = self.smeared_joints.get(&key) {
            return Ok(joint.clone());
        }
        let phi = std::f64::consts::PI * (*phi_over_pi.numer() as f64)
            / (*phi_over_pi.denom() as f64);
        let raw = self.raw_joint(bs1, phi)?;
        self.max_joint_tail = self.max_joint_tail.max(raw.tail());
        let smeared = raw
            .smear(self.etas)
            .map_err(|e| SchemeError::InvalidArgument(e.to_string()))?;
        let rc = Rc::new(smeared);
        self.smeared_joints.insert(key, rc.clone());
        Ok(rc)
    }

    /// One Monte Carlo run: the smeared joint at this setting, sampled on a
    /// substream derived from the run's identity, so runs are independent
    /// and reproducible regardless of evaluation order.
    fn sampled_run(
        &mut self,
        bs1: &BeamSplitterSpec,
        lambda: usize,
        beta: Beta,
        j: usize,
        phi_over_pi: Ratio<i64>,
    ) -> Result<Rc<SampledCounts>, SchemeError> {
        let key: RunKey = (
            bs1.mixing_angle().to_bits(),
            lambda,
            *beta.ratio().numer(),
            *beta.ratio().denom(),
            j,
        );
        if let Some(counts) = self.sampled_runs.get(&key) {
            return Ok(counts.clone());
        }
        let ModeSpec::Sampled { shots, seed } = self.mode else {
            return Err(SchemeError::InvalidArgument(
                "sampled run requested outside sampled mode".into(),
            ));
        };
        let joint = self.smeared_joint(bs1, phi_over_pi)?;
        let stream = fnv1a(&[
            key.0,
            key.1 as u64,
            key.2 as u64,
            key.3 as u64,
            key.4 as u64,
        ]);
        let counts = sample_events_stream(&joint, shots, seed, stream)
            .map_err(|e| SchemeError::InvalidArgument(e.to_string()))?;
        let rc = Rc::new(counts);
        self.sampled_runs.insert(key, rc.clone());
        Ok(rc)
    }

    /// Cycled probability estimate for one `beta` family, with the variance
    /// of the estimator (zero outside sampled mode).
    fn cycled_estimate(
        &mut self,
        bs1: &BeamSplitterSpec,
        event: DetectionEvent,
        beta: Beta,
    ) -> Result<(f64, f64), SchemeError> {
        let lambda = event.lambda();
        let schedule = PhaseSchedule::new(beta, lambda)?;
        let count = schedule.len() as f64;
        match self.mode {
            ModeSpec::Exact => {
                let mut acc = 0.0;
                for j in schedule.j_values.clone() {
                    acc += self.setting_probability(bs1, event, schedule.phi(j))?;
                }
                Ok((acc / count, 0.0))
            }
            ModeSpec::Smeared => {
                let mut acc = 0.0;
                for j in schedule.j_values.clone() {
                    let joint = self.smeared_joint(bs1, schedule.phi_coefficient(j))?;
                    acc += joint.probability(event);
                }
                Ok((acc / count, 0.0))
            }
            ModeSpec::Sampled { shots, .. } => {
                let mut acc = 0.0;
                let mut variance = 0.0;
                for j in schedule.j_values.clone() {
                    let run =
                        self.sampled_run(bs1, lambda, beta, j, schedule.phi_coefficient(j))?;
                    let p = run.estimate(event);
                    acc += p;
                    variance += p * (1.0 - p) / shots as f64;
                }
                Ok((acc / count, variance / (count * count)))
            }
        }
    }

    /// Probability of the diagonal event `(0, 0, n)`; phase-independent, so
    /// a single setting at `phi = 0` serves every `n`.
    fn diagonal_estimate(
        &mut self,
        bs1: &BeamSplitterSpec,
        n: usize,
    ) -> Result<(f64, f64), SchemeError> {
        let event = DetectionEvent::new(0, 0, n);
        let zero = Ratio::new_raw(0, 1);
        match self.mode {
            ModeSpec::Exact => Ok((self.setting_probability(bs1, event, 0.0)?, 0.0)),
            ModeSpec::Smeared => {
                let joint = self.smeared_joint(bs1, zero)?;
                Ok((joint.probability(event), 0.0))
            }
            ModeSpec::Sampled { shots, .. } => {
                let run = self.sampled_run(bs1, 0, Beta::ZERO, 0, zero)?;
                let p = run.estimate(event);
                Ok((p, p * (1.0 - p) / shots as f64))
            }
        }
    }

    fn norm_reference(&self, lambda: usize) -> NormReference {
        match &self.ref_kind {
            RefKind::Pure { alpha_mag } => NormReference::PureCoherent {
                alpha_mag: *alpha_mag,
            },
            RefKind::Mixed { .. } => NormReference::OffDiagonal(self.reference.offdiag(lambda)),
        }
    }

    /// Measure `<n+lambda| rho |n>`.
    pub fn measure_element(
        &mut self,
        n: usize,
        lambda: usize,
    ) -> Result<ElementRecord, SchemeError> {
        let bs1 = self
            .bs1
            .for_element(n, lambda)
            .map_err(|e| SchemeError::InvalidArgument(e.to_string()))?;
        if lambda == 0 {
            let (p, variance) = self.diagonal_estimate(&bs1, n)?;
            let vacuum = self.reference.vacuum_probability();
            let value = reconstruct_diag_with_reference(p, n, &bs1, vacuum)?;
            let divisor = bs1.t().powi(2 * n as i32) * vacuum;
            let std_error = matches!(self.mode, ModeSpec::Sampled { .. })
                .then(|| [variance.sqrt() / divisor, 0.0]);
            return Ok(ElementRecord {
                n,
                lambda,
                re: value,
                im: 0.0,
                conditioning: divisor,
                probabilities: Some(ProbabilityRecord::Diagonal { p }),
                std_error,
                schedule: Vec::new(),
                error: None,
            });
        }
        let nc: NormConstant = norm_constant(n, lambda, &bs1, &self.norm_reference(lambda))?;
        let event = if lambda.is_multiple_of(2) {
            DetectionEvent::e1(lambda, n)?
        } else {
            DetectionEvent::e2(lambda, n)?
        };
        let mut ps = [0.0; 4];
        let mut vars = [0.0; 4];
        let mut schedule_records = Vec::with_capacity(4);
        for (slot, beta) in Beta::STANDARD.into_iter().enumerate() {
            let (p, var) = self.cycled_estimate(&bs1, event, beta)?;
            ps[slot] = p;
            vars[slot] = var;
            let schedule = PhaseSchedule::new(beta, lambda)?;
            schedule_records.push(ScheduleRecord {
                beta: beta.to_string(),
                phis_over_pi: schedule
                    .j_values
                    .clone()
                    .map(|j| {
                        let c = schedule.phi_coefficient(j);
                        *c.numer() as f64 / *c.denom() as f64
                    })
                    .collect(),
            });
        }
        let value = reconstruct_offdiag(ps[0], ps[1], ps[2], ps[3], &nc)?;
        let four_nc = 4.0 * nc.magnitude();
        let std_error = matches!(self.mode, ModeSpec::Sampled { .. }).then(|| {
            [
                (vars[0] + vars[1]).sqrt() / four_nc,
                (vars[2] + vars[3]).sqrt() / four_nc,
            ]
        });
        Ok(ElementRecord {
            n,
            lambda,
            re: value.re,
            im: value.im,
            conditioning: four_nc,
            probabilities: Some(ProbabilityRecord::Cycled {
                p0: ps[0],
                p1: ps[1],
                p_half: ps[2],
                p_three_halves: ps[3],
            }),
            std_error,
            schedule: schedule_records,
            error: None,
        })
    }

    /// Measure every element with `n + lambda <= n_max`, filling conjugates
    /// by Hermiticity. Per-element failures are recorded, not fatal.
    pub fn measure_full_matrix(&mut self, config_echo: &ExperimentConfig) -> MatrixEstimate {
        let dim = self.n_max + 1;
        let mut entries = DMatrix::<Complex64>::zeros(dim, dim);
        let mut elements = Vec::new();
        let mut failures = 0;
        for lambda in 0..=self.n_max {
            for n in 0..=(self.n_max - lambda) {
                match self.measure_element(n, lambda) {
                    Ok(record) => {
                        let value = Complex64::new(record.re, record.im);
                        entries[(n + lambda, n)] = value;
                        entries[(n, n + lambda)] = value.conj();
                        elements.push(record);
                    }
                    Err(err) => {
                        failures += 1;
                        elements.push(ElementRecord {
                            n,
                            lambda,
                            re: f64::NAN,
                            im: f64::NAN,
                            conditioning: 0.0,
                            probabilities: None,
                            std_error: None,
                            schedule: Vec::new(),
                            error: Some(ErrorRecord {
                                class: error_class(&err).into(),
                                message: err.to_string(),
                            }),
                        });
                    }
                }
            }
        }
        let report = RunReport {
            config: config_echo.clone(),
            mode_used: mode_name(&self.mode).into(),
            bs1: self.bs1.describe(),
            efficiencies: self.etas,
            signal_truncation_tail: self.signal.truncation_tail(),
            total_cutoff: self.total_cutoff,
            max_joint_tail: self.max_joint_tail,
            elements,
            failures,
        };
        MatrixEstimate { entries, report }
    }

    /// The smeared joint at one named phase, sampled for count export. An
    /// auto BS1 resolves to the diagonal compromise ratio here.
    pub fn sampled_export(
        &mut self,
        phi_over_pi: Ratio<i64>,
        shots: u64,
        seed: u64,
    ) -> Result<SampledCounts, SchemeError> {
        let bs1 = self
            .bs1
            .for_element(0, 0)
            .map_err(|e| SchemeError::InvalidArgument(e.to_string()))?;
        let joint = self.smeared_joint(&bs1, phi_over_pi)?;
        sample_events_stream(&joint, shots, seed, 0)
            .map_err(|e| SchemeError::InvalidArgument(e.to_string()))
    }
}

/// Machine-readable class for an element-level failure.
pub fn error_class(err: &SchemeError) -> &'static str {
    match err {
        SchemeError::UnmeasurableElement { .. } => "unmeasurable-element",
        SchemeError::CutoffTooSmall { .. } => "cutoff",
        SchemeError::NegativeProbability { .. } => "numerical",
        SchemeError::ProbabilityRange { .. } => "numerical",
        _ => "validation",
    }
}

/// Convenience wrapper: resolve, build and measure in one call.
pub fn measure_full_matrix(resolved: &ResolvedConfig) -> Result<MatrixEstimate, SchemeError> {
    let mut experiment = Experiment::new(resolved)?;
    Ok(experiment.measure_full_matrix(&resolved.config))
}

/// Exact per-element reference path used in round-trip tests: cycled
/// probabilities and reconstruction, no pipeline caching involved.
pub fn measure_element_exact(
    signal: &DensityMatrix,
    bs1: &BeamSplitterSpec,
    alpha_mag: f64,
    n: usize,
    lambda: usize,
) -> Result<Complex64, SchemeError> {
    if lambda == 0 {
        let q = q_vector(0, 0, n, bs1, alpha_mag, signal.cutoff())?;
        let p = pom_probability(signal, &q, 0.0)?;
        return Ok(Complex64::new(
            crate::scheme::reconstruct_diag(p, n, bs1, alpha_mag)?,
            0.0,
        ));
    }
    let event = if lambda.is_multiple_of(2) {
        DetectionEvent::e1(lambda, n)?
    } else {
        DetectionEvent::e2(lambda, n)?
    };
    let mut ps = [0.0; 4];
    for (slot, beta) in Beta::STANDARD.into_iter().enumerate() {
        ps[slot] = cycled_probability(signal, event, beta, bs1, alpha_mag)?;
    }
    let nc = norm_constant(n, lambda, bs1, &NormReference::PureCoherent { alpha_mag })?;
    reconstruct_offdiag(ps[0], ps[1], ps[2], ps[3], &nc)
}
