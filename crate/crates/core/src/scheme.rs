//! The measurement core: projection vectors `|q>` for count triples, phase
//! cycling schedules, normalization constants and the inversion that turns
//! four cycled probabilities into one density-matrix element.
//!
//! The element `<N+lambda| rho |N>` is obtained from the detection events
//!
//! ```text
//! lambda even:  e1 = (lambda/2, lambda/2, N)
//! lambda odd:   e2 = ((lambda+1)/2, (lambda-1)/2, N)
//!               e3 = ((lambda-1)/2, (lambda+1)/2, N)
//! ```
//!
//! by cycling the reference phase through `phi(beta, j) = beta pi / lambda +
//! 2 pi j / lambda` and combining the cycled probabilities for
//! `beta = 0, 1, 1/2, 3/2`:
//!
//! ```text
//! <N+lambda| rho |N> = [P0 - P1 + i (P1/2 - P3/2)] / (4 c)
//! ```
//!
//! where `c` is the normalization constant of the corner POM entry. The
//! diagonal element `rho_NN` needs no cycling: it is the probability of the
//! event `(0, 0, N)` divided by `t^2N exp(-|alpha|^2)`.

use num_complex::Complex64;
use num_rational::Ratio;
use thiserror::Error;

use crate::fock::{DensityMatrix, FockError, FockVector};
use crate::math;
use crate::optics::{apply_phase, BeamSplitterSpec};

/// Norm-constant magnitudes below this raise an unmeasurable-element error:
/// the associated detection events are too rare to divide by.
pub const DEFAULT_NORM_FLOOR: f64 = 1e-12;

/// Tolerance accepted on the imaginary part and on negative excursions of
/// probabilities computed from Hermitian forms.
pub const PROBABILITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("cutoff {have} too small: need at least {needed}")]
    CutoffTooSmall { needed: usize, have: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("lambda = 0 has no cycling schedule; use the diagonal path")]
    LambdaZero,
    #[error("probability computation produced {value:.3e}: numerical fault")]
    NegativeProbability { value: f64 },
    #[error("probability {value} outside [0, 1]")]
    ProbabilityRange { value: f64 },
    #[error(
        "unmeasurable element: norm constant magnitude {magnitude:.3e} below floor {floor:.1e} \
         (the defining detection events coincide with rare events)"
    )]
    UnmeasurableElement { magnitude: f64, floor: f64 },
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// A photocount triple `(n_a, n_b, n_c)` at the three detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DetectionEvent {
    pub n_a: usize,
    pub n_b: usize,
    pub n_c: usize,
}

impl DetectionEvent {
    pub fn new(n_a: usize, n_b: usize, n_c: usize) -> Self {
        Self { n_a, n_b, n_c }
    }

    /// The optimum event for even `lambda`: `(lambda/2, lambda/2, n)`.
    pub fn e1(lambda: usize, n: usize) -> Result<Self, SchemeError> {
        if !lambda.is_multiple_of(2) {
            return Err(SchemeError::InvalidArgument(format!(
                "e1 requires even lambda, got {lambda}"
            )));
        }
        Ok(Self::new(lambda / 2, lambda / 2, n))
    }

    /// The optimum event for odd `lambda`: `((lambda+1)/2, (lambda-1)/2, n)`.
    pub fn e2(lambda: usize, n: usize) -> Result<Self, SchemeError> {
        if lambda % 2 != 1 {
            return Err(SchemeError::InvalidArgument(format!(
                "e2 requires odd lambda, got {lambda}"
            )));
        }
        Ok(Self::new(lambda.div_ceil(2), (lambda - 1) / 2, n))
    }

    /// The partner event `((lambda-1)/2, (lambda+1)/2, n)`; its cycled
    /// probability at `beta` equals that of [`Self::e2`] at `beta + 1`.
    pub fn e3(lambda: usize, n: usize) -> Result<Self, SchemeError> {
        if lambda % 2 != 1 {
            return Err(SchemeError::InvalidArgument(format!(
                "e3 requires odd lambda, got {lambda}"
            )));
        }
        Ok(Self::new((lambda - 1) / 2, lambda.div_ceil(2), n))
    }

    pub fn total(&self) -> usize {
        self.n_a + self.n_b + self.n_c
    }

    /// The row offset `lambda = n_a + n_b` of the element this event probes.
    pub fn lambda(&self) -> usize {
        self.n_a + self.n_b
    }
}

/// The cycling-family label `beta`, kept as an exact rational so the phase
/// values stay exactly representable multiples of pi across all four
/// experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Beta(Ratio<i64>);

impl Beta {
    pub const ZERO: Beta = Beta(Ratio::new_raw(0, 1));
    pub const ONE: Beta = Beta(Ratio::new_raw(1, 1));
    pub const HALF: Beta = Beta(Ratio::new_raw(1, 2));
    pub const THREE_HALVES: Beta = Beta(Ratio::new_raw(3, 2));

    /// The four values used by the reconstruction combination.
    pub const STANDARD: [Beta; 4] = [Beta::ZERO, Beta::ONE, Beta::HALF, Beta::THREE_HALVES];

    pub fn new(numer: i64, denom: i64) -> Self {
        Beta(Ratio::new(numer, denom))
    }

    /// `beta + 1`, used by the odd-lambda partner-event shortcut.
    pub fn plus_one(&self) -> Self {
        Beta(self.0 + Ratio::new_raw(1, 1))
    }

    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    pub(crate) fn ratio(&self) -> Ratio<i64> {
        self.0
    }
}

impl std::fmt::Display for Beta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The phase settings of one cycling experiment at fixed `beta`:
/// `phi(beta, j) = beta pi / lambda + 2 pi j / lambda` with `j` running over
/// `0..lambda/2` for even `lambda` and `0..lambda` for odd.
#[derive(Debug, Clone)]
pub struct PhaseSchedule {
    pub beta: Beta,
    pub lambda: usize,
    pub j_values: std::ops::Range<usize>,
}

impl PhaseSchedule {
    pub fn new(beta: Beta, lambda: usize) -> Result<Self, SchemeError> {
        if lambda == 0 {
            return Err(SchemeError::LambdaZero);
        }
        let j_end = if lambda.is_multiple_of(2) { lambda / 2 } else { lambda };
        Ok(Self {
            beta,
            lambda,
            j_values: 0..j_end,
        })
    }

    /// Exact coefficient of pi for setting `j`: `(beta + 2 j) / lambda`.
    pub fn phi_coefficient(&self, j: usize) -> Ratio<i64> {
        (self.beta.ratio() + Ratio::new_raw(2 * j as i64, 1)) / Ratio::new_raw(self.lambda as i64, 1)
    }

    pub fn phi(&self, j: usize) -> f64 {
        let c = self.phi_coefficient(j);
        std::f64::consts::PI * (*c.numer() as f64) / (*c.denom() as f64)
    }

    pub fn phis(&self) -> Vec<f64> {
        self.j_values.clone().map(|j| self.phi(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.j_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j_values.is_empty()
    }
}

/// Even or odd `lambda` branch of the reconstruction formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Reference-field input to the normalization constant: either a pure
/// coherent magnitude or the off-diagonal element `<0| rho_a |lambda>` of an
/// arbitrary mixed reference.
#[derive(Debug, Clone, Copy)]
pub enum NormReference {
    PureCoherent { alpha_mag: f64 },
    OffDiagonal(Complex64),
}

/// The corner coefficient of the cycled POM element: `f_N f*_{N+lambda}`
/// (even) or `g_N g*_{N+lambda}` (odd). Reconstruction divides by four times
/// this value, so its magnitude doubles as a conditioning figure.
#[derive(Debug, Clone)]
pub struct NormConstant {
    pub value: Complex64,
    pub parity: Parity,
    pub n: usize,
    pub lambda: usize,
    pub t: f64,
    pub r: f64,
    pub reference: String,
}

impl NormConstant {
    pub fn magnitude(&self) -> f64 {
        self.value.norm()
    }

    /// `|4 c|`: the factor by which probability noise is amplified into the
    /// reconstructed element.
    pub fn amplification(&self) -> f64 {
        1.0 / (4.0 * self.value.norm())
    }
}

/// `(-i)^k` exactly.
fn neg_i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Coefficient of `x^j` in `(1 - x)^{n_a} (1 + x)^{n_b}`; exact integer
/// arithmetic in f64. Zero for odd `j` when `n_a = n_b`.
fn signed_binomial_sum(n_a: usize, n_b: usize, j: usize) -> f64 {
    let lo = j.saturating_sub(n_b);
    let hi = j.min(n_a);
    let mut acc = 0.0;
    for k in lo..=hi {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * math::binomial(n_a as u64, k as u64) * math::binomial(n_b as u64, (j - k) as u64);
    }
    acc
}

/// Shared construction of the projection vector `|q>` for the event
/// `(n_a, n_b, N)`: `weight(p)` supplies `sqrt(p!) conj(c_p)` for the
/// reference expansion `c_p`; everything else is the beam-splitter algebra.
fn q_vector_core<F: Fn(usize) -> Complex64>(
    n_a: usize,
    n_b: usize,
    n: usize,
    bs1: &BeamSplitterSpec,
    weight: F,
    cutoff: usize,
) -> Result<FockVector, SchemeError> {
    let lambda = n_a + n_b;
    if n + lambda > cutoff {
        return Err(SchemeError::CutoffTooSmall {
            needed: n + lambda,
            have: cutoff,
        });
    }
    let t = bs1.t();
    let r = bs1.r();
    let prefactor = neg_i_pow(n_b) * t.powi(n as i32)
        / (2.0_f64.powf(lambda as f64 / 2.0)
            * (math::factorial(n_a as u64) * math::factorial(n_b as u64)).sqrt());
    let mut amplitudes = vec![Complex64::ZERO; cutoff + 1];
    for j in 0..=lambda {
        let combinatoric = signed_binomial_sum(n_a, n_b, j);
        if combinatoric == 0.0 {
            continue;
        }
        let ladder = math::sqrt_rising_factorial(n as u64, j as u64);
        amplitudes[n + j] =
            prefactor * weight(lambda - j) * r.powi(j as i32) * ladder * combinatoric;
    }
    Ok(FockVector::unnormalized(amplitudes))
}

/// Unnormalized `|q>` for the event `(n_a, n_b, N)` with a coherent
/// reference of magnitude `alpha_mag`, supported on `[N, N + lambda]`.
///
/// The reference phase is deliberately absent here: a phase `phi` multiplies
/// the amplitude at level `m` by `exp[-i (N + lambda - m) phi]`, which
/// [`pom_probability`] applies on the fly.
pub fn q_vector(
    n_a: usize,
    n_b: usize,
    n: usize,
    bs1: &BeamSplitterSpec,
    alpha_mag: f64,
    cutoff: usize,
) -> Result<FockVector, SchemeError> {
    if !alpha_mag.is_finite() || alpha_mag < 0.0 {
        return Err(SchemeError::NonFinite("alpha magnitude"));
    }
    let envelope = (-alpha_mag * alpha_mag / 2.0).exp();
    // sqrt(p!) conj(c_p) for a real coherent amplitude: alpha^p e^{-a^2/2}
    q_vector_core(
        n_a,
        n_b,
        n,
        bs1,
        |p| Complex64::new(alpha_mag.powi(p as i32) * envelope, 0.0),
        cutoff,
    )
}

/// `|q>` for an arbitrary pure reference vector in mode a (phase not yet
/// applied); reduces to [`q_vector`] when the reference is coherent.
pub fn q_vector_with_reference(
    n_a: usize,
    n_b: usize,
    n: usize,
    bs1: &BeamSplitterSpec,
    psi_a: &FockVector,
    cutoff: usize,
) -> Result<FockVector, SchemeError> {
    q_vector_core(
        n_a,
        n_b,
        n,
        bs1,
        |p| math::factorial(p as u64).sqrt() * psi_a.amplitude(p).conj(),
        cutoff,
    )
}

/// `<q_phi| rho |q_phi>`: the outcome probability for the POM element built
/// from `|q>` with the reference phase set to `phi`.
///
/// Clamped at zero; negative excursions beyond [`PROBABILITY_TOL`] (scaled by
/// the vector norm) signal a numerical fault and error out.
pub fn pom_probability(
    rho_c: &DensityMatrix,
    q: &FockVector,
    phi: f64,
) -> Result<f64, SchemeError> {
    // exp[-i (N + lambda - m) phi] differs from exp[i m phi] by a global
    // phase, which the quadratic form cannot see.
    let q_phi = apply_phase(q, phi);
    let value = rho_c.quadratic_form(&q_phi)?;
    let scale = q.norm_sqr().max(1.0);
    if value.im.abs() > PROBABILITY_TOL * scale {
        return Err(SchemeError::NegativeProbability { value: value.im });
    }
    if value.re < -PROBABILITY_TOL * scale {
        return Err(SchemeError::NegativeProbability { value: value.re });
    }
    Ok(value.re.max(0.0))
}

/// Cycled probability `P_beta(e)`: the uniform average of the single-setting
/// probabilities over the schedule's `j` values.
pub fn cycled_probability(
    rho_c: &DensityMatrix,
    event: DetectionEvent,
    beta: Beta,
    bs1: &BeamSplitterSpec,
    alpha_mag: f64,
) -> Result<f64, SchemeError> {
    let lambda = event.lambda();
    let schedule = PhaseSchedule::new(beta, lambda)?;
    let q = q_vector(event.n_a, event.n_b, event.n_c, bs1, alpha_mag, rho_c.cutoff())?;
    let mut acc = 0.0;
    for j in schedule.j_values.clone() {
        acc += pom_probability(rho_c, &q, schedule.phi(j))?;
    }
    Ok(acc / schedule.len() as f64)
}

/// The normalization constant `q_N q*_{N+lambda}` at the optimum detection
/// event: with `n_a = lambda/2` (even) or `(lambda+1)/2` (odd),
///
/// ```text
/// c = (-1)^{n_a} ref t^{2N} (r/2)^lambda C(lambda, n_a) sqrt(C(N+lambda, N))
/// ```
///
/// where `ref` is `|a_0 a_lambda*|` for a pure coherent reference and
/// `<0| rho_a |lambda>` for a mixed one.
pub fn norm_constant(
    n: usize,
    lambda: usize,
    bs1: &BeamSplitterSpec,
    reference: &NormReference,
) -> Result<NormConstant, SchemeError> {
    norm_constant_with_floor(n, lambda, bs1, reference, DEFAULT_NORM_FLOOR)
}

/// [`norm_constant`] with an explicit magnitude floor.
pub fn norm_constant_with_floor(
    n: usize,
    lambda: usize,
    bs1: &BeamSplitterSpec,
    reference: &NormReference,
    floor: f64,
) -> Result<NormConstant, SchemeError> {
    if lambda == 0 {
        return Err(SchemeError::LambdaZero);
    }
    let parity = if lambda.is_multiple_of(2) { Parity::Even } else { Parity::Odd };
    let n_a = lambda.div_ceil(2);
    let (ref_value, ref_desc) = match reference {
        NormReference::PureCoherent { alpha_mag } => {
            if !alpha_mag.is_finite() || *alpha_mag < 0.0 {
                return Err(SchemeError::NonFinite("alpha magnitude"));
            }
            let a0_alam = (-alpha_mag * alpha_mag).exp() * alpha_mag.powi(lambda as i32)
                / math::factorial(lambda as u64).sqrt();
            (
                Complex64::new(a0_alam, 0.0),
                format!("pure coherent |alpha| = {alpha_mag}"),
            )
        }
        NormReference::OffDiagonal(value) => (*value, "mixed reference <0|rho_a|lambda>".into()),
    };
    let sign = if n_a.is_multiple_of(2) { 1.0 } else { -1.0 };
    let t = bs1.t();
    let r = bs1.r();
    let value = ref_value
        * (sign
            * t.powi(2 * n as i32)
            * (r / 2.0).powi(lambda as i32)
            * math::binomial(lambda as u64, n_a as u64)
            * math::sqrt_binomial((n + lambda) as u64, n as u64));
    if value.norm() < floor {
        return Err(SchemeError::UnmeasurableElement {
            magnitude: value.norm(),
            floor,
        });
    }
    Ok(NormConstant {
        value,
        parity,
        n,
        lambda,
        t,
        r,
        reference: ref_desc,
    })
}

/// Combine the four cycled probabilities into the element
/// `<N+lambda| rho |N> = [P0 - P1 + i (P1/2 - P3/2)] / (4 c)`.
pub fn reconstruct_offdiag(
    p_zero: f64,
    p_one: f64,
    p_half: f64,
    p_three_halves: f64,
    nc: &NormConstant,
) -> Result<Complex64, SchemeError> {
    for p in [p_zero, p_one, p_half, p_three_halves] {
        if !(0.0..=1.0).contains(&p) {
            return Err(SchemeError::ProbabilityRange { value: p });
        }
    }
    let numerator = Complex64::new(p_zero - p_one, p_half - p_three_halves);
    Ok(numerator / (nc.value * 4.0))
}

/// Diagonal element from the probability of the event `(0, 0, N)`:
/// `rho_NN = P / (t^{2N} exp(-|alpha|^2))`.
pub fn reconstruct_diag(
    p: f64,
    n: usize,
    bs1: &BeamSplitterSpec,
    alpha_mag: f64,
) -> Result<f64, SchemeError> {
    reconstruct_diag_with_reference(p, n, bs1, (-alpha_mag * alpha_mag).exp())
}

/// Diagonal path for a general reference: the divisor is
/// `t^{2N} <0| rho_a |0>`.
pub fn reconstruct_diag_with_reference(
    p: f64,
    n: usize,
    bs1: &BeamSplitterSpec,
    reference_vacuum: f64,
) -> Result<f64, SchemeError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SchemeError::ProbabilityRange { value: p });
    }
    let divisor = bs1.t().powi(2 * n as i32) * reference_vacuum;
    if divisor <= 0.0 || !divisor.is_finite() {
        return Err(SchemeError::UnmeasurableElement {
            magnitude: divisor,
            floor: 0.0,
        });
    }
    Ok(p / divisor)
}

/// Parameter choices that maximize the norm-constant magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalParams {
    pub alpha_sq: f64,
    pub t_over_r_sq: f64,
}

/// For `lambda >= 1`: `|alpha|^2 = lambda/2` and `(t/r)^2 = 2N/lambda`.
///
/// `lambda = 0` has no cycling experiment to optimize; the returned
/// compromise keeps the reference weak (`|alpha|^2 = 1/2`) and signals
/// "maximize t" with an infinite ratio, which orchestration caps.
pub fn optimal_params(n: usize, lambda: usize) -> OptimalParams {
    if lambda == 0 {
        return OptimalParams {
            alpha_sq: 0.5,
            t_over_r_sq: f64::INFINITY,
        };
    }
    OptimalParams {
        alpha_sq: lambda as f64 / 2.0,
        t_over_r_sq: 2.0 * n as f64 / lambda as f64,
    }
}
