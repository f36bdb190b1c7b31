//! Physical imperfections: detector-efficiency smearing and its inversion,
//! finite-shot Monte Carlo sampling, and noisy local-oscillator models.
//!
//! A detector of efficiency `eta` turns a true count distribution `p_m` into
//!
//! ```text
//! p_n(eta) = sum_m C(n+m, n) eta^n (1-eta)^m p_{n+m}
//! ```
//!
//! (binomial thinning). The same kernel evaluated at `1/eta` inverts the
//! transformation; the inverse series alternates in sign and is reported with
//! a conditioning diagnostic, because it diverges for poor detectors.
//!
//! Dark counts are not modeled. They would enter here as a second kernel
//! composed with the thinning kernel in [`smear`]; the composition point is
//! the hook for adding them.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fock::{coherent_amplitudes, DensityMatrix, FockError, FockVector};
use crate::math;
use crate::scheme::DetectionEvent;

/// Default bound on intermediate magnitudes in the Bernoulli inversion.
pub const DEFAULT_INVERSION_BOUND: f64 = 1e9;

/// Slack allowed on probability sums (accumulated rounding).
const SUM_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ImperfectionError {
    #[error("efficiency {0} outside [0, 1]")]
    EfficiencyRange(f64),
    #[error("efficiency {0} not invertible (must be > 0)")]
    NotInvertible(f64),
    #[error("distribution invalid: {0}")]
    InvalidDistribution(String),
    #[error(
        "inversion ill-conditioned: intermediate magnitude {magnitude:.3e} exceeds bound {bound:.1e}"
    )]
    IllConditioned { magnitude: f64, bound: f64 },
    #[error("cannot sample an empty distribution")]
    EmptyDistribution,
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Probabilities over photocounts `0..=cutoff` of a single detector. The sum
/// may fall short of one by a recorded truncation tail but never exceeds it.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    probabilities: Vec<f64>,
}

impl CountDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self, ImperfectionError> {
        if probabilities.is_empty() {
            return Err(ImperfectionError::InvalidDistribution("empty".into()));
        }
        if probabilities.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(ImperfectionError::InvalidDistribution(
                "entries must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if total > 1.0 + SUM_SLACK {
            return Err(ImperfectionError::InvalidDistribution(format!(
                "sum {total} exceeds 1"
            )));
        }
        Ok(Self { probabilities })
    }

    /// The photon-number distribution (diagonal) of a density matrix.
    pub fn from_density(rho: &DensityMatrix) -> Self {
        Self {
            probabilities: (0..rho.dim()).map(|n| rho.entry(n, n).re.max(0.0)).collect(),
        }
    }

    /// Poisson distribution with the given mean, truncated at `cutoff`.
    pub fn poisson(mean: f64, cutoff: usize) -> Result<Self, ImperfectionError> {
        if !mean.is_finite() || mean < 0.0 {
            return Err(ImperfectionError::InvalidDistribution(format!(
                "poisson mean {mean}"
            )));
        }
        let mut probabilities = Vec::with_capacity(cutoff + 1);
        let mut term = (-mean).exp();
        for n in 0..=cutoff {
            probabilities.push(term);
            term *= mean / (n + 1) as f64;
        }
        Self::new(probabilities)
    }

    pub fn cutoff(&self) -> usize {
        self.probabilities.len() - 1
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// `1 - sum`: the truncation tail.
    pub fn tail(&self) -> f64 {
        (1.0 - self.total()).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

/// Thinning kernel `B(n | m; eta) = C(m, n) eta^n (1-eta)^{m-n}` for
/// `n <= m`, in log space away from the endpoints. Also valid at `eta > 1`,
/// where it alternates in sign (the inversion kernel).
fn thinning_kernel(n: usize, m: usize, eta: f64) -> f64 {
    debug_assert!(n <= m);
    if eta == 1.0 {
        return if n == m { 1.0 } else { 0.0 };
    }
    if eta == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let loss = 1.0 - eta;
    let magnitude = (math::ln_factorial(m as u64)
        - math::ln_factorial(n as u64)
        - math::ln_factorial((m - n) as u64)
        + n as f64 * eta.ln()
        + (m - n) as f64 * loss.abs().ln())
    .exp();
    if loss < 0.0 && (m - n) % 2 == 1 {
        -magnitude
    } else {
        magnitude
    }
}

/// Smear a count distribution by detector efficiency `eta`.
pub fn smear(
    dist: &CountDistribution,
    efficiency: f64,
) -> Result<CountDistribution, ImperfectionError> {
    if !(0.0..=1.0).contains(&efficiency) || !efficiency.is_finite() {
        return Err(ImperfectionError::EfficiencyRange(efficiency));
    }
    Ok(CountDistribution {
        probabilities: smear_axis_values(&dist.probabilities, efficiency),
    })
}

fn smear_axis_values(values: &[f64], eta: f64) -> Vec<f64> {
    if eta == 1.0 {
        return values.to_vec();
    }
    let len = values.len();
    let mut out = vec![0.0; len];
    for (m, &p) in values.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (n, slot) in out.iter_mut().enumerate().take(m + 1) {
            *slot += thinning_kernel(n, m, eta) * p;
        }
    }
    out
}

/// Diagnostics from a Bernoulli inversion.
#[derive(Debug, Clone, Copy)]
pub struct InversionDiagnostics {
    /// Largest absolute partial magnitude encountered; grows as
    /// `((1-eta)/eta)^m` and explodes below `eta = 1/2`.
    pub max_intermediate: f64,
}

/// Invert detector smearing: returns `q` with `smear(q, eta) = dist` up to
/// truncation, by applying the thinning kernel at `1/eta`.
pub fn bernoulli_invert(
    dist: &CountDistribution,
    efficiency: f64,
    cutoff: usize,
) -> Result<(CountDistribution, InversionDiagnostics), ImperfectionError> {
    bernoulli_invert_with_bound(dist, efficiency, cutoff, DEFAULT_INVERSION_BOUND)
}

/// [`bernoulli_invert`] with an explicit conditioning bound.
pub fn bernoulli_invert_with_bound(
    dist: &CountDistribution,
    efficiency: f64,
    cutoff: usize,
    bound: f64,
) -> Result<(CountDistribution, InversionDiagnostics), ImperfectionError> {
    if efficiency.is_nan() || efficiency <= 0.0 || efficiency > 1.0 {
        return Err(ImperfectionError::NotInvertible(efficiency));
    }
    let inverse_eta = 1.0 / efficiency;
    let mut out = vec![0.0; cutoff + 1];
    let mut max_intermediate = 0.0_f64;
    for (n, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut acc_magnitude = 0.0;
        for m in n..=dist.cutoff() {
            let term = thinning_kernel(n, m, inverse_eta) * dist.probability(m);
            acc += term;
            acc_magnitude += term.abs();
        }
        max_intermediate = max_intermediate.max(acc_magnitude);
        if acc_magnitude > bound {
            return Err(ImperfectionError::IllConditioned {
                magnitude: acc_magnitude,
                bound,
            });
        }
        // The exact inverse is a probability; clip the rounding residue.
        *slot = acc.clamp(0.0, 1.0);
    }
    Ok((
        CountDistribution { probabilities: out },
        InversionDiagnostics { max_intermediate },
    ))
}

/// Joint probabilities over count triples `(n_a, n_b, n_c)` on a rectangular
/// grid, with the discarded weight recorded as a tail.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl JointDistribution {
    pub fn zeros(max_counts: [usize; 3]) -> Self {
        let dims = [max_counts[0] + 1, max_counts[1] + 1, max_counts[2] + 1];
        Self {
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
            dims,
        }
    }

    fn index(&self, e: DetectionEvent) -> Option<usize> {
        if e.n_a < self.dims[0] && e.n_b < self.dims[1] && e.n_c < self.dims[2] {
            Some((e.n_a * self.dims[1] + e.n_b) * self.dims[2] + e.n_c)
        } else {
            None
        }
    }

    pub fn max_counts(&self) -> [usize; 3] {
        [self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1]
    }

    pub fn probability(&self, e: DetectionEvent) -> f64 {
        self.index(e).map(|i| self.data[i]).unwrap_or(0.0)
    }

    pub fn set(&mut self, e: DetectionEvent, p: f64) {
        let i = self.index(e).expect("event within joint grid");
        self.data[i] = p;
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn tail(&self) -> f64 {
        (1.0 - self.total()).max(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (DetectionEvent, f64)> + '_ {
        let dims = self.dims;
        self.data.iter().enumerate().map(move |(i, &p)| {
            let n_c = i % dims[2];
            let rest = i / dims[2];
            (
                DetectionEvent::new(rest / dims[1], rest % dims[1], n_c),
                p,
            )
        })
    }

    /// Smear each detector independently by its efficiency.
    pub fn smear(&self, etas: [f64; 3]) -> Result<Self, ImperfectionError> {
        for eta in etas {
            if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
                return Err(ImperfectionError::EfficiencyRange(eta));
            }
        }
        let mut data = self.data.clone();
        let [da, db, dc] = self.dims;
        // axis a
        if etas[0] != 1.0 {
            for ib in 0..db {
                for ic in 0..dc {
                    let line: Vec<f64> = (0..da)
                        .map(|ia| data[(ia * db + ib) * dc + ic])
                        .collect();
                    for (ia, v) in smear_axis_values(&line, etas[0]).into_iter().enumerate() {
                        data[(ia * db + ib) * dc + ic] = v;
                    }
                }
            }
        }
        // axis b
        if etas[1] != 1.0 {
            for ia in 0..da {
                for ic in 0..dc {
                    let line: Vec<f64> = (0..db)
                        .map(|ib| data[(ia * db + ib) * dc + ic])
                        .collect();
                    for (ib, v) in smear_axis_values(&line, etas[1]).into_iter().enumerate() {
                        data[(ia * db + ib) * dc + ic] = v;
                    }
                }
            }
        }
        // axis c
        if etas[2] != 1.0 {
            for ia in 0..da {
                for ib in 0..db {
                    let base = (ia * db + ib) * dc;
                    let line = data[base..base + dc].to_vec();
                    data[base..base + dc].copy_from_slice(&smear_axis_values(&line, etas[2]));
                }
            }
        }
        Ok(Self {
            dims: self.dims,
            data,
        })
    }
}

/// Counts observed over a fixed number of shots. Draws landing beyond the
/// joint grid (the truncation tail) are tallied separately.
#[derive(Debug, Clone)]
pub struct SampledCounts {
    pub shots: u64,
    counts: std::collections::HashMap<DetectionEvent, u64>,
    tail_count: u64,
}

impl SampledCounts {
    pub fn count(&self, e: DetectionEvent) -> u64 {
        self.counts.get(&e).copied().unwrap_or(0)
    }

    /// Estimated probability `count / shots`.
    pub fn estimate(&self, e: DetectionEvent) -> f64 {
        self.count(e) as f64 / self.shots as f64
    }

    /// Shots that fell beyond the joint grid.
    pub fn tail_count(&self) -> u64 {
        self.tail_count
    }

    /// `(event, count)` pairs sorted lexicographically.
    pub fn sorted(&self) -> Vec<(DetectionEvent, u64)> {
        let mut all: Vec<_> = self.counts.iter().map(|(&e, &c)| (e, c)).collect();
        all.sort_by_key(|(e, _)| (e.n_a, e.n_b, e.n_c));
        all
    }

    /// CSV rows `n_a,n_b,n_c,count`; tail draws are excluded (see
    /// [`Self::tail_count`]).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_a,n_b,n_c,count\n");
        for (e, c) in self.sorted() {
            out.push_str(&format!("{},{},{},{}\n", e.n_a, e.n_b, e.n_c, c));
        }
        out
    }
}

/// Multinomial draw from a joint distribution; deterministic for a given
/// seed. Residual probability (the truncation tail) lands in an overflow
/// bucket at the corner beyond the grid and is reported as such.
pub fn sample_events(
    joint: &JointDistribution,
    shots: u64,
    seed: u64,
) -> Result<SampledCounts, ImperfectionError> {
    sample_events_stream(joint, shots, seed, 0)
}

/// [`sample_events`] on an explicit substream: parallel samplers derive
/// independent, reproducible streams from one root seed.
pub fn sample_events_stream(
    joint: &JointDistribution,
    shots: u64,
    seed: u64,
    stream: u64,
) -> Result<SampledCounts, ImperfectionError> {
    if shots == 0 {
        return Err(ImperfectionError::InvalidDistribution(
            "shots must be >= 1".into(),
        ));
    }
    let events: Vec<(DetectionEvent, f64)> = joint.iter().filter(|(_, p)| *p > 0.0).collect();
    if events.is_empty() {
        return Err(ImperfectionError::EmptyDistribution);
    }
    let mut cumulative = Vec::with_capacity(events.len());
    let mut acc = 0.0;
    for (_, p) in &events {
        acc += p;
        cumulative.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut counts: std::collections::HashMap<DetectionEvent, u64> = Default::default();
    let mut tail_count = 0;
    for _ in 0..shots {
        let u: f64 = rng.gen();
        if u >= total {
            tail_count += 1;
            continue;
        }
        let idx = cumulative.partition_point(|&c| c <= u);
        *counts.entry(events[idx].0).or_insert(0) += 1;
    }
    Ok(SampledCounts {
        shots,
        counts,
        tail_count,
    })
}

/// The reference field model at the entry of the second beam splitter.
#[derive(Debug, Clone)]
pub enum ReferenceModel {
    /// Noiseless coherent state of the given magnitude.
    PureCoherent { alpha_mag: f64 },
    /// Coherent state dephased by a Gaussian phase diffusion of width
    /// `sigma` radians: entries pick up `exp(-sigma^2 (m-n)^2 / 2)`.
    PhaseDiffused { alpha_mag: f64, sigma: f64 },
    /// Explicit density matrix supplied by the caller.
    Explicit(DensityMatrix),
}

impl ReferenceModel {
    /// `<0| rho_a |lambda>`: the factor replacing `|a_0 a_lambda*|` in the
    /// normalization constants. Zero is a valid return; downstream raises
    /// the unmeasurable-element error.
    pub fn offdiag(&self, lambda: usize) -> Complex64 {
        match self {
            ReferenceModel::PureCoherent { alpha_mag } => Complex64::new(
                (-alpha_mag * alpha_mag).exp() * alpha_mag.powi(lambda as i32)
                    / math::factorial(lambda as u64).sqrt(),
                0.0,
            ),
            ReferenceModel::PhaseDiffused { alpha_mag, sigma } => {
                let pure = ReferenceModel::PureCoherent {
                    alpha_mag: *alpha_mag,
                }
                .offdiag(lambda);
                let damp = (-sigma * sigma * (lambda * lambda) as f64 / 2.0).exp();
                pure * damp
            }
            ReferenceModel::Explicit(rho_a) => {
                if lambda < rho_a.dim() {
                    rho_a.entry(0, lambda)
                } else {
                    Complex64::ZERO
                }
            }
        }
    }

    /// `<0| rho_a |0>`: the vacuum weight entering the diagonal path.
    pub fn vacuum_probability(&self) -> f64 {
        match self {
            ReferenceModel::PureCoherent { alpha_mag }
            | ReferenceModel::PhaseDiffused { alpha_mag, .. } => (-alpha_mag * alpha_mag).exp(),
            ReferenceModel::Explicit(rho_a) => rho_a.entry(0, 0).re,
        }
    }

    /// Expand to a density matrix at the given cutoff.
    pub fn density(&self, cutoff: usize) -> Result<DensityMatrix, ImperfectionError> {
        match self {
            ReferenceModel::PureCoherent { alpha_mag } => {
                let expansion = coherent_amplitudes(Complex64::new(*alpha_mag, 0.0), cutoff)?;
                let psi = expansion.vector;
                let dim = psi.dim();
                let entries = nalgebra::DMatrix::from_fn(dim, dim, |m, n| {
                    psi.amplitude(m) * psi.amplitude(n).conj()
                });
                Ok(DensityMatrix::new(entries, expansion.truncation_tail)?)
            }
            ReferenceModel::PhaseDiffused { alpha_mag, sigma } => {
                let expansion = coherent_amplitudes(Complex64::new(*alpha_mag, 0.0), cutoff)?;
                let psi = expansion.vector;
                let dim = psi.dim();
                let entries = nalgebra::DMatrix::from_fn(dim, dim, |m, n| {
                    let damp = if m == n {
                        1.0
                    } else {
                        let d = m.abs_diff(n) as f64;
                        (-sigma * sigma * d * d / 2.0).exp()
                    };
                    psi.amplitude(m) * psi.amplitude(n).conj() * damp
                });
                Ok(DensityMatrix::new(entries, expansion.truncation_tail)?)
            }
            ReferenceModel::Explicit(rho_a) => Ok(rho_a.clone()),
        }
    }

    /// Spectral decomposition of the reference; a pure coherent model stays
    /// a single unit-weight vector.
    pub fn eigenpairs(&self, cutoff: usize) -> Result<Vec<(f64, FockVector)>, ImperfectionError> {
        match self {
            ReferenceModel::PureCoherent { alpha_mag } => {
                let expansion = coherent_amplitudes(Complex64::new(*alpha_mag, 0.0), cutoff)?;
                Ok(vec![(1.0, expansion.vector)])
            }
            _ => Ok(self.density(cutoff)?.eigenpairs()),
        }
    }

    pub fn is_pure_coherent(&self) -> bool {
        matches!(self, ReferenceModel::PureCoherent { .. })
    }
}
