//! Brute-force reference implementation of the measurement: full three-mode
//! evolution through both beam splitters followed by projective photon
//! counting. Slow but direct; every closed-form path in [`crate::scheme`] is
//! validated against it.
//!
//! States live on the basis `|n_a, n_b, n_c>` organized in blocks of fixed
//! total photon number. Both beam splitters conserve the total, so each block
//! evolves independently and the probability of a count triple with total `E`
//! depends only on the input's total-`E` block; single-event probabilities
//! are therefore exact whenever `E` fits under the total cutoff.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{coherent_amplitudes, DensityMatrix, FockError, FockVector};
use crate::optics::{BeamSplitterSpec, BlockSet};
use crate::scheme::DetectionEvent;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("total cutoff {have} too small: event needs total photon number {needed}")]
    CutoffTooSmall { needed: usize, have: usize },
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Amplitudes over `|n_a, n_b, n_c>` with `n_a + n_b + n_c <= total_cutoff`,
/// stored per total-photon-number block.
#[derive(Debug, Clone)]
pub struct ThreeModeState {
    total_cutoff: usize,
    blocks: Vec<Vec<Complex64>>,
}

fn block_len(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

fn idx_in_block(m: usize, n_a: usize, n_b: usize) -> usize {
    // (n_a, n_b) lexicographic with n_c = m - n_a - n_b implied
    n_a * (m + 1) - n_a * (n_a.saturating_sub(1)) / 2 + n_b
}

impl ThreeModeState {
    pub fn zero(total_cutoff: usize) -> Self {
        Self {
            total_cutoff,
            blocks: (0..=total_cutoff)
                .map(|m| vec![Complex64::ZERO; block_len(m)])
                .collect(),
        }
    }

    /// Product input `|psi_a> (x) |0>_b (x) |psi_c>`, truncated at the total
    /// cutoff.
    pub fn product_with_vacuum_b(
        psi_a: &FockVector,
        psi_c: &FockVector,
        total_cutoff: usize,
    ) -> Self {
        let mut state = Self::zero(total_cutoff);
        for n_a in 0..=total_cutoff.min(psi_a.cutoff()) {
            let ca = psi_a.amplitude(n_a);
            if ca == Complex64::ZERO {
                continue;
            }
            for n_c in 0..=(total_cutoff - n_a).min(psi_c.cutoff()) {
                let amp = ca * psi_c.amplitude(n_c);
                if amp != Complex64::ZERO {
                    let m = n_a + n_c;
                    state.blocks[m][idx_in_block(m, n_a, 0)] = amp;
                }
            }
        }
        state
    }

    /// A single basis vector `|n_a, n_b, n_c>`.
    pub fn basis(event: DetectionEvent, total_cutoff: usize) -> Result<Self, OracleError> {
        let m = event.total();
        if m > total_cutoff {
            return Err(OracleError::CutoffTooSmall {
                needed: m,
                have: total_cutoff,
            });
        }
        let mut state = Self::zero(total_cutoff);
        state.blocks[m][idx_in_block(m, event.n_a, event.n_b)] = Complex64::ONE;
        Ok(state)
    }

    pub fn total_cutoff(&self) -> usize {
        self.total_cutoff
    }

    pub fn amplitude(&self, n_a: usize, n_b: usize, n_c: usize) -> Complex64 {
        let m = n_a + n_b + n_c;
        if m > self.total_cutoff {
            return Complex64::ZERO;
        }
        self.blocks[m][idx_in_block(m, n_a, n_b)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.iter())
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Iterate `(n_a, n_b, n_c, amplitude)` over every basis state.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, Complex64)> + '_ {
        self.blocks.iter().enumerate().flat_map(|(m, block)| {
            (0..=m).flat_map(move |n_a| {
                (0..=m - n_a).map(move |n_b| {
                    (n_a, n_b, m - n_a - n_b, block[idx_in_block(m, n_a, n_b)])
                })
            })
        })
    }

    /// Apply precomputed beam-splitter blocks to a mode pair; the remaining
    /// mode is a spectator and each total-photon block maps onto itself.
    pub(crate) fn transformed_on_pair(
        &self,
        (p, q): (usize, usize),
        blocks: &BlockSet,
    ) -> ThreeModeState {
        let spectator = 3 - p - q;
        let mut out = Self::zero(self.total_cutoff);
        let mut counts = [0usize; 3];
        for (m, block) in self.blocks.iter().enumerate() {
            let new_block = &mut out.blocks[m];
            for k in 0..=m {
                let s = m - k;
                let u = blocks.block(s);
                for i in 0..=s {
                    let mut acc = Complex64::ZERO;
                    for j in 0..=s {
                        counts[p] = j;
                        counts[q] = s - j;
                        counts[spectator] = k;
                        let src = block[idx_in_block(m, counts[0], counts[1])];
                        if src != Complex64::ZERO {
                            acc += u[(i, j)] * src;
                        }
                    }
                    counts[p] = i;
                    counts[q] = s - i;
                    counts[spectator] = k;
                    new_block[idx_in_block(m, counts[0], counts[1])] = acc;
                }
            }
        }
        out
    }
}

/// Reference field at the entry of the second beam splitter, before the
/// phase shifter is applied.
#[derive(Debug, Clone)]
pub enum OracleReference {
    /// Pure coherent state of the given magnitude.
    Coherent { alpha_mag: f64 },
    /// Arbitrary mixed reference, handled by spectral decomposition.
    Mixed(DensityMatrix),
}

/// Everything the forward simulation needs besides the signal state.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub bs1: BeamSplitterSpec,
    pub reference: OracleReference,
    pub total_cutoff: usize,
}

impl OracleConfig {
    pub fn coherent(alpha_mag: f64, bs1: BeamSplitterSpec, total_cutoff: usize) -> Self {
        Self {
            bs1,
            reference: OracleReference::Coherent { alpha_mag },
            total_cutoff,
        }
    }

    /// Default total cutoff: highest signal level plus largest count spread
    /// plus a Poisson margin for the reference.
    pub fn default_total_cutoff(n_max: usize, lambda_max: usize, alpha_sq: f64) -> usize {
        n_max + lambda_max + (alpha_sq + 6.0 * alpha_sq.sqrt()).ceil() as usize
    }

    fn reference_pairs(&self, phi: f64, cutoff: usize) -> Result<Vec<(f64, FockVector)>, OracleError> {
        match &self.reference {
            OracleReference::Coherent { alpha_mag } => {
                let alpha = Complex64::from_polar(*alpha_mag, phi);
                Ok(vec![(1.0, coherent_amplitudes(alpha, cutoff)?.vector)])
            }
            OracleReference::Mixed(rho_a) => Ok(rho_a
                .eigenpairs()
                .into_iter()
                .map(|(w, psi)| (w, crate::optics::apply_phase(&psi, phi)))
                .collect()),
        }
    }
}

/// Evolve `|psi_a, 0, psi_c>` through BS1 on `(b, c)` then BS2 on `(a, b)`.
fn evolve(
    psi_a: &FockVector,
    psi_c: &FockVector,
    bs1_blocks: &BlockSet,
    bs2_blocks: &BlockSet,
    total_cutoff: usize,
) -> ThreeModeState {
    let input = ThreeModeState::product_with_vacuum_b(psi_a, psi_c, total_cutoff);
    let after_bs1 = input.transformed_on_pair((1, 2), bs1_blocks);
    after_bs1.transformed_on_pair((0, 1), bs2_blocks)
}

/// Probability of the count triple `event` with the reference phase set to
/// `phi`, by direct evolution and projection.
///
/// Exact (up to rounding) for any event whose total fits under the cutoff:
/// the beam splitters conserve total photon number, so the discarded tail
/// never feeds the requested block.
pub fn forward_probability(
    rho_c: &DensityMatrix,
    config: &OracleConfig,
    event: DetectionEvent,
    phi: f64,
) -> Result<f64, OracleError> {
    let needed = event.total();
    if needed > config.total_cutoff {
        return Err(OracleError::CutoffTooSmall {
            needed,
            have: config.total_cutoff,
        });
    }
    let total = needed; // single event: only its block matters
    let bs1_blocks = BlockSet::build(&config.bs1, total);
    let bs2_blocks = BlockSet::build(&BeamSplitterSpec::fifty_fifty(), total);
    let reference = config.reference_pairs(phi, total)?;
    let signal = rho_c.eigenpairs();
    let mut probability = 0.0;
    for (w_a, psi_a) in &reference {
        for (w_c, psi_c) in &signal {
            let out = evolve(psi_a, psi_c, &bs1_blocks, &bs2_blocks, total);
            probability += w_a * w_c * out.amplitude(event.n_a, event.n_b, event.n_c).norm_sqr();
        }
    }
    Ok(probability)
}

/// Joint count distribution over every triple with total `<= total_cutoff`,
/// as `(event, probability)` pairs. Same machinery as
/// [`forward_probability`] but one evolution for all events.
pub fn forward_joint(
    rho_c: &DensityMatrix,
    config: &OracleConfig,
    phi: f64,
) -> Result<Vec<(DetectionEvent, f64)>, OracleError> {
    let total = config.total_cutoff;
    let bs1_blocks = BlockSet::build(&config.bs1, total);
    let bs2_blocks = BlockSet::build(&BeamSplitterSpec::fifty_fifty(), total);
    let reference = config.reference_pairs(phi, total)?;
    let signal = rho_c.eigenpairs();
    let mut acc: Option<Vec<(DetectionEvent, f64)>> = None;
    for (w_a, psi_a) in &reference {
        for (w_c, psi_c) in &signal {
            let w = w_a * w_c;
            let out = evolve(psi_a, psi_c, &bs1_blocks, &bs2_blocks, total);
            match &mut acc {
                None => {
                    acc = Some(
                        out.iter()
                            .map(|(n_a, n_b, n_c, amp)| {
                                (DetectionEvent::new(n_a, n_b, n_c), w * amp.norm_sqr())
                            })
                            .collect(),
                    )
                }
                Some(list) => {
                    for (slot, (_, _, _, amp)) in list.iter_mut().zip(out.iter()) {
                        slot.1 += w * amp.norm_sqr();
                    }
                }
            }
        }
    }
    Ok(acc.unwrap_or_default())
}

/// The measurement vector `|q>` for one event, extracted by contracting the
/// evolved basis state against the reference and the vacuum. Independent of
/// the closed-form construction in [`crate::scheme::q_vector`].
pub fn q_via_contraction(
    event: DetectionEvent,
    config: &OracleConfig,
    phi: f64,
    signal_cutoff: usize,
) -> Result<FockVector, OracleError> {
    let total = event.total();
    if total > config.total_cutoff {
        return Err(OracleError::CutoffTooSmall {
            needed: total,
            have: config.total_cutoff,
        });
    }
    if matches!(config.reference, OracleReference::Mixed(_)) {
        // A mixed reference has no single |q>; it is an ensemble of them.
        return Err(OracleError::Fock(FockError::InvalidArgument(
            "q contraction is defined for a pure coherent reference".into(),
        )));
    }
    let basis = ThreeModeState::basis(event, total)?;
    // |q> = <0|_b <ref|_a B1 B2 |event>: the adjoint evolution order.
    let bs2_first = basis.transformed_on_pair(
        (0, 1),
        &BlockSet::build(&BeamSplitterSpec::fifty_fifty(), total),
    );
    let evolved = bs2_first.transformed_on_pair((1, 2), &BlockSet::build(&config.bs1, total));
    let reference = config.reference_pairs(phi, total)?;
    let (_, psi_a) = &reference[0];
    let mut amplitudes = vec![Complex64::ZERO; signal_cutoff + 1];
    for (idx, amp) in amplitudes.iter_mut().enumerate() {
        for n_a in 0..=total.saturating_sub(idx) {
            *amp += psi_a.amplitude(n_a).conj() * evolved.amplitude(n_a, 0, idx);
        }
    }
    Ok(FockVector::unnormalized(amplitudes))
}

/// Residual `I - sum_e Pi(e)` on the signal levels `0..=n_max`, with the sum
/// running over every count triple under the total cutoff.
pub fn pom_completeness(
    config: &OracleConfig,
    n_max: usize,
    phi: f64,
) -> Result<DMatrix<Complex64>, OracleError> {
    let total = config.total_cutoff;
    let bs1_blocks = BlockSet::build(&config.bs1, total);
    let bs2_blocks = BlockSet::build(&BeamSplitterSpec::fifty_fifty(), total);
    let reference = config.reference_pairs(phi, total)?;
    let dim = n_max + 1;
    let mut gram = DMatrix::<Complex64>::zeros(dim, dim);
    for (w_a, psi_a) in &reference {
        // Amplitude tables A_n(e) for each signal level n.
        let evolved: Vec<ThreeModeState> = (0..dim)
            .map(|n| {
                let psi_c = FockVector::fock(n, n_max).expect("n <= n_max");
                evolve(psi_a, &psi_c, &bs1_blocks, &bs2_blocks, total)
            })
            .collect();
        for m in 0..dim {
            for n in 0..dim {
                let mut acc = Complex64::ZERO;
                for (block_m, block_n) in evolved[m].blocks.iter().zip(&evolved[n].blocks) {
                    for (am, an) in block_m.iter().zip(block_n) {
                        acc += am.conj() * an;
                    }
                }
                gram[(m, n)] += Complex64::new(*w_a, 0.0) * acc;
            }
        }
    }
    Ok(DMatrix::identity(dim, dim) - gram)
}

/// Largest entry modulus: the figure of merit for completeness residuals.
pub fn sup_norm(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}
