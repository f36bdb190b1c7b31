//! Beam-splitter and phase-shifter unitaries in the photon-number basis.
//!
//! The sign and phase conventions are pinned once here and everything else in
//! the crate inherits them: a beam splitter with transmission `t = cos(eta)`
//! and reflection `r = sin(eta)` maps creation operators as
//!
//! ```text
//! a+  ->  t a+ - i r b+        b+  ->  t b+ - i r a+
//! ```
//!
//! and leaves the two-mode vacuum invariant. Because the generator
//! `a+ b + b+ a` conserves total photon number, the unitary decomposes into
//! exact blocks, one per total photon number; no truncation leakage occurs
//! inside a block.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::fock::FockVector;
use crate::oracle::ThreeModeState;

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("mixing angle {0} outside [0, pi/2]")]
    AngleRange(f64),
    #[error("mode pair ({0}, {1}) invalid: indices must be distinct and < 3")]
    ModePair(usize, usize),
}

/// A lossless beam splitter parametrized by its mixing angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterSpec {
    mixing_angle: f64,
}

impl BeamSplitterSpec {
    pub fn new(mixing_angle: f64) -> Result<Self, OpticsError> {
        if !mixing_angle.is_finite()
            || !(0.0..=std::f64::consts::FRAC_PI_2).contains(&mixing_angle)
        {
            return Err(OpticsError::AngleRange(mixing_angle));
        }
        Ok(Self { mixing_angle })
    }

    /// The fixed 50/50 splitter (`eta = pi/4`).
    pub fn fifty_fifty() -> Self {
        Self {
            mixing_angle: std::f64::consts::FRAC_PI_4,
        }
    }

    /// Build from the squared transmission-to-reflection ratio `(t/r)^2`.
    /// `0` gives a pure reflector, `inf` a pure transmitter.
    pub fn from_t_over_r_sq(ratio: f64) -> Result<Self, OpticsError> {
        if ratio.is_nan() || ratio < 0.0 {
            return Err(OpticsError::AngleRange(ratio));
        }
        if ratio.is_infinite() {
            return Self::new(0.0);
        }
        // t^2 = x/(1+x), r^2 = 1/(1+x); eta = atan(r/t) = atan(1/sqrt(x))
        Self::new((1.0 / ratio.sqrt()).atan())
    }

    pub fn mixing_angle(&self) -> f64 {
        self.mixing_angle
    }

    /// Transmission coefficient `t = cos(eta)`.
    pub fn t(&self) -> f64 {
        self.mixing_angle.cos()
    }

    /// Reflection coefficient `r = sin(eta)`.
    pub fn r(&self) -> f64 {
        self.mixing_angle.sin()
    }
}

/// One total-photon-number block of a two-mode beam-splitter unitary, acting
/// on the basis `{|k, total_n - k>}` ordered by `k`.
#[derive(Debug, Clone)]
pub struct TwoModeBlock {
    pub total_n: usize,
    pub matrix: DMatrix<Complex64>,
}

impl TwoModeBlock {
    /// Max elementwise deviation of `U^dagger U` from the identity.
    pub fn unitarity_residual(&self) -> f64 {
        let dim = self.matrix.nrows();
        let product = self.matrix.adjoint() * &self.matrix;
        let mut worst = 0.0_f64;
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { Complex64::ONE } else { Complex64::ZERO };
                worst = worst.max((product[(i, j)] - expect).norm());
            }
        }
        worst
    }
}

/// Block unitary for the angle `eta` (sign unrestricted; callers go through
/// [`bs_block`]). Computed by eigendecomposition of the real symmetric
/// tridiagonal generator, so each block is unitary to machine precision.
fn bs_block_unchecked(eta: f64, total_n: usize) -> DMatrix<Complex64> {
    let dim = total_n + 1;
    if eta == 0.0 {
        // Fully transmitting: exactly the identity, no eigensolver noise.
        return DMatrix::identity(dim, dim);
    }
    let mut generator = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..total_n {
        // <k+1, n-k-1| a+ b |k, n-k> = sqrt((k+1)(n-k))
        let g = (((k + 1) * (total_n - k)) as f64).sqrt();
        generator[(k, k + 1)] = g;
        generator[(k + 1, k)] = g;
    }
    let eig = nalgebra::SymmetricEigen::new(generator);
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&d| Complex64::from_polar(1.0, -eta * d))
        .collect();
    DMatrix::from_fn(dim, dim, |i, j| {
        phases
            .iter()
            .enumerate()
            .map(|(k, phase)| eig.eigenvectors[(i, k)] * phase * eig.eigenvectors[(j, k)])
            .sum()
    })
}

/// The total-photon-number-`total_n` block of the beam-splitter unitary.
///
/// For `total_n = 1` this is `[[t, -i r], [-i r, t]]` in the basis
/// `{|1,0>, |0,1>}`.
pub fn bs_block(spec: &BeamSplitterSpec, total_n: usize) -> TwoModeBlock {
    TwoModeBlock {
        total_n,
        matrix: bs_block_unchecked(spec.mixing_angle, total_n),
    }
}

/// Blocks `0..=max_total` of one beam splitter, computed once.
pub(crate) struct BlockSet {
    blocks: Vec<DMatrix<Complex64>>,
}

impl BlockSet {
    pub(crate) fn build(spec: &BeamSplitterSpec, max_total: usize) -> Self {
        Self {
            blocks: (0..=max_total)
                .map(|n| bs_block_unchecked(spec.mixing_angle, n))
                .collect(),
        }
    }

    pub(crate) fn block(&self, total_n: usize) -> &DMatrix<Complex64> {
        &self.blocks[total_n]
    }
}

/// Apply a phase shifter: `c_n -> exp(i n phi) c_n`.
pub fn apply_phase(state: &FockVector, phi: f64) -> FockVector {
    state.map_indexed(|n, c| c * Complex64::from_polar(1.0, phi * n as f64))
}

/// Apply a beam splitter to two of the three modes of a blocked state.
///
/// Total photon number is conserved block by block; the third mode is a
/// spectator. `mode_pair` indexes modes as `0 = a, 1 = b, 2 = c`.
pub fn apply_bs(
    state: &ThreeModeState,
    mode_pair: (usize, usize),
    spec: &BeamSplitterSpec,
) -> Result<ThreeModeState, OpticsError> {
    let (p, q) = mode_pair;
    if p > 2 || q > 2 || p == q {
        return Err(OpticsError::ModePair(p, q));
    }
    let blocks = BlockSet::build(spec, state.total_cutoff());
    Ok(state.transformed_on_pair(mode_pair, &blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::coherent_amplitudes;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn spec_identities() {
        let spec = BeamSplitterSpec::new(0.3).unwrap();
        assert_abs_diff_eq!(spec.t() * spec.t() + spec.r() * spec.r(), 1.0, epsilon = 1e-15);
        assert!(BeamSplitterSpec::new(-0.1).is_err());
        assert!(BeamSplitterSpec::new(2.0).is_err());
    }

    #[test]
    fn from_ratio_boundaries() {
        let reflect = BeamSplitterSpec::from_t_over_r_sq(0.0).unwrap();
        assert_abs_diff_eq!(reflect.r(), 1.0, epsilon = 1e-15);
        let transmit = BeamSplitterSpec::from_t_over_r_sq(f64::INFINITY).unwrap();
        assert_abs_diff_eq!(transmit.t(), 1.0, epsilon = 1e-15);
        let balanced = BeamSplitterSpec::from_t_over_r_sq(1.0).unwrap();
        assert_abs_diff_eq!(balanced.t(), FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn block_zero_is_scalar_one() {
        let b = bs_block(&BeamSplitterSpec::new(0.7).unwrap(), 0);
        assert_eq!(b.matrix.nrows(), 1);
        assert!((b.matrix[(0, 0)] - Complex64::ONE).norm() < 1e-15);
    }

    #[test]
    fn block_one_matches_creation_convention() {
        let spec = BeamSplitterSpec::new(0.4).unwrap();
        let b = bs_block(&spec, 1);
        let (t, r) = (spec.t(), spec.r());
        assert!((b.matrix[(0, 0)] - Complex64::new(t, 0.0)).norm() < 1e-14);
        assert!((b.matrix[(1, 1)] - Complex64::new(t, 0.0)).norm() < 1e-14);
        assert!((b.matrix[(0, 1)] - Complex64::new(0.0, -r)).norm() < 1e-14);
        assert!((b.matrix[(1, 0)] - Complex64::new(0.0, -r)).norm() < 1e-14);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        // 50/50 splitter, |1,1> in: no coincidence amplitude on |1,1> out.
        let b = bs_block(&BeamSplitterSpec::fifty_fifty(), 2);
        assert!(b.matrix[(1, 1)].norm() < 1e-12);
        // The photons bunch: |2,0> and |0,2> each with probability 1/2.
        assert_abs_diff_eq!(b.matrix[(0, 1)].norm_sqr(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.matrix[(2, 1)].norm_sqr(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn inverse_angle_composes_to_identity() {
        for total_n in [1usize, 3, 7] {
            let u = bs_block_unchecked(0.61, total_n);
            let v = bs_block_unchecked(-0.61, total_n);
            let product = &u * &v;
            for i in 0..=total_n {
                for j in 0..=total_n {
                    let expect = if i == j { Complex64::ONE } else { Complex64::ZERO };
                    assert!((product[(i, j)] - expect).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn heisenberg_creation_operator_map() {
        // U a+ U^dagger = t a+ - i r b+ checked on every matrix element up to
        // a block cutoff; a+ and b+ connect block n to block n+1.
        let spec = BeamSplitterSpec::new(0.9).unwrap();
        let (t, r) = (spec.t(), spec.r());
        for n in 0..8usize {
            let u_n = bs_block(&spec, n).matrix;
            let u_n1 = bs_block(&spec, n + 1).matrix;
            let mut a_dag = DMatrix::<Complex64>::zeros(n + 2, n + 1);
            let mut b_dag = DMatrix::<Complex64>::zeros(n + 2, n + 1);
            for i in 0..=n {
                a_dag[(i + 1, i)] = Complex64::new(((i + 1) as f64).sqrt(), 0.0);
                b_dag[(i, i)] = Complex64::new(((n - i + 1) as f64).sqrt(), 0.0);
            }
            let lhs = &u_n1 * &a_dag * u_n.adjoint();
            let rhs = &a_dag * Complex64::new(t, 0.0) + &b_dag * Complex64::new(0.0, -r);
            let worst = (lhs - rhs).map(|c| c.norm()).max();
            assert!(worst < 1e-10, "n={n}: residual {worst}");
        }
    }

    #[test]
    fn phase_shifter_basics() {
        let c = coherent_amplitudes(Complex64::new(0.8, 0.0), 12).unwrap().vector;
        // phi = 0 is the identity
        assert_eq!(apply_phase(&c, 0.0).amplitudes(), c.amplitudes());
        // coherent alpha -> coherent alpha e^{i phi}
        let phi = 1.234;
        let rotated = apply_phase(&c, phi);
        let direct = coherent_amplitudes(Complex64::from_polar(0.8, phi), 12)
            .unwrap()
            .vector;
        for n in 0..=12 {
            assert!((rotated.amplitude(n) - direct.amplitude(n)).norm() < 1e-14);
        }
        // phi = 2 pi is the identity again
        let full_turn = apply_phase(&c, std::f64::consts::TAU);
        for n in 0..=12 {
            assert!((full_turn.amplitude(n) - c.amplitude(n)).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn blocks_are_unitary(angle in 0.0..std::f64::consts::FRAC_PI_2, total_n in 0usize..12) {
            let spec = BeamSplitterSpec::new(angle).unwrap();
            let block = bs_block(&spec, total_n);
            prop_assert!(block.unitarity_residual() < 1e-12);
        }
    }
}
