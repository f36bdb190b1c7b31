//! Truncated single-mode Fock-space algebra: state vectors, density matrices
//! and the validity checks every downstream module relies on.
//!
//! All values are immutable after construction. Truncation is treated as an
//! explicit error budget: constructors record the probability weight that the
//! cutoff discards and trace checks accept exactly that much slack instead of
//! silently renormalizing.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default truncation budget: a coherent-state expansion is considered
/// adequate once its discarded tail falls below this.
pub const DEFAULT_TRUNCATION_EPSILON: f64 = 1e-12;

/// Elementwise Hermiticity tolerance for density matrices.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Eigenvalue floor: eigenvalues above this count as non-negative.
pub const PSD_EIGENVALUE_FLOOR: f64 = -1e-10;

/// Norm tolerance for vectors flagged as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Norm tolerance accepted by [`density_from_pure`].
pub const PURE_STATE_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("amplitude vector not normalized: |1 - sum| = {deviation:.3e} exceeds {tolerance:.1e}")]
    NotNormalized { deviation: f64, tolerance: f64 },
    #[error("matrix is not Hermitian: max |entry - conj(transpose)| = {0:.3e}")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite: min eigenvalue = {0:.3e}")]
    NotPositive(f64),
    #[error("trace deviates from 1 by {deviation:.3e}, beyond the declared truncation tail {tail:.3e}")]
    TraceDeviation { deviation: f64, tail: f64 },
    #[error("unknown test state kind `{0}`")]
    UnknownKind(String),
    #[error("thermal mean photon number must be >= 0, got {0}")]
    NegativeMean(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed matrix data: {0}")]
    Malformed(String),
}

/// Complex amplitudes over the number states `|0>..|cutoff>` of one mode.
///
/// A vector may be unnormalized (the scheme's `|q>` vectors are); the
/// `normalized` flag records whether the sum of squared moduli was within
/// [`NORMALIZATION_TOL`] of one at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: Vec<Complex64>,
    normalized: bool,
}

impl FockVector {
    /// Wrap raw amplitudes; the normalization flag is derived, not enforced.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, FockError> {
        if amplitudes.is_empty() {
            return Err(FockError::InvalidArgument("empty amplitude vector".into()));
        }
        if amplitudes.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(FockError::NonFinite("amplitude"));
        }
        let norm_sqr: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        let normalized = (norm_sqr - 1.0).abs() <= NORMALIZATION_TOL;
        Ok(Self {
            amplitudes,
            normalized,
        })
    }

    /// An explicitly unnormalized vector such as `|q>`.
    pub fn unnormalized(amplitudes: Vec<Complex64>) -> Self {
        Self {
            amplitudes,
            normalized: false,
        }
    }

    /// The number state `|n>` on `0..=cutoff`.
    pub fn fock(n: usize, cutoff: usize) -> Result<Self, FockError> {
        if n > cutoff {
            return Err(FockError::InvalidArgument(format!(
                "fock level {n} exceeds cutoff {cutoff}"
            )));
        }
        let mut amplitudes = vec![Complex64::ZERO; cutoff + 1];
        amplitudes[n] = Complex64::ONE;
        Ok(Self {
            amplitudes,
            normalized: true,
        })
    }

    /// `|0>` on `0..=cutoff`.
    pub fn vacuum(cutoff: usize) -> Self {
        Self::fock(0, cutoff).expect("vacuum always fits")
    }

    pub fn cutoff(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, n: usize) -> Complex64 {
        self.amplitudes.get(n).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Map amplitudes elementwise; the normalization flag carries over (the
    /// callers are phase maps, which preserve the norm).
    pub(crate) fn map_indexed<F: FnMut(usize, Complex64) -> Complex64>(
        &self,
        mut f: F,
    ) -> FockVector {
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(n, &c)| f(n, c))
            .collect();
        FockVector {
            amplitudes,
            normalized: self.normalized,
        }
    }
}

/// A coherent-state expansion together with its discarded Poisson tail.
#[derive(Debug, Clone)]
pub struct CoherentExpansion {
    pub vector: FockVector,
    /// `1 - sum |c_n|^2`: probability weight beyond the cutoff.
    pub truncation_tail: f64,
}

impl CoherentExpansion {
    /// True when the tail exceeds the given budget and the expansion should
    /// be treated as a warning condition.
    pub fn tail_exceeds(&self, epsilon: f64) -> bool {
        self.truncation_tail > epsilon
    }
}

/// Amplitudes `c_n = alpha^n exp(-|alpha|^2/2) / sqrt(n!)` up to `cutoff`.
///
/// Computed by the stable recurrence `c_{n+1} = c_n alpha / sqrt(n+1)`.
pub fn coherent_amplitudes(
    alpha: Complex64,
    cutoff: usize,
) -> Result<CoherentExpansion, FockError> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(FockError::NonFinite("alpha"));
    }
    let mut amplitudes = Vec::with_capacity(cutoff + 1);
    let mut c = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amplitudes.push(c);
    for n in 0..cutoff {
        c *= alpha / ((n + 1) as f64).sqrt();
        amplitudes.push(c);
    }
    let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let truncation_tail = (1.0 - norm_sqr).max(0.0);
    let normalized = (norm_sqr - 1.0).abs() <= NORMALIZATION_TOL;
    Ok(CoherentExpansion {
        vector: FockVector {
            amplitudes,
            normalized,
        },
        truncation_tail,
    })
}

/// Smallest cutoff whose coherent tail at mean photon number `mean` is below
/// `epsilon`.
pub fn coherent_cutoff_for_tail(mean: f64, epsilon: f64) -> usize {
    // Poisson tail by direct summation; means in this crate are small.
    let mut term = (-mean).exp();
    let mut cumulative = term;
    let mut n = 0usize;
    while 1.0 - cumulative > epsilon && n < 400 {
        n += 1;
        term *= mean / n as f64;
        cumulative += term;
    }
    n
}

/// Complex Hermitian, positive semidefinite, trace-close-to-one matrix on a
/// truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
    truncation_tail: f64,
}

impl DensityMatrix {
    /// Validate and wrap a matrix. `truncation_tail` is the trace deficit the
    /// caller budgeted for; the trace check accepts exactly that much slack.
    pub fn new(entries: DMatrix<Complex64>, truncation_tail: f64) -> Result<Self, FockError> {
        if entries.nrows() != entries.ncols() || entries.is_empty() {
            return Err(FockError::DimensionMismatch(format!(
                "density matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(FockError::NonFinite("density matrix entry"));
        }
        let herm = hermiticity_residual(&entries);
        if herm > HERMITICITY_TOL {
            return Err(FockError::NotHermitian(herm));
        }
        let min_eig = min_eigenvalue(&entries);
        if min_eig < PSD_EIGENVALUE_FLOOR {
            return Err(FockError::NotPositive(min_eig));
        }
        let trace_dev = (entries.trace().re - 1.0).abs();
        if trace_dev > truncation_tail + 1e-12 {
            return Err(FockError::TraceDeviation {
                deviation: trace_dev,
                tail: truncation_tail,
            });
        }
        Ok(Self {
            entries,
            truncation_tail,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(m, n)]
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn truncation_tail(&self) -> f64 {
        self.truncation_tail
    }

    /// `<v|rho|v>` for an arbitrary (possibly unnormalized) vector.
    pub fn quadratic_form(&self, v: &FockVector) -> Result<Complex64, FockError> {
        if v.dim() != self.dim() {
            return Err(FockError::DimensionMismatch(format!(
                "vector dim {} vs matrix dim {}",
                v.dim(),
                self.dim()
            )));
        }
        let mut acc = Complex64::ZERO;
        for m in 0..self.dim() {
            let vm = v.amplitudes[m];
            if vm == Complex64::ZERO {
                continue;
            }
            let mut row = Complex64::ZERO;
            for n in 0..self.dim() {
                row += self.entries[(m, n)] * v.amplitudes[n];
            }
            acc += vm.conj() * row;
        }
        Ok(acc)
    }

    /// Spectral decomposition into `(weight, eigenvector)` pairs with weights
    /// above `1e-14`, descending.
    pub fn eigenpairs(&self) -> Vec<(f64, FockVector)> {
        let eig = nalgebra::SymmetricEigen::new(self.entries.clone());
        let mut pairs: Vec<(f64, FockVector)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 1e-14)
            .map(|(k, &w)| {
                let col = eig.eigenvectors.column(k);
                (
                    w,
                    FockVector {
                        amplitudes: col.iter().copied().collect(),
                        normalized: true,
                    },
                )
            })
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs
    }

    /// Serialize to the documented JSON form
    /// `{"cutoff": D, "re": [[..]], "im": [[..]]}`.
    pub fn to_json(&self) -> String {
        matrix_to_json(&self.entries)
    }

    /// Parse the documented JSON form and re-validate. The truncation tail is
    /// re-derived from the trace deficit.
    pub fn from_json(text: &str) -> Result<Self, FockError> {
        let raw: DensityMatrixJson =
            serde_json::from_str(text).map_err(|e| FockError::Malformed(e.to_string()))?;
        raw.into_matrix()
    }

    /// Serialize to CSV with header `m,n,re,im`, row-major over all entries.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.entries)
    }

    /// Parse the CSV form produced by [`Self::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, FockError> {
        let mut rows: Vec<(usize, usize, f64, f64)> = Vec::new();
        let mut max_index = 0usize;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with('m')) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(FockError::Malformed(format!(
                    "line {}: expected 4 fields, got {}",
                    i + 1,
                    fields.len()
                )));
            }
            let parse_err = |what: &str| FockError::Malformed(format!("line {}: {what}", i + 1));
            let m: usize = fields[0].parse().map_err(|_| parse_err("bad m"))?;
            let n: usize = fields[1].parse().map_err(|_| parse_err("bad n"))?;
            let re: f64 = fields[2].parse().map_err(|_| parse_err("bad re"))?;
            let im: f64 = fields[3].parse().map_err(|_| parse_err("bad im"))?;
            max_index = max_index.max(m).max(n);
            rows.push((m, n, re, im));
        }
        if rows.is_empty() {
            return Err(FockError::Malformed("no data rows".into()));
        }
        let dim = max_index + 1;
        let mut entries = DMatrix::from_element(dim, dim, Complex64::ZERO);
        for (m, n, re, im) in rows {
            entries[(m, n)] = Complex64::new(re, im);
        }
        let tail = (1.0 - entries.trace().re).max(0.0);
        Self::new(entries, tail)
    }
}

/// JSON form `{"cutoff": D, "re": [[..]], "im": [[..]]}` for any complex
/// matrix on a Fock grid (validated density matrices and raw estimates
/// share it).
pub fn matrix_to_json(entries: &DMatrix<Complex64>) -> String {
    serde_json::to_string_pretty(&DensityMatrixJson::from_entries(entries)).expect("serializable")
}

/// CSV form `m,n,re,im`, row-major over all entries.
pub fn matrix_to_csv(entries: &DMatrix<Complex64>) -> String {
    let mut out = String::from("m,n,re,im\n");
    for m in 0..entries.nrows() {
        for n in 0..entries.ncols() {
            let e = entries[(m, n)];
            out.push_str(&format!("{},{},{},{}\n", m, n, e.re, e.im));
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    cutoff: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl DensityMatrixJson {
    fn from_entries(entries: &DMatrix<Complex64>) -> Self {
        let dim = entries.nrows();
        let grab = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..dim)
                .map(|m| (0..dim).map(|n| f(&entries[(m, n)])).collect())
                .collect()
        };
        Self {
            cutoff: dim - 1,
            re: grab(|c| c.re),
            im: grab(|c| c.im),
        }
    }
}

impl DensityMatrixJson {
    fn into_matrix(self) -> Result<DensityMatrix, FockError> {
        let dim = self.cutoff + 1;
        let check = |name: &str, grid: &Vec<Vec<f64>>| -> Result<(), FockError> {
            if grid.len() != dim || grid.iter().any(|row| row.len() != dim) {
                return Err(FockError::Malformed(format!(
                    "{name} grid does not match cutoff {}",
                    self.cutoff
                )));
            }
            Ok(())
        };
        check("re", &self.re)?;
        check("im", &self.im)?;
        let entries =
            DMatrix::from_fn(dim, dim, |m, n| Complex64::new(self.re[m][n], self.im[m][n]));
        let tail = (1.0 - entries.trace().re).max(0.0);
        DensityMatrix::new(entries, tail)
    }
}

/// Max elementwise deviation from Hermiticity.
pub fn hermiticity_residual(m: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    eig.eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `|psi><psi|` for a normalized vector; rejects norm deviations beyond
/// [`PURE_STATE_NORM_TOL`].
pub fn density_from_pure(psi: &FockVector) -> Result<DensityMatrix, FockError> {
    let norm_sqr = psi.norm_sqr();
    let deviation = (norm_sqr - 1.0).abs();
    if deviation > PURE_STATE_NORM_TOL {
        return Err(FockError::NotNormalized {
            deviation,
            tolerance: PURE_STATE_NORM_TOL,
        });
    }
    let dim = psi.dim();
    let entries = DMatrix::from_fn(dim, dim, |m, n| {
        psi.amplitudes[m] * psi.amplitudes[n].conj()
    });
    DensityMatrix::new(entries, deviation)
}

/// The built-in test state family.
#[derive(Debug, Clone, PartialEq)]
pub enum TestStateKind {
    /// `|n><n|`.
    Fock(usize),
    /// Coherent state with the given mean photon number, real amplitude.
    Coherent { mean: f64 },
    /// Equal-amplitude superposition of the given levels.
    Superposition { levels: Vec<usize> },
    /// Thermal state: geometric number distribution with the given mean.
    Thermal { mean: f64 },
    /// `G G^dagger / Tr(G G^dagger)` for `G` with i.i.d. standard complex
    /// normal entries drawn from a seeded generator.
    Random { seed: u64 },
}

/// Build a member of the test corpus at the given cutoff.
pub fn make_test_states(kind: &TestStateKind, cutoff: usize) -> Result<DensityMatrix, FockError> {
    match kind {
        TestStateKind::Fock(n) => {
            let psi = FockVector::fock(*n, cutoff)?;
            density_from_pure(&psi)
        }
        TestStateKind::Coherent { mean } => {
            if !mean.is_finite() || *mean < 0.0 {
                return Err(FockError::NegativeMean(*mean));
            }
            let expansion = coherent_amplitudes(Complex64::new(mean.sqrt(), 0.0), cutoff)?;
            let psi = &expansion.vector;
            let dim = psi.dim();
            let entries = DMatrix::from_fn(dim, dim, |m, n| {
                psi.amplitudes[m] * psi.amplitudes[n].conj()
            });
            DensityMatrix::new(entries, expansion.truncation_tail)
        }
        TestStateKind::Superposition { levels } => {
            if levels.is_empty() {
                return Err(FockError::InvalidArgument(
                    "superposition needs at least one level".into(),
                ));
            }
            let amp = Complex64::new(1.0 / (levels.len() as f64).sqrt(), 0.0);
            let mut amplitudes = vec![Complex64::ZERO; cutoff + 1];
            for &level in levels {
                if level > cutoff {
                    return Err(FockError::InvalidArgument(format!(
                        "superposition level {level} exceeds cutoff {cutoff}"
                    )));
                }
                amplitudes[level] = amp;
            }
            density_from_pure(&FockVector::from_amplitudes(amplitudes)?)
        }
        TestStateKind::Thermal { mean } => {
            if !mean.is_finite() || *mean < 0.0 {
                return Err(FockError::NegativeMean(*mean));
            }
            let dim = cutoff + 1;
            let ratio = mean / (1.0 + mean);
            let mut entries = DMatrix::from_element(dim, dim, Complex64::ZERO);
            let mut p = 1.0 / (1.0 + mean);
            let mut total = 0.0;
            for n in 0..dim {
                entries[(n, n)] = Complex64::new(p, 0.0);
                total += p;
                p *= ratio;
            }
            DensityMatrix::new(entries, (1.0 - total).max(0.0))
        }
        TestStateKind::Random { seed } => {
            let dim = cutoff + 1;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
            let g = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(draw(), draw()));
            let mut rho = &g * g.adjoint();
            let trace = rho.trace().re;
            rho /= Complex64::new(trace, 0.0);
            // Symmetrize away the last-bit asymmetry of the product.
            let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
            DensityMatrix::new(rho, 0.0)
        }
    }
}
