//! Batch command implementations behind the `rhoscope` binary: single
//! elements, full matrices, golden-table reproduction, count sampling and
//! oracle cross-checks. Each command renders its human output into a string
//! and returns an exit code; hard failures carry a machine-readable class.
//!
//! Exit codes: 0 success, 2 validation, 3 numerical/conditioning, 4
//! tolerance breach.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ResolvedConfig};
use crate::fock;
use crate::imperfection::ImperfectionError;
use crate::oracle::{self, OracleConfig, OracleError, OracleReference};
use crate::pipeline::{error_class, Experiment};
use crate::scheme::{q_vector, DetectionEvent, SchemeError};
use crate::tables;

/// Machine-readable failure classes surfaced on stderr.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Cutoff,
    UnmeasurableElement,
    Conditioning,
    Numerical,
    Tolerance,
    Io,
}

impl ErrorClass {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorClass::Validation => "validation",
            ErrorClass::Cutoff => "cutoff",
            ErrorClass::UnmeasurableElement => "unmeasurable-element",
            ErrorClass::Conditioning => "conditioning",
            ErrorClass::Numerical => "numerical",
            ErrorClass::Tolerance => "tolerance",
            ErrorClass::Io => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            ErrorClass::Validation | ErrorClass::Cutoff | ErrorClass::Io => 2,
            ErrorClass::UnmeasurableElement | ErrorClass::Conditioning | ErrorClass::Numerical => {
                3
            }
            ErrorClass::Tolerance => 4,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class.exit_code()
    }

    /// One-line JSON for stderr.
    pub fn machine_readable(&self) -> String {
        serde_json::json!({
            "error": {"class": self.class.name(), "message": self.message}
        })
        .to_string()
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let class = match &e {
            ConfigError::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Validation,
        };
        CliError::new(class, e.to_string())
    }
}

impl From<SchemeError> for CliError {
    fn from(e: SchemeError) -> Self {
        let class = match error_class(&e) {
            "unmeasurable-element" => ErrorClass::UnmeasurableElement,
            "cutoff" => ErrorClass::Cutoff,
            "numerical" => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        };
        CliError::new(class, e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        let class = match &e {
            OracleError::CutoffTooSmall { .. } => ErrorClass::Cutoff,
            OracleError::Fock(_) => ErrorClass::Validation,
        };
        CliError::new(class, e.to_string())
    }
}

impl From<ImperfectionError> for CliError {
    fn from(e: ImperfectionError) -> Self {
        let class = match &e {
            ImperfectionError::IllConditioned { .. } => ErrorClass::Conditioning,
            _ => ErrorClass::Validation,
        };
        CliError::new(class, e.to_string())
    }
}

/// Successful command outcome: rendered output plus the process exit code
/// (tolerance breaches render fully, then exit 4).
pub struct CmdResult {
    pub output: String,
    pub exit_code: i32,
}

impl CmdResult {
    fn ok(output: String) -> Self {
        Self {
            output,
            exit_code: 0,
        }
    }
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::new(ErrorClass::Io, format!("create {dir:?}: {e}")))?;
    }
    let dir = dir.unwrap_or(Path::new("."));
    let mut file = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::new(ErrorClass::Io, format!("temp file in {dir:?}: {e}")))?;
    std::io::Write::write_all(&mut file, contents.as_bytes())
        .map_err(|e| CliError::new(ErrorClass::Io, format!("write {path:?}: {e}")))?;
    file.persist(path)
        .map_err(|e| CliError::new(ErrorClass::Io, format!("persist {path:?}: {e}")))?;
    Ok(())
}

fn complex_display(v: Complex64) -> String {
    if v.im >= 0.0 {
        format!("{:.10} + {:.10}i", v.re, v.im)
    } else {
        format!("{:.10} - {:.10}i", v.re, -v.im)
    }
}

#[derive(Serialize)]
struct ElementReportFile<'a> {
    config: &'a ExperimentConfig,
    element: &'a crate::pipeline::ElementRecord,
}

/// Measure one element `<n+lambda| rho |n>` and report it.
pub fn cmd_element(
    resolved: &ResolvedConfig,
    n: usize,
    lambda: usize,
    out_dir: Option<&Path>,
) -> Result<CmdResult, CliError> {
    if n + lambda > resolved.n_max.max(resolved.cutoff) {
        return Err(CliError::new(
            ErrorClass::Cutoff,
            format!(
                "element ({}, {}) outside the configured space (cutoff {})",
                n + lambda,
                n,
                resolved.cutoff
            ),
        ));
    }
    let mut experiment = Experiment::new(resolved)?;
    let record = experiment.measure_element(n, lambda)?;
    let mut out = String::new();
    writeln!(
        out,
        "element <{}|rho|{}> = {}",
        n + lambda,
        n,
        complex_display(Complex64::new(record.re, record.im))
    )
    .unwrap();
    writeln!(out, "conditioning |4c| = {:.6e}", record.conditioning).unwrap();
    if let Some(p) = &record.probabilities {
        match p {
            crate::pipeline::ProbabilityRecord::Diagonal { p } => {
                writeln!(out, "P(0,0,{n}) = {p:.12}").unwrap();
            }
            crate::pipeline::ProbabilityRecord::Cycled {
                p0,
                p1,
                p_half,
                p_three_halves,
            } => {
                writeln!(out, "P_0 = {p0:.12}  P_1 = {p1:.12}").unwrap();
                writeln!(out, "P_1/2 = {p_half:.12}  P_3/2 = {p_three_halves:.12}").unwrap();
            }
        }
    }
    if let Some([se_re, se_im]) = record.std_error {
        writeln!(out, "std error = ({se_re:.3e}, {se_im:.3e})").unwrap();
    }
    if let Some(dir) = out_dir {
        let report = ElementReportFile {
            config: &resolved.config,
            element: &record,
        };
        let path = dir.join(format!("element_{}_{}.json", n, lambda));
        write_atomic(&path, &serde_json::to_string_pretty(&report).unwrap())?;
        writeln!(out, "report written to {}", path.display()).unwrap();
    }
    Ok(CmdResult::ok(out))
}

/// Output format selection for matrix files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatSel {
    Json,
    Csv,
    Both,
}

/// Measure the full matrix and emit JSON/CSV plus the run report.
pub fn cmd_matrix(
    resolved: &ResolvedConfig,
    out_dir: &Path,
    format: FormatSel,
) -> Result<CmdResult, CliError> {
    let mut experiment = Experiment::new(resolved)?;
    let estimate = experiment.measure_full_matrix(&resolved.config);
    let mut out = String::new();
    writeln!(
        out,
        "measured {} elements ({} failed) at n_max = {}",
        estimate.report.elements.len(),
        estimate.report.failures,
        resolved.n_max
    )
    .unwrap();
    let mut written = Vec::new();
    if matches!(format, FormatSel::Json | FormatSel::Both) {
        let path = out_dir.join("matrix.json");
        write_atomic(&path, &fock::matrix_to_json(&estimate.entries))?;
        written.push(path);
    }
    if matches!(format, FormatSel::Csv | FormatSel::Both) {
        let path = out_dir.join("matrix.csv");
        write_atomic(&path, &fock::matrix_to_csv(&estimate.entries))?;
        written.push(path);
    }
    let report_path = out_dir.join("report.json");
    write_atomic(
        &report_path,
        &serde_json::to_string_pretty(&estimate.report).unwrap(),
    )?;
    written.push(report_path);
    for path in &written {
        writeln!(out, "wrote {}", path.display()).unwrap();
    }
    Ok(CmdResult::ok(out))
}

fn render_table_section(
    out: &mut String,
    title: &str,
    computed: &nalgebra::DMatrix<Complex64>,
    golden: &[[f64; 5]; 5],
    diff: &tables::TableDiff,
) {
    writeln!(out, "== {title}").unwrap();
    writeln!(out, "computed:").unwrap();
    out.push_str(&tables::format_block(computed));
    writeln!(out, "golden:").unwrap();
    out.push_str(&tables::format_golden(golden));
    writeln!(
        out,
        "max |diff| = {:.3e} at ({}, {}) (tolerance {:.1e})",
        diff.max_abs, diff.worst.0, diff.worst.1, diff.tolerance
    )
    .unwrap();
    for (m, n, d) in diff.breaches() {
        writeln!(out, "  BREACH ({m},{n}): |diff| = {d:.3e}").unwrap();
    }
}

/// Run both golden-table configurations and diff against the bundled
/// reference digits. Any diff beyond tolerance exits 4.
pub fn cmd_tables(out_dir: Option<&Path>, eta: Option<f64>) -> Result<CmdResult, CliError> {
    let mut out = String::new();
    let mut breach = false;

    let ideal = tables::ideal_config();
    let resolved = ideal.resolve()?;
    let ideal_estimate = crate::pipeline::measure_full_matrix(&resolved)?;
    let ideal_diff = tables::compare_to_golden(
        &ideal_estimate.entries,
        &tables::GOLDEN_IDEAL,
        tables::IDEAL_TOLERANCE,
    );
    render_table_section(
        &mut out,
        "ideal detectors (exact probabilities)",
        &ideal_estimate.entries,
        &tables::GOLDEN_IDEAL,
        &ideal_diff,
    );
    breach |= ideal_diff.breached();

    // Diagnostic: the same computed matrix against the analytic coherent
    // matrix, which localizes any golden-digit discrepancy.
    let analytic = tables::analytic_coherent_matrix(0.5, 5);
    let analytic_diff =
        tables::compare_to_golden(&ideal_estimate.entries, &golden_from(&analytic), 5e-5);
    writeln!(
        out,
        "cross-check vs analytic coherent matrix: max |diff| = {:.3e}{}",
        analytic_diff.max_abs,
        if analytic_diff.breached() {
            " (FAIL)"
        } else {
            " (pipeline exact)"
        }
    )
    .unwrap();
    if ideal_diff.breached() && !analytic_diff.breached() {
        writeln!(
            out,
            "note: the pipeline matches the analytic matrix; the flagged diffs \
             are between the golden digits and the analytic matrix itself"
        )
        .unwrap();
    }
    writeln!(out).unwrap();

    let eta_value = eta.unwrap_or(0.9);
    let lossy = tables::lossy_config(eta_value);
    let lossy_resolved = lossy.resolve()?;
    let lossy_estimate = crate::pipeline::measure_full_matrix(&lossy_resolved)?;
    if (eta_value - 0.9).abs() < 1e-12 {
        let diff = tables::compare_to_golden(
            &lossy_estimate.entries,
            &tables::GOLDEN_ETA90,
            tables::ETA90_TOLERANCE,
        );
        render_table_section(
            &mut out,
            "detector efficiency 0.9 (analytic smearing)",
            &lossy_estimate.entries,
            &tables::GOLDEN_ETA90,
            &diff,
        );
        breach |= diff.breached();
        // Qualitative pattern: loss inflates the vacuum diagonal and
        // deflates the off-diagonals relative to the ideal run.
        let vacuum_inflated = lossy_estimate.entry(0, 0).re > ideal_estimate.entry(0, 0).re;
        let offdiag_deflated = (0..4).all(|n| {
            lossy_estimate.entry(n, n + 1).re < ideal_estimate.entry(n, n + 1).re
        });
        writeln!(
            out,
            "pattern: vacuum diagonal inflated: {vacuum_inflated}, off-diagonals deflated: {offdiag_deflated}"
        )
        .unwrap();
        if !(vacuum_inflated && offdiag_deflated) {
            breach = true;
        }
    } else if eta_value == 1.0 {
        let max_diff = (0..5)
            .flat_map(|m| (0..5).map(move |n| (m, n)))
            .map(|(m, n)| (lossy_estimate.entry(m, n) - ideal_estimate.entry(m, n)).norm())
            .fold(0.0, f64::max);
        writeln!(
            out,
            "== efficiency override 1.0: lossy pipeline vs ideal pipeline, max |diff| = {max_diff:.3e}"
        )
        .unwrap();
        if max_diff != 0.0 {
            breach = true;
        }
    } else {
        writeln!(
            out,
            "== efficiency override {eta_value}: no golden table at this efficiency; computed matrix:"
        )
        .unwrap();
        out.push_str(&tables::format_block(&lossy_estimate.entries));
    }

    if let Some(dir) = out_dir {
        write_atomic(
            &dir.join("table_ideal.json"),
            &fock::matrix_to_json(&ideal_estimate.entries),
        )?;
        write_atomic(
            &dir.join("table_lossy.json"),
            &fock::matrix_to_json(&lossy_estimate.entries),
        )?;
        write_atomic(
            &dir.join("tables_report.json"),
            &serde_json::to_string_pretty(&serde_json::json!({
                "ideal": {
                    "config": tables::ideal_config(),
                    "report": ideal_estimate.report,
                    "max_abs_diff": ideal_diff.max_abs,
                    "tolerance": tables::IDEAL_TOLERANCE,
                },
                "lossy": {
                    "config": tables::lossy_config(eta_value),
                    "report": lossy_estimate.report,
                },
            }))
            .unwrap(),
        )?;
        writeln!(out, "tables written to {}", dir.display()).unwrap();
    }

    Ok(CmdResult {
        output: out,
        exit_code: if breach { 4 } else { 0 },
    })
}

fn golden_from(m: &nalgebra::DMatrix<Complex64>) -> [[f64; 5]; 5] {
    let mut out = [[0.0; 5]; 5];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = m[(r, c)].re;
        }
    }
    out
}

/// Sample detector counts at one phase setting and export them as CSV.
pub fn cmd_sample(
    resolved: &ResolvedConfig,
    out_dir: &Path,
    phi_over_pi: f64,
    shots: u64,
    seed: u64,
) -> Result<CmdResult, CliError> {
    let mut experiment = Experiment::new(resolved)?;
    let approx = num_rational::Ratio::approximate_float(phi_over_pi).ok_or_else(|| {
        CliError::new(ErrorClass::Validation, format!("bad phase {phi_over_pi}"))
    })?;
    let joint_phase: num_rational::Ratio<i64> = approx;
    let counts = experiment
        .sampled_export(joint_phase, shots, seed)
        .map_err(CliError::from)?;
    let path = out_dir.join("counts.csv");
    write_atomic(&path, &counts.to_csv())?;
    let distinct = counts.sorted().len();
    let mut output = format!(
        "sampled {shots} shots at phi = {phi_over_pi} pi (seed {seed}): {distinct} distinct events\n"
    );
    if counts.tail_count() > 0 {
        output.push_str(&format!(
            "{} shots fell beyond the joint grid (truncation tail)\n",
            counts.tail_count()
        ));
    }
    output.push_str(&format!("wrote {}\n", path.display()));
    Ok(CmdResult::ok(output))
}

/// Cross-check the closed-form probabilities against the brute-force
/// three-mode oracle, and the POM completeness residual against its cutoff
/// trend. Disagreement beyond 1e-10 exits 4.
pub fn cmd_oracle_check(
    resolved: &ResolvedConfig,
    lambda_max: usize,
    n_limit: usize,
) -> Result<CmdResult, CliError> {
    let mut out = String::new();
    let alpha_mag = resolved
        .alpha_sq
        .ok_or_else(|| {
            CliError::new(
                ErrorClass::Validation,
                "oracle-check needs a coherent reference (alpha_sq)",
            )
        })?
        .sqrt();
    let bs1 = match resolved.bs1 {
        crate::config::Bs1Resolution::Fixed(spec) => spec,
        crate::config::Bs1Resolution::Auto { .. } => {
            crate::optics::BeamSplitterSpec::fifty_fifty()
        }
    };
    let reference = match &resolved.reference {
        crate::imperfection::ReferenceModel::PureCoherent { .. } => {
            OracleReference::Coherent { alpha_mag }
        }
        model => OracleReference::Mixed(model.density(resolved.cutoff).map_err(CliError::from)?),
    };
    let oracle_config = OracleConfig {
        bs1,
        reference,
        total_cutoff: resolved.total_cutoff,
    };
    let lambda_max = lambda_max.min(resolved.cutoff);
    let n_limit = n_limit.min(resolved.cutoff.saturating_sub(lambda_max));
    let mut max_diff = 0.0_f64;
    let mut checked = 0usize;
    for lambda in 0..=lambda_max {
        for n_a in 0..=lambda {
            let n_b = lambda - n_a;
            for n in 0..=n_limit {
                let event = DetectionEvent::new(n_a, n_b, n);
                if event.total() > resolved.total_cutoff {
                    continue;
                }
                for phi in [0.0, 0.7] {
                    let q = q_vector(
                        n_a,
                        n_b,
                        n,
                        &bs1,
                        alpha_mag,
                        event.total().max(resolved.cutoff),
                    )
                    .map_err(CliError::from)?;
                    let q = crate::fock::FockVector::unnormalized(
                        q.amplitudes()[..resolved.signal.dim()].to_vec(),
                    );
                    let closed = crate::scheme::pom_probability(&resolved.signal, &q, phi)
                        .map_err(CliError::from)?;
                    let brute =
                        oracle::forward_probability(&resolved.signal, &oracle_config, event, phi)?;
                    max_diff = max_diff.max((closed - brute).abs());
                    checked += 1;
                }
            }
        }
    }
    writeln!(
        out,
        "checked {checked} event/phase pairs (lambda <= {lambda_max}, n <= {n_limit}): max |diff| = {max_diff:.3e}"
    )
    .unwrap();

    let mut previous = f64::INFINITY;
    let mut monotone = true;
    for total in [8usize, 10, 12] {
        let cfg = OracleConfig {
            total_cutoff: total,
            ..oracle_config.clone()
        };
        let residual = oracle::pom_completeness(&cfg, 2.min(resolved.n_max), 0.0)?;
        let norm = oracle::sup_norm(&residual);
        writeln!(out, "completeness residual at total cutoff {total}: {norm:.3e}").unwrap();
        monotone &= norm < previous;
        previous = norm;
    }
    writeln!(out, "residual decreases with cutoff: {monotone}").unwrap();

    let pass = max_diff < 1e-10 && monotone && previous < 1e-6;
    writeln!(out, "oracle check: {}", if pass { "PASS" } else { "FAIL" }).unwrap();
    Ok(CmdResult {
        output: out,
        exit_code: if pass { 0 } else { 4 },
    })
}

/// CLI-level overrides applied to a loaded config document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub cutoff: Option<usize>,
    pub eta_a: Option<f64>,
    pub eta_b: Option<f64>,
    pub eta_c: Option<f64>,
    pub mode: Option<String>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) -> Result<(), CliError> {
        use crate::config::{EfficiencySpec, ModeSpec};
        if let Some(cutoff) = self.cutoff {
            config.cutoff = cutoff;
        }
        if self.eta_a.is_some() || self.eta_b.is_some() || self.eta_c.is_some() {
            let [a, b, c] = config.efficiency.as_triple();
            config.efficiency = EfficiencySpec::PerDetector {
                a: self.eta_a.unwrap_or(a),
                b: self.eta_b.unwrap_or(b),
                c: self.eta_c.unwrap_or(c),
            };
        }
        if let Some(mode) = &self.mode {
            config.mode = match mode.as_str() {
                "exact" => ModeSpec::Exact,
                "smeared" => ModeSpec::Smeared,
                "sampled" => {
                    let shots = self
                        .shots
                        .or(match config.mode {
                            ModeSpec::Sampled { shots, .. } => Some(shots),
                            _ => None,
                        })
                        .ok_or_else(|| {
                            CliError::new(
                                ErrorClass::Validation,
                                "--mode sampled requires --shots",
                            )
                        })?;
                    let seed = self
                        .seed
                        .or(match config.mode {
                            ModeSpec::Sampled { seed, .. } => Some(seed),
                            _ => None,
                        })
                        .unwrap_or(0);
                    ModeSpec::Sampled { shots, seed }
                }
                other => {
                    return Err(CliError::new(
                        ErrorClass::Validation,
                        format!("unknown mode `{other}`"),
                    ))
                }
            };
        } else if let ModeSpec::Sampled { shots, seed } = config.mode {
            config.mode = ModeSpec::Sampled {
                shots: self.shots.unwrap_or(shots),
                seed: self.seed.unwrap_or(seed),
            };
        } else if self.shots.is_some() {
            return Err(CliError::new(
                ErrorClass::Validation,
                "--shots only applies to sampled mode (add --mode sampled)",
            ));
        }
        Ok(())
    }
}

/// Load a config file, apply overrides, resolve.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ResolvedConfig, CliError> {
    let mut config = ExperimentConfig::from_file(path.to_str().ok_or_else(|| {
        CliError::new(ErrorClass::Validation, "non-UTF8 config path")
    })?)?;
    overrides.apply(&mut config)?;
    Ok(config.resolve()?)
}
