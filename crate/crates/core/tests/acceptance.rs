//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with its measured figure of merit. Tolerances are pinned in the asserts.
//!
//! Criterion 1 compares the ideal-detector pipeline against the bundled
//! golden digits at +-5e-5. The pipeline is exact (it matches the analytic
//! coherent matrix to machine precision and the brute-force oracle to
//! 1e-10), but the golden source digits themselves deviate from the
//! analytic coherent matrix by up to 2.7e-3 in the high-order corner; the
//! comparison is asserted as stated and the companion cross-check test
//! localizes the discrepancy.

use std::time::Instant;

use rhoscope::config::{ExperimentConfig, ResolvedConfig};
use rhoscope::fock::{make_test_states, DensityMatrix, TestStateKind};
use rhoscope::imperfection::{bernoulli_invert, smear, CountDistribution, ReferenceModel};
use rhoscope::optics::BeamSplitterSpec;
use rhoscope::oracle::{self, OracleConfig};
use rhoscope::pipeline::{measure_full_matrix, Experiment};
use rhoscope::scheme::{
    cycled_probability, norm_constant, pom_probability, q_vector, Beta, DetectionEvent,
    NormReference, SchemeError,
};
use rhoscope::tables;

fn resolve(text: &str) -> ResolvedConfig {
    ExperimentConfig::from_json(text)
        .expect("config parses")
        .resolve()
        .expect("config resolves")
}

/// The test corpus: Fock 0-3, coherent 0.5, (|0>+|2>)/sqrt(2), thermal 0.5,
/// and twenty seeded random states.
fn corpus() -> Vec<(String, TestStateKind, usize)> {
    let mut states = vec![
        ("fock0".into(), TestStateKind::Fock(0), 12),
        ("fock1".into(), TestStateKind::Fock(1), 12),
        ("fock2".into(), TestStateKind::Fock(2), 12),
        ("fock3".into(), TestStateKind::Fock(3), 12),
        ("coherent0.5".into(), TestStateKind::Coherent { mean: 0.5 }, 16),
        (
            "superpos02".into(),
            TestStateKind::Superposition { levels: vec![0, 2] },
            12,
        ),
        ("thermal0.5".into(), TestStateKind::Thermal { mean: 0.5 }, 18),
    ];
    for seed in 1..=20u64 {
        states.push((format!("random{seed}"), TestStateKind::Random { seed }, 10));
    }
    states
}

#[test]
fn criterion_01_golden_ideal_table() {
    let started = Instant::now();
    let resolved = tables::ideal_config().resolve().unwrap();
    assert!(resolved.cutoff >= 14);
    let estimate = measure_full_matrix(&resolved).unwrap();
    let diff = tables::compare_to_golden(
        &estimate.entries,
        &tables::GOLDEN_IDEAL,
        tables::IDEAL_TOLERANCE,
    );
    let elapsed = started.elapsed();
    let pass = !diff.breached() && elapsed.as_secs_f64() < 10.0;
    println!(
        "criterion 1 (ideal golden table, +-5e-5): {} -- max |diff| = {:.3e} at {:?}, {} breaches, {:.2}s",
        if pass { "PASS" } else { "FAIL" },
        diff.max_abs,
        diff.worst,
        diff.breaches().len(),
        elapsed.as_secs_f64()
    );
    let analytic = tables::analytic_coherent_matrix(0.5, 5);
    let vs_analytic = (0..5)
        .flat_map(|m| (0..5).map(move |n| (m, n)))
        .map(|(m, n)| (estimate.entry(m, n) - analytic[(m, n)]).norm())
        .fold(0.0, f64::max);
    println!(
        "  context: pipeline vs analytic coherent matrix max |diff| = {vs_analytic:.3e}; \
         the flagged entries are golden-digit artifacts, not pipeline error"
    );
    assert!(elapsed.as_secs_f64() < 10.0, "runtime budget exceeded");
    assert!(
        !diff.breached(),
        "golden ideal digits differ from the exact reconstruction by up to {:.3e} \
         (tolerance 5e-5); the pipeline matches the analytic coherent matrix to {:.3e}",
        diff.max_abs,
        vs_analytic
    );
}

#[test]
fn criterion_01_companion_pipeline_is_exact() {
    // The substance behind criterion 1: the exact-mode pipeline reproduces
    // the truncated coherent matrix elementwise far inside +-5e-5.
    let resolved = tables::ideal_config().resolve().unwrap();
    let estimate = measure_full_matrix(&resolved).unwrap();
    let analytic = tables::analytic_coherent_matrix(0.5, 5);
    let max = (0..5)
        .flat_map(|m| (0..5).map(move |n| (m, n)))
        .map(|(m, n)| (estimate.entry(m, n) - analytic[(m, n)]).norm())
        .fold(0.0, f64::max);
    println!("criterion 1 companion (pipeline vs analytic matrix): PASS -- max |diff| = {max:.3e}");
    assert!(max < 5e-5);
}

#[test]
fn criterion_02_golden_lossy_table() {
    let started = Instant::now();
    let resolved = tables::lossy_config(0.9).resolve().unwrap();
    let estimate = measure_full_matrix(&resolved).unwrap();
    let diff = tables::compare_to_golden(
        &estimate.entries,
        &tables::GOLDEN_ETA90,
        tables::ETA90_TOLERANCE,
    );
    let ideal = measure_full_matrix(&tables::ideal_config().resolve().unwrap()).unwrap();
    let vacuum_inflated = estimate.entry(0, 0).re > ideal.entry(0, 0).re;
    let offdiag_deflated =
        (0..4).all(|n| estimate.entry(n, n + 1).re < ideal.entry(n, n + 1).re);
    let elapsed = started.elapsed();
    let pass = !diff.breached()
        && vacuum_inflated
        && offdiag_deflated
        && elapsed.as_secs_f64() < 60.0;
    println!(
        "criterion 2 (eta = 0.9 golden table, +-0.02): {} -- max |diff| = {:.3e} at {:?}, \
         vacuum inflated: {vacuum_inflated}, off-diagonals deflated: {offdiag_deflated}, {:.2}s",
        if pass { "PASS" } else { "FAIL" },
        diff.max_abs,
        diff.worst,
        elapsed.as_secs_f64()
    );
    println!(
        "  residual systematic offset vs golden digits: {:.3e} (analytic smearing; whether the \
         source digits were analytic or sampled is undocumented, see report mode_used)",
        diff.max_abs
    );
    assert!(vacuum_inflated && offdiag_deflated, "qualitative pattern");
    assert!(!diff.breached(), "max diff {:.3e}", diff.max_abs);
    assert!(elapsed.as_secs_f64() < 60.0, "runtime budget exceeded");
}

#[test]
fn criterion_03_oracle_equivalence_sweep() {
    let started = Instant::now();
    let mut max_diff = 0.0_f64;
    let mut checked = 0usize;
    for config_index in 0..50u64 {
        // Deterministic config spread: seeds, |alpha|^2 in [0.25, 2],
        // BS1 transmittance strictly inside (0, 1).
        let u1 = (config_index as f64 + 0.5) / 50.0;
        let u2 = ((config_index * 7 + 3) % 50) as f64 / 50.0;
        let alpha_sq = 0.25 + 1.75 * u1;
        let t_sq = 0.02 + 0.96 * u2;
        let bs1 = BeamSplitterSpec::new(t_sq.sqrt().acos()).unwrap();
        let signal_cutoff = 9;
        let rho = make_test_states(&TestStateKind::Random { seed: config_index }, signal_cutoff)
            .unwrap();
        let oracle_config = OracleConfig::coherent(alpha_sq.sqrt(), bs1, 9);
        for lambda in 0..=4usize {
            for n_a in 0..=lambda {
                let n_b = lambda - n_a;
                for n in 0..=5usize {
                    let event = DetectionEvent::new(n_a, n_b, n);
                    for phi in [0.0, 0.7] {
                        let q = q_vector(n_a, n_b, n, &bs1, alpha_sq.sqrt(), signal_cutoff)
                            .unwrap();
                        let closed = pom_probability(&rho, &q, phi).unwrap();
                        let brute =
                            oracle::forward_probability(&rho, &oracle_config, event, phi).unwrap();
                        max_diff = max_diff.max((closed - brute).abs());
                        checked += 1;
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    let pass = max_diff < 1e-10 && elapsed.as_secs_f64() < 300.0;
    println!(
        "criterion 3 (oracle equivalence, 50 configs, {checked} checks): {} -- max |diff| = {max_diff:.3e}, {:.2}s",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(max_diff < 1e-10);
    assert!(elapsed.as_secs_f64() < 300.0);
}

#[test]
fn criterion_04_round_trip_reconstruction() {
    let mut worst = 0.0_f64;
    let mut worst_at = String::new();
    for (name, kind, cutoff) in corpus() {
        let rho = make_test_states(&kind, cutoff).unwrap();
        let config = resolve(&format!(
            r#"{{
                "version": 1,
                "signal": {{"kind": "random", "seed": 0}},
                "reference": {{"alpha_sq": 1.0}},
                "cutoff": {cutoff},
                "n_max": 6
            }}"#
        ));
        // Swap the placeholder signal for the corpus state.
        let resolved = ResolvedConfig {
            signal: rho.clone(),
            ..config
        };
        let estimate = measure_full_matrix(&resolved).unwrap();
        assert_eq!(estimate.report.failures, 0, "{name}");
        for lambda in 0..=6usize {
            for n in 0..=(6 - lambda) {
                let expected = rho.entry(n + lambda, n);
                let got = estimate.entry(n + lambda, n);
                let err = (got - expected).norm();
                if err > worst {
                    worst = err;
                    worst_at = format!("{name} (n={n}, lambda={lambda})");
                }
            }
        }
    }
    let pass = worst < 1e-8;
    println!(
        "criterion 4 (round trip, 27 states, N+lambda <= 6): {} -- worst |err| = {worst:.3e} at {worst_at}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(worst < 1e-8);
}

#[test]
fn criterion_05_odd_lambda_partner_shortcut() {
    let bs1 = BeamSplitterSpec::fifty_fifty();
    let mut worst = 0.0_f64;
    for (name, kind, cutoff) in corpus() {
        let rho = make_test_states(&kind, cutoff).unwrap();
        for lambda in [1usize, 3, 5] {
            for n in 0..=2usize {
                for beta in Beta::STANDARD {
                    let p3 = cycled_probability(
                        &rho,
                        DetectionEvent::e3(lambda, n).unwrap(),
                        beta,
                        &bs1,
                        0.9,
                    )
                    .unwrap();
                    let p2 = cycled_probability(
                        &rho,
                        DetectionEvent::e2(lambda, n).unwrap(),
                        beta.plus_one(),
                        &bs1,
                        0.9,
                    )
                    .unwrap();
                    let err = (p3 - p2).abs();
                    assert!(
                        err < 1e-12,
                        "{name}: lambda={lambda} n={n} beta={beta}: {err:.3e}"
                    );
                    worst = worst.max(err);
                }
            }
        }
    }
    println!(
        "criterion 5 (P_beta(e3) = P_beta+1(e2), lambda in {{1,3,5}}): PASS -- worst |diff| = {worst:.3e}"
    );
}

#[test]
fn criterion_06_optimality_suite() {
    let bs1 = BeamSplitterSpec::new(0.7).unwrap();
    // Event optimality: argmax over n_a of |q_N q*_{N+lambda}|.
    for lambda in 1..=6usize {
        for n in 0..=4usize {
            let mags: Vec<f64> = (0..=lambda)
                .map(|n_a| {
                    let q = q_vector(n_a, lambda - n_a, n, &bs1, 1.0, n + lambda).unwrap();
                    (q.amplitude(n) * q.amplitude(n + lambda).conj()).norm()
                })
                .collect();
            let max = mags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let argmaxes: Vec<usize> = mags
                .iter()
                .enumerate()
                .filter(|(_, &m)| (max - m).abs() <= 1e-12 * max.max(1.0))
                .map(|(i, _)| i)
                .collect();
            if lambda % 2 == 0 {
                assert_eq!(argmaxes, vec![lambda / 2], "lambda={lambda} n={n}");
            } else {
                assert_eq!(
                    argmaxes,
                    vec![(lambda - 1) / 2, lambda.div_ceil(2)],
                    "lambda={lambda} n={n}"
                );
            }
        }
    }
    // Parameter optimality on a 0.01 grid: |alpha|^2 argmax at lambda/2 and
    // (t/r)^2 argmax at 2N/lambda, each within one grid step.
    let step = 0.01_f64;
    for lambda in 1..=6usize {
        for n in 0..=4usize {
            let mut best = (f64::NAN, f64::NEG_INFINITY);
            let mut alpha_sq = step;
            while alpha_sq <= 4.0 + 1e-12 {
                let nc = norm_constant(
                    n,
                    lambda,
                    &bs1,
                    &NormReference::PureCoherent {
                        alpha_mag: alpha_sq.sqrt(),
                    },
                )
                .unwrap();
                if nc.magnitude() > best.1 {
                    best = (alpha_sq, nc.magnitude());
                }
                alpha_sq += step;
            }
            assert!(
                (best.0 - lambda as f64 / 2.0).abs() <= step + 1e-9,
                "alpha argmax lambda={lambda}: {}",
                best.0
            );

            let mut best_ratio = (f64::NAN, f64::NEG_INFINITY);
            let mut ratio = 0.0;
            while ratio <= 9.0 + 1e-12 {
                let spec = BeamSplitterSpec::from_t_over_r_sq(ratio).unwrap();
                let nc = norm_constant(
                    n,
                    lambda,
                    &spec,
                    &NormReference::PureCoherent { alpha_mag: 1.0 },
                );
                let magnitude = match nc {
                    Ok(nc) => nc.magnitude(),
                    Err(SchemeError::UnmeasurableElement { .. }) => 0.0,
                    Err(e) => panic!("{e}"),
                };
                if magnitude > best_ratio.1 {
                    best_ratio = (ratio, magnitude);
                }
                ratio += step;
            }
            let expected = 2.0 * n as f64 / lambda as f64;
            assert!(
                (best_ratio.0 - expected).abs() <= step + 1e-9,
                "ratio argmax lambda={lambda} n={n}: {} vs {expected}",
                best_ratio.0
            );
        }
    }
    println!("criterion 6 (event and parameter optimality, grid 0.01): PASS");
}

#[test]
fn criterion_07_bernoulli_inversion() {
    // Round trip at eta = 0.9 for distributions supported on n <= 10.
    let mut worst = 0.0_f64;
    for (name, kind, cutoff) in corpus() {
        let rho = make_test_states(&kind, cutoff.min(10)).unwrap();
        let p = CountDistribution::from_density(&rho);
        let smeared = smear(&p, 0.9).unwrap();
        let (back, _) = bernoulli_invert(&smeared, 0.9, p.cutoff()).unwrap();
        for n in 0..=p.cutoff() {
            let err = (p.probability(n) - back.probability(n)).abs();
            assert!(err < 1e-6, "{name} n={n}: {err:.3e}");
            worst = worst.max(err);
        }
    }
    // Composition law at 1e-12.
    let p = CountDistribution::poisson(0.8, 14).unwrap();
    let twice = smear(&smear(&p, 0.8).unwrap(), 0.9).unwrap();
    let once = smear(&p, 0.72).unwrap();
    let mut comp_worst = 0.0_f64;
    for n in 0..=14 {
        let err = (twice.probability(n) - once.probability(n)).abs();
        assert!(err < 1e-12, "composition at n={n}: {err:.3e}");
        comp_worst = comp_worst.max(err);
    }
    println!(
        "criterion 7 (Bernoulli inversion 1e-6, composition 1e-12): PASS -- worst round trip {worst:.3e}, worst composition {comp_worst:.3e}"
    );
}

#[test]
fn criterion_08_noisy_reference() {
    // Phase-diffused reference with the generalized norm constant
    // reconstructs a random state exactly.
    let resolved = resolve(
        r#"{
            "version": 1,
            "signal": {"kind": "random", "seed": 17},
            "reference": {"alpha_sq": 1.0, "model": {"phase-diffused": {"sigma": 0.3}}},
            "bs1": {"t_over_r_sq": 1.0},
            "cutoff": 12,
            "n_max": 4
        }"#,
    );
    let estimate = measure_full_matrix(&resolved).unwrap();
    assert_eq!(estimate.report.failures, 0);
    let mut worst = 0.0_f64;
    for m in 0..=4 {
        for n in 0..=4 {
            worst = worst.max((estimate.entry(m, n) - resolved.signal.entry(m, n)).norm());
        }
    }
    assert!(worst < 1e-8, "worst {worst:.3e}");

    // A fully diffused reference raises unmeasurable-element, every time.
    for _ in 0..3 {
        let err = norm_constant(
            0,
            2,
            &BeamSplitterSpec::fifty_fifty(),
            &NormReference::OffDiagonal(
                ReferenceModel::PhaseDiffused {
                    alpha_mag: 1.0,
                    sigma: f64::INFINITY,
                }
                .offdiag(2),
            ),
        );
        assert!(matches!(
            err,
            Err(SchemeError::UnmeasurableElement { .. })
        ));
    }
    let dead = resolve(
        r#"{
            "version": 1,
            "signal": {"kind": "coherent", "mean": 0.5},
            "reference": {"alpha_sq": 0.5, "model": {"phase-diffused": {"sigma": 1e9}}},
            "cutoff": 10,
            "n_max": 2
        }"#,
    );
    let estimate = measure_full_matrix(&dead).unwrap();
    for record in estimate.report.elements.iter().filter(|e| e.lambda > 0) {
        assert_eq!(
            record.error.as_ref().map(|e| e.class.as_str()),
            Some("unmeasurable-element")
        );
    }
    println!(
        "criterion 8 (noisy reference sigma=0.3 exact to {worst:.3e}; fully diffused raises unmeasurable-element): PASS"
    );
}

#[test]
fn criterion_09_finite_statistics() {
    let started = Instant::now();
    let truth = 0.5_f64.sqrt() * (-0.5_f64).exp();
    let config_for = |shots: u64, seed: u64| -> ResolvedConfig {
        resolve(&format!(
            r#"{{
                "version": 1,
                "signal": {{"kind": "coherent", "mean": 0.5}},
                "reference": {{"alpha_sq": 0.5}},
                "bs1": {{"t_over_r_sq": 1.0}},
                "cutoff": 10,
                "total_cutoff": 9,
                "n_max": 1,
                "mode": {{"sampled": {{"shots": {shots}, "seed": {seed}}}}}
            }}"#
        ))
    };
    let mut covered = 0usize;
    for seed in 0..100u64 {
        let resolved = config_for(1_000_000, seed);
        let mut experiment = Experiment::new(&resolved).unwrap();
        let record = experiment.measure_element(0, 1).unwrap();
        let se = record.std_error.unwrap()[0];
        assert!(se > 0.0);
        if (record.re - truth).abs() <= 3.0 * se {
            covered += 1;
        }
    }
    // Standard error scales as 1/sqrt(shots) within a factor 1.5.
    let se_at = |shots: u64| -> f64 {
        let resolved = config_for(shots, 0);
        let mut experiment = Experiment::new(&resolved).unwrap();
        experiment.measure_element(0, 1).unwrap().std_error.unwrap()[0]
    };
    let se4 = se_at(10_000);
    let se5 = se_at(100_000);
    let se6 = se_at(1_000_000);
    let root_ten = 10.0_f64.sqrt();
    let ratios_ok = [se4 / se5, se5 / se6]
        .iter()
        .all(|r| *r > root_ten / 1.5 && *r < root_ten * 1.5);
    let elapsed = started.elapsed();
    let pass = covered >= 95 && ratios_ok;
    println!(
        "criterion 9 (10^6 shots, 3 sigma coverage {covered}/100, se ratios {:.2}/{:.2} vs sqrt(10)): {} -- {:.1}s",
        se4 / se5,
        se5 / se6,
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(covered >= 95, "coverage {covered}/100");
    assert!(ratios_ok, "se ratios {} {}", se4 / se5, se5 / se6);
}

#[test]
fn criterion_10_pom_completeness() {
    let bs1 = BeamSplitterSpec::fifty_fifty();
    let mut previous = f64::INFINITY;
    let mut norms = Vec::new();
    for total in [8usize, 10, 12] {
        let config = OracleConfig::coherent(0.5_f64.sqrt(), bs1, total);
        let residual = oracle::pom_completeness(&config, 2, 0.0).unwrap();
        let norm = oracle::sup_norm(&residual);
        assert!(norm < previous, "residual must shrink with cutoff");
        previous = norm;
        norms.push(norm);
    }
    let pass = previous < 1e-6;
    println!(
        "criterion 10 (POM completeness {:?} over T = 8/10/12): {}",
        norms,
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(previous < 1e-6);
}

/// Full-pipeline property bound to criterion 2's machinery: unit-efficiency
/// smearing is bitwise identical to the exact path.
#[test]
fn smearing_at_unit_efficiency_is_bitwise_identity() {
    let exact = measure_full_matrix(&tables::ideal_config().resolve().unwrap()).unwrap();
    let resolved = tables::lossy_config(0.9).resolve().unwrap();
    let unit = ResolvedConfig {
        etas: [1.0, 1.0, 1.0],
        ..resolved
    };
    let smeared = measure_full_matrix(&unit).unwrap();
    for m in 0..5 {
        for n in 0..5 {
            assert_eq!(exact.entry(m, n), smeared.entry(m, n));
        }
    }
    println!("companion (eta=1 smearing bitwise identity): PASS");
}

/// Reconstructed matrices are Hermitian with real non-negative diagonals.
#[test]
fn estimates_are_hermitian_by_construction() {
    let resolved = tables::lossy_config(0.9).resolve().unwrap();
    let estimate = measure_full_matrix(&resolved).unwrap();
    for m in 0..5 {
        for n in 0..5 {
            let residual = (estimate.entry(m, n) - estimate.entry(n, m).conj()).norm();
            assert_eq!(residual, 0.0);
        }
        assert_eq!(estimate.entry(m, m).im, 0.0);
        assert!(estimate.entry(m, m).re >= -1e-10);
    }
    println!("companion (Hermiticity of estimates): PASS");
}

/// The conditioning figure carried per element matches |4 c| recomputed
/// from the norm constant.
#[test]
fn conditioning_report_matches_norm_constants() {
    let resolved = resolve(
        r#"{
            "version": 1,
            "signal": {"kind": "coherent", "mean": 0.5},
            "reference": {"alpha_sq": 0.5},
            "bs1": {"t_over_r_sq": 1.0},
            "cutoff": 12,
            "n_max": 3
        }"#,
    );
    let estimate = measure_full_matrix(&resolved).unwrap();
    for record in &estimate.report.elements {
        if record.lambda == 0 {
            continue;
        }
        let nc = norm_constant(
            record.n,
            record.lambda,
            &BeamSplitterSpec::from_t_over_r_sq(1.0).unwrap(),
            &NormReference::PureCoherent {
                alpha_mag: 0.5_f64.sqrt(),
            },
        )
        .unwrap();
        let expected = 4.0 * nc.magnitude();
        assert!(
            (record.conditioning - expected).abs() < 1e-12 * expected,
            "element ({}, {})",
            record.n,
            record.lambda
        );
    }
    println!("companion (conditioning figures): PASS");
}

/// Exact probabilities fed through a DensityMatrix validation round trip.
#[test]
fn exact_estimate_validates_as_density_matrix() {
    let resolved = resolve(
        r#"{
            "version": 1,
            "signal": {"kind": "superposition", "levels": [0, 2]},
            "reference": {"alpha_sq": 1.0},
            "cutoff": 12,
            "n_max": 4
        }"#,
    );
    let estimate = measure_full_matrix(&resolved).unwrap();
    let rho = estimate.to_density_matrix().expect("physical estimate");
    let _ = DensityMatrix::from_json(&rho.to_json()).expect("round trips");
    println!("companion (estimate validates and serializes): PASS");
}
