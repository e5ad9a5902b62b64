use std::io::Write;

use perfbie::data::DataFunction;
use perfbie::expansion::{compute_expansion, fd_comparison, remainder_order, verify_vanishing_coefficients, FD_STEP};
use perfbie::geometry::{make_ellipse, Point, ProblemConfig};
use perfbie::harness::checks::{self, guarded, Check};
use perfbie::order::{fit_order, FitOutcome};
use perfbie::representation::{build_field, eval_epsilon_regime, EtaSpec, View};
use perfbie::rescaled::{solve_densities, solve_limit_quadruple, PreparedConfig};

const M: usize = 128;

fn report(criterion: u32, checks: &[Check]) {
    for c in checks {
        let note = if c.note.is_empty() { String::new() } else { format!(" ({})", c.note) };
        println!(
            "  {:<40} {:>12.4e} in [{:.1e}, {:.1e}] {}{}",
            c.name,
            c.value,
            c.lower,
            c.upper,
            if c.pass { "ok" } else { "FAILED" },
            note
        );
    }
    let pass = checks.iter().all(|c| c.pass);
    // written past the test harness capture so every run shows the verdict
    let _ = writeln!(std::io::stdout(), "criterion {criterion}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed");
}

fn default_prep() -> PreparedConfig {
    PreparedConfig::new(&ProblemConfig::default_two_holes()).unwrap()
}

/// Outer ellipse and data with nonzero means on both holes, so that no
/// coefficient vanishes by symmetry.
fn generic_prep() -> PreparedConfig {
    let mut c = ProblemConfig::default_two_holes();
    c.outer = make_ellipse(Point::new(0.05, -0.02), 1.2, 0.9).unwrap();
    c.f1 = DataFunction::fourier(1.0, &[(1, 0.3, -0.2), (2, 0.0, 0.4)]);
    c.f2 = DataFunction::fourier(-0.5, &[(1, 1.0, 0.0)]);
    PreparedConfig::new(&c).unwrap()
}

fn slope(pairs: &[(f64, f64)]) -> f64 {
    match fit_order(pairs).unwrap() {
        FitOutcome::Fitted(f) => f.slope,
        FitOutcome::Floor => f64::NAN,
    }
}

#[test]
fn criterion_1_potential_identities() {
    let mut all = guarded("gauss", || checks::gauss_identity(M));
    all.extend(guarded("kstar", || checks::adjoint_double_layer_half(M)));
    all.extend(guarded("single_layer", || checks::single_layer_circles(M)));
    report(1, &all);
}

#[test]
fn criterion_2_mixed_solver_oracles() {
    let prep = default_prep();
    let mut all = guarded("annulus", || checks::annulus(M));
    all.extend(checks::manufactured(M));
    all.extend(guarded("uniqueness", || checks::uniqueness(&prep, &[(0.1, 0.1)])));
    report(2, &all);
}

#[test]
fn criterion_3_equivalence_with_direct_solve() {
    let prep = default_prep();
    report(3, &checks::equivalence(&prep, &[(0.2, 0.3), (0.1, 0.1)]));
}

#[test]
fn criterion_4_flux_identity_on_grid() {
    let mut all = Vec::new();
    for prep in [default_prep(), generic_prep()] {
        let mut pairs = Vec::new();
        for r1 in [0.0, 0.025, 0.05, 0.1, 0.2] {
            for r2 in [0.0, 0.025, 0.05, 0.1, 0.3] {
                pairs.push((r1, r2));
            }
        }
        all.extend(checks::flux_identity(&prep, &pairs));
    }
    // one line per failure keeps the report short
    let failed: Vec<Check> = all.iter().filter(|c| !c.pass).cloned().collect();
    let worst = all.iter().map(|c| c.value).fold(0.0, f64::max);
    println!("  {} grid checks, worst {:.3e}", all.len(), worst);
    report(4, &failed);
    assert!(!all.is_empty());
}

#[test]
fn criterion_5_coefficients_against_differences() {
    let mut all = Vec::new();
    for (label, prep) in [("default", default_prep()), ("generic", generic_prep())] {
        let coeffs = compute_expansion(&prep).unwrap();
        for c in fd_comparison(&prep, &coeffs, FD_STEP).unwrap() {
            let note = format!("equation {:.4e} fd {:.4e}", c.equation_norm, c.fd_norm);
            all.push(Check::at_most(format!("{label}_{}", c.name), c.relative, 1e-5).with_note(note));
        }
        let v = verify_vanishing_coefficients(&prep, FD_STEP).unwrap();
        for (name, value) in [
            ("theta_o_10", v.theta_o_10),
            ("theta_o_01", v.theta_o_01),
            ("xi_10", v.xi_10),
            ("xi_01", v.xi_01),
            ("theta_o_12", v.theta_o_12),
            ("xi_12", v.xi_12),
        ] {
            all.push(Check::at_most(format!("{label}_vanishing_{name}"), value, 1e-3));
        }
    }
    report(5, &all);
}

#[test]
fn criterion_6_expansion_remainder_order() {
    let x = Point::new(0.6, 0.3);
    let ts = [0.1, 0.05, 0.025];
    let prep = default_prep();
    let coeffs = compute_expansion(&prep).unwrap();
    let fit = remainder_order(&prep, &coeffs, x, &ts).unwrap();
    let mut all = vec![Check::within("two_term_remainder_order", fit.fit.slope().unwrap_or(f64::NAN), 3.7, 4.5)];

    let mut c = ProblemConfig::default_two_holes();
    c.f1 = DataFunction::fourier(0.0, &[(1, 0.5, 0.2), (3, 0.0, -0.3)]);
    let zero_mean = PreparedConfig::new(&c).unwrap();
    assert!(zero_mean.f_integrals.iter().all(|f| f.abs() < 1e-12));
    let base = compute_expansion(&zero_mean).unwrap().base.u00;
    let pairs: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| {
            let q = solve_densities(&zero_mean, t, t).unwrap();
            let u = build_field(&zero_mean, t, t, &q).unwrap().eval(x).unwrap();
            (t, (u - base.eval(x).unwrap()).abs())
        })
        .collect();
    all.push(Check::at_least("zero_mean_deviation_order", slope(&pairs), 3.7));
    report(6, &all);
}

#[test]
fn criterion_7_log_correction_regime() {
    let prep = default_prep();
    let total_flux: f64 = prep.f_integrals.iter().sum();
    assert!(total_flux.abs() > 1.0);
    let eta = EtaSpec::power(1.0, 0.5).unwrap();
    let limit = build_field(&prep, 0.0, 0.0, &solve_limit_quadruple(&prep).unwrap()).unwrap();
    let reference = limit.eval_unchecked(Point::zeros());
    let t = [Point::new(0.0, 0.6)];
    let mut corrected = Vec::new();
    let mut raw = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let e = eval_epsilon_regime(&prep, &eta, eps, View::Micro, &t).unwrap();
        let v = e.values[0];
        let expected = eps * e.rho1.ln() * total_flux / (2.0 * std::f64::consts::PI);
        assert!((v.correction - expected).abs() < 1e-14);
        corrected.push((e.rho1, (v.analytic - reference).abs()));
        raw.push((e.rho1, (v.raw - reference).abs()));
        println!(
            "  eps {eps}: raw error {:.4e}, corrected error {:.4e}",
            raw.last().unwrap().1,
            corrected.last().unwrap().1
        );
    }
    let raw_slope = slope(&raw);
    let raw_decreases = raw.windows(2).all(|w| w[1].1 < w[0].1);
    // "fails to converge": the error grows somewhere or the fitted order stalls below 1/2
    let raw_fails = !raw_decreases || !(raw_slope >= 0.5);
    let all = vec![
        Check::at_least("corrected_order_in_eta", slope(&corrected), 0.9),
        Check::within("raw_fails_to_converge", if raw_fails { 1.0 } else { 0.0 }, 1.0, 1.0)
            .with_note(format!("raw order in eta {raw_slope:.3}, monotone decrease {raw_decreases}")),
    ];
    report(7, &all);
}

#[test]
fn criterion_8_macroscopic_limit() {
    let prep = default_prep();
    let x = Point::new(0.6, 0.3);
    let limit = build_field(&prep, 0.0, 0.0, &solve_limit_quadruple(&prep).unwrap()).unwrap();
    let reference = limit.eval(x).unwrap();
    let pairs: Vec<(f64, f64)> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&t| {
            let q = solve_densities(&prep, t, t).unwrap();
            (t, (build_field(&prep, t, t, &q).unwrap().eval(x).unwrap() - reference).abs())
        })
        .collect();
    report(8, &[Check::at_least("macroscopic_order", slope(&pairs), 1.9)]);
}

#[test]
fn criterion_9_validate_is_deterministic() {
    let bin = env!("CARGO_BIN_EXE_perfbie");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs = Vec::new();
    for d in &dirs {
        let status = std::process::Command::new(bin)
            .args(["validate", "--out"])
            .arg(d.path())
            .status()
            .unwrap();
        outputs.push((status.success(), std::fs::read(d.path().join("validate.csv")).unwrap()));
    }
    let all = vec![
        Check::within("validate_exit_zero", (outputs[0].0 && outputs[1].0) as u8 as f64, 1.0, 1.0),
        Check::within("bit_identical_csv", (outputs[0].1 == outputs[1].1) as u8 as f64, 1.0, 1.0)
            .with_note(format!("{} bytes", outputs[0].1.len())),
    ];
    report(9, &all);
}
