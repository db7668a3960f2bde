//! Acceptance gate. Every test prints one line of the form
//! `criterion N: PASS - detail` (visible with `--nocapture`) and asserts it.
//! Tolerances are pinned here, not read from configuration.

use std::time::Instant;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lv_attract::criteria::{analyze, CriterionTag};
use lv_attract::dynamics::{
    control_integral_check, detect_convergence, detect_oscillation, integrate,
};
use lv_attract::equilibria::{
    dissipativity_bound, enumerate_saturated_supports, saturated_equilibrium, spec_equilibrium,
};
use lv_attract::fixtures::{
    competitive_pair, predator_prey_pair, scalar_memory_control, scalar_memory_control_tabulated,
};
use lv_attract::linalg::eigenvalue_real_parts;
use lv_attract::matrix::{eta_certificate, is_nonsingular_m_matrix, is_p_matrix, ClassMethod};
use lv_attract::model::{InitialData, SystemSpec};
use lv_attract::spectral::{build_hopf_fixture, hopf_h, hopf_thresholds};

const STEP: f64 = 0.01;
const HORIZON: f64 = 300.0;
const WINDOW: f64 = 50.0;

fn report(number: usize, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {number}: {status} - {detail}");
    assert!(pass, "criterion {number}: {detail}");
}

fn named_fixtures() -> Vec<(&'static str, SystemSpec)> {
    vec![
        ("example 5.1 uncontrolled", competitive_pair(0.0)),
        ("example 5.1 controlled", competitive_pair(0.25)),
        ("example 5.2 uncontrolled", predator_prey_pair(0.0, 0.0)),
        ("example 5.2 controlled", predator_prey_pair(0.2, 0.2)),
    ]
}

#[test]
fn criterion_1_saturated_equilibrium_fixtures() {
    // Warm call so the timing below measures the solve, not lazy setup.
    spec_equilibrium(&competitive_pair(0.0)).unwrap();

    let start = Instant::now();
    let eq51 = spec_equilibrium(&competitive_pair(0.0)).unwrap();
    let t51 = start.elapsed();
    let start = Instant::now();
    let eq52 = spec_equilibrium(&predator_prey_pair(0.0, 0.0)).unwrap();
    let t52 = start.elapsed();

    let d51 = (eq51.x[0] - 2.0 / 3.0).abs().max(eq51.x[1].abs());
    let d52 = (eq52.x[0] - 53.0 / 80.0).abs().max((eq52.x[1] - 0.05).abs());
    let pass = d51 < 1e-12
        && d52 < 1e-12
        && t51.as_secs_f64() < 1e-3
        && t52.as_secs_f64() < 1e-3;
    report(
        1,
        pass,
        &format!(
            "x*=(2/3,0) err {d51:.2e} in {t51:?}; x*=(53/80,1/20) err {d52:.2e} in {t52:?}"
        ),
    );
}

#[test]
fn criterion_2_lcp_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51c2);
    let start = Instant::now();
    let mut worst_residual: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for trial in 0..500 {
        let n = if trial % 2 == 0 { 3 } else { 4 };
        // A^T A + delta I plus a skew part: the symmetric part stays
        // positive definite, so the matrix is a P-matrix by construction.
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut m = a.transpose() * &a + DMatrix::from_diagonal_element(n, n, 0.3);
        for i in 0..n {
            for j in (i + 1)..n {
                let w: f64 = rng.random_range(-0.5..0.5);
                m[(i, j)] += w;
                m[(j, i)] -= w;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        assert!(is_p_matrix(&m).unwrap().verdict, "construction must be P");

        let accepted = enumerate_saturated_supports(&m, &b).unwrap();
        assert_eq!(
            accepted.len(),
            1,
            "trial {trial}: {} saturated supports",
            accepted.len()
        );
        let ones = vec![1.0; n];
        let eq = saturated_equilibrium(&m, &b, &ones, &ones).unwrap();
        let min_residual = eq.residual.iter().cloned().fold(f64::INFINITY, f64::min);
        worst_residual = worst_residual.max(-min_residual);
        worst_gap = worst_gap.max(eq.gap);
    }
    let elapsed = start.elapsed();
    let pass = worst_residual <= 1e-10 && worst_gap <= 1e-10 && elapsed.as_secs_f64() < 5.0;
    report(
        2,
        pass,
        &format!(
            "500 random LCPs unique; worst residual dip {worst_residual:.2e}, worst gap {worst_gap:.2e}, {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_3_matrix_class_cross_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3a7b);
    let start = Instant::now();
    let mut positives = 0usize;
    for trial in 0..1000 {
        let m = DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                rng.random_range(-0.5..3.5)
            } else {
                -rng.random_range(0.0..1.2)
            }
        });
        let minors = is_nonsingular_m_matrix(&m).unwrap();
        assert_eq!(minors.method, ClassMethod::PrincipalMinors);
        let eigen = eigenvalue_real_parts(&m).into_iter().all(|r| r > 1e-10);
        let eta = eta_certificate(&m).is_some();
        assert_eq!(
            minors.verdict, eigen,
            "trial {trial}: minor vs eigenvalue route"
        );
        assert_eq!(minors.verdict, eta, "trial {trial}: minor vs eta route");
        if minors.verdict {
            positives += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = elapsed.as_secs_f64() < 5.0 && positives > 0 && positives < 1000;
    report(
        3,
        pass,
        &format!("1000 Z-matrices, three routes agree; {positives} nonsingular M; {elapsed:?}"),
    );
}

#[test]
fn criterion_4_theorem_engine_fixtures() {
    let expected: [(&str, SystemSpec, CriterionTag, [f64; 2]); 4] = [
        (
            "example 5.1 uncontrolled",
            competitive_pair(0.0),
            CriterionTag::Uncontrolled,
            [2.0 / 3.0, 0.0],
        ),
        (
            "example 5.1 controlled",
            competitive_pair(0.25),
            CriterionTag::GlobalAttractivity,
            [41.0 / 72.0, 1.0 / 36.0],
        ),
        (
            "example 5.2 uncontrolled",
            predator_prey_pair(0.0, 0.0),
            CriterionTag::Uncontrolled,
            [53.0 / 80.0, 1.0 / 20.0],
        ),
        (
            "example 5.2 controlled",
            predator_prey_pair(0.2, 0.2),
            CriterionTag::PredatorPreyExtinction,
            [10.0 / 17.0, 0.0],
        ),
    ];
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, spec, tag, x_star) in expected {
        let verdict = analyze(&spec).unwrap();
        let attractor = verdict.attractor().expect("all four certify an attractor");
        let err = (attractor.x[0] - x_star[0])
            .abs()
            .max((attractor.x[1] - x_star[1]).abs());
        let ok = verdict.criterion == tag && err < 1e-12;
        pass &= ok;
        lines.push(format!("{name}: {} err {err:.2e}", verdict.criterion.label()));
    }
    report(4, pass, &lines.join("; "));
}

#[test]
fn criterion_5_simulation_confirmation() {
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, spec) in named_fixtures() {
        let verdict = analyze(&spec).unwrap();
        let attractor = verdict.attractor().unwrap();
        let start = Instant::now();
        let mut worst: f64 = 0.0;
        for seed in 1..=5u64 {
            let init = InitialData::seeded_constant(seed, 2, (0.1, 2.0));
            let traj = integrate(&spec, &init, STEP, HORIZON).unwrap();
            worst = worst.max(traj.terminal_deviation(&attractor.x, &attractor.u, WINDOW));
        }
        let elapsed = start.elapsed();
        let ok = worst < 1e-4 && elapsed.as_secs_f64() < 30.0;
        pass &= ok;
        lines.push(format!(
            "{name}: worst dev {worst:.2e} over 5 seeds in {elapsed:?}"
        ));
    }
    report(5, pass, &lines.join("; "));
}

#[test]
fn criterion_6_scalar_infinite_delay() {
    let init = InitialData::constant(&[0.4], &[0.1]);
    let chain = integrate(&scalar_memory_control(), &init, STEP, 200.0).unwrap();
    let terminal = chain.x[0][chain.len() - 1];
    let err = (terminal - 0.2).abs();

    let table = integrate(
        &scalar_memory_control_tabulated(0.05, 25.0),
        &init,
        STEP,
        200.0,
    )
    .unwrap();
    let mut route_gap: f64 = 0.0;
    for m in 0..chain.len() {
        route_gap = route_gap.max((chain.x[0][m] - table.x[0][m]).abs());
    }
    let pass = err < 1e-4 && route_gap <= 1e-5;
    report(
        6,
        pass,
        &format!("x(200) err {err:.2e}; chain vs quadrature sup gap {route_gap:.2e}"),
    );
}

#[test]
fn criterion_7_hopf_threshold_and_dichotomy() {
    let start = Instant::now();
    let th = hopf_thresholds(1.0, 2.0, 0).unwrap();
    let tau0 = th.taus[0];
    let tau_err = (tau0 - std::f64::consts::FRAC_PI_2).abs();
    let root = hopf_h(1.0, 2.0, tau0, Complex::new(0.0, th.omega)).norm();

    let below = build_hopf_fixture(1.0, 2.0, 1.2).unwrap();
    let target = spec_equilibrium(&below).unwrap();
    let init = InitialData::seeded_constant(7, 2, (0.5, 2.0));
    let traj = integrate(&below, &init, STEP, HORIZON).unwrap();
    let converged = detect_convergence(&traj, &target.x, &target.u, WINDOW, 1e-4);

    let above = build_hopf_fixture(1.0, 2.0, 1.9).unwrap();
    let traj = integrate(&above, &init, STEP, HORIZON).unwrap();
    let (amplitude, sustained) = detect_oscillation(&traj, WINDOW);

    let elapsed = start.elapsed();
    let pass = tau_err < 1e-12
        && root < 1e-10
        && converged
        && sustained
        && amplitude >= 1e-3
        && elapsed.as_secs_f64() < 60.0;
    report(
        7,
        pass,
        &format!(
            "tau0 err {tau_err:.2e}, |h(i omega)| {root:.2e}; tau=1.2 converged {converged}; tau=1.9 amplitude {amplitude:.3} sustained {sustained}; {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_8_integrator_self_tests() {
    let mut fixtures = named_fixtures();
    fixtures.push(("example 4.1 scalar", scalar_memory_control()));
    let mut worst_residual: f64 = 0.0;
    let mut worst_halving: f64 = 0.0;
    let mut worst_floor: f64 = 0.0;
    for (_, spec) in &fixtures {
        let n = spec.n();
        let init = InitialData::seeded_constant(11, n, (0.1, 2.0));
        let coarse = integrate(spec, &init, STEP, 100.0).unwrap();
        for i in 0..n {
            worst_residual = worst_residual.max(control_integral_check(&coarse, spec, i));
        }
        worst_floor = worst_floor.max(-coarse.diagnostics.positivity_floor);

        let fine = integrate(spec, &init, STEP / 2.0, 100.0).unwrap();
        let last_c = coarse.len() - 1;
        let last_f = fine.len() - 1;
        for i in 0..n {
            worst_halving = worst_halving
                .max((coarse.x[i][last_c] - fine.x[i][last_f]).abs())
                .max((coarse.u[i][last_c] - fine.u[i][last_f]).abs());
        }
        worst_floor = worst_floor.max(-fine.diagnostics.positivity_floor);
    }
    let pass = worst_residual < 5e-6 && worst_halving < 1e-6 && worst_floor <= 1e-12;
    report(
        8,
        pass,
        &format!(
            "control-integral residual {worst_residual:.2e}; step-halving change {worst_halving:.2e}; positivity dip {worst_floor:.2e}"
        ),
    );
}

#[test]
fn criterion_9_dissipativity_bound() {
    let spec = predator_prey_pair(0.0, 0.0);
    let bound = dissipativity_bound(&spec)
        .unwrap()
        .bound
        .expect("the competitive part is a nonsingular M-matrix");
    let mut worst_excess = f64::NEG_INFINITY;
    for seed in 1..=5u64 {
        let init = InitialData::seeded_constant(seed, 2, (0.1, 10.0));
        let traj = integrate(&spec, &init, STEP, HORIZON).unwrap();
        for i in 0..2 {
            let mut peak: f64 = 0.0;
            for m in 0..traj.len() {
                if traj.times[m] >= HORIZON / 2.0 {
                    peak = peak.max(traj.x[i][m]);
                }
            }
            worst_excess = worst_excess.max(peak - bound.x[i]);
        }
    }
    let pass = worst_excess <= 1e-3;
    report(
        9,
        pass,
        &format!(
            "bound ({:.3}, {:.3}); worst limsup excess {worst_excess:.2e} over 5 inflated seeds",
            bound.x[0], bound.x[1]
        ),
    );
}
