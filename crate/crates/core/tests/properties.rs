//! Randomized invariants: matrix-class implications, LCP structure,
//! relabeling invariance of the analysis, kernel normalization.

use nalgebra::DMatrix;
use proptest::prelude::*;

use lv_attract::criteria::analyze;
use lv_attract::equilibria::saturated_equilibrium;
use lv_attract::kernel::Kernel;
use lv_attract::matrix::{is_m_matrix, is_nonsingular_m_matrix, is_p_matrix, is_z_matrix};
use lv_attract::model::SystemSpec;

/// Strictly row-dominant Z-matrix with positive diagonal; always a
/// nonsingular M-matrix.
fn dominant_m_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    let off = prop::collection::vec(0.0..1.0f64, n * n);
    let margin = prop::collection::vec(0.05..2.0f64, n);
    (off, margin).prop_map(move |(off, margin)| {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                if i != j {
                    m[(i, j)] = -off[i * n + j];
                    row_sum += off[i * n + j];
                }
            }
            m[(i, i)] = row_sum + margin[i];
        }
        m
    })
}

/// Z-matrix with unconstrained diagonal; may or may not be an M-matrix.
fn z_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    let off = prop::collection::vec(0.0..1.5f64, n * n);
    let diag = prop::collection::vec(-1.0..4.0f64, n);
    (off, diag).prop_map(move |(off, diag)| {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = if i == j { diag[i] } else { -off[i * n + j] };
            }
        }
        m
    })
}

/// Spec with a strictly dominant community matrix, so the P-matrix gate
/// always passes; gains are uniform (all zero or all positive).
fn dominated_spec(n: usize) -> impl Strategy<Value = SystemSpec> {
    let a = prop::collection::vec(-0.4..0.4f64, n * n);
    let margin = prop::collection::vec(0.3..1.5f64, n);
    let b = prop::collection::vec(-1.0..2.0f64, n);
    let alpha = prop_oneof![Just(0.0), 0.05..0.5f64];
    (a, margin, b, alpha).prop_map(move |(a_flat, margin, b, alpha)| {
        let mut a = vec![vec![0.0; n]; n];
        let mut mu = vec![0.0; n];
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                a[i][j] = a_flat[i * n + j];
                row_sum += a[i][j].abs();
            }
            mu[i] = row_sum + margin[i];
        }
        let k = vec![Kernel::point(0.5).unwrap(); n * n];
        let g = vec![Kernel::exponential(1.0).unwrap(); n];
        SystemSpec::new(b, mu, a, k, vec![alpha; n], vec![1.0; n], vec![1.0; n], g).unwrap()
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn dominant_construction_lands_in_every_class(m in (2usize..=5).prop_flat_map(dominant_m_matrix)) {
        prop_assert!(is_z_matrix(&m));
        let ns = is_nonsingular_m_matrix(&m).unwrap();
        prop_assert!(ns.verdict);
        prop_assert!(is_m_matrix(&m).unwrap().verdict);
        prop_assert!(is_p_matrix(&m).unwrap().verdict);
        let eta = ns.eta.expect("nonsingular M-matrices carry a positive witness");
        prop_assert!(eta.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn class_implications_hold_on_arbitrary_z_matrices(m in (2usize..=4).prop_flat_map(z_matrix)) {
        prop_assert!(is_z_matrix(&m));
        let ns = is_nonsingular_m_matrix(&m).unwrap().verdict;
        let weak = is_m_matrix(&m).unwrap().verdict;
        let p = is_p_matrix(&m).unwrap().verdict;
        if ns {
            prop_assert!(weak, "nonsingular M-matrix must pass the weak test");
            prop_assert!(p, "nonsingular M-matrix must be a P-matrix");
        }
        // For Z-matrices the P property characterizes nonsingular M.
        if p {
            prop_assert!(ns);
        }
    }

    #[test]
    fn diagonal_inflation_preserves_nonsingular_m(
        (m, bump) in (2usize..=4).prop_flat_map(|n| {
            (dominant_m_matrix(n), prop::collection::vec(0.0..2.0f64, n))
        })
    ) {
        let mut inflated = m.clone();
        for i in 0..bump.len() {
            inflated[(i, i)] += bump[i];
        }
        prop_assert!(is_nonsingular_m_matrix(&inflated).unwrap().verdict);
    }

    #[test]
    fn lcp_solution_is_positively_homogeneous(
        (m, b, lambda) in (2usize..=4).prop_flat_map(|n| {
            (dominant_m_matrix(n), prop::collection::vec(-3.0..3.0f64, n), 0.25..4.0f64)
        })
    ) {
        let n = b.len();
        let ones = vec![1.0; n];
        let base = saturated_equilibrium(&m, &b, &ones, &ones).unwrap();
        let scaled_b: Vec<f64> = b.iter().map(|v| v * lambda).collect();
        let scaled = saturated_equilibrium(&m, &scaled_b, &ones, &ones).unwrap();
        prop_assume!(!base.boundary_degenerate && !scaled.boundary_degenerate);
        prop_assert_eq!(&base.support, &scaled.support);
        for i in 0..n {
            let expected = lambda * base.x[i];
            prop_assert!(
                (scaled.x[i] - expected).abs() <= 1e-8 * (1.0 + expected.abs()),
                "component {}: {} vs {}", i, scaled.x[i], expected
            );
        }
    }

    #[test]
    fn analysis_is_invariant_under_species_relabeling(
        (spec, perm) in (2usize..=3).prop_flat_map(|n| (dominated_spec(n), permutation(n)))
    ) {
        let original = analyze(&spec).unwrap();
        let relabeled = analyze(&spec.permuted(&perm)).unwrap();
        prop_assert_eq!(original.criterion, relabeled.criterion);
        match (original.attractor(), relabeled.attractor()) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                for (new, &old) in perm.iter().enumerate() {
                    prop_assert!((b.x[new] - a.x[old]).abs() <= 1e-9);
                    prop_assert!((b.u[new] - a.u[old]).abs() <= 1e-9);
                }
            }
            _ => prop_assert!(false, "attractor presence changed under relabeling"),
        }
    }

    #[test]
    fn point_mixtures_normalize_and_stay_fixed(
        atoms in prop::collection::vec((0.0..3.0f64, 0.01..1.0f64), 1..5)
    ) {
        let kernel = Kernel::point_mixture(&atoms).unwrap();
        prop_assert!((kernel.mass() - 1.0).abs() <= 1e-12);
        if let Kernel::Point { atoms: built } = &kernel {
            let again = Kernel::point_mixture(
                &built.iter().map(|a| (a.delay, a.weight)).collect::<Vec<_>>()
            ).unwrap();
            // Constructors are idempotent at the float level.
            prop_assert_eq!(&again, &kernel);
        } else {
            prop_assert!(false, "point mixture built a non-point kernel");
        }
    }

    #[test]
    fn tables_normalize_and_stay_fixed(
        (step, densities) in (0.01..0.5f64, prop::collection::vec(0.01..1.0f64, 2..20))
    ) {
        let kernel = Kernel::table(step, &densities).unwrap();
        prop_assert!((kernel.mass() - 1.0).abs() <= 1e-12);
        if let Kernel::Table { densities: built, .. } = &kernel {
            let again = Kernel::table(step, built).unwrap();
            prop_assert_eq!(&again, &kernel);
        } else {
            prop_assert!(false, "table built a non-table kernel");
        }
    }
}
