//! Saturated equilibria as complementarity solutions.
//!
//! A point `x* ≥ 0` is a saturated equilibrium for community matrix `M`
//! and growth vector `b` when
//!
//! ```text
//! (M x*)_i = b_i   where x*_i > 0,
//! (M x*)_i ≥ b_i   where x*_i = 0,
//! ```
//!
//! i.e. a solution of the linear complementarity problem `LCP(M, b)`.
//! When `M` is a P-matrix this solution exists and is unique; it is found
//! here by enumerating candidate supports from the smallest upward, which
//! also resolves boundary ties toward the minimal support. The matching
//! control levels are `u*_i = d_i x*_i / e_i`.

use crate::matrix::{
    build_matrices, is_nonsingular_m_matrix, is_p_matrix, ClassCertificate, MatrixClassError,
};
use crate::linalg::{index_subsets, solve_refined};
use crate::model::SystemSpec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Off-support residuals may undershoot zero by at most this much.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Upper bound on the complementarity gap `max_i |x_i (Mx - b)_i|`.
pub const GAP_TOL: f64 = 1e-10;
/// Support components at or below this level are treated as zero, which
/// collapses degenerate candidates onto their minimal support.
pub const SUPPORT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("community matrix is not a P-matrix; saturated equilibrium may not be unique")]
    NotPMatrix,
    #[error(transparent)]
    Class(#[from] MatrixClassError),
    #[error("singular principal submatrix on support {support:?}")]
    SingularSubmatrix { support: Vec<usize> },
    #[error("support enumeration accepted no candidate (numerical breakdown)")]
    Breakdown,
    #[error("planar analysis requires 2 species, got {0}")]
    NotPlanar(usize),
}

/// The unique complementarity solution together with its evidence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SaturatedEquilibrium {
    pub x: Vec<f64>,
    /// Control levels `d_i x_i / e_i`.
    pub u: Vec<f64>,
    /// 0-based indices of the surviving species, ascending.
    pub support: Vec<usize>,
    /// `M x* - b`; non-negative up to [`RESIDUAL_TOL`].
    pub residual: Vec<f64>,
    /// `max_i |x_i residual_i|`.
    pub gap: f64,
    /// Some off-support residual is itself within [`RESIDUAL_TOL`] of zero,
    /// so the support is not numerically isolated.
    pub boundary_degenerate: bool,
}

impl SaturatedEquilibrium {
    pub fn is_interior(&self) -> bool {
        self.support.len() == self.x.len()
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    /// Flat `(x, u)` view used by the trajectory detectors.
    pub fn target(&self) -> (Vec<f64>, Vec<f64>) {
        (self.x.clone(), self.u.clone())
    }
}

/// Candidate solutions for every support that solves the complementarity
/// conditions with strictly positive support components. For a P-matrix
/// this has exactly one entry away from boundary ties. Exposed for the
/// cross-validation suites; [`saturated_equilibrium`] takes the first
/// (minimal-support) entry.
pub fn enumerate_saturated_supports(
    m: &DMatrix<f64>,
    b: &[f64],
) -> Result<Vec<(Vec<usize>, Vec<f64>)>, EquilibriumError> {
    let n = b.len();
    assert_eq!(m.nrows(), n, "matrix/vector dimension mismatch");
    let mut accepted = Vec::new();
    // Empty support: x = 0 is saturated iff b ≤ 0 (within tolerance).
    if b.iter().all(|&bi| -bi >= -RESIDUAL_TOL) {
        accepted.push((Vec::new(), vec![0.0; n]));
    }
    for support in index_subsets(n) {
        let k = support.len();
        let sub = DMatrix::from_fn(k, k, |r, c| m[(support[r], support[c])]);
        let rhs = DVector::from_iterator(k, support.iter().map(|&i| b[i]));
        let Some(xs) = solve_refined(&sub, &rhs) else {
            return Err(EquilibriumError::SingularSubmatrix { support });
        };
        if xs.iter().any(|&v| v <= SUPPORT_TOL) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (slot, &i) in support.iter().enumerate() {
            x[i] = xs[slot];
        }
        let ok = (0..n).all(|i| {
            if support.contains(&i) {
                return true;
            }
            let r: f64 = (0..n).map(|j| m[(i, j)] * x[j]).sum::<f64>() - b[i];
            r >= -RESIDUAL_TOL
        });
        if ok {
            accepted.push((support, x));
        }
    }
    Ok(accepted)
}

/// Unique saturated equilibrium of `LCP(M, b)` for a P-matrix `M`, with
/// control levels from `d`, `e`.
pub fn saturated_equilibrium(
    m: &DMatrix<f64>,
    b: &[f64],
    d: &[f64],
    e: &[f64],
) -> Result<SaturatedEquilibrium, EquilibriumError> {
    let p = is_p_matrix(m)?;
    if !p.verdict {
        return Err(EquilibriumError::NotPMatrix);
    }
    let accepted = enumerate_saturated_supports(m, b)?;
    let (support, x) = accepted.into_iter().next().ok_or(EquilibriumError::Breakdown)?;
    Ok(finish(m, b, d, e, support, x))
}

fn finish(
    m: &DMatrix<f64>,
    b: &[f64],
    d: &[f64],
    e: &[f64],
    support: Vec<usize>,
    x: Vec<f64>,
) -> SaturatedEquilibrium {
    let n = b.len();
    let residual: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)] * x[j]).sum::<f64>() - b[i])
        .collect();
    let gap = (0..n).map(|i| (x[i] * residual[i]).abs()).fold(0.0, f64::max);
    let boundary_degenerate = (0..n)
        .any(|i| !support.contains(&i) && residual[i].abs() <= RESIDUAL_TOL);
    let u: Vec<f64> = (0..n).map(|i| d[i] * x[i] / e[i]).collect();
    SaturatedEquilibrium {
        x,
        u,
        support,
        residual,
        gap,
        boundary_degenerate,
    }
}

/// Saturated equilibrium of a spec's controlled community matrix.
pub fn spec_equilibrium(spec: &SystemSpec) -> Result<SaturatedEquilibrium, EquilibriumError> {
    let cm = build_matrices(spec);
    let m = if spec.is_uncontrolled() { &cm.m0 } else { &cm.m };
    saturated_equilibrium(m, &spec.b, &spec.d, &spec.e)
}

// ---------------------------------------------------------------------------
// Dissipativity
// ---------------------------------------------------------------------------

/// Outcome of the dissipativity test on the competitive-part matrix
/// `M0⁻ = diag(mu) - A⁻`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DissipativityReport {
    pub dissipative: bool,
    /// Nonsingular M-matrix certificate for `M0⁻`.
    pub certificate: ClassCertificate,
    /// Componentwise eventual upper bound: the saturated equilibrium of
    /// the cooperative comparison system with matrix `M0⁻`. Present iff
    /// `dissipative`.
    pub bound: Option<SaturatedEquilibrium>,
}

/// Test `M0⁻` for being a nonsingular M-matrix; when it is, every solution
/// eventually enters the box `[0, bound]` regardless of delays.
pub fn dissipativity_bound(spec: &SystemSpec) -> Result<DissipativityReport, EquilibriumError> {
    let cm = build_matrices(spec);
    let certificate = is_nonsingular_m_matrix(&cm.m0_minus)?;
    let bound = if certificate.verdict {
        Some(saturated_equilibrium(&cm.m0_minus, &spec.b, &spec.d, &spec.e)?)
    } else {
        None
    };
    Ok(DissipativityReport {
        dissipative: certificate.verdict,
        certificate,
        bound,
    })
}

// ---------------------------------------------------------------------------
// Planar closed forms
// ---------------------------------------------------------------------------

/// One equilibrium of the planar system with its saturation status.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanarEquilibrium {
    pub x: [f64; 2],
    pub u: [f64; 2],
    pub saturated: bool,
}

/// Closed-form equilibrium inventory for two species: the origin, the two
/// single-species states and the coexistence state, with existence and
/// saturation per the sign conditions on `b`, `λ_i = mu_i + c_i d_i / e_i`
/// and the interaction coefficients.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanarEquilibria {
    /// `det M > 0` and `λ_i + a_ii > 0`: the planar P-matrix condition.
    pub p_condition: bool,
    pub lambda: [f64; 2],
    pub det_m: f64,
    pub e0: PlanarEquilibrium,
    pub e1: Option<PlanarEquilibrium>,
    pub e2: Option<PlanarEquilibrium>,
    pub e_star: Option<PlanarEquilibrium>,
}

impl PlanarEquilibria {
    /// The saturated member (unique when the P-condition holds).
    pub fn saturated(&self) -> Option<&PlanarEquilibrium> {
        [self.e_star.as_ref(), self.e1.as_ref(), self.e2.as_ref(), Some(&self.e0)]
            .into_iter()
            .flatten()
            .find(|eq| eq.saturated)
    }
}

/// Closed-form equilibria for `n = 2` via the single-species formulas and
/// Cramer's rule for the interior state.
pub fn planar_equilibria(spec: &SystemSpec) -> Result<PlanarEquilibria, EquilibriumError> {
    if spec.n() != 2 {
        return Err(EquilibriumError::NotPlanar(spec.n()));
    }
    let (b1, b2) = (spec.b[0], spec.b[1]);
    let a = &spec.a;
    let lambda = [spec.mu[0] + spec.alpha(0), spec.mu[1] + spec.alpha(1)];
    let l1a = lambda[0] + a[0][0];
    let l2a = lambda[1] + a[1][1];
    let det_m = l1a * l2a - a[0][1] * a[1][0];
    let p_condition = det_m > 0.0 && l1a > 0.0 && l2a > 0.0;
    let uify = |x: [f64; 2]| {
        [
            spec.d[0] * x[0] / spec.e[0],
            spec.d[1] * x[1] / spec.e[1],
        ]
    };

    let e0 = PlanarEquilibrium {
        x: [0.0, 0.0],
        u: [0.0, 0.0],
        saturated: b1 <= RESIDUAL_TOL && b2 <= RESIDUAL_TOL,
    };
    let e1 = (b1 > 0.0 && l1a > 0.0).then(|| {
        let x1 = b1 / l1a;
        PlanarEquilibrium {
            x: [x1, 0.0],
            u: uify([x1, 0.0]),
            saturated: a[1][0] * x1 >= b2 - RESIDUAL_TOL,
        }
    });
    let e2 = (b2 > 0.0 && l2a > 0.0).then(|| {
        let x2 = b2 / l2a;
        PlanarEquilibrium {
            x: [0.0, x2],
            u: uify([0.0, x2]),
            saturated: a[0][1] * x2 >= b1 - RESIDUAL_TOL,
        }
    });
    // Coexistence requires both Cramer numerators positive under the
    // P-condition; any interior equilibrium is saturated by definition.
    let num1 = b1 * l2a - a[0][1] * b2;
    let num2 = b2 * l1a - a[1][0] * b1;
    let e_star = (p_condition && num1 > 0.0 && num2 > 0.0).then(|| {
        let x = [num1 / det_m, num2 / det_m];
        PlanarEquilibrium {
            x,
            u: uify(x),
            saturated: true,
        }
    });
    Ok(PlanarEquilibria {
        p_condition,
        lambda,
        det_m,
        e0,
        e1,
        e2,
        e_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{competitive_pair, predator_prey_pair};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dm(n: usize, vals: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, vals)
    }

    /// Cramer oracle for the interior planar solution.
    fn cramer2(m: &DMatrix<f64>, b: &[f64]) -> [f64; 2] {
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        [
            (b[0] * m[(1, 1)] - m[(0, 1)] * b[1]) / det,
            (b[1] * m[(0, 0)] - m[(1, 0)] * b[0]) / det,
        ]
    }

    #[test]
    fn boundary_equilibrium_with_degenerate_residual() {
        let spec = competitive_pair(0.0);
        let eq = spec_equilibrium(&spec).unwrap();
        assert_eq!(eq.support, vec![0]);
        assert_abs_diff_eq!(eq.x[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(eq.x[1], 0.0);
        // Passive trackers still settle at d x / e.
        assert_abs_diff_eq!(eq.u[0], 2.0 / 3.0, epsilon = 1e-12);
        // The off-support residual vanishes identically here.
        assert_abs_diff_eq!(eq.residual[1], 0.0, epsilon = 1e-14);
        assert!(eq.boundary_degenerate);
        assert!(eq.gap <= GAP_TOL);
    }

    #[test]
    fn interior_equilibrium_of_mixed_pair() {
        let spec = predator_prey_pair(0.0, 0.0);
        let eq = spec_equilibrium(&spec).unwrap();
        assert_eq!(eq.support, vec![0, 1]);
        assert_abs_diff_eq!(eq.x[0], 53.0 / 80.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.x[1], 1.0 / 20.0, epsilon = 1e-12);
        assert!(!eq.boundary_degenerate);
        assert!(eq.gap <= GAP_TOL);
    }

    #[test]
    fn controlled_interior_matches_cramer_oracle() {
        let spec = competitive_pair(0.25);
        let cm = build_matrices(&spec);
        let eq = spec_equilibrium(&spec).unwrap();
        let oracle = cramer2(&cm.m, &spec.b);
        assert_abs_diff_eq!(oracle[0], 41.0 / 72.0, epsilon = 1e-15);
        assert_abs_diff_eq!(oracle[1], 1.0 / 36.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eq.x[0], oracle[0], epsilon = 1e-12);
        assert_abs_diff_eq!(eq.x[1], oracle[1], epsilon = 1e-12);
        assert_abs_diff_eq!(eq.u[0], oracle[0], epsilon = 1e-12);
    }

    #[test]
    fn non_p_matrix_is_refused() {
        let m = dm(2, &[0.0, 1.0, 1.0, 0.0]);
        let err = saturated_equilibrium(&m, &[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap_err();
        assert_eq!(err, EquilibriumError::NotPMatrix);
    }

    #[test]
    fn non_positive_growth_selects_the_origin() {
        let m = dm(2, &[1.5, 0.125, -2.0, 1.5]);
        let eq = saturated_equilibrium(&m, &[-0.5, -1.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(eq.is_zero());
        assert_eq!(eq.x, vec![0.0, 0.0]);
        assert!(eq.residual.iter().all(|&r| r >= -RESIDUAL_TOL));
    }

    #[test]
    fn random_p_matrices_have_unique_verified_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut count = 0;
        while count < 60 {
            let n = if count % 2 == 0 { 3 } else { 4 };
            let m = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    1.5 + rng.random_range(0.0..1.0)
                } else {
                    rng.random_range(-0.8..0.8)
                }
            });
            if !is_p_matrix(&m).unwrap().verdict {
                continue;
            }
            count += 1;
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
            let d = vec![1.0; n];
            let e = vec![1.0; n];
            let eq = saturated_equilibrium(&m, &b, &d, &e).unwrap();
            assert!(eq.gap <= GAP_TOL, "gap {}", eq.gap);
            assert!(eq.residual.iter().all(|&r| r >= -RESIDUAL_TOL));
            assert!(eq.x.iter().all(|&v| v >= 0.0));
            let accepted = enumerate_saturated_supports(&m, &b).unwrap();
            assert_eq!(accepted.len(), 1, "support ambiguity for m={m}");
        }
    }

    #[test]
    fn dissipativity_bound_matches_hand_enumeration() {
        let spec = predator_prey_pair(0.0, 0.0);
        let report = dissipativity_bound(&spec).unwrap();
        assert!(report.dissipative);
        let bound = report.bound.unwrap();
        // Hand oracle on M0⁻ = [[1, 0], [-2, 1]], b = (1, -5/4):
        // support {0}: x = (1, 0), row 2 residual -2·1 + 5/4 < 0, rejected;
        // support {0,1}: x = (1, -5/4 + 2) = (1, 3/4), both positive.
        assert_abs_diff_eq!(bound.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bound.x[1], 0.75, epsilon = 1e-12);
        assert_eq!(bound.support, vec![0, 1]);

        // Purely competitive variant is dissipative with diagonal bound.
        let comp = competitive_pair(0.0);
        let r2 = dissipativity_bound(&comp).unwrap();
        assert!(r2.dissipative);
        let b2 = r2.bound.unwrap();
        assert_abs_diff_eq!(b2.x[0], 1.0, epsilon = 1e-12);
        // b_2 = 1/3 against mu_2 = 1.
        assert_abs_diff_eq!(b2.x[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn planar_inventory_uncontrolled_competitive() {
        let spec = competitive_pair(0.0);
        let pe = planar_equilibria(&spec).unwrap();
        assert!(pe.p_condition);
        assert!(!pe.e0.saturated);
        let e1 = pe.e1.unwrap();
        assert_abs_diff_eq!(e1.x[0], 2.0 / 3.0, epsilon = 1e-15);
        assert!(e1.saturated, "boundary equality counts as saturated");
        let e2 = pe.e2.unwrap();
        assert_abs_diff_eq!(e2.x[1], 2.0 / 9.0, epsilon = 1e-15);
        assert!(!e2.saturated);
        // Second coexistence inequality holds only with equality: no E*.
        assert!(pe.e_star.is_none());
    }

    #[test]
    fn planar_inventory_controlled_shifts_to_interior() {
        let spec = competitive_pair(0.25);
        let pe = planar_equilibria(&spec).unwrap();
        let estar = pe.e_star.unwrap();
        assert_abs_diff_eq!(estar.x[0], 41.0 / 72.0, epsilon = 1e-15);
        assert_abs_diff_eq!(estar.x[1], 1.0 / 36.0, epsilon = 1e-15);
        // E1 loses saturation once the interior state exists.
        assert!(!pe.e1.unwrap().saturated);
    }

    #[test]
    fn planar_inventory_controlled_predator_prey() {
        let spec = predator_prey_pair(0.2, 0.2);
        let pe = planar_equilibria(&spec).unwrap();
        assert_abs_diff_eq!(pe.lambda[0], 1.2, epsilon = 1e-15);
        let e1 = pe.e1.as_ref().unwrap();
        assert_abs_diff_eq!(e1.x[0], 10.0 / 17.0, epsilon = 1e-15);
        assert!(e1.saturated);
        // -5/4 · 17/10 = -17/8 < -2 = a21 b1 fails the coexistence test.
        assert!(pe.e_star.is_none());
        assert!(pe.e2.is_none());
        let saturated = pe.saturated().unwrap();
        assert_eq!(saturated.x[0], e1.x[0]);
    }

    #[test]
    fn planar_saturated_member_matches_lcp() {
        for spec in [
            competitive_pair(0.0),
            competitive_pair(0.25),
            predator_prey_pair(0.0, 0.0),
            predator_prey_pair(0.2, 0.2),
        ] {
            let pe = planar_equilibria(&spec).unwrap();
            let closed = pe.saturated().expect("one saturated member");
            let lcp = spec_equilibrium(&spec).unwrap();
            for i in 0..2 {
                assert_abs_diff_eq!(closed.x[i], lcp.x[i], epsilon = 1e-12);
                assert_abs_diff_eq!(closed.u[i], lcp.u[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn planar_guard_rejects_other_dimensions() {
        let spec = crate::fixtures::scalar_memory_control();
        assert!(matches!(
            planar_equilibria(&spec),
            Err(EquilibriumError::NotPlanar(1))
        ));
    }
}
