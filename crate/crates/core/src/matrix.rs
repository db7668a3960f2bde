//! Community matrices of the delayed system and matrix-class certificates.
//!
//! For coefficients `mu` (diagonal `N`), interaction matrix `A` split as
//! `A = A⁺ - A⁻`, and control pressures `α_i = c_i d_i / e_i` (diagonal
//! `C`), the analysis works with five matrices:
//!
//! * `M0 = N + A` -- uncontrolled community matrix,
//! * `M  = N + A + C` -- controlled community matrix,
//! * `M̂0 = N - |A|` -- sign-dominance form of `M0`,
//! * `M̂  = N - |A| - C` -- sign-dominance form of `M`,
//! * `M0⁻ = N - A⁻` -- competitive part only, used for dissipativity.
//!
//! Class predicates return a [`ClassCertificate`] carrying the evidence:
//! principal minors (exhaustive up to `n = 12`, recorded up to `n = 6`),
//! a positive vector `η` with `Bη > 0` when one exists, or eigenvalue
//! real-part bounds for larger matrices.

use crate::linalg::{
    eigenvalue_real_parts, index_subsets, max_abs_entry, minor_tolerance, principal_minor,
    solve_refined,
};
use crate::model::SystemSpec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exhaustive minor enumeration bound (`2^n - 1` subsets).
pub const MINOR_ENUM_MAX: usize = 12;
/// Minors are stored in the certificate only up to this dimension.
pub const MINOR_RECORD_MAX: usize = 6;
/// Diagonal shift used to produce an `η` witness for singular M-matrices.
pub const SINGULAR_ETA_SHIFT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixClassError {
    #[error("entry ({row},{col}) = {value} is positive off the diagonal, not a Z-matrix")]
    NotZMatrix { row: usize, col: usize, value: f64 },
    #[error("dimension {n} exceeds the exhaustive minor bound {max}")]
    DimensionTooLarge { n: usize, max: usize },
}

/// The five community matrices plus the sign parts they were built from.
#[derive(Clone, Debug, PartialEq)]
pub struct CommunityMatrices {
    pub m0: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub m0_hat: DMatrix<f64>,
    pub m_hat: DMatrix<f64>,
    pub m0_minus: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub a_plus: DMatrix<f64>,
    pub a_minus: DMatrix<f64>,
    pub abs_a: DMatrix<f64>,
    /// Control pressures `α_i = c_i d_i / e_i`.
    pub alpha: DVector<f64>,
}

/// Assemble all community matrices of a spec.
pub fn build_matrices(spec: &SystemSpec) -> CommunityMatrices {
    let n = spec.n();
    let a = DMatrix::from_fn(n, n, |i, j| spec.a[i][j]);
    let a_plus = a.map(|v| v.max(0.0));
    let a_minus = a.map(|v| (-v).max(0.0));
    let abs_a = a.map(f64::abs);
    let nd = DMatrix::from_diagonal(&DVector::from_iterator(n, spec.mu.iter().cloned()));
    let alpha = DVector::from_iterator(n, (0..n).map(|i| spec.alpha(i)));
    let cd = DMatrix::from_diagonal(&alpha);
    CommunityMatrices {
        m0: &nd + &a,
        m: &nd + &a + &cd,
        m0_hat: &nd - &abs_a,
        m_hat: &nd - &abs_a - &cd,
        m0_minus: &nd - &a_minus,
        a,
        a_plus,
        a_minus,
        abs_a,
        alpha,
    }
}

/// How a verdict was established.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassMethod {
    PrincipalMinors,
    Eigenvalues,
    EtaVector,
    InverseNonneg,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinorRecord {
    /// 0-based index subset, ascending.
    pub indices: Vec<usize>,
    pub value: f64,
}

/// Evidence for (or against) membership in a matrix class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassCertificate {
    pub verdict: bool,
    pub method: ClassMethod,
    /// Boundary tolerance applied to minors or eigenvalue real parts.
    pub tol: f64,
    /// Principal minors, present when `n ≤ 6` and a minor route was used.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub minors: Vec<MinorRecord>,
    /// Positive vector with `(B + shift·I) η = 1 > 0`, when available.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eta: Option<Vec<f64>>,
    /// Diagonal shift used for the `η` witness (0 when none was needed).
    #[serde(default)]
    pub eta_shift: f64,
    /// Eigenvalue real parts, present when the eigenvalue route was used.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eigen_real_parts: Option<Vec<f64>>,
    /// First violated condition when the verdict is negative.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

impl ClassCertificate {
    fn new(method: ClassMethod, tol: f64) -> Self {
        ClassCertificate {
            verdict: false,
            method,
            tol,
            minors: Vec::new(),
            eta: None,
            eta_shift: 0.0,
            eigen_real_parts: None,
            failure: None,
        }
    }
}

/// Off-diagonal entries all non-positive.
pub fn is_z_matrix(m: &DMatrix<f64>) -> bool {
    z_violation(m).is_none()
}

fn z_violation(m: &DMatrix<f64>) -> Option<(usize, usize, f64)> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] > 0.0 {
                return Some((i, j, m[(i, j)]));
            }
        }
    }
    None
}

fn require_z(m: &DMatrix<f64>) -> Result<(), MatrixClassError> {
    match z_violation(m) {
        Some((row, col, value)) => Err(MatrixClassError::NotZMatrix { row, col, value }),
        None => Ok(()),
    }
}

fn minor_sweep(
    m: &DMatrix<f64>,
    cert: &mut ClassCertificate,
    accept: impl Fn(f64, f64) -> bool,
) -> bool {
    let n = m.nrows();
    let record = n <= MINOR_RECORD_MAX;
    let mut ok = true;
    for idx in index_subsets(n) {
        let value = principal_minor(m, &idx);
        if ok && !accept(value, cert.tol) {
            ok = false;
            cert.failure = Some(format!(
                "principal minor on {:?} is {value} (tol {})",
                idx, cert.tol
            ));
        }
        if record {
            cert.minors.push(MinorRecord { indices: idx, value });
        }
        if !ok && !record {
            break;
        }
    }
    ok
}

fn attach_eta(m: &DMatrix<f64>, cert: &mut ClassCertificate, shift: f64) {
    let n = m.nrows();
    let shifted = if shift > 0.0 {
        m + DMatrix::from_diagonal_element(n, n, shift)
    } else {
        m.clone()
    };
    let ones = DVector::from_element(n, 1.0);
    if let Some(eta) = solve_refined(&shifted, &ones) {
        let image = &shifted * &eta;
        if eta.iter().all(|&v| v > 0.0) && image.iter().all(|&v| v > 0.0) {
            cert.eta = Some(eta.iter().cloned().collect());
            cert.eta_shift = shift;
        }
    }
}

/// M-matrix test (possibly singular): Z-matrix with every principal minor
/// `≥ -tol`; equivalently all eigenvalue real parts `≥ 0`. The certificate
/// carries an `η` witness for the shifted matrix `B + δ·I` when the verdict
/// holds, since a singular M-matrix admits no strict witness itself.
pub fn is_m_matrix(m: &DMatrix<f64>) -> Result<ClassCertificate, MatrixClassError> {
    require_z(m)?;
    let n = m.nrows();
    if n <= MINOR_ENUM_MAX {
        let mut cert = ClassCertificate::new(ClassMethod::PrincipalMinors, minor_tolerance(m));
        cert.verdict = minor_sweep(m, &mut cert, |value, tol| value >= -tol);
        if cert.verdict {
            attach_eta(m, &mut cert, SINGULAR_ETA_SHIFT);
        }
        Ok(cert)
    } else {
        let tol = 1e-10 * max_abs_entry(m).max(1.0);
        let mut cert = ClassCertificate::new(ClassMethod::Eigenvalues, tol);
        let re = eigenvalue_real_parts(m);
        cert.verdict = re.iter().all(|&r| r >= -tol);
        if !cert.verdict {
            cert.failure = Some(format!("eigenvalue real part {} below -tol", re[0]));
        }
        cert.eigen_real_parts = Some(re);
        if cert.verdict {
            attach_eta(m, &mut cert, SINGULAR_ETA_SHIFT);
        }
        Ok(cert)
    }
}

/// Nonsingular M-matrix test: Z-matrix with every principal minor strictly
/// positive (beyond tol). On success the certificate carries `η > 0`
/// solving `Bη = 1`, the classical positivity witness.
pub fn is_nonsingular_m_matrix(m: &DMatrix<f64>) -> Result<ClassCertificate, MatrixClassError> {
    require_z(m)?;
    let n = m.nrows();
    if n <= MINOR_ENUM_MAX {
        let mut cert = ClassCertificate::new(ClassMethod::PrincipalMinors, minor_tolerance(m));
        cert.verdict = minor_sweep(m, &mut cert, |value, tol| value > tol);
        if cert.verdict {
            attach_eta(m, &mut cert, 0.0);
            if cert.eta.is_none() {
                cert.verdict = false;
                cert.failure = Some("minor sweep passed but no positive η witness".into());
            }
        }
        Ok(cert)
    } else {
        let tol = 1e-10 * max_abs_entry(m).max(1.0);
        let mut cert = ClassCertificate::new(ClassMethod::Eigenvalues, tol);
        let re = eigenvalue_real_parts(m);
        cert.verdict = re.iter().all(|&r| r > tol);
        if !cert.verdict {
            cert.failure = Some(format!("eigenvalue real part {} not above tol", re[0]));
        }
        cert.eigen_real_parts = Some(re);
        if cert.verdict {
            attach_eta(m, &mut cert, 0.0);
            if cert.eta.is_none() {
                cert.verdict = false;
                cert.failure = Some("eigenvalue sweep passed but no positive η witness".into());
            }
        }
        Ok(cert)
    }
}

/// P-matrix test: every principal minor strictly positive. No sign-pattern
/// requirement. Exhaustive only; dimensions beyond [`MINOR_ENUM_MAX`] are
/// rejected rather than approximated.
pub fn is_p_matrix(m: &DMatrix<f64>) -> Result<ClassCertificate, MatrixClassError> {
    let n = m.nrows();
    if n > MINOR_ENUM_MAX {
        return Err(MatrixClassError::DimensionTooLarge { n, max: MINOR_ENUM_MAX });
    }
    let mut cert = ClassCertificate::new(ClassMethod::PrincipalMinors, minor_tolerance(m));
    cert.verdict = minor_sweep(m, &mut cert, |value, tol| value > tol);
    Ok(cert)
}

/// Independent witness route for Z-matrices: a positive `η` with `Bη > 0`
/// exists iff `B` is a nonsingular M-matrix. Returns the witness from
/// `Bη = 1` when it certifies, `None` otherwise.
pub fn eta_certificate(m: &DMatrix<f64>) -> Option<Vec<f64>> {
    if !is_z_matrix(m) {
        return None;
    }
    let ones = DVector::from_element(m.nrows(), 1.0);
    let eta = solve_refined(m, &ones)?;
    let image = m * &eta;
    if eta.iter().all(|&v| v > 0.0) && image.iter().all(|&v| v > 0.0) {
        Some(eta.iter().cloned().collect())
    } else {
        None
    }
}
