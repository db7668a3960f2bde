//! Characteristic-equation analysis for the two-species system with
//! discrete delays and split control gains, and the closed-form delay
//! thresholds at which the interior equilibrium sheds a pair of purely
//! imaginary roots.
//!
//! The linearization is assembled blockwise in the state order
//! `(x_1, u_1, x_2, u_2)`. A boundary equilibrium (first species alone)
//! yields a block-triangular bundle whose determinant factors into two
//! real roots and a transcendental quotient; the interior equilibrium
//! yields the full coupled four-by-four bundle.

use nalgebra::{Complex, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::Kernel;
use crate::model::SystemSpec;

type C64 = Complex<f64>;

/// Default gain used to realize the vanishing-control limit while keeping
/// the spec inside the positive-gain class.
pub const HOPF_GAIN: f64 = 1e-6;

/// Residual bound each returned threshold must satisfy on the imaginary
/// axis.
pub const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("no imaginary-axis crossing: need c > b^2, got b = {b}, c = {c}")]
    NoCrossing { b: f64, c: f64 },
    #[error("invalid regime: {0}")]
    InvalidRegime(String),
    #[error("kernel unsupported by the discrete-delay analysis: {0}")]
    UnsupportedKernel(String),
    #[error("threshold tau = {tau} failed verification: |h(i omega)| = {residual:e}")]
    Verification { tau: f64, residual: f64 },
}

/// Which equilibrium the bundle linearizes about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    /// First species persists alone at `X_1 = b_1/(lambda_1 + a_11)`.
    #[serde(rename = "E1")]
    Boundary,
    /// Positive interior equilibrium.
    #[serde(rename = "E*")]
    Interior,
}

/// Real coefficient bundle of the planar linearization. The control gain
/// of each species is split into an instantaneous part `c0` and a part
/// `c1` delayed by `sigma`; interaction delays are `tau[i][j]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanarCharacteristic {
    pub kind: EquilibriumKind,
    /// `(X_1, 0)` for the boundary bundle, `(x_1*, x_2*)` for the interior.
    pub x: [f64; 2],
    pub b: [f64; 2],
    pub mu: [f64; 2],
    pub a: [[f64; 2]; 2],
    pub c0: [f64; 2],
    pub c1: [f64; 2],
    pub d: [f64; 2],
    pub e: [f64; 2],
    pub tau: [[f64; 2]; 2],
    pub sigma: [f64; 2],
}

impl PlanarCharacteristic {
    /// Total gain `c_i = c_i^0 + c_i^1`.
    pub fn gain(&self, i: usize) -> f64 {
        self.c0[i] + self.c1[i]
    }

    /// Diagonal weight `lambda_i = mu_i + c_i d_i / e_i`.
    pub fn lambda(&self, i: usize) -> f64 {
        self.mu[i] + self.gain(i) * self.d[i] / self.e[i]
    }

    /// The two rational roots of the boundary bundle: the control decay
    /// `-e_2` and the transversal growth rate `b_2 - a_21 X_1`.
    pub fn boundary_extra_roots(&self) -> [f64; 2] {
        [-self.e[1], self.b[1] - self.a[1][0] * self.x[0]]
    }

    /// Diagonal block coupling `(delta x_i, delta u_i)` through the
    /// delayed self-interaction and both gain channels.
    fn species_block(&self, i: usize, lambda: C64) -> Matrix2<C64> {
        let xi = self.x[i];
        let diag = C64::from(xi * self.mu[i])
            + C64::from(xi * self.a[i][i]) * (-lambda * self.tau[i][i]).exp();
        let gains = C64::from(xi * self.c0[i])
            + C64::from(xi * self.c1[i]) * (-lambda * self.sigma[i]).exp();
        Matrix2::new(
            diag,
            gains,
            C64::from(-self.d[i]),
            C64::from(self.e[i]),
        )
    }

    /// Cross block feeding species `j` into species `i`.
    fn coupling_block(&self, i: usize, j: usize, lambda: C64) -> Matrix2<C64> {
        let top = C64::from(self.x[i] * self.a[i][j]) * (-lambda * self.tau[i][j]).exp();
        Matrix2::new(top, C64::from(0.0), C64::from(0.0), C64::from(0.0))
    }

    /// The full matrix whose determinant is the characteristic function:
    /// `lambda I_4` plus the assembled linearization blocks.
    pub fn delta(&self, lambda: C64) -> Matrix4<C64> {
        let n1 = self.species_block(0, lambda);
        let e1 = self.coupling_block(0, 1, lambda);
        let (lower_left, lower_right) = match self.kind {
            EquilibriumKind::Interior => {
                (self.coupling_block(1, 0, lambda), self.species_block(1, lambda))
            }
            EquilibriumKind::Boundary => {
                let growth = self.b[1] - self.a[1][0] * self.x[0];
                let c = Matrix2::new(
                    C64::from(-growth),
                    C64::from(0.0),
                    C64::from(-self.d[1]),
                    C64::from(self.e[1]),
                );
                (Matrix2::zeros(), c)
            }
        };
        let mut full = Matrix4::zeros();
        full.fixed_view_mut::<2, 2>(0, 0).copy_from(&n1);
        full.fixed_view_mut::<2, 2>(0, 2).copy_from(&e1);
        full.fixed_view_mut::<2, 2>(2, 0).copy_from(&lower_left);
        full.fixed_view_mut::<2, 2>(2, 2).copy_from(&lower_right);
        full + Matrix4::identity() * lambda
    }

    /// Transcendental factor of the boundary bundle:
    /// `P(lambda) + e^{-lambda tau_11} Q(lambda) + X_1 d_1 c_1^1
    /// e^{-lambda sigma_1}` with `P` quadratic and `Q` affine.
    pub fn boundary_h(&self, lambda: C64) -> C64 {
        let x1 = self.x[0];
        let p = lambda * lambda
            + lambda * (self.e[0] + x1 * self.mu[0])
            + C64::from(x1 * (self.mu[0] * self.e[0] + self.d[0] * self.c0[0]));
        let q = C64::from(self.a[0][0] * x1) * (lambda + C64::from(self.e[0]));
        p + (-lambda * self.tau[0][0]).exp() * q
            + C64::from(x1 * self.d[0] * self.c1[0]) * (-lambda * self.sigma[0]).exp()
    }

    /// Interior-bundle determinant with the gain channels removed: the
    /// two-by-two species determinant left by the vanishing-control limit.
    pub fn reduced_interior_h(&self, lambda: C64) -> C64 {
        let diag = |i: usize| {
            lambda
                + C64::from(self.x[i] * self.mu[i])
                + C64::from(self.x[i] * self.a[i][i]) * (-lambda * self.tau[i][i]).exp()
        };
        let off = |i: usize, j: usize| {
            C64::from(self.x[i] * self.a[i][j]) * (-lambda * self.tau[i][j]).exp()
        };
        diag(0) * diag(1) - off(0, 1) * off(1, 0)
    }

    /// Delay-free linearization matrix (every exponential replaced by 1).
    pub fn delay_free_matrix(&self) -> Matrix4<f64> {
        self.delta(C64::from(0.0)).map(|z| z.re)
    }
}

/// Determinant of the assembled characteristic matrix at `lambda`.
pub fn char_det(pc: &PlanarCharacteristic, lambda: C64) -> C64 {
    pc.delta(lambda).determinant()
}

/// Map a two-species discrete-delay spec onto the coefficient bundle.
/// Active interaction kernels must be single point masses; control kernels
/// may combine an atom at zero with one delayed atom. `x_star` is the
/// equilibrium the bundle linearizes about (`x_star[1] = 0` for the
/// boundary bundle).
pub fn from_spec(
    spec: &SystemSpec,
    kind: EquilibriumKind,
    x_star: [f64; 2],
) -> Result<PlanarCharacteristic, SpectralError> {
    if spec.n() != 2 {
        return Err(SpectralError::InvalidRegime(format!(
            "planar analysis needs exactly 2 species, got {}",
            spec.n()
        )));
    }
    let mut tau = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            if spec.a[i][j] == 0.0 {
                continue;
            }
            match spec.kernel(i, j) {
                Kernel::Point { atoms } if atoms.len() == 1 => {
                    tau[i][j] = atoms[0].delay;
                }
                other => {
                    return Err(SpectralError::UnsupportedKernel(format!(
                        "interaction kernel ({}, {}) must be a single point mass, got {other:?}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
    }
    let mut c0 = [0.0; 2];
    let mut c1 = [0.0; 2];
    let mut sigma = [0.0; 2];
    for i in 0..2 {
        if spec.c[i] == 0.0 {
            continue;
        }
        match &spec.g[i] {
            Kernel::Point { atoms } => {
                let mut delayed: Option<(f64, f64)> = None;
                for atom in atoms {
                    if atom.delay == 0.0 {
                        c0[i] += spec.c[i] * atom.weight;
                    } else if delayed.is_none() {
                        delayed = Some((atom.delay, atom.weight));
                    } else {
                        return Err(SpectralError::UnsupportedKernel(format!(
                            "control kernel {} has more than one delayed atom",
                            i + 1
                        )));
                    }
                }
                if let Some((delay, weight)) = delayed {
                    sigma[i] = delay;
                    c1[i] = spec.c[i] * weight;
                }
            }
            other => {
                return Err(SpectralError::UnsupportedKernel(format!(
                    "control kernel {} must be a point mixture, got {other:?}",
                    i + 1
                )));
            }
        }
    }
    Ok(PlanarCharacteristic {
        kind,
        x: x_star,
        b: [spec.b[0], spec.b[1]],
        mu: [spec.mu[0], spec.mu[1]],
        a: [
            [spec.a[0][0], spec.a[0][1]],
            [spec.a[1][0], spec.a[1][1]],
        ],
        c0,
        c1,
        d: [spec.d[0], spec.d[1]],
        e: [spec.e[0], spec.e[1]],
        tau,
        sigma,
    })
}

// ---------------------------------------------------------------------------
// Hopf thresholds
// ---------------------------------------------------------------------------

/// The reduced interior characteristic function of the symmetric
/// construction: `(lambda + b)^2 + c e^{-lambda tau}`.
pub fn hopf_h(b: f64, c: f64, tau: f64, lambda: C64) -> C64 {
    let shifted = lambda + C64::from(b);
    shifted * shifted + C64::from(c) * (-lambda * tau).exp()
}

/// The crossing frequency and the delay sequence at which purely imaginary
/// roots appear.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HopfThresholds {
    /// Crossing frequency `omega = sqrt(c - b^2)`.
    pub omega: f64,
    /// Base angle in `(0, pi)`.
    pub theta0: f64,
    /// `tau_n = (theta0 + 2 n pi) / omega`, `n = 0..=n_max`.
    pub taus: Vec<f64>,
}

impl HopfThresholds {
    /// Constant spacing between consecutive thresholds.
    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

/// Delay values at which `(lambda + b)^2 + c e^{-lambda tau}` has roots
/// `+- i omega`. Each returned threshold is re-verified on the imaginary
/// axis against [`ROOT_TOL`].
pub fn hopf_thresholds(b: f64, c: f64, n_max: usize) -> Result<HopfThresholds, SpectralError> {
    if !(b > 0.0) {
        return Err(SpectralError::InvalidRegime(format!(
            "growth scale must be positive, got {b}"
        )));
    }
    if c <= b * b {
        return Err(SpectralError::NoCrossing { b, c });
    }
    let omega = (c - b * b).sqrt();
    // h(i omega) = 0 forces c e^{-i omega tau} = (c - 2b^2) - 2 i b omega,
    // a point of modulus exactly c, so the angle is well-defined and lies
    // in (0, pi) because its sine is positive.
    let theta0 = (2.0 * b * omega).atan2(c - 2.0 * b * b);
    let taus: Vec<f64> = (0..=n_max)
        .map(|n| (theta0 + 2.0 * n as f64 * std::f64::consts::PI) / omega)
        .collect();
    for &tau in &taus {
        let residual = hopf_h(b, c, tau, C64::new(0.0, omega)).norm();
        if residual >= ROOT_TOL {
            return Err(SpectralError::Verification { tau, residual });
        }
    }
    Ok(HopfThresholds { omega, theta0, taus })
}

/// Realize the symmetric interior construction as a runnable spec: equal
/// equilibrium components `sqrt(c)`, no self-interaction delay terms,
/// cross-interactions `+1/-1` with the whole delay budget `tau` on the
/// first cross slot, and vanishingly small control gains standing in for
/// the zero-gain limit.
pub fn build_hopf_fixture(b: f64, c: f64, tau: f64) -> Result<SystemSpec, SpectralError> {
    if !(b > 0.0) || c <= b * b {
        return Err(SpectralError::InvalidRegime(format!(
            "need c > b^2 > 0, got b = {b}, c = {c}"
        )));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(SpectralError::InvalidRegime(format!(
            "delay must be finite and non-negative, got {tau}"
        )));
    }
    let root = c.sqrt();
    let mu = b / root;
    let zero = Kernel::point(0.0).unwrap();
    let spec = SystemSpec::new(
        vec![b + root, b - root],
        vec![mu, mu],
        vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
        vec![
            zero.clone(),
            Kernel::point(tau).unwrap(),
            zero.clone(),
            zero.clone(),
        ],
        vec![HOPF_GAIN, HOPF_GAIN],
        vec![1.0, 1.0],
        vec![1.0, 1.0],
        vec![zero.clone(), zero],
    )
    .map_err(|e| SpectralError::InvalidRegime(e.to_string()))?;
    Ok(spec)
}
