//! Delay kernels for the distributed interaction and control terms.
//!
//! Every kernel is a non-negative measure on `[0, ∞)` normalized to total
//! mass 1. Four shapes are supported:
//!
//! * [`Kernel::Point`] -- a finite mixture of point masses (discrete delays),
//! * [`Kernel::Exponential`] -- density `α e^{-αs}`,
//! * [`Kernel::Erlang`] -- density `α^k s^{k-1} e^{-αs} / (k-1)!`,
//! * [`Kernel::Table`] -- a tabulated density on a uniform grid, truncated at
//!   the last node and integrated with the composite trapezoid rule.
//!
//! Constructors normalize and reject malformed input; kernels deserialized
//! from external documents must be checked with [`Kernel::validate`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the numerically integrated total mass of a kernel.
pub const MASS_TOL: f64 = 1e-12;

/// Default bound on the kernel mass that may lie beyond the truncation
/// horizon used for history storage and quadrature.
pub const TAIL_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("point-mass atom {index} has negative delay {delay}")]
    NegativeDelay { index: usize, delay: f64 },
    #[error("point-mass atom {index} has negative weight {weight}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("kernel has non-positive total mass {0}")]
    NonPositiveMass(f64),
    #[error("rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("erlang order must be at least 1")]
    BadOrder,
    #[error("table step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("table density at node {index} is invalid ({value})")]
    BadDensity { index: usize, value: f64 },
    #[error("table needs at least two nodes, got {0}")]
    TableTooShort(usize),
    #[error("kernel mass {mass} deviates from 1 by more than {tol}")]
    Unnormalized { mass: f64, tol: f64 },
}

/// One discrete delay with its weight. Weights of a [`Kernel::Point`] sum to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub delay: f64,
    pub weight: f64,
}

/// A normalized delay kernel on `[0, ∞)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// Finite mixture of point masses, sorted by delay.
    Point { atoms: Vec<Atom> },
    /// Density `rate · e^{-rate·s}`.
    Exponential { rate: f64 },
    /// Density `rate^order · s^{order-1} e^{-rate·s} / (order-1)!`.
    Erlang { rate: f64, order: u32 },
    /// Piecewise-linear density sampled at `s = k·step`, zero beyond the
    /// last node. Normalized so the composite trapezoid mass is exactly 1.
    Table { step: f64, densities: Vec<f64> },
}

impl Kernel {
    /// Single discrete delay `τ ≥ 0` with weight 1.
    pub fn point(delay: f64) -> Result<Self, KernelError> {
        Self::point_mixture(&[(delay, 1.0)])
    }

    /// Mixture of point masses; weights are normalized to sum to 1.
    /// Atoms are sorted by delay and coincident delays are merged, so the
    /// representation is canonical.
    pub fn point_mixture(atoms: &[(f64, f64)]) -> Result<Self, KernelError> {
        for (i, &(delay, weight)) in atoms.iter().enumerate() {
            if !(delay >= 0.0) || !delay.is_finite() {
                return Err(KernelError::NegativeDelay { index: i, delay });
            }
            if !(weight >= 0.0) || !weight.is_finite() {
                return Err(KernelError::NegativeWeight { index: i, weight });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(KernelError::NonPositiveMass(total));
        }
        // Skip the rescale when the mass is already unit so that building
        // from normalized parameters is the identity (round-trip safety).
        let scale = if (total - 1.0).abs() <= MASS_TOL { 1.0 } else { total };
        let mut sorted: Vec<(f64, f64)> = atoms.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<Atom> = Vec::with_capacity(sorted.len());
        for (delay, weight) in sorted {
            if weight == 0.0 {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.delay == delay => last.weight += weight / scale,
                _ => merged.push(Atom { delay, weight: weight / scale }),
            }
        }
        Ok(Kernel::Point { atoms: merged })
    }

    pub fn exponential(rate: f64) -> Result<Self, KernelError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(KernelError::BadRate(rate));
        }
        Ok(Kernel::Exponential { rate })
    }

    pub fn erlang(rate: f64, order: u32) -> Result<Self, KernelError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(KernelError::BadRate(rate));
        }
        if order < 1 {
            return Err(KernelError::BadOrder);
        }
        Ok(Kernel::Erlang { rate, order })
    }

    /// Tabulated density at nodes `0, step, 2·step, …`; the raw values are
    /// rescaled so the trapezoid mass over the grid equals 1 exactly.
    pub fn table(step: f64, densities: &[f64]) -> Result<Self, KernelError> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(KernelError::BadStep(step));
        }
        if densities.len() < 2 {
            return Err(KernelError::TableTooShort(densities.len()));
        }
        for (index, &value) in densities.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(KernelError::BadDensity { index, value });
            }
        }
        let raw_mass = trapezoid_mass(step, densities);
        if !(raw_mass > 0.0) {
            return Err(KernelError::NonPositiveMass(raw_mass));
        }
        // Identity on already-normalized tables, for round-trip safety.
        let scale = if (raw_mass - 1.0).abs() <= MASS_TOL { 1.0 } else { raw_mass };
        Ok(Kernel::Table {
            step,
            densities: densities.iter().map(|d| d / scale).collect(),
        })
    }

    /// Structural re-check for kernels built outside the constructors
    /// (e.g. deserialized): shape constraints plus `|mass - 1| ≤ MASS_TOL`.
    pub fn validate(&self) -> Result<(), KernelError> {
        match self {
            Kernel::Point { atoms } => {
                for (i, a) in atoms.iter().enumerate() {
                    if !(a.delay >= 0.0) || !a.delay.is_finite() {
                        return Err(KernelError::NegativeDelay { index: i, delay: a.delay });
                    }
                    if !(a.weight >= 0.0) || !a.weight.is_finite() {
                        return Err(KernelError::NegativeWeight { index: i, weight: a.weight });
                    }
                }
            }
            Kernel::Exponential { rate } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(KernelError::BadRate(*rate));
                }
            }
            Kernel::Erlang { rate, order } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(KernelError::BadRate(*rate));
                }
                if *order < 1 {
                    return Err(KernelError::BadOrder);
                }
            }
            Kernel::Table { step, densities } => {
                if !(*step > 0.0) || !step.is_finite() {
                    return Err(KernelError::BadStep(*step));
                }
                if densities.len() < 2 {
                    return Err(KernelError::TableTooShort(densities.len()));
                }
                for (index, &value) in densities.iter().enumerate() {
                    if !(value >= 0.0) || !value.is_finite() {
                        return Err(KernelError::BadDensity { index, value });
                    }
                }
            }
        }
        let mass = self.mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(KernelError::Unnormalized { mass, tol: MASS_TOL });
        }
        Ok(())
    }

    /// Numerically integrated total mass (exact for the analytic shapes,
    /// composite trapezoid for tables, weight sum for point mixtures).
    pub fn mass(&self) -> f64 {
        match self {
            Kernel::Point { atoms } => atoms.iter().map(|a| a.weight).sum(),
            Kernel::Exponential { .. } | Kernel::Erlang { .. } => 1.0,
            Kernel::Table { step, densities } => trapezoid_mass(*step, densities),
        }
    }

    /// Mass lying strictly beyond `s`.
    pub fn tail_mass(&self, s: f64) -> f64 {
        if s < 0.0 {
            return self.mass();
        }
        match self {
            Kernel::Point { atoms } => {
                atoms.iter().filter(|a| a.delay > s).map(|a| a.weight).sum()
            }
            Kernel::Exponential { rate } => (-rate * s).exp(),
            Kernel::Erlang { rate, order } => erlang_upper_tail(*order, rate * s),
            Kernel::Table { step, densities } => table_tail_mass(*step, densities, s),
        }
    }

    /// Smallest horizon `S` with `tail_mass(S) ≤ tol` (up to bisection
    /// resolution for Erlang kernels).
    pub fn horizon_for_tail(&self, tol: f64) -> f64 {
        assert!(tol > 0.0, "tail tolerance must be positive");
        match self {
            Kernel::Point { atoms } => atoms.last().map_or(0.0, |a| a.delay),
            Kernel::Exponential { rate } => (1.0 / tol).ln() / rate,
            Kernel::Erlang { rate, order } => {
                // Tail is decreasing; expand then bisect.
                let mut hi = (*order as f64 + 1.0) / rate;
                while erlang_upper_tail(*order, rate * hi) > tol {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if erlang_upper_tail(*order, rate * mid) > tol {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
            Kernel::Table { step, densities } => *step * (densities.len() - 1) as f64,
        }
    }

    /// Largest discrete delay, if the kernel is a point mixture.
    pub fn max_point_delay(&self) -> Option<f64> {
        match self {
            Kernel::Point { atoms } => atoms.last().map(|a| a.delay),
            _ => None,
        }
    }

    /// Whether the kernel carries a point mass at delay 0.
    pub fn has_atom_at_zero(&self) -> bool {
        match self {
            Kernel::Point { atoms } => atoms.iter().any(|a| a.delay == 0.0 && a.weight > 0.0),
            _ => false,
        }
    }

    /// Structural test that the kernel assigns positive mass to every
    /// neighborhood of zero: an atom at 0, a density that is positive on
    /// `(0, ∞)`, or a table whose first node is positive.
    pub fn positive_near_zero(&self) -> bool {
        match self {
            Kernel::Point { .. } => self.has_atom_at_zero(),
            Kernel::Exponential { .. } | Kernel::Erlang { .. } => true,
            Kernel::Table { densities, .. } => densities[0] > 0.0,
        }
    }

    /// Density value at `s` for the absolutely continuous shapes
    /// (`None` for point mixtures).
    pub fn density_at(&self, s: f64) -> Option<f64> {
        if s < 0.0 {
            return match self {
                Kernel::Point { .. } => None,
                _ => Some(0.0),
            };
        }
        match self {
            Kernel::Point { .. } => None,
            Kernel::Exponential { rate } => Some(rate * (-rate * s).exp()),
            Kernel::Erlang { rate, order } => {
                let k = *order as i32;
                let mut v = rate * (-rate * s).exp();
                for j in 1..k {
                    v *= rate * s / j as f64;
                }
                Some(v)
            }
            Kernel::Table { step, densities } => {
                let horizon = step * (densities.len() - 1) as f64;
                if s > horizon {
                    return Some(0.0);
                }
                let pos = s / step;
                let k = (pos.floor() as usize).min(densities.len() - 2);
                let frac = pos - k as f64;
                Some(densities[k] * (1.0 - frac) + densities[k + 1] * frac)
            }
        }
    }
}

/// Composite trapezoid mass of a uniformly sampled density.
pub fn trapezoid_mass(step: f64, densities: &[f64]) -> f64 {
    if densities.len() < 2 {
        return 0.0;
    }
    let interior: f64 = densities[1..densities.len() - 1].iter().sum();
    step * (0.5 * (densities[0] + densities[densities.len() - 1]) + interior)
}

/// Regularized upper incomplete gamma `Q(k, x) = e^{-x} Σ_{j<k} x^j / j!`
/// for integer `k ≥ 1`: the Erlang(rate, k) mass beyond `s = x / rate`.
pub fn erlang_upper_tail(order: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..order {
        term *= x / j as f64;
        sum += term;
    }
    ((-x).exp() * sum).min(1.0)
}

fn table_tail_mass(step: f64, densities: &[f64], s: f64) -> f64 {
    let horizon = step * (densities.len() - 1) as f64;
    if s >= horizon {
        return 0.0;
    }
    if s <= 0.0 {
        return trapezoid_mass(step, densities);
    }
    let pos = s / step;
    let k = (pos.floor() as usize).min(densities.len() - 2);
    let frac = pos - k as f64;
    let at_s = densities[k] * (1.0 - frac) + densities[k + 1] * frac;
    // Partial cell [s, (k+1)·step], then full trapezoid cells to the end.
    let mut tail = 0.5 * (at_s + densities[k + 1]) * (step * (k + 1) as f64 - s);
    for m in (k + 1)..densities.len() - 1 {
        tail += 0.5 * (densities[m] + densities[m + 1]) * step;
    }
    tail
}
