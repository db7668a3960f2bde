//! System description and initial data.
//!
//! A [`SystemSpec`] holds the coefficients of the n-species model
//!
//! ```text
//! x_i'(t) = x_i(t) ( b_i - mu_i x_i(t) - Σ_j a_ij ∫ K_ij(s) x_j(t-s) ds
//!                     - c_i ∫ G_i(s) u_i(t-s) ds - h_i(t) )
//! u_i'(t) = -e_i u_i(t) + d_i x_i(t)
//! ```
//!
//! with every delay kernel normalized to mass 1. Control gains are either
//! all positive (controlled system) or all zero, in which case the `u_i`
//! are passive trackers that do not feed back into the species equations.

use crate::kernel::{Kernel, KernelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("system must have at least one species")]
    Empty,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),
}

/// Uniformly sampled function of time, linearly interpolated and zero
/// outside `[0, step·(len-1)]`. Used for the decaying disturbances `h_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    pub step: f64,
    pub values: Vec<f64>,
}

impl Tabulated {
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 || self.values.len() < 2 {
            return 0.0;
        }
        let horizon = self.step * (self.values.len() - 1) as f64;
        if t >= horizon {
            return 0.0;
        }
        let pos = t / self.step;
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        let frac = pos - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}

/// Full parameter set of the delayed system.
///
/// `a` and `k` are row-major `n × n`; `k[i][j]` is the kernel weighting the
/// delayed influence of species `j` on species `i`. Slots whose coefficient
/// `a[i][j]` is zero never enter the dynamics and are only loosely checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    /// Intrinsic growth rates `b_i` (any sign).
    pub b: Vec<f64>,
    /// Instantaneous self-limitation `mu_i > 0`.
    pub mu: Vec<f64>,
    /// Delayed interaction coefficients `a_ij`.
    pub a: Vec<Vec<f64>>,
    /// Interaction kernels `K_ij`, row-major.
    pub k: Vec<Kernel>,
    /// Control gains `c_i`; all positive or all zero.
    pub c: Vec<f64>,
    /// Control drive coefficients `d_i > 0`.
    pub d: Vec<f64>,
    /// Control decay rates `e_i > 0`.
    pub e: Vec<f64>,
    /// Control kernels `G_i`.
    pub g: Vec<Kernel>,
    /// Optional additive disturbances `h_i(t)`, zero when absent.
    #[serde(default)]
    pub h: Vec<Option<Tabulated>>,
}

impl SystemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        b: Vec<f64>,
        mu: Vec<f64>,
        a: Vec<Vec<f64>>,
        k: Vec<Kernel>,
        c: Vec<f64>,
        d: Vec<f64>,
        e: Vec<f64>,
        g: Vec<Kernel>,
    ) -> Result<Self, ModelError> {
        let n = b.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        let check = |what: &'static str, got: usize, expected: usize| {
            if got == expected {
                Ok(())
            } else {
                Err(ModelError::Dimension { what, expected, got })
            }
        };
        check("mu", mu.len(), n)?;
        check("a (rows)", a.len(), n)?;
        for row in &a {
            check("a (row length)", row.len(), n)?;
        }
        check("k", k.len(), n * n)?;
        check("c", c.len(), n)?;
        check("d", d.len(), n)?;
        check("e", e.len(), n)?;
        check("g", g.len(), n)?;
        Ok(SystemSpec {
            b,
            mu,
            a,
            k,
            c,
            d,
            e,
            g,
            h: vec![None; n],
        })
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// Interaction kernel `K_ij`.
    pub fn kernel(&self, i: usize, j: usize) -> &Kernel {
        &self.k[i * self.n() + j]
    }

    pub fn kernel_mut(&mut self, i: usize, j: usize) -> &mut Kernel {
        let n = self.n();
        &mut self.k[i * n + j]
    }

    /// Effective control pressure `c_i d_i / e_i` entering the community
    /// matrix diagonal.
    pub fn alpha(&self, i: usize) -> f64 {
        self.c[i] * self.d[i] / self.e[i]
    }

    /// All control gains positive.
    pub fn is_controlled(&self) -> bool {
        self.c.iter().all(|&ci| ci > 0.0)
    }

    /// All control gains zero: the `u_i` are passive trackers.
    pub fn is_uncontrolled(&self) -> bool {
        self.c.iter().all(|&ci| ci == 0.0)
    }

    pub fn with_perturbation(mut self, i: usize, h: Tabulated) -> Self {
        self.h[i] = Some(h);
        self
    }

    pub fn has_perturbation(&self) -> bool {
        self.h.iter().any(|h| h.is_some())
    }

    /// History span needed so that every kernel slot that enters the
    /// dynamics sees at most `tol` of its mass beyond the span.
    pub fn required_history_horizon(&self, tol: f64) -> f64 {
        let n = self.n();
        let mut s: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if self.a[i][j] != 0.0 {
                    s = s.max(self.kernel(i, j).horizon_for_tail(tol));
                }
            }
            if self.c[i] > 0.0 {
                s = s.max(self.g[i].horizon_for_tail(tol));
            }
        }
        s
    }

    /// Relabel species: `perm[new] = old`. Kernels, controls and
    /// disturbances move with their species.
    pub fn permuted(&self, perm: &[usize]) -> SystemSpec {
        let n = self.n();
        assert_eq!(perm.len(), n, "permutation length mismatch");
        let pick = |v: &Vec<f64>| perm.iter().map(|&o| v[o]).collect::<Vec<_>>();
        let mut a = vec![vec![0.0; n]; n];
        let mut k = Vec::with_capacity(n * n);
        for (ni, &oi) in perm.iter().enumerate() {
            for (nj, &oj) in perm.iter().enumerate() {
                a[ni][nj] = self.a[oi][oj];
                k.push(self.kernel(oi, oj).clone());
            }
        }
        SystemSpec {
            b: pick(&self.b),
            mu: pick(&self.mu),
            a,
            k,
            c: pick(&self.c),
            d: pick(&self.d),
            e: pick(&self.e),
            g: perm.iter().map(|&o| self.g[o].clone()).collect(),
            h: perm.iter().map(|&o| self.h[o].clone()).collect(),
        }
    }
}

/// Structural admissibility of a control kernel: the delayed control term
/// must respond to any history that is positive at the present moment, so
/// the kernel needs mass in every neighborhood of zero. Holds for an atom
/// at delay 0, for exponential and Erlang densities (positive on `(0, ∞)`),
/// and for tables whose first node is positive.
pub fn validate_control_kernel(g: &Kernel) -> bool {
    g.positive_near_zero()
}

/// One semantic problem found in a spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    /// Dotted path of the offending field, 1-based species indices.
    pub field: String,
    pub message: String,
}

/// Outcome of [`validate`]: empty iff the spec is usable.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: String, message: impl Into<String>) {
        self.violations.push(Violation {
            field,
            message: message.into(),
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

/// Semantic checks beyond plain dimensions: sign constraints, kernel
/// normalization, the no-atom-at-zero convention on active diagonal
/// kernels, and control-kernel admissibility on controlled systems.
pub fn validate(spec: &SystemSpec) -> ValidationReport {
    let n = spec.n();
    let mut report = ValidationReport::default();
    for i in 0..n {
        let sp = i + 1;
        if !(spec.mu[i] > 0.0) || !spec.mu[i].is_finite() {
            report.push(
                format!("species.{sp}.mu"),
                format!("self-limitation must be positive, got {}", spec.mu[i]),
            );
        }
        if !spec.b[i].is_finite() {
            report.push(format!("species.{sp}.b"), "growth rate must be finite");
        }
        if !(spec.d[i] > 0.0) || !spec.d[i].is_finite() {
            report.push(
                format!("controls.{sp}.d"),
                format!("drive coefficient must be positive, got {}", spec.d[i]),
            );
        }
        if !(spec.e[i] > 0.0) || !spec.e[i].is_finite() {
            report.push(
                format!("controls.{sp}.e"),
                format!("decay rate must be positive, got {}", spec.e[i]),
            );
        }
        if !(spec.c[i] >= 0.0) || !spec.c[i].is_finite() {
            report.push(
                format!("controls.{sp}.c"),
                format!("gain must be non-negative, got {}", spec.c[i]),
            );
        }
    }
    if !spec.is_controlled() && !spec.is_uncontrolled() {
        report.push(
            "controls".into(),
            "control gains must be all positive or all zero",
        );
    }
    for i in 0..n {
        for j in 0..n {
            if !spec.a[i][j].is_finite() {
                report.push(
                    format!("interaction.a[{}][{}]", i + 1, j + 1),
                    "coefficient must be finite",
                );
            }
            let field = format!("kernels.{}.{}", i + 1, j + 1);
            if let Err(err) = spec.kernel(i, j).validate() {
                report.push(field.clone(), err.to_string());
            }
            if i == j && spec.a[i][j] != 0.0 && spec.kernel(i, j).has_atom_at_zero() {
                report.push(
                    field,
                    "active diagonal kernel must carry no point mass at delay 0 \
                     (fold such mass into mu instead)",
                );
            }
        }
        let field = format!("controls.{}.kernel", i + 1);
        if let Err(err) = spec.g[i].validate() {
            report.push(field.clone(), err.to_string());
        }
        if spec.c[i] > 0.0 && !validate_control_kernel(&spec.g[i]) {
            report.push(
                field,
                "control kernel assigns no mass near delay 0, so the control \
                 never responds to the present state",
            );
        }
        if let Some(h) = &spec.h[i] {
            let field = format!("perturbation.{}", i + 1);
            if !(h.step > 0.0) || !h.step.is_finite() {
                report.push(field.clone(), format!("step must be positive, got {}", h.step));
            }
            if h.values.iter().any(|v| !v.is_finite()) {
                report.push(field, "samples must be finite");
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

/// One bounded continuous history on `(-∞, 0]`: uniform samples on
/// `[-horizon, 0]`, cubic interpolation between nodes, constant value
/// `values[0]` further into the past.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistorySegment {
    step: f64,
    /// `values[j]` is the history at `-horizon + j·step`; the last entry is
    /// the value at time 0.
    values: Vec<f64>,
}

impl HistorySegment {
    pub fn constant(value: f64, horizon: f64, step: f64) -> Self {
        let nodes = ((horizon / step).ceil() as usize).max(1) + 1;
        HistorySegment {
            step,
            values: vec![value; nodes],
        }
    }

    /// Sample `f` at the grid nodes; `f` receives non-positive times.
    pub fn from_fn(f: impl Fn(f64) -> f64, horizon: f64, step: f64) -> Self {
        let nodes = ((horizon / step).ceil() as usize).max(1) + 1;
        let span = step * (nodes - 1) as f64;
        let values = (0..nodes).map(|j| f(j as f64 * step - span)).collect();
        HistorySegment { step, values }
    }

    pub fn horizon(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at_zero(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    /// Evaluate at `t ≤ 0`. Piecewise-cubic with centered-difference slopes
    /// (one-sided at the ends); exact on quadratic data.
    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t <= 1e-12, "history queried at positive time {t}");
        let span = self.horizon();
        if t <= -span {
            return self.values[0];
        }
        if t >= 0.0 {
            return self.at_zero();
        }
        let m = self.values.len();
        if m == 1 {
            return self.values[0];
        }
        let pos = (t + span) / self.step;
        let cell = (pos.floor() as usize).min(m - 2);
        let theta = pos - cell as f64;
        let v = &self.values;
        // Per-cell slopes in the unit parameter; second-order one-sided
        // formulas keep the ends exact on quadratics.
        let slope = |j: usize| -> f64 {
            if j == 0 {
                if m >= 3 {
                    0.5 * (-3.0 * v[0] + 4.0 * v[1] - v[2])
                } else {
                    v[1] - v[0]
                }
            } else if j == m - 1 {
                if m >= 3 {
                    0.5 * (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3])
                } else {
                    v[m - 1] - v[m - 2]
                }
            } else {
                0.5 * (v[j + 1] - v[j - 1])
            }
        };
        let (y0, y1) = (v[cell], v[cell + 1]);
        let (m0, m1) = (slope(cell), slope(cell + 1));
        let t2 = theta * theta;
        let t3 = t2 * theta;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + theta) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }
}

/// Initial histories for all species (`x`) and controls (`u`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub x: Vec<HistorySegment>,
    pub u: Vec<HistorySegment>,
}

/// Default sampling range for seeded constant histories.
pub const SEEDED_RANGE: (f64, f64) = (0.1, 2.0);

impl InitialData {
    pub fn constant(x0: &[f64], u0: &[f64]) -> Self {
        Self::constant_with(x0, u0, 1.0, 0.25)
    }

    pub fn constant_with(x0: &[f64], u0: &[f64], horizon: f64, step: f64) -> Self {
        InitialData {
            x: x0.iter().map(|&v| HistorySegment::constant(v, horizon, step)).collect(),
            u: u0.iter().map(|&v| HistorySegment::constant(v, horizon, step)).collect(),
        }
    }

    /// Constant histories with per-component levels drawn uniformly from
    /// `range`, reproducible from `seed`. Species values are drawn first,
    /// then control values.
    pub fn seeded_constant(seed: u64, n: usize, range: (f64, f64)) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |count: usize| -> Vec<f64> {
            (0..count).map(|_| rng.random_range(range.0..=range.1)).collect()
        };
        let x0 = draw(n);
        let u0 = draw(n);
        Self::constant(&x0, &u0)
    }

    pub fn eval_x(&self, i: usize, t: f64) -> f64 {
        self.x[i].eval(t)
    }

    pub fn eval_u(&self, i: usize, t: f64) -> f64 {
        self.u[i].eval(t)
    }

    /// Admissibility: non-negative histories, strictly positive present
    /// values for both species and controls, matching dimensions.
    pub fn check_admissible(&self, n: usize) -> Result<(), ModelError> {
        if self.x.len() != n {
            return Err(ModelError::Dimension {
                what: "initial species histories",
                expected: n,
                got: self.x.len(),
            });
        }
        if self.u.len() != n {
            return Err(ModelError::Dimension {
                what: "initial control histories",
                expected: n,
                got: self.u.len(),
            });
        }
        for (i, seg) in self.x.iter().enumerate() {
            if seg.min_value() < 0.0 {
                return Err(ModelError::InvalidInitialData(format!(
                    "species {} history dips below zero",
                    i + 1
                )));
            }
            if !(seg.at_zero() > 0.0) {
                return Err(ModelError::InvalidInitialData(format!(
                    "species {} history must be positive at time 0",
                    i + 1
                )));
            }
        }
        for (i, seg) in self.u.iter().enumerate() {
            if seg.min_value() < 0.0 {
                return Err(ModelError::InvalidInitialData(format!(
                    "control {} history dips below zero",
                    i + 1
                )));
            }
            if !(seg.at_zero() > 0.0) {
                return Err(ModelError::InvalidInitialData(format!(
                    "control {} history must be positive at time 0",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}
