//! Built-in reference systems used by the test suites, the documentation
//! and the CLI fixtures. All delay structure is explicit so the same
//! systems exercise discrete, exponential, Erlang and tabulated kernels.

use crate::kernel::Kernel;
use crate::model::SystemSpec;

/// Competitive two-species system with a degenerate boundary equilibrium:
/// `b = (1, 1/3)`, `mu = (1, 1)`, `a = [[1/2, 1/8], [1/2, 1/2]]`, all
/// interaction delays 0.5. Control pressure `alpha = c_i d_i / e_i` is set
/// through the gains with `d = e = 1`; `alpha = 0` turns the controls into
/// passive trackers.
pub fn competitive_pair(alpha: f64) -> SystemSpec {
    let delay = Kernel::point(0.5).unwrap();
    SystemSpec::new(
        vec![1.0, 1.0 / 3.0],
        vec![1.0, 1.0],
        vec![vec![0.5, 0.125], vec![0.5, 0.5]],
        vec![delay.clone(), delay.clone(), delay.clone(), delay],
        vec![alpha, alpha],
        vec![1.0, 1.0],
        vec![1.0, 1.0],
        vec![
            Kernel::exponential(1.0).unwrap(),
            Kernel::exponential(1.0).unwrap(),
        ],
    )
    .unwrap()
}

/// Predator-prey style pair: `b = (1, -5/4)`, `a = [[1/2, 1/8], [-2, 1/2]]`,
/// interaction delays 0.5, mixed Erlang/exponential control kernels.
/// Gains are `alpha_i` with `d = e = 1`.
pub fn predator_prey_pair(alpha1: f64, alpha2: f64) -> SystemSpec {
    let delay = Kernel::point(0.5).unwrap();
    SystemSpec::new(
        vec![1.0, -1.25],
        vec![1.0, 1.0],
        vec![vec![0.5, 0.125], vec![-2.0, 0.5]],
        vec![delay.clone(), delay.clone(), delay.clone(), delay],
        vec![alpha1, alpha2],
        vec![1.0, 1.0],
        vec![1.0, 1.0],
        vec![
            Kernel::erlang(2.0, 2).unwrap(),
            Kernel::exponential(1.0).unwrap(),
        ],
    )
    .unwrap()
}

/// Scalar logistic species with exponentially fading interaction memory and
/// an exponential-kernel feedback control: growth 1, self-limitation 3,
/// delayed self-interaction and control coefficients all 1. Settles at 1/5.
pub fn scalar_memory_control() -> SystemSpec {
    SystemSpec::new(
        vec![1.0],
        vec![3.0],
        vec![vec![1.0]],
        vec![Kernel::exponential(1.0).unwrap()],
        vec![1.0],
        vec![1.0],
        vec![1.0],
        vec![Kernel::exponential(1.0).unwrap()],
    )
    .unwrap()
}

/// Same system as [`scalar_memory_control`] with both exponential kernels
/// replaced by tabulated densities sampled at `step` out to `horizon`.
/// Integration then runs through the history-quadrature path instead of
/// the chain-variable path.
pub fn scalar_memory_control_tabulated(step: f64, horizon: f64) -> SystemSpec {
    let nodes = (horizon / step).round() as usize + 1;
    let densities: Vec<f64> = (0..nodes).map(|j| (-(j as f64) * step).exp()).collect();
    let table = Kernel::table(step, &densities).unwrap();
    let mut spec = scalar_memory_control();
    *spec.kernel_mut(0, 0) = table.clone();
    spec.g[0] = table;
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn all_fixtures_validate() {
        for spec in [
            competitive_pair(0.0),
            competitive_pair(0.25),
            predator_prey_pair(0.2, 0.2),
            scalar_memory_control(),
            scalar_memory_control_tabulated(0.02, 30.0),
        ] {
            let report = validate(&spec);
            assert!(report.is_valid(), "{report}");
        }
    }

    #[test]
    fn control_modes() {
        assert!(competitive_pair(0.0).is_uncontrolled());
        assert!(competitive_pair(0.25).is_controlled());
        assert!(predator_prey_pair(0.2, 0.2).is_controlled());
    }
}
