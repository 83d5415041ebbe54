//! Cell averages, the Zhang–Shu positivity limiter and the
//! oscillation-eliminating (OE) damping with its jump indicator.

pub mod oe;
pub mod positivity;

pub use oe::{apply_oe, shock_indicator, OEConfig, OeOutcome};
pub use positivity::{limit_toward_average, zhang_shu_limit, ScalingFactors, DEFAULT_EPS};

use crate::euler::ConservedState;
use crate::mesh::Element;
use crate::reference_ops::ReferenceOperators;

/// Per-element record of what the limiters did in one stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimiterReport {
    pub indicator: f64,
    pub oe_applied: bool,
    /// Damping exponents `delta_m` for `m = 0..=N` (zero beyond the degree).
    pub delta: [f64; 9],
    pub scaling: ScalingFactors,
}

impl Default for LimiterReport {
    fn default() -> Self {
        Self {
            indicator: 0.0,
            oe_applied: false,
            delta: [0.0; 9],
            scaling: ScalingFactors::IDENTITY,
        }
    }
}

/// Jacobian-weighted mean `sum(w w J U) / sum(w w J)`.
pub fn cell_average(element: &Element, values: &[ConservedState], ops: &ReferenceOperators) -> ConservedState {
    let w = ops.weights();
    let mut acc = ConservedState::ZERO;
    let mut vol = 0.0;
    for (k, u) in values.iter().enumerate() {
        let m = element.mass(k, w);
        acc += m * *u;
        vol += m;
    }
    (1.0 / vol) * acc
}

/// Element integral `sum(w w J U)`.
pub fn cell_integral(element: &Element, values: &[ConservedState], ops: &ReferenceOperators) -> ConservedState {
    let w = ops.weights();
    let mut acc = ConservedState::ZERO;
    for (k, u) in values.iter().enumerate() {
        acc += element.mass(k, w) * *u;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::GasModel;
    use crate::mesh::{Bounds, Mesh};

    #[test]
    fn average_of_constant_and_linear() {
        let m = Mesh::build_cartesian(3, 1, 1, Bounds::new(1.0, 3.0, 0.0, 0.5), [false; 2]).unwrap();
        let el = &m.elements[0];
        let c = ConservedState::from_primitive(1.3, 0.2, 0.1, 0.7, GasModel::default());
        let v = vec![c; 16];
        let a = cell_average(el, &v, &m.ops);
        assert!((a - c).max_abs() < 1e-15);
        // linear field: value at centroid (2, 0.25)
        let v: Vec<ConservedState> = (0..16)
            .map(|k| {
                let (x, y) = (el.x[k], el.y[k]);
                ConservedState::new(1.0 + x + 2.0 * y, x, y, 3.0)
            })
            .collect();
        let a = cell_average(el, &v, &m.ops);
        assert!((a.rho - 3.5).abs() < 1e-14);
        assert!((a.mom_x - 2.0).abs() < 1e-14);
        assert!((a.mom_y - 0.25).abs() < 1e-14);
    }
}
