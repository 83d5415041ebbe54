//! Boundary conditions imposed through exterior (ghost) states.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::euler::ConservedState;
use crate::mesh::BoundaryTag;

/// Time-dependent exterior state `f(x, y, t)`.
pub type StateFn = Arc<dyn Fn(f64, f64, f64) -> ConservedState + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    /// Only valid on tags that the mesh wraps periodically.
    Periodic,
    Inflow(ConservedState),
    Outflow,
    ReflectiveWall,
    Dirichlet(StateFn),
    /// Different conditions on either side of `at`, measured along the
    /// boundary (x on bottom/top, y on left/right).
    Split {
        at: f64,
        below: Box<BoundaryCondition>,
        above: Box<BoundaryCondition>,
    },
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Periodic => write!(f, "Periodic"),
            BoundaryCondition::Inflow(s) => write!(f, "Inflow({s:?})"),
            BoundaryCondition::Outflow => write!(f, "Outflow"),
            BoundaryCondition::ReflectiveWall => write!(f, "ReflectiveWall"),
            BoundaryCondition::Dirichlet(_) => write!(f, "Dirichlet(<fn>)"),
            BoundaryCondition::Split { at, below, above } => {
                write!(f, "Split {{ at: {at}, below: {below:?}, above: {above:?} }}")
            }
        }
    }
}

impl BoundaryCondition {
    /// Exterior state seen by the interface flux at `(x, y)` with outward
    /// normal `n` on a boundary with tag `tag`.
    pub fn ghost_state(
        &self,
        tag: BoundaryTag,
        interior: &ConservedState,
        n: [f64; 2],
        x: f64,
        y: f64,
        t: f64,
    ) -> Result<ConservedState> {
        match self {
            BoundaryCondition::Periodic => Err(Error::Config(format!(
                "periodic condition bound to non-periodic boundary {}",
                tag.name()
            ))),
            BoundaryCondition::Inflow(s) => Ok(*s),
            BoundaryCondition::Outflow => Ok(*interior),
            BoundaryCondition::ReflectiveWall => Ok(reflect(interior, n)),
            BoundaryCondition::Dirichlet(f) => Ok(f(x, y, t)),
            BoundaryCondition::Split { at, below, above } => {
                let s = match tag {
                    BoundaryTag::Bottom | BoundaryTag::Top => x,
                    BoundaryTag::Left | BoundaryTag::Right => y,
                };
                if s < *at {
                    below.ghost_state(tag, interior, n, x, y, t)
                } else {
                    above.ghost_state(tag, interior, n, x, y, t)
                }
            }
        }
    }
}

/// One binding per boundary tag.
#[derive(Clone, Debug, Default)]
pub struct BoundaryConditions {
    bindings: [Option<BoundaryCondition>; 4],
}

impl BoundaryConditions {
    pub fn periodic() -> Self {
        let mut b = Self::default();
        for tag in BoundaryTag::ALL {
            b.set(tag, BoundaryCondition::Periodic);
        }
        b
    }

    fn slot(tag: BoundaryTag) -> usize {
        match tag {
            BoundaryTag::Left => 0,
            BoundaryTag::Right => 1,
            BoundaryTag::Bottom => 2,
            BoundaryTag::Top => 3,
        }
    }

    pub fn set(&mut self, tag: BoundaryTag, bc: BoundaryCondition) -> &mut Self {
        self.bindings[Self::slot(tag)] = Some(bc);
        self
    }

    pub fn with(mut self, tag: BoundaryTag, bc: BoundaryCondition) -> Self {
        self.set(tag, bc);
        self
    }

    pub fn get(&self, tag: BoundaryTag) -> Result<&BoundaryCondition> {
        self.bindings[Self::slot(tag)]
            .as_ref()
            .ok_or_else(|| Error::UnboundBoundary(tag.name().to_string()))
    }
}

/// Mirror state: normal momentum negated, everything else copied.
pub fn reflect(interior: &ConservedState, n: [f64; 2]) -> ConservedState {
    let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
    let (ex, ey) = (n[0] / len, n[1] / len);
    let mn = interior.mom_x * ex + interior.mom_y * ey;
    ConservedState::new(
        interior.rho,
        interior.mom_x - 2.0 * mn * ex,
        interior.mom_y - 2.0 * mn * ey,
        interior.energy,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::GasModel;

    const GAS: GasModel = GasModel { gamma: 1.4 };

    #[test]
    fn wall_mirrors_normal_velocity() {
        let u = ConservedState::from_primitive(1.0, 0.3, -0.7, 1.0, GAS);
        let g = reflect(&u, [0.0, -2.0]);
        assert_eq!(g.rho, u.rho);
        assert!((g.mom_x - u.mom_x).abs() < 1e-15);
        assert!((g.mom_y + u.mom_y).abs() < 1e-15);
        assert_eq!(g.energy, u.energy);
    }

    #[test]
    fn split_selects_by_tangential_coordinate() {
        let a = ConservedState::new(1.0, 0.0, 0.0, 1.0);
        let b = ConservedState::new(2.0, 0.0, 0.0, 1.0);
        let bc = BoundaryCondition::Split {
            at: 0.5,
            below: Box::new(BoundaryCondition::Inflow(a)),
            above: Box::new(BoundaryCondition::Inflow(b)),
        };
        let u = ConservedState::new(3.0, 0.0, 0.0, 1.0);
        let g = bc.ghost_state(BoundaryTag::Bottom, &u, [0.0, -1.0], 0.2, 9.0, 0.0).unwrap();
        assert_eq!(g, a);
        let g = bc.ghost_state(BoundaryTag::Left, &u, [-1.0, 0.0], 0.2, 0.9, 0.0).unwrap();
        assert_eq!(g, b);
    }

    #[test]
    fn unbound_and_periodic_misuse() {
        let bcs = BoundaryConditions::default();
        assert!(matches!(bcs.get(BoundaryTag::Top), Err(Error::UnboundBoundary(_))));
        let u = ConservedState::new(1.0, 0.0, 0.0, 1.0);
        assert!(BoundaryCondition::Periodic
            .ghost_state(BoundaryTag::Top, &u, [0.0, 1.0], 0.0, 0.0, 0.0)
            .is_err());
    }
}
