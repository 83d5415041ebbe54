//! Initial and boundary data for the benchmark problems.

use std::f64::consts::PI;
use std::sync::Arc;

use super::config::{CaseKind, RunConfig};
use crate::dgsem::boundary::{BoundaryCondition, BoundaryConditions, StateFn};
use crate::dgsem::{check_admissible_field, SolutionField};
use crate::error::{Error, Result};
use crate::euler::{ConservedState, GasModel};
use crate::mesh::{vortex_warp, BoundaryTag, Bounds, Mesh};

pub const VORTEX_LENGTH: f64 = 20.0;
pub const VORTEX_STRENGTH: f64 = 5.0;
pub const VORTEX_WARP: f64 = 0.05;

pub type ExactFn = Arc<dyn Fn(f64, f64, f64) -> ConservedState + Send + Sync>;

pub struct CaseSetup {
    pub mesh: Mesh,
    pub bcs: BoundaryConditions,
    pub initial: SolutionField,
    pub exact: Option<ExactFn>,
}

/// Isentropic vortex centred at the origin at `t = 0`, advected with
/// velocity `(1, 1)` through the periodic square of side 20.
pub fn vortex_exact(x: f64, y: f64, t: f64, gas: GasModel) -> ConservedState {
    let wrap = |d: f64| d - VORTEX_LENGTH * (d / VORTEX_LENGTH).round();
    let dx = wrap(x - t);
    let dy = wrap(y - t);
    let r2 = dx * dx + dy * dy;
    let g = gas.gamma;
    let b = VORTEX_STRENGTH;
    let e = (0.5 * (1.0 - r2)).exp();
    let u = 1.0 - b / (2.0 * PI) * dy * e;
    let v = 1.0 + b / (2.0 * PI) * dx * e;
    let temp = 1.0 - (g - 1.0) * b * b / (8.0 * g * PI * PI) * (1.0 - r2).exp();
    let rho = temp.powf(1.0 / (g - 1.0));
    let p = temp.powf(g / (g - 1.0));
    ConservedState::from_primitive(rho, u, v, p, gas)
}

/// Vortex mesh at uniform refinement level `level`: an `n x n` grid with
/// every other cell split into four, warped, then refined `level` times.
pub fn vortex_mesh(degree: usize, n: usize, level: u8) -> Result<Mesh> {
    let half = 0.5 * VORTEX_LENGTH;
    let mut mesh = Mesh::build_cartesian(degree, n, n, Bounds::new(-half, half, -half, half), [true; 2])?;
    mesh.checkerboard_refine(1)?;
    mesh.apply_warp(vortex_warp(VORTEX_WARP, VORTEX_LENGTH))?;
    for _ in 0..level {
        mesh.refine_uniformly()?;
    }
    Ok(mesh)
}

/// Post-shock state of the double Mach reflection.
pub fn dmr_post_shock(gas: GasModel) -> ConservedState {
    ConservedState::from_primitive(8.0, 8.25 * (PI / 6.0).cos(), -8.25 * (PI / 6.0).sin(), 116.5, gas)
}

pub fn dmr_pre_shock(gas: GasModel) -> ConservedState {
    ConservedState::from_primitive(1.4, 0.0, 0.0, 1.0, gas)
}

/// Shock position along `y` at time `t`.
pub fn dmr_shock_x(y: f64, t: f64) -> f64 {
    1.0 / 6.0 + (y + 20.0 * t) / 3.0_f64.sqrt()
}

pub fn dmr_initial(x: f64, y: f64, gas: GasModel) -> ConservedState {
    if x < dmr_shock_x(y, 0.0) {
        dmr_post_shock(gas)
    } else {
        dmr_pre_shock(gas)
    }
}

pub fn jet_ambient(gas: GasModel) -> ConservedState {
    ConservedState::from_primitive(0.5, 0.0, 0.0, 1e-2, gas)
}

/// Jet inflow, aligned with +x.
pub fn jet_inflow(gas: GasModel) -> ConservedState {
    ConservedState::from_primitive(5.0, 800.0, 0.0, 0.4127, gas)
}

pub const JET_HALF_WIDTH: f64 = 0.05;

pub fn setup_case(cfg: &RunConfig, gas: GasModel) -> Result<CaseSetup> {
    cfg.validate()?;
    let setup = match cfg.case {
        CaseKind::Vortex => {
            let mesh = vortex_mesh(cfg.degree, cfg.nx, cfg.level)?;
            let initial = SolutionField::from_fn(&mesh, |x, y| vortex_exact(x, y, 0.0, gas));
            let exact: ExactFn = Arc::new(move |x, y, t| vortex_exact(x, y, t, gas));
            CaseSetup {
                mesh,
                bcs: BoundaryConditions::periodic(),
                initial,
                exact: Some(exact),
            }
        }
        CaseKind::Dmr => {
            let mesh = Mesh::build_cartesian(cfg.degree, cfg.nx, cfg.ny, Bounds::new(0.0, 4.0, 0.0, 1.0), [false; 2])?;
            let post = dmr_post_shock(gas);
            let pre = dmr_pre_shock(gas);
            let top: StateFn = Arc::new(move |x, y, t| if x < dmr_shock_x(y, t) { post } else { pre });
            let bcs = BoundaryConditions::default()
                .with(BoundaryTag::Left, BoundaryCondition::Inflow(post))
                .with(BoundaryTag::Right, BoundaryCondition::Outflow)
                .with(
                    BoundaryTag::Bottom,
                    BoundaryCondition::Split {
                        at: 1.0 / 6.0,
                        below: Box::new(BoundaryCondition::Inflow(post)),
                        above: Box::new(BoundaryCondition::ReflectiveWall),
                    },
                )
                .with(BoundaryTag::Top, BoundaryCondition::Dirichlet(top));
            let initial = SolutionField::from_fn(&mesh, |x, y| dmr_initial(x, y, gas));
            CaseSetup {
                mesh,
                bcs,
                initial,
                exact: None,
            }
        }
        CaseKind::Jet => {
            let mesh = Mesh::build_cartesian(cfg.degree, cfg.nx, cfg.ny, Bounds::new(0.0, 1.0, 0.0, 0.5), [false; 2])?;
            let ambient = jet_ambient(gas);
            let bcs = BoundaryConditions::default()
                .with(
                    BoundaryTag::Left,
                    BoundaryCondition::Split {
                        at: JET_HALF_WIDTH,
                        below: Box::new(BoundaryCondition::Inflow(jet_inflow(gas))),
                        above: Box::new(BoundaryCondition::Inflow(ambient)),
                    },
                )
                .with(BoundaryTag::Bottom, BoundaryCondition::ReflectiveWall)
                .with(BoundaryTag::Right, BoundaryCondition::Outflow)
                .with(BoundaryTag::Top, BoundaryCondition::Outflow);
            let initial = SolutionField::from_fn(&mesh, |_, _| ambient);
            CaseSetup {
                mesh,
                bcs,
                initial,
                exact: None,
            }
        }
    };
    check_admissible_field(&setup.mesh, &setup.initial, 0.0, gas).map_err(|e| match e {
        Error::Positivity { element, detail, .. } => Error::Config(format!(
            "inadmissible initial condition in element {element}: {detail}"
        )),
        other => other,
    })?;
    Ok(setup)
}
