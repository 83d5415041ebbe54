//! Step-size control, the limited forward Euler stage, SSPRK3 and the
//! positivity CFL diagnostic.

use crate::dgsem::boundary::BoundaryConditions;
use crate::dgsem::interface::{es_wave_speeds, NonconformingGeometry};
use crate::dgsem::{semidiscrete_rhs, FluxMode, SolutionField};
use crate::error::{Error, Result};
use crate::euler::{admissible_unchecked, pair_alpha, pressure_unchecked, ConservedState, GasModel};
use crate::limiters::oe::apply_selective_oe;
use crate::limiters::{cell_average, zhang_shu_limit, OEConfig, DEFAULT_EPS};
use crate::mesh::{Face, Mesh, Neighbor, Side};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepConfig {
    pub cfl: f64,
    /// Evaluate the positivity CFL margin once per step.
    pub pp_check: bool,
    /// `None` disables oscillation elimination.
    pub oe: Option<OEConfig>,
    /// Apply the Zhang–Shu limiter after every stage.
    pub positivity: bool,
    pub eps: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            cfl: 0.8,
            pp_check: true,
            oe: Some(OEConfig::default()),
            positivity: true,
            eps: DEFAULT_EPS,
        }
    }
}

/// Counters from one forward Euler stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageStats {
    pub oe_elements: usize,
    pub limited_elements: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub oe_elements: usize,
    pub limited_elements: usize,
    /// Worst positivity CFL margin at the start of the step, if checked.
    pub pp_margin: Option<f64>,
}

fn signal_speed(s: &ConservedState, gas: GasModel) -> f64 {
    let c = (gas.gamma * pressure_unchecked(s, gas) / s.rho).sqrt();
    s.mom_x.hypot(s.mom_y) / s.rho + c
}

/// `CFL / (2N + 1) * min_e h_e / (|u_e| + c_e)` from cell averages. On
/// boundary elements the speed also covers the exterior states at the
/// boundary nodes, so inflow that is faster than the interior sets the step.
pub fn compute_dt(
    mesh: &Mesh,
    u: &SolutionField,
    bcs: &BoundaryConditions,
    t: f64,
    cfg: &StepConfig,
    gas: GasModel,
) -> Result<f64> {
    if !(cfg.cfl > 0.0) {
        return Err(Error::Config(format!("cfl must be positive, got {}", cfg.cfl)));
    }
    let ops = &mesh.ops;
    let n1 = ops.n1();
    let mut best = f64::INFINITY;
    for (e, el) in mesh.elements.iter().enumerate() {
        let vals = u.elem(e);
        let mut speed = signal_speed(&cell_average(el, vals, ops), gas);
        for side in Side::ALL {
            if let Neighbor::Boundary(tag) = mesh.neighbors[e][side.index()] {
                let bc = bcs.get(tag)?;
                for r in 0..n1 {
                    let k = side.node(r, n1);
                    let ghost = bc.ghost_state(tag, &vals[k], el.normals[side.index()][r], el.x[k], el.y[k], t)?;
                    speed = speed.max(signal_speed(&ghost, gas));
                }
            }
        }
        best = best.min(el.h / speed);
    }
    let dt = cfg.cfl / (2 * mesh.degree() + 1) as f64 * best;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("computed time step {dt} is not positive")));
    }
    Ok(dt)
}

/// `U + dt RHS`, then selective OE, then the positivity limiter.
#[allow(clippy::too_many_arguments)]
pub fn forward_euler_stage(
    mesh: &Mesh,
    u: &SolutionField,
    dt: f64,
    mode: FluxMode,
    bcs: &BoundaryConditions,
    t: f64,
    cfg: &StepConfig,
    gas: GasModel,
) -> Result<(SolutionField, StageStats)> {
    let rhs = semidiscrete_rhs(mesh, u, mode, bcs, t, gas)?;
    let mut next = u.linear_combination(1.0, &rhs, dt);
    let ops = &mesh.ops;
    for (e, el) in mesh.elements.iter().enumerate() {
        let avg = cell_average(el, next.elem(e), ops);
        if !avg.is_finite() {
            return Err(Error::NonFinite);
        }
        if !admissible_unchecked(&avg, gas) {
            return Err(Error::Positivity {
                element: e,
                time: t + dt,
                detail: format!(
                    "cell average has rho = {:e}, p = {:e} (dt = {dt:e}, pp margin = {:e})",
                    avg.rho,
                    pressure_unchecked(&avg, gas),
                    pp_cfl_check(mesh, u, dt, mode, bcs, t, gas)
                ),
            });
        }
    }
    let mut stats = StageStats::default();
    if let Some(oe) = &cfg.oe {
        stats.oe_elements = apply_selective_oe(mesh, &mut next, oe, dt, gas, None);
    }
    if !cfg.positivity {
        return Ok((next, stats));
    }
    for (e, el) in mesh.elements.iter().enumerate() {
        let f = zhang_shu_limit(el, next.elem_mut(e), ops, gas, cfg.eps).map_err(|err| Error::Positivity {
            element: e,
            time: t + dt,
            detail: err.to_string(),
        })?;
        if !f.is_identity() {
            stats.limited_elements += 1;
        }
    }
    Ok((next, stats))
}

/// Three-stage Shu–Osher SSPRK3 built from a forward Euler map
/// `fe(u, t) -> u + dt L(u)` and a convex combination `comb(a, x, b, y)`.
pub fn ssprk3_compose<T, F, C>(u: &T, dt: f64, t: f64, mut fe: F, mut comb: C) -> Result<T>
where
    F: FnMut(&T, f64) -> Result<T>,
    C: FnMut(f64, &T, f64, &T) -> T,
{
    let s1 = fe(u, t)?;
    let f1 = fe(&s1, t + dt)?;
    let s2 = comb(0.75, u, 0.25, &f1);
    let f2 = fe(&s2, t + 0.5 * dt)?;
    Ok(comb(1.0 / 3.0, u, 2.0 / 3.0, &f2))
}

#[allow(clippy::too_many_arguments)]
pub fn ssprk3_step(
    mesh: &Mesh,
    u: &SolutionField,
    dt: f64,
    mode: FluxMode,
    bcs: &BoundaryConditions,
    t: f64,
    cfg: &StepConfig,
    gas: GasModel,
) -> Result<(SolutionField, StepStats)> {
    let mut stats = StepStats::default();
    if cfg.pp_check {
        stats.pp_margin = Some(pp_cfl_check(mesh, u, dt, mode, bcs, t, gas));
    }
    let next = ssprk3_compose(
        u,
        dt,
        t,
        |v, ts| {
            let (out, s) = forward_euler_stage(mesh, v, dt, mode, bcs, ts, cfg, gas)?;
            stats.oe_elements += s.oe_elements;
            stats.limited_elements += s.limited_elements;
            Ok(out)
        },
        |a, x, b, y| x.linear_combination(a, y, b),
    )?;
    Ok((next, stats))
}

/// Summed edge dissipation coefficients `beta` at every node (zero in the
/// interior). Both flux modes use the same nonconforming weights.
fn dissipation_coefficients(mesh: &Mesh, u: &SolutionField, bcs: &BoundaryConditions, t: f64, gas: GasModel) -> Vec<f64> {
    let ops = &mesh.ops;
    let n1 = ops.n1();
    let w = ops.weights();
    let nc = &ops.nc;
    let norm = |n: [f64; 2]| n[0].hypot(n[1]);
    let mut beta = vec![0.0; mesh.len() * n1 * n1];
    let idx = |e: usize, k: usize| e * n1 * n1 + k;
    for face in &mesh.faces {
        match *face {
            Face::Conforming { left, right, vertical } => {
                let (sl, sr) = if vertical {
                    (Side::East, Side::West)
                } else {
                    (Side::North, Side::South)
                };
                let normals = &mesh.elements[left].normals[sl.index()];
                for r in 0..n1 {
                    let (kl, kr) = (sl.node(r, n1), sr.node(r, n1));
                    let n = normals[r];
                    let a = pair_alpha(&u.elem(left)[kl], &u.elem(right)[kr], n[0], n[1], gas);
                    let b = w[r] * a * norm(n);
                    beta[idx(left, kl)] += b;
                    beta[idx(right, kr)] += b;
                }
            }
            Face::Nonconforming { coarse, coarse_side, fine } => {
                let fs = coarse_side.opposite();
                let uc = u.trace(coarse, coarse_side, n1);
                let uf = [u.trace(fine[0], fs, n1), u.trace(fine[1], fs, n1)];
                let geom = NonconformingGeometry {
                    coarse_normals: &mesh.elements[coarse].normals[coarse_side.index()],
                    fine_normals: [
                        &mesh.elements[fine[0]].normals[fs.index()],
                        &mesh.elements[fine[1]].normals[fs.index()],
                    ],
                };
                let alpha = es_wave_speeds(&uc, [&uf[0], &uf[1]], &geom, ops, gas);
                for k in 0..2 {
                    for i in 0..n1 {
                        let an = alpha[k][i] * norm(geom.fine_normals[k][i]);
                        let row: f64 = (0..n1).map(|j| nc.interp[k][(i, j)].abs()).sum();
                        beta[idx(fine[k], fs.node(i, n1))] += w[i] * row * an;
                        for j in 0..n1 {
                            let p = nc.proj[k][(j, i)].abs();
                            beta[idx(coarse, coarse_side.node(j, n1))] += 2.0 * w[j] * p * an;
                        }
                    }
                }
            }
            Face::Boundary { elem, side, tag } => {
                let el = &mesh.elements[elem];
                let normals = &el.normals[side.index()];
                for r in 0..n1 {
                    let k = side.node(r, n1);
                    let n = normals[r];
                    let inner = u.elem(elem)[k];
                    let ghost = bcs
                        .get(tag)
                        .and_then(|bc| bc.ghost_state(tag, &inner, n, el.x[k], el.y[k], t))
                        .ok()
                        .filter(|g| admissible_unchecked(g, gas))
                        .unwrap_or(inner);
                    let a = pair_alpha(&inner, &ghost, n[0], n[1], gas);
                    beta[idx(elem, k)] += w[r] * a * norm(n);
                }
            }
        }
    }
    beta
}

/// Worst margin `w_m w_n J_mn - dt * sum(incident beta)` over element
/// boundary nodes.
pub fn pp_cfl_check(
    mesh: &Mesh,
    u: &SolutionField,
    dt: f64,
    _mode: FluxMode,
    bcs: &BoundaryConditions,
    t: f64,
    gas: GasModel,
) -> f64 {
    let beta = dissipation_coefficients(mesh, u, bcs, t, gas);
    let w = mesh.ops.weights();
    let np = w.len() * w.len();
    let mut worst = f64::INFINITY;
    for (e, el) in mesh.elements.iter().enumerate() {
        for (k, b) in beta[e * np..(e + 1) * np].iter().enumerate() {
            if *b > 0.0 {
                worst = worst.min(el.mass(k, w) - dt * b);
            }
        }
    }
    worst
}

/// Largest step with a nonnegative positivity margin at the current state.
pub fn pp_dt_bound(mesh: &Mesh, u: &SolutionField, bcs: &BoundaryConditions, t: f64, gas: GasModel) -> f64 {
    let beta = dissipation_coefficients(mesh, u, bcs, t, gas);
    let w = mesh.ops.weights();
    let np = w.len() * w.len();
    let mut best = f64::INFINITY;
    for (e, el) in mesh.elements.iter().enumerate() {
        for (k, b) in beta[e * np..(e + 1) * np].iter().enumerate() {
            if *b > 0.0 {
                best = best.min(el.mass(k, w) / b);
            }
        }
    }
    best
}
