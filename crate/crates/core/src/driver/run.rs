//! Time loop with adaptation cadence, error norms and the convergence study.

use std::path::Path;

use super::cases::{setup_case, ExactFn};
use super::config::{vortex_dt, CaseKind, RunConfig};
use super::output::{
    bottom_wall_slice, convergence_table, write_amr_events, write_convergence, write_diagnostics, write_slice,
    write_vtk, AmrEvent, ConvergenceRow, DiagnosticsRow,
};
use crate::amr::{adapt_mesh, mark_elements, transfer_solution, AmrConfig};
use crate::dgsem::{check_admissible_field, conserved_totals, total_entropy, SolutionField};
use crate::error::{Error, Result};
use crate::euler::{pressure_unchecked, GasModel};
use crate::limiters::OEConfig;
use crate::mesh::Mesh;
use crate::timestepping::{compute_dt, pp_dt_bound, ssprk3_step, StepConfig};

/// Times one step may be retried with a smaller `dt` after a cell average
/// leaves the admissible set.
pub const MAX_STEP_RETRIES: usize = 8;

pub struct RunResult {
    pub mesh: Mesh,
    pub u: SolutionField,
    pub t: f64,
    pub steps: usize,
    /// Step attempts rejected for an inadmissible cell average and redone
    /// with a smaller step.
    pub rejected_steps: usize,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub amr_events: Vec<AmrEvent>,
    /// L2 errors at the final time when the case has an exact solution.
    pub errors: Option<[f64; 4]>,
}

/// `sqrt(sum w w J (U - U_exact)^2)` per conserved component.
pub fn compute_l2_error(mesh: &Mesh, u: &SolutionField, exact: &ExactFn, t: f64) -> [f64; 4] {
    let w = mesh.ops.weights();
    let mut acc = [0.0; 4];
    for (e, el) in mesh.elements.iter().enumerate() {
        for (k, s) in u.elem(e).iter().enumerate() {
            let d = *s - exact(el.x[k], el.y[k], t);
            let m = el.mass(k, w);
            for (c, a) in acc.iter_mut().enumerate() {
                *a += m * d[c] * d[c];
            }
        }
    }
    acc.map(f64::sqrt)
}

fn minima(u: &SolutionField, gas: GasModel) -> (f64, f64) {
    u.data.iter().fold((f64::INFINITY, f64::INFINITY), |(r, p), s| {
        (r.min(s.rho), p.min(pressure_unchecked(s, gas)))
    })
}

fn diag_row(mesh: &Mesh, u: &SolutionField, t: f64, dt: f64, margin: f64, gas: GasModel) -> DiagnosticsRow {
    let (min_rho, min_p) = minima(u, gas);
    DiagnosticsRow {
        t,
        dt,
        totals: conserved_totals(mesh, u).to_array(),
        entropy: total_entropy(mesh, u, gas),
        min_rho,
        min_p,
        n_elements: mesh.len(),
        pp_margin: margin,
    }
}

pub fn step_config(cfg: &RunConfig) -> StepConfig {
    StepConfig {
        cfl: cfg.cfl,
        pp_check: cfg.pp_check,
        oe: cfg.oe.then_some(OEConfig {
            s: cfg.s,
            c_oe: cfg.c_oe,
        }),
        positivity: cfg.limiter,
        ..StepConfig::default()
    }
}

pub fn amr_config(cfg: &RunConfig) -> AmrConfig {
    AmrConfig {
        c_ref: cfg.c_ref,
        c_crs: cfg.c_crs,
        max_level: cfg.max_level,
        interval: cfg.amr_interval,
    }
}

fn with_time(err: Error, t: f64) -> Error {
    match err {
        Error::Positivity { element, time, detail } if time.is_nan() => Error::Positivity { element, time: t, detail },
        other => other,
    }
}

/// Run `cfg` to its final time, writing outputs if an output directory is
/// configured.
pub fn run_simulation(cfg: &RunConfig, gas: GasModel) -> Result<RunResult> {
    let setup = setup_case(cfg, gas)?;
    let step_cfg = step_config(cfg);
    let amr_cfg = amr_config(cfg);
    amr_cfg.validate()?;
    let out = cfg.output_dir.as_deref();
    let mut mesh = setup.mesh;
    let mut u = setup.initial;
    let bcs = setup.bcs;
    let mut t = 0.0;
    let mut steps = 0;
    let mut diagnostics = vec![diag_row(&mesh, &u, 0.0, 0.0, f64::NAN, gas)];
    let mut amr_events = Vec::new();
    let mut rejected_steps = 0;
    let tol = 1e-12 * cfg.t_final.max(1e-300);

    let result = (|| -> Result<()> {
        while cfg.t_final - t > tol {
            let mut dt = match cfg.dt {
                Some(dt) => dt,
                None => compute_dt(&mesh, &u, &bcs, t, &step_cfg, gas)?,
            };
            if t + dt > cfg.t_final - tol {
                dt = cfg.t_final - t;
            }
            let mut attempt = 0;
            let (next, stats) = loop {
                match ssprk3_step(&mesh, &u, dt, cfg.flux, &bcs, t, &step_cfg, gas) {
                    Ok(done) => break done,
                    Err(err @ Error::Positivity { .. }) if attempt < MAX_STEP_RETRIES => {
                        let bound = pp_dt_bound(&mesh, &u, &bcs, t, gas);
                        let retry = (0.5 * dt).min(bound);
                        log::warn!("step {}: rejected dt = {dt:e} ({err}); retrying with {retry:e}", steps + 1);
                        dt = retry;
                        attempt += 1;
                        rejected_steps += 1;
                    }
                    Err(err) => return Err(err),
                }
            };
            u = next;
            t += dt;
            steps += 1;
            check_admissible_field(&mesh, &u, t, gas)?;
            if cfg.adapt && steps % cfg.amr_interval == 0 {
                let marks = mark_elements(&mesh, &u, &amr_cfg, gas);
                let (new_mesh, plan) = adapt_mesh(&mesh, &marks)?;
                if !plan.is_identity() {
                    u = transfer_solution(&plan, &mesh, &new_mesh, &u, gas, step_cfg.eps).map_err(|e| with_time(e, t))?;
                    mesh = new_mesh;
                    let (refined, coarsened) = plan.counts();
                    log::info!("step {steps}: refined {refined}, coarsened {coarsened}, {} elements", mesh.len());
                    amr_events.push(AmrEvent {
                        step: steps,
                        t,
                        refined,
                        coarsened,
                        n_elements: mesh.len(),
                    });
                    check_admissible_field(&mesh, &u, t, gas)?;
                }
            }
            diagnostics.push(diag_row(&mesh, &u, t, dt, stats.pp_margin.unwrap_or(f64::NAN), gas));
            if let Some(dir) = out {
                if cfg.output_every > 0 && steps % cfg.output_every == 0 {
                    write_vtk(&dir.join(format!("snapshot_{steps:06}.vtk")), &mesh, &u, gas)?;
                }
            }
        }
        Ok(())
    })();

    if let Some(dir) = out {
        write_diagnostics(&dir.join("diagnostics.csv"), &diagnostics)?;
        write_amr_events(&dir.join("amr_events.csv"), &amr_events)?;
        let name = if result.is_ok() { "final.vtk" } else { "failure.vtk" };
        write_vtk(&dir.join(name), &mesh, &u, gas)?;
        if cfg.case == CaseKind::Dmr {
            write_slice(&dir.join("wall_density.csv"), &bottom_wall_slice(&mesh, &u))?;
        }
    }
    result?;
    let errors = setup.exact.as_ref().map(|ex| compute_l2_error(&mesh, &u, ex, t));
    Ok(RunResult {
        mesh,
        u,
        t,
        steps,
        rejected_steps,
        diagnostics,
        amr_events,
        errors,
    })
}

/// Vortex errors on levels `levels` with the fixed step schedule, plus rates.
pub fn vortex_convergence(base: &RunConfig, levels: &[u8], gas: GasModel, out: Option<&Path>) -> Result<Vec<ConvergenceRow>> {
    let mut table = Vec::with_capacity(levels.len());
    for &level in levels {
        let cfg = RunConfig {
            case: CaseKind::Vortex,
            level,
            dt: Some(vortex_dt(level)),
            adapt: false,
            output_dir: None,
            ..base.clone()
        };
        let res = run_simulation(&cfg, gas)?;
        let errors = res.errors.expect("vortex case has an exact solution");
        log::info!("level {level}: rho error {:e}", errors[0]);
        table.push((level, errors));
    }
    let rows = convergence_table(&table);
    if let Some(dir) = out {
        write_convergence(&dir.join("convergence.csv"), &rows)?;
    }
    Ok(rows)
}

/// Right-most bottom-wall node whose density exceeds `threshold`.
pub fn mach_stem_position(mesh: &Mesh, u: &SolutionField, threshold: f64) -> Option<f64> {
    bottom_wall_slice(mesh, u)
        .into_iter()
        .filter(|&(_, r)| r > threshold)
        .map(|(x, _)| x)
        .reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::cases::vortex_exact;

    const GAS: GasModel = GasModel { gamma: 1.4 };

    #[test]
    fn l2_error_of_exact_and_offset_fields() {
        let cfg = RunConfig::defaults(CaseKind::Vortex, 2);
        let s = setup_case(&cfg, GAS).unwrap();
        let ex = s.exact.clone().unwrap();
        let e = compute_l2_error(&s.mesh, &s.initial, &ex, 0.0);
        assert!(e.iter().all(|&v| v == 0.0));
        let c = 1e-3;
        let offset = crate::euler::ConservedState::new(c, c, c, c);
        let shifted = SolutionField::from_fn(&s.mesh, |x, y| vortex_exact(x, y, 0.0, GAS) + offset);
        let e = compute_l2_error(&s.mesh, &shifted, &ex, 0.0);
        let area: f64 = s.mesh.total_area();
        assert!((area - 400.0).abs() < 1e-10);
        for v in e {
            assert!((v - c * area.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_final_time_returns_initial_state() {
        let mut cfg = RunConfig::defaults(CaseKind::Vortex, 1);
        cfg.t_final = 0.0;
        let dir = tempfile::tempdir().unwrap();
        cfg.output_dir = Some(dir.path().to_path_buf());
        let res = run_simulation(&cfg, GAS).unwrap();
        assert_eq!(res.steps, 0);
        let s = setup_case(&cfg, GAS).unwrap();
        assert_eq!(res.u, s.initial);
        let text = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn terminal_step_hits_final_time() {
        let mut cfg = RunConfig::defaults(CaseKind::Vortex, 1);
        cfg.t_final = 0.025;
        let res = run_simulation(&cfg, GAS).unwrap();
        assert_eq!(res.steps, 3);
        assert_eq!(res.t, 0.025);
        let last = res.diagnostics.last().unwrap();
        assert!((last.dt - 0.005).abs() < 1e-15);
    }
}
