//! Diagnostics CSV, VTK snapshots, convergence tables and wall slices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dgsem::SolutionField;
use crate::error::{Error, Result};
use crate::euler::{pressure_unchecked, GasModel};
use crate::limiters::oe::physical_derivative;
use crate::mesh::{BoundaryTag, Mesh, Neighbor, Side};

/// One row of the per-step diagnostics file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub dt: f64,
    pub totals: [f64; 4],
    pub entropy: f64,
    pub min_rho: f64,
    pub min_p: f64,
    pub n_elements: usize,
    pub pp_margin: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "t,dt,mass,mom_x,mom_y,energy,entropy,min_rho,min_p,n_elements,pp_margin";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmrEvent {
    pub step: usize,
    pub t: f64,
    pub refined: usize,
    pub coarsened: usize,
    pub n_elements: usize,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let mut s = String::from(DIAGNOSTICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e}",
            r.t, r.dt, r.totals[0], r.totals[1], r.totals[2], r.totals[3], r.entropy, r.min_rho, r.min_p, r.n_elements, r.pp_margin
        );
    }
    s
}

pub fn write_diagnostics(path: &Path, rows: &[DiagnosticsRow]) -> Result<()> {
    write_file(path, &diagnostics_csv(rows))
}

pub fn write_amr_events(path: &Path, events: &[AmrEvent]) -> Result<()> {
    let mut s = String::from("step,t,refined,coarsened,n_elements\n");
    for e in events {
        let _ = writeln!(s, "{},{:.17e},{},{},{}", e.step, e.t, e.refined, e.coarsened, e.n_elements);
    }
    write_file(path, &s)
}

/// Legacy ASCII VTK unstructured grid, one quad per LGL subcell, with
/// point data rho, u, v, p and the Schlieren proxy `log(1 + |grad rho|)`.
pub fn vtk_snapshot(mesh: &Mesh, u: &SolutionField, gas: GasModel) -> String {
    let ops = &mesh.ops;
    let n1 = ops.n1();
    let np = n1 * n1;
    let n_pts = mesh.len() * np;
    let n_cells = mesh.len() * (n1 - 1) * (n1 - 1);
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ndgsem snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n_pts} double");
    for el in &mesh.elements {
        for k in 0..np {
            let _ = writeln!(s, "{:.12e} {:.12e} 0", el.x[k], el.y[k]);
        }
    }
    let _ = writeln!(s, "CELLS {n_cells} {}", 5 * n_cells);
    for e in 0..mesh.len() {
        let base = e * np;
        for j in 0..n1 - 1 {
            for i in 0..n1 - 1 {
                let a = base + i + n1 * j;
                let _ = writeln!(s, "4 {} {} {} {}", a, a + 1, a + 1 + n1, a + n1);
            }
        }
    }
    let _ = writeln!(s, "CELL_TYPES {n_cells}");
    for _ in 0..n_cells {
        s.push_str("9\n");
    }
    let _ = writeln!(s, "POINT_DATA {n_pts}");
    let mut fields: [Vec<f64>; 5] = Default::default();
    for (e, el) in mesh.elements.iter().enumerate() {
        let vals = u.elem(e);
        let dx = physical_derivative(el, vals, ops, true);
        let dy = physical_derivative(el, vals, ops, false);
        for k in 0..np {
            let v = &vals[k];
            fields[0].push(v.rho);
            fields[1].push(v.mom_x / v.rho);
            fields[2].push(v.mom_y / v.rho);
            fields[3].push(pressure_unchecked(v, gas));
            fields[4].push((1.0 + dx[k].rho.hypot(dy[k].rho)).ln());
        }
    }
    for (name, data) in ["rho", "u", "v", "p", "schlieren"].iter().zip(&fields) {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for x in data {
            let _ = writeln!(s, "{x:.12e}");
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &Mesh, u: &SolutionField, gas: GasModel) -> Result<()> {
    write_file(path, &vtk_snapshot(mesh, u, gas))
}

/// One level of a convergence study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: u8,
    pub errors: [f64; 4],
    /// `log2(e_prev / e)`; `None` on the first level.
    pub rates: Option<[f64; 4]>,
}

/// Attach rates to a list of `(level, errors)`.
pub fn convergence_table(levels: &[(u8, [f64; 4])]) -> Vec<ConvergenceRow> {
    levels
        .iter()
        .enumerate()
        .map(|(i, &(level, errors))| ConvergenceRow {
            level,
            errors,
            rates: (i > 0).then(|| {
                let prev = levels[i - 1].1;
                [0, 1, 2, 3].map(|c| (prev[c] / errors[c]).log2())
            }),
        })
        .collect()
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from(
        "level,error_rho,rate_rho,error_mom_x,rate_mom_x,error_mom_y,rate_mom_y,error_energy,rate_energy\n",
    );
    for r in rows {
        let _ = write!(s, "{}", r.level);
        for c in 0..4 {
            let rate = r.rates.map(|v| format!("{:.6}", v[c])).unwrap_or_default();
            let _ = write!(s, ",{:.10e},{}", r.errors[c], rate);
        }
        s.push('\n');
    }
    s
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    write_file(path, &convergence_csv(rows))
}

/// `(x, rho)` at every node on the bottom boundary, sorted by `x`.
pub fn bottom_wall_slice(mesh: &Mesh, u: &SolutionField) -> Vec<(f64, f64)> {
    let n1 = mesh.ops.n1();
    let mut out = Vec::new();
    for (e, el) in mesh.elements.iter().enumerate() {
        if mesh.neighbors[e][Side::South.index()] != Neighbor::Boundary(BoundaryTag::Bottom) {
            continue;
        }
        for r in 0..n1 {
            let k = Side::South.node(r, n1);
            out.push((el.x[k], u.elem(e)[k].rho));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

pub fn write_slice(path: &Path, slice: &[(f64, f64)]) -> Result<()> {
    let mut s = String::from("x,rho\n");
    for (x, r) in slice {
        let _ = writeln!(s, "{x:.12e},{r:.12e}");
    }
    write_file(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::ConservedState;
    use crate::mesh::Bounds;

    const GAS: GasModel = GasModel { gamma: 1.4 };

    #[test]
    fn rates_are_log_ratios() {
        let rows = convergence_table(&[(0, [1.0, 2.0, 4.0, 8.0]), (1, [0.25, 1.0, 1.0, 1.0])]);
        assert!(rows[0].rates.is_none());
        assert_eq!(rows[1].rates.unwrap(), [2.0, 1.0, 2.0, 3.0]);
        let csv = convergence_csv(&rows);
        assert!(csv.starts_with("level,error_rho,rate_rho"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn constant_snapshot() {
        let mesh = crate::mesh::Mesh::build_cartesian(2, 2, 1, Bounds::new(0.0, 2.0, 0.0, 1.0), [false; 2]).unwrap();
        let s = ConservedState::from_primitive(1.5, 0.5, 0.0, 2.0, GAS);
        let u = SolutionField::from_fn(&mesh, |_, _| s);
        let vtk = vtk_snapshot(&mesh, &u, GAS);
        assert!(vtk.contains("POINTS 18 double"));
        assert!(vtk.contains("CELLS 8 40"));
        let sch = vtk.split("SCALARS schlieren double 1\nLOOKUP_TABLE default\n").nth(1).unwrap();
        assert!(sch.lines().all(|l| l.parse::<f64>().unwrap().abs() < 1e-12));
        let slice = bottom_wall_slice(&mesh, &u);
        assert_eq!(slice.len(), 6);
        assert!(slice.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn diagnostics_header() {
        let csv = diagnostics_csv(&[]);
        assert_eq!(csv.trim(), DIAGNOSTICS_HEADER);
    }
}
