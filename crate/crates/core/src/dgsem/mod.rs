//! Semi-discrete residual of the split-form DGSEM on a 2:1 mesh.

pub mod boundary;
pub mod interface;
pub mod volume;

use std::fmt;
use std::str::FromStr;

pub use boundary::{BoundaryCondition, BoundaryConditions, StateFn};
pub use interface::{
    conforming_face_flux, es_nonconforming_fluxes, mortar_nonconforming_fluxes, NonconformingFluxes,
    NonconformingGeometry,
};
pub use volume::volume_residual;

use crate::error::{Error, Result};
use crate::euler::{
    admissible_unchecked, entropy_density, llf_unchecked, normal_flux_unchecked, pressure_unchecked,
    ConservedState, GasModel, PointData,
};
use crate::limiters::DEFAULT_EPS;
use crate::mesh::{Face, Mesh, Side};

/// Treatment of 2:1 nonconforming interfaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FluxMode {
    /// Sign-corrected two-point flux with projection (entropy stable).
    Es,
    /// LLF on the fine segments against the interpolated coarse trace.
    Mortar,
}

impl FromStr for FluxMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "es" => Ok(FluxMode::Es),
            "mortar" => Ok(FluxMode::Mortar),
            other => Err(Error::Config(format!("unknown flux mode '{other}'"))),
        }
    }
}

impl fmt::Display for FluxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FluxMode::Es => "es",
            FluxMode::Mortar => "mortar",
        })
    }
}

/// Nodal states of every active element, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionField {
    nodes_per_element: usize,
    pub data: Vec<ConservedState>,
}

impl SolutionField {
    pub fn zeros(num_elements: usize, nodes_per_element: usize) -> Self {
        Self {
            nodes_per_element,
            data: vec![ConservedState::ZERO; num_elements * nodes_per_element],
        }
    }

    /// Sample `f(x, y)` at every node of `mesh`.
    pub fn from_fn<F: FnMut(f64, f64) -> ConservedState>(mesh: &Mesh, mut f: F) -> Self {
        let np = mesh.ops.n1() * mesh.ops.n1();
        let mut out = Self::zeros(mesh.len(), np);
        for (e, el) in mesh.elements.iter().enumerate() {
            for (k, s) in out.elem_mut(e).iter_mut().enumerate() {
                *s = f(el.x[k], el.y[k]);
            }
        }
        out
    }

    pub fn nodes_per_element(&self) -> usize {
        self.nodes_per_element
    }

    pub fn num_elements(&self) -> usize {
        self.data.len() / self.nodes_per_element
    }

    #[inline]
    pub fn elem(&self, e: usize) -> &[ConservedState] {
        &self.data[e * self.nodes_per_element..(e + 1) * self.nodes_per_element]
    }

    #[inline]
    pub fn elem_mut(&mut self, e: usize) -> &mut [ConservedState] {
        &mut self.data[e * self.nodes_per_element..(e + 1) * self.nodes_per_element]
    }

    /// `a * self + b * other`, elementwise.
    pub fn linear_combination(&self, a: f64, other: &SolutionField, b: f64) -> SolutionField {
        SolutionField {
            nodes_per_element: self.nodes_per_element,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * *x + b * *y)
                .collect(),
        }
    }

    /// States along one side of element `e`.
    pub fn trace(&self, e: usize, side: Side, n1: usize) -> Vec<ConservedState> {
        let u = self.elem(e);
        (0..n1).map(|r| u[side.node(r, n1)]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, s| m.max(s.max_abs()))
    }
}

/// Fail with a positivity diagnostic if any node is inadmissible.
pub fn check_admissible_field(mesh: &Mesh, u: &SolutionField, t: f64, gas: GasModel) -> Result<()> {
    for e in 0..mesh.len() {
        for (k, s) in u.elem(e).iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite);
            }
            if !admissible_unchecked(s, gas) {
                return Err(Error::Positivity {
                    element: e,
                    time: t,
                    detail: format!(
                        "node {k} at ({:.6}, {:.6}) has rho = {:e}, p = {:e}",
                        mesh.elements[e].x[k],
                        mesh.elements[e].y[k],
                        s.rho,
                        pressure_unchecked(s, gas)
                    ),
                });
            }
        }
    }
    Ok(())
}

fn interface_failure(err: Error, element: usize, t: f64) -> Error {
    match err {
        Error::Inadmissible { rho, p } => Error::Positivity {
            element,
            time: t,
            detail: format!("interpolated interface state has rho = {rho:e}, p = {p:e}"),
        },
        other => other,
    }
}

/// Add `(F*_out - F(U).n_out) / w_end` along one side of element `e`.
fn add_surface(
    res: &mut SolutionField,
    u: &SolutionField,
    mesh: &Mesh,
    e: usize,
    side: Side,
    fluxes: &[ConservedState],
    gas: GasModel,
) {
    let n1 = mesh.ops.n1();
    let inv_w = 1.0 / mesh.ops.weights()[0];
    let normals = &mesh.elements[e].normals[side.index()];
    for r in 0..n1 {
        let k = side.node(r, n1);
        let s = u.elem(e)[k];
        let fn_in = normal_flux_unchecked(&s, normals[r][0], normals[r][1], gas);
        res.elem_mut(e)[k] += inv_w * (fluxes[r] - fn_in);
    }
}

/// Strong-form residual `R` with `J dU/dt = -R` at every node.
pub fn residual(
    mesh: &Mesh,
    u: &SolutionField,
    mode: FluxMode,
    bcs: &BoundaryConditions,
    t: f64,
    gas: GasModel,
) -> Result<SolutionField> {
    check_admissible_field(mesh, u, t, gas)?;
    let ops = &mesh.ops;
    let n1 = ops.n1();
    let mut res = SolutionField::zeros(mesh.len(), n1 * n1);
    let mut pts = Vec::with_capacity(n1 * n1);
    for (e, el) in mesh.elements.iter().enumerate() {
        pts.clear();
        pts.extend(u.elem(e).iter().map(|s| PointData::new(s, gas)));
        volume::add_volume_terms(el, &pts, ops, gas, res.elem_mut(e));
    }
    for face in &mesh.faces {
        match *face {
            Face::Conforming {
                left,
                right,
                vertical,
            } => {
                let (sl, sr) = if vertical {
                    (Side::East, Side::West)
                } else {
                    (Side::North, Side::South)
                };
                let normals = &mesh.elements[left].normals[sl.index()];
                let ul = u.elem(left);
                let ur = u.elem(right);
                let flux: Vec<ConservedState> = (0..n1)
                    .map(|r| {
                        let n = normals[r];
                        llf_unchecked(&ul[sl.node(r, n1)], &ur[sr.node(r, n1)], n[0], n[1], gas)
                    })
                    .collect();
                let neg: Vec<ConservedState> = flux.iter().map(|f| -*f).collect();
                add_surface(&mut res, u, mesh, left, sl, &flux, gas);
                add_surface(&mut res, u, mesh, right, sr, &neg, gas);
            }
            Face::Nonconforming {
                coarse,
                coarse_side,
                fine,
            } => {
                let fs = coarse_side.opposite();
                let uc = u.trace(coarse, coarse_side, n1);
                let uf0 = u.trace(fine[0], fs, n1);
                let uf1 = u.trace(fine[1], fs, n1);
                let geom = NonconformingGeometry {
                    coarse_normals: &mesh.elements[coarse].normals[coarse_side.index()],
                    fine_normals: [
                        &mesh.elements[fine[0]].normals[fs.index()],
                        &mesh.elements[fine[1]].normals[fs.index()],
                    ],
                };
                let fluxes = match mode {
                    FluxMode::Es => interface::es_fluxes_unchecked(&uc, [&uf0, &uf1], &geom, ops, gas),
                    FluxMode::Mortar => {
                        interface::mortar_fluxes_unchecked(&uc, [&uf0, &uf1], &geom, ops, gas, DEFAULT_EPS)
                            .map_err(|e| interface_failure(e, coarse, t))?
                    }
                };
                add_surface(&mut res, u, mesh, coarse, coarse_side, &fluxes.coarse, gas);
                add_surface(&mut res, u, mesh, fine[0], fs, &fluxes.fine[0], gas);
                add_surface(&mut res, u, mesh, fine[1], fs, &fluxes.fine[1], gas);
            }
            Face::Boundary { elem, side, tag } => {
                let bc = bcs.get(tag)?;
                let el = &mesh.elements[elem];
                let normals = &el.normals[side.index()];
                let ue = u.elem(elem);
                let mut flux = Vec::with_capacity(n1);
                for r in 0..n1 {
                    let k = side.node(r, n1);
                    let n = normals[r];
                    let ghost = bc.ghost_state(tag, &ue[k], n, el.x[k], el.y[k], t)?;
                    if !ghost.is_finite() || !admissible_unchecked(&ghost, gas) {
                        return Err(Error::Positivity {
                            element: elem,
                            time: t,
                            detail: format!("boundary state on {} is inadmissible", tag.name()),
                        });
                    }
                    flux.push(llf_unchecked(&ue[k], &ghost, n[0], n[1], gas));
                }
                add_surface(&mut res, u, mesh, elem, side, &flux, gas);
            }
        }
    }
    Ok(res)
}

/// Time derivative `dU/dt = -R / J` at every node.
pub fn semidiscrete_rhs(
    mesh: &Mesh,
    u: &SolutionField,
    mode: FluxMode,
    bcs: &BoundaryConditions,
    t: f64,
    gas: GasModel,
) -> Result<SolutionField> {
    let mut r = residual(mesh, u, mode, bcs, t, gas)?;
    for (e, el) in mesh.elements.iter().enumerate() {
        for (k, s) in r.elem_mut(e).iter_mut().enumerate() {
            *s = (-1.0 / el.jac[k]) * *s;
        }
    }
    Ok(r)
}

/// Global integrals `sum w w J U` of each conserved component.
pub fn conserved_totals(mesh: &Mesh, u: &SolutionField) -> ConservedState {
    let w = mesh.ops.weights();
    let mut acc = ConservedState::ZERO;
    for (e, el) in mesh.elements.iter().enumerate() {
        for (k, s) in u.elem(e).iter().enumerate() {
            acc += el.mass(k, w) * *s;
        }
    }
    acc
}

/// Total discrete entropy `sum w w J eta(U)`.
pub fn total_entropy(mesh: &Mesh, u: &SolutionField, gas: GasModel) -> f64 {
    let w = mesh.ops.weights();
    let mut acc = 0.0;
    for (e, el) in mesh.elements.iter().enumerate() {
        for (k, s) in u.elem(e).iter().enumerate() {
            acc += el.mass(k, w) * entropy_density(s, gas);
        }
    }
    acc
}

/// Semi-discrete entropy rate `sum w w J V . dU/dt`.
pub fn entropy_rate(mesh: &Mesh, u: &SolutionField, rhs: &SolutionField, gas: GasModel) -> f64 {
    let w = mesh.ops.weights();
    let mut acc = 0.0;
    for (e, el) in mesh.elements.iter().enumerate() {
        for (k, (s, r)) in u.elem(e).iter().zip(rhs.elem(e)).enumerate() {
            let v = crate::euler::entropy_data_unchecked(s, gas).vars;
            acc += el.mass(k, w) * (v[0] * r.rho + v[1] * r.mom_x + v[2] * r.mom_y + v[3] * r.energy);
        }
    }
    acc
}
