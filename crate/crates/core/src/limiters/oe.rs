//! Oscillation-eliminating damping of hierarchical modal increments, driven
//! by face jumps of the solution and its physical derivatives.

use crate::dgsem::SolutionField;
use crate::euler::{pressure_unchecked, ConservedState, GasModel};
use crate::mesh::{Element, Mesh, Neighbor, Side};
use crate::reference_ops::ReferenceOperators;

use super::cell_average;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OEConfig {
    /// Damping strength in `(0, 1]`.
    pub s: f64,
    /// Troubled-cell threshold on the jump indicator.
    pub c_oe: f64,
}

impl Default for OEConfig {
    fn default() -> Self {
        Self { s: 0.2, c_oe: 0.1 }
    }
}

/// A component whose spread is below this fraction of its natural scale is
/// treated as constant.
const FLAT_TOL: f64 = 1e-10;

/// Result of [`apply_oe`] on one element.
#[derive(Clone, Debug, PartialEq)]
pub struct OeOutcome {
    pub values: Vec<ConservedState>,
    /// Damping coefficients `delta_m`, `m = 0..=N`.
    pub delta: Vec<f64>,
}

/// Physical derivatives `d^a U / dx^a1 dy^a2` for all `|a| <= order`, indexed
/// by [`multi_index`].
fn derivative_fields(el: &Element, values: &[ConservedState], ops: &ReferenceOperators, order: usize) -> Vec<Vec<ConservedState>> {
    let count = (order + 1) * (order + 2) / 2;
    let mut out: Vec<Vec<ConservedState>> = Vec::with_capacity(count);
    out.push(values.to_vec());
    for total in 1..=order {
        for a2 in 0..=total {
            let a1 = total - a2;
            // differentiate the field with one lower order in the chosen direction
            let (src, dir_x) = if a1 > 0 {
                (multi_index(a1 - 1, a2), true)
            } else {
                (multi_index(a1, a2 - 1), false)
            };
            let d = physical_derivative(el, &out[src], ops, dir_x);
            out.push(d);
        }
    }
    out
}

/// Position of `(a1, a2)` in the ordering used by [`derivative_fields`].
#[inline]
fn multi_index(a1: usize, a2: usize) -> usize {
    let total = a1 + a2;
    total * (total + 1) / 2 + a2
}

pub(crate) fn physical_derivative(el: &Element, f: &[ConservedState], ops: &ReferenceOperators, dir_x: bool) -> Vec<ConservedState> {
    let n1 = ops.n1();
    let d = &ops.diff;
    let mut out = vec![ConservedState::ZERO; f.len()];
    for j in 0..n1 {
        for i in 0..n1 {
            let mut dr = ConservedState::ZERO;
            let mut ds = ConservedState::ZERO;
            for m in 0..n1 {
                dr += d.get(i, m) * f[m + n1 * j];
                ds += d.get(j, m) * f[i + n1 * m];
            }
            let k = i + n1 * j;
            let inv = 1.0 / el.jac[k];
            out[k] = if dir_x {
                (el.y_eta[k] * inv) * dr - (el.y_xi[k] * inv) * ds
            } else {
                (el.x_xi[k] * inv) * ds - (el.x_eta[k] * inv) * dr
            };
        }
    }
    out
}

fn side_values(field: &[ConservedState], side: Side, n1: usize) -> Vec<ConservedState> {
    (0..n1).map(|r| field[side.node(r, n1)]).collect()
}

fn interp_to_fine(trace: &[ConservedState], k: usize, ops: &ReferenceOperators) -> Vec<ConservedState> {
    let n1 = ops.n1();
    (0..n1)
        .map(|i| {
            let mut s = ConservedState::ZERO;
            for j in 0..n1 {
                s += ops.nc.interp[k][(i, j)] * trace[j];
            }
            s
        })
        .collect()
}

/// Natural magnitude of each component for the flatness test.
fn component_scales(avg: &ConservedState, gas: GasModel) -> [f64; 4] {
    let p = pressure_unchecked(avg, gas).max(0.0);
    let c = if avg.rho > 0.0 {
        (gas.gamma * p / avg.rho).sqrt()
    } else {
        0.0
    };
    let speed = if avg.rho > 0.0 {
        (avg.mom_x.hypot(avg.mom_y)) / avg.rho
    } else {
        0.0
    };
    let m = avg.rho.abs() * (speed + c);
    [avg.rho.abs(), m, m, avg.energy.abs().max(p)]
}

/// Per-component `1 / ||U - U_avg||_inf`, zero for flat components.
fn inverse_spreads(values: &[ConservedState], avg: &ConservedState, gas: GasModel) -> [f64; 4] {
    let scales = component_scales(avg, gas);
    let mut out = [0.0; 4];
    for c in 0..4 {
        let spread = values.iter().fold(0.0_f64, |m, v| m.max((v[c] - avg[c]).abs()));
        if spread > FLAT_TOL * scales[c] && spread > 0.0 {
            out[c] = 1.0 / spread;
        }
    }
    out
}

/// Face averages of `|jump|` per component for every derivative field of
/// element `e` across `side`. Returns `None` on boundary faces.
fn face_jump_averages(
    mesh: &Mesh,
    u: &SolutionField,
    e: usize,
    side: Side,
    own: &[Vec<ConservedState>],
    order: usize,
    cache: &mut DerivativeCache,
) -> Option<Vec<[f64; 4]>> {
    let ops = &mesh.ops;
    let n1 = ops.n1();
    let w = ops.weights();
    let count = own.len();
    let mut acc = vec![[0.0; 4]; count];
    let mut measure = 0.0;
    let add = |acc: &mut Vec<[f64; 4]>, a: usize, jump: &ConservedState, dm: f64| {
        for c in 0..4 {
            acc[a][c] += dm * jump[c].abs();
        }
    };
    match mesh.neighbors[e][side.index()] {
        Neighbor::Boundary(_) => return None,
        Neighbor::Conforming { elem, side: ns } => {
            let other = cache.get(mesh, u, elem, order);
            let normals = &mesh.elements[e].normals[side.index()];
            for r in 0..n1 {
                let dm = w[r] * norm(normals[r]);
                measure += dm;
                for a in 0..count {
                    let jump = own[a][side.node(r, n1)] - other[a][ns.node(r, n1)];
                    add(&mut acc, a, &jump, dm);
                }
            }
        }
        Neighbor::Coarser { elem, coarse_side, k } => {
            let other = cache.get(mesh, u, elem, order);
            let normals = &mesh.elements[e].normals[side.index()];
            for r in 0..n1 {
                measure += w[r] * norm(normals[r]);
            }
            for a in 0..count {
                let ct = interp_to_fine(&side_values(&other[a], coarse_side, n1), k, ops);
                for r in 0..n1 {
                    let jump = own[a][side.node(r, n1)] - ct[r];
                    add(&mut acc, a, &jump, w[r] * norm(normals[r]));
                }
            }
        }
        Neighbor::Finer { elems, fine_side } => {
            for (k, &f) in elems.iter().enumerate() {
                let other = cache.get(mesh, u, f, order);
                let normals = &mesh.elements[f].normals[fine_side.index()];
                for r in 0..n1 {
                    measure += w[r] * norm(normals[r]);
                }
                for a in 0..count {
                    let ct = interp_to_fine(&side_values(&own[a], side, n1), k, ops);
                    for r in 0..n1 {
                        let jump = ct[r] - other[a][fine_side.node(r, n1)];
                        add(&mut acc, a, &jump, w[r] * norm(normals[r]));
                    }
                }
            }
        }
    }
    let inv = 1.0 / measure;
    for v in acc.iter_mut() {
        for c in v.iter_mut() {
            *c *= inv;
        }
    }
    Some(acc)
}

#[inline]
fn norm(n: [f64; 2]) -> f64 {
    n[0].hypot(n[1])
}

/// Lazily computed derivative fields of neighbor elements.
struct DerivativeCache {
    order: usize,
    fields: Vec<Option<Vec<Vec<ConservedState>>>>,
}

impl DerivativeCache {
    fn new(n: usize, order: usize) -> Self {
        Self {
            order,
            fields: vec![None; n],
        }
    }

    fn get(&mut self, mesh: &Mesh, u: &SolutionField, e: usize, order: usize) -> Vec<Vec<ConservedState>> {
        debug_assert!(order <= self.order);
        let count = (order + 1) * (order + 2) / 2;
        let slot = &mut self.fields[e];
        if slot.is_none() {
            *slot = Some(if self.order == 0 {
                vec![u.elem(e).to_vec()]
            } else {
                derivative_fields(&mesh.elements[e], u.elem(e), &mesh.ops, self.order)
            });
        }
        slot.as_ref().unwrap()[..count].to_vec()
    }
}

fn sigma_factor(m: usize, h: f64, degree: usize) -> f64 {
    let fact: f64 = (1..=m).map(|v| v as f64).product();
    (2 * m + 1) as f64 * h.powi(m as i32) / (2.0 * (2 * degree - 1) as f64 * fact)
}

/// Sum over faces of the zeroth-order jump indicator.
pub fn shock_indicator(mesh: &Mesh, u: &SolutionField, e: usize, gas: GasModel) -> f64 {
    let mut cache = DerivativeCache::new(mesh.len(), 0);
    indicator_with_cache(mesh, u, e, gas, &mut cache)
}

fn indicator_with_cache(mesh: &Mesh, u: &SolutionField, e: usize, gas: GasModel, cache: &mut DerivativeCache) -> f64 {
    let ops = &mesh.ops;
    let el = &mesh.elements[e];
    let vals = u.elem(e);
    let avg = cell_average(el, vals, ops);
    let inv = inverse_spreads(vals, &avg, gas);
    if inv.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let own = vec![vals.to_vec()];
    let factor = sigma_factor(0, el.h, ops.degree());
    let mut total = 0.0;
    for side in Side::ALL {
        if let Some(j) = face_jump_averages(mesh, u, e, side, &own, 0, cache) {
            let s = (0..4).map(|c| j[0][c] * inv[c]).fold(0.0, f64::max);
            total += factor * s;
        }
    }
    total
}

/// Indicator values for every element.
pub fn indicators(mesh: &Mesh, u: &SolutionField, gas: GasModel) -> Vec<f64> {
    let mut cache = DerivativeCache::new(mesh.len(), 0);
    (0..mesh.len())
        .map(|e| indicator_with_cache(mesh, u, e, gas, &mut cache))
        .collect()
}

/// Hierarchical damping on element `e` with step `dt`.
pub fn apply_oe(mesh: &Mesh, u: &SolutionField, e: usize, cfg: &OEConfig, dt: f64, gas: GasModel) -> OeOutcome {
    let mut cache = DerivativeCache::new(mesh.len(), mesh.degree());
    apply_oe_with_cache(mesh, u, e, cfg, dt, gas, &mut cache)
}

fn apply_oe_with_cache(
    mesh: &Mesh,
    u: &SolutionField,
    e: usize,
    cfg: &OEConfig,
    dt: f64,
    gas: GasModel,
    cache: &mut DerivativeCache,
) -> OeOutcome {
    let ops = &mesh.ops;
    let n = ops.degree();
    let el = &mesh.elements[e];
    let vals = u.elem(e);
    let avg = cell_average(el, vals, ops);
    let inv = inverse_spreads(vals, &avg, gas);
    let mut delta = vec![0.0; n + 1];
    if inv.iter().all(|&v| v == 0.0) {
        return OeOutcome {
            values: vals.to_vec(),
            delta,
        };
    }
    let own = cache.get(mesh, u, e, n);
    let faces: Vec<Vec<[f64; 4]>> = Side::ALL
        .iter()
        .filter_map(|&s| face_jump_averages(mesh, u, e, s, &own, n, cache))
        .collect();
    let p = pressure_unchecked(&avg, gas).max(0.0);
    let beta = avg.mom_x.hypot(avg.mom_y) / avg.rho + (gas.gamma * p / avg.rho).sqrt();
    for (m, dm) in delta.iter_mut().enumerate() {
        let factor = sigma_factor(m, el.h, n);
        let mut sum_f = 0.0;
        for jumps in &faces {
            let mut best: f64 = 0.0;
            for c in 0..4 {
                let mut s = 0.0;
                for total in 0..=m {
                    for a2 in 0..=total {
                        s += jumps[multi_index(total - a2, a2)][c];
                    }
                }
                best = best.max(s * inv[c]);
            }
            sum_f += factor * best;
        }
        *dm = beta / el.h * sum_f;
    }
    let damp: Vec<f64> = (0..=n)
        .map(|k| {
            let expo: f64 = delta[..=k].iter().sum();
            (-cfg.s * dt * expo).exp()
        })
        .collect();
    OeOutcome {
        values: damp_modes(el, vals, ops, &damp),
        delta,
    }
}

/// Orthonormal (mass-weighted) modal basis ordered by shell
/// `k = max(a, b)` of the tensor Legendre index `(a, b)`.
fn modal_basis(el: &Element, ops: &ReferenceOperators) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n1 = ops.n1();
    let np = n1 * n1;
    let w = ops.weights();
    let mass: Vec<f64> = (0..np).map(|k| el.mass(k, w)).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(np);
    let mut shell = Vec::with_capacity(np);
    for k in 0..n1 {
        for b in 0..=k {
            for a in 0..=k {
                if a.max(b) != k {
                    continue;
                }
                let mut v: Vec<f64> = (0..np)
                    .map(|q| ops.legendre[q % n1][a] * ops.legendre[q / n1][b])
                    .collect();
                // two passes of modified Gram–Schmidt
                for _ in 0..2 {
                    for qv in &basis {
                        let dot: f64 = (0..np).map(|q| mass[q] * v[q] * qv[q]).sum();
                        for q in 0..np {
                            v[q] -= dot * qv[q];
                        }
                    }
                }
                let nrm = (0..np).map(|q| mass[q] * v[q] * v[q]).sum::<f64>().sqrt();
                for x in v.iter_mut() {
                    *x /= nrm;
                }
                basis.push(v);
                shell.push(k);
            }
        }
    }
    (basis, shell)
}

fn damp_modes(el: &Element, vals: &[ConservedState], ops: &ReferenceOperators, damp: &[f64]) -> Vec<ConservedState> {
    let np = vals.len();
    let w = ops.weights();
    let (basis, shell) = modal_basis(el, ops);
    let avg = cell_average(el, vals, ops);
    // work with the fluctuation so the constant mode is kept exactly
    let fluct: Vec<ConservedState> = vals.iter().map(|v| *v - avg).collect();
    let mut out = vec![avg; np];
    for (q, k) in basis.iter().zip(&shell) {
        if *k == 0 {
            continue;
        }
        let mut coef = ConservedState::ZERO;
        for i in 0..np {
            coef += (el.mass(i, w) * q[i]) * fluct[i];
        }
        let c = damp[*k] * coef;
        for i in 0..np {
            out[i] += q[i] * c;
        }
    }
    out
}

/// Apply OE to every element whose indicator exceeds the threshold.
/// Untouched elements keep bit-identical values.
pub fn apply_selective_oe(
    mesh: &Mesh,
    u: &mut SolutionField,
    cfg: &OEConfig,
    dt: f64,
    gas: GasModel,
    reports: Option<&mut Vec<super::LimiterReport>>,
) -> usize {
    let ind = indicators(mesh, u, gas);
    let mut cache = DerivativeCache::new(mesh.len(), mesh.degree());
    let mut updates = Vec::new();
    for (e, &i) in ind.iter().enumerate() {
        if i > cfg.c_oe {
            updates.push((e, apply_oe_with_cache(mesh, u, e, cfg, dt, gas, &mut cache)));
        }
    }
    let count = updates.len();
    if let Some(reports) = reports {
        reports.resize(mesh.len(), Default::default());
        for (e, &i) in ind.iter().enumerate() {
            reports[e].indicator = i;
            reports[e].oe_applied = false;
        }
        for (e, out) in &updates {
            reports[*e].oe_applied = true;
            for (m, d) in out.delta.iter().enumerate().take(9) {
                reports[*e].delta[m] = *d;
            }
        }
    }
    for (e, out) in updates {
        u.elem_mut(e).copy_from_slice(&out.values);
    }
    count
}
