//! Split-form flux-differencing volume term.

use crate::error::{Error, Result};
use crate::euler::{admissible_unchecked, ec_flux_directional, ConservedState, GasModel, PointData};
use crate::mesh::Element;
use crate::reference_ops::ReferenceOperators;

/// `2 sum_m D_im f#_(i,m)j + 2 sum_n D_jn g#_i(j,n)` at every node, with
/// contravariant two-point fluxes built from arithmetic-averaged metrics.
pub fn volume_residual(
    element: &Element,
    values: &[ConservedState],
    ops: &ReferenceOperators,
    gas: GasModel,
) -> Result<Vec<ConservedState>> {
    for u in values {
        if !u.is_finite() {
            return Err(Error::NonFinite);
        }
        if !admissible_unchecked(u, gas) {
            return Err(Error::Inadmissible {
                rho: u.rho,
                p: crate::euler::pressure_unchecked(u, gas),
            });
        }
    }
    let mut out = vec![ConservedState::ZERO; values.len()];
    let pts: Vec<PointData> = values.iter().map(|u| PointData::new(u, gas)).collect();
    add_volume_terms(element, &pts, ops, gas, &mut out);
    Ok(out)
}

pub(crate) fn add_volume_terms(
    el: &Element,
    pts: &[PointData],
    ops: &ReferenceOperators,
    gas: GasModel,
    out: &mut [ConservedState],
) {
    let n1 = ops.n1();
    let d = &ops.diff;
    // xi direction: metric (y_eta, -x_eta)
    for j in 0..n1 {
        let row = n1 * j;
        for i in 0..n1 {
            let a = i + row;
            for m in i..n1 {
                let b = m + row;
                let nx = 0.5 * (el.y_eta[a] + el.y_eta[b]);
                let ny = -0.5 * (el.x_eta[a] + el.x_eta[b]);
                let f = ec_flux_directional(&pts[a], &pts[b], nx, ny, gas);
                out[a] += (2.0 * d.get(i, m)) * f;
                if m != i {
                    out[b] += (2.0 * d.get(m, i)) * f;
                }
            }
        }
    }
    // eta direction: metric (-y_xi, x_xi)
    for i in 0..n1 {
        for j in 0..n1 {
            let a = i + n1 * j;
            for n in j..n1 {
                let b = i + n1 * n;
                let nx = -0.5 * (el.y_xi[a] + el.y_xi[b]);
                let ny = 0.5 * (el.x_xi[a] + el.x_xi[b]);
                let g = ec_flux_directional(&pts[a], &pts[b], nx, ny, gas);
                out[a] += (2.0 * d.get(j, n)) * g;
                if n != j {
                    out[b] += (2.0 * d.get(n, j)) * g;
                }
            }
        }
    }
}
