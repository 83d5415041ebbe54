//! Interface numerical fluxes.
//!
//! Every function returns fluxes in the outward direction of the side they
//! belong to, already contracted with that side's metric-scaled normals.

use crate::error::{Error, Result};
use crate::euler::{
    admissible_unchecked, llf_unchecked, normal_flux_unchecked, pair_alpha, pressure_unchecked,
    ConservedState, GasModel,
};
use crate::limiters::limit_toward_average;
use crate::reference_ops::ReferenceOperators;

/// Fluxes on the two fine segments and the coarse edge of a 2:1 face.
#[derive(Clone, Debug, PartialEq)]
pub struct NonconformingFluxes {
    pub fine: [Vec<ConservedState>; 2],
    pub coarse: Vec<ConservedState>,
}

fn check_trace(values: &[ConservedState], gas: GasModel) -> Result<()> {
    for u in values {
        if !u.is_finite() {
            return Err(Error::NonFinite);
        }
        if !admissible_unchecked(u, gas) {
            return Err(Error::Inadmissible {
                rho: u.rho,
                p: pressure_unchecked(u, gas),
            });
        }
    }
    Ok(())
}

fn check_len(n1: usize, lens: &[usize]) -> Result<()> {
    if lens.iter().any(|&l| l != n1) {
        return Err(Error::InvalidMesh(format!(
            "face trace lengths {lens:?} do not match {n1} nodes"
        )));
    }
    Ok(())
}

/// LLF flux on a conforming face, outward for the side owning `normals`.
/// The neighbor's outward flux is the negation.
pub fn conforming_face_flux(
    normals: &[[f64; 2]],
    left: &[ConservedState],
    right: &[ConservedState],
    gas: GasModel,
) -> Result<Vec<ConservedState>> {
    check_len(normals.len(), &[left.len(), right.len()])?;
    check_trace(left, gas)?;
    check_trace(right, gas)?;
    if normals.iter().any(|n| n[0] == 0.0 && n[1] == 0.0) {
        return Err(Error::ZeroNormal);
    }
    Ok(normals
        .iter()
        .zip(left.iter().zip(right))
        .map(|(n, (l, r))| llf_unchecked(l, r, n[0], n[1], gas))
        .collect())
}

/// Geometry of one nonconforming face: the coarse side's outward normals and
/// each fine segment's outward normals.
#[derive(Clone, Copy, Debug)]
pub struct NonconformingGeometry<'a> {
    pub coarse_normals: &'a [[f64; 2]],
    pub fine_normals: [&'a [[f64; 2]]; 2],
}

#[inline]
fn averaged_normal(nf: [f64; 2], nc: [f64; 2]) -> [f64; 2] {
    [0.5 * (nf[0] - 0.5 * nc[0]), 0.5 * (nf[1] - 0.5 * nc[1])]
}

#[inline]
fn norm(n: [f64; 2]) -> f64 {
    (n[0] * n[0] + n[1] * n[1]).sqrt()
}

/// Wave speeds `alpha_i` used by the sign-corrected flux on each fine segment:
/// the largest pairwise estimate over coarse nodes coupled to fine node `i`.
pub(crate) fn es_wave_speeds(
    coarse: &[ConservedState],
    fine: [&[ConservedState]; 2],
    geom: &NonconformingGeometry,
    ops: &ReferenceOperators,
    gas: GasModel,
) -> [Vec<f64>; 2] {
    let n1 = ops.n1();
    let nc = &ops.nc;
    let mut out = [vec![0.0; n1], vec![0.0; n1]];
    for k in 0..2 {
        for i in 0..n1 {
            let nf = geom.fine_normals[k][i];
            let mut a: f64 = 0.0;
            for j in 0..n1 {
                if nc.interp[k][(i, j)].abs() > 1e-14 {
                    let nij = averaged_normal(nf, geom.coarse_normals[j]);
                    a = a.max(pair_alpha(&fine[k][i], &coarse[j], nij[0], nij[1], gas));
                }
            }
            out[k][i] = a;
        }
    }
    out
}

/// Sign-corrected two-point flux `F*(U_F, U_C) . n_ij`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn es_pair_flux(
    uf: &ConservedState,
    uc: &ConservedState,
    ff: &(ConservedState, ConservedState),
    fc: &(ConservedState, ConservedState),
    nij: [f64; 2],
    sign: f64,
    alpha: f64,
    nf_len: f64,
) -> ConservedState {
    let central = 0.5 * ((ff.0 + fc.0) * nij[0] + (ff.1 + fc.1) * nij[1]);
    central - (sign * 0.5 * alpha * nf_len) * (*uc - *uf)
}

fn cartesian_fluxes(values: &[ConservedState], gas: GasModel) -> Vec<(ConservedState, ConservedState)> {
    values
        .iter()
        .map(|u| {
            (
                normal_flux_unchecked(u, 1.0, 0.0, gas),
                normal_flux_unchecked(u, 0.0, 1.0, gas),
            )
        })
        .collect()
}

/// Entropy-stable nonconforming fluxes with sign-corrected dissipation.
pub fn es_nonconforming_fluxes(
    coarse: &[ConservedState],
    fine: [&[ConservedState]; 2],
    geom: &NonconformingGeometry,
    ops: &ReferenceOperators,
    gas: GasModel,
) -> Result<NonconformingFluxes> {
    let n1 = ops.n1();
    check_len(
        n1,
        &[
            coarse.len(),
            fine[0].len(),
            fine[1].len(),
            geom.coarse_normals.len(),
            geom.fine_normals[0].len(),
            geom.fine_normals[1].len(),
        ],
    )?;
    check_trace(coarse, gas)?;
    check_trace(fine[0], gas)?;
    check_trace(fine[1], gas)?;
    Ok(es_fluxes_unchecked(coarse, fine, geom, ops, gas))
}

pub(crate) fn es_fluxes_unchecked(
    coarse: &[ConservedState],
    fine: [&[ConservedState]; 2],
    geom: &NonconformingGeometry,
    ops: &ReferenceOperators,
    gas: GasModel,
) -> NonconformingFluxes {
    let n1 = ops.n1();
    let nc = &ops.nc;
    let alpha = es_wave_speeds(coarse, fine, geom, ops, gas);
    let fc = cartesian_fluxes(coarse, gas);
    let mut out = NonconformingFluxes {
        fine: [vec![ConservedState::ZERO; n1], vec![ConservedState::ZERO; n1]],
        coarse: vec![ConservedState::ZERO; n1],
    };
    for k in 0..2 {
        let ff = cartesian_fluxes(fine[k], gas);
        for i in 0..n1 {
            let nf = geom.fine_normals[k][i];
            let nf_len = norm(nf);
            for j in 0..n1 {
                let p = nc.interp[k][(i, j)];
                if p == 0.0 {
                    continue;
                }
                let nij = averaged_normal(nf, geom.coarse_normals[j]);
                let f = es_pair_flux(
                    &fine[k][i],
                    &coarse[j],
                    &ff[i],
                    &fc[j],
                    nij,
                    p.signum(),
                    alpha[k][i],
                    nf_len,
                );
                out.fine[k][i] += p * f;
                out.coarse[j] += (-2.0 * nc.proj[k][(j, i)]) * f;
            }
        }
    }
    out
}

/// Coarse trace interpolated to both fine segments, limited toward the
/// coarse edge mean if any interpolated state is inadmissible.
pub(crate) fn interpolate_coarse_trace(
    coarse: &[ConservedState],
    ops: &ReferenceOperators,
    gas: GasModel,
    eps: f64,
) -> Result<[Vec<ConservedState>; 2]> {
    let n1 = ops.n1();
    let nc = &ops.nc;
    let mut vals: Vec<ConservedState> = Vec::with_capacity(2 * n1);
    for k in 0..2 {
        for i in 0..n1 {
            let mut s = ConservedState::ZERO;
            for j in 0..n1 {
                s += nc.interp[k][(i, j)] * coarse[j];
            }
            vals.push(s);
        }
    }
    if !vals.iter().all(|s| admissible_unchecked(s, gas)) {
        let w = ops.weights();
        let mut mean = ConservedState::ZERO;
        for j in 0..n1 {
            mean += (0.5 * w[j]) * coarse[j];
        }
        limit_toward_average(&mean, &mut vals, gas, eps)?;
        if let Some(bad) = vals.iter().find(|s| !admissible_unchecked(s, gas)) {
            return Err(Error::Inadmissible {
                rho: bad.rho,
                p: pressure_unchecked(bad, gas),
            });
        }
    }
    let second = vals.split_off(n1);
    Ok([vals, second])
}

/// Mortar fluxes: LLF on the fine segments against the interpolated coarse
/// trace, projected back to the coarse edge.
pub fn mortar_nonconforming_fluxes(
    coarse: &[ConservedState],
    fine: [&[ConservedState]; 2],
    geom: &NonconformingGeometry,
    ops: &ReferenceOperators,
    gas: GasModel,
    eps: f64,
) -> Result<NonconformingFluxes> {
    let n1 = ops.n1();
    check_len(
        n1,
        &[
            coarse.len(),
            fine[0].len(),
            fine[1].len(),
            geom.coarse_normals.len(),
            geom.fine_normals[0].len(),
            geom.fine_normals[1].len(),
        ],
    )?;
    check_trace(coarse, gas)?;
    check_trace(fine[0], gas)?;
    check_trace(fine[1], gas)?;
    mortar_fluxes_unchecked(coarse, fine, geom, ops, gas, eps)
}

pub(crate) fn mortar_fluxes_unchecked(
    coarse: &[ConservedState],
    fine: [&[ConservedState]; 2],
    geom: &NonconformingGeometry,
    ops: &ReferenceOperators,
    gas: GasModel,
    eps: f64,
) -> Result<NonconformingFluxes> {
    let n1 = ops.n1();
    let nc = &ops.nc;
    let interp = interpolate_coarse_trace(coarse, ops, gas, eps)?;
    let mut out = NonconformingFluxes {
        fine: [vec![ConservedState::ZERO; n1], vec![ConservedState::ZERO; n1]],
        coarse: vec![ConservedState::ZERO; n1],
    };
    for k in 0..2 {
        for i in 0..n1 {
            let n = geom.fine_normals[k][i];
            out.fine[k][i] = llf_unchecked(&fine[k][i], &interp[k][i], n[0], n[1], gas);
        }
        for j in 0..n1 {
            let mut s = ConservedState::ZERO;
            for i in 0..n1 {
                s += nc.proj[k][(j, i)] * out.fine[k][i];
            }
            out.coarse[j] += -2.0 * s;
        }
    }
    Ok(out)
}
