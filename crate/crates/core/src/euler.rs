//! Pointwise ideal-gas Euler physics.
//!
//! [`ConservedState`] doubles as the generic 4-vector type for fluxes and
//! residuals, so arithmetic operators are defined on it.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GasModel {
    pub gamma: f64,
}

impl Default for GasModel {
    fn default() -> Self {
        Self { gamma: 1.4 }
    }
}

/// Density, momentum and total energy per unit volume at one node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConservedState {
    pub rho: f64,
    pub mom_x: f64,
    pub mom_y: f64,
    pub energy: f64,
}

impl ConservedState {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(rho: f64, mom_x: f64, mom_y: f64, energy: f64) -> Self {
        Self {
            rho,
            mom_x,
            mom_y,
            energy,
        }
    }

    pub fn from_primitive(rho: f64, u: f64, v: f64, p: f64, gas: GasModel) -> Self {
        Self::new(
            rho,
            rho * u,
            rho * v,
            p / (gas.gamma - 1.0) + 0.5 * rho * (u * u + v * v),
        )
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.rho, self.mom_x, self.mom_y, self.energy]
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite()
            && self.mom_x.is_finite()
            && self.mom_y.is_finite()
            && self.energy.is_finite()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.rho * other.rho
            + self.mom_x * other.mom_x
            + self.mom_y * other.mom_y
            + self.energy * other.energy
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `(rho, u, v, p)`; no admissibility check.
    pub fn primitive(&self, gas: GasModel) -> [f64; 4] {
        let u = self.mom_x / self.rho;
        let v = self.mom_y / self.rho;
        [self.rho, u, v, pressure_unchecked(self, gas)]
    }
}

impl Add for ConservedState {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(
            self.rho + o.rho,
            self.mom_x + o.mom_x,
            self.mom_y + o.mom_y,
            self.energy + o.energy,
        )
    }
}

impl Sub for ConservedState {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.rho - o.rho,
            self.mom_x - o.mom_x,
            self.mom_y - o.mom_y,
            self.energy - o.energy,
        )
    }
}

impl Mul<ConservedState> for f64 {
    type Output = ConservedState;
    #[inline]
    fn mul(self, u: ConservedState) -> ConservedState {
        ConservedState::new(self * u.rho, self * u.mom_x, self * u.mom_y, self * u.energy)
    }
}

impl Mul<f64> for ConservedState {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        s * self
    }
}

impl Neg for ConservedState {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        -1.0 * self
    }
}

impl AddAssign for ConservedState {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for ConservedState {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl Index<usize> for ConservedState {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        match k {
            0 => &self.rho,
            1 => &self.mom_x,
            2 => &self.mom_y,
            3 => &self.energy,
            _ => panic!("component {k} out of range"),
        }
    }
}

impl IndexMut<usize> for ConservedState {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        match k {
            0 => &mut self.rho,
            1 => &mut self.mom_x,
            2 => &mut self.mom_y,
            3 => &mut self.energy,
            _ => panic!("component {k} out of range"),
        }
    }
}

/// Entropy density, entropy variables and entropy potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyData {
    pub eta: f64,
    pub vars: [f64; 4],
    pub psi_x: f64,
    pub psi_y: f64,
}

#[inline]
pub(crate) fn pressure_unchecked(u: &ConservedState, gas: GasModel) -> f64 {
    (gas.gamma - 1.0) * (u.energy - 0.5 * (u.mom_x * u.mom_x + u.mom_y * u.mom_y) / u.rho)
}

pub fn pressure(u: &ConservedState, gas: GasModel) -> Result<f64> {
    if u.rho == 0.0 {
        return Err(Error::ZeroDensity);
    }
    Ok(pressure_unchecked(u, gas))
}

#[inline]
pub(crate) fn admissible_unchecked(u: &ConservedState, gas: GasModel) -> bool {
    u.rho > 0.0 && pressure_unchecked(u, gas) > 0.0
}

pub fn is_admissible(u: &ConservedState, gas: GasModel) -> Result<bool> {
    if !u.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(admissible_unchecked(u, gas))
}

fn check_admissible(u: &ConservedState, gas: GasModel) -> Result<()> {
    if !u.is_finite() {
        return Err(Error::NonFinite);
    }
    let p = pressure_unchecked(u, gas);
    if u.rho > 0.0 && p > 0.0 {
        Ok(())
    } else {
        Err(Error::Inadmissible { rho: u.rho, p })
    }
}

/// Flux `f nx + g ny` given a precomputed pressure.
#[inline]
pub(crate) fn normal_flux_with_pressure(u: &ConservedState, p: f64, nx: f64, ny: f64) -> ConservedState {
    let vn = (u.mom_x * nx + u.mom_y * ny) / u.rho;
    ConservedState::new(
        u.rho * vn,
        u.mom_x * vn + p * nx,
        u.mom_y * vn + p * ny,
        (u.energy + p) * vn,
    )
}

#[inline]
pub(crate) fn normal_flux_unchecked(u: &ConservedState, nx: f64, ny: f64, gas: GasModel) -> ConservedState {
    normal_flux_with_pressure(u, pressure_unchecked(u, gas), nx, ny)
}

/// Cartesian fluxes `(f, g)`.
pub fn physical_flux(u: &ConservedState, gas: GasModel) -> Result<(ConservedState, ConservedState)> {
    if u.rho <= 0.0 {
        return Err(Error::NonPositiveDensity(u.rho));
    }
    let p = pressure_unchecked(u, gas);
    Ok((
        normal_flux_with_pressure(u, p, 1.0, 0.0),
        normal_flux_with_pressure(u, p, 0.0, 1.0),
    ))
}

pub(crate) fn entropy_data_unchecked(u: &ConservedState, gas: GasModel) -> EntropyData {
    let g = gas.gamma;
    let rho = u.rho;
    let vx = u.mom_x / rho;
    let vy = u.mom_y / rho;
    let p = pressure_unchecked(u, gas);
    let s = p.ln() - g * rho.ln();
    // Gradient of eta with respect to U; the scaling is rho / p (not 1/c^2).
    let b = rho / p;
    EntropyData {
        eta: -rho * s / (g - 1.0),
        vars: [
            (g - s) / (g - 1.0) - 0.5 * (vx * vx + vy * vy) * b,
            vx * b,
            vy * b,
            -b,
        ],
        psi_x: u.mom_x,
        psi_y: u.mom_y,
    }
}

pub fn entropy_data(u: &ConservedState, gas: GasModel) -> Result<EntropyData> {
    check_admissible(u, gas)?;
    Ok(entropy_data_unchecked(u, gas))
}

/// Entropy density `eta(U)` only.
#[inline]
pub(crate) fn entropy_density(u: &ConservedState, gas: GasModel) -> f64 {
    let p = pressure_unchecked(u, gas);
    -u.rho * (p.ln() - gas.gamma * u.rho.ln()) / (gas.gamma - 1.0)
}

/// Logarithmic mean `(b - a) / ln(b / a)` with a series near `a == b`.
#[inline]
pub fn log_mean(a: f64, b: f64) -> f64 {
    let f2 = (a * (a - 2.0 * b) + b * b) / (a * (a + 2.0 * b) + b * b);
    if f2 < 1e-4 {
        (a + b) / (2.0 + f2 * (2.0 / 3.0 + f2 * (2.0 / 5.0 + 2.0 / 7.0 * f2)))
    } else {
        (b - a) / (b / a).ln()
    }
}

/// Node quantities reused by every two-point flux evaluation.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PointData {
    pub rho: f64,
    pub u: f64,
    pub v: f64,
    /// rho / (2 p)
    pub beta: f64,
}

impl PointData {
    #[inline]
    pub fn new(s: &ConservedState, gas: GasModel) -> Self {
        let u = s.mom_x / s.rho;
        let v = s.mom_y / s.rho;
        let p = pressure_unchecked(s, gas);
        Self {
            rho: s.rho,
            u,
            v,
            beta: 0.5 * s.rho / p,
        }
    }
}

/// Entropy-conservative flux contracted with direction `(nx, ny)`.
#[inline]
pub(crate) fn ec_flux_directional(l: &PointData, r: &PointData, nx: f64, ny: f64, gas: GasModel) -> ConservedState {
    let rho_mean = log_mean(l.rho, r.rho);
    let beta_mean = log_mean(l.beta, r.beta);
    let rho_avg = 0.5 * (l.rho + r.rho);
    let beta_avg = 0.5 * (l.beta + r.beta);
    let u_avg = 0.5 * (l.u + r.u);
    let v_avg = 0.5 * (l.v + r.v);
    let p_mean = 0.5 * rho_avg / beta_avg;
    let vel_sq_avg = 0.5 * (l.u * l.u + l.v * l.v + r.u * r.u + r.v * r.v);
    let f1 = rho_mean * (u_avg * nx + v_avg * ny);
    let f2 = f1 * u_avg + p_mean * nx;
    let f3 = f1 * v_avg + p_mean * ny;
    let f4 = f1 * 0.5 * (1.0 / ((gas.gamma - 1.0) * beta_mean) - vel_sq_avg) + f2 * u_avg + f3 * v_avg;
    ConservedState::new(f1, f2, f3, f4)
}

/// Symmetric entropy-conservative two-point flux `(f#, g#)`.
pub fn ec_flux(
    ul: &ConservedState,
    ur: &ConservedState,
    gas: GasModel,
) -> Result<(ConservedState, ConservedState)> {
    check_admissible(ul, gas)?;
    check_admissible(ur, gas)?;
    let l = PointData::new(ul, gas);
    let r = PointData::new(ur, gas);
    Ok((
        ec_flux_directional(&l, &r, 1.0, 0.0, gas),
        ec_flux_directional(&l, &r, 0.0, 1.0, gas),
    ))
}

/// `|u . n_unit| + c` for an admissible state.
#[inline]
pub(crate) fn wave_speed(u: &ConservedState, nx_unit: f64, ny_unit: f64, gas: GasModel) -> f64 {
    let p = pressure_unchecked(u, gas);
    let vn = (u.mom_x * nx_unit + u.mom_y * ny_unit) / u.rho;
    vn.abs() + (gas.gamma * p / u.rho).sqrt()
}

/// Pairwise maximum wave-speed estimate along the direction of `(nx, ny)`.
#[inline]
pub(crate) fn pair_alpha(ul: &ConservedState, ur: &ConservedState, nx: f64, ny: f64, gas: GasModel) -> f64 {
    let len = (nx * nx + ny * ny).sqrt();
    let (ex, ey) = (nx / len, ny / len);
    wave_speed(ul, ex, ey, gas).max(wave_speed(ur, ex, ey, gas))
}

/// Local Lax–Friedrichs flux with a prescribed wave speed.
#[inline]
pub(crate) fn llf_with_alpha(
    ul: &ConservedState,
    ur: &ConservedState,
    nx: f64,
    ny: f64,
    alpha: f64,
    gas: GasModel,
) -> ConservedState {
    let len = (nx * nx + ny * ny).sqrt();
    let fl = normal_flux_unchecked(ul, nx, ny, gas);
    let fr = normal_flux_unchecked(ur, nx, ny, gas);
    0.5 * (fl + fr) - (0.5 * alpha * len) * (*ur - *ul)
}

#[inline]
pub(crate) fn llf_unchecked(
    ul: &ConservedState,
    ur: &ConservedState,
    nx: f64,
    ny: f64,
    gas: GasModel,
) -> ConservedState {
    let alpha = pair_alpha(ul, ur, nx, ny, gas);
    llf_with_alpha(ul, ur, nx, ny, alpha, gas)
}

/// Local Lax–Friedrichs flux along the (not necessarily unit) normal `n`.
pub fn llf_flux(
    ul: &ConservedState,
    ur: &ConservedState,
    n: [f64; 2],
    gas: GasModel,
) -> Result<ConservedState> {
    if n[0] == 0.0 && n[1] == 0.0 {
        return Err(Error::ZeroNormal);
    }
    check_admissible(ul, gas)?;
    check_admissible(ur, gas)?;
    Ok(llf_unchecked(ul, ur, n[0], n[1], gas))
}
