//! Two-stage Zhang–Shu scaling limiter.

use crate::error::{Error, Result};
use crate::euler::{pressure_unchecked, ConservedState, GasModel};
use crate::mesh::Element;
use crate::reference_ops::ReferenceOperators;

use super::cell_average;

/// Default absolute floor for density and pressure.
pub const DEFAULT_EPS: f64 = 1e-13;

/// Scaling factors applied by one limiter call. `1.0` means untouched.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFactors {
    pub density: f64,
    pub pressure: f64,
}

impl ScalingFactors {
    pub const IDENTITY: Self = Self {
        density: 1.0,
        pressure: 1.0,
    };

    pub fn is_identity(&self) -> bool {
        self.density == 1.0 && self.pressure == 1.0
    }
}

/// Largest `t` in `[0, 1]` with `p(avg + t d) >= floor`, given that it holds
/// at `t = 0` and fails at `t = 1`.
fn pressure_root(avg: &ConservedState, d: &ConservedState, floor: f64, gas: GasModel) -> f64 {
    let gm1 = gas.gamma - 1.0;
    let e0 = avg.energy - floor / gm1;
    // 2 rho(t) (E(t) - floor/(gamma-1)) - |m(t)|^2 = a t^2 + b t + c
    let c = 2.0 * avg.rho * e0 - (avg.mom_x * avg.mom_x + avg.mom_y * avg.mom_y);
    let b = 2.0 * (avg.rho * d.energy + d.rho * e0) - 2.0 * (avg.mom_x * d.mom_x + avg.mom_y * d.mom_y);
    let a = 2.0 * d.rho * d.energy - (d.mom_x * d.mom_x + d.mom_y * d.mom_y);
    let mut t = if a.abs() <= 1e-14 * (b.abs() + c.abs()) {
        if b < 0.0 {
            -c / b
        } else {
            0.0
        }
    } else {
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        // numerically stable pair of roots
        let q = -0.5 * (b + b.signum() * disc);
        let r1 = q / a;
        let r2 = if q != 0.0 { c / q } else { r1 };
        [r1, r2]
            .into_iter()
            .filter(|r| r.is_finite() && *r >= 0.0 && *r <= 1.0)
            .fold(f64::NAN, |m: f64, r| if m.is_nan() { r } else { m.min(r) })
    };
    if !t.is_finite() {
        t = bisect_pressure(avg, d, floor, gas);
    }
    t = t.clamp(0.0, 1.0);
    // Guard against roundoff: the computed pressure must clear the floor.
    let mut iter = 0;
    while t > 0.0 && pressure_unchecked(&(*avg + t * *d), gas) < floor && iter < 60 {
        t *= 0.5;
        iter += 1;
    }
    if iter == 60 {
        t = 0.0;
    }
    t
}

fn bisect_pressure(avg: &ConservedState, d: &ConservedState, floor: f64, gas: GasModel) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let s = *avg + mid * *d;
        if s.rho > 0.0 && pressure_unchecked(&s, gas) >= floor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Scale `values` toward `avg` until every entry has density at least
/// `min(eps, rho_avg)` and pressure at least `min(eps, p_avg)`.
///
/// The average must itself be admissible. Scaling is linear, so any
/// weighted mean of `values` that equals `avg` is preserved.
pub fn limit_toward_average(
    avg: &ConservedState,
    values: &mut [ConservedState],
    gas: GasModel,
    eps: f64,
) -> Result<ScalingFactors> {
    if !avg.is_finite() {
        return Err(Error::NonFinite);
    }
    let p_avg = pressure_unchecked(avg, gas);
    if !(avg.rho > 0.0 && p_avg > 0.0) {
        return Err(Error::Inadmissible {
            rho: avg.rho,
            p: p_avg,
        });
    }
    let mut out = ScalingFactors::IDENTITY;

    let eps_rho = eps.min(avg.rho);
    let rho_min = values.iter().fold(f64::INFINITY, |m, v| m.min(v.rho));
    if !rho_min.is_finite() {
        return Err(Error::NonFinite);
    }
    if rho_min < eps_rho {
        let theta = ((avg.rho - eps_rho) / (avg.rho - rho_min)).clamp(0.0, 1.0);
        for v in values.iter_mut() {
            v.rho = avg.rho + theta * (v.rho - avg.rho);
        }
        out.density = theta;
    }

    let eps_p = eps.min(p_avg);
    let mut theta: f64 = 1.0;
    for v in values.iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        if pressure_unchecked(v, gas) < eps_p {
            let d = *v - *avg;
            theta = theta.min(pressure_root(avg, &d, eps_p, gas));
        }
    }
    if theta < 1.0 {
        // Shrink further if roundoff leaves any node below the floor.
        for _ in 0..60 {
            let ok = values.iter().all(|v| {
                let s = *avg + theta * (*v - *avg);
                s.rho > 0.0 && pressure_unchecked(&s, gas) > 0.0
            });
            if ok {
                break;
            }
            theta *= 0.5;
        }
        for v in values.iter_mut() {
            *v = *avg + theta * (*v - *avg);
        }
        out.pressure = theta;
    }
    Ok(out)
}

/// Zhang–Shu limiter on one element, scaling toward its cell average.
pub fn zhang_shu_limit(
    element: &Element,
    values: &mut [ConservedState],
    ops: &ReferenceOperators,
    gas: GasModel,
    eps: f64,
) -> Result<ScalingFactors> {
    let avg = cell_average(element, values, ops);
    limit_toward_average(&avg, values, gas, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::admissible_unchecked;
    use crate::mesh::{Bounds, Mesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const GAS: GasModel = GasModel { gamma: 1.4 };

    fn unit_element(n: usize) -> Mesh {
        Mesh::build_cartesian(n, 1, 1, Bounds::new(0.0, 1.0, 0.0, 1.0), [false; 2]).unwrap()
    }

    #[test]
    fn admissible_input_is_untouched() {
        let m = unit_element(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut v: Vec<ConservedState> = (0..9)
            .map(|_| ConservedState::from_primitive(rng.gen_range(0.5..2.0), 0.3, -0.2, rng.gen_range(0.5..2.0), GAS))
            .collect();
        let before = v.clone();
        let f = zhang_shu_limit(&m.elements[0], &mut v, &m.ops, GAS, DEFAULT_EPS).unwrap();
        assert!(f.is_identity());
        assert_eq!(v, before);
    }

    #[test]
    fn single_negative_pressure_node() {
        let m = unit_element(2);
        let base = ConservedState::from_primitive(1.0, 0.5, 0.0, 1.0, GAS);
        let mut v = vec![base; 9];
        // node 4 keeps rho and momentum, energy lowered so that p = -0.1
        v[4].energy = -0.1 / 0.4 + 0.5 * 0.25;
        let node = v[4];
        let avg_before = cell_average(&m.elements[0], &v, &m.ops);
        let f = zhang_shu_limit(&m.elements[0], &mut v, &m.ops, GAS, DEFAULT_EPS).unwrap();
        assert!(f.pressure < 1.0);
        for s in &v {
            assert!(pressure_unchecked(s, GAS) >= DEFAULT_EPS * (1.0 - 1e-3));
        }
        let avg_after = cell_average(&m.elements[0], &v, &m.ops);
        assert!((avg_after - avg_before).max_abs() <= 1e-14);

        // independent oracle: bisection along the same scaling line
        let dir = node - avg_before;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if pressure_unchecked(&(avg_before + mid * dir), GAS) >= DEFAULT_EPS {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((f.pressure - lo).abs() < 1e-10, "{} vs {}", f.pressure, lo);
    }

    #[test]
    fn constant_field_is_identity() {
        let m = unit_element(3);
        let s = ConservedState::from_primitive(0.3, 1.0, 2.0, 0.01, GAS);
        let mut v = vec![s; 16];
        let f = zhang_shu_limit(&m.elements[0], &mut v, &m.ops, GAS, DEFAULT_EPS).unwrap();
        assert!(f.is_identity());
        assert!(v.iter().all(|x| *x == s));
    }

    #[test]
    fn negative_density_is_fixed() {
        let m = unit_element(1);
        let good = ConservedState::from_primitive(1.0, 0.0, 0.0, 1.0, GAS);
        let mut v = vec![good, good, good, ConservedState::new(-0.2, 0.0, 0.0, 1.0)];
        zhang_shu_limit(&m.elements[0], &mut v, &m.ops, GAS, DEFAULT_EPS).unwrap();
        assert!(v.iter().all(|s| admissible_unchecked(s, GAS)));
    }

    #[test]
    fn inadmissible_average_is_fatal() {
        let m = unit_element(1);
        let mut v = vec![ConservedState::new(1.0, 2.0, 0.0, 1.0); 4];
        let err = zhang_shu_limit(&m.elements[0], &mut v, &m.ops, GAS, DEFAULT_EPS).unwrap_err();
        assert!(matches!(err, Error::Inadmissible { .. }));
    }

    #[test]
    fn high_energy_low_pressure_stays_positive() {
        // Jet-like: large kinetic energy with tiny internal energy.
        let m = unit_element(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut v: Vec<ConservedState> = (0..16)
                .map(|_| {
                    let s = ConservedState::from_primitive(rng.gen_range(0.5..5.0), rng.gen_range(0.0..800.0), 0.0, 0.01, GAS);
                    let mut s = s;
                    s.energy *= rng.gen_range(0.999..1.001);
                    s
                })
                .collect();
            let avg = cell_average(&m.elements[0], &v, &m.ops);
            if !admissible_unchecked(&avg, GAS) {
                continue;
            }
            zhang_shu_limit(&m.elements[0], &mut v, &m.ops, GAS, DEFAULT_EPS).unwrap();
            assert!(v.iter().all(|s| admissible_unchecked(s, GAS)));
        }
    }
}
