//! One-dimensional Legendre–Gauss–Lobatto machinery shared by every other
//! module: quadrature, the collocation differentiation matrix, Lagrange
//! evaluation, and the coarse/fine edge interpolation and projection
//! operators used on 2:1 nonconforming interfaces.
//!
//! Everything here depends only on the polynomial degree, so the bundle is
//! built once per degree and shared through [`ReferenceOperators::get`].

use std::ops::{Index, IndexMut};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 8;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Dense row-major square matrix. Sizes here never exceed `(2N+1)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "non-square row");
            m.data[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// LGL quadrature on `[-1, 1]` with `degree + 1` points.
#[derive(Clone, Debug)]
pub struct QuadratureRule1D {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Barycentric weights `1 / prod_{m != j} (x_j - x_m)`.
    pub fn barycentric_weights(&self) -> Vec<f64> {
        let x = &self.nodes;
        (0..x.len())
            .map(|j| {
                let prod: f64 = (0..x.len())
                    .filter(|&m| m != j)
                    .map(|m| x[j] - x[m])
                    .product();
                1.0 / prod
            })
            .collect()
    }
}

/// Legendre polynomial `P_n(x)` and `P_{n-1}(x)` by three-term recurrence.
pub(crate) fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Legendre polynomials `P_0..=P_n` at `x`.
pub(crate) fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
        out.push(next);
    }
    out
}

/// LGL nodes and weights without the public degree cap. Used internally for
/// over-integration in solution transfer.
pub(crate) fn lgl_nodes_weights(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let np = n + 1;
    let nf = n as f64;
    // Chebyshev–Gauss–Lobatto initial guess, descending order.
    let mut x: Vec<f64> = (0..np)
        .map(|i| (std::f64::consts::PI * i as f64 / nf).cos())
        .collect();
    for xi in x.iter_mut() {
        for _ in 0..NEWTON_MAX_ITER {
            let (p, p_prev) = legendre_pair(n, *xi);
            let dx = (*xi * p - p_prev) / ((nf + 1.0) * p);
            *xi -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
    }
    x.reverse();
    x[0] = -1.0;
    x[n] = 1.0;
    // Enforce exact symmetry about the origin.
    let mut sym = x.clone();
    for i in 0..np {
        sym[i] = 0.5 * (x[i] - x[n - i]);
    }
    if n % 2 == 0 {
        sym[n / 2] = 0.0;
    }
    let mut w: Vec<f64> = sym
        .iter()
        .map(|&xi| {
            let (p, _) = legendre_pair(n, xi);
            2.0 / (nf * (nf + 1.0) * p * p)
        })
        .collect();
    for i in 0..np / 2 {
        let avg = 0.5 * (w[i] + w[n - i]);
        w[i] = avg;
        w[n - i] = avg;
    }
    (sym, w)
}

/// LGL quadrature rule of degree `n` (`n + 1` points).
pub fn lgl_rule(n: usize) -> Result<QuadratureRule1D> {
    if !(1..=MAX_DEGREE).contains(&n) {
        return Err(Error::UnsupportedDegree(n));
    }
    let (nodes, weights) = lgl_nodes_weights(n);
    Ok(QuadratureRule1D {
        degree: n,
        nodes,
        weights,
    })
}

/// Collocation differentiation matrix `D[i][j] = phi_j'(xi_i)`.
#[derive(Clone, Debug)]
pub struct DiffMatrix(pub SquareMatrix);

impl DiffMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Max-norm of `w_i D_ij + w_j D_ji - (delta_iN delta_jN - delta_i0 delta_j0)`.
    pub fn sbp_residual(&self, weights: &[f64]) -> f64 {
        let n1 = weights.len();
        let n = n1 - 1;
        let mut worst: f64 = 0.0;
        for i in 0..n1 {
            for j in 0..n1 {
                let mut b = 0.0;
                if i == n && j == n {
                    b += 1.0;
                }
                if i == 0 && j == 0 {
                    b -= 1.0;
                }
                let r = weights[i] * self.get(i, j) + weights[j] * self.get(j, i) - b;
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}

pub fn diff_matrix(rule: &QuadratureRule1D) -> DiffMatrix {
    let x = &rule.nodes;
    let lam = rule.barycentric_weights();
    let n1 = x.len();
    let mut d = SquareMatrix::zeros(n1);
    for i in 0..n1 {
        let mut diag = 0.0;
        for j in 0..n1 {
            if i != j {
                let v = (lam[j] / lam[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    DiffMatrix(d)
}

/// Values of all Lagrange basis functions on `nodes` at `x`.
pub(crate) fn lagrange_all(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| lagrange_unchecked(nodes, j, x))
        .collect()
}

#[inline]
pub(crate) fn lagrange_unchecked(nodes: &[f64], j: usize, x: f64) -> f64 {
    let mut v = 1.0;
    for (m, &xm) in nodes.iter().enumerate() {
        if m != j {
            v *= (x - xm) / (nodes[j] - xm);
        }
    }
    v
}

/// Lagrange basis function `phi_j` of the rule's nodes evaluated at `x`.
pub fn lagrange_eval(rule: &QuadratureRule1D, j: usize, x: f64) -> Result<f64> {
    if j > rule.degree {
        return Err(Error::IndexOutOfRange {
            index: j,
            degree: rule.degree,
        });
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::PointOutOfRange(x));
    }
    Ok(lagrange_unchecked(&rule.nodes, j, x))
}

/// Coarse-to-fine interpolation and fine-to-coarse projection on a 2:1 edge.
///
/// Index `k = 0` is the fine segment covering `[-1, 0]` of the coarse edge,
/// `k = 1` the segment covering `[0, 1]`.
#[derive(Clone, Debug)]
pub struct NonconformingOperators {
    pub interp: [SquareMatrix; 2],
    pub proj: [SquareMatrix; 2],
    pub coarse_mass: Vec<f64>,
    pub fine_mass: Vec<f64>,
}

/// Reference coordinate on the coarse edge of fine node `xi` on segment `k`.
#[inline]
pub fn fine_to_coarse_coord(k: usize, xi: f64) -> f64 {
    if k == 0 {
        0.5 * (xi - 1.0)
    } else {
        0.5 * (xi + 1.0)
    }
}

pub fn nonconforming_operators(rule: &QuadratureRule1D) -> NonconformingOperators {
    let n1 = rule.len();
    let w = &rule.weights;
    let fine_mass: Vec<f64> = w.iter().map(|wi| 0.5 * wi).collect();
    let build = |k: usize| {
        let mut p = SquareMatrix::zeros(n1);
        for i in 0..n1 {
            let xk = fine_to_coarse_coord(k, rule.nodes[i]);
            for j in 0..n1 {
                p[(i, j)] = lagrange_unchecked(&rule.nodes, j, xk);
            }
        }
        p
    };
    let interp = [build(0), build(1)];
    let proj_of = |p: &SquareMatrix| {
        // M_C^{-1} P^T M_F
        let mut q = SquareMatrix::zeros(n1);
        for j in 0..n1 {
            for i in 0..n1 {
                q[(j, i)] = p[(i, j)] * fine_mass[i] / w[j];
            }
        }
        q
    };
    let proj = [proj_of(&interp[0]), proj_of(&interp[1])];
    NonconformingOperators {
        interp,
        proj,
        coarse_mass: w.clone(),
        fine_mass,
    }
}

/// Everything a solver needs for one polynomial degree.
#[derive(Debug)]
pub struct ReferenceOperators {
    pub rule: QuadratureRule1D,
    pub diff: DiffMatrix,
    pub nc: NonconformingOperators,
    /// `legendre[i][a] = P_a(xi_i)`, used for hierarchical modal projections.
    pub legendre: Vec<Vec<f64>>,
    /// Over-integration rule (LGL of degree `2N`) for L2 projections.
    pub fine_rule: QuadratureRule1D,
}

impl ReferenceOperators {
    pub fn new(degree: usize) -> Result<Self> {
        let rule = lgl_rule(degree)?;
        let diff = diff_matrix(&rule);
        let nc = nonconforming_operators(&rule);
        let legendre = rule
            .nodes
            .iter()
            .map(|&x| legendre_all(degree, x))
            .collect();
        let (fn_nodes, fn_weights) = lgl_nodes_weights(2 * degree);
        Ok(Self {
            rule,
            diff,
            nc,
            legendre,
            fine_rule: QuadratureRule1D {
                degree: 2 * degree,
                nodes: fn_nodes,
                weights: fn_weights,
            },
        })
    }

    /// Shared, lazily built operators for `degree`.
    pub fn get(degree: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Vec<OnceLock<Arc<ReferenceOperators>>>> = OnceLock::new();
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        let cache = CACHE.get_or_init(|| (0..=MAX_DEGREE).map(|_| OnceLock::new()).collect());
        let slot = &cache[degree];
        if let Some(ops) = slot.get() {
            return Ok(ops.clone());
        }
        let ops = Arc::new(Self::new(degree)?);
        Ok(slot.get_or_init(|| ops).clone())
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.rule.degree
    }

    #[inline]
    pub fn n1(&self) -> usize {
        self.rule.degree + 1
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S5: f64 = 2.236_067_977_499_79;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    /// Exact integral of x^k on [-1, 1].
    fn monomial_integral(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            2.0 / (k as f64 + 1.0)
        }
    }

    #[test]
    fn two_point_rule_is_endpoints() {
        let r = lgl_rule(1).unwrap();
        assert_eq!(r.nodes, vec![-1.0, 1.0]);
        assert_close(r.weights[0], 1.0, 1e-15);
        assert_close(r.weights[1], 1.0, 1e-15);
    }

    #[test]
    fn three_point_rule_matches_simpson() {
        let r = lgl_rule(2).unwrap();
        for (x, e) in r.nodes.iter().zip([-1.0, 0.0, 1.0]) {
            assert_close(*x, e, 1e-15);
        }
        for (w, e) in r.weights.iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert_close(*w, e, 1e-15);
        }
        // brute force: integrates monomials up to degree 3 exactly
        for k in 0..=3 {
            let q: f64 = r
                .nodes
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(k as i32))
                .sum();
            assert_close(q, monomial_integral(k), 1e-15);
        }
    }

    #[test]
    fn four_point_nodes() {
        let r = lgl_rule(3).unwrap();
        let expect = [-1.0, -1.0 / S5, 1.0 / S5, 1.0];
        for (x, e) in r.nodes.iter().zip(expect) {
            assert_close(*x, e, 1e-15);
        }
    }

    #[test]
    fn rules_are_exact_and_symmetric() {
        for n in 1..=MAX_DEGREE {
            let r = lgl_rule(n).unwrap();
            assert_close(r.weights.iter().sum(), 2.0, 1e-14);
            for i in 0..=n {
                assert_eq!(r.nodes[i], -r.nodes[n - i]);
                assert!(r.weights[i] > 0.0);
                if i > 0 {
                    assert!(r.nodes[i] > r.nodes[i - 1]);
                }
            }
            for k in 0..(2 * n) as u32 {
                let q: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                assert_close(q, monomial_integral(k), 1e-14);
            }
        }
    }

    #[test]
    fn degree_range_is_enforced() {
        assert!(matches!(lgl_rule(0), Err(Error::UnsupportedDegree(0))));
        assert!(matches!(lgl_rule(9), Err(Error::UnsupportedDegree(9))));
        assert!(ReferenceOperators::get(0).is_err());
    }

    #[test]
    fn linear_diff_matrix() {
        let d = diff_matrix(&lgl_rule(1).unwrap());
        let expect = SquareMatrix::from_rows(&[&[-0.5, 0.5], &[-0.5, 0.5]]);
        assert!(d.0.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn diff_matrix_sbp_and_row_sums() {
        for n in 1..=MAX_DEGREE {
            let r = lgl_rule(n).unwrap();
            let d = diff_matrix(&r);
            for i in 0..=n {
                let s: f64 = d.0.row(i).iter().sum();
                assert!(s.abs() <= 1e-14, "N={n} row {i} sum {s}");
            }
            let res = d.sbp_residual(&r.weights);
            assert!(res <= 1e-13, "N={n} sbp residual {res}");
        }
    }

    #[test]
    fn diff_matrix_differentiates_polynomials() {
        let r = lgl_rule(5).unwrap();
        let d = diff_matrix(&r);
        let f: Vec<f64> = r.nodes.iter().map(|x| x.powi(5) - 2.0 * x * x).collect();
        for i in 0..=5 {
            let df: f64 = (0..=5).map(|j| d.get(i, j) * f[j]).sum();
            let x = r.nodes[i];
            assert_close(df, 5.0 * x.powi(4) - 4.0 * x, 1e-12);
        }
    }

    #[test]
    fn lagrange_cardinality_and_partition() {
        for n in 1..=MAX_DEGREE {
            let r = lgl_rule(n).unwrap();
            for i in 0..=n {
                for j in 0..=n {
                    let v = lagrange_eval(&r, j, r.nodes[i]).unwrap();
                    assert_eq!(v, if i == j { 1.0 } else { 0.0 });
                }
            }
            let s: f64 = (0..=n).map(|j| lagrange_eval(&r, j, 0.3).unwrap()).sum();
            assert_close(s, 1.0, 1e-14);
        }
    }

    #[test]
    fn lagrange_reproduces_quadratic() {
        let r = lgl_rule(2).unwrap();
        let v: f64 = (0..=2)
            .map(|j| r.nodes[j].powi(2) * lagrange_eval(&r, j, 0.4).unwrap())
            .sum();
        assert_close(v, 0.16, 1e-15);
    }

    #[test]
    fn lagrange_rejects_bad_input() {
        let r = lgl_rule(2).unwrap();
        assert!(matches!(
            lagrange_eval(&r, 3, 0.0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            lagrange_eval(&r, 0, 1.5),
            Err(Error::PointOutOfRange(_))
        ));
    }

    fn appendix_n1() -> [[SquareMatrix; 2]; 2] {
        [
            [
                SquareMatrix::from_rows(&[&[1.0, 0.0], &[0.5, 0.5]]),
                SquareMatrix::from_rows(&[&[0.5, 0.5], &[0.0, 1.0]]),
            ],
            [
                SquareMatrix::from_rows(&[&[0.5, 0.25], &[0.0, 0.25]]),
                SquareMatrix::from_rows(&[&[0.25, 0.0], &[0.25, 0.5]]),
            ],
        ]
    }

    fn appendix_n2() -> [[SquareMatrix; 2]; 2] {
        [
            [
                SquareMatrix::from_rows(&[
                    &[1.0, 0.0, 0.0],
                    &[3.0 / 8.0, 3.0 / 4.0, -1.0 / 8.0],
                    &[0.0, 1.0, 0.0],
                ]),
                SquareMatrix::from_rows(&[
                    &[0.0, 1.0, 0.0],
                    &[-1.0 / 8.0, 3.0 / 4.0, 3.0 / 8.0],
                    &[0.0, 0.0, 1.0],
                ]),
            ],
            [
                SquareMatrix::from_rows(&[
                    &[0.5, 0.75, 0.0],
                    &[0.0, 3.0 / 8.0, 1.0 / 8.0],
                    &[0.0, -0.25, 0.0],
                ]),
                SquareMatrix::from_rows(&[
                    &[0.0, -0.25, 0.0],
                    &[1.0 / 8.0, 3.0 / 8.0, 0.0],
                    &[0.0, 0.75, 0.5],
                ]),
            ],
        ]
    }

    fn appendix_n3() -> [[SquareMatrix; 2]; 2] {
        let s = S5;
        [
            [
                SquareMatrix::from_rows(&[
                    &[1.0, 0.0, 0.0, 0.0],
                    &[0.125 + s / 10.0, 0.5 + s / 8.0, 0.375 - s / 4.0, s / 40.0],
                    &[0.125 - s / 10.0, 0.375 + s / 4.0, 0.5 - s / 8.0, -s / 40.0],
                    &[-0.125, 0.625, 0.625, -0.125],
                ]),
                SquareMatrix::from_rows(&[
                    &[-0.125, 0.625, 0.625, -0.125],
                    &[-s / 40.0, 0.5 - s / 8.0, 0.375 + s / 4.0, 0.125 - s / 10.0],
                    &[s / 40.0, 0.375 - s / 4.0, 0.5 + s / 8.0, 0.125 + s / 10.0],
                    &[0.0, 0.0, 0.0, 1.0],
                ]),
            ],
            [
                SquareMatrix::from_rows(&[
                    &[0.5, 5.0 / 16.0 + s / 4.0, 5.0 / 16.0 - s / 4.0, -1.0 / 16.0],
                    &[0.0, 0.25 + s / 16.0, 3.0 / 16.0 + s / 8.0, 1.0 / 16.0],
                    &[0.0, 3.0 / 16.0 - s / 8.0, 0.25 - s / 16.0, 1.0 / 16.0],
                    &[0.0, s / 16.0, -s / 16.0, -1.0 / 16.0],
                ]),
                SquareMatrix::from_rows(&[
                    &[-1.0 / 16.0, -s / 16.0, s / 16.0, 0.0],
                    &[1.0 / 16.0, 0.25 - s / 16.0, 3.0 / 16.0 - s / 8.0, 0.0],
                    &[1.0 / 16.0, 3.0 / 16.0 + s / 8.0, 0.25 + s / 16.0, 0.0],
                    &[-1.0 / 16.0, 5.0 / 16.0 - s / 4.0, 5.0 / 16.0 + s / 4.0, 0.5],
                ]),
            ],
        ]
    }

    #[test]
    fn tabulated_interface_matrices() {
        for (n, table) in [(1, appendix_n1()), (2, appendix_n2()), (3, appendix_n3())] {
            let nc = nonconforming_operators(&lgl_rule(n).unwrap());
            for k in 0..2 {
                let di = nc.interp[k].max_abs_diff(&table[0][k]);
                let dp = nc.proj[k].max_abs_diff(&table[1][k]);
                assert!(di <= 1e-13, "N={n} k={k} interp diff {di}");
                assert!(dp <= 1e-13, "N={n} k={k} proj diff {dp}");
            }
        }
    }

    #[test]
    fn interface_operator_identities() {
        for n in 1..=MAX_DEGREE {
            let r = lgl_rule(n).unwrap();
            let nc = nonconforming_operators(&r);
            for k in 0..2 {
                for i in 0..=n {
                    let s: f64 = nc.interp[k].row(i).iter().sum();
                    assert!((s - 1.0).abs() <= 1e-14);
                    for j in 0..=n {
                        let lhs = r.weights[i] * nc.interp[k][(i, j)];
                        let rhs = 2.0 * r.weights[j] * nc.proj[k][(j, i)];
                        assert!((lhs - rhs).abs() <= 1e-13);
                    }
                }
                let has_negative = (0..=n)
                    .flat_map(|i| nc.interp[k].row(i).to_vec())
                    .any(|v| v < -1e-14);
                assert_eq!(has_negative, n >= 2, "N={n} sign structure");
            }
            for (c, f) in nc.coarse_mass.iter().zip(&nc.fine_mass) {
                assert_close(*f, 0.5 * c, 1e-16);
            }
        }
    }

    #[test]
    fn cache_returns_shared_instance() {
        let a = ReferenceOperators::get(3).unwrap();
        let b = ReferenceOperators::get(3).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a.n1(), 4);
        assert_eq!(a.fine_rule.len(), 7);
    }
}
