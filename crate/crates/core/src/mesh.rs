//! Quadtree forest of curvilinear quadrilaterals.
//!
//! The base mesh is an `nx × ny` array of root cells. Each root carries an
//! isoparametric degree-N geometry (nodal coordinates at the LGL points). A
//! leaf at any depth samples its root's polynomial mapping at the mapped
//! reference locations of its own nodes, so children tile their parent
//! exactly and every interface is watertight.
//!
//! Cells are addressed by global `(level, i, j)` indices: at level `l` the
//! grid is `nx·2^l × ny·2^l`. All elements share the reference orientation,
//! so face node ordering is the identity map.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::reference_ops::{lagrange_all, ReferenceOperators};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub level: u8,
    pub i: u32,
    pub j: u32,
}

impl CellKey {
    pub const fn new(level: u8, i: u32, j: u32) -> Self {
        Self { level, i, j }
    }

    pub fn parent(&self) -> Option<CellKey> {
        (self.level > 0).then(|| CellKey::new(self.level - 1, self.i / 2, self.j / 2))
    }

    /// Child `(ci, cj)` with `ci, cj ∈ {0, 1}` (0 = lower coordinate).
    pub fn child(&self, ci: u32, cj: u32) -> CellKey {
        CellKey::new(self.level + 1, 2 * self.i + ci, 2 * self.j + cj)
    }

    pub fn children(&self) -> [CellKey; 4] {
        [
            self.child(0, 0),
            self.child(1, 0),
            self.child(0, 1),
            self.child(1, 1),
        ]
    }

    /// Position `(ci, cj)` of this cell inside its parent.
    pub fn child_position(&self) -> (u32, u32) {
        (self.i % 2, self.j % 2)
    }

    pub fn root(&self) -> (u32, u32) {
        (self.i >> self.level, self.j >> self.level)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    West = 0,
    East = 1,
    South = 2,
    North = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::West => Side::East,
            Side::East => Side::West,
            Side::South => Side::North,
            Side::North => Side::South,
        }
    }

    /// Node index of position `r` along this side.
    #[inline]
    pub fn node(self, r: usize, n1: usize) -> usize {
        match self {
            Side::West => r * n1,
            Side::East => (n1 - 1) + r * n1,
            Side::South => r,
            Side::North => r + (n1 - 1) * n1,
        }
    }

    /// West and East sides are vertical edges (parametrized by eta).
    pub fn is_vertical(self) -> bool {
        matches!(self, Side::West | Side::East)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Bottom,
        BoundaryTag::Top,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
        }
    }

    fn of_side(side: Side) -> BoundaryTag {
        match side {
            Side::West => BoundaryTag::Left,
            Side::East => BoundaryTag::Right,
            Side::South => BoundaryTag::Bottom,
            Side::North => BoundaryTag::Top,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Bounds {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// One active (leaf) element with its geometry and metric terms.
#[derive(Clone, Debug)]
pub struct Element {
    pub key: CellKey,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_xi: Vec<f64>,
    pub x_eta: Vec<f64>,
    pub y_xi: Vec<f64>,
    pub y_eta: Vec<f64>,
    pub jac: Vec<f64>,
    /// Outward metric-scaled normals at the nodes of each side, indexed by
    /// [`Side::index`].
    pub normals: [Vec<[f64; 2]>; 4],
    /// `max sqrt(J)` over nodes.
    pub h: f64,
}

impl Element {
    pub fn level(&self) -> u8 {
        self.key.level
    }

    fn from_coords(key: CellKey, x: Vec<f64>, y: Vec<f64>, ops: &ReferenceOperators) -> Self {
        let np = x.len();
        let mut e = Element {
            key,
            x,
            y,
            x_xi: vec![0.0; np],
            x_eta: vec![0.0; np],
            y_xi: vec![0.0; np],
            y_eta: vec![0.0; np],
            jac: vec![0.0; np],
            normals: Default::default(),
            h: 0.0,
        };
        e.fill_metrics(ops);
        e
    }

    fn fill_metrics(&mut self, ops: &ReferenceOperators) {
        let n1 = ops.n1();
        let d = &ops.diff;
        for j in 0..n1 {
            for i in 0..n1 {
                let (mut xr, mut xs, mut yr, mut ys) = (0.0, 0.0, 0.0, 0.0);
                for m in 0..n1 {
                    xr += d.get(i, m) * self.x[m + n1 * j];
                    yr += d.get(i, m) * self.y[m + n1 * j];
                    xs += d.get(j, m) * self.x[i + n1 * m];
                    ys += d.get(j, m) * self.y[i + n1 * m];
                }
                let k = i + n1 * j;
                self.x_xi[k] = xr;
                self.x_eta[k] = xs;
                self.y_xi[k] = yr;
                self.y_eta[k] = ys;
                self.jac[k] = xr * ys - xs * yr;
            }
        }
        for side in Side::ALL {
            self.normals[side.index()] = (0..n1)
                .map(|r| {
                    let k = side.node(r, n1);
                    match side {
                        Side::East => [self.y_eta[k], -self.x_eta[k]],
                        Side::West => [-self.y_eta[k], self.x_eta[k]],
                        Side::North => [-self.y_xi[k], self.x_xi[k]],
                        Side::South => [self.y_xi[k], -self.x_xi[k]],
                    }
                })
                .collect();
        }
        self.h = self.jac.iter().fold(0.0_f64, |m, &j| m.max(j.max(0.0).sqrt()));
    }

    /// Recompute metric terms from the current geometry nodes.
    pub fn compute_metrics(&mut self, ops: &ReferenceOperators) -> Result<()> {
        self.fill_metrics(ops);
        self.check_jacobian(usize::MAX)
    }

    fn check_jacobian(&self, id: usize) -> Result<()> {
        for &j in &self.jac {
            if !(j > 0.0) {
                return Err(Error::NonPositiveJacobian {
                    element: id,
                    jacobian: j,
                });
            }
        }
        Ok(())
    }

    /// Quadrature mass `w_i w_j J_ij` at node `k = i + (N+1) j`.
    #[inline]
    pub fn mass(&self, k: usize, w: &[f64]) -> f64 {
        let n1 = w.len();
        w[k % n1] * w[k / n1] * self.jac[k]
    }

    pub fn area(&self, w: &[f64]) -> f64 {
        (0..self.jac.len()).map(|k| self.mass(k, w)).sum()
    }
}

/// Interface between active elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Face {
    /// `left` sees the face on its East (or North) side, `right` on its West
    /// (or South) side. Nodes are matched one to one.
    Conforming {
        left: usize,
        right: usize,
        vertical: bool,
    },
    /// 2:1 face. `fine[0]` covers the lower half of the coarse edge.
    Nonconforming {
        coarse: usize,
        coarse_side: Side,
        fine: [usize; 2],
    },
    Boundary {
        elem: usize,
        side: Side,
        tag: BoundaryTag,
    },
}

/// What lies across one side of an element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighbor {
    Boundary(BoundaryTag),
    /// Same-level element and the side it presents to us.
    Conforming { elem: usize, side: Side },
    /// We are fine segment `k` of the coarse element's side `coarse_side`.
    Coarser {
        elem: usize,
        coarse_side: Side,
        k: usize,
    },
    /// Two finer elements, lower segment first, presenting side `fine_side`.
    Finer { elems: [usize; 2], fine_side: Side },
}

/// Worst violations found by [`Mesh::validate_geometry`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeometryReport {
    pub conforming_normal_mismatch: f64,
    pub nonconforming_normal_mismatch: f64,
    pub min_jacobian: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub ops: Arc<ReferenceOperators>,
    pub nx: usize,
    pub ny: usize,
    pub bounds: Bounds,
    pub periodic: [bool; 2],
    /// Nodal coordinates of each root, row-major over roots (`ri + nx rj`).
    root_geometry: Vec<(Vec<f64>, Vec<f64>)>,
    pub elements: Vec<Element>,
    pub index: HashMap<CellKey, usize>,
    pub faces: Vec<Face>,
    /// Per element, per [`Side::index`], the neighbor across that side.
    pub neighbors: Vec<[Neighbor; 4]>,
}

impl Mesh {
    /// Uniform `nx × ny` mesh of affine cells.
    pub fn build_cartesian(
        degree: usize,
        nx: usize,
        ny: usize,
        bounds: Bounds,
        periodic: [bool; 2],
    ) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh("cell counts must be positive".into()));
        }
        if !(bounds.x1 > bounds.x0 && bounds.y1 > bounds.y0) {
            return Err(Error::InvalidMesh(format!("degenerate bounds {bounds:?}")));
        }
        let ops = ReferenceOperators::get(degree)?;
        let n1 = ops.n1();
        let hx = (bounds.x1 - bounds.x0) / nx as f64;
        let hy = (bounds.y1 - bounds.y0) / ny as f64;
        let mut root_geometry = Vec::with_capacity(nx * ny);
        for rj in 0..ny {
            for ri in 0..nx {
                let mut x = vec![0.0; n1 * n1];
                let mut y = vec![0.0; n1 * n1];
                for j in 0..n1 {
                    for i in 0..n1 {
                        let s = 0.5 * (ops.nodes()[i] + 1.0);
                        let t = 0.5 * (ops.nodes()[j] + 1.0);
                        x[i + n1 * j] = bounds.x0 + (ri as f64 + s) * hx;
                        y[i + n1 * j] = bounds.y0 + (rj as f64 + t) * hy;
                    }
                }
                root_geometry.push((x, y));
            }
        }
        let leaves: Vec<CellKey> = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| CellKey::new(0, i as u32, j as u32)))
            .collect();
        let mut mesh = Mesh {
            ops,
            nx,
            ny,
            bounds,
            periodic,
            root_geometry,
            elements: Vec::new(),
            index: HashMap::new(),
            faces: Vec::new(),
            neighbors: Vec::new(),
        };
        mesh.rebuild(leaves)?;
        Ok(mesh)
    }

    pub fn degree(&self) -> usize {
        self.ops.degree()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn max_level(&self) -> u8 {
        self.elements.iter().map(|e| e.key.level).max().unwrap_or(0)
    }

    pub fn leaf_keys(&self) -> Vec<CellKey> {
        self.elements.iter().map(|e| e.key).collect()
    }

    /// Number of cells along x and y at `level`.
    pub fn cells_at(&self, level: u8) -> (u32, u32) {
        ((self.nx as u32) << level, (self.ny as u32) << level)
    }

    /// Same-level neighbor across `side`, honoring periodicity.
    pub fn neighbor_key(&self, key: CellKey, side: Side) -> Option<CellKey> {
        let (cx, cy) = self.cells_at(key.level);
        let (i, j) = (key.i as i64, key.j as i64);
        let (ni, nj) = match side {
            Side::West => (i - 1, j),
            Side::East => (i + 1, j),
            Side::South => (i, j - 1),
            Side::North => (i, j + 1),
        };
        let wrap = |v: i64, n: u32, periodic: bool| -> Option<u32> {
            if v >= 0 && v < n as i64 {
                Some(v as u32)
            } else if periodic {
                Some(v.rem_euclid(n as i64) as u32)
            } else {
                None
            }
        };
        Some(CellKey::new(
            key.level,
            wrap(ni, cx, self.periodic[0])?,
            wrap(nj, cy, self.periodic[1])?,
        ))
    }

    /// Evaluate the root mapping at reference point `(xi, eta)`.
    fn root_point(&self, root: (u32, u32), xi: &[f64], eta: &[f64]) -> (f64, f64) {
        let (x, y) = &self.root_geometry[root.0 as usize + self.nx * root.1 as usize];
        let n1 = xi.len();
        let (mut px, mut py) = (0.0, 0.0);
        for b in 0..n1 {
            if eta[b] == 0.0 {
                continue;
            }
            for a in 0..n1 {
                let w = xi[a] * eta[b];
                px += w * x[a + n1 * b];
                py += w * y[a + n1 * b];
            }
        }
        (px, py)
    }

    /// Coordinates of every node of `key`, sampled from its root mapping.
    pub fn sample_geometry(&self, key: CellKey) -> (Vec<f64>, Vec<f64>) {
        let n1 = self.ops.n1();
        let nodes = self.ops.nodes();
        let root = key.root();
        let size = 2.0 / (1u64 << key.level) as f64;
        let a = (key.i - (root.0 << key.level)) as f64;
        let b = (key.j - (root.1 << key.level)) as f64;
        let map = |off: f64, r: f64| -1.0 + size * (off + 0.5 * (r + 1.0));
        let lx: Vec<Vec<f64>> = nodes.iter().map(|&r| lagrange_all(nodes, map(a, r))).collect();
        let ly: Vec<Vec<f64>> = nodes.iter().map(|&r| lagrange_all(nodes, map(b, r))).collect();
        let mut x = vec![0.0; n1 * n1];
        let mut y = vec![0.0; n1 * n1];
        for j in 0..n1 {
            for i in 0..n1 {
                let (px, py) = self.root_point(root, &lx[i], &ly[j]);
                x[i + n1 * j] = px;
                y[i + n1 * j] = py;
            }
        }
        (x, y)
    }

    /// Physical point at reference coordinates `(xi, eta)` of element `e`.
    pub fn map_point(&self, e: usize, xi: f64, eta: f64) -> (f64, f64) {
        let el = &self.elements[e];
        let nodes = self.ops.nodes();
        let n1 = nodes.len();
        let lx = lagrange_all(nodes, xi);
        let ly = lagrange_all(nodes, eta);
        let (mut px, mut py) = (0.0, 0.0);
        for b in 0..n1 {
            for a in 0..n1 {
                px += lx[a] * ly[b] * el.x[a + n1 * b];
                py += lx[a] * ly[b] * el.y[a + n1 * b];
            }
        }
        (px, py)
    }

    /// Replace the active element set by `leaves` (in that order) and rebuild
    /// geometry and faces.
    pub fn rebuild(&mut self, leaves: Vec<CellKey>) -> Result<()> {
        let mut elements = Vec::with_capacity(leaves.len());
        let mut index = HashMap::with_capacity(leaves.len());
        for (id, key) in leaves.into_iter().enumerate() {
            let (rx, ry) = key.root();
            if rx as usize >= self.nx || ry as usize >= self.ny {
                return Err(Error::InvalidMesh(format!("cell {key:?} outside base mesh")));
            }
            let (x, y) = self.sample_geometry(key);
            let el = Element::from_coords(key, x, y, &self.ops);
            el.check_jacobian(id)?;
            if index.insert(key, id).is_some() {
                return Err(Error::InvalidMesh(format!("duplicate cell {key:?}")));
            }
            elements.push(el);
        }
        self.elements = elements;
        self.index = index;
        self.build_faces()
    }

    fn build_faces(&mut self) -> Result<()> {
        let mut faces = Vec::new();
        for (id, el) in self.elements.iter().enumerate() {
            for side in Side::ALL {
                let Some(nk) = self.neighbor_key(el.key, side) else {
                    faces.push(Face::Boundary {
                        elem: id,
                        side,
                        tag: BoundaryTag::of_side(side),
                    });
                    continue;
                };
                if let Some(&nid) = self.index.get(&nk) {
                    if matches!(side, Side::East | Side::North) {
                        faces.push(Face::Conforming {
                            left: id,
                            right: nid,
                            vertical: side.is_vertical(),
                        });
                    }
                    continue;
                }
                if let Some(pk) = nk.parent() {
                    if self.index.contains_key(&pk) {
                        // we are the fine side; the coarse neighbor owns the face
                        continue;
                    }
                }
                // neighbor must be refined exactly once along this side
                let (c0, c1) = match side {
                    Side::East => (nk.child(0, 0), nk.child(0, 1)),
                    Side::West => (nk.child(1, 0), nk.child(1, 1)),
                    Side::North => (nk.child(0, 0), nk.child(1, 0)),
                    Side::South => (nk.child(0, 1), nk.child(1, 1)),
                };
                match (self.index.get(&c0), self.index.get(&c1)) {
                    (Some(&f0), Some(&f1)) => faces.push(Face::Nonconforming {
                        coarse: id,
                        coarse_side: side,
                        fine: [f0, f1],
                    }),
                    _ => {
                        let covered_deeper = self.index.keys().any(|k| {
                            k.level > nk.level + 1 && {
                                let shift = k.level - nk.level;
                                (k.i >> shift, k.j >> shift) == (nk.i, nk.j)
                            }
                        });
                        return Err(if covered_deeper {
                            Error::Unbalanced(id)
                        } else {
                            Error::InvalidMesh(format!(
                                "element {id} has no neighbor across {side:?}"
                            ))
                        });
                    }
                }
            }
        }
        let placeholder = Neighbor::Boundary(BoundaryTag::Left);
        let mut neighbors = vec![[placeholder; 4]; self.elements.len()];
        for face in &faces {
            match *face {
                Face::Conforming { left, right, vertical } => {
                    let (sl, sr) = if vertical {
                        (Side::East, Side::West)
                    } else {
                        (Side::North, Side::South)
                    };
                    neighbors[left][sl.index()] = Neighbor::Conforming { elem: right, side: sr };
                    neighbors[right][sr.index()] = Neighbor::Conforming { elem: left, side: sl };
                }
                Face::Nonconforming {
                    coarse,
                    coarse_side,
                    fine,
                } => {
                    let fs = coarse_side.opposite();
                    neighbors[coarse][coarse_side.index()] = Neighbor::Finer {
                        elems: fine,
                        fine_side: fs,
                    };
                    for (k, &f) in fine.iter().enumerate() {
                        neighbors[f][fs.index()] = Neighbor::Coarser {
                            elem: coarse,
                            coarse_side,
                            k,
                        };
                    }
                }
                Face::Boundary { elem, side, tag } => {
                    neighbors[elem][side.index()] = Neighbor::Boundary(tag);
                }
            }
        }
        self.faces = faces;
        self.neighbors = neighbors;
        Ok(())
    }

    /// Refine the given root cells whose block coordinates have even parity.
    /// `block` groups `block × block` roots into one checkerboard square.
    pub fn checkerboard_refine(&mut self, block: usize) -> Result<()> {
        if block == 0 || self.nx % (2 * block) != 0 || self.ny % (2 * block) != 0 {
            return Err(Error::InvalidMesh(format!(
                "checkerboard pattern needs counts divisible by {}",
                2 * block.max(1)
            )));
        }
        if self.max_level() != 0 {
            return Err(Error::InvalidMesh("checkerboard needs a uniform base mesh".into()));
        }
        let mut leaves = Vec::new();
        for key in self.leaf_keys() {
            let bi = key.i as usize / block;
            let bj = key.j as usize / block;
            if (bi + bj) % 2 == 0 {
                leaves.extend(key.children());
            } else {
                leaves.push(key);
            }
        }
        self.rebuild(leaves)
    }

    /// Split every active element into four children.
    pub fn refine_uniformly(&mut self) -> Result<()> {
        let leaves = self.leaf_keys().iter().flat_map(|k| k.children()).collect();
        self.rebuild(leaves)
    }

    /// Move every root geometry node through `warp` and regenerate leaves.
    pub fn apply_warp<F: Fn(f64, f64) -> (f64, f64)>(&mut self, warp: F) -> Result<()> {
        for (x, y) in self.root_geometry.iter_mut() {
            for k in 0..x.len() {
                let (wx, wy) = warp(x[k], y[k]);
                x[k] = wx;
                y[k] = wy;
            }
        }
        let leaves = self.leaf_keys();
        self.rebuild(leaves)
    }

    pub fn total_area(&self) -> f64 {
        let w = self.ops.weights();
        self.elements.iter().map(|e| e.area(w)).sum()
    }

    /// Watertightness and Jacobian checks. Report-only.
    pub fn validate_geometry(&self) -> GeometryReport {
        let n1 = self.ops.n1();
        let nc = &self.ops.nc;
        let mut rep = GeometryReport {
            min_jacobian: f64::INFINITY,
            ..Default::default()
        };
        for el in &self.elements {
            for &j in &el.jac {
                rep.min_jacobian = rep.min_jacobian.min(j);
            }
        }
        for face in &self.faces {
            match *face {
                Face::Conforming { left, right, vertical } => {
                    let (sl, sr) = if vertical {
                        (Side::East, Side::West)
                    } else {
                        (Side::North, Side::South)
                    };
                    let nl = &self.elements[left].normals[sl.index()];
                    let nr = &self.elements[right].normals[sr.index()];
                    for r in 0..n1 {
                        let d = (nl[r][0] + nr[r][0]).abs().max((nl[r][1] + nr[r][1]).abs());
                        rep.conforming_normal_mismatch = rep.conforming_normal_mismatch.max(d);
                    }
                }
                Face::Nonconforming {
                    coarse,
                    coarse_side,
                    fine,
                } => {
                    let ncr = &self.elements[coarse].normals[coarse_side.index()];
                    for k in 0..2 {
                        let nf = &self.elements[fine[k]].normals[coarse_side.opposite().index()];
                        for i in 0..n1 {
                            for c in 0..2 {
                                let s: f64 = (0..n1).map(|j| nc.interp[k][(i, j)] * ncr[j][c]).sum();
                                let d = (s + 2.0 * nf[i][c]).abs();
                                rep.nonconforming_normal_mismatch =
                                    rep.nonconforming_normal_mismatch.max(d);
                            }
                        }
                    }
                }
                Face::Boundary { .. } => {}
            }
        }
        rep
    }

    /// Check that no face joins elements more than one level apart.
    pub fn check_balance(&self) -> Result<()> {
        for face in &self.faces {
            if let Face::Conforming { left, right, .. } = *face {
                if self.elements[left].key.level != self.elements[right].key.level {
                    return Err(Error::Unbalanced(left));
                }
            }
            if let Face::Nonconforming { coarse, fine, .. } = *face {
                let lc = self.elements[coarse].key.level;
                for f in fine {
                    if self.elements[f].key.level != lc + 1 {
                        return Err(Error::Unbalanced(coarse));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sinusoidal warp used by the vortex case.
pub fn vortex_warp(alpha: f64, length: f64) -> impl Fn(f64, f64) -> (f64, f64) {
    move |x, y| {
        let k = 2.0 * std::f64::consts::PI / length;
        (
            x + length * alpha * (k * y).cos(),
            y + length * alpha * (k * x).cos(),
        )
    }
}
