//! Indicator-driven refinement and coarsening with 2:1 balance and
//! conservative, positivity-preserving solution transfer.

use std::collections::{HashMap, HashSet};

use crate::dgsem::SolutionField;
use crate::error::{Error, Result};
use crate::euler::{ConservedState, GasModel};
use crate::limiters::oe::indicators;
use crate::limiters::{cell_average, cell_integral, limit_toward_average, zhang_shu_limit};
use crate::mesh::{CellKey, Element, Mesh, Side};
use crate::reference_ops::{lagrange_all, ReferenceOperators};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmrConfig {
    pub c_ref: f64,
    pub c_crs: f64,
    pub max_level: u8,
    /// Steps between adaptations.
    pub interval: usize,
}

impl Default for AmrConfig {
    fn default() -> Self {
        Self {
            c_ref: 0.05,
            c_crs: 0.05,
            max_level: 2,
            interval: 10,
        }
    }
}

impl AmrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_crs > 0.0 && self.c_ref >= self.c_crs) {
            return Err(Error::Config(format!(
                "need c_ref >= c_crs > 0, got c_ref = {}, c_crs = {}",
                self.c_ref, self.c_crs
            )));
        }
        if self.interval == 0 {
            return Err(Error::Config("amr interval must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mark {
    Keep,
    Refine,
    Coarsen,
}

/// Marks from precomputed indicator values.
pub fn marks_from_indicators(mesh: &Mesh, ind: &[f64], cfg: &AmrConfig) -> Vec<Mark> {
    let mut marks: Vec<Mark> = mesh
        .elements
        .iter()
        .zip(ind)
        .map(|(el, &i)| {
            if i > cfg.c_ref && el.level() < cfg.max_level {
                Mark::Refine
            } else {
                Mark::Keep
            }
        })
        .collect();
    // a sibling group coarsens only if all four are active and below threshold
    for (e, el) in mesh.elements.iter().enumerate() {
        let Some(parent) = el.key.parent() else { continue };
        if el.key.child_position() != (0, 0) {
            continue;
        }
        let group: Option<Vec<usize>> = parent
            .children()
            .iter()
            .map(|k| mesh.index.get(k).copied())
            .collect();
        let Some(group) = group else { continue };
        debug_assert_eq!(group[0], e);
        if group.iter().all(|&g| ind[g] < cfg.c_crs && marks[g] == Mark::Keep) {
            for g in group {
                marks[g] = Mark::Coarsen;
            }
        }
    }
    marks
}

pub fn mark_elements(mesh: &Mesh, u: &SolutionField, cfg: &AmrConfig, gas: GasModel) -> Vec<Mark> {
    marks_from_indicators(mesh, &indicators(mesh, u, gas), cfg)
}

/// Origin of one element of the adapted mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// Unchanged old element.
    Same(usize),
    /// Descendant of an old element (one or more levels deeper).
    Refined { ancestor: usize },
    /// Parent of four old siblings, in [`CellKey::children`] order.
    Coarsened { children: [usize; 4] },
}

/// Per new element, where its data comes from.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferPlan {
    pub sources: Vec<Source>,
}

impl TransferPlan {
    pub fn is_identity(&self) -> bool {
        self.sources
            .iter()
            .enumerate()
            .all(|(i, s)| *s == Source::Same(i))
    }

    pub fn counts(&self) -> (usize, usize) {
        let mut refined = HashSet::new();
        let mut coarsened = 0;
        for s in &self.sources {
            match s {
                Source::Refined { ancestor } => {
                    refined.insert(*ancestor);
                }
                Source::Coarsened { .. } => coarsened += 1,
                Source::Same(_) => {}
            }
        }
        (refined.len(), coarsened)
    }
}

/// Leaf containing the point region of `key`, searching upward.
fn covering_leaf(leaves: &HashSet<CellKey>, mut key: CellKey) -> Option<CellKey> {
    loop {
        if leaves.contains(&key) {
            return Some(key);
        }
        key = key.parent()?;
    }
}

fn refine_with_balance(mesh: &Mesh, leaves: &mut HashSet<CellKey>, start: Vec<CellKey>) {
    let mut queue = start;
    while let Some(key) = queue.pop() {
        if !leaves.remove(&key) {
            continue;
        }
        for child in key.children() {
            leaves.insert(child);
            for side in Side::ALL {
                let Some(nk) = mesh.neighbor_key(child, side) else { continue };
                if let Some(leaf) = covering_leaf(leaves, nk) {
                    if leaf.level + 1 < child.level {
                        queue.push(leaf);
                    }
                }
            }
        }
    }
}

/// Can `parent` replace its four children without breaking 2:1 balance?
fn coarsening_keeps_balance(mesh: &Mesh, leaves: &HashSet<CellKey>, parent: CellKey) -> bool {
    for side in Side::ALL {
        let Some(nk) = mesh.neighbor_key(parent, side) else { continue };
        if covering_leaf(leaves, nk).is_some() {
            continue;
        }
        // neighbor region is subdivided: its children along the shared side
        // must be leaves
        let touching = match side {
            Side::East => [nk.child(0, 0), nk.child(0, 1)],
            Side::West => [nk.child(1, 0), nk.child(1, 1)],
            Side::North => [nk.child(0, 0), nk.child(1, 0)],
            Side::South => [nk.child(0, 1), nk.child(1, 1)],
        };
        if touching.iter().any(|k| !leaves.contains(k)) {
            return false;
        }
    }
    true
}

fn descendants_in_order(key: CellKey, leaves: &HashSet<CellKey>, out: &mut Vec<CellKey>) {
    if leaves.contains(&key) {
        out.push(key);
        return;
    }
    for c in key.children() {
        descendants_in_order(c, leaves, out);
    }
}

/// Apply marks: refinement (with balancing refinements), then coarsening of
/// complete sibling groups that keep the mesh balanced. Returns the adapted
/// mesh and the transfer plan from `mesh`.
pub fn adapt_mesh(mesh: &Mesh, marks: &[Mark]) -> Result<(Mesh, TransferPlan)> {
    if marks.len() != mesh.len() {
        return Err(Error::Config(format!(
            "{} marks for {} elements",
            marks.len(),
            mesh.len()
        )));
    }
    let mut leaves: HashSet<CellKey> = mesh.elements.iter().map(|e| e.key).collect();
    let to_refine: Vec<CellKey> = mesh
        .elements
        .iter()
        .zip(marks)
        .filter(|(_, m)| **m == Mark::Refine)
        .map(|(e, _)| e.key)
        .collect();
    refine_with_balance(mesh, &mut leaves, to_refine);

    // deepest groups first, so a merge can rely on finer neighbors having
    // merged already
    let mut candidates: Vec<CellKey> = mesh
        .elements
        .iter()
        .zip(marks)
        .filter(|(el, m)| **m == Mark::Coarsen && el.key.child_position() == (0, 0))
        .filter_map(|(el, _)| el.key.parent())
        .collect();
    candidates.sort_by_key(|k| std::cmp::Reverse(k.level));
    let mut merged: HashSet<CellKey> = HashSet::new();
    for parent in candidates {
        let kids = parent.children();
        let all_marked = kids
            .iter()
            .all(|k| mesh.index.get(k).is_some_and(|&i| marks[i] == Mark::Coarsen));
        if !all_marked || !kids.iter().all(|k| leaves.contains(k)) {
            continue;
        }
        if !coarsening_keeps_balance(mesh, &leaves, parent) {
            continue;
        }
        for k in kids {
            leaves.remove(&k);
        }
        leaves.insert(parent);
        merged.insert(parent);
    }

    let mut new_keys = Vec::with_capacity(leaves.len());
    let mut sources = Vec::with_capacity(leaves.len());
    let mut emitted: HashSet<CellKey> = HashSet::new();
    for (old, el) in mesh.elements.iter().enumerate() {
        let key = el.key;
        if leaves.contains(&key) {
            new_keys.push(key);
            sources.push(Source::Same(old));
            continue;
        }
        if let Some(p) = key.parent().filter(|p| merged.contains(p)) {
            if emitted.insert(p) {
                let kids = p.children().map(|k| mesh.index[&k]);
                new_keys.push(p);
                sources.push(Source::Coarsened { children: kids });
            }
            continue;
        }
        let start = new_keys.len();
        descendants_in_order(key, &leaves, &mut new_keys);
        for _ in start..new_keys.len() {
            sources.push(Source::Refined { ancestor: old });
        }
    }
    let mut adapted = mesh.clone();
    adapted.rebuild(new_keys)?;
    adapted.check_balance()?;
    Ok((adapted, TransferPlan { sources }))
}

/// Position of `key` inside its ancestor `anc` as (size, offset_x, offset_y)
/// in units of the ancestor's reference square `[-1, 1]^2`.
fn relative_box(anc: CellKey, key: CellKey) -> (f64, f64, f64) {
    let d = key.level - anc.level;
    let size = 2.0 / (1u64 << d) as f64;
    let a = (key.i - (anc.i << d)) as f64;
    let b = (key.j - (anc.j << d)) as f64;
    (size, a, b)
}

/// Tensor Lagrange evaluation matrix: rows are target points
/// `(xs[i], ys[j])` with `i` fastest.
fn eval_matrix(nodes: &[f64], xs: &[f64], ys: &[f64]) -> Vec<Vec<f64>> {
    let lx: Vec<Vec<f64>> = xs.iter().map(|&x| lagrange_all(nodes, x)).collect();
    let ly: Vec<Vec<f64>> = ys.iter().map(|&y| lagrange_all(nodes, y)).collect();
    let n1 = nodes.len();
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for y in &ly {
        for x in &lx {
            let mut row = vec![0.0; n1 * n1];
            for b in 0..n1 {
                for a in 0..n1 {
                    row[a + n1 * b] = x[a] * y[b];
                }
            }
            out.push(row);
        }
    }
    out
}

fn apply(mat: &[Vec<f64>], v: &[ConservedState]) -> Vec<ConservedState> {
    mat.iter()
        .map(|row| {
            let mut s = ConservedState::ZERO;
            for (c, u) in row.iter().zip(v) {
                s += *c * *u;
            }
            s
        })
        .collect()
}

fn apply_scalar(mat: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    mat.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Jacobian at the points of `eval`, computed from interpolated metric
/// terms so that it is exact for polynomial geometry.
fn jacobian_at(el: &Element, eval: &[Vec<f64>]) -> Vec<f64> {
    let xr = apply_scalar(eval, &el.x_xi);
    let xs = apply_scalar(eval, &el.x_eta);
    let yr = apply_scalar(eval, &el.y_xi);
    let ys = apply_scalar(eval, &el.y_eta);
    (0..xr.len()).map(|q| xr[q] * ys[q] - xs[q] * yr[q]).collect()
}

/// Cholesky factorization in place; lower triangle holds the factor.
fn cholesky(a: &mut [Vec<f64>]) -> Result<()> {
    let n = a.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 0.0) {
            return Err(Error::InvalidMesh("singular projection mass matrix".into()));
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    Ok(())
}

fn cholesky_solve(l: &[Vec<f64>], b: &mut [ConservedState]) {
    let n = l.len();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * b[k];
        }
        b[i] = (1.0 / l[i][i]) * s;
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k][i] * b[k];
        }
        b[i] = (1.0 / l[i][i]) * s;
    }
}

/// Over-integrated L2 projection of four children onto their parent.
fn project_children(
    parent: &Element,
    children: [&Element; 4],
    child_values: [&[ConservedState]; 4],
    ops: &ReferenceOperators,
) -> Result<Vec<ConservedState>> {
    let nodes = ops.nodes();
    let fr = &ops.fine_rule;
    let nq = fr.len();
    let wq: Vec<f64> = (0..nq * nq).map(|q| fr.weights[q % nq] * fr.weights[q / nq]).collect();

    let on_parent = eval_matrix(nodes, &fr.nodes, &fr.nodes);
    let jp = jacobian_at(parent, &on_parent);
    let np = nodes.len() * nodes.len();
    let mut mass = vec![vec![0.0; np]; np];
    for q in 0..nq * nq {
        let m = wq[q] * jp[q];
        let row = &on_parent[q];
        for a in 0..np {
            if row[a] == 0.0 {
                continue;
            }
            let ma = m * row[a];
            for b in 0..=a {
                mass[a][b] += ma * row[b];
            }
        }
    }
    for a in 0..np {
        for b in 0..a {
            mass[b][a] = mass[a][b];
        }
    }

    let mut rhs = vec![ConservedState::ZERO; np];
    for (k, (child, vals)) in children.iter().zip(child_values).enumerate() {
        let (ci, cj) = (k % 2, k / 2);
        let px: Vec<f64> = fr.nodes.iter().map(|&r| 0.5 * (r + 2.0 * ci as f64 - 1.0)).collect();
        let py: Vec<f64> = fr.nodes.iter().map(|&r| 0.5 * (r + 2.0 * cj as f64 - 1.0)).collect();
        let test = eval_matrix(nodes, &px, &py);
        let uq = apply(&on_parent, vals);
        let jc = jacobian_at(child, &on_parent);
        for q in 0..nq * nq {
            let f = (wq[q] * jc[q]) * uq[q];
            for a in 0..np {
                if test[q][a] != 0.0 {
                    rhs[a] += test[q][a] * f;
                }
            }
        }
    }
    cholesky(&mut mass)?;
    cholesky_solve(&mass, &mut rhs);
    Ok(rhs)
}

/// Shift every node by the constant that makes the quadrature integrals of
/// `elems` sum to `target`.
fn conservative_shift(elems: &[&Element], values: &mut [&mut [ConservedState]], target: ConservedState, ops: &ReferenceOperators) {
    let w = ops.weights();
    let mut have = ConservedState::ZERO;
    let mut area = 0.0;
    for (el, v) in elems.iter().zip(values.iter()) {
        have += cell_integral(el, v, ops);
        area += el.area(w);
    }
    let shift = (1.0 / area) * (target - have);
    for v in values.iter_mut() {
        for u in v.iter_mut() {
            *u += shift;
        }
    }
}

/// Scale a refined group toward the parent mean until every child average
/// is admissible. The parent polynomial can be positive at the parent nodes
/// and still integrate to an inadmissible state over one child. The group
/// integral is unchanged because the parent mean times the group area
/// equals `target`.
fn admissible_child_averages(
    els: &[&Element],
    vals: &mut [Vec<ConservedState>],
    target: ConservedState,
    ops: &ReferenceOperators,
    gas: GasModel,
    eps: f64,
) -> Result<()> {
    let area: f64 = els.iter().map(|el| el.area(ops.weights())).sum();
    let mean = (1.0 / area) * target;
    let mut avgs: Vec<ConservedState> = els.iter().zip(vals.iter()).map(|(el, v)| cell_average(el, v, ops)).collect();
    let f = limit_toward_average(&mean, &mut avgs, gas, eps)?;
    if f.is_identity() {
        return Ok(());
    }
    for v in vals.iter_mut().flatten() {
        v.rho = mean.rho + f.density * (v.rho - mean.rho);
        *v = mean + f.pressure * (*v - mean);
    }
    Ok(())
}

fn limit(el: &Element, values: &mut [ConservedState], ops: &ReferenceOperators, gas: GasModel, eps: f64, e: usize) -> Result<()> {
    zhang_shu_limit(el, values, ops, gas, eps).map_err(|err| Error::Positivity {
        element: e,
        time: f64::NAN,
        detail: format!("solution transfer: {err}"),
    })?;
    Ok(())
}

/// Move `u_old` from `old` onto `new` following `plan`.
pub fn transfer_solution(
    plan: &TransferPlan,
    old: &Mesh,
    new: &Mesh,
    u_old: &SolutionField,
    gas: GasModel,
    eps: f64,
) -> Result<SolutionField> {
    let ops = &new.ops;
    let n1 = ops.n1();
    let np = n1 * n1;
    let nodes = ops.nodes();
    let mut u = SolutionField::zeros(new.len(), np);

    // group refined leaves by ancestor
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (e, s) in plan.sources.iter().enumerate() {
        match *s {
            Source::Same(o) => u.elem_mut(e).copy_from_slice(u_old.elem(o)),
            Source::Refined { ancestor } => groups.entry(ancestor).or_default().push(e),
            Source::Coarsened { children } => {
                let kids = children.map(|c| &old.elements[c]);
                let vals = children.map(|c| u_old.elem(c));
                let mut target = ConservedState::ZERO;
                for (el, v) in kids.iter().zip(vals) {
                    target += cell_integral(el, v, ops);
                }
                let mut proj = project_children(&new.elements[e], kids, vals, ops)?;
                conservative_shift(&[&new.elements[e]], &mut [&mut proj[..]], target, ops);
                limit(&new.elements[e], &mut proj, ops, gas, eps, e)?;
                u.elem_mut(e).copy_from_slice(&proj);
            }
        }
    }
    let mut ancestors: Vec<_> = groups.into_iter().collect();
    ancestors.sort_unstable_by_key(|(a, _)| *a);
    for (anc, kids) in ancestors {
        let pel = &old.elements[anc];
        let mut parent = u_old.elem(anc).to_vec();
        limit(pel, &mut parent, ops, gas, eps, kids[0])?;
        let target = cell_integral(pel, &parent, ops);
        let mut vals: Vec<Vec<ConservedState>> = kids
            .iter()
            .map(|&e| {
                let (size, a, b) = relative_box(pel.key, new.elements[e].key);
                let map = |off: f64, r: f64| -1.0 + size * (off + 0.5 * (r + 1.0));
                let xs: Vec<f64> = nodes.iter().map(|&r| map(a, r)).collect();
                let ys: Vec<f64> = nodes.iter().map(|&r| map(b, r)).collect();
                apply(&eval_matrix(nodes, &xs, &ys), &parent)
            })
            .collect();
        let els: Vec<&Element> = kids.iter().map(|&e| &new.elements[e]).collect();
        let mut refs: Vec<&mut [ConservedState]> = vals.iter_mut().map(|v| &mut v[..]).collect();
        conservative_shift(&els, &mut refs, target, ops);
        admissible_child_averages(&els, &mut vals, target, ops, gas, eps).map_err(|err| Error::Positivity {
            element: kids[0],
            time: f64::NAN,
            detail: format!("solution transfer: {err}"),
        })?;
        for ((&e, el), v) in kids.iter().zip(&els).zip(vals.iter_mut()) {
            limit(el, v, ops, gas, eps, e)?;
            u.elem_mut(e).copy_from_slice(v);
        }
    }
    Ok(u)
}
