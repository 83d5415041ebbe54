//! Acceptance suite. Each test prints one `criterion <k>: PASS|FAIL` line to
//! stderr (outside the test harness capture) and then asserts.

use std::io::Write;
use std::time::Instant;

use dgsem_amr::amr::{adapt_mesh, transfer_solution, Mark};
use dgsem_amr::dgsem::{
    conserved_totals, entropy_rate, es_nonconforming_fluxes, mortar_nonconforming_fluxes, semidiscrete_rhs,
    BoundaryConditions, FluxMode, NonconformingFluxes, NonconformingGeometry, SolutionField,
};
use dgsem_amr::driver::cases::vortex_mesh;
use dgsem_amr::driver::config::vortex_dt;
use dgsem_amr::driver::output::ConvergenceRow;
use dgsem_amr::driver::{mach_stem_position, run_simulation, vortex_convergence, CaseKind, RunConfig};
use dgsem_amr::euler::{entropy_data, is_admissible, pressure, ConservedState, GasModel};
use dgsem_amr::limiters::{cell_average, cell_integral, zhang_shu_limit, DEFAULT_EPS};
use dgsem_amr::mesh::{vortex_warp, Bounds, Mesh};
use dgsem_amr::reference_ops::ReferenceOperators;
use dgsem_amr::timestepping::{ssprk3_step, StepConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAS: GasModel = GasModel { gamma: 1.4 };

fn report(k: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {k}: {verdict} {detail}");
}

fn study(flux: FluxMode, degree: usize, levels: &[u8]) -> (Vec<ConvergenceRow>, f64) {
    let mut cfg = RunConfig::defaults(CaseKind::Vortex, degree);
    cfg.flux = flux;
    let start = Instant::now();
    let rows = vortex_convergence(&cfg, levels, GAS, None).expect("vortex study");
    (rows, start.elapsed().as_secs_f64())
}

fn rho_rates(rows: &[ConvergenceRow]) -> Vec<f64> {
    rows.iter().filter_map(|r| r.rates.map(|v| v[0])).collect()
}

fn fmt_rates(rates: &[f64]) -> String {
    rates.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join("/")
}

/// Warped checkerboard mesh: `n x n` cells, every other one split.
fn warped_checkerboard(degree: usize, n: usize) -> Mesh {
    let mut m = Mesh::build_cartesian(degree, n, n, Bounds::new(-10.0, 10.0, -10.0, 10.0), [true; 2]).unwrap();
    m.checkerboard_refine(1).unwrap();
    m.apply_warp(vortex_warp(0.05, 20.0)).unwrap();
    m
}

fn random_state(rng: &mut ChaCha8Rng) -> ConservedState {
    ConservedState::from_primitive(
        rng.gen_range(0.5..2.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(0.5..2.0),
        GAS,
    )
}

#[test]
fn criterion_01_mortar_convergence() {
    // level-2 density rates of the reference tables
    let cases = [(2usize, 1.85, 1.89), (3usize, 2.9, 3.22)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (degree, floor, reference) in cases {
        let (rows, secs) = study(FluxMode::Mortar, degree, &[0, 1, 2]);
        let rates = rho_rates(&rows);
        let finest = *rates.last().unwrap();
        let within = (finest - reference).abs() <= 0.4;
        let fast = secs <= 900.0;
        pass &= within && fast;
        parts.push(format!(
            "N={degree}: rates {} (finest {finest:.3}, reference {reference}, |diff| {:.3} <= 0.4: {within}; >= {floor}: {}), {secs:.1}s",
            fmt_rates(&rates),
            (finest - reference).abs(),
            finest >= floor
        ));
    }
    report(1, pass, &format!("vortex mortar convergence, levels 0-2: {}", parts.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_02_es_convergence() {
    let mut pass = true;
    let mut parts = Vec::new();
    for degree in 1..=3 {
        let (rows, _) = study(FluxMode::Es, degree, &[0, 1, 2]);
        let rates = rho_rates(&rows);
        let finest = *rates.last().unwrap();
        let ok = if degree == 1 {
            (1.2..=1.8).contains(&finest)
        } else {
            finest <= 1.7
        };
        pass &= ok;
        parts.push(format!("N={degree}: rates {} (finest {finest:.3}: {ok})", fmt_rates(&rates)));
    }
    report(
        2,
        pass,
        &format!(
            "vortex ES convergence, levels 0-2, N=1 in [1.2, 1.8], N>=2 <= 1.7: {}",
            parts.join("; ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_level_three_error_anchor() {
    let reference = 6.38e-5;
    let (rows, secs) = study(FluxMode::Mortar, 3, &[3]);
    let err = rows[0].errors[0];
    let pass = err <= 2.0 * reference && err >= 0.5 * reference;
    report(
        3,
        pass,
        &format!("N=3 mortar level 3 density error {err:.4e} vs reference {reference:.2e} (factor {:.3}), {secs:.1}s", err / reference),
    );
    assert!(pass);
}

#[test]
fn criterion_04_free_stream() {
    let state = ConservedState::from_primitive(1.3, 0.4, -0.7, 2.1, GAS);
    let mut worst: f64 = 0.0;
    for degree in 1..=3 {
        let mesh = warped_checkerboard(degree, 10);
        let u = SolutionField::from_fn(&mesh, |_, _| state);
        for mode in [FluxMode::Es, FluxMode::Mortar] {
            let rhs = semidiscrete_rhs(&mesh, &u, mode, &BoundaryConditions::periodic(), 0.0, GAS).unwrap();
            worst = worst.max(rhs.max_abs());
        }
    }
    let pass = worst <= 1e-11;
    report(4, pass, &format!("free stream, N=1..3, ES and mortar: max |RHS| = {worst:.3e} (<= 1e-11)"));
    assert!(pass);
}

#[test]
fn criterion_05_conservation_with_limiters() {
    let mut worst: f64 = 0.0;
    let mut limited = 0;
    for mode in [FluxMode::Es, FluxMode::Mortar] {
        let mesh = vortex_mesh(3, 10, 0).unwrap();
        let mut u = SolutionField::from_fn(&mesh, |x, y| dgsem_amr::driver::vortex_exact(x, y, 0.0, GAS));
        let cfg = StepConfig::default();
        assert!(cfg.oe.is_some() && cfg.positivity);
        let before = conserved_totals(&mesh, &u);
        let dt = vortex_dt(0);
        let bcs = BoundaryConditions::periodic();
        for step in 0..100 {
            let (next, stats) = ssprk3_step(&mesh, &u, dt, mode, &bcs, step as f64 * dt, &cfg, GAS).unwrap();
            limited += stats.oe_elements + stats.limited_elements;
            u = next;
        }
        let after = conserved_totals(&mesh, &u);
        for c in 0..4 {
            worst = worst.max((after[c] - before[c]).abs() / before[c].abs());
        }
    }
    let pass = worst <= 1e-11;
    report(
        5,
        pass,
        &format!("100 SSPRK3 steps with OE and limiter, ES and mortar: max relative drift {worst:.3e} (<= 1e-11), {limited} element-stage limiter actions"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_semidiscrete_entropy_production() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::NEG_INFINITY;
    let mut trials = 0;
    for degree in 1..=3 {
        let mesh = warped_checkerboard(degree, 4);
        let per_degree = if degree == 3 { 18 } else { 16 };
        for _ in 0..per_degree {
            let u = SolutionField::from_fn(&mesh, |_, _| random_state(&mut rng));
            let rhs = semidiscrete_rhs(&mesh, &u, FluxMode::Es, &BoundaryConditions::periodic(), 0.0, GAS).unwrap();
            worst = worst.max(entropy_rate(&mesh, &u, &rhs, GAS));
            trials += 1;
        }
    }
    let pass = trials == 50 && worst <= 1e-11;
    report(6, pass, &format!("ES entropy production on {trials} random fields: max {worst:.3e} (<= 1e-11)"));
    assert!(pass);
}

/// A 2:1 face whose coarse edge is a random polynomial curve of degree `n`,
/// with metric-scaled outward normals on both sides.
struct RandomFace {
    coarse: Vec<[f64; 2]>,
    fine: [Vec<[f64; 2]>; 2],
}

fn random_face(ops: &ReferenceOperators, rng: &mut ChaCha8Rng) -> RandomFace {
    let n = ops.rule.len() - 1;
    // edge tangent t(s) = d/ds (x, y) as polynomials of degree n - 1
    let cx: Vec<f64> = (0..n).map(|i| if i == 0 { rng.gen_range(-0.3..0.3) } else { rng.gen_range(-0.2..0.2) }).collect();
    let cy: Vec<f64> = (0..n).map(|i| if i == 0 { rng.gen_range(0.5..1.5) } else { rng.gen_range(-0.2..0.2) }).collect();
    let poly = |c: &[f64], s: f64| c.iter().rev().fold(0.0, |acc, a| acc * s + a);
    // coarse element on the left, outward normal (dy/ds, -dx/ds)
    let normal = |s: f64| [poly(&cy, s), -poly(&cx, s)];
    let coarse = ops.rule.nodes.iter().map(|&s| normal(s)).collect();
    let fine = [0usize, 1].map(|k| {
        ops.rule
            .nodes
            .iter()
            .map(|&xi| {
                let s = if k == 0 { 0.5 * (xi - 1.0) } else { 0.5 * (xi + 1.0) };
                let m = normal(s);
                [-0.5 * m[0], -0.5 * m[1]]
            })
            .collect()
    });
    RandomFace { coarse, fine }
}

/// `sum_j w_j F^C_j + sum_k sum_i w_i F^Fk_i` per component.
fn net_flux(f: &NonconformingFluxes, w: &[f64]) -> ConservedState {
    let mut acc = ConservedState::ZERO;
    for (j, v) in f.coarse.iter().enumerate() {
        acc += w[j] * *v;
    }
    for side in &f.fine {
        for (i, v) in side.iter().enumerate() {
            acc += w[i] * *v;
        }
    }
    acc
}

/// Entropy flux balance `sum w (V . F - psi . n)` over both sides; the
/// interface dissipates entropy when this is nonnegative.
fn entropy_balance(
    f: &NonconformingFluxes,
    coarse: &[ConservedState],
    fine: [&[ConservedState]; 2],
    face: &RandomFace,
    w: &[f64],
) -> f64 {
    let term = |u: &ConservedState, flux: &ConservedState, n: [f64; 2]| {
        let e = entropy_data(u, GAS).unwrap();
        let vf = e.vars[0] * flux.rho + e.vars[1] * flux.mom_x + e.vars[2] * flux.mom_y + e.vars[3] * flux.energy;
        vf - (e.psi_x * n[0] + e.psi_y * n[1])
    };
    let mut acc = 0.0;
    for j in 0..w.len() {
        acc += w[j] * term(&coarse[j], &f.coarse[j], face.coarse[j]);
    }
    for k in 0..2 {
        for i in 0..w.len() {
            acc += w[i] * term(&fine[k][i], &f.fine[k][i], face.fine[k][i]);
        }
    }
    acc
}

#[test]
fn criterion_07_interface_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut net_es: f64 = 0.0;
    let mut net_mortar: f64 = 0.0;
    let mut entropy_n1 = f64::NEG_INFINITY;
    let mut entropy_high = f64::NEG_INFINITY;
    for degree in 1..=3 {
        let ops = ReferenceOperators::new(degree).unwrap();
        let w = ops.rule.weights.clone();
        let n1 = w.len();
        for _ in 0..1000 {
            let face = random_face(&ops, &mut rng);
            let coarse: Vec<ConservedState> = (0..n1).map(|_| random_state(&mut rng)).collect();
            let fine: [Vec<ConservedState>; 2] = [0, 1].map(|_| (0..n1).map(|_| random_state(&mut rng)).collect());
            let fine_refs = [&fine[0][..], &fine[1][..]];
            let geom = NonconformingGeometry {
                coarse_normals: &face.coarse,
                fine_normals: [&face.fine[0], &face.fine[1]],
            };
            let es = es_nonconforming_fluxes(&coarse, fine_refs, &geom, &ops, GAS).unwrap();
            let mortar = mortar_nonconforming_fluxes(&coarse, fine_refs, &geom, &ops, GAS, DEFAULT_EPS).unwrap();
            net_es = net_es.max(net_flux(&es, &w).max_abs());
            net_mortar = net_mortar.max(net_flux(&mortar, &w).max_abs());
            // production is the negated balance
            let production = -entropy_balance(&es, &coarse, fine_refs, &face, &w);
            if degree == 1 {
                entropy_n1 = entropy_n1.max(production);
            } else {
                entropy_high = entropy_high.max(production);
            }
        }
    }
    let pass = net_es <= 1e-12 && net_mortar <= 1e-12 && entropy_n1 <= 1e-12;
    report(
        7,
        pass,
        &format!(
            "2:1 interface, 1000 trials per N=1..3: NET_cons ES {net_es:.3e}, mortar {net_mortar:.3e} (<= 1e-12); ES entropy production N=1 {entropy_n1:.3e} (<= 1e-12), N=2,3 {entropy_high:.3e} (not required)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_jet_positivity() {
    let cfg = RunConfig::defaults(CaseKind::Jet, 3);
    assert_eq!((cfg.nx, cfg.ny, cfg.max_level, cfg.flux), (75, 38, 2, FluxMode::Mortar));
    let start = Instant::now();
    let res = run_simulation(&cfg, GAS);
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match &res {
        Ok(r) => {
            let min_rho = r.diagnostics.iter().map(|d| d.min_rho).fold(f64::INFINITY, f64::min);
            let min_p = r.diagnostics.iter().map(|d| d.min_p).fold(f64::INFINITY, f64::min);
            let ok = (r.t - cfg.t_final).abs() < 1e-15 && min_rho > 0.0 && min_p > 0.0;
            (
                ok,
                format!(
                    "reached t = {:.6e} in {} steps ({} rejected and retried), min rho {min_rho:.3e}, min p {min_p:.3e}, {} elements, {secs:.0}s",
                    r.t,
                    r.steps,
                    r.rejected_steps,
                    r.mesh.len()
                ),
            )
        }
        Err(e) => (false, format!("failed: {e}")),
    };
    report(8, pass, &format!("jet 75x38, N=3, mortar, max level 2 to t = 0.001: {detail}"));
    assert!(pass);
}

#[test]
fn criterion_09_double_mach_reflection() {
    let reference = 2.77;
    let mut pass = true;
    let mut parts = Vec::new();
    for (degree, flux) in [(1usize, FluxMode::Es), (2usize, FluxMode::Mortar)] {
        let mut cfg = RunConfig::defaults(CaseKind::Dmr, degree);
        cfg.flux = flux;
        cfg.nx = 32;
        cfg.ny = 8;
        assert_eq!(cfg.max_level, 3);
        let start = Instant::now();
        match run_simulation(&cfg, GAS) {
            Ok(r) => {
                let min_rho = r.diagnostics.iter().map(|d| d.min_rho).fold(f64::INFINITY, f64::min);
                let min_p = r.diagnostics.iter().map(|d| d.min_p).fold(f64::INFINITY, f64::min);
                let stem = mach_stem_position(&r.mesh, &r.u, 3.0).unwrap_or(f64::NAN);
                let close = (stem - reference).abs() <= 0.1 * reference;
                let ok = min_rho > 0.0 && min_p > 0.0 && close;
                pass &= ok;
                parts.push(format!(
                    "N={degree} {flux}: stem at x = {stem:.3} ({:+.1}%), min rho {min_rho:.3e}, min p {min_p:.3e}, {} steps ({} rejected), {:.0}s",
                    100.0 * (stem - reference) / reference,
                    r.steps,
                    r.rejected_steps,
                    start.elapsed().as_secs_f64()
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("N={degree} {flux}: failed: {e}"));
            }
        }
    }
    report(
        9,
        pass,
        &format!("double Mach reflection 32x8, max level 3 to t = 0.2, stem within 10% of {reference}: {}", parts.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_10_limiter_and_transfer() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let meshes: Vec<Mesh> = (1..=3).map(|n| warped_checkerboard(n, 4)).collect();

    // positivity limiter on random elements with some inadmissible nodes
    let mut avg_err: f64 = 0.0;
    let mut all_admissible = true;
    let mut limited = 0;
    for trial in 0..10_000 {
        let mesh = &meshes[trial % 3];
        let e = rng.gen_range(0..mesh.len());
        let el = &mesh.elements[e];
        let np = el.jac.len();
        let base = random_state(&mut rng);
        let mut vals: Vec<ConservedState> = (0..np)
            .map(|_| {
                let mut s = base;
                s.rho *= rng.gen_range(-0.3..2.0);
                s.mom_x += rng.gen_range(-1.0..1.0);
                s.mom_y += rng.gen_range(-1.0..1.0);
                s.energy *= rng.gen_range(-0.3..2.0);
                s
            })
            .collect();
        let avg = cell_average(el, &vals, &mesh.ops);
        if !is_admissible(&avg, GAS).unwrap_or(false) {
            // shift into the admissible set around `base` while keeping the spread
            let shift = base - avg;
            for v in vals.iter_mut() {
                *v += shift;
            }
        }
        let avg = cell_average(el, &vals, &mesh.ops);
        let f = zhang_shu_limit(el, &mut vals, &mesh.ops, GAS, DEFAULT_EPS).unwrap();
        if !f.is_identity() {
            limited += 1;
        }
        let after = cell_average(el, &vals, &mesh.ops);
        avg_err = avg_err.max((after - avg).max_abs() / avg.max_abs());
        all_admissible &= vals
            .iter()
            .all(|v| v.rho > 0.0 && pressure(v, GAS).map(|p| p > 0.0).unwrap_or(false));
    }

    // refine then coarsen on nodal data of each element
    let mut round_trip: f64 = 0.0;
    let mut integral_err: f64 = 0.0;
    for mesh in &meshes {
        let u = SolutionField::from_fn(mesh, |_, _| random_state(&mut rng));
        let (fine, p1) = adapt_mesh(mesh, &vec![Mark::Refine; mesh.len()]).unwrap();
        let uf = transfer_solution(&p1, mesh, &fine, &u, GAS, DEFAULT_EPS).unwrap();
        let (back, p2) = adapt_mesh(&fine, &vec![Mark::Coarsen; fine.len()]).unwrap();
        assert_eq!(back.len(), mesh.len());
        let ub = transfer_solution(&p2, &fine, &back, &uf, GAS, DEFAULT_EPS).unwrap();
        let scale = u.max_abs();
        for (e, el) in mesh.elements.iter().enumerate() {
            let b = back.index[&el.key];
            for (x, y) in u.elem(e).iter().zip(ub.elem(b)) {
                round_trip = round_trip.max((*x - *y).max_abs() / scale);
            }
        }

        // random mixed refine/coarsen on discontinuous data
        let v = SolutionField::from_fn(&fine, |_, _| random_state(&mut rng));
        let marks: Vec<Mark> = (0..fine.len())
            .map(|_| match rng.gen_range(0..3) {
                0 => Mark::Refine,
                1 => Mark::Coarsen,
                _ => Mark::Keep,
            })
            .collect();
        let (adapted, plan) = adapt_mesh(&fine, &marks).unwrap();
        let va = transfer_solution(&plan, &fine, &adapted, &v, GAS, DEFAULT_EPS).unwrap();
        let t0 = conserved_totals(&fine, &v);
        let t1 = conserved_totals(&adapted, &va);
        for c in 0..4 {
            integral_err = integral_err.max((t1[c] - t0[c]).abs() / t0[c].abs().max(1.0));
        }
        // element-wise check of the coarsened groups
        for (e, el) in adapted.elements.iter().enumerate() {
            assert!(cell_integral(el, va.elem(e), &adapted.ops).is_finite());
        }
    }

    let pass = avg_err <= 1e-14 && all_admissible && round_trip <= 1e-12 && integral_err <= 1e-12;
    report(
        10,
        pass,
        &format!(
            "10^4 random elements ({limited} limited): average error {avg_err:.3e} (<= 1e-14), admissible {all_admissible}; round trip {round_trip:.3e} (<= 1e-12); transfer integrals {integral_err:.3e} (<= 1e-12)"
        ),
    );
    assert!(pass);
}
