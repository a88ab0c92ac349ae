use std::collections::VecDeque;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torusflow::classify::{classify_seed, decompose, ClassifierParams};
use torusflow::construct::{damping_factor, make_schedule};
use torusflow::geometry::circle_distance;
use torusflow::integrate::integrate_field;
use torusflow::presets::{flow_preset, FLOW_PRESETS, PHI};
use torusflow::{
    connected_components, is_coconnected, torus_distance, wrap, CellSet, Direction, IntegrationParams, TorusPoint,
    VectorFieldSpec,
};

/// Components by flood fill over the four torus neighbours, written without
/// the library's grid helpers.
fn flood(n: usize, member: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n * n];
    let mut out = Vec::new();
    for start in 0..n * n {
        if !member[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            comp.push(k);
            let (i, j) = (k % n, k / n);
            let around =
                [j * n + (i + 1) % n, j * n + (i + n - 1) % n, ((j + 1) % n) * n + i, ((j + n - 1) % n) * n + i];
            for m in around {
                if member[m] && !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort();
    out
}

fn cell_set() -> impl Strategy<Value = (usize, Vec<bool>)> {
    (1usize..=32).prop_flat_map(|n| (Just(n), proptest::collection::vec(any::<bool>(), n * n)))
}

proptest! {
    #[test]
    fn wrap_is_idempotent(x in -1e6f64..1e6, y in -1e6f64..1e6) {
        let p = wrap(x, y).unwrap();
        let q = wrap(p.x(), p.y()).unwrap();
        prop_assert_eq!(p, q);
        prop_assert!((0.0..1.0).contains(&p.x()) && (0.0..1.0).contains(&p.y()));
    }

    #[test]
    fn distance_is_translation_invariant(
        px in 0.0f64..1.0, py in 0.0f64..1.0, qx in 0.0f64..1.0, qy in 0.0f64..1.0,
        vx in -10.0f64..10.0, vy in -10.0f64..10.0,
    ) {
        let d = torus_distance(wrap(px, py).unwrap(), wrap(qx, qy).unwrap());
        let e = torus_distance(wrap(px + vx, py + vy).unwrap(), wrap(qx + vx, qy + vy).unwrap());
        prop_assert!((d - e).abs() <= 1e-12, "{} vs {}", d, e);
    }

    #[test]
    fn components_match_flood_fill((n, member) in cell_set()) {
        let s = CellSet::from_indices(n, (0..n * n).filter(|&k| member[k]));
        let comps = connected_components(&s);
        let mut mine: Vec<Vec<usize>> = comps.iter().map(|c| c.iter().collect()).collect();
        mine.sort();
        prop_assert_eq!(&mine, &flood(n, &member));
        // a partition of s
        let total: usize = comps.iter().map(|c| c.len()).sum();
        prop_assert_eq!(total, s.len());
        let mut union = CellSet::new(n);
        for c in &comps {
            prop_assert!(!union.intersects(c));
            union.union_with(c);
        }
        prop_assert_eq!(union, s);
    }

    #[test]
    fn coconnected_matches_flood_fill((n, member) in cell_set()) {
        let s = CellSet::from_indices(n, (0..n * n).filter(|&k| member[k]));
        let outside: Vec<bool> = member.iter().map(|m| !m).collect();
        prop_assert_eq!(is_coconnected(&s), flood(n, &outside).len() <= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fields_are_periodic(x in -3.0f64..3.0, y in -3.0f64..3.0, k in -5i32..5, l in -5i32..5, which in 0usize..8) {
        let field = flow_preset(FLOW_PRESETS[which]).unwrap().compile().unwrap();
        let (u0, v0) = field.eval_raw(x, y);
        let (u1, v1) = field.eval_raw(x + k as f64, y + l as f64);
        prop_assert!((u0 - u1).abs() <= 1e-8 && (v0 - v1).abs() <= 1e-8, "{:?}", (u0, v0, u1, v1));
        let p = wrap(x, y).unwrap();
        let (u2, v2) = field.eval_raw(p.x(), p.y());
        prop_assert!((u0 - u2).abs() <= 1e-8 && (v0 - v2).abs() <= 1e-8);
    }
}

fn gap(p: TorusPoint, q: TorusPoint) -> f64 {
    torus_distance(p, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flow_has_the_group_property(
        x in 0.0f64..1.0, y in 0.0f64..1.0, t1 in 0.1f64..5.0, t2 in 0.1f64..5.0, hamiltonian in any::<bool>(),
    ) {
        let spec = if hamiltonian { VectorFieldSpec::HamiltonianBand } else { VectorFieldSpec::linear(1.0, PHI) };
        let field = spec.compile().unwrap();
        let prm = IntegrationParams::default();
        let seed = wrap(x, y).unwrap();
        let a = integrate_field(&field, seed, Direction::Forward, t1, &prm).unwrap();
        let b = integrate_field(&field, a.end(), Direction::Forward, t2, &prm).unwrap();
        let c = integrate_field(&field, seed, Direction::Forward, t1 + t2, &prm).unwrap();
        prop_assert!(gap(b.end(), c.end()) <= 10.0 * prm.tol_local * (t1 + t2), "{}", gap(b.end(), c.end()));
    }

    #[test]
    fn flow_is_reversible(x in 0.0f64..1.0, y in 0.05f64..0.45, t in 0.1f64..10.0, which in 0usize..3) {
        let spec = match which {
            0 => VectorFieldSpec::linear(1.0, PHI),
            1 => VectorFieldSpec::HamiltonianBand,
            _ => flow_preset("rotation-phi-suspension").unwrap(),
        };
        let field = spec.compile().unwrap();
        let prm = IntegrationParams::default();
        let seed = wrap(x, y).unwrap();
        let fwd = integrate_field(&field, seed, Direction::Forward, t, &prm).unwrap();
        let back = integrate_field(&field, fwd.end(), Direction::Backward, t, &prm).unwrap();
        prop_assert!(gap(back.end(), seed) <= 10.0 * prm.tol_local * t, "{}", gap(back.end(), seed));
    }

    #[test]
    fn schedule_accumulates_at_p0(order in 3usize..=8, r_margin in 0.01f64..0.3, px in 0.0f64..1.0, py in 0.0f64..1.0) {
        let p0 = wrap(px, py).unwrap();
        let s = make_schedule((1.0, PHI), p0, order, r_margin).unwrap();
        let n = order as i64;
        let worst = [s.point(n), s.point(-n)].iter().map(|p| torus_distance(*p, p0)).fold(0.0, f64::max);
        prop_assert!(worst <= r_margin * 2f64.powi(1 - order as i32) + 1e-15);
    }
}

#[test]
fn damping_differences_stay_bounded_under_refinement() {
    let s = make_schedule((1.0, PHI), TorusPoint::ORIGIN, 8, 0.1).unwrap();
    let phi = |x: f64, y: f64| damping_factor(&s, pt(x, y));
    let mut rng = ChaCha8Rng::seed_from_u64(12345);
    let steps = [4e-3, 2e-3, 1e-3, 5e-4];
    for _ in 0..1000 {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        // quotients at each scale, first and second order in both directions
        let q: Vec<f64> = steps
            .iter()
            .map(|&h| {
                let c = phi(x, y);
                let dx = (phi(x + h, y) - phi(x - h, y)) / (2.0 * h);
                let dy = (phi(x, y + h) - phi(x, y - h)) / (2.0 * h);
                let dxx = (phi(x + h, y) - 2.0 * c + phi(x - h, y)) / (h * h);
                let dyy = (phi(x, y + h) - 2.0 * c + phi(x, y - h)) / (h * h);
                dx.abs().max(dy.abs()).max(dxx.abs()).max(dyy.abs())
            })
            .collect();
        for w in q.windows(2) {
            assert!(w[1] <= 2.0 * w[0] + 1e-6, "difference quotients grow at ({x}, {y}): {q:?}");
        }
    }
}

fn pt(x: f64, y: f64) -> TorusPoint {
    wrap(x, y).unwrap()
}

#[test]
fn suspension_returns_equal_the_map() {
    use torusflow::poincare::{poincare_return_field, Axis, TransversalCircle};
    for name in ["denjoy-suspension", "rotation-phi-suspension"] {
        let spec = flow_preset(name).unwrap();
        let VectorFieldSpec::Suspension { map, .. } = &spec else { unreachable!() };
        let f = map.compile().unwrap();
        let field = spec.compile().unwrap();
        let circle = TransversalCircle::new(&field, Axis::Horizontal, 0.0).unwrap();
        let prm = IntegrationParams::default();
        for i in 0..256 {
            let x = (i as f64 + 0.5) / 256.0;
            let (q, _) = poincare_return_field(&field, &circle, pt(x, 0.0), Direction::Forward, &prm).unwrap();
            let err = circle_distance(q.x(), f.apply(x));
            assert!(err < 1e-8, "{name} at {x}: {err}");
        }
    }
}

#[test]
fn rotation_number_converges_like_one_over_k() {
    use torusflow::circle_map::{rotation_number, CircleMapSpec};
    for rho in [0.25, 0.5, PHI, 0.1234567] {
        for k in [1_000u64, 10_000, 100_000] {
            let est = rotation_number(&CircleMapSpec::Rotation { rho }, k).unwrap();
            assert!(circle_distance(est.rho, rho) <= 2.0 / k as f64);
        }
    }
    let monotone = torusflow::presets::map_preset("monotone-phi").unwrap();
    let mut last = f64::INFINITY;
    for k in [1_000u64, 10_000, 100_000] {
        let err = circle_distance(rotation_number(&monotone, k).unwrap().rho, PHI);
        assert!(err <= 2.0 / k as f64 + 1e-9, "K = {k}: {err}");
        assert!(err <= last + 2.0 / k as f64);
        last = err;
    }
}

#[test]
fn conjugacy_residual_shrinks_on_rotations() {
    use torusflow::circle_map::CircleMapSpec;
    use torusflow::construct::conjugate_to_rotation;
    for rho in [PHI, std::f64::consts::SQRT_2 - 1.0] {
        let mut last = f64::INFINITY;
        for k in [1_000u64, 10_000, 100_000] {
            let c = conjugate_to_rotation(&CircleMapSpec::Rotation { rho }, k, 256).unwrap();
            assert!(c.residual <= last + 2.0 / k as f64, "rho {rho} K {k}: {} after {last}", c.residual);
            last = c.residual;
        }
        assert!(last < 1e-3);
    }
}

#[test]
fn x3_holonomy_is_odd_monotone_and_cubic() {
    use torusflow::poincare::box_crossing;
    use torusflow::presets::x3_demo_box;
    let field = flow_preset("x3-box-demo").unwrap().compile().unwrap();
    let bx = x3_demo_box();
    let prm = IntegrationParams::default();
    let m: Vec<f64> = (0..=40).map(|i| box_crossing(&field, &bx, -1.0 + i as f64 / 20.0, &prm).unwrap()).collect();
    for i in 0..=40 {
        let eta = -1.0 + i as f64 / 20.0;
        assert!((m[i] - eta.powi(3)).abs() < 1e-4, "eta {eta}: {}", m[i]);
        assert!((m[i] + m[40 - i]).abs() < 1e-6, "not odd at {eta}");
    }
    assert!(m.windows(2).all(|w| w[1] > w[0]));
    for (i, fixed) in [(0, -1.0), (20, 0.0), (40, 1.0)] {
        assert!((m[i] - fixed).abs() < 1e-6);
    }
}

fn small(n: usize) -> ClassifierParams {
    ClassifierParams::with_resolution(n)
}

#[test]
fn labels_survive_time_reversal() {
    let prm = small(16);
    let cases: [(&str, (f64, f64)); 5] = [
        ("linear:1,phi", (0.3, 0.7)),
        ("hamiltonian-band", (0.4, 0.2)),
        ("hamiltonian-band", (0.4, 0.0)),
        ("limit-cycle-band", (0.2, 0.3)),
        ("rotation-half-suspension", (0.1, 0.6)),
    ];
    for (name, (x, y)) in cases {
        let field = flow_preset(name).unwrap().compile().unwrap();
        let sing = field.singular_cells(prm.resolution);
        let seed = pt(x, y);
        let fwd = classify_seed(&field, seed, &prm, &sing).unwrap();
        let bwd = classify_seed(&field.reversed(), seed, &prm, &sing).unwrap();
        assert_eq!(fwd.label.code(), bwd.label.code(), "{name} at ({x}, {y})");
        if fwd.label.code() == torusflow::classify::codes::P {
            assert_eq!(fwd.limits.omega_cells, bwd.limits.alpha_cells);
        }
    }
}

#[test]
fn zero_circles_are_sing_and_the_rest_per() {
    use torusflow::classify::codes;
    let prm = small(16);
    let p = decompose(&VectorFieldSpec::HamiltonianBand, &prm).unwrap();
    let on_zero = |y: f64| y == 0.0 || y == 0.5;
    for e in &p.extra_seeds {
        if on_zero(e.point.y()) {
            assert_eq!(e.label, codes::SING);
            assert_eq!(p.labels[torusflow::cell_index(e.point, 16)], codes::SING);
        }
    }
    let [sing, per, rest @ ..] = p.counts();
    assert_eq!((sing, per), (32, 16 * 16 - 32));
    assert!(rest.iter().all(|&c| c == 0));
    // off the zero circles the Per test decides, before any recurrence test
    for r in p.grid_records() {
        if p.labels[r.cell()] == codes::PER {
            assert_eq!(r.label.code(), codes::PER);
        }
    }
}

#[test]
fn ld_classes_avoid_sing_and_p_cells() {
    use torusflow::classify::{codes, orbit_class};
    for name in ["linear:1,phi", "blowup-phi-N8"] {
        let p = decompose(&flow_preset(name).unwrap(), &small(32)).unwrap();
        let trivial = p.cells_labelled(&[codes::SING, codes::P]);
        let mut checked = 0;
        for r in p.seeds_labelled(codes::LD).step_by(37) {
            let class = orbit_class(&p, r.seed).unwrap();
            assert!(!class.class_cells.intersects(&trivial), "{name}: class of {:?} meets Sing or P", r.seed);
            checked += 1;
        }
        assert!(checked > 0);
    }
}

#[test]
fn blowup_keeps_off_orbit_orbits() {
    let prm = small(64);
    let base = VectorFieldSpec::linear(1.0, PHI).compile().unwrap();
    let blown = flow_preset("blowup-phi-N8").unwrap().compile().unwrap();
    for (x, y) in [(0.5, 0.25), (0.13, 0.77)] {
        let seed = pt(x, y);
        let a = classify_seed(&base, seed, &prm, &base.singular_cells(64)).unwrap();
        let b = classify_seed(&blown, seed, &prm, &blown.singular_cells(64)).unwrap();
        assert!(a.closure.mismatch(&b.closure) <= prm.delta_closure, "seed ({x}, {y})");
    }
}
