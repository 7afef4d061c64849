mod common;

use common::spec;
use frontblock::analytics::{cone_drive_r_theta, cone_threshold_slope, ConeModel};
use frontblock::config::SolverSettings;
use frontblock::field::{front_profile, integrate, reaction};
use frontblock::geometry::{rasterize, ScenarioKind};
use frontblock::radial::{relax_solve, InitialGuess, RadialProblem, Relaxation};
use frontblock::solver::{rhs, Integrator};
use frontblock::sweep::{phase_boundary, Axis, OutcomeTable};
use frontblock::{
    run, run_sweep, BistableParams, DiffusionMap, GridSpec, Outcome, ScalarField, SolverConfig, SweepSpec,
};
use proptest::prelude::*;

fn field_from(grid: GridSpec, vals: &[f64]) -> ScalarField {
    ScalarField::new(grid, vals.iter().cycle().take(grid.len()).copied().collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reaction_sign_pattern(a in 0.01f64..0.99, t in 0.001f64..0.999, s in 0.1f64..10.0) {
        let p = BistableParams::new(a, s).unwrap();
        prop_assert_eq!(reaction(0.0, p), 0.0);
        prop_assert_eq!(reaction(1.0, p), 0.0);
        prop_assert_eq!(reaction(a, p), 0.0);
        prop_assert!(reaction(a * t, p) < 0.0);
        prop_assert!(reaction(a + (1.0 - a) * t, p) > 0.0);
        prop_assert!(reaction(-t, p) > 0.0);
        prop_assert!(reaction(1.0 + t, p) < 0.0);
    }

    #[test]
    fn front_profile_shape(c in -5.0f64..25.0, a in 0.05f64..0.95) {
        let g = GridSpec::new(200, 4, 0.1, 0.25, 0.05, 0.0).unwrap();
        let f = front_profile(g, c, BistableParams::with_threshold(a).unwrap());
        for j in 0..g.ny() {
            prop_assert_eq!(f.row(j), f.row(0));
        }
        prop_assert!(f.row(0).windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn integrate_is_linear(
        f in prop::collection::vec(-1.0f64..1.0, 1..64),
        g in prop::collection::vec(-1.0f64..1.0, 1..64),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let grid = GridSpec::new(9, 7, 0.1, 0.2, 0.05, 0.1).unwrap();
        let (f, g) = (field_from(grid, &f), field_from(grid, &g));
        let combo: Vec<f64> = f.values().iter().zip(g.values()).map(|(x, y)| alpha * x + beta * y).collect();
        let lhs = integrate(&ScalarField::new(grid, combo).unwrap());
        let rhs = alpha * integrate(&f) + beta * integrate(&g);
        let scale = (alpha.abs() + beta.abs()) * grid.area();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300) + 1e-15);
    }

    #[test]
    fn flux_form_is_conservative(
        u in prop::collection::vec(-0.5f64..1.5, 1..80),
        b in prop::collection::vec(0.0f64..1.0, 1..80),
        a in 0.05f64..0.95,
    ) {
        let grid = GridSpec::new(11, 9, 0.1, 0.1, 0.05, 0.05).unwrap();
        let u = field_from(grid, &u);
        let bvals: Vec<f64> = b.iter().cycle().take(grid.len()).map(|&x| if x < 0.3 { 1e-5 } else { x }).collect();
        let map = DiffusionMap::new(grid, bvals).unwrap();
        let p = BistableParams::with_threshold(a).unwrap();
        let r = rhs(&u, &map, p).unwrap();
        let total: f64 = r.values().iter().sum();
        let react: f64 = u.values().iter().map(|&v| reaction(v, p)).sum();
        prop_assert!((total - react).abs() < 1e-9);
    }

    #[test]
    fn junction_area_and_refinement(w1 in 1.0f64..6.0, w2 in 1.0f64..12.0) {
        let mut areas = Vec::new();
        for dx in [0.2, 0.1] {
            let s = spec(ScenarioKind::Junction, &[("w1", w1), ("w2", w2), ("dx", dx)]).build().unwrap();
            let map = rasterize(&s).unwrap();
            prop_assert!(map.values().iter().all(|&b| b == 1.0 || b == s.b_inside));
            let g = s.domain;
            let area = map.open_cells() as f64 * g.cell_area();
            let exact = w1 * (0.0 - g.x_min()) + w2 * g.x_max();
            let perimeter = 2.0 * (g.x_max() - g.x_min()) + 2.0 * (w2 - w1).abs() + 2.0 * w1.max(w2);
            prop_assert!((area - exact).abs() <= perimeter * dx, "dx {}: {} vs {}", dx, area, exact);
            areas.push((area, perimeter));
        }
        prop_assert!((areas[0].0 - areas[1].0).abs() <= areas[0].1 * 0.2);
    }

    #[test]
    fn hole_area(radius in 2.0f64..8.0) {
        let s = spec(ScenarioKind::Hole, &[("radius", radius), ("dx", 0.2)]).build().unwrap();
        let map = rasterize(&s).unwrap();
        let g = s.domain;
        let open = map.open_cells() as f64 * g.cell_area();
        let exact = g.area() - std::f64::consts::PI * radius * radius;
        prop_assert!((open - exact).abs() <= 2.0 * std::f64::consts::PI * radius * 0.2);
    }

    #[test]
    fn boundary_recovers_analytic_slope(a in 0.25f64..0.45) {
        let axes = vec![Axis::new("w", 0.5, 4.0, 8).unwrap(), Axis::new("theta", 0.05, 3.0, 60).unwrap()];
        let table = OutcomeTable::from_fn(&axes, |p| {
            let r = cone_drive_r_theta(&ConeModel::new(p[0], p[1], a).unwrap()).unwrap();
            if r > 0.0 { Outcome::Crossed } else { Outcome::Blocked }
        });
        let slope = cone_threshold_slope(a).unwrap();
        let step = axes[1].step();
        let b = phase_boundary(&table, "theta").unwrap();
        for p in &b.points {
            if let Some(v) = p.value {
                prop_assert!((v - slope * p.column).abs() <= step, "{:?}", p);
            } else {
                // uniform column: the threshold lies outside the sampled angles
                prop_assert!(slope * p.column > 3.0 - step || slope * p.column < 0.05 + step);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn radial_iterates_stay_bounded(
        start in prop::collection::vec(0.0f64..1.0, 60),
        u0 in 0.0f64..1.0,
        l in 1.0f64..15.0,
    ) {
        let p = RadialProblem {
            l,
            n: 60,
            origin: frontblock::radial::OriginCondition::Pinned(u0),
            initial: InitialGuess::Values(start),
            ..RadialProblem::default()
        };
        let mut relax = Relaxation::new(&p).unwrap();
        let mut u = relax.initial();
        let mut next = vec![0.0; 60];
        for _ in 0..50 {
            relax.step(&u, &mut next);
            prop_assert!(next.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
            std::mem::swap(&mut u, &mut next);
        }
    }

    #[test]
    fn radial_profile_is_monotone(l in 3.0f64..15.0, n in 50usize..300) {
        // near L = 3.8 the iteration switches from u = 1 to the decaying profile
        // and converges slowly
        let p = RadialProblem { max_iter: 200_000, ..RadialProblem::default().with_radius(l).with_points(n) };
        let sol = relax_solve(&p).unwrap();
        prop_assert!(sol.is_monotone_nonincreasing(1e-12));
    }

    #[test]
    fn comparison_principle_proxy(
        u in prop::collection::vec(0.0f64..1.0, 1..50),
        b in prop::collection::vec(0.0f64..1.0, 1..50),
        ratio in 0.05f64..0.3,
    ) {
        let grid = GridSpec::new(12, 10, 0.1, 0.1, 0.05, 0.05).unwrap();
        let mut u = field_from(grid, &u);
        let bvals: Vec<f64> = b.iter().cycle().take(grid.len()).map(|&x| if x < 0.3 { 1e-5 } else { x }).collect();
        let map = DiffusionMap::new(grid, bvals).unwrap();
        let mut integ = Integrator::new(&map, BistableParams::default());
        let dt = ratio * 0.01;
        let steps = (400.0 / dt) as usize;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for k in 0..steps {
            integ.step(&mut u, dt, k as f64 * dt).unwrap();
            if k % 16 == 0 {
                for &v in u.values() {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        prop_assert!(lo >= -1e-3 && hi <= 1.0 + 1e-3, "range [{}, {}]", lo, hi);
    }
}

fn small_guide() -> frontblock::ScenarioSpec {
    spec(
        ScenarioKind::UniformGuide,
        &[
            ("w", 1.0),
            ("dx", 0.2),
            ("dy", 0.2),
            ("dt", 0.01),
            ("x_max", 20.0),
            ("t_end", 10.0),
        ],
    )
}

#[test]
fn runs_are_bit_reproducible() {
    let s = spec(
        ScenarioKind::Cone,
        &[
            ("w", 2.0),
            ("theta", 0.75),
            ("dx", 0.2),
            ("dy", 0.2),
            ("dt", 0.01),
            ("t_end", 5.0),
        ],
    )
    .build()
    .unwrap();
    let mut cfg = SolverConfig::for_scenario(&s);
    cfg.diag_every = 0.5;
    let first = run(&s, &cfg).unwrap();
    let second = run(&s, &cfg).unwrap();
    assert_eq!(first, second);
    let bits = |r: &frontblock::RunRecord| r.final_field.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&first), bits(&second));
}

#[test]
fn sweep_independent_of_workers() {
    let axes = vec![
        Axis::new("w", 1.0, 2.0, 3).unwrap(),
        Axis::new("a", 0.2, 0.4, 2).unwrap(),
    ];
    let settings = SolverSettings {
        diag_every: Some(0.5),
        ..SolverSettings::default()
    };
    let one = SweepSpec::new(small_guide(), axes.clone(), settings.clone(), 1, None).unwrap();
    let three = one.clone().with_workers(3).unwrap();
    let t1 = run_sweep(&one).unwrap();
    let t3 = run_sweep(&three).unwrap();
    assert_eq!(t1, t3);
    assert_eq!(t1.rows.len(), 6);
    assert!(t1.rows.windows(2).all(|w| w[0].params <= w[1].params));
}

#[test]
fn front_speed_converges_under_refinement() {
    let speed = |dx: f64, dt: f64| {
        let s = spec(
            ScenarioKind::UniformGuide,
            &[
                ("w", dx),
                ("y_min", 0.0),
                ("y_max", dx),
                ("dx", dx),
                ("dy", dx),
                ("dt", dt),
                ("t_end", 30.0),
            ],
        )
        .build()
        .unwrap();
        let mut cfg = SolverConfig::for_scenario(&s);
        cfg.diag_every = 0.25;
        run(&s, &cfg).unwrap().front_speed(10.0).unwrap()
    };
    let coarse = speed(0.1, 1e-3);
    let fine = speed(0.05, 2.5e-4);
    assert!((coarse - fine).abs() / fine < 0.01, "{coarse} vs {fine}");
}

#[test]
fn mirrored_runs_match_full_domain() {
    let common = [("dx", 0.2), ("dy", 0.2), ("dt", 0.01), ("t_end", 40.0)];
    let cases: [(ScenarioKind, &[(&str, f64)]); 4] = [
        (ScenarioKind::Junction, &[("w1", 4.0), ("w2", 12.0)]),
        (ScenarioKind::Cone, &[("w", 2.0), ("theta", 0.75)]),
        (ScenarioKind::ParallelGuides, &[("w", 4.0), ("d", 6.0)]),
        (ScenarioKind::Checkerboard, &[("w1", 3.0)]),
    ];
    for (kind, geom) in cases {
        let params: Vec<(&str, f64)> = geom.iter().chain(&common).copied().collect();
        let full = spec(kind, &params).build().unwrap();
        let half = spec(kind, &params).with("mirror", 1.0).unwrap().build().unwrap();
        assert_eq!(2 * half.domain.ny(), full.domain.ny());
        let cfg = SolverConfig::for_scenario(&full);
        let a = run(&full, &cfg).unwrap();
        let b = run(&half, &cfg).unwrap();
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            let tol = 1e-9 * (1.0 + x.reaction_integral.abs());
            assert!(
                (x.reaction_integral - y.reaction_integral).abs() <= tol,
                "{kind:?} {x:?} {y:?}"
            );
            assert!((x.mean_u - y.mean_u).abs() < 1e-12, "{kind:?}");
            assert!((x.front_x - y.front_x).abs() < 1e-9, "{kind:?} {x:?} {y:?}");
        }
    }
}
