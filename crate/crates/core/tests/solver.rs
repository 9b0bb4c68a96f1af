use overland::analytic::DamBreak;
use overland::boundary::{BoundaryCondition, BoundarySet};
use overland::io::presets::{self, PresetKind, PresetParams};
use overland::io::output::format_gauges_csv;
use overland::skel::Side;
use overland::solver::{run_simulation, Friction, Gauge, Infiltration, RunPlan, Scenario};
use overland::sources::{FrictionLaw, GreenAmptParams, RainForcing};
use overland::state::GridGeometry;
use overland::Error;

const G: f64 = 9.81;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn lake(n: usize) -> Scenario<f64> {
    let geom = GridGeometry::new(n, n, 1.0, 1.0).unwrap();
    let p = PresetParams::defaults(PresetKind::LakeAtRest);
    let s = presets::build(PresetKind::LakeAtRest, &p, &geom, 1.0);
    Scenario {
        z: s.z,
        h: s.h,
        ..Scenario::still(geom, 0.0)
    }
}

#[test]
fn lake_at_rest_with_islands_is_a_fixed_point_at_both_orders() {
    let sc = lake(24);
    assert!(sc.h.contains(&0.0), "the lake must have dry islands");
    for order in [1, 2] {
        let mut plan = RunPlan::new(1e9, order);
        // the stable two-dimensional first-order Courant number
        plan.cfl = overland::flux::CflConfig::new(0.5).unwrap();
        plan.fixed_steps = Some(1000);
        let r = run_simulation(&sc, &plan).unwrap();
        assert_eq!(r.steps, 1000);
        assert!(max_abs_diff(&r.h, &sc.h) <= 1e-12, "order {order}");
        assert!(max_abs(&r.qx) <= 1e-12 && max_abs(&r.qy) <= 1e-12, "order {order}");
    }
}

#[test]
fn uniform_flow_on_a_periodic_flat_domain_is_unchanged() {
    let geom = GridGeometry::new(12, 9, 0.5, 0.5).unwrap();
    let mut sc = Scenario::still(geom, 1.3);
    sc.qx = vec![1.3 * 0.4; geom.cells()];
    sc.qy = vec![-1.3 * 0.25; geom.cells()];
    sc.boundaries = BoundarySet::uniform(BoundaryCondition::Periodic);
    for order in [1, 2] {
        let mut plan = RunPlan::new(1e9, order).with_workers(4);
        plan.fixed_steps = Some(5);
        let r = run_simulation(&sc, &plan).unwrap();
        assert_eq!(r.h, sc.h);
        assert_eq!(r.qx, sc.qx);
        assert_eq!(r.qy, sc.qy);
    }
}

/// A literal scalar 1D first-order update for a flat frictionless bed with
/// zero-gradient ends: HLL fluxes at every interface, one Euler step.
fn reference_euler_stage(h: &[f64], q: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let u: Vec<f64> = h.iter().zip(q).map(|(h, q)| if *h > 1e-12 { q / h } else { 0.0 }).collect();
    let speed = (0..n).map(|i| u[i].abs() + (G * h[i]).sqrt()).fold(0.0, f64::max);
    let dt = dx / speed;
    let at = |i: isize| -> usize { i.clamp(0, n as isize - 1) as usize };
    let flux = |l: usize, r: usize| -> (f64, f64) {
        let (hl, ul, hr, ur) = (h[l], u[l], h[r], u[r]);
        let c1 = (ul - (G * hl).sqrt()).min(ur - (G * hr).sqrt());
        let c2 = (ul + (G * hl).sqrt()).max(ur + (G * hr).sqrt());
        let f = |h: f64, u: f64| (h * u, h * u * u + G * h * h / 2.0);
        let (fl, fr) = (f(hl, ul), f(hr, ur));
        if c1 >= 0.0 {
            fl
        } else if c2 <= 0.0 {
            fr
        } else {
            let hll = |a: f64, b: f64, ua: f64, ub: f64| (c2 * a - c1 * b + c1 * c2 * (ub - ua)) / (c2 - c1);
            (hll(fl.0, fr.0, hl, hr), hll(fl.1, fr.1, hl * ul, hr * ur))
        }
    };
    let mut h1 = vec![0.0; n];
    let mut q1 = vec![0.0; n];
    for i in 0..n {
        let ii = i as isize;
        let (fm, fp) = (flux(at(ii - 1), i), flux(i, at(ii + 1)));
        h1[i] = h[i] - dt / dx * (fp.0 - fm.0);
        q1[i] = q[i] - dt / dx * (fp.1 - fm.1);
    }
    (h1, q1)
}

#[test]
fn one_first_order_stage_matches_a_scalar_reference() {
    let n = 40;
    let dx = 0.025;
    let geom = GridGeometry::new(n, 1, dx, dx).unwrap();
    let mut sc = Scenario::still(geom, 0.5);
    for i in 0..n / 2 {
        sc.h[i] = 1.0;
    }
    sc.boundaries.set(Side::West, BoundaryCondition::FreeOutflow);
    sc.boundaries.set(Side::East, BoundaryCondition::FreeOutflow);
    let mut plan = RunPlan::new(1e9, 1);
    plan.fixed_steps = Some(1);
    let r = run_simulation(&sc, &plan).unwrap();
    let (h1, q1) = reference_euler_stage(&sc.h, &sc.qx, dx);
    assert!(max_abs_diff(&r.h, &h1) <= 1e-14, "{}", max_abs_diff(&r.h, &h1));
    assert!(max_abs_diff(&r.qx, &q1) <= 1e-14, "{}", max_abs_diff(&r.qx, &q1));
    assert_eq!(max_abs(&r.qy), 0.0);
    // only the two cells next to the dam move
    let moved: Vec<usize> = (0..n).filter(|&i| r.h[i] != sc.h[i]).collect();
    assert_eq!(moved, vec![n / 2 - 1, n / 2]);
}

#[test]
fn symmetric_dam_break_stays_symmetric() {
    let n = 90;
    let geom = GridGeometry::new(n, 1, 1.0 / n as f64, 1.0 / n as f64).unwrap();
    let mut sc = Scenario::still(geom, 0.5);
    for i in n / 3..2 * n / 3 {
        sc.h[i] = 1.0;
    }
    for order in [1, 2] {
        let r = run_simulation(&sc, &RunPlan::new(0.05, order)).unwrap();
        for i in 0..n {
            assert!((r.h[i] - r.h[n - 1 - i]).abs() <= 1e-13, "order {order}, cell {i}");
            assert!((r.qx[i] + r.qx[n - 1 - i]).abs() <= 1e-13, "order {order}, cell {i}");
        }
    }
}

fn dam_break_2d() -> (Scenario<f64>, RunPlan<f64>) {
    let geom = GridGeometry::<f64>::new(40, 26, 0.05, 0.05).unwrap();
    let mut sc = Scenario::still(geom, 0.2);
    for j in 0..geom.ny {
        for i in 0..geom.nx {
            let (x, y) = geom.center(i, j);
            sc.z[j * geom.nx + i] = 0.05 * (x * 3.0).sin() * (y * 2.0).cos();
            if x < 0.8 && y > 0.3 {
                sc.h[j * geom.nx + i] = 1.0;
            }
        }
    }
    sc.boundaries.set(Side::East, BoundaryCondition::FreeOutflow);
    sc.friction = Some(Friction {
        law: FrictionLaw::Manning(0.03),
        raster: None,
    });
    sc.rain = RainForcing::Uniform {
        rate: 1e-3,
        start: 0.05,
        end: 0.15,
    };
    let mut plan = RunPlan::new(0.3, 2);
    plan.gauges = vec![
        Gauge { name: "a".into(), x: 0.9, y: 0.6 },
        Gauge { name: "b".into(), x: 1.5, y: 0.2 },
        Gauge { name: "c".into(), x: 1.95, y: 1.25 },
    ];
    plan.snapshot_times = vec![0.1, 0.2];
    (sc, plan)
}

#[test]
fn results_are_bit_identical_across_worker_counts() {
    let (sc, plan) = dam_break_2d();
    let base = run_simulation(&sc, &plan).unwrap();
    assert!(base.steps > 10);
    assert_eq!(base.snapshots.len(), 2);
    assert_eq!(base.snapshots[0].t, 0.1);
    for p in [2, 3, 4, 6, 8] {
        let r = run_simulation(&sc, &plan.clone().with_workers(p)).unwrap();
        assert_eq!(r.workers, p);
        assert_eq!(r.steps, base.steps, "P = {p}");
        assert_eq!(r.t, base.t);
        assert_eq!(r.h, base.h, "P = {p}");
        assert_eq!(r.qx, base.qx, "P = {p}");
        assert_eq!(r.qy, base.qy, "P = {p}");
        assert_eq!(r.snapshots, base.snapshots, "P = {p}");
        assert_eq!(r.gauges, base.gauges, "P = {p}");
        assert_eq!(format_gauges_csv(&r.gauges), format_gauges_csv(&base.gauges));
        assert_eq!(r.rain_volume, base.rain_volume);
        assert_eq!(r.outflow_volume, base.outflow_volume);
    }
}

#[test]
fn open_boundaries_enter_the_volume_budget() {
    let (mut sc, plan) = dam_break_2d();
    sc.boundaries.set(Side::West, BoundaryCondition::ImposedDischarge(0.05));
    sc.boundaries.set(Side::North, BoundaryCondition::FreeOutflow);
    for order in [1, 2] {
        let mut plan = RunPlan { order, ..plan.clone() };
        plan.t_end = 0.8;
        plan.cfl = overland::flux::CflConfig::new(if order == 1 { 0.5 } else { 0.25 }).unwrap();
        let r = run_simulation(&sc, &plan).unwrap();
        let closed = r.final_volume - r.initial_volume - r.rain_volume;
        assert!(closed.abs() > 1e-3, "order {order}: the boundaries must exchange water");
        assert!(r.relative_mass_error() <= 1e-12, "order {order}: {}", r.relative_mass_error());
        let split = run_simulation(&sc, &plan.clone().with_workers(4)).unwrap();
        assert_eq!(split.outflow_volume, r.outflow_volume, "order {order}");
    }
}

#[test]
fn run_lands_exactly_on_end_and_output_times() {
    let (sc, plan) = dam_break_2d();
    let r = run_simulation(&sc, &plan).unwrap();
    assert_eq!(r.t, 0.3);
    let times: Vec<f64> = r.gauges[0].samples.iter().map(|s| s.t).collect();
    assert_eq!(times[0], 0.0);
    assert!(times.windows(2).all(|w| w[0] < w[1]), "gauge times must increase");
    for edge in [0.05, 0.1, 0.15, 0.2, 0.3] {
        assert!(times.contains(&edge), "no step ends at {edge}");
    }
}

#[test]
fn gauge_stride_thins_samples_but_keeps_the_last() {
    let (sc, mut plan) = dam_break_2d();
    let full = run_simulation(&sc, &plan).unwrap();
    plan.gauge_stride = 4;
    let thin = run_simulation(&sc, &plan).unwrap();
    let (f, t) = (&full.gauges[0], &thin.gauges[0]);
    assert!(t.samples.len() < f.samples.len());
    assert_eq!(t.samples.first(), f.samples.first());
    assert_eq!(t.samples.last(), f.samples.last());
    assert_eq!(t.max_level, f.max_level);
    assert_eq!(t.arrival_time, f.arrival_time);
}

#[test]
fn closed_box_with_rain_and_infiltration_balances_its_budget() {
    let geom = GridGeometry::new(20, 16, 2.0, 2.0).unwrap();
    let mut sc = Scenario::still(geom, 0.0);
    for j in 0..geom.ny {
        for i in 0..geom.nx {
            sc.z[j * geom.nx + i] = 0.02 * i as f64 + 0.01 * ((j as f64) - 8.0).abs();
        }
    }
    sc.rain = RainForcing::Uniform {
        rate: 5e-5,
        start: 0.0,
        end: 400.0,
    };
    sc.infiltration = Some(Infiltration {
        params: GreenAmptParams::new(2e-6, 0.1, 1.0, 0.15, 0.45).unwrap(),
        initial_volume: 0.0,
    });
    sc.friction = Some(Friction {
        law: FrictionLaw::Manning(0.05),
        raster: None,
    });
    let r = run_simulation(&sc, &RunPlan::new(600.0, 2).with_workers(3)).unwrap();
    assert!(r.min_depth >= 0.0);
    assert!(r.infiltrated_volume > 0.0 && r.rain_volume > r.infiltrated_volume);
    let rain = 5e-5 * 400.0 * 40.0 * 32.0;
    assert!((r.rain_volume - rain).abs() <= 1e-12 * rain, "{} vs {rain}", r.rain_volume);
    assert!(r.relative_mass_error() <= 1e-10, "{}", r.relative_mass_error());
}

#[test]
fn dry_dam_break_stays_non_negative_and_tracks_ritter() {
    let n = 200;
    let geom = GridGeometry::new(n, 1, 1.0 / n as f64, 1.0 / n as f64).unwrap();
    let mut sc = Scenario::still(geom, 0.0);
    for i in 0..n / 2 {
        sc.h[i] = 1.0;
    }
    sc.boundaries.set(Side::West, BoundaryCondition::FreeOutflow);
    sc.boundaries.set(Side::East, BoundaryCondition::FreeOutflow);
    let t = 0.05;
    let exact = DamBreak::new(1.0, 0.0, 0.5, G);
    for order in [1, 2] {
        let r = run_simulation(&sc, &RunPlan::new(t, order)).unwrap();
        assert!(r.min_depth >= 0.0);
        assert!(r.h.iter().all(|&h| h >= 0.0));
        let l1: f64 = (0..n)
            .map(|i| (r.h[i] - exact.depth(geom.center(i, 0).0, t)).abs() / n as f64)
            .sum();
        assert!(l1 < 0.01, "order {order}: {l1}");
    }
}

#[test]
fn bernoulli_head_flattens_under_refinement() {
    // subcritical flow over a bump
    let head_spread = |n: usize| {
        let dx = 25.0 / n as f64;
        let geom = GridGeometry::new(n, 1, dx, dx).unwrap();
        let mut sc = Scenario::still(geom, 2.0);
        for i in 0..n {
            let x = geom.center(i, 0).0;
            let z = if (8.0..12.0).contains(&x) { 0.2 - 0.05 * (x - 10.0).powi(2) } else { 0.0 };
            sc.z[i] = z;
            sc.h[i] = 2.0 - z;
        }
        sc.boundaries.set(Side::West, BoundaryCondition::ImposedDischarge(4.42));
        sc.boundaries.set(Side::East, BoundaryCondition::ImposedHeight(2.0));
        let r = run_simulation(&sc, &RunPlan::new(150.0, 2)).unwrap();
        let heads: Vec<f64> = (0..n)
            .map(|i| overland::solver::bernoulli_head(r.h[i], r.qx[i] / r.h[i], sc.z[i], G).unwrap())
            .collect();
        let q_spread = r.qx.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - r.qx.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(q_spread < 0.05, "flow is not steady: discharge spread {q_spread}");
        heads.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - heads.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    };
    let coarse = head_spread(50);
    let fine = head_spread(100);
    assert!(fine < coarse, "head spread {coarse} -> {fine}");
}

#[test]
fn single_precision_runs() {
    let geom = GridGeometry::<f32>::new(16, 16, 1.0, 1.0).unwrap();
    let p = PresetParams::defaults(PresetKind::LakeAtRest);
    let s = presets::build::<f32>(PresetKind::LakeAtRest, &p, &geom, 1.0);
    let sc = Scenario {
        z: s.z,
        h: s.h,
        h_eps: 1e-6,
        ..Scenario::still(geom, 0.0f32)
    };
    let mut plan = RunPlan::new(1e9f32, 2).with_workers(2);
    plan.fixed_steps = Some(100);
    let r = run_simulation(&sc, &plan).unwrap();
    let dh = r.h.iter().zip(&sc.h).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    assert!(dh <= 1e-5, "{dh}");

    let geom = GridGeometry::<f32>::new(50, 1, 0.02, 0.02).unwrap();
    let mut sc = Scenario::still(geom, 0.1f32);
    for i in 0..25 {
        sc.h[i] = 1.0;
    }
    let r = run_simulation(&sc, &RunPlan::new(0.05f32, 2)).unwrap();
    assert!(r.min_depth >= 0.0 && r.relative_mass_error() < 1e-6);
}

#[test]
fn unstable_first_order_two_dimensional_run_aborts_with_negative_height() {
    // the default first-order CFL number is a one-dimensional bound
    let geom = GridGeometry::new(50, 50, 1.0, 1.0).unwrap();
    let p = PresetParams::defaults(PresetKind::Sloshing);
    let s = presets::build::<f64>(PresetKind::Sloshing, &p, &geom, 1.0);
    let sc = Scenario {
        h: s.h,
        ..Scenario::still(geom, 0.0)
    };
    let mut plan = RunPlan::new(1e9, 1).with_workers(4);
    plan.fixed_steps = Some(400);
    match run_simulation(&sc, &plan) {
        Err(e @ Error::NegativeHeight { .. }) => assert_eq!(e.exit_code(), 3),
        other => panic!("expected a negative-height abort, got {other:?}"),
    }
    plan.cfl = overland::flux::CflConfig::new(0.5).unwrap();
    let r = run_simulation(&sc, &plan).unwrap();
    assert!(r.relative_mass_error() <= 1e-13);
}

fn thin_film_box() -> Scenario<f64> {
    let geom = GridGeometry::new(30, 24, 2.0, 2.0).unwrap();
    let mut sc = Scenario::still(geom, 0.0);
    for j in 0..geom.ny {
        for i in 0..geom.nx {
            sc.z[j * geom.nx + i] = 0.02 * i as f64 + 0.01 * (j as f64 - 12.0).abs();
        }
    }
    sc.rain = RainForcing::Uniform {
        rate: 5e-5,
        start: 0.0,
        end: 400.0,
    };
    sc.infiltration = Some(Infiltration {
        params: GreenAmptParams::new(2e-6, 0.1, 1.0, 0.15, 0.45).unwrap(),
        initial_volume: 0.0,
    });
    sc
}

#[test]
fn frictionless_thin_films_need_the_two_dimensional_courant_bound() {
    let sc = thin_film_box();
    match run_simulation(&sc, &RunPlan::<f64>::new(600.0, 2)) {
        Err(Error::NegativeHeight { .. }) => {}
        other => panic!("expected a negative height abort, got {:?}", other.map(|r| r.steps)),
    }
    let mut plan = RunPlan::new(600.0, 2);
    plan.cfl = overland::flux::CflConfig::new(0.25).unwrap();
    let r = run_simulation(&sc, &plan).unwrap();
    assert!(r.min_depth >= 0.0);
    assert!(r.relative_mass_error() <= 1e-10);
}

#[test]
fn infiltration_keeps_the_velocity_of_the_remaining_water() {
    let geom = GridGeometry::new(8, 1, 1.0, 1.0).unwrap();
    let mut sc = Scenario::still(geom, 0.05);
    sc.qx = vec![0.05 * 0.2; 8];
    sc.boundaries = BoundarySet::uniform(BoundaryCondition::Periodic);
    sc.infiltration = Some(Infiltration {
        params: GreenAmptParams::new(1e-3, 0.1, 1.0, 0.2, 0.45).unwrap(),
        initial_volume: 0.01,
    });
    let mut plan = RunPlan::<f64>::new(1e9, 1);
    plan.fixed_steps = Some(3);
    let r = run_simulation(&sc, &plan).unwrap();
    assert!(r.h[0] < 0.05 && r.infiltrated_volume > 0.0);
    for k in 0..8 {
        assert!((r.qx[k] / r.h[k] - 0.2).abs() <= 1e-14, "u = {}", r.qx[k] / r.h[k]);
    }
}

#[test]
fn invalid_inputs_are_rejected_before_running() {
    let geom = GridGeometry::new(4, 4, 1.0, 1.0).unwrap();
    let mut sc = Scenario::still(geom, 1.0);
    sc.h[3] = -1.0;
    assert!(matches!(run_simulation(&sc, &RunPlan::new(1.0, 2)), Err(Error::Invalid(_))));
    let mut sc = Scenario::still(geom, 1.0);
    sc.boundaries.set(Side::West, BoundaryCondition::Periodic);
    assert!(matches!(run_simulation(&sc, &RunPlan::new(1.0, 2)), Err(Error::Boundary(_))));
    let sc = Scenario::still(geom, 1.0);
    assert!(run_simulation(&sc, &RunPlan::new(1.0, 3)).is_err());
    let mut plan = RunPlan::new(1.0, 2);
    plan.gauges = vec![Gauge { name: "out".into(), x: 10.0, y: 1.0 }];
    assert!(matches!(run_simulation(&sc, &plan), Err(Error::Invalid(_))));
}
