use std::path::{Path, PathBuf};

use proptest::prelude::*;

use overland::analytic::DamBreak;
use overland::commands::{self, format_bench_csv, format_converge_csv};
use overland::io::dem::{load_dem, parse_raster, write_dem};
use overland::state::{GridGeometry, Topography};
use overland::{Error, SimulationConfig};

fn config(dir: &Path, text: &str) -> SimulationConfig {
    let path = dir.join("case.cfg");
    std::fs::write(&path, text).unwrap();
    SimulationConfig::load(&path).unwrap()
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn audit_value(audit: &str, key: &str) -> f64 {
    audit
        .lines()
        .find_map(|l| l.strip_prefix(key)?.trim_start().strip_prefix('=').map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no '{key}' in audit"))
}

#[test]
fn flat_two_by_two_dem_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.asc");
    std::fs::write(&path, "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n0 0\n0 0\n").unwrap();
    let topo = load_dem::<f64>(&path).unwrap();
    assert_eq!((topo.geometry().nx, topo.geometry().ny), (2, 2));
    assert_eq!(topo.geometry().dx, 1.0);
    assert_eq!(topo.values(), &[0.0; 4]);
}

#[test]
fn missing_header_key_is_named() {
    let e = parse_raster::<f64>("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\n0 0\n0 0\n", "dem")
        .unwrap_err()
        .to_string();
    assert!(e.contains("cellsize"), "{e}");
}

#[test]
fn nodata_inside_the_domain_is_rejected_with_its_line() {
    let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 -9999\n";
    let e = parse_raster::<f64>(text, "dem").unwrap_err();
    assert!(matches!(e, Error::Dem { .. }), "{e:?}");
    assert!(e.to_string().starts_with("dem:8:"), "{e}");
    assert_eq!(e.exit_code(), 2);
}

proptest! {
    #[test]
    fn dem_round_trip_is_exact(
        nx in 1usize..7,
        ny in 1usize..7,
        cell in 0.01f64..100.0,
        seed in proptest::collection::vec(-1e6f64..1e6, 49),
    ) {
        let geom = GridGeometry::with_origin(nx, ny, cell, cell, -3.25, 17.5).unwrap();
        let z: Vec<f64> = seed[..nx * ny].iter().map(|v| v / 7.0).collect();
        let topo = Topography::new(geom, z.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.asc");
        write_dem(&path, &topo).unwrap();
        let back = load_dem::<f64>(&path).unwrap();
        prop_assert_eq!(back.values(), &z[..]);
        prop_assert_eq!(back.geometry(), &geom);
    }
}

#[test]
fn raster_initial_state_is_read_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bed.asc"),
        "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0.5\n3 4 5\n0 1 2\n",
    )
    .unwrap();
    let c = config(dir.path(), "grid.nx = 3\ngrid.ny = 2\ngrid.dx = 0.5\ninitial.dem = bed.asc\ninitial.level = 2.5\nrun.t_end = 0\n");
    let sc = c.scenario::<f64>().unwrap();
    // the first file row is the northern one
    assert_eq!(sc.z, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(sc.h, vec![2.5, 1.5, 0.5, 0.0, 0.0, 0.0]);
}

#[test]
fn mismatched_raster_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bed.asc"), "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n0 0\n0 0\n").unwrap();
    let c = config(dir.path(), "grid.nx = 3\ngrid.ny = 2\ngrid.dx = 1\ninitial.dem = bed.asc\nrun.t_end = 1\n");
    assert!(c.scenario::<f64>().is_err());
}

#[test]
fn config_errors_carry_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "grid.nx = 4\ngrid.dx = 1\n# comment\nscheme.order = 3\nrun.t_end = 1\n").unwrap();
    let e = SimulationConfig::load(&path).unwrap_err();
    assert_eq!(e.exit_code(), 1);
    let msg = e.to_string();
    assert!(msg.contains("bad.cfg:4:"), "{msg}");

    std::fs::write(&path, "grid.nx = 4\ngrid.dx = 1\nrun.t_end = 1\nbc.west.kind = wall\n").unwrap();
    let msg = SimulationConfig::load(&path).unwrap_err().to_string();
    assert!(msg.contains("bad.cfg:4:") && msg.contains("bc.west.kind"), "{msg}");

    let e = SimulationConfig::load(&dir.path().join("missing.cfg")).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn lake_preset_run_keeps_gauges_still_and_closes_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        dir.path(),
        "grid.nx = 32\ngrid.ny = 32\ngrid.dx = 1\ninitial.preset = lake_at_rest\nrun.steps = 100\n\
         gauge.a = 4.5, 20.5\ngauge.b = 16, 16\ngauge.c = 30.2, 3.9\noutput.dir = out\n",
    );
    let out = commands::run::<f64>(&c).unwrap();
    assert_eq!(out.report.steps, 100);
    for g in &out.report.gauges {
        assert_eq!(g.samples.len(), 101);
        let h0 = g.samples[0].h;
        assert!(g.samples.iter().all(|s| (s.h - h0).abs() <= 1e-12), "gauge {}", g.name);
    }
    let audit = read(dir.path().join("out/audit.txt"));
    assert!(audit.starts_with("# overland mass audit v1\n"));
    let drift = (audit_value(&audit, "final_volume") - audit_value(&audit, "initial_volume")).abs();
    assert!(drift <= 1e-12 * audit_value(&audit, "initial_volume"), "{drift}");
    assert!(audit_value(&audit, "relative_mass_error") <= 1e-12);
    assert_eq!(audit_value(&audit, "steps"), 100.0);
    assert!(dir.path().join("out/final_h.asc").exists());
}

fn analytic_arrival(dam: &DamBreak<f64>, x: f64, threshold: f64) -> f64 {
    let (mut lo, mut hi) = (1e-9, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if dam.depth(x, mid) > threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn dam_break_arrival_is_ordered_downstream_and_tracks_the_shock() {
    let dir = tempfile::tempdir().unwrap();
    let dx = 0.0025;
    let c = config(
        dir.path(),
        "grid.nx = 400\ngrid.ny = 1\ngrid.dx = 0.0025\ninitial.preset = dam_break\nrun.t_end = 0.0639\n\
         output.arrival_threshold = 0.2\n\
         gauge.g1 = 0.55, 0.001\ngauge.g2 = 0.6, 0.001\ngauge.g3 = 0.65, 0.001\ngauge.g4 = 0.68, 0.001\n\
         output.dir = out\n",
    );
    let out = commands::run::<f64>(&c).unwrap();
    let dam = DamBreak::new(1.0, 0.1, 0.5, 9.81);
    let mut previous = 0.0;
    for g in &out.report.gauges {
        let t = g.arrival_time.unwrap_or_else(|| panic!("no arrival at {}", g.name));
        assert!(t > previous, "{} arrives at {t}, before {previous}", g.name);
        previous = t;
        let exact = analytic_arrival(&dam, g.x, 0.2);
        // a smeared shock front is a few cells wide
        assert!((t - exact).abs() <= 4.0 * dx / 3.0, "{}: {t} vs {exact}", g.name);
    }
    let summary = read(dir.path().join("out/gauge_summary.csv"));
    assert_eq!(summary.lines().count(), 2 + 4);
}

#[test]
fn gauge_csv_is_byte_identical_for_one_and_four_workers() {
    let dir = tempfile::tempdir().unwrap();
    let base = "grid.nx = 40\ngrid.ny = 24\ngrid.dx = 0.05\ninitial.preset = dam_break\n\
                friction.law = manning\nfriction.value = 0.03\nrun.t_end = 0.2\n\
                gauge.near = 1.1, 0.6\ngauge.far = 1.7, 0.3\noutput.snapshots = 0.05, 0.1\n";
    let mut files = Vec::new();
    for p in [1, 4] {
        let c = config(dir.path(), &format!("{base}run.workers = {p}\noutput.dir = out{p}\n"));
        commands::run::<f64>(&c).unwrap();
        files.push((
            std::fs::read(dir.path().join(format!("out{p}/gauges.csv"))).unwrap(),
            std::fs::read(dir.path().join(format!("out{p}/snapshot_0001_h.asc"))).unwrap(),
        ));
    }
    assert!(files[0].0.len() > 100);
    assert_eq!(files[0], files[1]);
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("OVERLAND_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = read(path);
    assert_eq!(actual, expected, "{name} no longer matches its golden copy");
}

#[test]
fn output_schemas_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        dir.path(),
        "grid.nx = 20\ngrid.ny = 1\ngrid.dx = 0.05\ninitial.preset = dam_break\nrun.steps = 6\n\
         gauge.up = 0.42, 0.02\ngauge.down = 0.61, 0.02\noutput.arrival_threshold = 0.2\noutput.dir = out\n",
    );
    commands::run::<f64>(&c).unwrap();
    golden("gauges.csv", &read(dir.path().join("out/gauges.csv")));
    golden("gauge_summary.csv", &read(dir.path().join("out/gauge_summary.csv")));
    let rows = commands::converge::<f64>(&c, &[10, 20]).unwrap();
    golden("converge.csv", &format_converge_csv(&rows));
    let bench = format_bench_csv(&[]);
    assert_eq!(bench, "# overland bench v1\nworkers,wall_time_s,log2_time,speedup,hash\n");
}

#[test]
fn converge_on_a_lake_is_exact_and_needs_an_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        dir.path(),
        "grid.nx = 16\ngrid.ny = 16\ngrid.dx = 1\ninitial.preset = lake_at_rest\nrun.t_end = 20\n",
    );
    let rows = commands::converge::<f64>(&c, &[16, 32, 48]).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.l1_error <= 1e-12), "{rows:?}");
    let csv = format_converge_csv(&rows);
    assert!(csv.starts_with("# overland converge v1\nn,l1_error,observed_order\n16,"));

    let c = config(dir.path(), "grid.nx = 8\ngrid.dx = 1\ninitial.preset = sloshing\nrun.t_end = 1\n");
    let e = commands::converge::<f64>(&c, &[8, 16]).unwrap_err();
    assert!(matches!(e, Error::PresetWithoutOracle(_)), "{e:?}");
}

#[test]
fn bench_reports_unit_speedup_and_equal_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        dir.path(),
        "grid.nx = 48\ngrid.ny = 32\ngrid.dx = 1\ninitial.preset = dam_break\nrun.t_end = 1\n",
    );
    let rows = commands::bench::<f64>(&c, &[1, 2, 3], 20).unwrap();
    assert_eq!(rows[0].speedup, 1.0);
    for r in &rows {
        assert_eq!(r.log2_time, r.wall_time_s.log2());
        assert_eq!(r.hash, rows[0].hash);
        assert_eq!(r.hash.len(), 64);
    }
    assert_eq!(format_bench_csv(&rows).lines().count(), 2 + 3);
}

#[test]
fn shipped_configurations_load_and_build() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let cfg = SimulationConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.scenario::<f64>().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.plan::<f64>().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4, "only {seen} configurations found");
}
