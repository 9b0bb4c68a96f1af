//! The three front-end verbs: `run`, `converge` and `bench`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::config::{InitialSpec, SimulationConfig};
use crate::io::output::write_outputs;
use crate::io::presets;
use crate::num::Real;
use crate::solver::{run_simulation, SimulationReport};

#[derive(Debug, Clone)]
pub struct RunOutcome<T> {
    pub report: SimulationReport<T>,
    pub files: Vec<PathBuf>,
}

/// Runs a configuration and writes its outputs.
pub fn run<T: Real>(config: &SimulationConfig) -> Result<RunOutcome<T>> {
    let scenario = config.scenario::<T>()?;
    let plan = config.plan::<T>()?;
    let report = run_simulation(&scenario, &plan)?;
    let files = write_outputs(&config.output.dir, &report, scenario.h_eps, config.output.snapshot_csv)?;
    Ok(RunOutcome { report, files })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub l1_error: f64,
    /// `log(e_prev / e) / log(n / n_prev)`; absent on the first level.
    pub observed_order: Option<f64>,
}

/// The configuration refined to `n` cells along x over the same domain.
/// Two-dimensional grids keep their aspect ratio.
pub fn refine(config: &SimulationConfig, n: usize) -> SimulationConfig {
    let mut c = config.clone();
    let g = config.grid;
    let (lx, ly) = (g.dx * g.nx as f64, g.dy * g.ny as f64);
    c.grid.nx = n;
    c.grid.dx = lx / n as f64;
    if g.ny > 1 {
        c.grid.ny = ((g.ny * n) as f64 / g.nx as f64).round().max(1.0) as usize;
        c.grid.dy = ly / c.grid.ny as f64;
    }
    c
}

/// Runs an oracle preset at each resolution and measures the L1 depth
/// error `Σ |h - h_exact| dx dy` at `t_end`.
pub fn converge<T: Real>(config: &SimulationConfig, levels: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let (kind, params) = match &config.initial {
        InitialSpec::Preset { kind, params } if kind.has_oracle() => (*kind, params),
        InitialSpec::Preset { kind, .. } => return Err(Error::PresetWithoutOracle(kind.name().into())),
        InitialSpec::Rasters { .. } => return Err(Error::PresetWithoutOracle("raster input".into())),
    };
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::Invalid("convergence levels must be positive".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in levels {
        let c = refine(config, n);
        let scenario = c.scenario::<T>()?;
        let mut plan = c.plan::<T>()?;
        plan.snapshot_times.clear();
        plan.gauges.clear();
        let report = run_simulation(&scenario, &plan)?;
        let exact = presets::oracle::<f64>(kind, params, &c.geometry::<f64>()?, c.g, report.t.to_f64_lossy())?;
        let area = c.grid.dx * c.grid.dy;
        let l1: f64 = report
            .h
            .iter()
            .zip(&exact)
            .map(|(h, e)| (h.to_f64_lossy() - e).abs())
            .sum::<f64>()
            * area;
        let observed_order = rows
            .last()
            .map(|p| (p.l1_error / l1).ln() / (n as f64 / p.n as f64).ln());
        rows.push(ConvergenceRow {
            n,
            l1_error: l1,
            observed_order,
        });
    }
    Ok(rows)
}

pub fn format_converge_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("# overland converge v1\nn,l1_error,observed_order\n");
    for r in rows {
        let order = r.observed_order.map(|o| o.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{}", r.n, r.l1_error, order);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub workers: usize,
    pub wall_time_s: f64,
    pub log2_time: f64,
    /// Relative to the first worker count.
    pub speedup: f64,
    /// SHA-256 of the final `h`, `qx` and `qy`.
    pub hash: String,
}

/// SHA-256 over the little-endian bytes of the final fields.
pub fn field_hash<T: Real>(report: &SimulationReport<T>) -> String {
    let mut hasher = Sha256::new();
    for field in [&report.h, &report.qx, &report.qy] {
        for v in field {
            hasher.update(v.to_f64_lossy().to_le_bytes());
        }
    }
    hasher.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Times `iterations` steps for each worker count. Outputs are not
/// written; results must hash identically across worker counts.
pub fn bench<T: Real>(config: &SimulationConfig, workers: &[usize], iterations: usize) -> Result<Vec<BenchRow>> {
    if workers.is_empty() || workers.contains(&0) {
        return Err(Error::Invalid("worker counts must be positive".into()));
    }
    let scenario = config.scenario::<T>()?;
    let mut plan = config.plan::<T>()?;
    plan.fixed_steps = Some(iterations);
    plan.snapshot_times.clear();
    plan.gauges.clear();
    let mut rows: Vec<BenchRow> = Vec::new();
    for &p in workers {
        plan.workers = p;
        let start = Instant::now();
        let report = run_simulation(&scenario, &plan)?;
        let wall = start.elapsed().as_secs_f64();
        let hash = field_hash(&report);
        if let Some(first) = rows.first() {
            if first.hash != hash {
                return Err(Error::Invalid(format!(
                    "results on {p} workers differ from those on {} workers",
                    first.workers
                )));
            }
        }
        let speedup = rows.first().map(|f| f.wall_time_s / wall).unwrap_or(1.0);
        rows.push(BenchRow {
            workers: p,
            wall_time_s: wall,
            log2_time: wall.log2(),
            speedup,
            hash,
        });
    }
    Ok(rows)
}

pub fn format_bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("# overland bench v1\nworkers,wall_time_s,log2_time,speedup,hash\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.workers, r.wall_time_s, r.log2_time, r.speedup, r.hash);
    }
    s
}

/// Whitespace-separated columns for plotting log2 time against workers.
pub fn format_bench_plot(rows: &[BenchRow]) -> String {
    let mut s = String::from("# workers log2_workers log2_time speedup\n");
    for r in rows {
        let _ = writeln!(s, "{} {} {} {}", r.workers, (r.workers as f64).log2(), r.log2_time, r.speedup);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn refine_keeps_the_domain() {
        let c = SimulationConfig::parse(
            "grid.nx = 10\ngrid.ny = 5\ngrid.dx = 0.1\nrun.t_end = 1\n",
            "c",
            Path::new("."),
        )
        .unwrap();
        let r = refine(&c, 40);
        assert_eq!((r.grid.nx, r.grid.ny), (40, 20));
        assert!((r.grid.dx * 40.0 - 1.0).abs() < 1e-15);
        assert!((r.grid.dy * 20.0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn converge_needs_an_oracle() {
        let c = SimulationConfig::parse(
            "grid.nx = 4\ngrid.dx = 1\nrun.t_end = 1\ninitial.preset = sloshing\n",
            "c",
            Path::new("."),
        )
        .unwrap();
        assert!(matches!(converge::<f64>(&c, &[4]), Err(Error::PresetWithoutOracle(_))));
    }

    #[test]
    fn csv_formats() {
        let rows = [
            ConvergenceRow { n: 100, l1_error: 0.5, observed_order: None },
            ConvergenceRow { n: 200, l1_error: 0.25, observed_order: Some(1.0) },
        ];
        assert_eq!(
            format_converge_csv(&rows),
            "# overland converge v1\nn,l1_error,observed_order\n100,0.5,\n200,0.25,1\n"
        );
        let b = BenchRow {
            workers: 1,
            wall_time_s: 2.0,
            log2_time: 1.0,
            speedup: 1.0,
            hash: "ab".into(),
        };
        assert_eq!(
            format_bench_csv(&[b]),
            "# overland bench v1\nworkers,wall_time_s,log2_time,speedup,hash\n1,2,1,1,ab\n"
        );
    }
}
