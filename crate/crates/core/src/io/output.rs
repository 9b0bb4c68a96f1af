//! Text outputs: gauge series, gauge summary, mass audit and snapshots.
//! Numbers are written in their shortest round-trip form so files are
//! byte-for-byte reproducible.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::solver::{GaugeRecord, SimulationReport, Snapshot};
use crate::state::{velocity, GridGeometry};

use super::dem::format_raster;

pub const GAUGES_HEADER: &str = "# overland gauges v1\ngauge,t,h,u,v\n";
pub const GAUGE_SUMMARY_HEADER: &str = "# overland gauge summary v1\ngauge,x,y,i,j,max_level,arrival_time\n";
pub const SNAPSHOT_CSV_HEADER: &str = "# overland snapshot v1\nx,y,h,u,v,z\n";

pub fn format_gauges_csv<T: Real>(gauges: &[GaugeRecord<T>]) -> String {
    let mut s = String::from(GAUGES_HEADER);
    for g in gauges {
        for p in &g.samples {
            let _ = writeln!(s, "{},{},{},{},{}", g.name, p.t, p.h, p.u, p.v);
        }
    }
    s
}

pub fn format_gauge_summary<T: Real>(gauges: &[GaugeRecord<T>]) -> String {
    let mut s = String::from(GAUGE_SUMMARY_HEADER);
    for g in gauges {
        let arrival = g.arrival_time.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            g.name, g.x, g.y, g.cell.0, g.cell.1, g.max_level, arrival
        );
    }
    s
}

/// The volume budget and run statistics as `key = value` lines.
pub fn format_audit<T: Real>(r: &SimulationReport<T>) -> String {
    let mut s = String::from("# overland mass audit v1\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("t", r.t.to_string());
    kv("steps", r.steps.to_string());
    kv("workers", r.workers.to_string());
    kv("initial_volume", r.initial_volume.to_string());
    kv("final_volume", r.final_volume.to_string());
    kv("rain_volume", r.rain_volume.to_string());
    kv("infiltrated_volume", r.infiltrated_volume.to_string());
    kv("outflow_volume", r.outflow_volume.to_string());
    kv("mass_balance_error", r.mass_balance_error().to_string());
    kv("relative_mass_error", r.relative_mass_error().to_string());
    kv("min_depth", r.min_depth.to_string());
    s
}

/// One point per cell: `x, y, h, u, v, z`.
pub fn format_snapshot_csv<T: Real>(geom: &GridGeometry<T>, snap: &Snapshot<T>, z: &[T], h_eps: T) -> String {
    let mut s = String::from(SNAPSHOT_CSV_HEADER);
    for j in 0..geom.ny {
        for i in 0..geom.nx {
            let k = j * geom.nx + i;
            let (x, y) = geom.center(i, j);
            let h = snap.h[k];
            let _ = writeln!(
                s,
                "{x},{y},{h},{},{},{}",
                velocity(h, snap.qx[k], h_eps),
                velocity(h, snap.qy[k], h_eps),
                z[k]
            );
        }
    }
    s
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes every output of a run into `dir` and returns the file paths.
pub fn write_outputs<T: Real>(
    dir: &Path,
    report: &SimulationReport<T>,
    h_eps: T,
    snapshot_csv: bool,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    write(dir.join("gauges.csv"), &format_gauges_csv(&report.gauges), &mut written)?;
    write(dir.join("gauge_summary.csv"), &format_gauge_summary(&report.gauges), &mut written)?;
    write(dir.join("audit.txt"), &format_audit(report), &mut written)?;
    let geom = &report.geometry;
    let square = geom.dx == geom.dy;
    let fields = |name: String, values: &[T], written: &mut Vec<PathBuf>| -> Result<()> {
        if square {
            write(dir.join(name), &format_raster(geom, values, None), written)?;
        }
        Ok(())
    };
    for (k, snap) in report.snapshots.iter().enumerate() {
        fields(format!("snapshot_{k:04}_h.asc"), &snap.h, &mut written)?;
        fields(format!("snapshot_{k:04}_qx.asc"), &snap.qx, &mut written)?;
        fields(format!("snapshot_{k:04}_qy.asc"), &snap.qy, &mut written)?;
        if snapshot_csv {
            write(
                dir.join(format!("snapshot_{k:04}.csv")),
                &format_snapshot_csv(geom, snap, &report.z, h_eps),
                &mut written,
            )?;
        }
    }
    fields("final_h.asc".into(), &report.h, &mut written)?;
    fields("final_qx.asc".into(), &report.qx, &mut written)?;
    fields("final_qy.asc".into(), &report.qy, &mut written)?;
    Ok(written)
}
