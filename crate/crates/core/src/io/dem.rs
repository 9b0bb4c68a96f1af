//! ESRI ASCII grids: a six-line header followed by row-major values with
//! the northern row first. In memory rasters are stored southern row first.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::state::{GridGeometry, Topography};

/// A raster read from or written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    pub geometry: GridGeometry<T>,
    /// Row-major, `j = 0` the southern row.
    pub values: Vec<T>,
    pub nodata: Option<T>,
}

const REQUIRED: [&str; 5] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize"];

fn dem_err(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Dem {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses raster text. `label` names the source in error messages. Any cell
/// equal to the nodata value is rejected: every cell is part of the domain.
pub fn parse_raster<T: Real>(text: &str, label: &str) -> Result<Raster<T>> {
    let mut header: [Option<f64>; 5] = [None; 5];
    let mut nodata = None;
    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(n, line)) = lines.peek() {
        let mut it = line.split_whitespace();
        let Some(key) = it.next() else {
            lines.next();
            continue;
        };
        let lower = key.to_ascii_lowercase();
        if !lower.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let value = it
            .next()
            .ok_or_else(|| dem_err(label, n + 1, format!("header key '{key}' has no value")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| dem_err(label, n + 1, format!("header value '{value}' for '{key}' is not a number")))?;
        match REQUIRED.iter().position(|k| *k == lower) {
            Some(k) => header[k] = Some(v),
            None if lower == "nodata_value" => nodata = Some(v),
            None => return Err(dem_err(label, n + 1, format!("unknown header key '{key}'"))),
        }
        lines.next();
    }
    let header_end = lines.peek().map(|(n, _)| *n + 1).unwrap_or(text.lines().count() + 1);
    for (k, v) in header.iter().enumerate() {
        if v.is_none() {
            return Err(dem_err(label, header_end, format!("missing header key '{}'", REQUIRED[k])));
        }
    }
    let [ncols, nrows, x0, y0, cell] = header.map(|v| v.expect("checked above"));
    let count = |v: f64, name: &str| {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(dem_err(label, header_end, format!("{name} must be a positive integer (got {v})")))
        }
    };
    let (nx, ny) = (count(ncols, "ncols")?, count(nrows, "nrows")?);
    let geometry = GridGeometry::with_origin(nx, ny, T::lit(cell), T::lit(cell), T::lit(x0), T::lit(y0))
        .map_err(|e| dem_err(label, header_end, e.to_string()))?;

    let mut values = vec![T::zero(); nx * ny];
    let mut k = 0usize;
    let mut last_line = header_end;
    for (n, line) in lines {
        last_line = n + 1;
        for tok in line.split_whitespace() {
            if k >= nx * ny {
                return Err(dem_err(label, n + 1, format!("more than {} values", nx * ny)));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| dem_err(label, n + 1, format!("'{tok}' is not a number")))?;
            let (row, col) = (k / nx, k % nx);
            if nodata == Some(v) {
                return Err(dem_err(
                    label,
                    n + 1,
                    format!("nodata value at row {row}, column {col} lies inside the domain"),
                ));
            }
            if !v.is_finite() {
                return Err(dem_err(label, n + 1, format!("non-finite value '{tok}'")));
            }
            values[(ny - 1 - row) * nx + col] = T::lit(v);
            k += 1;
        }
    }
    if k != nx * ny {
        return Err(dem_err(label, last_line, format!("expected {} values, found {k}", nx * ny)));
    }
    Ok(Raster {
        geometry,
        values,
        nodata: nodata.map(T::lit),
    })
}

pub fn read_raster<T: Real>(path: &Path) -> Result<Raster<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_raster(&text, &path.display().to_string())
}

/// Reads a bed elevation raster.
pub fn load_dem<T: Real>(path: &Path) -> Result<Topography<T>> {
    let r = read_raster::<T>(path)?;
    Topography::new(r.geometry, r.values)
}

/// Formats a raster; values use the shortest representation that reads
/// back to the same number.
pub fn format_raster<T: Real>(geom: &GridGeometry<T>, values: &[T], nodata: Option<T>) -> String {
    assert_eq!(values.len(), geom.cells(), "raster size does not match the grid");
    assert!(geom.dx == geom.dy, "ASCII grids need square cells");
    let mut s = String::new();
    let _ = writeln!(s, "ncols {}", geom.nx);
    let _ = writeln!(s, "nrows {}", geom.ny);
    let _ = writeln!(s, "xllcorner {}", geom.x0);
    let _ = writeln!(s, "yllcorner {}", geom.y0);
    let _ = writeln!(s, "cellsize {}", geom.dx);
    if let Some(nd) = nodata {
        let _ = writeln!(s, "NODATA_value {nd}");
    }
    for row in values.chunks(geom.nx).rev() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_raster<T: Real>(path: &Path, geom: &GridGeometry<T>, values: &[T]) -> Result<()> {
    std::fs::write(path, format_raster(geom, values, None)).map_err(|e| Error::io(path, e))
}

pub fn write_dem<T: Real>(path: &Path, topo: &Topography<T>) -> Result<()> {
    write_raster(path, topo.geometry(), topo.values())
}
