//! Flat `key = value` configuration files with dotted section keys.
//!
//! ```text
//! grid.nx = 200
//! grid.ny = 1
//! grid.dx = 0.005
//! initial.preset = dam_break
//! bc.west.type = free
//! run.t_end = 0.0639
//! gauge.g1 = 0.6, 0.0025
//! ```
//!
//! Lines starting with `#` are comments. Relative paths resolve against the
//! directory holding the file. Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use overland_skel::Side;

use crate::boundary::BoundaryCondition;
use crate::error::{Error, Result};
use crate::solver::{Gauge, DEFAULT_ARRIVAL_THRESHOLD, DEFAULT_DT_MAX};
use crate::sources::{FrictionLaw, GreenAmptParams, DEFAULT_IC_INIT};
use crate::state::{DEFAULT_GRAVITY, DEFAULT_H_EPS};

use super::presets::{PresetKind, PresetParams};

/// Raw entries of a configuration file with their line numbers.
#[derive(Debug, Clone)]
pub struct KeyValues {
    label: String,
    entries: BTreeMap<String, (String, usize)>,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str, label: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config {
                    path: label.to_string(),
                    line: n + 1,
                    message: format!("expected 'key = value', found '{line}'"),
                });
            };
            let key = k.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Config {
                    path: label.to_string(),
                    line: n + 1,
                    message: "empty key".into(),
                });
            }
            let value = v.trim().to_string();
            if let Some((_, first)) = entries.insert(key.clone(), (value, n + 1)) {
                return Err(Error::Config {
                    path: label.to_string(),
                    line: n + 1,
                    message: format!("key '{key}' repeats line {first}"),
                });
            }
        }
        Ok(Self {
            label: label.to_string(),
            entries,
            used: Default::default(),
        })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Config {
            path: self.label.clone(),
            line,
            message: message.into(),
        }
    }

    /// The raw value and its line, marking the key as consumed.
    pub fn raw(&self, key: &str) -> Option<(&str, usize)> {
        let (v, n) = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some((v.as_str(), *n))
    }

    pub fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, n)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(n, format!("cannot parse '{v}' for '{key}'"))),
        }
    }

    pub fn get_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<V: FromStr>(&self, key: &str) -> Result<V> {
        self.get(key)?.ok_or_else(|| self.err(0, format!("missing required key '{key}'")))
    }

    /// A number that must satisfy `ok`, reported with the key's line.
    pub fn checked(&self, key: &str, default: Option<f64>, what: &str, ok: impl Fn(f64) -> bool) -> Result<Option<f64>> {
        let v = match self.get::<f64>(key)? {
            Some(v) => v,
            None => return Ok(default),
        };
        if ok(v) {
            Ok(Some(v))
        } else {
            Err(self.err(self.line(key), format!("'{key}' must be {what} (got {v})")))
        }
    }

    pub fn line(&self, key: &str) -> usize {
        self.entries.get(key).map(|e| e.1).unwrap_or(0)
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((v, n)) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| self.err(n, format!("cannot parse '{s}' in '{key}'"))))
            .collect::<Result<Vec<f64>>>()
            .map(Some)
    }

    pub fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect()
    }

    /// Fails on the first key nothing consumed.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let mut unknown: Vec<(usize, &String)> = self
            .entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .map(|(k, (_, n))| (*n, k))
            .collect();
        unknown.sort();
        match unknown.first() {
            Some((n, k)) => Err(self.err(*n, format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrictionSpec {
    pub law: FrictionLaw<f64>,
    pub raster: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RainSpec {
    None,
    Uniform { rate: f64, start: f64, end: f64 },
    Raster { path: PathBuf, start: f64, end: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfiltrationSpec {
    pub params: GreenAmptParams<f64>,
    pub initial_volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Preset { kind: PresetKind, params: PresetParams },
    /// Rasters on disk; a missing depth raster means `depth` everywhere (or
    /// the still-water depth under `level`).
    Rasters {
        dem: Option<PathBuf>,
        h: Option<PathBuf>,
        u: Option<PathBuf>,
        v: Option<PathBuf>,
        depth: f64,
        level: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    /// Also write a point CSV per snapshot.
    pub snapshot_csv: bool,
    pub gauges: Vec<Gauge<f64>>,
    pub gauge_stride: usize,
    pub arrival_threshold: f64,
}

/// Everything a run needs, as read from a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub grid: GridSpec,
    pub order: u8,
    pub n_cfl: Option<f64>,
    pub h_eps: f64,
    pub dt_max: f64,
    pub g: f64,
    pub friction: Option<FrictionSpec>,
    pub rain: RainSpec,
    pub infiltration: Option<InfiltrationSpec>,
    /// Per side in `Side::ALL` order; `None` takes the preset's default (or
    /// a wall).
    pub boundaries: [Option<BoundaryCondition<f64>>; 4],
    pub initial: InitialSpec,
    pub t_end: f64,
    /// Run exactly this many steps instead of stopping at `t_end`.
    pub steps: Option<usize>,
    pub workers: usize,
    pub output: OutputSpec,
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn non_negative(v: f64) -> bool {
    v >= 0.0 && v.is_finite()
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::West => "west",
        Side::East => "east",
        Side::South => "south",
        Side::North => "north",
    }
}

impl SimulationConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Parses configuration text; relative paths resolve against `base`.
    pub fn parse(text: &str, label: &str, base: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text, label)?;
        let path_of = |key: &str| -> Option<PathBuf> { kv.raw(key).map(|(v, _)| base.join(v)) };
        let err = |key: &str, msg: String| Error::Config {
            path: label.to_string(),
            line: kv.line(key),
            message: msg,
        };

        let count = |key: &str, default: Option<usize>| -> Result<usize> {
            let v = match kv.get::<usize>(key)? {
                Some(v) => v,
                None => default.ok_or_else(|| err(key, format!("missing required key '{key}'")))?,
            };
            if v == 0 {
                return Err(err(key, format!("'{key}' must be at least 1")));
            }
            Ok(v)
        };
        let nx = count("grid.nx", None)?;
        let ny = count("grid.ny", Some(1))?;
        let dx = kv
            .checked("grid.dx", None, "positive", positive)?
            .ok_or_else(|| err("grid.dx", "missing required key 'grid.dx'".into()))?;
        let dy = kv.checked("grid.dy", Some(dx), "positive", positive)?.expect("defaulted");
        let x0 = kv.get_or("grid.x0", 0.0)?;
        let y0 = kv.get_or("grid.y0", 0.0)?;
        let grid = GridSpec { nx, ny, dx, dy, x0, y0 };

        let order: u8 = kv.get_or("scheme.order", 2)?;
        if order != 1 && order != 2 {
            return Err(err("scheme.order", format!("'scheme.order' must be 1 or 2 (got {order})")));
        }
        let n_cfl = kv.checked("scheme.cfl", None, "in (0, 1]", |v| v > 0.0 && v <= 1.0)?;
        let h_eps = kv.checked("scheme.h_eps", Some(DEFAULT_H_EPS), "non-negative", non_negative)?.expect("defaulted");
        let dt_max = kv.checked("scheme.dt_max", Some(DEFAULT_DT_MAX), "positive", positive)?.expect("defaulted");
        let g = kv.checked("scheme.g", Some(DEFAULT_GRAVITY), "positive", positive)?.expect("defaulted");

        let friction = match kv.raw("friction.law") {
            None | Some(("none", _)) => None,
            Some((name, n)) => {
                let value = kv.checked("friction.value", None, "positive", positive)?;
                let raster = path_of("friction.raster");
                let v = match (value, &raster) {
                    (Some(v), _) => v,
                    (None, Some(_)) => 1.0,
                    (None, None) => return Err(err("friction.law", "friction needs 'friction.value' or 'friction.raster'".into())),
                };
                let law = match name {
                    "manning" => FrictionLaw::Manning(v),
                    "strickler" => FrictionLaw::Strickler(v),
                    "darcy" | "darcy_weisbach" => FrictionLaw::DarcyWeisbach(v),
                    "chezy" => FrictionLaw::Chezy(v),
                    other => {
                        return Err(Error::Config {
                            path: label.to_string(),
                            line: n,
                            message: format!("unknown friction law '{other}' (manning, strickler, darcy, chezy, none)"),
                        })
                    }
                };
                Some(FrictionSpec { law, raster })
            }
        };

        let t_end = match kv.checked("run.t_end", None, "finite and non-negative", non_negative)? {
            Some(t) => t,
            None if kv.raw("run.steps").is_some() => f64::MAX,
            None => return Err(err("run.t_end", "missing required key 'run.t_end' (or 'run.steps')".into())),
        };

        let start = kv.checked("rain.start", Some(0.0), "non-negative", non_negative)?.expect("defaulted");
        let end = kv.checked("rain.end", Some(f64::INFINITY), "non-negative", |v| v >= 0.0)?.expect("defaulted");
        if end < start {
            return Err(err("rain.end", format!("rain ends ({end}) before it starts ({start})")));
        }
        let rain = match kv.raw("rain.type") {
            None | Some(("none", _)) => RainSpec::None,
            Some(("uniform", _)) => RainSpec::Uniform {
                rate: kv
                    .checked("rain.rate", None, "non-negative", non_negative)?
                    .ok_or_else(|| err("rain.type", "uniform rain needs 'rain.rate'".into()))?,
                start,
                end,
            },
            Some(("raster", _)) => RainSpec::Raster {
                path: path_of("rain.raster").ok_or_else(|| err("rain.type", "raster rain needs 'rain.raster'".into()))?,
                start,
                end,
            },
            Some((other, n)) => {
                return Err(Error::Config {
                    path: label.to_string(),
                    line: n,
                    message: format!("unknown rain type '{other}' (none, uniform, raster)"),
                })
            }
        };

        let infiltration = if kv.keys_with_prefix("infiltration.").is_empty() {
            None
        } else {
            let need = |key: &str, what: &str, ok: fn(f64) -> bool| -> Result<f64> {
                kv.checked(key, None, what, ok)?
                    .ok_or_else(|| err(key, format!("missing required key '{key}'")))
            };
            let params = GreenAmptParams {
                ks: need("infiltration.ks", "non-negative", non_negative)?,
                hf: need("infiltration.hf", "finite", f64::is_finite)?,
                a: need("infiltration.a", "finite", f64::is_finite)?,
                theta_i: need("infiltration.theta_i", "in [0, 1]", |v| (0.0..=1.0).contains(&v))?,
                theta_s: need("infiltration.theta_s", "in (0, 1]", |v| v > 0.0 && v <= 1.0)?,
                ic_init: kv
                    .checked("infiltration.ic_init", Some(DEFAULT_IC_INIT), "non-negative", non_negative)?
                    .expect("defaulted"),
            };
            params
                .validate()
                .map_err(|e| err("infiltration.theta_s", e.to_string()))?;
            let initial_volume = kv
                .checked("infiltration.initial_volume", Some(0.0), "non-negative", non_negative)?
                .expect("defaulted");
            Some(InfiltrationSpec { params, initial_volume })
        };

        let mut boundaries = [None; 4];
        for side in Side::ALL {
            let name = side_name(side);
            let key = format!("bc.{name}.type");
            let Some((ty, n)) = kv.raw(&key) else { continue };
            let num = |what: &str, ok: fn(f64) -> bool, desc: &str| -> Result<f64> {
                let k = format!("bc.{name}.{what}");
                kv.checked(&k, None, desc, ok)?.ok_or_else(|| Error::Config {
                    path: label.to_string(),
                    line: n,
                    message: format!("boundary '{ty}' on the {name} side needs '{k}'"),
                })
            };
            boundaries[side.index()] = Some(match ty {
                "wall" => BoundaryCondition::Wall,
                "periodic" => BoundaryCondition::Periodic,
                "free" | "outflow" => BoundaryCondition::FreeOutflow,
                "height" => BoundaryCondition::ImposedHeight(num("h", non_negative, "non-negative")?),
                "discharge" => BoundaryCondition::ImposedDischarge(num("q", f64::is_finite, "finite")?),
                "state" => BoundaryCondition::ImposedState {
                    h: num("h", non_negative, "non-negative")?,
                    q: num("q", f64::is_finite, "finite")?,
                },
                other => {
                    return Err(Error::Config {
                        path: label.to_string(),
                        line: n,
                        message: format!("unknown boundary type '{other}' (wall, periodic, free, height, discharge, state)"),
                    })
                }
            });
        }

        let initial = match kv.raw("initial.preset") {
            Some((name, n)) => {
                let kind = PresetKind::from_name(name).ok_or_else(|| Error::Config {
                    path: label.to_string(),
                    line: n,
                    message: format!("unknown preset '{name}' ({})", PresetKind::NAMES.join(", ")),
                })?;
                InitialSpec::Preset {
                    kind,
                    params: PresetParams::from_config(&kv, kind)?,
                }
            }
            None => InitialSpec::Rasters {
                dem: path_of("initial.dem"),
                h: path_of("initial.h"),
                u: path_of("initial.u"),
                v: path_of("initial.v"),
                depth: kv.checked("initial.depth", Some(0.0), "non-negative", non_negative)?.expect("defaulted"),
                level: kv.get("initial.level")?,
            },
        };

        let workers = count("run.workers", Some(1))?;
        let steps = match kv.get::<usize>("run.steps")? {
            Some(0) => return Err(err("run.steps", "'run.steps' must be at least 1".into())),
            other => other,
        };
        let snapshot_times = kv.list("output.snapshots")?.unwrap_or_default();
        if let Some(t) = snapshot_times.iter().find(|t| !non_negative(**t)) {
            return Err(err("output.snapshots", format!("snapshot time {t} is negative or non-finite")));
        }
        let mut gauges = Vec::new();
        for key in kv.keys_with_prefix("gauge.") {
            let name = key["gauge.".len()..].to_string();
            let xy = kv.list(&key)?.expect("key exists");
            let [x, y] = xy[..] else {
                return Err(err(&key, format!("gauge '{name}' needs 'x, y'")));
            };
            gauges.push(Gauge { name, x, y });
        }
        gauges.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.name.cmp(&b.name)));
        let output = OutputSpec {
            dir: path_of("output.dir").unwrap_or_else(|| base.join("output")),
            snapshot_times,
            snapshot_csv: kv.get_or("output.snapshot_csv", true)?,
            gauges,
            gauge_stride: count("output.gauge_stride", Some(1))?,
            arrival_threshold: kv
                .checked(
                    "output.arrival_threshold",
                    Some(DEFAULT_ARRIVAL_THRESHOLD),
                    "non-negative",
                    non_negative,
                )?
                .expect("defaulted"),
        };
        kv.finish()?;
        Ok(Self {
            grid,
            order,
            n_cfl,
            h_eps,
            dt_max,
            g,
            friction,
            rain,
            infiltration,
            boundaries,
            initial,
            t_end,
            steps,
            workers,
            output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SimulationConfig> {
        SimulationConfig::parse(text, "test.cfg", Path::new("/data"))
    }

    const MINIMAL: &str = "grid.nx = 10\ngrid.dx = 0.1\nrun.t_end = 1\n";

    #[test]
    fn minimal_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.grid, GridSpec { nx: 10, ny: 1, dx: 0.1, dy: 0.1, x0: 0.0, y0: 0.0 });
        assert_eq!(c.order, 2);
        assert_eq!(c.h_eps, 1e-12);
        assert_eq!(c.g, 9.81);
        assert_eq!(c.workers, 1);
        assert_eq!(c.rain, RainSpec::None);
        assert_eq!(c.output.dir, PathBuf::from("/data/output"));
        assert!(matches!(c.initial, InitialSpec::Rasters { dem: None, .. }));
    }

    #[test]
    fn errors_carry_the_line() {
        let e = parse("grid.nx = 10\ngrid.dx = -1\nrun.t_end = 1\n").unwrap_err().to_string();
        assert!(e.starts_with("test.cfg:2:"), "{e}");
        let e = parse("grid.nx = 10\ngrid.dx = 1\nrun.t_end = 1\nbc.west.typo = wall\n").unwrap_err().to_string();
        assert!(e.starts_with("test.cfg:4:") && e.contains("bc.west.typo"), "{e}");
        let e = parse("grid.nx = 10\ngrid.nx = 11\n").unwrap_err().to_string();
        assert!(e.starts_with("test.cfg:2:") && e.contains("repeats line 1"), "{e}");
        let e = parse("grid.nx = 10\nno equals sign\n").unwrap_err().to_string();
        assert!(e.starts_with("test.cfg:2:"), "{e}");
        let e = parse(&format!("{MINIMAL}scheme.cfl = 1.5\n")).unwrap_err().to_string();
        assert!(e.starts_with("test.cfg:4:"), "{e}");
        let e = parse(&format!("{MINIMAL}bc.east.type = height\n")).unwrap_err().to_string();
        assert!(e.starts_with("test.cfg:4:") && e.contains("bc.east.h"), "{e}");
    }

    #[test]
    fn full_configuration() {
        let text = "\
# a comment
grid.nx = 8
grid.ny = 4
grid.dx = 2
scheme.order = 1
scheme.cfl = 0.5
friction.law = manning
friction.value = 0.033
rain.type = uniform
rain.rate = 1e-5
rain.end = 100
infiltration.ks = 1e-6
infiltration.hf = 0.1
infiltration.a = 1
infiltration.theta_i = 0.1
infiltration.theta_s = 0.4
bc.west.type = state
bc.west.h = 1
bc.west.q = 0.5
bc.east.type = free
initial.dem = dem.asc
initial.level = 2
run.t_end = 10
run.workers = 4
output.dir = out
output.snapshots = 5, 10
gauge.b = 3, 1
gauge.a = 1, 1
";
        let c = parse(text).unwrap();
        assert_eq!(c.order, 1);
        assert_eq!(c.n_cfl, Some(0.5));
        assert_eq!(c.friction.unwrap().law, FrictionLaw::Manning(0.033));
        assert_eq!(c.rain, RainSpec::Uniform { rate: 1e-5, start: 0.0, end: 100.0 });
        assert_eq!(c.infiltration.unwrap().params.theta_s, 0.4);
        assert_eq!(c.boundaries[Side::West.index()], Some(BoundaryCondition::ImposedState { h: 1.0, q: 0.5 }));
        assert_eq!(c.boundaries[Side::East.index()], Some(BoundaryCondition::FreeOutflow));
        assert_eq!(c.boundaries[Side::North.index()], None);
        assert_eq!(c.output.snapshot_times, vec![5.0, 10.0]);
        assert_eq!(c.output.gauges[0].name, "a");
        assert_eq!(c.output.dir, PathBuf::from("/data/out"));
        match c.initial {
            InitialSpec::Rasters { dem, level, .. } => {
                assert_eq!(dem, Some(PathBuf::from("/data/dem.asc")));
                assert_eq!(level, Some(2.0));
            }
            _ => panic!("expected rasters"),
        }
    }
}
