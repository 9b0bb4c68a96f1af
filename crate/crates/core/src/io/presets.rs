//! Built-in synthetic scenarios. Each fills the bed, the initial state and
//! default boundaries on whatever grid the configuration declares.

use overland_skel::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{lake_at_rest_depth, DamBreak};
use crate::boundary::{BoundaryCondition, BoundarySet};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::sources::RainForcing;
use crate::state::GridGeometry;

use super::config::KeyValues;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    /// Still water over random rough ground with emerged islands.
    LakeAtRest,
    /// Wet-bed dam break.
    DamBreak,
    /// Dry-bed dam break.
    Ritter,
    /// Rain on an initially dry tilted plane.
    RainOnDry,
    /// A tilted free surface released in a closed box.
    Sloshing,
}

impl PresetKind {
    pub const NAMES: [&'static str; 5] = ["lake_at_rest", "dam_break", "ritter", "rain_on_dry", "sloshing"];

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "lake_at_rest" | "lake" => Self::LakeAtRest,
            "dam_break" | "stoker" => Self::DamBreak,
            "ritter" => Self::Ritter,
            "rain_on_dry" => Self::RainOnDry,
            "sloshing" => Self::Sloshing,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LakeAtRest => "lake_at_rest",
            Self::DamBreak => "dam_break",
            Self::Ritter => "ritter",
            Self::RainOnDry => "rain_on_dry",
            Self::Sloshing => "sloshing",
        }
    }

    pub fn has_oracle(self) -> bool {
        matches!(self, Self::LakeAtRest | Self::DamBreak | Self::Ritter)
    }
}

/// Tunables shared by the presets (`preset.*` keys); each preset reads
/// only the ones it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetParams {
    pub seed: u64,
    /// Free-surface level (lake, sloshing).
    pub level: f64,
    pub islands: usize,
    pub roughness: f64,
    pub h_left: f64,
    pub h_right: f64,
    /// Dam position; the middle of the domain by default.
    pub dam: Option<f64>,
    pub amplitude: f64,
    pub slope: f64,
    pub rain_rate: f64,
}

impl PresetParams {
    pub fn defaults(kind: PresetKind) -> Self {
        Self {
            seed: 7,
            level: 1.0,
            islands: 6,
            roughness: 0.05,
            h_left: 1.0,
            h_right: if kind == PresetKind::Ritter { 0.0 } else { 0.1 },
            dam: None,
            amplitude: 0.1,
            slope: 0.01,
            rain_rate: 2e-5,
        }
    }

    pub(crate) fn from_config(kv: &KeyValues, kind: PresetKind) -> Result<Self> {
        let d = Self::defaults(kind);
        let fin = |v: f64| v.is_finite();
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        let p = Self {
            seed: kv.get_or("preset.seed", d.seed)?,
            level: kv.checked("preset.level", Some(d.level), "finite", fin)?.expect("defaulted"),
            islands: kv.get_or("preset.islands", d.islands)?,
            roughness: kv.checked("preset.roughness", Some(d.roughness), "non-negative", nonneg)?.expect("defaulted"),
            h_left: kv.checked("preset.h_left", Some(d.h_left), "non-negative", nonneg)?.expect("defaulted"),
            h_right: kv.checked("preset.h_right", Some(d.h_right), "non-negative", nonneg)?.expect("defaulted"),
            dam: kv.checked("preset.dam", None, "finite", fin)?,
            amplitude: kv.checked("preset.amplitude", Some(d.amplitude), "finite", fin)?.expect("defaulted"),
            slope: kv.checked("preset.slope", Some(d.slope), "finite", fin)?.expect("defaulted"),
            rain_rate: kv.checked("preset.rain_rate", Some(d.rain_rate), "non-negative", nonneg)?.expect("defaulted"),
        };
        if matches!(kind, PresetKind::DamBreak | PresetKind::Ritter) && p.h_left <= p.h_right {
            return Err(Error::Config {
                path: String::from("preset"),
                line: kv.line("preset.h_left"),
                message: format!("dam break needs h_left > h_right (got {} and {})", p.h_left, p.h_right),
            });
        }
        Ok(p)
    }
}

/// Initial fields and defaults produced by a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetScene<T> {
    pub z: Vec<T>,
    pub h: Vec<T>,
    pub qx: Vec<T>,
    pub qy: Vec<T>,
    pub boundaries: BoundarySet<T>,
    pub rain: RainForcing<T>,
}

fn extent<T: Real>(geom: &GridGeometry<T>) -> (f64, f64, f64, f64) {
    let x0 = geom.x0.to_f64_lossy();
    let y0 = geom.y0.to_f64_lossy();
    let lx = geom.dx.to_f64_lossy() * geom.nx as f64;
    let ly = geom.dy.to_f64_lossy() * geom.ny as f64;
    (x0, y0, lx, ly)
}

/// Random rough ground: Gaussian hills (some rising above the lake level)
/// defined in continuous coordinates, plus per-cell noise.
pub fn rough_topography<T: Real>(geom: &GridGeometry<T>, p: &PresetParams) -> Vec<T> {
    let (x0, y0, lx, ly) = extent(geom);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let hills: Vec<(f64, f64, f64, f64)> = (0..p.islands)
        .map(|_| {
            let cx = x0 + lx * rng.gen_range(0.1..0.9);
            let cy = y0 + ly * rng.gen_range(0.1..0.9);
            let height = p.level * rng.gen_range(0.4..1.6);
            let radius = lx.max(ly) * rng.gen_range(0.05..0.15);
            (cx, cy, height, radius)
        })
        .collect();
    let mut z = Vec::with_capacity(geom.cells());
    for j in 0..geom.ny {
        for i in 0..geom.nx {
            let (x, y) = geom.center(i, j);
            let (x, y) = (x.to_f64_lossy(), y.to_f64_lossy());
            let bump: f64 = hills
                .iter()
                .map(|&(cx, cy, hgt, r)| hgt * (-((x - cx).powi(2) + (y - cy).powi(2)) / (r * r)).exp())
                .sum();
            let noise = p.roughness * p.level.abs() * rng.gen::<f64>();
            z.push(T::lit(bump + noise));
        }
    }
    z
}

fn dam_position<T: Real>(geom: &GridGeometry<T>, p: &PresetParams) -> f64 {
    let (x0, _, lx, _) = extent(geom);
    p.dam.unwrap_or(x0 + lx / 2.0)
}

pub fn build<T: Real>(kind: PresetKind, p: &PresetParams, geom: &GridGeometry<T>, t_end: f64) -> PresetScene<T> {
    let n = geom.cells();
    let zero = vec![T::zero(); n];
    let (x0, y0, lx, ly) = extent(geom);
    let centers = || (0..geom.ny).flat_map(move |j| (0..geom.nx).map(move |i| geom.center(i, j)));
    let mut scene = PresetScene {
        z: zero.clone(),
        h: zero.clone(),
        qx: zero.clone(),
        qy: zero,
        boundaries: BoundarySet::walls(),
        rain: RainForcing::None,
    };
    match kind {
        PresetKind::LakeAtRest => {
            scene.z = rough_topography(geom, p);
            let level = T::lit(p.level);
            scene.h = scene.z.iter().map(|&z| lake_at_rest_depth(level, z)).collect();
        }
        PresetKind::DamBreak | PresetKind::Ritter => {
            let dam = dam_position(geom, p);
            scene.h = centers()
                .map(|(x, _)| T::lit(if x.to_f64_lossy() < dam { p.h_left } else { p.h_right }))
                .collect();
            scene.boundaries.set(Side::West, BoundaryCondition::FreeOutflow);
            scene.boundaries.set(Side::East, BoundaryCondition::FreeOutflow);
        }
        PresetKind::RainOnDry => {
            scene.z = centers().map(|(x, _)| T::lit(p.slope * (x0 + lx - x.to_f64_lossy()))).collect();
            scene.rain = RainForcing::Uniform {
                rate: T::lit(p.rain_rate),
                start: T::zero(),
                end: T::lit(if t_end > 0.0 { t_end } else { f64::INFINITY }),
            };
        }
        PresetKind::Sloshing => {
            let (xc, yc) = (x0 + lx / 2.0, y0 + ly / 2.0);
            scene.h = centers()
                .map(|(x, y)| {
                    let s = (x.to_f64_lossy() - xc) / lx + 0.5 * (y.to_f64_lossy() - yc) / ly;
                    T::lit(p.level + p.amplitude * s)
                })
                .collect();
        }
    }
    scene
}

/// The exact depth of an oracle preset at time `t` on every cell.
pub fn oracle<T: Real>(kind: PresetKind, p: &PresetParams, geom: &GridGeometry<T>, g: f64, t: f64) -> Result<Vec<T>> {
    match kind {
        PresetKind::LakeAtRest => Ok(build(kind, p, geom, t).h),
        PresetKind::DamBreak | PresetKind::Ritter => {
            let dam = DamBreak::new(p.h_left, p.h_right, dam_position(geom, p), g);
            Ok((0..geom.ny)
                .flat_map(|j| (0..geom.nx).map(move |i| (i, j)))
                .map(|(i, j)| T::lit(dam.depth(geom.center(i, j).0.to_f64_lossy(), t)))
                .collect())
        }
        other => Err(Error::PresetWithoutOracle(other.name().to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(nx: usize, ny: usize) -> GridGeometry<f64> {
        GridGeometry::new(nx, ny, 1.0 / nx as f64, 1.0 / nx as f64).unwrap()
    }

    #[test]
    fn lake_has_islands_and_water() {
        let p = PresetParams::defaults(PresetKind::LakeAtRest);
        let s = build::<f64>(PresetKind::LakeAtRest, &p, &geom(64, 64), 1.0);
        assert!(s.h.contains(&0.0));
        assert!(s.h.iter().any(|&h| h > 0.5));
        for (h, z) in s.h.iter().zip(&s.z) {
            assert!(*h == 0.0 || (h + z - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let p = PresetParams::defaults(PresetKind::LakeAtRest);
        let a = rough_topography::<f64>(&geom(16, 16), &p);
        let b = rough_topography::<f64>(&geom(16, 16), &p);
        assert_eq!(a, b);
        let q = PresetParams { seed: 8, ..p };
        assert_ne!(a, rough_topography::<f64>(&geom(16, 16), &q));
    }

    #[test]
    fn dam_break_initial_state_matches_oracle_at_zero() {
        let p = PresetParams::defaults(PresetKind::DamBreak);
        let g = geom(10, 1);
        let s = build::<f64>(PresetKind::DamBreak, &p, &g, 1.0);
        assert_eq!(s.h, oracle::<f64>(PresetKind::DamBreak, &p, &g, 9.81, 0.0).unwrap());
        assert_eq!(&s.h[..5], &[1.0; 5]);
        assert_eq!(&s.h[5..], &[0.1; 5]);
        assert_eq!(s.boundaries.get(Side::West), BoundaryCondition::FreeOutflow);
        assert_eq!(s.boundaries.get(Side::North), BoundaryCondition::Wall);
    }

    #[test]
    fn ritter_defaults_to_dry_right() {
        let p = PresetParams::defaults(PresetKind::Ritter);
        assert_eq!(p.h_right, 0.0);
    }

    #[test]
    fn oracle_missing_for_rain_and_sloshing() {
        for k in [PresetKind::RainOnDry, PresetKind::Sloshing] {
            let p = PresetParams::defaults(k);
            assert!(matches!(oracle::<f64>(k, &p, &geom(4, 4), 9.81, 1.0), Err(Error::PresetWithoutOracle(_))));
        }
    }
}
