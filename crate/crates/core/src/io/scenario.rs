//! Turning a [`SimulationConfig`] into a [`Scenario`] and a [`RunPlan`].

use overland_skel::Side;

use crate::boundary::{BoundaryCondition, BoundarySet};
use crate::error::{Error, Result};
use crate::flux::CflConfig;
use crate::num::Real;
use crate::solver::{Friction, Gauge, Infiltration, RunPlan, Scenario};
use crate::sources::{FrictionLaw, GreenAmptParams, RainForcing};
use crate::state::{GridGeometry, PhysicalConstants};

use super::config::{InitialSpec, RainSpec, SimulationConfig};
use super::dem::{load_dem, read_raster};
use super::presets;

fn cast_bc<T: Real>(bc: BoundaryCondition<f64>) -> BoundaryCondition<T> {
    match bc {
        BoundaryCondition::Wall => BoundaryCondition::Wall,
        BoundaryCondition::Periodic => BoundaryCondition::Periodic,
        BoundaryCondition::FreeOutflow => BoundaryCondition::FreeOutflow,
        BoundaryCondition::ImposedHeight(h) => BoundaryCondition::ImposedHeight(T::lit(h)),
        BoundaryCondition::ImposedDischarge(q) => BoundaryCondition::ImposedDischarge(T::lit(q)),
        BoundaryCondition::ImposedState { h, q } => BoundaryCondition::ImposedState {
            h: T::lit(h),
            q: T::lit(q),
        },
    }
}

fn cast_law<T: Real>(law: FrictionLaw<f64>) -> FrictionLaw<T> {
    match law {
        FrictionLaw::Manning(v) => FrictionLaw::Manning(T::lit(v)),
        FrictionLaw::Strickler(v) => FrictionLaw::Strickler(T::lit(v)),
        FrictionLaw::DarcyWeisbach(v) => FrictionLaw::DarcyWeisbach(T::lit(v)),
        FrictionLaw::Chezy(v) => FrictionLaw::Chezy(T::lit(v)),
    }
}

fn same_grid<T: Real>(what: &str, a: &GridGeometry<T>, b: &GridGeometry<T>) -> Result<()> {
    if a.nx != b.nx || a.ny != b.ny || a.dx != b.dx || a.dy != b.dy {
        return Err(Error::Invalid(format!(
            "{what} raster is {}x{} with cell size {}, the grid is {}x{} with cell size {}",
            b.nx, b.ny, b.dx, a.nx, a.ny, a.dx
        )));
    }
    Ok(())
}

impl SimulationConfig {
    pub fn geometry<T: Real>(&self) -> Result<GridGeometry<T>> {
        let g = &self.grid;
        GridGeometry::with_origin(g.nx, g.ny, T::lit(g.dx), T::lit(g.dy), T::lit(g.x0), T::lit(g.y0))
    }

    /// Builds the physical problem, reading any referenced rasters.
    pub fn scenario<T: Real>(&self) -> Result<Scenario<T>> {
        let geometry = self.geometry::<T>()?;
        let n = geometry.cells();
        let mut boundaries = BoundarySet::walls();
        let mut preset_rain = RainForcing::None;
        let (z, h, qx, qy) = match &self.initial {
            InitialSpec::Preset { kind, params } => {
                let s = presets::build::<T>(*kind, params, &geometry, self.t_end);
                boundaries = s.boundaries;
                preset_rain = s.rain;
                (s.z, s.h, s.qx, s.qy)
            }
            InitialSpec::Rasters { dem, h, u, v, depth, level } => {
                let z = match dem {
                    Some(p) => {
                        let topo = load_dem::<T>(p)?;
                        same_grid("bed", &geometry, topo.geometry())?;
                        topo.values().to_vec()
                    }
                    None => vec![T::zero(); n],
                };
                let read = |p: &std::path::Path, what: &str| -> Result<Vec<T>> {
                    let r = read_raster::<T>(p)?;
                    same_grid(what, &geometry, &r.geometry)?;
                    Ok(r.values)
                };
                let hv = match (h, level) {
                    (Some(p), _) => read(p, "depth")?,
                    (None, Some(l)) => z.iter().map(|&zz| (T::lit(*l) - zz).max(T::zero())).collect(),
                    (None, None) => vec![T::lit(*depth); n],
                };
                let q = |vel: &Option<std::path::PathBuf>, what: &str| -> Result<Vec<T>> {
                    match vel {
                        Some(p) => Ok(read(p, what)?.iter().zip(&hv).map(|(&u, &h)| u * h).collect()),
                        None => Ok(vec![T::zero(); n]),
                    }
                };
                let qx = q(u, "x velocity")?;
                let qy = q(v, "y velocity")?;
                (z, hv, qx, qy)
            }
        };
        for side in Side::ALL {
            if let Some(bc) = self.boundaries[side.index()] {
                boundaries.set(side, cast_bc(bc));
            }
        }
        let rain = match &self.rain {
            RainSpec::None => preset_rain,
            RainSpec::Uniform { rate, start, end } => RainForcing::Uniform {
                rate: T::lit(*rate),
                start: T::lit(*start),
                end: T::lit(*end),
            },
            RainSpec::Raster { path, start, end } => {
                let r = read_raster::<T>(path)?;
                same_grid("rain", &geometry, &r.geometry)?;
                RainForcing::Raster {
                    rates: r.values,
                    start: T::lit(*start),
                    end: T::lit(*end),
                }
            }
        };
        let friction = match &self.friction {
            None => None,
            Some(f) => Some(Friction {
                law: cast_law(f.law),
                raster: match &f.raster {
                    Some(p) => {
                        let r = read_raster::<T>(p)?;
                        same_grid("friction", &geometry, &r.geometry)?;
                        Some(r.values)
                    }
                    None => None,
                },
            }),
        };
        let infiltration = self.infiltration.as_ref().map(|i| {
            let p = &i.params;
            Infiltration {
                params: GreenAmptParams {
                    ks: T::lit(p.ks),
                    hf: T::lit(p.hf),
                    a: T::lit(p.a),
                    theta_i: T::lit(p.theta_i),
                    theta_s: T::lit(p.theta_s),
                    ic_init: T::lit(p.ic_init),
                },
                initial_volume: T::lit(i.initial_volume),
            }
        });
        let scenario = Scenario {
            geometry,
            z,
            h,
            qx,
            qy,
            boundaries,
            friction,
            rain,
            infiltration,
            constants: PhysicalConstants::new(T::lit(self.g))?,
            h_eps: T::lit(self.h_eps),
            dt_max: T::lit(self.dt_max),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn plan<T: Real>(&self) -> Result<RunPlan<T>> {
        let mut plan = RunPlan::new(T::lit(self.t_end), self.order).with_workers(self.workers);
        if let Some(c) = self.n_cfl {
            plan.cfl = CflConfig::new(T::lit(c))?;
        }
        plan.snapshot_times = self.output.snapshot_times.iter().map(|&t| T::lit(t)).collect();
        plan.gauges = self
            .output
            .gauges
            .iter()
            .map(|g| Gauge {
                name: g.name.clone(),
                x: T::lit(g.x),
                y: T::lit(g.y),
            })
            .collect();
        plan.gauge_stride = self.output.gauge_stride;
        plan.fixed_steps = self.steps;
        plan.arrival_threshold = T::lit(self.output.arrival_threshold);
        plan.validate()?;
        Ok(plan)
    }
}
