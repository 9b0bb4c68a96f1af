//! The 2D well-balanced scheme, Heun time stepping and the time loop.

pub mod kernels;
mod worker;

use overland_skel::{decompose, CommStats, Executor};

use crate::boundary::BoundarySet;
use crate::error::{Error, Result};
use crate::flux::CflConfig;
use crate::num::Real;
use crate::sources::{FrictionLaw, GreenAmptParams, RainForcing};
use crate::state::{GridGeometry, PhysicalConstants, DEFAULT_H_EPS};

/// Default upper bound on the time step [s].
pub const DEFAULT_DT_MAX: f64 = 1.0;

/// Default depth above which a gauge counts the flood as arrived [m].
pub const DEFAULT_ARRIVAL_THRESHOLD: f64 = 1e-3;

/// Bottom friction: a law, optionally with a per-cell coefficient raster
/// replacing the law's scalar value.
#[derive(Debug, Clone, PartialEq)]
pub struct Friction<T> {
    pub law: FrictionLaw<T>,
    pub raster: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Infiltration<T> {
    pub params: GreenAmptParams<T>,
    /// Infiltrated volume per unit area at `t = 0` [m].
    pub initial_volume: T,
}

/// Everything that defines the physical problem: grid, bed, initial state,
/// boundaries and forcing. Rasters are row-major with `j = 0` the southern
/// row.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub geometry: GridGeometry<T>,
    pub z: Vec<T>,
    pub h: Vec<T>,
    pub qx: Vec<T>,
    pub qy: Vec<T>,
    pub boundaries: BoundarySet<T>,
    pub friction: Option<Friction<T>>,
    pub rain: RainForcing<T>,
    pub infiltration: Option<Infiltration<T>>,
    pub constants: PhysicalConstants<T>,
    pub h_eps: T,
    pub dt_max: T,
}

impl<T: Real> Scenario<T> {
    /// Still water of depth `h` over a flat bed, closed by walls.
    pub fn still(geometry: GridGeometry<T>, h: T) -> Self {
        let n = geometry.cells();
        Self {
            geometry,
            z: vec![T::zero(); n],
            h: vec![h; n],
            qx: vec![T::zero(); n],
            qy: vec![T::zero(); n],
            boundaries: BoundarySet::walls(),
            friction: None,
            rain: RainForcing::None,
            infiltration: None,
            constants: PhysicalConstants::default(),
            h_eps: T::lit(DEFAULT_H_EPS),
            dt_max: T::lit(DEFAULT_DT_MAX),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.geometry.cells();
        for (name, v) in [("z", &self.z), ("h", &self.h), ("qx", &self.qx), ("qy", &self.qy)] {
            if v.len() != n {
                return Err(Error::Invalid(format!("{name} raster has {} cells, grid has {n}", v.len())));
            }
            if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!(
                    "{name} is not finite at cell ({}, {})",
                    k % self.geometry.nx,
                    k / self.geometry.nx
                )));
            }
        }
        for k in 0..n {
            let (i, j) = (k % self.geometry.nx, k / self.geometry.nx);
            if self.h[k] < T::zero() {
                return Err(Error::Invalid(format!("initial depth is negative at cell ({i}, {j})")));
            }
            if self.h[k] == T::zero() && (self.qx[k] != T::zero() || self.qy[k] != T::zero()) {
                return Err(Error::Invalid(format!("dry cell ({i}, {j}) carries a discharge")));
            }
        }
        if !(self.h_eps >= T::zero()) {
            return Err(Error::Invalid("dry threshold must be non-negative".into()));
        }
        if !(self.dt_max > T::zero()) {
            return Err(Error::Invalid("dt_max must be positive".into()));
        }
        PhysicalConstants::new(self.constants.g)?;
        self.boundaries.validate()?;
        self.rain.validate(n)?;
        if let Some(f) = &self.friction {
            crate::sources::friction_coefficient(f.law, self.constants.g)?;
            if let Some(r) = &f.raster {
                if r.len() != n {
                    return Err(Error::Invalid(format!("friction raster has {} cells, grid has {n}", r.len())));
                }
                for &v in r {
                    crate::sources::friction_coefficient(f.law.with_value(v), self.constants.g)?;
                }
            }
        }
        if let Some(inf) = &self.infiltration {
            inf.params.validate()?;
            if !(inf.initial_volume >= T::zero()) {
                return Err(Error::Invalid("initial infiltrated volume must be non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gauge<T> {
    pub name: String,
    pub x: T,
    pub y: T,
}

/// How to advance a scenario: duration, scheme order, outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan<T> {
    pub t_end: T,
    /// 1 (first order, Euler) or 2 (MUSCL + Heun).
    pub order: u8,
    pub cfl: CflConfig<T>,
    pub snapshot_times: Vec<T>,
    pub gauges: Vec<Gauge<T>>,
    /// Record a gauge sample every this many steps (the first and last step
    /// are always recorded).
    pub gauge_stride: usize,
    pub arrival_threshold: T,
    /// Run exactly this many steps, ignoring `t_end`.
    pub fixed_steps: Option<usize>,
    pub workers: usize,
}

impl<T: Real> RunPlan<T> {
    pub fn new(t_end: T, order: u8) -> Self {
        Self {
            t_end,
            order,
            cfl: CflConfig::for_order(order),
            snapshot_times: Vec::new(),
            gauges: Vec::new(),
            gauge_stride: 1,
            arrival_threshold: T::lit(DEFAULT_ARRIVAL_THRESHOLD),
            fixed_steps: None,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn ghost_width(&self) -> usize {
        if self.order >= 2 {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.order == 1 || self.order == 2) {
            return Err(Error::Invalid(format!("scheme order must be 1 or 2 (got {})", self.order)));
        }
        if !(self.t_end >= T::zero() && self.t_end.is_finite()) {
            return Err(Error::Invalid(format!("t_end must be finite and non-negative (got {})", self.t_end)));
        }
        CflConfig::new(self.cfl.n_cfl)?;
        if self.workers == 0 {
            return Err(Error::Invalid("at least one worker is required".into()));
        }
        if self.gauge_stride == 0 {
            return Err(Error::Invalid("gauge stride must be at least 1".into()));
        }
        if self.snapshot_times.iter().any(|t| !(*t >= T::zero())) {
            return Err(Error::Invalid("snapshot times must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeSample<T> {
    pub t: T,
    pub h: T,
    pub u: T,
    pub v: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeRecord<T> {
    pub name: String,
    pub x: T,
    pub y: T,
    /// The sampled cell.
    pub cell: (usize, usize),
    pub samples: Vec<GaugeSample<T>>,
    /// Highest free-surface level `h + z` seen at any step.
    pub max_level: T,
    /// First time the depth exceeded the arrival threshold.
    pub arrival_time: Option<T>,
}

/// Gathered state at one scheduled output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub t: T,
    pub h: Vec<T>,
    pub qx: Vec<T>,
    pub qy: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport<T> {
    pub geometry: GridGeometry<T>,
    pub t: T,
    pub steps: usize,
    pub h: Vec<T>,
    pub qx: Vec<T>,
    pub qy: Vec<T>,
    pub z: Vec<T>,
    pub v_inf: Option<Vec<T>>,
    pub initial_volume: T,
    pub final_volume: T,
    pub rain_volume: T,
    pub infiltrated_volume: T,
    /// Net volume that left through open boundaries; inflow counts negative.
    pub outflow_volume: T,
    /// Smallest depth produced by any stage.
    pub min_depth: T,
    pub gauges: Vec<GaugeRecord<T>>,
    pub snapshots: Vec<Snapshot<T>>,
    pub workers: usize,
    /// Communication counters of the root worker.
    pub comm: CommStats,
}

impl<T: Real> SimulationReport<T> {
    /// `final - initial - rain + infiltrated + outflow`.
    pub fn mass_balance_error(&self) -> T {
        self.final_volume - self.initial_volume - self.rain_volume + self.infiltrated_volume + self.outflow_volume
    }

    /// Mass-balance error relative to the largest volume in the budget.
    pub fn relative_mass_error(&self) -> T {
        let scale = self
            .initial_volume
            .abs()
            .max(self.final_volume.abs())
            .max(self.rain_volume.abs())
            .max(self.infiltrated_volume.abs())
            .max(self.outflow_volume.abs());
        if scale == T::zero() {
            T::zero()
        } else {
            self.mass_balance_error().abs() / scale
        }
    }
}

/// The Heun average of two stage values.
#[inline]
pub fn heun_mean<T: Real>(a: T, b: T) -> T {
    (a + b) * T::half()
}

/// Values that can be averaged componentwise by the Heun step.
pub trait HeunState: Sized {
    fn heun_average(&self, other: &Self) -> Self;
}

impl<T: Real> HeunState for T {
    fn heun_average(&self, other: &Self) -> Self {
        heun_mean(*self, *other)
    }
}

impl<T: Real> HeunState for Vec<T> {
    fn heun_average(&self, other: &Self) -> Self {
        self.iter().zip(other).map(|(&a, &b)| heun_mean(a, b)).collect()
    }
}

impl<T: Real> HeunState for crate::state::ConservedState<T> {
    fn heun_average(&self, other: &Self) -> Self {
        Self {
            h: heun_mean(self.h, other.h),
            hu: heun_mean(self.hu, other.hu),
            hv: heun_mean(self.hv, other.hv),
        }
    }
}

/// `U^{n+1} = (U^n + Φ(Φ(U^n))) / 2` for a stage function with a frozen
/// step.
pub fn heun_step<V, E>(u: &V, mut stage: impl FnMut(&V) -> Result<V, E>) -> Result<V, E>
where
    V: HeunState,
{
    let u1 = stage(u)?;
    let u2 = stage(&u1)?;
    Ok(u.heun_average(&u2))
}

/// Total head `u²/(2g) + h + z`.
pub fn bernoulli_head<T: Real>(h: T, u: T, z: T, g: T) -> Result<T> {
    if h <= T::zero() {
        return Err(Error::DryCell);
    }
    Ok(u * u / (T::two() * g) + h + z)
}

/// Advances `scenario` according to `plan` on `plan.workers` workers and
/// returns the gathered results.
pub fn run_simulation<T: Real>(scenario: &Scenario<T>, plan: &RunPlan<T>) -> Result<SimulationReport<T>> {
    scenario.validate()?;
    plan.validate()?;
    let geom = &scenario.geometry;
    let topology = decompose(
        plan.workers,
        geom.nx,
        geom.ny,
        plan.ghost_width(),
        scenario.boundaries.periodic(),
    )?;
    let exec = Executor::new(topology);
    let results = exec.run(|w| worker::run(w, scenario, plan));
    let mut root = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(Some(report)) => root = Some(report),
            Ok(None) => {}
            Err(Error::PeerAborted) => {
                first_err.get_or_insert(Error::PeerAborted);
            }
            Err(e) => {
                if matches!(first_err, None | Some(Error::PeerAborted)) {
                    first_err = Some(e);
                }
            }
        }
    }
    match (first_err, root) {
        (Some(e), _) => Err(e),
        (None, Some(r)) => Ok(r),
        (None, None) => unreachable!("the root worker always reports"),
    }
}
