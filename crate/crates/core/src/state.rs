//! Grid geometry, conserved and primitive states, and the characteristic
//! analysis of the 1D shallow-water system.

use crate::error::{Error, Result};
use crate::num::Real;

/// Default depth below which a cell is treated as dry [m].
pub const DEFAULT_H_EPS: f64 = 1e-12;

/// Default gravity [m/s²].
pub const DEFAULT_GRAVITY: f64 = 9.81;

/// A uniform Cartesian grid of `nx` x `ny` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry<T> {
    pub nx: usize,
    pub ny: usize,
    pub dx: T,
    pub dy: T,
    /// Lower-left corner of the domain [m].
    pub x0: T,
    pub y0: T,
}

impl<T: Real> GridGeometry<T> {
    pub fn new(nx: usize, ny: usize, dx: T, dy: T) -> Result<Self> {
        Self::with_origin(nx, ny, dx, dy, T::zero(), T::zero())
    }

    pub fn with_origin(nx: usize, ny: usize, dx: T, dy: T, x0: T, y0: T) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Invalid(format!("grid must have at least one cell (got {nx}x{ny})")));
        }
        if !(dx > T::zero() && dy > T::zero()) {
            return Err(Error::Invalid(format!("cell sizes must be positive (got dx={dx}, dy={dy})")));
        }
        Ok(Self { nx, ny, dx, dy, x0, y0 })
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_area(&self) -> T {
        self.dx * self.dy
    }

    /// Center of cell `(i, j)`.
    pub fn center(&self, i: usize, j: usize) -> (T, T) {
        let half = T::half();
        (
            self.x0 + (T::lit(i as f64) + half) * self.dx,
            self.y0 + (T::lit(j as f64) + half) * self.dy,
        )
    }

    /// The cell containing point `(x, y)`, if inside the domain.
    pub fn locate(&self, x: T, y: T) -> Option<(usize, usize)> {
        let fi = ((x - self.x0) / self.dx).floor();
        let fj = ((y - self.y0) / self.dy).floor();
        if fi < T::zero() || fj < T::zero() {
            return None;
        }
        let (i, j) = (fi.to_usize()?, fj.to_usize()?);
        (i < self.nx && j < self.ny).then_some((i, j))
    }
}

/// Cell-averaged unknowns: water depth and unit-width discharges.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservedState<T> {
    pub h: T,
    pub hu: T,
    pub hv: T,
}

/// Depth and depth-averaged velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrimitiveState<T> {
    pub h: T,
    pub u: T,
    pub v: T,
}

impl<T: Real> ConservedState<T> {
    pub fn new(h: T, hu: T, hv: T) -> Self {
        Self { h, hu, hv }
    }

    pub fn to_primitive(self, h_eps: T) -> PrimitiveState<T> {
        to_primitive(self, h_eps)
    }
}

impl<T: Real> PrimitiveState<T> {
    pub fn new(h: T, u: T, v: T) -> Self {
        Self { h, u, v }
    }

    pub fn to_conserved(self) -> ConservedState<T> {
        ConservedState {
            h: self.h,
            hu: self.h * self.u,
            hv: self.h * self.v,
        }
    }
}

/// Velocities are discharge / depth on wet cells and zero at or below
/// `h_eps`.
pub fn to_primitive<T: Real>(s: ConservedState<T>, h_eps: T) -> PrimitiveState<T> {
    if s.h > h_eps {
        PrimitiveState {
            h: s.h,
            u: s.hu / s.h,
            v: s.hv / s.h,
        }
    } else {
        PrimitiveState {
            h: s.h,
            u: T::zero(),
            v: T::zero(),
        }
    }
}

/// Velocity with the same dry-cell guard as [`to_primitive`].
#[inline]
pub fn velocity<T: Real>(h: T, q: T, h_eps: T) -> T {
    if h > h_eps {
        q / h
    } else {
        T::zero()
    }
}

/// Bed elevation, one value per cell, row-major. Fixed for the whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct Topography<T> {
    geom: GridGeometry<T>,
    z: Vec<T>,
}

impl<T: Real> Topography<T> {
    pub fn new(geom: GridGeometry<T>, z: Vec<T>) -> Result<Self> {
        if z.len() != geom.cells() {
            return Err(Error::Invalid(format!(
                "topography has {} values for a {}x{} grid",
                z.len(),
                geom.nx,
                geom.ny
            )));
        }
        if let Some(k) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "topography is not finite at cell ({}, {})",
                k % geom.nx,
                k / geom.nx
            )));
        }
        Ok(Self { geom, z })
    }

    pub fn flat(geom: GridGeometry<T>) -> Self {
        Self {
            z: vec![T::zero(); geom.cells()],
            geom,
        }
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geom
    }

    pub fn values(&self) -> &[T] {
        &self.z
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.z[j * self.geom.nx + i]
    }
}

/// Characteristic speeds `u ∓ √(gh)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpeeds<T> {
    pub lambda1: T,
    pub lambda2: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    pub g: T,
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self {
            g: T::lit(DEFAULT_GRAVITY),
        }
    }
}

impl<T: Real> PhysicalConstants<T> {
    pub fn new(g: T) -> Result<Self> {
        if g > T::zero() && g.is_finite() {
            Ok(Self { g })
        } else {
            Err(Error::Invalid(format!("gravity must be positive (got {g})")))
        }
    }
}

pub fn wave_speeds<T: Real>(h: T, u: T, g: T) -> WaveSpeeds<T> {
    let c = (g * h).sqrt();
    WaveSpeeds {
        lambda1: u - c,
        lambda2: u + c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowRegime {
    Subcritical,
    Supercritical,
    Critical,
    Dry,
}

/// Classifies the flow by comparing `|u|` with the gravity-wave speed.
pub fn flow_regime<T: Real>(h: T, u: T, g: T) -> FlowRegime {
    if h <= T::zero() {
        return FlowRegime::Dry;
    }
    let c = (g * h).sqrt();
    let a = u.abs();
    if a < c {
        FlowRegime::Subcritical
    } else if a > c {
        FlowRegime::Supercritical
    } else {
        FlowRegime::Critical
    }
}

/// Water volume `Σ h·dx·dy`, summed row-major.
pub fn total_volume<T: Real>(h: &[T], geom: &GridGeometry<T>) -> T {
    let mut sum = T::zero();
    for &v in h {
        sum += v;
    }
    sum * geom.cell_area()
}
