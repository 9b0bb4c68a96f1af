//! MUSCL reconstruction with the minmod limiter, the discharge-conserving
//! velocity reconstruction, and the hydrostatic reconstruction at an
//! interface.

use crate::num::Real;

/// Values on both sides of the interface `i+1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InterfacePair<T> {
    /// Value at `i+1/2-`, reconstructed from cell `i`.
    pub left_minus: T,
    /// Value at `i+1/2+`, reconstructed from cell `i+1`.
    pub right_plus: T,
}

/// The two face values of one cell: `lo` at `i-1/2+`, `hi` at `i+1/2-`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellFaces<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> CellFaces<T> {
    pub fn constant(s: T) -> Self {
        Self { lo: s, hi: s }
    }

    pub fn mean(&self) -> T {
        (self.lo + self.hi) * T::half()
    }
}

/// Interface states after the hydrostatic reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HydrostaticFaceStates<T> {
    pub h_l: T,
    pub h_r: T,
    /// Discharges `h_L u_-` and `h_R u_+`.
    pub q_l: T,
    pub q_r: T,
    /// `max(z_-, z_+)`.
    pub z_star: T,
}

#[inline]
pub fn minmod<T: Real>(x: T, y: T) -> T {
    if x >= T::zero() && y >= T::zero() {
        x.min(y)
    } else if x <= T::zero() && y <= T::zero() {
        x.max(y)
    } else {
        T::zero()
    }
}

/// Limited slope of cell `i` from its two neighbors.
#[inline]
pub fn muscl_slope<T: Real>(s_prev: T, s_i: T, s_next: T, dx: T) -> T {
    minmod((s_i - s_prev) / dx, (s_next - s_i) / dx)
}

#[inline]
pub fn reconstruct_scalar<T: Real>(s_i: T, ds_i: T, dx: T) -> CellFaces<T> {
    let d = dx * T::half() * ds_i;
    CellFaces {
        lo: s_i - d,
        hi: s_i + d,
    }
}

/// Velocity faces chosen so that the face discharges average to `h_i u_i`.
/// Dry cells keep the cell velocity on both faces.
#[inline]
pub fn reconstruct_velocity<T: Real>(u_i: T, du_i: T, h_i: T, h_faces: CellFaces<T>, dx: T, h_eps: T) -> CellFaces<T> {
    if h_i <= h_eps {
        return CellFaces::constant(u_i);
    }
    let d = dx * T::half() * du_i;
    CellFaces {
        lo: u_i - h_faces.hi / h_i * d,
        hi: u_i + h_faces.lo / h_i * d,
    }
}

/// Hydrostatic reconstruction of the interface between a left face
/// `(h_minus, z_minus, u_minus)` and a right face `(h_plus, z_plus, u_plus)`.
#[inline]
pub fn hydrostatic_reconstruct<T: Real>(
    h_minus: T,
    z_minus: T,
    h_plus: T,
    z_plus: T,
    u_minus: T,
    u_plus: T,
) -> HydrostaticFaceStates<T> {
    let z_star = z_minus.max(z_plus);
    // Grouping the bed difference first keeps h exact on the higher side.
    let h_l = (h_minus + (z_minus - z_star)).max(T::zero());
    let h_r = (h_plus + (z_plus - z_star)).max(T::zero());
    HydrostaticFaceStates {
        h_l,
        h_r,
        q_l: h_l * u_minus,
        q_r: h_r * u_plus,
        z_star,
    }
}

/// Face values of one cell for a single sweep direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReconstructedCell<T> {
    pub h: CellFaces<T>,
    pub z: CellFaces<T>,
    /// Velocity normal to the sweep faces.
    pub un: CellFaces<T>,
    /// Velocity along the faces.
    pub ut: CellFaces<T>,
}

/// A three-cell stencil `[prev, cell, next]` of depth, bed and the two
/// velocity components, all in sweep orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stencil3<T> {
    pub h: [T; 3],
    pub z: [T; 3],
    pub un: [T; 3],
    pub ut: [T; 3],
}

/// Second-order reconstruction of the center cell: MUSCL on `h`, `h + z`
/// and both velocities, with `z` recovered from the free surface.
pub fn reconstruct_cell<T: Real>(s: &Stencil3<T>, dx: T, h_eps: T) -> ReconstructedCell<T> {
    let [h0, h1, h2] = s.h;
    let eta = [h0 + s.z[0], h1 + s.z[1], h2 + s.z[2]];
    let h = reconstruct_scalar(h1, muscl_slope(h0, h1, h2, dx), dx);
    let e = reconstruct_scalar(eta[1], muscl_slope(eta[0], eta[1], eta[2], dx), dx);
    let z = CellFaces {
        lo: e.lo - h.lo,
        hi: e.hi - h.hi,
    };
    let un = reconstruct_velocity(s.un[1], muscl_slope(s.un[0], s.un[1], s.un[2], dx), h1, h, dx, h_eps);
    let ut = reconstruct_velocity(s.ut[1], muscl_slope(s.ut[0], s.ut[1], s.ut[2], dx), h1, h, dx, h_eps);
    ReconstructedCell { h, z, un, ut }
}

/// First-order reconstruction: every face carries the cell value.
pub fn constant_cell<T: Real>(h: T, z: T, un: T, ut: T) -> ReconstructedCell<T> {
    ReconstructedCell {
        h: CellFaces::constant(h),
        z: CellFaces::constant(z),
        un: CellFaces::constant(un),
        ut: CellFaces::constant(ut),
    }
}
