//! Physical and HLL numerical fluxes, the topography source terms of the
//! well-balanced scheme, and the CFL time step.

use thiserror::Error;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::state::{velocity, wave_speeds, GridGeometry, PrimitiveState, WaveSpeeds};

/// A 1D flux: mass and normal momentum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FluxVector<T> {
    pub mass: T,
    pub momentum: T,
}

/// A 2D interface flux, with the transverse momentum advected by the mass
/// flux.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Flux2<T> {
    pub mass: T,
    pub normal: T,
    pub transverse: T,
}

/// Momentum corrections added to the interface flux on each side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InterfaceSourceCorrections<T> {
    pub s_left: T,
    pub s_right: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflConfig<T> {
    pub n_cfl: T,
}

impl<T: Real> CflConfig<T> {
    pub fn new(n_cfl: T) -> Result<Self> {
        if n_cfl > T::zero() && n_cfl <= T::one() {
            Ok(Self { n_cfl })
        } else {
            Err(Error::Invalid(format!("CFL number must lie in (0, 1] (got {n_cfl})")))
        }
    }

    /// 1 at first order, 0.5 at second order.
    pub fn for_order(order: u8) -> Self {
        Self {
            n_cfl: if order >= 2 { T::half() } else { T::one() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("every cell is dry; no wave speed bounds the time step")]
pub struct AllDryDomain;

/// `F(U)` from primitive face values; pass `u = 0` for a dry face.
#[inline]
pub fn flux_from_primitive<T: Real>(h: T, u: T, g: T) -> FluxVector<T> {
    let q = h * u;
    FluxVector {
        mass: q,
        momentum: q * u + g * h * h * T::half(),
    }
}

pub fn physical_flux<T: Real>(h: T, q: T, g: T, h_eps: T) -> FluxVector<T> {
    flux_from_primitive(h, velocity(h, q, h_eps), g)
}

/// Slowest and fastest signal speeds over both states.
#[inline]
pub fn wave_speed_estimates<T: Real>(h_l: T, u_l: T, h_r: T, u_r: T, g: T) -> WaveSpeeds<T> {
    let l = wave_speeds(h_l, u_l, g);
    let r = wave_speeds(h_r, u_r, g);
    WaveSpeeds {
        lambda1: l.lambda1.min(r.lambda1),
        lambda2: l.lambda2.max(r.lambda2),
    }
}

/// HLL flux from primitive face values (velocities already zero on dry
/// faces).
#[inline]
pub fn hll_primitive<T: Real>(h_l: T, u_l: T, h_r: T, u_r: T, g: T) -> FluxVector<T> {
    let WaveSpeeds { lambda1: c1, lambda2: c2 } = wave_speed_estimates(h_l, u_l, h_r, u_r, g);
    if c1 == c2 && c1 == T::zero() {
        return FluxVector::default();
    }
    let fl = flux_from_primitive(h_l, u_l, g);
    if c1 >= T::zero() {
        return fl;
    }
    let fr = flux_from_primitive(h_r, u_r, g);
    if c2 <= T::zero() {
        return fr;
    }
    // F_L - c1 (dF - c2 dU) / (c2 - c1): exact when both states agree.
    let w = c1 / (c2 - c1);
    let dm = (fr.mass - fl.mass) - c2 * (h_r - h_l);
    let dq = (fr.momentum - fl.momentum) - c2 * (h_r * u_r - h_l * u_l);
    FluxVector {
        mass: fl.mass - w * dm,
        momentum: fl.momentum - w * dq,
    }
}

/// HLL flux between conserved 1D states `(h, q)`.
pub fn hll_flux<T: Real>(h_l: T, q_l: T, h_r: T, q_r: T, g: T, h_eps: T) -> FluxVector<T> {
    hll_primitive(h_l, velocity(h_l, q_l, h_eps), h_r, velocity(h_r, q_r, h_eps), g)
}

/// 2D interface flux: HLL on `(h, h u_n)` and upwind transport of the
/// transverse velocity by the sign of the mass flux.
#[inline]
pub fn hll_flux_2d<T: Real>(left: PrimitiveState<T>, right: PrimitiveState<T>, g: T) -> Flux2<T> {
    let f = hll_primitive(left.h, left.u, right.h, right.u, g);
    let vt = if f.mass >= T::zero() { left.v } else { right.v };
    Flux2 {
        mass: f.mass,
        normal: f.momentum,
        transverse: f.mass * vt,
    }
}

/// `S_L = g(h_-² - h_L²)/2`, `S_R = g(h_+² - h_R²)/2`.
#[inline]
pub fn interface_source_corrections<T: Real>(h_minus: T, h_l: T, h_plus: T, h_r: T, g: T) -> InterfaceSourceCorrections<T> {
    let half_g = g * T::half();
    InterfaceSourceCorrections {
        s_left: half_g * (h_minus * h_minus - h_l * h_l),
        s_right: half_g * (h_plus * h_plus - h_r * h_r),
    }
}

/// Centered bed-slope term of a cell from its face depths and beds.
#[inline]
pub fn centered_source<T: Real>(h_lo: T, h_hi: T, z_lo: T, z_hi: T, g: T) -> FluxVector<T> {
    FluxVector {
        mass: T::zero(),
        momentum: -g * (h_lo + h_hi) * T::half() * (z_hi - z_lo),
    }
}

/// Running maximum of `|u| + √(gh)` per direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpeedBound<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> SpeedBound<T> {
    #[inline]
    pub fn add_x(&mut self, h: T, u: T, g: T) {
        self.x = self.x.max(u.abs() + (g * h).sqrt());
    }

    #[inline]
    pub fn add_y(&mut self, h: T, v: T, g: T) {
        self.y = self.y.max(v.abs() + (g * h).sqrt());
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            x: self.x.max(other.x),
            y: self.y.max(other.y),
        }
    }

    /// `n_cfl · min(dx / max_x, dy / max_y)`, ignoring directions with no
    /// signal.
    pub fn timestep(&self, dx: T, dy: T, cfl: CflConfig<T>) -> Result<T, AllDryDomain> {
        let zero = T::zero();
        let tx = (self.x > zero).then(|| dx / self.x);
        let ty = (self.y > zero).then(|| dy / self.y);
        let t = match (tx, ty) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => return Err(AllDryDomain),
        };
        Ok(cfl.n_cfl * t)
    }
}

/// CFL time step over cell values (first order) or reconstructed face
/// values (second order).
pub fn cfl_timestep<T: Real>(
    cells: impl IntoIterator<Item = PrimitiveState<T>>,
    geom: &GridGeometry<T>,
    cfl: CflConfig<T>,
    g: T,
) -> Result<T, AllDryDomain> {
    let mut b = SpeedBound::default();
    for c in cells {
        b.add_x(c.h, c.u, g);
        b.add_y(c.h, c.v, g);
    }
    b.timestep(geom.dx, geom.dy, cfl)
}
