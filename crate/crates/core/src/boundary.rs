//! Ghost-cell filling on the physical faces of a block.
//!
//! Inter-block faces and periodic wraps are supplied by the halo exchange;
//! this module only writes ghost layers on faces with no neighbor. The
//! first ghost layer is computed from the adjacent interior cell and every
//! further layer repeats it.

use overland_skel::{BlockLayout, DMatrix, Side};
use thiserror::Error;

use crate::num::Real;
use crate::state::{flow_regime, velocity, FlowRegime};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition<T> {
    Wall,
    Periodic,
    FreeOutflow,
    /// Imposed depth [m]; the discharge follows from the outgoing
    /// characteristic.
    ImposedHeight(T),
    /// Imposed inflow discharge [m²/s], positive into the domain; the depth
    /// follows from the outgoing characteristic.
    ImposedDischarge(T),
    /// Depth and inflow discharge both imposed, for supercritical inflow.
    ImposedState { h: T, q: T },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundaryError {
    #[error("periodic boundary on the {0:?} side needs a periodic boundary on the opposite side")]
    InconsistentPeriodic(Side),
    #[error("imposed {what} on the {side:?} side is negative or non-finite")]
    InvalidValue { side: Side, what: &'static str },
    #[error(
        "supercritical inflow on the {side:?} side (h = {h}, u_n = {un}) needs both depth and discharge imposed"
    )]
    SupercriticalInflowUnderconstrained { side: Side, h: f64, un: f64 },
}

/// One condition per side, indexed W, E, S, N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySet<T> {
    pub sides: [BoundaryCondition<T>; 4],
}

impl<T: Real> BoundarySet<T> {
    pub fn uniform(bc: BoundaryCondition<T>) -> Self {
        Self { sides: [bc; 4] }
    }

    pub fn walls() -> Self {
        Self::uniform(BoundaryCondition::Wall)
    }

    pub fn get(&self, side: Side) -> BoundaryCondition<T> {
        self.sides[side.index()]
    }

    pub fn set(&mut self, side: Side, bc: BoundaryCondition<T>) {
        self.sides[side.index()] = bc;
    }

    /// Periodicity along x and y.
    pub fn periodic(&self) -> (bool, bool) {
        (
            self.get(Side::West) == BoundaryCondition::Periodic,
            self.get(Side::South) == BoundaryCondition::Periodic,
        )
    }

    pub fn validate(&self) -> Result<(), BoundaryError> {
        for side in Side::ALL {
            let bc = self.get(side);
            let p = bc == BoundaryCondition::Periodic;
            if p != (self.get(side.opposite()) == BoundaryCondition::Periodic) {
                return Err(BoundaryError::InconsistentPeriodic(if p { side } else { side.opposite() }));
            }
            let ok = |v: T| v.is_finite();
            let bad = match bc {
                BoundaryCondition::ImposedHeight(h) => (!(ok(h) && h >= T::zero())).then_some("depth"),
                BoundaryCondition::ImposedDischarge(q) => (!ok(q)).then_some("discharge"),
                BoundaryCondition::ImposedState { h, q } => {
                    if !(ok(h) && h >= T::zero()) {
                        Some("depth")
                    } else if !ok(q) {
                        Some("discharge")
                    } else {
                        None
                    }
                }
                _ => None,
            };
            if let Some(what) = bad {
                return Err(BoundaryError::InvalidValue { side, what });
            }
        }
        Ok(())
    }
}

/// A boundary-adjacent state in side orientation: `qn` is the discharge
/// along the outward normal, `qt` the tangential discharge.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GhostState<T> {
    pub h: T,
    pub qn: T,
    pub qt: T,
}

/// Sign that turns the x (or y) discharge into the outward normal one.
fn outward_sign<T: Real>(side: Side) -> T {
    match side {
        Side::West | Side::South => -T::one(),
        Side::East | Side::North => T::one(),
    }
}

/// Finds `c` in `[lo, hi]` with `c²/g (r - 2c) = qn` by bisection; `f` is
/// monotone on the bracket.
fn solve_celerity<T: Real>(r: T, qn: T, g: T, lo: T, hi: T) -> T {
    let f = |c: T| c * c / g * (r - T::two() * c) - qn;
    let (mut a, mut b) = (lo, hi);
    let fa_pos = f(a) > T::zero();
    for _ in 0..200 {
        let m = (a + b) * T::half();
        if m <= a || m >= b {
            break;
        }
        if (f(m) > T::zero()) == fa_pos {
            a = m;
        } else {
            b = m;
        }
    }
    (a + b) * T::half()
}

/// The ghost state outside `side` given the adjacent interior state.
pub fn ghost_state<T: Real>(
    bc: BoundaryCondition<T>,
    side: Side,
    interior: GhostState<T>,
    g: T,
    h_eps: T,
) -> Result<GhostState<T>, BoundaryError> {
    let GhostState { h, qn, qt } = interior;
    match bc {
        BoundaryCondition::Wall => Ok(GhostState { h, qn: -qn, qt }),
        BoundaryCondition::FreeOutflow | BoundaryCondition::Periodic => Ok(interior),
        BoundaryCondition::ImposedState { h: hb, q } => {
            let ut = velocity(h, qt, h_eps);
            Ok(GhostState {
                h: hb,
                qn: -q,
                qt: hb * ut,
            })
        }
        BoundaryCondition::ImposedHeight(_) | BoundaryCondition::ImposedDischarge(_) => {
            let un = velocity(h, qn, h_eps);
            let ut = velocity(h, qt, h_eps);
            match flow_regime(h, un, g) {
                FlowRegime::Supercritical if un > T::zero() => return Ok(interior),
                FlowRegime::Supercritical => {
                    return Err(BoundaryError::SupercriticalInflowUnderconstrained {
                        side,
                        h: h.to_f64_lossy(),
                        un: un.to_f64_lossy(),
                    })
                }
                _ => {}
            }
            // outgoing Riemann invariant u_n + 2c carried from the interior
            let r = un + T::two() * (g * h).sqrt();
            let (hb, unb) = match bc {
                BoundaryCondition::ImposedHeight(hb) => (hb, r - T::two() * (g * hb).sqrt()),
                BoundaryCondition::ImposedDischarge(q_in) => {
                    let qn_b = -q_in;
                    if h <= h_eps {
                        // nothing to carry out of a dry cell: critical inflow
                        if qn_b >= T::zero() {
                            (T::zero(), T::zero())
                        } else {
                            let hc = (qn_b * qn_b / g).cbrt();
                            (hc, qn_b / hc)
                        }
                    } else {
                        // subcritical root: c in [r/3, r/2] for outflow and
                        // [r/2, r] for inflow, clamped to critical flow
                        let (lo, hi) = if qn_b >= T::zero() {
                            (r / T::lit(3.0), r * T::half())
                        } else {
                            (r * T::half(), r)
                        };
                        let c = solve_celerity(r, qn_b, g, lo, hi);
                        let hb = c * c / g;
                        if hb <= h_eps {
                            (T::zero(), T::zero())
                        } else {
                            (hb, qn_b / hb)
                        }
                    }
                }
                _ => unreachable!(),
            };
            Ok(GhostState {
                h: hb,
                qn: hb * unb,
                qt: hb * ut,
            })
        }
    }
}

/// Interior cell mirrored into ghost layer `layer` (1-based) along
/// `side`, `k` cells along the face. Walls reflect (layer `l` mirrors
/// interior cell `l - 1`); every other condition repeats the edge cell.
fn ghost_source(side: Side, reflect: bool, k: isize, layer: isize, nx: isize, ny: isize) -> ((isize, isize), (isize, isize)) {
    let depth = if side.is_x() { nx } else { ny };
    let d = if reflect { (layer - 1).min(depth - 1) } else { 0 };
    match side {
        Side::West => ((d, k), (-layer, k)),
        Side::East => ((nx - 1 - d, k), (nx - 1 + layer, k)),
        Side::South => ((k, d), (k, -layer)),
        Side::North => ((k, ny - 1 - d), (k, ny - 1 + layer)),
    }
}

/// Fills the ghost layers of `(h, hu, hv)` on every physical face of the
/// block.
pub fn fill_ghost_cells<T: Real>(
    h: &mut DMatrix<T>,
    hu: &mut DMatrix<T>,
    hv: &mut DMatrix<T>,
    bcs: &BoundarySet<T>,
    g: T,
    h_eps: T,
) -> Result<(), BoundaryError> {
    let layout: BlockLayout = h.layout().clone();
    let (nx, ny) = (layout.nx() as isize, layout.ny() as isize);
    let gw = layout.ghost as isize;
    for side in Side::ALL {
        if !layout.is_physical(side) {
            continue;
        }
        let bc = bcs.get(side);
        let reflect = bc == BoundaryCondition::Wall;
        let s: T = outward_sign(side);
        let along = if side.is_x() { ny } else { nx };
        for k in 0..along {
            let mut first = None;
            for layer in 1..=gw {
                let ((ii, jj), (gi, gj)) = ghost_source(side, reflect, k, layer, nx, ny);
                let gs = match first {
                    Some(gs) if !reflect => gs,
                    _ => {
                        let (qx, qy) = (hu.get(ii, jj), hv.get(ii, jj));
                        let (qn, qt) = if side.is_x() { (s * qx, qy) } else { (s * qy, qx) };
                        let gs = ghost_state(bc, side, GhostState { h: h.get(ii, jj), qn, qt }, g, h_eps)?;
                        first = Some(gs);
                        gs
                    }
                };
                let (gx, gy) = if side.is_x() { (s * gs.qn, gs.qt) } else { (gs.qt, s * gs.qn) };
                h.set(gi, gj, gs.h);
                hu.set(gi, gj, gx);
                hv.set(gi, gj, gy);
            }
        }
    }
    Ok(())
}

/// Fills the bed in every physical ghost layer: mirrored behind walls,
/// the adjacent interior value elsewhere.
pub fn fill_topography_ghosts<T: Real>(z: &mut DMatrix<T>, bcs: &BoundarySet<T>) {
    let layout = z.layout().clone();
    let (nx, ny) = (layout.nx() as isize, layout.ny() as isize);
    let gw = layout.ghost as isize;
    for side in Side::ALL {
        if !layout.is_physical(side) {
            continue;
        }
        let reflect = bcs.get(side) == BoundaryCondition::Wall;
        let along = if side.is_x() { ny } else { nx };
        for k in 0..along {
            for layer in 1..=gw {
                let (src, dst) = ghost_source(side, reflect, k, layer, nx, ny);
                let v = z.get(src.0, src.1);
                z.set(dst.0, dst.1, v);
            }
        }
    }
}
