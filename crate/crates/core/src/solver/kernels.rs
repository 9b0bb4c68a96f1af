//! Whole-block kernels of one Euler stage. Every kernel sees local blocks
//! only and walks them with flat offsets; all matrices of a worker share
//! the same layout, so one offset addresses the same cell in each.

use overland_skel::{DMatrix, Side};

use crate::error::{Error, Result};
use crate::flux::{centered_source, hll_flux_2d, interface_source_corrections, SpeedBound};
use crate::num::Real;
use crate::reconstruction::{constant_cell, hydrostatic_reconstruct, reconstruct_cell, Stencil3};
use crate::sources::{friction_semi_implicit, infiltration_depth, FrictionCoefficient, GreenAmptParams, GreenAmptState};
use crate::state::{velocity, PrimitiveState};

/// Sweep direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    X,
    Y,
}

/// Index rectangle `[i0, i1) x [j0, j1)` in local block coordinates.
#[derive(Debug, Clone, Copy)]
struct Rect {
    i0: isize,
    i1: isize,
    j0: isize,
    j1: isize,
}

impl Rect {
    fn for_each<T: Copy>(self, m: &DMatrix<T>, mut f: impl FnMut(usize)) {
        if self.i1 <= self.i0 {
            return;
        }
        for j in self.j0..self.j1 {
            let base = m.offset(self.i0, j);
            for k in base..base + (self.i1 - self.i0) as usize {
                f(k);
            }
        }
    }
}

fn step_of<T: Copy>(m: &DMatrix<T>, dir: Dir) -> usize {
    match dir {
        Dir::X => 1,
        Dir::Y => m.stride(),
    }
}

fn interior<T: Copy>(m: &DMatrix<T>) -> Rect {
    Rect {
        i0: 0,
        i1: m.nx() as isize,
        j0: 0,
        j1: m.ny() as isize,
    }
}

/// Cells whose faces feed the interfaces of the interior: the interior
/// widened by one cell across the sweep direction.
fn face_cells<T: Copy>(m: &DMatrix<T>, dir: Dir) -> Rect {
    let r = interior(m);
    match dir {
        Dir::X => Rect {
            i0: -1,
            i1: r.i1 + 1,
            ..r
        },
        Dir::Y => Rect {
            j0: -1,
            j1: r.j1 + 1,
            ..r
        },
    }
}

/// Cells `k` holding the interface `k+1/2` that bounds an interior cell.
fn interface_cells<T: Copy>(m: &DMatrix<T>, dir: Dir) -> Rect {
    let r = interior(m);
    match dir {
        Dir::X => Rect { i0: -1, ..r },
        Dir::Y => Rect { j0: -1, ..r },
    }
}

/// Velocities over the whole block, halo included.
pub fn primitive<T: Real>(h: &DMatrix<T>, qx: &DMatrix<T>, qy: &DMatrix<T>, u: &mut DMatrix<T>, v: &mut DMatrix<T>, h_eps: T) {
    let (h, qx, qy) = (h.as_slice(), qx.as_slice(), qy.as_slice());
    for (k, (u, v)) in u.as_mut_slice().iter_mut().zip(v.as_mut_slice().iter_mut()).enumerate() {
        *u = velocity(h[k], qx[k], h_eps);
        *v = velocity(h[k], qy[k], h_eps);
    }
}

/// Face values, in order: h_lo, h_hi, z_lo, z_hi, un_lo, un_hi, ut_lo,
/// ut_hi.
pub const FACE_FIELDS: usize = 8;

/// Reconstructs the faces of every cell adjacent to an interior interface
/// and returns the largest `|u_n| + √(gh)` over them.
#[allow(clippy::too_many_arguments)]
pub fn reconstruct<T: Real>(
    dir: Dir,
    second_order: bool,
    h: &DMatrix<T>,
    z: &DMatrix<T>,
    u: &DMatrix<T>,
    v: &DMatrix<T>,
    faces: &mut [DMatrix<T>],
    dx: T,
    g: T,
    h_eps: T,
) -> SpeedBound<T> {
    let s = step_of(h, dir);
    let rect = face_cells(h, dir);
    let (un, ut) = match dir {
        Dir::X => (u.as_slice(), v.as_slice()),
        Dir::Y => (v.as_slice(), u.as_slice()),
    };
    let (hs, zs) = (h.as_slice(), z.as_slice());
    let [h_lo, h_hi, z_lo, z_hi, un_lo, un_hi, ut_lo, ut_hi] = faces else {
        panic!("reconstruct needs {FACE_FIELDS} face fields");
    };
    let (h_lo, h_hi, z_lo, z_hi) = (h_lo.as_mut_slice(), h_hi.as_mut_slice(), z_lo.as_mut_slice(), z_hi.as_mut_slice());
    let (un_lo, un_hi, ut_lo, ut_hi) = (un_lo.as_mut_slice(), un_hi.as_mut_slice(), ut_lo.as_mut_slice(), ut_hi.as_mut_slice());
    let mut bound = SpeedBound::default();
    rect.for_each(h, |k| {
        let c = if second_order {
            let st = Stencil3 {
                h: [hs[k - s], hs[k], hs[k + s]],
                z: [zs[k - s], zs[k], zs[k + s]],
                un: [un[k - s], un[k], un[k + s]],
                ut: [ut[k - s], ut[k], ut[k + s]],
            };
            reconstruct_cell(&st, dx, h_eps)
        } else {
            constant_cell(hs[k], zs[k], un[k], ut[k])
        };
        h_lo[k] = c.h.lo;
        h_hi[k] = c.h.hi;
        z_lo[k] = c.z.lo;
        z_hi[k] = c.z.hi;
        un_lo[k] = c.un.lo;
        un_hi[k] = c.un.hi;
        ut_lo[k] = c.ut.lo;
        ut_hi[k] = c.ut.hi;
        match dir {
            Dir::X => {
                bound.add_x(c.h.lo, c.un.lo, g);
                bound.add_x(c.h.hi, c.un.hi, g);
            }
            Dir::Y => {
                bound.add_y(c.h.lo, c.un.lo, g);
                bound.add_y(c.h.hi, c.un.hi, g);
            }
        }
    });
    bound
}

/// Hydrostatic interface depths `h_L`, `h_R` of interface `k+1/2`, stored
/// at cell `k`. Inputs: h_lo, h_hi, z_lo, z_hi.
pub fn hydrostatic<T: Real>(dir: Dir, faces: [&DMatrix<T>; 4], hl: &mut DMatrix<T>, hr: &mut DMatrix<T>) {
    let s = step_of(faces[0], dir);
    let rect = interface_cells(faces[0], dir);
    let [h_lo, h_hi, z_lo, z_hi] = faces.map(DMatrix::as_slice);
    let (hl, hr) = (hl.as_mut_slice(), hr.as_mut_slice());
    rect.for_each(faces[0], |k| {
        let st = hydrostatic_reconstruct(h_hi[k], z_hi[k], h_lo[k + s], z_lo[k + s], T::zero(), T::zero());
        hl[k] = st.h_l;
        hr[k] = st.h_r;
    });
}

/// Interface fluxes: mass, normal momentum seen from the left cell (with
/// `S_L`), from the right cell (with `S_R`), and transverse momentum.
/// Inputs: h_lo, h_hi, un_lo, un_hi, ut_lo, ut_hi, h_L, h_R.
pub fn fluxes<T: Real>(dir: Dir, ins: [&DMatrix<T>; 8], outs: &mut [DMatrix<T>], g: T, h_eps: T) {
    let s = step_of(ins[0], dir);
    let rect = interface_cells(ins[0], dir);
    let [h_lo, h_hi, un_lo, un_hi, ut_lo, ut_hi, hl, hr] = ins.map(DMatrix::as_slice);
    let [fm, fl, fr, ft] = outs else {
        panic!("fluxes needs four output fields");
    };
    let (fm, fl, fr, ft) = (fm.as_mut_slice(), fl.as_mut_slice(), fr.as_mut_slice(), ft.as_mut_slice());
    rect.for_each(ins[0], |k| {
        let (h_l, h_r) = (hl[k], hr[k]);
        let left = PrimitiveState {
            h: h_l,
            u: if h_l > h_eps { un_hi[k] } else { T::zero() },
            v: ut_hi[k],
        };
        let right = PrimitiveState {
            h: h_r,
            u: if h_r > h_eps { un_lo[k + s] } else { T::zero() },
            v: ut_lo[k + s],
        };
        let f = hll_flux_2d(left, right, g);
        let c = interface_source_corrections(h_hi[k], h_l, h_lo[k + s], h_r, g);
        fm[k] = f.mass;
        fl[k] = f.normal + c.s_left;
        fr[k] = f.normal + c.s_right;
        ft[k] = f.transverse;
    });
}

/// Per-cell flux balance `F_{i+1/2L} - F_{i-1/2R} - Fc_i` (not yet scaled
/// by `Δt/Δx`). Inputs: fm, fl, fr, ft, h_lo, h_hi, z_lo, z_hi. Outputs:
/// mass, normal and transverse momentum.
pub fn divergence<T: Real>(dir: Dir, ins: [&DMatrix<T>; 8], outs: &mut [DMatrix<T>], g: T) {
    let s = step_of(ins[0], dir);
    let rect = interior(ins[0]);
    let [fm, fl, fr, ft, h_lo, h_hi, z_lo, z_hi] = ins.map(DMatrix::as_slice);
    let [rh, rn, rt] = outs else {
        panic!("divergence needs three output fields");
    };
    let (rh, rn, rt) = (rh.as_mut_slice(), rn.as_mut_slice(), rt.as_mut_slice());
    rect.for_each(ins[0], |k| {
        let fc = centered_source(h_lo[k], h_hi[k], z_lo[k], z_hi[k], g).momentum;
        rh[k] = fm[k] - fm[k - s];
        rn[k] = fl[k] - fr[k - s] - fc;
        rt[k] = ft[k] - ft[k - s];
    });
}

/// Everything the scheme kernel needs besides the matrices.
#[derive(Debug, Clone, Copy)]
pub struct SchemeParams<'a, T> {
    pub dt: T,
    pub dx: T,
    pub dy: T,
    pub t: T,
    pub rain: RainAt<'a, T>,
    pub infiltration: Option<&'a GreenAmptParams<T>>,
}

/// Rain rate at the stage time: none, uniform, or looked up per cell.
#[derive(Debug, Clone, Copy)]
pub enum RainAt<'a, T> {
    Dry,
    Uniform(T),
    Raster(&'a DMatrix<T>),
}

/// Result of the scheme kernel on one block.
#[derive(Debug, Clone, Copy)]
pub struct SchemeOutcome<T> {
    pub min_depth: T,
}

/// Convective update, then rain and infiltration on the mass component.
///
/// `state` is `(h, qx, qy)` at the stage start and `res` the six flux
/// balances `(h, qx, qy)` of the x sweep then the y sweep. `out` receives
/// `(h, qx, qy)` and, with infiltration, the advanced `V_inf` from `v_in`.
pub fn scheme<T: Real>(
    state: [&DMatrix<T>; 3],
    res: [&DMatrix<T>; 6],
    v_in: Option<&DMatrix<T>>,
    out: &mut [DMatrix<T>],
    p: SchemeParams<'_, T>,
) -> Result<SchemeOutcome<T>> {
    let m = state[0];
    let layout = m.layout().clone();
    let [h, qx, qy] = state.map(DMatrix::as_slice);
    let [rhx, rqxx, rqyx, rhy, rqyy, rqxy] = res.map(DMatrix::as_slice);
    let (ax, ay) = (p.dt / p.dx, p.dt / p.dy);
    let rain_raster = match p.rain {
        RainAt::Raster(r) => Some(r.as_slice()),
        _ => None,
    };
    let rain_uniform = match p.rain {
        RainAt::Uniform(r) => r,
        _ => T::zero(),
    };
    let v_in = v_in.map(DMatrix::as_slice);
    let (head, tail) = out.split_at_mut(3);
    let [ho, qxo, qyo] = head else {
        panic!("scheme needs three state outputs");
    };
    let (ho, qxo, qyo) = (ho.as_mut_slice(), qxo.as_mut_slice(), qyo.as_mut_slice());
    let mut vo = tail.first_mut().map(DMatrix::as_mut_slice);
    let mut min_depth = T::infinity();
    let mut err: Option<Error> = None;
    let nx = m.nx() as isize;
    for j in 0..m.ny() as isize {
        let base = m.offset(0, j);
        for (i, k) in (base..base + nx as usize).enumerate() {
            let hc = h[k] - ax * rhx[k] - ay * rhy[k];
            let qxn = qx[k] - ax * rqxx[k] - ay * rqxy[k];
            let qyn = qy[k] - ax * rqyx[k] - ay * rqyy[k];
            if err.is_none() {
                let (gi, gj) = (layout.origin.0 + i, layout.origin.1 + j as usize);
                if !(hc.is_finite() && qxn.is_finite() && qyn.is_finite()) {
                    err = Some(Error::NonFinite {
                        i: gi,
                        j: gj,
                        t: p.t.to_f64_lossy(),
                    });
                } else if hc < T::zero() {
                    err = Some(Error::NegativeHeight {
                        i: gi,
                        j: gj,
                        h: hc.to_f64_lossy(),
                        t: p.t.to_f64_lossy(),
                    });
                }
            }
            let rate = rain_raster.map_or(rain_uniform, |r| r[k]);
            let mut hn = hc + p.dt * rate;
            let (mut qxn, mut qyn) = (qxn, qyn);
            if let (Some(ga), Some(v_in), Some(vo)) = (p.infiltration, v_in, vo.as_deref_mut()) {
                let v = GreenAmptState { v_inf: v_in[k] };
                let d = infiltration_depth(ga, hn, v, p.dt);
                if d > T::zero() {
                    // infiltrated water leaves with its momentum
                    let keep = (hn - d) / hn;
                    qxn *= keep;
                    qyn *= keep;
                }
                hn -= d;
                vo[k] = v.v_inf + d;
            }
            min_depth = min_depth.min(hn);
            ho[k] = hn;
            qxo[k] = qxn;
            qyo[k] = qyn;
        }
    }
    match err {
        Some(e) => Err(e),
        None => Ok(SchemeOutcome { min_depth }),
    }
}

/// Friction coefficient for the whole block or per cell.
#[derive(Debug, Clone, Copy)]
pub enum FrictionAt<'a, T> {
    None,
    Uniform(FrictionCoefficient<T>),
    Raster(crate::sources::FrictionFamily, &'a DMatrix<T>),
}

/// Semi-implicit friction on the stage output, using the stage input for
/// `h^n` and `|q^n|`. Dry output cells lose their momentum.
#[allow(clippy::too_many_arguments)]
pub fn friction<T: Real>(
    start: [&DMatrix<T>; 3],
    h_star: &DMatrix<T>,
    qx: &mut DMatrix<T>,
    qy: &mut DMatrix<T>,
    law: FrictionAt<'_, T>,
    dt: T,
    g: T,
    h_eps: T,
) {
    let rect = interior(h_star);
    let [hn, qxn, qyn] = start.map(DMatrix::as_slice);
    let hs = h_star.as_slice();
    let (qx, qy) = (qx.as_mut_slice(), qy.as_mut_slice());
    rect.for_each(h_star, |k| {
        let coef = match law {
            FrictionAt::None => None,
            FrictionAt::Uniform(c) => Some(c),
            FrictionAt::Raster(family, cf) => Some(FrictionCoefficient {
                cf: cf.as_slice()[k],
                family,
            }),
        };
        match coef {
            _ if hs[k] <= h_eps => {
                qx[k] = T::zero();
                qy[k] = T::zero();
            }
            None => {}
            Some(c) => {
                let norm = qxn[k].hypot(qyn[k]);
                qx[k] = friction_semi_implicit(hs[k], qx[k], hn[k], norm, c, dt, g, h_eps);
                qy[k] = friction_semi_implicit(hs[k], qy[k], hn[k], norm, c, dt, g, h_eps);
            }
        }
    });
}

/// Net mass leaving through the physical edge faces of each cell, as a
/// depth rate, from the interface mass fluxes `fm`. The x sweep resets
/// `rate`, the y sweep adds to it.
pub fn edge_outflow<T: Real>(dir: Dir, fm: &DMatrix<T>, rate: &mut DMatrix<T>, d: T) {
    let l = fm.layout();
    let (nx, ny) = (l.nx() as isize, l.ny() as isize);
    let (lo, hi) = match dir {
        Dir::X => {
            rate.as_mut_slice().fill(T::zero());
            (Side::West, Side::East)
        }
        Dir::Y => (Side::South, Side::North),
    };
    let (lo, hi) = (l.is_physical(lo), l.is_physical(hi));
    let mut add = |i: isize, j: isize, f: T| rate.set(i, j, rate.get(i, j) + f / d);
    match dir {
        Dir::X => {
            for j in 0..ny {
                if lo {
                    add(0, j, -fm.get(-1, j));
                }
                if hi {
                    add(nx - 1, j, fm.get(nx - 1, j));
                }
            }
        }
        Dir::Y => {
            for i in 0..nx {
                if lo {
                    add(i, 0, -fm.get(i, -1));
                }
                if hi {
                    add(i, ny - 1, fm.get(i, ny - 1));
                }
            }
        }
    }
}

/// `cum += Δt · mean(rates)` over the interior.
pub fn accumulate_outflow<T: Real>(rates: &[&DMatrix<T>], cum: &mut DMatrix<T>, dt: T) {
    let rect = interior(rates[0]);
    let c = cum.as_mut_slice();
    match rates {
        [a] => {
            let a = a.as_slice();
            rect.for_each(rates[0], |k| c[k] += dt * a[k]);
        }
        [a, b] => {
            let (a, b) = (a.as_slice(), b.as_slice());
            rect.for_each(rates[0], |k| c[k] += dt * crate::solver::heun_mean(a[k], b[k]));
        }
        _ => panic!("one or two stage rates expected"),
    }
}

/// `a = (a + b) / 2` over the interior.
pub fn heun_average<T: Real>(a: &mut DMatrix<T>, b: &DMatrix<T>) {
    let rect = interior(b);
    let bs = b.as_slice();
    let a = a.as_mut_slice();
    rect.for_each(b, |k| a[k] = crate::solver::heun_mean(a[k], bs[k]));
}

#[cfg(test)]
mod tests {
    use overland_skel::decompose;

    use super::*;

    #[test]
    fn edge_outflow_counts_only_physical_edge_faces() {
        let t = decompose(1, 3, 2, 1, (false, true)).unwrap();
        let l = t.block(0);
        let mut fm = DMatrix::from_fn(l, 0.0, |i, j| (10 * j + i) as f64 + 1.0);
        fm.set(-1, 0, 4.0);
        fm.set(-1, 1, -6.0);
        fm.set(0, -1, 9.0);
        let mut rate = DMatrix::new(l, 7.0);
        edge_outflow(Dir::X, &fm, &mut rate, 2.0);
        assert_eq!(rate.get(0, 0), -2.0);
        assert_eq!(rate.get(0, 1), 3.0);
        assert_eq!(rate.get(2, 0), 1.5);
        assert_eq!(rate.get(2, 1), 6.5);
        assert_eq!(rate.get(1, 0), 0.0);
        let before = rate.clone();
        edge_outflow(Dir::Y, &fm, &mut rate, 0.5);
        assert_eq!(rate, before, "periodic y edges exchange nothing");
    }

    #[test]
    fn outflow_accumulates_the_stage_mean() {
        let t = decompose(1, 2, 2, 1, (false, false)).unwrap();
        let l = t.block(0);
        let a = DMatrix::new(l, 1.0);
        let b = DMatrix::new(l, 3.0);
        let mut cum = DMatrix::new(l, 0.5);
        accumulate_outflow(&[&a, &b], &mut cum, 0.25);
        assert_eq!(cum.get(1, 1), 1.0);
        accumulate_outflow(&[&a], &mut cum, 0.25);
        assert_eq!(cum.get(0, 0), 1.25);
    }
}
