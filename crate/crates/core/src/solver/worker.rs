//! The per-worker program: field allocation, the stage step lists and the
//! time loop. Every worker runs this same code on its own block; the only
//! communication is through the skeleton calls.

use std::cell::Cell;

use overland_skel::{Access, DMatrix, FieldId, FieldSet, Step, Worker};

use super::kernels::{self, Dir, FrictionAt, RainAt, SchemeParams};
use super::{GaugeRecord, GaugeSample, RunPlan, Scenario, SimulationReport, Snapshot};
use crate::boundary::{fill_ghost_cells, fill_topography_ghosts};
use crate::error::{Error, Result};
use crate::flux::SpeedBound;
use crate::num::Real;
use crate::sources::{friction_coefficient, rain_rate, FrictionFamily, RainForcing};
use crate::state::{total_volume, velocity};

#[derive(Debug, Clone, Copy)]
struct StateIds {
    h: FieldId,
    qx: FieldId,
    qy: FieldId,
    v_inf: Option<FieldId>,
}

impl StateIds {
    fn all(&self) -> Vec<FieldId> {
        let mut v = vec![self.h, self.qx, self.qy];
        v.extend(self.v_inf);
        v
    }
}

struct Ids {
    stages: [StateIds; 3],
    z: FieldId,
    u: FieldId,
    v: FieldId,
    faces: [FieldId; kernels::FACE_FIELDS],
    hl: FieldId,
    hr: FieldId,
    flux: [FieldId; 4],
    res: [FieldId; 6],
    rain: Option<FieldId>,
    cf: Option<FieldId>,
    cum_rain: FieldId,
    /// Net outflow rate through the domain edge, one field per stage.
    edge_rate: [FieldId; 2],
    cum_out: FieldId,
}

#[derive(Clone, Copy)]
enum FrictionMode<T> {
    None,
    Uniform(crate::sources::FrictionCoefficient<T>),
    Raster(FrictionFamily),
}

struct Ctx<'a, T: Real> {
    sc: &'a Scenario<T>,
    g: T,
    h_eps: T,
    gw: usize,
    second_order: bool,
    friction: FrictionMode<T>,
}

fn allocate<T: Real>(w: &Worker, sc: &Scenario<T>) -> (FieldSet<T>, Ids) {
    let zero = T::zero();
    let mut fs = FieldSet::new();
    let stage = |fs: &mut FieldSet<T>, n: usize| {
        let (h, qx, qy) = if n == 0 {
            (w.scatter(&sc.h, zero), w.scatter(&sc.qx, zero), w.scatter(&sc.qy, zero))
        } else {
            (w.matrix(zero), w.matrix(zero), w.matrix(zero))
        };
        StateIds {
            h: fs.add("h", h),
            qx: fs.add("qx", qx),
            qy: fs.add("qy", qy),
            v_inf: sc
                .infiltration
                .as_ref()
                .map(|inf| fs.add("v_inf", w.matrix(if n == 0 { inf.initial_volume } else { zero }))),
        }
    };
    let stages = [stage(&mut fs, 0), stage(&mut fs, 1), stage(&mut fs, 2)];
    let z = fs.add("z", w.scatter(&sc.z, zero));
    let u = fs.add("u", w.matrix(zero));
    let v = fs.add("v", w.matrix(zero));
    let names = ["h_lo", "h_hi", "z_lo", "z_hi", "un_lo", "un_hi", "ut_lo", "ut_hi"];
    let faces = names.map(|n| fs.add(n, w.matrix(zero)));
    let hl = fs.add("h_L", w.matrix(zero));
    let hr = fs.add("h_R", w.matrix(zero));
    let flux = ["f_mass", "f_left", "f_right", "f_trans"].map(|n| fs.add(n, w.matrix(zero)));
    let res = ["r_h_x", "r_qx_x", "r_qy_x", "r_h_y", "r_qy_y", "r_qx_y"].map(|n| fs.add(n, w.matrix(zero)));
    let rain = match &sc.rain {
        RainForcing::Raster { rates, .. } => Some(fs.add("rain", w.scatter(rates, zero))),
        _ => None,
    };
    let cf = sc
        .friction
        .as_ref()
        .and_then(|f| f.raster.as_ref())
        .map(|r| {
            let cf: Vec<T> = r
                .iter()
                .map(|&v| friction_coefficient(f_law(sc).with_value(v), sc.constants.g).map(|c| c.cf).unwrap_or(zero))
                .collect();
            fs.add("cf", w.scatter(&cf, zero))
        });
    let cum_rain = fs.add("cum_rain", w.matrix(zero));
    let edge_rate = ["edge_rate_1", "edge_rate_2"].map(|n| fs.add(n, w.matrix(zero)));
    let cum_out = fs.add("cum_out", w.matrix(zero));
    let ids = Ids {
        stages,
        z,
        u,
        v,
        faces,
        hl,
        hr,
        flux,
        res,
        rain,
        cf,
        cum_rain,
        edge_rate,
        cum_out,
    };
    (fs, ids)
}

fn f_law<T: Real>(sc: &Scenario<T>) -> crate::sources::FrictionLaw<T> {
    sc.friction.as_ref().expect("friction configured").law
}

/// Boundary conditions, reconstruction, hydrostatic reconstruction, fluxes
/// and flux balances for the state `st`. The mass leaving through the
/// domain edge goes to `edge`. Returns the wave-speed bound of the
/// reconstructed faces.
fn convective<T: Real>(
    w: &mut Worker,
    fs: &mut FieldSet<T>,
    ids: &Ids,
    st: StateIds,
    edge: FieldId,
    cx: &Ctx<'_, T>,
) -> (Result<()>, SpeedBound<T>) {
    let bound = Cell::new(SpeedBound::default());
    let (g, h_eps, gw, second) = (cx.g, cx.h_eps, cx.gw, cx.second_order);
    let bcs = cx.sc.boundaries;
    let (dx, dy) = (cx.sc.geometry.dx, cx.sc.geometry.dy);
    let f = ids.faces;
    let mut steps: Vec<Step<'_, T, Error>> = vec![
        Step::new("boundary conditions", vec![], vec![st.h, st.qx, st.qy], move |_, _, outs| {
            let [h, qx, qy] = outs else { unreachable!() };
            fill_ghost_cells(h, qx, qy, &bcs, g, h_eps).map_err(Error::from)
        })
        .physical_ghosts(),
        Step::new(
            "velocities",
            vec![Access::Stencil(st.h, gw), Access::Stencil(st.qx, gw), Access::Stencil(st.qy, gw)],
            vec![ids.u, ids.v],
            move |_, ins, outs| {
                let [u, v] = outs else { unreachable!() };
                kernels::primitive(ins[0], ins[1], ins[2], u, v, h_eps);
                Ok(())
            },
        )
        .ring(gw),
    ];
    for (dir, d) in [(Dir::X, dx), (Dir::Y, dy)] {
        let bound = &bound;
        let res = match dir {
            Dir::X => [ids.res[0], ids.res[1], ids.res[2]],
            Dir::Y => [ids.res[3], ids.res[4], ids.res[5]],
        };
        steps.push(
            Step::new(
                "reconstruction",
                vec![
                    Access::Stencil(st.h, gw),
                    Access::Stencil(ids.z, gw),
                    Access::Stencil(ids.u, gw),
                    Access::Stencil(ids.v, gw),
                ],
                f.to_vec(),
                move |_, ins, outs| {
                    let b = kernels::reconstruct(dir, second, ins[0], ins[1], ins[2], ins[3], outs, d, g, h_eps);
                    bound.set(bound.get().merge(b));
                    Ok(())
                },
            )
            .ring(1),
        );
        steps.push(
            Step::new(
                "hydrostatic reconstruction",
                vec![
                    Access::Stencil(f[0], 1),
                    Access::Stencil(f[1], 1),
                    Access::Stencil(f[2], 1),
                    Access::Stencil(f[3], 1),
                ],
                vec![ids.hl, ids.hr],
                move |_, ins, outs| {
                    let [hl, hr] = outs else { unreachable!() };
                    kernels::hydrostatic(dir, [ins[0], ins[1], ins[2], ins[3]], hl, hr);
                    Ok(())
                },
            )
            .ring(1),
        );
        steps.push(
            Step::new(
                "numerical flux",
                vec![
                    Access::Stencil(f[0], 1),
                    Access::Point(f[1]),
                    Access::Stencil(f[4], 1),
                    Access::Point(f[5]),
                    Access::Stencil(f[6], 1),
                    Access::Point(f[7]),
                    Access::Point(ids.hl),
                    Access::Point(ids.hr),
                ],
                ids.flux.to_vec(),
                move |_, ins, outs| {
                    let ins: [&DMatrix<T>; 8] = std::array::from_fn(|k| ins[k]);
                    kernels::fluxes(dir, ins, outs, g, h_eps);
                    Ok(())
                },
            )
            .ring(1),
        );
        steps.push(Step::new(
            "edge outflow",
            vec![Access::Stencil(ids.flux[0], 1)],
            vec![edge],
            move |_, ins, outs| {
                kernels::edge_outflow(dir, ins[0], &mut outs[0], d);
                Ok(())
            },
        ));
        steps.push(Step::new(
            "flux balance",
            vec![
                Access::Stencil(ids.flux[0], 1),
                Access::Point(ids.flux[1]),
                Access::Stencil(ids.flux[2], 1),
                Access::Stencil(ids.flux[3], 1),
                Access::Point(f[0]),
                Access::Point(f[1]),
                Access::Point(f[2]),
                Access::Point(f[3]),
            ],
            res.to_vec(),
            move |_, ins, outs| {
                let ins: [&DMatrix<T>; 8] = std::array::from_fn(|k| ins[k]);
                kernels::divergence(dir, ins, outs, g);
                Ok(())
            },
        ));
    }
    let r = w.apply_list(fs, &mut steps);
    drop(steps);
    (r, bound.get())
}

/// Scheme update from `src` into `dst` at stage time `t`, then friction.
/// Rain is sampled at `t_rain`; steps never straddle a rain edge, so any
/// instant inside the step gives the rate over the whole step.
#[allow(clippy::too_many_arguments)]
fn update<T: Real>(
    w: &mut Worker,
    fs: &mut FieldSet<T>,
    ids: &Ids,
    src: StateIds,
    dst: StateIds,
    cx: &Ctx<'_, T>,
    t: T,
    t_rain: T,
    dt: T,
    min_depth: &Cell<T>,
) -> Result<()> {
    let sc = cx.sc;
    let (g, h_eps) = (cx.g, cx.h_eps);
    let (dx, dy) = (sc.geometry.dx, sc.geometry.dy);
    let rain_active = sc.rain.active(t_rain);
    let mut reads: Vec<Access> = [src.h, src.qx, src.qy].into_iter().chain(ids.res).map(Access::Point).collect();
    let rain_slot = ids.rain.map(|r| {
        reads.push(Access::Point(r));
        reads.len() - 1
    });
    let v_slot = src.v_inf.map(|v| {
        reads.push(Access::Point(v));
        reads.len() - 1
    });
    let uniform = match sc.rain {
        RainForcing::Uniform { rate, .. } if rain_active => rate,
        _ => T::zero(),
    };
    let ga = sc.infiltration.as_ref().map(|i| &i.params);
    let mut writes = vec![dst.h, dst.qx, dst.qy];
    writes.extend(dst.v_inf);

    let mut fr_reads = vec![Access::Point(src.h), Access::Point(src.qx), Access::Point(src.qy), Access::Point(dst.h)];
    fr_reads.extend(ids.cf.map(Access::Point));
    let mode = cx.friction;

    let mut steps: Vec<Step<'_, T, Error>> = vec![
        Step::new("scheme", reads, writes, move |_, ins, outs| {
            let rain = match (rain_slot, rain_active) {
                (Some(k), true) => RainAt::Raster(ins[k]),
                _ if uniform > T::zero() => RainAt::Uniform(uniform),
                _ => RainAt::Dry,
            };
            let p = SchemeParams {
                dt,
                dx,
                dy,
                t,
                rain,
                infiltration: ga,
            };
            let res: [&DMatrix<T>; 6] = std::array::from_fn(|k| ins[3 + k]);
            let out = kernels::scheme([ins[0], ins[1], ins[2]], res, v_slot.map(|k| ins[k]), outs, p)?;
            min_depth.set(min_depth.get().min(out.min_depth));
            Ok(())
        }),
        Step::new("friction", fr_reads, vec![dst.qx, dst.qy], move |_, ins, outs| {
            let [qx, qy] = outs else { unreachable!() };
            let law = match mode {
                FrictionMode::None => FrictionAt::None,
                FrictionMode::Uniform(c) => FrictionAt::Uniform(c),
                FrictionMode::Raster(family) => FrictionAt::Raster(family, ins[4]),
            };
            kernels::friction([ins[0], ins[1], ins[2]], ins[3], qx, qy, law, dt, g, h_eps);
            Ok(())
        }),
    ];
    w.apply_list(fs, &mut steps)
}

/// `S0 = (S0 + S2) / 2` and the matching rain budget.
fn heun<T: Real>(w: &mut Worker, fs: &mut FieldSet<T>, ids: &Ids) {
    let (a, b) = (ids.stages[0], ids.stages[2]);
    let mut steps: Vec<Step<'_, T, Error>> = vec![Step::new(
        "heun average",
        b.all().into_iter().map(Access::Point).collect(),
        a.all(),
        |_, ins, outs| {
            for (o, i) in outs.iter_mut().zip(ins) {
                kernels::heun_average(o, i);
            }
            Ok(())
        },
    )];
    w.apply_list(fs, &mut steps).expect("averaging cannot fail");
}

/// Adds the depth that left through the domain edge during one step.
fn outflow_budget<T: Real>(w: &mut Worker, fs: &mut FieldSet<T>, ids: &Ids, dt: T, second_order: bool) {
    let mut reads = vec![Access::Point(ids.edge_rate[0])];
    if second_order {
        reads.push(Access::Point(ids.edge_rate[1]));
    }
    let mut steps: Vec<Step<'_, T, Error>> = vec![Step::new("outflow budget", reads, vec![ids.cum_out], |_, ins, outs| {
        kernels::accumulate_outflow(ins, &mut outs[0], dt);
        Ok(())
    })];
    w.apply_list(fs, &mut steps).expect("outflow budget cannot fail");
}

/// Adds the rain depth of one step to the cumulative raster.
fn rain_budget<T: Real>(w: &mut Worker, fs: &mut FieldSet<T>, ids: &Ids, sc: &Scenario<T>, dt: T, t_rain: T) {
    if !sc.rain.active(t_rain) {
        return;
    }
    let layout = w.layout().clone();
    let gnx = layout.global.0;
    let raster = ids.rain.is_some();
    let mut steps: Vec<Step<'_, T, Error>> = vec![Step::new(
        "rain budget",
        ids.rain.map(Access::Point).into_iter().collect(),
        vec![ids.cum_rain],
        |l, ins, outs| {
            let cum = &mut outs[0];
            for j in 0..l.ny() {
                for i in 0..l.nx() {
                    let (ii, jj) = (i as isize, j as isize);
                    let cell = (l.origin.1 + j) * gnx + l.origin.0 + i;
                    let r = if raster {
                        ins[0].get(ii, jj)
                    } else {
                        rain_rate(&sc.rain, t_rain, cell)
                    };
                    let d = cum.get(ii, jj) + dt * r;
                    cum.set(ii, jj, d);
                }
            }
            Ok(())
        },
    )];
    w.apply_list(fs, &mut steps).expect("rain budget cannot fail");
}

struct LocalGauge<T> {
    index: usize,
    local: (isize, isize),
    record: GaugeRecord<T>,
}

fn sample_gauges<T: Real>(gauges: &mut [LocalGauge<T>], fs: &FieldSet<T>, ids: &Ids, t: T, record: bool, h_eps: T, threshold: T) {
    let s = ids.stages[0];
    for gg in gauges.iter_mut() {
        let (i, j) = gg.local;
        let h = fs.get(s.h).get(i, j);
        let z = fs.get(ids.z).get(i, j);
        let level = h + z;
        if level > gg.record.max_level || gg.record.samples.is_empty() && gg.record.max_level == T::neg_infinity() {
            gg.record.max_level = gg.record.max_level.max(level);
        }
        if gg.record.arrival_time.is_none() && h > threshold {
            gg.record.arrival_time = Some(t);
        }
        if record {
            gg.record.samples.push(GaugeSample {
                t,
                h,
                u: velocity(h, fs.get(s.qx).get(i, j), h_eps),
                v: velocity(h, fs.get(s.qy).get(i, j), h_eps),
            });
        }
    }
}

fn events<T: Real>(sc: &Scenario<T>, plan: &RunPlan<T>) -> Vec<T> {
    let horizon = if plan.fixed_steps.is_some() {
        T::infinity()
    } else {
        plan.t_end
    };
    let mut ev: Vec<T> = sc.rain.edges();
    if plan.fixed_steps.is_none() {
        ev.extend(plan.snapshot_times.iter().copied());
        ev.push(plan.t_end);
    }
    ev.retain(|&t| t > T::zero() && t <= horizon && t.is_finite());
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite event times"));
    ev.dedup();
    ev
}

pub(super) fn run<T: Real>(w: &mut Worker, sc: &Scenario<T>, plan: &RunPlan<T>) -> Result<Option<SimulationReport<T>>> {
    let g = sc.constants.g;
    let h_eps = sc.h_eps;
    let friction = match &sc.friction {
        None => FrictionMode::None,
        Some(f) if f.raster.is_some() => FrictionMode::Raster(f.law.family()),
        Some(f) => FrictionMode::Uniform(friction_coefficient(f.law, g)?),
    };
    let cx = Ctx {
        sc,
        g,
        h_eps,
        gw: plan.ghost_width(),
        second_order: plan.order >= 2,
        friction,
    };
    let (mut fs, ids) = allocate(w, sc);

    // the bed never changes: complete its halo once
    fill_topography_ghosts(fs.get_mut(ids.z), &sc.boundaries);
    w.halo_exchange(fs.get_mut(ids.z));

    let layout = w.layout().clone();
    let mut gauges: Vec<LocalGauge<T>> = Vec::new();
    for (index, gg) in plan.gauges.iter().enumerate() {
        let Some((gi, gj)) = sc.geometry.locate(gg.x, gg.y) else {
            return Err(Error::Invalid(format!("gauge '{}' lies outside the domain", gg.name)));
        };
        if let Some((i, j)) = layout.to_local(gi, gj) {
            gauges.push(LocalGauge {
                index,
                local: (i as isize, j as isize),
                record: GaugeRecord {
                    name: gg.name.clone(),
                    x: gg.x,
                    y: gg.y,
                    cell: (gi, gj),
                    samples: Vec::new(),
                    max_level: T::neg_infinity(),
                    arrival_time: None,
                },
            });
        }
    }

    let min_depth = Cell::new(
        fs.get(ids.stages[0].h)
            .interior_to_vec()
            .into_iter()
            .fold(T::infinity(), |a, b| a.min(b)),
    );
    let threshold = plan.arrival_threshold;
    let events = events(sc, plan);
    let mut snap_times: Vec<T> = plan
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| plan.fixed_steps.is_none() && t <= plan.t_end)
        .collect();
    snap_times.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
    snap_times.dedup();
    let mut next_snap = 0;
    let mut snapshots = Vec::new();

    let mut t = T::zero();
    let mut steps = 0usize;
    sample_gauges(&mut gauges, &fs, &ids, t, true, h_eps, threshold);
    take_snapshots(w, &fs, &ids, t, &snap_times, &mut next_snap, &mut snapshots);

    let [s0, s1, s2] = ids.stages;
    loop {
        match plan.fixed_steps {
            Some(n) if steps >= n => break,
            None if t >= plan.t_end => break,
            _ => {}
        }
        let mut err: Option<Error> = None;
        let (r, bound) = convective(w, &mut fs, &ids, s0, ids.edge_rate[0], &cx);
        if let Err(e) = r {
            err.get_or_insert(e);
        }
        let local_dt = bound
            .timestep(sc.geometry.dx, sc.geometry.dy, plan.cfl)
            .unwrap_or(sc.dt_max)
            .min(sc.dt_max);
        let mut dt = w.reduce_min(local_dt);
        let mut landing = None;
        if let Some(&ev) = events.iter().find(|&&e| e > t) {
            if t + dt >= ev {
                dt = ev - t;
                landing = Some(ev);
            }
        }
        let t_next = landing.unwrap_or(t + dt);
        let t_mid = t + dt * T::half();

        if let Err(e) = update(w, &mut fs, &ids, s0, s1, &cx, t, t_mid, dt, &min_depth) {
            err.get_or_insert(e);
        }
        if cx.second_order {
            let (r, _) = convective(w, &mut fs, &ids, s1, ids.edge_rate[1], &cx);
            if let Err(e) = r {
                err.get_or_insert(e);
            }
            if let Err(e) = update(w, &mut fs, &ids, s1, s2, &cx, t_next, t_mid, dt, &min_depth) {
                err.get_or_insert(e);
            }
            heun(w, &mut fs, &ids);
        } else {
            for (a, b) in s0.all().into_iter().zip(s1.all()) {
                fs.swap(a, b);
            }
        }
        rain_budget(w, &mut fs, &ids, sc, dt, t_mid);
        outflow_budget(w, &mut fs, &ids, dt, cx.second_order);
        t = t_next;
        steps += 1;

        if w.reduce_any(err.is_some()) {
            return Err(err.unwrap_or(Error::PeerAborted));
        }
        let last = match plan.fixed_steps {
            Some(n) => steps >= n,
            None => t >= plan.t_end,
        };
        sample_gauges(&mut gauges, &fs, &ids, t, last || steps.is_multiple_of(plan.gauge_stride), h_eps, threshold);
        take_snapshots(w, &fs, &ids, t, &snap_times, &mut next_snap, &mut snapshots);
    }

    let min_depth = w.reduce_min(min_depth.get());
    let h = w.gather(fs.get(s0.h));
    let qx = w.gather(fs.get(s0.qx));
    let qy = w.gather(fs.get(s0.qy));
    let v_inf = s0.v_inf.map(|v| w.gather(fs.get(v)));
    let cum = w.gather(fs.get(ids.cum_rain));
    let out = w.gather(fs.get(ids.cum_out));
    let local: Vec<(usize, GaugeRecord<T>)> = gauges.into_iter().map(|g| (g.index, g.record)).collect();
    let all_gauges = w.gather_values(local);
    let comm = w.stats();
    if !w.is_root() {
        return Ok(None);
    }

    let geom = sc.geometry;
    let h = h.expect("root gathers");
    let qx = qx.expect("root gathers");
    let qy = qy.expect("root gathers");
    let cum = cum.expect("root gathers");
    let out = out.expect("root gathers");
    let v_inf = v_inf.map(|v| v.expect("root gathers"));
    let infiltrated_volume = match (&v_inf, &sc.infiltration) {
        (Some(v), Some(inf)) => {
            let d: Vec<T> = v.iter().map(|&x| x - inf.initial_volume).collect();
            total_volume(&d, &geom)
        }
        _ => T::zero(),
    };
    let mut gauge_records: Vec<(usize, GaugeRecord<T>)> = all_gauges.expect("root gathers").into_iter().flatten().collect();
    gauge_records.sort_by_key(|(k, _)| *k);
    Ok(Some(SimulationReport {
        geometry: geom,
        t,
        steps,
        initial_volume: total_volume(&sc.h, &geom),
        final_volume: total_volume(&h, &geom),
        rain_volume: total_volume(&cum, &geom),
        infiltrated_volume,
        outflow_volume: total_volume(&out, &geom),
        h,
        qx,
        qy,
        z: sc.z.clone(),
        v_inf,
        min_depth,
        gauges: gauge_records.into_iter().map(|(_, r)| r).collect(),
        snapshots,
        workers: w.workers(),
        comm,
    }))
}

fn take_snapshots<T: Real>(
    w: &mut Worker,
    fs: &FieldSet<T>,
    ids: &Ids,
    t: T,
    times: &[T],
    next: &mut usize,
    out: &mut Vec<Snapshot<T>>,
) {
    let s = ids.stages[0];
    while *next < times.len() && times[*next] <= t {
        let h = w.gather(fs.get(s.h));
        let qx = w.gather(fs.get(s.qx));
        let qy = w.gather(fs.get(s.qy));
        if let (Some(h), Some(qx), Some(qy)) = (h, qx, qy) {
            out.push(Snapshot { t, h, qx, qy });
        }
        *next += 1;
    }
}
