//! Bottom friction, rain, and Green-Ampt infiltration.

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrictionLaw<T> {
    /// Manning roughness `n` [s·m^(-1/3)].
    Manning(T),
    /// Strickler coefficient `K` [m^(1/3)/s].
    Strickler(T),
    /// Darcy-Weisbach friction factor `f`.
    DarcyWeisbach(T),
    /// Chézy coefficient `C` [m^(1/2)/s].
    Chezy(T),
}

/// The depth power in the friction denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrictionFamily {
    /// Manning and Strickler: `h^(4/3)`.
    PowerFourThirds,
    /// Darcy-Weisbach and Chézy: `h`.
    PowerOne,
}

impl FrictionFamily {
    pub fn exponent<T: Real>(self) -> T {
        match self {
            FrictionFamily::PowerFourThirds => T::lit(4.0 / 3.0),
            FrictionFamily::PowerOne => T::one(),
        }
    }

    #[inline]
    fn depth_power<T: Real>(self, h: T) -> T {
        match self {
            FrictionFamily::PowerFourThirds => h * h.cbrt(),
            FrictionFamily::PowerOne => h,
        }
    }
}

/// `C_f` and its family, ready for the semi-implicit update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionCoefficient<T> {
    pub cf: T,
    pub family: FrictionFamily,
}

impl<T: Real> FrictionLaw<T> {
    pub fn value(&self) -> T {
        match *self {
            FrictionLaw::Manning(v) | FrictionLaw::Strickler(v) | FrictionLaw::DarcyWeisbach(v) | FrictionLaw::Chezy(v) => v,
        }
    }

    pub fn family(&self) -> FrictionFamily {
        match self {
            FrictionLaw::Manning(_) | FrictionLaw::Strickler(_) => FrictionFamily::PowerFourThirds,
            FrictionLaw::DarcyWeisbach(_) | FrictionLaw::Chezy(_) => FrictionFamily::PowerOne,
        }
    }

    /// The same law with another coefficient value.
    pub fn with_value(&self, v: T) -> Self {
        match self {
            FrictionLaw::Manning(_) => FrictionLaw::Manning(v),
            FrictionLaw::Strickler(_) => FrictionLaw::Strickler(v),
            FrictionLaw::DarcyWeisbach(_) => FrictionLaw::DarcyWeisbach(v),
            FrictionLaw::Chezy(_) => FrictionLaw::Chezy(v),
        }
    }
}

pub fn friction_coefficient<T: Real>(law: FrictionLaw<T>, g: T) -> Result<FrictionCoefficient<T>> {
    let v = law.value();
    if !(v > T::zero() && v.is_finite()) {
        return Err(Error::NonPositiveCoefficient(v.to_f64_lossy()));
    }
    let cf = match law {
        FrictionLaw::Manning(n) => n * n,
        FrictionLaw::Strickler(k) => T::one() / (k * k),
        FrictionLaw::DarcyWeisbach(f) => f / (T::lit(8.0) * g),
        FrictionLaw::Chezy(c) => T::one() / (c * c),
    };
    Ok(FrictionCoefficient {
        cf,
        family: law.family(),
    })
}

/// Semi-implicit friction update of one discharge component.
///
/// `q_norm_n` is the magnitude of the discharge vector at the start of the
/// stage, `h_n` the depth there, and `h_star` the depth after the
/// convective update.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn friction_semi_implicit<T: Real>(
    h_star: T,
    q_star: T,
    h_n: T,
    q_norm_n: T,
    coef: FrictionCoefficient<T>,
    dt: T,
    g: T,
    h_eps: T,
) -> T {
    if h_star <= h_eps {
        return T::zero();
    }
    if h_n <= h_eps || q_norm_n == T::zero() {
        return q_star;
    }
    let denom = T::one() + dt * g * coef.cf * q_norm_n / (h_n * coef.family.depth_power(h_star));
    q_star / denom
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenAmptParams<T> {
    /// Saturated hydraulic conductivity [m/s].
    pub ks: T,
    /// Capillary head at the wetting front [m].
    pub hf: T,
    pub a: T,
    pub theta_i: T,
    pub theta_s: T,
    /// Capacity used before any water has infiltrated [m/s].
    pub ic_init: T,
}

/// Default initial capacity: large enough that the first step is always
/// supply-limited.
pub const DEFAULT_IC_INIT: f64 = 1e3;

impl<T: Real> GreenAmptParams<T> {
    pub fn new(ks: T, hf: T, a: T, theta_i: T, theta_s: T) -> Result<Self> {
        let p = Self {
            ks,
            hf,
            a,
            theta_i,
            theta_s,
            ic_init: T::lit(DEFAULT_IC_INIT),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fin = [self.ks, self.hf, self.a, self.theta_i, self.theta_s, self.ic_init]
            .iter()
            .all(|v| v.is_finite());
        if !fin {
            return Err(Error::Invalid("Green-Ampt parameters must be finite".into()));
        }
        if self.ks < T::zero() {
            return Err(Error::Invalid(format!("ks must be non-negative (got {})", self.ks)));
        }
        if !(self.theta_i >= T::zero() && self.theta_i < self.theta_s && self.theta_s <= T::one()) {
            return Err(Error::Invalid(format!(
                "moisture contents must satisfy 0 <= theta_i < theta_s <= 1 (got {} and {})",
                self.theta_i, self.theta_s
            )));
        }
        if self.ic_init < T::zero() {
            return Err(Error::Invalid("initial infiltration capacity must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GreenAmptState<T> {
    /// Infiltrated volume per unit area [m].
    pub v_inf: T,
}

impl<T: Real> GreenAmptState<T> {
    /// Wetting-front depth `V_inf / (θs - θi)`.
    pub fn z_f(&self, p: &GreenAmptParams<T>) -> T {
        self.v_inf / (p.theta_s - p.theta_i)
    }
}

pub fn infiltration_capacity<T: Real>(p: &GreenAmptParams<T>, h_over: T, state: GreenAmptState<T>) -> T {
    if p.ks == T::zero() {
        return T::zero();
    }
    if state.v_inf <= T::zero() {
        return p.ic_init;
    }
    let ic = p.ks * (p.a + (p.hf - h_over) / state.z_f(p));
    ic.max(T::zero())
}

/// Depth infiltrated over one stage: `min(h_over, Δt·I_C)`.
#[inline]
pub fn infiltration_depth<T: Real>(p: &GreenAmptParams<T>, h_over: T, state: GreenAmptState<T>, dt: T) -> T {
    h_over.min(dt * infiltration_capacity(p, h_over, state))
}

/// Infiltration rate over the stage and the advanced state.
pub fn infiltration_step<T: Real>(
    p: &GreenAmptParams<T>,
    h_over: T,
    state: GreenAmptState<T>,
    dt: T,
) -> (T, GreenAmptState<T>) {
    let d = infiltration_depth(p, h_over, state, dt);
    (
        d / dt,
        GreenAmptState {
            v_inf: state.v_inf + d,
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum RainForcing<T> {
    None,
    /// Spatially uniform rate [m/s], active on `[start, end)`.
    Uniform { rate: T, start: T, end: T },
    /// Per-cell rates (row-major over the global grid), active on
    /// `[start, end)`.
    Raster { rates: Vec<T>, start: T, end: T },
}

impl<T: Real> RainForcing<T> {
    pub fn validate(&self, cells: usize) -> Result<()> {
        let check_window = |start: T, end: T| {
            if start >= T::zero() && end >= start {
                Ok(())
            } else {
                Err(Error::Invalid(format!("rain window [{start}, {end}) is invalid")))
            }
        };
        match self {
            RainForcing::None => Ok(()),
            RainForcing::Uniform { rate, start, end } => {
                if !(*rate >= T::zero() && rate.is_finite()) {
                    return Err(Error::Invalid(format!("rain rate must be non-negative (got {rate})")));
                }
                check_window(*start, *end)
            }
            RainForcing::Raster { rates, start, end } => {
                if rates.len() != cells {
                    return Err(Error::Invalid(format!(
                        "rain raster has {} cells, grid has {cells}",
                        rates.len()
                    )));
                }
                if rates.iter().any(|r| !(*r >= T::zero() && r.is_finite())) {
                    return Err(Error::Invalid("rain raster contains a negative or non-finite rate".into()));
                }
                check_window(*start, *end)
            }
        }
    }

    pub fn active(&self, t: T) -> bool {
        match self {
            RainForcing::None => false,
            RainForcing::Uniform { start, end, .. } | RainForcing::Raster { start, end, .. } => t >= *start && t < *end,
        }
    }

    /// Instants where the rate switches on or off.
    pub fn edges(&self) -> Vec<T> {
        match self {
            RainForcing::None => Vec::new(),
            RainForcing::Uniform { start, end, .. } | RainForcing::Raster { start, end, .. } => vec![*start, *end],
        }
    }
}

/// Rain rate at time `t` on global cell `cell` (row-major index).
pub fn rain_rate<T: Real>(forcing: &RainForcing<T>, t: T, cell: usize) -> T {
    if !forcing.active(t) {
        return T::zero();
    }
    match forcing {
        RainForcing::None => T::zero(),
        RainForcing::Uniform { rate, .. } => *rate,
        RainForcing::Raster { rates, .. } => rates.get(cell).copied().unwrap_or_else(T::zero),
    }
}
