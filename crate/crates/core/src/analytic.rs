//! Closed-form 1D dam-break solutions on a flat frictionless bed.

use crate::num::Real;

/// A dam at `x0` separating still water of depth `h_l` (left) from depth
/// `h_r ≥ 0` (right), released at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamBreak<T> {
    pub h_l: T,
    pub h_r: T,
    pub x0: T,
    pub g: T,
    /// Depth of the plateau between the rarefaction and the shock (zero
    /// for a dry bed).
    pub h_m: T,
    pub u_m: T,
    /// Shock speed (the front speed `2√(g h_l)` on a dry bed).
    pub shock: T,
}

impl<T: Real> DamBreak<T> {
    /// Stoker's wet-bed solution; `h_r == 0` gives Ritter's dry-bed one.
    pub fn new(h_l: T, h_r: T, x0: T, g: T) -> Self {
        assert!(h_l > h_r && h_r >= T::zero(), "dam break needs h_l > h_r >= 0");
        let c_l = (g * h_l).sqrt();
        if h_r == T::zero() {
            return Self {
                h_l,
                h_r,
                x0,
                g,
                h_m: T::zero(),
                u_m: T::zero(),
                shock: T::two() * c_l,
            };
        }
        let h_m = stoker_middle_depth(h_l, h_r, g);
        let u_m = T::two() * (c_l - (g * h_m).sqrt());
        let shock = h_m * u_m / (h_m - h_r);
        Self {
            h_l,
            h_r,
            x0,
            g,
            h_m,
            u_m,
            shock,
        }
    }

    /// Depth and velocity at `(x, t)`.
    pub fn state(&self, x: T, t: T) -> (T, T) {
        if t <= T::zero() {
            return if x < self.x0 { (self.h_l, T::zero()) } else { (self.h_r, T::zero()) };
        }
        let c_l = (self.g * self.h_l).sqrt();
        let xi = (x - self.x0) / t;
        if xi <= -c_l {
            return (self.h_l, T::zero());
        }
        let nine = T::lit(9.0);
        let three = T::lit(3.0);
        let fan = |xi: T| {
            let s = T::two() * c_l - xi;
            (s * s / (nine * self.g), T::two() * (xi + c_l) / three)
        };
        if self.h_r == T::zero() {
            return if xi < self.shock { fan(xi) } else { (T::zero(), T::zero()) };
        }
        let c_m = (self.g * self.h_m).sqrt();
        if xi <= self.u_m - c_m {
            fan(xi)
        } else if xi <= self.shock {
            (self.h_m, self.u_m)
        } else {
            (self.h_r, T::zero())
        }
    }

    pub fn depth(&self, x: T, t: T) -> T {
        self.state(x, t).0
    }
}

/// Plateau depth of Stoker's solution by Newton iteration on the balance
/// between the rarefaction and the shock velocity jumps.
pub fn stoker_middle_depth<T: Real>(h_l: T, h_r: T, g: T) -> T {
    let c_l = (g * h_l).sqrt();
    let f = |h: T| {
        let rare = T::two() * (c_l - (g * h).sqrt());
        let jump = (h - h_r) * (g * (h + h_r) / (T::two() * h * h_r)).sqrt();
        rare - jump
    };
    let mut h = (h_l + h_r) * T::half();
    for _ in 0..100 {
        let eps = h * T::lit(1e-7);
        let d = (f(h + eps) - f(h - eps)) / (T::two() * eps);
        let step = f(h) / d;
        let mut next = h - step;
        if next <= h_r {
            next = (h + h_r) * T::half();
        } else if next >= h_l {
            next = (h + h_l) * T::half();
        }
        if (next - h).abs() <= T::epsilon() * h * T::lit(4.0) {
            return next;
        }
        h = next;
    }
    h
}

/// Lake-at-rest depth for free-surface level `level`.
pub fn lake_at_rest_depth<T: Real>(level: T, z: T) -> T {
    (level - z).max(T::zero())
}
