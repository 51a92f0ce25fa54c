//! Scalar abstraction: plain `f64` and forward-mode dual numbers.
//!
//! The Farey walk only ever branches on exact slope arithmetic, never on
//! trace values, so a single generic implementation of the flip recursion
//! serves three purposes: plain evaluation (`f64`), exact directional
//! derivatives (`Dual`), and paired evaluation of two points at once
//! (`TracePair`, used by the distance search).

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Trace magnitude beyond which a Farey walk reports a range error instead
/// of silently overflowing. Corresponds to a geodesic of length ≈ 1382.
pub const TRACE_CAP: f64 = 1e300;

/// Minimal interface needed by the flip recursion `t' = t_u·t_v − t_w`.
pub trait Flip: Copy {
    /// `u*v − self`, the Markov flip replacing this trace.
    fn flip_from(self, u: Self, v: Self) -> Self;
    /// Largest magnitude carried, for overflow guards.
    fn magnitude(self) -> f64;
}

/// Full scalar interface for the analytic kernels (lengths, twists,
/// stretch formulas). Implemented by `f64` and [`Dual`].
pub trait Real:
    Flip
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialEq
    + std::fmt::Debug
{
    /// Lift a constant.
    fn c(v: f64) -> Self;
    /// Primal (value) part.
    fn val(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn cosh(self) -> Self;
    fn sinh(self) -> Self;
    /// Inverse hyperbolic cosine; callers clamp the argument to ≥ 1 first.
    fn acosh(self) -> Self;
    /// Raise the primal part to at least `lo` (derivative zeroed when clamped).
    fn clamp_min(self, lo: f64) -> Self;
}

impl Flip for f64 {
    #[inline]
    fn flip_from(self, u: Self, v: Self) -> Self {
        u * v - self
    }
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Real for f64 {
    #[inline]
    fn c(v: f64) -> Self {
        v
    }
    #[inline]
    fn val(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    #[inline]
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    #[inline]
    fn acosh(self) -> Self {
        f64::acosh(self)
    }
    #[inline]
    fn clamp_min(self, lo: f64) -> Self {
        self.max(lo)
    }
}

/// Forward-mode dual number `re + ε·de` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    /// Value part.
    pub re: f64,
    /// Derivative part.
    pub de: f64,
}

impl Dual {
    #[inline]
    pub fn new(re: f64, de: f64) -> Self {
        Dual { re, de }
    }
    /// The active variable: value `v` with unit derivative.
    #[inline]
    pub fn var(v: f64) -> Self {
        Dual { re: v, de: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.de + o.de)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.de - o.de)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.re * o.de + self.de * o.re)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        Dual::new(self.re / o.re, (self.de * o.re - self.re * o.de) / (o.re * o.re))
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.de)
    }
}

impl Flip for Dual {
    #[inline]
    fn flip_from(self, u: Self, v: Self) -> Self {
        u * v - self
    }
    #[inline]
    fn magnitude(self) -> f64 {
        self.re.abs().max(self.de.abs())
    }
}

impl Real for Dual {
    #[inline]
    fn c(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    #[inline]
    fn val(self) -> f64 {
        self.re
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, e * self.de)
    }
    #[inline]
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.de / self.re)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.de / (2.0 * s))
    }
    #[inline]
    fn cosh(self) -> Self {
        Dual::new(self.re.cosh(), self.de * self.re.sinh())
    }
    #[inline]
    fn sinh(self) -> Self {
        Dual::new(self.re.sinh(), self.de * self.re.cosh())
    }
    #[inline]
    fn acosh(self) -> Self {
        // d/dx acosh = 1/sqrt(x²−1); callers guarantee re > 1.
        Dual::new(self.re.acosh(), self.de / (self.re * self.re - 1.0).sqrt())
    }
    #[inline]
    fn clamp_min(self, lo: f64) -> Self {
        if self.re < lo {
            Dual::new(lo, 0.0)
        } else {
            self
        }
    }
}

/// Two traces evolved in lockstep: the same Farey walk applied to two points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePair {
    pub a: f64,
    pub b: f64,
}

impl TracePair {
    #[inline]
    pub fn new(a: f64, b: f64) -> Self {
        TracePair { a, b }
    }
}

impl Flip for TracePair {
    #[inline]
    fn flip_from(self, u: Self, v: Self) -> Self {
        TracePair::new(u.a * v.a - self.a, u.b * v.b - self.b)
    }
    #[inline]
    fn magnitude(self) -> f64 {
        self.a.abs().max(self.b.abs())
    }
}
