//! Complex values and the additive character `e(t) = exp(2 pi i t)`.

use core::f64::consts::PI;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::dd::two_prod;

/// A complex number; unit phases produced by [`unit_phase`] have modulus one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseValue {
    pub re: f64,
    pub im: f64,
}

impl PhaseValue {
    pub const ZERO: Self = Self { re: 0.0, im: 0.0 };
    pub const ONE: Self = Self { re: 1.0, im: 0.0 };

    #[inline]
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Self::new(self.re * s, self.im * s)
    }
}

impl Add for PhaseValue {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl AddAssign for PhaseValue {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.re += o.re;
        self.im += o.im;
    }
}

impl Sub for PhaseValue {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl Neg for PhaseValue {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl Mul for PhaseValue {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl Mul<f64> for PhaseValue {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

/// `e(t) = (cos 2 pi t, sin 2 pi t)`.
///
/// `t` is reduced modulo 1 first, then to the nearest quarter turn, so the
/// quarter points come out exact and large arguments keep their fractional
/// part.
pub fn unit_phase(t: f64) -> PhaseValue {
    let f = t - libm::round(t);
    let quarter = libm::round(4.0 * f);
    let r = f - 0.25 * quarter;
    let (s, c) = libm::sincos(2.0 * PI * r);
    match quarter as i32 & 3 {
        0 => PhaseValue::new(c, s),
        1 => PhaseValue::new(-s, c),
        2 => PhaseValue::new(-c, -s),
        _ => PhaseValue::new(s, -c),
    }
}

/// `e(alpha * n)`, forming the product exactly before the reduction.
pub fn unit_phase_product(alpha: f64, n: f64) -> PhaseValue {
    let (hi, lo) = two_prod(alpha, n);
    unit_phase((hi - libm::round(hi)) + lo)
}
