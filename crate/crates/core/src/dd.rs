//! Double-double arithmetic (about 106 bits of mantissa).
//!
//! Used where a plain `f64` power lands too close to an integer to be floored
//! safely, and for the fractional parts entering the `Sigma'`/`Omega` split.

use core::ops::{Add, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

const LN2: DoubleDouble = DoubleDouble {
    hi: 6.931_471_805_599_452_862e-1,
    lo: 2.319_046_813_846_299_558e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

/// Exact product `a * b = p + e` (Dekker).
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, e)
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    #[inline]
    fn renorm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        Self::renorm(p, e + self.lo * b)
    }

    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let (s, f) = two_sum(self.hi, -p);
        let f = f - e + self.lo;
        let q2 = (s + f) / b;
        Self::renorm(q1, q2)
    }

    /// Multiply by an exact power of two.
    #[inline]
    pub fn scale2(self, n: i32) -> Self {
        Self {
            hi: libm::scalbn(self.hi, n),
            lo: libm::scalbn(self.lo, n),
        }
    }

    /// Floor, treating values within `1e-22` (relative) of an integer as that
    /// integer: exact integer powers then floor correctly despite rounding in
    /// the last double-double bits.
    pub fn floor_snapped(self) -> f64 {
        let m = libm::round(self.hi);
        let scale = if libm::fabs(m) > 1.0 { libm::fabs(m) } else { 1.0 };
        if libm::fabs((self - Self::from_f64(m)).to_f64()) <= 1e-22 * scale {
            m
        } else {
            self.floor()
        }
    }

    pub fn floor(self) -> f64 {
        let f = libm::floor(self.hi);
        if f == self.hi {
            // hi is integral; the sign of lo decides
            f + libm::floor(self.lo)
        } else {
            f
        }
    }

    /// Fractional part `x - floor(x)` in `[0, 1)`, rounded to `f64`.
    pub fn fract(self) -> f64 {
        let r = (self - DoubleDouble::from_f64(self.floor())).to_f64();
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    }

    /// `e^x`.
    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        let n = libm::round(self.hi / LN2.hi);
        let r = self - LN2.mul_f64(n);
        // e^r = (e^{r/1024})^1024, evaluated through expm1 to keep small values exact
        let s = r.scale2(-10);
        let mut term = s;
        let mut em1 = s;
        for i in 2..=14 {
            term = (term * s).div_f64(i as f64);
            em1 = em1 + term;
            if libm::fabs(term.hi) < 1e-36 {
                break;
            }
        }
        for _ in 0..10 {
            // e^{2s} - 1 = (e^s - 1)(e^s - 1 + 2)
            em1 = em1 * (em1 + Self::from_f64(2.0));
        }
        (em1 + Self::ONE).scale2(n as i32)
    }

    /// Natural logarithm of a positive double, refined by one Newton step.
    pub fn ln(x: f64) -> Self {
        debug_assert!(x > 0.0);
        let y0 = libm::log(x);
        let e = Self::from_f64(-y0).exp();
        let t = e.mul_f64(x) - Self::ONE;
        Self::from_f64(y0) + t
    }

    /// `x^e` for `x > 0`.
    pub fn powf(x: f64, e: f64) -> Self {
        (Self::ln(x).mul_f64(e)).exp()
    }

    /// `x^(1/g)` for `x > 0`, dividing the logarithm instead of inverting `g`.
    pub fn pow_recip(x: f64, g: f64) -> Self {
        (Self::ln(x).div_f64(g)).exp()
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::renorm(s, e + f)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        Self::renorm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

/// Tolerance below which a double power is considered too close to an integer.
#[inline]
fn integer_guard(v: f64) -> f64 {
    let rel = v * (1.0 / (1u64 << 40) as f64);
    if rel > 1e-9 {
        rel
    } else {
        1e-9
    }
}

/// `floor(x^e)` for `x > 0`, recomputed in double-double when the double
/// result sits within the guard band of an integer.
pub fn floor_pow(x: f64, e: f64) -> f64 {
    let v = libm::pow(x, e);
    let r = libm::round(v);
    if libm::fabs(v - r) > integer_guard(v) {
        libm::floor(v)
    } else {
        DoubleDouble::powf(x, e).floor_snapped()
    }
}

/// `floor(x^(1/g))` for `x > 0`, with the same guard as [`floor_pow`].
pub fn floor_pow_recip(x: f64, g: f64) -> f64 {
    let v = libm::exp(libm::log(x) / g);
    let r = libm::round(v);
    if libm::fabs(v - r) > integer_guard(v) {
        libm::floor(v)
    } else {
        DoubleDouble::pow_recip(x, g).floor_snapped()
    }
}

/// `ceil(x^e)` for `x > 0`, guarded like [`floor_pow`].
pub fn ceil_pow(x: f64, e: f64) -> f64 {
    let v = libm::pow(x, e);
    let r = libm::round(v);
    if libm::fabs(v - r) > integer_guard(v) {
        libm::ceil(v)
    } else {
        -(-DoubleDouble::powf(x, e)).floor_snapped()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_and_ln_round_trip() {
        for &x in &[1e-3, 0.5, 1.0, 2.0, 10.0, 12345.678, 1e12] {
            let back = DoubleDouble::ln(x).exp();
            let err = (back - DoubleDouble::from_f64(x)).to_f64() / x;
            assert!(err.abs() < 1e-28, "x = {x}, err = {err}");
        }
    }

    #[test]
    fn exp_matches_libm() {
        for &x in &[-20.0, -1.0, 0.0, 0.3, 1.0, 5.5, 30.0] {
            let d = DoubleDouble::from_f64(x).exp().to_f64();
            let s = libm::exp(x);
            assert!(((d - s) / s).abs() < 4e-16);
        }
    }

    #[test]
    fn square_of_sqrt_two() {
        // (2^{1/2})^2 in double-double comes back to 2 far beyond double precision
        let r = DoubleDouble::powf(2.0, 0.5);
        let sq = r * r;
        assert!((sq - DoubleDouble::from_f64(2.0)).to_f64().abs() < 1e-30);
    }

    #[test]
    fn floor_handles_integral_hi() {
        let d = DoubleDouble { hi: 5.0, lo: -1e-20 };
        assert_eq!(d.floor(), 4.0);
        let d = DoubleDouble { hi: 5.0, lo: 1e-20 };
        assert_eq!(d.floor(), 5.0);
        assert!(d.fract() > 0.0 && d.fract() < 1e-19);
    }

    #[test]
    fn floor_pow_exact_powers() {
        assert_eq!(floor_pow(9.0, 0.5), 3.0);
        assert_eq!(floor_pow(1024.0, 0.1), 2.0);
        assert_eq!(floor_pow_recip(3.0, 0.5), 9.0);
        // 1/0.1 rounds below 10 in binary, so 2^(1/0.1) is just under 1024
        assert_eq!(floor_pow_recip(2.0, 0.1), 1023.0);
        assert_eq!(floor_pow_recip(2.0, 0.5), 4.0);
        assert_eq!(floor_pow(4.0, 0.5), 2.0);
        assert_eq!(ceil_pow(4.0, 0.5), 2.0);
        assert_eq!(ceil_pow(3.0, 0.5), 2.0);
    }
}
