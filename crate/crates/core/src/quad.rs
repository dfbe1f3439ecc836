//! Composite Simpson quadrature, fixed and with panel doubling.

use core::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::phase::PhaseValue;

pub const MAX_PANELS: usize = 1 << 22;

/// Values a quadrature rule can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    const ZERO: Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    const ZERO: Self = 0.0;
    #[inline]
    fn magnitude(self) -> f64 {
        libm::fabs(self)
    }
}

impl QuadValue for PhaseValue {
    const ZERO: Self = PhaseValue::ZERO;
    #[inline]
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Composite Simpson with `panels` subintervals (rounded up to even).
pub fn simpson<T: QuadValue>(mut f: impl FnMut(f64) -> T, a: f64, b: f64, panels: usize) -> T {
    let n = (panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut odd = T::ZERO;
    let mut even = T::ZERO;
    for j in 1..n {
        let v = f(a + j as f64 * h);
        if j % 2 == 1 {
            odd = odd + v;
        } else {
            even = even + v;
        }
    }
    (f(a) + f(b) + odd * 4.0 + even * 2.0) * (h / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converged<T> {
    pub value: T,
    pub panels: usize,
}

/// Simpson with panel doubling until two successive estimates agree to
/// `rel_tol`. Every function value is computed once.
pub fn simpson_doubling<T: QuadValue>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    start_panels: usize,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Converged<T>> {
    let mut n = (start_panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let ends = f(a) + f(b);
    let mut even = T::ZERO;
    let mut odd = T::ZERO;
    for j in 1..n {
        let v = f(a + j as f64 * h);
        if j % 2 == 1 {
            odd = odd + v;
        } else {
            even = even + v;
        }
    }
    let mut prev = (ends + odd * 4.0 + even * 2.0) * (h / 3.0);
    loop {
        if n * 2 > max_panels {
            return Err(Error::NoConvergence { panels: n });
        }
        // the old nodes all become even nodes of the refined rule
        even = even + odd;
        n *= 2;
        let h = (b - a) / n as f64;
        odd = T::ZERO;
        for j in (1..n).step_by(2) {
            odd = odd + f(a + j as f64 * h);
        }
        let next = (ends + odd * 4.0 + even * 2.0) * (h / 3.0);
        let diff = (next - prev).magnitude();
        if diff <= rel_tol * next.magnitude() || diff == 0.0 {
            return Ok(Converged { value: next, panels: n });
        }
        prev = next;
    }
}
