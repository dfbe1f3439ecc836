//! The smoothing kernel `theta` and its Fourier transform `Theta`.
//!
//! `theta` is the indicator of `[-a, a]` convolved with `k` normalized
//! indicators of `[-b, b]`, where `a = 7 eps / 8` and `b = eps / (8k)`. It is
//! one on `|y| <= 3 eps / 4`, zero on `|y| >= eps`, and
//!
//! ```text
//! Theta(x) = sin(2 pi a x) / (pi x) * (sin(2 pi b x) / (2 pi b x))^k
//! ```
//!
//! which gives `|Theta(x)| <= min(7 eps / 4, 1 / (pi |x|), (1 / (pi |x|)) (k / (2 pi |x| eps / 8))^k)`
//! term by term. `theta` is stored on a mesh; `Theta` is always the closed form.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::phase::unit_phase;

pub const DEFAULT_MESH_POINTS: usize = 1 << 14;
pub const MAX_ORDER: u32 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingKernel {
    epsilon: f64,
    k: u32,
    a: f64,
    b: f64,
    step: f64,
    values: Vec<f64>,
    // running integrals of the interpolant: C = int theta, D = int C
    cum: Vec<f64>,
    cum2: Vec<f64>,
}

/// Build the kernel for `epsilon` and smoothness order `k` on a uniform mesh
/// over `[-epsilon, epsilon]`. The mesh is made odd so that `0` is a node.
pub fn make_kernel(epsilon: f64, k: u32, mesh_points: usize) -> Result<SmoothingKernel> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::KernelDomain("epsilon must be positive and finite"));
    }
    if !(1..=MAX_ORDER).contains(&k) {
        return Err(Error::KernelDomain("k must lie in 1..=64"));
    }
    if mesh_points < 1024 {
        return Err(Error::KernelDomain("mesh needs at least 1024 points"));
    }
    let n = mesh_points | 1;
    let a = 7.0 * epsilon / 8.0;
    let b = epsilon / (8.0 * k as f64);
    let step = 2.0 * epsilon / (n - 1) as f64;
    let node = |i: usize| -epsilon + i as f64 * step;

    // the first convolution is the trapezoid, sampled exactly
    let mut values: Vec<f64> = (0..n)
        .map(|i| ((a + b - libm::fabs(node(i))) / (2.0 * b)).clamp(0.0, 1.0))
        .collect();

    let centre = (n - 1) / 2;
    let mut prefix = vec![0.0; n];
    for _ in 1..k {
        running_integral(&values, step, &mut prefix);
        let mut next = vec![0.0; n];
        // left half only: the prefix integral is accurate where it is small,
        // and theta is even
        for i in 0..=centre {
            let y = node(i);
            let hi = integral_to(&values, &prefix, step, epsilon, y + b);
            let lo = integral_to(&values, &prefix, step, epsilon, y - b);
            next[i] = ((hi - lo) / (2.0 * b)).max(0.0);
        }
        for i in centre + 1..n {
            next[i] = next[n - 1 - i];
        }
        values = next;
    }

    let plateau = 0.75 * epsilon;
    for (i, v) in values.iter_mut().enumerate() {
        let y = libm::fabs(node(i));
        if y <= plateau {
            *v = 1.0;
        } else if y >= epsilon {
            *v = 0.0;
        } else {
            *v = v.clamp(0.0, 1.0);
        }
    }

    let mut cum = vec![0.0; n];
    running_integral(&values, step, &mut cum);
    let mut cum2 = vec![0.0; n];
    for j in 0..n - 1 {
        cum2[j + 1] =
            cum2[j] + cum[j] * step + step * step * (2.0 * values[j] + values[j + 1]) / 6.0;
    }

    Ok(SmoothingKernel {
        epsilon,
        k,
        a,
        b,
        step,
        values,
        cum,
        cum2,
    })
}

fn running_integral(values: &[f64], step: f64, out: &mut [f64]) {
    out[0] = 0.0;
    for j in 0..values.len() - 1 {
        out[j + 1] = out[j] + 0.5 * step * (values[j] + values[j + 1]);
    }
}

/// `int_{-eps}^{s}` of the piecewise-linear interpolant.
fn integral_to(values: &[f64], prefix: &[f64], step: f64, epsilon: f64, s: f64) -> f64 {
    let n = values.len();
    let u = (s + epsilon) / step;
    if u <= 0.0 {
        return 0.0;
    }
    let j = libm::floor(u) as usize;
    if j >= n - 1 {
        return prefix[n - 1];
    }
    let du = (u - j as f64) * step;
    let slope = (values[j + 1] - values[j]) / step;
    prefix[j] + du * (values[j] + 0.5 * slope * du)
}

impl SmoothingKernel {
    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Half-width of the central indicator, `7 eps / 8`.
    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Half-width of each smoothing box, `eps / (8k)`.
    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mesh_len(&self) -> usize {
        self.values.len()
    }

    /// Mesh nodes and sampled values.
    pub fn mesh(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (-self.epsilon + i as f64 * self.step, v))
    }

    /// `theta(y)`: exactly one on the plateau, exactly zero off the support,
    /// linear interpolation of the mesh in between.
    pub fn theta(&self, y: f64) -> f64 {
        let ay = libm::fabs(y);
        if ay <= 0.75 * self.epsilon {
            return 1.0;
        }
        if ay >= self.epsilon {
            return 0.0;
        }
        let u = (y + self.epsilon) / self.step;
        let j = (libm::floor(u) as usize).min(self.values.len() - 2);
        let f = u - j as f64;
        self.values[j] + f * (self.values[j + 1] - self.values[j])
    }

    /// `Theta(x) = int theta(y) e(-xy) dy` in closed form.
    pub fn theta_transform(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 2.0 * self.a;
        }
        let head = unit_phase(self.a * x).im / (PI * x);
        let z = 2.0 * PI * self.b * x;
        let sinc = unit_phase(self.b * x).im / z;
        if sinc == 0.0 {
            return 0.0;
        }
        let mag = libm::exp(self.k as f64 * libm::log(libm::fabs(sinc)));
        let sign = if sinc < 0.0 && self.k % 2 == 1 { -1.0 } else { 1.0 };
        head * sign * mag
    }

    /// `min(7 eps / 4, 1 / (pi |x|), (1 / (pi |x|)) (k / (2 pi |x| eps / 8))^k)`.
    pub fn transform_bound(&self, x: f64) -> f64 {
        let first = 1.75 * self.epsilon;
        if x == 0.0 {
            return first;
        }
        let ax = libm::fabs(x);
        let second = 1.0 / (PI * ax);
        let k = self.k as f64;
        let third = second * libm::exp(k * libm::log(k / (2.0 * PI * ax * self.epsilon / 8.0)));
        first.min(second).min(third)
    }

    /// Which of the three bound branches is active at `x` (0, 1 or 2).
    pub fn bound_branch(&self, x: f64) -> usize {
        if x == 0.0 {
            return 0;
        }
        let ax = libm::fabs(x);
        let first = 1.75 * self.epsilon;
        let second = 1.0 / (PI * ax);
        let k = self.k as f64;
        let third = second * libm::exp(k * libm::log(k / (2.0 * PI * ax * self.epsilon / 8.0)));
        if first <= second && first <= third {
            0
        } else if second <= third {
            1
        } else {
            2
        }
    }

    /// Check `|Theta(x)| <= transform_bound(x)` on a grid.
    pub fn verify_bounds(&self, xs: &[f64]) -> BoundReport {
        let mut report = BoundReport {
            points: xs.len(),
            violations: 0,
            worst_ratio: 0.0,
            min_slack: f64::INFINITY,
        };
        for &x in xs {
            let t = libm::fabs(self.theta_transform(x));
            let bound = self.transform_bound(x);
            if t > bound * (1.0 + 1e-12) {
                report.violations += 1;
            }
            if bound > 0.0 {
                report.worst_ratio = report.worst_ratio.max(t / bound);
            }
            report.min_slack = report.min_slack.min(bound - t);
        }
        report
    }

    /// Mesh quadrature of `theta`; `7 eps / 4` up to discretization.
    #[inline]
    pub fn mass(&self) -> f64 {
        self.cum[self.cum.len() - 1]
    }

    /// `C(u) = int_{-inf}^{u} theta`.
    pub fn cumulative(&self, u: f64) -> f64 {
        let s = (u + self.epsilon) / self.step;
        if s <= 0.0 {
            return 0.0;
        }
        let n = self.values.len();
        if s >= (n - 1) as f64 {
            return self.mass();
        }
        let j = libm::floor(s) as usize;
        let du = (s - j as f64) * self.step;
        let slope = (self.values[j + 1] - self.values[j]) / self.step;
        self.cum[j] + du * (self.values[j] + 0.5 * slope * du)
    }

    /// `D(u) = int_{-inf}^{u} C`.
    pub fn second_cumulative(&self, u: f64) -> f64 {
        let s = (u + self.epsilon) / self.step;
        if s <= 0.0 {
            return 0.0;
        }
        let n = self.values.len();
        if s >= (n - 1) as f64 {
            return self.cum2[n - 1] + self.mass() * (u - self.epsilon);
        }
        let j = libm::floor(s) as usize;
        let du = (s - j as f64) * self.step;
        let slope = (self.values[j + 1] - self.values[j]) / self.step;
        self.cum2[j]
            + du * (self.cum[j] + du * (0.5 * self.values[j] + slope * du / 6.0))
    }

    /// Truncated inversion `int_{-T}^{T} Theta(x) e(xy) dx` at each `y`.
    ///
    /// `Theta(x) cos(2 pi x y)` has spectrum inside `|nu| <= eps + |y|`, so a
    /// Simpson step of `1 / (8 (eps + max|y|))` resolves it.
    pub fn inverse_transform(&self, ys: &[f64], t_max: f64) -> Vec<f64> {
        let ymax = ys.iter().fold(0.0f64, |m, y| m.max(libm::fabs(*y)));
        let h0 = 1.0 / (8.0 * (self.epsilon + ymax));
        let mut n = libm::ceil(t_max / h0) as usize;
        n += n % 2;
        let n = n.max(2);
        let h = t_max / n as f64;
        let weighted: Vec<f64> = (0..=n)
            .map(|j| {
                let w = if j == 0 || j == n {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * self.theta_transform(j as f64 * h)
            })
            .collect();
        ys.iter()
            .map(|&y| {
                let mut acc = crate::accum::Neumaier::new();
                for (j, &w) in weighted.iter().enumerate() {
                    acc.add(w * unit_phase(j as f64 * h * y).re);
                }
                2.0 * acc.value() * h / 3.0
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub points: usize,
    pub violations: usize,
    /// Largest `|Theta| / bound` seen.
    pub worst_ratio: f64,
    /// Smallest `bound - |Theta|` seen.
    pub min_slack: f64,
}
