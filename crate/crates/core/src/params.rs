//! Problem instance and the derived scale parameters `X`, `Delta`, `epsilon`, `H`.
//!
//! All logarithms are natural. `X` comes from a continued-fraction denominator
//! `q0` as `X = q0^(13/6)`; `Delta = X^(-12/13) log X`,
//! `epsilon = X^((37 - 38 gamma)/26) (log X)^10` and `H = (log X)^2 / epsilon`.
//!
//! At any desk-reachable `X` the formula value of `epsilon` is far above one,
//! which pushes `H` below `Delta`. A run may therefore carry a user override
//! `epsilon_user`; when present it drives the effective `epsilon` and `H`, and
//! both values are kept for reporting.

use crate::error::{Error, Result};

/// The Piatetski-Shapiro exponent `gamma`, restricted to `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GammaExponent(f64);

impl GammaExponent {
    pub const THEOREM_LOWER: f64 = 37.0 / 38.0;

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::GammaOutOfRange(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// True iff `37/38 < gamma < 1`, the range in which the triple theorem applies.
    pub fn theorem_range(self) -> bool {
        self.0 > Self::THEOREM_LOWER
    }
}

/// Coefficients of the linear form `lambda1 p1 + lambda2 p2 + lambda3 p3 + eta`.
///
/// Irrationality of `lambda1 / lambda2` cannot be checked in floating point; it
/// is carried as the caller's assertion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub eta: f64,
    pub irrationality_asserted: bool,
}

impl Coefficients {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64, eta: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            lambda3,
            eta,
            irrationality_asserted: true,
        }
    }

    #[inline]
    pub fn lambdas(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }

    /// Value of the linear form at `(y1, y2, y3)`.
    #[inline]
    pub fn form(&self, y1: f64, y2: f64, y3: f64) -> f64 {
        self.lambda1 * y1 + self.lambda2 * y2 + self.lambda3 * y3 + self.eta
    }

    /// Exact range `[min, max]` of the linear form over the cube `[lo, hi]^3`.
    pub fn form_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut min = self.eta;
        let mut max = self.eta;
        for l in self.lambdas() {
            let (a, b) = (l * lo, l * hi);
            if a <= b {
                min += a;
                max += b;
            } else {
                min += b;
                max += a;
            }
        }
        (min, max)
    }
}

/// Sign-normalized coefficients: `lambda1 > 0`, `lambda2 > 0`, `lambda3 < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalForm {
    pub coefficients: Coefficients,
    /// `permutation[i]` is the input index that landed in slot `i`.
    pub permutation: [usize; 3],
    /// Whether all of `(lambda, eta)` were negated.
    pub negated: bool,
}

impl CanonicalForm {
    pub fn is_identity(&self) -> bool {
        self.permutation == [0, 1, 2] && !self.negated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientReport {
    pub all_nonzero: bool,
    pub all_finite: bool,
    pub mixed_signs: bool,
    pub irrationality_asserted: bool,
    pub canonical: Option<CanonicalForm>,
}

impl CoefficientReport {
    pub fn passed(&self) -> bool {
        self.all_nonzero && self.all_finite && self.mixed_signs && self.irrationality_asserted
    }

    /// Human-readable list of failed hypotheses.
    pub fn failures(&self) -> alloc::vec::Vec<&'static str> {
        let mut out = alloc::vec::Vec::new();
        if !self.all_finite {
            out.push("coefficients must be finite");
        }
        if !self.all_nonzero {
            out.push("lambda1, lambda2, lambda3 must be non-zero");
        }
        if !self.mixed_signs {
            out.push("lambda1, lambda2, lambda3 are all of the same sign");
        }
        if !self.irrationality_asserted {
            out.push("lambda1/lambda2 is not asserted irrational");
        }
        out
    }
}

/// Check the hypotheses on the coefficients and report the canonical sign
/// normalization without touching the input.
pub fn validate_coefficients(c: &Coefficients) -> CoefficientReport {
    let ls = c.lambdas();
    let all_finite = ls.iter().all(|l| l.is_finite()) && c.eta.is_finite();
    let all_nonzero = ls.iter().all(|&l| l != 0.0);
    let positives = ls.iter().filter(|&&l| l > 0.0).count();
    let mixed_signs = all_nonzero && positives != 0 && positives != 3;

    let canonical = (all_finite && mixed_signs).then(|| {
        let negated = positives == 1;
        let sign = if negated { -1.0 } else { 1.0 };
        let signed = ls.map(|l| sign * l);
        let neg_slot = signed.iter().position(|&l| l < 0.0).unwrap_or(2);
        let mut permutation = [0usize; 3];
        let mut slot = 0;
        for (i, _) in signed.iter().enumerate().filter(|&(i, _)| i != neg_slot) {
            permutation[slot] = i;
            slot += 1;
        }
        permutation[2] = neg_slot;
        CanonicalForm {
            coefficients: Coefficients {
                lambda1: signed[permutation[0]],
                lambda2: signed[permutation[1]],
                lambda3: signed[permutation[2]],
                eta: sign * c.eta,
                irrationality_asserted: c.irrationality_asserted,
            },
            permutation,
            negated,
        }
    });

    CoefficientReport {
        all_nonzero,
        all_finite,
        mixed_signs,
        irrationality_asserted: c.irrationality_asserted,
        canonical,
    }
}

/// True iff some `y` in `(lambda0 X, X]^3` has `|form(y)| < epsilon`.
///
/// The form is linear, so its range over the cube is an interval whose
/// endpoints sit at cube corners; the open window `(-epsilon, epsilon)` meets
/// it iff `min < epsilon` and `max > -epsilon`.
pub fn feasible_box_check(c: &Coefficients, lambda0: f64, x: f64, epsilon: f64) -> bool {
    let (min, max) = c.form_range(lambda0 * x, x);
    min < epsilon && max > -epsilon
}

/// Scale parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParameters {
    /// Denominator `X` was derived from; `None` when `X` was given directly.
    pub q0: Option<u64>,
    pub gamma: GammaExponent,
    pub lambda0: f64,
    pub x: f64,
    pub delta: f64,
    /// `X^((37 - 38 gamma)/26) (log X)^10`.
    pub epsilon_formula: f64,
    /// `(log X)^2 / epsilon_formula`.
    pub h_formula: f64,
    pub epsilon_user: Option<f64>,
}

impl RunParameters {
    /// The epsilon driving kernels and `H`: the override when present.
    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon_user.unwrap_or(self.epsilon_formula)
    }

    /// `(log X)^2 / epsilon()`.
    #[inline]
    pub fn h(&self) -> f64 {
        let l = libm::log(self.x);
        l * l / self.epsilon()
    }

    #[inline]
    pub fn log_x(&self) -> f64 {
        libm::log(self.x)
    }

    /// Lower end `lambda0 X` of the summation range.
    #[inline]
    pub fn lower(&self) -> f64 {
        self.lambda0 * self.x
    }

    /// `floor(log X)`, the smoothness order paired with `X`.
    pub fn kernel_order(&self) -> u32 {
        libm::floor(self.log_x()).max(1.0) as u32
    }

    /// Parameters at an explicit scale `X` rather than one derived from `q0`.
    pub fn at_scale(
        x: f64,
        gamma: GammaExponent,
        lambda0: f64,
        epsilon_user: Option<f64>,
    ) -> Result<Self> {
        if !(x.is_finite() && x > 1.0) {
            return Err(Error::ScaleOutOfRange(x));
        }
        Self::build(None, x, gamma, lambda0, epsilon_user)
    }

    fn build(
        q0: Option<u64>,
        x: f64,
        gamma: GammaExponent,
        lambda0: f64,
        epsilon_user: Option<f64>,
    ) -> Result<Self> {
        if !(lambda0 > 0.0 && lambda0 < 1.0) {
            return Err(Error::Lambda0OutOfRange(lambda0));
        }
        if let Some(e) = epsilon_user {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::EpsilonOutOfRange(e));
            }
        }
        let l = libm::log(x);
        let delta = libm::exp(-12.0 / 13.0 * l) * l;
        let epsilon_formula = libm::exp((37.0 - 38.0 * gamma.value()) / 26.0 * l) * libm::pow(l, 10.0);
        let p = Self {
            q0,
            gamma,
            lambda0,
            x,
            delta,
            epsilon_formula,
            h_formula: l * l / epsilon_formula,
            epsilon_user,
        };
        let h = p.h();
        if !(delta < h) {
            return Err(Error::DeltaNotBelowH { delta, h });
        }
        Ok(p)
    }
}

/// Derive `X`, `Delta`, `epsilon`, `H` from `q0`.
///
/// The `Delta < H` requirement is checked against the effective `H`, i.e. the
/// one built from `epsilon_user` when an override is given.
pub fn derive_parameters(
    q0: u64,
    gamma: GammaExponent,
    lambda0: f64,
    epsilon_user: Option<f64>,
) -> Result<RunParameters> {
    if q0 < 2 {
        return Err(Error::Q0TooSmall(q0));
    }
    let x = libm::exp(13.0 / 6.0 * libm::log(q0 as f64));
    RunParameters::build(Some(q0), x, gamma, lambda0, epsilon_user)
}
