//! Continued fractions, Dirichlet approximation with a capped denominator,
//! and the small-denominator dichotomy probe for `lambda1 t`, `lambda2 t`.
//!
//! A double is an exact dyadic rational, so the expansion is run in exact
//! `i128` arithmetic on that rational. Terms are refused once they only
//! re-express the rounding of the input.

use alloc::vec::Vec;

use crate::dd::{two_prod, DoubleDouble};
use crate::error::{Error, Result};
use crate::params::{Coefficients, RunParameters};

/// `a / q` in lowest terms with `q >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    a: i64,
    q: u64,
}

pub fn gcd(mut u: u64, mut v: u64) -> u64 {
    while v != 0 {
        let r = u % v;
        u = v;
        v = r;
    }
    u
}

impl Rational {
    /// Reduce `a / q` to lowest terms.
    pub fn new(a: i64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("denominator must be positive"));
        }
        let g = gcd(a.unsigned_abs(), q);
        Ok(Self { a: a / g as i64, q: q / g })
    }

    /// `a / q`, which must already be in lowest terms.
    pub fn coprime(a: i64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("denominator must be positive"));
        }
        if gcd(a.unsigned_abs(), q) != 1 {
            return Err(Error::NotCoprime { a, q });
        }
        Ok(Self { a, q })
    }

    #[inline]
    pub fn a(&self) -> i64 {
        self.a
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.a as f64 / self.q as f64
    }

    /// `|q x - a|`, accurate to a few units in the last place of the result.
    pub fn residual(&self, x: f64) -> f64 {
        let (ph, pl) = two_prod(x, self.q as f64);
        let d = (DoubleDouble { hi: ph, lo: pl } - DoubleDouble::from_f64(self.a as f64)).to_f64();
        libm::fabs(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergentSeq {
    pub x: f64,
    pub partial_quotients: Vec<i64>,
    pub convergents: Vec<Rational>,
    /// The expansion ended because the input carries no further information:
    /// an exact remainder, a remainder below `1e-12`, or a convergent equal to
    /// the input within half an ulp.
    pub rational_at_precision: bool,
}

const REMAINDER_FLOOR: f64 = 1e-12;
const MAX_DEN: i128 = 1 << 53;

/// Exact rational value `num / den` of a double, `den` a power of two.
fn dyadic(x: f64) -> Result<(i128, i128)> {
    if x == 0.0 {
        return Ok((0, 1));
    }
    if libm::fabs(x) >= 9.0e18 {
        return Err(Error::InvalidArgument("continued fraction input exceeds 2^63"));
    }
    let (f, e) = libm::frexp(x);
    let mut m = libm::scalbn(f, 53) as i128;
    let mut shift = 53 - e;
    if shift <= 0 {
        return Ok((m << (-shift), 1));
    }
    if shift > 120 {
        // below 2^-67: keep the 2^-120 multiple nearest to x
        m = libm::round(libm::scalbn(x, 120)) as i128;
        shift = 120;
    }
    while shift > 0 && m % 2 == 0 {
        m /= 2;
        shift -= 1;
    }
    Ok((m, 1i128 << shift))
}

/// Regular continued fraction of `x` with at most `max_terms` partial quotients.
pub fn continued_fraction(x: f64, max_terms: usize) -> Result<ConvergentSeq> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument("continued fraction input must be finite"));
    }
    if max_terms == 0 {
        return Err(Error::InvalidArgument("max_terms must be at least 1"));
    }
    let (mut num, mut den) = dyadic(x)?;
    let mut seq = ConvergentSeq {
        x,
        partial_quotients: Vec::new(),
        convergents: Vec::new(),
        rational_at_precision: false,
    };
    let (mut p_prev, mut q_prev): (i128, i128) = (0, 1);
    let (mut p, mut q): (i128, i128) = (1, 0);
    while seq.partial_quotients.len() < max_terms {
        let a = num.div_euclid(den);
        let rem = num - a * den;
        let (p_next, q_next) = (a * p + p_prev, a * q + q_prev);
        if q_next > MAX_DEN || p_next.abs() > i64::MAX as i128 {
            seq.rational_at_precision = true;
            break;
        }
        (p_prev, q_prev, p, q) = (p, q, p_next, q_next);
        seq.partial_quotients.push(a as i64);
        let r = Rational { a: p as i64, q: q as u64 };
        seq.convergents.push(r);
        if rem == 0
            || (rem as f64) / (den as f64) <= REMAINDER_FLOOR
            || r.residual(x) <= libm::fabs(x) * q as f64 * f64::EPSILON / 2.0
        {
            seq.rational_at_precision = true;
            break;
        }
        (num, den) = (den, rem);
    }
    Ok(seq)
}

/// `a / q` with `1 <= q <= big_q` and `|x - a/q| < 1 / (q big_q)`.
///
/// Takes the last convergent with denominator at most `big_q`, falling back to
/// the intermediate fractions between it and its predecessor, and checks the
/// inequality before returning.
pub fn dirichlet_approx(x: f64, big_q: u64) -> Result<Rational> {
    if big_q == 0 {
        return Err(Error::InvalidArgument("Q must be at least 1"));
    }
    let seq = continued_fraction(x, 256)?;
    let bound = 1.0 / big_q as f64;
    let n = seq.convergents.iter().rposition(|r| r.q <= big_q).unwrap_or(0);
    let best = seq.convergents[n];
    if best.residual(x) < bound {
        return Ok(best);
    }
    let mut candidates: Vec<Rational> = Vec::new();
    if n >= 1 {
        let (pp, qp) = (seq.convergents[n - 1].a, seq.convergents[n - 1].q);
        let mut j = (big_q - qp) / best.q;
        while j >= 1 {
            if let Ok(r) = Rational::new(pp + j as i64 * best.a, qp + j * best.q) {
                candidates.push(r);
            }
            j -= 1;
        }
    }
    candidates.push(Rational { a: libm::round(x) as i64, q: 1 });
    candidates
        .into_iter()
        .filter(|r| r.q <= big_q && r.residual(x) < bound)
        .min_by(|u, v| u.residual(x).total_cmp(&v.residual(x)))
        .ok_or(Error::VerificationFailed(x))
}

/// Position of a denominator relative to the window `[X^(1/13), X^(12/13)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenominatorClass {
    Below,
    Estimable,
    Above,
}

impl DenominatorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Below => "below",
            Self::Estimable => "estimable",
            Self::Above => "above",
        }
    }
}

fn dd_powi(x: f64, mut n: u32) -> DoubleDouble {
    let mut base = DoubleDouble::from_f64(x);
    let mut acc = DoubleDouble::ONE;
    while n > 0 {
        if n & 1 == 1 {
            acc = acc * base;
        }
        base = base * base;
        n >>= 1;
    }
    acc
}

/// Closed-window membership, decided as `X <= q^13 <= X^12` in double-double.
pub fn classify_denominator(q: u64, x: f64) -> Result<DenominatorClass> {
    if !(x.is_finite() && x > 1.0) {
        return Err(Error::ScaleOutOfRange(x));
    }
    if q == 0 {
        return Err(Error::InvalidArgument("denominator must be positive"));
    }
    let q13 = dd_powi(q as f64, 13);
    if (q13 - DoubleDouble::from_f64(x)).to_f64() < 0.0 {
        Ok(DenominatorClass::Below)
    } else if (q13 - dd_powi(x, 12)).to_f64() > 0.0 {
        Ok(DenominatorClass::Above)
    } else {
        Ok(DenominatorClass::Estimable)
    }
}

/// Outcome of one probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeCase {
    /// At least one of `q1`, `q2` lies in the window.
    Estimable,
    /// A denominator lies above the window and neither inside it.
    AboveWindow,
    /// `a1 = 0` or `a2 = 0`; only possible while `lambda_i Delta < 1 / q0^2`.
    ZeroNumerator,
    /// Both denominators small and `|a2| q1 >= q0 / log X`.
    A2Q1Fails,
    /// Both small, `|a2| q1 < q0 / log X`, so the two fractions are more than
    /// `log X / q0^2` apart; the "O(1/q0^2)" upper side then needs a constant
    /// above `log X`, recorded as `implied_constant`.
    Contradiction,
    Unexplained,
}

impl ProbeCase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Estimable => "estimable",
            Self::AboveWindow => "above-window",
            Self::ZeroNumerator => "zero-numerator",
            Self::A2Q1Fails => "a2q1-fails",
            Self::Contradiction => "contradiction",
            Self::Unexplained => "unexplained",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DichotomyReport {
    pub t: f64,
    pub first: Rational,
    pub second: Rational,
    pub class1: DenominatorClass,
    pub class2: DenominatorClass,
    pub case: ProbeCase,
    /// `|a2| q1`, when both denominators are below the window.
    pub a2q1: Option<u128>,
    /// `q0 / log X`.
    pub a2q1_limit: f64,
    /// `a1 q2 / (a2 q1)`.
    pub ratio: Option<f64>,
    /// `|a0/q0 - a1 q2 / (a2 q1)|`.
    pub gap: Option<f64>,
    /// `log X / q0^2`.
    pub contradiction_threshold: f64,
    /// `gap * q0^2`.
    pub implied_constant: Option<f64>,
}

/// Approximate `lambda1 t` and `lambda2 t` with denominators at most `q0^2`
/// and classify the outcome along the small-denominator argument.
///
/// `a0q0` is a convergent of `lambda1 / lambda2`; the coefficients must be in
/// canonical sign order.
pub fn dichotomy_probe(
    c: &Coefficients,
    a0q0: Rational,
    params: &RunParameters,
    t: f64,
) -> Result<DichotomyReport> {
    if !(c.lambda1 > 0.0 && c.lambda2 > 0.0 && c.lambda3 < 0.0) {
        return Err(Error::InvalidArgument("coefficients must be in canonical sign order"));
    }
    let (delta, h) = (params.delta, params.h());
    let at = libm::fabs(t);
    if !(at >= delta && at <= h) {
        return Err(Error::OutsideBand { t, delta, h });
    }
    let q0 = a0q0.q();
    let big_q = q0
        .checked_mul(q0)
        .ok_or(Error::InvalidArgument("q0^2 overflows"))?;
    let first = dirichlet_approx(c.lambda1 * t, big_q)?;
    let second = dirichlet_approx(c.lambda2 * t, big_q)?;
    let class1 = classify_denominator(first.q(), params.x)?;
    let class2 = classify_denominator(second.q(), params.x)?;
    let log_x = params.log_x();
    let q0f = q0 as f64;
    let mut report = DichotomyReport {
        t,
        first,
        second,
        class1,
        class2,
        case: ProbeCase::Unexplained,
        a2q1: None,
        a2q1_limit: q0f / log_x,
        ratio: None,
        gap: None,
        contradiction_threshold: log_x / (q0f * q0f),
        implied_constant: None,
    };
    if first.a() == 0 || second.a() == 0 {
        report.case = ProbeCase::ZeroNumerator;
        return Ok(report);
    }
    if class1 == DenominatorClass::Estimable || class2 == DenominatorClass::Estimable {
        report.case = ProbeCase::Estimable;
        return Ok(report);
    }
    if class1 == DenominatorClass::Above || class2 == DenominatorClass::Above {
        report.case = ProbeCase::AboveWindow;
        return Ok(report);
    }

    let (a1, q1) = (first.a() as i128, first.q() as i128);
    let (a2, q2) = (second.a() as i128, second.q() as i128);
    let num_r = a1 * q2 * a2.signum();
    let den_r = a2.abs() * q1;
    report.a2q1 = Some(den_r as u128);
    report.ratio = Some(num_r as f64 / den_r as f64);
    let gap_num = (a0q0.a() as i128 * den_r - num_r * q0 as i128).abs();
    let gap = gap_num as f64 / (den_r as f64 * q0f);
    report.gap = Some(gap);
    report.implied_constant = Some(gap * q0f * q0f);

    report.case = if den_r as f64 >= report.a2q1_limit {
        ProbeCase::A2Q1Fails
    } else if gap_num >= 1 && gap > report.contradiction_threshold {
        ProbeCase::Contradiction
    } else {
        ProbeCase::Unexplained
    };
    Ok(report)
}
