//! The exponential sums `S`, `Sigma`, `Omega`, `Psi`, the integral `I`, the
//! exact split `S = Sigma' + Omega`, and mean-square integrals of `S` and `I`.
//!
//! Sums run over ascending primes with compensated accumulation. Phases are
//! formed as exact products `alpha * p` before reduction mod 1; once
//! `|alpha| X` exceeds `2^52` there is no fractional part left to reduce and the
//! sums refuse.

use core::f64::consts::PI;

use crate::accum::ComplexNeumaier;
use crate::approx::{classify_denominator, gcd, DenominatorClass};
use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::params::RunParameters;
use crate::phase::{unit_phase, unit_phase_product, PhaseValue};
use crate::primes::{ps_primes_in, PrimeTable, PsPrime, PsPrimeSet};
use crate::quad::{simpson_doubling, MAX_PANELS};

const PHASE_LIMIT: f64 = 4_503_599_627_370_496.0; // 2^52

/// `psi(t) = {t} - 1/2`, with `{t} = t - floor(t)` for every sign of `t`.
#[inline]
pub fn sawtooth(t: f64) -> f64 {
    t - libm::floor(t) - 0.5
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumResult {
    pub value: PhaseValue,
    pub term_count: usize,
    pub compensation_residual: f64,
}

impl SumResult {
    const EMPTY: Self = Self {
        value: PhaseValue::ZERO,
        term_count: 0,
        compensation_residual: 0.0,
    };
}

fn check_phase(alpha: f64, x: f64) -> Result<()> {
    let reach = libm::fabs(alpha) * x;
    if !(reach <= PHASE_LIMIT) {
        return Err(Error::PrecisionExhausted(reach));
    }
    Ok(())
}

fn check_table(hi: f64, table: &PrimeTable) -> Result<()> {
    if hi > table.limit() as f64 {
        return Err(Error::RangeBeyondTable { hi, limit: table.limit() });
    }
    Ok(())
}

fn same(u: f64, v: f64) -> bool {
    libm::fabs(u - v) <= 1e-12 * libm::fabs(u).max(libm::fabs(v)).max(1.0)
}

/// Whether `set` was built for the range `(lambda0 X, X]` and the `gamma` of `params`.
pub fn set_matches(params: &RunParameters, set: &PsPrimeSet) -> bool {
    let (lo, hi) = set.range();
    set.gamma() == params.gamma && same(lo, params.lower()) && same(hi, params.x)
}

fn weighted_sum(alpha: f64, terms: impl Iterator<Item = (f64, u64)>) -> SumResult {
    let mut acc = ComplexNeumaier::new();
    let mut count = 0;
    for (w, p) in terms {
        acc.add(unit_phase_product(alpha, p as f64) * w);
        count += 1;
    }
    SumResult {
        value: acc.value(),
        term_count: count,
        compensation_residual: acc.residual(),
    }
}

/// `S(alpha) = sum over Piatetski-Shapiro p in (lambda0 X, X] of p^(1-gamma) e(alpha p) log p`.
pub fn sum_s(alpha: f64, params: &RunParameters, set: &PsPrimeSet) -> Result<SumResult> {
    if !set_matches(params, set) {
        return Err(Error::SetMismatch);
    }
    check_phase(alpha, params.x)?;
    Ok(weighted_sum(alpha, set.entries().iter().map(|e| (e.weight(), e.p))))
}

/// `Sigma(alpha) = gamma * sum over all p in (lambda0 X, X] of e(alpha p) log p`.
pub fn sum_sigma(alpha: f64, params: &RunParameters, table: &PrimeTable) -> Result<SumResult> {
    check_table(params.x, table)?;
    check_phase(alpha, params.x)?;
    let g = params.gamma.value();
    let primes = table.range(params.lower(), params.x);
    Ok(weighted_sum(alpha, primes.iter().map(|&p| (g * libm::log(p as f64), p))))
}

/// Per-prime pieces of the split: `p^(1-gamma) log p`, `(p+1)^gamma - p^gamma`
/// and `psi(-(p+1)^gamma) - psi(-p^gamma)`, the last two from double-double powers.
fn split_terms(p: u64, params: &RunParameters) -> (f64, f64, f64) {
    let g = params.gamma.value();
    let u = DoubleDouble::powf(p as f64, g);
    let v = DoubleDouble::powf((p + 1) as f64, g);
    let d = (v - u).to_f64();
    let dpsi = (-v).fract() - (-u).fract();
    (PsPrime::new(p, params.gamma).weight(), d, dpsi)
}

/// `Omega(alpha) = sum over all p in (lambda0 X, X] of
/// p^(1-gamma) (psi(-(p+1)^gamma) - psi(-p^gamma)) e(alpha p) log p`.
pub fn sum_omega(alpha: f64, params: &RunParameters, table: &PrimeTable) -> Result<SumResult> {
    check_table(params.x, table)?;
    check_phase(alpha, params.x)?;
    let primes = table.range(params.lower(), params.x);
    Ok(weighted_sum(
        alpha,
        primes.iter().map(|&p| {
            let (w, _, dpsi) = split_terms(p, params);
            (w * dpsi, p)
        }),
    ))
}

/// `I(alpha) = gamma * int_{lambda0 X}^{X} e(alpha y) dy`, written as
/// `gamma e(alpha m) sin(pi alpha w) / (pi alpha)` with `m` the midpoint and
/// `w` the length, which stays accurate as `alpha -> 0`.
pub fn integral_i(alpha: f64, params: &RunParameters) -> PhaseValue {
    let g = params.gamma.value();
    let w = params.x - params.lower();
    if alpha == 0.0 {
        return PhaseValue::new(g * w, 0.0);
    }
    let m = 0.5 * (params.x + params.lower());
    let s = unit_phase(0.5 * alpha * w).im;
    unit_phase(alpha * m) * (g * s / (PI * alpha))
}

/// `Psi(alpha, X) = sum over p <= X of e(alpha p) log p`.
pub fn sum_psi(alpha: f64, x: f64, table: &PrimeTable) -> Result<SumResult> {
    if x < 2.0 {
        return Ok(SumResult::EMPTY);
    }
    check_table(x, table)?;
    check_phase(alpha, x)?;
    let primes = table.range(0.0, x);
    Ok(weighted_sum(alpha, primes.iter().map(|&p| (libm::log(p as f64), p))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub s: PhaseValue,
    /// Middle sum with the exact weight `p^(1-gamma)((p+1)^gamma - p^gamma)`.
    pub sigma_exact: PhaseValue,
    pub omega: PhaseValue,
    pub sigma: PhaseValue,
    /// `|S - Sigma' - Omega|`.
    pub identity_gap: f64,
    /// `|Sigma' - Sigma|`.
    pub sigma_gap: f64,
}

/// Evaluate both sides of `S = Sigma' + Omega`.
///
/// `S` is taken over the primes selected by the integer indicator, while
/// `Sigma'` and `Omega` use the fractional parts of `p^gamma`, `(p+1)^gamma`; the
/// two sides share nothing but the weights.
pub fn decomposition_residual(
    alpha: f64,
    params: &RunParameters,
    table: &PrimeTable,
) -> Result<Decomposition> {
    check_table(params.x, table)?;
    check_phase(alpha, params.x)?;
    let set = ps_primes_in(params.lower(), params.x, params.gamma, table)?;
    let s = sum_s(alpha, params, &set)?.value;
    let g = params.gamma.value();
    let mut mid = ComplexNeumaier::new();
    let mut omega = ComplexNeumaier::new();
    let mut sigma = ComplexNeumaier::new();
    for &p in table.range(params.lower(), params.x) {
        let z = unit_phase_product(alpha, p as f64);
        let (w, d, dpsi) = split_terms(p, params);
        mid.add(z * (w * d));
        omega.add(z * (w * dpsi));
        sigma.add(z * (g * libm::log(p as f64)));
    }
    let (mid, omega, sigma) = (mid.value(), omega.value(), sigma.value());
    Ok(Decomposition {
        s,
        sigma_exact: mid,
        omega,
        sigma,
        identity_gap: (s - mid - omega).norm(),
        sigma_gap: (mid - sigma).norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L2Kind {
    /// `int_{-Delta}^{Delta} |S(lambda alpha)|^2`.
    SOverDelta,
    /// `int_{-Delta}^{Delta} |I(lambda alpha)|^2`.
    IOverDelta,
    /// `int_0^1 |S(alpha)|^2`; `lambda` is ignored.
    SOverUnit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Integral {
    pub value: f64,
    pub panels: usize,
    /// For [`L2Kind::SOverUnit`]: `sum (p^(1-gamma) log p)^2` by orthogonality.
    pub exact: Option<f64>,
    /// Bound shape: `X log^3 X`, `X log X`, or `X^(2-gamma) log^2 X`.
    pub shape: f64,
    pub ratio: f64,
}

pub const L2_REL_TOL: f64 = 1e-6;

/// Mean square of `S` or `I` by Simpson with panel doubling, starting from at
/// least eight panels per unit of phase variation.
pub fn l2_integral(
    kind: L2Kind,
    lambda: f64,
    params: &RunParameters,
    set: &PsPrimeSet,
) -> Result<L2Integral> {
    let x = params.x;
    let l = params.log_x();
    if kind != L2Kind::SOverUnit && !(lambda != 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument("lambda must be finite and non-zero"));
    }
    if kind != L2Kind::IOverDelta && !set_matches(params, set) {
        return Err(Error::SetMismatch);
    }
    let start = |variation: f64| libm::ceil(8.0 * variation).max(16.0) as usize;
    let (value, panels, exact, shape) = match kind {
        L2Kind::SOverDelta => {
            let d = params.delta;
            check_phase(lambda * d, x)?;
            let c = simpson_doubling(
                |a| weighted_sum(lambda * a, set.entries().iter().map(|e| (e.weight(), e.p))).value.norm_sqr(),
                -d,
                d,
                start(libm::fabs(lambda) * x * 2.0 * d),
                L2_REL_TOL,
                MAX_PANELS,
            )?;
            (c.value, c.panels, None, x * l * l * l)
        }
        L2Kind::IOverDelta => {
            let d = params.delta;
            let c = simpson_doubling(
                |a| integral_i(lambda * a, params).norm_sqr(),
                -d,
                d,
                start(libm::fabs(lambda) * x * 2.0 * d),
                L2_REL_TOL,
                MAX_PANELS,
            )?;
            (c.value, c.panels, None, x * l)
        }
        L2Kind::SOverUnit => {
            let c = simpson_doubling(
                |a| weighted_sum(a, set.entries().iter().map(|e| (e.weight(), e.p))).value.norm_sqr(),
                0.0,
                1.0,
                start(x),
                L2_REL_TOL,
                MAX_PANELS,
            )?;
            let exact = set
                .entries()
                .iter()
                .map(|e| e.weight() * e.weight())
                .collect::<crate::accum::Neumaier>()
                .value();
            let g = params.gamma.value();
            (c.value, c.panels, Some(exact), libm::pow(x, 2.0 - g) * l * l)
        }
    };
    Ok(L2Integral { value, panels, exact, shape, ratio: value / shape })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinorArcReport {
    pub alpha: f64,
    pub q: u64,
    pub class: DenominatorClass,
    pub sigma_abs: f64,
    pub s_abs: f64,
    pub psi_abs: f64,
    /// `|Sigma| / (X^(25/26) log^4 X)`.
    pub sigma_ratio: f64,
    /// `|S| / (X^((37 - 12 gamma)/26) log^5 X)`.
    pub s_ratio: f64,
    /// `|Psi| / ((X q^(-1/2) + X^(4/5) + X^(1/2) q^(1/2)) log^4 X)`.
    pub psi_ratio: f64,
}

/// Evaluate `Sigma`, `S` and `Psi` at `alpha = a/q` against their bound shapes.
pub fn minor_arc_check(
    a: i64,
    q: u64,
    params: &RunParameters,
    table: &PrimeTable,
) -> Result<MinorArcReport> {
    if q == 0 {
        return Err(Error::InvalidArgument("denominator must be positive"));
    }
    if gcd(a.unsigned_abs(), q) != 1 {
        return Err(Error::NotCoprime { a, q });
    }
    let alpha = a as f64 / q as f64;
    let x = params.x;
    let l = params.log_x();
    let g = params.gamma.value();
    let set = ps_primes_in(params.lower(), x, params.gamma, table)?;
    let sigma_abs = sum_sigma(alpha, params, table)?.value.norm();
    let s_abs = sum_s(alpha, params, &set)?.value.norm();
    let psi_abs = sum_psi(alpha, x, table)?.value.norm();
    let qf = q as f64;
    let l4 = l * l * l * l;
    let psi_shape = (x / libm::sqrt(qf) + libm::pow(x, 0.8) + libm::sqrt(x * qf)) * l4;
    Ok(MinorArcReport {
        alpha,
        q,
        class: classify_denominator(q, x)?,
        sigma_abs,
        s_abs,
        psi_abs,
        sigma_ratio: sigma_abs / (libm::pow(x, 25.0 / 26.0) * l4),
        s_ratio: s_abs / (libm::pow(x, (37.0 - 12.0 * g) / 26.0) * l4 * l),
        psi_ratio: psi_abs / psi_shape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::GammaExponent;
    use crate::primes::sieve_primes;

    fn setup(x: f64, g: f64) -> (RunParameters, PrimeTable, PsPrimeSet) {
        let gamma = GammaExponent::new(g).unwrap();
        let p = RunParameters::at_scale(x, gamma, 0.5, Some(0.05)).unwrap();
        let t = sieve_primes(x as u64 + 1).unwrap();
        let s = ps_primes_in(p.lower(), p.x, gamma, &t).unwrap();
        (p, t, s)
    }

    #[test]
    fn sawtooth_convention() {
        assert_eq!(sawtooth(2.5), 0.0);
        assert_eq!(sawtooth(-0.25), 0.25);
        assert_eq!(sawtooth(3.0), -0.5);
        assert_eq!(sawtooth(-3.0), -0.5);
    }

    #[test]
    fn s_at_zero_is_total_weight() {
        let (p, _, set) = setup(1e4, 0.9);
        let r = sum_s(0.0, &p, &set).unwrap();
        assert_eq!(r.value.im, 0.0);
        assert!((r.value.re - set.total_weight()).abs() < 1e-9 * r.value.re);
        assert_eq!(r.term_count, set.len());
    }

    #[test]
    fn s_matches_naive_sum() {
        let (p, _, set) = setup(1e4, 0.9);
        let r = sum_s(0.3, &p, &set).unwrap();
        let (mut re, mut im) = (0.0, 0.0);
        for q in set.primes() {
            let qf = q as f64;
            let w = libm::pow(qf, 0.1) * libm::log(qf);
            let ph = 2.0 * PI * (0.3 * qf);
            re += w * libm::cos(ph);
            im += w * libm::sin(ph);
        }
        let rel = libm::hypot(r.value.re - re, r.value.im - im) / libm::hypot(re, im);
        assert!(rel < 1e-10, "{rel}");
    }

    #[test]
    fn s_rejects_mismatched_set() {
        let (p, t, _) = setup(1e4, 0.9);
        let other = ps_primes_in(100.0, 1e4, p.gamma, &t).unwrap();
        assert_eq!(sum_s(0.1, &p, &other), Err(Error::SetMismatch));
        let empty = PsPrimeSet::from_primes(p.gamma, p.lower(), p.x, []);
        assert_eq!(sum_s(0.1, &p, &empty).unwrap().value, PhaseValue::ZERO);
        assert!(matches!(sum_s(1e13, &p, &empty), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn sigma_integer_alpha() {
        let (p, t, _) = setup(1e4, 0.9);
        let a = sum_sigma(0.0, &p, &t).unwrap().value;
        let b = sum_sigma(1.0, &p, &t).unwrap().value;
        assert!((a - b).norm() < 1e-9 * a.norm());
    }

    #[test]
    fn psi_small_cases() {
        let t = sieve_primes(100).unwrap();
        let r = sum_psi(0.0, 10.0, &t).unwrap();
        let four = libm::log(2.0) + libm::log(3.0) + libm::log(5.0) + libm::log(7.0);
        assert!((r.value.re - four).abs() < 1e-14);
        assert!((four - 5.347_107_530_717_468).abs() < 1e-12);
        let r = sum_psi(0.5, 10.0, &t).unwrap();
        let parity = libm::log(2.0) - libm::log(3.0) - libm::log(5.0) - libm::log(7.0);
        assert!((r.value.re - parity).abs() < 1e-14 && r.value.im.abs() < 1e-15);
        assert_eq!(sum_psi(0.3, 1.5, &t).unwrap().term_count, 0);
        assert!(sum_psi(0.3, 1000.0, &t).is_err());
    }

    #[test]
    fn omega_single_prime() {
        let gamma = GammaExponent::new(0.9).unwrap();
        let p = RunParameters::at_scale(12.0, gamma, 0.95, Some(0.5)).unwrap();
        let t = sieve_primes(20).unwrap();
        // (11.4, 12] holds no prime, so widen to one that holds 11 only
        let p = RunParameters { lambda0: 10.5 / 12.0, ..p };
        let r = sum_omega(0.37, &p, &t).unwrap();
        assert_eq!(r.term_count, 1);
        let u = libm::pow(11.0, 0.9);
        let v = libm::pow(12.0, 0.9);
        let expect = libm::pow(11.0, 0.1) * (sawtooth(-v) - sawtooth(-u)) * libm::log(11.0);
        let z = unit_phase(0.37 * 11.0) * expect;
        assert!((r.value - z).norm() < 1e-13);
    }

    #[test]
    fn i_closed_form() {
        let (p, _, _) = setup(100.0, 0.9);
        assert_eq!(integral_i(0.0, &p).re, 0.9 * 50.0);
        let alpha = 0.37;
        let q = crate::quad::simpson(|y| unit_phase(alpha * y) * 0.9, 50.0, 100.0, 1 << 16);
        assert!((integral_i(alpha, &p) - q).norm() < 1e-9 * q.norm());
        for i in 1..200 {
            let a = i as f64 * 0.013;
            let v = integral_i(a, &p).norm();
            assert!(v <= 0.9 * (50.0f64).min(1.0 / (PI * a)) * (1.0 + 1e-12));
        }
        // continuity at 0
        let tiny = integral_i(1e-12, &p);
        assert!((tiny.re - 45.0).abs() < 1e-9);
    }

    #[test]
    fn conjugate_symmetry() {
        let (p, t, set) = setup(1e4, 0.9);
        for &a in &[0.013, 0.37, 1.5e-3] {
            let s1 = sum_s(a, &p, &set).unwrap().value;
            let s2 = sum_s(-a, &p, &set).unwrap().value;
            assert!((s1.conj() - s2).norm() < 1e-12 * s1.norm().max(1.0));
            let o1 = sum_omega(a, &p, &t).unwrap().value;
            let o2 = sum_omega(-a, &p, &t).unwrap().value;
            assert!((o1.conj() - o2).norm() < 1e-12 * o1.norm().max(1.0));
            let i1 = integral_i(a, &p);
            assert!((i1.conj() - integral_i(-a, &p)).norm() < 1e-12 * (1.0 + i1.norm()));
        }
    }

    #[test]
    fn exact_split_holds() {
        let (p, t, _) = setup(2e4, 0.93);
        for &a in &[0.0, 0.1234, 0.5, 3.3e-3] {
            let d = decomposition_residual(a, &p, &t).unwrap();
            assert!(d.identity_gap < 1e-9, "{a} {}", d.identity_gap);
        }
    }

    #[test]
    fn parseval_small() {
        let (p, _, set) = setup(2000.0, 0.9);
        let r = l2_integral(L2Kind::SOverUnit, 1.0, &p, &set).unwrap();
        let exact = r.exact.unwrap();
        assert!((r.value - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn l2_of_i_bounded() {
        let (p, _, set) = setup(1e4, 0.9);
        let r = l2_integral(L2Kind::IOverDelta, 1.5, &p, &set).unwrap();
        let w = 0.5 * p.x;
        assert!(r.value > 0.0 && r.value <= 0.81 * 2.0 * p.delta * w * w);
        assert!(l2_integral(L2Kind::IOverDelta, 0.0, &p, &set).is_err());
    }

    #[test]
    fn minor_arc_report() {
        let (p, t, _) = setup(1e4, 0.9);
        let r = minor_arc_check(1, 2, &p, &t).unwrap();
        assert_eq!(r.class, DenominatorClass::Below);
        assert!(r.psi_ratio.is_finite() && r.psi_ratio < 1.0);
        let r = minor_arc_check(3, 7, &p, &t).unwrap();
        assert_eq!(r.class, DenominatorClass::Estimable);
        assert!(matches!(minor_arc_check(2, 4, &p, &t), Err(Error::NotCoprime { .. })));
    }
}
