//! The weighted triple count `Gamma(X)` and its circle-method split.
//!
//! ```text
//! sum theta(lambda1 p1 + lambda2 p2 + lambda3 p3 + eta) prod p_i^(1-gamma) log p_i
//!     = int Theta(t) S(lambda1 t) S(lambda2 t) S(lambda3 t) e(eta t) dt
//! ```
//!
//! over Piatetski-Shapiro primes in `(lambda0 X, X]`, with the integral cut into
//! `|t| < Delta`, `Delta <= |t| <= H` and `|t| > H`. The same count with plain
//! `log p1 log p2 log p3` weights is reported beside it.
//!
//! The integrand has its spectrum inside `[F_min - eps, F_max + eps]`, the range
//! of the form over the cube widened by the kernel support, so the trapezoid
//! rule on the whole line is exact once the step is below `1 / (F + eps)`. All
//! three pieces share one such grid, aligned so that `+-Delta` are nodes; the
//! pieces then add up to the full-line rule, truncated at `T`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::accum::{ComplexNeumaier, Neumaier};
use crate::dd::{two_prod, DoubleDouble};
use crate::error::{Error, Result};
use crate::expsums::{integral_i, set_matches};
use crate::kernel::{make_kernel, SmoothingKernel, DEFAULT_MESH_POINTS};
use crate::params::{feasible_box_check, Coefficients, RunParameters};
use crate::phase::{unit_phase, unit_phase_product, PhaseValue};
use crate::primes::{is_prime, ps_indicator, PsPrime, PsPrimeSet};
use crate::quad::{simpson_doubling, MAX_PANELS};

fn close(u: f64, v: f64) -> bool {
    libm::fabs(u - v) <= 1e-12 * libm::fabs(u).max(libm::fabs(v))
}

fn check_kernel_epsilon(kernel: &SmoothingKernel, eps: f64) -> Result<()> {
    if !close(kernel.epsilon(), eps) {
        return Err(Error::KernelMismatch("kernel epsilon differs from the search epsilon"));
    }
    Ok(())
}

fn check_kernel_run(params: &RunParameters, kernel: &SmoothingKernel) -> Result<()> {
    check_kernel_epsilon(kernel, params.epsilon())?;
    if kernel.k() != params.kernel_order() {
        return Err(Error::KernelMismatch("kernel order is not floor(log X)"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleRecord {
    pub p1: u64,
    pub p2: u64,
    pub p3: u64,
    pub form_value: f64,
    /// `theta(form_value) log p1 log p2 log p3`.
    pub weight: f64,
}

/// Visit every triple with `|form| < eps`, sorting on `lambda3 p3`.
fn for_each_triple(
    c: &Coefficients,
    set: &PsPrimeSet,
    eps: f64,
    mut visit: impl FnMut(u64, u64, u64, f64),
) {
    let mut third: Vec<(f64, u64)> = set.primes().map(|p| (c.lambda3 * p as f64, p)).collect();
    third.sort_by(|u, v| u.0.total_cmp(&v.0));
    for p1 in set.primes() {
        for p2 in set.primes() {
            let s = c.lambda1 * p1 as f64 + c.lambda2 * p2 as f64 + c.eta;
            let slack = 1e-9 * (libm::fabs(s) + eps);
            let lo = third.partition_point(|v| v.0 <= -s - eps - slack);
            let hi = third.partition_point(|v| v.0 < -s + eps + slack);
            for &(_, p3) in &third[lo..hi] {
                let f = c.form(p1 as f64, p2 as f64, p3 as f64);
                if libm::fabs(f) < eps {
                    visit(p1, p2, p3, f);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectGamma {
    /// `sum theta(form) prod p_i^(1-gamma) log p_i`, the weighting carried by
    /// `S` and therefore the value the integral over `t` reproduces.
    pub value: f64,
    /// `sum theta(form) log p1 log p2 log p3`.
    pub log_weighted: f64,
    pub triples_found: usize,
    /// The prime set was empty, so the count is trivially zero.
    pub empty_set: bool,
}

/// `Gamma` summed directly over triples, by meet-in-the-middle.
pub fn big_gamma_direct(
    params: &RunParameters,
    c: &Coefficients,
    kernel: &SmoothingKernel,
    set: &PsPrimeSet,
    eps_search: f64,
) -> Result<DirectGamma> {
    check_kernel_epsilon(kernel, eps_search)?;
    if !set_matches(params, set) {
        return Err(Error::SetMismatch);
    }
    let weight = |p: u64| PsPrime::new(p, params.gamma).weight();
    let mut acc = Neumaier::new();
    let mut logs_acc = Neumaier::new();
    let mut found = 0;
    for_each_triple(c, set, eps_search, |p1, p2, p3, f| {
        found += 1;
        let th = kernel.theta(f);
        let logs = libm::log(p1 as f64) * libm::log(p2 as f64) * libm::log(p3 as f64);
        logs_acc.add(th * logs);
        acc.add(th * weight(p1) * weight(p2) * weight(p3));
    });
    Ok(DirectGamma {
        value: acc.value(),
        log_weighted: logs_acc.value(),
        triples_found: found,
        empty_set: set.is_empty(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleSearch {
    /// Up to `max_results` triples in increasing `|form_value|`.
    pub records: Vec<TripleRecord>,
    pub total_found: usize,
    /// Every record re-checked: primes, of Piatetski-Shapiro type, inside the
    /// range, and `|form| < eps_search`.
    pub all_revalidated: bool,
    /// Records with `|form| < m^((37 - 38 gamma)/26) (log m)^10`, `m = max p_j`.
    pub theorem_threshold_passes: usize,
    /// `epsilon` from the formula at this `X`.
    pub formula_epsilon: f64,
    /// The formula epsilon exceeds 1, so the threshold says nothing at this scale.
    pub formula_epsilon_vacuous: bool,
}

fn theorem_threshold(m: u64, gamma: f64) -> f64 {
    let l = libm::log(m as f64);
    libm::exp((37.0 - 38.0 * gamma) / 26.0 * l) * libm::pow(l, 10.0)
}

/// Triples of Piatetski-Shapiro primes with `|form| < eps_search`, closest first.
pub fn find_triples(
    params: &RunParameters,
    c: &Coefficients,
    set: &PsPrimeSet,
    eps_search: f64,
    max_results: usize,
) -> Result<TripleSearch> {
    if !set_matches(params, set) {
        return Err(Error::SetMismatch);
    }
    let kernel = make_kernel(eps_search, params.kernel_order(), DEFAULT_MESH_POINTS)?;
    let mut all: Vec<TripleRecord> = Vec::new();
    for_each_triple(c, set, eps_search, |p1, p2, p3, f| {
        let logs = libm::log(p1 as f64) * libm::log(p2 as f64) * libm::log(p3 as f64);
        all.push(TripleRecord { p1, p2, p3, form_value: f, weight: kernel.theta(f) * logs });
    });
    let total_found = all.len();
    all.sort_by(|u, v| {
        libm::fabs(u.form_value)
            .total_cmp(&libm::fabs(v.form_value))
            .then((u.p1, u.p2, u.p3).cmp(&(v.p1, v.p2, v.p3)))
    });
    all.truncate(max_results);

    let g = params.gamma.value();
    let (lo, hi) = (params.lower(), params.x);
    let valid = |p: u64| is_prime(p) && ps_indicator(p, params.gamma) == 1 && p as f64 > lo && p as f64 <= hi;
    let all_revalidated = all.iter().all(|r| {
        valid(r.p1)
            && valid(r.p2)
            && valid(r.p3)
            && libm::fabs(c.form(r.p1 as f64, r.p2 as f64, r.p3 as f64)) < eps_search
            && r.weight >= 0.0
    });
    let theorem_threshold_passes = all
        .iter()
        .filter(|r| libm::fabs(r.form_value) < theorem_threshold(r.p1.max(r.p2).max(r.p3), g))
        .count();
    Ok(TripleSearch {
        records: all,
        total_found,
        all_revalidated,
        theorem_threshold_passes,
        formula_epsilon: params.epsilon_formula,
        formula_epsilon_vacuous: params.epsilon_formula > 1.0,
    })
}

/// `e(lambda p t)` for every prime of a set, advanced along a uniform grid by
/// multiplying with `e(lambda p h)`, and re-anchored from exact phases.
struct Rotors {
    freq: Vec<DoubleDouble>,
    w: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    sr: Vec<f64>,
    si: Vec<f64>,
}

impl Rotors {
    fn new(lambda: f64, set: &PsPrimeSet, h: f64) -> Self {
        let n = set.len().div_ceil(4) * 4;
        let mut r = Rotors {
            freq: vec![DoubleDouble::ZERO; n],
            w: vec![0.0; n],
            re: vec![0.0; n],
            im: vec![0.0; n],
            sr: vec![1.0; n],
            si: vec![0.0; n],
        };
        for (i, e) in set.entries().iter().enumerate() {
            let (hi, lo) = two_prod(lambda, e.p as f64);
            r.freq[i] = DoubleDouble { hi, lo };
            r.w[i] = e.weight();
            let z = unit_phase(r.freq[i].mul_f64(h).fract());
            r.sr[i] = z.re;
            r.si[i] = z.im;
        }
        r
    }

    fn anchor(&mut self, t: f64) {
        for i in 0..self.freq.len() {
            let z = unit_phase(self.freq[i].mul_f64(t).fract());
            self.re[i] = z.re;
            self.im[i] = z.im;
        }
    }

    /// Current `sum w e(lambda p t)`, then step to `t + h`.
    fn sum_and_advance(&mut self) -> PhaseValue {
        let mut ar = [0.0f64; 4];
        let mut ai = [0.0f64; 4];
        let chunks = self
            .re
            .chunks_exact_mut(4)
            .zip(self.im.chunks_exact_mut(4))
            .zip(self.sr.chunks_exact(4).zip(self.si.chunks_exact(4)))
            .zip(self.w.chunks_exact(4));
        for (((re, im), (sr, si)), w) in chunks {
            for l in 0..4 {
                let (zr, zi) = (re[l], im[l]);
                ar[l] += w[l] * zr;
                ai[l] += w[l] * zi;
                re[l] = zr * sr[l] - zi * si[l];
                im[l] = zr * si[l] + zi * sr[l];
            }
        }
        PhaseValue::new((ar[0] + ar[1]) + (ar[2] + ar[3]), (ai[0] + ai[1]) + (ai[2] + ai[3]))
    }
}

const REANCHOR: usize = 256;

/// `S(lambda t)` by direct summation.
fn s_direct(lambda: f64, set: &PsPrimeSet, t: f64) -> PhaseValue {
    let mut acc = ComplexNeumaier::new();
    for e in set.entries() {
        let (hi, lo) = two_prod(lambda, e.p as f64);
        let z = unit_phase(DoubleDouble { hi, lo }.mul_f64(t).fract());
        acc.add(z * e.weight());
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma2Majorant {
    /// `(7 eps / 4) * 2 int_Delta^H SS(t) (|S1|^2 + |S2|^2 + |S3|^2) dt`,
    /// with `SS = min(|S1|, |S2|)`; dominates `|Gamma2|`.
    pub majorant: f64,
    /// `T_k = int_Delta^H |S(lambda_k t)|^2 dt`.
    pub t_k: [f64; 3],
    /// `T_k / (H X^(2 - gamma) log^2 X)`.
    pub t_k_ratio: [f64; 3],
    /// `max SS` on the grid.
    pub ss_max: f64,
    /// `max SS / (X^((37 - 12 gamma)/26) log^5 X)`.
    pub ss_ratio: f64,
    /// `eps X^((37 - 12 gamma)/26) log^5 X (T_1 + T_2 + T_3)`.
    pub chain_value: f64,
    /// `X^((89 - 38 gamma)/26) log^9 X`.
    pub chain_shape: f64,
    /// Grid points where `SS` exceeded `|S1|` or `|S2|`; always 0.
    pub min_law_violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPieces {
    pub gamma1: PhaseValue,
    /// Folded onto `t > 0` by `g(-t) = conj g(t)`; the imaginary part is zero.
    pub gamma2: PhaseValue,
    pub gamma3: PhaseValue,
    pub computed: [bool; 3],
    /// Grid step and the frequency bound `F` it resolves.
    pub step: f64,
    pub band: f64,
    /// `H` rounded to the grid.
    pub h_grid: f64,
    /// End `T >= H` of the piece-3 quadrature.
    pub t_end: f64,
    pub nodes: usize,
    pub majorant: Option<Gamma2Majorant>,
}

impl GammaPieces {
    pub fn total(&self) -> PhaseValue {
        self.gamma1 + self.gamma2 + self.gamma3
    }
}

/// Step oversampling over the band limit; any value above 1 is exact on the line.
pub const BAND_OVERSAMPLE: f64 = 1.25;

/// Smallest `t` where `(1 / (pi t)) (4k / (pi eps t))^k` drops below `1e-12 X^(3 - 3 gamma)`.
pub fn truncation_point(params: &RunParameters, kernel: &SmoothingKernel) -> f64 {
    let k = kernel.k() as f64;
    let eps = kernel.epsilon();
    let ln_thr = -12.0 * core::f64::consts::LN_10 + (3.0 - 3.0 * params.gamma.value()) * params.log_x();
    let s = (k * libm::log(4.0 * k / (PI * eps)) - libm::log(PI) - ln_thr) / (k + 1.0);
    libm::exp(s)
}

/// The three integrals over `|t| < Delta`, `Delta <= |t| <= H` and `H < |t| <= T`.
///
/// `which` selects the pieces; skipped ones are reported as zero. Piece 2 also
/// yields the [`Gamma2Majorant`] from the same grid.
pub fn gamma_pieces(
    params: &RunParameters,
    c: &Coefficients,
    kernel: &SmoothingKernel,
    set: &PsPrimeSet,
    which: [bool; 3],
) -> Result<GammaPieces> {
    check_kernel_run(params, kernel)?;
    if !set_matches(params, set) {
        return Err(Error::SetMismatch);
    }
    let (fmin, fmax) = c.form_range(params.lower(), params.x);
    let eps = kernel.epsilon();
    let band = libm::fabs(fmin).max(libm::fabs(fmax)) + eps;
    let delta = params.delta;
    let m = libm::ceil(delta * BAND_OVERSAMPLE * band).max(1.0) as usize;
    let h = delta / m as f64;
    let h_max = params.h();
    let j_h = (libm::round(h_max / h) as usize).max(m + 1);
    let t_end = h_max.max(truncation_point(params, kernel));
    let j_t = (libm::ceil(t_end / h) as usize).max(j_h);
    let lambdas = c.lambdas();

    let g_at = |t: f64, s: [PhaseValue; 3]| {
        let mut z = s[0] * s[1] * s[2] * kernel.theta_transform(t);
        if c.eta != 0.0 {
            z = z * unit_phase_product(c.eta, t);
        }
        z
    };

    let mut out = GammaPieces {
        gamma1: PhaseValue::ZERO,
        gamma2: PhaseValue::ZERO,
        gamma3: PhaseValue::ZERO,
        computed: which,
        step: h,
        band,
        h_grid: j_h as f64 * h,
        t_end: j_t as f64 * h,
        nodes: 0,
        majorant: None,
    };

    if which[0] {
        let mut acc = ComplexNeumaier::new();
        for j in -(m as i64)..=(m as i64) {
            let t = j as f64 * h;
            let s = lambdas.map(|l| s_direct(l, set, t));
            let wt = if j.unsigned_abs() as usize == m { 0.5 * h } else { h };
            acc.add(g_at(t, s) * wt);
            out.nodes += 1;
        }
        out.gamma1 = acc.value();
    }

    if !(which[1] || which[2]) {
        return Ok(out);
    }
    let (j_start, j_stop) = if which[1] { (m, if which[2] { j_t } else { j_h }) } else { (j_h, j_t) };
    let mut rotors: Vec<Rotors> = lambdas.iter().map(|&l| Rotors::new(l, set, h)).collect();
    let mut p2 = ComplexNeumaier::new();
    let mut p3 = ComplexNeumaier::new();
    let mut maj = Neumaier::new();
    let mut tk = [Neumaier::new(), Neumaier::new(), Neumaier::new()];
    let mut ss_max = 0.0f64;
    let mut min_law_violations = 0;
    for j in j_start..=j_stop {
        let t = j as f64 * h;
        if (j - j_start) % REANCHOR == 0 {
            for r in rotors.iter_mut() {
                r.anchor(t);
            }
        }
        let s = [
            rotors[0].sum_and_advance(),
            rotors[1].sum_and_advance(),
            rotors[2].sum_and_advance(),
        ];
        out.nodes += 1;
        let g = g_at(t, s);
        if which[1] && j <= j_h {
            let wt = if j == m || j == j_h { 0.5 * h } else { h };
            p2.add(g * wt);
            let a = s.map(|z| z.norm());
            let ss = a[0].min(a[1]);
            if ss > a[0] || ss > a[1] {
                min_law_violations += 1;
            }
            ss_max = ss_max.max(ss);
            maj.add(wt * ss * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]));
            for k in 0..3 {
                tk[k].add(wt * a[k] * a[k]);
            }
        }
        if which[2] && j >= j_h && j_t > j_h {
            let wt = if j == j_h || j == j_t { 0.5 * h } else { h };
            p3.add(g * wt);
        }
    }
    if which[1] {
        out.gamma2 = PhaseValue::new(2.0 * p2.value().re, 0.0);
        let x = params.x;
        let l = params.log_x();
        let gm = params.gamma.value();
        let t_k = tk.map(|a| a.value());
        let shape_t = h_max * libm::pow(x, 2.0 - gm) * l * l;
        let ss_shape = libm::pow(x, (37.0 - 12.0 * gm) / 26.0) * libm::pow(l, 5.0);
        out.majorant = Some(Gamma2Majorant {
            majorant: 1.75 * eps * 2.0 * maj.value(),
            t_k,
            t_k_ratio: t_k.map(|v| v / shape_t),
            ss_max,
            ss_ratio: ss_max / ss_shape,
            chain_value: eps * ss_shape * (t_k[0] + t_k[1] + t_k[2]),
            chain_shape: libm::pow(x, (89.0 - 38.0 * gm) / 26.0) * libm::pow(l, 9.0),
            min_law_violations,
        });
    }
    if which[2] {
        out.gamma3 = PhaseValue::new(2.0 * p3.value().re, 0.0);
    }
    Ok(out)
}

/// One piece (1, 2 or 3) of the split.
pub fn gamma_piece(
    piece: u8,
    params: &RunParameters,
    c: &Coefficients,
    kernel: &SmoothingKernel,
    set: &PsPrimeSet,
) -> Result<PhaseValue> {
    let which = match piece {
        1 => [true, false, false],
        2 => [false, true, false],
        3 => [false, false, true],
        _ => return Err(Error::InvalidArgument("piece must be 1, 2 or 3")),
    };
    let p = gamma_pieces(params, c, kernel, set, which)?;
    Ok(p.gamma1 + p.gamma2 + p.gamma3)
}

/// The piece-2 majorant and its shape ratios.
pub fn gamma2_majorant(
    params: &RunParameters,
    c: &Coefficients,
    kernel: &SmoothingKernel,
    set: &PsPrimeSet,
) -> Result<Gamma2Majorant> {
    let p = gamma_pieces(params, c, kernel, set, [false, true, false])?;
    p.majorant.ok_or(Error::InvalidArgument("piece 2 was not computed"))
}

/// `J = int_{|t| < Delta} Theta(t) I(lambda1 t) I(lambda2 t) I(lambda3 t) e(eta t) dt`.
pub fn integral_j(params: &RunParameters, c: &Coefficients, kernel: &SmoothingKernel) -> Result<PhaseValue> {
    let (fmin, fmax) = c.form_range(params.lower(), params.x);
    let band = libm::fabs(fmin).max(libm::fabs(fmax)) + kernel.epsilon();
    let d = params.delta;
    let [l1, l2, l3] = c.lambdas();
    let f = |t: f64| {
        let mut z = integral_i(l1 * t, params) * integral_i(l2 * t, params) * integral_i(l3 * t, params);
        z = z * kernel.theta_transform(t);
        if c.eta != 0.0 {
            z = z * unit_phase_product(c.eta, t);
        }
        z
    };
    let start = libm::ceil(8.0 * band * 2.0 * d).max(16.0) as usize;
    Ok(simpson_doubling(f, -d, d, start, 1e-10, MAX_PANELS)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxIntegral {
    pub value: f64,
    pub feasible: bool,
    /// `B / (eps X^2)`.
    pub ratio: f64,
    /// `2 eps gamma^3 ((1 - lambda0) X)^2 / |lambda3|`.
    pub mass_bound: f64,
}

/// `B = gamma^3 int int int theta(lambda . y + eta) dy` over `(lambda0 X, X]^3`.
///
/// The `y3` and `y2` integrals are closed forms in the kernel's first and
/// second antiderivatives; the remaining `y1` integral is Simpson with panel
/// doubling between the points where the integrand changes regime.
pub fn box_integral_b(params: &RunParameters, c: &Coefficients, kernel: &SmoothingKernel) -> Result<BoxIntegral> {
    let eps = kernel.epsilon();
    let g = params.gamma.value();
    let (lo, hi) = (params.lower(), params.x);
    let w = hi - lo;
    let [l1, l2, l3] = c.lambdas();
    if l1 == 0.0 || l2 == 0.0 || l3 == 0.0 {
        return Err(Error::InvalidArgument("coefficients must be non-zero"));
    }
    let mass_bound = 2.0 * eps * g * g * g * w * w / libm::fabs(l3);
    let x = params.x;
    if !feasible_box_check(c, params.lambda0, x, eps) {
        return Ok(BoxIntegral { value: 0.0, feasible: false, ratio: 0.0, mass_bound });
    }
    let (e3lo, e3hi) = if l3 * lo <= l3 * hi { (l3 * lo, l3 * hi) } else { (l3 * hi, l3 * lo) };
    let shifts = [
        (l2 * hi + e3hi + c.eta, 1.0),
        (l2 * lo + e3hi + c.eta, -1.0),
        (l2 * hi + e3lo + c.eta, -1.0),
        (l2 * lo + e3lo + c.eta, 1.0),
    ];
    let scale = 1.0 / (l2 * libm::fabs(l3));
    let f = |y1: f64| {
        let mut acc = Neumaier::new();
        for &(k, sgn) in &shifts {
            acc.add(sgn * kernel.second_cumulative(l1 * y1 + k));
        }
        acc.value() * scale
    };
    let mut cuts: Vec<f64> = vec![lo, hi];
    for &(k, _) in &shifts {
        for edge in [-eps, -0.75 * eps, 0.75 * eps, eps] {
            let y = (edge - k) / l1;
            if y > lo && y < hi {
                cuts.push(y);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut acc = Neumaier::new();
    for win in cuts.windows(2) {
        if win[1] - win[0] <= 0.0 {
            continue;
        }
        let v = simpson_doubling(f, win[0], win[1], 16, 1e-12, MAX_PANELS)?.value;
        acc.add(v);
    }
    let value = g * g * g * acc.value();
    Ok(BoxIntegral { value, feasible: true, ratio: value / (eps * x * x), mass_bound })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiBound {
    /// `2 int_Delta^inf bound(t) prod_i min(gamma w, gamma / (pi |lambda_i| t)) dt`.
    pub value: f64,
    /// `value / (eps / Delta^2)`.
    pub ratio: f64,
}

/// Rigorous majorant of `|J - B|`.
///
/// The integrand is non-increasing, so left sums on a geometric grid bound
/// the integral from above; beyond the grid the tail is closed form.
pub fn phi_bound(params: &RunParameters, kernel: &SmoothingKernel, c: &Coefficients) -> PhiBound {
    let g = params.gamma.value();
    let w = params.x - params.lower();
    let lam = c.lambdas().map(libm::fabs);
    let f = |t: f64| {
        let mut v = kernel.transform_bound(t);
        for l in lam {
            v *= (g * w).min(g / (PI * l * t));
        }
        v
    };
    let d = params.delta;
    let t_top = 1e3 * params.h().max(1.0 / d);
    let r = 1.0 + 1.0 / 256.0;
    let mut acc = Neumaier::new();
    let mut t = d;
    while t < t_top {
        let next = t * r;
        acc.add(f(t) * (next - t));
        t = next;
    }
    let tail = g * g * g / (PI * PI * PI * PI * lam[0] * lam[1] * lam[2] * 3.0 * t * t * t);
    let value = 2.0 * (acc.value() + tail);
    PhiBound { value, ratio: value / (kernel.epsilon() / (d * d)) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    /// `X^(3 - 3 gamma) / k * (4k / (pi eps H))^k`.
    pub value: f64,
    /// `4k / (pi eps H)`.
    pub base: f64,
    pub at_most_one: bool,
}

/// The closed-form bound for piece 3 at order `k`, evaluated in log space.
pub fn tail_bound_with_order(params: &RunParameters, k: u32) -> TailBound {
    let kf = k.max(1) as f64;
    let base = 4.0 * kf / (PI * params.epsilon() * params.h());
    let ln = (3.0 - 3.0 * params.gamma.value()) * params.log_x() - libm::log(kf) + kf * libm::log(base);
    let value = libm::exp(ln);
    TailBound { value, base, at_most_one: value <= 1.0 }
}

/// [`tail_bound_with_order`] at the kernel's order, which must be `floor(log X)`.
pub fn tail_bound_gamma3(params: &RunParameters, kernel: &SmoothingKernel) -> Result<TailBound> {
    if kernel.k() != params.kernel_order() {
        return Err(Error::KernelMismatch("kernel order is not floor(log X)"));
    }
    Ok(tail_bound_with_order(params, kernel.k()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionResult {
    pub gamma_total: DirectGamma,
    pub pieces: GammaPieces,
    pub j: PhaseValue,
    pub b: BoxIntegral,
    pub phi: PhiBound,
    pub tail: TailBound,
}

impl DecompositionResult {
    /// `|Gamma1 + Gamma2 + Gamma3 - Gamma| / Gamma`.
    pub fn closure_error(&self) -> f64 {
        libm::fabs(self.pieces.total().re - self.gamma_total.value) / self.gamma_total.value
    }
}

/// Everything at once, with the kernel at the run's epsilon and `k = floor(log X)`.
pub fn decompose(
    params: &RunParameters,
    c: &Coefficients,
    kernel: &SmoothingKernel,
    set: &PsPrimeSet,
    which: [bool; 3],
) -> Result<DecompositionResult> {
    let gamma_total = big_gamma_direct(params, c, kernel, set, params.epsilon())?;
    let pieces = gamma_pieces(params, c, kernel, set, which)?;
    Ok(DecompositionResult {
        gamma_total,
        pieces,
        j: integral_j(params, c, kernel)?,
        b: box_integral_b(params, c, kernel)?,
        phi: phi_bound(params, kernel, c),
        tail: tail_bound_gamma3(params, kernel)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::GammaExponent;
    use crate::primes::{ps_primes_in, sieve_primes};
    use core::f64::consts::SQRT_2;

    fn instance(x: f64, g: f64, eps: f64, lambda0: f64) -> (RunParameters, PsPrimeSet, SmoothingKernel) {
        let gamma = GammaExponent::new(g).unwrap();
        let p = RunParameters::at_scale(x, gamma, lambda0, Some(eps)).unwrap();
        let t = sieve_primes(x as u64 + 1).unwrap();
        let s = ps_primes_in(p.lower(), p.x, gamma, &t).unwrap();
        let k = make_kernel(eps, p.kernel_order(), 4097).unwrap();
        (p, s, k)
    }

    fn brute(c: &Coefficients, k: &SmoothingKernel, set: &PsPrimeSet, eps: f64) -> (f64, f64, usize) {
        let mut acc = Neumaier::new();
        let mut logs = Neumaier::new();
        let mut n = 0;
        let g = set.gamma();
        for p1 in set.primes() {
            for p2 in set.primes() {
                for p3 in set.primes() {
                    let f = c.form(p1 as f64, p2 as f64, p3 as f64);
                    if libm::fabs(f) < eps {
                        n += 1;
                        let l = libm::log(p1 as f64) * libm::log(p2 as f64) * libm::log(p3 as f64);
                        logs.add(k.theta(f) * l);
                        let w = PsPrime::new(p1, g).weight() * PsPrime::new(p2, g).weight() * PsPrime::new(p3, g).weight();
                        acc.add(k.theta(f) * w);
                    }
                }
            }
        }
        (acc.value(), logs.value(), n)
    }

    #[test]
    fn direct_matches_brute_force() {
        let (p, s, k) = instance(300.0, 0.9, 0.5, 0.005);
        let c = Coefficients::new(1.0, 1.0, -1.0, 0.0);
        let d = big_gamma_direct(&p, &c, &k, &s, 0.5).unwrap();
        let (v, logs, n) = brute(&c, &k, &s, 0.5);
        assert_eq!(d.triples_found, n);
        assert!((d.value - v).abs() <= 1e-10 * v.max(1.0));
        assert!((d.log_weighted - logs).abs() <= 1e-10 * logs.max(1.0));
        assert!(s.contains(2) && s.contains(3) && s.contains(5));
        let t = find_triples(&p, &c, &s, 0.5, usize::MAX).unwrap();
        let hit = t.records.iter().find(|r| (r.p1, r.p2, r.p3) == (2, 3, 5)).unwrap();
        assert_eq!(hit.form_value, 0.0);
        let w = libm::log(2.0) * libm::log(3.0) * libm::log(5.0);
        assert!((hit.weight - w).abs() < 1e-12);
        assert!(t.all_revalidated);
    }

    #[test]
    fn infeasible_shift_counts_nothing() {
        let (p, s, k) = instance(1000.0, 0.9, 0.5, 0.5);
        let c = Coefficients::new(1.0, 1.0, -1.0, 1e6);
        let d = big_gamma_direct(&p, &c, &k, &s, 0.5).unwrap();
        assert_eq!((d.value, d.triples_found), (0.0, 0));
        let b = box_integral_b(&p, &c, &k).unwrap();
        assert!(!b.feasible && b.value == 0.0);
    }

    #[test]
    fn kernel_preconditions() {
        let (p, s, k) = instance(1000.0, 0.9, 0.5, 0.5);
        let c = Coefficients::new(1.0, SQRT_2, -2.0, 0.0);
        assert!(matches!(big_gamma_direct(&p, &c, &k, &s, 0.3), Err(Error::KernelMismatch(_))));
        let wrong_k = make_kernel(0.5, p.kernel_order() + 1, 4097).unwrap();
        assert!(gamma_pieces(&p, &c, &wrong_k, &s, [true; 3]).is_err());
        assert!(tail_bound_gamma3(&p, &wrong_k).is_err());
    }

    #[test]
    fn small_sets_give_no_triples() {
        let (p, _, _) = instance(1000.0, 0.9, 0.5, 0.5);
        let c = Coefficients::new(1.0, SQRT_2, -2.0, 0.0);
        let s = PsPrimeSet::from_primes(p.gamma, p.lower(), p.x, [503, 509]);
        let t = find_triples(&p, &c, &s, 0.5, 10).unwrap();
        assert!(t.records.is_empty() && t.total_found == 0);
    }

    #[test]
    fn fourier_closure_small() {
        let (p, s, k) = instance(400.0, 0.9, 0.5, 0.5);
        let c = Coefficients::new(1.0, SQRT_2, -2.0, 0.0);
        let r = decompose(&p, &c, &k, &s, [true; 3]).unwrap();
        assert!(r.gamma_total.value > 0.0);
        assert!(r.closure_error() < 0.01, "{:?}", r);
        assert!(r.pieces.gamma1.im.abs() <= 1e-8 * r.pieces.gamma1.norm());
        let m = r.pieces.majorant.unwrap();
        assert!(r.pieces.gamma2.norm() <= m.majorant);
        assert_eq!(m.min_law_violations, 0);
        assert!(r.pieces.gamma3.norm() <= r.tail.value || r.pieces.t_end == r.pieces.h_grid);
    }

    #[test]
    fn j_close_to_b() {
        let (p, s, k) = instance(400.0, 0.9, 0.5, 0.5);
        let _ = s;
        let c = Coefficients::new(1.0, SQRT_2, -2.0, 0.0);
        let j = integral_j(&p, &c, &k).unwrap();
        let b = box_integral_b(&p, &c, &k).unwrap();
        let phi = phi_bound(&p, &k, &c);
        assert!(b.feasible && b.value > 0.0 && b.value <= b.mass_bound);
        assert!(libm::fabs(j.re - b.value) <= phi.value, "{j:?} {b:?} {phi:?}");
        assert!(j.im.abs() < 1e-8 * j.norm());
    }

    #[test]
    fn tail_bound_values() {
        let gamma = GammaExponent::new(0.98).unwrap();
        let p = RunParameters::at_scale(1e6, gamma, 0.5, Some(0.05)).unwrap();
        assert_eq!(p.kernel_order(), 13);
        let t = tail_bound_with_order(&p, 13);
        let l = libm::log(1e6);
        assert!((t.base - 52.0 / (PI * l * l)).abs() < 1e-15);
        let direct = libm::pow(1e6, 0.06) / 13.0 * libm::pow(t.base, 13.0);
        assert!((t.value - direct).abs() < 1e-12 * direct);
        assert!(t.at_most_one);
        assert!(tail_bound_with_order(&p, 1).value.is_finite());
        assert!(tail_bound_with_order(&p, 20).value < t.value);
    }

    #[test]
    fn phi_shrinks_with_lambda0() {
        let (p, _, k) = instance(1000.0, 0.9, 0.5, 0.5);
        let c = Coefficients::new(1.0, SQRT_2, -2.0, 0.0);
        let a = phi_bound(&p, &k, &c);
        let q = RunParameters { lambda0: 0.9, ..p };
        let b = phi_bound(&q, &k, &c);
        assert!(a.value > 0.0 && b.value <= a.value);
        // the length only enters once gamma w undercuts gamma / (pi |lambda| Delta)
        let q = RunParameters { lambda0: 0.995, ..p };
        assert!(phi_bound(&q, &k, &c).value < a.value);
    }
}
