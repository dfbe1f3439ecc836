//! Stages of a run, their CSV tables, and the run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use psd_core::approx::{continued_fraction, dichotomy_probe, ProbeCase, Rational};
use psd_core::expsums::{
    decomposition_residual, integral_i, l2_integral, minor_arc_check, sum_omega, sum_psi, sum_s,
    sum_sigma, L2Kind,
};
use psd_core::gammadecomp::{decompose, find_triples, DecompositionResult, TripleSearch};
use psd_core::kernel::{make_kernel, SmoothingKernel, DEFAULT_MESH_POINTS};
use psd_core::params::{Coefficients, RunParameters};
use psd_core::primes::{sieve_primes, PrimeTable, PsPrimeSet};
use psd_core::PhaseValue;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cache::{cache_file_name, env_cache_path, ps_set_cached, CacheOutcome};
use crate::config::{Instance, RawConfig};
use crate::report::{real, sha256_hex, Csv};
use crate::RunError;

/// `lo:hi:n`, `n` equally spaced points including both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self.n {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n)
                .map(|i| if i + 1 == n { self.hi } else { self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64 })
                .collect(),
        }
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(format!("expected lo:hi:n, found `{s}`"));
        };
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower end `{lo}`"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper end `{hi}`"))?;
        let n: usize = n.trim().parse().map_err(|_| format!("bad point count `{n}`"))?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && n > 0) {
            return Err(format!("need finite lo <= hi and n > 0, found `{s}`"));
        }
        Ok(Self { lo, hi, n })
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| if n == 1 { lo } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Primes,
    Kernel,
    Sums,
    Dichotomy,
    Decomp,
    Triples,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Self::Primes, Self::Kernel, Self::Sums, Self::Dichotomy, Self::Decomp, Self::Triples];

    pub fn name(self) -> &'static str {
        match self {
            Self::Primes => "primes",
            Self::Kernel => "kernel",
            Self::Sums => "sums",
            Self::Dichotomy => "dichotomy",
            Self::Decomp => "decomp",
            Self::Triples => "triples",
        }
    }

    fn needs(self) -> &'static [Stage] {
        match self {
            Self::Sums | Self::Decomp | Self::Triples => &[Self::Primes],
            _ => &[],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Requested stages plus their prerequisites, in execution order.
pub fn resolve_stages(requested: &[Stage]) -> Vec<Stage> {
    let mut out: Vec<Stage> = requested.iter().flat_map(|s| s.needs().iter().chain([s])).copied().collect();
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SumKind {
    #[value(name = "S")]
    S,
    #[value(name = "Sigma")]
    Sigma,
    #[value(name = "Omega")]
    Omega,
    #[value(name = "I")]
    I,
    #[value(name = "Psi")]
    Psi,
}

impl SumKind {
    pub const ALL: [SumKind; 5] = [Self::S, Self::Sigma, Self::Omega, Self::I, Self::Psi];

    pub fn name(self) -> &'static str {
        match self {
            Self::S => "S",
            Self::Sigma => "Sigma",
            Self::Omega => "Omega",
            Self::I => "I",
            Self::Psi => "Psi",
        }
    }

    pub fn operation(self) -> &'static str {
        match self {
            Self::S => "sum_s",
            Self::Sigma => "sum_sigma",
            Self::Omega => "sum_omega",
            Self::I => "integral_i",
            Self::Psi => "sum_psi",
        }
    }
}

/// Inputs a run needs, built on first use and shared between stages.
pub struct Context {
    pub instance: Instance,
    cache_path: Option<PathBuf>,
    set: Option<PsPrimeSet>,
    table: Option<PrimeTable>,
    kernel: Option<SmoothingKernel>,
    cache_outcome: Option<CacheOutcome>,
    full_count: usize,
}

impl Context {
    /// `cache_path` overrides the `PSD_CACHE_DIR` location.
    pub fn new(instance: Instance, cache_path: Option<PathBuf>) -> Self {
        Self { instance, cache_path, set: None, table: None, kernel: None, cache_outcome: None, full_count: 0 }
    }

    pub fn params(&self) -> &RunParameters {
        &self.instance.params
    }

    pub fn limit(&self) -> u64 {
        self.params().x.floor() as u64
    }

    /// Use `dir` for the cache when neither a path nor `PSD_CACHE_DIR` is set.
    pub fn default_cache_dir(&mut self, dir: &Path) {
        if self.effective_cache_path().is_none() {
            self.cache_path = Some(dir.join(cache_file_name(self.params().gamma, self.limit())));
        }
    }

    fn effective_cache_path(&self) -> Option<PathBuf> {
        self.cache_path.clone().or_else(|| env_cache_path(self.params().gamma, self.limit()))
    }

    /// The Piatetski-Shapiro primes in `(lambda0 X, X]`.
    pub fn set(&mut self) -> Result<&PsPrimeSet, RunError> {
        if self.set.is_none() {
            let p = *self.params();
            let path = self.effective_cache_path();
            let (full, outcome) = ps_set_cached(p.gamma, self.limit(), path.as_deref())?;
            self.full_count = full.len();
            self.cache_outcome = Some(outcome);
            let lo = p.lower();
            let primes = full.primes().filter(|&q| q as f64 > lo && q as f64 <= p.x);
            self.set = Some(PsPrimeSet::from_primes(p.gamma, lo, p.x, primes.collect::<Vec<_>>()));
        }
        Ok(self.set.as_ref().expect("set built above"))
    }

    pub fn table(&mut self) -> Result<&PrimeTable, RunError> {
        if self.table.is_none() {
            self.table = Some(sieve_primes(self.limit().max(2) + 1)?);
        }
        Ok(self.table.as_ref().expect("table built above"))
    }

    /// Kernel at the run's epsilon with `k = floor(log X)`.
    pub fn kernel(&mut self) -> Result<&SmoothingKernel, RunError> {
        if self.kernel.is_none() {
            let p = self.params();
            self.kernel = Some(make_kernel(p.epsilon(), p.kernel_order(), DEFAULT_MESH_POINTS)?);
        }
        Ok(self.kernel.as_ref().expect("kernel built above"))
    }
}

/// Tables and summary values of one stage.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub operations: Vec<&'static str>,
    pub tables: Vec<(String, Csv)>,
    pub summary: BTreeMap<String, Value>,
    /// Files written outside the run directory, such as a shared cache.
    pub external: Vec<PathBuf>,
}

impl StageOutput {
    fn note(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.to_string(), v.into());
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub alpha_grid: Grid,
    pub t_grid: Option<Grid>,
    pub pieces: [bool; 3],
    pub max_triples: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self { alpha_grid: Grid { lo: 0.0, hi: 0.5, n: 401 }, t_grid: None, pieces: [true; 3], max_triples: 1000 }
    }
}

pub fn run_stage(stage: Stage, ctx: &mut Context, opts: &Options) -> Result<StageOutput, RunError> {
    match stage {
        Stage::Primes => stage_primes(ctx),
        Stage::Kernel => stage_kernel(ctx),
        Stage::Sums => stage_sums(ctx, opts),
        Stage::Dichotomy => stage_dichotomy(ctx, opts),
        Stage::Decomp => stage_decomp(ctx, opts),
        Stage::Triples => stage_triples(ctx, opts),
    }
}

fn stage_primes(ctx: &mut Context) -> Result<StageOutput, RunError> {
    let mut out = StageOutput { operations: vec!["sieve_primes", "ps_primes_in", "cache_store"], ..Default::default() };
    let n = ctx.set()?.len();
    let w = ctx.set()?.total_weight();
    out.note("limit", ctx.limit());
    out.note("ps_primes_up_to_limit", ctx.full_count);
    out.note("ps_primes_in_range", n);
    out.note("total_weight", w);
    let outcome = match ctx.cache_outcome {
        Some(CacheOutcome::Hit) => "hit",
        Some(CacheOutcome::Stored) => "stored",
        _ => "disabled",
    };
    out.note("cache", outcome);
    if let Some(path) = ctx.effective_cache_path() {
        out.external.push(path);
    }
    Ok(out)
}

pub fn kernel_theta_table(kernel: &SmoothingKernel, n: usize) -> Csv {
    let e = kernel.epsilon();
    let mut t = Csv::new(&["y", "theta"]);
    for y in (Grid { lo: -1.25 * e, hi: 1.25 * e, n }).points() {
        t.row(&[y.into(), kernel.theta(y).into()]);
    }
    t
}

pub fn kernel_transform_table(kernel: &SmoothingKernel, xs: &[f64]) -> Csv {
    let mut t = Csv::new(&["x", "transform", "bound"]);
    for &x in xs {
        t.row(&[x.into(), kernel.theta_transform(x).into(), kernel.transform_bound(x).into()]);
    }
    t
}

/// `10^4` points log-spaced over `[1e-3/eps, 1e3/eps]`.
pub fn kernel_check_points(epsilon: f64) -> Vec<f64> {
    log_grid(1e-3 / epsilon, 1e3 / epsilon, 10_000)
}

fn stage_kernel(ctx: &mut Context) -> Result<StageOutput, RunError> {
    let kernel = ctx.kernel()?;
    let xs = kernel_check_points(kernel.epsilon());
    let check = kernel.verify_bounds(&xs);
    let mut out = StageOutput {
        operations: vec!["make_kernel", "theta", "theta_transform", "transform_bound", "verify_bounds"],
        ..Default::default()
    };
    out.note("epsilon", kernel.epsilon());
    out.note("k", kernel.k());
    out.note("a", kernel.a());
    out.note("b", kernel.b());
    out.note("mass", kernel.mass());
    out.note("bound_points", check.points);
    out.note("bound_violations", check.violations);
    out.note("bound_worst_ratio", check.worst_ratio);
    out.tables.push(("kernel_theta.csv".into(), kernel_theta_table(kernel, 1001)));
    out.tables.push(("kernel_transform.csv".into(), kernel_transform_table(kernel, &log_grid(xs[0], xs[xs.len() - 1], 1000))));
    Ok(out)
}

fn phase_row(t: &mut Csv, at: f64, z: PhaseValue) {
    t.row(&[at.into(), z.re.into(), z.im.into(), z.norm().into()]);
}

/// `alpha,re,im,abs` for one sum over a grid of `alpha`.
pub fn sum_table(kind: SumKind, alphas: &[f64], ctx: &mut Context) -> Result<Csv, RunError> {
    let p = *ctx.params();
    let mut t = Csv::new(&["alpha", "re", "im", "abs"]);
    match kind {
        SumKind::S => {
            let set = ctx.set()?;
            for &a in alphas {
                phase_row(&mut t, a, sum_s(a, &p, set)?.value);
            }
        }
        SumKind::I => {
            for &a in alphas {
                phase_row(&mut t, a, integral_i(a, &p));
            }
        }
        SumKind::Sigma | SumKind::Omega | SumKind::Psi => {
            let table = ctx.table()?;
            for &a in alphas {
                let v = match kind {
                    SumKind::Sigma => sum_sigma(a, &p, table)?.value,
                    SumKind::Omega => sum_omega(a, &p, table)?.value,
                    _ => sum_psi(a, p.x, table)?.value,
                };
                phase_row(&mut t, a, v);
            }
        }
    }
    Ok(t)
}

fn stage_sums(ctx: &mut Context, opts: &Options) -> Result<StageOutput, RunError> {
    let p = *ctx.params();
    let alphas = opts.alpha_grid.points();
    let mut out = StageOutput::default();
    for kind in SumKind::ALL {
        out.operations.push(kind.operation());
        let t = sum_table(kind, &alphas, ctx)?;
        out.tables.push((format!("sums_{}.csv", kind.name()), t));
    }

    out.operations.push("decomposition_residual");
    let mut worst_gap = 0.0f64;
    let mut dec = Csv::new(&["alpha", "identity_gap", "sigma_gap"]);
    {
        let table = ctx.table()?;
        for &a in &alphas {
            let d = decomposition_residual(a, &p, table)?;
            worst_gap = worst_gap.max(d.identity_gap);
            dec.row(&[a.into(), d.identity_gap.into(), d.sigma_gap.into()]);
        }
    }
    out.note("max_identity_gap", worst_gap);
    out.tables.push(("decomposition.csv".into(), dec));

    // denominators log-spaced across [X^(1/13), X^(12/13)], numerator 1
    out.operations.push("minor_arc_check");
    let mut arcs = Csv::new(&["a", "q", "class", "sigma_abs", "sigma_ratio", "s_abs", "s_ratio", "psi_abs", "psi_ratio"]);
    let mut qs: Vec<u64> = log_grid(p.x.powf(1.0 / 13.0), p.x.powf(12.0 / 13.0), 12)
        .into_iter()
        .map(|q| q.round().max(2.0) as u64)
        .collect();
    qs.dedup();
    {
        let table = ctx.table()?;
        for q in qs {
            let r = minor_arc_check(1, q, &p, table)?;
            arcs.row(&[
                1i64.into(),
                q.into(),
                r.class.as_str().into(),
                r.sigma_abs.into(),
                r.sigma_ratio.into(),
                r.s_abs.into(),
                r.s_ratio.into(),
                r.psi_abs.into(),
                r.psi_ratio.into(),
            ]);
        }
    }
    out.tables.push(("minor_arc.csv".into(), arcs));

    out.operations.push("l2_integral");
    let mut l2 = Csv::new(&["kind", "lambda", "value", "exact", "shape", "ratio", "panels"]);
    let lambdas = ctx.instance.coefficients.lambdas();
    let set = ctx.set()?;
    let mut rows = vec![("S_unit", L2Kind::SOverUnit, 1.0)];
    for l in lambdas {
        rows.push(("S_delta", L2Kind::SOverDelta, l));
        rows.push(("I_delta", L2Kind::IOverDelta, l));
    }
    for (name, kind, lambda) in rows {
        let r = l2_integral(kind, lambda, &p, set)?;
        if let Some(exact) = r.exact {
            out.note("parseval_relative_error", ((r.value - exact) / exact).abs());
        }
        l2.row(&[
            name.into(),
            lambda.into(),
            r.value.into(),
            r.exact.unwrap_or(f64::NAN).into(),
            r.shape.into(),
            r.ratio.into(),
            r.panels.into(),
        ]);
    }
    out.tables.push(("l2.csv".into(), l2));
    out.note("alpha_points", alphas.len());
    Ok(out)
}

/// Convergents of `lambda1 / lambda2` for the sign-normalized coefficients.
pub fn ratio_convergents(canonical: &Coefficients) -> Result<Vec<Rational>, RunError> {
    Ok(continued_fraction(canonical.lambda1 / canonical.lambda2, 64)?.convergents)
}

/// The convergent of `lambda1 / lambda2` whose denominator is `q0`.
pub fn convergent_with_denominator(canonical: &Coefficients, q0: u64) -> Result<Rational, RunError> {
    ratio_convergents(canonical)?
        .into_iter()
        .find(|r| r.q() == q0)
        .ok_or_else(|| {
            RunError::Hypothesis(crate::config::HypothesisError {
                violations: vec![format!(
                    "q0 = {q0} is not a convergent denominator of lambda1/lambda2 = {}",
                    canonical.lambda1 / canonical.lambda2
                )],
            })
        })
}

pub const DICHOTOMY_COLUMNS: [&str; 8] = ["t", "a1", "q1", "a2", "q2", "class1", "class2", "case"];

pub fn dichotomy_table(
    ctx: &Context,
    ts: &[f64],
) -> Result<(Csv, BTreeMap<&'static str, usize>), RunError> {
    let inst = &ctx.instance;
    let a0q0 = convergent_with_denominator(&inst.canonical, inst.raw.q0)?;
    let mut t = Csv::new(&DICHOTOMY_COLUMNS);
    let mut counts: BTreeMap<&'static str, usize> = [
        ProbeCase::Estimable,
        ProbeCase::AboveWindow,
        ProbeCase::ZeroNumerator,
        ProbeCase::A2Q1Fails,
        ProbeCase::Contradiction,
        ProbeCase::Unexplained,
    ]
    .iter()
    .map(|c| (c.as_str(), 0))
    .collect();
    for &x in ts {
        let r = dichotomy_probe(&inst.canonical, a0q0, &inst.params, x)?;
        *counts.entry(r.case.as_str()).or_default() += 1;
        t.row(&[
            x.into(),
            r.first.a().into(),
            r.first.q().into(),
            r.second.a().into(),
            r.second.q().into(),
            r.class1.as_str().into(),
            r.class2.as_str().into(),
            r.case.as_str().into(),
        ]);
    }
    Ok((t, counts))
}

pub fn default_t_grid(p: &RunParameters) -> Grid {
    Grid { lo: p.delta, hi: p.h(), n: 1000 }
}

fn stage_dichotomy(ctx: &mut Context, opts: &Options) -> Result<StageOutput, RunError> {
    let grid = opts.t_grid.unwrap_or_else(|| default_t_grid(ctx.params()));
    let (t, counts) = dichotomy_table(ctx, &grid.points())?;
    let mut out = StageOutput {
        operations: vec!["continued_fraction", "dirichlet_approx", "classify_denominator", "dichotomy_probe"],
        ..Default::default()
    };
    out.note("t_lo", grid.lo);
    out.note("t_hi", grid.hi);
    out.note("samples", grid.n);
    out.note("cases", json!(counts));
    out.tables.push(("dichotomy.csv".into(), t));
    Ok(out)
}

/// `quantity,value` rows for a decomposition.
pub fn decomposition_rows(r: &DecompositionResult) -> Vec<(&'static str, f64)> {
    let p = &r.pieces;
    let mut rows = vec![
        ("gamma_direct", r.gamma_total.value),
        ("gamma_direct_log_weighted", r.gamma_total.log_weighted),
        ("triples_in_window", r.gamma_total.triples_found as f64),
        ("gamma1_re", p.gamma1.re),
        ("gamma1_im", p.gamma1.im),
        ("gamma2_re", p.gamma2.re),
        ("gamma2_im", p.gamma2.im),
        ("gamma3_re", p.gamma3.re),
        ("gamma3_im", p.gamma3.im),
        ("pieces_total_re", p.total().re),
        ("closure_relative_error", r.closure_error()),
        ("quadrature_step", p.step),
        ("quadrature_band", p.band),
        ("truncation_point", p.t_end),
        ("quadrature_nodes", p.nodes as f64),
        ("j_re", r.j.re),
        ("j_im", r.j.im),
        ("b", r.b.value),
        ("b_ratio", r.b.ratio),
        ("b_mass_bound", r.b.mass_bound),
        ("j_minus_b", (r.j.re - r.b.value).abs()),
        ("phi_bound", r.phi.value),
        ("phi_ratio", r.phi.ratio),
        ("gamma3_tail_bound", r.tail.value),
        ("gamma3_tail_base", r.tail.base),
    ];
    if let Some(m) = &p.majorant {
        rows.extend([
            ("gamma2_majorant", m.majorant),
            ("t_1", m.t_k[0]),
            ("t_2", m.t_k[1]),
            ("t_3", m.t_k[2]),
            ("t_1_ratio", m.t_k_ratio[0]),
            ("t_2_ratio", m.t_k_ratio[1]),
            ("t_3_ratio", m.t_k_ratio[2]),
            ("s_times_s_max", m.ss_max),
            ("s_times_s_ratio", m.ss_ratio),
            ("chain_value", m.chain_value),
            ("chain_shape", m.chain_shape),
            ("min_law_violations", m.min_law_violations as f64),
        ]);
    }
    rows
}

pub fn decomposition_table(r: &DecompositionResult) -> Csv {
    let mut t = Csv::new(&["quantity", "value"]);
    for (k, v) in decomposition_rows(r) {
        t.row(&[k.into(), v.into()]);
    }
    t
}

pub fn run_decomposition(ctx: &mut Context, pieces: [bool; 3]) -> Result<DecompositionResult, RunError> {
    let p = *ctx.params();
    let c = ctx.instance.coefficients;
    ctx.set()?;
    ctx.kernel()?;
    let (set, kernel) = (ctx.set.as_ref().expect("built"), ctx.kernel.as_ref().expect("built"));
    Ok(decompose(&p, &c, kernel, set, pieces)?)
}

fn stage_decomp(ctx: &mut Context, opts: &Options) -> Result<StageOutput, RunError> {
    let r = run_decomposition(ctx, opts.pieces)?;
    let mut out = StageOutput {
        operations: vec![
            "big_gamma_direct",
            "gamma_pieces",
            "gamma2_majorant",
            "integral_j",
            "box_integral_b",
            "phi_bound",
            "tail_bound_gamma3",
        ],
        ..Default::default()
    };
    out.note("pieces", json!(opts.pieces));
    out.note("gamma_direct", r.gamma_total.value);
    out.note("pieces_total", r.pieces.total().re);
    out.note("closure_relative_error", r.closure_error());
    out.note("gamma3_within_tail_bound", r.pieces.gamma3.norm() <= r.tail.value);
    out.note("j_minus_b_within_phi", (r.j.re - r.b.value).abs() <= r.phi.value);
    out.tables.push(("gamma_decomp.csv".into(), decomposition_table(&r)));
    Ok(out)
}

pub fn triples_table(s: &TripleSearch) -> Csv {
    let mut t = Csv::new(&["p1", "p2", "p3", "form_value", "weight"]);
    for r in &s.records {
        t.row(&[r.p1.into(), r.p2.into(), r.p3.into(), r.form_value.into(), r.weight.into()]);
    }
    t
}

pub fn run_triples(ctx: &mut Context, max_results: usize) -> Result<TripleSearch, RunError> {
    let p = *ctx.params();
    let c = ctx.instance.coefficients;
    let set = ctx.set()?;
    Ok(find_triples(&p, &c, set, p.epsilon(), max_results)?)
}

pub fn triple_summary(s: &TripleSearch, out: &mut BTreeMap<String, Value>) {
    out.insert("total_found".into(), s.total_found.into());
    out.insert("emitted".into(), s.records.len().into());
    out.insert("all_revalidated".into(), s.all_revalidated.into());
    out.insert("formula_epsilon".into(), s.formula_epsilon.into());
    out.insert("theorem_threshold_passes".into(), s.theorem_threshold_passes.into());
    out.insert("formula_epsilon_vacuous".into(), s.formula_epsilon_vacuous.into());
    if s.formula_epsilon_vacuous {
        out.insert(
            "formula_epsilon_note".into(),
            "formula epsilon exceeds 1 at this scale, so its threshold is vacuously satisfied".into(),
        );
    }
}

fn stage_triples(ctx: &mut Context, opts: &Options) -> Result<StageOutput, RunError> {
    let s = run_triples(ctx, opts.max_triples)?;
    let mut out = StageOutput { operations: vec!["find_triples"], ..Default::default() };
    triple_summary(&s, &mut out.summary);
    out.tables.push(("triples.csv".into(), triples_table(&s)));
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: &'static str,
    pub operations: Vec<&'static str>,
    pub wall_seconds: f64,
    pub outputs: Vec<OutputRecord>,
    pub summary: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParameterEcho {
    pub q0: Option<u64>,
    pub gamma: f64,
    pub theorem_range: bool,
    pub lambda0: f64,
    pub x: f64,
    pub lower: f64,
    pub log_x: f64,
    pub delta: f64,
    pub epsilon_formula: f64,
    pub h_formula: f64,
    pub epsilon_user: Option<f64>,
    pub epsilon: f64,
    pub h: f64,
    pub kernel_order: u32,
    pub coefficients: [f64; 4],
    pub canonical_coefficients: [f64; 4],
}

impl ParameterEcho {
    pub fn new(inst: &Instance) -> Self {
        let p = &inst.params;
        let four = |c: &Coefficients| [c.lambda1, c.lambda2, c.lambda3, c.eta];
        Self {
            q0: p.q0,
            gamma: p.gamma.value(),
            theorem_range: p.gamma.theorem_range(),
            lambda0: p.lambda0,
            x: p.x,
            lower: p.lower(),
            log_x: p.log_x(),
            delta: p.delta,
            epsilon_formula: p.epsilon_formula,
            h_formula: p.h_formula,
            epsilon_user: p.epsilon_user,
            epsilon: p.epsilon(),
            h: p.h(),
            kernel_order: p.kernel_order(),
            coefficients: four(&inst.coefficients),
            canonical_coefficients: four(&inst.canonical),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RawConfig,
    pub parameters: ParameterEcho,
    pub warnings: Vec<String>,
    pub threads: usize,
    pub stages_requested: Vec<Stage>,
    pub stages: Vec<StageRecord>,
    pub complete: bool,
    pub error: Option<String>,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn new(inst: &Instance, threads: usize, requested: Vec<Stage>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: inst.raw,
            parameters: ParameterEcho::new(inst),
            warnings: inst.warnings.clone(),
            threads,
            stages_requested: requested,
            stages: Vec::new(),
            complete: false,
            error: None,
            wall_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        fs::write(path, self.to_json()).map_err(|e| RunError::io(path, e))
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn write_output(dir: &Path, name: &str, csv: &Csv) -> Result<OutputRecord, RunError> {
    let path = dir.join(name);
    csv.write(&path).map_err(|e| RunError::io(&path, e))?;
    Ok(OutputRecord { file: name.to_string(), bytes: csv.as_str().len() as u64, sha256: sha256_hex(csv.as_str().as_bytes()) })
}

fn external_record(dir: &Path, path: &Path) -> Result<OutputRecord, RunError> {
    let bytes = fs::read(path).map_err(|e| RunError::io(path, e))?;
    let file = path.strip_prefix(dir).unwrap_or(path).display().to_string();
    Ok(OutputRecord { file, bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) })
}

/// Run `stages` and their prerequisites in order, writing every table and the
/// manifest into `dir`. A failing stage stops the run; the manifest is still
/// written, flagged incomplete, and the error is returned.
pub fn run_pipeline(
    ctx: &mut Context,
    stages: &[Stage],
    opts: &Options,
    dir: &Path,
    threads: usize,
) -> Result<RunManifest, (RunManifest, RunError)> {
    let start = Instant::now();
    let order = resolve_stages(stages);
    let mut manifest = RunManifest::new(&ctx.instance, threads, order.clone());
    if let Err(e) = fs::create_dir_all(dir) {
        let err = RunError::io(dir, e);
        manifest.error = Some(err.to_string());
        return Err((manifest, err));
    }
    ctx.default_cache_dir(dir);
    let mut run = || -> Result<(), RunError> {
        for stage in &order {
            let t0 = Instant::now();
            let result = run_stage(*stage, ctx, opts);
            let out = match result {
                Ok(out) => out,
                Err(e) => {
                    manifest.stages.push(StageRecord {
                        name: stage.name(),
                        operations: Vec::new(),
                        wall_seconds: t0.elapsed().as_secs_f64(),
                        outputs: Vec::new(),
                        summary: BTreeMap::from([("failed".to_string(), Value::Bool(true))]),
                    });
                    return Err(e);
                }
            };
            let mut outputs = Vec::new();
            for (name, csv) in &out.tables {
                outputs.push(write_output(dir, name, csv)?);
            }
            for path in &out.external {
                outputs.push(external_record(dir, path)?);
            }
            manifest.stages.push(StageRecord {
                name: stage.name(),
                operations: out.operations,
                wall_seconds: t0.elapsed().as_secs_f64(),
                outputs,
                summary: out.summary,
            });
        }
        Ok(())
    };
    let result = run();
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.complete = result.is_ok();
    if let Err(e) = &result {
        manifest.error = Some(e.to_string());
    }
    let written = manifest.write(&dir.join(MANIFEST_FILE));
    match (result, written) {
        (Ok(()), Ok(())) => Ok(manifest),
        (Err(e), _) | (Ok(()), Err(e)) => Err((manifest, e)),
    }
}

/// Render a `(quantity, value)` list the way the CSV tables do.
pub fn quantity_lines(rows: &[(&str, f64)]) -> String {
    let mut s = String::from("quantity,value\n");
    for (k, v) in rows {
        s.push_str(k);
        s.push(',');
        s.push_str(&real(*v));
        s.push('\n');
    }
    s
}
