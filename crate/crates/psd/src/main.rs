use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use psd::cache::ps_set_cached;
use psd::config::{read_config, validate, Instance};
use psd::pipeline::{
    default_t_grid, dichotomy_table, kernel_check_points, kernel_theta_table, kernel_transform_table,
    quantity_lines, ratio_convergents, run_decomposition, run_pipeline, run_triples, sum_table,
    triple_summary, triples_table, Context, Grid, Options, RunManifest, Stage, StageRecord, SumKind,
};
use psd::report::{real, sha256_hex, Csv};
use psd::{RunError, EXIT_OK};
use psd_core::approx::continued_fraction;
use psd_core::kernel::{make_kernel, DEFAULT_MESH_POINTS};
use psd_core::params::{validate_coefficients, GammaExponent};

#[derive(Parser)]
#[command(name = "psd", version, about = "Piatetski-Shapiro prime triples: sets, sums, kernels and decompositions")]
struct Cli {
    /// Worker cap. Computation is currently sequential; the value is recorded.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Accept gamma in (0, 37/38] with a warning.
    #[arg(long, global = true)]
    exploratory: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance file with `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Replace q0 by the denominator of this convergent of lambda1/lambda2 (0-based).
    #[arg(long)]
    convergent_index: Option<usize>,
    /// Override `epsilon_user` from the config.
    #[arg(long)]
    eps_user: Option<f64>,
    /// Prime cache file; defaults to $PSD_CACHE_DIR when set.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Piatetski-Shapiro primes up to a limit, one per line.
    PsPrimes {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        limit: u64,
        /// Only print primes in (lo, hi].
        #[arg(long, value_parser = parse_range)]
        range: Option<(f64, f64)>,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Smoothing kernel summary, tables and bound check.
    Kernel {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = DEFAULT_MESH_POINTS)]
        mesh: usize,
        /// Write `y,theta`.
        #[arg(long)]
        emit_theta: Option<PathBuf>,
        /// Write `x,transform,bound` on the bound-check grid.
        #[arg(long)]
        emit_transform: Option<PathBuf>,
        /// Check the transform bound on 10^4 log-spaced points.
        #[arg(long)]
        verify: bool,
    },
    /// One exponential sum over a grid of alpha as `alpha,re,im,abs`.
    Sums {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_enum)]
        kind: SumKind,
        #[arg(long, default_value = "0:0.5:401")]
        alpha_grid: Grid,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continued fraction convergents as `index,partial_quotient,a,q,residual`.
    Cf {
        /// Expand this value; otherwise lambda1/lambda2 from --config.
        #[arg(long, required_unless_present = "config", allow_negative_numbers = true)]
        x: Option<f64>,
        #[arg(long, conflicts_with = "x")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        terms: usize,
        /// Print only this convergent.
        #[arg(long)]
        convergent_index: Option<usize>,
    },
    /// Rational approximations of lambda1 t and lambda2 t over a t grid.
    Dichotomy {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Defaults to Delta:H:1000.
        #[arg(long)]
        t_grid: Option<Grid>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Direct Gamma against its three-piece Fourier decomposition.
    GammaDecomp {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Write the triples found as `p1,p2,p3,form_value,weight`.
        #[arg(long)]
        emit_triples: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        max_triples: usize,
        /// Pieces to integrate, e.g. `1,2,3`.
        #[arg(long, default_value = "1,2,3", value_parser = parse_pieces)]
        pieces: [bool; 3],
        /// Write a JSON manifest here.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Staged run writing CSV tables and a manifest into a directory.
    Run {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = Stage::ALL.to_vec())]
        stages: Vec<Stage>,
        #[arg(long, default_value = "0:0.5:401")]
        alpha_grid: Grid,
        #[arg(long)]
        t_grid: Option<Grid>,
        #[arg(long, default_value = "1,2,3", value_parser = parse_pieces)]
        pieces: [bool; 3],
        #[arg(long, default_value_t = 1000)]
        max_triples: usize,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, found `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower end `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper end `{hi}`"))?;
    if !(lo <= hi) {
        return Err(format!("need lo <= hi, found `{s}`"));
    }
    Ok((lo, hi))
}

fn parse_pieces(s: &str) -> Result<[bool; 3], String> {
    let mut out = [false; 3];
    for part in s.split(',') {
        match part.trim() {
            "1" => out[0] = true,
            "2" => out[1] = true,
            "3" => out[2] = true,
            other => return Err(format!("pieces are 1, 2, 3; found `{other}`")),
        }
    }
    Ok(out)
}

fn load_instance(args: &InstanceArgs, exploratory: bool) -> Result<Instance, RunError> {
    let mut raw = read_config(&args.config)?;
    if let Some(e) = args.eps_user {
        raw.epsilon_user = Some(e);
    }
    if let Some(i) = args.convergent_index {
        let report = validate_coefficients(&raw.coefficients());
        // without a canonical form the full validation below reports why
        if let Some(canonical) = report.canonical {
            let convergents = ratio_convergents(&canonical.coefficients)?;
            let r = convergents.get(i).ok_or_else(|| {
                RunError::Usage(format!(
                    "convergent index {i} out of range: lambda1/lambda2 has {} convergents at double precision",
                    convergents.len()
                ))
            })?;
            raw.q0 = r.q();
        }
    }
    let inst = validate(raw, exploratory)?;
    for w in &inst.warnings {
        eprintln!("warning: {w}");
    }
    Ok(inst)
}

fn emit(csv: &Csv, out: Option<&Path>) -> Result<(), RunError> {
    match out {
        Some(path) => csv.write(path).map_err(|e| RunError::io(path, e)),
        None => io::stdout()
            .write_all(csv.as_str().as_bytes())
            .map_err(|e| RunError::io(Path::new("<stdout>"), e)),
    }
}

fn execute(cli: Cli) -> Result<(), RunError> {
    let exploratory = cli.exploratory;
    match cli.command {
        Command::PsPrimes { gamma, limit, range, cache } => {
            let g = GammaExponent::new(gamma)?;
            let (set, _) = ps_set_cached(g, limit, cache.as_deref())?;
            let (lo, hi) = range.unwrap_or((0.0, limit as f64));
            let mut text = String::new();
            for p in set.primes().filter(|&p| p as f64 > lo && p as f64 <= hi) {
                text.push_str(&p.to_string());
                text.push('\n');
            }
            io::stdout().write_all(text.as_bytes()).map_err(|e| RunError::io(Path::new("<stdout>"), e))
        }
        Command::Kernel { epsilon, k, mesh, emit_theta, emit_transform, verify } => {
            let kernel = make_kernel(epsilon, k, mesh)?;
            println!("epsilon = {}", real(kernel.epsilon()));
            println!("k = {}", kernel.k());
            println!("a = {}", real(kernel.a()));
            println!("b = {}", real(kernel.b()));
            println!("mass = {}", real(kernel.mass()));
            let xs = kernel_check_points(epsilon);
            if let Some(path) = &emit_theta {
                emit(&kernel_theta_table(&kernel, 1001), Some(path))?;
            }
            if let Some(path) = &emit_transform {
                emit(&kernel_transform_table(&kernel, &xs), Some(path))?;
            }
            if verify {
                let r = kernel.verify_bounds(&xs);
                println!("bound_points = {}", r.points);
                println!("bound_violations = {}", r.violations);
                println!("bound_worst_ratio = {}", real(r.worst_ratio));
                if r.violations > 0 {
                    return Err(RunError::Check(format!("{} transform bound violations", r.violations)));
                }
            }
            Ok(())
        }
        Command::Sums { instance, kind, alpha_grid, out } => {
            let inst = load_instance(&instance, exploratory)?;
            let mut ctx = Context::new(inst, instance.cache.clone());
            let csv = sum_table(kind, &alpha_grid.points(), &mut ctx)?;
            emit(&csv, out.as_deref())
        }
        Command::Cf { x, config, terms, convergent_index } => {
            let value = match (x, config) {
                (Some(x), _) => x,
                (None, Some(path)) => {
                    let raw = read_config(&path)?;
                    let report = validate_coefficients(&raw.coefficients());
                    let c = report.canonical.ok_or_else(|| {
                        RunError::Hypothesis(psd::HypothesisError {
                            violations: report.failures().into_iter().map(str::to_string).collect(),
                        })
                    })?;
                    c.coefficients.lambda1 / c.coefficients.lambda2
                }
                (None, None) => return Err(RunError::Usage("give --x or --config".into())),
            };
            let cf = continued_fraction(value, terms)?;
            let mut csv = Csv::new(&["index", "partial_quotient", "a", "q", "residual"]);
            for (i, (pq, r)) in cf.partial_quotients.iter().zip(&cf.convergents).enumerate() {
                if convergent_index.is_none_or(|want| want == i) {
                    csv.row(&[i.into(), (*pq).into(), r.a().into(), r.q().into(), r.residual(value).into()]);
                }
            }
            if let Some(i) = convergent_index {
                if i >= cf.convergents.len() {
                    return Err(RunError::Usage(format!(
                        "convergent index {i} out of range: {} convergents available",
                        cf.convergents.len()
                    )));
                }
            }
            if cf.rational_at_precision {
                eprintln!("note: expansion stopped at double precision after {} terms", cf.convergents.len());
            }
            emit(&csv, None)
        }
        Command::Dichotomy { instance, t_grid, out } => {
            let inst = load_instance(&instance, exploratory)?;
            let ctx = Context::new(inst, instance.cache.clone());
            let grid = t_grid.unwrap_or_else(|| default_t_grid(ctx.params()));
            let (csv, counts) = dichotomy_table(&ctx, &grid.points())?;
            emit(&csv, out.as_deref())?;
            let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
            eprintln!("cases: {}", summary.join(", "));
            Ok(())
        }
        Command::GammaDecomp { instance, emit_triples, max_triples, pieces, manifest } => {
            let inst = load_instance(&instance, exploratory)?;
            let mut ctx = Context::new(inst, instance.cache.clone());
            let started = std::time::Instant::now();
            let r = run_decomposition(&mut ctx, pieces)?;
            let decomp_seconds = started.elapsed().as_secs_f64();
            let rows = psd::pipeline::decomposition_rows(&r);
            let text = quantity_lines(&rows);
            io::stdout().write_all(text.as_bytes()).map_err(|e| RunError::io(Path::new("<stdout>"), e))?;

            let mut record = StageRecord {
                name: "decomp",
                operations: vec!["big_gamma_direct", "gamma_pieces", "integral_j", "box_integral_b", "phi_bound", "tail_bound_gamma3"],
                wall_seconds: decomp_seconds,
                outputs: vec![psd::pipeline::OutputRecord {
                    file: "<stdout>".into(),
                    bytes: text.len() as u64,
                    sha256: sha256_hex(text.as_bytes()),
                }],
                summary: rows.iter().map(|(k, v)| (k.to_string(), (*v).into())).collect(),
            };
            let mut triples_record = None;
            if let Some(path) = &emit_triples {
                let t0 = std::time::Instant::now();
                let s = run_triples(&mut ctx, max_triples)?;
                let csv = triples_table(&s);
                emit(&csv, Some(path))?;
                let mut summary = BTreeMap::new();
                triple_summary(&s, &mut summary);
                eprintln!(
                    "{} triples found, {} written to {}; formula epsilon {}{}",
                    s.total_found,
                    s.records.len(),
                    path.display(),
                    real(s.formula_epsilon),
                    if s.formula_epsilon_vacuous { " (> 1, threshold vacuous at this scale)" } else { "" }
                );
                triples_record = Some(StageRecord {
                    name: "triples",
                    operations: vec!["find_triples"],
                    wall_seconds: t0.elapsed().as_secs_f64(),
                    outputs: vec![psd::pipeline::OutputRecord {
                        file: path.display().to_string(),
                        bytes: csv.as_str().len() as u64,
                        sha256: sha256_hex(csv.as_str().as_bytes()),
                    }],
                    summary,
                });
            }
            if let Some(path) = &manifest {
                let mut stages = vec![Stage::Primes, Stage::Decomp];
                if triples_record.is_some() {
                    stages.push(Stage::Triples);
                }
                let mut m = RunManifest::new(&ctx.instance, cli.threads, stages);
                record.summary.insert("pieces".into(), serde_json::json!(pieces));
                m.stages.push(record);
                m.stages.extend(triples_record);
                m.complete = true;
                m.wall_seconds = started.elapsed().as_secs_f64();
                m.write(path)?;
            }
            Ok(())
        }
        Command::Run { instance, out, stages, alpha_grid, t_grid, pieces, max_triples } => {
            let inst = load_instance(&instance, exploratory)?;
            let mut ctx = Context::new(inst, instance.cache.clone());
            let opts = Options { alpha_grid, t_grid, pieces, max_triples };
            match run_pipeline(&mut ctx, &stages, &opts, &out, cli.threads) {
                Ok(m) => {
                    for s in &m.stages {
                        eprintln!("{:<10} {:>9.3}s  {} output(s)", s.name, s.wall_seconds, s.outputs.len());
                    }
                    eprintln!("manifest: {}", out.join(psd::pipeline::MANIFEST_FILE).display());
                    Ok(())
                }
                Err((_, e)) => {
                    eprintln!("run incomplete; partial manifest in {}", out.display());
                    Err(e)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
