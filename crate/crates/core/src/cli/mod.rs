//! Command-line driver: single solves, benchmark sweeps, spectrum dumps and
//! partition export.

mod bench;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::{evaluate_partition, gp_partition, structural_partition, uniform_partition, Partition, PartitionQuality};
use crate::projector::factorize_partition;
use crate::ripgraph::{build_rip_graph, sparsify_dense_columns, GraphOptions, RipGraph, VertexWeights};
use crate::scaling::{equilibrate_inf, row_unit_2norm, unscale_solution, ScalingRecord, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use crate::solver::{backward_error, block_cimmino_cg, make_rhs, SolveConfig, SolveReport, Variant};
use crate::sparse::{read_matrix_market, SparseMatrix};
use crate::spectrum::{spectrum_compare, spectrum_of, SpectrumComparison, SpectrumSummary, DEFAULT_DENSE_CAP};

pub use bench::{bench_header, geometric_mean, performance_ratios, BenchRecord};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cimmino", version, about = "Block Cimmino solver with row inner-product graph partitioning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve A x = A·1 and print a JSON report.
    Solve(SolveArgs),
    /// Sweep methods and seeds over one or more matrices.
    Bench(BenchArgs),
    /// Dump the eigenvalues of the iteration operator for each method.
    Spectrum(SpectrumArgs),
    /// Compute and write a row partition.
    Partition(SolveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Up,
    Gp,
    Structural,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Up => "up",
            Method::Gp => "gp",
            Method::Structural => "structural",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Auto,
    Fixed(usize),
}

impl FromStr for KChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) => Err("K must be at least 1".into()),
            Ok(k) => Ok(KChoice::Fixed(k)),
            Err(_) => Err(format!("expected an integer or `auto`, got `{s}`")),
        }
    }
}

/// `max(2, round(n / target))` with 10,000 rows per block below n = 100,000
/// and 20,000 from there on.
pub fn auto_k(n: usize) -> usize {
    let target = if n < 100_000 { 10_000.0 } else { 20_000.0 };
    ((n as f64 / target).round() as usize).max(2)
}

impl KChoice {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            KChoice::Auto => auto_k(n),
            KChoice::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "INT|auto", default_value = "auto")]
    pub k: KChoice,
    #[arg(long, default_value_t = crate::partition::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = crate::solver::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long = "max-iters", default_value_t = crate::solver::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = crate::ripgraph::DEFAULT_ALPHA)]
    pub alpha: u64,
    #[arg(long = "drop-tol", default_value_t = crate::ripgraph::DEFAULT_DROP_TOL)]
    pub drop_tol: f64,
    /// Skip the row/column infinity-norm equilibration.
    #[arg(long = "no-col-scaling")]
    pub no_col_scaling: bool,
    #[arg(long = "vertex-weights", value_enum, default_value = "unit")]
    pub vertex_weights: VertexWeightsArg,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VertexWeightsArg {
    Unit,
    Nnz,
}

impl From<VertexWeightsArg> for VertexWeights {
    fn from(v: VertexWeightsArg) -> Self {
        match v {
            VertexWeightsArg::Unit => VertexWeights::Unit,
            VertexWeightsArg::Nnz => VertexWeights::Nnz,
        }
    }
}

impl CommonArgs {
    fn graph_options(&self) -> GraphOptions {
        GraphOptions {
            alpha: self.alpha,
            drop_tol: self.drop_tol,
            vertex_weights: self.vertex_weights.into(),
        }
    }

    fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            tol: self.tol,
            max_iters: self.max_iters,
            omega: 1.0,
            variant: Variant::Cg,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_enum, default_value = "gp")]
    pub method: Method,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report (or partition) here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Repeat for several matrices.
    #[arg(long, required = true)]
    pub matrix: Vec<PathBuf>,
    /// Repeat or comma-separate; defaults to up and gp.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub method: Vec<Method>,
    /// First seed of the sweep.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of seeds per (matrix, method).
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Bench CSV path; the profile and summary CSVs are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Repeat or comma-separate; defaults to up and gp.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub method: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::spectrum::DEFAULT_TAU)]
    pub tau: f64,
    /// Output directory for the spectrum files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Reads `CIMMINO_LOG` (error, warn, info, debug, trace); defaults to warn.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("CIMMINO_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn cli_err(msg: impl Into<String>) -> Error {
    Error::Cli(msg.into())
}

/// The system after preprocessing, ready for partitioning.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub original: SparseMatrix,
    pub f_original: Vec<f64>,
    pub a: SparseMatrix,
    pub f: Vec<f64>,
    pub scaling: ScalingRecord,
}

pub fn matrix_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// Equilibrates (unless disabled) and normalizes rows; the right-hand side
/// is `A·1` on the original matrix.
pub fn prepare_matrix(name: String, original: SparseMatrix, col_scaling: bool) -> Result<Prepared> {
    if !original.is_square() {
        return Err(cli_err(format!("matrix is {}x{}, expected square", original.nrows(), original.ncols())));
    }
    let f_original = make_rhs(&original);
    let (a1, rec1) = if col_scaling {
        equilibrate_inf(&original, DEFAULT_MAX_SWEEPS, DEFAULT_TOL)?
    } else {
        (original.clone(), ScalingRecord::identity(original.nrows(), original.ncols()))
    };
    let f1 = rec1.scale_rhs(&f_original)?;
    let (a, f, rec2) = row_unit_2norm(&a1, &f1)?;
    log::info!("{name}: n = {}, nnz = {}, {} equilibration sweeps", a.nrows(), a.nnz(), rec1.sweeps);
    Ok(Prepared {
        name,
        original,
        f_original,
        a,
        f,
        scaling: rec1.compose(&rec2),
    })
}

pub fn prepare(path: &Path, col_scaling: bool) -> Result<Prepared> {
    let a = read_matrix_market(path)?;
    prepare_matrix(matrix_name(path), a, col_scaling)
}

/// Row inner-product graph of the preprocessed matrix, after dense-column
/// sparsification.
pub fn rip_graph(prep: &Prepared, opts: &GraphOptions) -> Result<RipGraph> {
    let sparse = sparsify_dense_columns(&prep.a);
    Ok(build_rip_graph(&sparse, opts)?)
}

pub fn compute_partition(
    prep: &Prepared,
    graph: &RipGraph,
    method: Method,
    k: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Partition> {
    Ok(match method {
        Method::Up => uniform_partition(prep.a.nrows(), k)?,
        Method::Gp => gp_partition(graph, k, epsilon, seed)?,
        Method::Structural => structural_partition(&prep.a, k, epsilon, seed)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub matrix: String,
    pub n: usize,
    pub nnz: usize,
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub t_partition: f64,
    /// Backward error of the unscaled solution on the original system.
    pub unscaled_backward_error: f64,
    /// `final_x` is in the coordinates of the original system.
    pub report: SolveReport,
    #[serde(skip)]
    pub partition: Partition,
}

impl RunOutcome {
    pub fn quality(&self) -> &PartitionQuality {
        self.report.partition_quality.as_ref().expect("set by run_method")
    }
}

/// Partition, factor and solve one preprocessed system.
pub fn run_method(prep: &Prepared, graph: &RipGraph, common: &CommonArgs, method: Method, seed: u64) -> Result<RunOutcome> {
    let n = prep.a.nrows();
    let k = common.k.resolve(n);
    let t0 = Instant::now();
    let partition = compute_partition(prep, graph, method, k, common.epsilon, seed)?;
    let t_partition = t0.elapsed().as_secs_f64();
    let quality = evaluate_partition(&prep.a, graph, &partition);
    log::info!(
        "{} {} K={k} seed={seed}: interIP {:.6e}, imbalance {:.4}",
        prep.name,
        method.name(),
        quality.interip,
        quality.imbalance
    );

    let t1 = Instant::now();
    let blocks = factorize_partition(&prep.a, &partition)?;
    let t_factor = t1.elapsed().as_secs_f64();
    let mut report = block_cimmino_cg(&prep.a, &prep.f, &blocks, &common.solve_config())?;
    report.timings.factor = t_factor;
    report.partition_quality = Some(quality);
    let x = unscale_solution(&report.final_x, &prep.scaling)?;
    let unscaled_backward_error = backward_error(&prep.original, &x, &prep.f_original)?;
    report.final_x = x;
    log::info!(
        "{} {}: {} after {} iterations",
        prep.name,
        method.name(),
        if report.converged { "converged" } else { "not converged" },
        report.iters
    );
    Ok(RunOutcome {
        matrix: prep.name.clone(),
        n,
        nnz: prep.a.nnz(),
        method,
        k,
        seed,
        t_partition,
        unscaled_backward_error,
        report,
        partition,
    })
}

fn open_out(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| cli_err(format!("cannot create {}: {e}", path.display())))
}

fn io_err(e: std::io::Error) -> Error {
    cli_err(format!("write failed: {e}"))
}

fn set_threads(jobs: Option<usize>) {
    if let Some(j) = jobs {
        if rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().is_err() {
            log::debug!("thread pool already initialized; --jobs ignored");
        }
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let prep = prepare(&args.matrix, !args.common.no_col_scaling)?;
    let graph = rip_graph(&prep, &args.common.graph_options())?;
    let out = run_method(&prep, &graph, &args.common, args.method, args.seed)?;
    let json = serde_json::to_string_pretty(&out).map_err(|e| cli_err(e.to_string()))?;
    match &args.out {
        Some(p) => {
            let mut w = open_out(p)?;
            writeln!(w, "{json}").map_err(io_err)?;
            w.flush().map_err(io_err)?;
        }
        None => println!("{json}"),
    }
    Ok(if out.report.converged {
        EXIT_CONVERGED
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn cmd_partition(args: &SolveArgs) -> Result<i32> {
    let prep = prepare(&args.matrix, !args.common.no_col_scaling)?;
    let graph = rip_graph(&prep, &args.common.graph_options())?;
    let k = args.common.k.resolve(prep.a.nrows());
    let p = compute_partition(
        &prep,
        &graph,
        args.method,
        k,
        args.common.epsilon,
        args.seed,
    )?;
    let quality = evaluate_partition(&prep.a, &graph, &p);
    let summary = serde_json::json!({
        "matrix": prep.name,
        "method": args.method,
        "k": k,
        "seed": args.seed,
        "cutsize": quality.cutsize,
        "interip": quality.interip,
        "imbalance": quality.imbalance,
        "part_sizes": p.part_sizes(),
    });
    let summary = serde_json::to_string_pretty(&summary).map_err(|e| cli_err(e.to_string()))?;
    match &args.out {
        Some(path) => {
            p.write_file(path)?;
            println!("{summary}");
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            p.write_to(&mut lock).map_err(io_err)?;
            eprintln!("{summary}");
        }
    }
    Ok(EXIT_CONVERGED)
}

#[derive(Debug, Serialize)]
struct SpectrumOutput {
    matrix: String,
    n: usize,
    k: usize,
    methods: Vec<(Method, SpectrumSummary)>,
    /// First method against the second, when two or more were run.
    comparison: Option<SpectrumComparison>,
}

fn default_methods(m: &[Method]) -> Vec<Method> {
    if m.is_empty() {
        vec![Method::Up, Method::Gp]
    } else {
        m.to_vec()
    }
}

pub fn cmd_spectrum(args: &SpectrumArgs) -> Result<i32> {
    let prep = prepare(&args.matrix, !args.common.no_col_scaling)?;
    let n = prep.a.nrows();
    if n > DEFAULT_DENSE_CAP {
        return Err(crate::error::SpectrumError::TooLarge { n, cap: DEFAULT_DENSE_CAP }.into());
    }
    let graph = rip_graph(&prep, &args.common.graph_options())?;
    let k = args.common.k.resolve(n);
    std::fs::create_dir_all(&args.out).map_err(|e| cli_err(format!("cannot create {}: {e}", args.out.display())))?;
    let mut reports = Vec::new();
    for method in default_methods(&args.method) {
        let p = compute_partition(&prep, &graph, method, k, args.common.epsilon, args.seed)?;
        let blocks = factorize_partition(&prep.a, &p)?;
        let rep = spectrum_of(&blocks, n, DEFAULT_DENSE_CAP, args.tau)?;
        let stem = format!("{}_{}", prep.name, method.name());
        let mut w = open_out(&args.out.join(format!("{stem}_spectrum.csv")))?;
        rep.write_csv(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
        std::fs::write(args.out.join(format!("{stem}_summary.json")), rep.summary_json() + "\n").map_err(io_err)?;
        reports.push((method, rep));
    }
    let comparison = match reports.as_slice() {
        [(_, a), (_, b), ..] => Some(spectrum_compare(a, b)?),
        _ => None,
    };
    let out = SpectrumOutput {
        matrix: prep.name.clone(),
        n,
        k,
        methods: reports.iter().map(|(m, r)| (*m, r.summary())).collect(),
        comparison,
    };
    println!("{}", serde_json::to_string_pretty(&out).map_err(|e| cli_err(e.to_string()))?);
    Ok(EXIT_CONVERGED)
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Solve(a) => {
            set_threads(a.common.jobs);
            cmd_solve(a)
        }
        Command::Partition(a) => {
            set_threads(a.common.jobs);
            cmd_partition(a)
        }
        Command::Spectrum(a) => {
            set_threads(a.common.jobs);
            cmd_spectrum(a)
        }
        Command::Bench(a) => {
            set_threads(a.common.jobs);
            bench::cmd_bench(a)
        }
    }
}

/// Entry point for the binary: parses `args`, runs, and maps errors to the
/// error exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_CONVERGED };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_k_rule() {
        assert_eq!(auto_k(5_005), 2);
        assert_eq!(auto_k(51_993), 5);
        assert_eq!(auto_k(99_999), 10);
        assert_eq!(auto_k(100_000), 5);
        assert_eq!(auto_k(1_000_000), 50);
    }

    #[test]
    fn k_parsing() {
        assert_eq!("auto".parse::<KChoice>().unwrap(), KChoice::Auto);
        assert_eq!("8".parse::<KChoice>().unwrap(), KChoice::Fixed(8));
        assert!("0".parse::<KChoice>().is_err());
        assert!("x".parse::<KChoice>().is_err());
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "cimmino",
            "solve",
            "--matrix",
            "m.mtx",
            "--method",
            "structural",
            "--k",
            "4",
            "--epsilon",
            "0.05",
            "--seed",
            "3",
            "--tol",
            "1e-8",
            "--max-iters",
            "50",
            "--alpha",
            "100",
            "--drop-tol",
            "0",
            "--no-col-scaling",
            "--vertex-weights",
            "nnz",
            "--out",
            "r.json",
            "--jobs",
            "2",
        ])
        .unwrap();
        let Command::Solve(a) = cli.command else { panic!() };
        assert_eq!(a.method, Method::Structural);
        assert_eq!(a.common.k, KChoice::Fixed(4));
        assert!(a.common.no_col_scaling);
        assert_eq!(a.common.vertex_weights, VertexWeightsArg::Nnz);
        assert_eq!(a.common.max_iters, 50);

        let cli = Cli::try_parse_from(["cimmino", "bench", "--matrix", "a.mtx", "--matrix", "b.mtx", "--seeds", "3", "--method", "up,gp"])
            .unwrap();
        let Command::Bench(b) = cli.command else { panic!() };
        assert_eq!(b.matrix.len(), 2);
        assert_eq!(b.method, vec![Method::Up, Method::Gp]);
        let cli = Cli::try_parse_from(["cimmino", "spectrum", "--matrix", "a.mtx", "--tau", "0.2"]).unwrap();
        let Command::Spectrum(s) = cli.command else { panic!() };
        assert_eq!(s.tau, 0.2);
    }
}
