//! Benchmark sweeps and performance-profile tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{prepare, rip_graph, run_method, BenchArgs, Method, RunOutcome, EXIT_CONVERGED};
use crate::error::{Error, Result};

const HEADER: &str = "matrix,n,nnz,method,seed,iters,converged,backward_error,interip,cutsize,imbalance,t_factor,t_solve";
/// Written in the iters column when a run did not converge.
pub const FAIL_MARKER: &str = "F";

pub fn bench_header() -> &'static str {
    HEADER
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub matrix: String,
    pub n: usize,
    pub nnz: usize,
    pub method: Method,
    pub seed: u64,
    /// Iterations performed, whether or not the run converged.
    pub iters: usize,
    pub converged: bool,
    pub backward_error: Option<f64>,
    pub interip: Option<f64>,
    pub cutsize: Option<f64>,
    pub imbalance: Option<f64>,
    pub t_factor: f64,
    pub t_solve: f64,
    pub error: Option<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl BenchRecord {
    pub fn from_outcome(o: &RunOutcome) -> Self {
        let q = o.quality();
        Self {
            matrix: o.matrix.clone(),
            n: o.n,
            nnz: o.nnz,
            method: o.method,
            seed: o.seed,
            iters: o.report.iters,
            converged: o.report.converged,
            backward_error: Some(o.report.final_backward_error()),
            interip: Some(q.interip),
            cutsize: Some(q.cutsize),
            imbalance: Some(q.imbalance),
            t_factor: o.report.timings.factor,
            t_solve: o.report.timings.iterate,
            error: None,
        }
    }

    pub fn failed(matrix: &str, n: usize, nnz: usize, method: Method, seed: u64, error: &Error) -> Self {
        Self {
            matrix: matrix.to_string(),
            n,
            nnz,
            method,
            seed,
            iters: 0,
            converged: false,
            backward_error: None,
            interip: None,
            cutsize: None,
            imbalance: None,
            t_factor: 0.0,
            t_solve: 0.0,
            error: Some(error.to_string()),
        }
    }

    pub fn csv_row(&self) -> String {
        let iters = if self.converged {
            self.iters.to_string()
        } else {
            FAIL_MARKER.to_string()
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6}",
            self.matrix,
            self.n,
            self.nnz,
            self.method.name(),
            self.seed,
            iters,
            self.converged,
            opt(self.backward_error),
            opt(self.interip),
            opt(self.cutsize),
            opt(self.imbalance),
            self.t_factor,
            self.t_solve
        )
    }
}

pub fn bench_csv(records: &[BenchRecord]) -> String {
    let mut s = String::new();
    s.push_str(HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// `None` for an empty slice.
pub fn geometric_mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    Some((xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp())
}

/// Ratio of each method's metric to the best (smallest) one. A failed
/// method (`None`) stays `None`, written as an empty cell.
pub fn performance_ratios(metrics: &[Option<f64>]) -> Vec<Option<f64>> {
    let best = metrics.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    metrics.iter().map(|m| m.map(|v| v / best)).collect()
}

struct Group<'a> {
    matrix: &'a str,
    method: Method,
    records: Vec<&'a BenchRecord>,
}

fn groups<'a>(records: &'a [BenchRecord], matrices: &'a [String], methods: &[Method]) -> Vec<Group<'a>> {
    let mut out = Vec::new();
    for m in matrices {
        for &method in methods {
            out.push(Group {
                matrix: m,
                method,
                records: records.iter().filter(|r| &r.matrix == m && r.method == method).collect(),
            });
        }
    }
    out
}

impl Group<'_> {
    fn iters_all(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.error.is_none()).map(|r| r.iters.max(1) as f64).collect()
    }

    fn iters_converged(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.converged).map(|r| r.iters.max(1) as f64).collect()
    }

    /// Geometric-mean iterations, or `None` if any seed failed.
    fn profile_metric(&self) -> Option<f64> {
        if self.records.is_empty() || self.records.iter().any(|r| !r.converged) {
            None
        } else {
            geometric_mean(&self.iters_converged())
        }
    }
}

/// Per (matrix, method): run counts and geometric means over seeds, both
/// over every completed run and over converged runs only.
pub fn summary_csv(records: &[BenchRecord], matrices: &[String], methods: &[Method]) -> String {
    let mut s = String::from("matrix,method,runs,converged_runs,geomean_iters_all,geomean_iters_converged,geomean_t_solve\n");
    for g in groups(records, matrices, methods) {
        let t: Vec<f64> = g.records.iter().filter(|r| r.error.is_none()).map(|r| r.t_solve.max(1e-9)).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            g.matrix,
            g.method.name(),
            g.records.len(),
            g.records.iter().filter(|r| r.converged).count(),
            geometric_mean(&g.iters_all()).map(|v| format!("{v:.3}")).unwrap_or_default(),
            geometric_mean(&g.iters_converged()).map(|v| format!("{v:.3}")).unwrap_or_default(),
            geometric_mean(&t).map(|v| format!("{v:.6}")).unwrap_or_default(),
        );
    }
    s
}

/// One row per matrix, one column per method, holding the ratio of the
/// method's geometric-mean iteration count to the best method's.
pub fn profile_csv(records: &[BenchRecord], matrices: &[String], methods: &[Method]) -> String {
    let mut s = String::from("matrix");
    for m in methods {
        s.push(',');
        s.push_str(m.name());
    }
    s.push('\n');
    let all = groups(records, matrices, methods);
    for (i, m) in matrices.iter().enumerate() {
        let metrics: Vec<Option<f64>> = all[i * methods.len()..(i + 1) * methods.len()]
            .iter()
            .map(Group::profile_metric)
            .collect();
        s.push_str(m);
        for r in performance_ratios(&metrics) {
            s.push(',');
            if let Some(v) = r {
                let _ = write!(s, "{v}");
            }
        }
        s.push('\n');
    }
    s
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "bench".into());
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn run_matrix(path: &Path, args: &BenchArgs, methods: &[Method]) -> Vec<BenchRecord> {
    let name = super::matrix_name(path);
    let cells: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| (args.seed..args.seed + args.seeds).map(move |s| (m, s)))
        .collect();
    let prep = match prepare(path, !args.common.no_col_scaling) {
        Ok(p) => p,
        Err(e) => {
            log::error!("{name}: {e}");
            return cells.iter().map(|&(m, s)| BenchRecord::failed(&name, 0, 0, m, s, &e)).collect();
        }
    };
    let (n, nnz) = (prep.a.nrows(), prep.a.nnz());
    let graph = match rip_graph(&prep, &args.common.graph_options()) {
        Ok(g) => g,
        Err(e) => {
            log::error!("{name}: {e}");
            return cells.iter().map(|&(m, s)| BenchRecord::failed(&name, n, nnz, m, s, &e)).collect();
        }
    };
    cells
        .par_iter()
        .map(|&(method, seed)| match run_method(&prep, &graph, &args.common, method, seed) {
            Ok(o) => BenchRecord::from_outcome(&o),
            Err(e) => {
                log::warn!("{name} {} seed {seed}: {e}", method.name());
                BenchRecord::failed(&name, n, nnz, method, seed, &e)
            }
        })
        .collect()
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let methods = super::default_methods(&args.method);
    if args.seeds == 0 {
        return Err(Error::Cli("--seeds must be at least 1".into()));
    }
    let mut records = Vec::new();
    let mut names = Vec::new();
    for path in &args.matrix {
        names.push(super::matrix_name(path));
        records.extend(run_matrix(path, args, &methods));
    }
    let bench = bench_csv(&records);
    let summary = summary_csv(&records, &names, &methods);
    match &args.out {
        Some(p) => {
            let write = |path: &Path, body: &str| {
                std::fs::write(path, body).map_err(|e| Error::Cli(format!("cannot write {}: {e}", path.display())))
            };
            write(p, &bench)?;
            write(&sibling(p, "profile"), &profile_csv(&records, &names, &methods))?;
            write(&sibling(p, "summary"), &summary)?;
            print!("{summary}");
        }
        None => print!("{bench}"),
    }
    Ok(EXIT_CONVERGED)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(matrix: &str, method: Method, seed: u64, iters: usize, converged: bool) -> BenchRecord {
        BenchRecord {
            matrix: matrix.into(),
            n: 10,
            nnz: 30,
            method,
            seed,
            iters,
            converged,
            backward_error: Some(1e-11),
            interip: Some(0.5),
            cutsize: Some(0.5),
            imbalance: Some(0.0),
            t_factor: 0.0,
            t_solve: 0.0,
            error: None,
        }
    }

    #[test]
    fn header_schema() {
        assert_eq!(
            bench_header(),
            "matrix,n,nnz,method,seed,iters,converged,backward_error,interip,cutsize,imbalance,t_factor,t_solve"
        );
        let csv = bench_csv(&[rec("m", Method::Gp, 0, 3, true)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), HEADER.split(',').count());
        assert_eq!(row[5], "3");
        let failed = rec("m", Method::Up, 0, 100, false).csv_row();
        assert_eq!(failed.split(',').nth(5), Some(FAIL_MARKER));
    }

    #[test]
    fn ratios() {
        assert_eq!(performance_ratios(&[Some(100.0), Some(200.0)]), vec![Some(1.0), Some(2.0)]);
        assert_eq!(performance_ratios(&[None, Some(50.0)]), vec![None, Some(1.0)]);
        assert_eq!(performance_ratios(&[None]), vec![None]);
    }

    #[test]
    fn geomean() {
        assert!((geometric_mean(&[1.0, 100.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(geometric_mean(&[]), None);
    }

    #[test]
    fn profile_marks_failures_empty() {
        let names = vec!["m".to_string()];
        let methods = [Method::Up, Method::Gp];
        let recs = vec![
            rec("m", Method::Up, 0, 10_000, false),
            rec("m", Method::Gp, 0, 40, true),
            rec("m", Method::Gp, 1, 40, true),
        ];
        assert_eq!(profile_csv(&recs, &names, &methods), "matrix,up,gp\nm,,1\n");
        let s = summary_csv(&recs, &names, &methods);
        assert!(s.contains("m,up,1,0,10000.000,,"), "{s}");
        assert!(s.contains("m,gp,2,2,40.000,40.000,"), "{s}");
    }
}
