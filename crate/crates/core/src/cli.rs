//! Command-line front end. Exit codes: 0 success, 2 invalid input, 3 degenerate instance.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::admm::{admm_solve, budget_from_sparsity, AdmmConfig};
use crate::baselines::{activation_weighted_prune, backsolve_exact, brute_force_support, magnitude_prune, PruneSolution, Method};
use crate::error::{PruneError, Result};
use crate::io::{gram_from_activation_file, read_matrix, write_matrix, Dtype};
use crate::linalg::{relative_error, GramMatrix, Matrix};
use crate::projection::{support_of, SparsityBudget};
use crate::report::{BudgetReport, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "layerprune", version, about = "Layer-wise sparse weight pruning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prune a weight matrix against a Gram matrix or raw activations.
    Prune(PruneArgs),
    /// Relative reconstruction error of a pruned matrix.
    Eval(EvalArgs),
    /// Exact solve on a given support, or exhaustive search on tiny layers.
    Oracle(OracleArgs),
    /// Convert an activations file into its Gram matrix.
    Gram(GramArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Alps,
    Mp,
    Wanda,
}

#[derive(Debug, Args)]
#[group(id = "input", required = true, multiple = false)]
pub struct GramSource {
    #[arg(long, value_name = "PATH")]
    pub gram: Option<PathBuf>,
    /// Streamed in row blocks, so the file may be arbitrarily tall.
    #[arg(long, value_name = "PATH")]
    pub activations: Option<PathBuf>,
}

impl GramSource {
    fn load(&self) -> Result<GramMatrix> {
        match (&self.gram, &self.activations) {
            (Some(path), _) => GramMatrix::new(read_matrix(path)?),
            (None, Some(path)) => gram_from_activation_file(path),
            (None, None) => unreachable!("clap enforces one source"),
        }
    }
}

#[derive(Debug, Args)]
#[group(id = "budget", required = true, multiple = false)]
pub struct BudgetArgs {
    /// Fraction of weights to remove.
    #[arg(long, value_name = "F")]
    pub sparsity: Option<f64>,
    /// Keep at most N of every M consecutive inputs per output, e.g. `2:4`.
    #[arg(long, value_name = "N:M", value_parser = parse_nm)]
    pub nm: Option<(usize, usize)>,
    /// Number of weights to keep.
    #[arg(long, value_name = "INT")]
    pub k: Option<usize>,
}

fn parse_nm(s: &str) -> std::result::Result<(usize, usize), String> {
    let (n, m) = s.split_once(':').ok_or_else(|| format!("expected N:M, got {s:?}"))?;
    let n = n.trim().parse().map_err(|e| format!("bad N in {s:?}: {e}"))?;
    let m = m.trim().parse().map_err(|e| format!("bad M in {s:?}: {e}"))?;
    Ok((n, m))
}

impl BudgetArgs {
    fn resolve(&self, rows: usize, cols: usize) -> Result<SparsityBudget> {
        let budget = match (self.sparsity, self.nm, self.k) {
            (Some(s), _, _) => budget_from_sparsity(s, rows, cols)?,
            (_, Some((n, m)), _) => SparsityBudget::NM { n, m },
            (_, _, Some(k)) => SparsityBudget::Unstructured { k },
            _ => unreachable!("clap enforces one budget"),
        };
        budget.validate(rows, cols)?;
        Ok(budget)
    }
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[arg(long, value_name = "PATH")]
    pub weights: PathBuf,
    #[command(flatten)]
    pub source: GramSource,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, value_enum, default_value = "alps")]
    pub method: MethodArg,
    /// Pruned weights, written as f64.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub rho0: f64,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 10)]
    pub pcg_iters: usize,
    /// Recorded in the report; every solver is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dense reference weights.
    #[arg(long, value_name = "PATH")]
    pub weights: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub pruned: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub gram: PathBuf,
    /// Print `{"rel_error": ...}` at full precision instead of six decimals.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
#[group(id = "target", required = true, multiple = false)]
pub struct OracleTarget {
    /// Matrix whose nonzero pattern is the support for an exact backsolve.
    #[arg(long, value_name = "PATH")]
    pub support: Option<PathBuf>,
    /// Exhaustive search over all supports of this size (at most 20 weights).
    #[arg(long, value_name = "INT")]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_name = "PATH")]
    pub weights: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub gram: PathBuf,
    #[command(flatten)]
    pub target: OracleTarget,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GramArgs {
    #[arg(long, value_name = "PATH")]
    pub activations: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_degenerate() {
                EXIT_DEGENERATE
            } else {
                EXIT_INVALID
            }
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Prune(a) => cmd_prune(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Gram(a) => cmd_gram(a),
    }
}

fn load_problem(weights: &Path, h: GramMatrix) -> Result<(GramMatrix, Matrix)> {
    let w_hat = read_matrix(weights)?;
    if w_hat.rows() != h.dim() {
        return Err(PruneError::InvalidInput(format!(
            "weights are {}x{} but the gram matrix is {}x{}",
            w_hat.rows(),
            w_hat.cols(),
            h.dim(),
            h.dim()
        )));
    }
    Ok((h, w_hat))
}

fn emit(solution: &PruneSolution, budget: BudgetReport, start: Instant, seed: Option<u64>, out: Option<&Path>, report: Option<&Path>) -> Result<()> {
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let report_doc = RunReport::new(solution, budget, runtime_ms, seed)?;
    if let Some(path) = out {
        write_matrix(path, &solution.weights, Dtype::F64)?;
    }
    if let Some(path) = report {
        std::fs::write(path, report_doc.to_json() + "\n").map_err(crate::io::MatrixFileError::Io)?;
    }
    println!(
        "{} support_size={} objective={:e} rel_error={:.6}",
        report_doc.method, report_doc.support_size, report_doc.objective, report_doc.rel_error
    );
    Ok(())
}

pub fn cmd_prune(a: &PruneArgs) -> Result<()> {
    let start = Instant::now();
    let (h, w_hat) = load_problem(&a.weights, a.source.load()?)?;
    let (rows, cols) = w_hat.shape();
    let budget = a.budget.resolve(rows, cols)?;
    let solution = match a.method {
        MethodArg::Alps => {
            let cfg = AdmmConfig { rho0: a.rho0, max_iters: a.max_iters, pcg_iters: a.pcg_iters, ..AdmmConfig::default() };
            admm_solve(&h, &w_hat, &budget, &cfg)?
        }
        MethodArg::Mp => magnitude_prune(&h, &w_hat, &budget)?,
        MethodArg::Wanda => activation_weighted_prune(&w_hat, &h, &budget)?,
    };
    let summary = BudgetReport::new(&budget, rows, cols, a.budget.sparsity);
    emit(&solution, summary, start, a.seed, a.out.as_deref(), a.report.as_deref())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let h = GramMatrix::new(read_matrix(&a.gram)?)?;
    let (h, w_hat) = load_problem(&a.weights, h)?;
    let pruned = read_matrix(&a.pruned)?;
    if pruned.shape() != w_hat.shape() {
        return Err(PruneError::InvalidInput("pruned and dense weights differ in shape".into()));
    }
    let err = relative_error(&h, &w_hat, &pruned)?;
    if a.json {
        println!("{}", serde_json::json!({ "rel_error": err }));
    } else {
        println!("{err:.6}");
    }
    Ok(())
}

pub fn cmd_oracle(a: &OracleArgs) -> Result<()> {
    let start = Instant::now();
    let h = GramMatrix::new(read_matrix(&a.gram)?)?;
    let (h, w_hat) = load_problem(&a.weights, h)?;
    let (rows, cols) = w_hat.shape();
    let (solution, budget) = match (&a.target.support, a.target.k) {
        (Some(path), _) => {
            let pattern = read_matrix(path)?;
            if pattern.shape() != w_hat.shape() {
                return Err(PruneError::InvalidInput("support matrix and weights differ in shape".into()));
            }
            let support = support_of(&pattern);
            let w = backsolve_exact(&h, &w_hat, &support)?;
            let budget = SparsityBudget::Unstructured { k: support.count() };
            (PruneSolution::new(&h, &w_hat, w, Method::Backsolve, true)?, budget)
        }
        (None, Some(k)) => (brute_force_support(&h, &w_hat, k)?, SparsityBudget::Unstructured { k }),
        (None, None) => unreachable!("clap enforces one target"),
    };
    let summary = BudgetReport::new(&budget, rows, cols, None);
    emit(&solution, summary, start, None, a.out.as_deref(), a.report.as_deref())
}

pub fn cmd_gram(a: &GramArgs) -> Result<()> {
    let h = gram_from_activation_file(&a.activations)?;
    write_matrix(&a.out, h.as_matrix(), Dtype::F64)?;
    Ok(())
}
