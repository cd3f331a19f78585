//! Command-line front end: load matrices, pick a mode, run, report.

use clap::{ArgGroup, Parser};
use regulattice::error::{Error, Result};
use regulattice::io::{load_matrix, MatrixFormat};
use regulattice::modes::find_mode;
use regulattice::regularity::{
    DEFAULT_ORACLE_LIMIT, DEFAULT_SHRINK_RETRIES, DEFAULT_WITNESS_BUDGET,
};
use regulattice::report::{build_report, to_json, write_trajectory, InputRecord, RunReport};
use regulattice::{RealMatrix, RunConfig, RunStatus};
use std::path::PathBuf;
use std::process::ExitCode;

/// Computes regular block partitions of real matrices and weighted graphs.
#[derive(Parser, Debug)]
#[command(name = "regulattice", version, group(
    ArgGroup::new("source").required(true).args(["input", "multi"])
))]
struct Args {
    /// Input matrix file.
    #[arg(long, value_name = "PATH", conflicts_with = "multi")]
    input: Option<PathBuf>,

    /// Input encoding: csv-dense, coordinate-triplet, or edge-list.
    #[arg(long, value_name = "FMT", default_value = "csv-dense")]
    format: MatrixFormat,

    /// Deviation threshold, in (0, 1/2].
    #[arg(long, value_name = "R")]
    epsilon: f64,

    /// Lower bound on the number of classes per axis.
    #[arg(long, value_name = "L", default_value_t = 1)]
    min_classes: usize,

    /// Use one partition on both axes of a square matrix.
    #[arg(long, conflicts_with_all = ["graph", "multi"])]
    symmetric: bool,

    /// Treat the input as a graph: symmetric partition plus a verdict for
    /// every class pair.
    #[arg(long, conflicts_with = "multi")]
    graph: bool,

    /// Several matrices to partition simultaneously (general mode).
    #[arg(long, value_name = "PATH", num_args = 1..)]
    multi: Vec<PathBuf>,

    /// Master seed for all randomized search.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,

    /// Largest block side checked by exhaustive enumeration.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_ORACLE_LIMIT)]
    oracle_limit: usize,

    /// Candidate subset pairs tried per block by the heuristic search.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_WITNESS_BUDGET)]
    witness_budget: usize,

    /// Cap on refinement iterations (default depends on mode and epsilon).
    #[arg(long, value_name = "N")]
    max_iterations: Option<usize>,

    /// Use the plain quadratic potential, with no density cutoff.
    #[arg(long)]
    dense: bool,

    /// Write the JSON report to this path.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,

    /// Write the per-iteration trajectory CSV to this path.
    #[arg(long, value_name = "PATH")]
    trajectory: Option<PathBuf>,
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("REGULATTICE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| Error::Domain(format!("REGULATTICE_THREADS must be a positive integer, got '{raw}'")))?;
    if n == 0 {
        return Err(Error::Domain(
            "REGULATTICE_THREADS must be a positive integer, got '0'".into(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Domain(format!("could not configure thread pool: {e}")))
}

fn load_inputs(args: &Args) -> Result<(Vec<RealMatrix>, Vec<InputRecord>)> {
    let paths: Vec<&PathBuf> = if args.multi.is_empty() {
        vec![args.input.as_ref().expect("clap enforces a source")]
    } else {
        args.multi.iter().collect()
    };
    let mut matrices = Vec::with_capacity(paths.len());
    let mut records = Vec::with_capacity(paths.len());
    for path in paths {
        let (matrix, _) = load_matrix(path, args.format).map_err(|e| Error::InputFile {
            path: path.display().to_string(),
            source: Box::new(e),
        })?;
        records.push(InputRecord {
            path: path.display().to_string(),
            format: args.format.as_str().to_string(),
            rows: matrix.rows(),
            cols: matrix.cols(),
        });
        matrices.push(matrix);
    }
    Ok((matrices, records))
}

fn print_summary(report: &RunReport) {
    println!("mode: {}", report.mode);
    for input in &report.inputs {
        println!(
            "input: {} ({}, {}x{})",
            input.path, input.format, input.rows, input.cols
        );
    }
    println!(
        "epsilon: {}, initial classes: {}",
        report.config.epsilon, report.initial_classes
    );
    println!("status: {} ({})", report.status, report.stop_detail);
    println!(
        "iterations: {}, final potential: {}",
        report.iterations.len(),
        report.final_phi
    );
    println!(
        "classes: {} x {}, exceptional rows: {}, cols: {}",
        report.partition.row_classes.len(),
        report.partition.col_classes.len(),
        report.partition.row_exceptional.len(),
        report.partition.col_exceptional.len()
    );
    for census in &report.final_census {
        println!(
            "matrix {}: {} blocks, certified {}, witnessed {}, high-density {}, unknown {}",
            census.matrix,
            census.blocks,
            census.certified_regular,
            census.witnessed_irregular,
            census.high_density,
            census.unknown
        );
    }
    if let Some(pairs) = &report.graph_pairs {
        println!(
            "pairs: {} total, regular {}, irregular {}, unknown {}, within bound: {}",
            pairs.pairs.len(),
            pairs.regular,
            pairs.irregular,
            pairs.unknown,
            pairs.within_bound
        );
    }
}

fn run(args: &Args) -> Result<ExitCode> {
    configure_threads()?;
    let (matrices, records) = load_inputs(args)?;

    let mode_name = if !args.multi.is_empty() {
        "multi"
    } else if args.graph {
        "graph"
    } else if args.symmetric {
        "symmetric"
    } else {
        "general"
    };

    let cfg = RunConfig {
        epsilon: args.epsilon,
        min_classes: args.min_classes,
        max_iterations: args.max_iterations,
        oracle_limit: args.oracle_limit,
        witness_budget: args.witness_budget,
        shrink_retries: DEFAULT_SHRINK_RETRIES,
        master_seed: args.seed,
        dense_mode: args.dense,
        tolerance: regulattice::potential::DEFAULT_TOLERANCE,
    };
    cfg.validate()?;

    let mode = find_mode(mode_name)?;
    let outcome = mode.run(&matrices, &cfg)?;
    let report = build_report(mode_name, &cfg, &records, &matrices, &outcome)?;

    if let Some(path) = &args.report {
        std::fs::write(path, to_json(&report)?)?;
    }
    if let Some(path) = &args.trajectory {
        let file = std::fs::File::create(path)?;
        write_trajectory(std::io::BufWriter::new(file), &report)?;
    }
    print_summary(&report);

    Ok(match outcome.result.status {
        RunStatus::CertifiedRegular | RunStatus::HeuristicallyRegular => ExitCode::from(0),
        RunStatus::QuotaShortfall | RunStatus::IterationCap => ExitCode::from(2),
    })
}

fn main() -> ExitCode {
    // Usage problems are input errors and exit 1; help and version are not.
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::from(0);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
