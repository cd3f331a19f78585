//! Machine-readable run reports: versioned JSON plus a trajectory CSV.

use crate::driver::{RunConfig, RunResult};
use crate::error::Result;
use crate::matrix::{RealMatrix, Subset};
use crate::modes::ModeOutcome;
use crate::potential::PotentialConfig;
use crate::regularity::CheckMethod;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Bumped whenever the report layout changes incompatibly.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Config echo, with the derived density cutoff actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub epsilon: f64,
    pub min_classes: usize,
    pub max_iterations: Option<usize>,
    pub oracle_limit: usize,
    pub witness_budget: usize,
    pub shrink_retries: usize,
    pub master_seed: u64,
    pub dense_mode: bool,
    pub tolerance: f64,
    /// None means the quadratic potential without a cutoff.
    pub cutoff: Option<f64>,
}

/// Where one matrix came from and its shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub format: String,
    pub rows: usize,
    pub cols: usize,
}

/// One refinement step on one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Index of the matrix this record grades (0 outside multi runs).
    pub matrix: usize,
    pub phi_before: f64,
    pub phi_after: f64,
    pub row_classes: usize,
    pub col_classes: usize,
    pub row_exceptional: usize,
    pub col_exceptional: usize,
    pub witnessed_irregular: usize,
    pub splits_applied: usize,
    pub high_density_skipped: usize,
    pub unknown: usize,
    pub certified_regular: usize,
    pub shrink_failures: usize,
    pub budget_spent: usize,
}

/// Final census of one matrix under the final partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRecord {
    pub matrix: usize,
    pub blocks: usize,
    pub certified_regular: usize,
    pub witnessed_irregular: usize,
    pub high_density: usize,
    pub unknown: usize,
    pub budget_spent: usize,
}

/// Final partition membership, 1-based to match the file formats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub symmetric: bool,
    pub row_classes: Vec<Vec<usize>>,
    pub row_exceptional: Vec<usize>,
    pub col_classes: Vec<Vec<usize>>,
    pub col_exceptional: Vec<usize>,
    pub row_exceptional_fraction: f64,
    pub col_exceptional_fraction: f64,
}

/// Verdict on one class pair of a graph run. Class indices are 1-based,
/// like every index in serialized output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub status: String,
    pub deviation: Option<f64>,
    pub method: String,
}

/// Pair verdicts of a graph run at the full target epsilon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPairsRecord {
    pub epsilon: f64,
    pub regular: usize,
    pub irregular: usize,
    pub unknown: usize,
    /// Pairs not known regular stay within an epsilon fraction.
    pub within_bound: bool,
    pub pairs: Vec<PairRecord>,
}

/// Everything a run produced, serialized as stable JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub mode: String,
    pub status: String,
    pub stop_detail: String,
    pub config: ConfigRecord,
    pub inputs: Vec<InputRecord>,
    pub initial_classes: usize,
    pub iterations: Vec<IterationRecord>,
    pub final_phi: f64,
    pub final_census: Vec<CensusRecord>,
    pub partition: PartitionRecord,
    /// Block densities of the first matrix, normalized, under the final
    /// partition.
    pub block_densities: Vec<Vec<f64>>,
    pub graph_pairs: Option<GraphPairsRecord>,
}

fn one_based(indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|&i| i + 1).collect()
}

fn density_table(a: &RealMatrix, result: &RunResult) -> Result<Vec<Vec<f64>>> {
    let graded = if a.is_zero() { a.clone() } else { a.normalize()? };
    let rows = result.partition.rows();
    let cols = result.partition.cols();
    let col_sets: Vec<Subset> = cols
        .classes()
        .iter()
        .map(|c| Subset::new(c.clone()))
        .collect();
    let mut table = Vec::with_capacity(rows.class_count());
    for class in rows.classes() {
        let x = Subset::new(class.clone());
        let mut row = Vec::with_capacity(col_sets.len());
        for y in &col_sets {
            row.push(graded.block_density(&x, y)?);
        }
        table.push(row);
    }
    Ok(table)
}

/// Assembles the full report for a finished run.
pub fn build_report(
    mode: &str,
    cfg: &RunConfig,
    inputs: &[InputRecord],
    matrices: &[RealMatrix],
    outcome: &ModeOutcome,
) -> Result<RunReport> {
    let result = &outcome.result;
    let cutoff = PotentialConfig::for_driver(cfg.epsilon, cfg.dense_mode)?.cutoff_value();
    let config = ConfigRecord {
        epsilon: cfg.epsilon,
        min_classes: cfg.min_classes,
        max_iterations: cfg.max_iterations,
        oracle_limit: cfg.oracle_limit,
        witness_budget: cfg.witness_budget,
        shrink_retries: cfg.shrink_retries,
        master_seed: cfg.master_seed,
        dense_mode: cfg.dense_mode,
        tolerance: cfg.tolerance,
        cutoff,
    };

    let k = matrices.len();
    let iterations = result
        .iterations
        .iter()
        .enumerate()
        .map(|(idx, out)| {
            let bp = &out.partition;
            IterationRecord {
                iteration: idx / k,
                matrix: idx % k,
                phi_before: out.phi_before,
                phi_after: out.phi_after,
                row_classes: bp.rows().class_count(),
                col_classes: bp.cols().class_count(),
                row_exceptional: bp.rows().exceptional().len(),
                col_exceptional: bp.cols().exceptional().len(),
                witnessed_irregular: out.irregular_found,
                splits_applied: out.irregular_low_density_split,
                high_density_skipped: out.blocks_skipped_high_density,
                unknown: out.witnesses_unknown,
                certified_regular: out.certified_regular,
                shrink_failures: out.shrink_failures,
                budget_spent: out.budget_spent,
            }
        })
        .collect();

    let final_census = result
        .final_census
        .iter()
        .enumerate()
        .map(|(i, c)| CensusRecord {
            matrix: i,
            blocks: c.blocks,
            certified_regular: c.certified_regular,
            witnessed_irregular: c.witnessed_irregular,
            high_density: c.high_density,
            unknown: c.unknown,
            budget_spent: c.budget_spent,
        })
        .collect();

    let bp = &result.partition;
    let partition = PartitionRecord {
        symmetric: bp.is_symmetric(),
        row_classes: bp.rows().classes().iter().map(|c| one_based(c)).collect(),
        row_exceptional: one_based(bp.rows().exceptional()),
        col_classes: bp.cols().classes().iter().map(|c| one_based(c)).collect(),
        col_exceptional: one_based(bp.cols().exceptional()),
        row_exceptional_fraction: result.exceptional_fractions.0,
        col_exceptional_fraction: result.exceptional_fractions.1,
    };

    let graph_pairs = outcome.pairs.as_ref().map(|p| {
        let total = p.verdicts.len().max(1);
        let records = p
            .verdicts
            .iter()
            .map(|v| PairRecord {
                i: v.i + 1,
                j: v.j + 1,
                status: match v.regular {
                    Some(true) => "regular".into(),
                    Some(false) => "irregular".into(),
                    None => "unknown".into(),
                },
                deviation: v.deviation,
                method: match v.method {
                    CheckMethod::Exact => "exact".into(),
                    CheckMethod::Heuristic => "heuristic".into(),
                },
            })
            .collect();
        GraphPairsRecord {
            epsilon: cfg.epsilon,
            regular: p.regular,
            irregular: p.irregular,
            unknown: p.unknown,
            within_bound: (p.irregular + p.unknown) as f64 <= cfg.epsilon * total as f64,
            pairs: records,
        }
    });

    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: mode.to_string(),
        status: result.status.as_str().to_string(),
        stop_detail: result.stop_detail.clone(),
        config,
        inputs: inputs.to_vec(),
        initial_classes: result.initial_classes,
        iterations,
        final_phi: result.final_phi,
        final_census,
        partition,
        block_densities: density_table(&matrices[0], result)?,
        graph_pairs,
    })
}

/// Serializes a report as pretty JSON with a trailing newline.
pub fn to_json(report: &RunReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Parses a report back from JSON.
pub fn from_json(s: &str) -> Result<RunReport> {
    Ok(serde_json::from_str(s)?)
}

/// Writes the trajectory CSV: a header plus exactly one line per
/// refinement iteration.
pub fn write_trajectory<W: Write>(mut w: W, report: &RunReport) -> std::io::Result<()> {
    writeln!(
        w,
        "iteration,matrix,phi,row_classes,col_classes,row_exceptional,col_exceptional"
    )?;
    for it in &report.iterations {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            it.iteration,
            it.matrix,
            it.phi_after,
            it.row_classes,
            it.col_classes,
            it.row_exceptional,
            it.col_exceptional
        )?;
    }
    Ok(())
}
