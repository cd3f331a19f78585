//! Driver loop: normalize, start from a balanced partition, then alternate
//! block census and refinement until the partition is regular as far as
//! the checks can tell, progress stalls, or the iteration cap is hit.
//!
//! Stopping is census-based: the loop ends when the blocks not known to
//! be regular (witnessed, skipped for high density, or unknown) fit under
//! the epsilon fraction. A run is certified when even the unknowns fit;
//! otherwise the verdict leans on the incomplete heuristic and says so.

use crate::error::{Error, Result};
use crate::matrix::{RealMatrix, Subset};
use crate::partition::{BlockPartition, Partition};
use crate::potential::{phi_partition, PotentialConfig};
use crate::refine::{
    assemble_general, assemble_symmetric, chunk_size, classify_general, classify_symmetric,
    BlockCensus, PlannedSplit, RefineOutcome, StepParams,
};
use crate::regularity::{
    check_block, CheckMethod, RegularityParams, RegularityStatus, DEFAULT_ORACLE_LIMIT,
    DEFAULT_SHRINK_RETRIES, DEFAULT_WITNESS_BUDGET,
};
use crate::seeding::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Iteration tag for the standalone verification sweep, distinct from any
/// run iteration number.
const VERIFY_TAG: u64 = u64::MAX;
/// Iteration tag for graph pair verdicts.
const PAIR_TAG: u64 = u64::MAX - 1;

/// Knobs for a full run.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub epsilon: f64,
    /// Lower bound on the number of initial classes.
    pub min_classes: usize,
    /// Refinement outcomes allowed before giving up; None picks the
    /// per-mode default.
    pub max_iterations: Option<usize>,
    pub oracle_limit: usize,
    pub witness_budget: usize,
    pub shrink_retries: usize,
    pub master_seed: u64,
    /// Uses the plain quadratic potential, appropriate for inputs with
    /// entries of bounded size.
    pub dense_mode: bool,
    pub tolerance: f64,
}

impl RunConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        let cfg = RunConfig {
            epsilon,
            min_classes: 1,
            max_iterations: None,
            oracle_limit: DEFAULT_ORACLE_LIMIT,
            witness_budget: DEFAULT_WITNESS_BUDGET,
            shrink_retries: DEFAULT_SHRINK_RETRIES,
            master_seed: 0,
            dense_mode: false,
            tolerance: crate::potential::DEFAULT_TOLERANCE,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.5) {
            return Err(Error::Domain(format!(
                "epsilon must lie in (0, 1/2], got {}",
                self.epsilon
            )));
        }
        if self.min_classes == 0 {
            return Err(Error::Domain("min_classes must be at least 1".into()));
        }
        if self.oracle_limit == 0 {
            return Err(Error::Domain("oracle_limit must be at least 1".into()));
        }
        if self.witness_budget == 0 {
            return Err(Error::Domain("witness_budget must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Domain("tolerance must be finite and nonnegative".into()));
        }
        Ok(())
    }

    fn potential(&self) -> Result<PotentialConfig> {
        Ok(PotentialConfig::for_driver(self.epsilon, self.dense_mode)?
            .with_tolerance(self.tolerance))
    }

    fn step_params(&self, potential: PotentialConfig, iteration: u64) -> StepParams {
        StepParams {
            potential,
            oracle_limit: self.oracle_limit,
            witness_budget: self.witness_budget,
            shrink_retries: self.shrink_retries,
            master_seed: self.master_seed,
            iteration,
        }
    }

    fn regularity(&self, epsilon: f64) -> RegularityParams {
        RegularityParams {
            epsilon,
            tolerance: self.tolerance,
            oracle_limit: self.oracle_limit,
            witness_budget: self.witness_budget,
            shrink_retries: self.shrink_retries,
        }
    }
}

/// Default iteration cap: ceil(256 / epsilon^7), four times that for
/// symmetric runs (their per-step quota is smaller).
pub fn default_iteration_cap(epsilon: f64, symmetric: bool) -> usize {
    let base = if symmetric { 1024.0 } else { 256.0 };
    (base / epsilon.powi(7)).ceil() as usize
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Blocks not proven regular fit under the epsilon fraction.
    CertifiedRegular,
    /// Witnessed and skipped blocks fit, but some verdicts are unknown.
    HeuristicallyRegular,
    /// No splittable block remained (or none could be applied) while the
    /// census still failed the stopping rule.
    QuotaShortfall,
    IterationCap,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::CertifiedRegular => "certified-regular",
            RunStatus::HeuristicallyRegular => "heuristically-regular",
            RunStatus::QuotaShortfall => "quota-shortfall",
            RunStatus::IterationCap => "iteration-cap",
        }
    }
}

/// Final census counts for one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CensusSummary {
    pub blocks: usize,
    pub certified_regular: usize,
    pub witnessed_irregular: usize,
    pub high_density: usize,
    pub unknown: usize,
    pub budget_spent: usize,
}

impl CensusSummary {
    fn from_census(census: &BlockCensus, blocks: usize) -> Self {
        CensusSummary {
            blocks,
            certified_regular: census.certified_regular,
            witnessed_irregular: census.witnessed_irregular,
            high_density: census.high_density,
            unknown: census.unknown,
            budget_spent: census.budget_spent,
        }
    }

    fn all_regular(blocks: usize) -> Self {
        CensusSummary {
            blocks,
            certified_regular: blocks,
            witnessed_irregular: 0,
            high_density: 0,
            unknown: 0,
            budget_spent: 0,
        }
    }
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub partition: BlockPartition,
    pub status: RunStatus,
    /// One outcome per refinement step; for simultaneous runs, one per
    /// matrix per round in matrix order.
    pub iterations: Vec<RefineOutcome>,
    /// Potential of the first input under the final partition.
    pub final_phi: f64,
    /// Census of the final partition, one entry per input matrix.
    pub final_census: Vec<CensusSummary>,
    /// Exceptional fraction of the row and column partitions.
    pub exceptional_fractions: (f64, f64),
    pub initial_classes: usize,
    /// Human-readable note on why the run stopped.
    pub stop_detail: String,
}

fn initial_class_count(cfg: &RunConfig, symmetric: bool) -> usize {
    if symmetric {
        ((4.0 * cfg.min_classes as f64) / cfg.epsilon).ceil() as usize
    } else {
        let floor = (1.0 / cfg.epsilon).log2().ceil() as usize + 2;
        cfg.min_classes.max(floor)
    }
}

fn initial_partition(n: usize, classes: usize, epsilon: f64) -> Result<Partition> {
    let p = Partition::balanced(n, classes)?;
    // The leftover must leave room for exceptional growth during the run.
    if p.exceptional_fraction() >= epsilon / 2.0 {
        return Err(Error::TooSmall(format!(
            "axis of {n} splits into {classes} classes only with a leftover of {} \
             which already spends the exceptional budget for epsilon {epsilon}",
            p.exceptional().len()
        )));
    }
    Ok(p)
}

struct Census {
    per_matrix: Vec<Option<BlockCensus>>,
}

impl Census {
    fn summaries(&self, blocks: usize) -> Vec<CensusSummary> {
        self.per_matrix
            .iter()
            .map(|c| match c {
                Some(census) => CensusSummary::from_census(census, blocks),
                None => CensusSummary::all_regular(blocks),
            })
            .collect()
    }
}

fn run_core(inputs: &[RealMatrix], cfg: &RunConfig, symmetric: bool) -> Result<RunResult> {
    cfg.validate()?;
    let first = inputs
        .first()
        .ok_or_else(|| Error::Domain("no input matrices".into()))?;
    let (m, n) = (first.rows(), first.cols());
    if inputs.iter().any(|a| a.rows() != m || a.cols() != n) {
        return Err(Error::Dimension(
            "simultaneous runs require identically shaped matrices".into(),
        ));
    }
    if symmetric && m != n {
        return Err(Error::Dimension(
            "symmetric runs require a square matrix".into(),
        ));
    }

    // Zero matrices are regular under any partition and are skipped.
    let normalized: Vec<Option<RealMatrix>> = inputs
        .iter()
        .map(|a| {
            if a.is_zero() {
                Ok(None)
            } else {
                a.normalize().map(Some)
            }
        })
        .collect::<Result<_>>()?;

    let classes = initial_class_count(cfg, symmetric);
    let rows0 = initial_partition(m, classes, cfg.epsilon)?;
    let mut bp = if symmetric {
        BlockPartition::symmetric(rows0)
    } else {
        BlockPartition::new(rows0, initial_partition(n, classes, cfg.epsilon)?)
    };

    let potential = cfg.potential()?;
    let cap = cfg
        .max_iterations
        .unwrap_or_else(|| default_iteration_cap(cfg.epsilon, symmetric) * inputs.len());
    let eps = cfg.epsilon;

    let mut iterations: Vec<RefineOutcome> = Vec::new();
    let mut round: u64 = 0;
    let (status, census, detail) = loop {
        let sp = cfg.step_params(potential, round);
        let census = Census {
            per_matrix: normalized
                .iter()
                .map(|opt| {
                    opt.as_ref()
                        .map(|a| {
                            if symmetric {
                                classify_symmetric(a, &bp, &sp, true)
                            } else {
                                classify_general(a, &bp, &sp, true)
                            }
                        })
                        .transpose()
                })
                .collect::<Result<_>>()?,
        };

        let k = bp.rows().class_count();
        let l = bp.cols().class_count();
        let allowance = eps * (k * l) as f64 + 1e-9;
        let bad = |c: &Option<BlockCensus>| {
            c.as_ref()
                .map(|c| c.witnessed_irregular + c.high_density)
                .unwrap_or(0)
        };
        if census.per_matrix.iter().all(|c| bad(c) as f64 <= allowance) {
            let fr = bp.rows().exceptional_fraction();
            let fc = bp.cols().exceptional_fraction();
            if fr >= eps || fc >= eps {
                return Err(Error::InvariantViolation(format!(
                    "exceptional fractions {fr}/{fc} reached epsilon at the stopping point"
                )));
            }
            let certified = census
                .per_matrix
                .iter()
                .all(|c| c.as_ref().map(|c| c.not_known_regular()).unwrap_or(0) as f64 <= allowance);
            let status = if certified {
                RunStatus::CertifiedRegular
            } else {
                RunStatus::HeuristicallyRegular
            };
            let detail = format!(
                "stopped after {} refinement steps with {}x{} classes",
                iterations.len(),
                k,
                l
            );
            break (status, census, detail);
        }

        if iterations.len() >= cap {
            break (
                RunStatus::IterationCap,
                census,
                format!("iteration cap of {cap} reached"),
            );
        }

        let merged: Vec<PlannedSplit> = census
            .per_matrix
            .iter()
            .flatten()
            .flat_map(|c| c.splits.iter().cloned())
            .collect();
        if merged.is_empty() {
            break (
                RunStatus::QuotaShortfall,
                census,
                "no splittable irregular block remained".into(),
            );
        }
        let feasible = if symmetric {
            chunk_size(n, k, k) >= 1
        } else {
            chunk_size(m, k, l) >= 1 && chunk_size(n, l, k) >= 1
        };
        if !feasible {
            break (
                RunStatus::QuotaShortfall,
                census,
                format!("matrix too small to rebalance {k}x{l} classes any further"),
            );
        }

        let next = if symmetric {
            assemble_symmetric(&bp, &merged, n)?
        } else {
            assemble_general(&bp, &merged, m, n)?
        };

        for (opt, cen) in normalized.iter().zip(census.per_matrix.iter()) {
            let (Some(a), Some(cen)) = (opt, cen) else { continue };
            let (quota, floor) = if symmetric {
                (
                    eps * (k * k) as f64 / 8.0,
                    eps.powi(5) * (n * n) as f64 / 32.0,
                )
            } else {
                (
                    eps * (k * l) as f64 / 2.0,
                    eps.powi(5) * (m * n) as f64 / 8.0,
                )
            };
            iterations.push(crate::refine::checked_outcome(
                a, &bp, next.clone(), cen, &sp, quota, floor,
            )?);
        }
        bp = next;
        round += 1;
    };

    let final_phi = match &normalized[0] {
        Some(a) => phi_partition(a, &bp, &potential)?,
        None => 0.0,
    };
    let blocks = bp.rows().class_count() * bp.cols().class_count();
    let fractions = (
        bp.rows().exceptional_fraction(),
        bp.cols().exceptional_fraction(),
    );
    Ok(RunResult {
        final_census: census.summaries(blocks),
        partition: bp,
        status,
        iterations,
        final_phi,
        exceptional_fractions: fractions,
        initial_classes: classes,
        stop_detail: detail,
    })
}

/// Finds an epsilon-regular block partition of a matrix.
pub fn regular_partition(a: &RealMatrix, cfg: &RunConfig) -> Result<RunResult> {
    run_core(std::slice::from_ref(a), cfg, false)
}

/// Same partition on both axes of a square matrix; the matrix itself need
/// not be symmetric.
pub fn symmetric_regular_partition(a: &RealMatrix, cfg: &RunConfig) -> Result<RunResult> {
    run_core(std::slice::from_ref(a), cfg, true)
}

/// One partition that is simultaneously regular for every input matrix.
pub fn simultaneous_partition(inputs: &[RealMatrix], cfg: &RunConfig) -> Result<RunResult> {
    run_core(inputs, cfg, false)
}

/// Verdict on one unordered class pair of a graph partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PairVerdict {
    pub i: usize,
    pub j: usize,
    /// Some(true) proven regular, Some(false) witnessed irregular, None
    /// when the heuristic found nothing.
    pub regular: Option<bool>,
    pub deviation: Option<f64>,
    pub method: CheckMethod,
}

/// Result of a graph run: the symmetric partition plus per-pair verdicts
/// at the requested epsilon.
#[derive(Debug, Clone)]
pub struct GraphRunResult {
    pub run: RunResult,
    pub pairs: Vec<PairVerdict>,
    pub pairs_regular: usize,
    pub pairs_irregular: usize,
    pub pairs_unknown: usize,
}

/// Regular partition of an edge-weighted graph given by its symmetric
/// adjacency matrix with zero diagonal and nonnegative weights. Runs the
/// symmetric driver at epsilon/2, then grades every class pair at the
/// full epsilon.
pub fn graph_regular_partition(g: &RealMatrix, cfg: &RunConfig) -> Result<GraphRunResult> {
    cfg.validate()?;
    let n = g.rows();
    if g.cols() != n {
        return Err(Error::Dimension("graphs require a square matrix".into()));
    }
    for x in 0..n {
        if g.get(x, x) != 0.0 {
            return Err(Error::Domain(format!("self-loop at vertex {x}")));
        }
        for y in (x + 1)..n {
            if g.get(x, y) != g.get(y, x) {
                return Err(Error::Domain(format!(
                    "adjacency not symmetric at ({x}, {y})"
                )));
            }
            if g.get(x, y) < 0.0 {
                return Err(Error::Domain(format!(
                    "negative edge weight at ({x}, {y})"
                )));
            }
        }
    }

    let mut inner = *cfg;
    inner.epsilon = cfg.epsilon / 2.0;
    let run = run_core(std::slice::from_ref(g), &inner, true)?;

    let graded = if g.is_zero() { g.clone() } else { g.normalize()? };
    let params = cfg.regularity(cfg.epsilon);
    let classes = run.partition.rows().classes();
    let sets: Vec<Subset> = classes.iter().map(|c| Subset::new(c.clone())).collect();
    let mut pairs = Vec::new();
    let (mut reg, mut irr, mut unk) = (0usize, 0usize, 0usize);
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                cfg.master_seed,
                &[PAIR_TAG, i as u64, j as u64],
            ));
            let verdict = check_block(&graded, &sets[i], &sets[j], &params, &mut rng)?;
            let (regular, deviation) = match verdict.status {
                RegularityStatus::Regular => {
                    reg += 1;
                    (Some(true), None)
                }
                RegularityStatus::Irregular(w) => {
                    irr += 1;
                    (Some(false), Some(w.deviation))
                }
                RegularityStatus::Unknown => {
                    unk += 1;
                    (None, None)
                }
            };
            pairs.push(PairVerdict {
                i,
                j,
                regular,
                deviation,
                method: verdict.method,
            });
        }
    }
    Ok(GraphRunResult {
        run,
        pairs,
        pairs_regular: reg,
        pairs_irregular: irr,
        pairs_unknown: unk,
    })
}

/// Independent grading of a partition against a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub balanced: bool,
    pub row_exceptional_fraction: f64,
    pub col_exceptional_fraction: f64,
    /// Both exceptional fractions are below epsilon.
    pub exceptional_within_bound: bool,
    pub blocks: usize,
    pub certified_regular: usize,
    pub witnessed_irregular: usize,
    pub high_density: usize,
    pub unknown: usize,
    /// Witnessed plus skipped blocks fit under epsilon * blocks.
    pub irregular_fraction_ok: bool,
    /// No block verdict was left unknown, so the counts are exact.
    pub fully_certified: bool,
    /// Balanced, exceptional sets small, and irregular fraction in bounds.
    pub epsilon_regular: bool,
}

/// Grades a block partition: balance, exceptional fractions, and a census
/// of the normalized matrix at the configured epsilon.
pub fn verify_partition(
    a: &RealMatrix,
    bp: &BlockPartition,
    cfg: &RunConfig,
) -> Result<VerificationReport> {
    cfg.validate()?;
    bp.validate_cover(a)?;
    let graded = if a.is_zero() { a.clone() } else { a.normalize()? };
    let potential = cfg.potential()?;
    let sp = cfg.step_params(potential, VERIFY_TAG);
    let census = classify_general(&graded, bp, &sp, false)?;

    let k = bp.rows().class_count();
    let l = bp.cols().class_count();
    let blocks = k * l;
    let fr = bp.rows().exceptional_fraction();
    let fc = bp.cols().exceptional_fraction();
    let balanced = bp.is_balanced();
    let exceptional_within_bound = fr < cfg.epsilon && fc < cfg.epsilon;
    let irregular_fraction_ok = (census.witnessed_irregular + census.high_density) as f64
        <= cfg.epsilon * blocks as f64 + 1e-9;
    Ok(VerificationReport {
        balanced,
        row_exceptional_fraction: fr,
        col_exceptional_fraction: fc,
        exceptional_within_bound,
        blocks,
        certified_regular: census.certified_regular,
        witnessed_irregular: census.witnessed_irregular,
        high_density: census.high_density,
        unknown: census.unknown,
        irregular_fraction_ok,
        fully_certified: census.unknown == 0,
        epsilon_regular: balanced && exceptional_within_bound && irregular_fraction_ok,
    })
}
