//! One round of partition refinement: classify every block, split the
//! witnessed irregular ones, and rebalance.
//!
//! Blocks whose density exceeds epsilon times the cutoff are skipped; on a
//! mass-normalized matrix there can only be few of them. Every split
//! carries a guaranteed potential gain, the refined partition never loses
//! potential, and when enough blocks split the step gains a fixed fraction
//! of the maximum potential. All of these are asserted at runtime.
//!
//! Blocks are classified in parallel; results are collected in block
//! order and all randomness is derived per block, so the outcome does not
//! depend on thread scheduling.

use crate::error::{Error, Result};
use crate::matrix::{RealMatrix, Subset};
use crate::partition::{common_refinement, BlockPartition, Partition};
use crate::potential::{phi_partition, Cutoff, PotentialConfig};
use crate::regularity::{
    check_block, gain_split, shrink_witness, RegularityParams, RegularityStatus,
};
use crate::seeding::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Parameters for a refinement step.
#[derive(Debug, Clone, Copy)]
pub struct StepParams {
    pub potential: PotentialConfig,
    pub oracle_limit: usize,
    pub witness_budget: usize,
    pub shrink_retries: usize,
    pub master_seed: u64,
    /// Iteration number, folded into every per-block seed.
    pub iteration: u64,
}

impl StepParams {
    pub(crate) fn regularity(&self) -> RegularityParams {
        RegularityParams {
            epsilon: self.potential.epsilon,
            tolerance: self.potential.tolerance,
            oracle_limit: self.oracle_limit,
            witness_budget: self.witness_budget,
            shrink_retries: self.shrink_retries,
        }
    }

    fn block_rng(&self, i: usize, j: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(
            self.master_seed,
            &[self.iteration, i as u64, j as u64],
        ))
    }
}

/// What one refinement round did.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub partition: BlockPartition,
    pub phi_before: f64,
    pub phi_after: f64,
    /// Blocks with a verified irregularity witness.
    pub irregular_found: usize,
    /// Witnessed low-density blocks actually split this round.
    pub irregular_low_density_split: usize,
    pub blocks_skipped_high_density: usize,
    /// Blocks where the heuristic search exhausted its budget.
    pub witnesses_unknown: usize,
    /// Blocks the exact oracle or the search proved nothing against.
    pub certified_regular: usize,
    /// Witnessed blocks whose witness would not shrink into the split window.
    pub shrink_failures: usize,
    /// Total candidate subpairs examined across all blocks.
    pub budget_spent: usize,
}

/// A planned two-way split of a row class and a column class.
#[derive(Debug, Clone)]
pub(crate) struct PlannedSplit {
    pub row_class: usize,
    pub col_class: usize,
    pub row_split: (Subset, Subset),
    pub col_split: (Subset, Subset),
    pub gain: f64,
}

/// Tally of one classification sweep over all blocks.
#[derive(Debug, Clone, Default)]
pub(crate) struct BlockCensus {
    pub certified_regular: usize,
    pub witnessed_irregular: usize,
    pub high_density: usize,
    pub unknown: usize,
    pub shrink_failures: usize,
    pub budget_spent: usize,
    pub splits: Vec<PlannedSplit>,
}

impl BlockCensus {
    /// Blocks not known to be regular: witnessed plus skipped plus unknown.
    pub fn not_known_regular(&self) -> usize {
        self.witnessed_irregular + self.high_density + self.unknown
    }
}

enum BlockOutcome {
    Regular,
    HighDensity,
    Unknown,
    Witnessed(Option<PlannedSplit>),
}

struct BlockRecord {
    outcome: BlockOutcome,
    budget_spent: usize,
}

/// Per-class densities of all blocks, ignoring exceptional elements.
fn density_table(a: &RealMatrix, bp: &BlockPartition) -> Result<Vec<f64>> {
    let row_labels = bp.rows().labels(a.rows())?;
    let col_labels = bp.cols().labels(a.cols())?;
    let k = bp.rows().class_count();
    let l = bp.cols().class_count();
    let mut weight = vec![0.0f64; k * l];
    for (x, &slot) in row_labels.iter().enumerate() {
        let Some(ri) = slot else { continue };
        let base = ri as usize * l;
        let row = a.row(x);
        for (y, &v) in row.iter().enumerate() {
            if let Some(cj) = col_labels[y] {
                weight[base + cj as usize] += v;
            }
        }
    }
    let mut density = weight;
    for i in 0..k {
        let si = bp.rows().class(i).len() as f64;
        for j in 0..l {
            let sj = bp.cols().class(j).len() as f64;
            density[i * l + j] /= si * sj;
        }
    }
    Ok(density)
}

fn classify_one(
    a: &RealMatrix,
    x: &Subset,
    y: &Subset,
    density: f64,
    coords: (usize, usize),
    sp: &StepParams,
    plan_split: bool,
) -> Result<BlockRecord> {
    let eps = sp.potential.epsilon;
    if let Cutoff::Finite(d) = sp.potential.cutoff {
        if density.abs() > eps * d + sp.potential.tolerance {
            return Ok(BlockRecord {
                outcome: BlockOutcome::HighDensity,
                budget_spent: 0,
            });
        }
    }
    let params = sp.regularity();
    let mut rng = sp.block_rng(coords.0, coords.1);
    let verdict = check_block(a, x, y, &params, &mut rng)?;
    let outcome = match verdict.status {
        RegularityStatus::Regular => BlockOutcome::Regular,
        RegularityStatus::Unknown => BlockOutcome::Unknown,
        RegularityStatus::Irregular(w) => {
            if !plan_split {
                BlockOutcome::Witnessed(None)
            } else {
                match shrink_witness(a, x, y, &w, &params, &mut rng) {
                    Ok(sw) => {
                        let g = gain_split(a, x, y, &sw, &sp.potential)?;
                        BlockOutcome::Witnessed(Some(PlannedSplit {
                            row_class: coords.0,
                            col_class: coords.1,
                            row_split: g.row_split,
                            col_split: g.col_split,
                            gain: g.gain,
                        }))
                    }
                    Err(Error::ShrinkFailure(_)) => BlockOutcome::Witnessed(None),
                    Err(e) => return Err(e),
                }
            }
        }
    };
    Ok(BlockRecord {
        outcome,
        budget_spent: verdict.budget_spent,
    })
}

fn class_subsets(p: &Partition) -> Vec<Subset> {
    p.classes().iter().map(|c| Subset::new(c.clone())).collect()
}

/// Classifies every ordered block of a general (two-axis) partition.
pub(crate) fn classify_general(
    a: &RealMatrix,
    bp: &BlockPartition,
    sp: &StepParams,
    plan_splits: bool,
) -> Result<BlockCensus> {
    let row_sets = class_subsets(bp.rows());
    let col_sets = class_subsets(bp.cols());
    let l = col_sets.len();
    let density = density_table(a, bp)?;
    let coords: Vec<(usize, usize)> = (0..row_sets.len())
        .flat_map(|i| (0..l).map(move |j| (i, j)))
        .collect();
    let records: Vec<BlockRecord> = coords
        .par_iter()
        .map(|&(i, j)| {
            classify_one(
                a,
                &row_sets[i],
                &col_sets[j],
                density[i * l + j],
                (i, j),
                sp,
                plan_splits,
            )
        })
        .collect::<Result<_>>()?;

    let mut census = BlockCensus::default();
    for r in records {
        census.budget_spent += r.budget_spent;
        match r.outcome {
            BlockOutcome::Regular => census.certified_regular += 1,
            BlockOutcome::HighDensity => census.high_density += 1,
            BlockOutcome::Unknown => census.unknown += 1,
            BlockOutcome::Witnessed(split) => {
                census.witnessed_irregular += 1;
                match split {
                    Some(s) => census.splits.push(s),
                    None => {
                        if plan_splits {
                            census.shrink_failures += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(census)
}

/// Classifies every ordered block of a symmetric partition and plans one
/// split per witnessed off-diagonal pair. Diagonal blocks are counted but
/// never split. When both orientations of a pair are witnessed, the one
/// with lower class indices supplies the split; either way both sides of
/// the pair are cut by the same two subsets.
pub(crate) fn classify_symmetric(
    a: &RealMatrix,
    bp: &BlockPartition,
    sp: &StepParams,
    plan_splits: bool,
) -> Result<BlockCensus> {
    let sets = class_subsets(bp.rows());
    let k = sets.len();
    let density = density_table(a, bp)?;
    let coords: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    let records: Vec<BlockRecord> = coords
        .par_iter()
        .map(|&(i, j)| {
            // Splits are only planned off the diagonal.
            let plan = plan_splits && i != j;
            classify_one(a, &sets[i], &sets[j], density[i * k + j], (i, j), sp, plan)
        })
        .collect::<Result<_>>()?;

    let mut census = BlockCensus::default();
    let mut planned: Vec<Option<PlannedSplit>> = Vec::with_capacity(records.len());
    for r in records {
        census.budget_spent += r.budget_spent;
        match r.outcome {
            BlockOutcome::Regular => {
                census.certified_regular += 1;
                planned.push(None);
            }
            BlockOutcome::HighDensity => {
                census.high_density += 1;
                planned.push(None);
            }
            BlockOutcome::Unknown => {
                census.unknown += 1;
                planned.push(None);
            }
            BlockOutcome::Witnessed(split) => {
                census.witnessed_irregular += 1;
                if split.is_none() && plan_splits {
                    census.shrink_failures += 1;
                }
                planned.push(split);
            }
        }
    }
    if plan_splits {
        for i in 0..k {
            for j in (i + 1)..k {
                let forward = planned[i * k + j].take();
                let backward = planned[j * k + i].take();
                if let Some(s) = forward {
                    census.splits.push(s);
                } else if let Some(s) = backward {
                    // Swap roles so the split is expressed for (i, j).
                    census.splits.push(PlannedSplit {
                        row_class: i,
                        col_class: j,
                        row_split: s.col_split,
                        col_split: s.row_split,
                        gain: s.gain,
                    });
                }
            }
        }
    }
    Ok(census)
}

/// Chunk for rebalancing: floor(axis / (classes * 4^other)), zero when the
/// denominator exceeds the axis.
pub(crate) fn chunk_size(axis: usize, classes: usize, other: usize) -> usize {
    if other >= 64 {
        return 0;
    }
    let denom = (classes as u128).saturating_mul(4u128.pow(other as u32));
    ((axis as u128) / denom) as usize
}

fn refine_axis(
    p: &Partition,
    splits: impl Iterator<Item = (usize, (Subset, Subset))>,
    chunk: usize,
) -> Result<Partition> {
    let mut by_class: Vec<Vec<Partition>> = vec![Vec::new(); p.class_count()];
    for (class, (s1, s2)) in splits {
        by_class[class].push(Partition::new(
            vec![s1.iter().collect(), s2.iter().collect()],
            vec![],
        )?);
    }
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for (class, parts) in by_class.into_iter().enumerate() {
        if parts.is_empty() {
            cells.push(p.class(class).to_vec());
        } else {
            let refined = common_refinement(&parts)?;
            cells.extend(refined.classes().iter().cloned());
        }
    }
    let star = Partition::new(cells, p.exceptional().to_vec())?;
    star.rebalance(chunk)
}

/// Combines planned splits into the refined partition: common refinement
/// inside each class, then rebalance both axes.
pub(crate) fn assemble_general(
    bp: &BlockPartition,
    splits: &[PlannedSplit],
    m: usize,
    n: usize,
) -> Result<BlockPartition> {
    let k = bp.rows().class_count();
    let l = bp.cols().class_count();
    let chunk_r = chunk_size(m, k, l);
    let chunk_c = chunk_size(n, l, k);
    if chunk_r == 0 || chunk_c == 0 {
        return Err(Error::StepRefused(format!(
            "rebalance chunks degenerate for {k}x{l} classes on a {m}x{n} matrix"
        )));
    }
    let rows = refine_axis(
        bp.rows(),
        splits.iter().map(|s| (s.row_class, s.row_split.clone())),
        chunk_r,
    )?;
    let cols = refine_axis(
        bp.cols(),
        splits.iter().map(|s| (s.col_class, s.col_split.clone())),
        chunk_c,
    )?;
    Ok(BlockPartition::new(rows, cols))
}

/// Symmetric assembly: each class collects the cuts from every pair it
/// appears in, and the same refined partition is used on both axes.
pub(crate) fn assemble_symmetric(
    bp: &BlockPartition,
    splits: &[PlannedSplit],
    n: usize,
) -> Result<BlockPartition> {
    let k = bp.rows().class_count();
    let chunk = chunk_size(n, k, k);
    if chunk == 0 {
        return Err(Error::StepRefused(format!(
            "rebalance chunk degenerate for {k} classes on an {n}x{n} matrix"
        )));
    }
    let all = splits.iter().flat_map(|s| {
        [
            (s.row_class, s.row_split.clone()),
            (s.col_class, s.col_split.clone()),
        ]
    });
    let rows = refine_axis(bp.rows(), all, chunk)?;
    Ok(BlockPartition::symmetric(rows))
}

fn validate_step_pre(
    a: &RealMatrix,
    bp: &BlockPartition,
    symmetric: bool,
) -> Result<()> {
    if symmetric {
        if a.rows() != a.cols() {
            return Err(Error::StepRefused(
                "symmetric step requires a square matrix".into(),
            ));
        }
        if !bp.is_symmetric() {
            return Err(Error::StepRefused(
                "symmetric step requires a symmetric block partition".into(),
            ));
        }
    }
    bp.validate_cover(a)?;
    if !bp.is_balanced() {
        return Err(Error::StepRefused("partition is not balanced".into()));
    }
    if bp.rows().exceptional_fraction() >= 0.5 || bp.cols().exceptional_fraction() >= 0.5 {
        return Err(Error::StepRefused(
            "exceptional set holds at least half the indices".into(),
        ));
    }
    Ok(())
}

/// Runs the post-step checks and packages the outcome.
pub(crate) fn checked_outcome(
    a: &RealMatrix,
    before: &BlockPartition,
    after: BlockPartition,
    census: &BlockCensus,
    sp: &StepParams,
    quota: f64,
    gain_floor: f64,
) -> Result<RefineOutcome> {
    let phi_before = phi_partition(a, before, &sp.potential)?;
    let phi_after = phi_partition(a, &after, &sp.potential)?;
    let tau = sp.potential.tolerance;
    let eps = sp.potential.epsilon;

    let fp = 1e-12 * (phi_before.abs() + phi_after.abs());
    if phi_after < phi_before - tau - fp {
        return Err(Error::InvariantViolation(format!(
            "potential decreased across a refinement step: {phi_before} -> {phi_after}"
        )));
    }

    let k = before.rows().class_count();
    let l = before.cols().class_count();
    let cap_rows = (k as u128).saturating_mul(4u128.saturating_pow(l.min(63) as u32 + 1));
    let cap_cols = (l as u128).saturating_mul(4u128.saturating_pow(k.min(63) as u32 + 1));
    if (after.rows().class_count() as u128) > cap_rows
        || (after.cols().class_count() as u128) > cap_cols
    {
        return Err(Error::InvariantViolation(format!(
            "class count grew past its bound: {}x{} from {k}x{l}",
            after.rows().class_count(),
            after.cols().class_count()
        )));
    }

    let grow_rows =
        after.rows().exceptional().len() as f64 - before.rows().exceptional().len() as f64;
    let grow_cols =
        after.cols().exceptional().len() as f64 - before.cols().exceptional().len() as f64;
    if grow_rows > a.rows() as f64 / 2f64.powi(l.min(1023) as i32) + tau
        || grow_cols > a.cols() as f64 / 2f64.powi(k.min(1023) as i32) + tau
    {
        return Err(Error::InvariantViolation(
            "exceptional set grew past its bound".into(),
        ));
    }

    let splits = census.splits.len();
    if splits > 0 && splits as f64 + 1e-12 >= quota {
        let floor = gain_floor * (1.0 - 2.0 * tau / eps) - tau - fp;
        if phi_after - phi_before < floor {
            return Err(Error::InvariantViolation(format!(
                "full-quota step gained {} which is below the floor {gain_floor}",
                phi_after - phi_before
            )));
        }
    }

    if let Cutoff::Finite(d) = sp.potential.cutoff {
        // Each skipped block carries weight above eps * D times its area,
        // and all that weight must fit inside the total mass.
        let area = (before.rows().class(0).len() * before.cols().class(0).len()) as f64;
        let implied = census.high_density as f64 * eps * d * area;
        if implied > a.total_mass() * (1.0 + 1e-9) + tau {
            return Err(Error::InvariantViolation(format!(
                "{} high-density blocks is more than the total mass allows",
                census.high_density
            )));
        }
    }

    Ok(RefineOutcome {
        partition: after,
        phi_before,
        phi_after,
        irregular_found: census.witnessed_irregular,
        irregular_low_density_split: splits,
        blocks_skipped_high_density: census.high_density,
        witnesses_unknown: census.unknown,
        certified_regular: census.certified_regular,
        shrink_failures: census.shrink_failures,
        budget_spent: census.budget_spent,
    })
}

/// One refinement round on a general matrix. Refuses (rather than
/// degrading) when the partition is unbalanced, the exceptional sets are
/// too large, or the rebalance chunk would be zero. With no splittable
/// block found, the outcome reports the input partition unchanged.
pub fn refinement_step(
    a: &RealMatrix,
    bp: &BlockPartition,
    sp: &StepParams,
) -> Result<RefineOutcome> {
    validate_step_pre(a, bp, false)?;
    let k = bp.rows().class_count();
    let l = bp.cols().class_count();
    if chunk_size(a.rows(), k, l) == 0 || chunk_size(a.cols(), l, k) == 0 {
        return Err(Error::StepRefused(format!(
            "matrix {}x{} too small to rebalance {k}x{l} classes",
            a.rows(),
            a.cols()
        )));
    }
    let census = classify_general(a, bp, sp, true)?;
    let after = if census.splits.is_empty() {
        bp.clone()
    } else {
        assemble_general(bp, &census.splits, a.rows(), a.cols())?
    };
    let eps = sp.potential.epsilon;
    let quota = eps * (k * l) as f64 / 2.0;
    let floor = eps.powi(5) * (a.rows() * a.cols()) as f64 / 8.0;
    checked_outcome(a, bp, after, &census, sp, quota, floor)
}

/// One refinement round preserving symmetry: both axes carry the same
/// partition before and after. Diagonal blocks are never split; a
/// witnessed pair is cut the same way on both sides.
pub fn symmetric_refinement_step(
    a: &RealMatrix,
    bp: &BlockPartition,
    sp: &StepParams,
) -> Result<RefineOutcome> {
    validate_step_pre(a, bp, true)?;
    let k = bp.rows().class_count();
    if chunk_size(a.rows(), k, k) == 0 {
        return Err(Error::StepRefused(format!(
            "matrix {}x{} too small to rebalance {k} classes",
            a.rows(),
            a.rows()
        )));
    }
    let census = classify_symmetric(a, bp, sp, true)?;
    let after = if census.splits.is_empty() {
        bp.clone()
    } else {
        assemble_symmetric(bp, &census.splits, a.rows())?
    };
    let eps = sp.potential.epsilon;
    let quota = eps * (k * k) as f64 / 8.0;
    let floor = eps.powi(5) * (a.rows() * a.rows()) as f64 / 32.0;
    checked_outcome(a, bp, after, &census, sp, quota, floor)
}
