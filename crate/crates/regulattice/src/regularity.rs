//! Regularity checks on blocks: exact decision for small blocks, heuristic
//! witness search for large ones, witness shrinking, and the guaranteed
//! potential gain from splitting along a witness.
//!
//! A block (X, Y) is epsilon-regular when every subpair (X', Y') with
//! |X'| >= epsilon|X| and |Y'| >= epsilon|Y| has density within epsilon of
//! the block density. A witness is a subpair violating that, and it is
//! always re-verifiable directly from matrix entries.
//!
//! The heuristic search is sound but incomplete: it returns a verified
//! witness or Unknown, never an unverified claim of regularity.

use crate::error::{Error, Result};
use crate::matrix::{RealMatrix, Subset};
use crate::potential::{phi_block, Cutoff, PotentialConfig, DEFAULT_TOLERANCE};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Tuning knobs for the regularity checks.
#[derive(Debug, Clone, Copy)]
pub struct RegularityParams {
    pub epsilon: f64,
    /// Absolute tolerance on density comparisons.
    pub tolerance: f64,
    /// Exhaustive checking is used when both block sides are at most this.
    pub oracle_limit: usize,
    /// Random candidate pairs tried by the heuristic search.
    pub witness_budget: usize,
    /// Random attempts before the greedy fallback when shrinking.
    pub shrink_retries: usize,
}

pub const DEFAULT_ORACLE_LIMIT: usize = 16;
pub const DEFAULT_WITNESS_BUDGET: usize = 64;
pub const DEFAULT_SHRINK_RETRIES: usize = 64;

impl RegularityParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 0.5) {
            return Err(Error::Domain(format!(
                "epsilon must lie in (0, 1/2], got {epsilon}"
            )));
        }
        Ok(RegularityParams {
            epsilon,
            tolerance: DEFAULT_TOLERANCE,
            oracle_limit: DEFAULT_ORACLE_LIMIT,
            witness_budget: DEFAULT_WITNESS_BUDGET,
            shrink_retries: DEFAULT_SHRINK_RETRIES,
        })
    }
}

/// Subpair of a block whose density deviates from the block density.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub rows: Subset,
    pub cols: Subset,
    pub deviation: f64,
}

/// Outcome of a regularity check.
#[derive(Debug, Clone, PartialEq)]
pub enum RegularityStatus {
    /// Every qualifying subpair is within epsilon (exact checks only).
    Regular,
    Irregular(Witness),
    /// Budget exhausted without finding a witness.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMethod {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityVerdict {
    pub status: RegularityStatus,
    pub method: CheckMethod,
    /// Candidate subpairs examined.
    pub budget_spent: usize,
}

/// Smallest qualifying subset size: ceil(epsilon * n), at least 1. A hair
/// of slack keeps float noise from bumping exact products past an integer.
pub fn qualifying_size(epsilon: f64, n: usize) -> usize {
    let t = epsilon * n as f64;
    ((t - 1e-9).ceil() as usize).max(1)
}

fn deviation_of(
    a: &RealMatrix,
    sub_rows: &Subset,
    sub_cols: &Subset,
    base_density: f64,
) -> Result<f64> {
    Ok((a.block_density(sub_rows, sub_cols)? - base_density).abs())
}

/// Exhaustive regularity decision for blocks with both sides at most
/// `oracle_limit`. Returns Regular when every qualifying subpair deviates
/// by at most epsilon + tolerance, otherwise a maximum-deviation witness.
///
/// For each row subset (walked in Gray-code order, maintaining column
/// sums), the extremal column subsets of each size are prefixes and
/// suffixes of the columns sorted by their sums, so all column subsets are
/// covered without enumerating them.
pub fn exact_check(
    a: &RealMatrix,
    x: &Subset,
    y: &Subset,
    params: &RegularityParams,
) -> Result<RegularityVerdict> {
    let rx = x.len();
    let ry = y.len();
    if rx == 0 || ry == 0 {
        return Err(Error::EmptyBlock("regularity check on empty block".into()));
    }
    // Mask enumeration caps one side at 30 bits regardless of the limit.
    let limit = params.oracle_limit.min(30);
    if rx > limit || ry > limit {
        return Err(Error::OracleRefused {
            rows: rx,
            cols: ry,
            limit,
        });
    }

    let xi: Vec<usize> = x.iter().collect();
    let yi: Vec<usize> = y.iter().collect();
    let block: Vec<Vec<f64>> = xi
        .iter()
        .map(|&r| yi.iter().map(|&c| a.get(r, c)).collect())
        .collect();
    let d0 = a.block_density(x, y)?;
    let min_rows = qualifying_size(params.epsilon, rx);
    let min_cols = qualifying_size(params.epsilon, ry);

    let mut colsum = vec![0.0f64; ry];
    let mut examined = 0usize;
    let mut best_dev = -1.0f64;
    let mut best_mask = 0u32;
    let mut best_cols: Vec<usize> = Vec::new();
    let mut order: Vec<usize> = (0..ry).collect();

    let mut prev_gray = 0u32;
    for g in 1u32..(1u32 << rx) {
        let gray = g ^ (g >> 1);
        let flip = (gray ^ prev_gray).trailing_zeros() as usize;
        if gray & (1 << flip) != 0 {
            for (j, s) in colsum.iter_mut().enumerate() {
                *s += block[flip][j];
            }
        } else {
            for (j, s) in colsum.iter_mut().enumerate() {
                *s -= block[flip][j];
            }
        }
        prev_gray = gray;

        let nrows = gray.count_ones() as usize;
        if nrows < min_rows {
            continue;
        }
        order.sort_by(|&i, &j| colsum[i].partial_cmp(&colsum[j]).unwrap().then(i.cmp(&j)));

        // Ascending prefixes give the lowest-density column sets of each
        // size, descending suffixes the highest.
        let mut low = 0.0;
        let mut high = 0.0;
        for s in 1..=ry {
            low += colsum[order[s - 1]];
            high += colsum[order[ry - s]];
            if s < min_cols {
                continue;
            }
            let denom = (nrows * s) as f64;
            for (sum, take_low) in [(low, true), (high, false)] {
                examined += 1;
                let dev = (sum / denom - d0).abs();
                if dev > best_dev {
                    best_dev = dev;
                    best_mask = gray;
                    best_cols = if take_low {
                        order[..s].to_vec()
                    } else {
                        order[ry - s..].to_vec()
                    };
                }
            }
        }
    }

    if best_dev <= params.epsilon + params.tolerance {
        return Ok(RegularityVerdict {
            status: RegularityStatus::Regular,
            method: CheckMethod::Exact,
            budget_spent: examined,
        });
    }

    let rows = Subset::new(
        (0..rx)
            .filter(|i| best_mask & (1 << i) != 0)
            .map(|i| xi[i])
            .collect(),
    );
    let cols = Subset::new(best_cols.iter().map(|&j| yi[j]).collect());
    // Recompute from raw entries so the witness certifies itself.
    let deviation = deviation_of(a, &rows, &cols, d0)?;
    Ok(RegularityVerdict {
        status: RegularityStatus::Irregular(Witness {
            rows,
            cols,
            deviation,
        }),
        method: CheckMethod::Exact,
        budget_spent: examined,
    })
}

/// Randomized witness search for blocks too large for the exact check.
///
/// Degree-based candidates come first: rows and columns whose averages sit
/// more than epsilon/2 from the block density, in all four cross
/// combinations with each other and with the full sides. Then random
/// qualifying subpairs up to the budget. Every returned witness has its
/// deviation computed directly from the entries.
pub fn heuristic_witness_search(
    a: &RealMatrix,
    x: &Subset,
    y: &Subset,
    params: &RegularityParams,
    rng: &mut ChaCha8Rng,
) -> Result<RegularityVerdict> {
    if params.witness_budget == 0 {
        return Err(Error::Domain("witness budget must be positive".into()));
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyBlock("witness search on empty block".into()));
    }
    let d0 = a.block_density(x, y)?;
    let eps = params.epsilon;
    let threshold = eps + params.tolerance;
    let min_x = qualifying_size(eps, x.len());
    let min_y = qualifying_size(eps, y.len());

    let xi: Vec<usize> = x.iter().collect();
    let yi: Vec<usize> = y.iter().collect();
    let ylen = yi.len() as f64;
    let xlen = xi.len() as f64;

    let mut hi_rows = Vec::new();
    let mut lo_rows = Vec::new();
    for &r in &xi {
        let avg: f64 = yi.iter().map(|&c| a.get(r, c)).sum::<f64>() / ylen;
        if avg > d0 + eps / 2.0 {
            hi_rows.push(r);
        } else if avg < d0 - eps / 2.0 {
            lo_rows.push(r);
        }
    }
    let mut hi_cols = Vec::new();
    let mut lo_cols = Vec::new();
    for &c in &yi {
        let avg: f64 = xi.iter().map(|&r| a.get(r, c)).sum::<f64>() / xlen;
        if avg > d0 + eps / 2.0 {
            hi_cols.push(c);
        } else if avg < d0 - eps / 2.0 {
            lo_cols.push(c);
        }
    }

    let hi_rows = Subset::new(hi_rows);
    let lo_rows = Subset::new(lo_rows);
    let hi_cols = Subset::new(hi_cols);
    let lo_cols = Subset::new(lo_cols);
    let candidates: [(&Subset, &Subset); 8] = [
        (&hi_rows, y),
        (&lo_rows, y),
        (x, &hi_cols),
        (x, &lo_cols),
        (&hi_rows, &hi_cols),
        (&hi_rows, &lo_cols),
        (&lo_rows, &hi_cols),
        (&lo_rows, &lo_cols),
    ];

    let mut examined = 0usize;
    for (cr, cc) in candidates {
        if cr.len() < min_x || cc.len() < min_y {
            continue;
        }
        examined += 1;
        let dev = deviation_of(a, cr, cc, d0)?;
        if dev > threshold {
            return Ok(RegularityVerdict {
                status: RegularityStatus::Irregular(Witness {
                    rows: cr.clone(),
                    cols: cc.clone(),
                    deviation: dev,
                }),
                method: CheckMethod::Heuristic,
                budget_spent: examined,
            });
        }
    }

    let hi_x = (x.len() / 2).max(min_x);
    let hi_y = (y.len() / 2).max(min_y);
    for _ in 0..params.witness_budget {
        let sx = rng.gen_range(min_x..=hi_x);
        let sy = rng.gen_range(min_y..=hi_y);
        let rows = Subset::new(
            rand::seq::index::sample(rng, xi.len(), sx)
                .iter()
                .map(|i| xi[i])
                .collect(),
        );
        let cols = Subset::new(
            rand::seq::index::sample(rng, yi.len(), sy)
                .iter()
                .map(|j| yi[j])
                .collect(),
        );
        examined += 1;
        let dev = deviation_of(a, &rows, &cols, d0)?;
        if dev > threshold {
            return Ok(RegularityVerdict {
                status: RegularityStatus::Irregular(Witness {
                    rows,
                    cols,
                    deviation: dev,
                }),
                method: CheckMethod::Heuristic,
                budget_spent: examined,
            });
        }
    }

    Ok(RegularityVerdict {
        status: RegularityStatus::Unknown,
        method: CheckMethod::Heuristic,
        budget_spent: examined,
    })
}

/// Exact check when both sides fit under the oracle limit, heuristic
/// search otherwise.
pub fn check_block(
    a: &RealMatrix,
    x: &Subset,
    y: &Subset,
    params: &RegularityParams,
    rng: &mut ChaCha8Rng,
) -> Result<RegularityVerdict> {
    let limit = params.oracle_limit.min(30);
    if x.len() <= limit && y.len() <= limit {
        exact_check(a, x, y, params)
    } else {
        heuristic_witness_search(a, x, y, params, rng)
    }
}

fn contained(sub: &Subset, host: &Subset) -> bool {
    sub.iter().all(|v| host.contains(v))
}

/// Size window a witness side must land in before splitting: at least the
/// qualifying size, at most half the block (so both split halves stay
/// usable), and it must leave the complement nonempty.
fn shrink_window(epsilon: f64, n: usize) -> Result<(usize, usize)> {
    let lo = qualifying_size(epsilon, n);
    let hi = (n / 2).max(lo);
    if lo > n.saturating_sub(1) {
        return Err(Error::ShrinkFailure(format!(
            "block side of {n} cannot be split at the qualifying size {lo}"
        )));
    }
    Ok((lo, hi.min(n - 1)))
}

/// One axis of a witness during shrinking: its members, each member's
/// weight summed across the other (fixed) axis, the total of those
/// weights, and the other axis's length.
struct ShrinkAxis<'a> {
    members: &'a [usize],
    cross_sum: &'a [f64],
    total_weight: f64,
    other_len: usize,
}

fn shrink_side(
    axis: &ShrinkAxis<'_>,
    target: usize,
    d0: f64,
    min_dev: f64,
    retries: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<usize>> {
    // Random attempts at the target size first.
    for _ in 0..retries {
        let pick = rand::seq::index::sample(rng, axis.members.len(), target);
        let weight: f64 = pick.iter().map(|i| axis.cross_sum[i]).sum();
        let dev = (weight / (target * axis.other_len) as f64 - d0).abs();
        if dev >= min_dev {
            let mut out: Vec<usize> = pick.iter().map(|i| axis.members[i]).collect();
            out.sort_unstable();
            return Some(out);
        }
    }
    // Greedy fallback: drop one element at a time, keeping the deviation
    // of the remainder as large as possible.
    let mut alive: Vec<usize> = (0..axis.members.len()).collect();
    let mut weight = axis.total_weight;
    while alive.len() > target {
        let len_after = ((alive.len() - 1) * axis.other_len) as f64;
        let mut best = 0usize;
        let mut best_dev = -1.0;
        for (pos, &i) in alive.iter().enumerate() {
            let dev = ((weight - axis.cross_sum[i]) / len_after - d0).abs();
            if dev > best_dev {
                best_dev = dev;
                best = pos;
            }
        }
        weight -= axis.cross_sum[alive[best]];
        alive.remove(best);
    }
    let dev = (weight / ((alive.len() * axis.other_len) as f64) - d0).abs();
    if dev >= min_dev {
        let mut out: Vec<usize> = alive.iter().map(|&i| axis.members[i]).collect();
        out.sort_unstable();
        Some(out)
    } else {
        None
    }
}

/// Shrinks a witness until both sides fit the split window, preserving a
/// deviation of at least epsilon (minus tolerance). Rows shrink first,
/// then columns against the shrunk rows.
pub fn shrink_witness(
    a: &RealMatrix,
    x: &Subset,
    y: &Subset,
    witness: &Witness,
    params: &RegularityParams,
    rng: &mut ChaCha8Rng,
) -> Result<Witness> {
    if !contained(&witness.rows, x) || !contained(&witness.cols, y) {
        return Err(Error::Domain("witness does not lie inside the block".into()));
    }
    let d0 = a.block_density(x, y)?;
    let min_dev = params.epsilon - params.tolerance;
    let dev0 = deviation_of(a, &witness.rows, &witness.cols, d0)?;
    if dev0 < min_dev {
        return Err(Error::Domain(format!(
            "witness deviation {dev0} is below epsilon {}",
            params.epsilon
        )));
    }
    let (rlo, rhi) = shrink_window(params.epsilon, x.len())?;
    let (clo, chi) = shrink_window(params.epsilon, y.len())?;
    if witness.rows.len() < rlo || witness.cols.len() < clo {
        return Err(Error::Domain(
            "witness side smaller than the qualifying size".into(),
        ));
    }

    let mut rows: Vec<usize> = witness.rows.iter().collect();
    if rows.len() > rhi {
        let cols_now: Vec<usize> = witness.cols.iter().collect();
        let cross: Vec<f64> = rows
            .iter()
            .map(|&r| cols_now.iter().map(|&c| a.get(r, c)).sum())
            .collect();
        let axis = ShrinkAxis {
            members: &rows,
            cross_sum: &cross,
            total_weight: cross.iter().sum(),
            other_len: cols_now.len(),
        };
        rows = shrink_side(&axis, rhi, d0, min_dev, params.shrink_retries, rng).ok_or_else(|| {
            Error::ShrinkFailure("no row subset of target size keeps the deviation".into())
        })?;
    }

    let mut cols: Vec<usize> = witness.cols.iter().collect();
    if cols.len() > chi {
        let cross: Vec<f64> = cols
            .iter()
            .map(|&c| rows.iter().map(|&r| a.get(r, c)).sum())
            .collect();
        let axis = ShrinkAxis {
            members: &cols,
            cross_sum: &cross,
            total_weight: cross.iter().sum(),
            other_len: rows.len(),
        };
        cols = shrink_side(&axis, chi, d0, min_dev, params.shrink_retries, rng).ok_or_else(|| {
            Error::ShrinkFailure("no column subset of target size keeps the deviation".into())
        })?;
    }

    let rows = Subset::new(rows);
    let cols = Subset::new(cols);
    let deviation = deviation_of(a, &rows, &cols, d0)?;
    Ok(Witness {
        rows,
        cols,
        deviation,
    })
}

/// Two-way split of each block side along a witness.
#[derive(Debug, Clone)]
pub struct GainSplit {
    /// Witness rows, then the remaining rows.
    pub row_split: (Subset, Subset),
    /// Witness columns, then the remaining columns.
    pub col_split: (Subset, Subset),
    pub phi_before: f64,
    pub phi_after: f64,
    pub gain: f64,
}

fn complement(host: &Subset, sub: &Subset) -> Subset {
    Subset::new(host.iter().filter(|&v| !sub.contains(v)).collect())
}

/// Splits the block into the four cells induced by a shrunk witness and
/// computes the potential gain. With a finite cutoff the block density
/// must not exceed epsilon * cutoff; under that hypothesis the gain is
/// guaranteed to be at least epsilon^4 |X||Y|, and this is asserted.
pub fn gain_split(
    a: &RealMatrix,
    x: &Subset,
    y: &Subset,
    witness: &Witness,
    cfg: &PotentialConfig,
) -> Result<GainSplit> {
    let eps = cfg.epsilon;
    let tau = cfg.tolerance;
    if !contained(&witness.rows, x) || !contained(&witness.cols, y) {
        return Err(Error::Domain("witness does not lie inside the block".into()));
    }
    let (rlo, rhi) = shrink_window(eps, x.len())?;
    let (clo, chi) = shrink_window(eps, y.len())?;
    let (wr, wc) = (witness.rows.len(), witness.cols.len());
    if wr < rlo || wr > rhi || wc < clo || wc > chi {
        return Err(Error::Domain(format!(
            "witness sides {wr}x{wc} outside the split windows [{rlo},{rhi}]x[{clo},{chi}]"
        )));
    }
    let d0 = a.block_density(x, y)?;
    if let Cutoff::Finite(d) = cfg.cutoff {
        if d0.abs() > eps * d + tau {
            return Err(Error::Domain(format!(
                "block density {d0} exceeds epsilon * cutoff {}",
                eps * d
            )));
        }
    }
    let dev = deviation_of(a, &witness.rows, &witness.cols, d0)?;
    if dev < eps - tau {
        return Err(Error::Domain(format!(
            "witness deviation {dev} is below epsilon {eps}"
        )));
    }

    let x1 = witness.rows.clone();
    let x2 = complement(x, &x1);
    let y1 = witness.cols.clone();
    let y2 = complement(y, &y1);

    let phi_before = phi_block(a, x, y, cfg)?;
    let mut phi_after = 0.0;
    for xs in [&x1, &x2] {
        for ys in [&y1, &y2] {
            if !xs.is_empty() && !ys.is_empty() {
                phi_after += phi_block(a, xs, ys, cfg)?;
            }
        }
    }
    let gain = phi_after - phi_before;

    let area = (x.len() * y.len()) as f64;
    let floor = eps.powi(4) * area;
    // Slack: the witness deviation may sit tau below epsilon, and the two
    // potentials carry rounding of their own.
    let slack = tau * (1.0 + 2.0 * eps.powi(3) * area)
        + 1e-12 * (phi_before.abs() + phi_after.abs());
    if gain < floor - slack {
        return Err(Error::InvariantViolation(format!(
            "split gain {gain} fell below the guaranteed floor {floor} \
             (deviation {dev}, density {d0}, block {}x{})",
            x.len(),
            y.len()
        )));
    }

    Ok(GainSplit {
        row_split: (x1, x2),
        col_split: (y1, y2),
        phi_before,
        phi_after,
        gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn params(eps: f64) -> RegularityParams {
        RegularityParams::new(eps).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Brute force over all qualifying subpairs; independent of the
    /// Gray-code path used by exact_check.
    fn brute_force_max_deviation(a: &RealMatrix, x: &Subset, y: &Subset, eps: f64) -> f64 {
        let xi: Vec<usize> = x.iter().collect();
        let yi: Vec<usize> = y.iter().collect();
        let d0 = a.block_density(x, y).unwrap();
        let min_x = qualifying_size(eps, xi.len());
        let min_y = qualifying_size(eps, yi.len());
        let mut best = 0.0f64;
        for rm in 1u32..(1 << xi.len()) {
            if (rm.count_ones() as usize) < min_x {
                continue;
            }
            for cm in 1u32..(1 << yi.len()) {
                if (cm.count_ones() as usize) < min_y {
                    continue;
                }
                let rows: Vec<usize> = (0..xi.len()).filter(|i| rm & (1 << i) != 0).map(|i| xi[i]).collect();
                let cols: Vec<usize> = (0..yi.len()).filter(|j| cm & (1 << j) != 0).map(|j| yi[j]).collect();
                let d = a
                    .block_density(&Subset::new(rows), &Subset::new(cols))
                    .unwrap();
                best = best.max((d - d0).abs());
            }
        }
        best
    }

    #[test]
    fn qualifying_size_values() {
        assert_eq!(qualifying_size(0.5, 16), 8);
        assert_eq!(qualifying_size(0.3, 10), 3);
        assert_eq!(qualifying_size(0.25, 4), 1);
        assert_eq!(qualifying_size(0.3, 1), 1);
        assert_eq!(qualifying_size(0.1, 10), 1);
        assert_eq!(qualifying_size(0.15, 20), 3);
        assert_eq!(qualifying_size(0.4, 10), 4);
    }

    #[test]
    fn exact_constant_block_is_regular() {
        let a = RealMatrix::from_fn(6, 6, |_, _| 0.3).unwrap();
        let v = exact_check(&a, &Subset::full(6), &Subset::full(6), &params(0.25)).unwrap();
        assert_eq!(v.status, RegularityStatus::Regular);
        assert_eq!(v.method, CheckMethod::Exact);
        assert!(v.budget_spent > 0);
    }

    #[test]
    fn exact_finds_the_maximum_deviation_witness() {
        let a = RealMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let v = exact_check(&a, &Subset::full(2), &Subset::full(2), &params(0.4)).unwrap();
        match v.status {
            RegularityStatus::Irregular(w) => {
                assert_eq!(w.rows.as_slice(), &[1]);
                assert_eq!(w.cols.as_slice(), &[1]);
                assert!((w.deviation - 0.75).abs() < 1e-12);
            }
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    #[test]
    fn exact_matches_brute_force_deviation() {
        for seed in 0..3u64 {
            let a = RealMatrix::from_fn(8, 8, |x, y| {
                (((x * 37 + y * 101 + seed as usize * 13) % 17) as f64 - 8.0) / 8.0
            })
            .unwrap();
            let x = Subset::full(8);
            let y = Subset::full(8);
            let eps = 0.3;
            let brute = brute_force_max_deviation(&a, &x, &y, eps);
            let v = exact_check(&a, &x, &y, &params(eps)).unwrap();
            match v.status {
                RegularityStatus::Irregular(w) => {
                    assert!((w.deviation - brute).abs() < 1e-12);
                }
                RegularityStatus::Regular => assert!(brute <= eps + 1e-9),
                RegularityStatus::Unknown => panic!("exact check cannot be unknown"),
            }
        }
    }

    #[test]
    fn exact_refuses_oversize_blocks() {
        let a = RealMatrix::from_fn(20, 20, |_, _| 1.0).unwrap();
        let err = exact_check(&a, &Subset::full(20), &Subset::full(20), &params(0.25));
        assert!(matches!(err, Err(Error::OracleRefused { .. })));
    }

    #[test]
    fn heuristic_finds_planted_dense_corner() {
        let a = RealMatrix::from_fn(20, 20, |x, y| if x < 10 && y < 10 { 1.0 } else { 0.0 }).unwrap();
        let v = heuristic_witness_search(
            &a,
            &Subset::full(20),
            &Subset::full(20),
            &params(0.3),
            &mut rng(1),
        )
        .unwrap();
        match v.status {
            RegularityStatus::Irregular(w) => {
                assert!(w.deviation > 0.3);
                // Self-certification: recompute from entries.
                let d0 = a.block_density(&Subset::full(20), &Subset::full(20)).unwrap();
                let d = a.block_density(&w.rows, &w.cols).unwrap();
                assert!(((d - d0).abs() - w.deviation).abs() < 1e-12);
            }
            other => panic!("expected a witness, got {other:?}"),
        }
        assert_eq!(v.method, CheckMethod::Heuristic);
    }

    #[test]
    fn heuristic_reports_unknown_on_flat_matrix() {
        let a = RealMatrix::from_fn(40, 40, |_, _| 1.0).unwrap();
        let p = params(0.25);
        let v = heuristic_witness_search(&a, &Subset::full(40), &Subset::full(40), &p, &mut rng(2))
            .unwrap();
        assert_eq!(v.status, RegularityStatus::Unknown);
        assert_eq!(v.budget_spent, p.witness_budget);
    }

    #[test]
    fn heuristic_is_deterministic_for_a_fixed_seed() {
        let a = RealMatrix::from_fn(30, 30, |x, y| ((x * y) % 3) as f64).unwrap();
        let p = params(0.3);
        let run = |seed| {
            heuristic_witness_search(&a, &Subset::full(30), &Subset::full(30), &p, &mut rng(seed))
                .unwrap()
        };
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn check_block_dispatches_on_size() {
        let a = RealMatrix::from_fn(20, 20, |_, _| 1.0).unwrap();
        let p = params(0.25);
        let small = check_block(
            &a,
            &Subset::new((0..8).collect()),
            &Subset::new((0..8).collect()),
            &p,
            &mut rng(0),
        )
        .unwrap();
        assert_eq!(small.method, CheckMethod::Exact);
        let big = check_block(&a, &Subset::full(20), &Subset::full(20), &p, &mut rng(0)).unwrap();
        assert_eq!(big.method, CheckMethod::Heuristic);
    }

    #[test]
    fn shrink_returns_in_window_witness_unchanged() {
        let a = RealMatrix::from_fn(40, 40, |x, y| if x < 20 && y < 20 { 1.0 } else { 0.0 }).unwrap();
        let w = Witness {
            rows: Subset::new((0..20).collect()),
            cols: Subset::new((0..20).collect()),
            deviation: 0.75,
        };
        let out = shrink_witness(&a, &Subset::full(40), &Subset::full(40), &w, &params(0.3), &mut rng(3))
            .unwrap();
        assert_eq!(out.rows, w.rows);
        assert_eq!(out.cols, w.cols);
    }

    #[test]
    fn shrink_reduces_oversized_witness_sides() {
        let a = RealMatrix::from_fn(40, 40, |x, y| if x < 30 && y < 30 { 1.0 } else { 0.0 }).unwrap();
        let w = Witness {
            rows: Subset::new((0..30).collect()),
            cols: Subset::new((0..30).collect()),
            deviation: 0.4375,
        };
        let p = params(0.3);
        let out = shrink_witness(&a, &Subset::full(40), &Subset::full(40), &w, &p, &mut rng(4)).unwrap();
        assert!(out.rows.len() >= 12 && out.rows.len() <= 20);
        assert!(out.cols.len() >= 12 && out.cols.len() <= 20);
        assert!(out.deviation >= 0.3 - 1e-9);
        assert!(out.rows.iter().all(|r| r < 30));
    }

    #[test]
    fn shrink_fails_on_unsplittable_side() {
        // Single-row block: no row subset can leave a nonempty complement.
        let a = RealMatrix::from_rows(vec![vec![5.0, 0.0, 0.0, 0.0]]).unwrap();
        let w = Witness {
            rows: Subset::new(vec![0]),
            cols: Subset::new(vec![0]),
            deviation: 3.75,
        };
        let out = shrink_witness(
            &a,
            &Subset::new(vec![0]),
            &Subset::full(4),
            &w,
            &params(0.3),
            &mut rng(5),
        );
        assert!(matches!(out, Err(Error::ShrinkFailure(_))));
    }

    #[test]
    fn gain_split_hand_computed_example() {
        // 10x10, a 5x5 corner of 2s: block density 0.5, witness density 2.
        let a = RealMatrix::from_fn(10, 10, |x, y| if x < 5 && y < 5 { 2.0 } else { 0.0 }).unwrap();
        let w = Witness {
            rows: Subset::new((0..5).collect()),
            cols: Subset::new((0..5).collect()),
            deviation: 1.5,
        };
        let cfg = PotentialConfig::new(0.4, Cutoff::Finite(50.0)).unwrap();
        let g = gain_split(&a, &Subset::full(10), &Subset::full(10), &w, &cfg).unwrap();
        assert!((g.phi_before - 25.0).abs() < 1e-12);
        assert!((g.phi_after - 100.0).abs() < 1e-12);
        assert!((g.gain - 75.0).abs() < 1e-12);
        assert!(g.gain >= 0.4f64.powi(4) * 100.0);
        assert_eq!(g.row_split.0.len() + g.row_split.1.len(), 10);
        assert_eq!(g.col_split.0.len() + g.col_split.1.len(), 10);

        let quad = PotentialConfig::new(0.4, Cutoff::Infinite).unwrap();
        let gq = gain_split(&a, &Subset::full(10), &Subset::full(10), &w, &quad).unwrap();
        assert!((gq.gain - 75.0).abs() < 1e-12);
    }

    #[test]
    fn gain_split_validates_inputs() {
        let a = RealMatrix::from_fn(10, 10, |x, y| if x < 5 && y < 5 { 2.0 } else { 0.0 }).unwrap();
        let cfg = PotentialConfig::new(0.4, Cutoff::Finite(50.0)).unwrap();
        let full = Subset::full(10);

        // Deviation below epsilon.
        let weak = Witness {
            rows: Subset::new((0..5).collect()),
            cols: Subset::new((0..5).collect()),
            deviation: 0.0,
        };
        let flat = RealMatrix::from_fn(10, 10, |_, _| 1.0).unwrap();
        assert!(gain_split(&flat, &full, &full, &weak, &cfg).is_err());

        // Witness escaping the block.
        let escaped = Witness {
            rows: Subset::new(vec![0, 1, 2, 3, 11]),
            cols: Subset::new((0..5).collect()),
            deviation: 1.0,
        };
        assert!(gain_split(&a, &full, &full, &escaped, &cfg).is_err());

        // Density above epsilon * cutoff.
        let hot = RealMatrix::from_fn(10, 10, |x, y| if x < 5 && y < 5 { 100.0 } else { 60.0 }).unwrap();
        let hw = Witness {
            rows: Subset::new((0..5).collect()),
            cols: Subset::new((0..5).collect()),
            deviation: 20.0,
        };
        let tight = PotentialConfig::new(0.4, Cutoff::Finite(50.0)).unwrap();
        assert!(gain_split(&hot, &full, &full, &hw, &tight).is_err());
    }

    #[test]
    fn gain_split_floor_holds_on_random_planted_blocks() {
        for seed in 0..5u64 {
            let mut r = rng(100 + seed);
            let n = 24;
            let a = RealMatrix::from_fn(n, n, |x, y| {
                if x < 8 && y < 8 {
                    3.0
                } else {
                    ((x * 7 + y * 11 + seed as usize) % 2) as f64 * 0.2
                }
            })
            .unwrap();
            let full = Subset::full(n);
            let p = params(0.3);
            let v = heuristic_witness_search(&a, &full, &full, &p, &mut r).unwrap();
            if let RegularityStatus::Irregular(w) = v.status {
                let w = shrink_witness(&a, &full, &full, &w, &p, &mut r).unwrap();
                let cfg = PotentialConfig::new(0.3, Cutoff::Finite(89.0)).unwrap();
                let g = gain_split(&a, &full, &full, &w, &cfg).unwrap();
                assert!(g.gain >= 0.3f64.powi(4) * (n * n) as f64 - 1e-9);
            }
        }
    }
}
