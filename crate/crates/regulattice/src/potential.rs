//! Cutoff potential of scalars, blocks, and block partitions.
//!
//! The scalar potential is quadratic near zero and linear beyond twice the
//! cutoff, which keeps the partition potential bounded by 4*D*mass while
//! still rewarding density deviations. Exceptional elements count as
//! singleton classes; the partition potential computes that expansion
//! lazily from a single pass over the matrix.

use crate::error::{Error, Result};
use crate::matrix::{RealMatrix, Subset};
use crate::partition::BlockPartition;

/// Density cutoff for the potential. The infinite cutoff gives the plain
/// quadratic, appropriate for dense (bounded-entry) inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    Finite(f64),
    Infinite,
}

/// Parameters shared by potential and refinement computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialConfig {
    pub epsilon: f64,
    pub cutoff: Cutoff,
    /// Absolute tolerance for density and potential comparisons.
    pub tolerance: f64,
}

/// Default absolute comparison tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

impl PotentialConfig {
    pub fn new(epsilon: f64, cutoff: Cutoff) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 0.5) {
            return Err(Error::Domain(format!(
                "epsilon must lie in (0, 1/2], got {epsilon}"
            )));
        }
        if let Cutoff::Finite(d) = cutoff {
            if !d.is_finite() || d < 1.0 {
                return Err(Error::Domain(format!(
                    "finite cutoff must be at least 1, got {d}"
                )));
            }
        }
        Ok(PotentialConfig {
            epsilon,
            cutoff,
            tolerance: DEFAULT_TOLERANCE,
        })
    }

    /// Cutoff used by the drivers: 8/epsilon^2, or infinite for dense runs.
    pub fn for_driver(epsilon: f64, dense: bool) -> Result<Self> {
        let cutoff = if dense {
            Cutoff::Infinite
        } else {
            Cutoff::Finite(8.0 / (epsilon * epsilon))
        };
        PotentialConfig::new(epsilon, cutoff)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Finite cutoff value, if any.
    pub fn cutoff_value(&self) -> Option<f64> {
        match self.cutoff {
            Cutoff::Finite(d) => Some(d),
            Cutoff::Infinite => None,
        }
    }
}

/// Scalar potential: t^2 up to |t| = 2D, then the tangent line 4D(|t| - D).
/// Even, convex, nondecreasing in |t|, and at most 4D|t|.
pub fn phi_scalar(t: f64, cutoff: Cutoff) -> f64 {
    match cutoff {
        Cutoff::Infinite => t * t,
        Cutoff::Finite(d) => {
            let a = t.abs();
            if a <= 2.0 * d {
                t * t
            } else {
                4.0 * d * (a - d)
            }
        }
    }
}

/// Block potential |X||Y| * phi(d(X, Y)).
pub fn phi_block(
    a: &RealMatrix,
    x: &Subset,
    y: &Subset,
    cfg: &PotentialConfig,
) -> Result<f64> {
    let d = a.block_density(x, y)?;
    Ok((x.len() * y.len()) as f64 * phi_scalar(d, cfg.cutoff))
}

/// Partition potential: sum of block potentials over all class pairs, with
/// exceptional elements expanded to singletons. Computed from one pass over
/// the matrix; the expansion is never materialized as a matrix.
///
/// For a finite cutoff the result is checked against the 4*D*mass bound.
pub fn phi_partition(a: &RealMatrix, bp: &BlockPartition, cfg: &PotentialConfig) -> Result<f64> {
    bp.validate_cover(a)?;
    let (row_labels, row_sizes) = bp.rows().expanded_labels(a.rows())?;
    let (col_labels, col_sizes) = bp.cols().expanded_labels(a.cols())?;

    let nr = row_sizes.len();
    let nc = col_sizes.len();
    let mut weight = vec![0.0f64; nr * nc];
    for (x, &rl) in row_labels.iter().enumerate() {
        let base = rl as usize * nc;
        let row = a.row(x);
        for (y, &v) in row.iter().enumerate() {
            weight[base + col_labels[y] as usize] += v;
        }
    }

    let mut phi = 0.0;
    for i in 0..nr {
        for j in 0..nc {
            let area = (row_sizes[i] * col_sizes[j]) as f64;
            let d = weight[i * nc + j] / area;
            phi += area * phi_scalar(d, cfg.cutoff);
        }
    }

    if let Cutoff::Finite(d) = cfg.cutoff {
        let bound = 4.0 * d * a.total_mass();
        if phi > bound * (1.0 + 1e-12) + cfg.tolerance {
            return Err(Error::InvariantViolation(format!(
                "partition potential {phi} exceeds 4*D*mass bound {bound}"
            )));
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Partition;

    #[test]
    fn scalar_branches() {
        let d2 = Cutoff::Finite(2.0);
        assert_eq!(phi_scalar(1.0, d2), 1.0);
        assert_eq!(phi_scalar(-1.0, d2), 1.0);
        assert_eq!(phi_scalar(4.0, d2), 16.0);
        assert_eq!(phi_scalar(6.0, d2), 32.0);
        assert_eq!(phi_scalar(-6.0, d2), 32.0);
        assert_eq!(phi_scalar(6.0, Cutoff::Infinite), 36.0);
    }

    #[test]
    fn scalar_is_continuous_at_twice_the_cutoff() {
        for d in [1.0f64, 2.5, 32.0] {
            let t = 2.0 * d;
            let quad = t * t;
            let lin = 4.0 * d * (t - d);
            assert!((quad - lin).abs() < 1e-9 * quad.max(1.0));
        }
    }

    #[test]
    fn scalar_below_linear_envelope_and_monotone() {
        let d = Cutoff::Finite(3.0);
        let mut prev = 0.0;
        for i in 0..2000 {
            let t = i as f64 * 0.01;
            let p = phi_scalar(t, d);
            assert!(p <= 4.0 * 3.0 * t + 1e-12, "envelope failed at {t}");
            assert!(p + 1e-12 >= prev, "monotonicity failed at {t}");
            assert_eq!(p, phi_scalar(-t, d));
            prev = p;
        }
    }

    #[test]
    fn scalar_is_convex() {
        let d = Cutoff::Finite(2.0);
        for i in -100..100 {
            for j in -100..100 {
                let a = i as f64 * 0.1;
                let b = j as f64 * 0.1;
                let mid = phi_scalar((a + b) / 2.0, d);
                let avg = (phi_scalar(a, d) + phi_scalar(b, d)) / 2.0;
                assert!(mid <= avg + 1e-9);
            }
        }
    }

    #[test]
    fn block_potential_of_constant_block() {
        let a = RealMatrix::from_fn(6, 6, |_, _| 1.5).unwrap();
        let cfg = PotentialConfig::new(0.25, Cutoff::Finite(4.0)).unwrap();
        let x = Subset::new(vec![0, 1, 2]);
        let y = Subset::new(vec![3, 4]);
        let phi = phi_block(&a, &x, &y, &cfg).unwrap();
        assert!((phi - 6.0 * 2.25).abs() < 1e-12);
    }

    #[test]
    fn partition_potential_extremes() {
        let a = RealMatrix::from_fn(8, 8, |x, y| ((x + y) % 2) as f64).unwrap();
        let cfg = PotentialConfig::new(0.25, Cutoff::Finite(8.0)).unwrap();

        let trivial = BlockPartition::new(Partition::trivial(8), Partition::trivial(8));
        let phi_t = phi_partition(&a, &trivial, &cfg).unwrap();
        assert!((phi_t - 64.0 * 0.25).abs() < 1e-9);

        let singles = BlockPartition::new(Partition::singletons(8), Partition::singletons(8));
        let phi_s = phi_partition(&a, &singles, &cfg).unwrap();
        let direct: f64 = (0..8)
            .flat_map(|x| (0..8).map(move |y| (x, y)))
            .map(|(x, y)| phi_scalar(a.get(x, y), cfg.cutoff))
            .sum();
        assert!((phi_s - direct).abs() < 1e-9);
        assert!(phi_s >= phi_t);
    }

    #[test]
    fn partition_potential_matches_blockwise_sum_with_exceptional_expansion() {
        let a = RealMatrix::from_fn(10, 9, |x, y| ((x * 3 + y * 5) % 4) as f64 - 1.0).unwrap();
        let cfg = PotentialConfig::new(0.3, Cutoff::Finite(2.0)).unwrap();
        let p = Partition::new(vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]], vec![8, 9]).unwrap();
        let q = Partition::new(vec![vec![0, 1, 2], vec![3, 4, 5]], vec![6, 7, 8]).unwrap();
        let bp = BlockPartition::new(p.clone(), q.clone());

        let fast = phi_partition(&a, &bp, &cfg).unwrap();

        let pe = p.split_exceptional_to_singletons();
        let qe = q.split_exceptional_to_singletons();
        let mut slow = 0.0;
        for pc in pe.classes() {
            for qc in qe.classes() {
                let x = Subset::new(pc.clone());
                let y = Subset::new(qc.clone());
                slow += phi_block(&a, &x, &y, &cfg).unwrap();
            }
        }
        assert!((fast - slow).abs() < 1e-9);

        // Expanding exceptional elements to singleton classes is the
        // identity on the potential.
        let bpe = BlockPartition::new(pe, qe);
        let expanded = phi_partition(&a, &bpe, &cfg).unwrap();
        assert!((fast - expanded).abs() < 1e-12);
    }

    #[test]
    fn partition_potential_equals_potential_of_averaged_matrix() {
        let a = RealMatrix::from_fn(12, 12, |x, y| ((x * 7 + y) % 3) as f64).unwrap();
        let cfg = PotentialConfig::new(0.25, Cutoff::Finite(4.0)).unwrap();
        let p = Partition::balanced(12, 3).unwrap();
        let bp = BlockPartition::new(p.clone(), p.clone());
        let phi_a = phi_partition(&a, &bp, &cfg).unwrap();
        let avg = crate::partition::averaged_matrix(&a, &p, &p).unwrap();
        let phi_avg = phi_partition(&avg, &bp, &cfg).unwrap();
        assert!((phi_a - phi_avg).abs() < 1e-9);
    }

    #[test]
    fn refining_never_decreases_the_potential() {
        let a = RealMatrix::from_fn(16, 16, |x, y| ((x ^ y) % 5) as f64 - 2.0).unwrap();
        let cfg = PotentialConfig::new(0.25, Cutoff::Finite(2.0)).unwrap();
        let coarse = BlockPartition::new(Partition::balanced(16, 2).unwrap(), Partition::balanced(16, 2).unwrap());
        let mid = BlockPartition::new(Partition::balanced(16, 4).unwrap(), Partition::balanced(16, 4).unwrap());
        let fine = BlockPartition::new(Partition::singletons(16), Partition::singletons(16));
        let pc = phi_partition(&a, &coarse, &cfg).unwrap();
        let pm = phi_partition(&a, &mid, &cfg).unwrap();
        let pf = phi_partition(&a, &fine, &cfg).unwrap();
        assert!(pm >= pc - 1e-9);
        assert!(pf >= pm - 1e-9);
    }

    #[test]
    fn potential_respects_mass_bound_after_normalization() {
        let a = RealMatrix::from_fn(20, 20, |x, y| if (x * y) % 7 == 0 { 3.0 } else { 0.0 })
            .unwrap()
            .normalize()
            .unwrap();
        let cfg = PotentialConfig::new(0.25, Cutoff::Finite(128.0)).unwrap();
        let bp = BlockPartition::new(Partition::singletons(20), Partition::singletons(20));
        let phi = phi_partition(&a, &bp, &cfg).unwrap();
        assert!(phi <= 4.0 * 128.0 * a.total_mass() + 1e-6);
    }

    #[test]
    fn config_validation() {
        assert!(PotentialConfig::new(0.0, Cutoff::Infinite).is_err());
        assert!(PotentialConfig::new(0.5 + 1e-12, Cutoff::Infinite).is_err());
        assert!(PotentialConfig::new(0.5, Cutoff::Infinite).is_ok());
        assert!(PotentialConfig::new(0.25, Cutoff::Finite(0.5)).is_err());
        assert!(PotentialConfig::new(0.25, Cutoff::Finite(f64::NAN)).is_err());
        let cfg = PotentialConfig::for_driver(0.25, false).unwrap();
        assert_eq!(cfg.cutoff_value(), Some(128.0));
        assert!(PotentialConfig::for_driver(0.25, true).unwrap().cutoff_value().is_none());
    }
}
