//! Partitions of index sets with an optional exceptional set, and pairs of
//! them describing a block decomposition of a matrix.
//!
//! Classes keep construction order; elements inside a class are sorted.
//! Refinement is directional: elements may move into the exceptional set
//! during refinement, never out of it.

use crate::error::{Error, Result};
use crate::matrix::{RealMatrix, Subset};

/// Partition of a ground index set into disjoint nonempty classes plus an
/// exceptional set. Ground = exceptional + union of classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    ground: Vec<usize>,
    exceptional: Vec<usize>,
    classes: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates disjointness and builds the partition. Class order is kept;
    /// indices within each class and the exceptional set are sorted.
    pub fn new(classes: Vec<Vec<usize>>, exceptional: Vec<usize>) -> Result<Self> {
        let mut classes: Vec<Vec<usize>> = classes;
        for c in &mut classes {
            if c.is_empty() {
                return Err(Error::InvalidPartition("empty class".into()));
            }
            c.sort_unstable();
        }
        let mut exceptional = exceptional;
        exceptional.sort_unstable();

        let mut ground: Vec<usize> = exceptional.clone();
        for c in &classes {
            ground.extend_from_slice(c);
        }
        ground.sort_unstable();
        if ground.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPartition(
                "classes and exceptional set must be disjoint".into(),
            ));
        }
        Ok(Partition {
            ground,
            exceptional,
            classes,
        })
    }

    /// Single class 0..n, empty exceptional set.
    pub fn trivial(n: usize) -> Self {
        Partition {
            ground: (0..n).collect(),
            exceptional: vec![],
            classes: vec![(0..n).collect()],
        }
    }

    /// n singleton classes in index order.
    pub fn singletons(n: usize) -> Self {
        Partition {
            ground: (0..n).collect(),
            exceptional: vec![],
            classes: (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// Splits 0..n into `count` consecutive classes of size floor(n/count);
    /// the remainder at the end becomes exceptional.
    pub fn balanced(n: usize, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Domain("class count must be positive".into()));
        }
        let size = n / count;
        if size == 0 {
            return Err(Error::TooSmall(format!(
                "cannot form {count} classes from {n} indices"
            )));
        }
        let classes: Vec<Vec<usize>> = (0..count)
            .map(|i| (i * size..(i + 1) * size).collect())
            .collect();
        let exceptional = (count * size..n).collect();
        Ok(Partition {
            ground: (0..n).collect(),
            exceptional,
            classes,
        })
    }

    pub fn ground(&self) -> &[usize] {
        &self.ground
    }

    pub fn exceptional(&self) -> &[usize] {
        &self.exceptional
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class(&self, i: usize) -> &[usize] {
        &self.classes[i]
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// All nonexceptional classes have equal size. Vacuously true for at
    /// most one class.
    pub fn is_balanced(&self) -> bool {
        match self.classes.first() {
            None => true,
            Some(first) => self.classes.iter().all(|c| c.len() == first.len()),
        }
    }

    /// Ground set is exactly 0..n. Sorted and deduplicated storage makes
    /// the endpoint check sufficient.
    pub fn covers_axis(&self, n: usize) -> bool {
        if n == 0 {
            return self.ground.is_empty();
        }
        self.ground.len() == n && self.ground[0] == 0 && self.ground[n - 1] == n - 1
    }

    /// Fraction of the ground set that is exceptional.
    pub fn exceptional_fraction(&self) -> f64 {
        if self.ground.is_empty() {
            0.0
        } else {
            self.exceptional.len() as f64 / self.ground.len() as f64
        }
    }

    /// Turns every exceptional element into a singleton class, appended
    /// after the existing classes in index order.
    pub fn split_exceptional_to_singletons(&self) -> Partition {
        let mut classes = self.classes.clone();
        classes.extend(self.exceptional.iter().map(|&v| vec![v]));
        Partition {
            ground: self.ground.clone(),
            exceptional: vec![],
            classes,
        }
    }

    /// Chops every class into consecutive pieces of exactly `chunk`
    /// elements (in index order); leftovers join the exceptional set.
    pub fn rebalance(&self, chunk: usize) -> Result<Partition> {
        if chunk == 0 {
            return Err(Error::Domain("rebalance chunk must be positive".into()));
        }
        let mut classes = Vec::new();
        let mut exceptional = self.exceptional.clone();
        for c in &self.classes {
            let full = c.len() / chunk;
            for i in 0..full {
                classes.push(c[i * chunk..(i + 1) * chunk].to_vec());
            }
            exceptional.extend_from_slice(&c[full * chunk..]);
        }
        if classes.is_empty() {
            return Err(Error::TooSmall(format!(
                "rebalance to chunk {chunk} leaves no classes"
            )));
        }
        exceptional.sort_unstable();
        Ok(Partition {
            ground: self.ground.clone(),
            exceptional,
            classes,
        })
    }

    /// Map from raw index to class position, None for exceptional elements.
    /// Requires the ground set to cover 0..n.
    pub(crate) fn labels(&self, n: usize) -> Result<Vec<Option<u32>>> {
        if !self.covers_axis(n) {
            return Err(Error::InvalidPartition(format!(
                "partition ground does not cover axis of length {n}"
            )));
        }
        let mut labels = vec![None; n];
        for (ci, c) in self.classes.iter().enumerate() {
            for &v in c {
                labels[v] = Some(ci as u32);
            }
        }
        Ok(labels)
    }

    /// Labels where exceptional elements get singleton labels after the
    /// class labels, in index order. Returns labels and per-label sizes.
    pub(crate) fn expanded_labels(&self, n: usize) -> Result<(Vec<u32>, Vec<usize>)> {
        let base = self.labels(n)?;
        let k = self.classes.len() as u32;
        let mut next = k;
        let mut labels = Vec::with_capacity(n);
        for &slot in &base {
            match slot {
                Some(l) => labels.push(l),
                None => {
                    labels.push(next);
                    next += 1;
                }
            }
        }
        let mut sizes: Vec<usize> = self.classes.iter().map(|c| c.len()).collect();
        sizes.extend(std::iter::repeat_n(1, self.exceptional.len()));
        Ok((labels, sizes))
    }
}

/// True when every class of `fine` sits inside a class of `coarse` and the
/// exceptional set only grew. Errors if the ground sets differ.
pub fn is_refinement(fine: &Partition, coarse: &Partition) -> Result<bool> {
    if fine.ground != coarse.ground {
        return Err(Error::Domain(
            "refinement check requires equal ground sets".into(),
        ));
    }
    let max = fine.ground.last().map_or(0, |&m| m + 1);
    let mut coarse_of = vec![usize::MAX; max];
    for (ci, c) in coarse.classes.iter().enumerate() {
        for &v in c {
            coarse_of[v] = ci;
        }
    }
    let exceptional_ok = {
        let fine_exc: std::collections::HashSet<usize> = fine.exceptional.iter().copied().collect();
        coarse.exceptional.iter().all(|v| fine_exc.contains(v))
    };
    if !exceptional_ok {
        return Ok(false);
    }
    for c in &fine.classes {
        let host = coarse_of[c[0]];
        if host == usize::MAX || c.iter().any(|&v| coarse_of[v] != host) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Coarsest partition refining all inputs: classes are the nonempty
/// intersections of input classes; an element exceptional anywhere is
/// exceptional here. Cells are ordered by their class indices in the
/// inputs, lexicographically.
pub fn common_refinement(parts: &[Partition]) -> Result<Partition> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Domain("common refinement of no partitions".into()))?;
    if parts.iter().any(|p| p.ground != first.ground) {
        return Err(Error::Domain(
            "common refinement requires equal ground sets".into(),
        ));
    }
    let max = first.ground.last().map_or(0, |&m| m + 1);
    let mut signature: Vec<Option<Vec<u32>>> = vec![Some(Vec::with_capacity(parts.len())); max];
    for p in parts {
        let mut label = vec![None; max];
        for (ci, c) in p.classes.iter().enumerate() {
            for &v in c {
                label[v] = Some(ci as u32);
            }
        }
        for &v in &first.ground {
            match (label[v], &mut signature[v]) {
                (Some(l), Some(sig)) => sig.push(l),
                _ => signature[v] = None,
            }
        }
    }
    let mut cells: std::collections::BTreeMap<Vec<u32>, Vec<usize>> = Default::default();
    let mut exceptional = Vec::new();
    for &v in &first.ground {
        match signature[v].take() {
            Some(sig) => cells.entry(sig).or_default().push(v),
            None => exceptional.push(v),
        }
    }
    Ok(Partition {
        ground: first.ground.clone(),
        exceptional,
        classes: cells.into_values().collect(),
    })
}

/// Row and column partitions describing a block decomposition. A symmetric
/// pair uses one partition for both axes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    rows: Partition,
    cols: Partition,
    symmetric: bool,
}

impl BlockPartition {
    pub fn new(rows: Partition, cols: Partition) -> Self {
        BlockPartition {
            rows,
            cols,
            symmetric: false,
        }
    }

    /// Same partition on both axes; kept identical by construction.
    pub fn symmetric(p: Partition) -> Self {
        BlockPartition {
            rows: p.clone(),
            cols: p,
            symmetric: true,
        }
    }

    pub fn rows(&self) -> &Partition {
        &self.rows
    }

    pub fn cols(&self) -> &Partition {
        &self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Both partitions cover the axes of `a` exactly.
    pub fn validate_cover(&self, a: &RealMatrix) -> Result<()> {
        if !self.rows.covers_axis(a.rows()) || !self.cols.covers_axis(a.cols()) {
            return Err(Error::InvalidPartition(
                "block partition must cover both matrix axes".into(),
            ));
        }
        if self.symmetric && self.rows != self.cols {
            return Err(Error::InvalidPartition(
                "symmetric block partition with differing axis partitions".into(),
            ));
        }
        Ok(())
    }

    pub fn is_balanced(&self) -> bool {
        self.rows.is_balanced() && self.cols.is_balanced()
    }
}

/// Replaces every block with its density: entry (x, y) of the result is the
/// density of the block containing (x, y). Partitions must have empty
/// exceptional sets and cover subsets of the axes.
pub fn averaged_matrix(a: &RealMatrix, p: &Partition, q: &Partition) -> Result<RealMatrix> {
    if !p.exceptional().is_empty() || !q.exceptional().is_empty() {
        return Err(Error::Domain(
            "averaging requires partitions without exceptional sets".into(),
        ));
    }
    Subset::new(p.ground().to_vec()).check_bounds(a.rows())?;
    Subset::new(q.ground().to_vec()).check_bounds(a.cols())?;

    let k = p.class_count();
    let l = q.class_count();
    let mut density = vec![0.0f64; k * l];
    for (i, pc) in p.classes().iter().enumerate() {
        let x = Subset::new(pc.clone());
        for (j, qc) in q.classes().iter().enumerate() {
            let y = Subset::new(qc.clone());
            density[i * l + j] = a.block_density(&x, &y)?;
        }
    }

    let mut row_class = std::collections::HashMap::new();
    for (i, pc) in p.classes().iter().enumerate() {
        for &v in pc {
            row_class.insert(v, i);
        }
    }
    let mut col_class = std::collections::HashMap::new();
    for (j, qc) in q.classes().iter().enumerate() {
        for &v in qc {
            col_class.insert(v, j);
        }
    }

    let gr = p.ground();
    let gc = q.ground();
    RealMatrix::from_fn(gr.len(), gc.len(), |x, y| {
        density[row_class[&gr[x]] * l + col_class[&gc[y]]]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(classes: &[&[usize]]) -> Partition {
        Partition::new(classes.iter().map(|c| c.to_vec()).collect(), vec![]).unwrap()
    }

    #[test]
    fn constructor_validates() {
        assert!(Partition::new(vec![vec![0, 1], vec![1, 2]], vec![]).is_err());
        assert!(Partition::new(vec![vec![0], vec![]], vec![]).is_err());
        assert!(Partition::new(vec![vec![0, 1]], vec![1]).is_err());
        let p = Partition::new(vec![vec![2, 0], vec![3]], vec![1]).unwrap();
        assert_eq!(p.class(0), &[0, 2]);
        assert_eq!(p.ground(), &[0, 1, 2, 3]);
    }

    #[test]
    fn every_partition_refines_itself() {
        let p = Partition::new(vec![vec![0, 1], vec![2, 3]], vec![4]).unwrap();
        assert!(is_refinement(&p, &p).unwrap());
    }

    #[test]
    fn singletons_refine_everything_with_same_ground() {
        let coarse = part(&[&[0, 1, 2], &[3, 4, 5]]);
        let fine = Partition::singletons(6);
        assert!(is_refinement(&fine, &coarse).unwrap());
        assert!(!is_refinement(&coarse, &fine).unwrap());
    }

    #[test]
    fn moving_an_element_to_exceptional_is_a_refinement() {
        let coarse = part(&[&[0, 1, 2], &[3, 4, 5]]);
        let fine = Partition::new(vec![vec![0, 1], vec![3, 4, 5]], vec![2]).unwrap();
        assert!(is_refinement(&fine, &coarse).unwrap());
        assert!(!is_refinement(&coarse, &fine).unwrap());
    }

    #[test]
    fn crossing_class_boundaries_is_not_a_refinement() {
        let coarse = part(&[&[0, 1, 2], &[3, 4, 5]]);
        let crossing = part(&[&[0, 1, 2, 3], &[4, 5]]);
        assert!(!is_refinement(&crossing, &coarse).unwrap());
    }

    #[test]
    fn refinement_check_requires_equal_ground() {
        let a = part(&[&[0, 1]]);
        let b = part(&[&[0, 1, 2]]);
        assert!(is_refinement(&a, &b).is_err());
    }

    #[test]
    fn common_refinement_intersects_classes() {
        let p = part(&[&[0, 1, 2, 3], &[4, 5, 6, 7]]);
        let q = part(&[&[0, 1, 4, 5], &[2, 3, 6, 7]]);
        let r = common_refinement(&[p.clone(), q.clone()]).unwrap();
        assert_eq!(r.class_count(), 4);
        assert!(is_refinement(&r, &p).unwrap());
        assert!(is_refinement(&r, &q).unwrap());
        assert_eq!(r.class(0), &[0, 1]);
        assert_eq!(r.class(1), &[2, 3]);
        assert_eq!(r.class(2), &[4, 5]);
        assert_eq!(r.class(3), &[6, 7]);
    }

    #[test]
    fn common_refinement_of_bisections_stays_within_power_bound() {
        // l - 1 bisections of 0..32 can make at most 2^(l-1) cells.
        let n = 32;
        let mut parts = Vec::new();
        for bit in 0..4 {
            let left: Vec<usize> = (0..n).filter(|v| (v >> bit) & 1 == 0).collect();
            let right: Vec<usize> = (0..n).filter(|v| (v >> bit) & 1 == 1).collect();
            parts.push(Partition::new(vec![left, right], vec![]).unwrap());
        }
        let r = common_refinement(&parts).unwrap();
        assert_eq!(r.class_count(), 16);
        for p in &parts {
            assert!(is_refinement(&r, p).unwrap());
        }
    }

    #[test]
    fn common_refinement_unions_exceptional_sets() {
        let p = Partition::new(vec![vec![0, 1, 2]], vec![3]).unwrap();
        let q = Partition::new(vec![vec![1, 2, 3]], vec![0]).unwrap();
        let r = common_refinement(&[p, q]).unwrap();
        assert_eq!(r.exceptional(), &[0, 3]);
        assert_eq!(r.class(0), &[1, 2]);
    }

    #[test]
    fn split_exceptional_appends_singletons() {
        let p = Partition::new(vec![vec![0, 1], vec![4, 5]], vec![2, 3]).unwrap();
        let s = p.split_exceptional_to_singletons();
        assert!(s.exceptional().is_empty());
        assert_eq!(s.class_count(), 4);
        assert_eq!(s.class(2), &[2]);
        assert_eq!(s.class(3), &[3]);
        assert_eq!(s.ground(), p.ground());
    }

    #[test]
    fn rebalance_chops_evenly() {
        let p = part(&[&[0, 1, 2, 3], &[4, 5, 6, 7]]);
        let r = p.rebalance(2).unwrap();
        assert_eq!(r.class_count(), 4);
        assert!(r.exceptional().is_empty());
        assert!(r.is_balanced());
        assert!(is_refinement(&r, &p).unwrap());
    }

    #[test]
    fn rebalance_moves_remainders_to_exceptional() {
        let p = part(&[&[0, 1, 2, 3, 4], &[5, 6, 7]]);
        let r = p.rebalance(2).unwrap();
        assert_eq!(r.class_count(), 3);
        assert_eq!(r.exceptional(), &[4, 7]);
        assert!(is_refinement(&r, &p).unwrap());
    }

    #[test]
    fn rebalance_rejects_degenerate_requests() {
        let p = part(&[&[0, 1]]);
        assert!(p.rebalance(0).is_err());
        assert!(p.rebalance(3).is_err());
    }

    #[test]
    fn rebalance_keeps_exceptional_growth_bounded() {
        // Remainders lose at most chunk - 1 elements per class.
        let classes: Vec<Vec<usize>> = (0..10)
            .map(|i| (i * 100..i * 100 + 97).collect())
            .collect();
        let p = Partition::new(classes, vec![]).unwrap();
        let r = p.rebalance(10).unwrap();
        assert_eq!(r.exceptional().len(), 70);
        assert!(r.exceptional().len() <= 10 * 9);
        assert!(r.is_balanced());
    }

    #[test]
    fn balanced_construction() {
        let p = Partition::balanced(10, 3).unwrap();
        assert_eq!(p.class_count(), 3);
        assert_eq!(p.class(0), &[0, 1, 2]);
        assert_eq!(p.exceptional(), &[9]);
        assert!(p.is_balanced());
        assert!(Partition::balanced(2, 5).is_err());
    }

    #[test]
    fn block_partition_symmetric_shares_one_partition() {
        let p = Partition::balanced(8, 2).unwrap();
        let bp = BlockPartition::symmetric(p.clone());
        assert!(bp.is_symmetric());
        assert_eq!(bp.rows(), bp.cols());
        let a = RealMatrix::from_fn(8, 8, |_, _| 1.0).unwrap();
        bp.validate_cover(&a).unwrap();
        let b = RealMatrix::from_fn(8, 7, |_, _| 1.0).unwrap();
        assert!(bp.validate_cover(&b).is_err());
    }

    #[test]
    fn averaged_matrix_flattens_blocks() {
        let a = RealMatrix::from_rows(vec![
            vec![1.0, 1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0],
        ])
        .unwrap();
        let p = part(&[&[0, 1], &[2, 3]]);
        let avg = averaged_matrix(&a, &p, &p).unwrap();
        assert_eq!(avg, a);

        let q = part(&[&[0, 1, 2, 3]]);
        let flat = averaged_matrix(&a, &q, &q).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                assert!((flat.get(x, y) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn averaged_matrix_conserves_block_weight() {
        let a = RealMatrix::from_fn(12, 12, |x, y| ((x * 7 + y * 13) % 5) as f64 - 2.0).unwrap();
        let p = part(&[&[0, 1, 2, 3], &[4, 5, 6, 7], &[8, 9, 10, 11]]);
        let avg = averaged_matrix(&a, &p, &p).unwrap();
        for pc in p.classes() {
            for qc in p.classes() {
                let x = Subset::new(pc.clone());
                let y = Subset::new(qc.clone());
                let w0 = a.block_weight(&x, &y).unwrap();
                let w1 = avg.block_weight(&x, &y).unwrap();
                assert!((w0 - w1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn averaging_by_coarse_equals_averaging_fine_then_coarse() {
        let a = RealMatrix::from_fn(24, 24, |x, y| ((x * 5 + y * 11) % 7) as f64).unwrap();
        let coarse = part(&[&(0..12).collect::<Vec<_>>()[..], &(12..24).collect::<Vec<_>>()[..]]);
        let fine: Vec<Vec<usize>> = (0..6).map(|i| (i * 4..(i + 1) * 4).collect()).collect();
        let fine = Partition::new(fine, vec![]).unwrap();
        let avg_fine = averaged_matrix(&a, &fine, &fine).unwrap();
        let twice = averaged_matrix(&avg_fine, &coarse, &coarse).unwrap();
        let once = averaged_matrix(&a, &coarse, &coarse).unwrap();
        for x in 0..24 {
            for y in 0..24 {
                assert!((twice.get(x, y) - once.get(x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn averaged_matrix_rejects_exceptional_sets() {
        let a = RealMatrix::from_fn(4, 4, |_, _| 1.0).unwrap();
        let p = Partition::new(vec![vec![0, 1, 2]], vec![3]).unwrap();
        assert!(averaged_matrix(&a, &p, &p).is_err());
    }
}
