//! Fern primitives: random split trunks, bootstrap bags and leaf score
//! tables.
//!
//! A fern of depth D applies D fixed split criteria to an object; the D
//! indicator bits form a leaf index in 0..2^D. Leaf scores are smoothed
//! log-ratios of the class distribution inside the leaf against the bag's
//! class distribution, so under-represented classes score negative and a
//! leaf that is empty in a class-balanced bag scores exactly zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttrValue, Column, Dataset};

/// Test applied to one attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTest {
    /// Numeric attributes: passes iff value >= threshold.
    Threshold(f64),
    /// Categorical attributes: passes iff the level's bit is set.
    SubsetMask(u64),
}

/// One split criterion: which attribute to look at and how to test it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCriterion {
    pub attr_index: usize,
    pub test: SplitTest,
}

impl SplitCriterion {
    #[inline]
    pub fn passes(&self, value: AttrValue) -> bool {
        match (&self.test, value) {
            (SplitTest::Threshold(theta), AttrValue::Num(x)) => x >= *theta,
            (SplitTest::SubsetMask(mask), AttrValue::Cat(code)) => mask >> code & 1 == 1,
            // Criteria are only built against matching column kinds.
            _ => unreachable!("split test applied to mismatched attribute kind"),
        }
    }
}

/// The split sequence of a fern. Criterion i contributes bit i of the leaf
/// index; attribute indices may repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FernTrunk {
    pub criteria: Vec<SplitCriterion>,
}

impl FernTrunk {
    pub fn depth(&self) -> u32 {
        self.criteria.len() as u32
    }

    pub fn n_leaves(&self) -> usize {
        1usize << self.criteria.len()
    }

    /// Distinct attribute indices used by this trunk, ascending.
    pub fn distinct_attributes(&self) -> Vec<usize> {
        let mut attrs: Vec<usize> = self.criteria.iter().map(|c| c.attr_index).collect();
        attrs.sort_unstable();
        attrs.dedup();
        attrs
    }
}

/// A bootstrap sample of size N, stored as per-index multiplicities plus the
/// out-of-bag complement.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    pub seed: u64,
    pub counts: Vec<u32>,
    pub oob_indices: Vec<u32>,
}

impl Bag {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Draw a bag of n indices with replacement from 0..n, deterministically
/// from `seed`.
pub fn sample_bag(seed: u64, n: usize) -> Bag {
    assert!(n >= 1, "bag size must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    let oob_indices = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(i, _)| i as u32)
        .collect();
    Bag {
        seed,
        counts,
        oob_indices,
    }
}

/// Draw a random trunk of the given depth. Attributes are drawn uniformly
/// with replacement; numeric thresholds are the midpoint of two uniformly
/// drawn training values (so they stay inside the observed range); each
/// categorical level joins the subset independently with probability 1/2.
pub fn draw_trunk(data: &Dataset, depth: u32, rng: &mut ChaCha8Rng) -> FernTrunk {
    let m = data.n_attributes();
    let n = data.n_objects();
    let criteria = (0..depth)
        .map(|_| {
            let attr_index = rng.random_range(0..m);
            let test = match data.column(attr_index) {
                Column::Numeric(values) => {
                    let a = values[rng.random_range(0..n)];
                    let b = values[rng.random_range(0..n)];
                    SplitTest::Threshold((a + b) / 2.0)
                }
                Column::Categorical { levels, .. } => {
                    let mut mask = 0u64;
                    for level in 0..levels.len() {
                        if rng.random::<bool>() {
                            mask |= 1 << level;
                        }
                    }
                    SplitTest::SubsetMask(mask)
                }
            };
            SplitCriterion { attr_index, test }
        })
        .collect();
    FernTrunk { criteria }
}

/// Leaf index of one object: bit i is criterion i's indicator.
#[inline]
pub fn leaf_index(trunk: &FernTrunk, data: &Dataset, row: usize) -> usize {
    let mut leaf = 0usize;
    for (i, criterion) in trunk.criteria.iter().enumerate() {
        if criterion.passes(data.value(criterion.attr_index, row)) {
            leaf |= 1 << i;
        }
    }
    leaf
}

/// Per-leaf class score vectors, 2^D rows by C columns, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    n_classes: usize,
    values: Vec<f64>,
}

impl ScoreTable {
    pub fn new(n_leaves: usize, n_classes: usize) -> Self {
        ScoreTable {
            n_classes,
            values: vec![0.0; n_leaves * n_classes],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n_classes = rows.first().map_or(0, Vec::len);
        ScoreTable {
            n_classes,
            values: rows.into_iter().flatten().collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn row(&self, leaf: usize) -> &[f64] {
        &self.values[leaf * self.n_classes..(leaf + 1) * self.n_classes]
    }

    #[inline]
    pub fn score(&self, leaf: usize, class: usize) -> f64 {
        self.values[leaf * self.n_classes + class]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_classes)
    }

    fn row_mut(&mut self, leaf: usize) -> &mut [f64] {
        &mut self.values[leaf * self.n_classes..(leaf + 1) * self.n_classes]
    }
}

/// Smoothed log-ratio score for one (leaf, class) cell.
///
/// `n_ly`: weighted class-y objects in the leaf, `n_l`: weighted objects in
/// the leaf, `n_y`: weighted class-y objects in the bag, `n`: bag size.
/// Products are formed in u64 so that exact integer cancellations (for
/// instance an empty leaf under a class-balanced bag) yield exactly 0.0.
#[inline]
pub(crate) fn leaf_score(n_ly: u64, n_l: u64, n_y: u64, n: u64, c: u64) -> f64 {
    let num = (1 + n_ly) * (c + n);
    let den = (c + n_l) * (1 + n_y);
    (num as f64 / den as f64).ln()
}

/// Fit the leaf score table for one trunk on one bag. An object drawn c
/// times into the bag counts c times.
pub fn fit_leaf_scores(trunk: &FernTrunk, bag: &Bag, data: &Dataset) -> ScoreTable {
    assert_eq!(bag.len(), data.n_objects(), "bag built over a different N");
    let n_leaves = trunk.n_leaves();
    let c = data.n_classes();
    let labels = data.labels();

    let mut leaf_class = vec![0u64; n_leaves * c];
    let mut class_totals = vec![0u64; c];
    let mut bag_size = 0u64;
    for (i, &count) in bag.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let leaf = leaf_index(trunk, data, i);
        let y = labels[i] as usize;
        leaf_class[leaf * c + y] += count as u64;
        class_totals[y] += count as u64;
        bag_size += count as u64;
    }

    // All empty leaves share one score row; compute it once.
    let empty_row: Vec<f64> = (0..c)
        .map(|y| leaf_score(0, 0, class_totals[y], bag_size, c as u64))
        .collect();

    let mut table = ScoreTable::new(n_leaves, c);
    for leaf in 0..n_leaves {
        let counts = &leaf_class[leaf * c..(leaf + 1) * c];
        let n_l: u64 = counts.iter().sum();
        let row = table.row_mut(leaf);
        if n_l == 0 {
            row.copy_from_slice(&empty_row);
        } else {
            for y in 0..c {
                row[y] = leaf_score(counts[y], n_l, class_totals[y], bag_size, c as u64);
            }
        }
    }
    table
}

/// One member of the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Fern {
    pub trunk: FernTrunk,
    pub scores: ScoreTable,
    pub bag_seed: u64,
}

/// Class score vector a fern assigns to one object.
#[inline]
pub fn fern_scores<'a>(fern: &'a Fern, data: &Dataset, row: usize) -> &'a [f64] {
    fern.scores.row(leaf_index(&fern.trunk, data, row))
}
