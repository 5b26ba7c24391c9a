//! Shared test oracles and statistics helpers.
//!
//! Everything here recomputes results straight from the defining formulas,
//! independently of the library's optimised paths: leaf indices by direct
//! indicator sums, score tables by naive counting, importances by full
//! re-evaluation with explicitly materialised shadow columns. The random
//! inputs (bags, trunks, permutations) are taken from the library's
//! published derivations so both sides see the same draws.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rferns::dataset::{AttrValue, Column, Dataset};
use rferns::fern::{Bag, FernTrunk, SplitTest};
use rferns::importance::{oob_permutation, shadow_permutation, PermKind};
use rferns::model::FernModel;
use rferns::sample_bag;

/// Indicator of one criterion, written independently of the library.
fn indicator(test: &SplitTest, value: AttrValue) -> bool {
    match (test, value) {
        (SplitTest::Threshold(theta), AttrValue::Num(x)) => x >= *theta,
        (SplitTest::SubsetMask(mask), AttrValue::Cat(code)) => (mask >> code) & 1 == 1,
        _ => panic!("criterion kind does not match column kind"),
    }
}

/// Leaf index as the plain indicator sum.
pub fn oracle_leaf(trunk: &FernTrunk, data: &Dataset, row: usize) -> usize {
    trunk
        .criteria
        .iter()
        .enumerate()
        .map(|(i, criterion)| {
            if indicator(&criterion.test, data.value(criterion.attr_index, row)) {
                1usize << i
            } else {
                0
            }
        })
        .sum()
}

/// Leaf index with one attribute's value overridden.
pub fn oracle_leaf_substituted(
    trunk: &FernTrunk,
    data: &Dataset,
    row: usize,
    attr: usize,
    value: AttrValue,
) -> usize {
    trunk
        .criteria
        .iter()
        .enumerate()
        .map(|(i, criterion)| {
            let v = if criterion.attr_index == attr {
                value
            } else {
                data.value(criterion.attr_index, row)
            };
            if indicator(&criterion.test, v) { 1usize << i } else { 0 }
        })
        .sum()
}

/// Score table by direct counting and the smoothed-ratio formula.
pub fn oracle_score_table(trunk: &FernTrunk, bag: &Bag, data: &Dataset) -> Vec<Vec<f64>> {
    let n_leaves = 1usize << trunk.criteria.len();
    let c = data.n_classes();
    let labels = data.labels();
    let mut leaf_class = vec![vec![0u32; c]; n_leaves];
    let mut class_count = vec![0u32; c];
    let mut bag_n = 0u32;
    for i in 0..data.n_objects() {
        let count = bag.counts[i];
        if count == 0 {
            continue;
        }
        let leaf = oracle_leaf(trunk, data, i);
        leaf_class[leaf][labels[i] as usize] += count;
        class_count[labels[i] as usize] += count;
        bag_n += count;
    }
    (0..n_leaves)
        .map(|l| {
            let n_l: u32 = leaf_class[l].iter().sum();
            (0..c)
                .map(|y| {
                    let n_ly = leaf_class[l][y];
                    let first = (1.0 + f64::from(n_ly)) / (c as f64 + f64::from(n_l));
                    let second =
                        (c as f64 + f64::from(bag_n)) / (1.0 + f64::from(class_count[y]));
                    (first * second).ln()
                })
                .collect()
        })
        .collect()
}

/// Summed per-fern class scores with score tables recomputed by the oracle.
pub fn oracle_decision_scores(model: &FernModel, data: &Dataset, row: usize) -> Vec<f64> {
    let c = data.n_classes();
    let mut total = vec![0.0f64; c];
    for fern in &model.ferns {
        let bag = sample_bag(fern.bag_seed, data.n_objects());
        let table = oracle_score_table(&fern.trunk, &bag, data);
        let leaf = oracle_leaf(&fern.trunk, data, row);
        for y in 0..c {
            total[y] += table[leaf][y];
        }
    }
    total
}

/// Argmax with ties to the lowest class code.
pub fn oracle_argmax(scores: &[f64]) -> u32 {
    let mut best = 0usize;
    for (y, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = y;
        }
    }
    best as u32
}

/// Check one prediction against the oracle. Exact ties in one computation
/// can sit a few ULP apart in the other, so a differing label is accepted
/// only when the two classes' oracle scores are within `tolerance`.
pub fn prediction_matches_oracle(
    predicted: u32,
    model: &FernModel,
    data: &Dataset,
    row: usize,
    tolerance: f64,
) -> bool {
    let scores = oracle_decision_scores(model, data, row);
    let oracle = oracle_argmax(&scores);
    predicted == oracle
        || (scores[predicted as usize] - scores[oracle as usize]).abs() <= tolerance
}

/// Distinct attributes of a trunk, computed independently.
fn used_attributes(trunk: &FernTrunk) -> Vec<usize> {
    let mut attrs: Vec<usize> = trunk.criteria.iter().map(|c| c.attr_index).collect();
    attrs.sort_unstable();
    attrs.dedup();
    attrs
}

/// Regular importance recomputed from the formula: mean over scanning
/// ferns of the out-of-bag score drop under a within-out-of-bag
/// permutation of the attribute. None when never scanned.
pub fn oracle_regular_importance(model: &FernModel, data: &Dataset) -> Vec<Option<f64>> {
    let n = data.n_objects();
    let m = data.n_attributes();
    let labels = data.labels();
    let master = model.hyper.seed;
    let mut sums = vec![0.0f64; m];
    let mut scans = vec![0u32; m];
    for (k, fern) in model.ferns.iter().enumerate() {
        let bag = sample_bag(fern.bag_seed, n);
        let oob = &bag.oob_indices;
        if oob.is_empty() {
            continue;
        }
        let table = oracle_score_table(&fern.trunk, &bag, data);
        let baseline: f64 = oob
            .iter()
            .map(|&i| table[oracle_leaf(&fern.trunk, data, i as usize)][labels[i as usize] as usize])
            .sum();
        for attr in used_attributes(&fern.trunk) {
            let sigma = oob_permutation(master, k as u32, attr, PermKind::Regular, oob.len());
            let mut permuted = 0.0;
            for (j, &obj) in oob.iter().enumerate() {
                let donor = oob[sigma[j] as usize] as usize;
                let leaf = oracle_leaf_substituted(
                    &fern.trunk,
                    data,
                    obj as usize,
                    attr,
                    data.value(attr, donor),
                );
                permuted += table[leaf][labels[obj as usize] as usize];
            }
            sums[attr] += (baseline - permuted) / oob.len() as f64;
            scans[attr] += 1;
        }
    }
    (0..m)
        .map(|a| (scans[a] > 0).then(|| sums[a] / f64::from(scans[a])))
        .collect()
}

/// Shadow importance via explicitly materialised shadow columns: for each
/// attribute, append a column holding the global shadow permutation of its
/// values, redirect the trunk's criteria on that attribute to the new
/// column, refit by direct counting and evaluate the same formula as the
/// regular importance of the shadow column. Reuses the library's published
/// bag, shadow-plan and permutation derivations so the draws agree.
pub fn oracle_shadow_importance(model: &FernModel, data: &Dataset) -> Vec<Option<f64>> {
    let n = data.n_objects();
    let m = data.n_attributes();
    let labels = data.labels();
    let master = model.hyper.seed;
    let mut sums = vec![0.0f64; m];
    let mut scans = vec![0u32; m];
    for attr in 0..m {
        let plan = shadow_permutation(master, attr, n);
        let augmented = with_shadow_column(data, attr, &plan);
        let shadow_attr = m; // index of the appended column
        for (k, fern) in model.ferns.iter().enumerate() {
            if !used_attributes(&fern.trunk).contains(&attr) {
                continue;
            }
            let bag = sample_bag(fern.bag_seed, n);
            let oob = &bag.oob_indices;
            if oob.is_empty() {
                continue;
            }
            let mut trunk = fern.trunk.clone();
            for criterion in &mut trunk.criteria {
                if criterion.attr_index == attr {
                    criterion.attr_index = shadow_attr;
                }
            }
            let table = oracle_score_table(&trunk, &bag, &augmented);
            let baseline: f64 = oob
                .iter()
                .map(|&i| {
                    table[oracle_leaf(&trunk, &augmented, i as usize)]
                        [labels[i as usize] as usize]
                })
                .sum();
            let sigma = oob_permutation(master, k as u32, attr, PermKind::Shadow, oob.len());
            let mut permuted = 0.0;
            for (j, &obj) in oob.iter().enumerate() {
                let donor = oob[sigma[j] as usize] as usize;
                let leaf = oracle_leaf_substituted(
                    &trunk,
                    &augmented,
                    obj as usize,
                    shadow_attr,
                    augmented.value(shadow_attr, donor),
                );
                permuted += table[leaf][labels[obj as usize] as usize];
            }
            sums[attr] += (baseline - permuted) / oob.len() as f64;
            scans[attr] += 1;
        }
    }
    (0..m)
        .map(|a| (scans[a] > 0).then(|| sums[a] / f64::from(scans[a])))
        .collect()
}

/// Copy of `data` with one extra column: attribute `attr` globally permuted
/// by `plan` (entry i takes the value at plan[i]).
pub fn with_shadow_column(data: &Dataset, attr: usize, plan: &[u32]) -> Dataset {
    let m = data.n_attributes();
    let mut names: Vec<String> = data.attribute_names().to_vec();
    let mut columns: Vec<Column> = (0..m).map(|a| data.column(a).clone()).collect();
    columns.push(data.column(attr).permuted(plan));
    names.push(format!("{}_explicit_shadow", data.attribute_name(attr)));
    Dataset::new(
        names,
        columns,
        data.labels().to_vec(),
        data.class_names().to_vec(),
    )
    .expect("augmented dataset stays valid")
}

/// Small random dataset with a mix of numeric and categorical columns.
/// Numeric values are drawn from a small integer range so ties and
/// repeated threshold values occur.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize, c: usize) -> Dataset {
    let names = (0..m).map(|j| format!("f{j}")).collect();
    let columns = (0..m)
        .map(|_| {
            if rng.random::<bool>() {
                Column::Numeric((0..n).map(|_| f64::from(rng.random_range(-4..=4))).collect())
            } else {
                let levels = rng.random_range(2..=4usize);
                Column::Categorical {
                    levels: (0..levels).map(|l| format!("l{l}")).collect(),
                    codes: (0..n).map(|_| rng.random_range(0..levels as u32)).collect(),
                }
            }
        })
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..c as u32)).collect();
    let class_names = (0..c).map(|y| format!("c{y}")).collect();
    Dataset::new(names, columns, labels, class_names).expect("random dataset is valid")
}

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic, with the usual
/// finite-sample correction of the effective sample size).
pub fn ks_two_sample_pvalue(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n1, n2) = (a.len(), b.len());
    assert!(n1 > 0 && n2 > 0);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        let f1 = i as f64 / n1 as f64;
        let f2 = j as f64 / n2 as f64;
        d = d.max((f1 - f2).abs());
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 as f64 + n2 as f64);
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda.powi(2)).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
    }
    p.clamp(0.0, 1.0)
}

/// Zero the runtime column of an experiment CSV so byte comparisons only
/// see the deterministic fields.
pub fn normalize_results_csv(text: &str) -> String {
    let mut out = String::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            out.push_str(line);
        } else {
            match line.rsplit_once(',') {
                Some((front, _runtime)) => {
                    out.push_str(front);
                    out.push_str(",0");
                }
                None => out.push_str(line),
            }
        }
        out.push('\n');
    }
    out
}
