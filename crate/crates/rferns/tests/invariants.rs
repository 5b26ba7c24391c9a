//! Cross-checks of the optimised implementation against independent
//! formula-level oracles, plus statistical soundness properties.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rferns::bench::{gen_gaussian_classes, nonsense_by_feature_shuffle, nonsense_by_label_shuffle};
use rferns::dataset::{Column, Dataset};
use rferns::fern::{fit_leaf_scores, FernTrunk, SplitCriterion, SplitTest};
use rferns::importance::{compute_importance, ferns_for_scans, select_features};
use rferns::model::{fern_bag, train, Hyper};
use rferns::sample_bag;

use common::*;

fn numeric_dataset(columns: Vec<Vec<f64>>, labels: Vec<u32>, c: usize) -> Dataset {
    let names = (0..columns.len()).map(|i| format!("f{i}")).collect();
    let cols = columns.into_iter().map(Column::Numeric).collect();
    let class_names = (0..c).map(|i| format!("c{i}")).collect();
    Dataset::new(names, cols, labels, class_names).unwrap()
}

#[test]
fn leaf_index_matches_indicator_integer_exhaustively() {
    // For every depth up to 10, every indicator pattern maps to its own
    // integer: rows are the patterns, column i of row r passes iff bit i of
    // r is set.
    for d in 1..=10usize {
        let rows = 1usize << d;
        let columns: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..rows)
                    .map(|r| if r >> i & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        let labels: Vec<u32> = (0..rows).map(|r| (r % 2) as u32).collect();
        let data = numeric_dataset(columns, labels, 2);
        let trunk = FernTrunk {
            criteria: (0..d)
                .map(|i| SplitCriterion {
                    attr_index: i,
                    test: SplitTest::Threshold(0.0),
                })
                .collect(),
        };
        for row in 0..rows {
            assert_eq!(rferns::leaf_index(&trunk, &data, row), row);
            assert_eq!(oracle_leaf(&trunk, &data, row), row);
        }
    }
}

#[test]
fn tiny_models_match_the_formula_oracle_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for case in 0..30 {
        let n = 2 + (case % 7);
        let m = 1 + (case % 4);
        let c = 2 + (case % 2);
        let data = random_dataset(&mut rng, n, m, c);
        let hyper = Hyper::new(1 + (case % 2) as u32, 1 + (case % 3) as u32, case as u64);
        let model = train(&data, &hyper).unwrap();
        for (k, fern) in model.ferns.iter().enumerate() {
            let bag = sample_bag(fern.bag_seed, n);
            assert_eq!(bag, fern_bag(hyper.seed, k as u32, n));
            let expected = oracle_score_table(&fern.trunk, &bag, &data);
            for (leaf, row) in expected.iter().enumerate() {
                for (y, &value) in row.iter().enumerate() {
                    assert!(
                        (fern.scores.score(leaf, y) - value).abs() <= 1e-12,
                        "case {case} fern {k} leaf {leaf} class {y}"
                    );
                }
            }
        }
        let predicted = model.predict(&data).unwrap();
        let tolerance = 1e-12 * (model.ferns.len() + 1) as f64;
        for row in 0..n {
            assert!(
                prediction_matches_oracle(predicted[row], &model, &data, row, tolerance),
                "case {case} row {row}"
            );
        }
    }
}

#[test]
fn regular_importance_matches_oracle_on_single_small_fern() {
    // One depth-1 fern on six objects, fixed seed; both importances must
    // agree with the independent recomputation to 1e-12.
    let data = numeric_dataset(
        vec![
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            vec![2.0, 2.0, 1.0, 1.0, 0.0, 0.0],
        ],
        vec![0, 0, 0, 1, 1, 1],
        2,
    );
    let hyper = Hyper::new(1, 1, 2012);
    let (model, report) = compute_importance(&data, &hyper).unwrap();
    let regular = oracle_regular_importance(&model, &data);
    let shadow = oracle_shadow_importance(&model, &data);
    for a in 0..2 {
        match regular[a] {
            Some(expected) => {
                assert!(!report.attributes[a].never_scanned);
                assert!((report.attributes[a].regular - expected).abs() <= 1e-12);
            }
            None => assert!(report.attributes[a].never_scanned),
        }
        match shadow[a] {
            Some(expected) => {
                assert!((report.attributes[a].shadow - expected).abs() <= 1e-12);
            }
            None => assert!(report.attributes[a].never_scanned),
        }
    }
}

#[test]
fn implicit_shadow_equals_explicit_shadow_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xCAFE);
    for case in 0..8 {
        let n = 8 + case * 2;
        let data = random_dataset(&mut rng, n, 2 + case % 3, 2);
        let hyper = Hyper::new(1 + (case % 3) as u32, 4, 100 + case as u64);
        let (model, report) = compute_importance(&data, &hyper).unwrap();
        let explicit = oracle_shadow_importance(&model, &data);
        for (a, attr) in report.attributes.iter().enumerate() {
            match explicit[a] {
                Some(expected) => assert!(
                    (attr.shadow - expected).abs() <= 1e-12,
                    "case {case} attr {a}: implicit {} vs explicit {}",
                    attr.shadow,
                    expected
                ),
                None => assert!(attr.never_scanned),
            }
        }
    }
}

/// All integer leaf-count tables consistent with a score table plus the
/// bag's class counts: per-leaf candidates from inverting the score
/// formula, joined by backtracking on the global marginals.
fn reconstruct_tables(
    table: &[Vec<f64>],
    class_counts: &[u64],
    bag_size: u64,
) -> Vec<Vec<Vec<u64>>> {
    let c = class_counts.len();
    let per_leaf: Vec<Vec<Vec<u64>>> = table
        .iter()
        .map(|row| {
            let mut candidates = Vec::new();
            'total: for t in 0..=bag_size {
                let mut counts = Vec::with_capacity(c);
                let mut sum = 0u64;
                for y in 0..c {
                    let v = row[y].exp() * (c as f64 + t as f64) * (1.0 + class_counts[y] as f64)
                        / (c as f64 + bag_size as f64)
                        - 1.0;
                    let rounded = v.round();
                    if (v - rounded).abs() > 1e-9 || rounded < -0.5 {
                        continue 'total;
                    }
                    let r = rounded as u64;
                    if r > class_counts[y] {
                        continue 'total;
                    }
                    counts.push(r);
                    sum += r;
                }
                if sum == t {
                    candidates.push(counts);
                }
            }
            candidates
        })
        .collect();

    let mut solutions = Vec::new();
    let mut chosen: Vec<Vec<u64>> = Vec::new();
    fn backtrack(
        per_leaf: &[Vec<Vec<u64>>],
        leaf: usize,
        remaining: &mut Vec<u64>,
        chosen: &mut Vec<Vec<u64>>,
        solutions: &mut Vec<Vec<Vec<u64>>>,
    ) {
        if leaf == per_leaf.len() {
            if remaining.iter().all(|&r| r == 0) {
                solutions.push(chosen.clone());
            }
            return;
        }
        'candidate: for candidate in &per_leaf[leaf] {
            for (y, &count) in candidate.iter().enumerate() {
                if count > remaining[y] {
                    continue 'candidate;
                }
            }
            for (y, &count) in candidate.iter().enumerate() {
                remaining[y] -= count;
            }
            chosen.push(candidate.clone());
            backtrack(per_leaf, leaf + 1, remaining, chosen, solutions);
            chosen.pop();
            for (y, &count) in candidate.iter().enumerate() {
                remaining[y] += count;
            }
        }
    }
    let mut remaining = class_counts.to_vec();
    backtrack(&per_leaf, 0, &mut remaining, &mut chosen, &mut solutions);
    solutions
}

#[test]
fn leaf_counts_are_recoverable_from_score_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for case in 0..20u64 {
        let n = 6 + (case as usize % 10);
        let data = random_dataset(&mut rng, n, 3, 2 + (case as usize % 2));
        let c = data.n_classes();
        let model = train(&data, &Hyper::new(1 + (case % 2) as u32, 1, case)).unwrap();
        let fern = &model.ferns[0];
        let bag = sample_bag(fern.bag_seed, n);

        // Ground truth by direct recount.
        let n_leaves = 1usize << fern.trunk.criteria.len();
        let mut truth = vec![vec![0u64; c]; n_leaves];
        let mut class_counts = vec![0u64; c];
        let mut bag_size = 0u64;
        for i in 0..n {
            let count = u64::from(bag.counts[i]);
            if count == 0 {
                continue;
            }
            truth[oracle_leaf(&fern.trunk, &data, i)][data.labels()[i] as usize] += count;
            class_counts[data.labels()[i] as usize] += count;
            bag_size += count;
        }

        let table: Vec<Vec<f64>> = (0..n_leaves)
            .map(|l| fern.scores.row(l).to_vec())
            .collect();
        let solutions = reconstruct_tables(&table, &class_counts, bag_size);
        assert!(
            solutions.contains(&truth),
            "case {case}: true counts not recoverable"
        );
        assert_eq!(solutions.len(), 1, "case {case}: reconstruction ambiguous");
    }
}

#[test]
fn every_object_is_out_of_bag_somewhere_in_a_large_ensemble() {
    // With K = 200 ferns on N = 150 objects the chance an object sits in
    // every bag is (1 - (1 - 1/N)^N)^K ~ 1e-40, so the out-of-bag error
    // denominator covers all objects.
    let p = gen_gaussian_classes(50, 3, 3, 2.0, 31);
    let hyper = Hyper::new(3, 200, 8);
    let model = train(&p.dataset, &hyper).unwrap();
    let n = p.dataset.n_objects();
    let mut covered = vec![false; n];
    for fern in &model.ferns {
        for &i in &sample_bag(fern.bag_seed, n).oob_indices {
            covered[i as usize] = true;
        }
    }
    assert!(covered.iter().all(|&c| c));
}

#[test]
fn noise_labels_give_chance_level_oob_error() {
    let base = gen_gaussian_classes(60, 10, 2, 0.0, 5);
    let model = train(&base.dataset, &Hyper::new(3, 300, 17)).unwrap();
    let err = model.oob_error(&base.dataset).unwrap().unwrap();
    assert!(
        (err - 0.5).abs() <= 0.1,
        "pure-noise oob error {err} not near 0.5"
    );
}

#[test]
fn regular_and_shadow_importances_are_indistinguishable_on_noise() {
    // On an all-noise problem the shadows must mimic the real attributes:
    // a two-sample KS test between the I and J samples stays insignificant.
    let base = gen_gaussian_classes(30, 120, 2, 1.0, 23);
    let noise = nonsense_by_feature_shuffle(&base, 51);
    let m = noise.dataset.n_attributes();
    let depth = 5;
    let hyper = Hyper::new(depth, ferns_for_scans(m, depth, 120), 4242);
    let (_, report) = compute_importance(&noise.dataset, &hyper).unwrap();
    let regular: Vec<f64> = report.attributes.iter().map(|a| a.regular).collect();
    let shadow: Vec<f64> = report.attributes.iter().map(|a| a.shadow).collect();
    let p = ks_two_sample_pvalue(&regular, &shadow);
    assert!(p > 0.01, "KS p-value {p} rejects exchangeability");
}

#[test]
fn label_shuffled_data_rarely_selects_anything() {
    // Null soundness: per-attribute false-positive rate over 20 seeds stays
    // below 1e-2 on label-shuffled data.
    let m = 60usize;
    let depth = 4;
    let mut false_positives = 0usize;
    for seed in 0..20u64 {
        let base = gen_gaussian_classes(25, m, 2, 2.0, 1000 + seed);
        let noise = nonsense_by_label_shuffle(&base, 2000 + seed);
        let hyper = Hyper::new(depth, ferns_for_scans(m, depth, 60), 3000 + seed);
        let (_, report) = compute_importance(&noise.dataset, &hyper).unwrap();
        false_positives += report.selected_indices().len();
    }
    let rate = false_positives as f64 / (20.0 * m as f64);
    assert!(rate <= 1e-2, "false positive rate {rate} too high");
}

#[test]
fn selection_recomputes_from_report_fields() {
    let base = gen_gaussian_classes(20, 6, 2, 3.0, 77);
    let with_noise = rferns::bench::augment_with_shadow_features(&base, 14, 78);
    let hyper = Hyper::new(4, 400, 5);
    let (_, report) = compute_importance(&with_noise.dataset, &hyper).unwrap();
    assert_eq!(select_features(&report), report.selected_indices());
    // Ground truth features of a separation-3 problem must dominate.
    assert!(report.attributes[..6].iter().all(|a| a.selected));
}

#[test]
fn importance_reports_identical_across_worker_counts() {
    let base = gen_gaussian_classes(15, 8, 2, 2.0, 3);
    let with_noise = rferns::bench::augment_with_shadow_features(&base, 8, 4);
    let hyper = Hyper::new(3, 150, 11);
    let mut outputs = Vec::new();
    for workers in [1usize, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .unwrap();
        let (model, report) =
            pool.install(|| compute_importance(&with_noise.dataset, &hyper).unwrap());
        let mut bytes = Vec::new();
        model.write_json(&mut bytes).unwrap();
        outputs.push((bytes, serde_json::to_string(&report).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn balanced_empty_leaves_score_zero_after_shadow_refit() {
    // The lazy refit path must produce the same exact-zero rows as the
    // full fit on a shadow-substituted dataset.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..10 {
        let data = random_dataset(&mut rng, 12, 3, 2);
        let model = train(&data, &Hyper::new(3, 2, case)).unwrap();
        for fern in &model.ferns {
            let bag = sample_bag(fern.bag_seed, 12);
            let perm = rferns::importance::shadow_permutation(case, 0, 12);
            let shadowed = {
                let mut columns: Vec<Column> =
                    (0..3).map(|a| data.column(a).clone()).collect();
                columns[0] = data.column(0).permuted(&perm);
                Dataset::new(
                    data.attribute_names().to_vec(),
                    columns,
                    data.labels().to_vec(),
                    data.class_names().to_vec(),
                )
                .unwrap()
            };
            let refit = fit_leaf_scores(&fern.trunk, &bag, &shadowed);
            let expected = oracle_score_table(&fern.trunk, &bag, &shadowed);
            for (leaf, row) in expected.iter().enumerate() {
                for (y, &v) in row.iter().enumerate() {
                    assert!((refit.score(leaf, y) - v).abs() <= 1e-12);
                }
            }
        }
    }
}
