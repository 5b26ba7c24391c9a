//! Synthetic selection benchmarks with known ground truth.
//!
//! Generators build problems where the relevant attribute set is known by
//! construction: separated Gaussian classes (optionally padded with
//! shuffled copies acting as known-irrelevant features), a Madelon-style
//! noisy XOR with linear combination features and pure-noise padding, and
//! two total-randomisation transforms (shuffle every feature column, or
//! shuffle only the labels) whose relevant sets are empty.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset};
use crate::error::Result;
use crate::importance::{compute_importance_with, ferns_for_scans, ImportanceOptions};
use crate::model::Hyper;
use crate::rng::{self, stream};

/// A dataset with its ground-truth relevance mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchProblem {
    pub dataset: Dataset,
    /// relevant[a] is true when attribute a carries class information by
    /// construction.
    pub relevant: Vec<bool>,
    pub name: String,
    pub gen_seed: u64,
}

impl BenchProblem {
    pub fn n_relevant(&self) -> usize {
        self.relevant.iter().filter(|&&r| r).count()
    }

    /// Names of the relevant attributes, for the ground-truth sidecar file.
    pub fn relevant_names(&self) -> Vec<String> {
        self.relevant
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(a, _)| self.dataset.attribute_name(a).to_string())
            .collect()
    }
}

// Generator sub-streams under stream::GEN.
const GEN_GAUSS_COL: u64 = 1;
const GEN_SHADOW_COL: u64 = 2;
const GEN_MAD_BITS: u64 = 3;
const GEN_MAD_BASE_NOISE: u64 = 4;
const GEN_MAD_WEIGHTS: u64 = 5;
const GEN_MAD_COMBO_NOISE: u64 = 6;
const GEN_MAD_IRRELEVANT: u64 = 7;
const GEN_FEATURE_SHUFFLE: u64 = 8;
const GEN_LABEL_SHUFFLE: u64 = 9;

/// Spherical Gaussian classes: class c's mean is offset c * separation
/// along every axis. All features are relevant (for separation > 0 they
/// all carry the class signal).
pub fn gen_gaussian_classes(
    n_per_class: usize,
    n_features: usize,
    n_classes: usize,
    separation: f64,
    seed: u64,
) -> BenchProblem {
    assert!(n_per_class >= 1 && n_features >= 1 && n_classes >= 2);
    let n = n_per_class * n_classes;
    let labels: Vec<u32> = (0..n).map(|i| (i / n_per_class) as u32).collect();
    let unit = Normal::new(0.0, 1.0).unwrap();
    let columns: Vec<Column> = (0..n_features)
        .map(|j| {
            let mut rng = rng::derive_rng(seed, &[stream::GEN, GEN_GAUSS_COL, j as u64]);
            Column::Numeric(
                labels
                    .iter()
                    .map(|&y| f64::from(y) * separation + unit.sample(&mut rng))
                    .collect(),
            )
        })
        .collect();
    let dataset = Dataset::new(
        (0..n_features).map(|j| format!("f{j}")).collect(),
        columns,
        labels,
        (0..n_classes).map(|c| format!("c{c}")).collect(),
    )
    .expect("generator produces a valid dataset");
    BenchProblem {
        dataset,
        relevant: vec![true; n_features],
        name: "gauss".to_string(),
        gen_seed: seed,
    }
}

/// Append `count` known-irrelevant columns, each a fresh permutation of a
/// cyclically chosen original column.
pub fn augment_with_shadow_features(p: &BenchProblem, count: usize, seed: u64) -> BenchProblem {
    assert!(count >= 1);
    let data = &p.dataset;
    let m = data.n_attributes();
    let n = data.n_objects();
    let mut names: Vec<String> = data.attribute_names().to_vec();
    let mut columns: Vec<Column> = (0..m).map(|a| data.column(a).clone()).collect();
    for j in 0..count {
        let source = j % m;
        let mut rng = rng::derive_rng(seed, &[stream::GEN, GEN_SHADOW_COL, j as u64]);
        let perm = rng::permutation(n, &mut rng);
        columns.push(data.column(source).permuted(&perm));
        names.push(format!("irr{j}"));
    }
    let dataset = Dataset::with_label_name(
        names,
        columns,
        data.labels().to_vec(),
        data.class_names().to_vec(),
        data.label_name().to_string(),
    )
    .expect("augmenting a valid dataset keeps it valid");
    let mut relevant = p.relevant.clone();
    relevant.extend(std::iter::repeat_n(false, count));
    BenchProblem {
        dataset,
        relevant,
        name: format!("{}+irr{count}", p.name),
        gen_seed: seed,
    }
}

/// Madelon-style problem: the label is the parity of 5 hidden sign bits.
/// Features are the 5 noisy sign coordinates, 15 noisy random linear
/// combinations of the noiseless coordinates, and `n_irrelevant` standard
/// Gaussian columns. The first 20 features are relevant; under one seed the
/// irrelevant columns of a smaller problem are a prefix of a larger one's.
pub fn gen_madelon(n_objects: usize, n_irrelevant: usize, seed: u64) -> BenchProblem {
    assert!(n_objects >= 20);
    const N_BASE: usize = 5;
    const N_COMBO: usize = 15;
    const BASE_NOISE_SD: f64 = 0.3;
    const COMBO_NOISE_SD: f64 = 0.1;

    let mut bit_rng = rng::derive_rng(seed, &[stream::GEN, GEN_MAD_BITS]);
    let signs: Vec<[f64; N_BASE]> = (0..n_objects)
        .map(|_| std::array::from_fn(|_| if bit_rng.random::<bool>() { 1.0 } else { -1.0 }))
        .collect();
    let labels: Vec<u32> = signs
        .iter()
        .map(|s| (s.iter().filter(|&&v| v > 0.0).count() % 2) as u32)
        .collect();

    let mut names = Vec::new();
    let mut columns = Vec::new();

    let base_noise = Normal::new(0.0, BASE_NOISE_SD).unwrap();
    let mut base_rng = rng::derive_rng(seed, &[stream::GEN, GEN_MAD_BASE_NOISE]);
    for d in 0..N_BASE {
        names.push(format!("base{d}"));
        columns.push(Column::Numeric(
            signs
                .iter()
                .map(|s| s[d] + base_noise.sample(&mut base_rng))
                .collect(),
        ));
    }

    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut weight_rng = rng::derive_rng(seed, &[stream::GEN, GEN_MAD_WEIGHTS]);
    let weights: Vec<[f64; N_BASE]> = (0..N_COMBO)
        .map(|_| std::array::from_fn(|_| unit.sample(&mut weight_rng)))
        .collect();
    let combo_noise = Normal::new(0.0, COMBO_NOISE_SD).unwrap();
    for (j, w) in weights.iter().enumerate() {
        let mut noise_rng = rng::derive_rng(seed, &[stream::GEN, GEN_MAD_COMBO_NOISE, j as u64]);
        names.push(format!("combo{j}"));
        columns.push(Column::Numeric(
            signs
                .iter()
                .map(|s| {
                    let dot: f64 = s.iter().zip(w).map(|(a, b)| a * b).sum();
                    dot + combo_noise.sample(&mut noise_rng)
                })
                .collect(),
        ));
    }

    for j in 0..n_irrelevant {
        let mut rng = rng::derive_rng(seed, &[stream::GEN, GEN_MAD_IRRELEVANT, j as u64]);
        names.push(format!("irr{j}"));
        columns.push(Column::Numeric(
            (0..n_objects).map(|_| unit.sample(&mut rng)).collect(),
        ));
    }

    let dataset = Dataset::new(
        names,
        columns,
        labels,
        vec!["even".to_string(), "odd".to_string()],
    )
    .expect("generator produces a valid dataset");
    let mut relevant = vec![true; N_BASE + N_COMBO];
    relevant.extend(std::iter::repeat_n(false, n_irrelevant));
    BenchProblem {
        dataset,
        relevant,
        name: format!("madelon_w{n_irrelevant}"),
        gen_seed: seed,
    }
}

/// Destroy all structure by independently permuting every feature column;
/// the relevant set becomes empty by construction.
pub fn nonsense_by_feature_shuffle(p: &BenchProblem, seed: u64) -> BenchProblem {
    let data = &p.dataset;
    let n = data.n_objects();
    let columns: Vec<Column> = (0..data.n_attributes())
        .map(|a| {
            let mut rng = rng::derive_rng(seed, &[stream::GEN, GEN_FEATURE_SHUFFLE, a as u64]);
            let perm = rng::permutation(n, &mut rng);
            data.column(a).permuted(&perm)
        })
        .collect();
    let dataset = Dataset::with_label_name(
        data.attribute_names().to_vec(),
        columns,
        data.labels().to_vec(),
        data.class_names().to_vec(),
        data.label_name().to_string(),
    )
    .expect("permuting columns keeps the dataset valid");
    BenchProblem {
        dataset,
        relevant: vec![false; p.relevant.len()],
        name: format!("{}+shuffled-features", p.name),
        gen_seed: seed,
    }
}

/// Decouple features from the class by permuting only the labels; all
/// inter-attribute relations survive, and the relevant set becomes empty.
pub fn nonsense_by_label_shuffle(p: &BenchProblem, seed: u64) -> BenchProblem {
    let data = &p.dataset;
    let n = data.n_objects();
    let mut rng = rng::derive_rng(seed, &[stream::GEN, GEN_LABEL_SHUFFLE]);
    let perm = rng::permutation(n, &mut rng);
    let labels: Vec<u32> = perm.iter().map(|&i| data.labels()[i as usize]).collect();
    let columns: Vec<Column> = (0..data.n_attributes()).map(|a| data.column(a).clone()).collect();
    let dataset = Dataset::with_label_name(
        data.attribute_names().to_vec(),
        columns,
        labels,
        data.class_names().to_vec(),
        data.label_name().to_string(),
    )
    .expect("permuting labels keeps the dataset valid");
    BenchProblem {
        dataset,
        relevant: vec![false; p.relevant.len()],
        name: format!("{}+shuffled-labels", p.name),
        gen_seed: seed,
    }
}

/// One (depth, scans) grid cell to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub depth: u32,
    pub scans: u32,
}

/// Outcome of one selection run against the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub problem: String,
    pub depth: u32,
    pub scans: u32,
    pub ferns: u32,
    pub seed: u64,
    pub false_positives: u32,
    pub false_negatives: u32,
    pub runtime_seconds: f64,
}

/// Run the full (cell x repeat) grid. Results come back ordered by
/// (depth, scans, repeat) and are deterministic given `seed` — except the
/// runtime field, which is wall-clock measurement.
pub fn run_experiment(
    p: &BenchProblem,
    grid: &[GridCell],
    repeats: u32,
    seed: u64,
) -> Result<Vec<ExperimentResult>> {
    run_experiment_with(p, grid, repeats, seed, &ImportanceOptions::default())
}

pub fn run_experiment_with(
    p: &BenchProblem,
    grid: &[GridCell],
    repeats: u32,
    seed: u64,
    options: &ImportanceOptions,
) -> Result<Vec<ExperimentResult>> {
    if grid.is_empty() {
        return Err(crate::error::Error::InvalidConfig("empty grid".into()));
    }
    let mut cells: Vec<GridCell> = grid.to_vec();
    cells.sort_by_key(|c| (c.depth, c.scans));
    cells.dedup();
    let runs: Vec<(GridCell, u32)> = cells
        .iter()
        .flat_map(|&cell| (0..repeats).map(move |r| (cell, r)))
        .collect();
    let results: Vec<Result<ExperimentResult>> = runs
        .par_iter()
        .map(|&(cell, repeat)| run_one(p, cell, repeat, seed, options))
        .collect();
    results.into_iter().collect()
}

fn run_one(
    p: &BenchProblem,
    cell: GridCell,
    repeat: u32,
    seed: u64,
    options: &ImportanceOptions,
) -> Result<ExperimentResult> {
    let master = rng::mix(
        seed,
        &[
            stream::BENCH_RUN,
            u64::from(cell.depth),
            u64::from(cell.scans),
            u64::from(repeat),
        ],
    );
    let ferns = ferns_for_scans(p.dataset.n_attributes(), cell.depth, cell.scans);
    let hyper = Hyper::new(cell.depth, ferns, master);
    let start = Instant::now();
    let (_, report) = compute_importance_with(&p.dataset, &hyper, options)?;
    let runtime_seconds = start.elapsed().as_secs_f64();
    let (fp, fn_) = confusion(&report.selected_indices(), &p.relevant);
    Ok(ExperimentResult {
        problem: p.name.clone(),
        depth: cell.depth,
        scans: cell.scans,
        ferns,
        seed: master,
        false_positives: fp,
        false_negatives: fn_,
        runtime_seconds,
    })
}

/// (false positives, false negatives) of a selection against a mask.
pub fn confusion(selected: &[usize], relevant: &[bool]) -> (u32, u32) {
    let mut chosen = vec![false; relevant.len()];
    for &a in selected {
        chosen[a] = true;
    }
    let fp = chosen
        .iter()
        .zip(relevant)
        .filter(|&(&c, &r)| c && !r)
        .count() as u32;
    let fn_ = chosen
        .iter()
        .zip(relevant)
        .filter(|&(&c, &r)| !c && r)
        .count() as u32;
    (fp, fn_)
}

/// Result rows as CSV: problem,D,scans,K,seed,fp,fn,runtime_s.
pub fn results_to_csv(results: &[ExperimentResult], out: &mut dyn std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["problem", "D", "scans", "K", "seed", "fp", "fn", "runtime_s"])?;
    for r in results {
        w.write_record([
            r.problem.as_str(),
            &r.depth.to_string(),
            &r.scans.to_string(),
            &r.ferns.to_string(),
            &r.seed.to_string(),
            &r.false_positives.to_string(),
            &r.false_negatives.to_string(),
            &r.runtime_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
