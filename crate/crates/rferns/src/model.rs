//! Ensemble training, prediction and persistence.
//!
//! Fern k's bag and trunk randomness come from streams derived from
//! (master seed, k), so training is embarrassingly parallel and the result
//! is bit-identical for any worker count. Ensemble prediction sums the
//! per-fern class score vectors and takes the argmax, breaking ties toward
//! the lowest class code.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Schema};
use crate::error::{Error, Result};
use crate::fern::{
    fit_leaf_scores, leaf_index, sample_bag, Bag, Fern, FernTrunk, ScoreTable, SplitTest,
};
use crate::rng::{self, stream, SEED_DERIVATION_ID};

/// Largest supported fern depth; the score table has 2^D rows.
pub const MAX_DEPTH: u32 = 30;

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyper {
    pub depth: u32,
    pub ferns: u32,
    pub seed: u64,
}

impl Hyper {
    pub fn new(depth: u32, ferns: u32, seed: u64) -> Self {
        Hyper { depth, ferns, seed }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::InvalidConfig("depth must be at least 1".into()));
        }
        if self.depth > MAX_DEPTH {
            return Err(Error::InvalidConfig(format!(
                "depth {} exceeds the maximum of {MAX_DEPTH}",
                self.depth
            )));
        }
        if self.ferns < 1 {
            return Err(Error::InvalidConfig("need at least 1 fern".into()));
        }
        Ok(())
    }
}

/// A trained random ferns ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct FernModel {
    pub ferns: Vec<Fern>,
    pub hyper: Hyper,
    pub schema: Schema,
}

/// Seed of fern k's bag stream.
pub fn fern_bag_seed(master: u64, k: u32) -> u64 {
    rng::mix(master, &[stream::BAG, k as u64])
}

/// Rebuild fern k's bag exactly as training drew it.
pub fn fern_bag(master: u64, k: u32, n: usize) -> Bag {
    sample_bag(fern_bag_seed(master, k), n)
}

pub(crate) fn build_fern(data: &Dataset, hyper: &Hyper, k: u32) -> (Fern, Bag) {
    let bag = fern_bag(hyper.seed, k, data.n_objects());
    let mut trunk_rng = rng::derive_rng(hyper.seed, &[stream::TRUNK, k as u64]);
    let trunk = crate::fern::draw_trunk(data, hyper.depth, &mut trunk_rng);
    let scores = fit_leaf_scores(&trunk, &bag, data);
    (
        Fern {
            trunk,
            scores,
            bag_seed: bag.seed,
        },
        bag,
    )
}

/// Train an ensemble of `hyper.ferns` ferns of depth `hyper.depth`.
pub fn train(data: &Dataset, hyper: &Hyper) -> Result<FernModel> {
    hyper.validate()?;
    let ferns: Vec<Fern> = (0..hyper.ferns)
        .into_par_iter()
        .map(|k| build_fern(data, hyper, k).0)
        .collect();
    Ok(FernModel {
        ferns,
        hyper: *hyper,
        schema: data.schema(),
    })
}

/// Argmax with ties broken toward the lowest index.
#[inline]
pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl FernModel {
    pub fn depth(&self) -> u32 {
        self.hyper.depth
    }

    pub fn n_classes(&self) -> usize {
        self.schema.classes.len()
    }

    /// Summed class scores for one row of a conforming dataset.
    pub fn decision_scores(&self, data: &Dataset, row: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes()];
        for fern in &self.ferns {
            let scores = fern.scores.row(leaf_index(&fern.trunk, data, row));
            for (a, &s) in acc.iter_mut().zip(scores) {
                *a += s;
            }
        }
        acc
    }

    /// Predict class codes for every row of `data`.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<u32>> {
        data.conforms_to(&self.schema)?;
        Ok((0..data.n_objects())
            .map(|row| argmax_lowest(&self.decision_scores(data, row)) as u32)
            .collect())
    }

    /// Out-of-bag error on the training data: each object is scored only by
    /// ferns whose bag excludes it. Returns None when no object has any
    /// out-of-bag fern (the estimate is undefined).
    pub fn oob_error(&self, data: &Dataset) -> Result<Option<f64>> {
        data.conforms_to(&self.schema)?;
        let n = data.n_objects();
        let c = self.n_classes();
        let mut acc = vec![0.0f64; n * c];
        let mut oob_ferns = vec![0u32; n];
        for fern in &self.ferns {
            let bag = sample_bag(fern.bag_seed, n);
            for &i in &bag.oob_indices {
                let i = i as usize;
                let scores = fern.scores.row(leaf_index(&fern.trunk, data, i));
                for (a, &s) in acc[i * c..(i + 1) * c].iter_mut().zip(scores) {
                    *a += s;
                }
                oob_ferns[i] += 1;
            }
        }
        let labels = data.labels();
        let mut evaluated = 0usize;
        let mut wrong = 0usize;
        for i in 0..n {
            if oob_ferns[i] == 0 {
                continue;
            }
            evaluated += 1;
            if argmax_lowest(&acc[i * c..(i + 1) * c]) as u32 != labels[i] {
                wrong += 1;
            }
        }
        if evaluated == 0 {
            return Ok(None);
        }
        Ok(Some(wrong as f64 / evaluated as f64))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_json(std::io::BufWriter::new(file))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_json(std::io::BufReader::new(file))
    }

    pub fn write_json(&self, mut out: impl Write) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            seed_derivation: SEED_DERIVATION_ID.to_string(),
            hyper: self.hyper,
            schema: self.schema.clone(),
            ferns: self
                .ferns
                .iter()
                .map(|f| FernFile {
                    bag_seed: f.bag_seed,
                    criteria: f.trunk.criteria.clone(),
                    scores: f.scores.rows().map(<[f64]>::to_vec).collect(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &file)?;
        out.flush()?;
        Ok(())
    }

    pub fn read_json(input: impl Read) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(input)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unexpected format tag '{}'",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {}",
                file.version
            )));
        }
        if file.seed_derivation != SEED_DERIVATION_ID {
            return Err(Error::ModelFormat(format!(
                "unknown seed derivation '{}'",
                file.seed_derivation
            )));
        }
        file.hyper.validate().map_err(|e| {
            Error::ModelFormat(format!("invalid hyperparameters in model file: {e}"))
        })?;
        let c = file.schema.classes.len();
        let n_leaves = 1usize << file.hyper.depth;
        let mut ferns = Vec::with_capacity(file.ferns.len());
        for (k, f) in file.ferns.into_iter().enumerate() {
            if f.criteria.len() != file.hyper.depth as usize {
                return Err(Error::ModelFormat(format!(
                    "fern {k} has {} criteria, expected {}",
                    f.criteria.len(),
                    file.hyper.depth
                )));
            }
            if f.scores.len() != n_leaves || f.scores.iter().any(|row| row.len() != c) {
                return Err(Error::ModelFormat(format!(
                    "fern {k} score table is not {n_leaves} x {c}"
                )));
            }
            for criterion in &f.criteria {
                let attr = criterion.attr_index;
                let Some(attr_schema) = file.schema.attributes.get(attr) else {
                    return Err(Error::ModelFormat(format!(
                        "fern {k} references attribute {attr} outside the schema"
                    )));
                };
                let kind_ok = matches!(
                    (&criterion.test, &attr_schema.kind),
                    (SplitTest::Threshold(_), crate::dataset::AttrKind::Numeric)
                        | (SplitTest::SubsetMask(_), crate::dataset::AttrKind::Categorical { .. })
                );
                if !kind_ok {
                    return Err(Error::ModelFormat(format!(
                        "fern {k} split kind does not match attribute {attr}"
                    )));
                }
            }
            ferns.push(Fern {
                trunk: FernTrunk { criteria: f.criteria },
                scores: ScoreTable::from_rows(f.scores),
                bag_seed: f.bag_seed,
            });
        }
        Ok(FernModel {
            ferns,
            hyper: file.hyper,
            schema: file.schema,
        })
    }
}

const MODEL_FORMAT: &str = "rferns-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    seed_derivation: String,
    hyper: Hyper,
    schema: Schema,
    ferns: Vec<FernFile>,
}

#[derive(Serialize, Deserialize)]
struct FernFile {
    bag_seed: u64,
    criteria: Vec<crate::fern::SplitCriterion>,
    scores: Vec<Vec<f64>>,
}
