//! Random ferns classifier with embedded all-relevant feature selection.
//!
//! A fern is an oblivious depth-D split sequence mapping objects to one of
//! 2^D leaves carrying smoothed per-class log scores; an ensemble of bagged
//! ferns votes by summed scores. During training the library can also
//! measure, per attribute, the usual permutation importance on out-of-bag
//! objects and the importance of an implicit shadow (a globally permuted
//! copy of the attribute that is irrelevant by design). Attributes beating
//! the best shadow form the selected all-relevant subset, without ever
//! materialising shadow columns or growing trunks on them.
//!
//! The crate also ships a Boruta-style wrapper built on the same importance
//! provider, synthetic benchmark generators with known ground truth, and a
//! command line front end (`rferns`).
//!
//! All randomness is derived from a single master seed through fixed
//! counter streams, so training, selection and benchmarks are bit-identical
//! across runs and worker counts.

pub mod bench;
pub mod boruta;
pub mod dataset;
pub mod error;
pub mod fern;
pub mod importance;
pub mod model;
pub mod rng;

pub use dataset::{AttrKind, AttrSchema, Column, Dataset, Schema, SchemaOverride};
pub use error::{Error, Result};
pub use fern::{
    draw_trunk, fern_scores, fit_leaf_scores, leaf_index, sample_bag, Bag, Fern, FernTrunk,
    ScoreTable, SplitCriterion, SplitTest,
};
pub use importance::{
    compute_importance, compute_importance_with, ferns_for_scans, select_features,
    AttrImportance, ImportanceOptions, ImportanceReport, ShadowBaseline, ShadowPlan,
};
pub use model::{train, FernModel, Hyper};
pub use rng::SEED_DERIVATION_ID;
