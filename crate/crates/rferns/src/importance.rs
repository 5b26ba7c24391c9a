//! Embedded all-relevant feature selection.
//!
//! During a single training pass this module accumulates, per attribute:
//!
//! * regular importance `I`: the drop in summed out-of-bag scores when the
//!   attribute's values are permuted within each fern's out-of-bag set;
//! * shadow importance `J`: the same quantity measured for an implicit
//!   shadow of the attribute — a globally permuted copy that is never used
//!   to grow trunks but swapped into the fern's bag when its score table is
//!   refit, so it behaves like an attribute that is irrelevant by design.
//!
//! The selected subset is every attribute whose regular importance strictly
//! exceeds the maximum shadow importance.
//!
//! The global shadow permutation of an attribute is shared by all ferns in
//! one run (a shadow must look like one fixed column, not a fresh draw per
//! fern); the within-out-of-bag permutations are fresh per (fern,
//! attribute) pair and independent between the two importance kinds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttrValue, Dataset};
use crate::error::Result;
use crate::fern::{leaf_index, Fern, SplitCriterion};
use crate::model::{build_fern, FernModel, Hyper};
use crate::rng::{self, stream};

/// Scan counts below this trigger the low-scan warning on reports.
pub const LOW_SCAN_THRESHOLD: u32 = 10;

/// Which values the out-of-bag objects carry in the first summand of the
/// shadow importance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowBaseline {
    /// Out-of-bag objects carry the shadow's (globally permuted) values, so
    /// the baseline term mimics a real attribute scored on its own fern.
    #[default]
    ShadowValues,
    /// Out-of-bag objects keep their original values; only the score table
    /// comes from the shadow refit. A literal reading of the same formula,
    /// kept selectable for comparison.
    OriginalValues,
}

/// Knobs for [`compute_importance_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImportanceOptions {
    pub shadow_baseline: ShadowBaseline,
    /// When false, only regular importance is computed; `J` is reported as
    /// zero, `max_shadow` is None and nothing is selected. Used by wrappers
    /// that bring their own explicit shadows.
    pub with_shadow: bool,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        ImportanceOptions {
            shadow_baseline: ShadowBaseline::ShadowValues,
            with_shadow: true,
        }
    }
}

/// Importance record for one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrImportance {
    pub name: String,
    pub index: usize,
    #[serde(rename = "I")]
    pub regular: f64,
    #[serde(rename = "J")]
    pub shadow: f64,
    /// Number of ferns that used the attribute and had a usable (non-empty)
    /// out-of-bag set.
    pub scans: u32,
    pub selected: bool,
    /// True when no fern with a usable out-of-bag set ever used the
    /// attribute; such attributes report zero importance and are never
    /// selectable.
    pub never_scanned: bool,
}

/// Hyperparameters echoed into reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperEcho {
    pub depth: u32,
    pub ferns: u32,
}

/// Per-attribute importances plus the selection they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub attributes: Vec<AttrImportance>,
    /// Maximum shadow importance over scanned attributes; None when nothing
    /// was scanned or shadow importance was disabled.
    pub max_shadow: Option<f64>,
    pub hyper: HyperEcho,
    pub seed: u64,
    pub dataset_hash: String,
    /// Set when any attribute was scanned fewer than
    /// [`LOW_SCAN_THRESHOLD`] times (including never-scanned attributes).
    pub low_scan_warning: bool,
}

impl ImportanceReport {
    /// Indices of selected attributes, in order.
    pub fn selected_indices(&self) -> Vec<usize> {
        self.attributes
            .iter()
            .filter(|a| a.selected)
            .map(|a| a.index)
            .collect()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per attribute: name,index,I,J,scans,selected,never_scanned.
    pub fn write_csv(&self, out: &mut dyn std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "index", "I", "J", "scans", "selected", "never_scanned"])?;
        for a in &self.attributes {
            w.write_record([
                a.name.as_str(),
                &a.index.to_string(),
                &a.regular.to_string(),
                &a.shadow.to_string(),
                &a.scans.to_string(),
                &a.selected.to_string(),
                &a.never_scanned.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Apply the selection rule to a finished report: attributes whose regular
/// importance strictly exceeds the maximum shadow importance, never-scanned
/// attributes excluded. Recomputable purely from the stored fields.
pub fn select_features(report: &ImportanceReport) -> Vec<usize> {
    let max_shadow = report
        .attributes
        .iter()
        .filter(|a| !a.never_scanned)
        .map(|a| a.shadow)
        .fold(None, |acc: Option<f64>, j| {
            Some(acc.map_or(j, |m| m.max(j)))
        });
    let Some(max_shadow) = max_shadow else {
        return Vec::new();
    };
    report
        .attributes
        .iter()
        .filter(|a| !a.never_scanned && a.regular > max_shadow)
        .map(|a| a.index)
        .collect()
}

/// Ensemble size needed for each attribute to be considered roughly
/// `target_scans` times: a fern of depth D scans D of the M attributes, so
/// the expected scan count of one attribute is about K * D / M.
pub fn ferns_for_scans(n_attributes: usize, depth: u32, target_scans: u32) -> u32 {
    assert!(n_attributes >= 1 && depth >= 1 && target_scans >= 1);
    let m = n_attributes as u64;
    let k = (u64::from(target_scans) * m).div_ceil(u64::from(depth));
    u32::try_from(k).expect("fern count overflows u32")
}

/// The global shadow permutation of one attribute, shared by every fern in
/// a run with the given master seed.
pub fn shadow_permutation(master: u64, attr: usize, n: usize) -> Vec<u32> {
    let mut rng = rng::derive_rng(master, &[stream::SHADOW_PLAN, attr as u64]);
    rng::permutation(n, &mut rng)
}

/// Which of the two fresh per-(fern, attribute) permutations to derive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermKind {
    /// Permutation applied to the real attribute values (regular term).
    Regular,
    /// Permutation applied to the shadow's values (shadow term).
    Shadow,
}

/// The within-out-of-bag permutation used for fern `k` and attribute
/// `attr`, over `len` out-of-bag slots. Published so independent checks can
/// reproduce the exact draws.
pub fn oob_permutation(master: u64, k: u32, attr: usize, kind: PermKind, len: usize) -> Vec<u32> {
    let tag = match kind {
        PermKind::Regular => stream::OOB_PERM,
        PermKind::Shadow => stream::SHADOW_OOB_PERM,
    };
    let mut rng = rng::derive_rng(master, &[tag, k as u64, attr as u64]);
    rng::permutation(len, &mut rng)
}

/// Global shadow permutations for all attributes of one run.
#[derive(Debug, Clone)]
pub struct ShadowPlan {
    perms: Vec<Vec<u32>>,
}

impl ShadowPlan {
    pub fn new(master: u64, n_attributes: usize, n_objects: usize) -> Self {
        ShadowPlan {
            perms: (0..n_attributes)
                .map(|a| shadow_permutation(master, a, n_objects))
                .collect(),
        }
    }

    pub fn permutation(&self, attr: usize) -> &[u32] {
        &self.perms[attr]
    }
}

/// Compute the model and its importance report with default options.
pub fn compute_importance(data: &Dataset, hyper: &Hyper) -> Result<(FernModel, ImportanceReport)> {
    compute_importance_with(data, hyper, &ImportanceOptions::default())
}

struct Contribution {
    attr: u32,
    regular: f64,
    shadow: f64,
}

/// Train the ensemble and accumulate importances in one pass.
pub fn compute_importance_with(
    data: &Dataset,
    hyper: &Hyper,
    options: &ImportanceOptions,
) -> Result<(FernModel, ImportanceReport)> {
    hyper.validate()?;
    let m = data.n_attributes();
    let plan = if options.with_shadow {
        Some(ShadowPlan::new(hyper.seed, m, data.n_objects()))
    } else {
        None
    };

    let results: Vec<(Fern, Vec<Contribution>)> = (0..hyper.ferns)
        .into_par_iter()
        .map_init(
            || Scratch::new(1usize << hyper.depth, data.n_classes()),
            |scratch, k| fern_importance(data, hyper, options, plan.as_ref(), k, scratch),
        )
        .collect();

    // Accumulate in fern order so sums are identical for any worker count.
    let mut regular_sum = vec![0.0f64; m];
    let mut shadow_sum = vec![0.0f64; m];
    let mut scans = vec![0u32; m];
    let mut ferns = Vec::with_capacity(results.len());
    for (fern, contributions) in results {
        for c in &contributions {
            let a = c.attr as usize;
            regular_sum[a] += c.regular;
            shadow_sum[a] += c.shadow;
            scans[a] += 1;
        }
        ferns.push(fern);
    }

    let mut attributes: Vec<AttrImportance> = (0..m)
        .map(|a| {
            let never_scanned = scans[a] == 0;
            let denom = f64::from(scans[a].max(1));
            AttrImportance {
                name: data.attribute_name(a).to_string(),
                index: a,
                regular: if never_scanned { 0.0 } else { regular_sum[a] / denom },
                shadow: if never_scanned { 0.0 } else { shadow_sum[a] / denom },
                scans: scans[a],
                selected: false,
                never_scanned,
            }
        })
        .collect();

    let max_shadow = if options.with_shadow {
        attributes
            .iter()
            .filter(|a| !a.never_scanned)
            .map(|a| a.shadow)
            .fold(None, |acc: Option<f64>, j| Some(acc.map_or(j, |x| x.max(j))))
    } else {
        None
    };
    if let Some(max_shadow) = max_shadow {
        for a in &mut attributes {
            a.selected = !a.never_scanned && a.regular > max_shadow;
        }
    }
    let low_scan_warning = attributes.iter().any(|a| a.scans < LOW_SCAN_THRESHOLD);

    let report = ImportanceReport {
        attributes,
        max_shadow,
        hyper: HyperEcho {
            depth: hyper.depth,
            ferns: hyper.ferns,
        },
        seed: hyper.seed,
        dataset_hash: data.content_hash(),
        low_scan_warning,
    };
    let model = FernModel {
        ferns,
        hyper: *hyper,
        schema: data.schema(),
    };
    Ok((model, report))
}

/// Reusable per-worker buffers for the shadow refit.
struct Scratch {
    n_classes: usize,
    leaf_class: Vec<u64>,
    leaf_total: Vec<u64>,
    touched: Vec<u32>,
    memo: Vec<f64>,
    memo_epoch: Vec<u32>,
    epoch: u32,
    leaves: Vec<u32>,
}

impl Scratch {
    fn new(n_leaves: usize, n_classes: usize) -> Self {
        Scratch {
            n_classes,
            leaf_class: vec![0; n_leaves * n_classes],
            leaf_total: vec![0; n_leaves],
            touched: Vec::new(),
            memo: vec![0.0; n_leaves * n_classes],
            memo_epoch: vec![0; n_leaves * n_classes],
            epoch: 0,
            leaves: Vec::new(),
        }
    }

    fn begin(&mut self) {
        for &leaf in &self.touched {
            let leaf = leaf as usize;
            self.leaf_total[leaf] = 0;
            self.leaf_class[leaf * self.n_classes..(leaf + 1) * self.n_classes].fill(0);
        }
        self.touched.clear();
        self.epoch += 1;
    }

    #[inline]
    fn add(&mut self, leaf: usize, class: usize, count: u64) {
        if self.leaf_total[leaf] == 0 {
            self.touched.push(leaf as u32);
        }
        self.leaf_total[leaf] += count;
        self.leaf_class[leaf * self.n_classes + class] += count;
    }

    /// Memoized refit score for one (leaf, class) cell.
    #[inline]
    fn score(&mut self, leaf: usize, class: usize, class_totals: &[u64], bag_size: u64) -> f64 {
        let idx = leaf * self.n_classes + class;
        if self.memo_epoch[idx] == self.epoch {
            return self.memo[idx];
        }
        let s = crate::fern::leaf_score(
            self.leaf_class[idx],
            self.leaf_total[leaf],
            class_totals[class],
            bag_size,
            self.n_classes as u64,
        );
        self.memo[idx] = s;
        self.memo_epoch[idx] = self.epoch;
        s
    }
}

/// Replace the bits of `leaf` that belong to criteria on one attribute with
/// the indicators of a substituted value.
#[inline]
fn substitute_bits(leaf: u32, mask: u32, bits: &[(u32, &SplitCriterion)], value: AttrValue) -> u32 {
    let mut out = leaf & !mask;
    for &(pos, criterion) in bits {
        if criterion.passes(value) {
            out |= 1 << pos;
        }
    }
    out
}

fn fern_importance(
    data: &Dataset,
    hyper: &Hyper,
    options: &ImportanceOptions,
    plan: Option<&ShadowPlan>,
    k: u32,
    scratch: &mut Scratch,
) -> (Fern, Vec<Contribution>) {
    let (fern, bag) = build_fern(data, hyper, k);
    if bag.oob_indices.is_empty() {
        return (fern, Vec::new());
    }
    let n = data.n_objects();
    let c = data.n_classes();
    let labels = data.labels();
    let oob = &bag.oob_indices;
    let n_oob = oob.len() as f64;

    // Leaf of every object under the original data; reused for all
    // substituted evaluations below.
    scratch.leaves.clear();
    scratch
        .leaves
        .extend((0..n).map(|i| leaf_index(&fern.trunk, data, i) as u32));

    let mut class_totals = vec![0u64; c];
    let mut bag_size = 0u64;
    for (i, &count) in bag.counts.iter().enumerate() {
        if count > 0 {
            class_totals[labels[i] as usize] += u64::from(count);
            bag_size += u64::from(count);
        }
    }

    // Baseline out-of-bag score sum; identical for every attribute.
    let baseline: f64 = oob
        .iter()
        .map(|&i| {
            fern.scores
                .score(scratch.leaves[i as usize] as usize, labels[i as usize] as usize)
        })
        .sum();

    let mut contributions = Vec::new();
    for attr in fern.trunk.distinct_attributes() {
        let bits: Vec<(u32, &SplitCriterion)> = fern
            .trunk
            .criteria
            .iter()
            .enumerate()
            .filter(|(_, criterion)| criterion.attr_index == attr)
            .map(|(pos, criterion)| (pos as u32, criterion))
            .collect();
        let mask: u32 = bits.iter().fold(0, |m, &(pos, _)| m | 1 << pos);

        // Regular importance: permute the attribute within the out-of-bag
        // set and measure the score drop on the fern's own table.
        let sigma = oob_permutation(hyper.seed, k, attr, PermKind::Regular, oob.len());
        let mut permuted: f64 = 0.0;
        for (j, &obj) in oob.iter().enumerate() {
            let donor = oob[sigma[j] as usize] as usize;
            let leaf = substitute_bits(
                scratch.leaves[obj as usize],
                mask,
                &bits,
                data.value(attr, donor),
            );
            permuted += fern.scores.score(leaf as usize, labels[obj as usize] as usize);
        }
        let regular = (baseline - permuted) / n_oob;

        let shadow = if let Some(plan) = plan {
            let shadow_perm = plan.permutation(attr);
            // Refit the score table on the same bag with the attribute
            // replaced by its global shadow. Only the bits on `attr`
            // change, so leaves are patched rather than recomputed.
            scratch.begin();
            for (i, &count) in bag.counts.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let value = data.value(attr, shadow_perm[i] as usize);
                let leaf = substitute_bits(scratch.leaves[i], mask, &bits, value);
                scratch.add(leaf as usize, labels[i] as usize, u64::from(count));
            }

            let mut carried: f64 = 0.0;
            match options.shadow_baseline {
                ShadowBaseline::ShadowValues => {
                    for &obj in oob.iter() {
                        let i = obj as usize;
                        let value = data.value(attr, shadow_perm[i] as usize);
                        let leaf = substitute_bits(scratch.leaves[i], mask, &bits, value);
                        carried +=
                            scratch.score(leaf as usize, labels[i] as usize, &class_totals, bag_size);
                    }
                }
                ShadowBaseline::OriginalValues => {
                    for &obj in oob.iter() {
                        let i = obj as usize;
                        carried += scratch.score(
                            scratch.leaves[i] as usize,
                            labels[i] as usize,
                            &class_totals,
                            bag_size,
                        );
                    }
                }
            }

            let sigma2 = oob_permutation(hyper.seed, k, attr, PermKind::Shadow, oob.len());
            let mut reshuffled: f64 = 0.0;
            for (j, &obj) in oob.iter().enumerate() {
                let donor = oob[sigma2[j] as usize] as usize;
                let value = data.value(attr, shadow_perm[donor] as usize);
                let leaf =
                    substitute_bits(scratch.leaves[obj as usize], mask, &bits, value);
                reshuffled +=
                    scratch.score(leaf as usize, labels[obj as usize] as usize, &class_totals, bag_size);
            }
            (carried - reshuffled) / n_oob
        } else {
            0.0
        };

        contributions.push(Contribution {
            attr: attr as u32,
            regular,
            shadow,
        });
    }
    (fern, contributions)
}
