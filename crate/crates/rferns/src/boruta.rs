//! Boruta-style all-relevant selection wrapper.
//!
//! Each iteration augments the data with explicit shadows (permuted copies)
//! of the still-undecided attributes, computes regular importance on the
//! augmented set, and awards a hit to every undecided attribute that beats
//! the best shadow. Hit counts are tested against Binomial(trials, 1/2):
//! attributes significantly above half are confirmed, significantly below
//! are rejected and dropped from later iterations. Confirmed attributes
//! stay in the data (they keep contributing interactions) but are no
//! longer tested.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::importance::{ferns_for_scans, ImportanceOptions};
use crate::model::Hyper;
use crate::rng::{self, stream};

/// Final state of one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Confirmed,
    Rejected,
    Tentative,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Confirmed => "Confirmed",
            Decision::Rejected => "Rejected",
            Decision::Tentative => "Tentative",
        })
    }
}

/// Per-attribute outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStatus {
    pub name: String,
    pub index: usize,
    pub status: Decision,
    /// Iterations in which the attribute beat the best shadow.
    pub hits: u32,
    /// Iterations in which the attribute was tested.
    pub trials: u32,
    /// Regular importance from the last iteration the attribute took part in.
    pub final_importance: f64,
}

/// Ensemble budget for the inner importance runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Fixed fern count.
    Ferns(u32),
    /// Target mean scans per attribute; the fern count is derived from the
    /// augmented attribute count each iteration.
    Scans(u32),
}

/// Wrapper configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BorutaConfig {
    pub max_iterations: u32,
    /// Two-sided significance level for the hit-count test.
    pub alpha: f64,
    /// Bonferroni-correct alpha over the currently tentative attributes.
    pub bonferroni: bool,
    pub depth: u32,
    pub budget: Budget,
    pub seed: u64,
}

impl Default for BorutaConfig {
    fn default() -> Self {
        BorutaConfig {
            max_iterations: 100,
            alpha: 0.01,
            bonferroni: true,
            depth: 5,
            budget: Budget::Scans(100),
            seed: 0,
        }
    }
}

impl BorutaConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        match self.budget {
            Budget::Ferns(k) if k < 1 => {
                Err(Error::InvalidConfig("need at least 1 fern".into()))
            }
            Budget::Scans(s) if s < 1 => {
                Err(Error::InvalidConfig("need at least 1 scan".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Result of a wrapper run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorutaResult {
    pub statuses: Vec<FeatureStatus>,
    pub iterations_run: u32,
    /// Set when the run stopped early on an importance-provider failure;
    /// the statuses then reflect the completed iterations.
    pub aborted: Option<String>,
}

impl BorutaResult {
    pub fn count(&self, decision: Decision) -> usize {
        self.statuses.iter().filter(|s| s.status == decision).count()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per attribute: name,status,hits,trials,final_importance.
    pub fn write_csv(&self, out: &mut dyn std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "status", "hits", "trials", "final_importance"])?;
        for s in &self.statuses {
            w.write_record([
                s.name.as_str(),
                &s.status.to_string(),
                &s.hits.to_string(),
                &s.trials.to_string(),
                &s.final_importance.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Append one freshly permuted shadow per attribute; shadow a is named
/// after attribute a with a "_shadow" suffix. Labels are unchanged.
pub fn add_shadows(data: &Dataset, seed: u64) -> Dataset {
    let m = data.n_attributes();
    let n = data.n_objects();
    let mut names: Vec<String> = data.attribute_names().to_vec();
    let mut columns: Vec<_> = (0..m).map(|a| data.column(a).clone()).collect();
    for a in 0..m {
        let mut rng = rng::derive_rng(seed, &[stream::SHADOW_COLUMN, a as u64]);
        let perm = rng::permutation(n, &mut rng);
        columns.push(data.column(a).permuted(&perm));
        names.push(format!("{}_shadow", data.attribute_name(a)));
    }
    Dataset::with_label_name(
        names,
        columns,
        data.labels().to_vec(),
        data.class_names().to_vec(),
        data.label_name().to_string(),
    )
    .expect("augmenting a valid dataset keeps it valid")
}

/// P[X >= k] for X ~ Binomial(n, 1/2), exact to f64 rounding.
pub(crate) fn binomial_tail_ge(n: u32, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln_fact = ln_factorials(n as usize);
    let ln2 = std::f64::consts::LN_2;
    let mut tail = 0.0;
    // Sum the smaller terms first (i near n) for accuracy.
    for i in (k..=n).rev() {
        let ln_p = ln_fact[n as usize]
            - ln_fact[i as usize]
            - ln_fact[(n - i) as usize]
            - f64::from(n) * ln2;
        tail += ln_p.exp();
    }
    tail.min(1.0)
}

/// P[X <= k] for X ~ Binomial(n, 1/2).
pub(crate) fn binomial_tail_le(n: u32, k: u32) -> f64 {
    if k >= n {
        return 1.0;
    }
    // Symmetry of the p = 1/2 binomial.
    binomial_tail_ge(n, n - k)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Run the wrapper. Statuses are returned for every original attribute.
pub fn boruta_run(data: &Dataset, cfg: &BorutaConfig) -> Result<BorutaResult> {
    cfg.validate()?;
    let m = data.n_attributes();
    let n = data.n_objects();
    let mut statuses: Vec<FeatureStatus> = (0..m)
        .map(|a| FeatureStatus {
            name: data.attribute_name(a).to_string(),
            index: a,
            status: Decision::Tentative,
            hits: 0,
            trials: 0,
            final_importance: 0.0,
        })
        .collect();

    let mut iterations_run = 0u32;
    let mut aborted = None;

    for iter in 1..=cfg.max_iterations {
        let tentative: Vec<usize> = statuses
            .iter()
            .filter(|s| s.status == Decision::Tentative)
            .map(|s| s.index)
            .collect();
        if tentative.is_empty() {
            break;
        }
        // Active originals (tentative and confirmed) plus fresh shadows of
        // the tentative ones. Rejected attributes and their shadows are gone
        // for good.
        let active: Vec<usize> = statuses
            .iter()
            .filter(|s| s.status != Decision::Rejected)
            .map(|s| s.index)
            .collect();
        let mut names: Vec<String> = Vec::with_capacity(active.len() + tentative.len());
        let mut columns = Vec::with_capacity(active.len() + tentative.len());
        for &a in &active {
            names.push(data.attribute_name(a).to_string());
            columns.push(data.column(a).clone());
        }
        for &a in &tentative {
            let mut rng =
                rng::derive_rng(cfg.seed, &[stream::SHADOW_COLUMN, u64::from(iter), a as u64]);
            let perm = rng::permutation(n, &mut rng);
            columns.push(data.column(a).permuted(&perm));
            names.push(format!("{}_shadow", data.attribute_name(a)));
        }
        let augmented = Dataset::with_label_name(
            names,
            columns,
            data.labels().to_vec(),
            data.class_names().to_vec(),
            data.label_name().to_string(),
        )?;

        let m_aug = augmented.n_attributes();
        let ferns = match cfg.budget {
            Budget::Ferns(k) => k,
            Budget::Scans(s) => ferns_for_scans(m_aug, cfg.depth, s),
        };
        let hyper = Hyper::new(
            cfg.depth,
            ferns,
            rng::mix(cfg.seed, &[stream::BORUTA_ITER, u64::from(iter)]),
        );
        let options = ImportanceOptions {
            with_shadow: false,
            ..Default::default()
        };
        let report = match crate::importance::compute_importance_with(&augmented, &hyper, &options)
        {
            Ok((_, report)) => report,
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        };
        iterations_run = iter;

        let shadow_max = report.attributes[active.len()..]
            .iter()
            .filter(|a| !a.never_scanned)
            .map(|a| a.regular)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |x| x.max(v))));
        for (pos, &a) in active.iter().enumerate() {
            statuses[a].final_importance = report.attributes[pos].regular;
        }
        let Some(shadow_max) = shadow_max else {
            // No shadow was ever scanned; the comparison is undefined, so
            // the iteration yields no trials.
            continue;
        };

        for (pos, &a) in active.iter().enumerate() {
            if statuses[a].status != Decision::Tentative {
                continue;
            }
            statuses[a].trials += 1;
            if report.attributes[pos].regular > shadow_max {
                statuses[a].hits += 1;
            }
        }

        // Two-sided test at level alpha (per tail alpha/2), optionally
        // Bonferroni-corrected over the attributes still being tested.
        let level = if cfg.bonferroni {
            cfg.alpha / tentative.len() as f64
        } else {
            cfg.alpha
        };
        let per_tail = level / 2.0;
        for &a in &tentative {
            let s = &mut statuses[a];
            if binomial_tail_ge(s.trials, s.hits) < per_tail {
                s.status = Decision::Confirmed;
            } else if binomial_tail_le(s.trials, s.hits) < per_tail {
                s.status = Decision::Rejected;
            }
        }
    }

    Ok(BorutaResult {
        statuses,
        iterations_run,
        aborted,
    })
}
