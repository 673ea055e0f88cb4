//! Items, labels, observations, and the partitioned annotation protocol.
//!
//! Indices are 0-based throughout. An item is routed to one annotator drawn
//! uniformly from the `K` classes; the annotator either confirms its class
//! (an ordinary label) or rejects it (a complementary label). Conditional on
//! a rejection the rejected index is uniform over the `K - 1` wrong classes,
//! which is the assumption every complementary estimator relies on.
//!
//! Re-annotating an item is not deduplicated: [`summarize`] treats every
//! observation as an independent row.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Ordinary,
    Complementary,
}

impl LabelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelKind::Ordinary => "ordinary",
            LabelKind::Complementary => "complementary",
        }
    }
}

fn check_options(num_options: usize) -> Result<()> {
    if num_options < 2 {
        return Err(Error::domain(format!("need at least 2 options, got {num_options}")));
    }
    Ok(())
}

fn check_index(what: &str, index: usize, num_options: usize) -> Result<()> {
    if index >= num_options {
        return Err(Error::domain(format!(
            "{what} {index} out of range for {num_options} options"
        )));
    }
    Ok(())
}

fn check_permutation(perm: &[usize], num_options: usize) -> Result<()> {
    if perm.len() != num_options {
        return Err(Error::domain(format!(
            "permutation has {} entries, expected {num_options}",
            perm.len()
        )));
    }
    let mut seen = vec![false; num_options];
    for &p in perm {
        if p >= num_options || seen[p] {
            return Err(Error::domain("permutation is not a bijection"));
        }
        seen[p] = true;
    }
    Ok(())
}

/// One multiple-choice item together with the evaluated system's answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationItem {
    pub id: String,
    num_options: usize,
    truth_index: Option<usize>,
    prediction_index: usize,
    /// `permutation[old] = new` for every shuffle applied so far.
    permutation: Option<Vec<usize>>,
}

impl EvaluationItem {
    pub fn new(
        id: impl Into<String>,
        num_options: usize,
        truth_index: Option<usize>,
        prediction_index: usize,
    ) -> Result<Self> {
        check_options(num_options)?;
        if let Some(t) = truth_index {
            check_index("truth index", t, num_options)?;
        }
        check_index("prediction index", prediction_index, num_options)?;
        Ok(Self {
            id: id.into(),
            num_options,
            truth_index,
            prediction_index,
            permutation: None,
        })
    }

    pub fn num_options(&self) -> usize {
        self.num_options
    }

    pub fn truth_index(&self) -> Option<usize> {
        self.truth_index
    }

    pub fn prediction_index(&self) -> usize {
        self.prediction_index
    }

    pub fn permutation(&self) -> Option<&[usize]> {
        self.permutation.as_deref()
    }

    pub fn is_correct(&self) -> Option<bool> {
        self.truth_index.map(|t| t == self.prediction_index)
    }

    fn require_truth(&self) -> Result<usize> {
        self.truth_index
            .ok_or_else(|| Error::Protocol(format!("item {} has no ground-truth index", self.id)))
    }
}

/// A single annotated row: either an ordinary label (indicator `Z`) or a
/// complementary label (indicator `W`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub item_id: String,
    kind: LabelKind,
    asserted_index: usize,
    prediction_index: usize,
    indicator: bool,
    num_options: usize,
}

impl Observation {
    /// Builds an observation, deriving the indicator from the prediction.
    pub fn new(
        item_id: impl Into<String>,
        kind: LabelKind,
        asserted_index: usize,
        prediction_index: usize,
        num_options: usize,
    ) -> Result<Self> {
        check_options(num_options)?;
        check_index("label index", asserted_index, num_options)?;
        check_index("prediction index", prediction_index, num_options)?;
        let indicator = match kind {
            LabelKind::Ordinary => prediction_index == asserted_index,
            LabelKind::Complementary => prediction_index != asserted_index,
        };
        Ok(Self {
            item_id: item_id.into(),
            kind,
            asserted_index,
            prediction_index,
            indicator,
            num_options,
        })
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn asserted_index(&self) -> usize {
        self.asserted_index
    }

    pub fn prediction_index(&self) -> usize {
        self.prediction_index
    }

    /// `Z` for ordinary rows, `W` for complementary rows.
    pub fn indicator(&self) -> bool {
        self.indicator
    }

    pub fn num_options(&self) -> usize {
        self.num_options
    }
}

/// Sufficient statistics for every estimator and bound in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CountSummary {
    n_ordinary: u64,
    s_ordinary: u64,
    n_complementary: u64,
    s_complementary: u64,
    num_options: usize,
}

impl CountSummary {
    pub fn new(
        n_ordinary: u64,
        s_ordinary: u64,
        n_complementary: u64,
        s_complementary: u64,
        num_options: usize,
    ) -> Result<Self> {
        check_options(num_options)?;
        if s_ordinary > n_ordinary {
            return Err(Error::domain(format!(
                "ordinary correct count {s_ordinary} exceeds ordinary size {n_ordinary}"
            )));
        }
        if s_complementary > n_complementary {
            return Err(Error::domain(format!(
                "complementary count {s_complementary} exceeds complementary size {n_complementary}"
            )));
        }
        Ok(Self {
            n_ordinary,
            s_ordinary,
            n_complementary,
            s_complementary,
            num_options,
        })
    }

    pub fn empty(num_options: usize) -> Result<Self> {
        Self::new(0, 0, 0, 0, num_options)
    }

    pub fn n_ordinary(&self) -> u64 {
        self.n_ordinary
    }
    pub fn s_ordinary(&self) -> u64 {
        self.s_ordinary
    }
    pub fn n_complementary(&self) -> u64 {
        self.n_complementary
    }
    pub fn s_complementary(&self) -> u64 {
        self.s_complementary
    }
    pub fn num_options(&self) -> usize {
        self.num_options
    }

    /// `N = n_o + n_c`.
    pub fn total(&self) -> u64 {
        self.n_ordinary + self.n_complementary
    }

    /// `T_o = n_o - S_o`.
    pub fn t_ordinary(&self) -> u64 {
        self.n_ordinary - self.s_ordinary
    }

    /// `T_c = n_c - S_c`.
    pub fn t_complementary(&self) -> u64 {
        self.n_complementary - self.s_complementary
    }

    /// `S_o / n_o`, if there are ordinary rows.
    pub fn ordinary_fraction(&self) -> Option<f64> {
        (self.n_ordinary > 0).then(|| self.s_ordinary as f64 / self.n_ordinary as f64)
    }

    /// `q̂ = S_c / n_c`, if there are complementary rows.
    pub fn q_hat(&self) -> Option<f64> {
        (self.n_complementary > 0).then(|| self.s_complementary as f64 / self.n_complementary as f64)
    }

    /// Adds one observation's contribution.
    pub fn record(&mut self, kind: LabelKind, indicator: bool) {
        match kind {
            LabelKind::Ordinary => {
                self.n_ordinary += 1;
                self.s_ordinary += indicator as u64;
            }
            LabelKind::Complementary => {
                self.n_complementary += 1;
                self.s_complementary += indicator as u64;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotatorRouting {
    /// Each item goes to an annotator drawn uniformly from the `K` classes.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub num_options: usize,
    pub seed: u64,
    pub annotator_routing: AnnotatorRouting,
}

impl ProtocolConfig {
    pub fn new(num_options: usize, seed: u64) -> Result<Self> {
        check_options(num_options)?;
        Ok(Self {
            num_options,
            seed,
            annotator_routing: AnnotatorRouting::Uniform,
        })
    }
}

/// Relabels truth and prediction through `perm` (`perm[old] = new`).
pub fn apply_permutation(item: &EvaluationItem, perm: &[usize]) -> Result<EvaluationItem> {
    check_permutation(perm, item.num_options)?;
    let composed = match &item.permutation {
        Some(prev) => prev.iter().map(|&p| perm[p]).collect(),
        None => perm.to_vec(),
    };
    Ok(EvaluationItem {
        id: item.id.clone(),
        num_options: item.num_options,
        truth_index: item.truth_index.map(|t| perm[t]),
        prediction_index: perm[item.prediction_index],
        permutation: Some(composed),
    })
}

/// Shuffles the options uniformly and records the permutation.
pub fn shuffle_options<R: Rng + ?Sized>(item: &EvaluationItem, rng: &mut R) -> Result<EvaluationItem> {
    item.require_truth()?;
    let mut perm: Vec<usize> = (0..item.num_options).collect();
    perm.shuffle(rng);
    apply_permutation(item, &perm)
}

/// Draws a wrong index uniformly from the `K - 1` classes other than `truth_index`.
pub fn derive_complementary<R: Rng + ?Sized>(
    truth_index: usize,
    num_options: usize,
    rng: &mut R,
) -> Result<usize> {
    check_options(num_options)?;
    check_index("truth index", truth_index, num_options)?;
    let draw = rng.gen_range(0..num_options - 1);
    Ok(if draw >= truth_index { draw + 1 } else { draw })
}

/// Asks the annotator responsible for `annotator_class` about `item`.
///
/// A "yes" yields an ordinary observation, a "no" a complementary one.
pub fn annotate(item: &EvaluationItem, annotator_class: usize) -> Result<Observation> {
    let truth = item.require_truth()?;
    check_index("annotator class", annotator_class, item.num_options)?;
    let kind = if annotator_class == truth {
        LabelKind::Ordinary
    } else {
        LabelKind::Complementary
    };
    Observation::new(
        item.id.clone(),
        kind,
        annotator_class,
        item.prediction_index,
        item.num_options,
    )
}

/// Routes `item` to a uniformly drawn annotator.
///
/// This is also the protocol when ground truth is unknown in advance: a
/// uniformly drawn candidate is shown to an annotator who verifies whether
/// it happens to be correct.
pub fn route_and_annotate<R: Rng + ?Sized>(item: &EvaluationItem, rng: &mut R) -> Result<Observation> {
    item.require_truth()?;
    let annotator = rng.gen_range(0..item.num_options);
    annotate(item, annotator)
}

pub fn ordinary_observation(item: &EvaluationItem) -> Result<Observation> {
    let truth = item.require_truth()?;
    annotate(item, truth)
}

pub fn complementary_observation<R: Rng + ?Sized>(
    item: &EvaluationItem,
    rng: &mut R,
) -> Result<Observation> {
    let truth = item.require_truth()?;
    let wrong = derive_complementary(truth, item.num_options, rng)?;
    annotate(item, wrong)
}

/// One ordinary row (when `keep_ordinary`) plus a complementary row for
/// every one of the `K - 1` wrong classes.
pub fn exhaustive_split(item: &EvaluationItem, keep_ordinary: bool) -> Result<Vec<Observation>> {
    let truth = item.require_truth()?;
    let mut out = Vec::with_capacity(item.num_options);
    if keep_ordinary {
        out.push(annotate(item, truth)?);
    }
    for class in (0..item.num_options).filter(|&c| c != truth) {
        out.push(annotate(item, class)?);
    }
    Ok(out)
}

/// Tallies observations into a [`CountSummary`].
///
/// `num_options` supplies `K` for empty input; every observation must agree with it.
pub fn summarize(observations: &[Observation], num_options: usize) -> Result<CountSummary> {
    let mut summary = CountSummary::empty(num_options)?;
    for obs in observations {
        if obs.num_options != num_options {
            return Err(Error::domain(format!(
                "observation {} has {} options, expected {num_options}",
                obs.item_id, obs.num_options
            )));
        }
        summary.record(obs.kind, obs.indicator);
    }
    Ok(summary)
}

/// Splits observations into a weight-estimation part and an estimation part.
///
/// The first `round(fraction * n)` rows of each label kind (in input order)
/// form the weight part. A weight estimated on the first part is independent
/// of the second, so a mixture formed on the second part stays unbiased.
pub fn split_for_weight(
    observations: &[Observation],
    fraction: f64,
    num_options: usize,
) -> Result<(CountSummary, CountSummary)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::domain(format!("weight split fraction {fraction} not in (0,1)")));
    }
    let full = summarize(observations, num_options)?;
    let take_o = (fraction * full.n_ordinary as f64).round() as u64;
    let take_c = (fraction * full.n_complementary as f64).round() as u64;
    let mut weight = CountSummary::empty(num_options)?;
    let mut rest = CountSummary::empty(num_options)?;
    for obs in observations {
        let target = match obs.kind {
            LabelKind::Ordinary if weight.n_ordinary < take_o => &mut weight,
            LabelKind::Complementary if weight.n_complementary < take_c => &mut weight,
            _ => &mut rest,
        };
        target.record(obs.kind, obs.indicator);
    }
    Ok((weight, rest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionMode {
    /// Each item goes to one uniformly drawn annotator; set sizes are random.
    Routed,
    /// The first `n_ordinary` items get ordinary labels, the next
    /// `n_complementary` get one uniformly drawn complementary label each.
    Forced { n_ordinary: usize, n_complementary: usize },
    /// Every item yields all `K - 1` complementary labels, plus its ordinary
    /// label when `keep_ordinary` is set.
    Exhaustive { keep_ordinary: bool },
}

/// An observation produced by [`collect`], with the option shuffle applied to its item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collected {
    pub observation: Observation,
    pub permutation: Vec<usize>,
}

/// Runs the full labeling protocol over ground-truthed items.
///
/// Item `i` draws from stream `i` of `config.seed`, so the output is a pure
/// function of `(items, config)`.
pub fn collect(
    items: &[EvaluationItem],
    config: &ProtocolConfig,
    mode: CollectionMode,
) -> Result<Vec<Collected>> {
    if let CollectionMode::Forced {
        n_ordinary,
        n_complementary,
    } = mode
    {
        if items.len() < n_ordinary + n_complementary {
            return Err(Error::insufficient(format!(
                "forced split needs {} items, got {}",
                n_ordinary + n_complementary,
                items.len()
            )));
        }
    }
    let mut out = Vec::new();
    for (idx, item) in items.iter().enumerate() {
        if item.num_options != config.num_options {
            return Err(Error::domain(format!(
                "item {} has {} options, protocol expects {}",
                item.id, item.num_options, config.num_options
            )));
        }
        let mut rng = substream(config.seed, idx as u64);
        let shuffled = shuffle_options(item, &mut rng)?;
        let perm = shuffled.permutation.clone().unwrap_or_default();
        let observations = match mode {
            CollectionMode::Routed => vec![route_and_annotate(&shuffled, &mut rng)?],
            CollectionMode::Forced {
                n_ordinary,
                n_complementary,
            } => {
                if idx < n_ordinary {
                    vec![ordinary_observation(&shuffled)?]
                } else if idx < n_ordinary + n_complementary {
                    vec![complementary_observation(&shuffled, &mut rng)?]
                } else {
                    break;
                }
            }
            CollectionMode::Exhaustive { keep_ordinary } => exhaustive_split(&shuffled, keep_ordinary)?,
        };
        out.extend(observations.into_iter().map(|observation| Collected {
            observation,
            permutation: perm.clone(),
        }));
    }
    Ok(out)
}
