//! Candidate selection on a complementary-label validation set.
//!
//! Both fitness signals order candidates identically because the transform
//! is strictly increasing and affine. They differ only in magnitude, and the
//! transformed score's spread is `(K - 1)` times wider.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::complementary_transform;
use crate::label_model::{LabelKind, Observation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitnessCandidate {
    pub id: String,
    /// One prediction index per validation item, aligned with the observations.
    pub predictions: Vec<usize>,
}

impl FitnessCandidate {
    pub fn new(id: impl Into<String>, predictions: Vec<usize>) -> Self {
        Self {
            id: id.into(),
            predictions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessKind {
    RawQ,
    Transformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen_id: String,
    pub fitness_kind: FitnessKind,
    pub scores: BTreeMap<String, f64>,
    pub tie_broken: bool,
}

fn check_aligned(candidate: &FitnessCandidate, observations: &[Observation]) -> Result<()> {
    if observations.is_empty() {
        return Err(Error::insufficient("no complementary observations"));
    }
    if candidate.predictions.len() != observations.len() {
        return Err(Error::domain(format!(
            "candidate {} has {} predictions for {} observations",
            candidate.id,
            candidate.predictions.len(),
            observations.len()
        )));
    }
    for (i, (obs, &pred)) in observations.iter().zip(&candidate.predictions).enumerate() {
        if obs.kind() != LabelKind::Complementary {
            return Err(Error::domain(format!("observation {i} is not complementary")));
        }
        if pred >= obs.num_options() {
            return Err(Error::domain(format!(
                "candidate {} prediction {pred} out of range at item {i}",
                candidate.id
            )));
        }
    }
    Ok(())
}

/// Fraction of items where the candidate avoids the complementary label.
pub fn complementary_accuracy(candidate: &FitnessCandidate, observations: &[Observation]) -> Result<f64> {
    check_aligned(candidate, observations)?;
    let avoided = observations
        .iter()
        .zip(&candidate.predictions)
        .filter(|(obs, &pred)| pred != obs.asserted_index())
        .count();
    Ok(avoided as f64 / observations.len() as f64)
}

/// `(K-1) q̂ - (K-2)`, unclamped.
pub fn transformed_complementary_accuracy(
    candidate: &FitnessCandidate,
    observations: &[Observation],
    num_options: usize,
) -> Result<f64> {
    if num_options < 2 {
        return Err(Error::domain("need at least 2 options"));
    }
    if let Some(obs) = observations.iter().find(|o| o.num_options() != num_options) {
        return Err(Error::domain(format!(
            "observation {} has k={}, expected {num_options}",
            obs.item_id,
            obs.num_options()
        )));
    }
    Ok(complementary_transform(complementary_accuracy(candidate, observations)?, num_options))
}

/// Highest-scoring candidate; ties go to the lexicographically smallest id.
pub fn select_best(
    candidates: &[FitnessCandidate],
    observations: &[Observation],
    kind: FitnessKind,
    num_options: usize,
) -> Result<SelectionResult> {
    if candidates.is_empty() {
        return Err(Error::domain("no candidates"));
    }
    let scored: Vec<(String, f64)> = candidates
        .par_iter()
        .map(|c| {
            let s = match kind {
                FitnessKind::RawQ => {
                    transformed_complementary_accuracy(c, observations, num_options)?;
                    complementary_accuracy(c, observations)?
                }
                FitnessKind::Transformed => transformed_complementary_accuracy(c, observations, num_options)?,
            };
            Ok((c.id.clone(), s))
        })
        .collect::<Result<_>>()?;

    let mut scores = BTreeMap::new();
    for (id, s) in &scored {
        if scores.insert(id.clone(), *s).is_some() {
            return Err(Error::domain(format!("duplicate candidate id {id}")));
        }
    }
    let best = scored.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    // BTreeMap iterates in id order, so the first hit is the smallest id.
    let mut leaders = scores.iter().filter(|(_, &s)| s == best);
    let chosen_id = leaders.next().map(|(id, _)| id.clone()).unwrap_or_default();
    let tie_broken = leaders.next().is_some();
    Ok(SelectionResult {
        chosen_id,
        fitness_kind: kind,
        scores,
        tie_broken,
    })
}
