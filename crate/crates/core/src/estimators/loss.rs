//! Complementary-label risk under the 0-1 loss.
//!
//! The complementary loss `ℓ̄(k, ŷ) = -(K-1) ℓ(k, ŷ) + Σ_j ℓ(j, ŷ)` has the
//! same expectation over uniform complementary labels as the ordinary loss
//! over true labels. For the 0-1 loss it collapses to `(K-1) 𝟙{ŷ = k}`, and
//! `1 - mean ℓ̄` is exactly `Â_comp`.

use crate::error::{Error, Result};
use crate::label_model::{LabelKind, Observation};

pub fn zero_one_loss(class: usize, prediction: usize) -> f64 {
    if prediction == class {
        0.0
    } else {
        1.0
    }
}

/// `-(K-1) ℓ(k, ŷ) + Σ_j ℓ(j, ŷ)` with the 0-1 loss, summed explicitly.
pub fn complementary_loss(class: usize, prediction: usize, num_options: usize) -> f64 {
    let km1 = (num_options - 1) as f64;
    let total: f64 = (0..num_options).map(|j| zero_one_loss(j, prediction)).sum();
    -km1 * zero_one_loss(class, prediction) + total
}

/// Empirical complementary risk over the complementary rows of `observations`.
pub fn complementary_risk(observations: &[Observation]) -> Result<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for obs in observations.iter().filter(|o| o.kind() == LabelKind::Complementary) {
        sum += complementary_loss(obs.asserted_index(), obs.prediction_index(), obs.num_options());
        n += 1;
    }
    if n == 0 {
        return Err(Error::insufficient("no complementary labels"));
    }
    Ok(sum / n as f64)
}
