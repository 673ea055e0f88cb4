//! Point estimators of top-1 accuracy and their variances.
//!
//! All estimators work from a [`CountSummary`]. Write `Â_ord = S_o / n_o`
//! and `q̂ = S_c / n_c`; under uniform complementary labels
//! `E[q̂] = q(A) = (A + K - 2) / (K - 1)`, so the affine inverse
//! `Â_comp = (K - 1) q̂ - (K - 2)` is unbiased. `Â_comp` is never clamped;
//! [`Estimate::clamped_value`] carries the `[0, 1]` companion.
//!
//! With `K = 2` a complementary label names the only other option, so
//! `Â_comp = q̂` and the planner returns `n_c = n_o`.

mod ivw;
mod loss;
mod ml;

pub use ivw::{
    default_pilot, estimate_ivw, estimate_ivw_held_out, estimate_ivw_plugin, fixed_weight,
    ivw_weight_closed_form, ivw_weight_plugin, plugin_variances, WeightEstimate, WeightSource,
};
pub use loss::{complementary_loss, complementary_risk, zero_one_loss};
pub use ml::{
    estimate_ml, log_likelihood, ml_quadratic_root, ml_standard_error, observed_information_se,
    one_step_newton, score, NewtonCurvature,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_model::CountSummary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ordinary,
    Complementary,
    Ivw,
    IvwFixed(f64),
    Ml,
    OneStepNewton,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ordinary => write!(f, "ordinary"),
            Method::Complementary => write!(f, "complementary"),
            Method::Ivw => write!(f, "ivw"),
            Method::IvwFixed(w) => write!(f, "ivw_fixed({w})"),
            Method::Ml => write!(f, "ml"),
            Method::OneStepNewton => write!(f, "one_step_newton"),
        }
    }
}

/// Flags attached to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateNote {
    /// The raw value lies outside `[0, 1]`.
    OutOfRange,
    /// One label set was empty; the other arm's estimator was returned.
    SingleArmFallback,
    /// Both plug-in variances were zero; the closed-form weight was used.
    DegenerateWeight,
    /// The weight came from the same data, so the mixture is consistent but
    /// not exactly unbiased.
    SameDataWeight,
    /// `K = 2`: complementary labels carry the same information as ordinary ones.
    TwoOptions,
    /// Closed-form and observed-information standard errors differ by more than 10%.
    StdErrorDiscrepancy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub method: Method,
    /// Raw estimate; may fall outside `[0, 1]` for complementary-based methods.
    pub value: f64,
    /// Plug-in standard error.
    pub std_error: f64,
    pub clamped_value: f64,
    /// Complementary avoidance rate `q̂` when the estimate used complementary rows.
    pub raw_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightEstimate>,
    pub notes: Vec<EstimateNote>,
}

impl Estimate {
    pub(crate) fn new(method: Method, value: f64, std_error: f64, raw_q: Option<f64>) -> Self {
        let mut notes = Vec::new();
        if !(0.0..=1.0).contains(&value) {
            notes.push(EstimateNote::OutOfRange);
        }
        Self {
            method,
            value,
            std_error,
            clamped_value: value.clamp(0.0, 1.0),
            raw_q,
            weight: None,
            notes,
        }
    }

    pub(crate) fn note(mut self, note: EstimateNote) -> Self {
        if !self.notes.contains(&note) {
            self.notes.push(note);
            self.notes.sort();
        }
        self
    }

    pub fn has_note(&self, note: EstimateNote) -> bool {
        self.notes.contains(&note)
    }
}

pub(crate) fn check_accuracy(accuracy: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::domain(format!("accuracy {accuracy} not in [0,1]")));
    }
    Ok(())
}

pub(crate) fn check_options(num_options: usize) -> Result<()> {
    if num_options < 2 {
        return Err(Error::domain(format!("need at least 2 options, got {num_options}")));
    }
    Ok(())
}

/// `q(A) = (A + K - 2) / (K - 1)`, the probability of avoiding a uniform
/// complementary label.
pub fn avoidance_probability(accuracy: f64, num_options: usize) -> f64 {
    let k = num_options as f64;
    (accuracy + k - 2.0) / (k - 1.0)
}

/// `(K - 1) q - (K - 2)`.
pub fn complementary_transform(q: f64, num_options: usize) -> f64 {
    let k = num_options as f64;
    (k - 1.0) * q - (k - 2.0)
}

pub fn estimate_ordinary(summary: &CountSummary) -> Result<Estimate> {
    let a = summary
        .ordinary_fraction()
        .ok_or_else(|| Error::insufficient("no ordinary labels"))?;
    let se = (a * (1.0 - a) / summary.n_ordinary() as f64).sqrt();
    Ok(Estimate::new(Method::Ordinary, a, se, None))
}

pub fn estimate_complementary(summary: &CountSummary) -> Result<Estimate> {
    let q = summary
        .q_hat()
        .ok_or_else(|| Error::insufficient("no complementary labels"))?;
    let k = summary.num_options();
    let km1 = (k - 1) as f64;
    let value = complementary_transform(q, k);
    let se = (km1 * km1 * q * (1.0 - q) / summary.n_complementary() as f64).sqrt();
    let est = Estimate::new(Method::Complementary, value, se, Some(q));
    Ok(if k == 2 { est.note(EstimateNote::TwoOptions) } else { est })
}

/// `A (1 - A) / n_o`.
pub fn variance_ordinary(accuracy: f64, n_ordinary: u64) -> Result<f64> {
    check_accuracy(accuracy)?;
    if n_ordinary == 0 {
        return Err(Error::insufficient("n_ordinary must be positive"));
    }
    Ok(accuracy * (1.0 - accuracy) / n_ordinary as f64)
}

/// `Var(Â_comp) = (A + K - 2)(1 - A) / n_c`.
pub fn variance_complementary(accuracy: f64, num_options: usize, n_complementary: u64) -> Result<f64> {
    check_accuracy(accuracy)?;
    check_options(num_options)?;
    if n_complementary == 0 {
        return Err(Error::insufficient("n_complementary must be positive"));
    }
    let k = num_options as f64;
    Ok((accuracy + k - 2.0) * (1.0 - accuracy) / n_complementary as f64)
}

/// `Var(Â_comp) / Var(Â_ord) = (A + K - 2) n_o / (A n_c)`.
pub fn variance_ratio(accuracy: f64, num_options: usize, n_ordinary: u64, n_complementary: u64) -> Result<f64> {
    check_accuracy(accuracy)?;
    check_options(num_options)?;
    if accuracy == 0.0 {
        return Err(Error::InfiniteRatio);
    }
    if n_ordinary == 0 || n_complementary == 0 {
        return Err(Error::insufficient("both sample sizes must be positive"));
    }
    let k = num_options as f64;
    Ok((accuracy + k - 2.0) * n_ordinary as f64 / (accuracy * n_complementary as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub required_n_complementary: u64,
    pub exact_real_value: f64,
    pub assumed_accuracy: f64,
    pub num_options: usize,
    pub n_ordinary: u64,
}

/// Complementary sample size whose variance matches `n_o` ordinary labels:
/// `n_c = (1 + (K - 2) / A) n_o`, rounded up.
pub fn plan_complementary_size(accuracy: f64, num_options: usize, n_ordinary: u64) -> Result<PlanResult> {
    check_accuracy(accuracy)?;
    check_options(num_options)?;
    if accuracy == 0.0 {
        return Err(Error::Unplannable);
    }
    if n_ordinary == 0 {
        return Err(Error::insufficient("n_ordinary must be positive"));
    }
    let k = num_options as f64;
    let exact = (accuracy + k - 2.0) * n_ordinary as f64 / accuracy;
    // Absorb representation error so integral results are not bumped up by one.
    let required = (exact * (1.0 - 1e-12)).ceil() as u64;
    Ok(PlanResult {
        required_n_complementary: required,
        exact_real_value: exact,
        assumed_accuracy: accuracy,
        num_options,
        n_ordinary,
    })
}
