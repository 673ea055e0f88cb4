//! Finite-sample deviation radii at confidence `1 - δ`.
//!
//! Three families are provided:
//!
//! * [`comp_deviation_bound`]: `|Â_comp - A| ≤ (K-1) min{H, EB}` with the
//!   Hoeffding radius `H = sqrt(log(2/δ) / (2 n_c))` and the empirical
//!   Bernstein radius `EB = sqrt(2 q̂(1-q̂) log(4/δ) / (n_c-1)) + 7 log(4/δ) / (3(n_c-1))`.
//!   The `(n_c - 1)` under the square root is the conservative choice; a
//!   bare `n_c` there gives a slightly tighter but differently stated form.
//! * [`mixture_union_bound`]: per-arm radii at `δ_o` and `δ_c` combined by
//!   the triangle inequality. Valid for any weight, including one estimated
//!   from the same data.
//! * [`bernstein_mixture_bound`]: `sqrt(2 v log(2/δ)) + c log(2/δ)` for
//!   `Â_mix` with `v` its variance and `c` the largest per-row range. Valid
//!   only for a weight fixed before sampling.
//!
//! Radii are never truncated at 1; [`BoundReport::vacuous`] flags radii
//! above 1. Weight grids and cross-fitting are not implemented; for a
//! data-dependent weight use the union bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{avoidance_probability, ivw_weight_plugin, plugin_variances};
use crate::label_model::CountSummary;

pub const HOEFFDING: &str = "hoeffding";
pub const EMPIRICAL_BERNSTEIN: &str = "empirical_bernstein";
pub const UNION_HOEFFDING: &str = "union_hoeffding";
pub const UNION_BERNSTEIN: &str = "union_bernstein";
pub const BERNSTEIN_MIXTURE: &str = "bernstein_mixture";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityNote {
    /// The guarantee holds because the weight was fixed before sampling.
    FixedWeightValid,
    /// The weight was estimated from the same data; this radius carries no
    /// guarantee, use the union bound instead.
    DataDependentWeightUseUnionBound,
    /// The guarantee holds for any weight.
    AnyWeightValid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub delta: f64,
    /// Minimum over `branches`.
    pub radius: f64,
    pub branches: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_split: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_used: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validity_note: Option<ValidityNote>,
    /// The radius exceeds 1 and says nothing about an accuracy.
    pub vacuous: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl BoundReport {
    fn from_branches(delta: f64, branches: BTreeMap<String, f64>) -> Self {
        let radius = branches.values().copied().fold(f64::INFINITY, f64::min);
        Self {
            delta,
            radius,
            branches,
            delta_split: None,
            weight_used: None,
            validity_note: None,
            vacuous: radius > 1.0,
            notes: Vec::new(),
        }
    }

    /// Whether `|estimate - truth| ≤ radius`.
    pub fn covers(&self, estimate: f64, truth: f64) -> bool {
        (estimate - truth).abs() <= self.radius
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta {delta} not in (0,1)")));
    }
    Ok(())
}

fn check_weight(weight: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::domain(format!("weight {weight} not in [0,1]")));
    }
    Ok(())
}

/// Two-sided Hoeffding radius for the mean of `n` variables in `[0, 1]`.
pub fn hoeffding_radius(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Two-sided empirical Bernstein radius for the mean of `n ≥ 2` variables
/// in `[0, 1]` with empirical variance `sample_variance`.
pub fn empirical_bernstein_radius(sample_variance: f64, n: u64, delta: f64) -> f64 {
    let log_term = (4.0 / delta).ln();
    let nm1 = (n - 1) as f64;
    (2.0 * sample_variance * log_term / nm1).sqrt() + 7.0 * log_term / (3.0 * nm1)
}

/// `min(Hoeffding, empirical Bernstein)` radius for `Â_comp`.
///
/// With a single complementary row only the Hoeffding branch exists.
pub fn comp_deviation_bound(summary: &CountSummary, delta: f64) -> Result<BoundReport> {
    check_delta(delta)?;
    let n_c = summary.n_complementary();
    let q = summary
        .q_hat()
        .ok_or_else(|| Error::insufficient("no complementary labels"))?;
    let km1 = (summary.num_options() - 1) as f64;
    let mut branches = BTreeMap::new();
    branches.insert(HOEFFDING.to_string(), km1 * hoeffding_radius(n_c, delta));
    let mut notes = Vec::new();
    if n_c >= 2 {
        branches.insert(
            EMPIRICAL_BERNSTEIN.to_string(),
            km1 * empirical_bernstein_radius(q * (1.0 - q), n_c, delta),
        );
    } else {
        notes.push("empirical Bernstein branch needs n_c >= 2; Hoeffding only".to_string());
    }
    let mut report = BoundReport::from_branches(delta, branches);
    report.notes = notes;
    Ok(report)
}

/// Confidence budget split between the ordinary and complementary arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSplit {
    pub ordinary: f64,
    pub complementary: f64,
}

impl DeltaSplit {
    pub fn symmetric(delta: f64) -> Self {
        Self {
            ordinary: delta / 2.0,
            complementary: delta / 2.0,
        }
    }

    pub fn new(ordinary: f64, complementary: f64) -> Result<Self> {
        if !(ordinary > 0.0 && complementary > 0.0) {
            return Err(Error::domain("delta split parts must be positive"));
        }
        check_delta(ordinary + complementary)?;
        Ok(Self {
            ordinary,
            complementary,
        })
    }

    pub fn total(&self) -> f64 {
        self.ordinary + self.complementary
    }
}

/// Union-bound radius for `w Â_ord + (1 - w) Â_comp`, valid for any `w`.
///
/// `split` defaults to `δ/2` per arm and must sum to `delta`.
pub fn mixture_union_bound(
    summary: &CountSummary,
    weight: f64,
    delta: f64,
    split: Option<DeltaSplit>,
) -> Result<BoundReport> {
    check_delta(delta)?;
    check_weight(weight)?;
    let split = split.unwrap_or_else(|| DeltaSplit::symmetric(delta));
    if split.ordinary <= 0.0 || split.complementary <= 0.0 || (split.total() - delta).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "delta split ({}, {}) does not sum to {delta}",
            split.ordinary, split.complementary
        )));
    }
    let a = summary
        .ordinary_fraction()
        .ok_or_else(|| Error::insufficient("no ordinary labels"))?;
    let q = summary
        .q_hat()
        .ok_or_else(|| Error::insufficient("no complementary labels"))?;
    let (n_o, n_c) = (summary.n_ordinary(), summary.n_complementary());
    let km1 = (summary.num_options() - 1) as f64;
    let (d_o, d_c) = (split.ordinary, split.complementary);

    let mut branches = BTreeMap::new();
    branches.insert(
        UNION_HOEFFDING.to_string(),
        weight * hoeffding_radius(n_o, d_o) + (1.0 - weight) * km1 * hoeffding_radius(n_c, d_c),
    );
    let mut notes = Vec::new();
    if n_o >= 2 && n_c >= 2 {
        branches.insert(
            UNION_BERNSTEIN.to_string(),
            weight * empirical_bernstein_radius(a * (1.0 - a), n_o, d_o)
                + (1.0 - weight) * km1 * empirical_bernstein_radius(q * (1.0 - q), n_c, d_c),
        );
    } else {
        notes.push("empirical Bernstein branch needs n_o, n_c >= 2; Hoeffding only".to_string());
    }
    let mut report = BoundReport::from_branches(delta, branches);
    report.delta_split = Some((d_o, d_c));
    report.weight_used = Some(weight);
    report.validity_note = Some(ValidityNote::AnyWeightValid);
    report.notes = notes;
    Ok(report)
}

/// Whether a mixture weight was fixed before seeing the evaluation data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightOrigin {
    Fixed,
    DataDependent,
}

/// Variance inputs for [`bernstein_mixture_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BernsteinMode {
    /// True accuracy known (simulation); `v` is exact.
    Oracle { accuracy: f64, weight: f64 },
    /// `v̂ = w² v̂_o + (1-w)² v̂_c` from the summary.
    PlugIn { weight: f64 },
    /// `v̂ = v̂_o v̂_c / (v̂_o + v̂_c)` at the plug-in IVW weight `ŵ`.
    PlugInIvw,
}

/// Bernstein radius `sqrt(2 v log(2/δ)) + c log(2/δ)`, with
/// `c = max(w / n_o, (1-w)(K-1) / n_c)`.
///
/// In oracle mode only the sample sizes and `K` are read from `summary`.
pub fn bernstein_mixture_bound(
    summary: &CountSummary,
    delta: f64,
    mode: BernsteinMode,
    origin: WeightOrigin,
) -> Result<BoundReport> {
    check_delta(delta)?;
    let (n_o, n_c) = (summary.n_ordinary(), summary.n_complementary());
    if n_o == 0 || n_c == 0 {
        return Err(Error::insufficient("mixture bound needs both label sets"));
    }
    let k = summary.num_options();
    let km1 = (k - 1) as f64;
    let (weight, variance, origin) = match mode {
        BernsteinMode::Oracle { accuracy, weight } => {
            check_weight(weight)?;
            if !(0.0..=1.0).contains(&accuracy) {
                return Err(Error::domain(format!("accuracy {accuracy} not in [0,1]")));
            }
            let q = avoidance_probability(accuracy, k);
            let one_minus_q = (1.0 - accuracy) / km1;
            let v = weight * weight * accuracy * (1.0 - accuracy) / n_o as f64
                + (1.0 - weight).powi(2) * km1 * km1 * q * one_minus_q / n_c as f64;
            (weight, v, origin)
        }
        BernsteinMode::PlugIn { weight } => {
            check_weight(weight)?;
            let (v_o, v_c) = plugin_variances(summary)?;
            (weight, weight * weight * v_o + (1.0 - weight).powi(2) * v_c, origin)
        }
        BernsteinMode::PlugInIvw => {
            let (v_o, v_c) = plugin_variances(summary)?;
            let w = ivw_weight_plugin(summary)?.weight;
            let h_min = if v_o + v_c > 0.0 { v_o * v_c / (v_o + v_c) } else { 0.0 };
            (w, h_min, WeightOrigin::DataDependent)
        }
    };
    let log_term = (2.0 / delta).ln();
    let c = (weight / n_o as f64).max((1.0 - weight) * km1 / n_c as f64);
    let radius = (2.0 * variance * log_term).sqrt() + c * log_term;
    let mut branches = BTreeMap::new();
    branches.insert(BERNSTEIN_MIXTURE.to_string(), radius);
    let mut report = BoundReport::from_branches(delta, branches);
    report.weight_used = Some(weight);
    report.validity_note = Some(match origin {
        WeightOrigin::Fixed => ValidityNote::FixedWeightValid,
        WeightOrigin::DataDependent => ValidityNote::DataDependentWeightUseUnionBound,
    });
    Ok(report)
}
