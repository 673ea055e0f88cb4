//! Inverse-variance weighted mixtures of the ordinary and complementary estimators.
//!
//! `Â_mix = w Â_ord + (1 - w) Â_comp`. The variance-optimal weight is
//! `w* = V_comp / (V_ord + V_comp)`; in closed form at accuracy `A`,
//! `w* = (A + K - 2) n_o / (A n_c + (A + K - 2) n_o)`.

use serde::{Deserialize, Serialize};

use super::{
    check_accuracy, check_options, estimate_complementary, estimate_ordinary, Estimate, EstimateNote,
    Method,
};
use crate::error::{Error, Result};
use crate::label_model::CountSummary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    /// Ratio of plug-in variances computed on the same data.
    PlugInVariance,
    /// Closed-form optimum evaluated at a pilot accuracy.
    ClosedFormPilot { pilot: f64 },
    /// Plug-in variances computed on a held-out part of the data.
    HeldOutPlugIn,
    Fixed { weight: f64 },
}

/// Weight on the ordinary estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightEstimate {
    pub weight: f64,
    pub source: WeightSource,
    /// Both plug-in variances were zero and the closed form was used instead.
    pub degenerate: bool,
}

fn check_weight(weight: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::domain(format!("weight {weight} not in [0,1]")));
    }
    Ok(())
}

pub fn fixed_weight(weight: f64) -> Result<WeightEstimate> {
    check_weight(weight)?;
    Ok(WeightEstimate {
        weight,
        source: WeightSource::Fixed { weight },
        degenerate: false,
    })
}

/// `(V̂_ord, V̂_comp) = (Â_ord(1-Â_ord)/n_o, (K-1)² q̂(1-q̂)/n_c)`.
pub fn plugin_variances(summary: &CountSummary) -> Result<(f64, f64)> {
    let a = summary
        .ordinary_fraction()
        .ok_or_else(|| Error::insufficient("no ordinary labels"))?;
    let q = summary
        .q_hat()
        .ok_or_else(|| Error::insufficient("no complementary labels"))?;
    let km1 = (summary.num_options() - 1) as f64;
    Ok((
        a * (1.0 - a) / summary.n_ordinary() as f64,
        km1 * km1 * q * (1.0 - q) / summary.n_complementary() as f64,
    ))
}

/// Plug-in IVW weight `ŵ = V̂_comp / (V̂_ord + V̂_comp)`.
///
/// If exactly one plug-in variance is zero the weight goes entirely to that
/// arm. If both are zero the ratio is 0/0; the closed-form weight at pilot
/// `Â_ord` is used instead (pilot 0.5 when that is also undefined) and the
/// result is marked `degenerate`.
pub fn ivw_weight_plugin(summary: &CountSummary) -> Result<WeightEstimate> {
    let (v_ord, v_comp) = plugin_variances(summary)?;
    let total = v_ord + v_comp;
    if total > 0.0 {
        return Ok(WeightEstimate {
            weight: v_comp / total,
            source: WeightSource::PlugInVariance,
            degenerate: false,
        });
    }
    let a_ord = summary.ordinary_fraction().unwrap_or(0.5);
    let (k, n_o, n_c) = (
        summary.num_options(),
        summary.n_ordinary(),
        summary.n_complementary(),
    );
    let fallback = ivw_weight_closed_form(a_ord, k, n_o, n_c).or_else(|_| ivw_weight_closed_form(0.5, k, n_o, n_c))?;
    log::debug!("both plug-in variances are zero; closed-form weight {}", fallback.weight);
    Ok(WeightEstimate {
        degenerate: true,
        ..fallback
    })
}

/// Closed-form optimal weight at a pilot accuracy.
pub fn ivw_weight_closed_form(pilot: f64, num_options: usize, n_ordinary: u64, n_complementary: u64) -> Result<WeightEstimate> {
    check_accuracy(pilot)?;
    check_options(num_options)?;
    let k = num_options as f64;
    let num = (pilot + k - 2.0) * n_ordinary as f64;
    let den = pilot * n_complementary as f64 + num;
    if den <= 0.0 {
        return Err(Error::DegenerateWeight(format!(
            "closed-form weight undefined at pilot {pilot} with n_o={n_ordinary}, n_c={n_complementary}, K={num_options}"
        )));
    }
    Ok(WeightEstimate {
        weight: num / den,
        source: WeightSource::ClosedFormPilot { pilot },
        degenerate: false,
    })
}

/// Pilot accuracy for the closed-form weight: `Â_ord` with at least 30
/// ordinary rows, else the clamped `Â_comp`, else 0.5.
pub fn default_pilot(summary: &CountSummary) -> f64 {
    if summary.n_ordinary() >= 30 {
        if let Some(a) = summary.ordinary_fraction() {
            return a;
        }
    }
    if let Ok(e) = estimate_complementary(summary) {
        return e.clamped_value;
    }
    0.5
}

fn mixture_std_error(weight: &WeightEstimate, v_ord: f64, v_comp: f64) -> f64 {
    match weight.source {
        WeightSource::PlugInVariance if !weight.degenerate => {
            let total = v_ord + v_comp;
            if total > 0.0 {
                (v_ord * v_comp / total).sqrt()
            } else {
                0.0
            }
        }
        _ => {
            let w = weight.weight;
            (w * w * v_ord + (1.0 - w) * (1.0 - w) * v_comp).sqrt()
        }
    }
}

/// `w Â_ord + (1 - w) Â_comp` with the supplied weight.
///
/// When one label set is empty the other arm's estimator is returned with
/// [`EstimateNote::SingleArmFallback`].
pub fn estimate_ivw(summary: &CountSummary, weight: &WeightEstimate) -> Result<Estimate> {
    check_weight(weight.weight)?;
    let method = match weight.source {
        WeightSource::Fixed { weight } => Method::IvwFixed(weight),
        _ => Method::Ivw,
    };
    match (summary.n_ordinary(), summary.n_complementary()) {
        (0, 0) => return Err(Error::insufficient("no labels")),
        (0, _) | (_, 0) => {
            let single = if summary.n_ordinary() == 0 {
                estimate_complementary(summary)?
            } else {
                estimate_ordinary(summary)?
            };
            log::warn!("one label set is empty; returning the {} estimate", single.method);
            let mut out = Estimate::new(method, single.value, single.std_error, single.raw_q);
            out.weight = Some(*weight);
            return Ok(out.note(EstimateNote::SingleArmFallback));
        }
        _ => {}
    }
    let ord = estimate_ordinary(summary)?;
    let comp = estimate_complementary(summary)?;
    let (v_ord, v_comp) = plugin_variances(summary)?;
    let w = weight.weight;
    let value = w * ord.value + (1.0 - w) * comp.value;
    let mut out = Estimate::new(method, value, mixture_std_error(weight, v_ord, v_comp), comp.raw_q);
    out.weight = Some(*weight);
    if weight.degenerate {
        out = out.note(EstimateNote::DegenerateWeight);
    }
    if matches!(weight.source, WeightSource::PlugInVariance) {
        out = out.note(EstimateNote::SameDataWeight);
    }
    if summary.num_options() == 2 {
        out = out.note(EstimateNote::TwoOptions);
    }
    Ok(out)
}

/// Plug-in IVW estimate, falling back to the single available arm.
pub fn estimate_ivw_plugin(summary: &CountSummary) -> Result<Estimate> {
    if summary.n_ordinary() == 0 || summary.n_complementary() == 0 {
        let placeholder = WeightEstimate {
            weight: if summary.n_ordinary() == 0 { 0.0 } else { 1.0 },
            source: WeightSource::PlugInVariance,
            degenerate: false,
        };
        return estimate_ivw(summary, &placeholder);
    }
    let weight = ivw_weight_plugin(summary)?;
    estimate_ivw(summary, &weight)
}

/// Plug-in weight from `weight_part`, applied to the disjoint `estimate_part`.
///
/// Because the weight is independent of the rows it is applied to, the
/// resulting mixture is exactly unbiased.
pub fn estimate_ivw_held_out(weight_part: &CountSummary, estimate_part: &CountSummary) -> Result<Estimate> {
    if weight_part.num_options() != estimate_part.num_options() {
        return Err(Error::domain("weight and estimate parts disagree on K"));
    }
    let learned = ivw_weight_plugin(weight_part)?;
    let weight = WeightEstimate {
        weight: learned.weight,
        source: WeightSource::HeldOutPlugIn,
        degenerate: learned.degenerate,
    };
    estimate_ivw(estimate_part, &weight)
}
