//! Joint maximum likelihood over both label sets.
//!
//! `S_o ~ Bin(n_o, A)` and `S_c ~ Bin(n_c, q(A))` are independent, so
//!
//! ```text
//! ℓ(A) = S_o log A + T_o log(1-A) + S_c log q + T_c log(1-q)
//! ```
//!
//! Clearing denominators in the score equation leaves `α A² + β A + γ = 0`
//! with `α = N`, `β = (K-2)(T_o+T_c) + (K-3) S_o - S_c` and
//! `γ = -(K-2) S_o`. Since `γ ≤ 0` the discriminant is at least `β²` and
//! exactly one root lies in `[0, 1]`.

use serde::{Deserialize, Serialize};

use super::{
    avoidance_probability, check_accuracy, estimate_complementary, Estimate, EstimateNote, Method,
};
use crate::error::{Error, Result};
use crate::label_model::CountSummary;

fn weighted_log(coef: u64, x: f64) -> f64 {
    if coef == 0 {
        0.0
    } else if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        coef as f64 * x.ln()
    }
}

/// Joint log-likelihood at `accuracy`.
///
/// Terms with a zero count contribute zero even at the boundary; a nonzero
/// count against a zero probability yields negative infinity.
pub fn log_likelihood(accuracy: f64, summary: &CountSummary) -> Result<f64> {
    check_accuracy(accuracy)?;
    let km1 = (summary.num_options() - 1) as f64;
    let q = avoidance_probability(accuracy, summary.num_options());
    let one_minus_q = (1.0 - accuracy) / km1;
    Ok(weighted_log(summary.s_ordinary(), accuracy)
        + weighted_log(summary.t_ordinary(), 1.0 - accuracy)
        + weighted_log(summary.s_complementary(), q)
        + weighted_log(summary.t_complementary(), one_minus_q))
}

/// `∂ℓ/∂A`, written as `S_o/A - T_o/(1-A) + S_c/(A+K-2) - T_c/(1-A)`.
pub fn score(accuracy: f64, summary: &CountSummary) -> f64 {
    let k = summary.num_options() as f64;
    let term = |coef: u64, den: f64| if coef == 0 { 0.0 } else { coef as f64 / den };
    term(summary.s_ordinary(), accuracy) - term(summary.t_ordinary(), 1.0 - accuracy)
        + term(summary.s_complementary(), accuracy + k - 2.0)
        - term(summary.t_complementary(), 1.0 - accuracy)
}

/// Root in `[0, 1]` of the score quadratic, evaluated without cancellation.
pub fn ml_quadratic_root(summary: &CountSummary) -> Result<f64> {
    if summary.total() == 0 {
        return Err(Error::insufficient("no labels"));
    }
    let k = summary.num_options() as f64;
    let (s_o, s_c) = (summary.s_ordinary() as f64, summary.s_complementary() as f64);
    let t_sum = (summary.t_ordinary() + summary.t_complementary()) as f64;
    let alpha = summary.total() as f64;
    let beta = (k - 2.0) * t_sum + (k - 3.0) * s_o - s_c;
    let gamma = -(k - 2.0) * s_o;
    let mut disc = beta * beta - 4.0 * alpha * gamma;
    if disc < 0.0 {
        assert!(
            disc > -1e-9 * beta * beta,
            "negative discriminant {disc} for valid counts {summary:?}"
        );
        disc = 0.0;
    }
    let sqrt_disc = disc.sqrt();
    let root = if beta >= 0.0 {
        // both roots of the product γ/α ≤ 0; the nonnegative one is γ / q_st
        let q_st = -(beta + sqrt_disc) / 2.0;
        if q_st == 0.0 {
            0.0
        } else {
            gamma / q_st
        }
    } else {
        (sqrt_disc - beta) / 2.0 / alpha
    };
    Ok(root.clamp(0.0, 1.0))
}

fn information(accuracy: f64, summary: &CountSummary) -> f64 {
    let mut info = 0.0;
    if summary.n_ordinary() > 0 {
        info += summary.n_ordinary() as f64 / (accuracy * (1.0 - accuracy));
    }
    if let Some(q) = summary.q_hat() {
        let km1 = (summary.num_options() - 1) as f64;
        info += summary.n_complementary() as f64 / (km1 * km1 * q * (1.0 - q));
    }
    info
}

/// Large-sample standard error `[n_o/(A(1-A)) + n_c/((K-1)² q̂(1-q̂))]^{-1/2}`.
///
/// An absent label set contributes no information term. Zero plug-in
/// variance on either side yields a zero standard error.
pub fn ml_standard_error(accuracy: f64, summary: &CountSummary) -> f64 {
    let info = information(accuracy, summary);
    if info.is_infinite() || info.is_nan() {
        0.0
    } else if info > 0.0 {
        info.sqrt().recip()
    } else {
        f64::INFINITY
    }
}

/// Standard error from a central-difference second derivative of `ℓ`.
///
/// `None` at the boundary or when the curvature is not negative.
pub fn observed_information_se(accuracy: f64, summary: &CountSummary) -> Option<f64> {
    if !(accuracy > 0.0 && accuracy < 1.0) {
        return None;
    }
    let h = (accuracy.min(1.0 - accuracy) * 1e-3).max(1e-7);
    let f = |a: f64| log_likelihood(a, summary).ok();
    let curvature = (f(accuracy + h)? - 2.0 * f(accuracy)? + f(accuracy - h)?) / (h * h);
    (curvature < 0.0 && curvature.is_finite()).then(|| (-curvature).sqrt().recip())
}

/// Closed-form joint ML estimate.
///
/// With `n_c = 0` this is `S_o / n_o`; with `n_o = 0` it is `Â_comp`
/// exactly, unclamped like the complementary estimator itself. The
/// quadratic root on `[0, 1]` is available from [`ml_quadratic_root`].
pub fn estimate_ml(summary: &CountSummary) -> Result<Estimate> {
    let value = match (summary.n_ordinary(), summary.n_complementary()) {
        (0, 0) => return Err(Error::insufficient("no labels")),
        (_, 0) => summary.s_ordinary() as f64 / summary.n_ordinary() as f64,
        (0, _) => estimate_complementary(summary)?.value,
        _ => ml_quadratic_root(summary)?,
    };
    let se = ml_standard_error(value, summary);
    let mut est = Estimate::new(Method::Ml, value, se, summary.q_hat());
    if summary.num_options() == 2 {
        est = est.note(EstimateNote::TwoOptions);
    }
    if summary.n_ordinary() > 0 && summary.n_complementary() > 0 {
        if let Some(observed) = observed_information_se(value, summary) {
            if se > 0.0 && ((se - observed) / observed).abs() > 0.10 {
                log::debug!("ML standard error {se} differs from observed-information {observed} by more than 10%");
                est = est.note(EstimateNote::StdErrorDiscrepancy);
            }
        }
    }
    Ok(est)
}

/// How the complementary curvature is evaluated in [`one_step_newton`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonCurvature {
    /// Score and observed information at `q(A₀)`.
    Observed,
    /// Complementary score and information with `q` replaced by `q̂`.
    PlugInQ,
}

/// One Newton step on the joint score from `pilot`:
/// `A₁ = A₀ + (U_o + U_c) / (I_o + I_c)`.
///
/// With `pilot = Â_ord` and [`NewtonCurvature::PlugInQ`] the step lands
/// exactly on the plug-in IVW estimate.
pub fn one_step_newton(pilot: f64, summary: &CountSummary, curvature: NewtonCurvature) -> Result<Estimate> {
    if !(pilot > 0.0 && pilot < 1.0) {
        return Err(Error::domain(format!("pilot {pilot} not strictly inside (0,1)")));
    }
    if summary.total() == 0 {
        return Err(Error::insufficient("no labels"));
    }
    let km1 = (summary.num_options() - 1) as f64;
    let mut step_score = 0.0;
    let mut info = 0.0;
    if let Some(a_ord) = summary.ordinary_fraction() {
        let n_o = summary.n_ordinary() as f64;
        step_score += n_o * (a_ord - pilot) / (pilot * (1.0 - pilot));
        info += summary.s_ordinary() as f64 / (pilot * pilot)
            + summary.t_ordinary() as f64 / ((1.0 - pilot) * (1.0 - pilot));
    }
    if let Some(q_hat) = summary.q_hat() {
        let n_c = summary.n_complementary() as f64;
        let a_comp = estimate_complementary(summary)?.value;
        match curvature {
            NewtonCurvature::Observed => {
                let q0 = avoidance_probability(pilot, summary.num_options());
                let one_minus_q0 = (1.0 - pilot) / km1;
                step_score += n_c * (a_comp - pilot) / (km1 * km1 * q0 * one_minus_q0);
                info += (summary.s_complementary() as f64 / (q0 * q0)
                    + summary.t_complementary() as f64 / (one_minus_q0 * one_minus_q0))
                    / (km1 * km1);
            }
            NewtonCurvature::PlugInQ => {
                let i_c = n_c / (km1 * km1 * q_hat * (1.0 - q_hat));
                step_score += i_c * (a_comp - pilot);
                info += i_c;
            }
        }
    }
    if !(info > 0.0 && info.is_finite() && step_score.is_finite()) {
        return Err(Error::DegenerateCurvature(format!(
            "information {info} at pilot {pilot}"
        )));
    }
    let value = pilot + step_score / info;
    Ok(Estimate::new(Method::OneStepNewton, value, info.sqrt().recip(), summary.q_hat()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{estimate_ivw, estimate_ordinary, ivw_weight_plugin};

    fn summary(no: u64, so: u64, nc: u64, sc: u64, k: usize) -> CountSummary {
        CountSummary::new(no, so, nc, sc, k).unwrap()
    }

    /// Independent oracle: argmax of ℓ over the grid {0, 1e-6, ..., 1}.
    fn grid_argmax(s: &CountSummary) -> f64 {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=1_000_000u32 {
            let a = i as f64 * 1e-6;
            let l = log_likelihood(a, s).unwrap();
            if l > best.0 {
                best = (l, a);
            }
        }
        best.1
    }

    #[test]
    fn log_likelihood_examples() {
        let s = summary(2, 1, 0, 0, 4);
        assert!((log_likelihood(0.5, &s).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(log_likelihood(0.0, &summary(2, 0, 0, 0, 4)).unwrap(), 0.0);
        assert_eq!(log_likelihood(0.0, &s).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_likelihood(1.0, &s).unwrap(), f64::NEG_INFINITY);
        assert!(log_likelihood(1.1, &s).is_err());
    }

    #[test]
    fn ordinary_only_likelihood_peaks_at_fraction() {
        let s = summary(40, 13, 0, 0, 5);
        assert!((grid_argmax(&s) - 13.0 / 40.0).abs() < 1e-6);
    }

    #[test]
    fn reference_summary_matches_grid_and_high_precision_root() {
        let s = summary(300, 210, 900, 870, 4);
        let e = estimate_ml(&s).unwrap();
        // root of the score equation computed to 30 digits
        assert!((e.value - 0.791_948_133_962_653_3).abs() < 1e-12);
        assert!((e.value - grid_argmax(&s)).abs() < 1e-5);
        assert!(score(e.value, &s).abs() < 1e-8);
        assert!((e.std_error - 0.014_250_554_289_135_472).abs() < 1e-12);
    }

    #[test]
    fn reductions() {
        let s = summary(37, 29, 0, 0, 6);
        assert_eq!(estimate_ml(&s).unwrap().value, 29.0 / 37.0);
        assert!((ml_quadratic_root(&s).unwrap() - 29.0 / 37.0).abs() < 1e-14);
        let s = summary(0, 0, 120, 111, 4);
        let comp = estimate_complementary(&s).unwrap().value;
        assert_eq!(estimate_ml(&s).unwrap().value, comp);
        assert!((ml_quadratic_root(&s).unwrap() - comp).abs() < 1e-14);
        // a negative Â_comp passes through; the constrained root is 0
        let s = summary(0, 0, 30, 10, 4);
        let e = estimate_ml(&s).unwrap();
        assert_eq!(e.value, estimate_complementary(&s).unwrap().value);
        assert_eq!(e.clamped_value, 0.0);
        assert!(e.has_note(EstimateNote::OutOfRange));
        assert_eq!(ml_quadratic_root(&s).unwrap(), 0.0);
        assert!(estimate_ml(&summary(0, 0, 0, 0, 4)).is_err());
    }

    #[test]
    fn ml_standard_error_drops_absent_terms() {
        let s = summary(50, 20, 0, 0, 4);
        let e = estimate_ml(&s).unwrap();
        assert!((e.std_error - estimate_ordinary(&s).unwrap().std_error).abs() < 1e-15);
        let s = summary(0, 0, 60, 50, 4);
        let e = estimate_ml(&s).unwrap();
        assert!((e.std_error - estimate_complementary(&s).unwrap().std_error).abs() < 1e-15);
    }

    #[test]
    fn three_options_beta_edge() {
        // K=3: the (K-3) S_o term vanishes
        let s = summary(100, 64, 200, 170, 3);
        let e = estimate_ml(&s).unwrap();
        assert!((e.value - grid_argmax(&s)).abs() < 1e-5);
        assert!(score(e.value, &s).abs() < 1e-8);
    }

    #[test]
    fn two_options_pool_the_counts() {
        let s = summary(30, 12, 50, 33, 2);
        let e = estimate_ml(&s).unwrap();
        assert!((e.value - 45.0 / 80.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_roots() {
        let s = summary(20, 20, 50, 50, 4);
        assert_eq!(estimate_ml(&s).unwrap().value, 1.0);
        let s = summary(20, 0, 50, 30, 4);
        assert_eq!(estimate_ml(&s).unwrap().value, 0.0);
    }

    #[test]
    fn newton_from_ordinary_pilot_is_ivw() {
        let s = summary(300, 210, 900, 810, 4);
        let pilot = estimate_ordinary(&s).unwrap().value;
        let step = one_step_newton(pilot, &s, NewtonCurvature::PlugInQ).unwrap();
        let ivw = estimate_ivw(&s, &ivw_weight_plugin(&s).unwrap()).unwrap();
        assert!(((step.value - ivw.value) / ivw.value).abs() < 1e-12);
        assert!(((step.std_error - ivw.std_error) / ivw.std_error).abs() < 1e-12);
    }

    #[test]
    fn newton_is_stationary_without_complementary_rows() {
        let s = summary(80, 52, 0, 0, 4);
        let step = one_step_newton(0.65, &s, NewtonCurvature::Observed).unwrap();
        assert_eq!(step.value, 0.65);
    }

    #[test]
    fn newton_errors() {
        let s = summary(80, 52, 40, 40, 4);
        assert!(one_step_newton(0.0, &s, NewtonCurvature::Observed).is_err());
        assert!(matches!(
            one_step_newton(0.65, &s, NewtonCurvature::PlugInQ),
            Err(Error::DegenerateCurvature(_))
        ));
        assert!(one_step_newton(0.65, &s, NewtonCurvature::Observed).is_ok());
    }

    #[test]
    fn observed_information_agrees_when_q_hat_matches_model() {
        // Â_ord = 0.7 and q̂ = q(0.7) = 0.9: ML is 0.7 and both SEs coincide
        let s = summary(300, 210, 900, 810, 4);
        let e = estimate_ml(&s).unwrap();
        assert!((e.value - 0.7).abs() < 1e-12);
        let observed = observed_information_se(e.value, &s).unwrap();
        assert!(((observed - e.std_error) / e.std_error).abs() < 1e-4);
        assert!(!e.has_note(EstimateNote::StdErrorDiscrepancy));
    }
}
