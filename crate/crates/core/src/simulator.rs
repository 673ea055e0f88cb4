//! Monte Carlo validation of the estimators and bounds.
//!
//! A replica draws fresh items with uniform truth, predicts each correctly
//! with probability `true_accuracy` (errors spread per `error_skew`),
//! annotates them, and computes the requested estimates and bounds.
//! Replica `r` uses stream `r` of the configured seed (see [`crate::rng`]),
//! and aggregation runs in replica order after the parallel phase, so a
//! report depends only on its configuration.
//!
//! Reporting follows the usual benchmark convention: across-replica mean and
//! standard deviation, plus the average of the per-replica plug-in standard
//! errors. The true accuracy is known here, so it is used directly wherever
//! an experiment on real data would approximate it from a large ordinary set.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    bernstein_mixture_bound, BoundReport, comp_deviation_bound, mixture_union_bound, BernsteinMode, WeightOrigin,
};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_complementary, estimate_ivw, estimate_ivw_plugin, estimate_ml, estimate_ordinary,
    fixed_weight, ivw_weight_closed_form, plan_complementary_size, variance_complementary,
    variance_ordinary, Estimate, Method,
};
use crate::label_model::{derive_complementary, CountSummary, LabelKind};
use crate::rng::{substream, StreamRng};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Exactly `n_ordinary` ordinary and `n_complementary` complementary rows.
    #[default]
    ForcedSplit,
    /// `n_ordinary + n_complementary` items, each routed to a uniform annotator.
    Routed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub true_accuracy: f64,
    pub num_options: usize,
    pub n_ordinary: u64,
    pub n_complementary: u64,
    pub replicas: u64,
    pub seed: u64,
    pub estimators: Vec<Method>,
    /// Derive `n_complementary` from the variance-matching planner.
    pub planner_mode: bool,
    /// Distribution of wrong predictions over the `K - 1` non-truth classes,
    /// in increasing index order. Uniform when absent.
    pub error_skew: Option<Vec<f64>>,
    /// Each of `n_ordinary` items yields its ordinary label and all `K - 1`
    /// complementary labels; `n_complementary` is ignored.
    pub exhaustive_split: bool,
    pub sampling: SamplingMode,
    pub delta: f64,
    /// Weight of the fixed-weight mixture arm used by the bounds.
    pub mixture_weight: f64,
    /// Worker threads; `None` uses the global pool. Does not affect results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            true_accuracy: 0.7,
            num_options: 4,
            n_ordinary: 300,
            n_complementary: 300,
            replicas: 3,
            seed: 0,
            estimators: vec![
                Method::Ordinary,
                Method::Complementary,
                Method::Ivw,
                Method::IvwFixed(0.5),
                Method::Ml,
            ],
            planner_mode: false,
            error_skew: None,
            exhaustive_split: false,
            sampling: SamplingMode::ForcedSplit,
            delta: 0.05,
            mixture_weight: 0.5,
            threads: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.true_accuracy) {
            return Err(Error::domain(format!("true accuracy {} not in [0,1]", self.true_accuracy)));
        }
        if self.num_options < 2 {
            return Err(Error::domain("need at least 2 options"));
        }
        if self.replicas == 0 {
            return Err(Error::domain("replicas must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::domain("no estimators requested"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!("delta {} not in (0,1)", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.mixture_weight) {
            return Err(Error::domain(format!("mixture weight {} not in [0,1]", self.mixture_weight)));
        }
        for m in &self.estimators {
            if let Method::IvwFixed(w) = m {
                fixed_weight(*w)?;
            }
            if matches!(m, Method::OneStepNewton) {
                return Err(Error::domain("one-step Newton is not a simulation estimator"));
            }
        }
        if let Some(skew) = &self.error_skew {
            check_skew(skew, self.num_options)?;
        }
        if self.planner_mode && self.true_accuracy == 0.0 {
            return Err(Error::Unplannable);
        }
        if self.planner_mode && self.exhaustive_split {
            return Err(Error::domain("planner mode and exhaustive split are exclusive"));
        }
        if self.exhaustive_split && self.sampling == SamplingMode::Routed {
            return Err(Error::domain("exhaustive split uses forced sampling"));
        }
        Ok(())
    }

    /// `(n_o, n_c)` after applying planner or exhaustive-split rules.
    pub fn effective_sizes(&self) -> Result<(u64, u64)> {
        if self.planner_mode {
            let plan = plan_complementary_size(self.true_accuracy, self.num_options, self.n_ordinary)?;
            Ok((self.n_ordinary, plan.required_n_complementary))
        } else if self.exhaustive_split {
            Ok((self.n_ordinary, self.n_ordinary * (self.num_options as u64 - 1)))
        } else {
            Ok((self.n_ordinary, self.n_complementary))
        }
    }
}

fn check_skew(skew: &[f64], num_options: usize) -> Result<()> {
    if skew.len() != num_options - 1 {
        return Err(Error::domain(format!(
            "error skew has {} entries, expected {}",
            skew.len(),
            num_options - 1
        )));
    }
    if skew.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::domain("error skew entries must be nonnegative"));
    }
    let total: f64 = skew.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("error skew sums to {total}, expected 1")));
    }
    Ok(())
}

fn draw_prediction(
    truth: usize,
    accuracy: f64,
    num_options: usize,
    skew: Option<&[f64]>,
    rng: &mut StreamRng,
) -> usize {
    if rng.gen::<f64>() < accuracy {
        return truth;
    }
    let slot = match skew {
        None => rng.gen_range(0..num_options - 1),
        Some(p) => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = p.len() - 1;
            for (i, pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            // never land on a zero-probability slot through round-off
            while p[chosen] == 0.0 && chosen > 0 {
                chosen -= 1;
            }
            chosen
        }
    };
    if slot >= truth {
        slot + 1
    } else {
        slot
    }
}

/// Synthetic prediction: `truth_index` with probability `true_accuracy`,
/// otherwise a wrong index drawn per `error_skew` (uniform when `None`).
pub fn synthesize_prediction(
    truth_index: usize,
    true_accuracy: f64,
    num_options: usize,
    error_skew: Option<&[f64]>,
    rng: &mut StreamRng,
) -> Result<usize> {
    if num_options < 2 || truth_index >= num_options {
        return Err(Error::domain("truth index out of range"));
    }
    if !(0.0..=1.0).contains(&true_accuracy) {
        return Err(Error::domain(format!("true accuracy {true_accuracy} not in [0,1]")));
    }
    if let Some(skew) = error_skew {
        check_skew(skew, num_options)?;
    }
    Ok(draw_prediction(truth_index, true_accuracy, num_options, error_skew, rng))
}

/// Bound arms evaluated per replica, with the estimate each one covers.
pub const BOUND_COMP: &str = "comp_min";
pub const BOUND_UNION_FIXED: &str = "union_fixed_weight";
pub const BOUND_BERNSTEIN_ORACLE_FIXED: &str = "bernstein_oracle_fixed_weight";
pub const BOUND_BERNSTEIN_PLUGIN_FIXED: &str = "bernstein_plugin_fixed_weight";
pub const BOUND_UNION_IVW: &str = "union_ivw_weight";
pub const BOUND_BERNSTEIN_PLUGIN_IVW: &str = "bernstein_plugin_ivw_weight";

/// `(name, carries a guarantee)` for every bound arm, in report order.
pub const BOUND_ARMS: [(&str, bool); 6] = [
    (BOUND_COMP, true),
    (BOUND_UNION_FIXED, true),
    (BOUND_BERNSTEIN_ORACLE_FIXED, true),
    (BOUND_BERNSTEIN_PLUGIN_FIXED, false),
    (BOUND_UNION_IVW, true),
    (BOUND_BERNSTEIN_PLUGIN_IVW, false),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOutcome {
    pub replica: u64,
    pub summary: CountSummary,
    /// Keyed by method label.
    pub estimates: BTreeMap<String, Estimate>,
    pub bounds: BTreeMap<&'static str, BoundReport>,
    /// Whether each bound's radius covered the deviation of its estimate.
    pub covered: BTreeMap<&'static str, bool>,
}

fn sample_summary(config: &SimulationConfig, n_o: u64, n_c: u64, rng: &mut StreamRng) -> Result<CountSummary> {
    let k = config.num_options;
    let a = config.true_accuracy;
    let skew = config.error_skew.as_deref();
    let mut summary = CountSummary::empty(k)?;
    let item = |rng: &mut StreamRng| {
        let truth = rng.gen_range(0..k);
        (truth, draw_prediction(truth, a, k, skew, rng))
    };
    if config.exhaustive_split {
        for _ in 0..n_o {
            let (truth, pred) = item(rng);
            summary.record(LabelKind::Ordinary, pred == truth);
            for wrong in (0..k).filter(|&c| c != truth) {
                summary.record(LabelKind::Complementary, pred != wrong);
            }
        }
        return Ok(summary);
    }
    match config.sampling {
        SamplingMode::ForcedSplit => {
            for _ in 0..n_o {
                let (truth, pred) = item(rng);
                summary.record(LabelKind::Ordinary, pred == truth);
            }
            for _ in 0..n_c {
                let (truth, pred) = item(rng);
                let wrong = derive_complementary(truth, k, rng)?;
                summary.record(LabelKind::Complementary, pred != wrong);
            }
        }
        SamplingMode::Routed => {
            for _ in 0..n_o + n_c {
                let (truth, pred) = item(rng);
                let annotator = rng.gen_range(0..k);
                if annotator == truth {
                    summary.record(LabelKind::Ordinary, pred == truth);
                } else {
                    summary.record(LabelKind::Complementary, pred != annotator);
                }
            }
        }
    }
    Ok(summary)
}

fn estimate_for(method: Method, summary: &CountSummary) -> Option<Estimate> {
    let both = summary.n_ordinary() > 0 && summary.n_complementary() > 0;
    let est = match method {
        Method::Ordinary => estimate_ordinary(summary),
        Method::Complementary => estimate_complementary(summary),
        Method::Ivw if both => estimate_ivw_plugin(summary),
        Method::IvwFixed(w) if both => fixed_weight(w).and_then(|w| estimate_ivw(summary, &w)),
        Method::Ml if both => estimate_ml(summary),
        _ => return None,
    };
    est.ok()
}

/// Runs one replica; deterministic in `(config.seed, replica)`.
pub fn run_replica(config: &SimulationConfig, replica: u64) -> Result<ReplicaOutcome> {
    config.validate()?;
    let (n_o, n_c) = config.effective_sizes()?;
    replica_with_sizes(config, replica, n_o, n_c)
}

fn replica_with_sizes(config: &SimulationConfig, replica: u64, n_o: u64, n_c: u64) -> Result<ReplicaOutcome> {
    let mut rng = substream(config.seed, replica);
    let summary = sample_summary(config, n_o, n_c, &mut rng)?;
    let truth = config.true_accuracy;

    let estimates: BTreeMap<String, Estimate> = config
        .estimators
        .iter()
        .filter_map(|&m| estimate_for(m, &summary).map(|e| (m.to_string(), e)))
        .collect();

    let mut bounds = BTreeMap::new();
    let mut covered = BTreeMap::new();
    let mut push = |name: &'static str, report: Result<BoundReport>, estimate: f64| {
        if let Ok(report) = report {
            covered.insert(name, report.covers(estimate, truth));
            bounds.insert(name, report);
        }
    };
    if let Ok(comp) = estimate_complementary(&summary) {
        push(BOUND_COMP, comp_deviation_bound(&summary, config.delta), comp.value);
    }
    if summary.n_ordinary() > 0 && summary.n_complementary() > 0 {
        let w = config.mixture_weight;
        let fixed = estimate_ivw(&summary, &fixed_weight(w)?)?.value;
        push(BOUND_UNION_FIXED, mixture_union_bound(&summary, w, config.delta, None), fixed);
        push(
            BOUND_BERNSTEIN_ORACLE_FIXED,
            bernstein_mixture_bound(
                &summary,
                config.delta,
                BernsteinMode::Oracle { accuracy: truth, weight: w },
                WeightOrigin::Fixed,
            ),
            fixed,
        );
        push(
            BOUND_BERNSTEIN_PLUGIN_FIXED,
            bernstein_mixture_bound(&summary, config.delta, BernsteinMode::PlugIn { weight: w }, WeightOrigin::Fixed),
            fixed,
        );
        let ivw = estimate_ivw_plugin(&summary)?;
        let w_hat = ivw.weight.map(|w| w.weight).unwrap_or(0.5);
        push(BOUND_UNION_IVW, mixture_union_bound(&summary, w_hat, config.delta, None), ivw.value);
        push(
            BOUND_BERNSTEIN_PLUGIN_IVW,
            bernstein_mixture_bound(&summary, config.delta, BernsteinMode::PlugInIvw, WeightOrigin::DataDependent),
            ivw.value,
        );
    }
    Ok(ReplicaOutcome {
        replica,
        summary,
        estimates,
        bounds,
        covered,
    })
}

/// One row of the persisted per-replica table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRow {
    pub replica: u64,
    pub n_ordinary: u64,
    pub s_ordinary: u64,
    pub n_complementary: u64,
    pub s_complementary: u64,
    /// `(value, std_error)` per configured estimator, `None` if not computable.
    pub estimates: Vec<Option<(f64, f64)>>,
    /// `(radius, covered)` per bound arm in [`BOUND_ARMS`] order.
    pub bounds: Vec<Option<(f64, bool)>>,
}

impl ReplicaRow {
    fn from_outcome(outcome: &ReplicaOutcome, methods: &[Method]) -> Self {
        let s = &outcome.summary;
        Self {
            replica: outcome.replica,
            n_ordinary: s.n_ordinary(),
            s_ordinary: s.s_ordinary(),
            n_complementary: s.n_complementary(),
            s_complementary: s.s_complementary(),
            estimates: methods
                .iter()
                .map(|m| outcome.estimates.get(&m.to_string()).map(|e| (e.value, e.std_error)))
                .collect(),
            bounds: BOUND_ARMS
                .iter()
                .map(|(name, _)| {
                    outcome
                        .bounds
                        .get(name)
                        .map(|b| (b.radius, outcome.covered[name]))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub method: Method,
    /// Replicas in which the estimator was computable.
    pub count: u64,
    pub mean: f64,
    /// Across-replica standard deviation (`n - 1` denominator; 0 for one replica).
    pub std_dev: f64,
    pub variance: f64,
    /// Average of the per-replica plug-in standard errors.
    pub mean_std_error: f64,
    pub bias: f64,
}

impl EstimatorStats {
    /// `mean ± std (±mean within-run SE)`, in percent.
    pub fn display_line(&self) -> String {
        format!(
            "{:.2} ± {:.2} (±{:.2})",
            100.0 * self.mean,
            100.0 * self.std_dev,
            100.0 * self.mean_std_error
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub bound: String,
    pub count: u64,
    pub rate: f64,
    pub mean_radius: f64,
    /// False for plug-in or data-dependent Bernstein arms, which are
    /// reported for comparison but carry no guarantee.
    pub guaranteed: bool,
}

/// Closed-form variances at the true accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedVariances {
    pub ordinary: Option<f64>,
    pub complementary: Option<f64>,
    pub optimal_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub n_ordinary: u64,
    pub n_complementary: u64,
    pub expected: ExpectedVariances,
    pub estimators: Vec<EstimatorStats>,
    pub coverage: Vec<CoverageStats>,
    #[serde(skip)]
    pub table: Vec<ReplicaRow>,
}

impl SimulationReport {
    pub fn estimator(&self, method: Method) -> Option<&EstimatorStats> {
        self.estimators.iter().find(|s| s.method == method)
    }

    pub fn coverage_rate(&self, bound: &str) -> Option<f64> {
        self.coverage.iter().find(|c| c.bound == bound).map(|c| c.rate)
    }
}

fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs every replica and aggregates them in replica order.
pub fn run_monte_carlo(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let (n_o, n_c) = config.effective_sizes()?;
    let methods = config.estimators.clone();
    let rows: Vec<ReplicaRow> = with_pool(config.threads, || {
        (0..config.replicas)
            .into_par_iter()
            .map(|r| replica_with_sizes(config, r, n_o, n_c).map(|o| ReplicaRow::from_outcome(&o, &methods)))
            .collect::<Result<Vec<_>>>()
    })??;

    let estimators = methods
        .iter()
        .enumerate()
        .filter_map(|(i, &method)| {
            let (values, ses): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| r.estimates[i]).unzip();
            if values.is_empty() {
                return None;
            }
            let (mean, variance) = mean_and_variance(&values);
            Some(EstimatorStats {
                method,
                count: values.len() as u64,
                mean,
                std_dev: variance.sqrt(),
                variance,
                mean_std_error: ses.iter().sum::<f64>() / ses.len() as f64,
                bias: mean - config.true_accuracy,
            })
        })
        .collect();

    let coverage = BOUND_ARMS
        .iter()
        .enumerate()
        .filter_map(|(i, (name, guaranteed))| {
            let hits: Vec<(f64, bool)> = rows.iter().filter_map(|r| r.bounds[i]).collect();
            if hits.is_empty() {
                return None;
            }
            let n = hits.len() as f64;
            Some(CoverageStats {
                bound: name.to_string(),
                count: hits.len() as u64,
                rate: hits.iter().filter(|h| h.1).count() as f64 / n,
                mean_radius: hits.iter().map(|h| h.0).sum::<f64>() / n,
                guaranteed: *guaranteed,
            })
        })
        .collect();

    let a = config.true_accuracy;
    let k = config.num_options;
    let expected = ExpectedVariances {
        ordinary: variance_ordinary(a, n_o).ok(),
        complementary: variance_complementary(a, k, n_c).ok(),
        optimal_weight: ivw_weight_closed_form(a, k, n_o, n_c).ok().map(|w| w.weight),
    };

    Ok(SimulationReport {
        config: config.clone(),
        n_ordinary: n_o,
        n_complementary: n_c,
        expected,
        estimators,
        coverage,
        table: rows,
    })
}

/// `w² A(1-A)/n_o + (1-w)² (A+K-2)(1-A)/n_c`.
pub fn mixture_variance(weight: f64, accuracy: f64, num_options: usize, n_ordinary: u64, n_complementary: u64) -> Result<f64> {
    Ok(weight * weight * variance_ordinary(accuracy, n_ordinary)?
        + (1.0 - weight).powi(2) * variance_complementary(accuracy, num_options, n_complementary)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub multiplier: f64,
    pub n_complementary: u64,
    /// Closed-form optimal weight at the true accuracy.
    pub optimal_weight: f64,
    pub variance_optimal: f64,
    pub variance_half: f64,
}

/// Optimal-versus-equal weighting as `n_c = multiplier · n_o` grows.
pub fn weight_ablation_sweep(base: &SimulationConfig, multipliers: &[f64]) -> Result<Vec<AblationRow>> {
    let (a, k, n_o) = (base.true_accuracy, base.num_options, base.n_ordinary);
    multipliers
        .iter()
        .map(|&m| {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::domain(format!("multiplier {m} must be positive")));
            }
            let n_c = ((m * n_o as f64).round() as u64).max(1);
            let w = ivw_weight_closed_form(a, k, n_o, n_c)?.weight;
            Ok(AblationRow {
                multiplier: m,
                n_complementary: n_c,
                optimal_weight: w,
                variance_optimal: mixture_variance(w, a, k, n_o, n_c)?,
                variance_half: mixture_variance(0.5, a, k, n_o, n_c)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub delta: f64,
    pub replicas: u64,
    pub arms: Vec<CoverageStats>,
}

/// Fraction of replicas in which each bound covered its estimate's deviation.
///
/// The fixed-weight arms cover `Â_mix` at `config.mixture_weight`; the
/// data-dependent arms cover the plug-in IVW estimate, where only the union
/// bound carries a guarantee.
pub fn coverage_experiment(config: &SimulationConfig, delta: f64) -> Result<CoverageReport> {
    let cfg = SimulationConfig {
        delta,
        ..config.clone()
    };
    let report = run_monte_carlo(&cfg)?;
    Ok(CoverageReport {
        delta,
        replicas: cfg.replicas,
        arms: report.coverage,
    })
}
