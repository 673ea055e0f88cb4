use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use compeval_core::bounds::{comp_deviation_bound, mixture_union_bound, BoundReport, DeltaSplit};
use compeval_core::estimators::{
    estimate_complementary, estimate_ivw, estimate_ivw_held_out, estimate_ivw_plugin, estimate_ml,
    estimate_ordinary, fixed_weight, ivw_weight_plugin, plan_complementary_size, Estimate,
};
use compeval_core::fitness::{select_best, FitnessCandidate, FitnessKind, SelectionResult};
use compeval_core::label_model::{collect, split_for_weight, CollectionMode, ProtocolConfig};
use compeval_core::records::{
    distinct_k, observations, read_annotations, read_items, read_predictions, summarize_by_k,
    summarize_records, write_records, AnnotationRecord,
};
use compeval_core::simulator::{
    run_monte_carlo, weight_ablation_sweep, AblationRow, SamplingMode, SimulationConfig, SimulationReport,
};
use compeval_core::{CountSummary, Error, LabelKind, Method};
use log::{debug, info};
use serde::Serialize;
use thiserror::Error;

use crate::args::{
    CollectArgs, EstimateArgs, FitnessChoice, Format, MethodChoice, ModeChoice, PlanArgs, SamplingChoice,
    SelectArgs, SimulateArgs,
};
use crate::report::{open_input, open_output, write_json, InputDigest, ReportDocument};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Insufficient(_) => 3,
            CliError::Core(e) if e.is_insufficient_data() => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn check_delta(delta: f64) -> CliResult<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("delta {delta} not in (0,1)")))
    }
}

fn read_annotation_file(path: &Path) -> CliResult<Vec<AnnotationRecord>> {
    let records = read_annotations(open_input(path)?)?;
    debug!("read {} annotation records from {}", records.len(), path.display());
    Ok(records)
}

#[derive(Serialize)]
struct EstimateEntry {
    label: String,
    #[serde(flatten)]
    estimate: Estimate,
}

#[derive(Serialize)]
struct Skipped {
    method: String,
    reason: String,
}

#[derive(Serialize)]
struct EstimateResult {
    clamped: bool,
    estimates: Vec<EstimateEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    skipped: Vec<Skipped>,
    bounds: BTreeMap<&'static str, BoundReport>,
}

#[derive(Serialize)]
struct MixedKResult {
    per_k: BTreeMap<usize, InputDigest>,
    error: String,
}

fn run_method(method: Method, summary: &CountSummary, args: &EstimateArgs, records: &[AnnotationRecord]) -> CliResult<Estimate> {
    Ok(match method {
        Method::Ordinary => estimate_ordinary(summary)?,
        Method::Complementary => estimate_complementary(summary)?,
        Method::Ivw => match args.weight_split {
            Some(f) => {
                let (weight_part, rest) = split_for_weight(&observations(records)?, f, summary.num_options())?;
                estimate_ivw_held_out(&weight_part, &rest)?
            }
            None => estimate_ivw_plugin(summary)?,
        },
        Method::IvwFixed(w) => estimate_ivw(summary, &fixed_weight(w)?)?,
        Method::Ml => estimate_ml(summary)?,
        Method::OneStepNewton => return Err(invalid("one-step Newton is not available here")),
    })
}

pub fn estimate(args: &EstimateArgs) -> CliResult<()> {
    check_delta(args.delta)?;
    let records = read_annotation_file(&args.input)?;
    let ks = distinct_k(&records);
    if ks.len() > 1 {
        let msg = format!("input mixes option counts k = {ks:?}; estimators need a single k");
        if args.allow_mixed_k {
            let per_k = summarize_by_k(&records)?
                .into_iter()
                .map(|(k, s)| {
                    let n = records.iter().filter(|r| r.k == k).count();
                    (k, InputDigest::new(n, &s))
                })
                .collect();
            let doc = ReportDocument::new("estimate", args, MixedKResult { per_k, error: msg.clone() });
            write_json(args.output.as_deref(), &doc)?;
        }
        return Err(invalid(msg));
    }
    let summary = summarize_records(&records)?;
    let all = args.method == MethodChoice::All;

    let mut estimates = Vec::new();
    let mut skipped = Vec::new();
    for method in args.method.methods() {
        match run_method(method, &summary, args, &records) {
            Ok(mut estimate) => {
                if args.clamp {
                    estimate.value = estimate.clamped_value;
                }
                estimates.push(EstimateEntry {
                    label: method.to_string(),
                    estimate,
                });
            }
            Err(e) if all && e.exit_code() == 3 => skipped.push(Skipped {
                method: method.to_string(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if estimates.is_empty() {
        return Err(CliError::Insufficient("no estimator could be computed".into()));
    }

    let mut bounds = BTreeMap::new();
    if summary.n_complementary() > 0 {
        bounds.insert("complementary", comp_deviation_bound(&summary, args.delta)?);
    }
    if summary.n_ordinary() > 0 && summary.n_complementary() > 0 {
        let weight = match args.method {
            MethodChoice::IvwFixed(w) => w,
            _ => match estimates.iter().find_map(|e| e.estimate.weight.as_ref()) {
                Some(w) => w.weight,
                None => ivw_weight_plugin(&summary)?.weight,
            },
        };
        let split = args.delta_split.map(|p| DeltaSplit::new(p.0, p.1)).transpose()?;
        bounds.insert("union", mixture_union_bound(&summary, weight, args.delta, split)?);
    }

    let result = EstimateResult {
        clamped: args.clamp,
        estimates,
        skipped,
        bounds,
    };
    match args.format {
        Format::Json => {
            let doc = ReportDocument::new("estimate", args, result).with_input(InputDigest::new(records.len(), &summary));
            write_json(args.output.as_deref(), &doc)?;
        }
        Format::Csv => write_estimate_csv(args, &result)?,
    }
    Ok(())
}

fn write_estimate_csv(args: &EstimateArgs, result: &EstimateResult) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(open_output(args.output.as_deref())?);
    w.write_record(["record_type", "name", "value", "std_error", "clamped_value", "weight", "delta"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for e in &result.estimates {
        let est = &e.estimate;
        w.write_record([
            "estimate".to_string(),
            e.label.clone(),
            est.value.to_string(),
            est.std_error.to_string(),
            est.clamped_value.to_string(),
            opt(est.weight.as_ref().map(|w| w.weight)),
            String::new(),
        ])?;
    }
    for (name, b) in &result.bounds {
        w.write_record([
            "bound".to_string(),
            name.to_string(),
            b.radius.to_string(),
            String::new(),
            String::new(),
            opt(b.weight_used),
            b.delta.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn plan(args: &PlanArgs) -> CliResult<()> {
    let mut digest = None;
    let (pilot, k, n_o) = match &args.pilot_from {
        Some(path) => {
            let records = read_annotation_file(path)?;
            let summary = summarize_records(&records)?;
            if args.k.is_some_and(|k| k != summary.num_options()) {
                return Err(invalid(format!("--k disagrees with k={} in {}", summary.num_options(), path.display())));
            }
            let pilot = estimate_ordinary(&summary)?.value;
            digest = Some(InputDigest::new(records.len(), &summary));
            (pilot, summary.num_options(), args.n_ord.unwrap_or(summary.n_ordinary()))
        }
        None => (
            args.pilot.ok_or_else(|| invalid("--pilot or --pilot-from is required"))?,
            args.k.ok_or_else(|| invalid("--k is required with --pilot"))?,
            args.n_ord.ok_or_else(|| invalid("--n-ord is required with --pilot"))?,
        ),
    };
    if !(pilot > 0.0 && pilot <= 1.0) {
        return Err(invalid(format!(
            "pilot accuracy {pilot} must be in (0,1]; at zero no complementary set matches the ordinary variance"
        )));
    }
    let result = plan_complementary_size(pilot, k, n_o)?;
    let mut doc = ReportDocument::new("plan", args, result);
    if let Some(d) = digest {
        doc = doc.with_input(d);
    }
    write_json(args.output.as_deref(), &doc)?;
    Ok(())
}

pub fn collect_cmd(args: &CollectArgs) -> CliResult<()> {
    let records = read_items(open_input(&args.input)?)?;
    if records.is_empty() {
        return Err(CliError::Insufficient("no items".into()));
    }
    let k = records[0].k;
    if let Some(r) = records.iter().find(|r| r.k != k) {
        return Err(invalid(format!("item {} has k={}, expected {k}", r.id, r.k)));
    }
    if let Some(r) = records.iter().find(|r| r.truth_index.is_none()) {
        return Err(invalid(format!("item {} has no truth_index", r.id)));
    }
    let items = records.iter().map(|r| r.to_item()).collect::<Result<Vec<_>, _>>()?;
    let mode = match args.mode {
        ModeChoice::Routed => CollectionMode::Routed,
        ModeChoice::Forced {
            n_ordinary,
            n_complementary,
        } => CollectionMode::Forced {
            n_ordinary,
            n_complementary,
        },
        ModeChoice::Exhaustive => CollectionMode::Exhaustive {
            keep_ordinary: args.keep_ordinary,
        },
    };
    if args.keep_ordinary && args.mode != ModeChoice::Exhaustive {
        return Err(invalid("--keep-ordinary applies to exhaustive mode only"));
    }
    let config = ProtocolConfig::new(k, args.seed)?;
    let collected = collect(&items, &config, mode)?;
    let out: Vec<AnnotationRecord> = collected.iter().map(AnnotationRecord::from_collected).collect();
    let n_ord = out.iter().filter(|r| r.label_type == LabelKind::Ordinary).count();
    info!("collected {} ordinary and {} complementary rows", n_ord, out.len() - n_ord);
    let mut w = open_output(args.output.as_deref())?;
    write_records(&mut w, &out)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateResult {
    #[serde(flatten)]
    report: SimulationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    ablation: Option<Vec<AblationRow>>,
}

pub fn simulation_config(args: &SimulateArgs) -> CliResult<SimulationConfig> {
    let estimators = args
        .estimators
        .iter()
        .map(|m| match m {
            MethodChoice::All => Err(invalid("`all` is not an estimator; list them")),
            m => Ok(m.methods()[0]),
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SimulationConfig {
        true_accuracy: args.accuracy,
        num_options: args.k,
        n_ordinary: args.n_ord,
        n_complementary: args.n_comp,
        replicas: args.replicas,
        seed: args.seed,
        estimators,
        planner_mode: args.planner,
        error_skew: args.error_skew.clone(),
        exhaustive_split: args.exhaustive,
        sampling: match args.sampling {
            SamplingChoice::Forced => SamplingMode::ForcedSplit,
            SamplingChoice::Routed => SamplingMode::Routed,
        },
        delta: args.delta,
        mixture_weight: args.mixture_weight,
        threads: args.threads,
    })
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    if args.threads == Some(0) {
        return Err(invalid("--threads must be at least 1"));
    }
    let config = simulation_config(args)?;
    let report = run_monte_carlo(&config)?;
    let ablation = args
        .ablation
        .as_deref()
        .map(|m| weight_ablation_sweep(&config, m))
        .transpose()?;
    if let Some(path) = &args.dump_replicas {
        let mut w = open_output(Some(path))?;
        write_records(&mut w, &report.table)?;
        w.flush()?;
        info!("wrote {} replica rows to {}", report.table.len(), path.display());
    }
    let doc = ReportDocument::new("simulate", args, SimulateResult { report, ablation }).with_seed(args.seed);
    write_json(args.output.as_deref(), &doc)?;
    Ok(())
}

#[derive(Serialize)]
struct SelectResult {
    #[serde(flatten)]
    selection: SelectionResult,
    /// Choice under the other fitness signal; always the same candidate.
    other_signal_choice: String,
    argmax_invariant: bool,
    ordinary_rows_ignored: usize,
}

fn load_candidates(dir: &PathBuf, ids: &[String]) -> CliResult<Vec<FitnessCandidate>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == "jsonl"));
    paths.sort();
    if paths.is_empty() {
        return Err(invalid(format!("no candidate files (*.jsonl) in {}", dir.display())));
    }
    paths
        .iter()
        .map(|path| {
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let mut by_id = HashMap::new();
            for r in read_predictions(open_input(path)?)? {
                if by_id.insert(r.id.clone(), r.prediction_index).is_some_and(|p| p != r.prediction_index) {
                    return Err(invalid(format!("{name}: conflicting predictions for item {}", r.id)));
                }
            }
            let predictions = ids
                .iter()
                .map(|id| {
                    by_id
                        .get(id)
                        .copied()
                        .ok_or_else(|| invalid(format!("{name}: no prediction for item {id}")))
                })
                .collect::<CliResult<_>>()?;
            Ok(FitnessCandidate::new(name, predictions))
        })
        .collect()
}

pub fn select(args: &SelectArgs) -> CliResult<()> {
    let records = read_annotation_file(&args.comp)?;
    let summary = summarize_records(&records)?;
    let comp: Vec<AnnotationRecord> = records
        .iter()
        .filter(|r| r.label_type == LabelKind::Complementary)
        .cloned()
        .collect();
    if comp.is_empty() {
        return Err(CliError::Insufficient("no complementary rows".into()));
    }
    let obs = observations(&comp)?;
    let ids: Vec<String> = comp.iter().map(|r| r.id.clone()).collect();
    let candidates = load_candidates(&args.candidates, &ids)?;
    let k = summary.num_options();
    let (kind, other) = match args.fitness {
        FitnessChoice::Q => (FitnessKind::RawQ, FitnessKind::Transformed),
        FitnessChoice::Transformed => (FitnessKind::Transformed, FitnessKind::RawQ),
    };
    let selection = select_best(&candidates, &obs, kind, k)?;
    let alt = select_best(&candidates, &obs, other, k)?;
    let result = SelectResult {
        argmax_invariant: alt.chosen_id == selection.chosen_id,
        other_signal_choice: alt.chosen_id,
        selection,
        ordinary_rows_ignored: records.len() - comp.len(),
    };
    let doc = ReportDocument::new("select", args, result).with_input(InputDigest::new(records.len(), &summary));
    write_json(args.output.as_deref(), &doc)?;
    Ok(())
}
