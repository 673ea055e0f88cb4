use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use compeval_core::Method;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "compeval", version, about = "Estimate top-1 accuracy from ordinary and complementary labels")]
pub struct Cli {
    /// Log diagnostics to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate accuracy and deviation bounds from an annotation file.
    Estimate(EstimateArgs),
    /// Complementary sample size matching the variance of an ordinary set.
    Plan(PlanArgs),
    /// Run the labeling protocol over ground-truthed items.
    Collect(CollectArgs),
    /// Monte Carlo check of estimators and bounds.
    Simulate(SimulateArgs),
    /// Pick the best candidate by complementary accuracy.
    Select(SelectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    All,
    Ord,
    Comp,
    Ivw,
    IvwFixed(f64),
    Ml,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::All => vec![Method::Ordinary, Method::Complementary, Method::Ivw, Method::Ml],
            MethodChoice::Ord => vec![Method::Ordinary],
            MethodChoice::Comp => vec![Method::Complementary],
            MethodChoice::Ivw => vec![Method::Ivw],
            MethodChoice::IvwFixed(w) => vec![Method::IvwFixed(w)],
            MethodChoice::Ml => vec![Method::Ml],
        }
    }
}

impl FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "all" => MethodChoice::All,
            "ord" => MethodChoice::Ord,
            "comp" => MethodChoice::Comp,
            "ivw" => MethodChoice::Ivw,
            "ml" => MethodChoice::Ml,
            other => match other.strip_prefix("ivw-fixed=") {
                Some(w) => {
                    let w: f64 = w.parse().map_err(|_| format!("bad weight in {other:?}"))?;
                    if !(0.0..=1.0).contains(&w) {
                        return Err(format!("weight {w} not in [0,1]"));
                    }
                    MethodChoice::IvwFixed(w)
                }
                None => return Err(format!("unknown method {other:?} (all|ord|comp|ivw|ivw-fixed=W|ml)")),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Two comma-separated reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pair(pub f64, pub f64);

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected A,B, got {s:?}"))?;
        let p = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("bad number {x:?}"));
        Ok(Pair(p(a)?, p(b)?))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// Annotation file (line-delimited JSON); `-` reads stdin.
    pub input: PathBuf,
    /// all | ord | comp | ivw | ivw-fixed=W | ml
    #[arg(long, default_value = "all")]
    pub method: MethodChoice,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Report estimates clamped to [0,1] as the primary value.
    #[arg(long)]
    pub clamp: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Union-bound confidence split as DELTA_ORD,DELTA_COMP (default: even).
    #[arg(long)]
    pub delta_split: Option<Pair>,
    /// Estimate the IVW weight on this leading fraction of rows and the
    /// mixture on the rest.
    #[arg(long)]
    pub weight_split: Option<f64>,
    /// Accept files mixing option counts; reports per-k counts and fails.
    #[arg(long)]
    pub allow_mixed_k: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PlanArgs {
    /// Assumed accuracy in (0,1].
    #[arg(long, required_unless_present = "pilot_from", conflicts_with = "pilot_from")]
    pub pilot: Option<f64>,
    /// Number of options; taken from the file with --pilot-from.
    #[arg(long)]
    pub k: Option<usize>,
    /// Ordinary set size; taken from the file with --pilot-from.
    #[arg(long)]
    pub n_ord: Option<u64>,
    /// Annotation file whose ordinary estimate is the pilot.
    #[arg(long)]
    pub pilot_from: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    Routed,
    Forced { n_ordinary: usize, n_complementary: usize },
    Exhaustive,
}

impl FromStr for ModeChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "routed" => Ok(ModeChoice::Routed),
            "exhaustive" => Ok(ModeChoice::Exhaustive),
            other => {
                let sizes = other
                    .strip_prefix("forced:")
                    .ok_or_else(|| format!("unknown mode {other:?} (routed|forced:NO,NC|exhaustive)"))?;
                let (a, b) = sizes.split_once(',').ok_or("forced mode needs NO,NC")?;
                let p = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad count {x:?}"));
                Ok(ModeChoice::Forced {
                    n_ordinary: p(a)?,
                    n_complementary: p(b)?,
                })
            }
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CollectArgs {
    /// Items with `id`, `k`, `truth_index`, `prediction_index`; `-` reads stdin.
    pub input: PathBuf,
    /// Falls back to the SEED environment variable, then 0.
    #[arg(long, env = "SEED", default_value_t = 0)]
    pub seed: u64,
    /// routed | forced:NO,NC | exhaustive
    #[arg(long, default_value = "routed")]
    pub mode: ModeChoice,
    /// Keep the ordinary row of each item in exhaustive mode.
    #[arg(long)]
    pub keep_ordinary: bool,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingChoice {
    Forced,
    Routed,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.7)]
    pub accuracy: f64,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 300)]
    pub n_ord: u64,
    #[arg(long, default_value_t = 300)]
    pub n_comp: u64,
    #[arg(long, default_value_t = 3)]
    pub replicas: u64,
    #[arg(long, env = "SEED", default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated: ord, comp, ivw, ivw-fixed=W, ml.
    #[arg(long, value_delimiter = ',', default_value = "ord,comp,ivw,ivw-fixed=0.5,ml")]
    pub estimators: Vec<MethodChoice>,
    /// Set the complementary size with the variance-matching planner.
    #[arg(long)]
    pub planner: bool,
    /// Wrong-prediction distribution over the K-1 non-truth classes.
    #[arg(long, value_delimiter = ',')]
    pub error_skew: Option<Vec<f64>>,
    /// All K-1 complementary labels per ordinary item.
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long, value_enum, default_value_t = SamplingChoice::Forced)]
    pub sampling: SamplingChoice,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Weight of the fixed-weight mixture used by the bounds.
    #[arg(long, default_value_t = 0.5)]
    pub mixture_weight: f64,
    /// Also report the optimal-vs-equal weight sweep at these n_c/n_o multipliers.
    #[arg(long, value_delimiter = ',')]
    pub ablation: Option<Vec<f64>>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Write the per-replica table (line-delimited JSON) here.
    #[arg(long)]
    pub dump_replicas: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessChoice {
    Q,
    Transformed,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    /// Directory of candidate prediction files (`*.jsonl`, id = file stem).
    pub candidates: PathBuf,
    /// Complementary annotation file shared by all candidates.
    pub comp: PathBuf,
    #[arg(long, value_enum, default_value_t = FitnessChoice::Q)]
    pub fitness: FitnessChoice,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_choices() {
        assert_eq!("ivw-fixed=0.25".parse::<MethodChoice>().unwrap(), MethodChoice::IvwFixed(0.25));
        assert!("ivw-fixed=2".parse::<MethodChoice>().is_err());
        assert_eq!(
            "forced:10,20".parse::<ModeChoice>().unwrap(),
            ModeChoice::Forced { n_ordinary: 10, n_complementary: 20 }
        );
        assert!("forced:10".parse::<ModeChoice>().is_err());
        assert_eq!("0.01, 0.04".parse::<Pair>().unwrap(), Pair(0.01, 0.04));
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
