use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rpens::base::{default_k, BaseKind};
use rpens::datagen::{ModelId, ModelSpec, DEFAULT_ROTATION_SEED};
use rpens::ensemble::{AlphaRule, EnsembleConfig, Estimator};
use rpens::ProjectionKind;

#[derive(Parser, Debug)]
#[command(name = "rpens", version, about = "Random-projection ensemble classification")]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for any long flag.
    /// Flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Cap on worker threads. Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Repeated train/test experiments on a simulation model or a CSV file.
    Simulate(SimulateArgs),
    /// Fit an ensemble on a CSV file and save it.
    Fit(FitArgs),
    /// Classify the rows of a CSV file with a saved ensemble.
    Predict(PredictArgs),
    /// Choose the projected dimension by the mean selected-projection error.
    #[command(name = "select-d")]
    SelectD(SelectDArgs),
    /// Monte Carlo diagnostics for the number of projections and the excess risk.
    #[command(subcommand)]
    Diagnose(Diagnose),
    /// Monte Carlo Bayes risk of a simulation model.
    #[command(name = "bayes-risk")]
    BayesRisk(BayesRiskArgs),
}

#[derive(Subcommand, Debug)]
pub enum Diagnose {
    /// Gap between B1-member and large ensembles over a grid of B1.
    Rate(RateArgs),
    /// Ensemble excess risk against the single-projection bound.
    Bound(BoundArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BaseArg {
    Lda,
    Qda,
    Knn,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EstimatorArg {
    Resub,
    Loo,
    Split,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProjectionArg {
    Haar,
    Axis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Comparator {
    Lda,
    Qda,
    Knn,
}

/// A voting threshold; `None` means estimate it from the training data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alpha(pub Option<f64>);

fn parse_alpha(s: &str) -> Result<Alpha, String> {
    if s == "auto" {
        return Ok(Alpha(None));
    }
    let v: f64 = s.parse().map_err(|_| format!("expected `auto` or a number, got {s:?}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(Alpha(Some(v)))
    } else {
        Err(format!("alpha must lie in (0,1), got {v}"))
    }
}

fn parse_model(s: &str) -> Result<ModelId, String> {
    let v: u8 = s.parse().map_err(|_| format!("model must be 1, 2, 3 or 4, got {s:?}"))?;
    ModelId::try_from(v).map_err(|e| e.to_string())
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0,1), got {v}"))
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer, got {s:?}")),
        Ok(v) => Ok(v),
    }
}

/// Settings shared by every command that fits ensembles.
#[derive(Args, Debug, Clone)]
pub struct EnsembleArgs {
    /// Base classifier.
    #[arg(long, value_enum, default_value = "qda")]
    pub base: BaseArg,
    /// Neighbours for the kNN base; default max(3, round(sqrt(n))).
    #[arg(long, value_parser = parse_positive)]
    pub k: Option<usize>,
    /// Number of ensemble members (blocks).
    #[arg(long = "B1", default_value_t = 100, value_parser = parse_positive)]
    pub b1: usize,
    /// Projections drawn per block.
    #[arg(long = "B2", default_value_t = 100, value_parser = parse_positive)]
    pub b2: usize,
    /// Error estimate used for selection; default resub for LDA, loo otherwise.
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    /// Fraction held out when `--estimator split`.
    #[arg(long, default_value_t = 0.5, value_parser = parse_unit)]
    pub holdout: f64,
    #[arg(long, value_enum, default_value = "haar")]
    pub projection: ProjectionArg,
    /// Voting threshold: `auto` or a number in (0,1).
    #[arg(long, default_value = "auto", value_parser = parse_alpha)]
    pub alpha: Alpha,
}

impl EnsembleArgs {
    /// Configuration for projected dimension `d` and `n` training points.
    pub fn config(&self, d: usize, n: usize, seed: u64) -> EnsembleConfig {
        let base = match self.base {
            BaseArg::Lda => BaseKind::Lda,
            BaseArg::Qda => BaseKind::Qda,
            BaseArg::Knn => BaseKind::Knn {
                k: self.k.unwrap_or_else(|| default_k(n)),
            },
        };
        let mut cfg = EnsembleConfig::new(d, base);
        cfg.b1 = self.b1;
        cfg.b2 = self.b2;
        cfg.seed = seed;
        cfg.estimator = match self.estimator {
            None => Estimator::default_for(base),
            Some(EstimatorArg::Resub) => Estimator::Resubstitution,
            Some(EstimatorArg::Loo) => Estimator::LeaveOneOut,
            Some(EstimatorArg::Split) => Estimator::SampleSplit { holdout: self.holdout },
        };
        cfg.projection = match self.projection {
            ProjectionArg::Haar => ProjectionKind::Haar,
            ProjectionArg::Axis => ProjectionKind::AxisAligned,
        };
        cfg.alpha = match self.alpha.0 {
            None => AlphaRule::DataDriven,
            Some(value) => AlphaRule::Fixed { value },
        };
        cfg
    }
}

/// A simulation model.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Simulation model, 1 to 4.
    #[arg(long, value_parser = parse_model)]
    pub model: ModelId,
    #[arg(long, default_value_t = 50, value_parser = parse_positive)]
    pub p: usize,
    /// Prior probability of class 1.
    #[arg(long, default_value_t = 0.5, value_parser = parse_unit)]
    pub pi1: f64,
    /// Seed of the fixed rotation in model 4.
    #[arg(long, default_value_t = DEFAULT_ROTATION_SEED)]
    pub rotation_seed: u64,
}

impl ModelArgs {
    pub fn spec(&self) -> rpens::Result<ModelSpec> {
        ModelSpec::new(self.model, self.p, self.pi1, self.rotation_seed)
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Simulation model, 1 to 4 (or use --data).
    #[arg(long, value_parser = parse_model, required_unless_present = "data", conflicts_with = "data")]
    pub model: Option<ModelId>,
    /// CSV file to subsample instead of a model.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 50, value_parser = parse_positive)]
    pub p: usize,
    #[arg(long, default_value_t = 0.5, value_parser = parse_unit)]
    pub pi1: f64,
    #[arg(long, default_value_t = DEFAULT_ROTATION_SEED)]
    pub rotation_seed: u64,
    /// Training-set size.
    #[arg(long, value_parser = parse_positive)]
    pub n: usize,
    /// Test-set size (model sources only).
    #[arg(long, default_value_t = 1000, value_parser = parse_positive)]
    pub n_test: usize,
    /// Projected dimension.
    #[arg(long, value_parser = parse_positive)]
    pub d: usize,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 20, value_parser = parse_positive)]
    pub reps: usize,
    /// Unprojected comparators to run alongside, e.g. `lda,knn`.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub compare: Vec<Comparator>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for records.csv and summary.csv.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Training CSV.
    #[arg(long, value_name = "FILE")]
    pub train: PathBuf,
    #[arg(long, value_parser = parse_positive)]
    pub d: usize,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the fitted model.
    #[arg(long, value_name = "FILE")]
    pub model_out: PathBuf,
    /// Directory for plot data: threshold curves and the winners' error ECDF.
    #[arg(long, value_name = "DIR")]
    pub plots: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// A model written by `fit`.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// CSV to classify; its label column is used to report the error rate.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Output CSV (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelectDArgs {
    #[arg(long, value_name = "FILE")]
    pub train: PathBuf,
    /// Candidate dimensions, e.g. `1,2,3,4,5`.
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_positive)]
    pub candidates: Vec<usize>,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_parser = parse_positive)]
    pub n: usize,
    #[arg(long, default_value_t = 2000, value_parser = parse_positive)]
    pub n_test: usize,
    #[arg(long, value_parser = parse_positive)]
    pub d: usize,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Ascending B1 values, e.g. `8,16,32,64,128,256`.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256", value_parser = parse_positive)]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 30, value_parser = parse_positive)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_parser = parse_positive)]
    pub n: usize,
    #[arg(long, value_parser = parse_positive)]
    pub d: usize,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 20_000, value_parser = parse_positive)]
    pub mc_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct BayesRiskArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1_000_000, value_parser = parse_positive)]
    pub mc_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Folds a `--config` file into the argument list. Each `key = value`
/// line becomes `--key value` unless that flag is already present, so clap
/// validates file values exactly like flags.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>, String> {
    let mut out = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or("--config needs a file")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            out.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(out);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected `key = value`", lineno + 1))?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(format!("{path}:{}: bad key {key:?}", lineno + 1));
        }
        if key == "config" {
            return Err(format!("{path}:{}: config files cannot nest", lineno + 1));
        }
        let flag = format!("--{key}");
        let given = out.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if !given {
            out.push(flag);
            out.push(value.trim().to_string());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nseed = 9\nreps=3\n\n--B1 = 7\n").unwrap();
        let args = strings(&["rpens", "simulate", "--seed", "1", "--config", path.to_str().unwrap()]);
        let out = expand_config(args).unwrap();
        assert_eq!(out, strings(&["rpens", "simulate", "--seed", "1", "--reps", "3", "--B1", "7"]));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "seed 9\n").unwrap();
        let arg = format!("--config={}", path.display());
        assert!(expand_config(strings(&["rpens", &arg])).is_err());
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!(parse_alpha("auto"), Ok(Alpha(None)));
        assert_eq!(parse_alpha("0.25"), Ok(Alpha(Some(0.25))));
        assert!(parse_alpha("1").is_err());
    }
}
