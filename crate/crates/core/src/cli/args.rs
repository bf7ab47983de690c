use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::oracle::LineAxis;
use crate::rng::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(
    name = "ckde",
    version,
    about = "Gaussian KDE with exact sampling under linear equality constraints"
)]
pub struct Cli {
    /// Seed for all random streams (corpus, sampling, validation).
    #[arg(long, global = true, env = "CKDE_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trajectory corpus, optionally windowed into profiles.
    Synth(SynthArgs),
    /// Cut a trajectory CSV into fixed-length speed profiles.
    Window(WindowArgs),
    /// Choose a bandwidth (and optional reduced basis) and write a model file.
    Fit(FitArgs),
    /// Draw unconstrained samples from a model.
    Sample(SampleArgs),
    /// Draw samples satisfying a linear equality constraint.
    Csample(CsampleArgs),
    /// Tabulate the conditional density along a one-dimensional constraint line.
    Oracle(OracleArgs),
    /// Check constrained samples against the constraint and the density line.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Trajectory CSV to write (`vehicle_id,t,speed`).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub vehicles: usize,
    /// Seconds per trajectory.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    /// Sampling interval in seconds.
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    #[arg(long, default_value_t = 0.0)]
    pub speed_min: f64,
    #[arg(long, default_value_t = 40.0)]
    pub speed_max: f64,
    #[arg(long, default_value_t = -1.5, allow_hyphen_values = true)]
    pub accel_min: f64,
    #[arg(long, default_value_t = 1.5, allow_hyphen_values = true)]
    pub accel_max: f64,
    /// Shortest constant-acceleration segment, seconds.
    #[arg(long, default_value_t = 1.0)]
    pub segment_min: f64,
    /// Longest constant-acceleration segment, seconds.
    #[arg(long, default_value_t = 4.0)]
    pub segment_max: f64,
    /// Also write windowed speed profiles here.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[command(flatten)]
    pub window: WindowShape,
}

#[derive(Debug, Args)]
pub struct WindowShape {
    /// Intervals per profile; profiles hold `n_t + 1` speeds.
    #[arg(long, default_value_t = 50)]
    pub n_t: usize,
    /// Profile sampling interval in seconds (defaults to the series interval for `synth`, 0.1 for `window`).
    #[arg(long)]
    pub profile_dt: Option<f64>,
    /// Grid steps between window starts (defaults to `n_t`, i.e. no overlap).
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Trajectory CSV with columns `vehicle_id,t,speed`.
    #[arg(long)]
    pub input: PathBuf,
    /// Profile CSV to write (`p1..p{n_t+1}`).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub window: WindowShape,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Data CSV with a header row, one point per row.
    #[arg(long)]
    pub data: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// `silverman`, `silverman:K` (column K only), `cv`, `cv:h1,h2,...` or `file:H.json`.
    #[arg(long, default_value = "silverman")]
    pub bandwidth: BandwidthSpec,
    /// Fit on the raw columns instead of standardized ones.
    #[arg(long)]
    pub no_standardize: bool,
    /// Reduce the data to this many SVD coordinates before fitting.
    #[arg(long)]
    pub d_red: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(short, long, default_value_t = 1000)]
    pub m: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Write reduced coordinates instead of decoded profiles.
    #[arg(long)]
    pub reduced: bool,
}

#[derive(Debug, Args)]
pub struct ConstraintArgs {
    /// Constraint `A x = b` as a JSON file `{"A": [[..]], "b": [..]}` or inline `[[..]],[..]`.
    #[arg(long, conflicts_with_all = ["init_speed", "init_accel", "end_speed"])]
    pub constraint: Option<String>,
    /// Initial speed of the profile, m/s (needs a reduced model).
    #[arg(long)]
    pub init_speed: Option<f64>,
    /// Initial forward-difference acceleration, m/s^2.
    #[arg(
        long,
        requires = "init_speed",
        conflicts_with = "end_speed",
        allow_hyphen_values = true
    )]
    pub init_accel: Option<f64>,
    /// Final speed of the profile, m/s.
    #[arg(long, requires = "init_speed")]
    pub end_speed: Option<f64>,
    /// Profile sampling interval used by `--init-accel`.
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
}

#[derive(Debug, Args)]
pub struct CsampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub constraint: ConstraintArgs,
    #[arg(short, long, default_value_t = 50)]
    pub m: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Write reduced coordinates instead of decoded profiles.
    #[arg(long)]
    pub reduced: bool,
    /// Also write a histogram of the samples along `--axis`.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// `pK` for model coordinate K, or `free`; defaults to the first usable coordinate.
    #[arg(long)]
    pub axis: Option<AxisSpec>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub constraint: ConstraintArgs,
    /// Grid CSV to write (`x,density`).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub axis: Option<AxisSpec>,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    /// Grid start; defaults to cover every weighted kernel.
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Sample CSV produced by `csample`.
    #[arg(long)]
    pub samples: PathBuf,
    #[command(flatten)]
    pub constraint: ConstraintArgs,
    /// Grid CSV from `oracle`; computed when absent.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// Largest accepted total-variation distance.
    #[arg(long, default_value_t = 0.02)]
    pub tv_max: f64,
    /// Largest accepted `||A x - b|| / (1 + ||b||)`.
    #[arg(long, default_value_t = 1e-8)]
    pub residual_tol: f64,
    /// Also write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Bandwidth selection rule for `fit`.
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthSpec {
    Silverman,
    /// Rule of thumb on one column (zero-based).
    SilvermanColumn(usize),
    CrossValidation(Vec<f64>),
    File(PathBuf),
}

/// Candidate scale factors tried by `cv` without an explicit list.
pub fn default_cv_grid() -> Vec<f64> {
    (0..30)
        .map(|k| 0.05 * 40f64.powf(k as f64 / 29.0))
        .collect()
}

impl FromStr for BandwidthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        match (kind, rest) {
            ("silverman", None) => Ok(Self::Silverman),
            ("silverman", Some(col)) => match col.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(Self::SilvermanColumn(k - 1)),
                _ => Err(Error::Parse(format!(
                    "bad column {col:?}, expected 1, 2, ..."
                ))),
            },
            ("cv", None) => Ok(Self::CrossValidation(default_cv_grid())),
            ("cv", Some(list)) => list
                .split(',')
                .map(|h| {
                    h.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad bandwidth {h:?}")))
                })
                .collect::<Result<Vec<f64>>>()
                .map(Self::CrossValidation),
            ("file", Some(path)) => Ok(Self::File(PathBuf::from(path))),
            _ => Err(Error::Parse(format!(
                "unknown bandwidth {s:?}; use silverman, silverman:K, cv, cv:h1,h2,... or file:PATH"
            ))),
        }
    }
}

/// Line parametrization chosen on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisSpec(pub LineAxis);

impl FromStr for AxisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "free" {
            return Ok(Self(LineAxis::Free));
        }
        match s.strip_prefix('p').and_then(|k| k.parse::<usize>().ok()) {
            Some(k) if k >= 1 => Ok(Self(LineAxis::Raw(k - 1))),
            _ => Err(Error::Parse(format!(
                "bad axis {s:?}; use p1, p2, ... or free"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn bandwidth_specs() {
        assert_eq!(
            "silverman".parse::<BandwidthSpec>().unwrap(),
            BandwidthSpec::Silverman
        );
        assert_eq!(
            "silverman:2".parse::<BandwidthSpec>().unwrap(),
            BandwidthSpec::SilvermanColumn(1)
        );
        assert_eq!(
            "cv:0.1, 0.5".parse::<BandwidthSpec>().unwrap(),
            BandwidthSpec::CrossValidation(vec![0.1, 0.5])
        );
        assert_eq!(
            "file:h.json".parse::<BandwidthSpec>().unwrap(),
            BandwidthSpec::File("h.json".into())
        );
        assert!("silverman:0".parse::<BandwidthSpec>().is_err());
        assert!("scott".parse::<BandwidthSpec>().is_err());
        let grid = default_cv_grid();
        assert!((grid[0] - 0.05).abs() < 1e-15 && (grid[29] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn axis_specs() {
        assert_eq!("p1".parse::<AxisSpec>().unwrap().0, LineAxis::Raw(0));
        assert_eq!("free".parse::<AxisSpec>().unwrap().0, LineAxis::Free);
        assert!("p0".parse::<AxisSpec>().is_err());
        assert!("x".parse::<AxisSpec>().is_err());
    }

    #[test]
    fn endpoint_flags_conflict() {
        let parse = |args: &[&str]| Cli::try_parse_from(args);
        assert!(parse(&[
            "ckde",
            "csample",
            "--model",
            "m",
            "--out",
            "o",
            "--init-speed",
            "15",
            "--init-accel",
            "-1"
        ])
        .is_ok());
        assert!(parse(&[
            "ckde",
            "csample",
            "--model",
            "m",
            "--out",
            "o",
            "--init-accel",
            "1"
        ])
        .is_err());
        assert!(parse(&[
            "ckde",
            "csample",
            "--model",
            "m",
            "--out",
            "o",
            "--init-speed",
            "1",
            "--init-accel",
            "1",
            "--end-speed",
            "2"
        ])
        .is_err());
        assert!(parse(&[
            "ckde",
            "csample",
            "--model",
            "m",
            "--out",
            "o",
            "--constraint",
            "x",
            "--init-speed",
            "1"
        ])
        .is_err());
    }
}
