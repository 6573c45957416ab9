use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "epsapprox", version, about = "Deterministic ε-approximations, scan statistics and sentinels")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for parallel inner loops.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Generate low-discrepancy point sets.
    #[command(subcommand)]
    Gen(Gen),
    /// Beck-Fiala coloring of the canonical subsets of a point set.
    Color(ColorArgs),
    /// ε-approximation of a weighted point set.
    Approx(ApproxArgs),
    /// Oracle error of an approximation against a point set or terrain.
    Eval(EvalArgs),
    /// Scan statistic maximization.
    Scan(ScanArgs),
    /// Terrain approximation.
    #[command(subcommand)]
    Terrain(TerrainCmd),
    /// Gaussian approximation.
    #[command(subcommand)]
    Gaussian(GaussianCmd),
    /// ε-sentinels for cut detection.
    Sentinel(SentinelArgs),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Gen {
    /// Van der Corput set of n points.
    Vdc {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Irrational lattice of m points.
    Lattice {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stretched Van der Corput set on a linear patch.
    Stretched {
        #[arg(long)]
        n: usize,
        /// JSON `{"rect": {"lo": [..], "hi": [..]}, "height": {"alpha", "beta", "gamma"}}`.
        #[arg(long)]
        patch: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// `rect` or `kdir:<dirs.json>` with a JSON list of 2D directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FamilyArg {
    Rect,
    Kdir(PathBuf),
}

impl FromStr for FamilyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "rect" => Ok(FamilyArg::Rect),
            Some(("kdir", path)) if !path.is_empty() => Ok(FamilyArg::Kdir(PathBuf::from(path))),
            _ => Err(format!("expected `rect` or `kdir:<dirs.json>`, got `{s}`")),
        }
    }
}

/// `N` comma-separated numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Floats<const N: usize>(pub [f64; N]);

impl<const N: usize> Serialize for Floats<N> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<const N: usize> FromStr for Floats<N> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let vals = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
            .collect::<Result<Vec<f64>, String>>()?;
        let arr: [f64; N] =
            vals.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))?;
        Ok(Floats(arr))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ColorArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "rect")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Deterministic merge and reduce.
    MergeReduce,
    /// Uniform random sample of the classical size.
    Random,
}

#[derive(Debug, Args, Serialize)]
pub struct ApproxArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "rect")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::MergeReduce)]
    pub method: Method,
    /// Failure probability of the random baseline.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Certificate path; defaults to `<out>.cert.json`.
    #[arg(long)]
    pub cert: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub approx: PathBuf,
    #[arg(long, conflicts_with = "tin", required_unless_present = "tin")]
    pub ground: Option<PathBuf>,
    #[arg(long)]
    pub tin: Option<PathBuf>,
    #[arg(long, default_value = "rect")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Uniform grid refinement of the terrain oracle.
    #[arg(long, default_value_t = 32)]
    pub resolution: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    Poisson,
    Linear,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long)]
    pub measured: PathBuf,
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long, value_enum)]
    pub stat: StatKind,
    /// Linear coefficients `a,c,g` of `a·m + c·b + g`.
    #[arg(long, default_value = "1,-1,0")]
    pub coeffs: Floats<3>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Also run the exact O(n⁴) maximizer.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum TerrainCmd {
    /// Approximate a triangulated terrain.
    Approx {
        #[arg(long)]
        tin: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        block_size: Option<usize>,
        /// Output of the positive part; a negative part goes to `<out stem>.neg.csv`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cert: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand, Serialize)]
pub enum GaussianCmd {
    /// Approximate an axis-aligned 2D Gaussian.
    Approx {
        /// `SX,SY`.
        #[arg(long)]
        sigma: Floats<2>,
        /// `MX,MY`.
        #[arg(long, default_value = "0,0")]
        mean: Floats<2>,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cert: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct SentinelArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Build pairwise disjoint sentinels.
    #[arg(long)]
    pub disjoint: bool,
    /// Directory for `sentinel_<i>.csv`, `report.json` and the manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}
