use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "fitgeom", version, about = "Forward-in-time parabolic chain geometry: batch analyses with CSV/JSON outputs")]
pub struct Cli {
    /// Re-run the RunConfig stored in a JSON file (a RunConfig or a summary.json).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Everything that determines a run's results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: Command,
    pub common: Common,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Common {
    /// Builtin example id (1a, 1b, 2, 3, 4) or path to a domain JSON file.
    #[arg(long, global = true, default_value = "1a")]
    pub domain: String,
    /// Spatial dimension for builtins 1a/1b.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Parabolic exponent p for builtins.
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Decay rate M of builtin 4.
    #[arg(long, global = true)]
    pub decay: Option<f64>,

    #[arg(long, global = true, default_value_t = 4.0)]
    pub a1: f64,
    #[arg(long, global = true, default_value_t = 4.0)]
    pub a2: f64,
    #[arg(long, global = true, default_value_t = 2.0)]
    pub a3: f64,

    /// Grid spec JSON file; overrides the grid flags below.
    #[arg(long, global = true)]
    pub grid: Option<PathBuf>,
    /// Largest cylinder radius (default: 0.12 times the window scale, capped at 0.12).
    #[arg(long, global = true)]
    pub r_max: Option<f64>,
    #[arg(long, global = true, default_value_t = 6)]
    pub levels: usize,
    /// Radius ratio between consecutive levels (default 2^(1/(n+p))).
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Lattice pitch in units of r (space) and r^p (time).
    #[arg(long, global = true, default_value_t = 0.5)]
    pub beta: f64,
    /// Keep only centers within grading * r of the boundary on levels >= 1.
    #[arg(long, global = true)]
    pub grading: Option<f64>,
    #[arg(long, global = true, default_value_t = 30_000_000)]
    pub max_nodes: usize,
    /// Sampling window `lo_1,..,lo_n,lo_t,hi_1,..,hi_n,hi_t` (default: domain bounding box).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub window: Option<String>,

    /// Slice time t0 (default: middle of the window's time range).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// Central cylinder: `auto` or `x_1,..,x_n,t,r` (nearest grid node).
    #[arg(long, global = true, default_value = "auto", allow_hyphen_values = true)]
    pub central: String,
    /// Restrict `auto` to centers in `lo_1,..,lo_n,lo_t,hi_1,..,hi_n,hi_t`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub central_region: Option<String>,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo / sample budget.
    #[arg(long, global = true, default_value_t = 1024)]
    pub budget: usize,
    /// Strata per sampling window.
    #[arg(long, global = true, default_value_t = 64)]
    pub cells: usize,

    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "options", rename_all = "kebab-case")]
pub enum Command {
    /// Test the FIT link between two cylinders in both orders.
    LinkCheck(LinkCheckArgs),
    /// Chain distance from the central cylinder to a node or point.
    FitDistance(FitDistanceArgs),
    /// Sweep reachability of the future slice from the central cylinder.
    Connectivity(ConnectivityArgs),
    /// Fit K_hat over boundary-distance shells.
    HolderFit(HolderArgs),
    /// Outer-layer measures and decay fit.
    Layers(LayersArgs),
    /// Distance profile around a point and its log fit.
    AlmostBounded(BoundedArgs),
    /// Free-space chain lengths against the closed-form law.
    FreespaceLaw(FreespaceArgs),
    /// PBMO seminorm estimates for one or more parameter triples.
    PbmoNorm(PbmoArgs),
    /// Exponential integral, with optional second-budget stability check.
    Expint(ExpintArgs),
    /// Super-level set measures.
    Levelsets(LevelsetArgs),
    /// Telescoping bound along random free-space chains.
    Telescope(TelescopeArgs),
    /// Materialize a builtin example domain.
    Examples(ExamplesArgs),
    /// Compare breadth-first distances with exhaustive enumeration.
    OracleVerify(OracleArgs),
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkCheckArgs {
    /// First cylinder `x_1,..,x_n,t,r`.
    #[arg(long = "from", allow_hyphen_values = true)]
    pub from: String,
    /// Second cylinder `x_1,..,x_n,t,r`.
    #[arg(long = "to", allow_hyphen_values = true)]
    pub to: String,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDistanceArgs {
    /// `source`, `node:<id>`, or a point `x_1,..,x_n,t`.
    #[arg(long, default_value = "source", allow_hyphen_values = true)]
    pub target: String,
    /// Also write the whole graph to graph.json.
    #[arg(long)]
    pub export_graph: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityArgs {
    /// Region `lo..,hi..` for the exhaustive node sweep.
    #[arg(long, allow_hyphen_values = true)]
    pub region: Option<String>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderArgs {
    #[arg(long, default_value_t = 1)]
    pub k_min: i32,
    #[arg(long, default_value_t = 5)]
    pub k_max: i32,
    #[arg(long, default_value_t = 20)]
    pub per_shell: usize,
    /// Also fit on the refined grid and report the K_hat ratio.
    #[arg(long)]
    pub two_level: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayersArgs {
    #[arg(long, default_value_t = 1)]
    pub k_min: i32,
    #[arg(long, default_value_t = 8)]
    pub k_max: i32,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedArgs {
    /// Reference point `x_1,..,x_n,t` (default: window center).
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub k_min: u32,
    #[arg(long, default_value_t = 8)]
    pub k_max: u32,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreespaceArgs {
    #[arg(long, default_value_t = 1.0)]
    pub r0: f64,
    /// Time spans `s0 - t0` of the targets.
    #[arg(long, value_delimiter = ',', default_value = "10,40,160,640,2560,10000")]
    pub spans: Vec<f64>,
    /// Spatial offsets as fractions of `min(max_offset, (span - 10 r0^p)^(1/p))`.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    pub offset_fractions: Vec<f64>,
    #[arg(long, default_value_t = 50.0)]
    pub max_offset: f64,
    /// Repeat on the grid with half the pitch.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldArgs {
    /// `counting` or an expression in x0.., t (e.g. `t`, `-t`, `abs(x0) + exp(t)`).
    #[arg(long = "f", default_value = "t", allow_hyphen_values = true)]
    pub f: String,
    /// Counting function boundary fraction.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Counting function dyadic ladder length.
    #[arg(long, default_value_t = 2)]
    pub ladder: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PbmoArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    /// Parameter triples `a,q,theta` separated by `;`.
    #[arg(long, default_value = "3,1,1")]
    pub params: String,
    #[arg(long, default_value_t = 9)]
    pub centers_per_axis: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25")]
    pub radius_fractions: Vec<f64>,
    /// Extra cylinders with random centers and radii.
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    #[arg(long, default_value_t = 8)]
    pub space_nodes: usize,
    #[arg(long, default_value_t = 16)]
    pub time_nodes: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpintArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    pub eta: Vec<f64>,
    /// Second budget for the stability check (seed + 1).
    #[arg(long)]
    pub compare_budget: Option<usize>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelsetArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    /// Level c, or `min` for the smallest sampled value.
    #[arg(long, default_value = "min", allow_hyphen_values = true)]
    pub c: String,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8")]
    pub lambdas: Vec<f64>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopeArgs {
    /// Expression for f.
    #[arg(long = "f", default_value = "t", allow_hyphen_values = true)]
    pub f: String,
    #[arg(long, default_value_t = 100)]
    pub chains: usize,
    #[arg(long, default_value_t = 5)]
    pub length: usize,
    /// Seminorm estimate used to report D.
    #[arg(long)]
    pub norm: Option<f64>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExamplesArgs {
    #[arg(long, default_value = "1a")]
    pub id: String,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Centers have times in `[0, t_max]`.
    #[arg(long, default_value_t = 8.0)]
    pub t_max: f64,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::LinkCheck(_) => "link-check",
            Command::FitDistance(_) => "fit-distance",
            Command::Connectivity(_) => "connectivity",
            Command::HolderFit(_) => "holder-fit",
            Command::Layers(_) => "layers",
            Command::AlmostBounded(_) => "almost-bounded",
            Command::FreespaceLaw(_) => "freespace-law",
            Command::PbmoNorm(_) => "pbmo-norm",
            Command::Expint(_) => "expint",
            Command::Levelsets(_) => "levelsets",
            Command::Telescope(_) => "telescope",
            Command::Examples(_) => "examples",
            Command::OracleVerify(_) => "oracle-verify",
        }
    }
}
