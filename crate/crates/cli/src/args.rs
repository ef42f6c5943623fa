use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Fixed default so that an invocation without --seed is reproducible.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser, Debug)]
#[command(
    name = "mbqc",
    version,
    about = "Resource-state diagnostics for measurement-based quantum computation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Emit the JSON report.
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,
    /// Emit a CSV table.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Output file; the values human, json and csv select a format instead.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<String>,
    /// 64-bit seed, or "random".
    #[arg(long, global = true, value_parser = parse_seed)]
    pub seed: Option<Seed>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Clone, Copy, Debug)]
pub enum Seed {
    Fixed(u64),
    Random,
}

fn parse_seed(s: &str) -> Result<Seed, String> {
    if s.eq_ignore_ascii_case("random") {
        return Ok(Seed::Random);
    }
    s.parse::<u64>()
        .map(Seed::Fixed)
        .map_err(|e| format!("seed must be a 64-bit integer or \"random\": {e}"))
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate an entanglement monotone on a family member or a state file.
    Measure(MeasureArgs),
    /// Lower bounds on the ε-geometric measure.
    EpsBound(EpsBoundArgs),
    /// Universality verdicts for a state family.
    Criteria(CriteriaCmd),
    /// Site percolation on the square lattice.
    Percolate(PercolateCmd),
    /// Deformed 2D cluster: filter probability and hole statistics.
    Deformed(DeformedArgs),
    /// LOCC protocols and their branch outputs.
    Locc(LoccCmd),
    /// Parameter grids emitted as tables.
    Sweep(SweepCmd),
    /// Fast self-checks of the library.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MeasureKind {
    Geometric,
    #[value(alias = "srw", alias = "chi")]
    SchmidtRankWidth,
    #[value(alias = "ewd")]
    EntropicWidth,
}

#[derive(Args, Debug)]
pub struct MeasureArgs {
    pub measure: MeasureKind,
    /// w, ghz, cluster1d, cluster2d, product or deformed:<λ>.
    #[arg(long, required_unless_present = "state", conflicts_with = "state")]
    pub family: Option<String>,
    /// Member size, or the size cap together with --sup.
    #[arg(long, requires = "family")]
    pub n: Option<usize>,
    /// Pure-state JSON file.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Maximum over family members up to --n.
    #[arg(long, requires = "family")]
    pub sup: bool,
    /// Include the optimizer or tree witness.
    #[arg(long)]
    pub witness: bool,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormulaKind {
    Variational,
    #[value(alias = "closed-form")]
    Closed,
    Star,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    Trace,
    Bures,
}

#[derive(Args, Debug)]
pub struct EpsBoundArgs {
    #[arg(long, value_enum, default_value_t = FormulaKind::All)]
    pub formula: FormulaKind,
    /// Geometric measure of the state.
    #[arg(long)]
    pub eg: Option<f64>,
    #[arg(long, required_unless_present = "eps", conflicts_with = "eps")]
    pub eta: Option<f64>,
    /// Accuracy in the chosen distance; converted to η.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = DistanceArg::Trace)]
    pub distance: DistanceArg,
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
pub struct CriteriaCmd {
    #[command(subcommand)]
    pub sub: Option<CriteriaSub>,
    #[command(flatten)]
    pub verdict: CriteriaArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Det,
    Stoch,
    Unbounded,
    Efficiency,
}

#[derive(Args, Debug)]
pub struct CriteriaArgs {
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, conflicts_with = "eta")]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = MeasureKind::Geometric)]
    pub measure: MeasureKind,
    #[arg(long, value_enum, default_value_t = DistanceArg::Trace)]
    pub distance: DistanceArg,
    /// Defaults to det (δ = 0) or stoch for the geometric measure and to
    /// unbounded for the widths.
    #[arg(long, value_enum)]
    pub check: Option<CheckKind>,
    /// Scaling class of the accuracy overhead f(ε) for --check efficiency.
    #[arg(long)]
    pub f_eps: Option<String>,
    /// Override the registered scaling class of the family.
    #[arg(long)]
    pub scaling: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum CriteriaSub {
    /// Admissible (ε′, δ′) after a perturbation of size μ.
    Frontier(FrontierArgs),
    /// Largest η at which the W family is ruled out.
    Threshold,
}

#[derive(Args, Debug, Clone)]
pub struct FrontierArgs {
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long)]
    pub mu: f64,
    #[arg(long, value_enum, default_value_t = DistanceArg::Trace)]
    pub distance: DistanceArg,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
pub struct PercolateCmd {
    #[command(subcommand)]
    pub sub: Option<PercolateSub>,
    #[command(flatten)]
    pub run: PercolateArgs,
}

#[derive(Args, Debug)]
pub struct PercolateArgs {
    /// Lattice side.
    #[arg(long = "L", default_value_t = 64)]
    pub side: usize,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
}

#[derive(Subcommand, Debug)]
pub enum PercolateSub {
    /// Bisection for the crossing probability 1/2.
    Threshold(ThresholdArgs),
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    #[arg(long = "L", default_value_t = 64)]
    pub side: usize,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
}

#[derive(Args, Debug)]
pub struct DeformedArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long = "L", default_value_t = 64)]
    pub side: usize,
    /// Hole patterns drawn from the filter POVM.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Spanning trials at the induced site probability (0 skips).
    #[arg(long, default_value_t = 0)]
    pub trials: usize,
    /// Site threshold used for λ_c.
    #[arg(long, default_value_t = 0.5927)]
    pub p_c: f64,
}

#[derive(Args, Debug)]
pub struct LoccCmd {
    #[command(subcommand)]
    pub sub: LoccSub,
}

#[derive(Subcommand, Debug)]
pub enum LoccSub {
    /// Run a protocol file on a state or ensemble file.
    Run(LoccRunArgs),
    /// Z-noise on a cluster resource run through an exact protocol.
    NoisyCluster(NoisyClusterArgs),
    /// Random perturbations of the chain resource.
    Stability(StabilityArgs),
}

#[derive(Args, Debug)]
pub struct LoccRunArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub protocol: PathBuf,
}

#[derive(Args, Debug)]
pub struct NoisyClusterArgs {
    /// Chain length (the 2×2 grid with --grid).
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long)]
    pub p: f64,
    /// Qubit hit by the Z flip.
    #[arg(long, conflicts_with = "patterns")]
    pub flip: Option<usize>,
    /// Number of random weighted Z patterns instead of a single flip.
    #[arg(long)]
    pub patterns: Option<usize>,
    #[arg(long)]
    pub grid: bool,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[arg(long)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct SweepCmd {
    #[command(subcommand)]
    pub sub: SweepSub,
}

/// Ranges are written lo:hi:n.
#[derive(Subcommand, Debug)]
pub enum SweepSub {
    /// Star bound over η.
    Star {
        #[arg(long)]
        eta: String,
        /// Log-spaced grid.
        #[arg(long)]
        log: bool,
    },
    /// Variational and closed-form bounds over (E_G, η).
    Bound {
        #[arg(long)]
        eg: String,
        #[arg(long)]
        eta: String,
        #[arg(long)]
        log: bool,
    },
    /// Crossing probability over p.
    Percolate {
        #[arg(long = "L", default_value_t = 64)]
        side: usize,
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
    },
    /// Stability frontiers over μ.
    Frontier {
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        mu: String,
        #[arg(long, value_enum, default_value_t = DistanceArg::Trace)]
        distance: DistanceArg,
        #[arg(long, default_value_t = 25)]
        points: usize,
    },
    /// Geometric-measure verdicts over (η, δ).
    Criteria {
        #[arg(long)]
        family: String,
        #[arg(long)]
        eta: String,
        #[arg(long, default_value = "0:0:1")]
        delta: String,
        #[arg(long)]
        log: bool,
    },
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    /// Also run the slow percolation threshold check.
    #[arg(long)]
    pub full: bool,
}
