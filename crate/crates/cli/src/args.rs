use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mirm", version, about = "Maturity-independent risk measures in incomplete markets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model or spec file (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Claim file (JSON).
    #[arg(long, global = true)]
    pub claim: Option<PathBuf>,
    /// CSV output path; stdout when omitted. The run report goes next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Monte Carlo path count.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Risk aversion.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Exit with status 4 when the command's acceptance check fails.
    #[arg(long = "assert", global = true)]
    pub check: bool,
    /// Sign of the zeroth-order term in the PDE example.
    #[arg(long, global = true, value_enum)]
    pub fk_sign: Option<FkSignArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum FkSignArg {
    PaperPde,
    PaperFk,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite information trees.
    #[command(subcommand)]
    Finite(FiniteCmd),
    /// Binomial lattice with a non-traded factor.
    #[command(subcommand)]
    Binomial(BinomialCmd),
    /// Stochastic-volatility PDE example.
    #[command(subcommand)]
    Pde(PdeCmd),
    /// Monte Carlo forward performance fields.
    #[command(subcommand)]
    Forward(ForwardCmd),
    /// Randomized axiom checks.
    Axioms(AxiomsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ConventionArg {
    Standard,
    PrintedRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FiniteMeasure {
    Entropic,
    Superhedge,
}

#[derive(Debug, Subcommand)]
pub enum FiniteCmd {
    /// Risk of one claim.
    Eval {
        /// Evaluation depth; the claim depth when omitted.
        #[arg(long)]
        t: Option<usize>,
        #[arg(long, value_enum, default_value_t = FiniteMeasure::Entropic)]
        measure: FiniteMeasure,
        #[arg(long, value_enum, default_value_t = ConventionArg::Standard)]
        convention: ConventionArg,
    },
    /// Entropic values of `a·1{node}` seen at depths one and two.
    Noncompliance {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0, 4.0, 8.0])]
        a: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ConventionArg::Standard)]
        convention: ConventionArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum BinomialCmd {
    /// Forward entropic risk of one claim.
    Eval {
        /// Evaluation depth, at least the claim's earliest maturity.
        #[arg(long)]
        t: Option<usize>,
    },
    /// Risk seen at every depth from the claim's maturity to the horizon.
    Invariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum WhichArg {
    F,
    FBar,
    G,
    GBar,
    P,
    PBar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum KindArg {
    F,
    FBar,
    GBar,
}

#[derive(Debug, Subcommand)]
pub enum PdeCmd {
    /// Grid dump of one solution.
    Solve {
        #[arg(long, value_enum, default_value_t = WhichArg::P)]
        which: WhichArg,
    },
    /// Price gap between the two horizons with a refinement study.
    Gap,
    /// Feynman-Kac Monte Carlo estimate at one point.
    Fk {
        #[arg(long, value_enum, default_value_t = KindArg::F)]
        kind: KindArg,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 0.0)]
        y: f64,
    },
}

#[derive(Debug, Args)]
pub struct StrategyArgs {
    /// Width of each strategy cell in time units.
    #[arg(long, default_value_t = 0.125)]
    pub cell_width: f64,
    /// Bound on the dollar position in each cell.
    #[arg(long, default_value_t = 5.0)]
    pub bound: f64,
}

#[derive(Debug, Subcommand)]
pub enum ForwardCmd {
    /// Per-step path statistics.
    Simulate,
    /// Forward entropic risk of a claim.
    Ferm {
        /// Evaluation time; the claim maturity when omitted.
        #[arg(long)]
        horizon: Option<f64>,
        #[command(flatten)]
        strategies: StrategyArgs,
    },
    /// Both sides of the entropic representation with no benchmark.
    Consistency {
        #[arg(long)]
        horizon: Option<f64>,
        #[command(flatten)]
        strategies: StrategyArgs,
    },
    /// Expected utility along random strategies against `U_0(x)`.
    Probe {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        #[arg(long, default_value_t = 100)]
        strategies_count: usize,
        #[command(flatten)]
        strategies: StrategyArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum AxiomModel {
    Binomial,
    FiniteEntropic,
    Superhedge,
}

#[derive(Debug, Args)]
pub struct AxiomsArgs {
    #[arg(long, value_enum, default_value_t = AxiomModel::Binomial)]
    pub model: AxiomModel,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Violation tolerance for `--assert`.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}
