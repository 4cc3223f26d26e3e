use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bitarq",
    version,
    about = "Bitwise retransmission analysis, simulation and planning"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Write the table here instead of stdout
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for every random stream
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Omit the timestamp so repeated runs are byte-identical
    #[arg(long, global = true)]
    pub reproducible: bool,
    /// Omit the `#` header block
    #[arg(long, global = true)]
    pub no_header: bool,
    /// Worker threads (0 lets rayon decide)
    #[arg(long, global = true, env = "BITARQ_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BER against forward rate for fixed-rate designs
    SweepRate(SweepArgs),
    /// BER against window fraction W/N
    SweepWindow(SweepArgs),
    /// BER against a shared reliability threshold
    SweepThreshold(ThresholdSweepArgs),
    /// Optimal parameter per strategy across SNRs
    Optimize(OptimizeArgs),
    /// Monte Carlo BER of one configuration
    Simulate(SimulateArgs),
    /// Delay and throughput of the synchronized-permutation feedback
    FeedbackSim(FeedbackArgs),
    /// Uplink packet contents of one sensor node
    FusionPlan(FusionPlanArgs),
    /// Feedback and window feasibility of segmented designs
    FusionFeasibility(FeasibilityArgs),
    /// SNR needed by a technology to reach a target BER
    FitCheck(FitCheckArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SweepRate(_) => "sweep-rate",
            Command::SweepWindow(_) => "sweep-window",
            Command::SweepThreshold(_) => "sweep-threshold",
            Command::Optimize(_) => "optimize",
            Command::Simulate(_) => "simulate",
            Command::FeedbackSim(_) => "feedback-sim",
            Command::FusionPlan(_) => "fusion-plan",
            Command::FusionFeasibility(_) => "fusion-feasibility",
            Command::FitCheck(_) => "fit-check",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Energy per information bit over N0, in dB
    #[arg(long, allow_hyphen_values = true, value_parser = snr_db)]
    pub snr_db: f64,
    /// Packet size in bits
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u32).range(1..=1_000_000))]
    pub n: u32,
    /// Retransmission rounds
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=8))]
    pub d: u32,
    /// Grid points
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(3..=100_000))]
    pub points: u32,
    /// Simulated bits per grid point (rounded up to whole packets; 0 skips)
    #[arg(long, default_value_t = 102_400)]
    pub mc_bits: u64,
}

#[derive(Debug, Args)]
pub struct ThresholdSweepArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Upper end of the threshold range (default 4γ + 4)
    #[arg(long, value_parser = positive)]
    pub u_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyKind {
    Rate,
    Window,
    Threshold,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Rate => "rate",
            StrategyKind::Window => "window",
            StrategyKind::Threshold => "threshold",
        }
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Comma-separated SNRs in dB
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = snr_db, required = true)]
    pub snr_db: Vec<f64>,
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u32).range(1..=1_000_000))]
    pub n: u32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=8))]
    pub d: u32,
    /// Strategies to optimize (default: all three)
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<StrategyKind>,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(3..=100_000))]
    pub points: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    Adaptive,
    Quantized,
    Brc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectionKind {
    Threshold,
    LeastReliable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderingKind {
    Current,
    Initial,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Energy per information bit over N0, in dB (mean value when fading)
    #[arg(long, allow_hyphen_values = true, value_parser = snr_db)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u32).range(1..=1_000_000))]
    pub n: u32,
    /// Retransmission rounds (0 simulates the uncoded link)
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(0..=8))]
    pub d: u32,
    #[arg(long, value_enum, default_value_t = SchemeKind::Quantized)]
    pub scheme: SchemeKind,
    #[arg(long, value_enum, default_value_t = StrategyKind::Window)]
    pub strategy: StrategyKind,
    /// Forward rate, window fraction or threshold, per strategy
    #[arg(long, value_parser = positive)]
    pub value: Option<f64>,
    /// Information bits to simulate (rounded up to whole packets)
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub bits: u64,
    /// Packet-constant SNR drawn from an exponential density
    #[arg(long)]
    pub fading: bool,
    #[arg(long, value_enum)]
    pub selection: Option<SelectionKind>,
    #[arg(long, value_enum, default_value_t = OrderingKind::Current)]
    pub ordering: OrderingKind,
    /// Send random symbols instead of all ones
    #[arg(long)]
    pub random_data: bool,
}

#[derive(Debug, Args)]
pub struct FeedbackArgs {
    /// Packet size in bits
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=4096))]
    pub n: u32,
    /// Window size in bits
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=64))]
    pub w: u32,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u32).range(1..=10_000_000))]
    pub trials: u32,
    /// Largest residual width to tabulate (default twice the optimum)
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=63))]
    pub c1_max: Option<u32>,
}

#[derive(Debug, Args)]
pub struct FusionPlanArgs {
    #[arg(long)]
    pub tech: String,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub w: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(0..=64))]
    pub d: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(0..=100_000))]
    pub blocks: u32,
    /// Information block size (default: the packet size)
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub block_bits: Option<u32>,
}

#[derive(Debug, Args)]
pub struct FeasibilityArgs {
    /// Restrict to one technology
    #[arg(long)]
    pub tech: Option<String>,
    /// Forward BER of a custom design (needs --p-r, --n-seg, --w-seg)
    #[arg(long, value_parser = unit_interval, requires_all = ["p_r", "n_seg", "w_seg", "tech"])]
    pub p_f: Option<f64>,
    #[arg(long, value_parser = unit_interval, requires = "p_f")]
    pub p_r: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..), requires = "p_f")]
    pub n_seg: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..), requires = "p_f")]
    pub w_seg: Option<u32>,
    /// Require every segment to fit its window at once
    #[arg(long)]
    pub joint: bool,
}

#[derive(Debug, Args)]
pub struct FitCheckArgs {
    /// Technology (default: all)
    #[arg(long)]
    pub tech: Option<String>,
    /// Target BER (default: 1e-2 down to 1e-6)
    #[arg(long, value_parser = positive)]
    pub ber: Option<f64>,
}

fn finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

/// SNRs outside this range are rejected up front.
pub const SNR_DB_RANGE: (f64, f64) = (-30.0, 40.0);

fn snr_db(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    let (lo, hi) = SNR_DB_RANGE;
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(format!("SNR {s} dB is outside [{lo}, {hi}]"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("'{s}' must be positive"))
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("'{s}' is outside [0, 1]"))
    }
}
