//! Monte Carlo simulation of packets, reliability-based selection,
//! retransmission and MRC combining.
//!
//! Work is split into blocks of whole packets. Block `b` draws its noise from
//! the ChaCha8 stream `b` of the run seed and counts are merged by integer
//! summation, so reports do not depend on thread count or scheduling.
//!
//! Every packet draws its `(D + 1) × N` noise samples up front, including
//! samples for bits that end up not being repeated. Two runs with the same
//! seed therefore see the same noise for each (round, bit) pair regardless
//! of which bits their selection rule picks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    fixed_rate_window, round_half_away, Fading, LinkModel, ProtocolConfig, Strategy,
};

/// How retransmissions are combined and decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Each round re-selects from the current combined reliabilities.
    Adaptive,
    /// Retransmission counts are fixed by quantizing the initial
    /// reliabilities: round `d` repeats every bit with `|r̄₀| ≤ U_{d−1}`.
    /// This is the model the analytic BER expressions describe.
    Quantized,
    /// Whole-packet repetition, `D` extra copies of every bit.
    BlockRepetition,
}

/// Rule choosing the bits repeated in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// Bits with reliability at or below `U_{d−1}`.
    Threshold,
    /// The `W_d` least reliable bits.
    LeastReliable,
}

/// Which reliabilities rank bits for least-reliable selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    /// Combined reliabilities after the previous round.
    #[default]
    Current,
    /// Reliabilities of the first reception only.
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Overrides the selection implied by the strategy.
    pub selection: Option<Selection>,
    pub ordering: Ordering,
    /// Transmit uniformly random symbols instead of all-positive ones.
    pub random_data: bool,
    /// Approximate number of bits per parallel block.
    pub block_bits: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            selection: None,
            ordering: Ordering::Current,
            random_data: false,
            block_bits: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub bits_simulated: u64,
    pub bit_errors: u64,
    /// Total bits repeated in each round.
    pub retransmitted_bits: Vec<u64>,
    pub forward_rate_realized: f64,
    pub seed: u64,
}

impl TrialReport {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits_simulated as f64
    }

    /// Binomial standard error of [`TrialReport::ber`].
    pub fn std_error(&self) -> f64 {
        let p = self.ber();
        (p * (1.0 - p) / self.bits_simulated as f64).sqrt()
    }

    /// Realized window fraction `E[W_d]/N` per round.
    pub fn window_fractions(&self) -> Vec<f64> {
        let n = self.bits_simulated as f64;
        self.retransmitted_bits
            .iter()
            .map(|&w| w as f64 / n)
            .collect()
    }
}

/// The `w` least reliable entries by magnitude, ties to the lowest index.
/// Returns sorted 1-based indices.
pub fn least_reliable(reliabilities: &[f64], w: usize) -> Result<Vec<usize>> {
    if w > reliabilities.len() {
        return Err(Error::config(format!(
            "cannot pick {w} of {} bits",
            reliabilities.len()
        )));
    }
    let mut idx: Vec<usize> = (0..reliabilities.len()).collect();
    select_least(&mut idx, w, |i| reliabilities[i].abs());
    let mut out: Vec<usize> = idx[..w].iter().map(|i| i + 1).collect();
    out.sort_unstable();
    Ok(out)
}

/// Moves the `w` smallest keys (ties by index) to the front of `idx`.
fn select_least<K: Fn(usize) -> f64>(idx: &mut [usize], w: usize, key: K) {
    if w == 0 || w >= idx.len() {
        return;
    }
    idx.select_nth_unstable_by(w - 1, |&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
}

/// Per-round selection resolved from config, scheme and options.
#[derive(Debug, Clone)]
enum Plan {
    Thresholds(Vec<f64>),
    Windows(Vec<usize>),
    All,
}

fn resolve_windows(config: &ProtocolConfig) -> Result<Vec<usize>> {
    if !config.windows.is_empty() {
        return Ok(config.windows.clone());
    }
    let (n, d) = (config.packet_bits, config.retransmissions);
    let w = match config.strategy {
        Strategy::FixedRate { target_rate } => fixed_rate_window(n, d, target_rate)?,
        Strategy::FixedWindow { window_fraction } => {
            if !(window_fraction > 0.0 && window_fraction <= 1.0) {
                return Err(Error::config(format!(
                    "window fraction {window_fraction} outside (0, 1]"
                )));
            }
            (round_half_away(window_fraction * n as f64) as usize).clamp(1, n)
        }
        Strategy::FixedThreshold { .. } => {
            return Err(Error::config("a threshold strategy has no window sizes"));
        }
    };
    Ok(vec![w; d])
}

fn resolve_thresholds(config: &ProtocolConfig) -> Result<Vec<f64>> {
    if !config.thresholds.is_empty() {
        return config.require_thresholds().map(<[f64]>::to_vec);
    }
    match config.strategy {
        Strategy::FixedThreshold { threshold } if threshold >= 0.0 => {
            Ok(vec![threshold; config.retransmissions])
        }
        Strategy::FixedThreshold { threshold } => {
            Err(Error::config(format!("threshold {threshold} is negative")))
        }
        _ => Err(Error::config(
            "threshold selection needs one threshold per round",
        )),
    }
}

fn resolve_plan(config: &ProtocolConfig, scheme: Scheme, options: &SimOptions) -> Result<Plan> {
    config.validate()?;
    if config.retransmissions == 0 {
        return Ok(Plan::All);
    }
    match scheme {
        Scheme::BlockRepetition => {
            if matches!(config.strategy, Strategy::FixedThreshold { .. }) {
                return Err(Error::config(
                    "block repetition ignores thresholds; use a rate or window strategy",
                ));
            }
            Ok(Plan::All)
        }
        Scheme::Quantized => match options.selection {
            Some(Selection::LeastReliable) => Err(Error::config(
                "the quantized scheme selects by initial-reliability thresholds",
            )),
            _ => Ok(Plan::Thresholds(resolve_thresholds(config)?)),
        },
        Scheme::Adaptive => {
            let selection = options.selection.unwrap_or(match config.strategy {
                Strategy::FixedThreshold { .. } => Selection::Threshold,
                _ => Selection::LeastReliable,
            });
            match selection {
                Selection::Threshold => Ok(Plan::Thresholds(resolve_thresholds(config)?)),
                Selection::LeastReliable => Ok(Plan::Windows(resolve_windows(config)?)),
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    bits: u64,
    errors: u64,
    retransmitted: Vec<u64>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.bits += other.bits;
        self.errors += other.errors;
        if self.retransmitted.len() < other.retransmitted.len() {
            self.retransmitted.resize(other.retransmitted.len(), 0);
        }
        for (a, b) in self.retransmitted.iter_mut().zip(other.retransmitted) {
            *a += b;
        }
        self
    }
}

/// Scratch buffers reused across the packets of a block.
struct PacketBuffers {
    noise: Vec<f64>,
    sign: Vec<f64>,
    sum: Vec<f64>,
    copies: Vec<u32>,
    initial: Vec<f64>,
    order: Vec<usize>,
    chosen: Vec<usize>,
}

impl PacketBuffers {
    fn new(n: usize, d: usize) -> Self {
        Self {
            noise: vec![0.0; n * (d + 1)],
            sign: vec![1.0; n],
            sum: vec![0.0; n],
            copies: vec![0; n],
            initial: vec![0.0; n],
            order: Vec::with_capacity(n),
            chosen: Vec::with_capacity(n),
        }
    }
}

struct Simulator<'a> {
    n: usize,
    d: usize,
    plan: &'a Plan,
    scheme: Scheme,
    options: &'a SimOptions,
    link: &'a LinkModel,
}

impl Simulator<'_> {
    fn run_block(&self, seed: u64, block: u64, packets: usize) -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let mut buf = PacketBuffers::new(self.n, self.d);
        let mut tally = Tally {
            retransmitted: vec![0; self.d],
            ..Tally::default()
        };
        for _ in 0..packets {
            self.run_packet(&mut rng, &mut buf, &mut tally);
        }
        tally
    }

    fn run_packet(&self, rng: &mut ChaCha8Rng, buf: &mut PacketBuffers, tally: &mut Tally) {
        let (n, d) = (self.n, self.d);
        let gamma = match self.link.fading() {
            Fading::None => self.link.snr(),
            Fading::SlowChiSquare { mean_snr } => {
                let u: f64 = rng.random();
                -mean_snr * (1.0 - u).ln()
            }
        };
        // half-LLR samples: sign·2γ + √(2γ)·w
        let mean = 2.0 * gamma;
        let sd = (2.0 * gamma).sqrt();
        if self.options.random_data {
            for s in buf.sign.iter_mut() {
                *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
        }
        for x in buf.noise.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let z = buf.sign[i] * mean + sd * buf.noise[i];
            buf.sum[i] = z;
            buf.copies[i] = 1;
            buf.initial[i] = z.abs();
        }
        for round in 1..=d {
            self.choose(round, buf);
            let row = &buf.noise[round * n..(round + 1) * n];
            for &i in &buf.chosen {
                buf.sum[i] += buf.sign[i] * mean + sd * row[i];
                buf.copies[i] += 1;
            }
            tally.retransmitted[round - 1] += buf.chosen.len() as u64;
        }
        tally.bits += n as u64;
        // the running average has the sign of the running sum
        tally.errors += (0..n).filter(|&i| buf.sum[i] * buf.sign[i] <= 0.0).count() as u64;
    }

    fn choose(&self, round: usize, buf: &mut PacketBuffers) {
        let n = self.n;
        buf.chosen.clear();
        match self.plan {
            Plan::All => buf.chosen.extend(0..n),
            Plan::Thresholds(u) => {
                let limit = u[round - 1];
                match self.scheme {
                    Scheme::Quantized => buf
                        .chosen
                        .extend((0..n).filter(|&i| buf.initial[i] <= limit)),
                    _ => buf.chosen.extend(
                        (0..n).filter(|&i| buf.sum[i].abs() / f64::from(buf.copies[i]) <= limit),
                    ),
                }
            }
            Plan::Windows(w) => {
                let w = w[round - 1];
                buf.order.clear();
                buf.order.extend(0..n);
                match self.options.ordering {
                    Ordering::Current => {
                        let (sum, copies) = (&buf.sum, &buf.copies);
                        select_least(&mut buf.order, w, |i| sum[i].abs() / f64::from(copies[i]));
                    }
                    Ordering::Initial => {
                        let initial = &buf.initial;
                        select_least(&mut buf.order, w, |i| initial[i]);
                    }
                }
                buf.chosen.extend_from_slice(&buf.order[..w]);
            }
        }
    }
}

/// Simulates `bits` information bits (a multiple of the packet size).
pub fn simulate(
    config: &ProtocolConfig,
    link: &LinkModel,
    scheme: Scheme,
    bits: u64,
    seed: u64,
) -> Result<TrialReport> {
    simulate_with(config, link, scheme, bits, seed, &SimOptions::default())
}

pub fn simulate_with(
    config: &ProtocolConfig,
    link: &LinkModel,
    scheme: Scheme,
    bits: u64,
    seed: u64,
    options: &SimOptions,
) -> Result<TrialReport> {
    let plan = resolve_plan(config, scheme, options)?;
    let n = config.packet_bits;
    if bits == 0 || bits % n as u64 != 0 {
        return Err(Error::config(format!(
            "bit count {bits} must be a positive multiple of the packet size {n}"
        )));
    }
    let total_packets = bits / n as u64;
    let per_block = (options.block_bits / n).max(1) as u64;
    let blocks = total_packets.div_ceil(per_block);
    let sim = Simulator {
        n,
        d: config.retransmissions,
        plan: &plan,
        scheme,
        options,
        link,
    };
    let tally = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let packets = per_block.min(total_packets - b * per_block) as usize;
            sim.run_block(seed, b, packets)
        })
        .reduce(Tally::default, Tally::merge);
    let repeated: u64 = tally.retransmitted.iter().sum();
    let mut retransmitted_bits = tally.retransmitted;
    retransmitted_bits.resize(config.retransmissions, 0);
    Ok(TrialReport {
        bits_simulated: tally.bits,
        bit_errors: tally.errors,
        retransmitted_bits,
        forward_rate_realized: tally.bits as f64 / (tally.bits + repeated) as f64,
        seed,
    })
}

/// BER of the adaptive and quantized schemes on identical noise, both
/// selecting by the config thresholds. Returns `(adaptive, quantized)`.
pub fn compare_schemes(
    config: &ProtocolConfig,
    link: &LinkModel,
    bits: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let options = SimOptions {
        selection: Some(Selection::Threshold),
        ..SimOptions::default()
    };
    let adaptive = simulate_with(config, link, Scheme::Adaptive, bits, seed, &options)?;
    let quantized = simulate_with(config, link, Scheme::Quantized, bits, seed, &options)?;
    Ok((adaptive.ber(), quantized.ber()))
}
