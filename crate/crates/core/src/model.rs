//! Link and protocol descriptions shared by the analysis, simulation and
//! optimization modules.
//!
//! Reliabilities are measured on the half-LLR scale: a received sample
//! `r = ±√E_b + w` with `w ~ N(0, N₀/2)` maps to `r̄ = 2√E_b·r / N₀`, which has
//! mean `±2γ_b` and variance `2γ_b`. Every threshold `U_d` in this crate is on
//! that scale, so all closed forms depend on the SNR alone.

use crate::error::{Error, Result};

/// Packet-level SNR variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    None,
    /// Exponentially distributed SNR, constant over a packet and its
    /// retransmissions.
    SlowChiSquare {
        mean_snr: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    snr: f64,
    noise_density: f64,
    symbol_energy: f64,
    fading: Fading,
}

impl LinkModel {
    /// AWGN link with unit noise density and the given linear SNR.
    pub fn awgn(snr: f64) -> Result<Self> {
        Self::new(snr, 1.0)
    }

    pub fn new(symbol_energy: f64, noise_density: f64) -> Result<Self> {
        if !(symbol_energy > 0.0 && symbol_energy.is_finite()) {
            return Err(Error::config(format!(
                "symbol energy must be positive, got {symbol_energy}"
            )));
        }
        if !(noise_density > 0.0 && noise_density.is_finite()) {
            return Err(Error::config(format!(
                "noise density must be positive, got {noise_density}"
            )));
        }
        Ok(Self {
            snr: symbol_energy / noise_density,
            noise_density,
            symbol_energy,
            fading: Fading::None,
        })
    }

    /// Slow chi-square fading around `mean_snr`; the instantaneous SNR is set
    /// to the mean.
    pub fn slow_fading(mean_snr: f64) -> Result<Self> {
        if !(mean_snr > 0.0 && mean_snr.is_finite()) {
            return Err(Error::config(format!(
                "mean SNR must be positive, got {mean_snr}"
            )));
        }
        let mut link = Self::awgn(mean_snr)?;
        link.fading = Fading::SlowChiSquare { mean_snr };
        Ok(link)
    }

    /// Same noise density, symbol energy rescaled to reach `snr`.
    pub fn with_snr(&self, snr: f64) -> Result<Self> {
        let mut link = Self::new(snr * self.noise_density, self.noise_density)?;
        link.fading = self.fading;
        Ok(link)
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn noise_density(&self) -> f64 {
        self.noise_density
    }

    pub fn symbol_energy(&self) -> f64 {
        self.symbol_energy
    }

    pub fn fading(&self) -> Fading {
        self.fading
    }

    /// Standard deviation of the AWGN sample, `√(N₀/2)` with unit channel gain.
    pub fn noise_std(&self) -> f64 {
        (self.noise_density / 2.0).sqrt()
    }

    /// Maps a received sample to the reliability scale.
    pub fn reliability_scale(&self) -> f64 {
        2.0 * self.symbol_energy.sqrt() / self.noise_density
    }
}

/// How the retransmission windows are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    FixedRate { target_rate: f64 },
    FixedWindow { window_fraction: f64 },
    FixedThreshold { threshold: f64 },
}

/// Parameters of one bitwise retransmission session.
///
/// `thresholds`, `windows` and `feedback_bits` hold one entry per
/// retransmission round when populated; operations that need a list check for
/// it. Lower reliability bounds are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub packet_bits: usize,
    pub retransmissions: usize,
    pub strategy: Strategy,
    pub thresholds: Vec<f64>,
    pub windows: Vec<usize>,
    pub feedback_bits: Vec<u32>,
}

impl ProtocolConfig {
    pub fn new(packet_bits: usize, retransmissions: usize, strategy: Strategy) -> Self {
        Self {
            packet_bits,
            retransmissions,
            strategy,
            thresholds: Vec::new(),
            windows: Vec::new(),
            feedback_bits: Vec::new(),
        }
    }

    pub fn with_thresholds(mut self, thresholds: Vec<f64>) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn with_windows(mut self, windows: Vec<usize>) -> Self {
        self.windows = windows;
        self
    }

    pub fn with_feedback_bits(mut self, feedback_bits: Vec<u32>) -> Self {
        self.feedback_bits = feedback_bits;
        self
    }

    /// Checks every populated list against the packet size and round count.
    pub fn validate(&self) -> Result<()> {
        if self.packet_bits == 0 {
            return Err(Error::config("packet must carry at least one bit"));
        }
        let d = self.retransmissions;
        for (name, len) in [
            ("thresholds", self.thresholds.len()),
            ("windows", self.windows.len()),
            ("feedback_bits", self.feedback_bits.len()),
        ] {
            if len != 0 && len != d {
                return Err(Error::config(format!(
                    "{name} has {len} entries, expected {d}"
                )));
            }
        }
        if let Some(u) = self.thresholds.iter().find(|u| u.is_nan() || **u < 0.0) {
            return Err(Error::config(format!("threshold {u} is negative")));
        }
        if self.thresholds.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::config("thresholds must be nondecreasing"));
        }
        if let Some(w) = self
            .windows
            .iter()
            .find(|w| **w == 0 || **w > self.packet_bits)
        {
            return Err(Error::config(format!(
                "window {w} outside [1, {}]",
                self.packet_bits
            )));
        }
        if self.feedback_bits.contains(&0) {
            return Err(Error::config("feedback messages need at least one bit"));
        }
        Ok(())
    }

    pub(crate) fn require_thresholds(&self) -> Result<&[f64]> {
        self.validate()?;
        if self.thresholds.len() != self.retransmissions {
            return Err(Error::config(format!(
                "{} thresholds required, {} given",
                self.retransmissions,
                self.thresholds.len()
            )));
        }
        Ok(&self.thresholds)
    }
}

/// One received bit after zero or more MRC combining steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftBit {
    pub accumulated_sample: f64,
    pub copies: u32,
    pub transmitted_positive: bool,
}

impl SoftBit {
    pub fn new(sample: f64, transmitted_positive: bool) -> Self {
        Self {
            accumulated_sample: sample,
            copies: 1,
            transmitted_positive,
        }
    }

    /// Folds another copy into the running MRC average.
    pub fn combine(&mut self, sample: f64) {
        let n = f64::from(self.copies);
        self.accumulated_sample = (self.accumulated_sample * n + sample) / (n + 1.0);
        self.copies += 1;
    }

    pub fn reliability(&self) -> f64 {
        self.accumulated_sample.abs()
    }

    /// Hard decision disagrees with the transmitted symbol. A zero sample is
    /// counted as an error.
    pub fn is_error(&self) -> bool {
        if self.transmitted_positive {
            self.accumulated_sample <= 0.0
        } else {
            self.accumulated_sample >= 0.0
        }
    }
}

/// Nearest integer, halves away from zero.
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// `N / (N + ΣW_d)`.
pub fn forward_rate(config: &ProtocolConfig) -> Result<f64> {
    config.validate()?;
    if config.windows.len() != config.retransmissions {
        return Err(Error::config(
            "forward rate needs one window per retransmission",
        ));
    }
    let n = config.packet_bits as f64;
    let total: usize = config.windows.iter().sum();
    Ok(n / (n + total as f64))
}

/// `ΣC_d / (N + ΣC_d)`.
pub fn reverse_rate(config: &ProtocolConfig) -> Result<f64> {
    config.validate()?;
    if config.feedback_bits.len() != config.retransmissions {
        return Err(Error::config(
            "reverse rate needs one feedback size per retransmission",
        ));
    }
    let n = config.packet_bits as f64;
    let total: f64 = config.feedback_bits.iter().map(|&c| f64::from(c)).sum();
    Ok(total / (n + total))
}

/// Admissible forward rates for `d` rounds of windows between 1 and `n` bits.
pub fn rate_interval(n: usize, d: usize) -> (f64, f64) {
    let (n, d) = (n as f64, d as f64);
    (1.0 / (1.0 + d), n / (d + n))
}

/// Constant window giving forward rate `rate` over `d` rounds.
pub fn fixed_rate_window(n: usize, d: usize, rate: f64) -> Result<usize> {
    if n == 0 || d == 0 {
        return Err(Error::config(
            "packet size and retransmission count must be positive",
        ));
    }
    let (lower, upper) = rate_interval(n, d);
    if !(rate > lower && rate <= upper * (1.0 + 1e-12)) {
        return Err(Error::InvalidRate { rate, lower, upper });
    }
    let w = round_half_away((n as f64 / d as f64) * (1.0 / rate - 1.0));
    Ok((w as usize).clamp(1, n))
}

/// SNR per transmitted symbol when the energy of an information bit is spread
/// over `1/rate` channel uses.
pub fn effective_snr_per_bit(link: &LinkModel, rate: f64) -> f64 {
    link.snr() * rate
}
