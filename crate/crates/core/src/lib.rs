//! Reliability-based bitwise selective retransmission: analytic BER engine,
//! Monte Carlo simulator, feedback encoding, parameter optimization and a
//! sensor-fusion planner built on top of them.

pub mod analytic;
pub mod error;
pub mod feedback;
pub mod fusion;
pub mod mc;
pub mod model;
mod numeric;
pub mod optimize;

pub use error::{Error, Result};
pub use model::{
    db_to_linear, effective_snr_per_bit, fixed_rate_window, forward_rate, linear_to_db,
    rate_interval, reverse_rate, round_half_away, Fading, LinkModel, ProtocolConfig, SoftBit,
    Strategy,
};
pub use numeric::{golden_section, integrate, Minimum};
