//! Feedback messages telling the sender which bits to repeat.
//!
//! Two encodings are provided. The combinadic codec ranks the W-subset of
//! unreliable positions in colexicographic order and sends the rank in
//! `⌈log₂ C(N, W)⌉` bits. The permutation codec assumes both ends step an
//! identical stream of pseudo-random permutations; the receiver waits until
//! a permutation moves the unreliable bits into the first W slots and
//! reports the index `K` as `I` idle symbol periods plus a `C₁`-bit residual.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Minimum probability that a feedback message arrives intact.
pub const DEFAULT_P_MIN: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeedbackMessage {
    Combinadic {
        rank: BigUint,
        bit_width: u32,
    },
    Permutation {
        residual: u64,
        idle_periods: u64,
        c1: u32,
    },
}

impl FeedbackMessage {
    /// Bits occupied on the reverse link.
    pub fn bit_width(&self) -> u32 {
        match self {
            FeedbackMessage::Combinadic { bit_width, .. } => *bit_width,
            FeedbackMessage::Permutation { c1, .. } => *c1,
        }
    }

    /// Payload as exactly `bit_width` bits, most significant first.
    pub fn to_bits(&self) -> Vec<bool> {
        let width = self.bit_width() as u64;
        match self {
            FeedbackMessage::Combinadic { rank, .. } => {
                (0..width).rev().map(|i| rank.bit(i)).collect()
            }
            FeedbackMessage::Permutation { residual, .. } => (0..width)
                .rev()
                .map(|i| i < 64 && (residual >> i) & 1 == 1)
                .collect(),
        }
    }

    /// Bits packed into bytes, first bit in the most significant position of
    /// byte 0; the final byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_bits()
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i)))
            })
            .collect()
    }

    /// Parses a combinadic payload of exactly the width implied by `(n, w)`.
    pub fn combinadic_from_bits(bits: &[bool], n: usize, w: usize) -> Result<Self> {
        let bit_width = bit_width(n, w)?;
        if bits.len() != bit_width as usize {
            return Err(Error::InvalidSubset(format!(
                "combinadic payload has {} bits, expected {bit_width}",
                bits.len()
            )));
        }
        let rank = bits
            .iter()
            .fold(BigUint::zero(), |acc, &b| (acc << 1u32) + u32::from(b));
        if rank >= binomial(n, w) {
            return Err(Error::InvalidRank {
                rank: rank.to_string(),
                n,
                w,
            });
        }
        Ok(FeedbackMessage::Combinadic { rank, bit_width })
    }
}

/// `C(n, k)` as an arbitrary-precision integer.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `log₂` of an arbitrary-precision integer, exact enough for rounding.
pub fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_u64().map_or(f64::NAN, |v| (v as f64).log2());
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("64 leading bits fit");
    (top as f64).log2() + shift as f64
}

/// `⌈log₂ C(n, w)⌉`, the width of a combinadic feedback message.
pub fn bit_width(n: usize, w: usize) -> Result<u32> {
    if w == 0 || w > n {
        return Err(Error::InvalidSubset(format!(
            "window {w} does not fit a packet of {n} bits"
        )));
    }
    let count = binomial(n, w);
    Ok((count - 1u32).bits() as u32)
}

fn check_positions(positions: &[usize], n: usize) -> Result<()> {
    if positions.is_empty() {
        return Err(Error::InvalidSubset("empty position set".into()));
    }
    for pair in positions.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidSubset(format!(
                "positions must be strictly increasing, found {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if positions[0] == 0 || *positions.last().expect("nonempty") > n {
        return Err(Error::InvalidSubset(format!(
            "positions must lie in 1..={n}"
        )));
    }
    Ok(())
}

/// Colexicographic rank of a sorted 1-based position set:
/// `Σ_i C(c_i, i + 1)` over 0-based positions `c_0 < c_1 < …`.
pub fn combinadic_encode(positions: &[usize], n: usize) -> Result<FeedbackMessage> {
    check_positions(positions, n)?;
    let rank = positions
        .iter()
        .enumerate()
        .fold(BigUint::zero(), |acc, (i, &p)| acc + binomial(p - 1, i + 1));
    Ok(FeedbackMessage::Combinadic {
        rank,
        bit_width: bit_width(n, positions.len())?,
    })
}

/// Inverse of [`combinadic_encode`].
pub fn combinadic_decode(msg: &FeedbackMessage, n: usize, w: usize) -> Result<Vec<usize>> {
    let FeedbackMessage::Combinadic { rank, .. } = msg else {
        return Err(Error::config("expected a combinadic message"));
    };
    bit_width(n, w)?;
    if *rank >= binomial(n, w) {
        return Err(Error::InvalidRank {
            rank: rank.to_string(),
            n,
            w,
        });
    }
    let mut remaining = rank.clone();
    let mut out = vec![0; w];
    let mut c = n;
    for k in (1..=w).rev() {
        // largest c with C(c, k) ≤ remaining; c only decreases across k
        c -= 1;
        let mut value = binomial(c, k);
        while value > remaining {
            // C(c−1, k) = C(c, k)·(c − k)/c
            value = value * (c - k) / c;
            c -= 1;
        }
        remaining -= &value;
        out[k - 1] = c + 1;
    }
    Ok(out)
}

/// Shared pseudo-random permutation stream. Permutation `k` is derived
/// from its own cipher stream, so either side can jump straight to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationStream {
    seed: u64,
    n: usize,
}

impl PermutationStream {
    pub fn new(seed: u64, n: usize) -> Self {
        Self { seed, n }
    }

    /// 1-based positions occupying the first `w` slots of permutation `k`.
    pub fn window(&self, k: u64, w: usize) -> Vec<usize> {
        let mut scratch: Vec<usize> = (1..=self.n).collect();
        let mut swaps = Vec::with_capacity(w);
        self.shuffle_prefix(k, w, &mut scratch, &mut swaps);
        scratch.truncate(w);
        scratch
    }

    /// Partial Fisher–Yates on the identity order; `swaps` records the moves
    /// so the caller can restore the identity afterwards.
    fn shuffle_prefix(&self, k: u64, w: usize, scratch: &mut [usize], swaps: &mut Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        swaps.clear();
        for i in 0..w {
            let j = rng.random_range(i..self.n);
            scratch.swap(i, j);
            swaps.push(j);
        }
    }

    fn restore(scratch: &mut [usize], swaps: &[usize]) {
        for (i, &j) in swaps.iter().enumerate().rev() {
            scratch.swap(i, j);
        }
    }
}

/// Splits a 1-based permutation index into idle periods and residual.
pub fn split_index(k: u64, c1: u32) -> (u64, u64) {
    let per_period = 1u64 << c1;
    (k / per_period, k % per_period)
}

/// Default search cap: a million times the expected index.
pub fn default_search_cap(n: usize, w: usize) -> u64 {
    let mean = binomial(n, w).to_f64().unwrap_or(f64::INFINITY);
    let cap = 1e6 * mean;
    if cap >= u64::MAX as f64 {
        u64::MAX
    } else {
        cap as u64
    }
}

/// Finds the first permutation index `K ≥ 1` whose first `w` slots all hold
/// unreliable positions. With exactly `w` targets that means the window
/// equals the target set.
pub fn permutation_search(
    unreliable: &[usize],
    n: usize,
    w: usize,
    c1: u32,
    seed: u64,
) -> Result<FeedbackMessage> {
    permutation_search_capped(unreliable, n, w, c1, seed, default_search_cap(n, w))
}

pub fn permutation_search_capped(
    unreliable: &[usize],
    n: usize,
    w: usize,
    c1: u32,
    seed: u64,
    cap: u64,
) -> Result<FeedbackMessage> {
    if !(1..=63).contains(&c1) {
        return Err(Error::config(format!(
            "residual width {c1} must be in 1..=63"
        )));
    }
    let k = first_matching_index(unreliable, n, w, seed, cap)?;
    let (idle_periods, residual) = split_index(k, c1);
    Ok(FeedbackMessage::Permutation {
        residual,
        idle_periods,
        c1,
    })
}

fn first_matching_index(
    unreliable: &[usize],
    n: usize,
    w: usize,
    seed: u64,
    cap: u64,
) -> Result<u64> {
    let mut sorted = unreliable.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    check_positions(&sorted, n)?;
    if w == 0 || w > sorted.len() {
        return Err(Error::InvalidSubset(format!(
            "window {w} needs at least as many unreliable positions, got {}",
            sorted.len()
        )));
    }
    let mut member = vec![false; n + 1];
    for &p in &sorted {
        member[p] = true;
    }
    let stream = PermutationStream::new(seed, n);
    let mut scratch: Vec<usize> = (1..=n).collect();
    let mut swaps = Vec::with_capacity(w);
    for k in 1..=cap {
        stream.shuffle_prefix(k, w, &mut scratch, &mut swaps);
        if scratch[..w].iter().all(|&p| member[p]) {
            return Ok(k);
        }
        PermutationStream::restore(&mut scratch, &swaps);
    }
    Err(Error::SearchExhausted(cap))
}

/// Sender side: regenerates the permutation from the message and returns
/// the sorted positions to repeat.
pub fn permutation_recover(
    msg: &FeedbackMessage,
    n: usize,
    w: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let FeedbackMessage::Permutation {
        residual,
        idle_periods,
        c1,
    } = msg
    else {
        return Err(Error::config("expected a permutation message"));
    };
    let k = idle_periods
        .checked_mul(1u64 << c1)
        .and_then(|base| base.checked_add(*residual))
        .ok_or_else(|| Error::config("permutation index overflows 64 bits"))?;
    let mut window = PermutationStream::new(seed, n).window(k, w);
    window.sort_unstable();
    Ok(window)
}

/// `C₁* = round(log₂ E[K] − ½)`, at least 1, for `E[K] = C(n, w)`.
pub fn optimal_c1(n: usize, w: usize) -> u32 {
    c1_from_log2(log2_big(&binomial(n, w)))
}

/// `C₁*` for an arbitrary mean permutation index.
pub fn optimal_c1_for_mean(mean_k: f64) -> u32 {
    c1_from_log2(mean_k.log2())
}

fn c1_from_log2(log2_mean: f64) -> u32 {
    let c = crate::model::round_half_away(log2_mean - 0.5);
    if c.is_finite() && c >= 1.0 {
        c as u32
    } else {
        1
    }
}

/// Forward throughput with one retransmission round, `ζ₁ = n / E[delay]`.
/// Pass [`DelayStats::mean_delay`] so the `C₁` residual periods count.
pub fn throughput_one_retx(n: usize, mean_delay: f64) -> f64 {
    n as f64 / mean_delay
}

/// Largest per-bit reverse-link error probability keeping a `c`-bit message
/// intact with probability `p_min`: `1 − p_min^{1/c}`.
pub fn feedback_error_tolerance(c_bits: u32, p_min: f64) -> Result<f64> {
    if c_bits == 0 {
        return Err(Error::config("feedback messages need at least one bit"));
    }
    if !(p_min > 0.0 && p_min < 1.0) {
        return Err(Error::config(format!("p_min = {p_min} must lie in (0, 1)")));
    }
    // −expm1(ln p / c) keeps precision for large c
    Ok(-(p_min.ln() / f64::from(c_bits)).exp_m1())
}

/// Waiting statistics of the permutation codec for one residual width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayStats {
    pub c1: u32,
    pub mean_k: f64,
    pub mean_idle_plus_one: f64,
    /// Idle periods plus the `C₁` symbol periods spent sending the residual.
    pub mean_delay: f64,
}

/// Draws `trials` permutation indices for random `w`-subsets of `n` bits.
/// Each trial uses its own stream seed derived from `seed`.
pub fn sample_search_indices(n: usize, w: usize, trials: usize, seed: u64) -> Result<Vec<u64>> {
    use rayon::prelude::*;
    bit_width(n, w)?;
    let cap = default_search_cap(n, w);
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let mut targets = rand::seq::index::sample(&mut rng, n, w).into_vec();
            targets.iter_mut().for_each(|p| *p += 1);
            let stream_seed: u64 = rng.random();
            first_matching_index(&targets, n, w, stream_seed, cap)
        })
        .collect()
}

/// Delay statistics for a residual width from sampled indices. Sharing the
/// samples across widths makes comparisons between widths low-variance.
pub fn delay_stats(indices: &[u64], c1: u32) -> DelayStats {
    let count = indices.len() as f64;
    let mean_k = indices.iter().map(|&k| k as f64).sum::<f64>() / count;
    let mean_idle_plus_one = indices
        .iter()
        .map(|&k| (split_index(k, c1).0 + 1) as f64)
        .sum::<f64>()
        / count;
    DelayStats {
        c1,
        mean_k,
        mean_idle_plus_one,
        mean_delay: mean_idle_plus_one + f64::from(c1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn subsets(n: usize, w: usize) -> Vec<Vec<usize>> {
        fn rec(start: usize, n: usize, w: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == w {
                out.push(cur.clone());
                return;
            }
            for p in start..=n {
                cur.push(p);
                rec(p + 1, n, w, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(1, n, w, &mut Vec::new(), &mut out);
        out
    }

    fn rank(msg: &FeedbackMessage) -> u64 {
        match msg {
            FeedbackMessage::Combinadic { rank, .. } => rank.to_u64().unwrap(),
            _ => panic!("not combinadic"),
        }
    }

    #[test]
    fn combinadic_examples() {
        let first = combinadic_encode(&[1, 2], 4).unwrap();
        assert_eq!((rank(&first), first.bit_width()), (0, 3));
        assert_eq!(rank(&combinadic_encode(&[3, 4], 4).unwrap()), 5);
        assert_eq!(bit_width(532, 3).unwrap(), 25);
        let zero = FeedbackMessage::Combinadic {
            rank: BigUint::zero(),
            bit_width: 3,
        };
        assert_eq!(combinadic_decode(&zero, 4, 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn colex_order_matches_enumeration() {
        let mut all = subsets(5, 3);
        // colexicographic: compare from the largest element down
        all.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
        for (i, s) in all.iter().enumerate() {
            assert_eq!(rank(&combinadic_encode(s, 5).unwrap()), i as u64);
        }
    }

    #[test]
    fn combinadic_round_trip_exhaustive() {
        for n in 1..=12 {
            for w in 1..=n {
                for s in subsets(n, w) {
                    let msg = combinadic_encode(&s, n).unwrap();
                    assert_eq!(combinadic_decode(&msg, n, w).unwrap(), s);
                    let parsed =
                        FeedbackMessage::combinadic_from_bits(&msg.to_bits(), n, w).unwrap();
                    assert_eq!(parsed, msg);
                }
            }
        }
    }

    #[test]
    fn combinadic_rejects_bad_input() {
        assert!(matches!(
            combinadic_encode(&[2, 2], 4),
            Err(Error::InvalidSubset(_))
        ));
        assert!(matches!(
            combinadic_encode(&[0, 2], 4),
            Err(Error::InvalidSubset(_))
        ));
        assert!(matches!(
            combinadic_encode(&[3, 5], 4),
            Err(Error::InvalidSubset(_))
        ));
        let big = FeedbackMessage::Combinadic {
            rank: BigUint::from(6u32),
            bit_width: 3,
        };
        assert!(matches!(
            combinadic_decode(&big, 4, 2),
            Err(Error::InvalidRank { .. })
        ));
    }

    #[test]
    fn wire_format_is_big_endian() {
        let msg = combinadic_encode(&[3, 4], 4).unwrap();
        assert_eq!(msg.to_bits(), vec![true, false, true]);
        assert_eq!(msg.to_bytes(), vec![0b1010_0000]);
        let msg = FeedbackMessage::Permutation {
            residual: 0b1_0000_0001,
            idle_periods: 4,
            c1: 9,
        };
        assert_eq!(msg.to_bytes(), vec![0b1000_0000, 0b1000_0000]);
    }

    #[test]
    fn large_packets_round_trip() {
        let positions = [1, 17, 300, 1063, 1064];
        let msg = combinadic_encode(&positions, 1064).unwrap();
        assert_eq!(combinadic_decode(&msg, 1064, 5).unwrap(), positions);
        assert!(log2_big(&binomial(1064, 400)) > 1000.0);
    }

    #[test]
    fn full_window_matches_first_permutation() {
        let all: Vec<usize> = (1..=8).collect();
        let msg = permutation_search(&all, 8, 8, 3, 99).unwrap();
        assert_eq!(
            msg,
            FeedbackMessage::Permutation {
                residual: 1,
                idle_periods: 0,
                c1: 3
            }
        );
    }

    #[test]
    fn permutation_round_trip() {
        for seed in 0..20u64 {
            let targets = [2, 9, 13];
            let msg = permutation_search(&targets, 16, 3, 9, seed).unwrap();
            assert_eq!(permutation_recover(&msg, 16, 3, seed).unwrap(), targets);
        }
    }

    #[test]
    fn search_cap_is_enforced() {
        let r = permutation_search_capped(&[1, 2, 3], 64, 3, 4, 7, 10);
        assert!(matches!(r, Err(Error::SearchExhausted(10))));
    }

    #[test]
    fn c1_examples() {
        assert_eq!(optimal_c1_for_mean(30.0), 4);
        assert_eq!(optimal_c1_for_mean(45.0), 5);
        assert_eq!(optimal_c1(2, 1), 1);
        assert_eq!(optimal_c1(16, 3), 9);
        assert_eq!(optimal_c1(64, 2), 10);
    }

    #[test]
    fn wire_format_example() {
        let msg = combinadic_encode(&[2, 5, 7], 8).unwrap();
        assert_eq!(
            msg,
            FeedbackMessage::Combinadic {
                rank: BigUint::from(27u32),
                bit_width: 6
            }
        );
        assert_eq!(msg.to_bytes(), vec![0x6C]);
        assert_eq!(
            FeedbackMessage::combinadic_from_bits(&msg.to_bits(), 8, 3).unwrap(),
            msg
        );
    }

    #[test]
    fn throughput_and_tolerance_examples() {
        assert_eq!(throughput_one_retx(64, 1.0), 64.0);
        assert!((feedback_error_tolerance(1, DEFAULT_P_MIN).unwrap() - 1e-3).abs() < 1e-15);
        let t36 = feedback_error_tolerance(36, DEFAULT_P_MIN).unwrap();
        assert!((t36 - 2.78e-5).abs() < 1e-7);
        let mut last = 1.0;
        for c in [1, 10, 100, 1000, 100_000] {
            let t = feedback_error_tolerance(c, DEFAULT_P_MIN).unwrap();
            assert!(t < last);
            last = t;
        }
        assert!(feedback_error_tolerance(0, 0.999).is_err());
    }

    proptest! {
        #[test]
        fn tolerance_bound_is_tight(c in 1u32..5000, p in 0.5f64..0.99999) {
            let t = feedback_error_tolerance(c, p).unwrap();
            let intact = (1.0 - t).powf(f64::from(c));
            prop_assert!((intact - p).abs() < 1e-9);
        }

        #[test]
        fn random_subsets_round_trip(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = rand::seq::index::sample(&mut rng, 64, 8).into_vec();
            s.sort_unstable();
            s.iter_mut().for_each(|p| *p += 1);
            let msg = combinadic_encode(&s, 64).unwrap();
            prop_assert_eq!(combinadic_decode(&msg, 64, 8).unwrap(), s);
        }

        #[test]
        fn width_exceeds_information_bound(n in 2usize..200, frac in 0.01f64..0.5) {
            let w = ((n as f64 * frac).ceil() as usize).clamp(1, n);
            let c = f64::from(bit_width(n, w).unwrap());
            // C(n, w) ≥ (n/w)^w
            prop_assert!(c >= w as f64 * (n as f64 / w as f64).log2() - 1e-9);
        }
    }
}
