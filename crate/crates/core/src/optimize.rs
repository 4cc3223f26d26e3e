//! BER-minimizing parameter search for the fixed-rate, fixed-window and
//! fixed-threshold strategies.
//!
//! Every sweep minimizes the closed-form approximation at the effective
//! per-symbol SNR `γ_b·R_f`, so repeated bits are paid for with energy. The
//! best grid point is refined by golden-section search and the final
//! design is re-evaluated with the quadrature BER.

use rayon::prelude::*;

use crate::analytic::{
    band_probability, ber_approx_thresholds, ber_exact_thresholds, BandMethod, PronyCoefficients,
};
use crate::error::{Error, Result};
use crate::model::{rate_interval, round_half_away, LinkModel};
use crate::numeric::{bisect_increasing, golden_section};

pub const DEFAULT_GRID_POINTS: usize = 64;

/// Relative tolerance separating real slope from evaluation noise when
/// counting direction changes along a sweep.
pub const FLATNESS_TOLERANCE: f64 = 1e-9;

/// Golden-section stops at this fraction of the search interval.
const REFINE_WIDTH: f64 = 1e-4;

/// Protocol parameters realizing one point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub forward_rate: f64,
    pub snr_eff: f64,
    pub thresholds: Vec<f64>,
    /// Expected bits repeated per round.
    pub windows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// `(parameter, ber_approx)` pairs in increasing parameter order.
    pub grid: Vec<(f64, f64)>,
    pub minimizer: f64,
    pub min_ber: f64,
    /// Golden-section refinement ran around an interior grid minimum.
    pub refined: bool,
    /// The minimum sits at an end of the search interval.
    pub boundary: bool,
    /// At most one change of direction along the grid.
    pub unimodal: bool,
    /// Quadrature BER of the returned design.
    pub exact_min_ber: f64,
    pub design: Design,
    pub warnings: Vec<String>,
}

impl SweepResult {
    /// Relative gap between the approximate and quadrature minimum.
    pub fn approximation_gap(&self) -> f64 {
        (self.min_ber - self.exact_min_ber).abs() / self.exact_min_ber
    }
}

/// True when the sequence falls then rises at most once. Steps smaller than
/// `rel_tol` times the largest magnitude are treated as flat.
pub fn is_unimodal(values: &[f64], rel_tol: f64) -> bool {
    direction_changes(values, rel_tol) <= 1 && !rises_then_falls(values, rel_tol)
}

fn significant_steps(values: &[f64], rel_tol: f64) -> Vec<f64> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = rel_tol * scale;
    values
        .windows(2)
        .map(|p| p[1] - p[0])
        .filter(|s| s.abs() > tol)
        .collect()
}

/// Number of sign changes among significant consecutive differences.
pub fn direction_changes(values: &[f64], rel_tol: f64) -> usize {
    let steps = significant_steps(values, rel_tol);
    steps
        .windows(2)
        .filter(|p| (p[0] > 0.0) != (p[1] > 0.0))
        .count()
}

fn rises_then_falls(values: &[f64], rel_tol: f64) -> bool {
    let steps = significant_steps(values, rel_tol);
    matches!((steps.first(), steps.last()), (Some(a), Some(b)) if *a > 0.0 && *b < 0.0)
}

fn inverse_bracket<F: FnMut(f64) -> Result<f64>>(mut f: F, start: f64) -> Result<f64> {
    let mut hi = start.max(1.0);
    for _ in 0..200 {
        if f(hi)? >= 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::NumericFailure {
        achieved: f64::NAN,
        requested: 0.0,
    })
}

/// Thresholds `U₀ ≤ … ≤ U_{D−1}` making every band probability equal to `p`.
/// `U₀` solves `P₀(U₀) = p`; each later threshold solves `P_d(U₀..U_d) = p`
/// and is clamped to its predecessor when even `U_d = U_{d−1}` overshoots.
/// `p = 1` returns infinite thresholds (every bit repeated every round).
pub fn equal_probability_thresholds(p: f64, d: usize, link: &LinkModel) -> Result<Vec<f64>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::config(format!(
            "band probability {p} outside (0, 1]"
        )));
    }
    if p == 1.0 {
        return Ok(vec![f64::INFINITY; d]);
    }
    let mut u: Vec<f64> = Vec::with_capacity(d);
    for round in 0..d {
        let prefix = u.clone();
        let mut residual = |x: f64| -> Result<f64> {
            let mut trial = prefix.clone();
            trial.push(x);
            Ok(band_probability(&trial, link, BandMethod::Quadrature)? - p)
        };
        let floor = u.last().copied().unwrap_or(0.0);
        if round > 0 && residual(floor)? >= 0.0 {
            u.push(floor);
            continue;
        }
        let hi = inverse_bracket(&mut residual, floor * 2.0)?;
        u.push(bisect_increasing(&mut residual, floor, hi, 1e-13, 1e-13)?);
    }
    Ok(u)
}

/// Fixed-window design: `R_f = 1/(1 + D·p)`, thresholds at `γ_b·R_f`.
pub fn window_design(n: usize, d: usize, fraction: f64, link: &LinkModel) -> Result<Design> {
    if d == 0 {
        return Err(Error::config(
            "window design needs at least one retransmission",
        ));
    }
    let rate = 1.0 / (1.0 + d as f64 * fraction);
    let eff = link.with_snr(link.snr() * rate)?;
    let thresholds = equal_probability_thresholds(fraction, d, &eff)?;
    let w = (round_half_away(fraction * n as f64) as usize).clamp(1, n);
    Ok(Design {
        forward_rate: rate,
        snr_eff: eff.snr(),
        thresholds,
        windows: vec![w; d],
    })
}

/// Fixed-threshold design: solves `R_f = 1/(1 + Σ_d P_{d−1})` with the band
/// probabilities evaluated at `γ_b·R_f`. Round `d` repeats `N·P_{d−1}` bits
/// on average.
pub fn threshold_design(n: usize, d: usize, threshold: f64, link: &LinkModel) -> Result<Design> {
    if d == 0 {
        return Err(Error::config(
            "threshold design needs at least one retransmission",
        ));
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::config(format!("threshold {threshold} is negative")));
    }
    let probs = |rate: f64| -> Result<Vec<f64>> {
        let eff = link.with_snr(link.snr() * rate)?;
        (1..=d)
            .map(|k| band_probability(&vec![threshold; k], &eff, BandMethod::Quadrature))
            .collect()
    };
    // the map is increasing in the rate, so iterating down from 1 converges
    // monotonically to the largest fixed point
    let mut rate = 1.0;
    let mut p = probs(rate)?;
    for _ in 0..500 {
        let next = 1.0 / (1.0 + p.iter().sum::<f64>());
        let done = (next - rate).abs() < 1e-12;
        rate = next;
        p = probs(rate)?;
        if done {
            break;
        }
    }
    let windows = p
        .iter()
        .map(|q| round_half_away(q * n as f64) as usize)
        .collect();
    Ok(Design {
        forward_rate: rate,
        snr_eff: link.snr() * rate,
        thresholds: vec![threshold; d],
        windows,
    })
}

/// Window fraction equivalent to a forward rate, `p = (1/R_f − 1)/D`.
fn rate_to_fraction(rate: f64, d: usize) -> f64 {
    (1.0 / rate - 1.0) / d as f64
}

fn approx_ber(design: &Design) -> f64 {
    ber_approx_thresholds(
        &design.thresholds,
        design.snr_eff,
        &PronyCoefficients::PUBLISHED,
    )
}

struct Sweep<'a> {
    lower: f64,
    upper: f64,
    include_lower: bool,
    grid_points: usize,
    design: &'a (dyn Fn(f64) -> Result<Design> + Sync),
}

impl Sweep<'_> {
    fn points(&self) -> Vec<f64> {
        let m = self.grid_points;
        let step = (self.upper - self.lower)
            / if self.include_lower {
                (m - 1) as f64
            } else {
                m as f64
            };
        let offset = if self.include_lower { 0 } else { 1 };
        (0..m)
            .map(|i| self.lower + (i + offset) as f64 * step)
            .collect()
    }

    fn objective(&self, x: f64) -> Result<f64> {
        Ok(approx_ber(&(self.design)(x)?))
    }

    fn run(&self) -> Result<SweepResult> {
        let xs = self.points();
        let values = xs
            .par_iter()
            .map(|&x| self.objective(x))
            .collect::<Result<Vec<f64>>>()?;
        let grid: Vec<(f64, f64)> = xs.iter().copied().zip(values.iter().copied()).collect();
        let best = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("grid is nonempty");
        let unimodal = is_unimodal(&values, FLATNESS_TOLERANCE);
        let mut warnings = Vec::new();
        if !unimodal {
            warnings.push(format!(
                "sweep over [{:.6}, {:.6}] changes direction {} times; using the dense-grid minimum",
                self.lower,
                self.upper,
                direction_changes(&values, FLATNESS_TOLERANCE)
            ));
        }
        let boundary = best == 0 || best == xs.len() - 1;
        let (mut minimizer, mut min_ber, mut refined) = (xs[best], values[best], false);
        if !boundary && unimodal {
            let lo = xs[best - 1];
            let hi = xs[best + 1];
            let mut failure = None;
            let found = golden_section(
                |x| match self.objective(x) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                },
                lo,
                hi,
                REFINE_WIDTH * (self.upper - self.lower),
            );
            if let Some(e) = failure {
                return Err(e);
            }
            if found.value <= min_ber {
                minimizer = found.x;
                min_ber = found.value;
            }
            refined = true;
        }
        let design = (self.design)(minimizer)?;
        let exact_min_ber =
            ber_exact_thresholds(&design.thresholds, &LinkModel::awgn(design.snr_eff)?)?;
        let result = SweepResult {
            grid,
            minimizer,
            min_ber,
            refined,
            boundary,
            unimodal,
            exact_min_ber,
            design,
            warnings,
        };
        let mut result = result;
        if result.approximation_gap() > 0.15 {
            result.warnings.push(format!(
                "approximate minimum {:.4e} and quadrature value {:.4e} differ by {:.1}%",
                result.min_ber,
                result.exact_min_ber,
                100.0 * result.approximation_gap()
            ));
        }
        Ok(result)
    }
}

fn check_inputs(n: usize, d: usize, link: &LinkModel) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::config(
            "packet size and retransmission count must be positive",
        ));
    }
    if !matches!(link.fading(), crate::model::Fading::None) {
        return Err(Error::config("optimizers work on AWGN links"));
    }
    Ok(())
}

/// Sweeps the forward rate over `(1/(1+D), N/(D+N)]`. The window implied by
/// a rate is kept fractional so the objective is smooth.
pub fn optimize_rate(n: usize, d: usize, link: &LinkModel) -> Result<SweepResult> {
    optimize_rate_with(n, d, link, DEFAULT_GRID_POINTS)
}

pub fn optimize_rate_with(
    n: usize,
    d: usize,
    link: &LinkModel,
    grid_points: usize,
) -> Result<SweepResult> {
    check_inputs(n, d, link)?;
    let (lower, upper) = rate_interval(n, d);
    let design = move |rate: f64| -> Result<Design> {
        let fraction = rate_to_fraction(rate, d).min(1.0);
        let mut out = window_design(n, d, fraction, link)?;
        out.forward_rate = rate;
        Ok(out)
    };
    Sweep {
        lower,
        upper,
        include_lower: false,
        grid_points,
        design: &design,
    }
    .run()
}

/// Sweeps the window fraction `W/N` over `(0, 1]`.
pub fn optimize_window(n: usize, d: usize, link: &LinkModel) -> Result<SweepResult> {
    optimize_window_with(n, d, link, DEFAULT_GRID_POINTS)
}

pub fn optimize_window_with(
    n: usize,
    d: usize,
    link: &LinkModel,
    grid_points: usize,
) -> Result<SweepResult> {
    check_inputs(n, d, link)?;
    let design = move |fraction: f64| window_design(n, d, fraction, link);
    Sweep {
        lower: 0.0,
        upper: 1.0,
        include_lower: false,
        grid_points,
        design: &design,
    }
    .run()
}

/// Default upper end of the threshold sweep: a little beyond the mean
/// reliability `2γ_b` of a fresh sample.
pub fn default_threshold_limit(link: &LinkModel) -> f64 {
    4.0 * link.snr() + 4.0
}

/// Sweeps a single shared threshold over `(0, u_max]`.
pub fn optimize_threshold(n: usize, d: usize, link: &LinkModel) -> Result<SweepResult> {
    optimize_threshold_with(
        n,
        d,
        link,
        default_threshold_limit(link),
        DEFAULT_GRID_POINTS,
    )
}

pub fn optimize_threshold_with(
    n: usize,
    d: usize,
    link: &LinkModel,
    u_max: f64,
    grid_points: usize,
) -> Result<SweepResult> {
    check_inputs(n, d, link)?;
    if !(u_max > 0.0 && u_max.is_finite()) {
        return Err(Error::config(format!(
            "threshold limit {u_max} must be positive and finite"
        )));
    }
    let design = move |u: f64| threshold_design(n, d, u, link);
    Sweep {
        lower: 0.0,
        upper: u_max,
        include_lower: false,
        grid_points,
        design: &design,
    }
    .run()
}

/// Smallest window (in bits) whose fixed-window design reaches `target`,
/// searching below the BER-optimal window.
pub fn window_for_target_ber(n: usize, d: usize, link: &LinkModel, target: f64) -> Result<usize> {
    let best = optimize_window(n, d, link)?;
    if best.min_ber > target {
        return Err(Error::OutOfRange {
            target,
            lower: best.min_ber,
            upper: 0.5,
        });
    }
    let ber_at = |w: usize| -> Result<f64> {
        Ok(approx_ber(&window_design(n, d, w as f64 / n as f64, link)?))
    };
    // BER falls monotonically up to the optimum, so bisect on whole windows
    let mut hi = (best.minimizer * n as f64).round().clamp(1.0, n as f64) as usize;
    while ber_at(hi)? > target && hi < n {
        hi += 1;
    }
    if ber_at(1)? <= target {
        return Ok(1);
    }
    let mut lo = 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ber_at(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
