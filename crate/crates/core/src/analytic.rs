//! Closed-form and quadrature BER engine for reliability-based bitwise
//! retransmission with MRC combining.
//!
//! Retransmission counts are fixed by quantizing the initial reliability
//! `|r̄₀|` with thresholds `U₀ ≤ … ≤ U_{D−1}`: bits below `U₀` are repeated `D`
//! times, bits in `(U₀, U₁]` `D − 1` times and so on. The "exact" functions
//! integrate the combining densities numerically; the approximations replace
//! the Q-function with a two-term exponential fit and integrate in closed form.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::model::{Fading, LinkModel, ProtocolConfig};
use crate::numeric::{integrate, GAUSSIAN_SPAN, QUAD_ABS_TOL};

/// Two-term fit `Q(x) ≈ Σ A_k exp(−B_k x²)` for the right tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PronyCoefficients {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl PronyCoefficients {
    pub const PUBLISHED: Self = Self {
        a: [0.208, 0.147],
        b: [0.971, 0.525],
    };

    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.a.iter().copied().zip(self.b.iter().copied())
    }
}

impl Default for PronyCoefficients {
    fn default() -> Self {
        Self::PUBLISHED
    }
}

/// Reliability interval `lower ≤ |r̄| ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityBand {
    lower: f64,
    upper: f64,
}

impl ReliabilityBand {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower >= 0.0 && upper >= lower) {
            return Err(Error::config(format!(
                "invalid reliability band [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `[0, upper]`; negative or NaN bounds collapse to the empty band.
    pub fn up_to(upper: f64) -> Self {
        Self {
            lower: 0.0,
            upper: if upper >= 0.0 { upper } else { 0.0 },
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

pub fn q_prony(x: f64, coeffs: &PronyCoefficients) -> f64 {
    coeffs.terms().map(|(a, b)| a * (-b * x * x).exp()).sum()
}

fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `Q(√(2γ)(u/(2γ) ± 1))`, the probability mass of a fresh sample beyond `∓u`.
fn q_shifted(gamma: f64, u: f64, sign: f64) -> f64 {
    if u.is_infinite() {
        return 0.0;
    }
    q_function((2.0 * gamma).sqrt() * (u / (2.0 * gamma) + sign))
}

/// BER of bits whose reliability stayed within `[0, u0]`; `u0 = ∞` is the
/// uncoded antipodal BER.
pub fn ber_no_retx(link: &LinkModel, u0: f64) -> f64 {
    let g = link.snr();
    q_function((2.0 * g).sqrt()) - q_shifted(g, u0, 1.0)
}

/// Probability that a fresh sample lands in the band.
pub fn prob_in_band(link: &LinkModel, band: &ReliabilityBand) -> f64 {
    let g = link.snr();
    let p = q_shifted(g, band.lower, 1.0) - q_shifted(g, band.upper, 1.0)
        + q_shifted(g, band.lower, -1.0)
        - q_shifted(g, band.upper, -1.0);
    p.clamp(0.0, 1.0)
}

// Densities are written in the printed form with E_b normalized to one, so
// the effective noise density is 1/γ and r̄ sits on the half-LLR scale.
fn kernel_envelope(d: u32, r: f64, gamma: f64) -> f64 {
    let n0 = 1.0 / gamma;
    let k = f64::from(d + 1) * n0;
    let mean = 2.0 * (gamma / n0).sqrt();
    0.25 * (k / PI).sqrt() * (-(r - mean).powi(2) / (4.0 / k)).exp()
}

fn window_scale(d: u32, gamma: f64) -> f64 {
    let n0 = 1.0 / gamma;
    (f64::from(d + 1) * n0 / (4.0 * f64::from(d))).sqrt()
}

/// Joint density of the `d + 1`-copy MRC sample and `|r̄₀| ≤ u0`.
pub fn chi_kernel(d: u32, r: f64, u0: f64, link: &LinkModel) -> f64 {
    assert!(d >= 1, "chi kernel needs at least one retransmission");
    let g = link.snr();
    let s = window_scale(d, g);
    let window = if u0.is_infinite() {
        2.0
    } else {
        erf(s * (u0 - r)) + erf(s * (u0 + r))
    };
    kernel_envelope(d, r, g) * window
}

/// Joint density of the `d + 1`-copy MRC sample and `u_lo < |r̄₀| ≤ u_hi`.
pub fn lambda_kernel(d: u32, r: f64, u_hi: f64, u_lo: f64, link: &LinkModel) -> f64 {
    assert!(d >= 1, "lambda kernel needs at least one retransmission");
    let g = link.snr();
    let s = window_scale(d, g);
    let edge = |u: f64| {
        if u.is_infinite() {
            2.0
        } else {
            erf(s * (u + r)) + erf(s * (u - r))
        }
    };
    (kernel_envelope(d, r, g) * (edge(u_hi) - edge(u_lo))).max(0.0)
}

/// Density of a single fresh sample on the reliability scale.
fn fresh_density(r: f64, gamma: f64) -> f64 {
    let var = 2.0 * gamma;
    (-(r - 2.0 * gamma).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Support of the `copies`-sample MRC density after truncation.
fn mrc_support(copies: u32, gamma: f64) -> (f64, f64) {
    let sd = (2.0 * gamma / f64::from(copies)).sqrt();
    (
        2.0 * gamma - GAUSSIAN_SPAN * sd,
        2.0 * gamma + GAUSSIAN_SPAN * sd,
    )
}

/// Integrates `f` over `[a, b]` intersected with the support.
fn integrate_on<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, support: (f64, f64)) -> Result<f64> {
    let lo = a.max(support.0);
    let hi = b.min(support.1);
    if lo >= hi {
        return Ok(0.0);
    }
    integrate(f, lo, hi, QUAD_ABS_TOL)
}

/// Overall BER after `D` rounds, integrating the combining densities.
pub fn ber_exact(config: &ProtocolConfig, link: &LinkModel) -> Result<f64> {
    let d = config.retransmissions;
    if d == 0 {
        return Ok(ber_no_retx(link, f64::INFINITY));
    }
    let u = config.require_thresholds()?;
    ber_exact_thresholds(u, link)
}

pub(crate) fn ber_exact_thresholds(u: &[f64], link: &LinkModel) -> Result<f64> {
    let g = link.snr();
    let d = u.len();
    let mut ber = integrate_on(
        |r| fresh_density(r, g),
        f64::NEG_INFINITY,
        -u[d - 1],
        mrc_support(1, g),
    )?;
    for i in 1..d {
        let (hi, lo) = (u[d - i], u[d - i - 1]);
        let copies = i as u32 + 1;
        ber += integrate_on(
            |r| lambda_kernel(i as u32, r, hi, lo, link),
            f64::NEG_INFINITY,
            0.0,
            mrc_support(copies, g),
        )?;
    }
    ber += integrate_on(
        |r| chi_kernel(d as u32, r, u[0], link),
        f64::NEG_INFINITY,
        0.0,
        mrc_support(d as u32 + 1, g),
    )?;
    Ok(ber)
}

/// `θ∓(d, U)` of the closed forms; `sign = −1` gives θ₋.
fn theta(d: f64, b: f64, u_over_gamma: f64, sign: f64) -> f64 {
    b * (d + 1.0) * (2.0 + sign * u_over_gamma).powi(2) / (2.0 * d * (1.0 + 2.0 * b / d))
}

/// `α∓(d, U)`; `sign = −1` gives α₋.
fn alpha(d: f64, b: f64, u_over_gamma: f64, sign: f64) -> f64 {
    (1.0 + sign * b * u_over_gamma / d) / ((1.0 + 2.0 * b / d) / (2.0 * (d + 1.0))).sqrt()
}

/// Prony-integrated window correction for `d` copies at threshold `u`:
/// `Σ_k A_k/√(1+2B_k/d) {e^{−θ₋γ}Q(α₊√γ) + e^{−θ₊γ}Q(α₋√γ)}`.
fn window_correction(d: u32, u: f64, gamma: f64, coeffs: &PronyCoefficients) -> f64 {
    if u.is_infinite() {
        return 0.0;
    }
    let d = f64::from(d);
    let ratio = u / gamma;
    let sg = gamma.sqrt();
    coeffs
        .terms()
        .map(|(a, b)| {
            let scale = a / (1.0 + 2.0 * b / d).sqrt();
            let lower = (-theta(d, b, ratio, -1.0) * gamma).exp()
                * q_function(alpha(d, b, ratio, 1.0) * sg);
            let upper = (-theta(d, b, ratio, 1.0) * gamma).exp()
                * q_function(alpha(d, b, ratio, -1.0) * sg);
            scale * (lower + upper)
        })
        .sum()
}

/// Closed-form BER approximation built on the two-term Q-function fit.
pub fn ber_approx(config: &ProtocolConfig, link: &LinkModel) -> Result<f64> {
    if config.retransmissions == 0 {
        return Ok(ber_no_retx(link, f64::INFINITY));
    }
    let u = config.require_thresholds()?;
    Ok(ber_approx_thresholds(
        u,
        link.snr(),
        &PronyCoefficients::PUBLISHED,
    ))
}

pub(crate) fn ber_approx_thresholds(u: &[f64], gamma: f64, coeffs: &PronyCoefficients) -> f64 {
    let d = u.len();
    let mut ber = q_shifted(gamma, u[d - 1], 1.0)
        + q_function((2.0 * gamma * (d as f64 + 1.0)).sqrt())
        - window_correction(d as u32, u[0], gamma, coeffs);
    for i in 1..d {
        ber += window_correction(i as u32, u[d - i - 1], gamma, coeffs)
            - window_correction(i as u32, u[d - i], gamma, coeffs);
    }
    ber
}

/// How `prob_retx_band` evaluates its integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandMethod {
    #[default]
    Quadrature,
    /// Closed form; only available for the first band (`d = 1`).
    Approximate,
}

/// Probability `P_d` that a bit is still at or below `U_d` after `d` rounds,
/// with `U_i` taken from the config (the last threshold repeats when
/// `d ≥ D`). `P_0` is the plain band probability of a fresh sample.
pub fn prob_retx_band(
    d: usize,
    config: &ProtocolConfig,
    link: &LinkModel,
    method: BandMethod,
) -> Result<f64> {
    let u = config.require_thresholds()?;
    if u.is_empty() {
        return Err(Error::config(
            "band probabilities need at least one threshold",
        ));
    }
    let extended: Vec<f64> = (0..=d).map(|i| u[i.min(u.len() - 1)]).collect();
    band_probability(&extended, link, method)
}

/// `P_d` for an explicit threshold list `U₀..U_d` (`d = len − 1`).
pub fn band_probability(u: &[f64], link: &LinkModel, method: BandMethod) -> Result<f64> {
    let g = link.snr();
    let d = match u.len() {
        0 => return Err(Error::config("band probability needs thresholds")),
        n => n - 1,
    };
    if u.windows(2).any(|p| p[1] < p[0]) || u[0] < 0.0 {
        return Err(Error::config(
            "thresholds must be nonnegative and nondecreasing",
        ));
    }
    let fresh = |x: f64| prob_in_band(link, &ReliabilityBand::up_to(x));
    if d == 0 {
        return Ok(fresh(u[0]));
    }
    match method {
        BandMethod::Approximate if d == 1 => {
            Ok(band_probability_approx(u[0], u[1], g).clamp(0.0, 1.0))
        }
        BandMethod::Approximate => Err(Error::config(format!(
            "closed-form band probability is only available for d = 1, got d = {d}"
        ))),
        BandMethod::Quadrature => {
            let top = u[d];
            let mut p = fresh(top) - fresh(u[d - 1]);
            for i in 1..d {
                let (hi, lo) = (u[d - i], u[d - i - 1]);
                p += integrate_on(
                    |r| lambda_kernel(i as u32, r, hi, lo, link),
                    -top,
                    top,
                    mrc_support(i as u32 + 1, g),
                )?;
            }
            p += integrate_on(
                |r| chi_kernel(d as u32, r, u[0], link),
                -top,
                top,
                mrc_support(d as u32 + 1, g),
            )?;
            Ok(p.clamp(0.0, 1.0))
        }
    }
}

/// Closed form of `P_1`. The two-copy density is integrated against the
/// Prony fit piecewise: on each side of the point where a window Q-argument
/// changes sign the fit is applied to `|x|` (with `Q(−x) = 1 − Q(x)`), since
/// it is poor for negative arguments.
fn band_probability_approx(u0: f64, u1: f64, gamma: f64) -> f64 {
    let fresh_band = prob_in_band_snr(gamma, u1) - prob_in_band_snr(gamma, u0);
    if u1.is_infinite() {
        // the window term integrates to P_0(U₀) over the whole line
        return fresh_band + prob_in_band_snr(gamma, u0);
    }
    let sd = gamma.sqrt();
    let mass =
        |a: f64, b: f64| q_function((a - 2.0 * gamma) / sd) - q_function((b - 2.0 * gamma) / sd);
    let in_range = mass(-u1, u1);
    if u0.is_infinite() {
        return fresh_band + in_range;
    }
    // density h1·exp(−(r−h2)²/h3), window Q(h4(U₀ ∓ r)), h4 = 1/σ_c
    let g = GaussianWindow {
        h1: 1.0 / (2.0 * PI * gamma).sqrt(),
        h2: 2.0 * gamma,
        h3: 2.0 * gamma,
        h4: 1.0 / sd,
    };
    let minus = g.prony(u0, -u1, u0) + mass(u0, u1) - g.prony(u0, u0, u1);
    let plus = mass(-u1, -u0) - g.prony(-u0, -u1, -u0) + g.prony(-u0, -u0, u1);
    fresh_band + in_range - minus - plus
}

struct GaussianWindow {
    h1: f64,
    h2: f64,
    h3: f64,
    h4: f64,
}

impl GaussianWindow {
    /// `∫_a^b h1·e^{−(r−h2)²/h3} Σ A_k e^{−B_k h4²(r−c)²} dr`.
    fn prony(&self, c: f64, a: f64, b: f64) -> f64 {
        let Self { h1, h2, h3, h4 } = *self;
        PronyCoefficients::PUBLISHED
            .terms()
            .map(|(ak, bk)| {
                let w = bk * h4 * h4;
                let precision = 1.0 / h3 + w;
                let centre = (h2 / h3 + w * c) / precision;
                let k = (-(h2 - c).powi(2) * w / (1.0 + h3 * w)).exp();
                let root = precision.sqrt();
                h1 * ak * k * (PI / precision).sqrt() / 2.0
                    * (erf(root * (b - centre)) - erf(root * (a - centre)))
            })
            .sum()
    }
}

fn prob_in_band_snr(gamma: f64, u: f64) -> f64 {
    1.0 - q_shifted(gamma, u, 1.0) - q_shifted(gamma, u, -1.0)
}

/// Which of the four Gaussian×Q integrals to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussQKind {
    /// `∫_{−∞}^0 h₁e^{−(r−h₂)²/h₃} Q(h₄(h₅−r)) dr`
    SemiInfiniteMinus,
    /// `∫_{−∞}^0 h₁e^{−(r−h₂)²/h₃} Q(h₄(h₅+r)) dr`
    SemiInfinitePlus,
    /// `∫_{−H}^{H} h₁e^{−(r−h₂)²/h₃} Q(h₄(h₅−r)) dr`
    FiniteMinus,
    /// `∫_{−H}^{H} h₁e^{−(r−h₂)²/h₃} Q(h₄(h₅+r)) dr`
    FinitePlus,
}

impl GaussQKind {
    pub const ALL: [GaussQKind; 4] = [
        GaussQKind::SemiInfiniteMinus,
        GaussQKind::SemiInfinitePlus,
        GaussQKind::FiniteMinus,
        GaussQKind::FinitePlus,
    ];

    pub fn is_finite(self) -> bool {
        matches!(self, GaussQKind::FiniteMinus | GaussQKind::FinitePlus)
    }

    /// `−1` when the Q argument is `h₅ − r`.
    pub fn sign(self) -> f64 {
        match self {
            GaussQKind::SemiInfiniteMinus | GaussQKind::FiniteMinus => -1.0,
            _ => 1.0,
        }
    }
}

/// Closed-form Prony evaluation of a Gaussian×Q integral. `bound` is the
/// half-width `H` for the finite kinds and ignored otherwise.
pub fn gauss_q_integral(
    kind: GaussQKind,
    h: [f64; 5],
    bound: f64,
    coeffs: &PronyCoefficients,
) -> f64 {
    let [h1, h2, h3, h4, h5] = h;
    let sqrt_pi = PI.sqrt();
    coeffs
        .terms()
        .map(|(a, b)| {
            let s = 1.0 + h3 * h4 * h4 * b;
            let root = (h3 * s).sqrt();
            match kind {
                GaussQKind::SemiInfiniteMinus => {
                    h1 * a / (2.0 * (1.0 / h3 + h4 * h4 * b).sqrt())
                        * (-b * h4 * h4 * (h2 - h5).powi(2) / s).exp()
                        * sqrt_pi
                        * libm::erfc((h2 + h3 * h4 * h4 * h5 * b) / root)
                }
                GaussQKind::SemiInfinitePlus => {
                    h1 * h3 * a / (2.0 * root)
                        * (-b * h4 * h4 * (h2 + h5).powi(2) / s).exp()
                        * sqrt_pi
                        * libm::erfc((h2 - h3 * h4 * h4 * h5 * b) / root)
                }
                GaussQKind::FiniteMinus => {
                    let big_h = bound;
                    let centre = (h2 + h3 * h4 * h4 * h5 * b) / s;
                    let offset = big_h - centre;
                    h1 * a * h3.sqrt() * sqrt_pi / (2.0 * s.sqrt())
                        * (-b * h4 * h4 * (h2 - h5).powi(2) / s).exp()
                        * (erf((h2 + big_h + h3 * h4 * h4 * (h5 + big_h) * b) / root)
                            + offset.signum() * erf((1.0 / h3 + h4 * h4 * b).sqrt() * offset.abs()))
                }
                GaussQKind::FinitePlus => {
                    let big_h = bound;
                    h1 * h3 * a * sqrt_pi / (2.0 * root)
                        * (-b * h4 * h4 * (h2 + h5).powi(2) / s).exp()
                        * (erf((big_h + h2 + h3 * h4 * h4 * (big_h - h5) * b) / root)
                            + erf((big_h - h2 + h3 * h4 * h4 * (big_h + h5) * b) / root))
                }
            }
        })
        .sum()
}

/// The same integral with the exact Q-function, by adaptive quadrature.
pub fn gauss_q_integral_quadrature(kind: GaussQKind, h: [f64; 5], bound: f64) -> Result<f64> {
    let [h1, h2, h3, h4, h5] = h;
    if kind.is_finite() && (bound.is_nan() || bound <= 0.0) {
        return Err(Error::config(
            "finite Gaussian×Q integrals need a positive bound",
        ));
    }
    let sign = kind.sign();
    let f = |r: f64| h1 * (-(r - h2).powi(2) / h3).exp() * q_function(h4 * (h5 + sign * r));
    let sd = (h3 / 2.0).sqrt();
    let support = (h2 - GAUSSIAN_SPAN * sd, h2 + GAUSSIAN_SPAN * sd);
    let (a, b) = if kind.is_finite() {
        (-bound, bound)
    } else {
        (f64::NEG_INFINITY, 0.0)
    };
    // tighter than the default so tiny tails keep relative accuracy
    let lo = a.max(support.0);
    let hi = b.min(support.1);
    if lo >= hi {
        return Ok(0.0);
    }
    integrate(f, lo, hi, 1e-14)
}

/// Laplace-domain average `E[e^{−θγ} Q(α√γ)]` over an exponential SNR with
/// mean `mean`, times two: `(1 + γ̄(θ + β(β + √(1/γ̄ + θ + β²))))^{−1}`,
/// `β = α/√2`.
fn faded_term(theta: f64, alpha: f64, mean: f64) -> f64 {
    let beta = alpha / SQRT_2;
    1.0 / (1.0 + mean * (theta + beta * (beta + (1.0 / mean + theta + beta * beta).sqrt())))
}

fn faded_correction(d: u32, ratio: f64, mean: f64, coeffs: &PronyCoefficients) -> f64 {
    if ratio.is_infinite() {
        return 0.0;
    }
    let d = f64::from(d);
    coeffs
        .terms()
        .map(|(a, b)| {
            a / (1.0 + 2.0 * b / d).sqrt()
                * (faded_term(theta(d, b, ratio, -1.0), alpha(d, b, ratio, 1.0), mean)
                    + faded_term(theta(d, b, ratio, 1.0), alpha(d, b, ratio, -1.0), mean))
        })
        .sum()
}

fn fading_inputs(config: &ProtocolConfig, link: &LinkModel) -> Result<(f64, Vec<f64>)> {
    let mean = match link.fading() {
        Fading::SlowChiSquare { mean_snr } => mean_snr,
        Fading::None => return Err(Error::config("fading average needs a slow chi-square link")),
    };
    if config.retransmissions == 0 {
        return Err(Error::config(
            "fading average needs at least one retransmission",
        ));
    }
    let u = config.require_thresholds()?;
    Ok((mean, u.iter().map(|x| x / mean).collect()))
}

/// Long-term BER over slow chi-square fading.
///
/// Thresholds in `config` are taken at the mean SNR and scale with the
/// instantaneous SNR (`U/γ` is held fixed), which keeps the approximation
/// integrable in closed form.
pub fn ber_fading(config: &ProtocolConfig, link: &LinkModel) -> Result<f64> {
    let (mean, ratio) = fading_inputs(config, link)?;
    Ok(fading_closed_form(&ratio, mean, false))
}

/// The fading display transcribed term by term, kept for comparison: it
/// drops the factor ½ of each averaged Prony term and flips the sign of the
/// `D`-copy group, so it disagrees with [`ber_fading_numeric`].
pub fn ber_fading_as_printed(config: &ProtocolConfig, link: &LinkModel) -> Result<f64> {
    let (mean, ratio) = fading_inputs(config, link)?;
    Ok(fading_closed_form(&ratio, mean, true))
}

fn fading_closed_form(ratio: &[f64], mean: f64, as_printed: bool) -> f64 {
    let coeffs = PronyCoefficients::PUBLISHED;
    let d = ratio.len();
    let top = ratio[d - 1];
    let tail = if top.is_infinite() {
        1.0
    } else {
        (4.0 / (mean * (top + 2.0).powi(2)) + 1.0).powf(-0.5)
    };
    let mut ber = 1.0 - 0.5 * tail - 0.5 * (1.0 + 1.0 / (mean * (d as f64 + 1.0))).powf(-0.5);
    let (scale, lead) = if as_printed { (1.0, 1.0) } else { (0.5, -1.0) };
    ber += lead * scale * faded_correction(d as u32, ratio[0], mean, &coeffs);
    for i in 1..d {
        ber += scale
            * (faded_correction(i as u32, ratio[d - i - 1], mean, &coeffs)
                - faded_correction(i as u32, ratio[d - i], mean, &coeffs));
    }
    ber
}

/// Numerical average of [`ber_approx`] against the exponential SNR density,
/// integrated over `(0, 50γ̄)`.
pub fn ber_fading_numeric(config: &ProtocolConfig, link: &LinkModel) -> Result<f64> {
    let (mean, ratio) = fading_inputs(config, link)?;
    let coeffs = PronyCoefficients::PUBLISHED;
    let f = |g: f64| {
        let u: Vec<f64> = ratio.iter().map(|r| r * g).collect();
        ber_approx_thresholds(&u, g, &coeffs) * (-g / mean).exp() / mean
    };
    integrate(f, 0.0, 50.0 * mean, 1e-12)
}

/// Closed form, transcription and numerical oracle side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDiagnostic {
    pub closed_form: f64,
    pub as_printed: f64,
    pub numeric: f64,
}

impl FadingDiagnostic {
    pub const TOLERANCE: f64 = 0.05;

    pub fn closed_form_error(&self) -> f64 {
        (self.closed_form - self.numeric).abs() / self.numeric
    }

    pub fn as_printed_error(&self) -> f64 {
        (self.as_printed - self.numeric).abs() / self.numeric
    }

    /// Discrepancy messages for every evaluation off by more than 5%.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.closed_form_error() > Self::TOLERANCE {
            out.push(format!(
                "fading closed form {:.6e} deviates {:.1}% from numeric average {:.6e}",
                self.closed_form,
                100.0 * self.closed_form_error(),
                self.numeric
            ));
        }
        if self.as_printed_error() > Self::TOLERANCE {
            out.push(format!(
                "transcribed fading display {:.6e} deviates {:.1}% from numeric average {:.6e}",
                self.as_printed,
                100.0 * self.as_printed_error(),
                self.numeric
            ));
        }
        out
    }
}

pub fn fading_diagnostic(config: &ProtocolConfig, link: &LinkModel) -> Result<FadingDiagnostic> {
    Ok(FadingDiagnostic {
        closed_form: ber_fading(config, link)?,
        as_printed: ber_fading_as_printed(config, link)?,
        numeric: ber_fading_numeric(config, link)?,
    })
}
