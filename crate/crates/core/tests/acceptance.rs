//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line.

use std::time::Instant;

use bitarq::analytic::{
    ber_approx, ber_exact, ber_fading, ber_fading_numeric, gauss_q_integral,
    gauss_q_integral_quadrature, q_function, GaussQKind, PronyCoefficients,
};
use bitarq::feedback::{
    binomial, combinadic_decode, combinadic_encode, delay_stats, feedback_error_tolerance,
    optimal_c1, sample_search_indices, DEFAULT_P_MIN,
};
use bitarq::fusion::{
    catalog_designs, feasible, max_sensor_nodes, max_sensor_nodes_rounded, required_snr,
    schedule_uplink, segment_feasibility, Technology, TechnologyName,
};
use bitarq::mc::{compare_schemes, simulate, Scheme};
use bitarq::optimize::{
    optimize_rate, optimize_threshold, optimize_window, window_design, window_for_target_ber,
    SweepResult,
};
use bitarq::{db_to_linear, integrate, LinkModel, ProtocolConfig, Result, Strategy};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

const SEED: u64 = 20_240_601;
const MC_BITS: u64 = 10_000_000;

/// Rounded up to whole packets of `n` bits.
fn packets(bits: u64, n: usize) -> u64 {
    bits.div_ceil(n as u64) * n as u64
}

fn z_score(observed: f64, expected: f64, bits: u64) -> f64 {
    let sigma = (expected * (1.0 - expected) / bits as f64).sqrt();
    (observed - expected) / sigma
}

fn uncoded_baseline() -> Result<Outcome> {
    let start = Instant::now();
    let link = LinkModel::awgn(1.0)?;
    let config = ProtocolConfig::new(1000, 0, Strategy::FixedRate { target_rate: 1.0 });
    let report = simulate(&config, &link, Scheme::Quantized, MC_BITS, SEED)?;
    let expected = q_function(2f64.sqrt());
    let z = z_score(report.ber(), expected, report.bits_simulated);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        z.abs() < 3.0 && secs < 30.0,
        format!(
            "ber {:.6} vs Q(sqrt 2) {expected:.6}, z = {z:+.2}, {secs:.1} s for 1e7 bits",
            report.ber()
        ),
    )
}

fn block_repetition_baseline() -> Result<Outcome> {
    let link = LinkModel::awgn(1.0)?;
    let config = ProtocolConfig::new(1000, 1, Strategy::FixedRate { target_rate: 0.5 });
    let report = simulate(&config, &link, Scheme::BlockRepetition, MC_BITS, SEED + 1)?;
    let expected = q_function(2.0);
    let z = z_score(report.ber(), expected, report.bits_simulated);
    outcome(
        z.abs() < 3.0,
        format!("ber {:.6} vs Q(2) {expected:.6}, z = {z:+.2}", report.ber()),
    )
}

fn analytic_matches_simulation() -> Result<Outcome> {
    let n = 1000;
    let mut worst_z: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut checked = 0;
    for d in [1usize, 2] {
        for snr_db in [0.0, 5.0] {
            let awgn = LinkModel::awgn(db_to_linear(snr_db))?;
            for p in [0.05, 0.2, 0.4, 0.6, 0.8] {
                let design = window_design(n, d, p, &awgn)?;
                let link = LinkModel::awgn(design.snr_eff)?;
                let config =
                    ProtocolConfig::new(n, d, Strategy::FixedWindow { window_fraction: p })
                        .with_thresholds(design.thresholds.clone());
                let exact = ber_exact(&config, &link)?;
                let approx = ber_approx(&config, &link)?;
                let seed = SEED + 100 * d as u64 + (10.0 * p) as u64 + snr_db as u64;
                let report = simulate(&config, &link, Scheme::Quantized, MC_BITS, seed)?;
                let z = z_score(report.ber(), exact, report.bits_simulated);
                worst_z = worst_z.max(z.abs());
                if exact >= 1e-6 {
                    worst_gap = worst_gap.max((approx - exact).abs() / exact);
                    checked += 1;
                }
            }
        }
    }
    outcome(
        worst_z < 3.0 && worst_gap < 0.15,
        format!("20 designs: worst |z| = {worst_z:.2}; approximation gap worst {:.1}% over {checked} points", 100.0 * worst_gap),
    )
}

/// SNR offset in dB at which the quantized-scheme BER equals `target`.
fn equivalent_shift(config: &ProtocolConfig, snr: f64, target: f64) -> Result<f64> {
    let at = |shift: f64| -> Result<f64> {
        ber_exact(config, &LinkModel::awgn(snr * db_to_linear(shift))?)
    };
    let (mut lo, mut hi) = (-3.0, 3.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn scheme_gap() -> Result<Outcome> {
    let n = 1024;
    let mut details = Vec::new();
    let mut pass = true;
    for snr_db in [2.5, 5.0] {
        let best = optimize_threshold(n, 2, &LinkModel::awgn(db_to_linear(snr_db))?)?;
        let config = ProtocolConfig::new(
            n,
            2,
            Strategy::FixedThreshold {
                threshold: best.minimizer,
            },
        )
        .with_thresholds(best.design.thresholds.clone());
        let bits = packets(4_000_000, n);
        let (adaptive, quantized) = compare_schemes(
            &config,
            &LinkModel::awgn(best.design.snr_eff)?,
            bits,
            SEED + 4,
        )?;
        let shift = equivalent_shift(&config, best.design.snr_eff, adaptive)?;
        pass &= shift.abs() < 1.0;
        details.push(format!(
            "{snr_db} dB: adaptive {adaptive:.3e}, quantized {quantized:.3e}, shift {shift:+.2} dB"
        ));
    }
    outcome(pass, details.join("; "))
}

fn strictly_monotone(values: &[f64], increasing: bool) -> bool {
    values
        .windows(2)
        .all(|p| if increasing { p[1] > p[0] } else { p[1] < p[0] })
}

fn optimizer_trends() -> Result<Outcome> {
    let n = 1024;
    let snrs = [0.0, 2.5, 5.0, 7.5];
    let mut pass = true;
    let mut details = Vec::new();
    for d in [1usize, 2, 3] {
        let mut rate = Vec::new();
        let mut window = Vec::new();
        let mut threshold = Vec::new();
        let mut unimodal = true;
        for snr_db in snrs {
            let link = LinkModel::awgn(db_to_linear(snr_db))?;
            let sweeps: [SweepResult; 3] = [
                optimize_rate(n, d, &link)?,
                optimize_window(n, d, &link)?,
                optimize_threshold(n, d, &link)?,
            ];
            unimodal &= sweeps.iter().all(|s| s.unimodal && !s.boundary);
            rate.push(sweeps[0].minimizer);
            window.push(sweeps[1].minimizer);
            threshold.push(sweeps[2].minimizer);
        }
        let ok = unimodal
            && strictly_monotone(&rate, true)
            && strictly_monotone(&window, false)
            && strictly_monotone(&threshold, true);
        pass &= ok;
        details.push(format!(
            "D={d}: R* {:.3}..{:.3}, W/N* {:.3}..{:.3}, U* {:.2}..{:.2}{}",
            rate[0],
            rate[3],
            window[0],
            window[3],
            threshold[0],
            threshold[3],
            if unimodal { "" } else { " (multimodal sweep)" }
        ));
    }
    outcome(pass, details.join("; "))
}

fn beats_block_repetition() -> Result<Outcome> {
    let mut pass = true;
    let mut margins = Vec::new();
    for d in [1usize, 2] {
        for snr_db in [2.5, 5.0, 7.5] {
            let link = LinkModel::awgn(db_to_linear(snr_db))?;
            let bitwise = optimize_window(1024, d, &link)?.exact_min_ber;
            let brc = q_function((2.0 * link.snr()).sqrt());
            pass &= bitwise < brc;
            margins.push(brc / bitwise);
        }
    }
    let least = margins.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        pass,
        format!("6 cases; smallest BRC/bitwise BER ratio {least:.2}"),
    )
}

fn fading_average() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for d in [1usize, 2] {
        for mean in [1.0, 10.0] {
            let design = window_design(1024, d, 0.1, &LinkModel::awgn(mean)?)?;
            let config = ProtocolConfig::new(
                1024,
                d,
                Strategy::FixedWindow {
                    window_fraction: 0.1,
                },
            )
            .with_thresholds(design.thresholds);
            let link = LinkModel::slow_fading(mean)?;
            let closed = ber_fading(&config, &link)?;
            let numeric = ber_fading_numeric(&config, &link)?;
            worst = worst.max((closed - numeric).abs() / numeric);
        }
    }
    outcome(
        worst < 0.05,
        format!("4 cases; worst closed-form vs numeric gap {:.2e}", worst),
    )
}

/// Lower and upper ends of the Q arguments the two-term fit tracks to 5%.
const FIT_WINDOW: (f64, f64) = (0.6, 5.7);

fn exact_integrand(kind: GaussQKind, h: [f64; 5]) -> impl Fn(f64) -> f64 {
    let [h1, h2, h3, h4, h5] = h;
    let sign = kind.sign();
    move |r: f64| h1 * (-(r - h2).powi(2) / h3).exp() * q_function(h4 * (h5 + sign * r))
}

/// Share of the exact integrand lying where the Q argument leaves the fit window.
fn mass_outside_fit(kind: GaussQKind, h: [f64; 5], bound: f64, total: f64) -> Result<f64> {
    let [_, h2, h3, h4, h5] = h;
    let sign = kind.sign();
    let sd = (h3 / 2.0).sqrt();
    let (lo, hi) = if kind.is_finite() {
        (-bound, bound)
    } else {
        (h2 - 12.0 * sd, 0.0)
    };
    let ends = [
        sign * (FIT_WINDOW.0 / h4 - h5),
        sign * (FIT_WINDOW.1 / h4 - h5),
    ];
    let (a, b) = (
        ends[0].min(ends[1]).clamp(lo, hi),
        ends[0].max(ends[1]).clamp(lo, hi),
    );
    let inside = if a < b {
        integrate(exact_integrand(kind, h), a, b, 1e-14)?
    } else {
        0.0
    };
    Ok(((total - inside) / total).max(0.0))
}

fn gauss_q_integrals() -> Result<Outcome> {
    let coeffs = PronyCoefficients::PUBLISHED;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(SEED + 8);
    let mut accepted = 0;
    let mut drawn = 0;
    let mut worst: f64 = 0.0;
    let mut worst_unrestricted: f64 = 0.0;
    while accepted < 50 {
        drawn += 1;
        let product = 10f64.powf(rng.random_range(-1.0..1.0));
        let h3 = 10f64.powf(rng.random_range(-0.5..0.5));
        let h4 = (product / h3).sqrt();
        let sd = (h3 / 2.0).sqrt();
        let h = [
            rng.random_range(0.2..2.0),
            sd * rng.random_range(-2.0..3.0),
            h3,
            h4,
            rng.random_range(0.0..4.0) / h4,
        ];
        let bound = sd * rng.random_range(0.5..4.0);
        let mut errors = Vec::new();
        let mut inside = true;
        for kind in GaussQKind::ALL {
            let quad = gauss_q_integral_quadrature(kind, h, bound)?;
            if quad < 1e-300 {
                inside = false;
                continue;
            }
            inside &= mass_outside_fit(kind, h, bound, quad)? < 1e-3;
            errors.push((gauss_q_integral(kind, h, bound, &coeffs) - quad).abs() / quad);
        }
        let err = errors.iter().copied().fold(0.0, f64::max);
        worst_unrestricted = worst_unrestricted.max(err);
        if inside {
            worst = worst.max(err);
            accepted += 1;
        }
    }
    outcome(
        worst < 0.05,
        format!(
            "50 of {drawn} draws with h3*h4^2 in [0.1, 10] keep the Q argument in [{}, {}]; worst error {:.2}% \
             (all draws: {:.0}%)",
            FIT_WINDOW.0,
            FIT_WINDOW.1,
            100.0 * worst,
            100.0 * worst_unrestricted
        ),
    )
}

fn feedback_codec() -> Result<Outcome> {
    let mut round_trips = 0;
    let mut exhaustive = true;
    for n in 1..=12usize {
        for mask in 1u32..(1 << n) {
            let positions: Vec<usize> = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| i + 1)
                .collect();
            let msg = combinadic_encode(&positions, n)?;
            exhaustive &= combinadic_decode(&msg, n, positions.len())? == positions;
            round_trips += 1;
        }
    }
    let indices = sample_search_indices(16, 3, 10_000, SEED + 9)?;
    let mean_k = delay_stats(&indices, 1).mean_k;
    let expected = binomial(16, 3).to_f64().unwrap_or(f64::NAN);
    let k_gap = (mean_k - expected).abs() / expected;
    let c1_tol = feedback_error_tolerance(1, DEFAULT_P_MIN)?;
    let c36_tol = feedback_error_tolerance(36, DEFAULT_P_MIN)?;
    let pass = exhaustive
        && k_gap < 0.05
        && (c1_tol - 1e-3).abs() < 1e-15
        && (c36_tol - 2.78e-5).abs() < 1e-7;

    // throughput peaks at the optimal residual width
    let peak_indices = sample_search_indices(64, 2, 10_000, SEED + 10)?;
    let best = optimal_c1(64, 2);
    let delay = |c1| delay_stats(&peak_indices, c1).mean_delay;
    let peaks = delay(best) < delay(best - 2) && delay(best) < delay(best + 2);

    // windows for a fixed target BER shrink as the SNR grows, and with them E[K]
    let windows: Vec<usize> = [6.0, 8.0, 10.0, 12.0]
        .iter()
        .map(|&snr_db| window_for_target_ber(64, 1, &LinkModel::awgn(db_to_linear(snr_db))?, 1e-4))
        .collect::<Result<_>>()?;
    let mean_index: Vec<f64> = windows
        .iter()
        .map(|&w| binomial(64, w).to_f64().unwrap_or(f64::INFINITY))
        .collect();
    let shrinking = mean_index.windows(2).all(|p| p[1] <= p[0]);

    outcome(
        pass && peaks && shrinking,
        format!(
            "{round_trips} subsets round-trip; E[K] {mean_k:.1} vs 560 ({:.1}%); tolerance C=1 {c1_tol:.3e}, C=36 {c36_tol:.4e}; \
             delay minimal at C1*={best}: {peaks}; windows for BER 1e-4 {windows:?} at 6..12 dB",
            100.0 * k_gap
        ),
    )
}

fn technology_fits() -> Result<Outcome> {
    let expected = [
        (TechnologyName::Zigbee, [-2.79, -1.16, 0.03, 0.96, 1.73]),
        (TechnologyName::Wifi, [3.88, 5.43, 6.63, 7.59, 8.37]),
        (
            TechnologyName::Bluetooth,
            [8.91, 10.93, 12.30, 13.34, 14.18],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (name, row) in expected {
        let tech = Technology::new(name);
        for (target, db) in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6].into_iter().zip(row) {
            worst = worst.max((required_snr(&tech, target)? - db).abs());
        }
    }
    outcome(
        worst <= 0.05,
        format!("15 entries; worst deviation {worst:.3} dB"),
    )
}

/// `(c_tot, Pp_f, Pp_r)` for each catalog entry, as tabulated.
const DESIGN_TABLE: [(u32, f64, &str); 32] = [
    (50, 0.9978, "5.0e-4"),
    (36, 0.9953, "3.6e-4"),
    (44, 0.9992, "4.4e-4"),
    (36, 0.9997, "3.6e-4"),
    (20, 0.9986, "2.0e-4"),
    (36, 1.0000, "3.6e-4"),
    (50, 1.0000, "5.0e-4"),
    (11, 0.9947, "1.1e-4"),
    (20, 0.9998, "2.0e-4"),
    (28, 1.0000, "2.8e-4"),
    (36, 1.0000, "3.6e-4"),
    (220, 0.9928, "2.2e-4"),
    (92, 0.9962, "9.2e-5"),
    (69, 0.9917, "6.9e-5"),
    (72, 0.9965, "7.2e-5"),
    (92, 0.9996, "9.2e-5"),
    (50, 0.9917, "5.0e-5"),
    (61, 0.9984, "6.1e-5"),
    (72, 0.9997, "7.2e-5"),
    (83, 1.0000, "8.3e-5"),
    (94, 1.0000, "9.4e-5"),
    (256, 0.9913, "2.6e-4"),
    (72, 0.9960, "7.2e-5"),
    (57, 0.9949, "5.7e-5"),
    (65, 0.9987, "6.5e-5"),
    (73, 0.9997, "7.3e-5"),
    (36, 0.9987, "3.6e-4"),
    (20, 0.9951, "2.0e-4"),
    (38, 0.9998, "3.8e-4"),
    (21, 0.9988, "2.1e-4"),
    (31, 0.9999, "3.1e-4"),
    (40, 1.0000, "4.0e-4"),
];

fn segmented_designs() -> Result<Outcome> {
    let designs = catalog_designs();
    let mut mismatches = Vec::new();
    let mut worst_pf: f64 = 0.0;
    for (i, (design, &(c_tot, pf_table, pr_table))) in
        designs.iter().zip(DESIGN_TABLE.iter()).enumerate()
    {
        let (pf, pr) = segment_feasibility(design);
        worst_pf = worst_pf.max((pf - pf_table).abs());
        if design.c_tot != c_tot || (pf - pf_table).abs() > 1e-4 || format!("{pr:.1e}") != pr_table
        {
            mismatches.push(i + 1);
        }
    }
    let infeasible: Vec<String> = designs
        .iter()
        .filter(|d| !feasible(d).feasible)
        .map(|d| format!("{} p_f={:e}", d.tech.name, d.p_f))
        .collect();
    outcome(
        designs.len() == 32 && mismatches.is_empty(),
        format!(
            "32 rows, mismatched rows {mismatches:?}; worst Pp_f deviation {worst_pf:.1e}; rows failing the BER limits: {infeasible:?}"
        ),
    )
}

const UPLINK_SCHEDULE: &str = include_str!("data/uplink_schedule.txt");

fn uplink_schedule() -> Result<Outcome> {
    let plan = schedule_uplink(1064, 4, 3, 10, 1064)?;
    let text = plan.to_string();
    outcome(
        text == UPLINK_SCHEDULE,
        format!(
            "{} packets, byte-identical: {}",
            plan.packets.len(),
            text == UPLINK_SCHEDULE
        ),
    )
}

fn node_bound() -> Result<Outcome> {
    let floor = max_sensor_nodes(1064, 106, 3, 36)?;
    let rounded = max_sensor_nodes_rounded(1064, 106, 3, 36)?;
    outcome(
        floor == 8,
        format!("floor bound {floor} (nearest-integer form gives {rounded})"),
    )
}

fn determinism() -> Result<Outcome> {
    let n = 512;
    let link = LinkModel::awgn(db_to_linear(2.0))?;
    let design = window_design(n, 2, 0.2, &link)?;
    let config = ProtocolConfig::new(
        n,
        2,
        Strategy::FixedWindow {
            window_fraction: 0.2,
        },
    )
    .with_thresholds(design.thresholds)
    .with_windows(design.windows);
    let eff = LinkModel::awgn(design.snr_eff)?;
    let faded = LinkModel::slow_fading(design.snr_eff)?;
    let bits = packets(2_000_000, n);
    let mut identical = true;
    let mut counts = Vec::new();
    for (scheme, link) in [
        (Scheme::Adaptive, &eff),
        (Scheme::Quantized, &eff),
        (Scheme::BlockRepetition, &eff),
        (Scheme::Quantized, &faded),
    ] {
        let first = simulate(&config, link, scheme, bits, SEED + 14)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .expect("thread pool");
        let second = pool.install(|| simulate(&config, link, scheme, bits, SEED + 14))?;
        identical &= first == second;
        counts.push(first.bit_errors);
    }
    outcome(
        identical,
        format!("4 runs repeated on 1 and 3 threads; error counts {counts:?}"),
    )
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 14] = [
        (1, "uncoded baseline", uncoded_baseline),
        (2, "block repetition baseline", block_repetition_baseline),
        (3, "analytic BER vs simulation", analytic_matches_simulation),
        (4, "adaptive vs quantized scheme gap", scheme_gap),
        (5, "optimizer trends", optimizer_trends),
        (6, "outperforms block repetition", beats_block_repetition),
        (7, "fading average", fading_average),
        (8, "Gaussian x Q closed forms", gauss_q_integrals),
        (9, "feedback encoding", feedback_codec),
        (10, "technology BER fits", technology_fits),
        (11, "segmented designs", segmented_designs),
        (12, "uplink schedule", uplink_schedule),
        (13, "sensor node bound", node_bound),
        (14, "determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        let start = Instant::now();
        let result = check().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {status} {name}: {} [{:.1} s]",
            result.detail,
            start.elapsed().as_secs_f64()
        );
        if !result.pass {
            failed.push(id);
        }
    }
    println!("{} of 14 criteria passed", 14 - failed.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
