use std::fmt::Write as _;

use bitarq::analytic::{ber_exact, ber_fading, q_function};
use bitarq::feedback::{
    binomial, bit_width, delay_stats, log2_big, optimal_c1, sample_search_indices,
    throughput_one_retx,
};
use bitarq::fusion::{
    catalog_designs, feasible, required_snr, schedule_uplink, segment_feasibility,
    segment_feasibility_joint, SegmentedDesign, Technology, TechnologyName,
};
use bitarq::mc::{simulate_with, Ordering, Scheme, Selection, SimOptions};
use bitarq::optimize::{
    default_threshold_limit, optimize_rate_with, optimize_threshold_with, optimize_window_with,
    threshold_design, window_design, Design, SweepResult,
};
use bitarq::{
    db_to_linear, linear_to_db, rate_interval, Error, LinkModel, ProtocolConfig, Strategy,
};

use crate::args::*;

/// Output of one command: extra `#` header lines and the table body.
pub struct Report {
    pub config: Vec<(&'static str, String)>,
    pub notes: Vec<String>,
    pub body: String,
}

impl Report {
    fn new(config: Vec<(&'static str, String)>) -> Self {
        Self {
            config,
            notes: Vec::new(),
            body: String::new(),
        }
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.body.push_str(text.as_ref());
        self.body.push('\n');
    }
}

/// Keeps search-based feedback runs bounded.
const MAX_MEAN_INDEX: f64 = (1u64 << 22) as f64;

pub fn run(command: &Command, seed: u64) -> bitarq::Result<Report> {
    match command {
        Command::SweepRate(a) => sweep(a, SweepKind::Rate, None, seed),
        Command::SweepWindow(a) => sweep(a, SweepKind::Window, None, seed),
        Command::SweepThreshold(a) => sweep(&a.sweep, SweepKind::Threshold, a.u_max, seed),
        Command::Optimize(a) => optimize(a),
        Command::Simulate(a) => simulate(a, seed),
        Command::FeedbackSim(a) => feedback(a, seed),
        Command::FusionPlan(a) => fusion_plan(a),
        Command::FusionFeasibility(a) => fusion_feasibility(a),
        Command::FitCheck(a) => fit_check(a),
    }
}

#[derive(Clone, Copy)]
enum SweepKind {
    Rate,
    Window,
    Threshold,
}

fn fmt_list<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

fn whole_packets(bits: u64, n: usize) -> u64 {
    bits.div_ceil(n as u64) * n as u64
}

fn sweep(a: &SweepArgs, kind: SweepKind, u_max: Option<f64>, seed: u64) -> bitarq::Result<Report> {
    let (n, d) = (a.n as usize, a.d as usize);
    let link = LinkModel::awgn(db_to_linear(a.snr_db))?;
    let points = a.points as usize;
    let mut config = vec![
        ("snr_db", a.snr_db.to_string()),
        ("n", n.to_string()),
        ("d", d.to_string()),
        ("points", points.to_string()),
        (
            "mc_bits",
            if a.mc_bits == 0 {
                "0".into()
            } else {
                whole_packets(a.mc_bits, n).to_string()
            },
        ),
    ];
    let (result, column): (SweepResult, &str) = match kind {
        SweepKind::Rate => (optimize_rate_with(n, d, &link, points)?, "rf"),
        SweepKind::Window => (optimize_window_with(n, d, &link, points)?, "wn"),
        SweepKind::Threshold => {
            let limit = u_max.unwrap_or_else(|| default_threshold_limit(&link));
            config.push(("u_max", limit.to_string()));
            (optimize_threshold_with(n, d, &link, limit, points)?, "u")
        }
    };
    let mut report = Report::new(config);
    report.notes.push(format!(
        "optimum: {column}={} ber_approx={:e} ber_exact={:e} unimodal={} boundary={}",
        result.minimizer, result.min_ber, result.exact_min_ber, result.unimodal, result.boundary
    ));
    report
        .notes
        .extend(result.warnings.iter().map(|w| format!("warning: {w}")));
    let extra = if matches!(kind, SweepKind::Rate) {
        ""
    } else {
        "rf,"
    };
    report.line(format!(
        "{column},{extra}ber_approx,ber_exact,ber_mc,mc_stderr"
    ));
    for &(x, approx) in &result.grid {
        let design = match kind {
            SweepKind::Rate => {
                let mut out = window_design(n, d, ((1.0 / x - 1.0) / d as f64).min(1.0), &link)?;
                out.forward_rate = x;
                out
            }
            SweepKind::Window => window_design(n, d, x, &link)?,
            SweepKind::Threshold => threshold_design(n, d, x, &link)?,
        };
        let (exact, mc, se) = evaluate(&design, n, d, a.mc_bits, seed)?;
        let prefix = if matches!(kind, SweepKind::Rate) {
            String::new()
        } else {
            format!("{},", design.forward_rate)
        };
        report.line(format!("{x},{prefix}{approx:e},{exact:e},{mc},{se}"));
    }
    Ok(report)
}

/// Quadrature BER and, when requested, a quantized-scheme simulation of a
/// design at its effective SNR.
fn evaluate(
    design: &Design,
    n: usize,
    d: usize,
    mc_bits: u64,
    seed: u64,
) -> bitarq::Result<(f64, String, String)> {
    let link = LinkModel::awgn(design.snr_eff)?;
    let config = ProtocolConfig::new(
        n,
        d,
        Strategy::FixedRate {
            target_rate: design.forward_rate,
        },
    )
    .with_thresholds(design.thresholds.clone());
    let exact = ber_exact(&config, &link)?;
    if mc_bits == 0 {
        return Ok((exact, String::new(), String::new()));
    }
    let report = simulate_with(
        &config,
        &link,
        Scheme::Quantized,
        whole_packets(mc_bits, n),
        seed,
        &SimOptions::default(),
    )?;
    Ok((
        exact,
        format!("{:e}", report.ber()),
        format!("{:e}", report.std_error()),
    ))
}

fn optimize(a: &OptimizeArgs) -> bitarq::Result<Report> {
    let (n, d, points) = (a.n as usize, a.d as usize, a.points as usize);
    let strategies = if a.strategy.is_empty() {
        vec![
            StrategyKind::Rate,
            StrategyKind::Window,
            StrategyKind::Threshold,
        ]
    } else {
        a.strategy.clone()
    };
    let mut report = Report::new(vec![
        ("snr_db", fmt_list(&a.snr_db)),
        ("n", n.to_string()),
        ("d", d.to_string()),
        (
            "strategy",
            fmt_list(&strategies.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
        ),
        ("points", points.to_string()),
    ]);
    report.line("snr_db,strategy,optimum,rf,ber_approx,ber_exact,ber_uncoded,unimodal,boundary,thresholds,windows");
    for &snr_db in &a.snr_db {
        let link = LinkModel::awgn(db_to_linear(snr_db))?;
        for &strategy in &strategies {
            let r = match strategy {
                StrategyKind::Rate => optimize_rate_with(n, d, &link, points)?,
                StrategyKind::Window => optimize_window_with(n, d, &link, points)?,
                StrategyKind::Threshold => {
                    optimize_threshold_with(n, d, &link, default_threshold_limit(&link), points)?
                }
            };
            report.notes.extend(
                r.warnings
                    .iter()
                    .map(|w| format!("warning: {snr_db} dB {}: {w}", strategy.as_str())),
            );
            report.line(format!(
                "{snr_db},{},{},{},{:e},{:e},{:e},{},{},{},{}",
                strategy.as_str(),
                r.minimizer,
                r.design.forward_rate,
                r.min_ber,
                r.exact_min_ber,
                q_function((2.0 * link.snr()).sqrt()),
                r.unimodal,
                r.boundary,
                fmt_list(&r.design.thresholds),
                fmt_list(&r.design.windows),
            ));
        }
    }
    Ok(report)
}

fn simulate(a: &SimulateArgs, seed: u64) -> bitarq::Result<Report> {
    let (n, d) = (a.n as usize, a.d as usize);
    let gamma_b = db_to_linear(a.snr_db);
    let awgn = LinkModel::awgn(gamma_b)?;
    let scheme = match a.scheme {
        SchemeKind::Adaptive => Scheme::Adaptive,
        SchemeKind::Quantized => Scheme::Quantized,
        SchemeKind::Brc => Scheme::BlockRepetition,
    };
    let need_value = || {
        a.value.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "--value is required for the {} strategy",
                a.strategy.as_str()
            ))
        })
    };
    let (config, rate, snr_eff) = if d == 0 {
        (
            ProtocolConfig::new(n, 0, Strategy::FixedRate { target_rate: 1.0 }),
            1.0,
            gamma_b,
        )
    } else if scheme == Scheme::BlockRepetition {
        let rate = 1.0 / (1.0 + d as f64);
        (
            ProtocolConfig::new(n, d, Strategy::FixedRate { target_rate: rate }),
            rate,
            gamma_b * rate,
        )
    } else {
        match a.strategy {
            StrategyKind::Window | StrategyKind::Rate => {
                let (strategy, fraction) = if a.strategy == StrategyKind::Window {
                    let p = need_value()?;
                    if p > 1.0 {
                        return Err(Error::InvalidConfig(format!(
                            "window fraction {p} exceeds 1"
                        )));
                    }
                    (Strategy::FixedWindow { window_fraction: p }, p)
                } else {
                    let r = need_value()?;
                    let (lo, hi) = rate_interval(n, d);
                    if !(r > lo && r <= hi) {
                        return Err(Error::InvalidRate {
                            rate: r,
                            lower: lo,
                            upper: hi,
                        });
                    }
                    (
                        Strategy::FixedRate { target_rate: r },
                        ((1.0 / r - 1.0) / d as f64).min(1.0),
                    )
                };
                let design = window_design(n, d, fraction, &awgn)?;
                let config = ProtocolConfig::new(n, d, strategy)
                    .with_thresholds(design.thresholds)
                    .with_windows(design.windows);
                (config, design.forward_rate, design.snr_eff)
            }
            StrategyKind::Threshold => {
                let u = need_value()?;
                let design = threshold_design(n, d, u, &awgn)?;
                let config = ProtocolConfig::new(n, d, Strategy::FixedThreshold { threshold: u })
                    .with_thresholds(design.thresholds);
                (config, design.forward_rate, design.snr_eff)
            }
        }
    };
    let link = if a.fading {
        LinkModel::slow_fading(snr_eff)?
    } else {
        LinkModel::awgn(snr_eff)?
    };
    let options = SimOptions {
        selection: a.selection.map(|s| match s {
            SelectionKind::Threshold => Selection::Threshold,
            SelectionKind::LeastReliable => Selection::LeastReliable,
        }),
        ordering: match a.ordering {
            OrderingKind::Current => Ordering::Current,
            OrderingKind::Initial => Ordering::Initial,
        },
        random_data: a.random_data,
        ..SimOptions::default()
    };
    let bits = whole_packets(a.bits, n);
    let result = simulate_with(&config, &link, scheme, bits, seed, &options)?;
    let analytic = match (a.fading, d, scheme) {
        (false, 0, _) | (false, _, Scheme::BlockRepetition) => {
            format!("{:e}", q_function((2.0 * gamma_b).sqrt()))
        }
        (false, _, Scheme::Quantized) => format!("{:e}", ber_exact(&config, &link)?),
        (true, d, Scheme::Quantized) if d > 0 => format!("{:e}", ber_fading(&config, &link)?),
        _ => String::new(),
    };
    let mut report = Report::new(vec![
        ("snr_db", a.snr_db.to_string()),
        ("n", n.to_string()),
        ("d", d.to_string()),
        ("scheme", format!("{:?}", a.scheme).to_lowercase()),
        ("strategy", a.strategy.as_str().into()),
        ("value", a.value.map(|v| v.to_string()).unwrap_or_default()),
        ("bits", bits.to_string()),
        ("fading", a.fading.to_string()),
        (
            "selection",
            a.selection
                .map(|s| format!("{s:?}").to_lowercase())
                .unwrap_or_else(|| "default".into()),
        ),
        ("ordering", format!("{:?}", a.ordering).to_lowercase()),
        ("random_data", a.random_data.to_string()),
    ]);
    report
        .notes
        .push(format!("thresholds: {}", fmt_list(&config.thresholds)));
    report.line("snr_db,snr_eff_db,rf_design,bits,errors,ber,stderr,rf_realized,ber_analytic");
    report.line(format!(
        "{},{},{},{},{},{:e},{:e},{},{}",
        a.snr_db,
        linear_to_db(snr_eff),
        rate,
        result.bits_simulated,
        result.bit_errors,
        result.ber(),
        result.std_error(),
        result.forward_rate_realized,
        analytic
    ));
    Ok(report)
}

fn feedback(a: &FeedbackArgs, seed: u64) -> bitarq::Result<Report> {
    let (n, w) = (a.n as usize, a.w as usize);
    if w > n {
        return Err(Error::InvalidConfig(format!(
            "window {w} exceeds packet size {n}"
        )));
    }
    let count = binomial(n, w);
    let log2_mean = log2_big(&count);
    if log2_mean.exp2() > MAX_MEAN_INDEX {
        return Err(Error::InvalidConfig(format!(
            "C({n}, {w}) = 2^{log2_mean:.1} permutations on average; the search is limited to 2^22"
        )));
    }
    let best = optimal_c1(n, w);
    let c1_max = a.c1_max.unwrap_or((2 * best + 2).min(63));
    let mut report = Report::new(vec![
        ("n", n.to_string()),
        ("w", w.to_string()),
        ("trials", a.trials.to_string()),
        ("c1_max", c1_max.to_string()),
    ]);
    report.notes.push(format!(
        "subsets={count} combinadic_bits={} optimal_c1={best}",
        bit_width(n, w)?
    ));
    let indices = sample_search_indices(n, w, a.trials as usize, seed)?;
    report.line("c1,mean_k,mean_idle_plus_one,mean_delay,throughput");
    for c1 in 1..=c1_max {
        let s = delay_stats(&indices, c1);
        report.line(format!(
            "{c1},{},{},{},{}",
            s.mean_k,
            s.mean_idle_plus_one,
            s.mean_delay,
            throughput_one_retx(n, s.mean_delay)
        ));
    }
    Ok(report)
}

fn fusion_plan(a: &FusionPlanArgs) -> bitarq::Result<Report> {
    let tech = Technology::new(a.tech.parse()?);
    let block_bits = a.block_bits.map_or(tech.packet_bits, |b| b as usize);
    let plan = schedule_uplink(
        tech.packet_bits,
        a.w as usize,
        a.d as usize,
        a.blocks as usize,
        block_bits,
    )?;
    let mut report = Report::new(vec![
        ("tech", tech.name.to_string()),
        ("n", tech.packet_bits.to_string()),
        ("w", a.w.to_string()),
        ("d", a.d.to_string()),
        ("blocks", a.blocks.to_string()),
        ("block_bits", block_bits.to_string()),
    ]);
    report
        .notes
        .extend(plan.warnings.iter().map(|w| format!("warning: {w}")));
    report
        .notes
        .push(format!("free_bits: {}", fmt_list(&plan.free_bits())));
    report.body = plan.to_string();
    Ok(report)
}

fn fusion_feasibility(a: &FeasibilityArgs) -> bitarq::Result<Report> {
    let filter: Option<TechnologyName> = a.tech.as_deref().map(str::parse).transpose()?;
    let designs: Vec<SegmentedDesign> = match (a.p_f, a.p_r, a.n_seg, a.w_seg, filter) {
        (Some(pf), Some(pr), Some(ns), Some(ws), Some(t)) => {
            vec![SegmentedDesign::new(
                Technology::new(t),
                pf,
                pr,
                ns as usize,
                ws as usize,
            )?]
        }
        _ => catalog_designs()
            .into_iter()
            .filter(|d| filter.is_none_or(|t| d.tech.name == t))
            .collect(),
    };
    let mut report = Report::new(vec![
        (
            "tech",
            filter
                .map(|t| t.to_string())
                .unwrap_or_else(|| "all".into()),
        ),
        (
            "design",
            if a.p_f.is_some() {
                "custom".into()
            } else {
                "catalog".into()
            },
        ),
        ("joint", a.joint.to_string()),
    ]);
    report.line("tech,p_f,p_r,n_seg,w_seg,c_tot,pp_f,pp_r,feasible,reasons");
    for design in &designs {
        let (pf, pr) = if a.joint {
            segment_feasibility_joint(design)
        } else {
            segment_feasibility(design)
        };
        let verdict = feasible(design);
        report.line(format!(
            "{},{:e},{:e},{},{},{},{:.5},{:.3e},{},{}",
            design.tech.name,
            design.p_f,
            design.p_r,
            design.n_seg,
            design.w_seg,
            design.c_tot,
            pf,
            pr,
            verdict.feasible,
            verdict.reasons.join("; ").replace(',', "")
        ));
    }
    Ok(report)
}

fn fit_check(a: &FitCheckArgs) -> bitarq::Result<Report> {
    let techs: Vec<TechnologyName> = match a.tech.as_deref() {
        Some(t) => vec![t.parse()?],
        None => TechnologyName::ALL.to_vec(),
    };
    let targets = a
        .ber
        .map_or_else(|| vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6], |b| vec![b]);
    let mut report = Report::new(vec![
        ("tech", fmt_list(&techs)),
        (
            "ber",
            fmt_list(&targets.iter().map(|b| format!("{b:e}")).collect::<Vec<_>>()),
        ),
    ]);
    report.line("tech,target_ber,snr_db");
    for name in techs {
        let tech = Technology::new(name);
        for &target in &targets {
            let mut row = String::new();
            write!(row, "{name},{target:e},{:.2}", required_snr(&tech, target)?)
                .expect("writing to a String");
            report.line(row);
        }
    }
    Ok(report)
}
