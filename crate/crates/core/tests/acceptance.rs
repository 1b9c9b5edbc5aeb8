//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use iolws_core::channel::{fspl_distance, PerCurve, DEFAULT_FREQUENCY_HZ};
use iolws_core::metrics::{summarize, Ecdf, SummaryStats};
use iolws_core::pdu::residual::run_residual_trials;
use iolws_core::pdu::{
    decode_input_pdu, decode_output_pdu, encode_input_pdu, encode_output_pdu, ControlBits,
    ControlMCnt, CounterWindow, PairingIdentity, PduError, SafetyReceiver, SessionKey,
    Verification,
};
use iolws_core::sim::{measure_connect, run_scenario, run_sweep, DurationSeries, ScenarioConfig};

/// Published IOLW connect results: (attenuation dB, min, max, mean, std) in s.
const IOLW_TABLE: [(f64, f64, f64, f64, f64); 6] = [
    (30.0, 0.429, 0.487, 0.450, 0.015),
    (50.0, 0.429, 0.487, 0.452, 0.016),
    (65.0, 0.429, 0.486, 0.455, 0.017),
    (80.0, 0.429, 1.132, 0.479, 0.075),
    (83.0, 0.457, 2.080, 0.812, 0.244),
    (85.0, 0.438, 5.913, 2.883, 1.390),
];
/// Published IOLWS connect results, same layout.
const IOLWS_TABLE: [(f64, f64, f64, f64, f64); 6] = [
    (30.0, 0.454, 0.512, 0.475, 0.015),
    (50.0, 0.454, 0.512, 0.477, 0.016),
    (65.0, 0.454, 0.512, 0.480, 0.017),
    (80.0, 0.454, 1.157, 0.504, 0.075),
    (83.0, 0.482, 2.105, 0.837, 0.244),
    (85.0, 0.463, 5.938, 2.935, 1.410),
];

const SAFETY_OFFSET_S: f64 = 0.025;
const OFFSET_TOLERANCE_S: f64 = 0.005;
const TABLE_TOLERANCE: f64 = 0.10;
const ORDERING_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const MIN_MEAN_85DB_S: f64 = 2.0;
/// Attenuation at which the bench read -83 dBm.
const CONNECT_Q99_ATTENUATION_DB: f64 = 80.0;
const CONNECT_Q99_LIMIT_S: f64 = 0.85;
/// Attenuation at which the bench read -80 dBm.
const HANDOVER_Q99_ATTENUATION_DB: f64 = 77.0;
const HANDOVER_Q99_LIMIT_S: f64 = 1.0;
/// Strong (30, 50 dB) and moderate (65 dB) signal settings.
const STRONG_MODERATE_DB: [f64; 3] = [30.0, 50.0, 65.0];
const SURPLUS_RANGE_S: (f64, f64) = (0.050, 0.150);
const HANDOVER_MAX_LIMIT_S: f64 = 3.0;
const MC_TRIALS: u64 = 1_000_000;

/// Name, check, runtime budget in seconds.
type Criterion = (&'static str, fn() -> Verdict, Option<u64>);

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn stats(cfg: &ScenarioConfig) -> SummaryStats {
    summarize(&run_scenario(cfg).expect("scenario runs")).expect("non-empty")
}

fn series(cfg: &ScenarioConfig) -> DurationSeries {
    run_scenario(cfg).expect("scenario runs")
}

fn rel_err(sim: f64, reference: f64) -> f64 {
    (sim - reference).abs() / reference
}

fn within_time(verdict: Verdict, elapsed: Duration, budget: Duration) -> Verdict {
    let on_time = elapsed <= budget;
    Verdict::new(
        verdict.pass && on_time,
        format!(
            "{}; runtime {:.2} s (limit {} s)",
            verdict.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        ),
    )
}

fn safety_offset() -> Verdict {
    let mut failures = Vec::new();
    let mut checked = 0;
    for seed in [1, 2, 3, 42, 1234] {
        for attempt in 0..50 {
            let mut iolw = ScenarioConfig::connect(30.0, false);
            iolw.per_curve = PerCurve::lossless();
            iolw.seed = seed;
            let iolws = ScenarioConfig {
                safety: true,
                ..iolw.clone()
            };
            let a = measure_connect(&iolw, attempt).unwrap().unwrap();
            let b = measure_connect(&iolws, attempt).unwrap().unwrap();
            checked += 1;
            if b as i64 - a as i64 != 25_000 {
                failures.push(format!(
                    "seed {seed} attempt {attempt}: {} us",
                    b as i64 - a as i64
                ));
            }
        }
    }
    let mut offsets = Vec::new();
    for (a, ..) in &IOLW_TABLE[..4] {
        let iolw = stats(&ScenarioConfig::connect(*a, false));
        let iolws = stats(&ScenarioConfig::connect(*a, true));
        offsets.push((a, iolws.mean - iolw.mean));
    }
    let stochastic_ok = offsets
        .iter()
        .all(|(_, d)| (d - SAFETY_OFFSET_S).abs() <= OFFSET_TOLERANCE_S);
    let listed: Vec<_> = offsets
        .iter()
        .map(|(a, d)| format!("{a} dB {:.1} ms", d * 1e3))
        .collect();
    Verdict::new(
        failures.is_empty() && stochastic_ok,
        format!(
            "lossless offset exactly 25 ms in {}/{checked} pairs; mean offsets {}",
            checked - failures.len(),
            listed.join(", ")
        ),
    )
}

fn table_regression() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for ((a, _, _, mean_ref, _), (_, _, _, mean_ref_s, _)) in
        IOLW_TABLE[..4].iter().zip(&IOLWS_TABLE[..4])
    {
        let iolw = stats(&ScenarioConfig::connect(*a, false));
        let iolws = stats(&ScenarioConfig::connect(*a, true));
        let e = rel_err(iolw.mean, *mean_ref);
        let es = rel_err(iolws.mean, *mean_ref_s);
        let offset = iolws.mean - iolw.mean;
        ok &= e <= TABLE_TOLERANCE && es <= TABLE_TOLERANCE;
        ok &= (offset - SAFETY_OFFSET_S).abs() <= OFFSET_TOLERANCE_S;
        notes.push(format!(
            "{a} dB {:.4}/{mean_ref} ({:+.1}%)",
            iolw.mean,
            (iolw.mean / mean_ref - 1.0) * 100.0
        ));
        if *a == 30.0 {
            let (_, min_ref, max_ref, ..) = IOLW_TABLE[0];
            let (_, min_ref_s, max_ref_s, ..) = IOLWS_TABLE[0];
            ok &= rel_err(iolw.min, min_ref) <= TABLE_TOLERANCE
                && rel_err(iolw.max, max_ref) <= TABLE_TOLERANCE;
            ok &= rel_err(iolws.min, min_ref_s) <= TABLE_TOLERANCE
                && rel_err(iolws.max, max_ref_s) <= TABLE_TOLERANCE;
            notes.push(format!("30 dB min/max {:.4}/{:.4}", iolw.min, iolw.max));
        }
    }
    Verdict::new(ok, notes.join(", "))
}

fn degradation_ordering() -> Verdict {
    let mut ok = true;
    let mut means_85 = Vec::new();
    for seed in ORDERING_SEEDS {
        for safety in [false, true] {
            let configs: Vec<_> = IOLW_TABLE
                .iter()
                .map(|(a, ..)| ScenarioConfig {
                    seed,
                    ..ScenarioConfig::connect(*a, safety)
                })
                .collect();
            let rows: Vec<_> = run_sweep(&configs, true)
                .into_iter()
                .map(|r| summarize(&r.expect("scenario runs")).unwrap())
                .collect();
            for w in rows.windows(2) {
                ok &= w[0].mean <= w[1].mean && w[0].std <= w[1].std;
            }
            let last = rows.last().unwrap().mean;
            ok &= last >= MIN_MEAN_85DB_S;
            means_85.push(last);
        }
    }
    let lo = means_85.iter().cloned().fold(f64::INFINITY, f64::min);
    Verdict::new(
        ok,
        format!(
            "seeds {ORDERING_SEEDS:?}, both modes; lowest 85 dB mean {lo:.3} s (bound {MIN_MEAN_85DB_S} s)"
        ),
    )
}

fn ecdf_reference_points() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for safety in [false, true] {
        let connect = Ecdf::new(
            &series(&ScenarioConfig::connect(CONNECT_Q99_ATTENUATION_DB, safety)).samples,
        )
        .unwrap();
        let handover = Ecdf::new(
            &series(&ScenarioConfig::handover(
                HANDOVER_Q99_ATTENUATION_DB,
                safety,
            ))
            .samples,
        )
        .unwrap();
        let qc = connect.quantile_seconds(0.99).unwrap();
        let qh = handover.quantile_seconds(0.99).unwrap();
        ok &= qc <= CONNECT_Q99_LIMIT_S && qh <= HANDOVER_Q99_LIMIT_S;
        let mut surplus = Vec::new();
        let mut max_seen: f64 = 0.0;
        for a in STRONG_MODERATE_DB {
            let c = stats(&ScenarioConfig::connect(a, safety));
            let h = stats(&ScenarioConfig::handover(a, safety));
            let s = h.mean - c.mean;
            ok &= (SURPLUS_RANGE_S.0..=SURPLUS_RANGE_S.1).contains(&s);
            ok &= h.max <= HANDOVER_MAX_LIMIT_S;
            surplus.push(format!("{:.0}", s * 1e3));
            max_seen = max_seen.max(h.max);
        }
        notes.push(format!(
            "{}: connect q99 {qc:.4} s, handover q99 {qh:.4} s, surplus [{}] ms, handover max {max_seen:.3} s",
            if safety { "IOLWS" } else { "IOLW" },
            surplus.join(", ")
        ));
    }
    Verdict::new(ok, notes.join("; "))
}

fn codec_suite() -> Verdict {
    let key = SessionKey::new(*b"acceptance-key-1");
    let id = PairingIdentity::new(2, 5).unwrap();
    let mut ok = true;
    let mut flips = 0u64;
    let mut detected = 0u64;
    for len in 1..=22usize {
        let payload: Vec<u8> = (0..len as u8).map(|i| i.wrapping_mul(37) ^ 0x5A).collect();
        let ctl = ControlMCnt::new(ControlBits::DATA, 100 + len as u16).unwrap();
        let frame = encode_output_pdu(&payload, ctl, id, &key).unwrap();
        let window = CounterWindow::after(99 + len as u16, 16);
        let decoded = decode_output_pdu(&frame, &key, id, window).unwrap();
        ok &= decoded.safety_data == payload && decoded.control_mcnt == ctl;
        for bit in 0..frame.len() * 8 {
            let mut bad = frame.clone();
            bad[bit / 8] ^= 1 << (bit % 8);
            flips += 1;
            if decode_output_pdu(&bad, &key, id, window).is_err() {
                detected += 1;
            }
        }
    }
    ok &= flips == detected;

    let safety = [1, 2, 3, 4, 5, 6];
    let ctl = ControlMCnt::new(ControlBits::DATA, 7).unwrap();
    let a = encode_input_pdu(&safety, &[0xAA; 16], ctl, id, &key).unwrap();
    let b = encode_input_pdu(&safety, &[0x55; 16], ctl, id, &key).unwrap();
    let protected = a.len() - 16;
    let mut excluded = a[..protected] == b[..protected];
    for i in protected..a.len() {
        let mut m = a.clone();
        m[i] ^= 0xFF;
        let d = decode_input_pdu(&m, &key, id, CounterWindow::OPEN);
        excluded &= d.is_ok_and(|d| d.safety_data == safety);
    }
    ok &= excluded;

    let too_long = encode_output_pdu(&[0; 23], ctl, id, &key);
    let limit = matches!(too_long, Err(PduError::PayloadTooLong { len: 23 }));
    ok &= limit;

    let mut rx = SafetyReceiver::new(key, id);
    let first = encode_output_pdu(&[9], ctl, id, &key).unwrap();
    let replay_ok = rx.accept_output(&first).is_ok()
        && matches!(rx.accept_output(&first), Err(PduError::StaleCounter { .. }));
    ok &= replay_ok;

    Verdict::new(
        ok,
        format!(
            "round trip 1..22 octets, {detected}/{flips} single-bit flips detected, \
             non-safety excluded: {excluded}, 23 octets rejected: {limit}, replay rejected: {replay_ok}"
        ),
    )
}

fn residual_monte_carlo() -> Verdict {
    let full = run_residual_trials(0.5, MC_TRIALS, 1, Verification::Full).unwrap();
    let crc = run_residual_trials(0.5, MC_TRIALS, 2, Verification::CrcOnly).unwrap();
    let p = 2f64.powi(-16);
    let sigma = (p * (1.0 - p) / MC_TRIALS as f64).sqrt();
    let crc_ok = (crc.rate() - p).abs() <= 3.0 * sigma;
    Verdict::new(
        full.undetected == 0 && crc_ok,
        format!(
            "full: {} undetected of {}; CRC only: rate {:.3e} vs 2^-16 = {p:.3e} (3 sigma = {:.2e})",
            full.undetected,
            full.trials,
            crc.rate(),
            3.0 * sigma
        ),
    )
}

fn fspl_check() -> Verdict {
    let d = fspl_distance(77.0, DEFAULT_FREQUENCY_HZ).unwrap();
    Verdict::new(
        (67.0..=75.0).contains(&d),
        format!("77 dB at 2.4 GHz = {d:.2} m"),
    )
}

fn determinism() -> Verdict {
    let mut ok = true;
    for cfg in [
        ScenarioConfig::connect(83.0, true),
        ScenarioConfig::handover(77.0, false),
    ] {
        let (a, b) = (series(&cfg), series(&cfg));
        let ea = Ecdf::new(&a.samples)
            .unwrap()
            .to_csv(a.seed, &a.config_digest);
        let eb = Ecdf::new(&b.samples)
            .unwrap()
            .to_csv(b.seed, &b.config_digest);
        ok &= a.to_csv().into_bytes() == b.to_csv().into_bytes() && ea == eb;
    }
    let configs: Vec<_> = IOLW_TABLE
        .iter()
        .flat_map(|(a, ..)| {
            [
                ScenarioConfig::connect(*a, false),
                ScenarioConfig::connect(*a, true),
            ]
        })
        .chain([
            ScenarioConfig::handover(30.0, true),
            ScenarioConfig::handover(80.0, false),
        ])
        .collect();
    let parallel = run_sweep(&configs, true);
    let serial = run_sweep(&configs, false);
    let same = parallel == serial;
    let samples: usize = serial
        .iter()
        .map(|r| r.as_ref().map_or(0, |s| s.samples.len()))
        .sum();
    Verdict::new(
        ok && same,
        format!(
            "repeated runs byte-identical: {ok}; parallel sweep equals serial over {} scenarios ({samples} samples): {same}",
            configs.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 safety offset", safety_offset, Some(5)),
        ("2 connect table regression", table_regression, Some(30)),
        ("3 degradation ordering", degradation_ordering, None),
        ("4 eCDF reference points", ecdf_reference_points, None),
        ("5 codec properties", codec_suite, Some(10)),
        ("6 residual error Monte Carlo", residual_monte_carlo, None),
        ("7 free-space path loss", fspl_check, None),
        ("8 determinism", determinism, None),
    ];
    let mut all = true;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let mut verdict = check();
        if let Some(limit) = budget {
            verdict = within_time(verdict, start.elapsed(), Duration::from_secs(limit));
        }
        all &= verdict.pass;
        println!(
            "criterion {name}: {} ({})",
            if verdict.pass { "PASS" } else { "FAIL" },
            verdict.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
