//! One test per acceptance criterion. Each prints a `criterion N: PASS|FAIL` line
//! with the measured values before asserting.

use std::time::{Duration, Instant};

use polqkd_core::analysis::g2::g2_fit;
use polqkd_core::analysis::qber::{encoding_agreement, mean_qber, theoretical_matrix, SlotCounts};
use polqkd_core::analysis::spectrum::{nsd_fit, periodogram, NsdOptions, Window};
use polqkd_core::channel::decode;
use polqkd_core::fixtures;
use polqkd_core::polarization::{apply_relative_phase, projection_prob, state_from_phase};
use polqkd_core::source::photon_number_probs;
use polqkd_core::{
    max_tolerable_loss, simulate_run, simulate_run_with, skr_point, skr_sweep, Bb84Symbol,
    ExperimentParams, ModulationSequence, SimulationOptions, SkrParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RATIO_MIN: f64 = 1.19;
const LOSS_GAP_DB: f64 = 0.63;
const LOSS_GAP_TOL_DB: f64 = 0.15;
const QBER_TARGET: f64 = 0.0069;
const QBER_TOL: f64 = 0.0010;
const AGREEMENT_MIN: f64 = 0.96;
const AGREEMENT_IDEAL_MIN: f64 = 0.999;
const DISCARD_TARGET: f64 = 0.069;
const DISCARD_TOL: f64 = 0.005;
const DISCARD_RANGE: (f64, f64) = (0.05, 0.12);
const G2_REL_TOL: f64 = 0.20;
const TB_TOL_NS: f64 = 12.0;
const G2_TRIALS: usize = 100;
const G2_MIN_SUCCESS: usize = 95;
const BETA_TOL: f64 = 0.1;

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

#[test]
fn criterion_1_skr_ratio() {
    let ((worst, positive), dt) = timed(|| {
        let lo = skr_sweep(&SkrParams { p_mis: 0.0069, ..SkrParams::default() }, 0.0, 120.0, 1.0).unwrap();
        let hi = skr_sweep(&SkrParams { p_mis: 0.025, ..SkrParams::default() }, 0.0, 120.0, 1.0).unwrap();
        let ratios: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .filter(|(_, b)| b.skr_bps > 0.0)
            .map(|(a, b)| a.skr_bps / b.skr_bps)
            .collect();
        (ratios.iter().copied().fold(f64::INFINITY, f64::min), ratios.len())
    });
    let pass = worst >= RATIO_MIN && positive > 0 && dt < Duration::from_secs(1);
    report(1, pass, format!("min ratio {worst:.4} over {positive} positive-rate points ({dt:?})"));
    assert!(pass);
}

#[test]
fn criterion_2_max_loss_gap() {
    let ((a, b), dt) = timed(|| {
        let a = max_tolerable_loss(&SkrParams { p_mis: 0.0069, ..SkrParams::default() }).unwrap();
        let b = max_tolerable_loss(&SkrParams { p_mis: 0.025, ..SkrParams::default() }).unwrap();
        (a, b)
    });
    let gap = a - b;
    let pass = (gap - LOSS_GAP_DB).abs() <= LOSS_GAP_TOL_DB && dt < Duration::from_secs(1);
    report(2, pass, format!("max loss {a:.3} dB vs {b:.3} dB, gap {gap:.3} dB ({dt:?})"));
    assert!(pass);
}

/// Criterion 3 and 4 share this configuration.
fn qber_params() -> ExperimentParams {
    let mut p = ExperimentParams::default();
    p.encoder.p_mis = 0.0069;
    p.encoder.extinction_ratio_db = f64::INFINITY;
    p.detector.dark_rate_hz = 40.0;
    p
}

fn single_thread() -> SimulationOptions {
    SimulationOptions {
        threads: Some(1),
        ..SimulationOptions::default()
    }
}

#[test]
fn criterion_3_mean_qber() {
    let params = qber_params();
    let (q, dt) = timed(|| {
        let rec = simulate_run_with(&params, 10_000_000, 2024, &single_thread()).unwrap();
        let (counts, _) = SlotCounts::from_record(&rec).unwrap();
        mean_qber(&counts, &params.sequence).unwrap()
    });
    let pass = (q.overall - QBER_TARGET).abs() <= QBER_TOL && dt < Duration::from_secs(120);
    report(
        3,
        pass,
        format!(
            "mean QBER {:.4}% (X {:.4}%, Y {:.4}%) ({dt:?})",
            100.0 * q.overall,
            100.0 * q.x_basis.unwrap(),
            100.0 * q.y_basis.unwrap()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_encoding_agreement() {
    let params = qber_params();
    let rec = simulate_run_with(&params, 10_000_000, 2024, &single_thread()).unwrap();
    let (counts, _) = SlotCounts::from_record(&rec).unwrap();
    let f = encoding_agreement(&counts, &params.sequence).unwrap();

    // Lossless, error-free and dark-free; simulated in batches so the
    // event lists stay small while the counts accumulate.
    let mut ideal = ExperimentParams::default();
    ideal.source.mean_photon_number = 0.9;
    ideal.encoder.total_loss_db = 0.0;
    ideal.encoder.extinction_ratio_db = f64::INFINITY;
    ideal.encoder.p_mis = 0.0;
    ideal.detector.decoder_efficiency = 1.0;
    ideal.detector.detector_efficiency = 1.0;
    ideal.detector.dark_rate_hz = 0.0;
    let mut rows = vec![[0u64; 4]; ideal.sequence.len()];
    for batch in 0..8 {
        let rec = simulate_run(&ideal, 5_000_000, 500 + batch).unwrap();
        let (c, _) = SlotCounts::from_record(&rec).unwrap();
        for (acc, row) in rows.iter_mut().zip(c.rows()) {
            for k in 0..4 {
                acc[k] += row[k];
            }
        }
    }
    let ideal_counts = SlotCounts::new(rows);
    let f_ideal = encoding_agreement(&ideal_counts, &ideal.sequence).unwrap();

    let pass = f >= AGREEMENT_MIN && f_ideal >= AGREEMENT_IDEAL_MIN;
    report(
        4,
        pass,
        format!(
            "F = {:.4}% at p_mis 0.69%, F = {:.4}% ideal ({} events)",
            100.0 * f,
            100.0 * f_ideal,
            ideal_counts.total()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_filter_discard() {
    let discard = |sigma_ps: f64, seed: u64| {
        let mut p = ExperimentParams::default();
        p.source.decay_time_ps = 990.0;
        p.source.irf_sigma_ps = sigma_ps;
        p.encoder.filter_window_ps = 2650.0;
        p.detector.dark_rate_hz = 0.0;
        let rec = simulate_run(&p, 20_000_000, seed).unwrap();
        SlotCounts::from_record(&rec).unwrap().1.discard_fraction.unwrap()
    };
    let ((sharp, smeared), dt) = timed(|| (discard(0.0, 1), discard(50.0, 2)));
    let pass = (sharp - DISCARD_TARGET).abs() <= DISCARD_TOL
        && (DISCARD_RANGE.0..=DISCARD_RANGE.1).contains(&smeared)
        && dt < Duration::from_secs(30);
    report(
        5,
        pass,
        format!(
            "discard {:.3}% at sigma 0, {:.3}% at sigma 50 ps ({dt:?})",
            100.0 * sharp,
            100.0 * smeared
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_g2_round_trip() {
    let truth = fixtures::default_g2_truth();
    let g2_true = truth.a_c / truth.a_s;
    let ((ok, failed_fits, covered), dt) = timed(|| {
        let mut ok = 0;
        let mut failed_fits = 0;
        let mut covered = 0;
        for seed in 0..G2_TRIALS as u64 {
            let h = fixtures::g2_histogram(&truth, -110.0, 110.0, 0.05, 1000 + seed).unwrap();
            match g2_fit(&h) {
                Ok(fit) => {
                    let g2_ok = ((fit.g2_zero - g2_true) / g2_true).abs() <= G2_REL_TOL;
                    let tb_ok = (fit.params.bunching_ns - truth.bunching_ns).abs() <= TB_TOL_NS;
                    if g2_ok && tb_ok {
                        ok += 1;
                    }
                    if (fit.g2_zero - g2_true).abs() <= 3.0 * fit.g2_zero_std_error {
                        covered += 1;
                    }
                }
                Err(_) => failed_fits += 1,
            }
        }
        (ok, failed_fits, covered)
    });
    let pass = ok >= G2_MIN_SUCCESS && dt < Duration::from_secs(300);
    report(
        6,
        pass,
        format!(
            "{ok}/{G2_TRIALS} trials within tolerance, {failed_fits} fit failures, \
             g2(0) inside 3 std errors in {covered} ({dt:?})"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_flicker_exponent() {
    let ((flicker, white), dt) = timed(|| {
        let opts = NsdOptions::default();
        let f = nsd_fit(&fixtures::shaped_noise(1 << 16, 1.16, 42), 1.0, &opts).unwrap();
        let w = nsd_fit(&fixtures::shaped_noise(1 << 16, 0.0, 43), 1.0, &opts).unwrap();
        (f.beta, w.beta)
    });
    let pass = (flicker - 1.16).abs() <= BETA_TOL && white.abs() <= BETA_TOL && dt < Duration::from_secs(30);
    report(7, pass, format!("beta {flicker:.4} (flicker), {white:.4} (white) ({dt:?})"));
    assert!(pass);
}

#[test]
fn criterion_8_decode_statistics() {
    const N: u64 = 1_000_000;
    let (worst, dt) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst_z: f64 = 0.0;
        for s in Bb84Symbol::ALL {
            let mut hits = [0u64; 4];
            let state = s.state();
            for _ in 0..N {
                hits[decode(&state, &mut rng).index()] += 1;
            }
            for c in Bb84Symbol::ALL {
                let p = if c == s {
                    0.5
                } else if c == s.orthogonal() {
                    0.0
                } else {
                    0.25
                };
                let k = hits[c.index()] as f64;
                let z = if p == 0.0 {
                    if k == 0.0 { 0.0 } else { f64::INFINITY }
                } else {
                    (k - N as f64 * p).abs() / (N as f64 * p * (1.0 - p)).sqrt()
                };
                worst_z = worst_z.max(z);
            }
        }
        worst_z
    });
    let pass = worst <= 5.0 && dt < Duration::from_secs(10);
    report(8, pass, format!("largest deviation {worst:.2} sigma ({dt:?})"));
    assert!(pass);
}

#[test]
fn criterion_9_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures: Vec<&str> = Vec::new();

    // phase additivity
    let additive = (0..1000).all(|_| {
        let a = rng.random_range(-10.0..10.0);
        let b = rng.random_range(-10.0..10.0);
        let base = state_from_phase(rng.random_range(-3.2..3.2)).unwrap();
        let two = apply_relative_phase(&apply_relative_phase(&base, a), b);
        let one = apply_relative_phase(&base, a + b);
        (two.fidelity(&one) - 1.0).abs() < 1e-12
    });
    if !additive {
        failures.push("phase additivity");
    }

    // mutually unbiased bases
    let unbiased = Bb84Symbol::ALL.iter().all(|&s| {
        Bb84Symbol::ALL
            .iter()
            .filter(|c| c.basis() != s.basis())
            .all(|&c| (projection_prob(&s.state(), c).unwrap() - 0.5).abs() < 1e-12)
    });
    if !unbiased {
        failures.push("mutually unbiased projections");
    }

    // Parseval
    let parseval = (0..50).all(|k| {
        let n = 64 + 37 * k;
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        let s = periodogram(&xs, 0.01 * (k + 1) as f64, Window::None).unwrap();
        (s.total_power() - var).abs() <= 1e-9 * var
    });
    if !parseval {
        failures.push("Parseval");
    }

    // vacuum clicks
    let vacuum = (0..=120).step_by(10).all(|d| {
        let p = SkrParams::default();
        let pt = skr_point(&p, d as f64).unwrap();
        let p0 = photon_number_probs(p.mean_photon_number, p.g2_zero).unwrap().p0;
        pt.p_c_n[0] == p0 * p.p_dc
    });
    if !vacuum {
        failures.push("p_c0 = p0 p_dc");
    }

    // thread-count determinism
    let params = ExperimentParams::default();
    let run = |t| {
        let o = SimulationOptions {
            threads: Some(t),
            ..SimulationOptions::default()
        };
        simulate_run_with(&params, 300_000, 99, &o).unwrap().events
    };
    if run(1) != run(4) {
        failures.push("thread determinism");
    }

    // uniform counts: experimental columns all (1,1,1,1)/2
    let seq = ModulationSequence::default();
    let f = encoding_agreement(&SlotCounts::new(vec![[5, 5, 5, 5]; seq.len()]), &seq).unwrap();
    let theo = theoretical_matrix();
    let mut d2 = 0.0;
    let mut t2 = 0.0;
    for row in &theo {
        for v in row {
            d2 += (0.5 - v).powi(2);
            t2 += v * v;
        }
    }
    let oracle = 1.0 - (d2 / t2).sqrt();
    if (f - oracle).abs() >= 1e-12 {
        failures.push("uniform-counts agreement");
    }

    let pass = failures.is_empty();
    report(9, pass, if pass { "all property checks hold".into() } else { format!("failed: {failures:?}") });
    assert!(pass);
}
