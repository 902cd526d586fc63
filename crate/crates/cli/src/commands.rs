use std::path::{Path, PathBuf};

use polqkd_core::analysis::g2::{g2_fit_with, G2Fit};
use polqkd_core::analysis::qber::{encoding_agreement, qber_report, FilterSummary, QberReport, SlotCounts};
use polqkd_core::analysis::spectrum::{nsd_fit, periodogram, NsdOptions, Window};
use polqkd_core::analysis::stability::stability_metrics;
use polqkd_core::analysis::fit::LmOptions;
use polqkd_core::{fixtures, io, skr};
use polqkd_core::{
    histogram, simulate_run_with, Bb84Symbol, DetectionRecord, Error, ExperimentParams, RecordMetadata,
    SimulationOptions, SkrParams, SkrPoint, StokesVector,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{GlobalArgs, WindowArg};

fn prepare(g: &GlobalArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(g.config.as_deref())?;
    if let Some(seed) = g.seed {
        cfg.run.seed = seed;
    }
    std::fs::create_dir_all(&g.out_dir).map_err(|e| CliError::io(&g.out_dir, e))?;
    Ok(cfg)
}

fn out(g: &GlobalArgs, name: impl AsRef<Path>) -> PathBuf {
    g.out_dir.join(name)
}

pub fn simulate(g: &GlobalArgs, n_slots: Option<u64>, debug: bool) -> CliResult<()> {
    let mut cfg = prepare(g)?;
    if let Some(n) = n_slots {
        cfg.run.n_slots = n;
    }
    cfg.write_resolved(&g.out_dir)?;
    let params = cfg.experiment()?;
    let opts = SimulationOptions {
        threads: g.threads,
        debug,
        ..SimulationOptions::default()
    };
    let record = simulate_run_with(&params, cfg.run.n_slots, cfg.run.seed, &opts)?;
    let path = out(g, &cfg.run.events_file);
    io::write_record(&path, &record)?;
    println!("{} events from {} slots -> {}", record.len(), cfg.run.n_slots, path.display());
    Ok(())
}

#[derive(Serialize)]
struct ChannelHistograms {
    bin_width_ps: f64,
    bin_starts_ps: Vec<f64>,
    /// Counts summed over sequence positions, before temporal filtering.
    channels: std::collections::BTreeMap<char, Vec<u64>>,
}

#[derive(Serialize)]
struct AnalysisReport {
    events_file: PathBuf,
    params_source: &'static str,
    no_data: bool,
    filter: FilterSummary,
    qber: QberReport,
    encoding_agreement: Option<f64>,
    encoding_agreement_note: Option<String>,
    histograms: ChannelHistograms,
}

pub fn analyze(g: &GlobalArgs, events_path: &Path, bin_ps: f64) -> CliResult<()> {
    let cfg = prepare(g)?;
    cfg.write_resolved(&g.out_dir)?;
    let events = io::read_events(events_path)?;
    let sidecar = io::sidecar_path(events_path);
    // An explicit config wins over the sidecar written by `simulate`.
    let (metadata, params_source) = if g.config.is_some() {
        (metadata_from(&cfg)?, "config")
    } else if sidecar.exists() {
        (io::read_metadata(&sidecar)?, "sidecar")
    } else {
        (metadata_from(&cfg)?, "defaults")
    };
    metadata.params.validate()?;
    let record = DetectionRecord { events, metadata };
    let seq = record.sequence().clone();

    let (counts, filter) = SlotCounts::from_record(&record)?;
    let qber = qber_report(&counts, &seq)?;
    let (encoding_agreement, encoding_agreement_note) = match encoding_agreement(&counts, &seq) {
        Ok(f) => (Some(f), None),
        Err(e @ (Error::Precondition(_) | Error::InvalidSequence(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };

    let hist = histogram(&record, bin_ps)?;
    let mut channels = std::collections::BTreeMap::new();
    for c in Bb84Symbol::ALL {
        let mut acc = vec![0u64; hist.n_bins];
        for pos in 0..seq.len() {
            for (a, v) in acc.iter_mut().zip(hist.bins(c, pos)) {
                *a += v;
            }
        }
        channels.insert(c.letter(), acc);
    }

    let report = AnalysisReport {
        events_file: events_path.to_path_buf(),
        params_source,
        no_data: record.is_empty(),
        filter,
        qber,
        encoding_agreement,
        encoding_agreement_note,
        histograms: ChannelHistograms {
            bin_width_ps: hist.bin_width_ps,
            bin_starts_ps: hist.bin_starts_ps().collect(),
            channels,
        },
    };
    io::write_slot_counts(&out(g, "slot_counts.csv"), &counts)?;
    let path = out(g, &cfg.run.report_file);
    io::write_json(&path, &report)?;
    match report.qber.overall {
        Some(q) => println!("mean QBER {:.4} %, report -> {}", 100.0 * q, path.display()),
        None => println!("no usable events, report -> {}", path.display()),
    }
    Ok(())
}

fn metadata_from(cfg: &RunConfig) -> CliResult<RecordMetadata> {
    let params: ExperimentParams = cfg.experiment()?;
    Ok(RecordMetadata {
        n_slots: cfg.run.n_slots,
        seed: None,
        params,
    })
}

#[derive(Serialize)]
struct SkrRun {
    p_mis: f64,
    file: PathBuf,
    max_tolerable_loss_db: Option<f64>,
}

#[derive(Serialize)]
struct SkrSidecar {
    params: SkrParams,
    d_min_km: f64,
    d_max_km: f64,
    step_km: f64,
    runs: Vec<SkrRun>,
    ratio_file: Option<PathBuf>,
}

pub fn skr(g: &GlobalArgs, d_min: f64, d_max: f64, step: f64, p_mis: &[f64]) -> CliResult<()> {
    let cfg = prepare(g)?;
    cfg.write_resolved(&g.out_dir)?;
    let values = if p_mis.is_empty() { vec![cfg.skr.p_mis] } else { p_mis.to_vec() };
    let mut runs = Vec::new();
    let mut sweeps: Vec<Vec<SkrPoint>> = Vec::new();
    for &p in &values {
        let params = SkrParams { p_mis: p, ..cfg.skr };
        let points = skr::skr_sweep(&params, d_min, d_max, step)?;
        let max_loss = match skr::max_tolerable_loss(&params) {
            Ok(l) => Some(l),
            Err(Error::NoPositiveRate) => None,
            Err(e) => return Err(e.into()),
        };
        let file = out(g, format!("skr_pmis_{p}.csv"));
        io::write_skr_sweep(&file, &points)?;
        println!(
            "p_mis {p}: {} points, max tolerable loss {} -> {}",
            points.len(),
            max_loss.map_or("none".to_string(), |l| format!("{l:.3} dB")),
            file.display()
        );
        runs.push(SkrRun {
            p_mis: p,
            file,
            max_tolerable_loss_db: max_loss,
        });
        sweeps.push(points);
    }
    let ratio_file = if let [a, b] = sweeps.as_slice() {
        let path = out(g, "skr_ratio.csv");
        let mut text = String::from("distance_km,skr_a_bps,skr_b_bps,ratio\n");
        for (pa, pb) in a.iter().zip(b) {
            let ratio = if pb.skr_bps > 0.0 { (pa.skr_bps / pb.skr_bps).to_string() } else { String::new() };
            text.push_str(&format!("{},{},{},{ratio}\n", pa.distance_km, pa.skr_bps, pb.skr_bps));
        }
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Some(path)
    } else {
        None
    };
    let sidecar = SkrSidecar {
        params: cfg.skr,
        d_min_km: d_min,
        d_max_km: d_max,
        step_km: step,
        runs,
        ratio_file,
    };
    io::write_json(&out(g, "skr_params.json"), &sidecar)?;
    Ok(())
}

#[derive(Serialize)]
struct G2Report<'a> {
    histogram_file: &'a Path,
    bins: usize,
    #[serde(flatten)]
    fit: G2Fit,
}

pub fn g2fit(g: &GlobalArgs, hist_path: &Path, rep_rate_hz: Option<f64>) -> CliResult<()> {
    let cfg = prepare(g)?;
    cfg.write_resolved(&g.out_dir)?;
    let hist = io::read_g2_histogram(hist_path)?;
    let f_sys = rep_rate_hz.unwrap_or(cfg.source.rep_rate_hz);
    let fit = g2_fit_with(&hist, f_sys, &LmOptions::default())?;
    let path = out(g, "g2_fit.json");
    println!(
        "g2(0) = {:.4} +/- {:.4} %, T_B = {:.2} ns -> {}",
        100.0 * fit.g2_zero,
        100.0 * fit.g2_zero_std_error,
        fit.params.bunching_ns,
        path.display()
    );
    io::write_json(
        &path,
        &G2Report {
            histogram_file: hist_path,
            bins: hist.len(),
            fit,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct NsdSummary {
    c: f64,
    beta: f64,
    beta_std_error: f64,
    log_residual_rms: f64,
    fit_points: usize,
    poor_fit: bool,
}

#[derive(Serialize)]
struct StabilityReport<'a> {
    stokes_file: &'a Path,
    samples: usize,
    interval_s: f64,
    normalized: bool,
    s_avg: StokesVector,
    mean_error: f64,
    max_error: f64,
    nsd: Option<NsdSummary>,
    nsd_note: Option<String>,
}

pub fn stability(
    g: &GlobalArgs,
    stokes_path: &Path,
    normalize: bool,
    window: WindowArg,
    skip_low_bins: usize,
) -> CliResult<()> {
    let cfg = prepare(g)?;
    cfg.write_resolved(&g.out_dir)?;
    let mut series = io::read_stokes(stokes_path)?;
    if normalize {
        series = series.normalized()?;
    }
    let metrics = stability_metrics(&series)?;
    let dt = series.mean_interval_s();
    let window = match window {
        WindowArg::None => Window::None,
        WindowArg::Hann => Window::Hann,
    };
    let opts = NsdOptions {
        window,
        skip_low_bins,
        ..NsdOptions::default()
    };
    let (nsd, nsd_note) = match nsd_fit(&metrics.projection_error, dt, &opts) {
        Ok(f) => (
            Some(NsdSummary {
                c: f.c,
                beta: f.beta,
                beta_std_error: f.beta_std_error,
                log_residual_rms: f.log_residual_rms,
                fit_points: f.fit_points,
                poor_fit: f.poor_fit,
            }),
            None,
        ),
        Err(e @ (Error::DegenerateSpectrum(_) | Error::Precondition(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };

    let spectrum = periodogram(&metrics.projection_error, dt, window)?;
    let mut text = String::from("frequency_hz,psd\n");
    for (f, p) in spectrum.frequencies_hz.iter().zip(&spectrum.psd) {
        text.push_str(&format!("{f},{p}\n"));
    }
    let spec_path = out(g, "spectrum.csv");
    std::fs::write(&spec_path, text).map_err(|e| CliError::io(&spec_path, e))?;

    let mut text = String::from("t_s,projection_error\n");
    for (t, e) in series.times().iter().zip(&metrics.projection_error) {
        text.push_str(&format!("{t},{e}\n"));
    }
    let err_path = out(g, "projection_error.csv");
    std::fs::write(&err_path, text).map_err(|e| CliError::io(&err_path, e))?;

    let report = StabilityReport {
        stokes_file: stokes_path,
        samples: series.len(),
        interval_s: dt,
        normalized: normalize,
        s_avg: metrics.s_avg,
        mean_error: metrics.mean_error,
        max_error: metrics.max_error,
        nsd,
        nsd_note,
    };
    let path = out(g, "stability.json");
    io::write_json(&path, &report)?;
    match &report.nsd {
        Some(n) => println!("mean error {:.3e}, beta {:.3} -> {}", report.mean_error, n.beta, path.display()),
        None => println!("mean error {:.3e}, no spectral fit -> {}", report.mean_error, path.display()),
    }
    Ok(())
}

pub fn gen_fixtures(g: &GlobalArgs, beta: f64, samples: usize, interval_s: f64) -> CliResult<()> {
    let cfg = prepare(g)?;
    let seed = cfg.run.seed;
    let truth = fixtures::default_g2_truth();
    let hist = fixtures::g2_histogram(&truth, -110.0, 110.0, 0.05, seed)?;
    io::write_g2_histogram(&out(g, "g2_histogram.csv"), &hist)?;
    io::write_json(&out(g, "g2_truth.json"), &truth)?;
    let series = fixtures::stokes_series(samples, beta, interval_s, 1e-4, 1e-5, seed)?;
    io::write_stokes(&out(g, "stokes.csv"), &series)?;
    println!("fixtures -> {}", g.out_dir.display());
    Ok(())
}
