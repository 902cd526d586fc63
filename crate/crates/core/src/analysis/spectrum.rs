//! One-sided periodogram and power-law fit of the noise spectral density.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NSD_SAMPLES: usize = 1024;

/// Euler-Mascheroni constant, the offset `E[ln P] = ln S - gamma` of a
/// chi-squared(2) periodogram ordinate.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

/// Power spectral density of a mean-removed series, per hertz, for bins `1..=N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies_hz: Vec<f64>,
    pub psd: Vec<f64>,
    pub df_hz: f64,
}

impl Spectrum {
    /// `sum psd * df`; equals the series variance for an unwindowed periodogram.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.df_hz
    }

    pub fn peak_bin(&self) -> usize {
        self.psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

pub fn periodogram(samples: &[f64], interval_s: f64, window: Window) -> Result<Spectrum> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Precondition("periodogram needs at least two samples".into()));
    }
    if !(interval_s.is_finite() && interval_s > 0.0) {
        return Err(Error::invalid(format!("sampling interval must be > 0, got {interval_s}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let w: Vec<f64> = match window {
        Window::None => vec![1.0; n],
        Window::Hann => (0..n)
            .map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos())
            .collect(),
    };
    let w_power = w.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .zip(&w)
        .map(|(x, wk)| Complex::new((x - mean) * wk, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let df = 1.0 / (n as f64 * interval_s);
    let half = n / 2;
    let scale = interval_s / (n as f64 * w_power);
    let mut frequencies_hz = Vec::with_capacity(half);
    let mut psd = Vec::with_capacity(half);
    for (k, x) in buf.iter().enumerate().take(half + 1).skip(1) {
        let two_sided = x.norm_sqr() * scale;
        let nyquist = n.is_multiple_of(2) && k == half;
        frequencies_hz.push(k as f64 * df);
        psd.push(if nyquist { two_sided } else { 2.0 * two_sided });
    }
    Ok(Spectrum {
        frequencies_hz,
        psd,
        df_hz: df,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsdOptions {
    pub window: Window,
    /// Lowest frequency bins left out of the fit.
    pub skip_low_bins: usize,
    pub max_frequency_hz: Option<f64>,
    /// RMS of log10 residuals above which the power law is flagged as poor.
    /// A clean chi-squared(2) periodogram scatters by about 0.56 decades.
    pub poor_fit_rms: f64,
}

impl Default for NsdOptions {
    fn default() -> Self {
        NsdOptions {
            window: Window::None,
            skip_low_bins: 3,
            max_frequency_hz: None,
            poor_fit_rms: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsdFit {
    pub spectrum: Spectrum,
    /// Amplitude of `c * f^-beta`, per hertz.
    pub c: f64,
    pub beta: f64,
    pub beta_std_error: f64,
    pub log_residual_rms: f64,
    pub fit_points: usize,
    pub poor_fit: bool,
}

/// Fits `c * f^-beta` to the periodogram by least squares in log-log space.
pub fn nsd_fit(samples: &[f64], interval_s: f64, opts: &NsdOptions) -> Result<NsdFit> {
    if samples.len() < MIN_NSD_SAMPLES {
        return Err(Error::Precondition(format!(
            "noise spectral fit needs at least {MIN_NSD_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    if samples.iter().all(|x| x - mean == 0.0) {
        return Err(Error::DegenerateSpectrum("series has no variation".into()));
    }
    let spectrum = periodogram(samples, interval_s, opts.window)?;
    let max_f = opts.max_frequency_hz.unwrap_or(f64::INFINITY);
    let (xs, ys): (Vec<f64>, Vec<f64>) = spectrum
        .frequencies_hz
        .iter()
        .zip(&spectrum.psd)
        .skip(opts.skip_low_bins)
        .filter(|(f, p)| **f <= max_f && **p > 0.0)
        .map(|(f, p)| (f.log10(), p.log10()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::DegenerateSpectrum(format!(
            "only {} usable bins in the fit band",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let log_residual_rms = (rss / n).sqrt();
    let slope_se = (rss / (n - 2.0) / sxx).sqrt();
    Ok(NsdFit {
        c: 10f64.powf(intercept) * EULER_GAMMA.exp(),
        beta: -slope,
        beta_std_error: slope_se,
        log_residual_rms,
        fit_points: xs.len(),
        poor_fit: log_residual_rms > opts.poor_fit_rms,
        spectrum,
    })
}
