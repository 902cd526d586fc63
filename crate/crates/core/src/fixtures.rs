//! Synthetic inputs with known ground truth: g2 histograms drawn from the
//! correlation model and power-law noise built in the frequency domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::analysis::g2::{g2_model, CorrelationHistogram, G2FitParams};
use crate::analysis::stability::StokesSeries;
use crate::error::{Error, Result};
use crate::polarization::StokesVector;
use crate::source::DEFAULT_REP_RATE_HZ;

/// Source-like correlation parameters: g2(0) = 0.55 %, T_B = 38 ns,
/// side-peak maxima near 5000 counts per 50 ps bin.
pub fn default_g2_truth() -> G2FitParams {
    G2FitParams {
        a_s: 1.0e4,
        a_c: 55.0,
        sigma_ns: 0.05,
        t0_ns: 0.12,
        decay_ns: 0.99,
        a_b: 0.4,
        bunching_ns: 38.0,
        f_sys_hz: DEFAULT_REP_RATE_HZ,
        side_peaks: G2FitParams::side_peaks_for_window(110.0, DEFAULT_REP_RATE_HZ),
    }
}

/// Poisson-sampled histogram of `g2_model` on bins of width `bin_ns` covering `[t_min, t_max)`.
pub fn g2_histogram(truth: &G2FitParams, t_min: f64, t_max: f64, bin_ns: f64, seed: u64) -> Result<CorrelationHistogram> {
    truth.validate()?;
    if !(bin_ns > 0.0 && t_max > t_min) {
        return Err(Error::invalid("histogram range and bin width must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ((t_max - t_min) / bin_ns).round() as usize;
    let mut t_ns = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for k in 0..n {
        let t = t_min + (k as f64 + 0.5) * bin_ns;
        let mu = g2_model(t, truth);
        let c = if mu > 0.0 {
            Poisson::new(mu).map_err(|e| Error::domain(e.to_string()))?.sample(&mut rng)
        } else {
            0.0
        };
        t_ns.push(t);
        counts.push(c);
    }
    CorrelationHistogram::new(t_ns, counts)
}

/// Zero-mean, unit-variance Gaussian noise with power spectrum `~ f^-beta`.
pub fn shaped_noise(n: usize, beta: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    let half = n / 2;
    for k in 1..=half {
        let amp = (k as f64).powf(-beta / 2.0);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        if n.is_multiple_of(2) && k == half {
            spec[k] = Complex::new(re * amp * std::f64::consts::SQRT_2, 0.0);
        } else {
            spec[k] = Complex::new(re, im) * amp;
            spec[n - k] = spec[k].conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let x: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    x.iter().map(|v| (v - mean) / sd).collect()
}

/// Stokes series wobbling around +s2 whose projection error is
/// `offset + amplitude * shaped_noise(beta)` (clamped at zero).
pub fn stokes_series(n: usize, beta: f64, interval_s: f64, offset: f64, amplitude: f64, seed: u64) -> Result<StokesSeries> {
    let noise = shaped_noise(n, beta, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let mut times = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for (k, x) in noise.iter().enumerate() {
        let eps = (offset + amplitude * x).clamp(0.0, 2.0);
        let cos_t = 1.0 - eps;
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        let az: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        times.push(k as f64 * interval_s);
        vectors.push(StokesVector::new(sin_t * az.cos(), cos_t, sin_t * az.sin()));
    }
    StokesSeries::new(times, vectors)
}
