//! Statistical model of the quantum-dot single-photon source.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{self, norm_cdf};

/// System repetition rate of the pulsed excitation, in hertz.
pub const DEFAULT_REP_RATE_HZ: f64 = 151.894e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceParams {
    /// Mean photon number per pulse at the encoder input.
    pub mean_photon_number: f64,
    pub g2_zero: f64,
    pub decay_time_ps: f64,
    /// Gaussian timing jitter of the emission, one standard deviation.
    pub irf_sigma_ps: f64,
    pub rep_rate_hz: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        SourceParams {
            mean_photon_number: 0.138,
            g2_zero: 0.005,
            decay_time_ps: 990.0,
            irf_sigma_ps: 50.0,
            rep_rate_hz: DEFAULT_REP_RATE_HZ,
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.mean_photon_number.is_finite() && p.mean_photon_number >= 0.0) {
            return Err(Error::domain(format!(
                "mean photon number must be >= 0, got {}",
                p.mean_photon_number
            )));
        }
        if !(0.0..1.0).contains(&p.g2_zero) {
            return Err(Error::domain(format!("g2(0) must lie in [0, 1), got {}", p.g2_zero)));
        }
        if !(p.decay_time_ps.is_finite() && p.decay_time_ps > 0.0) {
            return Err(Error::domain(format!("decay time must be > 0, got {}", p.decay_time_ps)));
        }
        if !(p.irf_sigma_ps.is_finite() && p.irf_sigma_ps >= 0.0) {
            return Err(Error::domain(format!("IRF sigma must be >= 0, got {}", p.irf_sigma_ps)));
        }
        if !(p.rep_rate_hz.is_finite() && p.rep_rate_hz > 0.0) {
            return Err(Error::domain(format!("repetition rate must be > 0, got {}", p.rep_rate_hz)));
        }
        Ok(())
    }

    /// Slot period `1/R` in picoseconds.
    pub fn slot_period_ps(&self) -> f64 {
        1e12 / self.rep_rate_hz
    }
}

/// Photon-number distribution truncated at two photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumberProbs {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl PhotonNumberProbs {
    pub fn as_array(&self) -> [f64; 3] {
        [self.p0, self.p1, self.p2]
    }

    /// Draws a photon number in {0, 1, 2}.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        let u: f64 = rng.random();
        if u < self.p1 {
            1
        } else if u < self.p1 + self.p2 {
            2
        } else {
            0
        }
    }
}

/// `p2 = <n>^2 g2 / 2`, `p1 = <n> - p2`, `p0 = 1 - p1 - p2`.
pub fn photon_number_probs(mean_photon_number: f64, g2_zero: f64) -> Result<PhotonNumberProbs> {
    if !(mean_photon_number.is_finite() && g2_zero.is_finite()) {
        return Err(Error::domain("photon statistics must be finite"));
    }
    let p2 = mean_photon_number * mean_photon_number * g2_zero / 2.0;
    let p1 = mean_photon_number - p2;
    let p0 = 1.0 - p1 - p2;
    if p1 < 0.0 || p0 < 0.0 || p2 < 0.0 {
        return Err(Error::domain(format!(
            "<n>={mean_photon_number}, g2={g2_zero} gives p0={p0}, p1={p1}, p2={p2}"
        )));
    }
    Ok(PhotonNumberProbs { p0, p1, p2 })
}

impl SourceParams {
    pub fn photon_number_probs(&self) -> Result<PhotonNumberProbs> {
        photon_number_probs(self.mean_photon_number, self.g2_zero)
    }
}

/// Emission time measured from the slot start: `Normal(0, sigma) + Exp(tau)`.
///
/// Negative Gaussian excursions are kept.
#[derive(Debug, Clone, Copy)]
pub struct EmissionTimeSampler {
    decay: Exp<f64>,
    jitter: Option<Normal<f64>>,
}

impl EmissionTimeSampler {
    pub fn new(params: &SourceParams) -> Result<Self> {
        params.validate()?;
        let decay = Exp::new(1.0 / params.decay_time_ps)
            .map_err(|e| Error::domain(format!("decay time: {e}")))?;
        let jitter = if params.irf_sigma_ps > 0.0 {
            Some(
                Normal::new(0.0, params.irf_sigma_ps)
                    .map_err(|e| Error::domain(format!("IRF sigma: {e}")))?,
            )
        } else {
            None
        };
        Ok(EmissionTimeSampler { decay, jitter })
    }
}

impl Distribution<f64> for EmissionTimeSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t = self.decay.sample(rng);
        match &self.jitter {
            Some(n) => t + n.sample(rng),
            None => t,
        }
    }
}

pub fn sample_emission_time<R: Rng + ?Sized>(params: &SourceParams, rng: &mut R) -> Result<f64> {
    Ok(EmissionTimeSampler::new(params)?.sample(rng))
}

/// CDF of the exponentially modified Gaussian emission-time distribution.
pub fn emission_time_cdf(params: &SourceParams, t_ps: f64) -> f64 {
    let tau = params.decay_time_ps;
    let sigma = params.irf_sigma_ps;
    if sigma == 0.0 {
        return if t_ps <= 0.0 { 0.0 } else { -(-t_ps / tau).exp_m1() };
    }
    // Phi(x/s) - exp(s^2/2tau^2 - x/tau) Phi(x/s - s/tau), with Phi(z) = erfc(-z/sqrt2)/2.
    let a = sigma * sigma / (2.0 * tau * tau) - t_ps / tau;
    let b = -(t_ps / sigma - sigma / tau) * std::f64::consts::FRAC_1_SQRT_2;
    (norm_cdf(t_ps / sigma) - 0.5 * special::exp_erfc(a, b)).clamp(0.0, 1.0)
}
