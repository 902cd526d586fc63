//! Fiber channel, detectors and the passive-basis BB84 decoder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{Basis, Bb84Symbol, JonesVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub attenuation_db_per_km: f64,
    pub distance_km: f64,
    pub excess_loss_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            attenuation_db_per_km: 0.18,
            distance_km: 0.0,
            excess_loss_db: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.attenuation_db_per_km.is_finite() && self.attenuation_db_per_km >= 0.0) {
            return Err(Error::domain(format!(
                "attenuation must be >= 0 dB/km, got {}",
                self.attenuation_db_per_km
            )));
        }
        if !(self.distance_km.is_finite() && self.distance_km >= 0.0) {
            return Err(Error::domain(format!("distance must be >= 0 km, got {}", self.distance_km)));
        }
        if !self.excess_loss_db.is_finite() {
            return Err(Error::domain("excess loss must be finite"));
        }
        Ok(())
    }

    pub fn loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.distance_km + self.excess_loss_db
    }
}

/// `10^(-(attenuation * distance + excess)/10)`.
pub fn channel_transmission(ch: &ChannelParams) -> f64 {
    10f64.powf(-ch.loss_db() / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub decoder_efficiency: f64,
    pub detector_efficiency: f64,
    /// Dark counts per second in each of the four channels.
    pub dark_rate_hz: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            decoder_efficiency: 0.8,
            detector_efficiency: 0.8,
            dark_rate_hz: 40.0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("decoder efficiency", self.decoder_efficiency),
            ("detector efficiency", self.detector_efficiency),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.dark_rate_hz.is_finite() && self.dark_rate_hz >= 0.0) {
            return Err(Error::domain(format!("dark rate must be >= 0, got {}", self.dark_rate_hz)));
        }
        Ok(())
    }

    /// Dark-count probability per slot summed over the four channels, `4 * rate / R`.
    pub fn dark_probability_per_slot(&self, rep_rate_hz: f64) -> f64 {
        4.0 * self.dark_rate_hz / rep_rate_hz
    }
}

/// Passive 50/50 basis choice followed by a projective measurement in that basis.
pub fn decode<R: Rng + ?Sized>(state: &JonesVector, rng: &mut R) -> Bb84Symbol {
    let basis = if rng.random::<bool>() { Basis::X } else { Basis::Y };
    let [first, second] = basis.symbols();
    let p_first = first.state().fidelity(state);
    if rng.random::<f64>() < p_first {
        first
    } else {
        second
    }
}
