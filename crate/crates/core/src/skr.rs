//! Asymptotic secure key rate for BB84 with a sub-Poissonian source,
//! bounded with at most two photons per pulse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::{photon_number_probs, DEFAULT_REP_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkrParams {
    pub rep_rate_hz: f64,
    pub p_sift: f64,
    pub f_ec: f64,
    pub eta_encoder: f64,
    pub eta_decoder: f64,
    pub eta_detector: f64,
    pub attenuation_db_per_km: f64,
    pub mean_photon_number: f64,
    pub g2_zero: f64,
    /// Dark-count probability per slot.
    pub p_dc: f64,
    pub p_mis: f64,
}

impl Default for SkrParams {
    fn default() -> Self {
        SkrParams {
            rep_rate_hz: DEFAULT_REP_RATE_HZ,
            p_sift: 0.5,
            f_ec: 1.16,
            eta_encoder: 0.34,
            eta_decoder: 0.8,
            eta_detector: 0.8,
            attenuation_db_per_km: 0.18,
            mean_photon_number: 0.138,
            g2_zero: 0.005,
            p_dc: 50.0 / DEFAULT_REP_RATE_HZ,
            p_mis: 0.0069,
        }
    }
}

impl SkrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate_hz.is_finite() && self.rep_rate_hz > 0.0) {
            return Err(Error::domain(format!("rep_rate_hz must be > 0, got {}", self.rep_rate_hz)));
        }
        for (name, v) in [
            ("p_sift", self.p_sift),
            ("eta_encoder", self.eta_encoder),
            ("eta_decoder", self.eta_decoder),
            ("eta_detector", self.eta_detector),
            ("p_dc", self.p_dc),
            ("p_mis", self.p_mis),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(Error::domain(format!("f_ec must be >= 1, got {}", self.f_ec)));
        }
        if !(self.attenuation_db_per_km >= 0.0 && self.attenuation_db_per_km.is_finite()) {
            return Err(Error::domain("attenuation_db_per_km must be >= 0"));
        }
        photon_number_probs(self.mean_photon_number, self.g2_zero).map(|_| ())
    }

    /// Product of the loss factors outside the fiber channel.
    pub fn fixed_efficiency(&self) -> f64 {
        self.eta_encoder * self.eta_decoder * self.eta_detector
    }
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkrPoint {
    pub distance_km: f64,
    pub loss_db: f64,
    pub eta_total: f64,
    pub p_c: f64,
    /// Click probabilities from 0, 1 and 2 photon pulses.
    pub p_c_n: [f64; 3],
    pub e_tot: f64,
    /// Single-photon error bound, clamped to [0, 1] for the entropy term.
    pub e1_bar: f64,
    /// True when the unclamped bound fell outside [0, 1].
    pub e1_saturated: bool,
    pub pc1_lower: f64,
    /// Key rate before clamping at zero, bits per second.
    pub raw_rate_bps: f64,
    pub skr_bps: f64,
}

pub fn skr_point(params: &SkrParams, distance_km: f64) -> Result<SkrPoint> {
    if !(distance_km >= 0.0 && distance_km.is_finite()) {
        return Err(Error::invalid(format!("distance must be >= 0 km, got {distance_km}")));
    }
    let mut p = skr_at_loss(params, params.attenuation_db_per_km * distance_km)?;
    p.distance_km = distance_km;
    Ok(p)
}

/// Evaluates the key rate at a given fiber-channel loss in dB.
pub fn skr_at_loss(params: &SkrParams, channel_loss_db: f64) -> Result<SkrPoint> {
    params.validate()?;
    if !(channel_loss_db >= 0.0) {
        return Err(Error::invalid(format!("channel loss must be >= 0 dB, got {channel_loss_db}")));
    }
    let probs = photon_number_probs(params.mean_photon_number, params.g2_zero)?;
    let pn = [probs.p0, probs.p1, probs.p2];
    let eta = params.fixed_efficiency() * 10f64.powf(-channel_loss_db / 10.0);
    let p_dc = params.p_dc;

    let mut p_c_n = [0.0; 3];
    let mut err_weighted = 0.0;
    for n in 0..3 {
        let lost = (1.0 - eta).powi(n as i32);
        // written out for n = 0 so vacuum clicks equal p_dc exactly
        let click = if n == 0 { p_dc } else { 1.0 - (1.0 - p_dc) * lost };
        p_c_n[n] = pn[n] * click;
        if click > 0.0 {
            let e_n = (p_dc / 2.0 + params.p_mis * (1.0 - lost)) / click;
            err_weighted += e_n * p_c_n[n];
        }
    }
    let p_c: f64 = p_c_n.iter().sum();
    let e_tot = if p_c > 0.0 { (err_weighted / p_c).clamp(0.0, 1.0) } else { 0.0 };

    let e1_denominator = 1.0 - (1.0 - p_dc) * (1.0 - eta);
    let e1_raw = if e1_denominator > 0.0 {
        (e_tot * p_c - pn[0] * p_dc / 2.0) / e1_denominator
    } else {
        0.0
    };
    let e1_saturated = !(0.0..=1.0).contains(&e1_raw);
    let e1_bar = e1_raw.clamp(0.0, 1.0);
    let pc1_lower = p_c - pn[0] * p_dc - pn[2];

    let raw_rate_bps = params.rep_rate_hz
        * params.p_sift
        * (pc1_lower * (1.0 - binary_entropy(e1_bar)?) - params.f_ec * p_c * binary_entropy(e_tot)?);
    Ok(SkrPoint {
        distance_km: 0.0,
        loss_db: channel_loss_db,
        eta_total: eta,
        p_c,
        p_c_n,
        e_tot,
        e1_bar,
        e1_saturated,
        pc1_lower,
        raw_rate_bps,
        skr_bps: raw_rate_bps.max(0.0),
    })
}

/// Evaluates `d_min, d_min + step, ...` up to `d_max` inclusive.
pub fn skr_sweep(params: &SkrParams, d_min: f64, d_max: f64, step: f64) -> Result<Vec<SkrPoint>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("sweep step must be > 0, got {step}")));
    }
    if !(d_min <= d_max) {
        return Err(Error::invalid(format!("sweep range is empty: {d_min} > {d_max}")));
    }
    let n = ((d_max - d_min) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|k| skr_point(params, d_min + k as f64 * step)).collect()
}

pub const LOSS_TOLERANCE_DB: f64 = 1e-3;

/// Channel loss at which the key rate reaches zero, by bisection.
pub fn max_tolerable_loss(params: &SkrParams) -> Result<f64> {
    let rate = |loss: f64| skr_at_loss(params, loss).map(|p| p.raw_rate_bps);
    if rate(0.0)? <= 0.0 {
        return Err(Error::NoPositiveRate);
    }
    let mut lo = 0.0;
    let mut hi = 10.0;
    while rate(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::Precondition("key rate stays positive beyond 10^4 dB".into()));
        }
    }
    while hi - lo > LOSS_TOLERANCE_DB / 4.0 {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
