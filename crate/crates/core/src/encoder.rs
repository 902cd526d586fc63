//! Sagnac polarization encoder.
//!
//! Each slot of period `T` is split at `delta_t` into an early (clockwise) and
//! a late (counterclockwise) half-window. A photon emitted inside `[0, delta_t)`
//! receives its own slot's phase; outside, it takes the phase of the adjacent
//! slot wholesale and is flagged as mismodulated.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::polarization::{Bb84Symbol, JonesVector};
use crate::source::DEFAULT_REP_RATE_HZ;

/// The repeating 16-symbol pattern used in the encoding measurements.
pub const DEFAULT_SEQUENCE: [Bb84Symbol; 16] = {
    use Bb84Symbol::*;
    [L, A, R, D, A, R, D, L, A, A, L, D, R, D, L, R]
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModulationSequence(Vec<Bb84Symbol>);

impl ModulationSequence {
    pub fn new(symbols: Vec<Bb84Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidSequence("sequence must contain at least one symbol".into()));
        }
        Ok(ModulationSequence(symbols))
    }

    pub fn symbols(&self) -> &[Bb84Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Symbol applied in `slot_index`, counting slots from the start of a run.
    pub fn symbol_at(&self, slot_index: i64) -> Bb84Symbol {
        self.0[self.position(slot_index)]
    }

    pub fn position(&self, slot_index: i64) -> usize {
        slot_index.rem_euclid(self.0.len() as i64) as usize
    }

    /// Sequence positions (0-based) at which `symbol` is encoded.
    pub fn positions_of(&self, symbol: Bb84Symbol) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| (s == symbol).then_some(i))
            .collect()
    }
}

impl Default for ModulationSequence {
    fn default() -> Self {
        ModulationSequence(DEFAULT_SEQUENCE.to_vec())
    }
}

impl fmt::Display for ModulationSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for ModulationSequence {
    type Err = Error;

    /// Parses letters such as `"LARD"`; commas and whitespace are ignored.
    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .filter(|c| !(c.is_whitespace() || *c == ','))
            .map(|c| {
                Bb84Symbol::from_letter(c.to_ascii_uppercase())
                    .ok_or_else(|| Error::InvalidSequence(format!("unknown symbol `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        ModulationSequence::new(symbols)
    }
}

impl Serialize for ModulationSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModulationSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderParams {
    pub v_pi: f64,
    pub delta_t_ps: f64,
    pub slot_period_ps: f64,
    /// `inf` for an ideal modulator.
    #[serde(with = "crate::serde_float")]
    pub extinction_ratio_db: f64,
    pub total_loss_db: f64,
    pub p_mis: f64,
    pub filter_window_ps: f64,
    /// Disable to keep every event regardless of its arrival time.
    pub temporal_filter: bool,
}

impl Default for EncoderParams {
    fn default() -> Self {
        let period = 1e12 / DEFAULT_REP_RATE_HZ;
        EncoderParams {
            v_pi: 4.2,
            delta_t_ps: period / 2.0,
            slot_period_ps: period,
            extinction_ratio_db: 27.7,
            total_loss_db: 5.17,
            p_mis: 0.0069,
            filter_window_ps: 2650.0,
            temporal_filter: true,
        }
    }
}

impl EncoderParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.slot_period_ps.is_finite() && p.slot_period_ps > 0.0) {
            return Err(Error::domain(format!("slot period must be > 0, got {}", p.slot_period_ps)));
        }
        if !(p.delta_t_ps > 0.0 && p.delta_t_ps <= p.slot_period_ps) {
            return Err(Error::domain(format!(
                "delta_t must satisfy 0 < delta_t <= T ({}), got {}",
                p.slot_period_ps, p.delta_t_ps
            )));
        }
        if !(p.filter_window_ps >= 0.0 && p.filter_window_ps <= p.delta_t_ps) {
            return Err(Error::domain(format!(
                "filter window must lie in [0, delta_t = {}], got {}",
                p.delta_t_ps, p.filter_window_ps
            )));
        }
        if !(p.v_pi.is_finite() && p.v_pi > 0.0) {
            return Err(Error::domain(format!("V_pi must be > 0, got {}", p.v_pi)));
        }
        if !(p.total_loss_db.is_finite() && p.total_loss_db >= 0.0) {
            return Err(Error::domain(format!("encoder loss must be >= 0 dB, got {}", p.total_loss_db)));
        }
        if p.extinction_ratio_db.is_nan() || p.extinction_ratio_db < 0.0 {
            return Err(Error::domain(format!(
                "extinction ratio must be >= 0 dB, got {}",
                p.extinction_ratio_db
            )));
        }
        if !(0.0..0.5).contains(&p.p_mis) {
            return Err(Error::domain(format!("p_mis must lie in [0, 0.5), got {}", p.p_mis)));
        }
        Ok(())
    }

    /// Leaked orthogonal power relative to the intended state, `10^(-ER/10)`.
    pub fn leakage(&self) -> f64 {
        if self.extinction_ratio_db.is_infinite() {
            0.0
        } else {
            10f64.powf(-self.extinction_ratio_db / 10.0)
        }
    }
}

/// Drive voltage applying the symbol's phase, `phase / pi * V_pi`.
pub fn voltage_for_symbol(symbol: Bb84Symbol, params: &EncoderParams) -> f64 {
    symbol.phase() / std::f64::consts::PI * params.v_pi
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectivePhase {
    pub phase: f64,
    pub symbol: Bb84Symbol,
    pub mismodulated: bool,
}

/// Phase actually received by a photon emitted `emission_time_ps` after the
/// start of `slot_index` (0-based).
pub fn effective_phase(
    emission_time_ps: f64,
    slot_index: i64,
    seq: &ModulationSequence,
    params: &EncoderParams,
) -> EffectivePhase {
    let (slot, mismodulated) = if emission_time_ps < 0.0 {
        (slot_index - 1, true)
    } else if emission_time_ps >= params.delta_t_ps {
        (slot_index + 1, true)
    } else {
        (slot_index, false)
    };
    let symbol = seq.symbol_at(slot);
    EffectivePhase {
        phase: symbol.phase(),
        symbol,
        mismodulated,
    }
}

/// Output state for an applied phase, including extinction-ratio leakage.
///
/// The leaked power `eps` enters as a real-amplitude admixture of the
/// orthogonal state, so the orthogonal analyzer sees `eps/(1+eps)` while
/// analyzers of the conjugate basis stay at 1/2.
pub fn output_state(phase: f64, params: &EncoderParams) -> JonesVector {
    let eps = params.leakage();
    let keep = (1.0 / (1.0 + eps)).sqrt();
    let leak = (eps / (1.0 + eps)).sqrt();
    // keep|phi> + leak|phi+pi> = ((keep+leak), (keep-leak) e^{i phi}) / sqrt(2)
    let s = std::f64::consts::FRAC_1_SQRT_2;
    JonesVector::new(
        Complex64::new((keep + leak) * s, 0.0),
        Complex64::from_polar((keep - leak) * s, phase),
    )
}

/// True iff the arrival time lies inside the temporal filter window `[0, window]`.
pub fn accept_by_filter(time_ps: f64, params: &EncoderParams) -> bool {
    !params.temporal_filter || (0.0..=params.filter_window_ps).contains(&time_ps)
}

/// `10^(-loss_db/10)`.
pub fn encoder_transmission(params: &EncoderParams) -> f64 {
    db_to_transmission(params.total_loss_db)
}

pub fn db_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}
