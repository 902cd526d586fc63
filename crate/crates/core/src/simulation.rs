//! End-to-end Monte Carlo of source, encoder, channel and decoder.
//!
//! The run is split into fixed chunks of slots. Chunk `k` draws from the
//! ChaCha stream `k` of the run seed, and the merged events are sorted by
//! `(slot, time)`, so a record only depends on `(params, n_slots, seed)` and
//! never on how many worker threads produced it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_transmission, decode, ChannelParams, DetectorParams};
use crate::encoder::{effective_phase, encoder_transmission, output_state, EncoderParams, ModulationSequence};
use crate::error::{Error, Result};
use crate::polarization::Bb84Symbol;
use crate::source::{EmissionTimeSampler, SourceParams};

/// Slots per RNG stream.
pub const CHUNK_SLOTS: u64 = 1 << 16;

pub const DEFAULT_MAX_EVENTS: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub source: SourceParams,
    pub encoder: EncoderParams,
    pub channel: ChannelParams,
    pub detector: DetectorParams,
    pub sequence: ModulationSequence,
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.encoder.validate()?;
        self.channel.validate()?;
        self.detector.validate()?;
        self.source.photon_number_probs()?;
        let period = self.source.slot_period_ps();
        if (self.encoder.slot_period_ps - period).abs() > 1e-6 * period {
            return Err(Error::domain(format!(
                "encoder slot period {} ps does not match 1/R = {period} ps",
                self.encoder.slot_period_ps
            )));
        }
        Ok(())
    }

    /// Sets the repetition rate and keeps the encoder timing at `T` and `T/2`.
    pub fn with_rep_rate(mut self, rep_rate_hz: f64) -> Self {
        self.source.rep_rate_hz = rep_rate_hz;
        self.encoder.slot_period_ps = 1e12 / rep_rate_hz;
        self.encoder.delta_t_ps = self.encoder.slot_period_ps / 2.0;
        self
    }

    /// Survival probability of one photon through encoder, fiber, decoder and detector.
    pub fn total_efficiency(&self) -> f64 {
        encoder_transmission(&self.encoder)
            * channel_transmission(&self.channel)
            * self.detector.decoder_efficiency
            * self.detector.detector_efficiency
    }

    /// Expected recorded events per slot (photon clicks plus darks in four channels).
    pub fn expected_events_per_slot(&self) -> Result<f64> {
        let probs = self.source.photon_number_probs()?;
        let mean_photons = probs.p1 + 2.0 * probs.p2;
        Ok(mean_photons * self.total_efficiency()
            + self.detector.dark_probability_per_slot(self.source.rep_rate_hz))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub slot_index: u64,
    pub seq_pos: u32,
    pub channel: Bb84Symbol,
    pub time_ps: f64,
    /// Only populated by simulations run in debug mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_dark: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub n_slots: u64,
    pub seed: Option<u64>,
    pub params: ExperimentParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub events: Vec<DetectionEvent>,
    pub metadata: RecordMetadata,
}

impl DetectionRecord {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn slot_period_ps(&self) -> f64 {
        self.metadata.params.encoder.slot_period_ps
    }

    pub fn sequence(&self) -> &ModulationSequence {
        &self.metadata.params.sequence
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Keep the dark/photon origin flag on every event.
    pub debug: bool,
    pub max_events: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            threads: None,
            debug: false,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }
}

pub fn simulate_run(params: &ExperimentParams, n_slots: u64, seed: u64) -> Result<DetectionRecord> {
    simulate_run_with(params, n_slots, seed, &SimulationOptions::default())
}

pub fn simulate_run_with(
    params: &ExperimentParams,
    n_slots: u64,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<DetectionRecord> {
    if n_slots == 0 {
        return Err(Error::invalid("n_slots must be >= 1"));
    }
    params.validate()?;
    let ctx = ChunkContext::new(params, n_slots, opts)?;
    let n_chunks = n_slots.div_ceil(CHUNK_SLOTS);

    let run = || -> Result<Vec<Vec<DetectionEvent>>> {
        (0..n_chunks)
            .into_par_iter()
            .map(|k| ctx.simulate_chunk(seed, k))
            .collect()
    };
    let chunks = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    let total: usize = chunks.iter().map(Vec::len).sum();
    if total > opts.max_events {
        return Err(Error::Resource(format!(
            "{total} events exceed the limit of {}",
            opts.max_events
        )));
    }
    let mut events = Vec::with_capacity(total);
    for c in chunks {
        events.extend(c);
    }
    events.sort_by(|a, b| {
        a.slot_index
            .cmp(&b.slot_index)
            .then(a.time_ps.total_cmp(&b.time_ps))
    });

    Ok(DetectionRecord {
        events,
        metadata: RecordMetadata {
            n_slots,
            seed: Some(seed),
            params: params.clone(),
        },
    })
}

struct ChunkContext<'a> {
    params: &'a ExperimentParams,
    n_slots: u64,
    period: f64,
    p1: f64,
    p12: f64,
    efficiency: f64,
    dark_per_slot: f64,
    sampler: EmissionTimeSampler,
    debug: bool,
    max_events: usize,
}

impl<'a> ChunkContext<'a> {
    fn new(params: &'a ExperimentParams, n_slots: u64, opts: &SimulationOptions) -> Result<Self> {
        let probs = params.source.photon_number_probs()?;
        Ok(ChunkContext {
            params,
            n_slots,
            period: params.encoder.slot_period_ps,
            p1: probs.p1,
            p12: probs.p1 + probs.p2,
            efficiency: params.total_efficiency(),
            dark_per_slot: params.detector.dark_probability_per_slot(params.source.rep_rate_hz),
            sampler: EmissionTimeSampler::new(&params.source)?,
            debug: opts.debug,
            max_events: opts.max_events,
        })
    }

    fn event(&self, slot: u64, channel: Bb84Symbol, time_ps: f64, dark: bool) -> DetectionEvent {
        DetectionEvent {
            slot_index: slot,
            seq_pos: self.params.sequence.position(slot as i64) as u32,
            channel,
            time_ps,
            is_dark: self.debug.then_some(dark),
        }
    }

    fn simulate_chunk(&self, seed: u64, chunk: u64) -> Result<Vec<DetectionEvent>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let start = chunk * CHUNK_SLOTS;
        let end = (start + CHUNK_SLOTS).min(self.n_slots);
        let enc = &self.params.encoder;
        let seq = &self.params.sequence;
        let mut events = Vec::new();

        for slot in start..end {
            let u: f64 = rng.random();
            let photons = if u < self.p1 {
                1
            } else if u < self.p12 {
                2
            } else {
                0
            };
            for _ in 0..photons {
                if rng.random::<f64>() >= self.efficiency {
                    continue;
                }
                let t = self.sampler.sample(&mut rng);
                let mut symbol = effective_phase(t, slot as i64, seq, enc).symbol;
                if rng.random::<f64>() < enc.p_mis {
                    symbol = symbol.orthogonal();
                }
                let channel = decode(&output_state(symbol.phase(), enc), &mut rng);

                // Arrival times outside the slot belong to a neighboring slot.
                let shift = (t / self.period).floor();
                let target = slot as i64 + shift as i64;
                if target < 0 || target as u64 >= self.n_slots {
                    continue;
                }
                let time = (t - shift * self.period).clamp(0.0, self.period.next_down());
                events.push(self.event(target as u64, channel, time, false));
            }
        }

        if self.dark_per_slot > 0.0 {
            let mean = self.dark_per_slot * (end - start) as f64;
            let n_dark = Poisson::new(mean)
                .map_err(|e| Error::domain(format!("dark counts: {e}")))?
                .sample(&mut rng) as u64;
            for _ in 0..n_dark {
                let slot = rng.random_range(start..end);
                let channel = Bb84Symbol::ALL[rng.random_range(0..4)];
                let time = rng.random::<f64>() * self.period;
                events.push(self.event(slot, channel, time, true));
            }
        }

        if events.len() > self.max_events {
            return Err(Error::Resource(format!(
                "chunk {chunk} produced {} events, limit is {}",
                events.len(),
                self.max_events
            )));
        }
        Ok(events)
    }
}

/// Event counts partitioned by channel, sequence position and time bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotHistogram {
    pub bin_width_ps: f64,
    pub n_bins: usize,
    pub sequence_length: usize,
    counts: Vec<u64>,
}

impl SlotHistogram {
    fn offset(&self, channel: Bb84Symbol, seq_pos: usize) -> usize {
        (channel.index() * self.sequence_length + seq_pos) * self.n_bins
    }

    pub fn bins(&self, channel: Bb84Symbol, seq_pos: usize) -> &[u64] {
        let o = self.offset(channel, seq_pos);
        &self.counts[o..o + self.n_bins]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_starts_ps(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_bins).map(|i| i as f64 * self.bin_width_ps)
    }
}

pub fn histogram(record: &DetectionRecord, bin_width_ps: f64) -> Result<SlotHistogram> {
    let period = record.slot_period_ps();
    if !(bin_width_ps.is_finite() && bin_width_ps > 0.0 && bin_width_ps <= period) {
        return Err(Error::invalid(format!(
            "bin width must lie in (0, {period}] ps, got {bin_width_ps}"
        )));
    }
    let n_bins = (period / bin_width_ps).ceil() as usize;
    let sequence_length = record.sequence().len();
    let mut h = SlotHistogram {
        bin_width_ps,
        n_bins,
        sequence_length,
        counts: vec![0; 4 * sequence_length * n_bins],
    };
    for e in &record.events {
        let pos = e.seq_pos as usize;
        if pos >= sequence_length {
            return Err(Error::invalid(format!(
                "event in slot {} has sequence position {pos} beyond length {sequence_length}",
                e.slot_index
            )));
        }
        let bin = ((e.time_ps / bin_width_ps).floor().max(0.0) as usize).min(n_bins - 1);
        let o = h.offset(e.channel, pos);
        h.counts[o + bin] += 1;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> ExperimentParams {
        let mut p = ExperimentParams::default();
        p.detector.dark_rate_hz = 0.0;
        p
    }

    #[test]
    fn vacuum_without_darks_is_empty() {
        let mut p = quiet();
        p.source.mean_photon_number = 0.0;
        let r = simulate_run(&p, 10_000, 1).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn zero_slots_rejected() {
        assert!(matches!(
            simulate_run(&ExperimentParams::default(), 0, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn invalid_params_propagate() {
        let mut p = ExperimentParams::default();
        p.source.mean_photon_number = 1.8;
        p.source.g2_zero = 0.9;
        assert!(matches!(simulate_run(&p, 10, 1), Err(Error::ParameterDomain(_))));
        let mut p = ExperimentParams::default();
        p.encoder.slot_period_ps = 5000.0;
        p.encoder.delta_t_ps = 2500.0;
        p.encoder.filter_window_ps = 2000.0;
        assert!(simulate_run(&p, 10, 1).is_err());
    }

    #[test]
    fn record_invariants_hold() {
        let r = simulate_run(&ExperimentParams::default(), 200_000, 5).unwrap();
        assert!(!r.is_empty());
        let period = r.slot_period_ps();
        for e in &r.events {
            assert_eq!(e.seq_pos as u64, e.slot_index % 16);
            assert!(e.time_ps >= 0.0 && e.time_ps < period);
            assert!(e.slot_index < 200_000);
            assert!(e.is_dark.is_none());
        }
        assert!(r.events.windows(2).all(|w| w[0].slot_index <= w[1].slot_index));
    }

    #[test]
    fn same_seed_same_record() {
        let p = ExperimentParams::default();
        let a = simulate_run(&p, 150_000, 9).unwrap();
        let b = simulate_run(&p, 150_000, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_run(&p, 150_000, 10).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn event_storage_limit() {
        let opts = SimulationOptions {
            max_events: 10,
            ..SimulationOptions::default()
        };
        let r = simulate_run_with(&ExperimentParams::default(), 100_000, 1, &opts);
        assert!(matches!(r, Err(Error::Resource(_))));
    }

    #[test]
    fn histogram_single_event() {
        let p = ExperimentParams::default();
        let r = DetectionRecord {
            events: vec![DetectionEvent {
                slot_index: 0,
                seq_pos: 0,
                channel: Bb84Symbol::D,
                time_ps: 100.0,
                is_dark: None,
            }],
            metadata: RecordMetadata {
                n_slots: 1,
                seed: None,
                params: p,
            },
        };
        let h = histogram(&r, 100.0).unwrap();
        assert_eq!(h.total(), 1);
        let nonzero: Vec<_> = h.bins(Bb84Symbol::D, 0).iter().enumerate().filter(|(_, &c)| c > 0).collect();
        assert_eq!(nonzero, vec![(1, &1)]);
        assert!(histogram(&r, 0.0).is_err());
    }

    #[test]
    fn histogram_conserves_mass() {
        let r = simulate_run(&ExperimentParams::default(), 100_000, 2).unwrap();
        let h = histogram(&r, 100.0).unwrap();
        assert_eq!(h.total(), r.len() as u64);
        assert_eq!(h.n_bins, 66);
        let empty = DetectionRecord {
            events: vec![],
            metadata: r.metadata.clone(),
        };
        assert_eq!(histogram(&empty, 100.0).unwrap().total(), 0);
    }
}
