//! Per-slot QBER and encoding agreement from temporally filtered counts.

use serde::{Deserialize, Serialize};

use crate::encoder::{accept_by_filter, ModulationSequence};
use crate::error::{Error, Result};
use crate::polarization::{projection_prob, Basis, Bb84Symbol};
use crate::simulation::DetectionRecord;

/// Filtered counts `c[pos][channel]`, channels in D, A, R, L order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCounts {
    counts: Vec<[u64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub total_events: u64,
    pub accepted: u64,
    pub discarded: u64,
    /// `None` when there were no events.
    pub discard_fraction: Option<f64>,
}

impl SlotCounts {
    pub fn new(counts: Vec<[u64; 4]>) -> Self {
        SlotCounts { counts }
    }

    pub fn zeros(sequence_length: usize) -> Self {
        SlotCounts {
            counts: vec![[0; 4]; sequence_length],
        }
    }

    /// Integrates the record's events inside the temporal filter window.
    pub fn from_record(record: &DetectionRecord) -> Result<(Self, FilterSummary)> {
        let enc = &record.metadata.params.encoder;
        let len = record.sequence().len();
        let mut counts = SlotCounts::zeros(len);
        let mut accepted = 0u64;
        for e in &record.events {
            let pos = e.seq_pos as usize;
            if pos >= len {
                return Err(Error::invalid(format!(
                    "event in slot {} has sequence position {pos} beyond length {len}",
                    e.slot_index
                )));
            }
            if accept_by_filter(e.time_ps, enc) {
                counts.counts[pos][e.channel.index()] += 1;
                accepted += 1;
            }
        }
        let total = record.events.len() as u64;
        let summary = FilterSummary {
            total_events: total,
            accepted,
            discarded: total - accepted,
            discard_fraction: (total > 0).then(|| (total - accepted) as f64 / total as f64),
        };
        Ok((counts, summary))
    }

    pub fn sequence_length(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, pos: usize, channel: Bb84Symbol) -> u64 {
        self.counts[pos][channel.index()]
    }

    pub fn row(&self, pos: usize) -> [u64; 4] {
        self.counts[pos]
    }

    pub fn rows(&self) -> &[[u64; 4]] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

fn check_lengths(counts: &SlotCounts, seq: &ModulationSequence) -> Result<()> {
    if counts.sequence_length() != seq.len() {
        return Err(Error::InvalidSequence(format!(
            "counts cover {} positions but the sequence has {}",
            counts.sequence_length(),
            seq.len()
        )));
    }
    Ok(())
}

/// Wrong-state counts over all counts in the encoded basis of slot `i`.
pub fn qber_per_slot(counts: &SlotCounts, seq: &ModulationSequence, i: usize) -> Result<f64> {
    check_lengths(counts, seq)?;
    if i >= seq.len() {
        return Err(Error::invalid(format!("slot {i} beyond sequence length {}", seq.len())));
    }
    let symbol = seq.symbols()[i];
    let right = counts.get(i, symbol);
    let wrong = counts.get(i, symbol.orthogonal());
    if right + wrong == 0 {
        return Err(Error::UndefinedSlot { slot: i });
    }
    Ok(wrong as f64 / (right + wrong) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QberSummary {
    pub per_slot: Vec<f64>,
    pub overall: f64,
    pub x_basis: Option<f64>,
    pub y_basis: Option<f64>,
}

/// Unweighted means of the per-slot QBERs, overall and per encoded basis.
pub fn mean_qber(counts: &SlotCounts, seq: &ModulationSequence) -> Result<QberSummary> {
    let per_slot = (0..seq.len())
        .map(|i| qber_per_slot(counts, seq, i))
        .collect::<Result<Vec<_>>>()?;
    let mean_where = |basis: Option<Basis>| {
        let vals: Vec<f64> = per_slot
            .iter()
            .zip(seq.symbols())
            .filter(|(_, s)| basis.is_none_or(|b| s.basis() == b))
            .map(|(q, _)| *q)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Ok(QberSummary {
        overall: mean_where(None).unwrap_or(0.0),
        x_basis: mean_where(Some(Basis::X)),
        y_basis: mean_where(Some(Basis::Y)),
        per_slot,
    })
}

/// Lenient QBER evaluation: undefined slots are reported and left out of the means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QberReport {
    pub per_slot: Vec<Option<f64>>,
    pub overall: Option<f64>,
    pub x_basis: Option<f64>,
    pub y_basis: Option<f64>,
    pub undefined_slots: Vec<usize>,
}

pub fn qber_report(counts: &SlotCounts, seq: &ModulationSequence) -> Result<QberReport> {
    check_lengths(counts, seq)?;
    let mut per_slot = Vec::with_capacity(seq.len());
    let mut undefined_slots = Vec::new();
    for i in 0..seq.len() {
        match qber_per_slot(counts, seq, i) {
            Ok(q) => per_slot.push(Some(q)),
            Err(Error::UndefinedSlot { slot }) => {
                undefined_slots.push(slot);
                per_slot.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let mean_where = |basis: Option<Basis>| {
        let vals: Vec<f64> = per_slot
            .iter()
            .zip(seq.symbols())
            .filter(|(_, s)| basis.is_none_or(|b| s.basis() == b))
            .filter_map(|(q, _)| *q)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Ok(QberReport {
        overall: mean_where(None),
        x_basis: mean_where(Some(Basis::X)),
        y_basis: mean_where(Some(Basis::Y)),
        per_slot,
        undefined_slots,
    })
}

/// Column-per-state 4x4 matrix, `m[channel][state]`.
pub type EncodingMatrix = [[f64; 4]; 4];

/// Unit-normalized ideal decoder response for each encoded state.
pub fn theoretical_matrix() -> EncodingMatrix {
    let mut m = [[0.0; 4]; 4];
    for state in Bb84Symbol::ALL {
        let col: Vec<f64> = Bb84Symbol::ALL
            .iter()
            .map(|&c| projection_prob(&state.state(), c).expect("basis states are normalized"))
            .collect();
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (c, v) in col.iter().enumerate() {
            m[c][state.index()] = v / norm;
        }
    }
    m
}

/// Sums counts over the slots encoding each state and normalizes each column.
pub fn experimental_matrix(counts: &SlotCounts, seq: &ModulationSequence) -> Result<EncodingMatrix> {
    check_lengths(counts, seq)?;
    let mut m = [[0.0; 4]; 4];
    for state in Bb84Symbol::ALL {
        let positions = seq.positions_of(state);
        if positions.is_empty() {
            return Err(Error::InvalidSequence(format!("state {state} is never encoded")));
        }
        let mut col = [0u64; 4];
        for p in positions {
            for (c, v) in counts.row(p).iter().enumerate() {
                col[c] += v;
            }
        }
        let norm = col.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Precondition(format!("no counts for slots encoding {state}")));
        }
        for (c, &v) in col.iter().enumerate() {
            m[c][state.index()] = v as f64 / norm;
        }
    }
    Ok(m)
}

/// `F = 1 - ||M_exp - M_theo||_F / ||M_theo||_F`.
pub fn encoding_agreement(counts: &SlotCounts, seq: &ModulationSequence) -> Result<f64> {
    let exp = experimental_matrix(counts, seq)?;
    let theo = theoretical_matrix();
    let mut diff = 0.0;
    let mut reference = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            diff += (exp[i][j] - theo[i][j]).powi(2);
            reference += theo[i][j].powi(2);
        }
    }
    Ok(1.0 - diff.sqrt() / reference.sqrt())
}
