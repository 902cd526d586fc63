//! Simulation and analysis toolkit for a BB84 polarization encoder driven by
//! a pulsed single-photon source.
//!
//! The simulator draws photon numbers and emission times per clock slot,
//! applies the phase modulation and its timing imperfections, and projects
//! the output onto a four-detector passive decoder. The analysis side turns
//! detection records, correlation histograms and Stokes time series into
//! QBER, g2(0) and stability figures, and [`skr`] evaluates the asymptotic
//! key rate.

// `!(x > y)` guards are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod encoder;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod polarization;
pub mod simulation;
pub mod skr;
pub mod source;
pub mod special;

pub(crate) mod serde_float;

pub use channel::{ChannelParams, DetectorParams};
pub use encoder::{EncoderParams, ModulationSequence};
pub use error::{Error, Result};
pub use polarization::{Basis, Bb84Symbol, JonesVector, StokesVector};
pub use simulation::{
    histogram, simulate_run, simulate_run_with, DetectionEvent, DetectionRecord, ExperimentParams,
    RecordMetadata, SimulationOptions, SlotHistogram,
};
pub use skr::{max_tolerable_loss, skr_point, skr_sweep, SkrParams, SkrPoint};
pub use source::SourceParams;
