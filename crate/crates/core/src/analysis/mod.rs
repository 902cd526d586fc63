//! Measurement analyses: QBER and encoding agreement, g2 fitting, and
//! polarization stability with noise-spectrum fitting.

pub mod fit;
pub mod g2;
pub mod qber;
pub mod spectrum;
pub mod stability;

pub use g2::{g2_fit, g2_model, CorrelationHistogram, G2Fit, G2FitParams};
pub use qber::{
    encoding_agreement, mean_qber, qber_per_slot, qber_report, FilterSummary, QberReport, QberSummary,
    SlotCounts,
};
pub use spectrum::{nsd_fit, periodogram, NsdFit, NsdOptions, Spectrum, Window};
pub use stability::{stability_metrics, StabilityMetrics, StokesSeries};
