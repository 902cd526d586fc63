//! Shared inputs for the pipeline benchmarks in `benches/`.

use polqkd_core::analysis::g2::CorrelationHistogram;
use polqkd_core::fixtures;

/// Histogram covering the +/-110 ns fit window at 50 ps bins.
pub fn g2_input(seed: u64) -> CorrelationHistogram {
    fixtures::g2_histogram(&fixtures::default_g2_truth(), -110.0, 110.0, 0.05, seed)
        .expect("fixture parameters are valid")
}
