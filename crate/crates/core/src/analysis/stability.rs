//! Polarization stability of a Stokes time series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::StokesVector;

/// Uniformly sampled Stokes vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesSeries {
    times_s: Vec<f64>,
    vectors: Vec<StokesVector>,
}

pub const MAX_INTERVAL_JITTER: f64 = 0.1;

impl StokesSeries {
    pub fn new(times_s: Vec<f64>, vectors: Vec<StokesVector>) -> Result<Self> {
        if times_s.len() != vectors.len() {
            return Err(Error::invalid("timestamp and vector counts differ"));
        }
        if times_s.len() < 2 {
            return Err(Error::Precondition("need at least two Stokes samples".into()));
        }
        if let Some(k) = times_s.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!(
                "timestamps must be strictly increasing (sample {} at {} s follows {} s)",
                k + 1,
                times_s[k + 1],
                times_s[k]
            )));
        }
        let n = times_s.len();
        let mean_dt = (times_s[n - 1] - times_s[0]) / (n - 1) as f64;
        if let Some(dt) = times_s
            .windows(2)
            .map(|w| w[1] - w[0])
            .find(|dt| (dt - mean_dt).abs() >= MAX_INTERVAL_JITTER * mean_dt)
        {
            return Err(Error::invalid(format!(
                "sampling interval {dt} s deviates more than 10% from the mean {mean_dt} s"
            )));
        }
        Ok(StokesSeries { times_s, vectors })
    }

    pub fn times(&self) -> &[f64] {
        &self.times_s
    }

    pub fn vectors(&self) -> &[StokesVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn mean_interval_s(&self) -> f64 {
        let n = self.times_s.len();
        (self.times_s[n - 1] - self.times_s[0]) / (n - 1) as f64
    }

    /// Rescales every sample to unit length.
    pub fn normalized(&self) -> Result<Self> {
        let vectors = self
            .vectors
            .iter()
            .map(|v| {
                let n = v.norm();
                if n > 0.0 {
                    Ok(v.scaled(1.0 / n))
                } else {
                    Err(Error::DegenerateSeries("zero Stokes vector".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StokesSeries {
            times_s: self.times_s.clone(),
            vectors,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMetrics {
    /// Normalized mean Stokes vector.
    pub s_avg: StokesVector,
    /// `S_i(t) - mean(S_i)` per sample.
    pub component_deviations: Vec<[f64; 3]>,
    /// `1 - S(t) . S_avg` per sample.
    pub projection_error: Vec<f64>,
    pub mean_error: f64,
    pub max_error: f64,
}

pub const UNIT_TOLERANCE: f64 = 1e-6;

pub fn stability_metrics(series: &StokesSeries) -> Result<StabilityMetrics> {
    if let Some((k, v)) = series
        .vectors
        .iter()
        .enumerate()
        .find(|(_, v)| (v.norm() - 1.0).abs() > UNIT_TOLERANCE)
    {
        return Err(Error::invalid(format!(
            "Stokes sample {k} has length {} (expected normalized vectors)",
            v.norm()
        )));
    }
    let n = series.len() as f64;
    let mean = series
        .vectors
        .iter()
        .fold(StokesVector::default(), |acc, v| acc + *v)
        .scaled(1.0 / n);
    let norm = mean.norm();
    if norm < 1e-12 {
        return Err(Error::DegenerateSeries("mean Stokes vector vanishes".into()));
    }
    let s_avg = mean.scaled(1.0 / norm);
    let component_deviations = series
        .vectors
        .iter()
        .map(|v| (*v - mean).as_array())
        .collect();
    let projection_error: Vec<f64> = series.vectors.iter().map(|v| 1.0 - v.dot(&s_avg)).collect();
    let mean_error = projection_error.iter().sum::<f64>() / n;
    let max_error = projection_error.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityMetrics {
        s_avg,
        component_deviations,
        projection_error,
        mean_error,
        max_error,
    })
}
