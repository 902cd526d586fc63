//! TOML run configuration. Every section is optional and falls back to the
//! reference parameters; unknown keys are rejected.

use std::path::{Path, PathBuf};

use polqkd_core::{
    ChannelParams, DetectorParams, EncoderParams, ExperimentParams, ModulationSequence, SkrParams,
    SourceParams,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub n_slots: u64,
    pub seed: u64,
    pub events_file: PathBuf,
    pub report_file: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            n_slots: 1_000_000,
            seed: 42,
            events_file: "events.csv".into(),
            report_file: "report.json".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationSection {
    pub sequence: ModulationSequence,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub modulation: ModulationSection,
    pub source: SourceParams,
    pub encoder: EncoderParams,
    pub channel: ChannelParams,
    pub detector: DetectorParams,
    pub skr: SkrParams,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn experiment(&self) -> CliResult<ExperimentParams> {
        let p = ExperimentParams {
            source: self.source.clone(),
            encoder: self.encoder.clone(),
            channel: self.channel.clone(),
            detector: self.detector.clone(),
            sequence: self.modulation.sequence.clone(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Usage(format!("cannot serialize config: {e}")))
    }

    pub fn write_resolved(&self, out_dir: &Path) -> CliResult<()> {
        let path = out_dir.join(RESOLVED_CONFIG);
        std::fs::write(&path, self.to_toml()?).map_err(|e| CliError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trips() {
        let mut c = RunConfig::default();
        c.encoder.extinction_ratio_db = f64::INFINITY;
        c.run.seed = 7;
        let text = c.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[source]\nmean_photon = 0.1\n").is_err());
        assert!(toml::from_str::<RunConfig>("[sauce]\n").is_err());
        let c: RunConfig = toml::from_str("[source]\nmean_photon_number = 0.2\n").unwrap();
        assert_eq!(c.source.mean_photon_number, 0.2);
        assert_eq!(c.encoder, EncoderParams::default());
    }
}
