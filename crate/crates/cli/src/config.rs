//! Run configuration: one JSON file whose sections mirror the library
//! modules, plus the input paths each subcommand reads.
//!
//! Every section has defaults, so an absent config file (or an empty `{}`)
//! is a complete, valid configuration. Unknown keys are rejected — a typo'd
//! section silently falling back to defaults would be worse than an error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ictus_core::model::{AggregationRule, ArchitectureConfig, TrainConfig};
use ictus_core::signal::PipelineConfig;
use ictus_core::spectro::StftConfig;
use ictus_core::synth::SynthConfig;
use ictus_core::{Error, Result};

/// Input locations consumed by subcommands. Outputs always go to `--out`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Dataset manifest JSON, read by `analyze`, `preprocess`, `eval` and
    /// `predict`.
    pub data: Option<PathBuf>,
    /// Preprocessed tensor-cache directory, read by `train`.
    pub cache: Option<PathBuf>,
    /// Trained model JSON, read by `eval` and `predict`.
    pub model: Option<PathBuf>,
}

/// Resolves a required input path, rejecting absent or dangling entries
/// before any work starts.
pub fn required_path<'a>(opt: &'a Option<PathBuf>, section: &str) -> Result<&'a Path> {
    let p = opt
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("paths.{section} is required for this command")))?;
    if !p.exists() {
        return Err(Error::InvalidConfig(format!(
            "paths.{section} {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}

/// Settings for the exploratory `analyze` report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Z-score above which a sample is reported as an outlier.
    pub outlier_z: f64,
    /// Cap on the outlier sites listed per clip; the total count is always
    /// reported in full.
    pub max_outliers_reported: usize,
    /// Per-channel sample cap for summaries, PCA, correlation and shift
    /// statistics; longer records are strided down to about this length.
    pub max_samples_per_channel: usize,
    /// Variance fraction for the "components needed" PCA readout.
    pub variance_threshold: f64,
    /// KS statistic above which a channel is flagged as shifted between the
    /// train and test splits.
    pub shift_flag_threshold: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            outlier_z: 6.0,
            max_outliers_reported: 100,
            max_samples_per_channel: 200_000,
            variance_threshold: 0.95,
            shift_flag_threshold: 0.2,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outlier_z.is_finite() && self.outlier_z > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "analysis.outlier_z must be positive, got {}",
                self.outlier_z
            )));
        }
        if self.max_samples_per_channel == 0 {
            return Err(Error::InvalidConfig(
                "analysis.max_samples_per_channel must be >= 1".into(),
            ));
        }
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "analysis.variance_threshold must lie in (0, 1], got {}",
                self.variance_threshold
            )));
        }
        if !(self.shift_flag_threshold.is_finite() && self.shift_flag_threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "analysis.shift_flag_threshold must be >= 0, got {}",
                self.shift_flag_threshold
            )));
        }
        Ok(())
    }
}

/// Clip-level decision settings for `eval` and `predict`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    /// How segment probabilities combine into a clip probability.
    pub rule: AggregationRule,
    /// Decision threshold for the sensitivity/specificity table.
    pub threshold: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            rule: AggregationRule::Max,
            threshold: 0.5,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && (0.0..=1.0).contains(&self.threshold)) {
            return Err(Error::InvalidConfig(format!(
                "eval.threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Umbrella configuration: every stage's section in one file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub paths: Paths,
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig,
    pub stft: StftConfig,
    pub arch: ArchitectureConfig,
    pub train: TrainConfig,
    pub analysis: AnalysisConfig,
    pub eval: EvalSettings,
}

impl RunConfig {
    /// Every section must pass its own module's validation before any work
    /// starts; a subcommand never begins writing with a half-valid config.
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.pipeline.validate()?;
        self.stft.validate()?;
        self.arch.validate()?;
        self.train.validate()?;
        self.analysis.validate()?;
        self.eval.validate()?;
        Ok(())
    }

    /// Loads and validates a config file; `None` yields validated defaults.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                if !p.is_file() {
                    return Err(Error::InvalidConfig(format!(
                        "config file {} does not exist",
                        p.display()
                    )));
                }
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("config {}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"pipelines": {}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn section_errors_surface_with_their_field_name() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"pipeline": {"decimation_factor": 3}}"#).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("decimation_factor"));
    }

    #[test]
    fn missing_required_path_is_a_config_error() {
        let paths = Paths::default();
        let err = required_path(&paths.data, "data").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        let dangling = Some(PathBuf::from("/no/such/file.json"));
        let err = required_path(&dangling, "data").unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }
}
