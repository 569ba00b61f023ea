//! Run configuration: one TOML file drives training, enhancement, and
//! evaluation. Unknown keys are rejected; parsing round-trips losslessly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fdfnet_dsp::{FrameConfig, WindowKind};

use crate::checkpoint::fnv1a;
use crate::data::synth::SynthConfig;
use crate::error::CoreError;
use crate::models::{DsrConfig, FmeConfig};
use crate::pipeline::schedule::TrainSchedule;
use crate::pipeline::mask::DEFAULT_CLIP_BOUND;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSection {
    pub window_len: usize,
    pub hop: usize,
    pub transform_points: usize,
    pub window: String,
    pub sample_rate: u32,
}

impl Default for FrameSection {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 128,
            transform_points: 512,
            window: "hamming".into(),
            sample_rate: 16_000,
        }
    }
}

impl FrameSection {
    pub fn to_frame_config(&self) -> Result<FrameConfig, CoreError> {
        let window = match self.window.as_str() {
            "hamming" => WindowKind::Hamming,
            other => {
                return Err(CoreError::Config(format!(
                    "unsupported window kind '{other}' (only 'hamming' is implemented)"
                )))
            }
        };
        let cfg = FrameConfig {
            window_len: self.window_len,
            hop: self.hop,
            transform_points: self.transform_points,
            window,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Either a manifest on disk or a generated synthetic corpus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub manifest: Option<PathBuf>,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub clip_bound: f64,
    pub frame: FrameSection,
    pub fme: FmeConfig,
    pub dsr: DsrConfig,
    pub train: TrainSchedule,
    pub data: DataSection,
    /// Stage-2 training loads the frozen stage-1 parameters from here.
    pub stage1_checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: PathBuf::from("runs/default"),
            clip_bound: DEFAULT_CLIP_BOUND,
            frame: FrameSection::default(),
            fme: FmeConfig::default(),
            dsr: DsrConfig::default(),
            train: TrainSchedule::default(),
            data: DataSection::default(),
            stage1_checkpoint: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text =
            fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.frame.to_frame_config()?;
        self.fme.validate()?;
        self.dsr.validate()?;
        self.train.validate()?;
        if self.clip_bound <= 0.0 {
            return Err(CoreError::Config("clip_bound must be positive".into()));
        }
        if self.data.manifest.is_some() && self.data.synth.is_some() {
            return Err(CoreError::Config(
                "specify either data.manifest or data.synth, not both".into(),
            ));
        }
        Ok(())
    }

    /// Fingerprint over the architecture-relevant sections; checkpoints
    /// refuse to load into a differently-shaped model unless forced.
    pub fn fingerprint(&self) -> u64 {
        #[derive(Serialize)]
        struct Arch<'a> {
            frame: &'a FrameSection,
            fme: &'a FmeConfig,
            dsr: &'a DsrConfig,
        }
        let text = toml::to_string(&Arch { frame: &self.frame, fme: &self.fme, dsr: &self.dsr })
            .expect("config serializes");
        fnv1a(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml_unchanged() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "seed = 1\nnonsense_key = true\n";
        assert!(toml::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn unsupported_window_kind_is_a_config_error() {
        let section = FrameSection { window: "hann".into(), ..FrameSection::default() };
        assert!(matches!(section.to_frame_config(), Err(CoreError::Config(_))));
    }

    #[test]
    fn fingerprint_tracks_architecture_only() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.seed = 999;
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = RunConfig::default();
        c.frame.hop = 256;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
