//! Line-oriented dataset manifest.
//!
//! One record per line, tab-separated, paths relative to the manifest:
//!
//! ```text
//! split<TAB>clean.wav<TAB>noise.wav<TAB>snr_db<TAB>seed
//! split<TAB>clean.wav<TAB>mixture.wav<TAB>premixed<TAB>0
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fdfnet_dsp::Waveform;

use crate::data::mix::mix_at_snr;
use crate::data::wav::read_wav;
use crate::error::CoreError;
use crate::pipeline::train::{Dataset, TrainItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn parse(s: &str) -> Result<Self, CoreError> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(CoreError::Data(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    /// Column 3 is a noise file, mixed at load time.
    Noise { snr_db: f64, seed: u64 },
    /// Column 3 is already the mixture.
    Premixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub split: Split,
    pub clean: PathBuf,
    pub source: PathBuf,
    pub kind: SourceKind,
}

#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    /// Directory record paths are relative to.
    pub dir: PathBuf,
}

impl DatasetManifest {
    pub fn save(path: &Path, records: &[ManifestRecord]) -> Result<(), CoreError> {
        let mut out = String::new();
        for r in records {
            let (snr, seed) = match r.kind {
                SourceKind::Noise { snr_db, seed } => (format!("{snr_db}"), seed),
                SourceKind::Premixed => ("premixed".to_string(), 0),
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.split.as_str(),
                r.clean.display(),
                r.source.display(),
                snr,
                seed
            ));
        }
        let tmp = path.with_extension("tsv.tmp");
        {
            let mut f =
                fs::File::create(&tmp).map_err(|e| CoreError::io(tmp.display().to_string(), e))?;
            f.write_all(out.as_bytes())
                .map_err(|e| CoreError::io(tmp.display().to_string(), e))?;
        }
        fs::rename(&tmp, path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        Ok(())
    }

    /// Parses the manifest and verifies that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text =
            fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(CoreError::Data(format!(
                    "{}:{}: expected 5 tab-separated fields, got {}",
                    path.display(),
                    lineno + 1,
                    fields.len()
                )));
            }
            let split = Split::parse(fields[0])?;
            let clean = PathBuf::from(fields[1]);
            let source = PathBuf::from(fields[2]);
            let kind = if fields[3] == "premixed" {
                SourceKind::Premixed
            } else {
                let snr_db: f64 = fields[3].parse().map_err(|_| {
                    CoreError::Data(format!(
                        "{}:{}: bad SNR '{}'",
                        path.display(),
                        lineno + 1,
                        fields[3]
                    ))
                })?;
                if !snr_db.is_finite() {
                    return Err(CoreError::Data(format!(
                        "{}:{}: SNR must be finite",
                        path.display(),
                        lineno + 1
                    )));
                }
                let seed: u64 = fields[4].parse().map_err(|_| {
                    CoreError::Data(format!(
                        "{}:{}: bad seed '{}'",
                        path.display(),
                        lineno + 1,
                        fields[4]
                    ))
                })?;
                SourceKind::Noise { snr_db, seed }
            };
            for p in [&clean, &source] {
                let full = dir.join(p);
                if !full.exists() {
                    return Err(CoreError::Data(format!(
                        "{}:{}: referenced file missing: {}",
                        path.display(),
                        lineno + 1,
                        full.display()
                    )));
                }
            }
            records.push(ManifestRecord { split, clean, source, kind });
        }
        Ok(Self { records, dir })
    }

    fn resolve(&self, rec: &ManifestRecord) -> Result<TrainItem, CoreError> {
        let clean = read_wav(&self.dir.join(&rec.clean))?;
        match rec.kind {
            SourceKind::Noise { snr_db, seed } => {
                let noise = read_wav(&self.dir.join(&rec.source))?;
                let mix = mix_at_snr(&clean, &noise, snr_db, seed)?;
                Ok(TrainItem { clean: mix.clean, mixture: mix.mixture })
            }
            SourceKind::Premixed => {
                let mixture = read_wav(&self.dir.join(&rec.source))?;
                if mixture.len() != clean.len() {
                    return Err(CoreError::Data(format!(
                        "premixed length {} != clean length {} for {}",
                        mixture.len(),
                        clean.len(),
                        rec.source.display()
                    )));
                }
                Ok(TrainItem { clean, mixture })
            }
        }
    }

    /// Loads train and validation splits as a training dataset.
    pub fn build_dataset(&self) -> Result<Dataset, CoreError> {
        let mut train = Vec::new();
        let mut val = Vec::new();
        for rec in &self.records {
            match rec.split {
                Split::Train => train.push(self.resolve(rec)?),
                Split::Val => val.push(self.resolve(rec)?),
                Split::Test => {}
            }
        }
        Ok(Dataset { train, val })
    }

    /// Loads `(clean, mixture)` pairs of one split for evaluation.
    pub fn build_pairs(&self, split: Split) -> Result<Vec<(Waveform, Waveform)>, CoreError> {
        self.records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| self.resolve(r).map(|it| (it.clean, it.mixture)))
            .collect()
    }
}
