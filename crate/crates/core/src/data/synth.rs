//! Deterministic synthetic corpus: harmonic "speech-like" sources mixed
//! with broadband noise at seeded SNRs. Stands in for a real corpus so
//! every training and evaluation path runs without external data.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use fdfnet_dsp::Waveform;

use crate::data::manifest::{DatasetManifest, ManifestRecord, SourceKind, Split};
use crate::data::mix::mix_at_snr;
use crate::data::wav::{write_wav, SampleFormat};
use crate::error::CoreError;
use crate::pipeline::train::{Dataset, TrainItem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub train_items: usize,
    pub val_items: usize,
    pub test_items: usize,
    pub clip_seconds: f64,
    /// SNRs are drawn uniformly from this range (dB).
    pub snr_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            train_items: 16,
            val_items: 4,
            test_items: 6,
            clip_seconds: 0.4,
            snr_range: (-5.0, 15.0),
            seed: 7,
        }
    }
}

/// Harmonic stack with a pitch glide, vibrato, and a syllabic amplitude
/// envelope. The glide sweeps each clip across a band of fundamentals, so a
/// small corpus still covers the pitch range densely.
fn speech_like(rng: &mut ChaCha12Rng, len: usize) -> Waveform {
    let fs = 16_000.0f64;
    let f0_start = rng.random_range(90.0..220.0);
    let f0_end = rng.random_range(90.0..220.0);
    let vibrato_rate = rng.random_range(4.0..7.0);
    let syllable_rate = rng.random_range(2.0..4.0);
    let n_harm = 5;
    let mut phases = vec![0.0f64; n_harm];
    let phase0: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    for (k, p) in phases.iter_mut().enumerate() {
        *p = phase0 * (k + 1) as f64;
    }
    let mut samples = Vec::with_capacity(len);
    for i in 0..len {
        let t = i as f64 / fs;
        let frac = i as f64 / len.max(1) as f64;
        let glide = f0_start + (f0_end - f0_start) * frac;
        let inst_f0 = glide * (1.0 + 0.02 * (std::f64::consts::TAU * vibrato_rate * t).sin());
        let env = 0.15 + 0.85 * (std::f64::consts::TAU * syllable_rate * t).sin().abs();
        let mut v = 0.0f64;
        for (k, p) in phases.iter_mut().enumerate() {
            *p += std::f64::consts::TAU * inst_f0 * (k + 1) as f64 / fs;
            v += (*p).sin() / (k + 1) as f64;
        }
        samples.push((0.25 * env * v) as f32);
    }
    Waveform::mono_16k(samples).unwrap()
}

/// White, pink, or hum-plus-hiss noise, cycling per item index.
fn noise_like(rng: &mut ChaCha12Rng, len: usize, kind: usize) -> Waveform {
    let samples: Vec<f32> = match kind % 3 {
        0 => (0..len).map(|_| rng.random_range(-0.3f32..0.3)).collect(),
        1 => {
            // Kellet economy pink filter (-3 dB/octave across the band).
            let mut b = [0.0f64; 3];
            (0..len)
                .map(|_| {
                    let white: f64 = rng.random_range(-0.3..0.3);
                    b[0] = 0.99765 * b[0] + white * 0.0990460;
                    b[1] = 0.96300 * b[1] + white * 0.2965164;
                    b[2] = 0.57000 * b[2] + white * 1.0526913;
                    ((b[0] + b[1] + b[2] + white * 0.1848) * 0.25) as f32
                })
                .collect()
        }
        _ => {
            let fs = 16_000.0f32;
            (0..len)
                .map(|i| {
                    let t = i as f32 / fs;
                    let hum = 0.06 * (2.0 * std::f32::consts::PI * 50.0 * t).sin()
                        + 0.03 * (2.0 * std::f32::consts::PI * 150.0 * t).sin();
                    hum + rng.random_range(-0.2f32..0.2)
                })
                .collect()
        }
    };
    Waveform::mono_16k(samples).unwrap()
}

/// One generated record: both sources plus the mixing parameters.
pub struct SynthItem {
    pub clean: Waveform,
    pub noise: Waveform,
    pub snr_db: f64,
    pub mix_seed: u64,
}

/// Generates the raw items of one split deterministically.
fn generate_split(cfg: &SynthConfig, split: Split, count: usize) -> Vec<SynthItem> {
    let salt = match split {
        Split::Train => 0x7261_696e,
        Split::Val => 0x76_616c,
        Split::Test => 0x74_6573,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ salt);
    let len = (cfg.clip_seconds * 16_000.0).round() as usize;
    (0..count)
        .map(|i| {
            let clean = speech_like(&mut rng, len);
            let noise = noise_like(&mut rng, len + len / 2, i);
            let snr_db = rng.random_range(cfg.snr_range.0..=cfg.snr_range.1);
            let mix_seed = rng.random();
            SynthItem { clean, noise, snr_db, mix_seed }
        })
        .collect()
}

fn split_counts(cfg: &SynthConfig) -> [(Split, usize); 3] {
    [
        (Split::Train, cfg.train_items),
        (Split::Val, cfg.val_items),
        (Split::Test, cfg.test_items),
    ]
}

/// Builds the train/val dataset in memory (no files), mixing each item at
/// its recorded SNR and seed.
pub fn synth_in_memory(cfg: &SynthConfig) -> Result<Dataset, CoreError> {
    let to_items = |items: Vec<SynthItem>| -> Result<Vec<TrainItem>, CoreError> {
        items
            .into_iter()
            .map(|it| {
                let mix = mix_at_snr(&it.clean, &it.noise, it.snr_db, it.mix_seed)?;
                Ok(TrainItem { clean: mix.clean, mixture: mix.mixture })
            })
            .collect()
    };
    Ok(Dataset {
        train: to_items(generate_split(cfg, Split::Train, cfg.train_items))?,
        val: to_items(generate_split(cfg, Split::Val, cfg.val_items))?,
    })
}

/// Test-split pairs `(clean, mixture)` for evaluation.
pub fn synth_eval_pairs(cfg: &SynthConfig) -> Result<Vec<(Waveform, Waveform)>, CoreError> {
    generate_split(cfg, Split::Test, cfg.test_items)
        .into_iter()
        .map(|it| {
            let mix = mix_at_snr(&it.clean, &it.noise, it.snr_db, it.mix_seed)?;
            Ok((mix.clean, mix.mixture))
        })
        .collect()
}

/// Writes the corpus as WAV files plus a manifest; fully deterministic for
/// a fixed config.
pub fn synth_dataset(cfg: &SynthConfig, out_dir: &Path) -> Result<PathBuf, CoreError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CoreError::io(out_dir.display().to_string(), e))?;
    let mut records = Vec::new();
    for (split, count) in split_counts(cfg) {
        let tag = split.as_str();
        for (i, item) in generate_split(cfg, split, count).into_iter().enumerate() {
            let clean_rel = format!("{tag}_clean_{i:03}.wav");
            let noise_rel = format!("{tag}_noise_{i:03}.wav");
            write_wav(&out_dir.join(&clean_rel), &item.clean, SampleFormat::Float32)?;
            write_wav(&out_dir.join(&noise_rel), &item.noise, SampleFormat::Float32)?;
            records.push(ManifestRecord {
                split,
                clean: clean_rel.into(),
                source: noise_rel.into(),
                kind: SourceKind::Noise { snr_db: item.snr_db, seed: item.mix_seed },
            });
        }
    }
    let manifest_path = out_dir.join("manifest.tsv");
    DatasetManifest::save(&manifest_path, &records)?;
    Ok(manifest_path)
}
