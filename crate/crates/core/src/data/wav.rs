//! RIFF/WAVE reader and writer: mono, 16 kHz, 16-bit PCM or 32-bit float.

use std::fs;
use std::io::Write;
use std::path::Path;

use fdfnet_dsp::Waveform;

use crate::error::CoreError;

pub const NATIVE_RATE: u32 = 16_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

fn data_err(path: &Path, msg: impl Into<String>) -> CoreError {
    CoreError::Data(format!("{}: {}", path.display(), msg.into()))
}

/// Parses a WAV file. Stereo and other rates are rejected (resampling is out
/// of scope); 16-bit PCM is scaled by 1/32768.
pub fn read_wav_with_format(path: &Path) -> Result<(Waveform, SampleFormat), CoreError> {
    let bytes = fs::read(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(data_err(path, "not a RIFF/WAVE file"));
    }
    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (codec, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| data_err(path, format!("truncated '{}' chunk", String::from_utf8_lossy(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(data_err(path, "fmt chunk too short"));
                }
                let codec = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((codec, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_end + (size & 1);
    }
    let (codec, channels, rate, bits) = fmt.ok_or_else(|| data_err(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| data_err(path, "missing data chunk"))?;
    if channels != 1 {
        return Err(data_err(path, format!("expected mono, got {channels} channels")));
    }
    if rate != NATIVE_RATE {
        return Err(data_err(
            path,
            format!("expected {NATIVE_RATE} Hz, got {rate} Hz (resampling unsupported)"),
        ));
    }
    let (samples, format) = match (codec, bits) {
        (1, 16) => {
            if data.len() % 2 != 0 {
                return Err(data_err(path, "pcm16 data length is odd"));
            }
            let samples = data
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
                .collect();
            (samples, SampleFormat::Pcm16)
        }
        (3, 32) => {
            if data.len() % 4 != 0 {
                return Err(data_err(path, "float32 data length not a multiple of 4"));
            }
            let samples: Vec<f32> = data
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            (samples, SampleFormat::Float32)
        }
        other => {
            return Err(data_err(path, format!("unsupported encoding {other:?} (codec, bits)")));
        }
    };
    let wave = Waveform::new(samples, rate).map_err(|e| data_err(path, e.to_string()))?;
    Ok((wave, format))
}

pub fn read_wav(path: &Path) -> Result<Waveform, CoreError> {
    read_wav_with_format(path).map(|(w, _)| w)
}

/// Writes a mono WAV file in the given format, via a temporary file so a
/// failed write never leaves a partial output behind.
pub fn write_wav(path: &Path, wave: &Waveform, format: SampleFormat) -> Result<(), CoreError> {
    let mut payload: Vec<u8> = Vec::new();
    match format {
        SampleFormat::Pcm16 => {
            for &s in wave.samples() {
                let v = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        SampleFormat::Float32 => {
            for &s in wave.samples() {
                payload.extend_from_slice(&s.to_le_bytes());
            }
        }
    }
    let (codec, bits): (u16, u16) = match format {
        SampleFormat::Pcm16 => (1, 16),
        SampleFormat::Float32 => (3, 32),
    };
    let rate = wave.sample_rate();
    let block_align = (bits / 8) as u16;
    let byte_rate = rate * block_align as u32;

    let mut out: Vec<u8> = Vec::with_capacity(44 + payload.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + payload.len()) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&codec.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);

    let tmp = path.with_extension("wav.tmp");
    {
        let mut f =
            fs::File::create(&tmp).map_err(|e| CoreError::io(tmp.display().to_string(), e))?;
        f.write_all(&out).map_err(|e| CoreError::io(tmp.display().to_string(), e))?;
    }
    fs::rename(&tmp, path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    Ok(())
}
