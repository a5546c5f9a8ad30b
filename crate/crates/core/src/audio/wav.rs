//! Minimal RIFF/WAVE reader and writer for 16-bit little-endian PCM.
//! Multi-channel input is mixed down to mono by averaging.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

pub struct WavAudio {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

pub fn read_wav_mono16(path: &Path) -> Result<WavAudio> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_wav(&bytes)
}

pub fn parse_wav(bytes: &[u8]) -> Result<WavAudio> {
    let bad = |reason: &str| Error::UnsupportedAudio {
        reason: reason.to_string(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }
    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let audio_format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((audio_format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = pos + 8 + size + (size & 1);
    }
    let (audio_format, channels, rate, bits) = fmt.ok_or_else(|| bad("missing fmt chunk"))?;
    if audio_format != 1 {
        return Err(bad("only uncompressed PCM is supported"));
    }
    if bits != 16 {
        return Err(bad("only 16-bit samples are supported"));
    }
    if channels == 0 || rate == 0 {
        return Err(bad("invalid channel count or sample rate"));
    }
    let data = data.ok_or_else(|| bad("missing data chunk"))?;
    let n_frames = data.len() / (2 * channels as usize);
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut acc = 0.0;
        for c in 0..channels as usize {
            let off = (f * channels as usize + c) * 2;
            let v = i16::from_le_bytes(data[off..off + 2].try_into().unwrap());
            acc += v as f64 / 32768.0;
        }
        samples.push(acc / channels as f64);
    }
    Ok(WavAudio {
        sample_rate: rate,
        samples,
    })
}

/// Write mono 16-bit PCM, clipping to [-1, 1].
pub fn write_wav_mono16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}
