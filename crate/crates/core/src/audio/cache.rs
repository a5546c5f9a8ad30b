//! Spectrogram cache files: a small JSON header followed by the raw
//! row-major float32 matrix, little-endian.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use super::mel::MelSpectrogram;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MELSPEC1";

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    track: String,
    frame_rate_hz: f64,
    n_mels: usize,
    n_frames: usize,
}

pub fn write_spectrogram(path: &Path, spec: &MelSpectrogram) -> Result<()> {
    let header = CacheHeader {
        track: spec.track_id.clone(),
        frame_rate_hz: spec.frame_rate_hz,
        n_mels: spec.n_mels,
        n_frames: spec.n_frames(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(MAGIC)?;
    f.write_all(&(header_json.len() as u32).to_le_bytes())?;
    f.write_all(&header_json)?;
    let mut buf = Vec::with_capacity(spec.data.len() * 4);
    for &v in &spec.data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_spectrogram(path: &Path) -> Result<MelSpectrogram> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |reason: &str| Error::BadFormat {
        reason: format!("{}: {reason}", path.display()),
    };
    if bytes.len() < 12 || &bytes[0..8] != MAGIC {
        return Err(bad("missing spectrogram magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + hlen {
        return Err(bad("truncated header"));
    }
    let header: CacheHeader = serde_json::from_slice(&bytes[12..12 + hlen])?;
    let body = &bytes[12 + hlen..];
    let expect = header.n_frames * header.n_mels * 4;
    if body.len() != expect {
        return Err(bad("matrix size does not match header"));
    }
    let data: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    MelSpectrogram::new(&header.track, header.frame_rate_hz, header.n_mels, data)
}
