//! Mono RIFF/WAVE reading and writing, PCM16 little-endian or IEEE float32.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Waveform, WaveformError};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a RIFF/WAVE file")]
    NotWav,
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("{0} channels; only mono is supported")]
    MultiChannel(u16),
    #[error("data chunk declares {declared} bytes but only {available} are present")]
    Truncated { declared: usize, available: usize },
    #[error("missing `{0}` chunk")]
    MissingChunk(&'static str),
    #[error("refusing to write an empty waveform")]
    Empty,
    #[error("invalid samples: {0}")]
    InvalidSamples(#[from] WaveformError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitDepth {
    #[serde(rename = "pcm16")]
    Pcm16,
    #[serde(rename = "float32")]
    Float32,
}

impl BitDepth {
    fn bits(self) -> u16 {
        match self {
            BitDepth::Pcm16 => 16,
            BitDepth::Float32 => 32,
        }
    }

    fn format_tag(self) -> u16 {
        match self {
            BitDepth::Pcm16 => FORMAT_PCM,
            BitDepth::Float32 => FORMAT_IEEE_FLOAT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub sample_rate_hz: u32,
    pub n_samples: usize,
    pub bit_depth: BitDepth,
    pub n_channels: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Parsed<'a> {
    info: WavInfo,
    data: &'a [u8],
}

fn parse(bytes: &[u8]) -> Result<Parsed<'_>, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::NotWav);
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4) as usize;
        let body = at + 8;
        let available = bytes.len() - body;
        match id {
            b"fmt " => {
                if size < 16 || available < 16 {
                    return Err(WavError::Truncated {
                        declared: size,
                        available,
                    });
                }
                let mut tag = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                if tag == FORMAT_EXTENSIBLE {
                    // sub-format GUID starts at offset 24; its first two bytes carry the tag
                    if size < 40 || available < 40 {
                        return Err(WavError::UnsupportedEncoding("short extensible header".into()));
                    }
                    tag = u16_at(bytes, body + 24);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => {
                if size > available {
                    return Err(WavError::Truncated {
                        declared: size,
                        available,
                    });
                }
                data = Some(&bytes[body..body + size]);
                break;
            }
            _ => {}
        }
        at = body + size + (size & 1);
    }
    let (tag, channels, rate, bits) = fmt.ok_or(WavError::MissingChunk("fmt "))?;
    let bit_depth = match (tag, bits) {
        (FORMAT_PCM, 16) => BitDepth::Pcm16,
        (FORMAT_IEEE_FLOAT, 32) => BitDepth::Float32,
        (t, b) => {
            return Err(WavError::UnsupportedEncoding(format!(
                "format tag {t} with {b} bits per sample"
            )))
        }
    };
    if channels != 1 {
        return Err(WavError::MultiChannel(channels));
    }
    let data = data.ok_or(WavError::MissingChunk("data"))?;
    let width = usize::from(bits / 8);
    Ok(Parsed {
        info: WavInfo {
            sample_rate_hz: rate,
            n_samples: data.len() / width,
            bit_depth,
            n_channels: channels,
        },
        data,
    })
}

pub fn parse_wav(bytes: &[u8]) -> Result<Waveform, WavError> {
    let Parsed { info, data } = parse(bytes)?;
    let samples: Vec<f64> = match info.bit_depth {
        BitDepth::Pcm16 => data
            .chunks_exact(2)
            .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / 32768.0)
            .collect(),
        BitDepth::Float32 => data
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
    };
    Ok(Waveform::new(samples, info.sample_rate_hz)?)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform, WavError> {
    parse_wav(&fs::read(path)?)
}

pub fn read_wav_info(path: impl AsRef<Path>) -> Result<WavInfo, WavError> {
    Ok(parse(&fs::read(path)?)?.info)
}

/// 16-bit quantisation: round to nearest, clamp to the i16 range.
pub fn quantize_pcm16(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn encode_wav(samples: &[f64], sample_rate_hz: u32, depth: BitDepth) -> Result<Vec<u8>, WavError> {
    if samples.is_empty() {
        return Err(WavError::Empty);
    }
    let width = usize::from(depth.bits() / 8);
    let data_len = samples.len() * width;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&depth.format_tag().to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * width as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&depth.bits().to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    match depth {
        BitDepth::Pcm16 => {
            for &x in samples {
                out.extend_from_slice(&quantize_pcm16(x).to_le_bytes());
            }
        }
        BitDepth::Float32 => {
            for &x in samples {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
    }
    if data_len % 2 == 1 {
        out.push(0);
    }
    Ok(out)
}

pub fn write_samples(
    path: impl AsRef<Path>,
    samples: &[f64],
    sample_rate_hz: u32,
    depth: BitDepth,
) -> Result<(), WavError> {
    let bytes = encode_wav(samples, sample_rate_hz, depth)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn write_wav(path: impl AsRef<Path>, wf: &Waveform, depth: BitDepth) -> Result<(), WavError> {
    write_samples(path, wf.samples(), wf.sample_rate_hz(), depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_file(values: &[i16]) -> Vec<u8> {
        let samples: Vec<f64> = values.iter().map(|&v| f64::from(v) / 32768.0).collect();
        encode_wav(&samples, 8000, BitDepth::Pcm16).unwrap()
    }

    #[test]
    fn pcm16_normalisation() {
        let wf = parse_wav(&pcm16_file(&[-32768, 16384, 0, 32767])).unwrap();
        assert_eq!(wf.samples()[0], -1.0);
        assert_eq!(wf.samples()[1], 0.5);
        assert_eq!(wf.samples()[2], 0.0);
        assert_eq!(wf.sample_rate_hz(), 8000);
    }

    #[test]
    fn pcm16_quantisation() {
        assert_eq!(quantize_pcm16(0.5), 16384);
        assert_eq!(quantize_pcm16(1.0), 32767);
        assert_eq!(quantize_pcm16(-1.0), -32768);
        let bytes = encode_wav(&[0.5], 8000, BitDepth::Pcm16).unwrap();
        assert_eq!(i16::from_le_bytes([bytes[44], bytes[45]]), 16384);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(
            encode_wav(&[], 8000, BitDepth::Float32),
            Err(WavError::Empty)
        ));
    }

    #[test]
    fn bad_magic() {
        let mut b = pcm16_file(&[1, 2]);
        b[0] = b'X';
        assert!(matches!(parse_wav(&b), Err(WavError::NotWav)));
        assert!(matches!(parse_wav(b"RIFF"), Err(WavError::NotWav)));
    }

    #[test]
    fn stereo_is_rejected() {
        let mut b = pcm16_file(&[1, 2, 3, 4]);
        b[22] = 2;
        assert!(matches!(parse_wav(&b), Err(WavError::MultiChannel(2))));
    }

    #[test]
    fn unsupported_bit_depth() {
        let mut b = pcm16_file(&[1, 2, 3, 4]);
        b[34] = 24;
        assert!(matches!(parse_wav(&b), Err(WavError::UnsupportedEncoding(_))));
        let mut b = pcm16_file(&[1, 2]);
        b[20] = 2; // ADPCM
        assert!(matches!(parse_wav(&b), Err(WavError::UnsupportedEncoding(_))));
    }

    #[test]
    fn truncated_data_chunk() {
        let b = pcm16_file(&[1, 2, 3, 4]);
        let cut = &b[..b.len() - 3];
        assert!(matches!(
            parse_wav(cut),
            Err(WavError::Truncated { declared: 8, available: 5 })
        ));
    }

    #[test]
    fn skips_unknown_chunks() {
        let b = pcm16_file(&[100, -100]);
        let mut with_list = b[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]);
        with_list.extend_from_slice(&b[36..]);
        let wf = parse_wav(&with_list).unwrap();
        assert_eq!(wf.len(), 2);
    }

    #[test]
    fn float_out_of_range_is_invalid() {
        let mut b = encode_wav(&[0.25], 8000, BitDepth::Float32).unwrap();
        b[44..48].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(parse_wav(&b), Err(WavError::InvalidSamples(_))));
    }
}
