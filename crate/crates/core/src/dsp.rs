//! Time–frequency transforms: framed STFT with a periodic Hamming window,
//! power spectrogram, HTK mel filterbank, `ln(1 + M)` log-mel and
//! orthonormal DCT-II MFCCs.
//!
//! Frames are taken fully inside the signal (no centering or padding), so a
//! signal of `n` samples yields `floor((n - n_fft) / hop) + 1` frames.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Waveform;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("signal of {n_samples} samples is shorter than n_fft = {n_fft}")]
    TooShort { n_samples: usize, n_fft: usize },
    #[error("invalid dsp config: {0}")]
    InvalidConfig(String),
    #[error("frequency {0} Hz is negative")]
    NegativeFrequency(f64),
    #[error("mel band {band} has no distinct FFT bins; reduce n_mels or raise n_fft")]
    TooManyMels { band: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix export: {0}")]
    Export(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hamming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub n_mels: usize,
    pub fmin_hz: f64,
    /// `None` means Nyquist.
    pub fmax_hz: Option<f64>,
    pub n_mfcc: usize,
    pub log_floor_eps: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
            window: WindowKind::Hamming,
            n_mels: 64,
            fmin_hz: 0.0,
            fmax_hz: None,
            n_mfcc: 13,
            log_floor_eps: 1e-10,
        }
    }
}

impl DspConfig {
    pub fn fmax_for(&self, sample_rate_hz: u32) -> f64 {
        self.fmax_hz.unwrap_or(f64::from(sample_rate_hz) / 2.0)
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.n_fft {
            0
        } else {
            (n_samples - self.n_fft) / self.hop + 1
        }
    }

    pub fn validate(&self, sample_rate_hz: u32) -> Result<(), DspError> {
        let bad = |msg: String| Err(DspError::InvalidConfig(msg));
        if self.n_fft < 2 || !self.n_fft.is_multiple_of(2) {
            return bad(format!("n_fft must be even and >= 2, got {}", self.n_fft));
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return bad(format!("hop must be in 1..=n_fft, got {}", self.hop));
        }
        if self.n_mels == 0 {
            return bad("n_mels must be positive".into());
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad(format!(
                "n_mfcc must be in 1..=n_mels ({}), got {}",
                self.n_mels, self.n_mfcc
            ));
        }
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        let fmax = self.fmax_for(sample_rate_hz);
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < fmax && fmax <= nyquist) {
            return bad(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got fmin {} fmax {fmax}",
                self.fmin_hz
            ));
        }
        if !(self.log_floor_eps > 0.0) {
            return bad("log_floor_eps must be positive".into());
        }
        Ok(())
    }
}

/// Periodic Hamming window, `0.54 - 0.46 cos(2πn/N)`.
pub fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Complex STFT, `n_frames × (n_fft/2 + 1)`, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub n_frames: usize,
    pub n_bins: usize,
    pub n_fft: usize,
    pub hop: usize,
    pub sample_rate_hz: u32,
    data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn frame(&self, m: usize) -> &[Complex64] {
        &self.data[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.data[frame * self.n_bins + bin]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Start time of each frame in seconds.
    pub fn frame_times_s(&self) -> Vec<f64> {
        (0..self.n_frames)
            .map(|m| (m * self.hop) as f64 / f64::from(self.sample_rate_hz))
            .collect()
    }

    pub fn bin_freqs_hz(&self) -> Vec<f64> {
        bin_frequencies(self.n_fft, self.sample_rate_hz)
    }
}

pub fn bin_frequencies(n_fft: usize, sample_rate_hz: u32) -> Vec<f64> {
    (0..n_fft / 2 + 1)
        .map(|k| k as f64 * f64::from(sample_rate_hz) / n_fft as f64)
        .collect()
}

/// Non-negative real matrix (power, mel energies or log-mel).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_frames: usize,
    pub n_cols: usize,
    data: Vec<f64>,
}

impl Spectrogram {
    pub fn from_vec(n_frames: usize, n_cols: usize, data: Vec<f64>) -> Result<Self, DspError> {
        if data.len() != n_frames * n_cols {
            return Err(DspError::ShapeMismatch(format!(
                "{} values for a {n_frames}x{n_cols} matrix",
                data.len()
            )));
        }
        Ok(Self {
            n_frames,
            n_cols,
            data,
        })
    }

    pub fn zeros(n_frames: usize, n_cols: usize) -> Self {
        Self {
            n_frames,
            n_cols,
            data: vec![0.0; n_frames * n_cols],
        }
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.n_cols..(m + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols.max(1))
    }

    pub fn get(&self, frame: usize, col: usize) -> f64 {
        self.data[frame * self.n_cols + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_frames: self.n_frames,
            n_cols: self.n_cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Reusable STFT: holds the FFT plan and window for one configuration.
pub struct StftPlan {
    n_fft: usize,
    hop: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(cfg: &DspConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_fft: cfg.n_fft,
            hop: cfg.hop,
            window: hamming(cfg.n_fft),
            fft: planner.plan_fft_forward(cfg.n_fft),
        }
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn process(&self, samples: &[f64], sample_rate_hz: u32) -> Result<ComplexSpectrogram, DspError> {
        if samples.len() < self.n_fft {
            return Err(DspError::TooShort {
                n_samples: samples.len(),
                n_fft: self.n_fft,
            });
        }
        let n_frames = (samples.len() - self.n_fft) / self.hop + 1;
        let n_bins = self.n_fft / 2 + 1;
        let mut data = Vec::with_capacity(n_frames * n_bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_fft];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for m in 0..n_frames {
            let frame = &samples[m * self.hop..m * self.hop + self.n_fft];
            for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                *b = Complex64::new(x * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            data.extend_from_slice(&buf[..n_bins]);
        }
        Ok(ComplexSpectrogram {
            n_frames,
            n_bins,
            n_fft: self.n_fft,
            hop: self.hop,
            sample_rate_hz,
            data,
        })
    }
}

pub fn stft(wf: &Waveform, cfg: &DspConfig) -> Result<ComplexSpectrogram, DspError> {
    StftPlan::new(cfg).process(wf.samples(), wf.sample_rate_hz())
}

/// Elementwise `|X|²`.
pub fn power_spectrogram(cs: &ComplexSpectrogram) -> Spectrogram {
    Spectrogram {
        n_frames: cs.n_frames,
        n_cols: cs.n_bins,
        data: cs.data.iter().map(|c| c.norm_sqr()).collect(),
    }
}

/// HTK mel scale, `2595 log10(1 + f/700)`.
pub fn mel_scale(f_hz: f64) -> Result<f64, DspError> {
    if f_hz < 0.0 {
        return Err(DspError::NegativeFrequency(f_hz));
    }
    Ok(2595.0 * (1.0 + f_hz / 700.0).log10())
}

pub fn mel_to_hz(mel: f64) -> Result<f64, DspError> {
    if mel < 0.0 {
        return Err(DspError::NegativeFrequency(mel));
    }
    Ok(700.0 * (10f64.powf(mel / 2595.0) - 1.0))
}

/// Triangular filters, `n_mels × (n_fft/2 + 1)`, each with peak weight 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    /// `n_mels + 2` band edges in Hz; band `k` spans `edges[k]..edges[k + 2]`.
    pub edges_hz: Vec<f64>,
    weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.n_bins..(k + 1) * self.n_bins]
    }

    pub fn center_freqs_hz(&self) -> &[f64] {
        &self.edges_hz[1..=self.n_mels]
    }

    /// Apply to one power frame: `M_k = Σ_f P(f) H_k(f)`.
    pub fn apply(&self, power_frame: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self
                .row(k)
                .iter()
                .zip(power_frame)
                .map(|(w, p)| w * p)
                .sum();
        }
    }
}

pub fn build_filterbank(cfg: &DspConfig, sample_rate_hz: u32) -> Result<MelFilterbank, DspError> {
    cfg.validate(sample_rate_hz)?;
    let fmax = cfg.fmax_for(sample_rate_hz);
    let mel_lo = mel_scale(cfg.fmin_hz)?;
    let mel_hi = mel_scale(fmax)?;
    let n_points = cfg.n_mels + 2;
    let edges_hz = (0..n_points)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_points - 1) as f64))
        .collect::<Result<Vec<_>, _>>()?;
    let freqs = bin_frequencies(cfg.n_fft, sample_rate_hz);
    let n_bins = freqs.len();
    let mut weights = vec![0.0; cfg.n_mels * n_bins];
    let mut prev_support: Option<(usize, usize)> = None;
    for k in 0..cfg.n_mels {
        let (lo, mid, hi) = (edges_hz[k], edges_hz[k + 1], edges_hz[k + 2]);
        let row = &mut weights[k * n_bins..(k + 1) * n_bins];
        let mut support: Option<(usize, usize)> = None;
        for (j, &f) in freqs.iter().enumerate() {
            let w = if f > lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
            if w > 0.0 {
                row[j] = w;
                support = Some(support.map_or((j, j), |(a, _)| (a, j)));
            }
        }
        match support {
            None => return Err(DspError::TooManyMels { band: k }),
            Some(s) if prev_support == Some(s) => return Err(DspError::TooManyMels { band: k }),
            s => prev_support = s,
        }
    }
    Ok(MelFilterbank {
        n_mels: cfg.n_mels,
        n_bins,
        edges_hz,
        weights,
    })
}

/// Mel energies `M = P · Hᵀ`, one row per frame.
pub fn mel_energies(power: &Spectrogram, fb: &MelFilterbank) -> Result<Spectrogram, DspError> {
    if power.n_cols != fb.n_bins {
        return Err(DspError::ShapeMismatch(format!(
            "power has {} bins, filterbank expects {}",
            power.n_cols, fb.n_bins
        )));
    }
    let mut data = vec![0.0; power.n_frames * fb.n_mels];
    for (frame, out) in power.rows().zip(data.chunks_exact_mut(fb.n_mels)) {
        fb.apply(frame, out);
    }
    Ok(Spectrogram {
        n_frames: power.n_frames,
        n_cols: fb.n_mels,
        data,
    })
}

/// `ln(1 + M)`.
pub fn log_mel(power: &Spectrogram, fb: &MelFilterbank) -> Result<Spectrogram, DspError> {
    Ok(mel_energies(power, fb)?.map(f64::ln_1p))
}

/// Orthonormal DCT-II matrix, row `c` holding
/// `s_c cos(π c (2m + 1) / 2M)` with `s_0 = √(1/M)`, `s_c = √(2/M)`.
pub fn dct_matrix(n: usize) -> Vec<Vec<f64>> {
    let nf = n as f64;
    (0..n)
        .map(|c| {
            let scale = if c == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            (0..n)
                .map(|m| scale * (PI * c as f64 * (2 * m + 1) as f64 / (2.0 * nf)).cos())
                .collect()
        })
        .collect()
}

/// `n_frames × n_mfcc` cepstral coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    pub n_frames: usize,
    pub n_mfcc: usize,
    data: Vec<f64>,
}

impl MfccMatrix {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.n_mfcc..(m + 1) * self.n_mfcc]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// DCT-II of `ln(eps + x)` per row, keeping the first `n_coeffs`.
pub fn cepstrum(mel: &Spectrogram, n_coeffs: usize, eps: f64) -> MfccMatrix {
    let dct = dct_matrix(mel.n_cols);
    let mut data = Vec::with_capacity(mel.n_frames * n_coeffs);
    let mut logged = vec![0.0; mel.n_cols];
    for frame in mel.rows() {
        for (l, &v) in logged.iter_mut().zip(frame) {
            *l = (eps + v).ln();
        }
        for basis in dct.iter().take(n_coeffs) {
            data.push(basis.iter().zip(&logged).map(|(b, x)| b * x).sum());
        }
    }
    MfccMatrix {
        n_frames: mel.n_frames,
        n_mfcc: n_coeffs,
        data,
    }
}

pub fn mfcc(power: &Spectrogram, fb: &MelFilterbank, cfg: &DspConfig) -> Result<MfccMatrix, DspError> {
    if cfg.n_mfcc > fb.n_mels {
        return Err(DspError::ShapeMismatch(format!(
            "n_mfcc {} exceeds {} mel bands",
            cfg.n_mfcc, fb.n_mels
        )));
    }
    let mel = mel_energies(power, fb)?;
    Ok(cepstrum(&mel, cfg.n_mfcc, cfg.log_floor_eps))
}

/// Write a matrix as CSV preceded by a single JSON line echoing `cfg`.
pub fn export_matrix_csv<W: Write>(
    mut w: W,
    cfg: &DspConfig,
    n_cols: usize,
    values: &[f64],
) -> Result<(), DspError> {
    let header = serde_json::to_string(cfg).map_err(|e| DspError::Export(e.to_string()))?;
    let io = |e: std::io::Error| DspError::Export(e.to_string());
    writeln!(w, "{header}").map_err(io)?;
    for row in values.chunks(n_cols.max(1)) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    Ok(())
}

/// Inverse of [`export_matrix_csv`]: returns the config echo and rows.
pub fn import_matrix_csv<R: BufRead>(r: R) -> Result<(DspConfig, Vec<Vec<f64>>), DspError> {
    let mut lines = r.lines();
    let export = |m: String| DspError::Export(m);
    let header = lines
        .next()
        .ok_or_else(|| export("empty matrix file".into()))?
        .map_err(|e| export(e.to_string()))?;
    let cfg: DspConfig = serde_json::from_str(&header).map_err(|e| export(e.to_string()))?;
    let mut rows = Vec::new();
    for line in lines {
        let line = line.map_err(|e| export(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| export(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((cfg, rows))
}
