//! Per-segment feature extraction.
//!
//! Three feature kinds are produced from one STFT pass:
//!
//! * [`FeatureKind::Tabular`]: nine frame-level descriptors, each summarised
//!   by seven functionals, plus three segment-level activity features
//!   (66 columns, see [`tabular_spec`]).
//! * [`FeatureKind::MfccStats`]: mean, std, min and max of every MFCC over time.
//! * [`FeatureKind::Mfcc`]: the full MFCC matrix, flattened frame-major.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{self, bin_frequencies, DspConfig, DspError, MelFilterbank, StftPlan};
use crate::types::{parse_label, PatternLabel, Segment};

pub const TABULAR_VERSION: &str = "bs-tabular-1";

/// Activity threshold in dBFS (RMS, full scale = 1.0).
pub const ACTIVITY_THRESHOLD_DBFS: f64 = -40.0;
/// Block length of the fine energy envelope used for bursts and active duration.
pub const ENVELOPE_BLOCK_S: f64 = 0.005;
const ROLLOFF_FRACTION: f64 = 0.85;
/// Lag search window of the periodicity proxy, in seconds.
const AUTOCORR_LAG_S: (f64, f64) = (0.0005, 0.010);

pub const DESCRIPTORS: [&str; 9] = [
    "rms",
    "log_energy",
    "zcr",
    "spectral_centroid",
    "spectral_rolloff",
    "spectral_flux",
    "spectral_flatness",
    "dominant_freq",
    "autocorr_peak_lag",
];

pub const FUNCTIONALS: [&str; 7] = ["mean", "std", "min", "max", "p20", "p50", "p80"];

pub const SEGMENT_FEATURES: [&str; 3] = ["active_fraction", "burst_count", "active_duration_s"];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("segment {index} has {got} samples, expected {expected}")]
    LengthMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("segments mix sample rates {0} and {1} Hz")]
    MixedSampleRates(u32, u32),
    #[error("no segments to extract")]
    Empty,
    #[error("feature csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Tabular,
    MfccStats,
    Mfcc,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::Tabular, FeatureKind::MfccStats, FeatureKind::Mfcc];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Tabular => "tabular",
            FeatureKind::MfccStats => "mfcc-stats",
            FeatureKind::Mfcc => "mfcc",
        }
    }

    /// Version tag of the matrices this kind produces.
    pub fn version(self) -> &'static str {
        match self {
            FeatureKind::Tabular => TABULAR_VERSION,
            FeatureKind::MfccStats => "bs-mfcc-stats-1",
            FeatureKind::Mfcc => "bs-mfcc-flat-1",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown feature kind {s:?}"))
    }
}

/// Ordered column names plus a version tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub version: String,
    pub names: Vec<String>,
}

impl FeatureSpec {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

pub fn tabular_spec() -> FeatureSpec {
    let mut names: Vec<String> = DESCRIPTORS
        .iter()
        .flat_map(|d| FUNCTIONALS.iter().map(move |f| format!("{d}_{f}")))
        .collect();
    names.extend(SEGMENT_FEATURES.iter().map(|s| s.to_string()));
    FeatureSpec {
        version: TABULAR_VERSION.into(),
        names,
    }
}

pub fn mfcc_stats_spec(cfg: &DspConfig) -> FeatureSpec {
    let names = ["mean", "std", "min", "max"]
        .iter()
        .flat_map(|stat| (0..cfg.n_mfcc).map(move |c| format!("mfcc{c}_{stat}")))
        .collect();
    FeatureSpec {
        version: FeatureKind::MfccStats.version().into(),
        names,
    }
}

pub fn mfcc_flat_spec(cfg: &DspConfig, n_frames: usize) -> FeatureSpec {
    let names = (0..n_frames)
        .flat_map(|t| (0..cfg.n_mfcc).map(move |c| format!("t{t}_mfcc{c}")))
        .collect();
    FeatureSpec {
        version: FeatureKind::Mfcc.version().into(),
        names,
    }
}

pub fn spec_for(kind: FeatureKind, cfg: &DspConfig, segment_len: usize) -> FeatureSpec {
    match kind {
        FeatureKind::Tabular => tabular_spec(),
        FeatureKind::MfccStats => mfcc_stats_spec(cfg),
        FeatureKind::Mfcc => mfcc_flat_spec(cfg, cfg.n_frames(segment_len)),
    }
}

/// `[n_segments × n_features]` with row-aligned labels and subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub spec: FeatureSpec,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<PatternLabel>,
    pub subject_ids: Vec<String>,
    pub origins_s: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.spec.len()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            spec: self.spec.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            subject_ids: indices.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            origins_s: indices.iter().map(|&i| self.origins_s[i]).collect(),
        }
    }

    /// CSV with the spec names, then `label`, `subject_id` and `origin_s`.
    /// Values use Rust's shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let mut header: Vec<&str> = self.spec.names.iter().map(String::as_str).collect();
        header.extend(["label", "subject_id", "origin_s"]);
        out.write_record(&header).map_err(csv_err)?;
        for i in 0..self.n_rows() {
            let mut record: Vec<String> = self.rows[i].iter().map(|v| v.to_string()).collect();
            record.push(self.labels[i].to_string());
            record.push(self.subject_ids[i].clone());
            record.push(self.origins_s[i].to_string());
            out.write_record(&record).map_err(csv_err)?;
        }
        out.flush().map_err(|e| FeatureError::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R, version: &str) -> Result<FeatureMatrix, FeatureError> {
        let mut reader = csv::Reader::from_reader(r);
        let csv_err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let header = reader.headers().map_err(csv_err)?.clone();
        let n = header.len();
        if n < 3 || &header[n - 3] != "label" || &header[n - 2] != "subject_id" || &header[n - 1] != "origin_s" {
            return Err(FeatureError::Csv("missing label/subject_id/origin_s columns".into()));
        }
        let spec = FeatureSpec {
            version: version.into(),
            names: header.iter().take(n - 3).map(String::from).collect(),
        };
        let mut m = FeatureMatrix {
            spec,
            rows: Vec::new(),
            labels: Vec::new(),
            subject_ids: Vec::new(),
            origins_s: Vec::new(),
        };
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let bad = |what: &str| FeatureError::Csv(format!("row {}: bad {what}", i + 2));
            let row = rec
                .iter()
                .take(n - 3)
                .map(|v| v.parse::<f64>().map_err(|_| bad("value")))
                .collect::<Result<Vec<_>, _>>()?;
            m.rows.push(row);
            m.labels.push(parse_label(&rec[n - 3]).map_err(|_| bad("label"))?);
            m.subject_ids.push(rec[n - 2].to_string());
            m.origins_s.push(rec[n - 1].parse().map_err(|_| bad("origin"))?);
        }
        Ok(m)
    }
}

/// Functionals over a descriptor track: mean, std, min, max, p20, p50, p80.
pub fn functionals(values: &[f64]) -> [f64; 7] {
    if values.is_empty() {
        return [0.0; 7];
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    [
        mean,
        var.sqrt(),
        sorted[0],
        sorted[sorted.len() - 1],
        percentile(&sorted, 0.2),
        percentile(&sorted, 0.5),
        percentile(&sorted, 0.8),
    ]
}

/// Linear-interpolation percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn zero_crossing_rate(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let crossings = x
        .windows(2)
        .filter(|w| (w[0] > 0.0 && w[1] < 0.0) || (w[0] < 0.0 && w[1] > 0.0))
        .count();
    crossings as f64 / (x.len() - 1) as f64
}

/// Everything derived from one segment's STFT.
#[derive(Debug, Clone, Default)]
pub struct SegmentFeatures {
    pub tabular: Option<Vec<f64>>,
    pub mfcc_stats: Option<Vec<f64>>,
    pub mfcc: Option<Vec<f64>>,
}

impl SegmentFeatures {
    pub fn get(&self, kind: FeatureKind) -> Option<&Vec<f64>> {
        match kind {
            FeatureKind::Tabular => self.tabular.as_ref(),
            FeatureKind::MfccStats => self.mfcc_stats.as_ref(),
            FeatureKind::Mfcc => self.mfcc.as_ref(),
        }
    }

    pub fn take(&mut self, kind: FeatureKind) -> Option<Vec<f64>> {
        match kind {
            FeatureKind::Tabular => self.tabular.take(),
            FeatureKind::MfccStats => self.mfcc_stats.take(),
            FeatureKind::Mfcc => self.mfcc.take(),
        }
    }
}

/// Reusable extractor for one DSP configuration and sample rate.
pub struct FeatureExtractor {
    cfg: DspConfig,
    sample_rate_hz: u32,
    stft: StftPlan,
    inverse: Arc<dyn Fft<f64>>,
    filterbank: MelFilterbank,
    freqs: Vec<f64>,
}

impl FeatureExtractor {
    pub fn new(cfg: &DspConfig, sample_rate_hz: u32) -> Result<Self, FeatureError> {
        let filterbank = dsp::build_filterbank(cfg, sample_rate_hz)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg: cfg.clone(),
            sample_rate_hz,
            stft: StftPlan::new(cfg),
            inverse: planner.plan_fft_inverse(cfg.n_fft),
            filterbank,
            freqs: bin_frequencies(cfg.n_fft, sample_rate_hz),
        })
    }

    pub fn config(&self) -> &DspConfig {
        &self.cfg
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn extract(&self, samples: &[f64], kinds: &[FeatureKind]) -> Result<SegmentFeatures, FeatureError> {
        let cs = self.stft.process(samples, self.sample_rate_hz)?;
        let power = dsp::power_spectrogram(&cs);
        let want = |k| kinds.contains(&k);
        let tabular = want(FeatureKind::Tabular).then(|| self.tabular(samples, &cs, &power));
        let mfcc = if want(FeatureKind::MfccStats) || want(FeatureKind::Mfcc) {
            Some(dsp::mfcc(&power, &self.filterbank, &self.cfg)?)
        } else {
            None
        };
        let mfcc_stats = match (&mfcc, want(FeatureKind::MfccStats)) {
            (Some(m), true) => Some(mfcc_statistics(m)),
            _ => None,
        };
        let mfcc = mfcc.filter(|_| want(FeatureKind::Mfcc)).map(dsp::MfccMatrix::into_vec);
        Ok(SegmentFeatures {
            tabular,
            mfcc_stats,
            mfcc,
        })
    }

    fn tabular(&self, samples: &[f64], cs: &dsp::ComplexSpectrogram, power: &dsp::Spectrogram) -> Vec<f64> {
        let n_frames = cs.n_frames;
        let mut tracks: Vec<Vec<f64>> = vec![Vec::with_capacity(n_frames); DESCRIPTORS.len()];
        let threshold = 10f64.powf(ACTIVITY_THRESHOLD_DBFS / 20.0);
        let sr = f64::from(self.sample_rate_hz);
        let lag_lo = ((AUTOCORR_LAG_S.0 * sr).round() as usize).max(1);
        let lag_hi = ((AUTOCORR_LAG_S.1 * sr).round() as usize).min(self.cfg.n_fft / 2);
        let mut prev_mag: Option<Vec<f64>> = None;
        let mut active_frames = 0usize;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.cfg.n_fft];

        for m in 0..n_frames {
            let frame = &samples[m * self.cfg.hop..m * self.cfg.hop + self.cfg.n_fft];
            let p = power.row(m);
            let total: f64 = p.iter().sum();
            let frame_rms = rms(frame);
            if frame_rms > threshold {
                active_frames += 1;
            }
            tracks[0].push(frame_rms);
            tracks[1].push((frame_rms * frame_rms + 1e-10).ln());
            tracks[2].push(zero_crossing_rate(frame));

            let (centroid, rolloff, flatness, dominant) = if total > 0.0 {
                let centroid = p.iter().zip(&self.freqs).map(|(a, f)| a * f).sum::<f64>() / total;
                let mut acc = 0.0;
                let mut rolloff = self.freqs[self.freqs.len() - 1];
                for (a, f) in p.iter().zip(&self.freqs) {
                    acc += a;
                    if acc >= ROLLOFF_FRACTION * total {
                        rolloff = *f;
                        break;
                    }
                }
                let mean = total / p.len() as f64;
                let floor = 1e-12 * mean;
                let log_mean = p.iter().map(|a| (a + floor).ln()).sum::<f64>() / p.len() as f64;
                let flatness = log_mean.exp() / (mean + floor);
                let k = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap_or(0);
                (centroid, rolloff, flatness, self.freqs[k])
            } else {
                (0.0, 0.0, 0.0, 0.0)
            };
            tracks[3].push(centroid);
            tracks[4].push(rolloff);
            tracks[6].push(flatness);
            tracks[7].push(dominant);

            let mag: Vec<f64> = p.iter().map(|a| a.sqrt()).collect();
            let flux = prev_mag.as_ref().map_or(0.0, |prev| {
                prev.iter()
                    .zip(&mag)
                    .map(|(a, b)| (b - a).powi(2))
                    .sum::<f64>()
                    .sqrt()
            });
            tracks[5].push(flux);
            prev_mag = Some(mag);

            // circular autocorrelation of the windowed frame via |X|²
            let lag_s = if total > 0.0 {
                let n = self.cfg.n_fft;
                buf[0] = Complex64::new(p[0], 0.0);
                for k in 1..n / 2 {
                    buf[k] = Complex64::new(p[k], 0.0);
                    buf[n - k] = Complex64::new(p[k], 0.0);
                }
                buf[n / 2] = Complex64::new(p[n / 2], 0.0);
                self.inverse.process(&mut buf);
                let r0 = buf[0].re;
                let best = (lag_lo..=lag_hi)
                    .max_by(|&a, &b| buf[a].re.total_cmp(&buf[b].re))
                    .filter(|&lag| r0 > 0.0 && buf[lag].re > 0.0);
                best.map_or(0.0, |lag| lag as f64 / sr)
            } else {
                0.0
            };
            tracks[8].push(lag_s);
        }

        let mut out: Vec<f64> = tracks.iter().flat_map(|t| functionals(t)).collect();
        let active_fraction = if n_frames > 0 {
            active_frames as f64 / n_frames as f64
        } else {
            0.0
        };
        let block = ((ENVELOPE_BLOCK_S * sr).round() as usize).max(1);
        let mut bursts = 0usize;
        let mut active_blocks = 0usize;
        let mut was_active = false;
        for chunk in samples.chunks(block) {
            let active = rms(chunk) > threshold;
            if active {
                active_blocks += 1;
                if !was_active {
                    bursts += 1;
                }
            }
            was_active = active;
        }
        out.push(active_fraction);
        out.push(bursts as f64);
        out.push((active_blocks * block).min(samples.len()) as f64 / sr);
        out
    }
}

/// Per-coefficient mean, std, min and max over frames, grouped by statistic.
pub fn mfcc_statistics(m: &dsp::MfccMatrix) -> Vec<f64> {
    let mut out = vec![0.0; 4 * m.n_mfcc];
    for c in 0..m.n_mfcc {
        let track: Vec<f64> = (0..m.n_frames).map(|t| m.row(t)[c]).collect();
        let f = functionals(&track);
        out[c] = f[0];
        out[m.n_mfcc + c] = f[1];
        out[2 * m.n_mfcc + c] = f[2];
        out[3 * m.n_mfcc + c] = f[3];
    }
    out
}

/// The 66 tabular features of one segment.
pub fn extract_features(seg: &Segment, cfg: &DspConfig) -> Result<Vec<f64>, FeatureError> {
    let ex = FeatureExtractor::new(cfg, seg.sample_rate_hz())?;
    Ok(ex
        .extract(seg.samples(), &[FeatureKind::Tabular])?
        .tabular
        .expect("tabular requested"))
}

/// Feature matrix for `segments`, rows in input order. All segments must share
/// one sample rate and length.
pub fn extract_matrix(
    segments: &[Segment],
    cfg: &DspConfig,
    kind: FeatureKind,
) -> Result<FeatureMatrix, FeatureError> {
    let first = segments.first().ok_or(FeatureError::Empty)?;
    let sr = first.sample_rate_hz();
    let len = first.len();
    for (index, s) in segments.iter().enumerate() {
        if s.sample_rate_hz() != sr {
            return Err(FeatureError::MixedSampleRates(sr, s.sample_rate_hz()));
        }
        if s.len() != len {
            return Err(FeatureError::LengthMismatch {
                index,
                got: s.len(),
                expected: len,
            });
        }
    }
    let ex = FeatureExtractor::new(cfg, sr)?;
    let rows = segments
        .par_iter()
        .map(|s| {
            ex.extract(s.samples(), &[kind])
                .map(|mut f| f.take(kind).expect("requested kind"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureMatrix {
        spec: spec_for(kind, cfg, len),
        rows,
        labels: segments.iter().map(|s| s.label).collect(),
        subject_ids: segments.iter().map(|s| s.subject_id.clone()).collect(),
        origins_s: segments.iter().map(|s| s.origin_s).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Waveform;
    use std::f64::consts::PI;

    const SR: u32 = 44100;

    fn segment(samples: Vec<f64>) -> Segment {
        Segment::from_waveform(Waveform::new(samples, SR).unwrap(), PatternLabel::NonBS, "s")
    }

    fn feature(spec: &FeatureSpec, values: &[f64], name: &str) -> f64 {
        values[spec.names.iter().position(|n| n == name).unwrap()]
    }

    fn sine(freq: f64, amp: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(SR)).sin())
            .collect()
    }

    #[test]
    fn spec_has_66_unique_names() {
        let spec = tabular_spec();
        assert_eq!(spec.len(), 66);
        let mut names = spec.names.clone();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 66);
        assert_eq!(spec.names[0], "rms_mean");
        assert_eq!(spec.names[65], "active_duration_s");
    }

    #[test]
    fn silence_conventions() {
        let spec = tabular_spec();
        let f = extract_features(&segment(vec![0.0; 88200]), &DspConfig::default()).unwrap();
        assert_eq!(f.len(), 66);
        assert!(f.iter().all(|v| v.is_finite()));
        assert_eq!(feature(&spec, &f, "rms_mean"), 0.0);
        assert_eq!(feature(&spec, &f, "zcr_mean"), 0.0);
        assert_eq!(feature(&spec, &f, "spectral_centroid_mean"), 0.0);
        assert_eq!(feature(&spec, &f, "active_fraction"), 0.0);
        assert_eq!(feature(&spec, &f, "burst_count"), 0.0);
    }

    #[test]
    fn sine_centroid() {
        let spec = tabular_spec();
        let f = extract_features(&segment(sine(1000.0, 0.5, 88200)), &DspConfig::default()).unwrap();
        let centroid = feature(&spec, &f, "spectral_centroid_mean");
        assert!((centroid - 1000.0).abs() <= 25.0, "{centroid}");
        let dominant = feature(&spec, &f, "dominant_freq_p50");
        assert!((dominant - 1000.0).abs() <= 44100.0 / 2048.0);
        assert_eq!(feature(&spec, &f, "active_fraction"), 1.0);
        assert_eq!(feature(&spec, &f, "burst_count"), 1.0);
        let lag = feature(&spec, &f, "autocorr_peak_lag_p50");
        assert!((lag - 1e-3).abs() < 2.0 / 44100.0, "{lag}");
    }

    #[test]
    fn scale_invariance() {
        let spec = tabular_spec();
        let cfg = DspConfig::default();
        let base: Vec<f64> = sine(700.0, 0.2, 88200)
            .iter()
            .zip(sine(2300.0, 0.1, 88200))
            .map(|(a, b)| a + b)
            .collect();
        let doubled: Vec<f64> = base.iter().map(|v| 2.0 * v).collect();
        let a = extract_features(&segment(base), &cfg).unwrap();
        let b = extract_features(&segment(doubled), &cfg).unwrap();
        for d in ["zcr", "spectral_centroid", "spectral_rolloff", "spectral_flatness"] {
            for f in FUNCTIONALS {
                let name = format!("{d}_{f}");
                let (x, y) = (feature(&spec, &a, &name), feature(&spec, &b, &name));
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{name}: {x} vs {y}");
            }
        }
        let (x, y) = (feature(&spec, &a, "rms_mean"), feature(&spec, &b, "rms_mean"));
        assert!((y - 2.0 * x).abs() < 1e-12);
    }

    #[test]
    fn matrix_shape_and_alignment() {
        let cfg = DspConfig::default();
        let segs: Vec<Segment> = (0..10)
            .map(|i| segment(sine(200.0 + 100.0 * i as f64, 0.3, 88200)))
            .collect();
        let m = extract_matrix(&segs, &cfg, FeatureKind::Tabular).unwrap();
        assert_eq!((m.n_rows(), m.n_features()), (10, 66));
        assert!(m.rows.iter().all(|r| r.len() == 66));

        let mut permuted = segs.clone();
        permuted.reverse();
        let p = extract_matrix(&permuted, &cfg, FeatureKind::Tabular).unwrap();
        for i in 0..10 {
            assert_eq!(p.rows[i], m.rows[9 - i]);
        }
        assert_eq!(extract_matrix(&segs, &cfg, FeatureKind::Tabular).unwrap(), m);
    }

    #[test]
    fn mfcc_kinds() {
        let cfg = DspConfig::default();
        let segs = vec![segment(sine(400.0, 0.3, 88200))];
        let stats = extract_matrix(&segs, &cfg, FeatureKind::MfccStats).unwrap();
        assert_eq!(stats.n_features(), 52);
        assert_eq!(stats.rows[0].len(), 52);
        let flat = extract_matrix(&segs, &cfg, FeatureKind::Mfcc).unwrap();
        assert_eq!(flat.n_features(), 169 * 13);
        assert_eq!(flat.rows[0].len(), 169 * 13);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let cfg = DspConfig::default();
        assert!(matches!(
            extract_matrix(&[], &cfg, FeatureKind::Tabular),
            Err(FeatureError::Empty)
        ));
        let segs = vec![segment(vec![0.0; 88200]), segment(vec![0.0; 44100])];
        assert!(matches!(
            extract_matrix(&segs, &cfg, FeatureKind::Tabular),
            Err(FeatureError::LengthMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let cfg = DspConfig::default();
        let segs = vec![segment(sine(400.0, 0.3, 88200)), segment(vec![0.0; 88200])];
        let m = extract_matrix(&segs, &cfg, FeatureKind::Tabular).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = FeatureMatrix::read_csv(buf.as_slice(), TABULAR_VERSION).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn functionals_of_known_track() {
        let f = functionals(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(f[0], 3.0);
        assert!((f[1] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!((f[2], f[3]), (1.0, 5.0));
        assert!((f[4] - 1.8).abs() < 1e-12);
        assert_eq!(f[5], 3.0);
        assert!((f[6] - 4.2).abs() < 1e-12);
    }
}
