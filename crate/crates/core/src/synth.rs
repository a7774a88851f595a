//! Synthetic bowel-sound corpora.
//!
//! Each pattern has a simple generative model:
//!
//! * `SB`: exponentially damped sinusoid near 400 Hz, 10–30 ms, envelope
//!   falling to 5 % of its peak at the event end.
//! * `MB`: 2–5 SB-like components separated by irregular silent gaps,
//!   40–1500 ms in total.
//! * `CRS`: Gaussian noise band-passed to 500–1700 Hz (zero-phase
//!   Butterworth) under a slowly varying random envelope, 200–4000 ms.
//! * `HS`: 3–4 harmonics of a fundamental near 200 Hz with `1/k`
//!   amplitudes, 50–1500 ms.
//!
//! Every event is peak-normalised to [`EVENT_PEAK`]. Recordings place events
//! at uniformly random non-overlapping positions over a Gaussian noise floor.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Annotation, AnnotatedRecording, PatternLabel, Waveform, WaveformError};

pub const EVENT_PEAK: f64 = 0.9;

/// Event-class shares of SB, MB, CRS and HS.
pub const DEFAULT_MIXTURE: [f64; 4] = [0.5853, 0.2178, 0.1724, 0.0245];

/// Noise reference used when a recording has no events: the power of a
/// sinusoid peaking at [`EVENT_PEAK`].
const REFERENCE_EVENT_POWER: f64 = EVENT_PEAK * EVENT_PEAK / 2.0;

/// Minimum silence kept between neighbouring events.
const MIN_EVENT_GAP_S: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("cannot synthesize an event for the non-BS class")]
    InvalidPattern,
    #[error("invalid corpus config: {0}")]
    InvalidConfig(String),
    #[error("subject {subject}: could not place event {event}: no room left without overlap")]
    PlacementFailure { subject: String, event: usize },
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.min..=self.max).contains(&v)
    }

    fn check(&self, name: &str) -> Result<(), SynthError> {
        if self.min > 0.0 && self.max > self.min && self.max.is_finite() {
            Ok(())
        } else {
            Err(SynthError::InvalidConfig(format!(
                "{name} must satisfy 0 < min < max, got [{}, {}]",
                self.min, self.max
            )))
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        rng.random_range(self.min..=self.max)
    }

    /// Uniform sample count whose duration (in ms) stays inside the range.
    fn sample_len(&self, rng: &mut impl Rng, sample_rate_hz: u32) -> usize {
        let (lo, hi) = self.len_bounds(sample_rate_hz);
        let n = (self.sample(rng) * 1e-3 * f64::from(sample_rate_hz)).round() as usize;
        n.clamp(lo, hi)
    }

    fn len_bounds(&self, sample_rate_hz: u32) -> (usize, usize) {
        let sr = f64::from(sample_rate_hz);
        let lo = (self.min * 1e-3 * sr).ceil() as usize;
        let hi = (self.max * 1e-3 * sr).floor() as usize;
        (lo.max(1), hi.max(lo.max(1)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbParams {
    pub duration_ms: Range,
    pub carrier_center_hz: f64,
    pub carrier_spread_hz: f64,
    /// Envelope level (relative to peak) reached at the last sample.
    pub end_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbParams {
    pub duration_ms: Range,
    pub components: (usize, usize),
    pub gap_ms: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrsParams {
    pub duration_ms: Range,
    pub passband_hz: Range,
    /// Depth of the random amplitude modulation, in `[0, 1)`.
    pub roughness: f64,
    /// Upper rate of envelope fluctuations.
    pub modulation_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsParams {
    pub duration_ms: Range,
    pub fundamental_hz: Range,
    pub harmonics: (usize, usize),
    /// Amplitude of harmonic `k` is `k^-rolloff`.
    pub rolloff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternParams {
    pub sb: SbParams,
    pub mb: MbParams,
    pub crs: CrsParams,
    pub hs: HsParams,
}

impl Default for PatternParams {
    fn default() -> Self {
        Self {
            sb: SbParams {
                duration_ms: Range::new(10.0, 30.0),
                carrier_center_hz: 400.0,
                carrier_spread_hz: 50.0,
                end_level: 0.05,
            },
            mb: MbParams {
                duration_ms: Range::new(40.0, 1500.0),
                components: (2, 5),
                gap_ms: Range::new(20.0, 350.0),
            },
            crs: CrsParams {
                duration_ms: Range::new(200.0, 4000.0),
                passband_hz: Range::new(500.0, 1700.0),
                roughness: 0.6,
                modulation_hz: 12.0,
            },
            hs: HsParams {
                duration_ms: Range::new(50.0, 1500.0),
                fundamental_hz: Range::new(170.0, 230.0),
                harmonics: (3, 4),
                rolloff: 1.0,
            },
        }
    }
}

impl PatternParams {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        self.sb.duration_ms.check("sb.duration_ms")?;
        self.mb.duration_ms.check("mb.duration_ms")?;
        self.mb.gap_ms.check("mb.gap_ms")?;
        self.crs.duration_ms.check("crs.duration_ms")?;
        self.crs.passband_hz.check("crs.passband_hz")?;
        self.hs.duration_ms.check("hs.duration_ms")?;
        self.hs.fundamental_hz.check("hs.fundamental_hz")?;
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        if self.crs.passband_hz.max >= nyquist {
            return bad(format!("crs passband upper edge must be below Nyquist ({nyquist} Hz)"));
        }
        if self.sb.carrier_center_hz + self.sb.carrier_spread_hz >= nyquist
            || self.sb.carrier_spread_hz < 0.0
            || self.sb.carrier_center_hz <= self.sb.carrier_spread_hz
        {
            return bad("sb carrier must lie in (0, Nyquist)".into());
        }
        if !(self.sb.end_level > 0.0 && self.sb.end_level < 1.0) {
            return bad("sb.end_level must lie in (0, 1)".into());
        }
        let (lo, hi) = self.mb.components;
        if lo < 2 || hi < lo {
            return bad("mb.components must satisfy 2 <= min <= max".into());
        }
        let (lo, hi) = self.hs.harmonics;
        if lo < 1 || hi < lo {
            return bad("hs.harmonics must satisfy 1 <= min <= max".into());
        }
        if self.hs.fundamental_hz.max * hi as f64 >= nyquist {
            return bad("highest hs harmonic must stay below Nyquist".into());
        }
        if !(0.0..1.0).contains(&self.crs.roughness) || !(self.crs.modulation_hz > 0.0) {
            return bad("crs.roughness must lie in [0, 1) and modulation_hz be positive".into());
        }
        Ok(())
    }

    pub fn duration_range(&self, label: PatternLabel) -> Option<Range> {
        match label {
            PatternLabel::NonBS => None,
            PatternLabel::SB => Some(self.sb.duration_ms),
            PatternLabel::MB => Some(self.mb.duration_ms),
            PatternLabel::CRS => Some(self.crs.duration_ms),
            PatternLabel::HS => Some(self.hs.duration_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub n_subjects: usize,
    pub recording_len_s: f64,
    pub events_per_minute: f64,
    /// Shares of SB, MB, CRS, HS.
    pub class_mixture: [f64; 4],
    pub noise_floor_snr_db: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
    pub patterns: PatternParams,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_subjects: 16,
            recording_len_s: 60.0,
            events_per_minute: 15.0,
            class_mixture: DEFAULT_MIXTURE,
            noise_floor_snr_db: 15.0,
            sample_rate_hz: 44100,
            seed: 0,
            patterns: PatternParams::default(),
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        let sum: f64 = self.class_mixture.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.class_mixture.iter().any(|&p| p < 0.0) {
            return bad(format!("class_mixture must be a probability vector, sums to {sum}"));
        }
        if !(self.events_per_minute >= 0.0) {
            return bad("events_per_minute must be >= 0".into());
        }
        if !(self.recording_len_s > 0.0) {
            return bad("recording_len_s must be positive".into());
        }
        if !self.noise_floor_snr_db.is_finite() {
            return bad("noise_floor_snr_db must be finite".into());
        }
        if self.sample_rate_hz < crate::types::MIN_SAMPLE_RATE_HZ {
            return bad(format!("sample rate {} Hz too low", self.sample_rate_hz));
        }
        self.patterns.validate(self.sample_rate_hz)
    }

    /// Identifier of the subject at `index`, zero-padded to a common width.
    pub fn subject_id(&self, index: usize) -> String {
        let width = self.n_subjects.max(1).to_string().len().max(2);
        format!("S{:0width$}", index + 1)
    }

    /// Per-subject generator, independent of scheduling order.
    pub fn subject_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// One event waveform, peak-normalised.
pub fn synth_event(
    pattern: PatternLabel,
    params: &PatternParams,
    sample_rate_hz: u32,
    rng: &mut impl Rng,
) -> Result<Waveform, SynthError> {
    let samples = match pattern {
        PatternLabel::NonBS => return Err(SynthError::InvalidPattern),
        PatternLabel::SB => single_burst(&params.sb, sample_rate_hz, rng),
        PatternLabel::MB => multiple_burst(params, sample_rate_hz, rng),
        PatternLabel::CRS => continuous_random(&params.crs, sample_rate_hz, rng),
        PatternLabel::HS => harmonic(&params.hs, sample_rate_hz, rng),
    };
    Ok(Waveform::new(normalize_peak(samples), sample_rate_hz)?)
}

fn normalize_peak(mut x: Vec<f64>) -> Vec<f64> {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = EVENT_PEAK / peak;
        x.iter_mut().for_each(|v| *v *= g);
    }
    x
}

fn damped_sinusoid(n: usize, freq_hz: f64, end_level: f64, sample_rate_hz: u32) -> Vec<f64> {
    let sr = f64::from(sample_rate_hz);
    // envelope exp(-t/tau) hits end_level at the last sample
    let span = (n.max(2) - 1) as f64;
    let decay = -end_level.ln() / span;
    (0..n)
        .map(|i| (-decay * i as f64).exp() * (2.0 * PI * freq_hz * i as f64 / sr).sin())
        .collect()
}

fn single_burst(p: &SbParams, sample_rate_hz: u32, rng: &mut impl Rng) -> Vec<f64> {
    let n = p.duration_ms.sample_len(rng, sample_rate_hz);
    let f = rng.random_range(
        p.carrier_center_hz - p.carrier_spread_hz..=p.carrier_center_hz + p.carrier_spread_hz,
    );
    damped_sinusoid(n, f, p.end_level, sample_rate_hz)
}

fn multiple_burst(params: &PatternParams, sample_rate_hz: u32, rng: &mut impl Rng) -> Vec<f64> {
    let mb = &params.mb;
    let k = rng.random_range(mb.components.0..=mb.components.1);
    let bursts: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let gain = rng.random_range(0.6..=1.0);
            single_burst(&params.sb, sample_rate_hz, rng)
                .into_iter()
                .map(|v| v * gain)
                .collect()
        })
        .collect();
    let mut gaps: Vec<usize> = (0..k - 1)
        .map(|_| mb.gap_ms.sample_len(rng, sample_rate_hz))
        .collect();
    let burst_total: usize = bursts.iter().map(Vec::len).sum();
    let (lo, hi) = mb.duration_ms.len_bounds(sample_rate_hz);
    let gap_total: usize = gaps.iter().sum();
    let total = burst_total + gap_total;
    if total < lo || total > hi {
        // rescale the gaps so the whole event fits the duration range
        let target_gaps = total.clamp(lo, hi).saturating_sub(burst_total);
        let mut assigned = 0usize;
        for (i, g) in gaps.iter_mut().enumerate() {
            let share = if i + 1 == k - 1 {
                target_gaps - assigned
            } else {
                ((*g as f64 / gap_total as f64) * target_gaps as f64).floor() as usize
            };
            *g = share;
            assigned += share;
        }
    }
    let mut out = Vec::with_capacity(burst_total + gaps.iter().sum::<usize>());
    for (i, b) in bursts.iter().enumerate() {
        out.extend_from_slice(b);
        if let Some(&g) = gaps.get(i) {
            out.extend(std::iter::repeat_n(0.0, g));
        }
    }
    out
}

/// Direct-form-I biquad.
#[derive(Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn lowpass(f0: f64, q: f64, sr: f64) -> Self {
        let w0 = 2.0 * PI * f0 / sr;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(f0: f64, q: f64, sr: f64) -> Self {
        let w0 = 2.0 * PI * f0 / sr;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b[0] * *v + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = *v;
            y2 = y1;
            y1 = y;
            *v = y;
        }
    }
}

/// Fourth-order Butterworth high-pass and low-pass sections in cascade,
/// applied forward then backward.
fn bandpass_zero_phase(x: &mut [f64], band: Range, sample_rate_hz: u32) {
    let sr = f64::from(sample_rate_hz);
    let qs = [
        1.0 / (2.0 * (PI / 8.0).cos()),
        1.0 / (2.0 * (3.0 * PI / 8.0).cos()),
    ];
    let sections: Vec<Biquad> = qs
        .iter()
        .map(|&q| Biquad::highpass(band.min, q, sr))
        .chain(qs.iter().map(|&q| Biquad::lowpass(band.max, q, sr)))
        .collect();
    for s in &sections {
        s.run(x);
    }
    x.reverse();
    for s in &sections {
        s.run(x);
    }
    x.reverse();
}

/// Raised-cosine fade in/out over `n_fade` samples.
fn apply_fades(x: &mut [f64], n_fade: usize) {
    let n_fade = n_fade.min(x.len() / 2);
    let n = x.len();
    for i in 0..n_fade {
        let g = 0.5 - 0.5 * (PI * (i as f64 + 0.5) / n_fade as f64).cos();
        x[i] *= g;
        x[n - 1 - i] *= g;
    }
}

fn continuous_random(p: &CrsParams, sample_rate_hz: u32, rng: &mut impl Rng) -> Vec<f64> {
    let sr = f64::from(sample_rate_hz);
    let n = p.duration_ms.sample_len(rng, sample_rate_hz);
    let pad = (0.05 * sr) as usize;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x: Vec<f64> = (0..n + 2 * pad).map(|_| normal.sample(rng)).collect();
    bandpass_zero_phase(&mut x, p.passband_hz, sample_rate_hz);
    let mut x = x[pad..pad + n].to_vec();

    // slowly varying envelope: a few random low-frequency partials
    let partials: Vec<(f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.5..=p.modulation_hz),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let u: f64 = partials
            .iter()
            .map(|&(f, ph)| (2.0 * PI * f * t + ph).sin())
            .sum::<f64>()
            / partials.len() as f64;
        *v *= 1.0 - p.roughness * 0.5 * (1.0 + u);
    }
    apply_fades(&mut x, (0.01 * sr) as usize);
    x
}

fn harmonic(p: &HsParams, sample_rate_hz: u32, rng: &mut impl Rng) -> Vec<f64> {
    let sr = f64::from(sample_rate_hz);
    let n = p.duration_ms.sample_len(rng, sample_rate_hz);
    let f0 = p.fundamental_hz.sample(rng);
    let count = rng.random_range(p.harmonics.0..=p.harmonics.1);
    let phases: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            phases
                .iter()
                .enumerate()
                .map(|(k, ph)| {
                    let h = (k + 1) as f64;
                    h.powf(-p.rolloff) * (2.0 * PI * h * f0 * t + ph).sin()
                })
                .sum()
        })
        .collect();
    apply_fades(&mut x, (0.005 * sr) as usize);
    x
}

/// Draw a pattern from the SB/MB/CRS/HS mixture.
fn draw_pattern(mixture: &[f64; 4], rng: &mut impl Rng) -> PatternLabel {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (p, label) in mixture.iter().zip(PatternLabel::PATTERNS) {
        acc += p;
        if u < acc {
            return label;
        }
    }
    *PatternLabel::PATTERNS
        .iter()
        .rev()
        .zip(mixture.iter().rev())
        .find(|(_, &p)| p > 0.0)
        .map(|(l, _)| l)
        .unwrap_or(&PatternLabel::SB)
}

/// One subject's recording with annotations that exactly cover the placed events.
pub fn synth_recording(
    cfg: &CorpusConfig,
    subject_id: &str,
    rng: &mut impl Rng,
) -> Result<AnnotatedRecording, SynthError> {
    cfg.validate()?;
    let sr = cfg.sample_rate_hz;
    let n_total = (cfg.recording_len_s * f64::from(sr)).round() as usize;
    let expected = cfg.events_per_minute * cfg.recording_len_s / 60.0;
    let n_events = if expected > 0.0 {
        Poisson::new(expected).expect("positive rate").sample(rng) as usize
    } else {
        0
    };

    let min_gap = (MIN_EVENT_GAP_S * f64::from(sr)).round() as usize;
    let mut drawn: Vec<(Vec<f64>, PatternLabel)> = Vec::with_capacity(n_events);
    for _ in 0..n_events {
        let label = draw_pattern(&cfg.class_mixture, rng);
        drawn.push((synth_event(label, &cfg.patterns, sr, rng)?.into_samples(), label));
    }
    // Events keep draw order (already exchangeable). The slack left after the
    // events and their minimum gaps is split by sorted uniform cut points,
    // which is uniform over all non-overlapping layouts for that order.
    let mut needed = 0usize;
    for (event, (w, _)) in drawn.iter().enumerate() {
        needed += w.len() + if event > 0 { min_gap } else { 0 };
        if needed > n_total {
            return Err(SynthError::PlacementFailure {
                subject: subject_id.to_string(),
                event,
            });
        }
    }
    let slack = n_total - needed;
    let mut cuts: Vec<usize> = (0..drawn.len()).map(|_| rng.random_range(0..=slack)).collect();
    cuts.sort_unstable();
    let mut offset = 0usize;
    let mut placed: Vec<(usize, Vec<f64>, PatternLabel)> = Vec::with_capacity(n_events);
    for (cut, (w, label)) in cuts.into_iter().zip(drawn) {
        let len = w.len();
        placed.push((offset + cut, w, label));
        offset += len + min_gap;
    }

    let event_power = if placed.is_empty() {
        REFERENCE_EVENT_POWER
    } else {
        placed
            .iter()
            .map(|(_, w, _)| w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64)
            .sum::<f64>()
            / placed.len() as f64
    };
    let noise_std = (event_power / 10f64.powf(cfg.noise_floor_snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, noise_std).expect("finite noise level");
    let mut samples: Vec<f64> = (0..n_total).map(|_| normal.sample(rng)).collect();
    let srf = f64::from(sr);
    let mut events = Vec::with_capacity(placed.len());
    for (s, w, label) in &placed {
        for (dst, v) in samples[*s..*s + w.len()].iter_mut().zip(w) {
            *dst += v;
        }
        events.push(Annotation::new(
            *s as f64 / srf,
            (*s + w.len()) as f64 / srf,
            *label,
        ));
    }
    samples.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));

    Ok(AnnotatedRecording {
        subject_id: subject_id.to_string(),
        waveform: Waveform::new(samples, sr)?,
        events,
    })
}

/// Recording for subject `index`, seeded independently of other subjects.
pub fn synth_subject(cfg: &CorpusConfig, index: usize) -> Result<AnnotatedRecording, SynthError> {
    let mut rng = cfg.subject_rng(index);
    synth_recording(cfg, &cfg.subject_id(index), &mut rng)
}

pub fn synth_corpus(cfg: &CorpusConfig) -> Result<Vec<AnnotatedRecording>, SynthError> {
    cfg.validate()?;
    (0..cfg.n_subjects)
        .into_par_iter()
        .map(|i| synth_subject(cfg, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_recording;

    const SR: u32 = 44100;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn duration_ms(wf: &Waveform) -> f64 {
        wf.duration_s() * 1e3
    }

    #[test]
    fn non_bs_is_rejected() {
        let p = PatternParams::default();
        assert!(matches!(
            synth_event(PatternLabel::NonBS, &p, SR, &mut rng(1)),
            Err(SynthError::InvalidPattern)
        ));
    }

    #[test]
    fn sb_duration_seed_one() {
        let wf = synth_event(PatternLabel::SB, &PatternParams::default(), SR, &mut rng(1)).unwrap();
        let d = duration_ms(&wf);
        assert!((10.0..=30.0).contains(&d), "{d} ms");
    }

    #[test]
    fn durations_stay_in_range() {
        let p = PatternParams::default();
        let mut r = rng(7);
        for label in PatternLabel::PATTERNS {
            let range = p.duration_range(label).unwrap();
            // CRS events are long; fewer draws keep the test quick
            let n = if label == PatternLabel::CRS { 1000 } else { 1500 };
            for _ in 0..n {
                let wf = synth_event(label, &p, SR, &mut r).unwrap();
                let d = duration_ms(&wf);
                assert!(range.contains(d), "{label}: {d} ms outside {range:?}");
            }
        }
    }

    #[test]
    fn events_are_peak_normalised() {
        let p = PatternParams::default();
        let mut r = rng(3);
        for label in PatternLabel::PATTERNS {
            let wf = synth_event(label, &p, SR, &mut r).unwrap();
            let peak = wf.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((peak - EVENT_PEAK).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rate_gives_pure_noise() {
        let cfg = CorpusConfig {
            events_per_minute: 0.0,
            n_subjects: 1,
            recording_len_s: 5.0,
            ..CorpusConfig::default()
        };
        let rec = synth_subject(&cfg, 0).unwrap();
        assert!(rec.events.is_empty());
        let rms = (rec.waveform.samples().iter().map(|v| v * v).sum::<f64>()
            / rec.waveform.len() as f64)
            .sqrt();
        let expected = (REFERENCE_EVENT_POWER / 10f64.powf(1.5)).sqrt();
        assert!((rms / expected - 1.0).abs() < 0.02, "{rms} vs {expected}");
    }

    #[test]
    fn recordings_satisfy_core_invariants() {
        let cfg = CorpusConfig {
            n_subjects: 4,
            events_per_minute: 30.0,
            ..CorpusConfig::default()
        };
        for rec in synth_corpus(&cfg).unwrap() {
            assert_eq!(validate_recording(&rec), vec![]);
            assert!(!rec.events.is_empty());
        }
    }

    #[test]
    fn corpus_is_seed_deterministic() {
        let cfg = CorpusConfig {
            n_subjects: 3,
            recording_len_s: 10.0,
            seed: 99,
            ..CorpusConfig::default()
        };
        let a = synth_corpus(&cfg).unwrap();
        let b = synth_corpus(&cfg).unwrap();
        assert_eq!(a, b);
        let c = synth_corpus(&CorpusConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a[0].waveform, c[0].waveform);
    }

    #[test]
    fn subject_ids_distinct() {
        let cfg = CorpusConfig {
            recording_len_s: 2.0,
            events_per_minute: 0.0,
            ..CorpusConfig::default()
        };
        let corpus = synth_corpus(&cfg).unwrap();
        assert_eq!(corpus.len(), 16);
        let mut ids: Vec<_> = corpus.iter().map(|r| r.subject_id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 16);
        assert_eq!(ids[0], "S01");
        assert!(synth_corpus(&CorpusConfig { n_subjects: 0, ..cfg }).unwrap().is_empty());
    }

    #[test]
    fn overcrowded_recording_fails() {
        let cfg = CorpusConfig {
            recording_len_s: 3.0,
            events_per_minute: 2000.0,
            class_mixture: [0.0, 0.0, 1.0, 0.0],
            ..CorpusConfig::default()
        };
        assert!(matches!(
            synth_subject(&cfg, 0),
            Err(SynthError::PlacementFailure { .. })
        ));
    }

    #[test]
    fn mixture_validation() {
        let cfg = CorpusConfig {
            class_mixture: [0.5, 0.5, 0.5, 0.0],
            ..CorpusConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(SynthError::InvalidConfig(_))));
        let mut p = PatternParams::default();
        p.crs.passband_hz = Range::new(500.0, 5000.0);
        assert!(p.validate(8000).is_err());
    }
}
