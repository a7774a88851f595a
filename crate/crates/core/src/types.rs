//! Domain types shared by every stage: the label vocabulary, waveforms,
//! annotations and fixed-length segments.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest sample rate accepted by [`Waveform::new`].
pub const MIN_SAMPLE_RATE_HZ: u32 = 8000;

/// The five segment classes. The derived ordering (`NonBS < SB < MB < CRS < HS`)
/// is the iteration order used everywhere a deterministic class order matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternLabel {
    #[serde(rename = "None")]
    NonBS,
    SB,
    MB,
    CRS,
    HS,
}

impl PatternLabel {
    pub const ALL: [PatternLabel; 5] = [
        PatternLabel::NonBS,
        PatternLabel::SB,
        PatternLabel::MB,
        PatternLabel::CRS,
        PatternLabel::HS,
    ];

    /// The four annotated bowel-sound patterns.
    pub const PATTERNS: [PatternLabel; 4] = [
        PatternLabel::SB,
        PatternLabel::MB,
        PatternLabel::CRS,
        PatternLabel::HS,
    ];

    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn is_bowel_sound(self) -> bool {
        self != PatternLabel::NonBS
    }

    /// Canonical text form; round-trips through [`parse_label`].
    pub fn as_str(self) -> &'static str {
        match self {
            PatternLabel::NonBS => "none",
            PatternLabel::SB => "SB",
            PatternLabel::MB => "MB",
            PatternLabel::CRS => "CRS",
            PatternLabel::HS => "HS",
        }
    }

    /// Column heading used in result tables.
    pub fn table_name(self) -> &'static str {
        match self {
            PatternLabel::NonBS => "None",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown pattern label {0:?}")]
pub struct UnknownLabel(pub String);

/// Case-insensitive parse of `none`, `non-bs`, `sb`, `mb`, `crs`, `hs`.
pub fn parse_label(text: &str) -> Result<PatternLabel, UnknownLabel> {
    match text.trim().to_ascii_lowercase().as_str() {
        "none" | "non-bs" => Ok(PatternLabel::NonBS),
        "sb" => Ok(PatternLabel::SB),
        "mb" => Ok(PatternLabel::MB),
        "crs" => Ok(PatternLabel::CRS),
        "hs" => Ok(PatternLabel::HS),
        _ => Err(UnknownLabel(text.to_string())),
    }
}

impl FromStr for PatternLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label(s)
    }
}

/// Classification task. The binary task collapses every bowel-sound pattern
/// into a single `BS` class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Binary,
    FiveClass,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::FiveClass => PatternLabel::COUNT,
        }
    }

    /// Class index of `label` under this task.
    pub fn class_of(self, label: PatternLabel) -> usize {
        match self {
            Task::Binary => usize::from(label.is_bowel_sound()),
            Task::FiveClass => label.index(),
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Task::Binary => vec!["None", "BS"],
            Task::FiveClass => PatternLabel::ALL.iter().map(|l| l.table_name()).collect(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::FiveClass => "five-class",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveformError {
    #[error("waveform has no samples")]
    Empty,
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("sample {index} = {value} lies outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("sample rate {0} Hz is below the {MIN_SAMPLE_RATE_HZ} Hz minimum")]
    SampleRate(u32),
}

/// Mono audio in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, WaveformError> {
        if sample_rate_hz < MIN_SAMPLE_RATE_HZ {
            return Err(WaveformError::SampleRate(sample_rate_hz));
        }
        if samples.is_empty() {
            return Err(WaveformError::Empty);
        }
        for (index, &value) in samples.iter().enumerate() {
            if !value.is_finite() {
                return Err(WaveformError::NonFinite { index });
            }
            if !(-1.0..=1.0).contains(&value) {
                return Err(WaveformError::OutOfRange { index, value });
            }
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

/// One annotated pattern event. Unannotated time is implicitly non-BS, so the
/// label is never [`PatternLabel::NonBS`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub start_s: f64,
    pub end_s: f64,
    pub label: PatternLabel,
}

impl Annotation {
    pub fn new(start_s: f64, end_s: f64, label: PatternLabel) -> Self {
        Self {
            start_s,
            end_s,
            label,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Length of the intersection with `[t0, t1)`.
    pub fn overlap_with(&self, t0: f64, t1: f64) -> f64 {
        (self.end_s.min(t1) - self.start_s.max(t0)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    NegativeStart { index: usize },
    EndNotAfterStart { index: usize },
    NonBsLabel { index: usize },
    Unsorted { index: usize },
    Overlap { index: usize },
    PastEnd { index: usize },
    EmptySubjectId,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeStart { index } => write!(f, "event {index}: negative start"),
            Violation::EndNotAfterStart { index } => write!(f, "event {index}: end before start"),
            Violation::NonBsLabel { index } => write!(f, "event {index}: explicit non-BS label"),
            Violation::Unsorted { index } => write!(f, "event {index}: not sorted by start"),
            Violation::Overlap { index } => write!(f, "event {index}: overlaps previous event"),
            Violation::PastEnd { index } => write!(f, "event {index}: ends after recording"),
            Violation::EmptySubjectId => write!(f, "empty subject id"),
        }
    }
}

/// A subject's recording plus its pattern events.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedRecording {
    pub subject_id: String,
    pub waveform: Waveform,
    pub events: Vec<Annotation>,
}

impl AnnotatedRecording {
    pub fn duration_s(&self) -> f64 {
        self.waveform.duration_s()
    }
}

/// Collect every broken recording invariant, in event order.
pub fn validate_recording(rec: &AnnotatedRecording) -> Vec<Violation> {
    let mut out = Vec::new();
    if rec.subject_id.is_empty() {
        out.push(Violation::EmptySubjectId);
    }
    let duration = rec.duration_s();
    for (index, ev) in rec.events.iter().enumerate() {
        if ev.start_s < 0.0 {
            out.push(Violation::NegativeStart { index });
        }
        if !(ev.end_s > ev.start_s) {
            out.push(Violation::EndNotAfterStart { index });
        }
        if ev.label == PatternLabel::NonBS {
            out.push(Violation::NonBsLabel { index });
        }
        if index > 0 {
            let prev = &rec.events[index - 1];
            if ev.start_s < prev.start_s {
                out.push(Violation::Unsorted { index });
            } else if ev.start_s < prev.end_s {
                out.push(Violation::Overlap { index });
            }
        }
        if ev.end_s > duration {
            out.push(Violation::PastEnd { index });
        }
    }
    out
}

/// A fixed-length labeled window. Samples are shared with the source
/// recording rather than copied.
#[derive(Debug, Clone)]
pub struct Segment {
    source: Arc<Waveform>,
    start: usize,
    len: usize,
    pub label: PatternLabel,
    pub subject_id: String,
    pub origin_s: f64,
}

impl Segment {
    /// Panics if `start + len` runs past the source.
    pub fn new(
        source: Arc<Waveform>,
        start: usize,
        len: usize,
        label: PatternLabel,
        subject_id: impl Into<String>,
    ) -> Self {
        assert!(start + len <= source.len(), "segment exceeds source");
        let origin_s = start as f64 / f64::from(source.sample_rate_hz());
        Self {
            source,
            start,
            len,
            label,
            subject_id: subject_id.into(),
            origin_s,
        }
    }

    /// Wrap a standalone waveform as a single segment.
    pub fn from_waveform(wf: Waveform, label: PatternLabel, subject_id: impl Into<String>) -> Self {
        let len = wf.len();
        Self::new(Arc::new(wf), 0, len, label, subject_id)
    }

    pub fn samples(&self) -> &[f64] {
        &self.source.samples()[self.start..self.start + self.len]
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.source.sample_rate_hz()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(events: Vec<Annotation>) -> AnnotatedRecording {
        AnnotatedRecording {
            subject_id: "s0".into(),
            waveform: Waveform::new(vec![0.0; 8000], 8000).unwrap(),
            events,
        }
    }

    #[test]
    fn parse_vocabulary() {
        assert_eq!(parse_label("SB").unwrap(), PatternLabel::SB);
        assert_eq!(parse_label("none").unwrap(), PatternLabel::NonBS);
        assert_eq!(parse_label("Non-BS").unwrap(), PatternLabel::NonBS);
        assert_eq!(parse_label("crs").unwrap(), PatternLabel::CRS);
        assert_eq!(parse_label("xyz"), Err(UnknownLabel("xyz".into())));
    }

    #[test]
    fn render_parse_identity() {
        for label in PatternLabel::ALL {
            assert_eq!(parse_label(label.as_str()).unwrap(), label);
            assert_eq!(parse_label(&label.to_string()).unwrap(), label);
        }
    }

    #[test]
    fn label_order_is_total() {
        let mut shuffled = vec![
            PatternLabel::HS,
            PatternLabel::NonBS,
            PatternLabel::CRS,
            PatternLabel::SB,
            PatternLabel::MB,
        ];
        shuffled.sort();
        assert_eq!(shuffled, PatternLabel::ALL.to_vec());
    }

    #[test]
    fn valid_recording() {
        let r = rec(vec![Annotation::new(0.1, 0.2, PatternLabel::SB)]);
        assert!(validate_recording(&r).is_empty());
    }

    #[test]
    fn overlap_reported_at_second_event() {
        let r = rec(vec![
            Annotation::new(0.1, 0.3, PatternLabel::SB),
            Annotation::new(0.2, 0.4, PatternLabel::MB),
        ]);
        assert_eq!(validate_recording(&r), vec![Violation::Overlap { index: 1 }]);
    }

    #[test]
    fn inverted_event() {
        let r = rec(vec![Annotation::new(0.5, 0.4, PatternLabel::SB)]);
        assert_eq!(
            validate_recording(&r),
            vec![Violation::EndNotAfterStart { index: 0 }]
        );
    }

    #[test]
    fn multiple_violations_are_all_reported() {
        let r = rec(vec![
            Annotation::new(0.6, 0.7, PatternLabel::NonBS),
            Annotation::new(0.2, 1.5, PatternLabel::HS),
        ]);
        assert_eq!(
            validate_recording(&r),
            vec![
                Violation::NonBsLabel { index: 0 },
                Violation::Unsorted { index: 1 },
                Violation::PastEnd { index: 1 },
            ]
        );
    }

    #[test]
    fn waveform_invariants() {
        assert_eq!(Waveform::new(vec![], 8000), Err(WaveformError::Empty));
        assert_eq!(
            Waveform::new(vec![0.0], 4000),
            Err(WaveformError::SampleRate(4000))
        );
        assert!(matches!(
            Waveform::new(vec![0.0, f64::NAN], 8000),
            Err(WaveformError::NonFinite { index: 1 })
        ));
        assert!(matches!(
            Waveform::new(vec![1.5], 8000),
            Err(WaveformError::OutOfRange { .. })
        ));
    }

    #[test]
    fn binary_collapse() {
        for label in PatternLabel::ALL {
            let expected = usize::from(label != PatternLabel::NonBS);
            assert_eq!(Task::Binary.class_of(label), expected);
            assert_eq!(Task::FiveClass.class_of(label), label.index());
        }
    }

    #[test]
    fn segment_views_source() {
        let wf = Waveform::new((0..100).map(|i| i as f64 / 100.0).collect(), 8000).unwrap();
        let seg = Segment::new(Arc::new(wf), 10, 5, PatternLabel::SB, "a");
        assert_eq!(seg.samples(), &[0.1, 0.11, 0.12, 0.13, 0.14]);
        assert!((seg.origin_s - 10.0 / 8000.0).abs() < 1e-15);
    }
}
