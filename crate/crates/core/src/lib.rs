//! Synthetic bowel-sound corpora, windowed segmentation, spectral features,
//! two learners and ROC-AUC evaluation.

pub mod bench;
pub mod dsp;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod synth;
pub mod types;
pub mod learn;
pub mod windowing;

pub use types::{AnnotatedRecording, Annotation, PatternLabel, Segment, Task, Waveform};
