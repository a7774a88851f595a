use std::fs;
use std::path::Path;

use bsbench::ingest::{load_manifest, persist_corpus, write_annotations, write_wav, BitDepth, ManifestError};
use bsbench::synth::{synth_corpus, CorpusConfig};
use bsbench::{Annotation, PatternLabel, Waveform};

fn write_subject(dir: &Path, id: &str, seconds: f64) {
    let sr = 8000;
    let n = (seconds * f64::from(sr)) as usize;
    let samples: Vec<f64> = (0..n).map(|i| 0.3 * (i as f64 * 0.05).sin()).collect();
    write_wav(dir.join(format!("{id}.wav")), &Waveform::new(samples, sr).unwrap(), BitDepth::Pcm16).unwrap();
    write_annotations(
        dir.join(format!("{id}.csv")),
        &[Annotation::new(0.5, 0.8, PatternLabel::SB), Annotation::new(1.0, 2.0, PatternLabel::CRS)],
    )
    .unwrap();
}

fn manifest(dir: &Path, ids: &[&str]) -> std::path::PathBuf {
    let entries: Vec<String> = ids
        .iter()
        .map(|id| format!(r#"{{"wav_path": "{id}.wav", "annotation_path": "{id}.csv", "subject_id": "{id}"}}"#))
        .collect();
    let path = dir.join("manifest.json");
    fs::write(&path, format!(r#"{{"entries": [{}]}}"#, entries.join(","))).unwrap();
    path
}

#[test]
fn two_valid_entries_load() {
    let dir = tempfile::tempdir().unwrap();
    write_subject(dir.path(), "a", 3.0);
    write_subject(dir.path(), "b", 4.0);
    let (m, recs) = load_manifest(manifest(dir.path(), &["a", "b"])).unwrap();
    assert_eq!(m.entries.len(), 2);
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[1].subject_id, "b");
    assert_eq!(recs[1].waveform.len(), 32000);
    assert_eq!(recs[0].events.len(), 2);
    assert_eq!(recs[0].events[1].label, PatternLabel::CRS);
}

#[test]
fn missing_wav_is_the_only_reported_entry() {
    let dir = tempfile::tempdir().unwrap();
    write_subject(dir.path(), "a", 3.0);
    write_subject(dir.path(), "b", 3.0);
    write_subject(dir.path(), "c", 3.0);
    fs::remove_file(dir.path().join("b.wav")).unwrap();
    match load_manifest(manifest(dir.path(), &["a", "b", "c"])) {
        Err(ManifestError::Entries(errs)) => {
            assert_eq!(errs.len(), 1);
            assert_eq!(errs[0].index, 1);
            assert_eq!(errs[0].subject_id, "b");
            assert!(errs[0].message.contains("b.wav"), "{}", errs[0].message);
        }
        other => panic!("expected one entry error, got {other:?}"),
    }
}

#[test]
fn event_past_end_of_audio_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_subject(dir.path(), "a", 1.5);
    let err = load_manifest(manifest(dir.path(), &["a"])).unwrap_err();
    assert!(matches!(err, ManifestError::Entries(ref e) if e.len() == 1), "{err}");
}

#[test]
fn persisted_corpus_round_trips() {
    let cfg = CorpusConfig {
        n_subjects: 3,
        recording_len_s: 10.0,
        events_per_minute: 30.0,
        sample_rate_hz: 8000,
        seed: 11,
        ..CorpusConfig::default()
    };
    let corpus = synth_corpus(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = persist_corpus(&corpus, dir.path(), BitDepth::Pcm16).unwrap();
    let (_, loaded) = load_manifest(path).unwrap();
    assert_eq!(loaded.len(), corpus.len());
    for (a, b) in corpus.iter().zip(&loaded) {
        assert_eq!(a.subject_id, b.subject_id);
        assert_eq!(a.waveform.sample_rate_hz(), b.waveform.sample_rate_hz());
        assert_eq!(a.waveform.len(), b.waveform.len());
        let worst = a
            .waveform
            .samples()
            .iter()
            .zip(b.waveform.samples())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1.0 / 32768.0, "{}: {worst}", a.subject_id);
        assert_eq!(a.events.len(), b.events.len());
        for (x, y) in a.events.iter().zip(&b.events) {
            assert_eq!(x.label, y.label);
            assert!((x.start_s - y.start_s).abs() < 1e-9 && (x.end_s - y.end_s).abs() < 1e-9);
        }
    }
}
