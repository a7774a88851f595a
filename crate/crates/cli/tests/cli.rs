use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"{
  "corpus": {"synthetic": {"n_subjects": 6, "recording_len_s": 20.0, "events_per_minute": 40.0,
                           "sample_rate_hz": 16000, "noise_floor_snr_db": 30.0, "seed": 3}},
  "dsp": {"n_fft": 512, "hop": 256, "n_mels": 32},
  "gbdt_profiles": ["tuned"],
  "persist_corpus": false
}"#;

fn bsbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsbench")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bsbench(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn config_file(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn staged_run_matches_bench() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_file(tmp.path(), TINY);
    let cfg = cfg.to_str().unwrap();
    let whole = tmp.path().join("whole");
    let staged = tmp.path().join("staged");
    ok(&["bench", "--config", cfg, "--out", whole.to_str().unwrap()]);
    for stage in ["segment", "split", "features", "train", "eval"] {
        ok(&[stage, "--config", cfg, "--out", staged.to_str().unwrap()]);
    }
    let (a, b) = (files(&whole.join("reports")), files(&staged.join("reports")));
    assert!(!a.is_empty());
    assert_eq!(a, b);
    for f in ["segments.json", "splits.json", "features/tabular.csv", "models/five-class_gbdt-tuned_tabular.json"] {
        assert_eq!(fs::read(whole.join(f)).unwrap(), fs::read(staged.join(f)).unwrap(), "{f}");
    }
    let table = fs::read_to_string(staged.join("reports/table_five-class_test.csv")).unwrap();
    assert!(table.starts_with("model,features,None,SB,MB,CRS,HS,macro\n"));

    let again = tmp.path().join("again");
    ok(&["report", "--config", cfg, "--out", again.to_str().unwrap(), whole.join("run_record.json").to_str().unwrap()]);
    assert_eq!(files(&again.join("reports")), a);
}

#[test]
fn every_subcommand_writes_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_file(tmp.path(), TINY);
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    for stage in ["synth", "segment", "split"] {
        ok(&[stage, "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out_s]);
        let text = fs::read_to_string(out.join("provenance").join(format!("{stage}.json"))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["command"], stage);
        assert_eq!(v["seed"], 9);
        assert_eq!(v["config"]["split_seed"], 9);
        assert_eq!(v["config"]["corpus"]["synthetic"]["seed"], 9);
        assert_eq!(v["config"]["window"]["window_s"], 2.0);
    }
    assert!(out.join("corpus/manifest.json").exists());
    assert!(out.join("corpus/S1.wav").exists() || out.join("corpus/S01.wav").exists());
}

#[test]
fn synthesized_corpus_feeds_a_manifest_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_file(tmp.path(), TINY);
    let synth = tmp.path().join("synth");
    ok(&["synth", "--config", cfg.to_str().unwrap(), "--out", synth.to_str().unwrap()]);
    let manifest = synth.join("corpus/manifest.json");
    let from_manifest = TINY.replace(
        r#"{"synthetic": {"n_subjects": 6, "recording_len_s": 20.0, "events_per_minute": 40.0,
                           "sample_rate_hz": 16000, "noise_floor_snr_db": 30.0, "seed": 3}}"#,
        &format!(r#"{{"manifest": {:?}}}"#, manifest.to_str().unwrap()),
    );
    let cfg2 = tmp.path().join("manifest_config.json");
    fs::write(&cfg2, from_manifest).unwrap();
    let stdout = ok(&["segment", "--config", cfg2.to_str().unwrap(), "--out", tmp.path().join("m").to_str().unwrap()]);
    assert!(stdout.contains("segments: None="), "{stdout}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();

    let bad = config_file(tmp.path(), r#"{"roster": []}"#);
    assert_eq!(bsbench(&["bench", "--config", bad.to_str().unwrap(), "--out", out_s]).status.code(), Some(2));
    let missing = tmp.path().join("nope.json");
    assert_eq!(bsbench(&["bench", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(bsbench(&["frobnicate"]).status.code(), Some(2));

    let no_manifest = config_file(tmp.path(), r#"{"corpus": {"manifest": "/definitely/not/here.json"}}"#);
    let res = bsbench(&["bench", "--config", no_manifest.to_str().unwrap(), "--out", out_s]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("corpus"));

    let cfg = config_file(tmp.path(), TINY);
    assert_eq!(bsbench(&["split", "--config", cfg.to_str().unwrap(), "--out", out_s]).status.code(), Some(3));

    let silent = TINY.replace(r#""events_per_minute": 40.0"#, r#""events_per_minute": 0.0"#);
    let cfg = config_file(tmp.path(), &silent);
    let res = bsbench(&["bench", "--config", cfg.to_str().unwrap(), "--out", out_s]);
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
}
