//! Synthetic corpus and manifest contracts.

use fdfnet_core::data::{
    measured_snr, read_wav, synth_dataset, synth_in_memory, DatasetManifest, SourceKind,
    SynthConfig,
};

fn tiny() -> SynthConfig {
    SynthConfig {
        train_items: 2,
        val_items: 1,
        test_items: 1,
        clip_seconds: 0.2,
        snr_range: (-5.0, 15.0),
        seed: 77,
    }
}

#[test]
fn same_config_and_seed_give_identical_corpora() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let m_a = synth_dataset(&tiny(), dir_a.path()).unwrap();
    let m_b = synth_dataset(&tiny(), dir_b.path()).unwrap();
    assert_eq!(
        std::fs::read_to_string(&m_a).unwrap(),
        std::fs::read_to_string(&m_b).unwrap(),
        "manifests must be identical"
    );
    for entry in std::fs::read_dir(dir_a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(dir_a.path().join(&name)).unwrap();
        let b = std::fs::read(dir_b.path().join(&name)).unwrap();
        assert_eq!(a, b, "file {name:?} differs");
    }
}

#[test]
fn corpus_files_round_trip_and_match_manifest_snr() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = synth_dataset(&tiny(), dir.path()).unwrap();
    let manifest = DatasetManifest::load(&manifest_path).unwrap();
    assert_eq!(manifest.records.len(), 4);
    for rec in &manifest.records {
        let clean = read_wav(&dir.path().join(&rec.clean)).unwrap();
        assert!(!clean.is_empty());
        let SourceKind::Noise { snr_db, seed } = rec.kind else {
            panic!("synthetic corpus records carry noise sources")
        };
        let noise = read_wav(&dir.path().join(&rec.source)).unwrap();
        let mix = fdfnet_core::data::mix_at_snr(&clean, &noise, snr_db, seed).unwrap();
        let got = measured_snr(&mix.clean, &mix.noise);
        assert!((got - snr_db).abs() < 1e-6, "manifest SNR {snr_db}, measured {got}");
    }
}

#[test]
fn in_memory_and_on_disk_corpora_agree() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = synth_dataset(&tiny(), dir.path()).unwrap();
    let from_disk = DatasetManifest::load(&manifest_path).unwrap().build_dataset().unwrap();
    let in_memory = synth_in_memory(&tiny()).unwrap();
    assert_eq!(from_disk.train.len(), in_memory.train.len());
    for (a, b) in from_disk.train.iter().zip(&in_memory.train) {
        assert_eq!(a.clean.samples(), b.clean.samples());
        assert_eq!(a.mixture.samples(), b.mixture.samples());
    }
}

#[test]
fn manifest_loading_is_order_stable_and_validates_files() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = synth_dataset(&tiny(), dir.path()).unwrap();
    let first = DatasetManifest::load(&manifest_path).unwrap();
    let second = DatasetManifest::load(&manifest_path).unwrap();
    let names = |m: &DatasetManifest| {
        m.records.iter().map(|r| r.clean.display().to_string()).collect::<Vec<_>>()
    };
    assert_eq!(names(&first), names(&second));

    // A record referencing a missing file is rejected at load time.
    let text = std::fs::read_to_string(&manifest_path).unwrap();
    let broken = text.replace("train_clean_000.wav", "missing.wav");
    std::fs::write(&manifest_path, broken).unwrap();
    let err = DatasetManifest::load(&manifest_path);
    assert!(matches!(err, Err(fdfnet_core::CoreError::Data(msg)) if msg.contains("missing.wav")));
}

#[test]
fn malformed_manifest_lines_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tsv");
    std::fs::write(&path, "train\tonly_three\tfields\n").unwrap();
    assert!(DatasetManifest::load(&path).is_err());
    std::fs::write(&path, "train\ta.wav\tb.wav\tnot_a_number\t0\n").unwrap();
    assert!(DatasetManifest::load(&path).is_err());
}
