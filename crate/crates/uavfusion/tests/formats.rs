use proptest::prelude::*;
use uavfusion::dataset::{
    read_fused_dataset, read_raw_dataset, write_fused_dataset, write_raw_dataset,
};
use uavfusion::manifest::Manifest;
use uavfusion::msfr::{self, FusedRecording};
use uavfusion::weights;
use uavfusion::Error;
use uavfusion_core::registration::fuse_dataset;
use uavfusion_core::synth::generate_synthetic_dataset;
use uavfusion_core::{
    DetectionSample, Label, MatchConfig, ModalityId, ModalitySet, Model, ModelSpec, Recording, Rng,
    ShapeProfile, SynthConfig, Tensor,
};

const PROFILE: ShapeProfile = ShapeProfile {
    thermal: [3, 3, 2],
    optronic: [3, 3, 1],
    radar: 4,
};

fn recording(modality: ModalityId, shape: &[usize], times: &[f64]) -> Recording {
    let n: usize = shape.iter().product();
    let mut rec = Recording::new(modality, "rec_007", shape.to_vec());
    for (i, &t) in times.iter().enumerate() {
        let data = (0..n).map(|k| (i * n + k) as f32 * 0.25 - 1.0).collect();
        rec.samples.push(DetectionSample {
            timestamp: t,
            label: if i % 2 == 0 {
                Label::Uav
            } else {
                Label::FalseAlarm
            },
            features: Tensor::from_vec(shape, data).unwrap(),
        });
    }
    rec
}

fn synth() -> uavfusion_core::synth::SynthDataset {
    let cfg = SynthConfig {
        recordings_per_modality: 3,
        samples_per_recording: 12,
        profile: PROFILE,
        seed: 5,
        ..SynthConfig::default()
    };
    generate_synthetic_dataset(&cfg).unwrap()
}

fn fused(set: ModalitySet) -> FusedRecording {
    let d = synth();
    let f = fuse_dataset(
        &d.thermal[..1],
        &d.optronic[..1],
        &d.radar[..1],
        set,
        &MatchConfig::default(),
    )
    .unwrap();
    FusedRecording {
        recording_id: d.thermal[0].recording_id.clone(),
        modality_set: set,
        stacked_shape: set.image_shape(&PROFILE).to_vec(),
        radar_len: set.radar_width(&PROFILE),
        samples: f.samples,
    }
}

#[test]
fn recording_round_trip_is_byte_identical() {
    let rec = recording(ModalityId::Thermal, &[2, 2, 3], &[0.0, 0.5, 0.5, 2.25]);
    let bytes = msfr::encode_recording(&rec).unwrap();
    let back = msfr::decode_recording(&bytes).unwrap();
    assert_eq!(back, rec);
    assert_eq!(msfr::encode_recording(&back).unwrap(), bytes);
    assert_eq!(&bytes[..4], b"MSFR");
    assert_eq!(
        bytes.len(),
        4 + 2 + 1 + 2 + 7 + 1 + 12 + 4 + 4 * (8 + 1 + 48)
    );
}

#[test]
fn empty_recording_round_trips() {
    let rec = recording(ModalityId::Radar, &[6], &[]);
    let back = msfr::decode_recording(&msfr::encode_recording(&rec).unwrap()).unwrap();
    assert_eq!(back, rec);
    assert!(back.samples.is_empty());
}

#[test]
fn files_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let rec = recording(ModalityId::Optronic, &[1, 2, 1], &[0.1, 0.2]);
    let path = dir.path().join("o.msfr");
    let written = msfr::write_recording(&rec, &path).unwrap();
    assert_eq!(written, std::fs::metadata(&path).unwrap().len());
    assert_eq!(msfr::read_recording(&path).unwrap(), rec);
}

#[test]
fn wrong_magic_and_version_are_format_errors() {
    let rec = recording(ModalityId::Thermal, &[1, 1, 1], &[0.0]);
    let good = msfr::encode_recording(&rec).unwrap();
    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(matches!(
        msfr::decode_recording(&bad),
        Err(Error::Format(_))
    ));
    let mut bad = good.clone();
    bad[4] = 2;
    assert!(matches!(
        msfr::decode_recording(&bad),
        Err(Error::Format(_))
    ));
    assert!(matches!(
        weights::decode_model(&good),
        Err(Error::Format(_))
    ));
}

#[test]
fn truncation_and_trailing_bytes_are_corrupt() {
    let rec = recording(ModalityId::Thermal, &[2, 1, 1], &[0.0, 1.0, 2.0]);
    let good = msfr::encode_recording(&rec).unwrap();
    for cut in [5, 12, good.len() - 1] {
        assert!(
            matches!(msfr::decode_recording(&good[..cut]), Err(Error::Corrupt(_))),
            "cut at {cut}"
        );
    }
    let count_at = 4 + 2 + 1 + 2 + 7 + 1 + 12;
    let mut inflated = good.clone();
    inflated[count_at] = 4;
    assert!(matches!(
        msfr::decode_recording(&inflated),
        Err(Error::Corrupt(_))
    ));
    let mut trailing = good;
    trailing.push(0);
    assert!(matches!(
        msfr::decode_recording(&trailing),
        Err(Error::Corrupt(_))
    ));
}

#[test]
fn unsorted_timestamps_report_the_offending_index() {
    let mut rec = recording(ModalityId::Thermal, &[1, 1, 1], &[0.0, 1.0, 2.0, 3.0]);
    let good = msfr::encode_recording(&rec).unwrap();
    rec.samples[2].timestamp = 0.5;
    match msfr::encode_recording(&rec) {
        Err(Error::Core(uavfusion_core::Error::Unsorted { index })) => assert_eq!(index, 2),
        other => panic!("expected unsorted error, got {other:?}"),
    }
    let per_sample = 8 + 1 + 4;
    let header = good.len() - 4 * per_sample;
    let mut bytes = good;
    bytes[header + 2 * per_sample..header + 2 * per_sample + 8]
        .copy_from_slice(&0.5f64.to_le_bytes());
    match msfr::decode_recording(&bytes) {
        Err(Error::Core(uavfusion_core::Error::Unsorted { index })) => assert_eq!(index, 2),
        other => panic!("expected unsorted error, got {other:?}"),
    }
}

#[test]
fn fused_recordings_round_trip_for_every_set() {
    for set in ModalitySet::ALL {
        let rec = fused(set);
        assert!(!rec.samples.is_empty());
        let bytes = msfr::encode_fused(&rec).unwrap();
        assert_eq!(bytes[6], msfr::FUSED_MODALITY);
        let back = msfr::decode_fused(&bytes).unwrap();
        assert_eq!(back, rec, "{set}-modality");
        assert_eq!(msfr::encode_fused(&back).unwrap(), bytes);
        assert!(msfr::decode_recording(&bytes).is_err());
    }
}

#[test]
fn datasets_round_trip_through_directories() {
    let dir = tempfile::tempdir().unwrap();
    let d = synth();
    let manifest = write_raw_dataset(dir.path(), &d).unwrap();
    assert_eq!(manifest.entries.len(), 9);
    assert_eq!(Manifest::read(dir.path()).unwrap(), manifest);
    let raw = read_raw_dataset(dir.path()).unwrap();
    for m in ModalityId::ALL {
        assert_eq!(raw.recordings(m), d.recordings(m));
    }

    let fdir = tempfile::tempdir().unwrap();
    let f = fuse_dataset(
        &d.thermal,
        &d.optronic,
        &d.radar,
        ModalitySet::Three,
        &MatchConfig::default(),
    )
    .unwrap();
    write_fused_dataset(fdir.path(), &f, &PROFILE).unwrap();
    let back = read_fused_dataset(fdir.path()).unwrap();
    assert_eq!(back.dataset.samples, f.samples);
    assert_eq!(back.dataset.modality_set, ModalitySet::Three);
    assert_eq!(back.radar_len, PROFILE.radar);
    assert_eq!(back.digest.len(), 64);
}

#[test]
fn missing_raw_files_are_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    write_raw_dataset(dir.path(), &synth()).unwrap();
    let raw = Manifest::read(dir.path()).unwrap();
    let radar: Vec<_> = raw
        .entries
        .iter()
        .filter(|e| e.modality == "radar")
        .map(|e| e.file.clone())
        .collect();
    for f in &radar {
        std::fs::remove_file(dir.path().join(f)).unwrap();
    }
    let msg = read_raw_dataset(dir.path()).unwrap_err().to_string();
    for f in &radar {
        assert!(msg.contains(f.as_str()), "{msg}");
    }
}

#[test]
fn manifest_text_round_trips() {
    let mut m = Manifest::default();
    m.push("thermal_rec_000.msfr", "thermal", 12);
    m.push("fused_rec_000.msfr", "fused", 0);
    assert_eq!(Manifest::parse(&m.to_string()).unwrap(), m);
    assert!(Manifest::parse("a.msfr\tthermal\tmany\n").is_err());
}

fn model(spec: ModelSpec, seed: u64) -> Model<f32> {
    Model::build(spec, &mut Rng::seed_from(seed)).unwrap()
}

#[test]
fn weights_round_trip_exactly() {
    for set in ModalitySet::ALL {
        let spec = ModelSpec {
            conv_filters: 3,
            dense_units: 5,
            ..ModelSpec::new(set, PROFILE)
        };
        let m = model(spec, 9);
        let bytes = weights::encode_model(&m).unwrap();
        assert_eq!(&bytes[..4], b"MSFW");
        let back = weights::decode_model(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.digest(), m.digest());
        assert_eq!(weights::encode_model(&back).unwrap(), bytes);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.msfw");
        weights::write_model(&m, &path).unwrap();
        assert_eq!(weights::read_model(&path).unwrap(), m);
    }
}

#[test]
fn weights_with_mismatched_shapes_are_rejected() {
    let spec = ModelSpec {
        conv_filters: 3,
        dense_units: 5,
        ..ModelSpec::new(ModalitySet::Two, PROFILE)
    };
    let bytes = weights::encode_model(&model(spec, 1)).unwrap();
    let filters_at = 4 + 2 + 1 + 6 * 4 + 4 + 4;
    let mut bad = bytes.clone();
    bad[filters_at] = 4;
    assert!(weights::decode_model(&bad).is_err());
    assert!(weights::decode_model(&bytes[..bytes.len() - 2]).is_err());
    let mut trailing = bytes;
    trailing.extend_from_slice(&[0; 4]);
    assert!(matches!(
        weights::decode_model(&trailing),
        Err(Error::Corrupt(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_recordings_round_trip(
        dims in prop::collection::vec(0usize..4, 1..4),
        gaps in prop::collection::vec(0.0f64..3.0, 0..12),
        labels in prop::collection::vec(any::<bool>(), 12),
        values in prop::collection::vec(-1e6f32..1e6, 64),
        id in "[a-z0-9_]{0,12}",
    ) {
        let n: usize = dims.iter().product();
        let mut rec = Recording::new(ModalityId::Thermal, id, dims.clone());
        let mut t = 0.0;
        for (i, g) in gaps.iter().enumerate() {
            t += g;
            let data = (0..n).map(|k| values[(i * 7 + k) % values.len()]).collect();
            rec.samples.push(DetectionSample {
                timestamp: t,
                label: if labels[i] { Label::Uav } else { Label::FalseAlarm },
                features: Tensor::from_vec(&dims, data).unwrap(),
            });
        }
        let bytes = msfr::encode_recording(&rec).unwrap();
        let back = msfr::decode_recording(&bytes).unwrap();
        prop_assert_eq!(&back, &rec);
        prop_assert_eq!(msfr::encode_recording(&back).unwrap(), bytes);
    }
}
