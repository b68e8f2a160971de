mod support;

use support::match_oracle::{brute_force, compare_with_oracle, random_stream};
use uavfusion_core::registration::{fuse_dataset, match_streams, stack_features};
use uavfusion_core::synth::generate_synthetic_dataset;
use uavfusion_core::{Label, MatchConfig, ModalitySet, Rng, ShapeProfile, SynthConfig, Tensor};

#[test]
fn greedy_matching_equals_brute_force_on_200_instances() {
    compare_with_oracle(2024, 200).unwrap();
}

#[test]
fn oracle_reproduces_the_hand_case() {
    let a = [(0.5, Label::Uav), (1.0, Label::Uav)];
    let b = [(0.3, Label::Uav), (0.6, Label::FalseAlarm)];
    assert_eq!(brute_force(&a, &b, 0.5, true), vec![(0, 0)]);
    assert_eq!(match_streams(&a, &b, 0.5, true).unwrap(), vec![(0, 0)]);
}

#[test]
fn matching_never_reuses_a_sample() {
    let mut rng = Rng::seed_from(9);
    for _ in 0..300 {
        let a = random_stream(&mut rng, 12);
        let b = random_stream(&mut rng, 12);
        let pairs = match_streams(&a, &b, 0.3, false).unwrap();
        let mut is: Vec<_> = pairs.iter().map(|p| p.0).collect();
        let mut js: Vec<_> = pairs.iter().map(|p| p.1).collect();
        is.dedup();
        js.sort_unstable();
        js.dedup();
        assert_eq!(is.len(), pairs.len());
        assert_eq!(js.len(), pairs.len());
        assert!(pairs.iter().all(|&(i, j)| (a[i].0 - b[j].0).abs() <= 0.3));
    }
}

#[test]
fn two_by_two_stack_places_every_element() {
    let t = Tensor::from_vec(&[2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
    let o = Tensor::from_vec(&[2, 2, 1], vec![10.0f32, 20.0, 30.0, 40.0]).unwrap();
    let s = stack_features(&t, &o).unwrap();
    assert_eq!(s.shape(), &[2, 2, 2]);
    assert_eq!(s.data(), &[1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]);
}

#[test]
fn generated_datasets_pass_audits_and_shrink_with_modalities() {
    for seed in 0..6 {
        let cfg = SynthConfig {
            recordings_per_modality: 4,
            samples_per_recording: 40,
            profile: ShapeProfile {
                thermal: [3, 3, 2],
                optronic: [3, 3, 1],
                radar: 4,
            },
            seed,
            ..SynthConfig::default()
        };
        let d = generate_synthetic_dataset(&cfg).unwrap();
        let mc = MatchConfig::default();
        let counts: Vec<usize> = ModalitySet::ALL
            .iter()
            .map(|&set| {
                let f = fuse_dataset(&d.thermal, &d.optronic, &d.radar, set, &mc).unwrap();
                f.audit(&mc).unwrap();
                f.len()
            })
            .collect();
        assert!(
            counts[0] > counts[1] && counts[1] > counts[2],
            "seed {seed}: {counts:?}"
        );
    }
}
