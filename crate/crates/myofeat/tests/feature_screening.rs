//! Screening on synthetic recordings: the generator's classes must be
//! linearly separable from amplitude descriptors, and joint groups must beat
//! their own single-feature averages.

use myofeat::dataio::{segment_all, synth_generate, SynthConfig};
use myofeat::evaluate::{eval_feature_group, eval_single_feature, screen_features};
use myofeat::features::{extract_all, FeatureConfig};

fn synth_cloud() -> myofeat::features::LabeledCloud {
    let cfg = SynthConfig {
        domains: 4,
        classes: 5,
        cycles: 6,
        samples_per_recording: 1000,
        amplitude: 450.0,
        noise_level: 0.15,
        seed: 11,
    };
    let recordings = synth_generate(&cfg).expect("valid synth config");
    let dataset = segment_all(&recordings);
    extract_all(&dataset, &FeatureConfig::default()).to_labeled()
}

#[test]
fn mean_absolute_value_separates_synthetic_classes_within_each_domain() {
    let cloud = synth_cloud();
    let row = cloud.row_of("MAV").expect("registry exports MAV");

    // Within-domain screening: restrict the cloud to one participant's
    // columns at a time.
    let mut accuracies = Vec::new();
    for participant in 0..4u32 {
        let cols: Vec<usize> = (0..cloud.n_points())
            .filter(|&c| cloud.points[c].participant == participant)
            .collect();
        let sub = myofeat::features::LabeledCloud {
            values: cloud.values.select(ndarray::Axis(1), &cols),
            labels: cloud.labels.clone(),
            groups: cloud.groups.clone(),
            points: cols.iter().map(|&c| cloud.points[c].clone()).collect(),
        };
        let eval = eval_single_feature(&sub, row).expect("within-domain screening");
        accuracies.push(eval.accuracy);
    }
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    assert!(
        mean >= 0.80,
        "within-domain MAV accuracy {mean:.3} ({accuracies:?})"
    );
}

#[test]
fn joint_group_beats_its_own_single_feature_average() {
    let cloud = synth_cloud();
    let joint = eval_feature_group(&cloud, "UNI").expect("group screening");
    let report = screen_features(&cloud, false).expect("full screening");
    let uni = report
        .groups
        .iter()
        .find(|g| g.name == "UNI")
        .expect("UNI summary present");
    assert_eq!(uni.members, 20);
    assert!((uni.group_accuracy - joint.accuracy).abs() < 1e-12);
    assert!(
        joint.accuracy > uni.single_mean,
        "group {:.3} vs single mean {:.3}",
        joint.accuracy,
        uni.single_mean
    );
}
