//! End-to-end gradient validation of the network, in f64 against central
//! differences, plus the linear-composition identity behind gradient reversal.

use myofeat::convnet::check::{check_network_gradients, reversal_identity_max_err};
use myofeat::convnet::{ConvNet, Params, Real, DROPOUT_P, PARAM_COUNT, ROWS};
use myofeat::dataio::WINDOW_LEN;

#[test]
fn network_gradients_match_finite_differences() {
    // One window, one probe per parameter segment: every conv weight/bias,
    // norm scale/shift, and both heads get sampled through the full
    // adversarial objective.
    let report = check_network_gradients(7, 1, 1, 0.1);
    for seg in &report.segments {
        assert!(
            seg.max_rel_err <= 1e-4,
            "{}: rel err {:.3e}",
            seg.name,
            seg.max_rel_err
        );
    }
    assert!(report.max_rel_err <= 1e-4, "worst {:.3e}", report.max_rel_err);
}

#[test]
fn reversal_composes_linearly() {
    // full backward == gesture-only + lambda*head-only - lambda*trunk-only,
    // exactly (same forward cache, pure linear accumulation).
    let err = reversal_identity_max_err(11, 2, 0.3);
    assert!(err <= 1e-9, "composition err {:.3e}", err);
}

/// Rough single-core throughput probe used to pick training budgets; run
/// manually with `--ignored --nocapture`.
#[test]
#[ignore]
fn throughput_probe() {
    use std::time::Instant;
    let net = ConvNet::new();
    let params: Params<f32> = Params::init(&net.layout, 3);
    let batch = 16usize;
    let input: Vec<f32> = (0..batch * ROWS * WINDOW_LEN)
        .map(|i| ((i % 97) as f32 / 48.5) - 1.0)
        .collect();
    let t0 = Instant::now();
    let cache = net.forward_train(&params, input.clone(), DROPOUT_P, 1);
    let fwd = t0.elapsed();
    let dg = vec![0.01f32; cache.gesture_logits.len()];
    let dd = vec![0.01f32; cache.domain_logits.len()];
    let t1 = Instant::now();
    let grads = net.backward(&params, &cache, &dg, &dd, &dd);
    let bwd = t1.elapsed();
    assert_eq!(grads.data.len(), PARAM_COUNT);
    println!(
        "batch {batch}: forward {:.0} ms, backward {:.0} ms, {:.1} windows/s fwd+bwd",
        fwd.as_secs_f64() * 1e3,
        bwd.as_secs_f64() * 1e3,
        batch as f64 / (fwd + bwd).as_secs_f64()
    );
}
