//! End-to-end acceptance checks: nine numbered criteria covering the model
//! architecture, the feature registry, gradient correctness, the adversarial
//! training benefit, topological shape recovery, the signal path, the
//! statistics oracles, saliency discrimination, and CLI determinism.
//!
//! Each test finishes with one `PASS criterion N` line; a failed assertion
//! is the corresponding FAIL.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use myofeat::convnet::check::{central_diff, check_network_gradients, rel_err};
use myofeat::convnet::{ConvNet, DomainStatsMap, Params, BLOCKS, LEARNED_ROWS, PARAM_COUNT};
use myofeat::dataio::{
    segment_all, synth_generate, window_count, Dataset, FilterSpec, SynthConfig, Window,
};
use myofeat::evaluate::{cohens_d, lda_fit, wilcoxon_signed_rank};
use myofeat::features::{extract_all, registry, FeatureConfig, Method};
use myofeat::interpret::guided_grad_cam;
use myofeat::mapper::{
    build_cover, joint_probabilities, kl_gradient, kl_objective, mapper_with_lens, run_mapper,
    CoverStyle, MapperConfig,
};
use myofeat::training::{
    estimate_domain_stats, evaluate, stats_for, train_adann, train_standard, TrainConfig,
    SHARED_DOMAIN,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

// ---------------------------------------------------------------------------
// 1. architecture fidelity

#[test]
fn criterion_1_architecture() {
    let net = ConvNet::new();
    assert_eq!(PARAM_COUNT, 543_629);
    assert_eq!(net.layout.total(), PARAM_COUNT, "layout disagrees with the parameter count");
    let lengths: Vec<usize> = net.layout.blocks.iter().map(|b| b.l_out()).collect();
    assert_eq!(lengths, vec![126, 101, 76, 51, 26, 1]);
    let last = net.layout.blocks[BLOCKS - 1];
    assert_eq!((last.h, last.l_out()), (10, 1), "final map must be 10x1");
    println!(
        "PASS criterion 1: 543,629 parameters; block lengths 126/101/76/51/26/1; final map 10x1"
    );
}

// ---------------------------------------------------------------------------
// 2. feature registry fidelity

#[test]
fn criterion_2_feature_registry() {
    let descriptors = registry();
    assert_eq!(descriptors.len(), 79, "descriptor count");
    assert_eq!(Method::ALL.len(), 56, "method count");
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for method in Method::ALL {
        *counts.entry(method.group().name()).or_default() += 1;
    }
    assert_eq!(counts.get("SAP"), Some(&25));
    assert_eq!(counts.get("FI"), Some(&5));
    assert_eq!(counts.get("NLC"), Some(&6));
    assert_eq!(counts.get("TSM"), Some(&7));
    assert_eq!(counts.get("UNI"), Some(&13));

    // A real learned extraction yields exactly 384 rows.
    assert_eq!(LEARNED_ROWS, 384);
    let synth = SynthConfig {
        domains: 2,
        classes: 2,
        cycles: 1,
        samples_per_recording: 160,
        ..SynthConfig::default()
    };
    let dataset = segment_all(&synth_generate(&synth).unwrap());
    let net = ConvNet::new();
    let params: Params<f32> = Params::init(&net.layout, 3);
    let refs: Vec<&Window> = dataset.windows.iter().collect();
    let mut stats = DomainStatsMap::new();
    stats.insert(SHARED_DOMAIN, estimate_domain_stats(&net, &params, &refs, 3));
    let cloud = myofeat::convnet::extract_learned(&net, &params, &stats, &dataset).unwrap();
    assert_eq!(cloud.labels.len(), 384);
    assert_eq!(cloud.values.nrows(), 384);
    println!(
        "PASS criterion 2: 79 descriptors from 56 methods (SAP/FI/NLC/TSM/UNI = 25/5/6/7/13); \
         learned cloud has 384 rows"
    );
}

// ---------------------------------------------------------------------------
// 3. gradient correctness

#[test]
fn criterion_3_gradients() {
    // Every parameter segment (conv kernels and biases, normalization scales
    // and shifts, both heads) against central differences of the full loss,
    // including the reversed, weighted domain term.
    let report = check_network_gradients(11, 3, 4, 0.25);
    for seg in &report.segments {
        assert!(
            seg.max_rel_err <= 1e-4,
            "{}: rel err {:.3e}",
            seg.name,
            seg.max_rel_err
        );
    }

    // Low-dimensional embedding objective against its analytic gradient.
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let points = Array2::from_shape_fn((12, 4), |_| rng.sample::<f64, _>(StandardNormal));
    let p = joint_probabilities(&points, 3.0);
    let y0 = Array2::from_shape_fn((12, 2), |_| 0.1 * rng.sample::<f64, _>(StandardNormal));
    let grad = kl_gradient(&p, &y0);
    let mut tsne_worst = 0.0f64;
    for &(i, k) in &[(0usize, 0usize), (3, 1), (7, 0), (11, 1)] {
        let fd = central_diff(
            |v| {
                let mut y = y0.clone();
                y[(i, k)] = v;
                kl_objective(&p, &y)
            },
            y0[(i, k)],
            1e-5,
        );
        tsne_worst = tsne_worst.max(rel_err(fd, grad[(i, k)]));
    }
    assert!(tsne_worst <= 1e-4, "embedding gradient rel err {tsne_worst:.3e}");
    println!(
        "PASS criterion 3: finite differences confirm every layer type, the full adversarial \
         loss (network max rel err {:.2e}), and the embedding objective (max rel err {:.2e})",
        report.max_rel_err, tsne_worst
    );
}

// ---------------------------------------------------------------------------
// 4 + 8 share one trained model on the default synthetic benchmark.

const BENCH_EPOCHS: usize = 12;

struct AdannRun {
    dataset: Dataset,
    held_out: u32,
    params: Params<f32>,
    /// Source-domain statistics plus the adapted target entry.
    stats: DomainStatsMap,
    target_accuracy: f64,
}

/// source train / source val / target adapt (early cycles) / target test.
fn domain_split(dataset: &Dataset, held_out: u32) -> (Dataset, Dataset, Dataset, Dataset) {
    let mut src_train = Vec::new();
    let mut src_val = Vec::new();
    let mut tgt_adapt = Vec::new();
    let mut tgt_test = Vec::new();
    for (i, (w, c)) in dataset.windows.iter().zip(&dataset.cycles).enumerate() {
        if w.participant.0 == held_out {
            if c.0 <= 4 {
                tgt_adapt.push(i);
            } else {
                tgt_test.push(i);
            }
        } else {
            match c.0 {
                0..=3 => src_train.push(i),
                4 => src_val.push(i),
                _ => {}
            }
        }
    }
    (
        dataset.subset(&src_train),
        dataset.subset(&src_val),
        dataset.subset(&tgt_adapt),
        dataset.subset(&tgt_test),
    )
}

fn bench_config(seed: u64) -> TrainConfig {
    TrainConfig {
        max_epochs: BENCH_EPOCHS,
        seed,
        ..TrainConfig::default()
    }
}

fn adann_leave_one_out(seed: u64) -> AdannRun {
    let synth = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    let dataset = segment_all(&synth_generate(&synth).unwrap());
    let held_out = (seed % u64::from(synth.domains)) as u32;
    let (src_train, src_val, tgt_adapt, tgt_test) = domain_split(&dataset, held_out);
    let outcome = train_adann(&src_train, &src_val, &bench_config(seed), |_| {}).unwrap();
    let net = ConvNet::new();
    let refs: Vec<&Window> = tgt_adapt.windows.iter().collect();
    let adapted = estimate_domain_stats(&net, &outcome.params, &refs, seed);
    let mut stats = outcome.stats;
    stats.insert(held_out, adapted);
    let eval = evaluate(&net, &outcome.params, &stats, &tgt_test).unwrap();
    AdannRun {
        dataset,
        held_out,
        params: outcome.params,
        stats,
        target_accuracy: eval.accuracy,
    }
}

fn standard_leave_one_out(dataset: &Dataset, held_out: u32, seed: u64) -> f64 {
    let (src_train, src_val, _, tgt_test) = domain_split(dataset, held_out);
    let source_domains = src_train.participants().len();
    // One adversarial epoch makes two batch passes per source domain; give
    // the pooled baseline the same budget.
    let cfg = TrainConfig {
        steps_per_epoch: 2 * source_domains,
        ..bench_config(seed)
    };
    let outcome = train_standard(&src_train, &src_val, &cfg, |_| {}).unwrap();
    let net = ConvNet::new();
    let eval = evaluate(&net, &outcome.params, &outcome.stats, &tgt_test).unwrap();
    eval.accuracy
}

static SEED0_RUN: OnceLock<AdannRun> = OnceLock::new();

fn seed0_run() -> &'static AdannRun {
    SEED0_RUN.get_or_init(|| adann_leave_one_out(0))
}

#[test]
fn criterion_4_adversarial_benefit() {
    let mut gaps = Vec::new();
    for seed in 0u64..3 {
        let owned;
        let run: &AdannRun = if seed == 0 {
            seed0_run()
        } else {
            owned = adann_leave_one_out(seed);
            &owned
        };
        let standard = standard_leave_one_out(&run.dataset, run.held_out, seed);
        let gap = 100.0 * (run.target_accuracy - standard);
        println!(
            "  seed {seed} (held-out domain {}): adversarial {:.4} vs standard {:.4} ({gap:+.1} pts)",
            run.held_out, run.target_accuracy, standard
        );
        gaps.push(gap);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(
        mean >= 5.0,
        "mean held-out gain {mean:+.2} points is below 5"
    );
    println!(
        "PASS criterion 4: adversarial training beats the pooled baseline by {mean:+.2} points \
         on average over 3 seeds (threshold +5)"
    );
}

// ---------------------------------------------------------------------------
// 5. mapper shape recovery

#[test]
fn criterion_5_mapper_shapes() {
    let cfg = MapperConfig::default();

    // A noisy circle keeps its loop.
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let circle = Array2::from_shape_fn((200, 2), |(i, j)| {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / 200.0;
        let r = 1.0 + 0.05 * rng.sample::<f64, _>(StandardNormal);
        if j == 0 {
            r * theta.cos()
        } else {
            r * theta.sin()
        }
    });
    let groups = vec!["all".to_string(); 200];
    let graph = mapper_with_lens(&circle, &circle, &groups, &cfg).unwrap();
    let rank = graph.cycle_rank();
    assert!(rank >= 1, "circle lost its loop (cycle rank {rank})");

    // Two separated blobs stay apart.
    let blobs = Array2::from_shape_fn((200, 2), |(i, j)| {
        let center = if i < 100 { -50.0 } else { 50.0 };
        let jitter: f64 = rng.sample(StandardNormal);
        if j == 0 {
            center + jitter
        } else {
            jitter
        }
    });
    let graph = mapper_with_lens(&blobs, &blobs, &groups, &cfg).unwrap();
    let components = graph.component_count();
    assert!(components >= 2, "blobs fused ({components} component)");

    // The default cover tiles the lens with exactly 25 regions.
    let cover = build_cover(&circle, cfg.k, cfg.overlap, CoverStyle::CellCentered).unwrap();
    assert_eq!(cover.regions.len(), 25);

    // Desk-scale grouping report on a real extraction (reported, not gated):
    // how many amplitude-family features sit mostly in nodes dominated by
    // their own group.
    let synth = SynthConfig {
        domains: 4,
        classes: 3,
        cycles: 6,
        samples_per_recording: 400,
        noise_level: 0.15,
        seed: 5,
        ..SynthConfig::default()
    };
    let dataset = segment_all(&synth_generate(&synth).unwrap());
    let cloud = extract_all(&dataset, &FeatureConfig::default()).to_labeled();
    let out = run_mapper(&cloud, &cfg).unwrap();
    let dominant: Vec<String> = (0..out.graph.nodes.len())
        .map(|n| out.graph.dominant_group(n).unwrap_or("").to_string())
        .collect();
    let mut sap_points = 0usize;
    let mut sap_majority = 0usize;
    for (p, group) in out.groups.iter().enumerate() {
        if group != "SAP" {
            continue;
        }
        let containing: Vec<usize> = out
            .graph
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, node)| node.members.contains(&p))
            .map(|(n, _)| n)
            .collect();
        if containing.is_empty() {
            continue;
        }
        sap_points += 1;
        let matched = containing.iter().filter(|&&n| dominant[n] == "SAP").count();
        if 2 * matched > containing.len() {
            sap_majority += 1;
        }
    }
    println!(
        "  report: {sap_majority}/{sap_points} amplitude features sit mostly in \
         amplitude-dominated nodes at desk scale"
    );
    println!(
        "PASS criterion 5: circle cycle rank {rank} >= 1; blob components {components} >= 2; \
         5x5 cover has exactly 25 regions"
    );
}

// ---------------------------------------------------------------------------
// 6. signal path

#[test]
fn criterion_6_signal_path() {
    let filter = FilterSpec::default().design().unwrap();
    let db = |f_hz: f64| 20.0 * filter.magnitude_at(f_hz).log10();
    let pass = db(100.0);
    let low_edge = db(20.0);
    let high_edge = db(495.0);
    let reject = db(5.0);
    assert!(pass.abs() <= 0.5, "100 Hz gain {pass:.3} dB");
    assert!((low_edge + 3.0).abs() <= 1.0, "20 Hz gain {low_edge:.3} dB");
    assert!((high_edge + 3.0).abs() <= 1.0, "495 Hz gain {high_edge:.3} dB");
    assert!(reject <= -20.0, "5 Hz gain {reject:.3} dB");

    for samples in [151usize, 151 + 50, 151 + 51, 600, 1000, 5000] {
        assert_eq!(window_count(samples), Some((samples - 151) / 51 + 1));
    }
    assert_eq!(window_count(150), None);
    // and a real segmentation honors the formula
    let synth = SynthConfig {
        domains: 2,
        classes: 2,
        cycles: 1,
        samples_per_recording: 600,
        ..SynthConfig::default()
    };
    let recordings = synth_generate(&synth).unwrap();
    let dataset = segment_all(&recordings);
    assert_eq!(
        dataset.windows.len(),
        recordings.len() * ((600 - 151) / 51 + 1)
    );
    println!(
        "PASS criterion 6: band-pass {pass:+.2} dB at 100 Hz, {low_edge:+.2}/{high_edge:+.2} dB \
         at the 20/495 Hz edges, {reject:+.1} dB at 5 Hz; segment counts exact"
    );
}

// ---------------------------------------------------------------------------
// 7. statistics oracles

/// Exact two-sided signed-rank p by direct enumeration of every sign
/// assignment, with average ranks for tied magnitudes.
fn brute_force_p(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    // doubled average ranks of |d| (integers even under ties)
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks2 = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // doubled average of ranks i+1..=j+1
        let r2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks2[k] = r2;
        }
        i = j + 1;
    }
    let w_obs: u64 = (0..n)
        .filter(|&k| diffs[k] > 0.0)
        .map(|k| ranks2[k])
        .sum();
    let mut le = 0u64;
    let mut ge = 0u64;
    for mask in 0u32..(1 << n) {
        let w: u64 = (0..n)
            .filter(|&k| mask & (1 << k) != 0)
            .map(|k| ranks2[k])
            .sum();
        if w <= w_obs {
            le += 1;
        }
        if w >= w_obs {
            ge += 1;
        }
    }
    (2.0 * (le.min(ge) as f64) / (1u64 << n) as f64).min(1.0)
}

#[test]
fn criterion_7_statistics_oracles() {
    // Signed-rank exact enumeration against brute force: every sign
    // pattern for n = 5..=10, with distinct and with tied magnitudes.
    let mut checked = 0usize;
    for n in 5usize..=10 {
        for scheme in 0..2 {
            let magnitudes: Vec<f64> = (0..n)
                .map(|i| {
                    if scheme == 0 {
                        (i + 1) as f64
                    } else {
                        ((i / 2) + 1) as f64 // pairs of ties
                    }
                })
                .collect();
            for mask in 0u32..(1 << n) {
                let diffs: Vec<f64> = (0..n)
                    .map(|i| {
                        if mask & (1 << i) != 0 {
                            magnitudes[i]
                        } else {
                            -magnitudes[i]
                        }
                    })
                    .collect();
                let p = wilcoxon_signed_rank(&diffs).unwrap();
                let brute = brute_force_p(&diffs);
                assert!(
                    (p - brute).abs() < 1e-12,
                    "n={n} scheme={scheme} mask={mask:b}: {p} vs {brute}"
                );
                checked += 1;
            }
        }
    }

    // Effect-size arithmetic is exact.
    assert_eq!(
        cohens_d(&[1.5, 2.0, 2.5], &[0.5, 1.0, 1.5]).unwrap(),
        2.0,
        "pooled sd 0.25 with mean gap 1.0"
    );
    assert_eq!(cohens_d(&[3.0, 4.0, 5.0], &[3.0, 4.0, 5.0]).unwrap(), 0.0);
    assert_eq!(
        cohens_d(&[0.5, 1.0, 1.5], &[1.5, 2.0, 2.5]).unwrap(),
        -2.0,
        "antisymmetric"
    );

    // Pooled-covariance classifier agrees with the closed-form optimum.
    let mut rng = ChaCha20Rng::seed_from_u64(23);
    let mean0 = [0.0, 0.0];
    let mean1 = [2.0, 1.0];
    // shared covariance via mixing matrix A: x = mu + A z
    let a = [[1.0, 0.0], [0.6, 0.8]];
    let draw = |mu: &[f64; 2], rng: &mut ChaCha20Rng| {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        [
            mu[0] + a[0][0] * z0 + a[0][1] * z1,
            mu[1] + a[1][0] * z0 + a[1][1] * z1,
        ]
    };
    let n_train = 400;
    let mut x = Array2::zeros((2 * n_train, 2));
    let mut y = Vec::with_capacity(2 * n_train);
    for i in 0..2 * n_train {
        let (mu, label) = if i < n_train { (&mean0, 0) } else { (&mean1, 1) };
        let v = draw(mu, &mut rng);
        x[(i, 0)] = v[0];
        x[(i, 1)] = v[1];
        y.push(label);
    }
    let model = lda_fit(x.view(), &y).unwrap();
    // Bayes rule from the true parameters: sigma = A A^T
    let sigma = [
        [
            a[0][0] * a[0][0] + a[0][1] * a[0][1],
            a[0][0] * a[1][0] + a[0][1] * a[1][1],
        ],
        [
            a[1][0] * a[0][0] + a[1][1] * a[0][1],
            a[1][0] * a[1][0] + a[1][1] * a[1][1],
        ],
    ];
    let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
    let inv = [
        [sigma[1][1] / det, -sigma[0][1] / det],
        [-sigma[1][0] / det, sigma[0][0] / det],
    ];
    let bayes = |v: &[f64; 2]| {
        let score = |mu: &[f64; 2]| {
            let w = [
                inv[0][0] * mu[0] + inv[0][1] * mu[1],
                inv[1][0] * mu[0] + inv[1][1] * mu[1],
            ];
            v[0] * w[0] + v[1] * w[1] - 0.5 * (mu[0] * w[0] + mu[1] * w[1])
        };
        usize::from(score(&mean1) > score(&mean0))
    };
    let mut agree = 0usize;
    let n_test = 2000;
    for i in 0..n_test {
        let mu = if i % 2 == 0 { &mean0 } else { &mean1 };
        let v = draw(mu, &mut rng);
        let pred = model
            .predict_one(Array1::from(vec![v[0], v[1]]).view())
            .unwrap();
        if pred == bayes(&v) {
            agree += 1;
        }
    }
    let agreement = agree as f64 / n_test as f64;
    assert!(agreement >= 0.98, "Bayes agreement {agreement:.4}");
    println!(
        "PASS criterion 7: signed-rank exact matches brute force on {checked} patterns; \
         effect sizes exact; classifier-Bayes agreement {agreement:.3} >= 0.98"
    );
}

// ---------------------------------------------------------------------------
// 8. interpretation discrimination

#[test]
fn criterion_8_interpretation_discrimination() {
    let run = seed0_run();
    let net = ConvNet::new();
    // Source-domain held-out-cycle windows: the classes the model knows.
    let picks: Vec<usize> = run
        .dataset
        .windows
        .iter()
        .zip(&run.dataset.cycles)
        .enumerate()
        .filter(|(_, (w, c))| w.participant.0 != run.held_out && c.0 >= 5)
        .map(|(i, _)| i)
        .step_by(23)
        .take(24)
        .collect();
    assert!(picks.len() >= 20, "too few evaluation windows");
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let mut true_sum = 0.0;
    let mut noise_sum = 0.0;
    for &i in &picks {
        let w = &run.dataset.windows[i];
        let bn = stats_for(&run.stats, w.participant.0).unwrap();
        let gesture = usize::from(w.gesture.0);
        let map = guided_grad_cam(&net, &run.params, bn, w, i, gesture).unwrap();
        true_sum += map.values.iter().copied().fold(0.0_f64, f64::max);

        // Matched noise: same per-channel mean and spread, no gesture at all.
        let mut noise = w.clone();
        let (rows, cols) = noise.data.dim();
        let mut data = Array2::zeros((rows, cols));
        for r in 0..rows {
            let row = w.data.row(r);
            let mean = row.mean().unwrap();
            let sd = row.std(0.0);
            for c in 0..cols {
                data[(r, c)] = mean + sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        noise.data = data;
        let nmap = guided_grad_cam(&net, &run.params, bn, &noise, i, gesture).unwrap();
        noise_sum += nmap.values.iter().copied().fold(0.0_f64, f64::max);
    }
    let mean_true = true_sum / picks.len() as f64;
    let mean_noise = noise_sum / picks.len() as f64;
    assert!(
        mean_true >= 2.0 * mean_noise,
        "true-class relevance {mean_true:.3e} is not twice the matched-noise {mean_noise:.3e}"
    );
    println!(
        "PASS criterion 8: mean peak relevance {mean_true:.3e} for the true class vs \
         {mean_noise:.3e} on matched noise ({:.1}x >= 2x)",
        mean_true / mean_noise.max(f64::MIN_POSITIVE)
    );
}

// ---------------------------------------------------------------------------
// 9. CLI determinism

fn cli(root: &Path, config: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_myofeat"))
        .current_dir(root)
        .env("RUST_LOG", "warn")
        .arg("--config")
        .arg(config)
        .args(args)
        .status()
        .expect("binary should launch");
    assert!(status.success(), "myofeat {args:?} failed");
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn criterion_9_cli_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        r#"
[paths]
windows = "synth/windows"
checkpoint = "train/model.ckpt"
handcrafted = "features/features.csv"
learned = "learned/learned.csv"

[synth]
domains = 4
classes = 3
cycles = 6
samples_per_recording = 400
seed = 7

[train]
max_epochs = 2
batch_size = 8
seed = 7

[probe]
restarts = 1
"#,
    )
    .unwrap();

    let mut roots = Vec::new();
    for name in ["first", "second"] {
        let root = tmp.path().join(name);
        fs::create_dir(&root).unwrap();
        cli(&root, &config, &["synth", "--out", "synth"]);
        cli(&root, &config, &["features", "--out", "features"]);
        cli(&root, &config, &["train", "--mode", "adann", "--out", "train"]);
        cli(&root, &config, &["learned-features", "--out", "learned"]);
        cli(&root, &config, &["mapper", "--scenario", "c", "--out", "mapper"]);
        cli(&root, &config, &["gradcam", "--out", "gradcam"]);
        cli(&root, &config, &["probe", "--out", "probe"]);
        cli(&root, &config, &["lda", "--out", "lda"]);
        roots.push(root);
    }

    let first = tree(&roots[0]);
    let second = tree(&roots[1]);
    let names_first: Vec<&String> = first.keys().collect();
    let names_second: Vec<&String> = second.keys().collect();
    assert_eq!(names_first, names_second, "runs produced different file sets");
    let mut bytes = 0usize;
    for (name, content) in &first {
        assert_eq!(
            content, &second[name],
            "artifact {name} differs between identical runs"
        );
        bytes += content.len();
    }
    println!(
        "PASS criterion 9: {} artifacts ({bytes} bytes) across an eight-command pipeline are \
         byte-identical on rerun",
        first.len()
    );
}
