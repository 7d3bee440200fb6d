//! One function per subcommand; each writes its artifacts into the run
//! directory and returns the values worth logging.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use myofeat::convnet::{extract_learned, load_checkpoint, save_checkpoint, ConvNet};
use myofeat::dataio::{
    load_recordings, load_windows, save_recordings, save_windows, segment_all, synth_generate,
    CsvFormat,
};
use myofeat::evaluate::{cohens_d, effect_label, save_screening_csv, screen_features,
    wilcoxon_signed_rank};
use myofeat::features::{extract_all, method_by_name, LabeledCloud};
use myofeat::interpret::{
    guided_grad_cam, save_relevance_csv, save_relevance_json, train_regression_probe,
};
use myofeat::mapper::{run_mapper, save_graph_dot, save_graph_json, save_lens_csv, MapperOutput};
use myofeat::training::{evaluate, stats_for, train_adann, train_standard, EpochRecord,
    StopReason};
use serde_json::json;

use crate::config::{require_path, RunConfig};
use crate::rundir::RunDir;
use crate::svg;
use crate::{Mode, Scenario};

pub fn synth(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let recordings = synth_generate(&cfg.synth)?;
    save_recordings(&recordings, &dir.path("recordings"))?;
    let dataset = segment_all(&recordings);
    save_windows(&dataset, &dir.path("windows"))?;
    log::info!(
        "generated {} recordings / {} windows for {} participants",
        recordings.len(),
        dataset.windows.len(),
        cfg.synth.domains
    );
    dir.write_json(
        "summary.json",
        &json!({
            "recordings": recordings.len(),
            "windows": dataset.windows.len(),
            "participants": cfg.synth.domains,
            "classes": cfg.synth.classes,
        }),
    )
}

pub fn preprocess(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let src = require_path(&cfg.paths.recordings, "recordings")?;
    let mut recordings = load_recordings(src, &CsvFormat::default())?;
    ensure!(
        !recordings.is_empty(),
        "no recordings found in {}",
        src.display()
    );
    if cfg.preprocess.apply_filter {
        let filter = cfg.preprocess.filter.design()?;
        for rec in &mut recordings {
            *rec = filter.filter_recording(rec);
        }
    }
    let dataset = segment_all(&recordings);
    save_windows(&dataset, &dir.path("windows"))?;
    log::info!(
        "segmented {} recordings into {} windows",
        recordings.len(),
        dataset.windows.len()
    );
    dir.write_json(
        "summary.json",
        &json!({
            "recordings": recordings.len(),
            "windows": dataset.windows.len(),
            "filtered": cfg.preprocess.apply_filter,
        }),
    )
}

pub fn features(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let dataset = load_windows(require_path(&cfg.paths.windows, "windows")?)?;
    let labeled = extract_all(&dataset, &cfg.features).to_labeled();
    labeled.save(&dir.path("features.csv"))?;
    log::info!(
        "extracted {} descriptors x {} points",
        labeled.labels.len(),
        labeled.points.len()
    );
    dir.write_json(
        "summary.json",
        &json!({
            "windows": dataset.windows.len(),
            "points": labeled.points.len(),
            "descriptors": labeled.labels.len(),
        }),
    )
}

pub fn train(cfg: &RunConfig, dir: &RunDir, mode: Mode) -> Result<()> {
    let dataset = load_windows(require_path(&cfg.paths.windows, "windows")?)?;
    let split = dataset.split();
    ensure!(
        !split.train.is_empty(),
        "no training windows (cycles 0-3) in the set"
    );
    ensure!(
        !split.val.is_empty(),
        "no validation windows (cycle 4) in the set"
    );
    ensure!(
        !split.test.is_empty(),
        "no test windows (cycles 5 and above) in the set"
    );
    let train_set = dataset.subset(&split.train);
    let val_set = dataset.subset(&split.val);

    let history = File::create(dir.path("history.jsonl")).context("cannot create history.jsonl")?;
    let mut history = BufWriter::new(history);
    let mut write_err: Option<anyhow::Error> = None;
    let on_epoch = |rec: &EpochRecord| {
        log::info!(
            "epoch {:3}  lr {:.6}  val loss {:.4}  val acc {:.4}",
            rec.epoch,
            rec.lr,
            rec.val_loss,
            rec.val_accuracy
        );
        if write_err.is_none() {
            let outcome = serde_json::to_string(rec)
                .map_err(anyhow::Error::from)
                .and_then(|line| writeln!(history, "{line}").map_err(anyhow::Error::from));
            if let Err(e) = outcome {
                write_err = Some(e.context("failed writing history.jsonl"));
            }
        }
    };
    let outcome = match mode {
        Mode::Adann => train_adann(&train_set, &val_set, &cfg.train, on_epoch)?,
        Mode::Standard => train_standard(&train_set, &val_set, &cfg.train, on_epoch)?,
    };
    history.flush().context("failed writing history.jsonl")?;
    if let Some(e) = write_err {
        return Err(e);
    }

    let net = ConvNet::new();
    save_checkpoint(
        &dir.path("model.ckpt"),
        &net.layout,
        &outcome.params,
        &outcome.stats,
    )?;

    let test_set = dataset.subset(&split.test);
    let eval = evaluate(&net, &outcome.params, &outcome.stats, &test_set)?;
    let mut table = String::from("participant,windows,loss,accuracy\n");
    for (p, e) in &eval.per_participant {
        table.push_str(&format!("{p},{},{},{}\n", e.windows, e.loss, e.accuracy));
    }
    let table_path = dir.path("per_participant_accuracy.csv");
    std::fs::write(&table_path, table)
        .with_context(|| format!("cannot write {}", table_path.display()))?;

    let stop = match outcome.stop {
        StopReason::MaxEpochs => "max-epochs",
        StopReason::Plateau => "plateau",
    };
    log::info!(
        "stopped after {} epochs ({stop}); test accuracy {:.4}",
        outcome.epochs.len(),
        eval.accuracy
    );
    dir.write_json(
        "summary.json",
        &json!({
            "mode": match mode { Mode::Adann => "adann", Mode::Standard => "standard" },
            "epochs": outcome.epochs.len(),
            "stop": stop,
            "test_loss": eval.loss,
            "test_accuracy": eval.accuracy,
        }),
    )
}

pub fn learned_features(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let dataset = load_windows(require_path(&cfg.paths.windows, "windows")?)?;
    let net = ConvNet::new();
    let ckpt = load_checkpoint(require_path(&cfg.paths.checkpoint, "checkpoint")?, &net.layout)?;
    let cloud = extract_learned(&net, &ckpt.params, &ckpt.stats, &dataset)?;
    cloud.save(&dir.path("learned.csv"))?;
    log::info!(
        "extracted {} activation rows x {} points",
        cloud.labels.len(),
        cloud.points.len()
    );
    dir.write_json(
        "summary.json",
        &json!({
            "windows": dataset.windows.len(),
            "points": cloud.points.len(),
            "rows": cloud.labels.len(),
        }),
    )
}

pub fn mapper(cfg: &RunConfig, dir: &RunDir, scenario: Scenario) -> Result<()> {
    let cloud = match scenario {
        Scenario::A => LabeledCloud::load(require_path(&cfg.paths.handcrafted, "handcrafted")?)?,
        Scenario::B => LabeledCloud::load(require_path(&cfg.paths.learned, "learned")?)?,
        Scenario::C => {
            let hand =
                LabeledCloud::load(require_path(&cfg.paths.handcrafted, "handcrafted")?)?;
            let learned = LabeledCloud::load(require_path(&cfg.paths.learned, "learned")?)?;
            ensure!(
                hand.points == learned.points,
                "the two clouds describe different window sets and cannot be stacked"
            );
            hand.vstack(&learned)
        }
    };
    let out = run_mapper(&cloud, &cfg.mapper)?;
    save_graph_json(&out.graph, &dir.path("graph.json"))?;
    save_graph_dot(&out.graph, &dir.path("graph.dot"))?;
    save_lens_csv(&out.lens, &out.labels, &out.groups, &dir.path("lens.csv"))?;
    log::info!(
        "graph: {} nodes, {} edges, {} components, cycle rank {}",
        out.graph.nodes.len(),
        out.graph.edges.len(),
        out.graph.component_count(),
        out.graph.cycle_rank()
    );
    dir.write_json(
        "summary.json",
        &json!({
            "points": out.labels.len(),
            "nodes": out.graph.nodes.len(),
            "edges": out.graph.edges.len(),
            "components": out.graph.component_count(),
            "cycle_rank": out.graph.cycle_rank(),
            "effective_perplexity": out.effective_perplexity,
            "kl_divergence": out.lens.kl_divergence,
            "group_affinity": group_affinity(&out),
        }),
    )
}

/// Per group: how often its points land in nodes dominated by the same
/// group, both over (point, node) memberships and as the share of points
/// whose memberships are mostly same-group.
fn group_affinity(out: &MapperOutput) -> BTreeMap<String, serde_json::Value> {
    let dominant: Vec<&str> = (0..out.graph.nodes.len())
        .map(|n| out.graph.dominant_group(n).unwrap_or(""))
        .collect();
    let mut member_nodes: Vec<Vec<usize>> = vec![Vec::new(); out.groups.len()];
    for (n, node) in out.graph.nodes.iter().enumerate() {
        for &p in &node.members {
            member_nodes[p].push(n);
        }
    }
    #[derive(Default)]
    struct Acc {
        memberships: usize,
        matched: usize,
        points: usize,
        majority: usize,
    }
    let mut accs: BTreeMap<&str, Acc> = BTreeMap::new();
    for (p, group) in out.groups.iter().enumerate() {
        let nodes = &member_nodes[p];
        if nodes.is_empty() {
            continue;
        }
        let matched = nodes.iter().filter(|&&n| dominant[n] == group).count();
        let acc = accs.entry(group).or_default();
        acc.memberships += nodes.len();
        acc.matched += matched;
        acc.points += 1;
        if 2 * matched > nodes.len() {
            acc.majority += 1;
        }
    }
    accs.into_iter()
        .map(|(group, acc)| {
            (
                group.to_string(),
                json!({
                    "points": acc.points,
                    "membership_fraction": acc.matched as f64 / acc.memberships as f64,
                    "majority_fraction": acc.majority as f64 / acc.points as f64,
                }),
            )
        })
        .collect()
}

pub fn gradcam(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let dataset = load_windows(require_path(&cfg.paths.windows, "windows")?)?;
    let net = ConvNet::new();
    let ckpt = load_checkpoint(require_path(&cfg.paths.checkpoint, "checkpoint")?, &net.layout)?;
    let idx = cfg.gradcam.window;
    ensure!(
        idx < dataset.windows.len(),
        "window {idx} is out of range; the set has {} windows",
        dataset.windows.len()
    );
    let window = &dataset.windows[idx];
    let gesture = cfg
        .gradcam
        .gesture
        .map(usize::from)
        .unwrap_or(usize::from(window.gesture.0));
    let bn = stats_for(&ckpt.stats, window.participant.0)?;
    let map = guided_grad_cam(&net, &ckpt.params, bn, window, idx, gesture)?;
    save_relevance_csv(&map, &dir.path("relevance.csv"))?;
    save_relevance_json(&map, &dir.path("relevance.json"))?;
    svg::save_heatmap(&map, &dir.path("relevance.svg"))?;
    let peak = map.values.iter().copied().fold(0.0_f64, f64::max);
    log::info!(
        "window {idx} (participant {}, gesture {}) explained as gesture {gesture}; peak {peak:.4}",
        window.participant.0,
        window.gesture.0
    );
    dir.write_json(
        "summary.json",
        &json!({
            "window": idx,
            "participant": window.participant.0,
            "window_gesture": window.gesture.0,
            "explained_gesture": gesture,
            "peak_relevance": peak,
        }),
    )
}

pub fn probe(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let dataset = load_windows(require_path(&cfg.paths.windows, "windows")?)?;
    let net = ConvNet::new();
    let ckpt = load_checkpoint(require_path(&cfg.paths.checkpoint, "checkpoint")?, &net.layout)?;
    let method = method_by_name(&cfg.probe.method)
        .with_context(|| format!("unknown descriptor method '{}'", cfg.probe.method))?;
    let report = train_regression_probe(
        &net,
        &ckpt.params,
        &ckpt.stats,
        &dataset,
        cfg.probe.block,
        method,
        &cfg.features,
        cfg.probe.restarts,
        cfg.probe.seed,
    )?;
    log::info!(
        "probe block {} -> {}: train mse {:.4}, test mse {:.4}",
        report.block,
        report.target,
        report.train_mse,
        report.test_mse
    );
    dir.write_json("probe.json", &report)
}

pub fn lda(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let (cloud, source) = if let Some(path) = cfg.paths.handcrafted.as_deref() {
        (LabeledCloud::load(path)?, "handcrafted")
    } else if let Some(path) = cfg.paths.learned.as_deref() {
        (LabeledCloud::load(path)?, "learned")
    } else if let Some(path) = cfg.paths.windows.as_deref() {
        let dataset = load_windows(path)?;
        (extract_all(&dataset, &cfg.features).to_labeled(), "windows")
    } else {
        bail!("set `paths.handcrafted`, `paths.learned`, or `paths.windows` in the config");
    };
    let report = screen_features(&cloud, cfg.lda.pc1_singles)?;
    save_screening_csv(&report, &dir.path("screening.csv"))?;
    let best = report
        .singles
        .iter()
        .max_by(|a, b| a.accuracy.total_cmp(&b.accuracy));
    if let Some(best) = best {
        log::info!(
            "screened {} features; best single {} ({:.4})",
            report.singles.len(),
            best.label,
            best.accuracy
        );
    }
    dir.write_json(
        "summary.json",
        &json!({
            "source": source,
            "singles": report.singles.len(),
            "best_single": best.map(|b| json!({
                "label": b.label,
                "group": b.group,
                "accuracy": b.accuracy,
            })),
            "groups": report.groups.iter().map(|g| json!({
                "name": g.name,
                "group_accuracy": g.group_accuracy,
                "single_mean": g.single_mean,
                "single_std": g.single_std,
                "members": g.members,
            })).collect::<Vec<_>>(),
        }),
    )
}

pub fn stats(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let baseline =
        read_accuracy_table(require_path(&cfg.paths.accuracy_baseline, "accuracy_baseline")?)?;
    let candidate = read_accuracy_table(require_path(
        &cfg.paths.accuracy_candidate,
        "accuracy_candidate",
    )?)?;
    let mut participants = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (p, &base) in &baseline {
        if let Some(&cand) = candidate.get(p) {
            participants.push(*p);
            a.push(cand);
            b.push(base);
        }
    }
    ensure!(
        !participants.is_empty(),
        "the two tables share no participants"
    );
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let p_value = wilcoxon_signed_rank(&diffs).context("signed-rank test failed")?;
    let d = cohens_d(&a, &b).context("effect size failed")?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    log::info!(
        "{} pairs: candidate {:.4} vs baseline {:.4}, p = {p_value:.4}, d = {d:.3} ({})",
        participants.len(),
        mean(&a),
        mean(&b),
        effect_label(d)
    );
    dir.write_json(
        "stats.json",
        &json!({
            "pairs": participants.len(),
            "participants": participants,
            "baseline_mean": mean(&b),
            "candidate_mean": mean(&a),
            "mean_difference": mean(&diffs),
            "wilcoxon_p": p_value,
            "cohens_d": d,
            "effect": effect_label(d),
        }),
    )
}

/// Reads a `per_participant_accuracy.csv`-style table, keyed by the
/// `participant` column.
fn read_accuracy_table(path: &Path) -> Result<BTreeMap<u32, f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .with_context(|| format!("{} is empty", path.display()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .with_context(|| format!("{} has no `{name}` column", path.display()))
    };
    let p_col = find("participant")?;
    let a_col = find("accuracy")?;
    let mut table = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let cell = |col: usize| {
            cells
                .get(col)
                .copied()
                .with_context(|| format!("{} line {} is short", path.display(), i + 2))
        };
        let participant: u32 = cell(p_col)?
            .parse()
            .with_context(|| format!("{} line {}: bad participant id", path.display(), i + 2))?;
        let accuracy: f64 = cell(a_col)?
            .parse()
            .with_context(|| format!("{} line {}: bad accuracy", path.display(), i + 2))?;
        table.insert(participant, accuracy);
    }
    ensure!(
        !table.is_empty(),
        "{} contains no data rows",
        path.display()
    );
    Ok(table)
}
