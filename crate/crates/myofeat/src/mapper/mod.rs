//! Topological summarization of feature clouds.
//!
//! The construction treats each descriptor (row of a [`LabeledCloud`]) as a
//! point in window-space and builds a network whose shape reflects how the
//! descriptors organize:
//!
//! 1. rows are z-scored, then projected by PCA to the components holding
//!    99% of the variance;
//! 2. a 2-D t-SNE lens positions the points in the plane;
//! 3. an overlapping rectangular cover (5 x 5 cells, 65% overlap) tiles the
//!    lens;
//! 4. inside every region the covered points are Ward-clustered in the PCA
//!    space with a first-gap cutoff — each cluster becomes a node;
//! 5. nodes sharing a point are joined by an edge.
//!
//! Node composition percentages record which descriptor families populate
//! each node.

mod cluster;
mod cover;
mod graph;
mod pca;
mod tsne;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::LabeledCloud;

pub use cluster::{cluster_first_gap, ward_trace, Merge};
pub use cover::{build_cover, Cover, CoverStyle, Region};
pub use graph::{build_graph, MapperGraph, Node};
pub use pca::pca_reduce;
pub use tsne::{
    joint_probabilities, kl_gradient, kl_objective, tsne_embed, Lens, TSNE_ITERATIONS,
};

#[derive(Debug, Error)]
pub enum MapperError {
    #[error("need at least {need} points, got {points}")]
    TooFewPoints { points: usize, need: usize },
    #[error("cloud has no variance to embed")]
    DegenerateCloud,
    #[error("perplexity {perplexity} must stay below (points - 1) / 3 = {bound}")]
    PerplexityTooLarge { perplexity: f64, bound: f64 },
    #[error("cover overlap {0} outside [0, 1)")]
    BadOverlap(f64),
    #[error("point {0} has no group label")]
    UnlabeledPoint(usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Knobs of the construction; the defaults reproduce the reference layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MapperConfig {
    /// Subdivisions per lens axis.
    pub k: usize,
    /// Fraction of each region shared with its neighbors.
    pub overlap: f64,
    /// Center regions on subdivision vertices instead of cells.
    pub vertex_centered: bool,
    /// t-SNE perplexity; clamped below (points - 1) / 3 when too large.
    pub perplexity: f64,
    /// t-SNE gradient iterations.
    pub iterations: usize,
    /// Fraction of variance the PCA projection must retain.
    pub variance_target: f64,
    /// Histogram bins for the first-gap cluster cutoff.
    pub bins: usize,
    pub seed: u64,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            k: 5,
            overlap: 0.65,
            vertex_centered: false,
            perplexity: 30.0,
            iterations: TSNE_ITERATIONS,
            variance_target: 0.99,
            bins: 10,
            seed: 0,
        }
    }
}

/// Everything the pipeline produces for one cloud.
#[derive(Debug, Clone)]
pub struct MapperOutput {
    pub graph: MapperGraph,
    pub lens: Lens,
    /// PCA projection the clustering ran on (points x retained components).
    pub reduced: Array2<f64>,
    pub labels: Vec<String>,
    pub groups: Vec<String>,
    /// Perplexity actually used after clamping.
    pub effective_perplexity: f64,
}

/// Runs the full construction on a labeled cloud.
pub fn run_mapper(cloud: &LabeledCloud, cfg: &MapperConfig) -> Result<MapperOutput, MapperError> {
    let standardized = cloud.standardized();
    let reduced = pca_reduce(&standardized, cfg.variance_target)?;
    let m = reduced.nrows();
    let bound = (m as f64 - 1.0) / 3.0;
    let effective_perplexity = if cfg.perplexity >= bound {
        let clamped = (bound - 1.0).max(1.0);
        log::warn!(
            "perplexity {} too large for {} points; using {}",
            cfg.perplexity,
            m,
            clamped
        );
        clamped
    } else {
        cfg.perplexity
    };
    let lens = tsne_embed(&reduced, effective_perplexity, cfg.seed, cfg.iterations)?;
    let graph = mapper_with_lens(&reduced, &lens.points, &cloud.groups, cfg)?;
    Ok(MapperOutput {
        graph,
        lens,
        reduced,
        labels: cloud.labels.clone(),
        groups: cloud.groups.clone(),
        effective_perplexity,
    })
}

/// Cover/cluster/graph stages with an explicit lens; `points` is the space
/// the per-region clustering runs in (rows aligned with `lens`).
pub fn mapper_with_lens(
    points: &Array2<f64>,
    lens: &Array2<f64>,
    groups: &[String],
    cfg: &MapperConfig,
) -> Result<MapperGraph, MapperError> {
    assert_eq!(points.nrows(), lens.nrows(), "lens misaligned with points");
    assert_eq!(lens.ncols(), 2, "lens must be two dimensional");
    let style = if cfg.vertex_centered {
        CoverStyle::VertexCentered
    } else {
        CoverStyle::CellCentered
    };
    let cover = build_cover(lens, cfg.k, cfg.overlap, style)?;
    let mut region_members: Vec<Vec<usize>> = vec![Vec::new(); cover.regions.len()];
    for (i, row) in lens.rows().into_iter().enumerate() {
        for r in cover.regions_of([row[0], row[1]]) {
            region_members[r].push(i);
        }
    }
    let region_labels: Vec<Vec<usize>> = region_members
        .iter()
        .map(|members| {
            let sub = points.select(Axis(0), members);
            cluster_first_gap(&sub, cfg.bins)
        })
        .collect();
    build_graph(&region_members, &region_labels, groups)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MapperError + '_ {
    move |source| MapperError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the graph as JSON: `{"nodes": [{id, size, members, composition}],
/// "edges": [[a, b], ...]}`.
pub fn save_graph_json(graph: &MapperGraph, path: &Path) -> Result<(), MapperError> {
    #[derive(Serialize)]
    struct NodeOut<'a> {
        id: usize,
        size: usize,
        members: &'a [usize],
        composition: &'a BTreeMap<String, f64>,
    }
    #[derive(Serialize)]
    struct GraphOut<'a> {
        nodes: Vec<NodeOut<'a>>,
        edges: &'a [(usize, usize)],
    }
    let out = GraphOut {
        nodes: graph
            .nodes
            .iter()
            .map(|n| NodeOut {
                id: n.id,
                size: n.members.len(),
                members: &n.members,
                composition: &n.composition,
            })
            .collect(),
        edges: &graph.edges,
    };
    let mut text = serde_json::to_string_pretty(&out).expect("graph serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// Fill colors for DOT rendering, assigned to dominant groups in sorted
/// order and recycled when there are more groups than colors.
const DOT_PALETTE: [&str; 10] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
    "#ccb974", "#64b5cd",
];

/// Writes the graph in Graphviz DOT form; nodes are filled by their
/// dominant group and sized labels show member counts.
pub fn save_graph_dot(graph: &MapperGraph, path: &Path) -> Result<(), MapperError> {
    let mut group_names: Vec<&str> = graph
        .nodes
        .iter()
        .flat_map(|n| n.composition.keys().map(|k| k.as_str()))
        .collect();
    group_names.sort_unstable();
    group_names.dedup();
    let color_of = |g: &str| {
        let idx = group_names.iter().position(|&n| n == g).unwrap_or(0);
        DOT_PALETTE[idx % DOT_PALETTE.len()]
    };
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(file, "graph mapper {{")?;
        writeln!(file, "  node [shape=circle style=filled];")?;
        for node in &graph.nodes {
            let group = graph.dominant_group(node.id).unwrap_or("");
            writeln!(
                file,
                "  n{} [label=\"{} ({})\" fillcolor=\"{}\"];",
                node.id,
                node.id,
                node.members.len(),
                color_of(group)
            )?;
        }
        for &(a, b) in &graph.edges {
            writeln!(file, "  n{a} -- n{b};")?;
        }
        writeln!(file, "}}")
    };
    emit().map_err(io_err(path))
}

/// Writes the lens coordinates as CSV with the final divergence recorded in
/// a leading comment line.
pub fn save_lens_csv(
    lens: &Lens,
    labels: &[String],
    groups: &[String],
    path: &Path,
) -> Result<(), MapperError> {
    assert_eq!(labels.len(), lens.points.nrows());
    assert_eq!(groups.len(), lens.points.nrows());
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(file, "# kl_divergence={}", lens.kl_divergence)?;
        writeln!(file, "label,group,x,y")?;
        for (i, (label, group)) in labels.iter().zip(groups).enumerate() {
            writeln!(
                file,
                "{},{},{},{}",
                label,
                group,
                lens.points[(i, 0)],
                lens.points[(i, 1)]
            )?;
        }
        Ok(())
    };
    emit().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::sub_rng;
    use crate::features::PointMeta;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn meta(n: usize) -> Vec<PointMeta> {
        (0..n)
            .map(|i| PointMeta {
                participant: 0,
                cycle: 0,
                gesture: 0,
                window_index: i / 10,
                channel: i % 10,
            })
            .collect()
    }

    fn toy_cloud(rows: usize, cols: usize, seed: u64) -> LabeledCloud {
        let mut rng = sub_rng(seed, &[0x3c]);
        // Two row families with distinct column profiles plus noise, so the
        // lens has real structure to find.
        let values = Array2::from_shape_fn((rows, cols), |(r, c)| {
            let family = if r < rows / 2 { 1.0 } else { -1.0 };
            family * (c as f64 / cols as f64) + 0.1 * rng.gen_range(-1.0..1.0)
        });
        LabeledCloud {
            values,
            labels: (0..rows).map(|r| format!("r{r}")).collect(),
            groups: (0..rows)
                .map(|r| if r < rows / 2 { "low" } else { "high" }.to_string())
                .collect(),
            points: meta(cols),
        }
    }

    fn circle(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, 2), |(i, c)| {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            if c == 0 {
                theta.cos()
            } else {
                theta.sin()
            }
        })
    }

    #[test]
    fn pipeline_runs_end_to_end_and_is_deterministic() {
        let cloud = toy_cloud(24, 40, 5);
        let cfg = MapperConfig {
            iterations: 300,
            ..MapperConfig::default()
        };
        let out = run_mapper(&cloud, &cfg).unwrap();
        // Default perplexity 30 exceeds (24 - 1) / 3 and must be clamped.
        assert!(out.effective_perplexity < 23.0 / 3.0);
        assert!(!out.graph.nodes.is_empty());
        assert!(out.lens.kl_divergence.is_finite());
        assert_eq!(out.lens.points.nrows(), 24);
        for node in &out.graph.nodes {
            let sum: f64 = node.composition.values().sum();
            assert!((sum - 100.0).abs() < 1e-9);
        }
        let again = run_mapper(&cloud, &cfg).unwrap();
        assert_eq!(out.graph.edges, again.graph.edges);
        for (a, b) in out.graph.nodes.iter().zip(&again.graph.nodes) {
            assert_eq!(a.members, b.members);
        }
    }

    #[test]
    fn identity_lens_on_a_circle_finds_the_loop() {
        let pts = circle(200);
        let groups = vec!["ring".to_string(); 200];
        let cfg = MapperConfig::default();
        let graph = mapper_with_lens(&pts, &pts, &groups, &cfg).unwrap();
        assert!(
            graph.cycle_rank() >= 1,
            "a circle must close into at least one cycle: {} edges, {} nodes",
            graph.edges.len(),
            graph.nodes.len()
        );
    }

    #[test]
    fn identity_lens_on_separated_blobs_stays_disconnected() {
        let mut rng = sub_rng(3, &[0x3d]);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut data = Vec::new();
        for i in 0..80 {
            let cx = if i < 40 { -50.0 } else { 50.0 };
            data.push(cx + noise.sample(&mut rng));
            data.push(noise.sample(&mut rng));
        }
        let pts = Array2::from_shape_vec((80, 2), data).unwrap();
        let groups: Vec<String> = (0..80)
            .map(|i| if i < 40 { "a" } else { "b" }.to_string())
            .collect();
        let graph = mapper_with_lens(&pts, &pts, &groups, &MapperConfig::default()).unwrap();
        assert!(graph.component_count() >= 2);
        for node in &graph.nodes {
            // Regions are narrower than the blob separation, so no node
            // mixes the two groups.
            assert_eq!(node.composition.len(), 1);
        }
    }

    #[test]
    fn default_config_round_trips_through_serde() {
        let cfg: MapperConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.k, 5);
        assert!((cfg.overlap - 0.65).abs() < 1e-12);
        assert!(!cfg.vertex_centered);
        assert_eq!(cfg.iterations, TSNE_ITERATIONS);
        assert_eq!(cfg.bins, 10);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: MapperConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.k, cfg.k);
    }

    #[test]
    fn exports_are_parseable_and_carry_the_divergence() {
        let pts = circle(60);
        let groups: Vec<String> = (0..60)
            .map(|i| if i % 2 == 0 { "even" } else { "odd" }.to_string())
            .collect();
        let labels: Vec<String> = (0..60).map(|i| format!("p{i}")).collect();
        let cfg = MapperConfig::default();
        let graph = mapper_with_lens(&pts, &pts, &groups, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let json_path = dir.path().join("graph.json");
        save_graph_json(&graph, &json_path).unwrap();
        let parsed: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        let nodes = parsed["nodes"].as_array().unwrap();
        assert_eq!(nodes.len(), graph.nodes.len());
        assert!(nodes[0]["composition"].is_object());
        assert_eq!(
            parsed["edges"].as_array().unwrap().len(),
            graph.edges.len()
        );

        let dot_path = dir.path().join("graph.dot");
        save_graph_dot(&graph, &dot_path).unwrap();
        let dot = std::fs::read_to_string(&dot_path).unwrap();
        assert!(dot.starts_with("graph mapper {"));
        assert!(dot.contains("fillcolor"));
        assert!(dot.contains(" -- "));

        let lens = Lens {
            points: pts.clone(),
            kl_divergence: 0.25,
        };
        let csv_path = dir.path().join("lens.csv");
        save_lens_csv(&lens, &labels, &groups, &csv_path).unwrap();
        let csv = std::fs::read_to_string(&csv_path).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "# kl_divergence=0.25");
        assert_eq!(lines.next().unwrap(), "label,group,x,y");
        assert_eq!(lines.count(), 60);
    }
}
