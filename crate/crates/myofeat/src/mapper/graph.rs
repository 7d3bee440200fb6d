//! Mapper graph assembly: nodes are per-region clusters, edges join nodes
//! sharing at least one member point.

use std::collections::BTreeMap;

use super::MapperError;

/// One graph node: a cluster inside one covering region.
#[derive(Debug, Clone)]
pub struct Node {
    pub id: usize,
    pub region: usize,
    /// Global point indices, ascending.
    pub members: Vec<usize>,
    /// Group name -> percentage of members, summing to 100.
    pub composition: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default)]
pub struct MapperGraph {
    pub nodes: Vec<Node>,
    /// Undirected edges as (lower id, higher id) pairs, deduplicated.
    pub edges: Vec<(usize, usize)>,
}

impl MapperGraph {
    /// Number of independent cycles: E - V + C.
    pub fn cycle_rank(&self) -> usize {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = n;
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[rb] = ra;
                components -= 1;
            }
        }
        self.edges.len() + components - n
    }

    pub fn component_count(&self) -> usize {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = n;
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[rb] = ra;
                components -= 1;
            }
        }
        components
    }

    /// Group with the largest share of a node's members (ties -> first
    /// alphabetically, because composition is a BTreeMap).
    pub fn dominant_group(&self, node: usize) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (k, &v) in &self.nodes[node].composition {
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((k.as_str(), v));
            }
        }
        best.map(|(k, _)| k)
    }
}

/// Builds the graph from per-region clusterings.
///
/// `region_members[r]` lists the global point indices inside region `r`, and
/// `region_labels[r]` the cluster label of each, aligned.  `groups` names the
/// group of every global point (used for node composition percentages).
pub fn build_graph(
    region_members: &[Vec<usize>],
    region_labels: &[Vec<usize>],
    groups: &[String],
) -> Result<MapperGraph, MapperError> {
    assert_eq!(region_members.len(), region_labels.len());
    let mut nodes = Vec::new();
    for (region, (members, labels)) in
        region_members.iter().zip(region_labels).enumerate()
    {
        assert_eq!(members.len(), labels.len(), "region {region} misaligned");
        let cluster_count = labels.iter().copied().max().map_or(0, |m| m + 1);
        for cluster in 0..cluster_count {
            let mut node_members: Vec<usize> = members
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == cluster)
                .map(|(&p, _)| p)
                .collect();
            node_members.sort_unstable();
            let mut composition = BTreeMap::new();
            for &p in &node_members {
                let group = groups
                    .get(p)
                    .ok_or(MapperError::UnlabeledPoint(p))?;
                *composition.entry(group.clone()).or_insert(0.0) += 1.0;
            }
            let total = node_members.len() as f64;
            for v in composition.values_mut() {
                *v = *v / total * 100.0;
            }
            let sum: f64 = composition.values().sum();
            debug_assert!((sum - 100.0).abs() < 1e-9, "composition sums to {sum}");
            nodes.push(Node {
                id: nodes.len(),
                region,
                members: node_members,
                composition,
            });
        }
    }

    // point -> nodes containing it; every co-membership induces an edge.
    let mut containing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for node in &nodes {
        for &p in &node.members {
            containing.entry(p).or_default().push(node.id);
        }
    }
    let mut edges = Vec::new();
    for ids in containing.values() {
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                let e = (ids[i].min(ids[j]), ids[i].max(ids[j]));
                edges.push(e);
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(MapperGraph { nodes, edges })
}
