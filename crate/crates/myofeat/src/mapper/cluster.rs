//! Agglomerative clustering with the minimum-variance (Ward) criterion and a
//! first-gap merge-height cutoff.

use ndarray::{Array1, Array2};

/// One merge in the dendrogram, in the order performed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Increase in total within-cluster sum of squares caused by the merge.
    pub height: f64,
}

/// Full merge trace for `n` points: `n - 1` entries, heights non-decreasing
/// is not guaranteed in general but holds for the cases we cut.
pub fn ward_trace(points: &Array2<f64>) -> Vec<Merge> {
    let n = points.nrows();
    let mut sizes: Vec<usize> = vec![1; n];
    let mut centroids: Vec<Array1<f64>> =
        (0..n).map(|i| points.row(i).to_owned()).collect();
    let mut alive: Vec<bool> = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        // Scan all alive pairs; ties broken by smallest (i, j).
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !alive[j] {
                    continue;
                }
                let (na, nb) = (sizes[i] as f64, sizes[j] as f64);
                let diff = &centroids[i] - &centroids[j];
                let d2 = diff.dot(&diff);
                let delta = na * nb / (na + nb) * d2;
                let better = match best {
                    None => true,
                    Some((h, _, _)) => delta < h,
                };
                if better {
                    best = Some((delta, i, j));
                }
            }
        }
        let (height, i, j) = best.expect("at least two clusters alive");
        let (na, nb) = (sizes[i] as f64, sizes[j] as f64);
        let merged = (&centroids[i] * na + &centroids[j] * nb) / (na + nb);
        centroids[i] = merged;
        sizes[i] += sizes[j];
        alive[j] = false;
        merges.push(Merge { a: i, b: j, height });
    }
    merges
}

/// Cuts the dendrogram at the first gap: merge heights are histogrammed into
/// `bins` equal bins over `[0, max]`; the threshold is the left edge of the
/// first empty bin, and only merges strictly below it are applied.  With no
/// empty bin everything merges into a single cluster.
///
/// Returns cluster labels `0..c` in order of first appearance.
pub fn cluster_first_gap(points: &Array2<f64>, bins: usize) -> Vec<usize> {
    let n = points.nrows();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0];
    }
    assert!(bins >= 1, "need at least one histogram bin");
    let merges = ward_trace(points);
    let max = merges.iter().map(|m| m.height).fold(0.0_f64, f64::max);
    let threshold = if max <= 0.0 {
        // All points coincide: one cluster.
        f64::INFINITY
    } else {
        let width = max / bins as f64;
        let mut counts = vec![0usize; bins];
        for m in &merges {
            let idx = ((m.height / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        match counts.iter().position(|&c| c == 0) {
            Some(first_empty) => first_empty as f64 * width,
            None => f64::INFINITY,
        }
    };

    // Union-find over the merges below the threshold.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in &merges {
        if m.height < threshold {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            if ra != rb {
                parent[rb] = ra;
            }
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        let root = find(&mut parent, i);
        if labels[root] == usize::MAX {
            labels[root] = next;
            next += 1;
        }
        labels[i] = labels[root];
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::sub_rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn four_point_line_trace_matches_hand_computation() {
        // Points 0, 1, 9, 10 on a line: pairs (0,1) and (9,10) merge at
        // 1*1/2 * 1 = 0.5 each, then the two pairs merge at
        // 2*2/4 * 9.5^2 = 90.25... no: centroids 0.5 and 9.5, distance 9,
        // so 2*2/4 * 81 = 81.
        let pts = Array2::from_shape_vec((4, 1), vec![0.0, 1.0, 9.0, 10.0]).unwrap();
        let trace = ward_trace(&pts);
        let heights: Vec<f64> = trace.iter().map(|m| m.height).collect();
        assert!((heights[0] - 0.5).abs() < 1e-12);
        assert!((heights[1] - 0.5).abs() < 1e-12);
        assert!((heights[2] - 81.0).abs() < 1e-12);
        // Tie between (0,1) and (2,3) resolves to the smaller index pair.
        assert_eq!((trace[0].a, trace[0].b), (0, 1));
        assert_eq!((trace[1].a, trace[1].b), (2, 3));
    }

    #[test]
    fn first_gap_cut_separates_the_line_pairs() {
        let pts = Array2::from_shape_vec((4, 1), vec![0.0, 1.0, 9.0, 10.0]).unwrap();
        let labels = cluster_first_gap(&pts, 10);
        assert_eq!(labels.len(), 4);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
        // Labels are numbered in order of first appearance.
        assert_eq!(labels[0], 0);
        assert_eq!(labels[2], 1);
    }

    #[test]
    fn two_well_separated_blobs_are_recovered() {
        let mut rng = sub_rng(9, &[0x11]);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut data = Vec::new();
        for i in 0..50 {
            let center = if i < 25 { -5.0 } else { 5.0 };
            data.push(center + noise.sample(&mut rng));
            data.push(center + noise.sample(&mut rng));
        }
        let pts = Array2::from_shape_vec((50, 2), data).unwrap();
        let labels = cluster_first_gap(&pts, 10);
        let first = labels[0];
        assert!(labels[..25].iter().all(|&l| l == first));
        let second = labels[25];
        assert_ne!(first, second);
        assert!(labels[25..].iter().all(|&l| l == second));
    }

    #[test]
    fn degenerate_inputs() {
        let empty = Array2::<f64>::zeros((0, 3));
        assert!(cluster_first_gap(&empty, 10).is_empty());
        let single = Array2::from_shape_vec((1, 2), vec![1.0, 2.0]).unwrap();
        assert_eq!(cluster_first_gap(&single, 10), vec![0]);
        // Identical points: zero max height, one cluster.
        let same = Array2::from_elem((6, 2), 3.0);
        let labels = cluster_first_gap(&same, 10);
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn coarse_bins_hide_the_gap_and_merge_everything() {
        // Same line as the trace test; with only two bins the heights
        // [0.5, 0.5, 81] leave no bin empty, so no cut is found.
        let pts = Array2::from_shape_vec((4, 1), vec![0.0, 1.0, 9.0, 10.0]).unwrap();
        let labels = cluster_first_gap(&pts, 2);
        assert!(labels.iter().all(|&l| l == 0), "{labels:?}");
    }
}
