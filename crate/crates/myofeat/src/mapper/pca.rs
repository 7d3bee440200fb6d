//! Principal-component reduction of feature points.
//!
//! Rows are points. When the ambient dimension exceeds the point count the
//! spectrum is computed from the M x M Gram matrix of centered rows instead
//! of the ambient covariance; both routes give identical scores up to the
//! sign convention (largest-magnitude score entry positive).

use ndarray::Array2;

use super::MapperError;

/// Scores of the smallest leading component set reaching `variance_target`.
pub fn pca_reduce(values: &Array2<f64>, variance_target: f64) -> Result<Array2<f64>, MapperError> {
    let (m, n) = values.dim();
    if m < 2 {
        return Err(MapperError::TooFewPoints { points: m, need: 2 });
    }
    // Center the point cloud (mean row to the origin).
    let mut centered = values.clone();
    for c in 0..n {
        let mean = centered.column(c).sum() / m as f64;
        centered.column_mut(c).mapv_inplace(|v| v - mean);
    }
    let total: f64 = centered.iter().map(|v| v * v).sum();
    if total <= 0.0 {
        return Err(MapperError::DegenerateCloud);
    }

    // Eigen-decompose whichever matrix is smaller.
    let (eigvals, scores) = if n <= m {
        direct_route(&centered)
    } else {
        gram_route(&centered)
    };
    let sum: f64 = eigvals.iter().filter(|v| **v > 0.0).sum();
    let mut z = 0;
    let mut acc = 0.0;
    while z < eigvals.len() && acc / sum < variance_target {
        acc += eigvals[z].max(0.0);
        z += 1;
    }
    let mut out = Array2::zeros((m, z));
    for j in 0..z {
        // Deterministic orientation: largest-magnitude score positive.
        let column: Vec<f64> = (0..m).map(|i| scores[(i, j)]).collect();
        let lead = column
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let flip = if column[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            out[(i, j)] = flip * column[i];
        }
    }
    Ok(out)
}

/// Ambient covariance route (n x n), for wide-enough point sets.
fn direct_route(centered: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let (m, n) = centered.dim();
    let denom = (m - 1) as f64;
    let mut cov = nalgebra::DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let s: f64 = (0..m).map(|i| centered[(i, a)] * centered[(i, b)]).sum();
            cov[(a, b)] = s / denom;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigvals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut scores = Array2::zeros((m, n));
    for (j, &src) in order.iter().enumerate() {
        let axis = eig.eigenvectors.column(src);
        for i in 0..m {
            scores[(i, j)] = (0..n).map(|c| centered[(i, c)] * axis[c]).sum();
        }
    }
    (eigvals, scores)
}

/// Gram route (m x m): scores are scaled eigenvectors of the centered Gram
/// matrix, sharing the covariance route's nonzero spectrum.
fn gram_route(centered: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let (m, n) = centered.dim();
    let denom = (m - 1) as f64;
    let mut gram = nalgebra::DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let s: f64 = (0..n).map(|c| centered[(a, c)] * centered[(b, c)]).sum();
            gram[(a, b)] = s / denom;
            gram[(b, a)] = gram[(a, b)];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigvals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut scores = Array2::zeros((m, m));
    for (j, &src) in order.iter().enumerate() {
        // Score column j = u_j * sqrt(lambda_j * (m - 1)) — the singular
        // value of the centered matrix along that axis.
        let scale = (eigvals[j].max(0.0) * denom).sqrt();
        for i in 0..m {
            scores[(i, j)] = eig.eigenvectors[(i, src)] * scale;
        }
    }
    (eigvals, scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::sub_rng;
    use rand::Rng;

    #[test]
    fn line_in_high_dimension_needs_one_component() {
        // Points along a fixed direction in 10-D.
        let dir: Vec<f64> = (0..10).map(|i| (i as f64 + 1.0) * 0.1).collect();
        let values = Array2::from_shape_fn((8, 10), |(i, j)| (i as f64 - 3.5) * dir[j]);
        let scores = pca_reduce(&values, 0.99).unwrap();
        assert_eq!(scores.ncols(), 1);
    }

    #[test]
    fn component_count_is_bounded_by_rank() {
        let mut rng = sub_rng(3, &[0x20]);
        let values = Array2::from_shape_fn((5, 40), |_| rng.gen_range(-1.0..1.0));
        let scores = pca_reduce(&values, 0.99).unwrap();
        assert!(scores.ncols() <= 4, "centering bounds rank by M-1");
    }

    #[test]
    fn constant_cloud_is_degenerate() {
        let values = Array2::from_elem((6, 12), 3.25);
        assert!(matches!(
            pca_reduce(&values, 0.99),
            Err(MapperError::DegenerateCloud)
        ));
    }

    #[test]
    fn gram_and_direct_routes_agree() {
        let mut rng = sub_rng(9, &[0x21]);
        let values = Array2::from_shape_fn((12, 7), |_| rng.gen_range(-1.0..1.0));
        // Center once; call both routes on the same data.
        let mut centered = values.clone();
        for c in 0..7 {
            let mean = centered.column(c).sum() / 12.0;
            centered.column_mut(c).mapv_inplace(|v| v - mean);
        }
        let (ev_a, sc_a) = direct_route(&centered);
        let (ev_b, sc_b) = gram_route(&centered);
        for j in 0..7 {
            assert!((ev_a[j] - ev_b[j]).abs() < 1e-9, "eigenvalue {j}");
            // Columns agree up to sign.
            let dot: f64 = (0..12).map(|i| sc_a[(i, j)] * sc_b[(i, j)]).sum();
            let norm: f64 = (0..12).map(|i| sc_a[(i, j)] * sc_a[(i, j)]).sum();
            if norm > 1e-12 {
                assert!(
                    (dot.abs() - norm).abs() < 1e-6 * norm.max(1.0),
                    "score column {j} differs beyond sign"
                );
            }
        }
    }

    #[test]
    fn scores_preserve_pairwise_distances_at_full_variance() {
        // Keeping every component is an isometry of the centered points.
        let mut rng = sub_rng(4, &[0x22]);
        let values = Array2::from_shape_fn((6, 30), |_| rng.gen_range(-1.0..1.0));
        let scores = pca_reduce(&values, 1.0 - 1e-12).unwrap();
        for a in 0..6 {
            for b in (a + 1)..6 {
                let orig: f64 = (0..30)
                    .map(|c| (values[(a, c)] - values[(b, c)]).powi(2))
                    .sum();
                let red: f64 = (0..scores.ncols())
                    .map(|c| (scores[(a, c)] - scores[(b, c)]).powi(2))
                    .sum();
                assert!(
                    (orig - red).abs() < 1e-8 * orig.max(1.0),
                    "{a},{b}: {orig} vs {red}"
                );
            }
        }
    }
}
