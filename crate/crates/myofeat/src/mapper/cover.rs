//! Overlapping rectangular cover of the 2-D lens.

use ndarray::Array2;

use super::MapperError;

/// One covering rectangle: closed on all boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub center: [f64; 2],
    pub half_width: [f64; 2],
}

impl Region {
    /// Closed membership with a relative slack so points sitting exactly on
    /// the bounding box (the per-axis extrema that defined the grid) cannot
    /// fall out through rounding in `lo + i * width`.
    pub fn contains(&self, point: [f64; 2]) -> bool {
        (0..2).all(|a| {
            let tol = self.half_width[a] * 1e-9;
            (point[a] - self.center[a]).abs() <= self.half_width[a] + tol
        })
    }
}

/// Where the region centers sit on the subdivision grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverStyle {
    /// k x k regions centered on the cells of the subdivision (the
    /// reference layout: 25 regions for k = 5).
    CellCentered,
    /// (k+1) x (k+1) regions centered on the subdivision vertices
    /// (36 for k = 5).
    VertexCentered,
}

/// The cover: regions share a common inner width `h` (range/k per axis) and
/// outer width `d = h / (1 - overlap)`.
#[derive(Debug, Clone)]
pub struct Cover {
    pub regions: Vec<Region>,
    pub inner_width: [f64; 2],
    pub outer_width: [f64; 2],
}

impl Cover {
    /// Region indices containing the point (closed membership).
    pub fn regions_of(&self, point: [f64; 2]) -> Vec<usize> {
        self.regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.contains(point))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Builds the cover over the lens bounding box.
pub fn build_cover(
    lens: &Array2<f64>,
    k: usize,
    overlap: f64,
    style: CoverStyle,
) -> Result<Cover, MapperError> {
    if lens.nrows() == 0 {
        return Err(MapperError::TooFewPoints { points: 0, need: 1 });
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(MapperError::BadOverlap(overlap));
    }
    assert!(k >= 1, "cover needs at least one subdivision");
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for row in lens.rows() {
        for a in 0..2 {
            lo[a] = lo[a].min(row[a]);
            hi[a] = hi[a].max(row[a]);
        }
    }
    let mut inner = [0.0; 2];
    let mut outer = [0.0; 2];
    for a in 0..2 {
        inner[a] = (hi[a] - lo[a]) / k as f64;
        outer[a] = inner[a] / (1.0 - overlap);
    }
    let centers = |a: usize| -> Vec<f64> {
        match style {
            CoverStyle::CellCentered => (0..k)
                .map(|i| lo[a] + (i as f64 + 0.5) * inner[a])
                .collect(),
            CoverStyle::VertexCentered => {
                (0..=k).map(|i| lo[a] + i as f64 * inner[a]).collect()
            }
        }
    };
    let (xs, ys) = (centers(0), centers(1));
    let mut regions = Vec::with_capacity(xs.len() * ys.len());
    for &cx in &xs {
        for &cy in &ys {
            regions.push(Region {
                center: [cx, cy],
                half_width: [outer[0] / 2.0, outer[1] / 2.0],
            });
        }
    }
    Ok(Cover {
        regions,
        inner_width: inner,
        outer_width: outer,
    })
}
