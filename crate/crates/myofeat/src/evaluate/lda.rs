//! Linear discriminant analysis with a regularized pooled covariance.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::{Array2, ArrayView1, ArrayView2};

use super::EvalError;

/// Relative ridge added to the pooled covariance diagonal: `ridge * trace/d`.
/// Keeps the model defined when single low-dimensional features are
/// rank-deficient on small runs.
pub const LDA_RIDGE: f64 = 1e-6;

/// Shared-covariance Gaussian linear classifier.
///
/// The discriminant of class `k` is `w_k . x + b_k` with
/// `w_k = Sigma^-1 mu_k` and `b_k = -mu_k . w_k / 2 + ln pi_k`; the
/// regularized pooled covariance is symmetric positive-definite by
/// construction (Cholesky succeeds or fitting errors out).
#[derive(Debug, Clone)]
pub struct LdaModel {
    /// Per-class means, `classes x d`.
    pub means: Array2<f64>,
    /// Class priors from training frequencies.
    pub priors: Vec<f64>,
    weights: Array2<f64>,
    biases: Vec<f64>,
}

impl LdaModel {
    pub fn classes(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// Linear discriminant scores of one sample.
    pub fn scores(&self, x: ArrayView1<f64>) -> Result<Vec<f64>, EvalError> {
        if x.len() != self.dim() {
            return Err(EvalError::DimensionMismatch {
                got: x.len(),
                want: self.dim(),
            });
        }
        Ok((0..self.classes())
            .map(|k| self.weights.row(k).dot(&x) + self.biases[k])
            .collect())
    }

    /// Argmax class; ties break toward the lower class id.
    pub fn predict_one(&self, x: ArrayView1<f64>) -> Result<usize, EvalError> {
        let scores = self.scores(x)?;
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        Ok(best)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>, EvalError> {
        x.rows()
            .into_iter()
            .map(|row| self.predict_one(row))
            .collect()
    }
}

/// Fits the model on `x` (n x d) with labels `y` in `0..=max(y)`.
///
/// Every class up to the largest label must appear at least twice so the
/// within-class scatter has a defined contribution from each.
pub fn lda_fit(x: ArrayView2<f64>, y: &[usize]) -> Result<LdaModel, EvalError> {
    assert_eq!(x.nrows(), y.len(), "one label per sample");
    let n = x.nrows();
    let d = x.ncols();
    let classes = y.iter().copied().max().map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(EvalError::TooFewClasses { got: classes });
    }
    let mut counts = vec![0usize; classes];
    for &label in y {
        counts[label] += 1;
    }
    for (class, &got) in counts.iter().enumerate() {
        if got < 2 {
            return Err(EvalError::TooFewSamples { class, got });
        }
    }

    let mut means = Array2::<f64>::zeros((classes, d));
    for (row, &label) in x.rows().into_iter().zip(y) {
        let mut m = means.row_mut(label);
        m += &row;
    }
    for (k, &count) in counts.iter().enumerate() {
        let mut m = means.row_mut(k);
        m /= count as f64;
    }

    // Pooled within-class covariance via the centered Gram accumulation,
    // normalized by the pooled degrees of freedom n - classes.
    let mut centered = x.to_owned();
    for (mut row, &label) in centered.rows_mut().into_iter().zip(y) {
        row -= &means.row(label);
    }
    let mut cov = Array2::<f64>::zeros((d, d));
    ndarray::linalg::general_mat_mul(
        1.0 / (n - classes) as f64,
        &centered.t(),
        &centered,
        0.0,
        &mut cov,
    );
    let trace: f64 = (0..d).map(|i| cov[(i, i)]).sum();
    let scale = trace / d as f64;
    let ridge = if scale > 0.0 { LDA_RIDGE * scale } else { LDA_RIDGE };
    for i in 0..d {
        cov[(i, i)] += ridge;
    }

    let sigma = DMatrix::from_fn(d, d, |i, j| cov[(i, j)]);
    let chol = Cholesky::new(sigma).ok_or(EvalError::SingularCovariance)?;
    let mut weights = Array2::<f64>::zeros((classes, d));
    let mut biases = Vec::with_capacity(classes);
    let priors: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    for k in 0..classes {
        let mu = DVector::from_fn(d, |i, _| means[(k, i)]);
        let w = chol.solve(&mu);
        for i in 0..d {
            weights[(k, i)] = w[i];
        }
        biases.push(-0.5 * mu.dot(&w) + priors[k].ln());
    }
    Ok(LdaModel {
        means,
        priors,
        weights,
        biases,
    })
}

/// Counts of true class (rows) against predicted class (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Array2<usize>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: Array2::zeros((classes, classes)),
        }
    }

    pub fn from_pairs(truth: &[usize], predicted: &[usize], classes: usize) -> Self {
        assert_eq!(truth.len(), predicted.len());
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.counts[(t, p)] += 1;
        }
        m
    }

    pub fn total(&self) -> usize {
        self.counts.sum()
    }

    /// Fraction of correct predictions: the diagonal over the total.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let correct: usize = (0..self.counts.nrows()).map(|i| self.counts[(i, i)]).sum();
        correct as f64 / total as f64
    }

    /// Row-normalized view; rows with no samples stay zero, every other row
    /// sums to one.
    pub fn normalized(&self) -> Array2<f64> {
        let (r, c) = self.counts.dim();
        let mut out = Array2::zeros((r, c));
        for i in 0..r {
            let row_sum: usize = self.counts.row(i).sum();
            if row_sum == 0 {
                continue;
            }
            for j in 0..c {
                out[(i, j)] = self.counts[(i, j)] as f64 / row_sum as f64;
            }
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), EvalError> {
        let io_err = |source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        let mut emit = || -> std::io::Result<()> {
            let c = self.counts.ncols();
            let header: Vec<String> = (0..c).map(|j| format!("pred_{j}")).collect();
            writeln!(file, "true,{}", header.join(","))?;
            for (i, row) in self.counts.rows().into_iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(file, "{i},{}", cells.join(","))?;
            }
            Ok(())
        };
        emit().map_err(io_err)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), EvalError> {
        let rows: Vec<Vec<usize>> = self
            .counts
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        let body = serde_json::json!({
            "counts": rows,
            "accuracy": self.accuracy(),
        });
        let mut text = serde_json::to_string_pretty(&body).expect("counts serialize");
        text.push('\n');
        std::fs::write(path, text).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
