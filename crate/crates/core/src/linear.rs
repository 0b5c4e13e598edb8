//! Ridge-regularized one-vs-rest least squares.
//!
//! For each class `c` the weights solve `(G^T G + lambda D) w_c = G^T y_c`,
//! where `G` is the feature matrix with a constant column appended (the last
//! weight is the bias) and `y_c` is `+1` on class `c` and `-1` elsewhere.
//! The ridge term does not penalize the bias, so a very large `lambda`
//! degrades to the majority-class predictor. Features are centered to
//! eliminate the bias; with no more rows than columns the dual system
//! `(Xc Xc^T + lambda I) a = yc`, `w = Xc^T a` is solved instead.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::container::FeatureMatrix;
use crate::error::{Result, ScatterError};

/// Relative residual every solution must meet.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
const REFINEMENT_STEPS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// One row of weights per class.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub lambda: f64,
    /// Free-form description of the features the model was trained on.
    pub feature_spec: String,
}

impl LinearModel {
    pub fn class_count(&self) -> usize {
        self.bias.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Class scores `<x, w_c> + b_c`.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect()
    }
}

fn factor(m: DMatrix<f64>, lambda: f64) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| {
        if lambda == 0.0 {
            ScatterError::Numerical(
                "normal equations are singular (rank-deficient features); use a ridge lambda > 0".into(),
            )
        } else {
            ScatterError::Numerical(format!(
                "ridge system with lambda {lambda} is not positive definite"
            ))
        }
    })
}

/// Solves `m x = b` by Cholesky with iterative refinement until
/// `accept(x)` holds.
fn solve_refined(
    m: &DMatrix<f64>,
    b: &DMatrix<f64>,
    lambda: f64,
    accept: impl Fn(&DMatrix<f64>) -> bool,
) -> Result<DMatrix<f64>> {
    let chol = factor(m.clone(), lambda)?;
    let mut x = chol.solve(b);
    for _ in 0..REFINEMENT_STEPS {
        if accept(&x) {
            return Ok(x);
        }
        let r = b - m * &x;
        x += chol.solve(&r);
    }
    if accept(&x) {
        Ok(x)
    } else if lambda == 0.0 {
        Err(ScatterError::Numerical(
            "least-squares residual check failed: features are (nearly) rank-deficient; use a ridge lambda > 0"
                .into(),
        ))
    } else {
        Err(ScatterError::Numerical(format!(
            "ridge residual check failed for lambda {lambda}: system too ill-conditioned"
        )))
    }
}

/// The full system with the bias as last unknown: `G = [X 1]`, and the
/// ridge term skips the bias.
struct System {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    lambda: f64,
    gty: DMatrix<f64>,
}

impl System {
    /// Checks `||(G^T G + lambda D) w - G^T y|| <= tol ||G^T y||` per class,
    /// using matrix-vector products only.
    fn accepts(&self, w: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
        let n = self.x.nrows();
        let pred = &self.x * w + DMatrix::from_fn(n, b.ncols(), |_, c| b[(0, c)]);
        let top = self.x.transpose() * &pred + w * self.lambda;
        let bottom = DMatrix::from_fn(1, b.ncols(), |_, c| pred.column(c).sum());
        let d = self.x.ncols();
        (0..w.ncols()).all(|c| {
            let mut r2 = (top.column(c) - self.gty.rows(0, d).column(c)).norm_squared();
            r2 += (bottom[(0, c)] - self.gty[(d, c)]).powi(2);
            let r = r2.sqrt();
            r == 0.0 || r <= RESIDUAL_TOLERANCE * self.gty.column(c).norm()
        })
    }
}

/// Fits the one-vs-rest ridge model. `labels[i] < class_count`.
pub fn train_linear(
    features: &FeatureMatrix,
    labels: &[usize],
    class_count: usize,
    lambda: f64,
) -> Result<LinearModel> {
    let n = features.rows();
    if n == 0 || features.cols() == 0 {
        return Err(ScatterError::invalid(
            "training needs at least one row and one feature",
        ));
    }
    if labels.len() != n {
        return Err(ScatterError::Consistency(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(ScatterError::invalid(format!(
            "ridge lambda must be finite and >= 0, got {lambda}"
        )));
    }
    if class_count < 2 {
        return Err(ScatterError::invalid("one-vs-rest needs at least two classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(ScatterError::Consistency(format!(
            "label {bad} >= class count {class_count}"
        )));
    }
    let d = features.cols();
    let x = DMatrix::from_row_slice(n, d, features.data());
    let y = DMatrix::from_fn(n, class_count, |i, c| if labels[i] == c { 1.0 } else { -1.0 });
    let mut gty = DMatrix::zeros(d + 1, class_count);
    gty.rows_mut(0, d).copy_from(&(x.transpose() * &y));
    for c in 0..class_count {
        gty[(d, c)] = y.column(c).sum();
    }
    let sys = System { x, y, lambda, gty };

    // Centering removes the (unpenalized) bias from the system.
    let x_mean = sys.x.row_mean();
    let y_mean = sys.y.row_mean();
    let xc = DMatrix::from_fn(n, d, |i, j| sys.x[(i, j)] - x_mean[j]);
    let yc = DMatrix::from_fn(n, class_count, |i, c| sys.y[(i, c)] - y_mean[c]);
    let bias_of =
        |w: &DMatrix<f64>| DMatrix::from_fn(1, class_count, |_, c| y_mean[c] - (&x_mean * w.column(c))[0]);

    let w = if n <= d {
        let k = &xc * xc.transpose() + DMatrix::identity(n, n) * lambda;
        let alpha = solve_refined(&k, &yc, lambda, |a| {
            let w = xc.transpose() * a;
            sys.accepts(&w, &bias_of(&w))
        })?;
        xc.transpose() * alpha
    } else {
        let m = xc.transpose() * &xc + DMatrix::identity(d, d) * lambda;
        let rhs = xc.transpose() * &yc;
        solve_refined(&m, &rhs, lambda, |w| sys.accepts(w, &bias_of(w)))?
    };
    let b = bias_of(&w);

    let weights = (0..class_count)
        .map(|c| w.column(c).iter().copied().collect())
        .collect();
    let bias = (0..class_count).map(|c| b[(0, c)]).collect();
    Ok(LinearModel {
        weights,
        bias,
        lambda,
        feature_spec: String::new(),
    })
}

/// Argmax of the class scores; ties go to the smallest class index.
pub fn predict(model: &LinearModel, features: &FeatureMatrix) -> Result<Vec<usize>> {
    if features.rows() > 0 && features.cols() != model.feature_dim() {
        return Err(ScatterError::invalid(format!(
            "model expects {} features, got {}",
            model.feature_dim(),
            features.cols()
        )));
    }
    Ok((0..features.rows())
        .map(|i| argmax(&model.scores(features.row(i))))
        .collect())
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate() {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows misclassified.
pub fn evaluate(model: &LinearModel, features: &FeatureMatrix, labels: &[usize]) -> Result<f64> {
    if features.rows() == 0 {
        return Err(ScatterError::invalid("cannot evaluate on an empty set"));
    }
    if labels.len() != features.rows() {
        return Err(ScatterError::Consistency(format!(
            "{} labels for {} rows",
            labels.len(),
            features.rows()
        )));
    }
    let pred = predict(model, features)?;
    Ok(error_rate(&pred, labels))
}

pub fn error_rate(predicted: &[usize], labels: &[usize]) -> f64 {
    let wrong = predicted.iter().zip(labels).filter(|(p, l)| p != l).count();
    wrong as f64 / labels.len() as f64
}

/// Most frequent label (smallest on ties).
pub fn majority_class(labels: &[usize], class_count: usize) -> usize {
    let mut counts = vec![0usize; class_count];
    for &l in labels {
        counts[l] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Error of always predicting the majority class of `train` on `labels`.
pub fn majority_error(train: &[usize], labels: &[usize], class_count: usize) -> f64 {
    let m = majority_class(train, class_count);
    error_rate(&vec![m; labels.len()], labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub lambda: f64,
    /// Validation error per candidate, in grid order.
    pub validation_errors: Vec<(f64, f64)>,
}

/// Picks the candidate with the lowest validation error (the earliest on
/// ties).
pub fn tune_lambda(
    train: &FeatureMatrix,
    train_labels: &[usize],
    validation: &FeatureMatrix,
    validation_labels: &[usize],
    class_count: usize,
    grid: &[f64],
) -> Result<Tuning> {
    if grid.is_empty() {
        return Err(ScatterError::invalid("empty lambda grid"));
    }
    let validation_errors = grid
        .iter()
        .map(|&l| {
            let m = train_linear(train, train_labels, class_count, l)?;
            Ok((l, evaluate(&m, validation, validation_labels)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = validation_errors.iter().fold(
        validation_errors[0],
        |best, &e| if e.1 < best.1 { e } else { best },
    );
    Ok(Tuning {
        lambda: best.0,
        validation_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect(), rows[0].len()).unwrap()
    }

    #[test]
    fn symmetric_pair() {
        let f = matrix(&[&[-1.0], &[1.0]]);
        let m = train_linear(&f, &[0, 1], 2, 0.0).unwrap();
        assert!((m.weights[1][0] - 1.0).abs() < 1e-12);
        assert!(m.bias[1].abs() < 1e-12);
        assert!((m.weights[0][0] + 1.0).abs() < 1e-12);
        assert_eq!(predict(&m, &f).unwrap(), vec![0, 1]);
        assert_eq!(evaluate(&m, &f, &[0, 1]).unwrap(), 0.0);
        assert_eq!(evaluate(&m, &f, &[1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn huge_ridge_falls_back_to_majority() {
        let f = matrix(&[&[0.3, 1.0], &[-2.0, 0.5], &[1.0, 1.0], &[0.0, -1.0], &[4.0, 2.0]]);
        let labels = [2, 2, 0, 1, 2];
        let m = train_linear(&f, &labels, 3, 1e12).unwrap();
        assert!(m.weights.iter().flatten().all(|w| w.abs() < 1e-9));
        assert_eq!(predict(&m, &f).unwrap(), vec![2; 5]);
    }

    #[test]
    fn zero_weight_model_uses_bias() {
        let m = LinearModel {
            weights: vec![vec![0.0; 3]; 2],
            bias: vec![0.1, 0.5],
            lambda: 0.0,
            feature_spec: String::new(),
        };
        let f = matrix(&[&[1.0, 2.0, 3.0], &[-5.0, 0.0, 9.0]]);
        assert_eq!(predict(&m, &f).unwrap(), vec![1, 1]);
        assert!(predict(&m, &matrix(&[&[1.0]])).is_err());
        let tied = LinearModel {
            bias: vec![0.5, 0.5],
            ..m
        };
        assert_eq!(predict(&tied, &f).unwrap(), vec![0, 0]);
    }

    fn blobs(seed: u64, n: usize) -> (FeatureMatrix, Vec<usize>) {
        let mut r = rng(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let center = if c == 0 { -4.0 } else { 4.0 };
            let a: f64 = r.sample(StandardNormal);
            let b: f64 = r.sample(StandardNormal);
            rows.push(vec![center + a, center + b]);
            labels.push(c);
        }
        (FeatureMatrix::from_rows(rows, 2).unwrap(), labels)
    }

    #[test]
    fn separated_blobs() {
        let (f, l) = blobs(1, 100);
        let m = train_linear(&f, &l, 2, 1e-6).unwrap();
        assert_eq!(evaluate(&m, &f, &l).unwrap(), 0.0);
        let (t, tl) = blobs(2, 100);
        assert_eq!(evaluate(&m, &t, &tl).unwrap(), 0.0);
        assert!(evaluate(&m, &f, &l).unwrap() <= majority_error(&l, &l, 2));
    }

    #[test]
    fn dual_and_primal_agree() {
        // 6 rows, 9 columns: the dual path
        let mut r = rng(3);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..9).map(|_| r.sample(StandardNormal)).collect())
            .collect();
        let f = FeatureMatrix::from_rows(rows.clone(), 9).unwrap();
        let labels = [0, 1, 2, 0, 1, 2];
        let dual = train_linear(&f, &labels, 3, 0.1).unwrap();
        // reference: LU solve of the primal normal equations
        let g = DMatrix::from_fn(6, 10, |i, j| if j < 9 { rows[i][j] } else { 1.0 });
        let y = DMatrix::from_fn(6, 3, |i, c| if labels[i] == c { 1.0 } else { -1.0 });
        let mut m = g.transpose() * &g + DMatrix::identity(10, 10) * 0.1;
        m[(9, 9)] -= 0.1;
        let w = m.lu().solve(&(g.transpose() * y)).unwrap();
        for c in 0..3 {
            for j in 0..9 {
                assert!((dual.weights[c][j] - w[(j, c)]).abs() < 1e-9);
            }
            assert!((dual.bias[c] - w[(9, c)]).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_deficient_without_ridge_is_numerical() {
        let f = matrix(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0], &[4.0, 8.0]]);
        let err = train_linear(&f, &[0, 1, 0, 1], 2, 0.0).unwrap_err();
        match err {
            ScatterError::Numerical(msg) => assert!(msg.contains("lambda > 0")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(train_linear(&f, &[0, 1, 0, 1], 2, 1e-3).is_ok());
    }

    #[test]
    fn tuning_picks_the_best_candidate() {
        let (f, l) = blobs(4, 60);
        let (v, vl) = blobs(5, 40);
        let t = tune_lambda(&f, &l, &v, &vl, 2, &[1e-4, 1e-2, 1.0]).unwrap();
        assert_eq!(t.validation_errors.len(), 3);
        let min = t
            .validation_errors
            .iter()
            .map(|e| e.1)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(
            t.validation_errors.iter().find(|e| e.1 == min).unwrap().0,
            t.lambda
        );
    }

    #[test]
    fn bad_arguments() {
        let f = matrix(&[&[1.0]]);
        assert!(train_linear(&f, &[0], 2, -1.0).is_err());
        assert!(train_linear(&f, &[3], 2, 1.0).is_err());
        assert!(train_linear(&f, &[0, 1], 2, 1.0).is_err());
        assert!(evaluate(
            &train_linear(&f, &[0], 2, 1.0).unwrap(),
            &FeatureMatrix::from_rows(vec![], 1).unwrap(),
            &[]
        )
        .is_err());
        assert_eq!(majority_class(&[1, 2, 2, 1], 3), 1);
    }
}
