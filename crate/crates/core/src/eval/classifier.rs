use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SgrError};

pub const DEFAULT_L2: f64 = 1e-3;
const GRAD_TOL: f64 = 1e-6;
const MAX_STEPS: usize = 5000;

/// One-vs-rest logistic regression. Row `c` of `weights` holds the class-`c`
/// coefficients followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: DMatrix<f64>,
    pub l2: f64,
}

fn with_bias(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(x.ncols(), 1.0)
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^s)` without overflow.
fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// Mean binary logistic loss plus `l2/2 · ‖w‖²` (bias excluded) and its
/// gradient. `xb` carries a trailing bias column; `y` is 0/1.
pub fn logistic_loss_grad(w: &DVector<f64>, xb: &DMatrix<f64>, y: &[f64], l2: f64) -> (f64, DVector<f64>) {
    let n = xb.nrows() as f64;
    let scores = xb * w;
    let mut loss = 0.0;
    let mut resid = DVector::zeros(xb.nrows());
    for i in 0..xb.nrows() {
        let s = scores[i];
        loss += softplus(s) - y[i] * s;
        resid[i] = sigmoid(s) - y[i];
    }
    let mut grad = xb.tr_mul(&resid) / n;
    let d = w.len() - 1;
    let mut reg = 0.0;
    for j in 0..d {
        reg += w[j] * w[j];
        grad[j] += l2 * w[j];
    }
    (loss / n + 0.5 * l2 * reg, grad)
}

/// Trains one logistic model per class by full-batch gradient descent with
/// step `1/Lipschitz`, stopping at gradient norm 1e-6 or 5000 steps.
pub fn train_classifier(
    x: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
    l2: f64,
) -> Result<LinearClassifier> {
    if labels.len() != x.nrows() {
        return Err(SgrError::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            x.nrows()
        )));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(SgrError::InvalidParam(format!("l2 penalty {l2}")));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(SgrError::NonFinite("training vectors"));
    }
    let mut present = vec![false; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(SgrError::InvalidParam(format!("label {l} >= {num_classes}")));
        }
        present[l] = true;
    }
    if let Some(c) = present.iter().position(|p| !p) {
        return Err(SgrError::InvalidParam(format!("class {c} missing from training data")));
    }

    let xb = with_bias(x);
    let n = xb.nrows() as f64;
    let gram = xb.tr_mul(&xb);
    let top = SymmetricEigen::new(gram).eigenvalues.max().max(0.0);
    let lipschitz = 0.25 * top / n + l2;
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let dim = xb.ncols();
    let mut weights = DMatrix::zeros(num_classes, dim);
    for c in 0..num_classes {
        let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { 0.0 }).collect();
        let mut w = DVector::zeros(dim);
        for _ in 0..MAX_STEPS {
            let (_, g) = logistic_loss_grad(&w, &xb, &y, l2);
            if g.norm() <= GRAD_TOL {
                break;
            }
            w -= g * step;
        }
        weights.row_mut(c).copy_from(&w.transpose());
    }
    Ok(LinearClassifier { weights, l2 })
}

impl LinearClassifier {
    /// Predicted class per row: argmax of the class scores, lowest index on
    /// ties.
    pub fn classify(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        if x.ncols() + 1 != self.weights.ncols() {
            return Err(SgrError::Shape(format!(
                "classifier expects dim {}, got {}",
                self.weights.ncols() - 1,
                x.ncols()
            )));
        }
        let scores = with_bias(x) * self.weights.transpose();
        Ok(scores
            .row_iter()
            .map(|r| {
                let mut best = 0;
                for c in 1..r.len() {
                    if r[c] > r[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }
}
