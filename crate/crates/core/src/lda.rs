//! Two-class Fisher LDA with analytic shrinkage of the pooled covariance.
//!
//! With `X` the `N x d` matrix of class-centred features,
//!
//! ```text
//! S      = X'X / N
//! nu     = trace(S) / d
//! delta  = ||S - nu I||_F^2 / d
//! beta   = (1 / (N^2 d)) * sum_k ||x_k x_k' - S||_F^2
//! gamma  = min(beta, delta) / delta          (0 when delta = 0)
//! Sigma  = (1 - gamma) S + gamma nu I
//! ```
//!
//! `beta` is evaluated through the identity
//! `sum_k ||x_k x_k' - S||_F^2 = sum_ij (X.^2)'(X.^2)_ij - N ||S||_F^2`,
//! which avoids forming the per-sample outer products.
//!
//! Posteriors assume equal priors: `p(walk | x) = logistic(w'x + b)` with
//! `w = Sigma^-1 (mu_walk - mu_rest)` and `b = -(mu_walk + mu_rest)'w / 2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataio::Class;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shrinkage {
    /// Analytic estimate.
    Auto,
    /// Fixed intensity in `[0, 1]`.
    Fixed(f64),
}

/// Returns the shrunk covariance of already-centred samples together with
/// the shrinkage intensity used.
pub fn shrunk_covariance(samples: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    shrunk_covariance_with(samples, Shrinkage::Auto)
}

pub fn shrunk_covariance_with(samples: &DMatrix<f64>, shrinkage: Shrinkage) -> Result<(DMatrix<f64>, f64)> {
    let (n, d) = samples.shape();
    if n < 2 || d < 1 {
        return Err(Error::Degenerate(format!(
            "shrinkage needs >= 2 samples and >= 1 feature, got {n}x{d}"
        )));
    }
    let nf = n as f64;
    let df = d as f64;
    let s = samples.tr_mul(samples) / nf;
    let s = (&s + s.transpose()) * 0.5;
    let nu = s.trace() / df;

    let gamma = match shrinkage {
        Shrinkage::Fixed(g) => {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidConfig(format!("shrinkage {g} outside [0, 1]")));
            }
            g
        }
        Shrinkage::Auto => {
            let s_fro2 = s.norm_squared();
            // ||S - nu I||^2 = ||S||^2 - 2 nu tr(S) + d nu^2
            let delta = (s_fro2 - 2.0 * nu * s.trace() + df * nu * nu) / df;
            let sq = samples.map(|v| v * v);
            let sum_fourth = (sq.tr_mul(&sq)).sum();
            let beta = (sum_fourth / nf - s_fro2) / (nf * df);
            let beta = beta.min(delta);
            if delta <= 0.0 {
                0.0
            } else {
                (beta / delta).clamp(0.0, 1.0)
            }
        }
    };

    let mut sigma = s * (1.0 - gamma);
    for i in 0..d {
        sigma[(i, i)] += gamma * nu;
    }
    Ok((sigma, gamma))
}

/// Trained discriminant. `weights` and `bias` fold the shrunk precision
/// matrix into the single direction needed for two-class posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub mean0: Vec<f64>,
    pub mean1: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub shrinkage_gamma: f64,
    pub feature_dim: usize,
}

/// `[N x 2]` class-belonging probabilities; column 0 is "walk", column 1
/// is "rest".
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbabilityMatrix {
    rows: Vec<[f64; 2]>,
}

impl ProbabilityMatrix {
    /// Validates that each row is a distribution over the two classes.
    pub fn from_rows(rows: Vec<[f64; 2]>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            let ok = r.iter().all(|p| (0.0..=1.0).contains(p)) && (r[0] + r[1] - 1.0).abs() <= 1e-12;
            if !ok {
                return Err(Error::Degenerate(format!("row {i} {r:?} is not a distribution")));
            }
        }
        Ok(ProbabilityMatrix { rows })
    }

    /// Row `(p, 1 - p)` for each class-0 probability.
    pub fn from_class0(p0: impl IntoIterator<Item = f64>) -> Self {
        ProbabilityMatrix {
            rows: p0.into_iter().map(|p| [p, 1.0 - p]).collect(),
        }
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, class: Class) -> Vec<f64> {
        self.rows.iter().map(|r| r[class.index()]).collect()
    }

    /// Element-wise arithmetic mean of two matrices of equal shape.
    pub fn mean_with(&self, other: &ProbabilityMatrix) -> Result<ProbabilityMatrix> {
        if self.n_rows() != other.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "probability matrices have {} and {} rows",
                self.n_rows(),
                other.n_rows()
            )));
        }
        Ok(ProbabilityMatrix {
            rows: self
                .rows
                .iter()
                .zip(&other.rows)
                .map(|(a, b)| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0])
                .collect(),
        })
    }
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

pub fn train_lda(features: &DMatrix<f64>, labels: &[Class]) -> Result<LdaModel> {
    train_lda_with(features, labels, Shrinkage::Auto)
}

pub fn train_lda_with(features: &DMatrix<f64>, labels: &[Class], shrinkage: Shrinkage) -> Result<LdaModel> {
    let (n, d) = features.shape();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} feature rows but {} labels",
            labels.len()
        )));
    }
    if n < 4 {
        return Err(Error::Degenerate(format!("LDA needs >= 4 samples, got {n}")));
    }
    if d == 0 {
        return Err(Error::Degenerate("LDA needs >= 1 feature".into()));
    }
    if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("feature entry {pos}")));
    }

    let class_mean = |class: Class| -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            return Err(Error::Degenerate(format!("no samples of class {class}")));
        }
        let mut m = DVector::zeros(d);
        for &i in &idx {
            m += features.row(i).transpose();
        }
        Ok(m / idx.len() as f64)
    };
    let mu0 = class_mean(Class::Walk)?;
    let mu1 = class_mean(Class::Rest)?;

    let mut centered = features.clone();
    for (i, mut row) in centered.row_iter_mut().enumerate() {
        let mu = if labels[i] == Class::Walk { &mu0 } else { &mu1 };
        row -= mu.transpose();
    }
    let (sigma, gamma) = shrunk_covariance_with(&centered, shrinkage)?;
    let diff = &mu0 - &mu1;
    let weights = sigma
        .cholesky()
        .ok_or(Error::Degenerate(
            "shrunk covariance is not positive definite".into(),
        ))?
        .solve(&diff);
    let bias = -0.5 * (&mu0 + &mu1).dot(&weights);

    Ok(LdaModel {
        mean0: mu0.iter().copied().collect(),
        mean1: mu1.iter().copied().collect(),
        weights: weights.iter().copied().collect(),
        bias,
        shrinkage_gamma: gamma,
        feature_dim: d,
    })
}

impl LdaModel {
    /// Discriminant score `w'x + b`; positive favours "walk".
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

pub fn predict_proba(model: &LdaModel, features: &DMatrix<f64>) -> Result<ProbabilityMatrix> {
    if features.nrows() > 0 && features.ncols() != model.feature_dim {
        return Err(Error::DimensionMismatch(format!(
            "features have {} columns, model expects {}",
            features.ncols(),
            model.feature_dim
        )));
    }
    let mut p0 = Vec::with_capacity(features.nrows());
    let mut x = vec![0.0; model.feature_dim];
    for (i, row) in features.row_iter().enumerate() {
        for (dst, v) in x.iter_mut().zip(row.iter()) {
            *dst = *v;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature row {i}")));
        }
        p0.push(logistic(model.score(&x)));
    }
    Ok(ProbabilityMatrix::from_class0(p0))
}
