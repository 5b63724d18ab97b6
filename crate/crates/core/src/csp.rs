//! Common spatial patterns for one (band, window) cell of the filter bank.
//!
//! Filters solve `C0 w = lambda (C0 + C1) w` by whitening the composite
//! covariance and diagonalising the whitened class-0 covariance. The `m`
//! largest and `m` smallest eigenvalues give the retained filters.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whitening directions whose composite eigenvalue falls below this
/// fraction of the largest one are discarded.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspModel {
    /// channels x 2m; columns are spatial filters, class-0 filters first.
    #[serde(with = "crate::matrix_serde")]
    pub filters: DMatrix<f64>,
    /// Generalised eigenvalues of the retained filters, descending.
    pub eigenvalues: Vec<f64>,
    pub band: Option<(f64, f64)>,
    pub window: Option<(f64, f64)>,
}

impl CspModel {
    pub fn n_channels(&self) -> usize {
        self.filters.nrows()
    }

    pub fn n_filters(&self) -> usize {
        self.filters.ncols()
    }

    pub fn with_cell(mut self, band: (f64, f64), window: (f64, f64)) -> Self {
        self.band = Some(band);
        self.window = Some(window);
        self
    }
}

/// `X'X` of the channel-centred segment (unnormalised).
pub fn centered_scatter(segment: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = segment.clone();
    for mut col in x.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let s = x.tr_mul(&x);
    // exact symmetry
    (&s + s.transpose()) * 0.5
}

/// Trace-normalised spatial covariance of a time x channel segment, after
/// removing each channel's mean.
pub fn trial_covariance(segment: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if segment.nrows() < 2 || segment.ncols() < 1 {
        return Err(Error::Degenerate(format!(
            "covariance needs >= 2 samples and >= 1 channel, got {}x{}",
            segment.nrows(),
            segment.ncols()
        )));
    }
    covariance_from_scatter(&centered_scatter(segment))
}

pub fn covariance_from_scatter(scatter: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let tr = scatter.trace();
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Degenerate("segment has zero variance".into()));
    }
    Ok(scatter / tr)
}

fn mean_cov(covs: &[DMatrix<f64>], n: usize) -> Result<DMatrix<f64>> {
    let mut acc = DMatrix::zeros(n, n);
    for c in covs {
        if c.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{}, expected {n}x{n}",
                c.nrows(),
                c.ncols()
            )));
        }
        acc += c;
    }
    Ok(acc / covs.len() as f64)
}

/// Eigendecomposition with eigenvalues sorted descending (stable on ties).
fn sorted_eigen(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Trains CSP filters from per-trial covariances of the two classes,
/// keeping `m` filters per class.
pub fn train_csp(class0: &[DMatrix<f64>], class1: &[DMatrix<f64>], m: usize) -> Result<CspModel> {
    if class0.is_empty() || class1.is_empty() {
        return Err(Error::Degenerate("both classes need at least one covariance".into()));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("patterns per class must be >= 1".into()));
    }
    let n = class0[0].nrows();
    let c0 = mean_cov(class0, n)?;
    let c1 = mean_cov(class1, n)?;
    if 2 * m > n {
        return Err(Error::DimensionMismatch(format!(
            "{} filters requested from {n} channels",
            2 * m
        )));
    }

    let (d, u) = sorted_eigen(&c0 + &c1);
    if !(d[0].is_finite() && d[0] > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    // near-null composite directions are dropped before whitening
    let keep: Vec<usize> = (0..n).filter(|&i| d[i] >= RANK_TOLERANCE * d[0]).collect();
    if keep.len() < 2 * m {
        return Err(Error::NotPositiveDefinite);
    }
    let whitening = DMatrix::from_columns(
        &keep
            .iter()
            .map(|&i| u.column(i) / d[i].sqrt())
            .collect::<Vec<_>>(),
    );

    let s0 = whitening.tr_mul(&c0) * &whitening;
    let s0 = (&s0 + s0.transpose()) * 0.5;
    let (lambda, v) = sorted_eigen(s0);
    let r = lambda.len();

    let picks: Vec<usize> = (0..m).chain(r - m..r).collect();
    let mut cols = Vec::with_capacity(2 * m);
    for &j in &picks {
        let mut w = &whitening * v.column(j);
        let mut lead = 0;
        for i in 1..w.len() {
            if w[i].abs() > w[lead].abs() {
                lead = i;
            }
        }
        if w[lead] < 0.0 {
            w.neg_mut();
        }
        cols.push(w);
    }

    Ok(CspModel {
        filters: DMatrix::from_columns(&cols),
        eigenvalues: picks.iter().map(|&j| lambda[j]).collect(),
        band: None,
        window: None,
    })
}

/// Log of each filter's share of the total projected variance.
pub fn csp_features(model: &CspModel, segment: &DMatrix<f64>) -> Result<Vec<f64>> {
    if segment.ncols() != model.n_channels() {
        return Err(Error::DimensionMismatch(format!(
            "segment has {} channels, model expects {}",
            segment.ncols(),
            model.n_channels()
        )));
    }
    if segment.nrows() < 2 {
        return Err(Error::Degenerate("segment needs >= 2 samples".into()));
    }
    features_from_scatter(model, &centered_scatter(segment))
}

/// [`csp_features`] from a precomputed [`centered_scatter`].
pub fn features_from_scatter(model: &CspModel, scatter: &DMatrix<f64>) -> Result<Vec<f64>> {
    if scatter.nrows() != model.n_channels() {
        return Err(Error::DimensionMismatch(format!(
            "scatter is {}x{}, model expects {} channels",
            scatter.nrows(),
            scatter.ncols(),
            model.n_channels()
        )));
    }
    let vars: Vec<f64> = model
        .filters
        .column_iter()
        .map(|w| w.dot(&(scatter * w)))
        .collect();
    let total: f64 = vars.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Degenerate("zero projected variance".into()));
    }
    let feats: Vec<f64> = vars.iter().map(|v| (v / total).ln()).collect();
    if feats.iter().any(|f| !f.is_finite()) {
        return Err(Error::Degenerate("a spatial filter has zero projected variance".into()));
    }
    Ok(feats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn covariance_single_channel_is_one() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(trial_covariance(&x).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn covariance_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(512, 4, |_, _| rng.random::<f64>() - 0.5);
        let c = trial_covariance(&x).unwrap();
        assert!((c.trace() - 1.0).abs() < 1e-12);
        assert!((&c - c.transpose()).amax() < 1e-12);
        let eig = SymmetricEigen::new(c);
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-12));
    }

    #[test]
    fn covariance_uncorrelated_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(20000, 2, |_, _| rng.random::<f64>() - 0.5);
        let c = trial_covariance(&x).unwrap();
        assert!((c[(0, 0)] - 0.5).abs() < 0.02);
        assert!(c[(0, 1)].abs() < 0.02);
    }

    #[test]
    fn covariance_rejects_flat_segment() {
        let x = DMatrix::from_element(10, 3, 2.0);
        assert!(matches!(trial_covariance(&x), Err(Error::Degenerate(_))));
        assert!(trial_covariance(&DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn diagonal_case() {
        let c0 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.8, 0.2]));
        let c1 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.8]));
        let model = train_csp(&[c0], &[c1], 1).unwrap();
        assert!((model.eigenvalues[0] - 0.8).abs() < 1e-12);
        assert!((model.eigenvalues[1] - 0.2).abs() < 1e-12);
        let w = &model.filters;
        assert!(w[(1, 0)].abs() < 1e-12 && w[(0, 0)] > 0.0);
        assert!(w[(0, 1)].abs() < 1e-12 && w[(1, 1)] > 0.0);
    }

    #[test]
    fn identical_classes_give_half() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
        let model = train_csp(std::slice::from_ref(&a), std::slice::from_ref(&a), 1).unwrap();
        for l in model.eigenvalues {
            assert!((l - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let a = DMatrix::<f64>::identity(3, 3);
        let b = DMatrix::<f64>::identity(2, 2);
        assert!(train_csp(&[], std::slice::from_ref(&a), 1).is_err());
        assert!(matches!(train_csp(std::slice::from_ref(&a), &[b], 1), Err(Error::DimensionMismatch(_))));
        assert!(train_csp(std::slice::from_ref(&a), std::slice::from_ref(&a), 2).is_err());
        let z = DMatrix::<f64>::zeros(3, 3);
        assert!(matches!(train_csp(std::slice::from_ref(&z), std::slice::from_ref(&z), 1), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn rank_deficient_composite_is_guarded() {
        // rank-2 composite in 3 channels
        let c0 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.7, 0.3, 0.0]));
        let c1 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.4, 0.6, 0.0]));
        let model = train_csp(&[c0], &[c1], 1).unwrap();
        assert!(model.filters.iter().all(|v| v.is_finite()));
        assert_eq!(model.filters[(2, 0)], 0.0);
    }

    #[test]
    fn feature_arithmetic() {
        let model = CspModel {
            filters: DMatrix::identity(2, 2),
            eigenvalues: vec![0.5, 0.5],
            band: None,
            window: None,
        };
        let seg = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0]);
        let f = csp_features(&model, &seg).unwrap();
        assert!((f[0] - 0.5f64.ln()).abs() < 1e-12 && (f[1] - 0.5f64.ln()).abs() < 1e-12);

        let seg = DMatrix::from_row_slice(4, 2, &[3.0, 1.0, -3.0, -1.0, 3.0, -1.0, -3.0, 1.0]);
        let f = csp_features(&model, &seg).unwrap();
        assert!((f[0] - 0.9f64.ln()).abs() < 1e-12);
        assert!((f[1] - 0.1f64.ln()).abs() < 1e-12);

        assert!(csp_features(&model, &DMatrix::zeros(4, 3)).is_err());
        assert!(matches!(
            csp_features(&model, &DMatrix::from_element(4, 2, 1.0)),
            Err(Error::Degenerate(_))
        ));
    }
}
