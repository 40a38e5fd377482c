use nalgebra::{DMatrix, DVector};

use super::{check_finite, EstimatorError, Result};

/// Ordinary least squares, `argmin_β Σ (y_t − x_t'β)²`, via SVD.
pub fn ols_fit(xs: &DMatrix<f64>, ys: &DVector<f64>) -> Result<DVector<f64>> {
    let (t, p) = xs.shape();
    if p == 0 {
        return Err(EstimatorError::ZeroDimension);
    }
    if ys.len() != t {
        return Err(EstimatorError::DimensionMismatch {
            expected: t,
            actual: ys.len(),
        });
    }
    if t < p {
        return Err(EstimatorError::InsufficientData {
            required: p,
            actual: t,
        });
    }
    check_finite(xs.as_slice(), "design matrix")?;
    check_finite(ys.as_slice(), "response")?;

    let svd = xs.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (t.max(p) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < p {
        return Err(EstimatorError::RankDeficient { rank, p });
    }
    svd.solve(ys, tol)
        .map_err(|_| EstimatorError::RankDeficient { rank, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_data() {
        let xs = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]);
        let ys = DVector::from_iterator(4, xs.row_iter().map(|r| 2.0 * r[0] - r[1]));
        let b = ols_fit(&xs, &ys).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12);
        assert!((b[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_of_single_predictor() {
        let xs = DMatrix::from_element(2, 1, 1.0);
        let ys = DVector::from_column_slice(&[1.0, 3.0]);
        assert!((ols_fit(&xs, &ys).unwrap()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_is_named() {
        let xs = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        let ys = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        let err = ols_fit(&xs, &ys).unwrap_err();
        assert_eq!(err, EstimatorError::RankDeficient { rank: 1, p: 2 });
        assert!(err.to_string().contains("rank 1"));
    }

    #[test]
    fn too_few_rows() {
        let xs = DMatrix::from_element(1, 2, 1.0);
        let ys = DVector::from_element(1, 1.0);
        assert!(matches!(ols_fit(&xs, &ys), Err(EstimatorError::InsufficientData { .. })));
    }
}
