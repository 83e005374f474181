use nalgebra::{DMatrix, DVector};

use crate::error::{shape_err, HkdError, Result};
use crate::numcore::Tensor;
use crate::trainer::PerceptualExtractor;

/// Diagonal regularization added to each covariance.
pub const COV_RIDGE: f64 = 1e-6;

/// Mean and unbiased covariance (plus ridge) of the rows of `x: [N, D]`.
pub fn gaussian_fit(x: &Tensor<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let [n, d] = match *x.shape() {
        [n, d] => [n, d],
        _ => return shape_err(format!("samples must be [N, D], got {:?}", x.shape())),
    };
    if n < 2 {
        return Err(HkdError::InvalidArgument(format!("need at least 2 samples, got {n}")));
    }
    if !x.is_finite() {
        return Err(HkdError::NonFinite("samples contain NaN or infinity".into()));
    }
    let m = DMatrix::from_row_slice(n, d, x.data());
    let mean = m.row_mean().transpose();
    let mut centered = m;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = centered.transpose() * &centered / (n - 1) as f64;
    for i in 0..d {
        cov[(i, i)] += COV_RIDGE;
    }
    Ok((mean, cov))
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussians `N(mu_a, cov_a)` and `N(mu_b, cov_b)`.
pub fn frechet_from_moments(mu_a: &DVector<f64>, cov_a: &DMatrix<f64>, mu_b: &DVector<f64>, cov_b: &DMatrix<f64>) -> f64 {
    // tr((A B)^{1/2}) = tr((A^{1/2} B A^{1/2})^{1/2}), the latter symmetric PSD
    let ra = psd_sqrt(cov_a);
    let inner = &ra * cov_b * &ra;
    let cross: f64 = psd_sqrt(&inner).trace();
    let d = (mu_a - mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
    d.max(0.0)
}

/// Fréchet distance between Gaussian fits of two sample sets `[Na, D]`, `[Nb, D]`.
pub fn frechet_gaussian(a: &Tensor<f64>, b: &Tensor<f64>) -> Result<f64> {
    let (mu_a, cov_a) = gaussian_fit(a)?;
    let (mu_b, cov_b) = gaussian_fit(b)?;
    if mu_a.len() != mu_b.len() {
        return shape_err(format!("feature dimensions differ: {} vs {}", mu_a.len(), mu_b.len()));
    }
    Ok(frechet_from_moments(&mu_a, &cov_a, &mu_b, &cov_b))
}

/// Flattened perceptual features `[N, D]` of images `[N, C, H, W]`.
pub fn embed(extractor: &PerceptualExtractor<f32>, images: &Tensor<f32>) -> Result<Tensor<f64>> {
    let n = images.dims4()?[0];
    let f = crate::trainer::map_chunks(images, |c| extractor.features(c))?;
    Tensor::new(vec![n, f.row_len()], f.data().iter().map(|&v| v as f64).collect())
}

/// FD-lite: Fréchet distance between Gaussian fits of perceptual features.
pub fn fd_lite(extractor: &PerceptualExtractor<f32>, a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64> {
    frechet_gaussian(&embed(extractor, a)?, &embed(extractor, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize, d: usize, k: usize) -> Tensor<f64> {
        Tensor::from_fn(&[n, d], |i| (((i * 7919 + k * 104729) % 1000) as f64 / 1000.0 - 0.5) * (1.0 + (i % d) as f64))
    }

    #[test]
    fn identity_is_near_zero() {
        let a = samples(50, 3, 0);
        assert!(frechet_gaussian(&a, &a).unwrap() < 1e-6);
    }

    #[test]
    fn translation_adds_squared_shift() {
        let a = samples(60, 3, 1);
        let c = [0.3, -1.0, 2.0];
        let b = Tensor::from_fn(&[60, 3], |i| a.data()[i] + c[i % 3]);
        let base = frechet_gaussian(&a, &a).unwrap();
        let shifted = frechet_gaussian(&a, &b).unwrap();
        assert!((shifted - base - 5.09).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_finite_and_bad_shape() {
        let mut a = samples(10, 2, 0);
        a.data_mut()[3] = f64::NAN;
        assert!(frechet_gaussian(&a, &samples(10, 2, 0)).is_err());
        assert!(frechet_gaussian(&samples(10, 2, 0), &samples(10, 3, 0)).is_err());
    }
}
