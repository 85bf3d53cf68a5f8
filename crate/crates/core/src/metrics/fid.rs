use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::MetricError;

/// Eigenvalues below `-NEG_EIG_TOL · max(1, |λ|max)` mark a matrix as not PSD;
/// anything between that and zero is rounding noise and clamped.
const NEG_EIG_TOL: f64 = 1e-6;
const EIG_MAX_ITER: usize = 100_000;

/// Mean, unbiased covariance and sample count of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fits a Gaussian to an `n × d` feature matrix (one sample per row).
pub fn fit_gaussian(features: &DMatrix<f64>) -> Result<GaussianStats, MetricError> {
    let (n, d) = features.shape();
    if n < 2 {
        return Err(MetricError::TooFewSamples { need: 2, got: n });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let mean = DVector::from_fn(d, |j, _| features.column(j).iter().sum::<f64>() / n as f64);
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v -= mean[j];
        }
    }
    let mut cov = centered.transpose() * &centered / (n - 1) as f64;
    symmetrize(&mut cov);
    Ok(GaussianStats { mean, cov, n })
}

/// [`fit_gaussian`] over row slices.
pub fn fit_gaussian_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<GaussianStats, MetricError> {
    let d = rows.first().map_or(0, |r| r.as_ref().len());
    if rows.iter().any(|r| r.as_ref().len() != d) {
        return Err(MetricError::DimMismatch(d, rows.iter().map(|r| r.as_ref().len()).find(|&l| l != d).unwrap()));
    }
    let m = DMatrix::from_fn(rows.len(), d, |i, j| rows[i].as_ref()[j]);
    fit_gaussian(&m)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn psd_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, MetricError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let mut eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIG_MAX_ITER).ok_or(MetricError::NoConvergence)?;
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for v in eig.eigenvalues.iter_mut() {
        if *v < -NEG_EIG_TOL * scale {
            return Err(MetricError::NotPsd(*v));
        }
        *v = v.max(0.0);
    }
    Ok(eig)
}

/// Principal square root of a symmetric PSD matrix.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricError> {
    let eig = psd_eigen(m)?;
    let root = eig.eigenvalues.map(f64::sqrt);
    let mut s = &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose();
    symmetrize(&mut s);
    Ok(s)
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa^½ Σb Σa^½)^½)`, clamped at zero.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64, MetricError> {
    if a.dim() != b.dim() || a.cov.shape() != b.cov.shape() {
        return Err(MetricError::DimMismatch(a.dim(), b.dim()));
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let root_a = sqrtm_psd(&a.cov)?;
    let inner = &root_a * &b.cov * &root_a;
    let cross = psd_eigen(&inner)?.eigenvalues.iter().map(|v| v.sqrt()).sum::<f64>();
    let d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}
