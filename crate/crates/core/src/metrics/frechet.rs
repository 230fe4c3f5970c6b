//! Fréchet distance between Gaussians fitted to feature sets.
//!
//! `d² = |μ₁ − μ₂|² + Tr(Σ₁ + Σ₂ − 2 (Σ₁ Σ₂)^½)`. The trace of the matrix
//! square root is taken from the eigenvalues of the symmetric matrix
//! `√Σ₁ Σ₂ √Σ₁`, which is similar to `Σ₁ Σ₂` and so has the same spectrum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::MetricError;

/// Eigenvalues down to `-PSD_TOLERANCE` count as zero.
pub const PSD_TOLERANCE: f64 = 1e-8;
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSummary {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    count: usize,
}

impl GaussianSummary {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, count: usize) -> Result<Self, MetricError> {
        if count < 2 {
            return Err(MetricError::TooFewSamples(count));
        }
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(MetricError::Dimension(format!(
                "mean has {d} entries, covariance is {:?}",
                covariance.shape()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        let asymmetry = (&covariance - covariance.transpose()).amax();
        if asymmetry > SYMMETRY_TOLERANCE {
            return Err(MetricError::NotSymmetric(asymmetry));
        }
        let covariance = symmetrize(&covariance);
        if d > 0 {
            let min = SymmetricEigen::new(covariance.clone()).eigenvalues.min();
            if min < -PSD_TOLERANCE {
                return Err(MetricError::NotPsd(min));
            }
        }
        Ok(Self {
            mean,
            covariance,
            count,
        })
    }

    /// Univariate summary, handy for checks against closed forms.
    pub fn univariate(mean: f64, variance: f64, count: usize) -> Result<Self, MetricError> {
        Self::new(
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, variance),
            count,
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Sample mean and unbiased (N − 1) covariance of the rows.
pub fn fit_gaussian(features: &[Vec<f64>]) -> Result<GaussianSummary, MetricError> {
    let n = features.len();
    if n < 2 {
        return Err(MetricError::TooFewSamples(n));
    }
    let d = features[0].len();
    for (row, f) in features.iter().enumerate() {
        if f.len() != d {
            return Err(MetricError::RaggedFeatures {
                row,
                len: f.len(),
                expected: d,
            });
        }
    }
    let x = DMatrix::from_fn(n, d, |i, j| features[i][j]);
    let mean = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
    let centred = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / (n - 1) as f64;
    GaussianSummary::new(mean, symmetrize(&cov), n)
}

/// Eigen-decompose a symmetric matrix, clamping eigenvalues in
/// `[-PSD_TOLERANCE, 0)` to zero.
fn clamped_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, MetricError> {
    let mut eig = SymmetricEigen::new(m);
    for v in eig.eigenvalues.iter_mut() {
        if *v < -PSD_TOLERANCE {
            return Err(MetricError::NotPsd(*v));
        }
        *v = v.max(0.0);
    }
    Ok(eig)
}

fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricError> {
    let eig = clamped_eigen(m.clone())?;
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(symmetrize(&(&eig.eigenvectors * root * eig.eigenvectors.transpose())))
}

pub fn frechet_distance(g1: &GaussianSummary, g2: &GaussianSummary) -> Result<f64, MetricError> {
    if g1.dim() != g2.dim() {
        return Err(MetricError::Dimension(format!(
            "feature dimension {} vs {}",
            g1.dim(),
            g2.dim()
        )));
    }
    let diff = &g1.mean - &g2.mean;
    let s1 = sqrt_psd(&g1.covariance)?;
    let inner = symmetrize(&(&s1 * &g2.covariance * &s1));
    let trace_sqrt: f64 = clamped_eigen(inner)?.eigenvalues.iter().map(|v| v.sqrt()).sum();
    let d = diff.norm_squared() + g1.covariance.trace() + g2.covariance.trace() - 2.0 * trace_sqrt;
    Ok(d.max(0.0))
}

/// Fit both feature sets and compare.
pub fn fid(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, MetricError> {
    frechet_distance(&fit_gaussian(a)?, &fit_gaussian(b)?)
}
