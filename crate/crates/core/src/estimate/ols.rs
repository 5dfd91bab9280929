use nalgebra::DVector;

use super::inference::aic;
use super::linalg::least_squares;
use super::{FitResult, ModelKind};
use crate::design::StackedDesign;
use crate::error::{Error, Result};

/// Below this fraction of the mean squared response the residual variance is
/// treated as zero.
pub(crate) const DEGENERATE_REL: f64 = 1e-20;

pub(crate) fn gaussian_loglik(n_obs: usize, sigma2: f64) -> f64 {
    let n = n_obs as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0)
}

pub(crate) fn is_degenerate(sigma2: f64, y: &DVector<f64>) -> bool {
    let scale = y.norm_squared() / y.len() as f64;
    sigma2 <= DEGENERATE_REL * scale.max(f64::MIN_POSITIVE)
}

/// Least-squares coefficients only, without the variance checks of [`fit_ols`].
pub fn ols_coefficients(design: &StackedDesign) -> Result<DVector<f64>> {
    let ls = least_squares(&design.regressors, &design.response, &design.column_names())?;
    Ok(ls.coefficients)
}

/// Non-spatial benchmark: OLS with `σ² = e'e/N` and the Gaussian ML
/// log-likelihood. Parameter count is `K + 1`.
pub fn fit_ols(design: &StackedDesign) -> Result<FitResult> {
    let ls = least_squares(&design.regressors, &design.response, &design.column_names())?;
    let n_obs = design.n_obs();
    let sigma2 = ls.rss / n_obs as f64;
    if is_degenerate(sigma2, &design.response) {
        return Err(Error::DegenerateFit);
    }
    let loglik = gaussian_loglik(n_obs, sigma2);
    let cov = ls.qr.unscaled_covariance() * sigma2;
    let std_errors = (0..cov.nrows()).map(|k| cov[(k, k)].sqrt()).collect();
    let n_params = design.n_regressors() + 1;
    Ok(FitResult {
        kind: ModelKind::Linear,
        labels: design.labels.clone(),
        coefficients: ls.coefficients.iter().copied().collect(),
        std_errors,
        lambda: None,
        lambda_se: None,
        lambda_fixed: false,
        sigma2,
        // ML variance of σ̂² under normality
        sigma2_se: Some((2.0 * sigma2 * sigma2 / n_obs as f64).sqrt()),
        loglik,
        n_params,
        aic: aic(loglik, n_params),
        n_obs,
        n: design.n,
        m: design.m,
    })
}
