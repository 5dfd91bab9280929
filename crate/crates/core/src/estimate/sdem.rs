use nalgebra::{Cholesky, DMatrix, DVector};

use super::inference::aic;
use super::linalg::{least_squares, LeastSquares};
use super::ols::{gaussian_loglik, is_degenerate};
use super::optim::brent_maximize;
use super::{FitResult, ModelKind};
use crate::design::StackedDesign;
use crate::error::{Error, Result};
use crate::weights::SpatialWeights;

/// Distance kept from each end of the feasible `λ` interval.
pub const BOUNDARY_MARGIN: f64 = 1e-6;

fn spectrum_bounds(spectrum: &[f64]) -> (f64, f64) {
    let lo = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = spectrum.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (
        if lo < 0.0 { 1.0 / lo } else { f64::NEG_INFINITY },
        if hi > 0.0 { 1.0 / hi } else { f64::INFINITY },
    )
}

/// `ln|I_N − λ(I_m ⊗ W)| = m Σ ln(1 − λω_i)`.
pub fn log_jacobian(lambda: f64, spectrum: &[f64], m: usize) -> Result<f64> {
    let mut sum = 0.0;
    for &w in spectrum {
        let t = 1.0 - lambda * w;
        if !(t > 0.0) {
            let (lower, upper) = spectrum_bounds(spectrum);
            return Err(Error::LambdaInfeasible { lambda, lower, upper });
        }
        sum += t.ln();
    }
    Ok(m as f64 * sum)
}

pub(crate) struct ProfilePoint {
    pub loglik: f64,
    pub sigma2: f64,
    pub ls: LeastSquares,
}

/// Log-likelihood of the SDEM concentrated in `λ`, with the spatial lags of
/// the response and regressors computed once.
#[derive(Debug, Clone)]
pub struct ConcentratedProfile {
    y: DVector<f64>,
    wy: DVector<f64>,
    x: DMatrix<f64>,
    wx: DMatrix<f64>,
    spectrum: Vec<f64>,
    m: usize,
    names: Vec<String>,
}

impl ConcentratedProfile {
    pub fn new(design: &StackedDesign, weights: &SpatialWeights) -> Result<Self> {
        if weights.n() != design.n {
            return Err(Error::DimensionMismatch {
                what: "spatial weights".into(),
                expected: design.n.to_string(),
                found: weights.n().to_string(),
            });
        }
        weights.lambda_bounds()?;
        Ok(Self {
            wy: weights.lag(&design.response, design.m)?,
            wx: weights.lag_matrix(&design.regressors, design.m)?,
            y: design.response.clone(),
            x: design.regressors.clone(),
            spectrum: weights.spectrum().to_vec(),
            m: design.m,
            names: design.column_names(),
        })
    }

    /// Open interval `(1/ω_min, 1/ω_max)`.
    pub fn bounds(&self) -> (f64, f64) {
        spectrum_bounds(&self.spectrum)
    }

    /// Feasible interval shrunk by [`BOUNDARY_MARGIN`] at both ends.
    pub fn search_interval(&self) -> (f64, f64) {
        let (lo, hi) = self.bounds();
        (lo + BOUNDARY_MARGIN, hi - BOUNDARY_MARGIN)
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    /// `(I − λW_D)y` and `(I − λW_D)X`.
    pub fn filtered(&self, lambda: f64) -> (DVector<f64>, DMatrix<f64>) {
        (&self.y - &self.wy * lambda, &self.x - &self.wx * lambda)
    }

    pub(crate) fn solve(&self, lambda: f64) -> Result<ProfilePoint> {
        let jac = log_jacobian(lambda, &self.spectrum, self.m)?;
        let (ys, xs) = self.filtered(lambda);
        let ls = least_squares(&xs, &ys, &self.names)?;
        let sigma2 = ls.rss / self.n_obs() as f64;
        if is_degenerate(sigma2, &ys) {
            return Err(Error::DegenerateFit);
        }
        Ok(ProfilePoint {
            loglik: gaussian_loglik(self.n_obs(), sigma2) + jac,
            sigma2,
            ls,
        })
    }

    /// Profiled log-likelihood at `λ`.
    pub fn loglik(&self, lambda: f64) -> Result<f64> {
        Ok(self.solve(lambda)?.loglik)
    }

    /// Full Gaussian log-likelihood at `(β, λ, σ²)`.
    pub fn full_loglik(&self, beta: &[f64], lambda: f64, sigma2: f64) -> Result<f64> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidInput(format!("sigma2 must be positive, got {sigma2}")));
        }
        let jac = log_jacobian(lambda, &self.spectrum, self.m)?;
        let b = DVector::from_column_slice(beta);
        let e = (&self.y - &self.wy * lambda) - (&self.x * &b - &self.wx * &b * lambda);
        let n = self.n_obs() as f64;
        Ok(-0.5 * n * (2.0 * std::f64::consts::PI * sigma2).ln() - e.norm_squared() / (2.0 * sigma2) + jac)
    }
}

/// Concentrated log-likelihood of the SDEM at a single `λ`.
pub fn concentrated_loglik(lambda: f64, design: &StackedDesign, weights: &SpatialWeights) -> Result<f64> {
    ConcentratedProfile::new(design, weights)?.loglik(lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdemOptions {
    /// Hold `λ` at this value instead of estimating it.
    pub fixed_lambda: Option<f64>,
    /// Coarse grid used to bracket the global maximum before refinement.
    pub grid_points: usize,
    /// Absolute tolerance on `λ`.
    pub tol: f64,
    pub max_iter: usize,
    pub compute_se: bool,
}

impl Default for SdemOptions {
    fn default() -> Self {
        Self {
            fixed_lambda: None,
            grid_points: 64,
            tol: 1e-8,
            max_iter: 500,
            compute_se: true,
        }
    }
}

/// Maximum-likelihood fit of the SDEM.
pub fn fit_sdem(design: &StackedDesign, weights: &SpatialWeights, opts: &SdemOptions) -> Result<FitResult> {
    let profile = ConcentratedProfile::new(design, weights)?;
    let lambda = match opts.fixed_lambda {
        Some(l) => l,
        None => maximize_profile(&profile, opts)?,
    };
    let point = profile.solve(lambda)?;
    let k = design.n_regressors();
    let n_params = if opts.fixed_lambda.is_some() { k + 1 } else { k + 2 };
    let mut fit = FitResult {
        kind: ModelKind::Sdem,
        labels: design.labels.clone(),
        coefficients: point.ls.coefficients.iter().copied().collect(),
        std_errors: vec![f64::NAN; k],
        lambda: Some(lambda),
        lambda_se: None,
        lambda_fixed: opts.fixed_lambda.is_some(),
        sigma2: point.sigma2,
        sigma2_se: None,
        loglik: point.loglik,
        n_params,
        aic: aic(point.loglik, n_params),
        n_obs: design.n_obs(),
        n: design.n,
        m: design.m,
    };
    if opts.compute_se {
        let se = standard_errors(&fit, design, weights)?;
        fit.std_errors = se.coefficients;
        fit.lambda_se = se.lambda;
        fit.sigma2_se = Some(se.sigma2);
    }
    Ok(fit)
}

fn maximize_profile(profile: &ConcentratedProfile, opts: &SdemOptions) -> Result<f64> {
    let (a, b) = profile.search_interval();
    let g = opts.grid_points.max(3);
    let grid: Vec<f64> = (0..g).map(|i| a + (b - a) * i as f64 / (g - 1) as f64).collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &l) in grid.iter().enumerate() {
        let v = profile.loglik(l)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let lo = grid[best.0.saturating_sub(1)];
    let hi = grid[(best.0 + 1).min(g - 1)];
    let max = brent_maximize(|l| profile.loglik(l), lo, hi, opts.tol, opts.max_iter)?;
    if !max.converged {
        return Err(Error::NotConverged(format!(
            "lambda search did not converge after {} evaluations",
            max.evaluations
        )));
    }
    let lambda = if max.value >= best.1 { max.x } else { grid[best.0] };
    if lambda - a < BOUNDARY_MARGIN || b - lambda < BOUNDARY_MARGIN {
        return Err(Error::BoundarySolution(lambda));
    }
    Ok(lambda)
}

/// Central finite-difference Hessian with per-coordinate steps.
pub fn numerical_hessian<F>(mut f: F, x: &[f64], steps: &[f64]) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let p = x.len();
    let mut h = DMatrix::zeros(p, p);
    let mut pt = x.to_vec();
    let f0 = f(x)?;
    let mut eval = |pt: &mut Vec<f64>, moves: &[(usize, f64)]| -> Result<f64> {
        for &(i, d) in moves {
            pt[i] = x[i] + d;
        }
        let v = f(pt);
        for &(i, _) in moves {
            pt[i] = x[i];
        }
        v
    };
    for i in 0..p {
        let hi = steps[i];
        let fp = eval(&mut pt, &[(i, hi)])?;
        let fm = eval(&mut pt, &[(i, -hi)])?;
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let fpp = eval(&mut pt, &[(i, hi), (j, hj)])?;
            let fpm = eval(&mut pt, &[(i, hi), (j, -hj)])?;
            let fmp = eval(&mut pt, &[(i, -hi), (j, hj)])?;
            let fmm = eval(&mut pt, &[(i, -hi), (j, -hj)])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// Asymptotic covariance from the observed information of the full likelihood.
#[derive(Debug, Clone)]
pub struct StandardErrors {
    pub coefficients: Vec<f64>,
    pub lambda: Option<f64>,
    pub sigma2: f64,
    /// Covariance over `(β, λ, σ²)` (`λ` omitted when it was not estimated).
    pub covariance: DMatrix<f64>,
    pub hessian: DMatrix<f64>,
    /// `sqrt(diag(σ̂² (X*'X*)⁻¹))`, the closed-form coefficient block.
    pub closed_form: Vec<f64>,
    /// Largest relative gap between numerical and closed-form coefficient SEs.
    pub max_relative_gap: f64,
}

/// Standard errors by inverting the negative finite-difference Hessian of the
/// full log-likelihood in `(β, λ, σ²)`, with step `max(1e-5, 1e-5·|θ|)`.
pub fn standard_errors(fit: &FitResult, design: &StackedDesign, weights: &SpatialWeights) -> Result<StandardErrors> {
    let profile = ConcentratedProfile::new(design, weights)?;
    let k = fit.coefficients.len();
    let lambda = fit.lambda.unwrap_or(0.0);
    let free_lambda = fit.lambda.is_some() && !fit.lambda_fixed;
    let mut theta = fit.coefficients.clone();
    if free_lambda {
        theta.push(lambda);
    }
    theta.push(fit.sigma2);
    let steps: Vec<f64> = theta.iter().map(|v| (1e-5 * v.abs()).max(1e-5)).collect();
    let hessian = numerical_hessian(
        |t| {
            let l = if free_lambda { t[k] } else { lambda };
            profile.full_loglik(&t[..k], l, t[t.len() - 1])
        },
        &theta,
        &steps,
    )?;
    let info = -&hessian;
    let chol = Cholesky::new(info).ok_or(Error::NotPositiveDefinite)?;
    let covariance = chol.inverse();
    if covariance.diagonal().iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let se: Vec<f64> = covariance.diagonal().iter().map(|v| v.sqrt()).collect();

    let (ys, xs) = profile.filtered(lambda);
    let ls = least_squares(&xs, &ys, &design.column_names())?;
    let cf = ls.qr.unscaled_covariance() * fit.sigma2;
    let closed_form: Vec<f64> = (0..k).map(|j| cf[(j, j)].sqrt()).collect();
    let max_relative_gap = (0..k)
        .map(|j| ((se[j] - closed_form[j]) / closed_form[j]).abs())
        .fold(0.0, f64::max);
    if max_relative_gap > 0.05 {
        log::warn!("numerical and closed-form coefficient SEs differ by up to {:.1}%", 100.0 * max_relative_gap);
    }
    Ok(StandardErrors {
        coefficients: se[..k].to_vec(),
        lambda: free_lambda.then(|| se[k]),
        sigma2: se[se.len() - 1],
        covariance,
        hessian,
        closed_form,
        max_relative_gap,
    })
}
