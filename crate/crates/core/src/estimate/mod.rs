//! Estimation of the log-linear gravity model and its spatial Durbin error
//! extension.
//!
//! The non-spatial benchmark is ordinary least squares with the Gaussian ML
//! variance `e'e/N`. The SDEM
//!
//! ```text
//! y = Xβ + u,   u = λ W_D u + ε,   ε ~ N(0, σ² I_N),   W_D = I_m ⊗ W
//! ```
//!
//! is fitted by maximizing the likelihood concentrated in `λ`: for fixed `λ`
//! the filtered regression `(I − λW_D)y` on `(I − λW_D)X` gives `β(λ)` and
//! `σ²(λ)` in closed form, leaving a one-dimensional search. The Jacobian
//! `ln|I_N − λW_D| = m Σ ln(1 − λω_i)` comes from the spectrum of `W`.

mod inference;
pub(crate) mod linalg;
mod ols;
pub mod optim;
mod sdem;

use serde::{Deserialize, Serialize};

use crate::design::{Block, ColumnLabel};

pub use inference::{
    aic, coefficient_p_value, effects_split, lr_test, stars, Coefficient, EffectRow, LrTest,
};
pub use ols::{fit_ols, ols_coefficients};
pub use sdem::{
    concentrated_loglik, fit_sdem, log_jacobian, numerical_hessian, standard_errors, ConcentratedProfile,
    SdemOptions, StandardErrors, BOUNDARY_MARGIN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Sdem,
}

/// One fitted model: the machine form of a results-table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: ModelKind,
    pub labels: Vec<ColumnLabel>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub lambda: Option<f64>,
    pub lambda_se: Option<f64>,
    /// True when `λ` was held at a given value rather than estimated.
    #[serde(default)]
    pub lambda_fixed: bool,
    pub sigma2: f64,
    pub sigma2_se: Option<f64>,
    pub loglik: f64,
    /// Parameter count used by AIC: regressors plus `σ²`, plus `λ` when estimated.
    pub n_params: usize,
    pub aic: f64,
    pub n_obs: usize,
    pub n: usize,
    pub m: usize,
}

impl FitResult {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    /// Estimate, standard error and two-sided normal p-value of a coefficient.
    pub fn coefficient(&self, name: &str) -> Option<Coefficient> {
        self.index_of(name)
            .map(|k| Coefficient::new(self.coefficients[k], self.std_errors[k]))
    }

    pub fn lambda_coefficient(&self) -> Option<Coefficient> {
        match (self.lambda, self.lambda_se) {
            (Some(l), Some(se)) => Some(Coefficient::new(l, se)),
            (Some(l), None) => Some(Coefficient::new(l, f64::NAN)),
            _ => None,
        }
    }

    pub fn coefficients_in(&self, block: Block) -> impl Iterator<Item = (&ColumnLabel, f64)> {
        self.labels
            .iter()
            .zip(&self.coefficients)
            .filter(move |(l, _)| l.block == block)
            .map(|(l, &c)| (l, c))
    }
}
