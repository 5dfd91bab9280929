use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::{FitResult, ModelKind};
use crate::design::{lag_name, Block};
use crate::error::{Error, Result};

/// Akaike information criterion `2k − 2·loglik`.
pub fn aic(loglik: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

/// Significance stars: `***` p < 0.01, `**` p < 0.05, `*` p < 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Two-sided p-value of `estimate / se` under the standard normal.
pub fn coefficient_p_value(estimate: f64, se: f64) -> f64 {
    let z = estimate / se;
    if !z.is_finite() {
        return f64::NAN;
    }
    let normal = Normal::standard();
    2.0 * normal.cdf(-z.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
}

impl Coefficient {
    pub fn new(estimate: f64, std_error: f64) -> Self {
        Self {
            estimate,
            std_error,
            p_value: coefficient_p_value(estimate, std_error),
        }
    }

    pub fn stars(&self) -> &'static str {
        stars(self.p_value)
    }
}

/// Likelihood-ratio test of `λ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `2(ll_sdem − ll_linear)` against χ²₁. Differences below `1e-8·|ll|` are
/// optimizer noise and clamp to zero; anything more negative means the models
/// are not nested.
pub fn lr_test(linear: &FitResult, sdem: &FitResult) -> Result<LrTest> {
    if linear.n_obs != sdem.n_obs {
        return Err(Error::DimensionMismatch {
            what: "LR test observations".into(),
            expected: linear.n_obs.to_string(),
            found: sdem.n_obs.to_string(),
        });
    }
    let raw = 2.0 * (sdem.loglik - linear.loglik);
    let tol = 1e-8 * linear.loglik.abs().max(1.0);
    if raw < -tol {
        return Err(Error::NegativeLrStatistic(raw));
    }
    let statistic = raw.max(0.0);
    let chi2 = ChiSquared::new(1.0).expect("valid dof");
    Ok(LrTest {
        statistic,
        df: 1,
        p_value: chi2.sf(statistic),
    })
}

/// Direct (β) and spillover (θ) effect of one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub variable: String,
    pub block: Block,
    pub direct: Coefficient,
    /// Absent for origin covariates and unlagged columns.
    pub spillover: Option<Coefficient>,
    pub total: f64,
}

/// Splits each covariate's effect into its own coefficient and that of its
/// `W_D` lag.
pub fn effects_split(fit: &FitResult) -> Result<Vec<EffectRow>> {
    if fit.kind != ModelKind::Sdem {
        return Err(Error::InvalidInput("effects split requires an SDEM fit".into()));
    }
    let mut rows = Vec::new();
    for (k, label) in fit.labels.iter().enumerate() {
        if !matches!(label.block, Block::Origin | Block::Destination | Block::OdPair) {
            continue;
        }
        let direct = Coefficient::new(fit.coefficients[k], fit.std_errors[k]);
        let spillover = fit.coefficient(&lag_name(&label.variable));
        let total = direct.estimate + spillover.map_or(0.0, |s| s.estimate);
        rows.push(EffectRow {
            variable: label.variable.clone(),
            block: label.block,
            direct,
            spillover,
            total,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::ColumnLabel;

    fn label(name: &str, block: Block, variable: &str) -> ColumnLabel {
        ColumnLabel {
            name: name.into(),
            block,
            variable: variable.into(),
        }
    }

    fn fit(kind: ModelKind, loglik: f64, n_params: usize) -> FitResult {
        FitResult {
            kind,
            labels: vec![],
            coefficients: vec![],
            std_errors: vec![],
            lambda: None,
            lambda_se: None,
            lambda_fixed: false,
            sigma2: 1.0,
            sigma2_se: None,
            loglik,
            n_params,
            aic: aic(loglik, n_params),
            n_obs: 3424,
            n: 107,
            m: 32,
        }
    }

    #[test]
    fn aic_values() {
        assert!((aic(-4995.63, 23) - 10037.26).abs() < 1e-9);
        assert!((aic(-4567.91, 56) - 9247.82).abs() < 1e-9);
        assert_eq!(aic(0.0, 1), 2.0);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.0002), "***");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.049), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.1), "");
        assert_eq!(stars(f64::NAN), "");
    }

    #[test]
    fn identical_models_have_zero_lr() {
        let a = fit(ModelKind::Linear, -100.0, 3);
        let lr = lr_test(&a, &a).unwrap();
        assert_eq!(lr.statistic, 0.0);
        assert_eq!(lr.df, 1);
        assert!((lr.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lr_rejects_worse_spatial_fit() {
        let lin = fit(ModelKind::Linear, -100.0, 3);
        let sp = fit(ModelKind::Sdem, -101.0, 4);
        assert!(matches!(lr_test(&lin, &sp), Err(Error::NegativeLrStatistic(_))));
    }

    #[test]
    fn lr_p_value_matches_chi2_quantile() {
        // 3.841459 is the 95% quantile of chi2(1)
        let lin = fit(ModelKind::Linear, -100.0, 3);
        let sp = fit(ModelKind::Sdem, -100.0 + 3.841_458_820_694_124 / 2.0, 4);
        assert!((lr_test(&lin, &sp).unwrap().p_value - 0.05).abs() < 1e-9);
    }

    #[test]
    fn effects_pair_direct_and_spillover() {
        let mut f = fit(ModelKind::Sdem, -1.0, 6);
        f.labels = vec![
            label("(Intercept)", Block::Intercept, "(Intercept)"),
            label("GDP_O", Block::Origin, "GDP_O"),
            label("CSM_D", Block::Destination, "CSM_D"),
            label("W_D CSM_D", Block::LagDestination, "CSM_D"),
        ];
        f.coefficients = vec![1.0, 0.56, 0.26, 3.58];
        f.std_errors = vec![1.0, 0.15, 0.07, 0.32];
        let rows = effects_split(&f).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].spillover.is_none());
        let csm = &rows[1];
        assert_eq!(csm.direct.stars(), "***");
        assert_eq!(csm.spillover.unwrap().stars(), "***");
        assert!((csm.total - 3.84).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_have_no_stars() {
        let mut f = fit(ModelKind::Sdem, -1.0, 4);
        f.labels = vec![label("x", Block::Destination, "x"), label("W_D x", Block::LagDestination, "x")];
        f.coefficients = vec![0.0, 0.0];
        f.std_errors = vec![0.5, 0.5];
        let rows = effects_split(&f).unwrap();
        assert_eq!(rows[0].total, 0.0);
        assert_eq!(rows[0].direct.stars(), "");
        assert_eq!(rows[0].spillover.unwrap().stars(), "");
        assert!(effects_split(&fit(ModelKind::Linear, -1.0, 2)).is_err());
    }
}
