//! Synthetic origin-destination data from a known SDEM, and Monte Carlo
//! recovery studies built on it.
//!
//! Every replication draws from its own ChaCha8 stream: the generator is
//! seeded with the study seed and replication `r` selects stream `r`, so a
//! study is reproducible regardless of how replications are scheduled.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{
    build_design_from_response, lag_name, Covariate, CovariateTable, FlowMatrix, ModelSpec, ResponseTransform,
    StackedDesign, Transform, INTERCEPT,
};
use crate::error::{Error, Result};
use crate::estimate::{fit_ols, fit_sdem, lr_test, SdemOptions};
use crate::weights::{Centroids, IsolatedPolicy, SpatialWeights};

/// Name of the generator recorded in study output.
pub const RNG_NAME: &str = "ChaCha8Rng(seed, stream = replication)";

const MAX_CENTROID_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateLaw {
    /// Standard normal, entered as is.
    Normal,
    /// Uniform on (0, 1), entered as is.
    Uniform,
    /// exp of a standard normal, declared with a log transform.
    Lognormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpCovariate {
    pub name: String,
    pub law: CovariateLaw,
    pub beta: f64,
    /// Coefficient of the `W_D` lag; must be zero for origin covariates.
    #[serde(default)]
    pub theta: f64,
}

/// Log distance between generated origin and destination points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEffect {
    pub name: String,
    pub beta: f64,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub m: usize,
    pub intercept: f64,
    #[serde(default)]
    pub origin: Vec<DgpCovariate>,
    #[serde(default)]
    pub destination: Vec<DgpCovariate>,
    #[serde(default)]
    pub distance: Option<DistanceEffect>,
    pub lambda: f64,
    pub sigma: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff_km: f64,
    /// Side of the square in which destination centroids are placed.
    #[serde(default = "default_extent")]
    pub extent_km: f64,
    pub seed: u64,
}

fn default_cutoff() -> f64 {
    crate::weights::DEFAULT_CUTOFF_KM
}

fn default_extent() -> f64 {
    500.0
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n: 40,
            m: 10,
            intercept: 2.0,
            origin: vec![DgpCovariate {
                name: "GDP_O".into(),
                law: CovariateLaw::Lognormal,
                beta: 0.6,
                theta: 0.0,
            }],
            destination: vec![
                DgpCovariate {
                    name: "GDP_D".into(),
                    law: CovariateLaw::Lognormal,
                    beta: 0.8,
                    theta: 0.4,
                },
                DgpCovariate {
                    name: "Amenity_D".into(),
                    law: CovariateLaw::Normal,
                    beta: 0.5,
                    theta: -0.3,
                },
            ],
            distance: Some(DistanceEffect {
                name: "Distance".into(),
                beta: -1.0,
                theta: 0.5,
            }),
            lambda: 0.5,
            sigma: 1.0,
            cutoff_km: default_cutoff(),
            extent_km: default_extent(),
            seed: 20_190_101,
        }
    }
}

impl DgpConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DgpConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Regressor count of the generated design (intercept, covariates, lags).
    pub fn n_regressors(&self) -> usize {
        1 + self.origin.len() + 2 * self.destination.len() + if self.distance.is_some() { 2 } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lambda > -1.0 && self.lambda < 1.0) {
            return bad(format!("lambda must lie in (-1, 1), got {}", self.lambda));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if self.n < 2 || self.m < 1 {
            return bad(format!("need n >= 2 and m >= 1, got n={} m={}", self.n, self.m));
        }
        if self.n * self.m < self.n_regressors() + 2 {
            return bad(format!(
                "n*m = {} is too small for {} regressors",
                self.n * self.m,
                self.n_regressors()
            ));
        }
        if !(self.cutoff_km > 0.0) || !(self.extent_km > 0.0) {
            return bad("cutoff_km and extent_km must be positive".into());
        }
        if let Some(c) = self.origin.iter().find(|c| c.theta != 0.0) {
            return bad(format!("origin covariate `{}` cannot have a lag coefficient", c.name));
        }
        let mut names = std::collections::HashSet::new();
        let all = self
            .origin
            .iter()
            .chain(&self.destination)
            .map(|c| c.name.as_str())
            .chain(self.distance.as_ref().map(|d| d.name.as_str()));
        for name in all {
            if !names.insert(name) {
                return bad(format!("duplicate covariate name `{name}`"));
            }
        }
        Ok(())
    }

    /// True coefficients, in the column order of the generated design.
    pub fn truth(&self) -> Vec<(String, f64)> {
        let mut t = vec![(INTERCEPT.to_string(), self.intercept)];
        t.extend(self.origin.iter().map(|c| (c.name.clone(), c.beta)));
        t.extend(self.destination.iter().map(|c| (c.name.clone(), c.beta)));
        if let Some(d) = &self.distance {
            t.push((d.name.clone(), d.beta));
        }
        t.extend(self.destination.iter().map(|c| (lag_name(&c.name), c.theta)));
        if let Some(d) = &self.distance {
            t.push((lag_name(&d.name), d.theta));
        }
        t
    }
}

/// One generated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub design: StackedDesign,
    pub tables: Vec<CovariateTable>,
    pub weights: SpatialWeights,
    pub centroids: Centroids,
    pub origin_coords: Vec<[f64; 2]>,
    /// True coefficients in design column order.
    pub truth: Vec<(String, f64)>,
    pub lambda: f64,
    pub sigma: f64,
    /// The disturbance `u = (I − λW_D)⁻¹ε`.
    pub disturbance: DVector<f64>,
    pub innovations: DVector<f64>,
}

impl SyntheticInstance {
    /// Response on the log scale.
    pub fn response(&self) -> &DVector<f64> {
        &self.design.response
    }

    /// Flow counts `exp(nv)` as an `n × m` matrix.
    pub fn flows(&self) -> Result<FlowMatrix> {
        let (n, m) = (self.design.n, self.design.m);
        let values = DMatrix::from_iterator(n, m, self.design.response.iter().map(|v| v.exp()));
        FlowMatrix::new(values, self.design.dest_ids.clone(), self.design.origin_ids.clone())
    }

    pub fn truth_vector(&self) -> Vec<f64> {
        self.truth.iter().map(|(_, v)| *v).collect()
    }
}

fn draw_law(rng: &mut ChaCha8Rng, law: CovariateLaw) -> f64 {
    match law {
        CovariateLaw::Normal => StandardNormal.sample(rng),
        CovariateLaw::Uniform => rng.random::<f64>(),
        CovariateLaw::Lognormal => {
            let z: f64 = StandardNormal.sample(rng);
            z.exp()
        }
    }
}

fn law_transform(law: CovariateLaw) -> Transform {
    match law {
        CovariateLaw::Lognormal => Transform::Log,
        _ => Transform::Identity,
    }
}

/// Solves `(I_n − λW) u_j = ε_j` for each origin block `j`.
pub fn solve_error_process(w: &DMatrix<f64>, lambda: f64, eps: &DVector<f64>, m: usize) -> Result<DVector<f64>> {
    let n = w.nrows();
    if eps.len() != n * m {
        return Err(Error::DimensionMismatch {
            what: "innovations".into(),
            expected: (n * m).to_string(),
            found: eps.len().to_string(),
        });
    }
    let a = DMatrix::identity(n, n) - w * lambda;
    let lu = a.lu();
    let blocks = DMatrix::from_column_slice(n, m, eps.as_slice());
    let u = lu
        .solve(&blocks)
        .ok_or_else(|| Error::InvalidInput(format!("I - {lambda} W is singular")))?;
    Ok(DVector::from_column_slice(u.as_slice()))
}

/// Generates the instance drawn from stream 0.
pub fn gen_instance(cfg: &DgpConfig) -> Result<SyntheticInstance> {
    gen_instance_stream(cfg, 0)
}

/// Generates the instance drawn from the given RNG stream.
pub fn gen_instance_stream(cfg: &DgpConfig, stream: u64) -> Result<SyntheticInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let (n, m) = (cfg.n, cfg.m);
    let dest_ids: Vec<String> = (0..n).map(|i| format!("D{:03}", i + 1)).collect();
    let origin_ids: Vec<String> = (0..m).map(|j| format!("O{:03}", j + 1)).collect();

    let mut placed = None;
    for _ in 0..MAX_CENTROID_DRAWS {
        let coords: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random::<f64>() * cfg.extent_km, rng.random::<f64>() * cfg.extent_km])
            .collect();
        let c = Centroids::new(dest_ids.clone(), coords)?;
        match SpatialWeights::from_centroids(&c, cfg.cutoff_km, IsolatedPolicy::Error) {
            Ok(w) => {
                placed = Some((c, w));
                break;
            }
            Err(Error::IsolatedUnits(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let (centroids, weights) = placed.ok_or_else(|| {
        Error::IsolatedUnits(vec![format!(
            "isolated destinations persisted after {MAX_CENTROID_DRAWS} centroid draws"
        )])
    })?;

    // origins share the destinations' square
    let origin_coords: Vec<[f64; 2]> = (0..m)
        .map(|_| [rng.random::<f64>() * cfg.extent_km, rng.random::<f64>() * cfg.extent_km])
        .collect();

    let mut tables = Vec::new();
    if !cfg.origin.is_empty() {
        let cols = cfg
            .origin
            .iter()
            .map(|c| Covariate::vector(&c.name, law_transform(c.law), (0..m).map(|_| draw_law(&mut rng, c.law)).collect()))
            .collect();
        tables.push(CovariateTable::origin(origin_ids.clone(), cols)?);
    }
    if !cfg.destination.is_empty() {
        let cols = cfg
            .destination
            .iter()
            .map(|c| Covariate::vector(&c.name, law_transform(c.law), (0..n).map(|_| draw_law(&mut rng, c.law)).collect()))
            .collect();
        tables.push(CovariateTable::destination(dest_ids.clone(), cols)?);
    }
    if let Some(d) = &cfg.distance {
        let p = centroids.coords();
        let dist = DMatrix::from_fn(n, m, |i, j| {
            let (dx, dy) = (p[i][0] - origin_coords[j][0], p[i][1] - origin_coords[j][1]);
            dx.hypot(dy).max(1.0)
        });
        tables.push(CovariateTable::od(
            dest_ids.clone(),
            origin_ids.clone(),
            vec![Covariate::matrix(&d.name, Transform::Log, dist)],
        )?);
    }

    let innovations = DVector::from_fn(n * m, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        cfg.sigma * z
    });
    let disturbance = solve_error_process(weights.standardized(), cfg.lambda, &innovations, m)?;

    let mut design = build_design_from_response(
        DVector::zeros(n * m),
        ResponseTransform::Given,
        &dest_ids,
        &origin_ids,
        &tables,
        &weights,
        &ModelSpec::default(),
    )?;
    let truth_map = cfg.truth();
    let mut truth = Vec::with_capacity(design.labels.len());
    for label in &design.labels {
        let v = truth_map
            .iter()
            .find(|(name, _)| *name == label.name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Config(format!("no true value for column `{}`", label.name)))?;
        truth.push((label.name.clone(), v));
    }
    let beta = DVector::from_iterator(truth.len(), truth.iter().map(|(_, v)| *v));
    design.response = &design.regressors * beta + &disturbance;

    Ok(SyntheticInstance {
        design,
        tables,
        weights,
        centroids,
        origin_coords,
        truth,
        lambda: cfg.lambda,
        sigma: cfg.sigma,
        disturbance,
        innovations,
    })
}

/// Recovery statistics for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub parameter: String,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Share of replications whose 95% normal CI covers the truth.
    pub coverage: f64,
    pub mean_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub replications: usize,
    pub failures: usize,
    /// More than 5% of replications failed to produce a fit.
    pub failed: bool,
    pub rng: String,
    pub seed: u64,
    /// Share of successful replications where the LR test rejects at 5%.
    pub lr_rejection_rate: f64,
    pub parameters: Vec<ParamSummary>,
}

impl McSummary {
    pub fn parameter(&self, name: &str) -> Option<&ParamSummary> {
        self.parameters.iter().find(|p| p.parameter == name)
    }

    /// One row per parameter.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["parameter", "truth", "mean_estimate", "bias", "rmse", "coverage", "mean_se"])?;
        for p in &self.parameters {
            wtr.write_record([
                p.parameter.clone(),
                p.truth.to_string(),
                p.mean_estimate.to_string(),
                p.bias.to_string(),
                p.rmse.to_string(),
                p.coverage.to_string(),
                p.mean_se.to_string(),
            ])?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

struct Replication {
    estimates: Vec<f64>,
    std_errors: Vec<f64>,
    lr_p_value: f64,
}

fn replicate(cfg: &DgpConfig, r: u64) -> Result<Replication> {
    let inst = gen_instance_stream(cfg, r)?;
    let sdem = fit_sdem(&inst.design, &inst.weights, &SdemOptions::default())?;
    let ols = fit_ols(&inst.design)?;
    let lr = lr_test(&ols, &sdem)?;
    let mut estimates = sdem.coefficients.clone();
    estimates.push(sdem.lambda.unwrap_or(f64::NAN));
    let mut std_errors = sdem.std_errors.clone();
    std_errors.push(sdem.lambda_se.unwrap_or(f64::NAN));
    Ok(Replication {
        estimates,
        std_errors,
        lr_p_value: lr.p_value,
    })
}

/// Runs `replications` independent fits. `threads = None` uses the global
/// rayon pool; results do not depend on the thread count.
pub fn mc_study(cfg: &DgpConfig, replications: usize, threads: Option<usize>) -> Result<McSummary> {
    if replications < 10 {
        return Err(Error::InvalidInput(format!(
            "a study needs at least 10 replications, got {replications}"
        )));
    }
    cfg.validate()?;
    let run = || -> Vec<Result<Replication>> {
        (0..replications as u64)
            .into_par_iter()
            .map(|r| replicate(cfg, r))
            .collect()
    };
    let outcomes = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run),
        None => run(),
    };

    let mut names = cfg.truth();
    names.push(("lambda".into(), cfg.lambda));
    let ok: Vec<&Replication> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    for (r, o) in outcomes.iter().enumerate() {
        if let Err(e) = o {
            log::debug!("replication {r} failed: {e}");
        }
    }
    let failures = replications - ok.len();
    let count = ok.len() as f64;
    let parameters = names
        .iter()
        .enumerate()
        .map(|(k, (name, truth))| {
            let mut sum = 0.0;
            let mut sq = 0.0;
            let mut covered = 0usize;
            let mut se_sum = 0.0;
            for rep in &ok {
                let (est, se) = (rep.estimates[k], rep.std_errors[k]);
                sum += est;
                sq += (est - truth).powi(2);
                se_sum += se;
                if (est - truth).abs() <= 1.959_963_984_540_054 * se {
                    covered += 1;
                }
            }
            let mean = sum / count;
            ParamSummary {
                parameter: name.clone(),
                truth: *truth,
                mean_estimate: mean,
                bias: mean - truth,
                rmse: (sq / count).sqrt(),
                coverage: covered as f64 / count,
                mean_se: se_sum / count,
            }
        })
        .collect();
    let rejections = ok.iter().filter(|r| r.lr_p_value < 0.05).count();
    Ok(McSummary {
        replications,
        failures,
        failed: failures as f64 > 0.05 * replications as f64,
        rng: RNG_NAME.into(),
        seed: cfg.seed,
        lr_rejection_rate: rejections as f64 / count,
        parameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DgpConfig {
        DgpConfig {
            n: 8,
            m: 3,
            extent_km: 200.0,
            ..DgpConfig::default()
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = gen_instance(&small()).unwrap();
        let b = gen_instance(&small()).unwrap();
        assert_eq!(a.design.response, b.design.response);
        assert_eq!(a.centroids, b.centroids);
        let c = gen_instance_stream(&small(), 1).unwrap();
        assert_ne!(a.design.response, c.design.response);
    }

    #[test]
    fn lambda_zero_means_u_equals_eps() {
        let cfg = DgpConfig { lambda: 0.0, ..small() };
        let inst = gen_instance(&cfg).unwrap();
        assert_eq!(inst.disturbance, inst.innovations);
    }

    #[test]
    fn truth_follows_design_labels() {
        let inst = gen_instance(&small()).unwrap();
        let names: Vec<&str> = inst.truth.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, inst.design.column_names().iter().map(|s| s.as_str()).collect::<Vec<_>>());
        assert_eq!(names[0], INTERCEPT);
        assert!(names.contains(&"W_D Distance"));
    }

    #[test]
    fn config_validation() {
        assert!(DgpConfig { lambda: 1.0, ..small() }.validate().is_err());
        assert!(DgpConfig { sigma: -1.0, ..small() }.validate().is_err());
        assert!(DgpConfig { n: 2, m: 2, ..small() }.validate().is_err());
        let mut cfg = small();
        cfg.origin[0].theta = 0.2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = DgpConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(DgpConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn too_few_replications() {
        assert!(mc_study(&small(), 5, Some(1)).is_err());
    }
}
