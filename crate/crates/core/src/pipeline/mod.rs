//! End-to-end estimation runs: load CSV inputs, build the weights, fit the
//! linear model and the SDEM for every requested specification, and write
//! the results.

pub mod io;
pub mod report;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{
    build_design, CovariateTable, DummyBlock, FlowMatrix, LagSelection, ModelSpec, ResponseTransform, StackedDesign,
    ZeroFlowPolicy,
};
use crate::error::{Error, Result};
use crate::estimate::{effects_split, fit_ols, fit_sdem, lr_test, EffectRow, FitResult, LrTest, SdemOptions};
use crate::weights::{Centroids, IsolatedPolicy, SpatialWeights, DEFAULT_CUTOFF_KM};

pub use report::{format_cell, format_number, render_table, Table};

/// `lags = "all" | "none" | ["a", "b"]` in a model entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LagsEntry {
    Keyword(String),
    List(Vec<String>),
}

/// One `[[model]]` table of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<LagsEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dummies: Vec<DummyBlock>,
    #[serde(default = "default_true")]
    pub intercept: bool,
}

fn default_true() -> bool {
    true
}

impl ModelEntry {
    pub fn to_spec(&self) -> Result<ModelSpec> {
        let lags = match &self.lags {
            None => LagSelection::All,
            Some(LagsEntry::Keyword(k)) if k == "all" => LagSelection::All,
            Some(LagsEntry::Keyword(k)) if k == "none" => LagSelection::None,
            Some(LagsEntry::Keyword(k)) => {
                return Err(Error::Config(format!(
                    "model `{}`: lags must be \"all\", \"none\" or a list, got `{k}`",
                    self.name
                )))
            }
            Some(LagsEntry::List(v)) => LagSelection::Only(v.clone()),
        };
        Ok(ModelSpec {
            name: self.name.clone(),
            columns: self.columns.clone(),
            lags,
            dummies: self.dummies.clone(),
            intercept: self.intercept,
        })
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF_KM
}

/// Run configuration. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub flows: PathBuf,
    pub centroids: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub od: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_cutoff")]
    pub cutoff_km: f64,
    #[serde(default)]
    pub zero_flow: ZeroFlowPolicy,
    #[serde(default = "default_isolated")]
    pub isolated: String,
    /// Centroids are given as `id,lon,lat` and are projected to kilometres.
    #[serde(default)]
    pub lonlat: bool,
    #[serde(default, rename = "model")]
    pub models: Vec<ModelEntry>,
}

fn default_isolated() -> String {
    "warn".into()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file, resolving its paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.flows);
        fix(&mut self.centroids);
        fix(&mut self.output);
        for p in [&mut self.origin, &mut self.destination, &mut self.od].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn isolated_policy(&self) -> Result<IsolatedPolicy> {
        self.isolated.parse()
    }

    pub fn specs(&self) -> Result<Vec<ModelSpec>> {
        if self.models.is_empty() {
            return Err(Error::NoModels);
        }
        let mut names = HashSet::new();
        for m in &self.models {
            if !names.insert(m.name.as_str()) {
                return Err(Error::Config(format!("duplicate model name `{}`", m.name)));
            }
        }
        self.models.iter().map(ModelEntry::to_spec).collect()
    }
}

/// All inputs of a run, aligned on sorted ids.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub flows: FlowMatrix,
    pub tables: Vec<CovariateTable>,
    pub centroids: Centroids,
}

impl Datasets {
    pub fn summary(&self) -> String {
        format!(
            "{} destinations, {} origins, N = {}",
            self.flows.n(),
            self.flows.m(),
            self.flows.n() * self.flows.m()
        )
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} file `{}` does not exist", path.display())))
    }
}

/// Reads and cross-validates every input named by the config.
pub fn load_datasets(cfg: &RunConfig) -> Result<Datasets> {
    require_file(&cfg.flows, "flows")?;
    require_file(&cfg.centroids, "centroids")?;
    for (p, what) in [(&cfg.origin, "origin"), (&cfg.destination, "destination"), (&cfg.od, "od")] {
        if let Some(p) = p {
            require_file(p, what)?;
        }
    }
    let flows = io::read_flows(&cfg.flows)?;
    let centroids = io::read_centroids(&cfg.centroids, cfg.lonlat)?;
    io::check_same_ids("centroids vs flow destinations", flows.dest_ids(), centroids.ids())?;
    let centroids = centroids.reindexed(flows.dest_ids())?;

    let mut tables = Vec::new();
    if let Some(p) = &cfg.origin {
        let t = io::read_unit_covariates(p, true)?;
        io::check_same_ids("origin covariates vs flow origins", flows.origin_ids(), t.origin_ids())?;
        tables.push(t.aligned(&[], flows.origin_ids())?);
    }
    if let Some(p) = &cfg.destination {
        let t = io::read_unit_covariates(p, false)?;
        io::check_same_ids("destination covariates vs flow destinations", flows.dest_ids(), t.dest_ids())?;
        tables.push(t.aligned(flows.dest_ids(), &[])?);
    }
    if let Some(p) = &cfg.od {
        tables.push(io::read_od_covariates(p, flows.dest_ids(), flows.origin_ids())?);
    }
    let data = Datasets {
        flows,
        tables,
        centroids,
    };
    log::info!("loaded {}", data.summary());
    Ok(data)
}

/// Coefficient line of a model report. The p-value is rounded to 4 decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
}

fn round4(p: f64) -> f64 {
    (p * 1e4).round() / 1e4
}

/// Linear and spatial fits of one specification with their comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub response_transform: ResponseTransform,
    pub coefficients: Vec<CoefficientRow>,
    pub lambda: Option<CoefficientRow>,
    pub sigma2: f64,
    pub loglik: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub aic_linear: f64,
    pub aic_spatial: f64,
    pub lr: LrTest,
    pub effects: Vec<EffectRow>,
    pub linear: FitResult,
    pub spatial: FitResult,
}

impl ModelReport {
    pub fn new(
        name: impl Into<String>,
        response_transform: ResponseTransform,
        linear: FitResult,
        spatial: FitResult,
    ) -> Result<Self> {
        let lr = lr_test(&linear, &spatial)?;
        let coefficients = spatial
            .labels
            .iter()
            .map(|l| {
                let c = spatial.coefficient(&l.name).expect("label present");
                CoefficientRow {
                    name: l.name.clone(),
                    estimate: c.estimate,
                    std_error: c.std_error,
                    p_value: round4(c.p_value),
                }
            })
            .collect();
        let lambda = spatial.lambda_coefficient().map(|c| CoefficientRow {
            name: "lambda".into(),
            estimate: c.estimate,
            std_error: c.std_error,
            p_value: round4(c.p_value),
        });
        Ok(Self {
            name: name.into(),
            response_transform,
            coefficients,
            lambda,
            sigma2: spatial.sigma2,
            loglik: spatial.loglik,
            n_obs: spatial.n_obs,
            n_params: spatial.n_params,
            aic_linear: linear.aic,
            aic_spatial: spatial.aic,
            effects: effects_split(&spatial)?,
            lr,
            linear,
            spatial,
        })
    }
}

/// Fits both models for one design.
pub fn fit_model(name: &str, design: &StackedDesign, weights: &SpatialWeights) -> Result<ModelReport> {
    let linear = fit_ols(design)?;
    let spatial = fit_sdem(design, weights, &SdemOptions::default())?;
    ModelReport::new(name, design.response_transform, linear, spatial)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<ModelReport>,
    pub table: Table,
    pub weights: SpatialWeights,
    pub summary: String,
}

fn wrap(index: usize, name: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Model {
        index,
        name: name.to_string(),
        source: Box::new(e),
    }
}

/// Loads the inputs, builds every design, then fits them in order. All
/// designs are built before the first fit so specification errors surface
/// without any estimation work.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutput> {
    let specs = cfg.specs()?;
    let policy = cfg.isolated_policy()?;
    let data = load_datasets(cfg)?;
    let weights = SpatialWeights::from_centroids(&data.centroids, cfg.cutoff_km, policy)?;
    let mut designs = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let d = build_design(&data.flows, &data.tables, &weights, spec, cfg.zero_flow).map_err(wrap(k + 1, &spec.name))?;
        designs.push(d);
    }
    let mut reports = Vec::with_capacity(specs.len());
    for (k, (spec, design)) in specs.iter().zip(&designs).enumerate() {
        log::info!("fitting {} (K = {})", spec.name, design.n_regressors());
        reports.push(fit_model(&spec.name, design, &weights).map_err(wrap(k + 1, &spec.name))?);
    }
    let table = render_table(&reports);
    Ok(RunOutput {
        reports,
        table,
        weights,
        summary: data.summary(),
    })
}

/// One line of `coefficients.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub model: String,
    pub fit: String,
    pub parameter: String,
    pub estimate: f64,
    pub std_error: f64,
}

/// Every estimated parameter of every fit, in full precision.
pub fn coefficients_csv(reports: &[ModelReport]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for r in reports {
        for (fit, label) in [(&r.linear, "linear"), (&r.spatial, "spatial")] {
            let mut rows: Vec<(String, f64, f64)> = fit
                .labels
                .iter()
                .zip(fit.coefficients.iter().zip(&fit.std_errors))
                .map(|(l, (&b, &s))| (l.name.clone(), b, s))
                .collect();
            if let Some(l) = fit.lambda {
                rows.push(("lambda".into(), l, fit.lambda_se.unwrap_or(f64::NAN)));
            }
            rows.push(("sigma2".into(), fit.sigma2, fit.sigma2_se.unwrap_or(f64::NAN)));
            for (parameter, estimate, std_error) in rows {
                wtr.serialize(CoefficientRecord {
                    model: r.name.clone(),
                    fit: label.into(),
                    parameter,
                    estimate,
                    std_error,
                })?;
            }
        }
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_coefficients_csv(text: &str) -> Result<Vec<CoefficientRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'a str,
    version: &'a str,
    created_unix: u64,
    cutoff_km: f64,
    isolated: &'a [String],
    zero_flow: ZeroFlowPolicy,
    summary: &'a str,
    models: Vec<&'a str>,
}

/// Writes `model_<k>.json`, `table.txt`, `table.csv`, `coefficients.csv` and
/// `metadata.json` into `dir`. Only the metadata file carries a timestamp.
pub fn write_outputs(out: &RunOutput, cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (k, r) in out.reports.iter().enumerate() {
        std::fs::write(dir.join(format!("model_{}.json", k + 1)), serde_json::to_string_pretty(r)? + "\n")?;
    }
    std::fs::write(dir.join("table.txt"), out.table.to_text())?;
    std::fs::write(dir.join("table.csv"), out.table.to_csv()?)?;
    std::fs::write(dir.join("coefficients.csv"), coefficients_csv(&out.reports)?)?;
    let created_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let meta = Metadata {
        tool: "odflow",
        version: env!("CARGO_PKG_VERSION"),
        created_unix,
        cutoff_km: out.weights.cutoff_km(),
        isolated: out.weights.isolated(),
        zero_flow: cfg.zero_flow,
        summary: &out.summary,
        models: out.reports.iter().map(|r| r.name.as_str()).collect(),
    };
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Writes a synthetic instance as a CSV dataset plus a run config that
/// estimates the full model on it. Returns the config path.
pub fn write_dataset(inst: &crate::synth::SyntheticInstance, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("flows.csv"), io::flows_to_csv(&inst.flows()?))?;
    std::fs::write(dir.join("centroids.csv"), io::centroids_to_csv(&inst.centroids))?;
    let mut cfg = RunConfig {
        flows: "flows.csv".into(),
        centroids: "centroids.csv".into(),
        origin: None,
        destination: None,
        od: None,
        output: "results".into(),
        cutoff_km: inst.weights.cutoff_km(),
        zero_flow: ZeroFlowPolicy::Error,
        isolated: default_isolated(),
        lonlat: false,
        models: vec![ModelEntry {
            name: "Full".into(),
            columns: None,
            lags: None,
            dummies: Vec::new(),
            intercept: true,
        }],
    };
    for t in &inst.tables {
        let (file, text) = match t.axis() {
            crate::design::Axis::Origin => ("origin.csv", io::unit_covariates_to_csv(t)),
            crate::design::Axis::Destination => ("destination.csv", io::unit_covariates_to_csv(t)),
            crate::design::Axis::OdPair => ("od.csv", io::od_covariates_to_csv(t)),
        };
        std::fs::write(dir.join(file), text)?;
        let slot = match t.axis() {
            crate::design::Axis::Origin => &mut cfg.origin,
            crate::design::Axis::Destination => &mut cfg.destination,
            crate::design::Axis::OdPair => &mut cfg.od,
        };
        *slot = Some(file.into());
    }
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg.to_toml()?)?;
    Ok(path)
}
