//! Stacked gravity design for origin-destination flows.
//!
//! Observations are ordered column-major over the `n × m` flow matrix: the
//! first `n` rows are all destinations for origin 1, the next `n` for origin 2,
//! and so on. Origin covariates are repeated within each block (`X_O ⊗ 1_n`),
//! destination covariates are tiled across blocks (`1_m ⊗ X_D`) and OD
//! covariates are vec-stacked in the same order as the response.

use std::collections::{BTreeSet, HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BadCell, Error, Result};
use crate::weights::SpatialWeights;

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId {
                what: what.to_string(),
                id: id.clone(),
            });
        }
    }
    Ok(())
}

/// Ids present in exactly one of the two lists, sorted.
pub(crate) fn symmetric_difference(a: &[String], b: &[String]) -> Vec<String> {
    let sa: BTreeSet<&String> = a.iter().collect();
    let sb: BTreeSet<&String> = b.iter().collect();
    sa.symmetric_difference(&sb).map(|s| s.to_string()).collect()
}

/// Position of each id of `order` inside `ids`, or the symmetric difference.
fn permutation(ids: &[String], order: &[String], what: &str) -> Result<Vec<usize>> {
    let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if ids.len() != order.len() || order.iter().any(|id| !pos.contains_key(id.as_str())) {
        return Err(Error::IdMismatch {
            what: what.to_string(),
            ids: symmetric_difference(ids, order),
        });
    }
    Ok(order.iter().map(|id| pos[id.as_str()]).collect())
}

/// Flow counts, destinations in rows and origins in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMatrix {
    values: DMatrix<f64>,
    dest_ids: Vec<String>,
    origin_ids: Vec<String>,
}

impl FlowMatrix {
    pub fn new(values: DMatrix<f64>, dest_ids: Vec<String>, origin_ids: Vec<String>) -> Result<Self> {
        if values.nrows() != dest_ids.len() || values.ncols() != origin_ids.len() {
            return Err(Error::DimensionMismatch {
                what: "flow matrix".into(),
                expected: format!("{}x{}", dest_ids.len(), origin_ids.len()),
                found: format!("{}x{}", values.nrows(), values.ncols()),
            });
        }
        check_unique(&dest_ids, "flow destinations")?;
        check_unique(&origin_ids, "flow origins")?;
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                let v = values[(i, j)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::NegativeFlow(BadCell {
                        dest: dest_ids[i].clone(),
                        origin: origin_ids[j].clone(),
                        value: v,
                    }));
                }
            }
        }
        Ok(Self {
            values,
            dest_ids,
            origin_ids,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dest_ids(&self) -> &[String] {
        &self.dest_ids
    }

    pub fn origin_ids(&self) -> &[String] {
        &self.origin_ids
    }

    /// Number of destinations.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of origins.
    pub fn m(&self) -> usize {
        self.values.ncols()
    }
}

/// How zero flows are handled when building the log response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroFlowPolicy {
    #[default]
    Error,
    /// Use `ln(1 + x)` for every response entry.
    Log1p,
}

impl std::str::FromStr for ZeroFlowPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(Self::Error),
            "log1p" => Ok(Self::Log1p),
            other => Err(Error::Config(format!("unknown zero-flow policy `{other}`"))),
        }
    }
}

/// Transform recorded alongside the response so reports can flag `log1p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseTransform {
    Log,
    Log1p,
    /// Response supplied directly on the log scale (synthetic data).
    Given,
}

/// Column-major `ln` of the flow matrix.
pub fn vec_stack(flows: &FlowMatrix, policy: ZeroFlowPolicy) -> Result<DVector<f64>> {
    let v = flows.values();
    match policy {
        ZeroFlowPolicy::Log1p => Ok(DVector::from_iterator(
            v.len(),
            v.iter().map(|x| x.ln_1p()),
        )),
        ZeroFlowPolicy::Error => {
            let mut bad = Vec::new();
            for j in 0..flows.m() {
                for i in 0..flows.n() {
                    if v[(i, j)] <= 0.0 {
                        bad.push(BadCell {
                            dest: flows.dest_ids[i].clone(),
                            origin: flows.origin_ids[j].clone(),
                            value: v[(i, j)],
                        });
                    }
                }
            }
            if !bad.is_empty() {
                return Err(Error::NonPositiveFlow(bad));
            }
            Ok(DVector::from_iterator(v.len(), v.iter().map(|x| x.ln())))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Origin,
    Destination,
    OdPair,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::Origin => "origin",
            Axis::Destination => "destination",
            Axis::OdPair => "od_pair",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Log,
    Identity,
    Dummy,
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "log" => Ok(Self::Log),
            "identity" => Ok(Self::Identity),
            "dummy" => Ok(Self::Dummy),
            other => Err(Error::Config(format!("unknown transform `{other}`"))),
        }
    }
}

/// One named covariate. Origin and destination covariates are stored as
/// single-column matrices; OD covariates as full `n × m` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariate {
    pub name: String,
    pub transform: Transform,
    pub values: DMatrix<f64>,
}

impl Covariate {
    pub fn vector(name: impl Into<String>, transform: Transform, values: Vec<f64>) -> Self {
        let len = values.len();
        Self {
            name: name.into(),
            transform,
            values: DMatrix::from_vec(len, 1, values),
        }
    }

    pub fn matrix(name: impl Into<String>, transform: Transform, values: DMatrix<f64>) -> Self {
        Self {
            name: name.into(),
            transform,
            values,
        }
    }

    fn transformed(&self) -> Result<Covariate> {
        let values = match self.transform {
            Transform::Identity | Transform::Dummy => self.values.clone(),
            Transform::Log => {
                if let Some((row, &value)) = self.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                    return Err(Error::LogDomain {
                        column: self.name.clone(),
                        row,
                        value,
                    });
                }
                self.values.map(f64::ln)
            }
        };
        Ok(Covariate {
            name: self.name.clone(),
            transform: self.transform,
            values,
        })
    }
}

/// Named covariates sharing one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    axis: Axis,
    dest_ids: Vec<String>,
    origin_ids: Vec<String>,
    columns: Vec<Covariate>,
}

impl CovariateTable {
    pub fn origin(ids: Vec<String>, columns: Vec<Covariate>) -> Result<Self> {
        Self::build(Axis::Origin, Vec::new(), ids, columns)
    }

    pub fn destination(ids: Vec<String>, columns: Vec<Covariate>) -> Result<Self> {
        Self::build(Axis::Destination, ids, Vec::new(), columns)
    }

    pub fn od(dest_ids: Vec<String>, origin_ids: Vec<String>, columns: Vec<Covariate>) -> Result<Self> {
        Self::build(Axis::OdPair, dest_ids, origin_ids, columns)
    }

    fn build(axis: Axis, dest_ids: Vec<String>, origin_ids: Vec<String>, columns: Vec<Covariate>) -> Result<Self> {
        check_unique(&dest_ids, "destination ids")?;
        check_unique(&origin_ids, "origin ids")?;
        let (rows, cols) = match axis {
            Axis::Origin => (origin_ids.len(), 1),
            Axis::Destination => (dest_ids.len(), 1),
            Axis::OdPair => (dest_ids.len(), origin_ids.len()),
        };
        let mut names = HashSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
            if c.values.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch {
                    what: format!("{axis} covariate `{}`", c.name),
                    expected: format!("{rows}x{cols}"),
                    found: format!("{}x{}", c.values.nrows(), c.values.ncols()),
                });
            }
            if c.transform == Transform::Dummy {
                if let Some(&value) = c.values.iter().find(|v| **v != 0.0 && **v != 1.0) {
                    return Err(Error::NotADummy {
                        column: c.name.clone(),
                        value,
                    });
                }
            }
        }
        Ok(Self {
            axis,
            dest_ids,
            origin_ids,
            columns,
        })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn columns(&self) -> &[Covariate] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Covariate> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn dest_ids(&self) -> &[String] {
        &self.dest_ids
    }

    pub fn origin_ids(&self) -> &[String] {
        &self.origin_ids
    }

    /// Number of entries along the table's own axis (`m` for origin, `n` for
    /// destination, `n·m` for OD tables).
    pub fn len(&self) -> usize {
        match self.axis {
            Axis::Origin => self.origin_ids.len(),
            Axis::Destination => self.dest_ids.len(),
            Axis::OdPair => self.dest_ids.len() * self.origin_ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies each column's declared transform.
    pub fn transformed(&self) -> Result<Self> {
        Ok(Self {
            axis: self.axis,
            dest_ids: self.dest_ids.clone(),
            origin_ids: self.origin_ids.clone(),
            columns: self.columns.iter().map(Covariate::transformed).collect::<Result<_>>()?,
        })
    }

    /// Reorders rows (and OD columns) to the given id orders.
    pub fn aligned(&self, dest_order: &[String], origin_order: &[String]) -> Result<Self> {
        let dperm = match self.axis {
            Axis::Origin => None,
            _ => Some(permutation(&self.dest_ids, dest_order, &format!("{} table destinations", self.axis))?),
        };
        let operm = match self.axis {
            Axis::Destination => None,
            _ => Some(permutation(&self.origin_ids, origin_order, &format!("{} table origins", self.axis))?),
        };
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let values = match self.axis {
                    Axis::Origin => {
                        let p = operm.as_ref().unwrap();
                        DMatrix::from_fn(p.len(), 1, |i, _| c.values[(p[i], 0)])
                    }
                    Axis::Destination => {
                        let p = dperm.as_ref().unwrap();
                        DMatrix::from_fn(p.len(), 1, |i, _| c.values[(p[i], 0)])
                    }
                    Axis::OdPair => {
                        let (pd, po) = (dperm.as_ref().unwrap(), operm.as_ref().unwrap());
                        DMatrix::from_fn(pd.len(), po.len(), |i, j| c.values[(pd[i], po[j])])
                    }
                };
                Covariate {
                    name: c.name.clone(),
                    transform: c.transform,
                    values,
                }
            })
            .collect();
        Ok(Self {
            axis: self.axis,
            dest_ids: if dperm.is_some() { dest_order.to_vec() } else { Vec::new() },
            origin_ids: if operm.is_some() { origin_order.to_vec() } else { Vec::new() },
            columns,
        })
    }
}

fn expect_axis(table: &CovariateTable, axis: Axis) -> Result<()> {
    if table.axis != axis {
        return Err(Error::AxisMismatch {
            table: table.columns.first().map(|c| c.name.clone()).unwrap_or_default(),
            expected: axis.to_string(),
            found: table.axis.to_string(),
        });
    }
    Ok(())
}

/// `X_O ⊗ 1_n`: row `j·n + i` holds origin `j`'s covariates.
pub fn expand_origin(x_o: &CovariateTable, n: usize) -> Result<DMatrix<f64>> {
    expect_axis(x_o, Axis::Origin)?;
    let m = x_o.origin_ids.len();
    let s = x_o.columns.len();
    Ok(DMatrix::from_fn(n * m, s, |row, k| x_o.columns[k].values[(row / n, 0)]))
}

/// `1_m ⊗ X_D`: the `n × p` block tiled `m` times.
pub fn expand_destination(x_d: &CovariateTable, m: usize) -> Result<DMatrix<f64>> {
    expect_axis(x_d, Axis::Destination)?;
    let n = x_d.dest_ids.len();
    let p = x_d.columns.len();
    Ok(DMatrix::from_fn(n * m, p, |row, k| x_d.columns[k].values[(row % n, 0)]))
}

/// Vec-stacks each OD variable column-major, matching the response order.
pub fn flatten_od(x_od: &CovariateTable, n: usize, m: usize) -> Result<DMatrix<f64>> {
    expect_axis(x_od, Axis::OdPair)?;
    let r = x_od.columns.len();
    let mut out = DMatrix::zeros(n * m, r);
    for (k, c) in x_od.columns.iter().enumerate() {
        if c.values.shape() != (n, m) {
            return Err(Error::DimensionMismatch {
                what: format!("OD covariate `{}`", c.name),
                expected: format!("{n}x{m}"),
                found: format!("{}x{}", c.values.nrows(), c.values.ncols()),
            });
        }
        out.column_mut(k).copy_from_slice(c.values.as_slice());
    }
    Ok(out)
}

/// Which block a regressor column belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Intercept,
    Origin,
    Destination,
    OdPair,
    LagDestination,
    LagOd,
    Dummy,
}

impl Block {
    pub fn is_lag(self) -> bool {
        matches!(self, Block::LagDestination | Block::LagOd)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnLabel {
    /// Display name, e.g. `GDP_D` or `W_D GDP_D`.
    pub name: String,
    pub block: Block,
    /// Underlying covariate (same as `name` except for lags and dummies).
    pub variable: String,
}

pub const INTERCEPT: &str = "(Intercept)";

/// Display name of the destination lag of a variable.
pub fn lag_name(variable: &str) -> String {
    format!("W_D {variable}")
}

/// Which destination-varying columns get a `W_D` lag.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagSelection {
    /// Every destination and OD column in the model.
    #[default]
    All,
    None,
    Only(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DummyBlock {
    Origin,
    Destination,
}

/// Options selecting the regressors of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    /// Covariates to include; `None` takes every declared column.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
    #[serde(default)]
    pub lags: LagSelection,
    #[serde(default)]
    pub dummies: Vec<DummyBlock>,
    #[serde(default = "default_true")]
    pub intercept: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            name: "model".into(),
            columns: None,
            lags: LagSelection::All,
            dummies: Vec::new(),
            intercept: true,
        }
    }
}

/// Response and regressors of the stacked system.
#[derive(Debug, Clone)]
pub struct StackedDesign {
    pub response: DVector<f64>,
    pub regressors: DMatrix<f64>,
    pub labels: Vec<ColumnLabel>,
    pub n: usize,
    pub m: usize,
    pub dest_ids: Vec<String>,
    pub origin_ids: Vec<String>,
    pub response_transform: ResponseTransform,
}

impl StackedDesign {
    /// Number of observations `N = n·m`.
    pub fn n_obs(&self) -> usize {
        self.response.len()
    }

    /// Number of regressor columns `K`.
    pub fn n_regressors(&self) -> usize {
        self.regressors.ncols()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.name.clone()).collect()
    }

    pub fn count_block(&self, block: Block) -> usize {
        self.labels.iter().filter(|l| l.block == block).count()
    }
}

/// Builds the stacked design from a flow matrix.
pub fn build_design(
    flows: &FlowMatrix,
    tables: &[CovariateTable],
    weights: &SpatialWeights,
    spec: &ModelSpec,
    zero_flow: ZeroFlowPolicy,
) -> Result<StackedDesign> {
    let response = vec_stack(flows, zero_flow)?;
    let transform = match zero_flow {
        ZeroFlowPolicy::Error => ResponseTransform::Log,
        ZeroFlowPolicy::Log1p => ResponseTransform::Log1p,
    };
    build_design_from_response(
        response,
        transform,
        flows.dest_ids(),
        flows.origin_ids(),
        tables,
        weights,
        spec,
    )
}

/// Builds the stacked design around a response already on the model scale.
pub fn build_design_from_response(
    response: DVector<f64>,
    response_transform: ResponseTransform,
    dest_ids: &[String],
    origin_ids: &[String],
    tables: &[CovariateTable],
    weights: &SpatialWeights,
    spec: &ModelSpec,
) -> Result<StackedDesign> {
    let (n, m) = (dest_ids.len(), origin_ids.len());
    if response.len() != n * m {
        return Err(Error::DimensionMismatch {
            what: "response".into(),
            expected: (n * m).to_string(),
            found: response.len().to_string(),
        });
    }
    let weights = if weights.ids() == dest_ids {
        weights.clone()
    } else {
        let perm = permutation(weights.ids(), dest_ids, "spatial weights")?;
        let adj = weights.adjacency();
        let reordered = DMatrix::from_fn(n, n, |i, j| adj[(perm[i], perm[j])]);
        SpatialWeights::from_adjacency(dest_ids.to_vec(), reordered, weights.cutoff_km())?
    };

    // Resolve declared columns and check uniqueness across tables.
    let mut declared: HashMap<&str, Axis> = HashMap::new();
    for t in tables {
        for c in t.columns() {
            if declared.insert(c.name.as_str(), t.axis()).is_some() {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
        }
    }
    let wanted: Option<HashSet<&str>> = match &spec.columns {
        None => None,
        Some(cols) => {
            let mut set = HashSet::new();
            for c in cols {
                if !declared.contains_key(c.as_str()) {
                    return Err(Error::UnknownColumn(c.clone()));
                }
                if !set.insert(c.as_str()) {
                    return Err(Error::DuplicateColumn(c.clone()));
                }
            }
            Some(set)
        }
    };
    let included = |name: &str| wanted.as_ref().is_none_or(|w| w.contains(name));

    let mut blocks: HashMap<Axis, (Vec<String>, DMatrix<f64>)> = HashMap::new();
    for axis in [Axis::Origin, Axis::Destination, Axis::OdPair] {
        let mut names = Vec::new();
        let mut parts: Vec<DMatrix<f64>> = Vec::new();
        for t in tables.iter().filter(|t| t.axis() == axis) {
            let keep: Vec<Covariate> = t.columns().iter().filter(|c| included(&c.name)).cloned().collect();
            if keep.is_empty() {
                continue;
            }
            let sub = CovariateTable {
                axis,
                dest_ids: t.dest_ids.clone(),
                origin_ids: t.origin_ids.clone(),
                columns: keep,
            }
            .aligned(dest_ids, origin_ids)?
            .transformed()?;
            names.extend(sub.columns.iter().map(|c| c.name.clone()));
            parts.push(match axis {
                Axis::Origin => expand_origin(&sub, n)?,
                Axis::Destination => expand_destination(&sub, m)?,
                Axis::OdPair => flatten_od(&sub, n, m)?,
            });
        }
        blocks.insert(axis, (names, hcat(n * m, &parts)));
    }

    let lagged = |axis: Axis| -> Result<Vec<usize>> {
        let names = &blocks[&axis].0;
        Ok(match &spec.lags {
            LagSelection::All => (0..names.len()).collect(),
            LagSelection::None => Vec::new(),
            LagSelection::Only(list) => (0..names.len()).filter(|&k| list.contains(&names[k])).collect(),
        })
    };
    if let LagSelection::Only(list) = &spec.lags {
        let mut seen = HashSet::new();
        for name in list {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(lag_name(name)));
            }
            match declared.get(name.as_str()) {
                None => return Err(Error::UnknownColumn(name.clone())),
                Some(Axis::Origin) => return Err(Error::OriginLag(name.clone())),
                Some(_) if !included(name) => {
                    return Err(Error::Config(format!(
                        "lag requested for `{name}` which is not among the model's columns"
                    )))
                }
                Some(_) => {}
            }
        }
    }

    let mut labels = Vec::new();
    let mut parts = Vec::new();
    if spec.intercept {
        labels.push(ColumnLabel {
            name: INTERCEPT.into(),
            block: Block::Intercept,
            variable: INTERCEPT.into(),
        });
        parts.push(DMatrix::from_element(n * m, 1, 1.0));
    }
    for (axis, block) in [
        (Axis::Origin, Block::Origin),
        (Axis::Destination, Block::Destination),
        (Axis::OdPair, Block::OdPair),
    ] {
        let (names, mat) = &blocks[&axis];
        labels.extend(names.iter().map(|nm| ColumnLabel {
            name: nm.clone(),
            block,
            variable: nm.clone(),
        }));
        parts.push(mat.clone());
    }
    for (axis, block) in [(Axis::Destination, Block::LagDestination), (Axis::OdPair, Block::LagOd)] {
        let (names, mat) = &blocks[&axis];
        let idx = lagged(axis)?;
        if idx.is_empty() {
            continue;
        }
        let sel = mat.select_columns(idx.iter());
        parts.push(weights.lag_matrix(&sel, m)?);
        labels.extend(idx.iter().map(|&k| ColumnLabel {
            name: lag_name(&names[k]),
            block,
            variable: names[k].clone(),
        }));
    }
    let mut drop_reference = spec.intercept;
    for block in &spec.dummies {
        let (ids, prefix) = match block {
            DummyBlock::Origin => (origin_ids, "FE_O"),
            DummyBlock::Destination => (dest_ids, "FE_D"),
        };
        let mut sorted: Vec<(usize, &String)> = ids.iter().enumerate().collect();
        sorted.sort_by(|a, b| a.1.cmp(b.1));
        let levels = if drop_reference { &sorted[1..] } else { &sorted[..] };
        drop_reference = true;
        let mut mat = DMatrix::zeros(n * m, levels.len());
        for (k, &(level, id)) in levels.iter().enumerate() {
            for row in 0..n * m {
                let unit = match block {
                    DummyBlock::Origin => row / n,
                    DummyBlock::Destination => row % n,
                };
                if unit == level {
                    mat[(row, k)] = 1.0;
                }
            }
            labels.push(ColumnLabel {
                name: format!("{prefix}[{id}]"),
                block: Block::Dummy,
                variable: id.clone(),
            });
        }
        parts.push(mat);
    }
    let regressors = hcat(n * m, &parts);
    debug_assert_eq!(regressors.ncols(), labels.len());
    Ok(StackedDesign {
        response,
        regressors,
        labels,
        n,
        m,
        dest_ids: dest_ids.to_vec(),
        origin_ids: origin_ids.to_vec(),
        response_transform,
    })
}

fn hcat(rows: usize, parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        out.columns_mut(at, p.ncols()).copy_from(p);
        at += p.ncols();
    }
    out
}
