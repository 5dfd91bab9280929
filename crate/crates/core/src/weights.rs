//! Destination-level spatial weights under the critical cutoff criterion.
//!
//! Two destinations are neighbors when their centroids lie within `d_c`
//! kilometres of each other. The binary matrix is row-standardized before use,
//! and its real spectrum is kept around for the log-Jacobian of the error
//! process. The stacked operator `W_D = I_m ⊗ W` is never materialized: it acts
//! on each origin block of `n` consecutive observations independently.

use std::collections::HashSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Default neighbourhood cutoff in kilometres.
pub const DEFAULT_CUTOFF_KM: f64 = 120.0;

/// Tolerance on row sums of the standardized matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Destination centroids on a planar kilometre grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    ids: Vec<String>,
    coords: Vec<[f64; 2]>,
}

impl Centroids {
    pub fn new(ids: Vec<String>, coords: Vec<[f64; 2]>) -> Result<Self> {
        if ids.len() != coords.len() {
            return Err(Error::DimensionMismatch {
                what: "centroid coordinates".into(),
                expected: ids.len().to_string(),
                found: coords.len().to_string(),
            });
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId {
                    what: "centroids".into(),
                    id: id.clone(),
                });
            }
        }
        for (id, c) in ids.iter().zip(&coords) {
            if !c[0].is_finite() || !c[1].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "centroid `{id}` has non-finite coordinates ({}, {})",
                    c[0], c[1]
                )));
            }
        }
        Ok(Self { ids, coords })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Reorders centroids to follow `order`, which must be a permutation of the ids.
    pub fn reindexed(&self, order: &[String]) -> Result<Self> {
        let pos: std::collections::HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut coords = Vec::with_capacity(order.len());
        for id in order {
            match pos.get(id.as_str()) {
                Some(&i) => coords.push(self.coords[i]),
                None => {
                    return Err(Error::IdMismatch {
                        what: "centroids".into(),
                        ids: vec![id.clone()],
                    })
                }
            }
        }
        Centroids::new(order.to_vec(), coords)
    }
}

/// Euclidean distance matrix between centroids.
pub fn pairwise_distances(c: &Centroids) -> Result<DMatrix<f64>> {
    let n = c.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 centroids, got {n}"
        )));
    }
    let p = c.coords();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let dx = p[i][0] - p[j][0];
            let dy = p[i][1] - p[j][1];
            dx.hypot(dy)
        }
    }))
}

/// Binary neighbour matrix: `w_ij = 1` iff `d_ij <= d_c` and `i != j`.
pub fn cutoff_adjacency(dist: &DMatrix<f64>, d_c: f64) -> Result<DMatrix<f64>> {
    if !(d_c > 0.0) || !d_c.is_finite() {
        return Err(Error::InvalidInput(format!(
            "cutoff distance must be positive, got {d_c}"
        )));
    }
    if !dist.is_square() {
        return Err(Error::DimensionMismatch {
            what: "distance matrix".into(),
            expected: "square".into(),
            found: format!("{}x{}", dist.nrows(), dist.ncols()),
        });
    }
    let n = dist.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i != j && dist[(i, j)] <= d_c {
            1.0
        } else {
            0.0
        }
    }))
}

/// Divides each nonzero row by its sum. Returns the standardized matrix and
/// the indices of all-zero (isolated) rows.
pub fn row_standardize(adj: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let mut out = adj.clone();
    let mut isolated = Vec::new();
    for i in 0..adj.nrows() {
        let s: f64 = adj.row(i).sum();
        if s == 0.0 {
            isolated.push(i);
        } else {
            out.row_mut(i).scale_mut(1.0 / s);
        }
    }
    (out, isolated)
}

/// Real eigenvalues of a row-standardized symmetric weight matrix, ascending.
///
/// `W = D⁻¹A` with `A` symmetric is similar to `D^{-1/2} A D^{-1/2}`, whose
/// entries are `sqrt(w_ij w_ji)`. The symmetric form is decomposed over the
/// non-isolated units and isolated units contribute zeros.
pub fn spectrum(w_std: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !w_std.is_square() {
        return Err(Error::DimensionMismatch {
            what: "weight matrix".into(),
            expected: "square".into(),
            found: format!("{}x{}", w_std.nrows(), w_std.ncols()),
        });
    }
    let n = w_std.nrows();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (w_std[(i, j)], w_std[(j, i)]);
            if a < 0.0 || (a > 0.0) != (b > 0.0) {
                return Err(Error::Eigen(format!(
                    "weight matrix is not a row-standardized symmetric pattern at ({i}, {j})"
                )));
            }
        }
    }
    let active: Vec<usize> = (0..n).filter(|&i| w_std.row(i).sum() != 0.0).collect();
    let mut values = vec![0.0; n - active.len()];
    if !active.is_empty() {
        let k = active.len();
        let sym = DMatrix::from_fn(k, k, |a, b| {
            let (i, j) = (active[a], active[b]);
            (w_std[(i, j)] * w_std[(j, i)]).sqrt()
        });
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 100 * k.max(10))
            .ok_or_else(|| Error::Eigen(format!("no convergence for {k}x{k} matrix")))?;
        values.extend(eig.eigenvalues.iter().copied());
    }
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(values)
}

fn check_stacked(w: &DMatrix<f64>, len: usize, n: usize, m: usize) -> Result<()> {
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "weight matrix".into(),
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", w.nrows(), w.ncols()),
        });
    }
    if len != n * m {
        return Err(Error::DimensionMismatch {
            what: "stacked vector".into(),
            expected: (n * m).to_string(),
            found: len.to_string(),
        });
    }
    Ok(())
}

/// Computes `(I_m ⊗ W) x` block by block.
pub fn apply_destination_lag(
    w_std: &DMatrix<f64>,
    x: &DVector<f64>,
    n: usize,
    m: usize,
) -> Result<DVector<f64>> {
    check_stacked(w_std, x.len(), n, m)?;
    let blocks = DMatrix::from_column_slice(n, m, x.as_slice());
    let lagged = w_std * blocks;
    Ok(DVector::from_column_slice(lagged.as_slice()))
}

/// Applies the destination lag to every column of a stacked matrix.
pub fn lag_columns(w_std: &DMatrix<f64>, x: &DMatrix<f64>, n: usize, m: usize) -> Result<DMatrix<f64>> {
    check_stacked(w_std, x.nrows(), n, m)?;
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for k in 0..x.ncols() {
        let blocks = DMatrix::from_column_slice(n, m, x.column(k).as_slice());
        let lagged = w_std * blocks;
        out.column_mut(k).copy_from_slice(lagged.as_slice());
    }
    Ok(out)
}

/// What to do with destinations that have no neighbour inside the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsolatedPolicy {
    /// Keep zero rows and log a warning.
    #[default]
    Warn,
    Error,
    /// Link each isolated unit to its nearest centroid (symmetrically).
    Nearest,
}

impl std::str::FromStr for IsolatedPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warn" => Ok(Self::Warn),
            "error" => Ok(Self::Error),
            "nearest" => Ok(Self::Nearest),
            other => Err(Error::Config(format!("unknown isolated-unit policy `{other}`"))),
        }
    }
}

impl std::fmt::Display for IsolatedPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Warn => "warn",
            Self::Error => "error",
            Self::Nearest => "nearest",
        })
    }
}

/// Row-standardized cutoff weights over `n` destinations.
#[derive(Debug, Clone)]
pub struct SpatialWeights {
    ids: Vec<String>,
    adjacency: DMatrix<f64>,
    standardized: DMatrix<f64>,
    spectrum: Vec<f64>,
    cutoff_km: f64,
    isolated: Vec<String>,
}

impl SpatialWeights {
    pub fn from_centroids(c: &Centroids, d_c: f64, policy: IsolatedPolicy) -> Result<Self> {
        let dist = pairwise_distances(c)?;
        let mut adj = cutoff_adjacency(&dist, d_c)?;
        let n = c.len();
        let lonely: Vec<usize> = (0..n).filter(|&i| adj.row(i).sum() == 0.0).collect();
        if !lonely.is_empty() {
            let names: Vec<String> = lonely.iter().map(|&i| c.ids()[i].clone()).collect();
            match policy {
                IsolatedPolicy::Error => return Err(Error::IsolatedUnits(names)),
                IsolatedPolicy::Warn => {
                    log::warn!(
                        "{} isolated destination(s) within {d_c} km keep zero weight rows: {}",
                        names.len(),
                        names.join(", ")
                    );
                }
                IsolatedPolicy::Nearest => {
                    for &i in &lonely {
                        let nearest = (0..n)
                            .filter(|&j| j != i)
                            .min_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]))
                            .expect("at least two centroids");
                        adj[(i, nearest)] = 1.0;
                        adj[(nearest, i)] = 1.0;
                    }
                    log::info!("linked isolated destinations to nearest neighbour: {}", names.join(", "));
                }
            }
        }
        Self::from_adjacency(c.ids().to_vec(), adj, d_c)
    }

    /// Builds weights from an explicit symmetric binary adjacency matrix.
    pub fn from_adjacency(ids: Vec<String>, adjacency: DMatrix<f64>, cutoff_km: f64) -> Result<Self> {
        let n = ids.len();
        if adjacency.nrows() != n || adjacency.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "adjacency".into(),
                expected: format!("{n}x{n}"),
                found: format!("{}x{}", adjacency.nrows(), adjacency.ncols()),
            });
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!("adjacency has nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = adjacency[(i, j)];
                if v != adjacency[(j, i)] || !(v == 0.0 || v == 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "adjacency must be symmetric and binary; offending pair ({i}, {j})"
                    )));
                }
            }
        }
        let (standardized, iso) = row_standardize(&adjacency);
        let spectrum = spectrum(&standardized)?;
        let isolated = iso.iter().map(|&i| ids[i].clone()).collect();
        Ok(Self {
            ids,
            adjacency,
            standardized,
            spectrum,
            cutoff_km,
            isolated,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn standardized(&self) -> &DMatrix<f64> {
        &self.standardized
    }

    /// Eigenvalues of the standardized matrix, ascending.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn cutoff_km(&self) -> f64 {
        self.cutoff_km
    }

    pub fn isolated(&self) -> &[String] {
        &self.isolated
    }

    /// Open interval `(1/ω_min, 1/ω_max)` on which `I - λW` stays nonsingular
    /// with positive determinant.
    pub fn lambda_bounds(&self) -> Result<(f64, f64)> {
        let lo = self.spectrum.first().copied().unwrap_or(0.0);
        let hi = self.spectrum.last().copied().unwrap_or(0.0);
        if lo >= 0.0 || hi <= 0.0 {
            return Err(Error::InvalidInput(
                "weight matrix has no neighbour links; spatial parameter is unidentified".into(),
            ));
        }
        Ok((1.0 / lo, 1.0 / hi))
    }

    /// `(I_m ⊗ W) x` for a stacked vector of length `n·m`.
    pub fn lag(&self, x: &DVector<f64>, m: usize) -> Result<DVector<f64>> {
        apply_destination_lag(&self.standardized, x, self.n(), m)
    }

    pub fn lag_matrix(&self, x: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
        lag_columns(&self.standardized, x, self.n(), m)
    }

    /// Writes the standardized matrix as `i,j,w` triplets of its nonzero
    /// entries, preceded by a metadata comment line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# d_c_km={}; isolated={}",
            self.cutoff_km,
            self.isolated.join("|")
        )?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["i", "j", "w"])?;
        for i in 0..self.n() {
            for j in 0..self.n() {
                let w = self.standardized[(i, j)];
                if w != 0.0 {
                    wtr.write_record([&self.ids[i], &self.ids[j], &w.to_string()])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}
