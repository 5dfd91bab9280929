#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use odflow::design::{Covariate, CovariateTable, Transform};
use odflow::synth::DgpConfig;
use odflow::weights::{Centroids, IsolatedPolicy, SpatialWeights};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn ids(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|i| format!("{prefix}{i:02}")).collect()
}

/// Symmetric binary adjacency with edge probability `p`.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize, p: f64) -> SpatialWeights {
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            if rng.random::<f64>() < p {
                adj[(i, j)] = 1.0;
                adj[(j, i)] = 1.0;
            }
        }
    }
    SpatialWeights::from_adjacency(ids("d", n), adj, 120.0).unwrap()
}

/// Cutoff weights on uniform centroids in a `extent × extent` square.
pub fn random_cutoff_weights(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> SpatialWeights {
    loop {
        let coords = (0..n)
            .map(|_| [rng.random::<f64>() * extent, rng.random::<f64>() * extent])
            .collect();
        let c = Centroids::new(ids("d", n), coords).unwrap();
        let w = SpatialWeights::from_centroids(&c, 120.0, IsolatedPolicy::Warn).unwrap();
        if w.lambda_bounds().is_ok() {
            return w;
        }
    }
}

/// `I_m ⊗ W` as a dense matrix.
pub fn dense_lag_operator(w: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    DMatrix::<f64>::identity(m, m).kronecker(w)
}

/// `ln|det A|` from a dense LU factorization.
pub fn dense_log_abs_det(a: DMatrix<f64>) -> f64 {
    let lu = a.lu();
    lu.u().diagonal().iter().map(|v| v.abs().ln()).sum()
}

/// `(X'X)⁻¹X'y` through the normal equations.
pub fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let xtx = x.transpose() * x;
    xtx.cholesky().expect("positive definite").solve(&(x.transpose() * y))
}

pub struct ToyTables {
    pub dest_ids: Vec<String>,
    pub origin_ids: Vec<String>,
    pub x_o: Vec<f64>,
    pub x_d: Vec<f64>,
    pub x_od: DMatrix<f64>,
    pub tables: Vec<CovariateTable>,
}

/// One origin, one destination and one OD covariate, all identity-transformed.
pub fn toy_tables(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ToyTables {
    let dest_ids = ids("d", n);
    let origin_ids = ids("o", m);
    let x_o: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let x_d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let x_od = DMatrix::from_fn(n, m, |_, _| rng.random::<f64>() * 10.0);
    let tables = vec![
        CovariateTable::origin(origin_ids.clone(), vec![Covariate::vector("xo", Transform::Identity, x_o.clone())]).unwrap(),
        CovariateTable::destination(dest_ids.clone(), vec![Covariate::vector("xd", Transform::Identity, x_d.clone())])
            .unwrap(),
        CovariateTable::od(
            dest_ids.clone(),
            origin_ids.clone(),
            vec![Covariate::matrix("dist", Transform::Identity, x_od.clone())],
        )
        .unwrap(),
    ];
    ToyTables {
        dest_ids,
        origin_ids,
        x_o,
        x_d,
        x_od,
        tables,
    }
}

pub fn small_dgp(n: usize, m: usize, lambda: f64, seed: u64) -> DgpConfig {
    DgpConfig {
        n,
        m,
        lambda,
        seed,
        ..DgpConfig::default()
    }
}
