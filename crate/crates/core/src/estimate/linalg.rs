//! Least squares through a Householder QR with column-norm pivoting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on `|r_kk| / |r_00|` below which a column is collinear.
pub const RANK_TOL: f64 = 1e-10;

pub(crate) struct PivotedQr {
    /// Householder vectors below (and on) the diagonal, R strictly above.
    packed: DMatrix<f64>,
    rdiag: Vec<f64>,
    betas: Vec<f64>,
    /// `perm[k]` is the original index of the k-th pivoted column.
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(mut a: DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let steps = rows.min(cols);
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut rdiag = vec![0.0; steps];
        let mut betas = vec![0.0; steps];
        for i in 0..steps {
            let norm2 = |a: &DMatrix<f64>, j: usize| a.view((i, j), (rows - i, 1)).norm_squared();
            let (p, _) = (i..cols)
                .map(|j| (j, norm2(&a, j)))
                .fold((i, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if p != i {
                a.swap_columns(i, p);
                perm.swap(i, p);
            }
            let norm = a.view((i, i), (rows - i, 1)).norm();
            if norm == 0.0 {
                continue;
            }
            let x0 = a[(i, i)];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            a[(i, i)] = x0 - alpha;
            let vv = a.view((i, i), (rows - i, 1)).norm_squared();
            let beta = 2.0 / vv;
            for j in i + 1..cols {
                let dot = a.view((i, i), (rows - i, 1)).dot(&a.view((i, j), (rows - i, 1)));
                let s = beta * dot;
                for r in i..rows {
                    let v = a[(r, i)];
                    a[(r, j)] -= s * v;
                }
            }
            rdiag[i] = alpha;
            betas[i] = beta;
        }
        Self {
            packed: a,
            rdiag,
            betas,
            perm,
        }
    }

    /// Numerical rank under [`RANK_TOL`].
    pub fn rank(&self) -> usize {
        let first = self.rdiag.first().map(|v| v.abs()).unwrap_or(0.0);
        if first == 0.0 {
            return 0;
        }
        self.rdiag
            .iter()
            .take_while(|v| v.abs() > RANK_TOL * first)
            .count()
    }

    /// Original indices of the columns beyond the numerical rank.
    pub fn dependent_columns(&self) -> Vec<usize> {
        let mut out = self.perm[self.rank()..].to_vec();
        out.sort_unstable();
        out
    }

    fn qt_mul(&self, y: &mut DVector<f64>) {
        let rows = self.packed.nrows();
        for (i, &beta) in self.betas.iter().enumerate() {
            if beta == 0.0 {
                continue;
            }
            let v = self.packed.view((i, i), (rows - i, 1));
            let s = beta * v.dot(&y.rows(i, rows - i));
            for r in i..rows {
                y[r] -= s * self.packed[(r, i)];
            }
        }
    }

    fn r_upper(&self) -> DMatrix<f64> {
        let k = self.packed.ncols();
        DMatrix::from_fn(k, k, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.rdiag[i],
            std::cmp::Ordering::Less => self.packed[(i, j)],
            std::cmp::Ordering::Greater => 0.0,
        })
    }

    /// Least-squares solution in the original column order. Requires full rank.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let k = self.packed.ncols();
        let mut qty = y.clone();
        self.qt_mul(&mut qty);
        let z = self
            .r_upper()
            .solve_upper_triangular(&qty.rows(0, k).into_owned())
            .expect("full-rank R");
        let mut beta = DVector::zeros(k);
        for (pos, &orig) in self.perm.iter().enumerate() {
            beta[orig] = z[pos];
        }
        beta
    }

    /// `(X'X)⁻¹` in the original column order. Requires full rank.
    pub fn unscaled_covariance(&self) -> DMatrix<f64> {
        let k = self.packed.ncols();
        let rinv = self
            .r_upper()
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .expect("full-rank R");
        let c = &rinv * rinv.transpose();
        let mut out = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                out[(self.perm[a], self.perm[b])] = c[(a, b)];
            }
        }
        out
    }
}

pub(crate) struct LeastSquares {
    pub qr: PivotedQr,
    pub coefficients: DVector<f64>,
    pub rss: f64,
}

/// Solves `min ‖y − Xβ‖²`, failing with the names of collinear columns when
/// `X` is rank deficient.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LeastSquares> {
    let (rows, cols) = x.shape();
    if cols >= rows {
        return Err(Error::TooFewObservations { n: rows, k: cols });
    }
    let qr = PivotedQr::new(x.clone());
    if qr.rank() < cols {
        let cols = qr
            .dependent_columns()
            .into_iter()
            .map(|j| names.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
            .collect();
        return Err(Error::RankDeficient(cols));
    }
    let coefficients = qr.solve(y);
    let rss = (y - x * &coefficients).norm_squared();
    Ok(LeastSquares {
        qr,
        coefficients,
        rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn exact_solution_of_square_like_system() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let ls = least_squares(&x, &y, &names(2)).unwrap();
        assert!((ls.coefficients[0] - 1.0).abs() < 1e-13);
        assert!((ls.coefficients[1] - 2.0).abs() < 1e-13);
        assert!(ls.rss < 1e-25);
    }

    #[test]
    fn collinear_columns_are_named() {
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let y = DVector::from_fn(6, |i, _| (i * i) as f64);
        match least_squares(&x, &y, &names(3)) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols.len(), 1),
            _ => panic!("expected rank deficiency"),
        }
    }

    #[test]
    fn covariance_matches_explicit_inverse() {
        let x = DMatrix::from_fn(10, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 + if j == 0 { 1.0 } else { 0.1 * i as f64 });
        let qr = PivotedQr::new(x.clone());
        let inv = (x.transpose() * &x).try_inverse().unwrap();
        let c = qr.unscaled_covariance();
        assert!((c - inv).abs().max() < 1e-10);
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            least_squares(&x, &DVector::zeros(2), &names(2)),
            Err(Error::TooFewObservations { .. })
        ));
    }
}
