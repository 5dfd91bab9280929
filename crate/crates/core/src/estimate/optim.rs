//! Univariate derivative-free maximization (golden section with parabolic steps).

const GOLDEN: f64 = 0.381_966_011_250_105_1;
const SQRT_EPS: f64 = 1.490_116_119_384_765_6e-8;

#[derive(Debug, Clone, Copy)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Brent's method on `[a, b]` for the maximum of `f`, to absolute tolerance
/// `tol` in `x`. `f` may fail; the first error aborts the search.
pub fn brent_maximize<F, E>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<Maximum, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    // minimize g = -f
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let mut x = lo + GOLDEN * (hi - lo);
    let (mut w, mut v) = (x, x);
    let mut fx = -f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evaluations = 1;

    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let tol1 = SQRT_EPS * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (hi - lo) {
            return Ok(Maximum {
                x,
                value: -fx,
                evaluations,
                converged: true,
            });
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (lo - x) && p < q * (hi - x) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < mid { hi - x } else { lo - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = -f(u)?;
        evaluations += 1;
        if fu <= fx {
            if u < x {
                hi = x;
            } else {
                lo = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(Maximum {
        x,
        value: -fx,
        evaluations,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok(f: impl Fn(f64) -> f64) -> impl FnMut(f64) -> Result<f64, Infallible> {
        move |x| Ok(f(x))
    }

    #[test]
    fn quadratic_peak() {
        let m = brent_maximize(ok(|x| -(x - 0.3).powi(2)), -1.0, 1.0, 1e-10, 200).unwrap();
        assert!(m.converged);
        assert!((m.x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn non_smooth_peak() {
        let m = brent_maximize(ok(|x| -(x + 0.71).abs()), -2.0, 1.0, 1e-9, 500).unwrap();
        assert!((m.x + 0.71).abs() < 1e-7);
    }

    #[test]
    fn log_barrier_profile() {
        let f = |x: f64| (1.0 - x).ln() + (1.0 + x).ln() - x;
        let m = brent_maximize(ok(f), -0.999, 0.999, 1e-10, 200).unwrap();
        // stationarity: -2x / (1 - x^2) = 1  =>  x^2 - 2x - 1 = 0  =>  x = 1 - sqrt(2)
        assert!((m.x - (1.0 - 2f64.sqrt())).abs() < 1e-8);
    }

    #[test]
    fn monotone_goes_to_edge() {
        let m = brent_maximize(ok(|x| x), 0.0, 1.0, 1e-8, 200).unwrap();
        assert!(1.0 - m.x < 1e-7);
    }

    #[test]
    fn errors_propagate() {
        let r: Result<Maximum, &str> = brent_maximize(|_| Err("boom"), 0.0, 1.0, 1e-8, 10);
        assert_eq!(r.unwrap_err(), "boom");
    }
}
