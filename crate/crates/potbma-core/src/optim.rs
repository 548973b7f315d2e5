//! Small derivative-free optimizers: a 2-d Nelder-Mead maximizer, golden
//! section search in 1-d, and a bracketed bisection root finder.

use crate::error::{Error, Result};

/// Result of a Nelder-Mead run.
#[derive(Debug, Clone, Copy)]
pub struct NmResult {
    pub point: [f64; 2],
    pub value: f64,
    pub converged: bool,
}

/// Maximize `f` over R^2 with Nelder-Mead starting from `start`.
///
/// `f` may return `-inf` outside its support; the simplex contracts away from
/// such points.
pub fn nelder_mead_max<F: Fn(&[f64; 2]) -> f64>(
    f: F,
    start: [f64; 2],
    step: [f64; 2],
    max_iter: usize,
    tol: f64,
) -> NmResult {
    let g = |p: &[f64; 2]| -f(p);
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut values = [g(&simplex[0]), g(&simplex[1]), g(&simplex[2])];
    let mut converged = false;

    for _ in 0..max_iter {
        // order: values[order[0]] best (smallest), values[order[2]] worst
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, mid, worst) = (order[0], order[1], order[2]);

        let spread = (values[worst] - values[best]).abs();
        let size = (0..2)
            .map(|i| (simplex[worst][i] - simplex[best][i]).abs())
            .fold(0.0, f64::max);
        if spread < tol && size < tol && values[best].is_finite() {
            converged = true;
            break;
        }

        let centroid = [
            0.5 * (simplex[best][0] + simplex[mid][0]),
            0.5 * (simplex[best][1] + simplex[mid][1]),
        ];
        let reflect = |c: &[f64; 2], w: &[f64; 2], alpha: f64| {
            [c[0] + alpha * (c[0] - w[0]), c[1] + alpha * (c[1] - w[1])]
        };

        let xr = reflect(&centroid, &simplex[worst], 1.0);
        let fr = g(&xr);
        if fr < values[best] {
            let xe = reflect(&centroid, &simplex[worst], 2.0);
            let fe = g(&xe);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
        } else if fr < values[mid] {
            simplex[worst] = xr;
            values[worst] = fr;
        } else {
            let (xc, fc) = if fr < values[worst] {
                let x = reflect(&centroid, &simplex[worst], 0.5);
                let v = g(&x);
                (x, v)
            } else {
                let x = [
                    centroid[0] + 0.5 * (simplex[worst][0] - centroid[0]),
                    centroid[1] + 0.5 * (simplex[worst][1] - centroid[1]),
                ];
                let v = g(&x);
                (x, v)
            };
            if fc < values[worst].min(fr) {
                simplex[worst] = xc;
                values[worst] = fc;
            } else {
                // shrink towards best
                for i in 0..3 {
                    if i == best {
                        continue;
                    }
                    for d in 0..2 {
                        simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
                    }
                    values[i] = g(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..3 {
        if values[i] < values[best] {
            best = i;
        }
    }
    NmResult {
        point: simplex[best],
        value: -values[best],
        converged,
    }
}

/// Maximize a 1-d function by golden section search on `[lo, hi]`.
pub fn golden_max_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Find a root of `f` on `[lo, hi]` by bisection; `f(lo)` and `f(hi)` must
/// have opposite signs.
pub fn bisect_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{a}, {b}]: f(lo)={fa}, f(hi)={fb}"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a).abs() <= tol * (1.0 + m.abs()) {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nelder_mead_finds_quadratic_max() {
        let f = |p: &[f64; 2]| -((p[0] - 1.5).powi(2) + 2.0 * (p[1] + 0.5).powi(2));
        let r = nelder_mead_max(f, [0.0, 0.0], [0.5, 0.5], 500, 1e-12);
        assert!(r.converged);
        assert_abs_diff_eq!(r.point[0], 1.5, epsilon = 1e-5);
        assert_abs_diff_eq!(r.point[1], -0.5, epsilon = 1e-5);
    }

    #[test]
    fn nelder_mead_respects_support_boundary() {
        let f = |p: &[f64; 2]| {
            if p[0] <= 0.0 {
                f64::NEG_INFINITY
            } else {
                -(p[0].ln().powi(2)) - p[1].powi(2)
            }
        };
        let r = nelder_mead_max(f, [0.2, 0.3], [0.1, 0.1], 500, 1e-12);
        assert_abs_diff_eq!(r.point[0], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn golden_section_max() {
        let (x, v) = golden_max_1d(|x| -(x - 2.0) * (x - 2.0), 0.0, 5.0, 1e-10);
        assert_abs_diff_eq!(x, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect_root(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(r, std::f64::consts::SQRT_2, epsilon = 1e-9);
    }

    #[test]
    fn bisect_reports_missing_sign_change() {
        assert!(bisect_root(|x| x * x + 1.0, -1.0, 1.0, 1e-10).is_err());
    }
}
