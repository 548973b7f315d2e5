//! Interpolated (type-7) sample quantiles and small numeric helpers shared
//! across modules.

/// Type-7 sample quantile of `sorted` (ascending) at probability `q` in [0,1].
pub fn sample_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&q), "probability out of range: {q}");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// log(sum(exp(x_i))) computed stably; returns `-inf` for an empty slice or
/// all-`-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Composite Simpson quadrature of `f` on `[a, b]` with `n` panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let x = a + i as f64 * h;
        acc += h / 6.0 * (f(x) + 4.0 * f(x + 0.5 * h) + f(x + h));
    }
    acc
}

/// Quadrature of `f` on `(a, inf)` via the substitution x = a + w/(1-w).
pub fn simpson_tail<F: Fn(f64) -> f64>(f: F, a: f64, n: usize) -> f64 {
    simpson(
        |w| {
            let one_minus = 1.0 - w;
            f(a + w / one_minus) / (one_minus * one_minus)
        },
        0.0,
        1.0 - 1e-12,
        n,
    )
}
