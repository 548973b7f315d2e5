//! Predictive distributions of N-year maxima, predictive return levels, and
//! their Bayesian-model-averaged versions across a threshold grid.
//!
//! The predictive CDF of the N-year maximum M_N averages F(z; θ)^(n_y N)
//! over posterior draws; return levels invert the one-year version at
//! 1 - 1/N by bracketed bisection.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};
use crate::gp::{bgp_marginal_survival, BgpParams, Threshold};
use crate::posterior::PosteriorSample;
use crate::quantiles::sample_quantile;

/// A prediction horizon: N years at a mean of `n_y` observations per year.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Horizon {
    pub years: f64,
    pub obs_per_year: f64,
}

impl Horizon {
    pub fn new(years: f64, obs_per_year: f64) -> Result<Self> {
        if !(years > 0.0 && obs_per_year > 0.0 && years * obs_per_year >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon needs N > 0, n_y > 0 and N*n_y >= 1, got N={years}, n_y={obs_per_year}"
            )));
        }
        Ok(Self { years, obs_per_year })
    }

    /// Expected number of observations over the horizon.
    pub fn n_obs(&self) -> f64 {
        self.years * self.obs_per_year
    }
}

/// Grid of (z, P(M_N <= z)) values for one horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictiveCurve {
    pub horizon: Horizon,
    pub grid: Vec<(f64, f64)>,
    /// threshold quantile label, or "averaged"
    pub source: String,
}

/// log F(z; θ)^(n_y N) for a single parameter value, `-inf` when F = 0.
fn log_pow_cdf(z: f64, u_level: f64, th: &BgpParams, n_obs: f64) -> f64 {
    let surv = bgp_marginal_survival(z, u_level, th).unwrap_or(1.0);
    if surv >= 1.0 {
        return f64::NEG_INFINITY;
    }
    n_obs * (-surv).ln_1p()
}

/// Predictive CDF of M_N at `z`: the posterior-sample average of
/// F(z; θ_j)^(n_y N). Powers underflow cleanly to 0.
pub fn pred_cdf_mn(z: f64, h: &Horizon, u: &Threshold, s: &PosteriorSample) -> Result<f64> {
    if z <= u.level {
        return Err(Error::InvalidArgument(format!(
            "predictive CDF requested at z={z} not above threshold {}",
            u.level
        )));
    }
    let n_obs = h.n_obs();
    let m = s.draws.len() as f64;
    Ok(s.draws
        .iter()
        .map(|th| log_pow_cdf(z, u.level, th, n_obs).exp())
        .sum::<f64>()
        / m)
}

/// Estimative N-year return level for a fixed θ: the closed-form solution of
/// F(z; θ)^(n_y) = 1 - 1/N.
pub fn estimative_return_level(h: &Horizon, u: &Threshold, th: &BgpParams) -> Result<f64> {
    if h.years <= 1.0 {
        return Err(Error::InvalidArgument("return level needs N > 1".into()));
    }
    let f_target = (1.0 - 1.0 / h.years).powf(1.0 / h.obs_per_year);
    let surv_target = 1.0 - f_target;
    if surv_target >= th.p_exceed {
        return Err(Error::InvalidArgument(format!(
            "target non-exceedance {f_target} is below the threshold mass 1 - p_u"
        )));
    }
    let g_q = 1.0 - surv_target / th.p_exceed;
    Ok(u.level + crate::gp::gp_quantile(g_q, &th.gp)?)
}

/// Shared solver: find z with `cdf(z) = target` by doubling the bracket from
/// `lo` and bisecting to 1e-8 relative tolerance. A plateau below the target
/// is reported as a no-finite-root outcome with the achieved supremum.
pub fn solve_cdf_level<F: Fn(f64) -> Result<f64>>(
    cdf: F,
    target: f64,
    lo: f64,
    initial_width: f64,
    cap: f64,
) -> Result<f64> {
    let mut width = initial_width.max(1e-8);
    let lo_eps = lo + 1e-12 * (1.0 + lo.abs());
    let mut hi = lo + width;
    let mut value_hi = cdf(hi)?;
    let mut guard = 0;
    while value_hi < target {
        width *= 2.0;
        hi = lo + width;
        guard += 1;
        if hi - lo > cap || guard > 80 {
            // probe far out for the achieved supremum
            let sup = cdf(lo + cap).unwrap_or(value_hi);
            return Err(Error::NoFiniteRoot {
                target,
                supremum: sup.max(value_hi),
            });
        }
        value_hi = cdf(hi)?;
    }
    // bisection, relative tolerance on z
    let (mut a, mut b) = (lo_eps, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a) <= 1e-8 * (1.0 + mid.abs()) {
            return Ok(mid);
        }
        if cdf(mid)? < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Initial bracket width from the posterior spread, following the
/// σ_v / max(|ξ|, 0.05) scaling.
fn bracket_width(s: &PosteriorSample, v: f64) -> f64 {
    let mut sigmas: Vec<f64> = s
        .draws
        .iter()
        .map(|d| d.gp.scale + d.gp.shape * (v - s.threshold.level).max(0.0))
        .filter(|x| x.is_finite() && *x > 0.0)
        .collect();
    if sigmas.is_empty() {
        return 1.0;
    }
    sigmas.sort_by(f64::total_cmp);
    let med_sigma = sample_quantile(&sigmas, 0.5);
    let mut shapes: Vec<f64> = s.draws.iter().map(|d| d.gp.shape).collect();
    shapes.sort_by(f64::total_cmp);
    let med_shape = sample_quantile(&shapes, 0.5).abs().max(0.05);
    10.0 * med_sigma / med_shape
}

const BRACKET_CAP: f64 = 1e8;

/// N-year predictive return level: the root of the one-year predictive CDF at
/// 1 - 1/N.
pub fn predictive_return_level(h: &Horizon, u: &Threshold, s: &PosteriorSample) -> Result<f64> {
    if h.years <= 1.0 {
        return Err(Error::InvalidArgument("return level needs N > 1".into()));
    }
    let one_year = Horizon::new(1.0, h.obs_per_year)?;
    let target = 1.0 - 1.0 / h.years;
    solve_cdf_level(
        |z| pred_cdf_mn(z, &one_year, u, s),
        target,
        u.level,
        bracket_width(s, u.level),
        BRACKET_CAP,
    )
}

/// Probabilities that the estimative N-year return level is exceeded
/// 0..=4 times over N years, from the binomial count of exceedances.
pub fn exceedance_count_probs(
    h: &Horizon,
    u: &Threshold,
    th: &BgpParams,
    z: f64,
) -> Result<[f64; 5]> {
    let n = h.n_obs().round();
    if n < 1.0 || n > 1e9 {
        return Err(Error::InvalidArgument(format!(
            "integer trial count out of range: {n}"
        )));
    }
    let p_exc = bgp_marginal_survival(z, u.level, th)?;
    let bin = Binomial::new(p_exc, n as u64)
        .map_err(|e| Error::InvalidArgument(format!("binomial: {e}")))?;
    let mut out = [0.0; 5];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = bin.pmf(k as u64);
    }
    Ok(out)
}

fn check_grid_lengths(samples: &[PosteriorSample], weights: &[f64]) -> Result<()> {
    if samples.len() != weights.len() || samples.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "samples ({}) and weights ({}) must have equal nonzero length",
            samples.len(),
            weights.len()
        )));
    }
    Ok(())
}

/// Threshold-averaged predictive CDF of M_N: the weight-mixed combination of
/// single-threshold predictive CDFs. `z` must exceed every threshold.
pub fn averaged_pred_cdf(
    z: f64,
    h: &Horizon,
    samples: &[PosteriorSample],
    weights: &[f64],
) -> Result<f64> {
    check_grid_lengths(samples, weights)?;
    let mut acc = 0.0;
    for (s, w) in samples.iter().zip(weights) {
        acc += w * pred_cdf_mn(z, h, &s.threshold, s)?;
    }
    Ok(acc)
}

/// Threshold-averaged predictive return level.
pub fn averaged_return_level(
    h: &Horizon,
    samples: &[PosteriorSample],
    weights: &[f64],
) -> Result<f64> {
    check_grid_lengths(samples, weights)?;
    if h.years <= 1.0 {
        return Err(Error::InvalidArgument("return level needs N > 1".into()));
    }
    let one_year = Horizon::new(1.0, h.obs_per_year)?;
    let target = 1.0 - 1.0 / h.years;
    let v = samples
        .iter()
        .map(|s| s.threshold.level)
        .fold(f64::NEG_INFINITY, f64::max);
    let width = samples
        .iter()
        .map(|s| bracket_width(s, v))
        .fold(0.0, f64::max);
    solve_cdf_level(
        |z| averaged_pred_cdf(z, &one_year, samples, weights),
        target,
        v,
        width,
        BRACKET_CAP,
    )
}

/// Median of M_N for a single-threshold posterior.
pub fn median_mn(h: &Horizon, u: &Threshold, s: &PosteriorSample) -> Result<f64> {
    solve_cdf_level(
        |z| pred_cdf_mn(z, h, u, s),
        0.5,
        u.level,
        bracket_width(s, u.level),
        BRACKET_CAP,
    )
}

/// Median of M_N for the threshold-averaged predictive distribution.
pub fn averaged_median_mn(
    h: &Horizon,
    samples: &[PosteriorSample],
    weights: &[f64],
) -> Result<f64> {
    check_grid_lengths(samples, weights)?;
    let v = samples
        .iter()
        .map(|s| s.threshold.level)
        .fold(f64::NEG_INFINITY, f64::max);
    let width = samples
        .iter()
        .map(|s| bracket_width(s, v))
        .fold(0.0, f64::max);
    solve_cdf_level(
        |z| averaged_pred_cdf(z, h, samples, weights),
        0.5,
        v,
        width,
        BRACKET_CAP,
    )
}

/// Tabulate a predictive curve on 200 log-spaced z values from `v` up to the
/// 0.9999 quantile of the given CDF.
pub fn tabulate_curve<F: Fn(f64) -> Result<f64>>(
    cdf: F,
    h: &Horizon,
    v: f64,
    initial_width: f64,
    source: &str,
) -> Result<PredictiveCurve> {
    let z_hi = match solve_cdf_level(&cdf, 0.9999, v, initial_width, BRACKET_CAP) {
        Ok(z) => z,
        // heavy-tail plateau: fall back to the bracket cap
        Err(Error::NoFiniteRoot { .. }) => v + BRACKET_CAP,
        Err(e) => return Err(e),
    };
    let lo = v + 1e-6 * (1.0 + v.abs());
    let n_pts = 200;
    let log_lo = lo.max(v + 1e-9).ln_1p();
    let log_hi = (z_hi).ln_1p();
    let mut grid = Vec::with_capacity(n_pts);
    for i in 0..n_pts {
        let t = i as f64 / (n_pts - 1) as f64;
        let z = (log_lo + t * (log_hi - log_lo)).exp_m1();
        let z = z.max(lo);
        grid.push((z, cdf(z)?));
    }
    Ok(PredictiveCurve {
        horizon: *h,
        grid,
        source: source.to_string(),
    })
}
