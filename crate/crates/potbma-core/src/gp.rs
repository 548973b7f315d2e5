//! Generalized Pareto and binomial-GP distribution mathematics.
//!
//! All likelihood work is done in log space. The shape parameter switches to
//! the exponential-limit branch when `|shape| < SHAPE_EPS`, using
//! `ln_1p`/`exp_m1` forms so the two branches agree to high relative accuracy
//! at the switch point.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape values closer to zero than this use the exponential-limit forms.
pub const SHAPE_EPS: f64 = 1e-6;

/// GP scale-shape pair (σ_u, ξ) for excesses of a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub scale: f64,
    pub shape: f64,
}

impl GpParams {
    pub fn new(scale: f64, shape: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "GP scale must be positive and finite, got {scale}"
            )));
        }
        if !shape.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "GP shape must be finite, got {shape}"
            )));
        }
        Ok(Self { scale, shape })
    }

    /// Upper endpoint of the excess distribution: `-scale/shape` when
    /// `shape < 0`, infinite otherwise.
    pub fn upper_endpoint(&self) -> f64 {
        if self.shape < 0.0 {
            -self.scale / self.shape
        } else {
            f64::INFINITY
        }
    }
}

/// BGP parameter triple θ = (p_u, σ_u, ξ): exceedance probability plus the GP
/// model for excess sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BgpParams {
    pub p_exceed: f64,
    pub gp: GpParams,
}

impl BgpParams {
    pub fn new(p_exceed: f64, gp: GpParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_exceed) {
            return Err(Error::InvalidParameter(format!(
                "exceedance probability must lie in [0,1], got {p_exceed}"
            )));
        }
        Ok(Self { p_exceed, gp })
    }
}

/// A threshold with its sample-quantile level and exceedance count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub level: f64,
    pub quantile_prob: f64,
    pub n_exceed: usize,
}

impl Threshold {
    /// Build a threshold from a level, counting data strictly above it.
    pub fn from_level(level: f64, quantile_prob: f64, data: &[f64]) -> Self {
        let n_exceed = data.iter().filter(|&&x| x > level).count();
        Self {
            level,
            quantile_prob,
            n_exceed,
        }
    }

    /// Excesses of the threshold, in data order. Ties with the threshold count
    /// as non-exceedances.
    pub fn excesses(&self, data: &[f64]) -> Vec<f64> {
        data.iter()
            .filter(|&&x| x > self.level)
            .map(|&x| x - self.level)
            .collect()
    }
}

fn check_excess(y: f64) -> Result<()> {
    if !y.is_finite() || y < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "excess must be finite and nonnegative, got {y}"
        )));
    }
    Ok(())
}

/// Log density of a GP(σ, ξ) excess at `y >= 0`.
///
/// Returns `-inf` beyond the upper endpoint when ξ < 0.
pub fn gp_logpdf(y: f64, p: &GpParams) -> Result<f64> {
    check_excess(y)?;
    let (sigma, xi) = (p.scale, p.shape);
    if xi.abs() < SHAPE_EPS {
        return Ok(-sigma.ln() - y / sigma);
    }
    let t = xi * y / sigma;
    if 1.0 + t <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(-sigma.ln() - (1.0 + 1.0 / xi) * t.ln_1p())
}

/// GP(σ, ξ) distribution function at `y >= 0`, clamped to 1 beyond a finite
/// endpoint.
pub fn gp_cdf(y: f64, p: &GpParams) -> Result<f64> {
    check_excess(y)?;
    Ok(1.0 - gp_survival(y, p)?)
}

/// GP survival function 1 - G(y); kept separate because the predictive CDF
/// needs it with full relative accuracy near 1.
pub fn gp_survival(y: f64, p: &GpParams) -> Result<f64> {
    check_excess(y)?;
    let (sigma, xi) = (p.scale, p.shape);
    if xi.abs() < SHAPE_EPS {
        return Ok((-y / sigma).exp());
    }
    let t = xi * y / sigma;
    if 1.0 + t <= 0.0 {
        // only reachable for xi < 0, beyond the endpoint
        return Ok(0.0);
    }
    Ok((-t.ln_1p() / xi).exp())
}

/// GP quantile function, the inverse of [`gp_cdf`].
pub fn gp_quantile(q: f64, p: &GpParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "quantile probability must lie in [0,1], got {q}"
        )));
    }
    let (sigma, xi) = (p.scale, p.shape);
    if q == 1.0 {
        if xi < 0.0 {
            return Ok(p.upper_endpoint());
        }
        return Err(Error::InvalidArgument(
            "quantile 1 is infinite for shape >= 0".into(),
        ));
    }
    if xi.abs() < SHAPE_EPS {
        return Ok(-sigma * (1.0 - q).ln());
    }
    // sigma * ((1-q)^(-xi) - 1) / xi
    Ok(sigma * (-xi * (1.0 - q).ln()).exp_m1() / xi)
}

/// Draw `n` GP excesses by inversion; deterministic given the RNG state.
pub fn gp_sample<R: Rng + ?Sized>(n: usize, p: &GpParams, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(0.0..1.0);
            gp_quantile(u, p).expect("u in [0,1)")
        })
        .collect()
}

/// Log of the per-observation BGP density f_u(x | θ): mass `1 - p_u` below the
/// threshold, `p_u * g(x - u)` above it.
pub fn bgp_log_obs_density(x: f64, u: &Threshold, th: &BgpParams) -> f64 {
    if x <= u.level {
        (1.0 - th.p_exceed).ln()
    } else {
        th.p_exceed.ln() + gp_logpdf(x - u.level, &th.gp).unwrap_or(f64::NEG_INFINITY)
    }
}

/// BGP log likelihood of a dataset; depends on below-threshold observations
/// only through their count.
pub fn bgp_loglik(data: &[f64], u: &Threshold, th: &BgpParams) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    Ok(data
        .iter()
        .map(|&x| bgp_log_obs_density(x, u, th))
        .sum())
}

/// Re-express a BGP model at threshold `u` as the implied BGP model at a
/// higher threshold `v`: σ_v = σ_u + ξ(v-u) and p_v = p_u (1 + ξ(v-u)/σ_u)^(-1/ξ).
///
/// When the endpoint lies below `v` the implied exceedance probability is 0
/// and the returned GP part is unused (kept at the `u`-threshold values).
pub fn implied_at_threshold(th: &BgpParams, u: f64, v: f64) -> Result<BgpParams> {
    if v < u {
        return Err(Error::InvalidArgument(format!(
            "validation threshold {v} below training threshold {u}"
        )));
    }
    let delta = v - u;
    if delta == 0.0 {
        return Ok(*th);
    }
    let (sigma, xi) = (th.gp.scale, th.gp.shape);
    if xi.abs() < SHAPE_EPS {
        let p_v = th.p_exceed * (-delta / sigma).exp();
        return BgpParams::new(p_v, GpParams::new(sigma + xi * delta, xi)?);
    }
    let t = xi * delta / sigma;
    if 1.0 + t <= 0.0 {
        // excesses of v are impossible under this parameter value
        return Ok(BgpParams {
            p_exceed: 0.0,
            gp: th.gp,
        });
    }
    let p_v = th.p_exceed * (-t.ln_1p() / xi).exp();
    BgpParams::new(p_v, GpParams::new(sigma + xi * delta, xi)?)
}

/// Marginal BGP distribution function F(z; θ) = 1 - p_u (1 + ξ(z-u)/σ_u)^(-1/ξ)
/// for `z > u`.
pub fn bgp_marginal_cdf(z: f64, u: &Threshold, th: &BgpParams) -> Result<f64> {
    Ok(1.0 - bgp_marginal_survival(z, u.level, th)?)
}

/// Survival form 1 - F(z; θ) = p_u * (1 - G(z - u)); shared with the
/// predictive-CDF code which needs log(F) accurately.
pub fn bgp_marginal_survival(z: f64, u_level: f64, th: &BgpParams) -> Result<f64> {
    if z <= u_level {
        return Err(Error::InvalidArgument(format!(
            "marginal CDF requested at z={z} not above threshold {u_level}"
        )));
    }
    Ok(th.p_exceed * gp_survival(z - u_level, &th.gp)?)
}
