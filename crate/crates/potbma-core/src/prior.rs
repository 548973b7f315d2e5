//! Prior families for the GP parameters (σ_u, ξ) and the exceedance
//! probability p_u, posterior-propriety advisories, and calibration of the
//! truncated-Cauchy scale from expert return-level ratios.
//!
//! Prior densities are stored unnormalized (they are improper in σ_u);
//! normalization over ξ alone is used only for tail-probability reporting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpParams;
use crate::optim::bisect_root;
use crate::quantiles::simpson_tail;

/// Prior family for (σ_u, ξ). All families carry the improper σ_u^(-1) factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Jeffreys prior, support ξ > -1/2.
    Jeffreys,
    /// Flat in ξ over the whole real line.
    Flat,
    /// Maximal data information prior truncated to ξ >= -1.
    Mdi,
    /// MDI(a) generalization: exponential decay rate `a` in ξ, support ξ >= -1.
    MdiA { a: f64 },
    /// Truncated-Cauchy marginal for ξ with scale `A`, support ξ >= -1.
    Cauchy { a_scale: f64 },
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorSpec::MdiA { a } if !(a.is_finite() && a > 0.0) => Err(Error::InvalidParameter(
                format!("MDI(a) requires a > 0, got {a}"),
            )),
            PriorSpec::Cauchy { a_scale } if !(a_scale.is_finite() && a_scale > 0.0) => Err(
                Error::InvalidParameter(format!("Cauchy prior requires A > 0, got {a_scale}")),
            ),
            _ => Ok(()),
        }
    }

    /// Lower support bound for ξ, or `-inf` for the flat prior.
    pub fn shape_lower_bound(&self) -> f64 {
        match self {
            PriorSpec::Jeffreys => -0.5,
            PriorSpec::Flat => f64::NEG_INFINITY,
            PriorSpec::Mdi | PriorSpec::MdiA { .. } | PriorSpec::Cauchy { .. } => -1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PriorSpec::Jeffreys => "jeffreys",
            PriorSpec::Flat => "flat",
            PriorSpec::Mdi => "mdi",
            PriorSpec::MdiA { .. } => "mdi_a",
            PriorSpec::Cauchy { .. } => "cauchy",
        }
    }
}

/// Unnormalized log prior density for (σ_u, ξ); `-inf` outside the family's
/// support.
pub fn log_prior_gp(p: &GpParams, spec: &PriorSpec) -> Result<f64> {
    spec.validate()?;
    if p.scale <= 0.0 {
        return Err(Error::InvalidParameter("scale must be positive".into()));
    }
    let xi = p.shape;
    let base = -p.scale.ln();
    Ok(match *spec {
        PriorSpec::Jeffreys => {
            if xi <= -0.5 {
                f64::NEG_INFINITY
            } else {
                base - (1.0 + xi).ln() - 0.5 * (1.0 + 2.0 * xi).ln()
            }
        }
        PriorSpec::Flat => base,
        PriorSpec::Mdi => {
            if xi < -1.0 {
                f64::NEG_INFINITY
            } else {
                base - (xi + 1.0)
            }
        }
        PriorSpec::MdiA { a } => {
            if xi < -1.0 {
                f64::NEG_INFINITY
            } else {
                base + a.ln() - a * (xi + 1.0)
            }
        }
        PriorSpec::Cauchy { a_scale } => {
            if xi < -1.0 {
                f64::NEG_INFINITY
            } else {
                base - (1.0 + (xi / a_scale).powi(2)).ln()
            }
        }
    })
}

/// Log density of the Jeffreys beta(1/2, 1/2) prior for p_u.
pub fn log_prior_pu(p_u: f64) -> f64 {
    if p_u <= 0.0 || p_u >= 1.0 {
        return f64::NEG_INFINITY;
    }
    // beta(1/2,1/2) density: 1 / (pi * sqrt(p (1-p)))
    -std::f64::consts::PI.ln() - 0.5 * (p_u * (1.0 - p_u)).ln()
}

/// Posterior-propriety advisory for a prior family at a given exceedance
/// count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Advisory {
    Ok,
    Warning(String),
}

impl Advisory {
    pub fn is_ok(&self) -> bool {
        matches!(self, Advisory::Ok)
    }
}

/// Sufficient conditions for posterior propriety: Jeffreys needs at least one
/// excess, the flat prior needs at least three; the bounded-below families are
/// proper for any sample size.
pub fn propriety_check(spec: &PriorSpec, n_exceed: usize) -> Advisory {
    match spec {
        PriorSpec::Jeffreys if n_exceed < 1 => Advisory::Warning(format!(
            "Jeffreys prior needs at least 1 threshold excess for a proper posterior, have {n_exceed}"
        )),
        PriorSpec::Flat if n_exceed < 3 => Advisory::Warning(format!(
            "flat prior needs at least 3 threshold excesses for a proper posterior, have {n_exceed}"
        )),
        _ => Advisory::Ok,
    }
}

/// Normalized marginal prior tail P(ξ > t) by closed form where one exists.
///
/// Returns `None` for the flat prior (not normalizable in ξ).
pub fn shape_tail_prob(spec: &PriorSpec, t: f64) -> Option<f64> {
    match *spec {
        PriorSpec::Flat => None,
        PriorSpec::Mdi => Some(if t < -1.0 { 1.0 } else { (-(t + 1.0)).exp() }),
        PriorSpec::MdiA { a } => Some(if t < -1.0 { 1.0 } else { (-a * (t + 1.0)).exp() }),
        PriorSpec::Cauchy { a_scale } => Some(cauchy_tail(a_scale, t)),
        PriorSpec::Jeffreys => Some(shape_tail_prob_quadrature(&PriorSpec::Jeffreys, t)),
    }
}

/// Tail of a Cauchy(0, A) distribution truncated to ξ >= -1, by arctangent.
pub fn cauchy_tail(a_scale: f64, t: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let t = t.max(-1.0);
    let num = FRAC_PI_2 - (t / a_scale).atan();
    let den = FRAC_PI_2 + (1.0 / a_scale).atan();
    num / den
}

/// Independent quadrature route for the marginal shape tail; used to
/// cross-check the closed forms.
pub fn shape_tail_prob_quadrature(spec: &PriorSpec, t: f64) -> f64 {
    let lo = spec.shape_lower_bound();
    let density = |xi: f64| {
        log_prior_gp(&GpParams { scale: 1.0, shape: xi }, spec)
            .map(f64::exp)
            .unwrap_or(0.0)
    };
    let total = simpson_tail(density, lo, 20_000);
    let upper = simpson_tail(density, t.max(lo), 20_000);
    upper / total
}

/// Expert inputs for the truncated-Cauchy scale calibration: estimated medians
/// of the 1-, 100- and 10000-year maxima, and the target prior tail mass above
/// the implied shape.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationInputs {
    pub m1_hat: f64,
    pub m100_hat: f64,
    pub m10000_hat: f64,
    pub tail_prob_target: f64,
}

impl CalibrationInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.m1_hat < self.m100_hat && self.m100_hat < self.m10000_hat) {
            return Err(Error::InvalidArgument(format!(
                "calibration medians must be strictly increasing: {} < {} < {}",
                self.m1_hat, self.m100_hat, self.m10000_hat
            )));
        }
        if !(0.0 < self.tail_prob_target && self.tail_prob_target < 1.0) {
            return Err(Error::InvalidArgument(
                "tail probability target must lie in (0,1)".into(),
            ));
        }
        Ok(())
    }
}

/// The median ratio R(ξ) = (m_10000 - m_1) / (m_100 - m_1) under GEV stability
/// of N-year maxima; depends on ξ only.
pub fn median_ratio(xi: f64) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    if xi.abs() < 1e-8 {
        // limit: [ln N2 - ln N0] / [ln N1 - ln N0] with N0 = 1
        return 10_000f64.ln() / 100f64.ln();
    }
    let pow = |n: f64| ((n / ln2).ln() * xi).exp();
    (pow(10_000.0) - pow(1.0)) / (pow(100.0) - pow(1.0))
}

/// Calibration result: the shape solving the median-ratio equation and the
/// Cauchy scale putting the target tail mass above it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CauchyCalibration {
    pub xi_star: f64,
    pub a_scale: f64,
}

/// Solve R(ξ) for ξ_star from the expert medians, then solve for the
/// truncated-Cauchy scale A with P(ξ > ξ_star) equal to the target.
pub fn calibrate_cauchy_scale(c: &CalibrationInputs) -> Result<CauchyCalibration> {
    c.validate()?;
    let target_ratio = (c.m10000_hat - c.m1_hat) / (c.m100_hat - c.m1_hat);
    let xi_star = bisect_root(|xi| median_ratio(xi) - target_ratio, -0.9, 2.0, 1e-10)
        .map_err(|e| Error::RootFinding(format!("median-ratio equation: {e}")))?;
    let a_scale = bisect_root(
        |a| cauchy_tail(a, xi_star) - c.tail_prob_target,
        1e-6,
        50.0,
        1e-10,
    )
    .map_err(|e| Error::RootFinding(format!("Cauchy tail equation: {e}")))?;
    Ok(CauchyCalibration { xi_star, a_scale })
}
