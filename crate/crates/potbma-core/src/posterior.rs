//! Joint posterior for θ = (p_u, σ_u, ξ): conjugate beta for p_u and
//! ratio-of-uniforms rejection sampling for the GP pair.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{BgpParams, GpParams, Threshold};
use crate::mle::gp_loglik;
use crate::prior::{log_prior_gp, PriorSpec};
use crate::quantiles::sample_quantile;
use crate::rou;
use rand::SeedableRng;

/// Distance from the ξ support boundary at which a located mode triggers a
/// bimodality warning (Jeffreys posteriors can spike at ξ = -1/2).
const BOUNDARY_EPS: f64 = 1e-3;

/// Joint posterior draws at one training threshold, with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub draws: Vec<BgpParams>,
    pub mode: GpParams,
    pub acceptance_rate: f64,
    pub prior: PriorSpec,
    pub threshold: Threshold,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl PosteriorSample {
    pub fn m(&self) -> usize {
        self.draws.len()
    }
}

/// Unnormalized log posterior for the GP pair given excesses:
/// GP log likelihood plus the log prior. The p_u factor separates and is
/// handled conjugately.
pub fn log_posterior_gp(p: &GpParams, excesses: &[f64], spec: &PriorSpec) -> f64 {
    let Ok(lp) = log_prior_gp(p, spec) else {
        return f64::NEG_INFINITY;
    };
    if !lp.is_finite() {
        return f64::NEG_INFINITY;
    }
    lp + gp_loglik(excesses, p)
}

/// Draw `m` values from the conjugate beta(n_u + 1/2, n - n_u + 1/2)
/// posterior for p_u.
pub fn sample_pu<R: Rng + ?Sized>(n: usize, n_exceed: usize, m: usize, rng: &mut R) -> Vec<f64> {
    assert!(n_exceed <= n, "n_exceed {n_exceed} exceeds n {n}");
    let beta = Beta::new(n_exceed as f64 + 0.5, (n - n_exceed) as f64 + 0.5)
        .expect("valid beta parameters");
    (0..m).map(|_| beta.sample(rng)).collect()
}

/// GP-part posterior draws with sampler diagnostics.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    pub draws: Vec<GpParams>,
    pub mode: GpParams,
    pub acceptance_rate: f64,
    pub warnings: Vec<String>,
}

/// Sample the GP-parameter posterior by generalized ratio-of-uniforms with
/// mode relocation and r = 1/2.
pub fn sample_gp_posterior<R: Rng + ?Sized>(
    excesses: &[f64],
    spec: &PriorSpec,
    m: usize,
    rng: &mut R,
) -> Result<GpPosterior> {
    spec.validate()?;
    let target = |p: &[f64; 2]| {
        if p[0] <= 0.0 {
            f64::NEG_INFINITY
        } else {
            log_posterior_gp(
                &GpParams {
                    scale: p[0],
                    shape: p[1],
                },
                excesses,
                spec,
            )
        }
    };

    let scale_guess = if excesses.is_empty() {
        1.0
    } else {
        (excesses.iter().sum::<f64>() / excesses.len() as f64).max(1e-8)
    };
    let xi_floor = spec.shape_lower_bound();
    let xi_start = if xi_floor.is_finite() {
        (xi_floor + 0.4).max(0.0)
    } else {
        0.0
    };
    let starts = [
        [scale_guess, xi_start],
        [scale_guess * 2.0, xi_start + 0.3],
        [scale_guess * 0.5, (xi_start - 0.3).max(xi_floor + 0.05)],
    ];

    let (mode_pt, lmax) = rou::find_mode(&target, &starts)
        .map_err(|e| Error::Sampler(format!("posterior mode finding failed: {e}")))?;
    let mut warnings = Vec::new();
    if xi_floor.is_finite() && (mode_pt[1] - xi_floor).abs() < BOUNDARY_EPS {
        warnings.push(format!(
            "posterior mode for the shape lies within {BOUNDARY_EPS} of the prior support \
             boundary {xi_floor}; the posterior may be bimodal and sampling unreliable"
        ));
    }

    let rou_box = rou::compute_box(&target, mode_pt, lmax)
        .map_err(|e| Error::Sampler(format!("bounding-box optimization failed: {e}")))?;
    let s = rou::sample_with_box(&target, &rou_box, m, rng)?;

    let draws = s
        .draws
        .into_iter()
        .map(|p| GpParams {
            scale: p[0],
            shape: p[1],
        })
        .collect();
    Ok(GpPosterior {
        draws,
        mode: GpParams {
            scale: mode_pt[0],
            shape: mode_pt[1],
        },
        acceptance_rate: s.acceptance_rate,
        warnings,
    })
}

/// Sample the full BGP posterior at a threshold: conjugate p_u draws paired
/// with ratio-of-uniforms GP draws. Deterministic given `seed`.
pub fn sample_bgp_posterior(
    n: usize,
    threshold: &Threshold,
    excesses: &[f64],
    prior: &PriorSpec,
    m: usize,
    seed: u64,
) -> Result<PosteriorSample> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gp = sample_gp_posterior(excesses, prior, m, &mut rng)?;
    let pus = sample_pu(n, threshold.n_exceed, m, &mut rng);
    let draws = pus
        .into_iter()
        .zip(gp.draws)
        .map(|(p_u, gp)| BgpParams { p_exceed: p_u, gp })
        .collect();
    Ok(PosteriorSample {
        draws,
        mode: gp.mode,
        acceptance_rate: gp.acceptance_rate,
        prior: *prior,
        threshold: *threshold,
        seed,
        warnings: gp.warnings,
    })
}

/// Moments, quantiles, and shape tail probabilities of a posterior sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: BgpStats,
    pub sd: BgpStats,
    pub quantiles: Vec<(f64, BgpStats)>,
    pub prob_shape_positive: f64,
    pub prob_shape_above_half: f64,
    pub prob_shape_above_one: f64,
}

/// Per-component statistic for (p_u, σ_u, ξ).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BgpStats {
    pub p_exceed: f64,
    pub scale: f64,
    pub shape: f64,
}

pub fn posterior_summaries(s: &PosteriorSample) -> Result<PosteriorSummary> {
    if s.m() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 draws to summarize".into(),
        ));
    }
    let m = s.m() as f64;
    let col = |f: &dyn Fn(&BgpParams) -> f64| -> Vec<f64> { s.draws.iter().map(f).collect() };
    let pu = col(&|d| d.p_exceed);
    let sc = col(&|d| d.gp.scale);
    let sh = col(&|d| d.gp.shape);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / m;
    let sd = |xs: &[f64], mu: f64| (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let (mp, ms, mh) = (mean(&pu), mean(&sc), mean(&sh));

    let mut sorted = (pu.clone(), sc.clone(), sh.clone());
    sorted.0.sort_by(f64::total_cmp);
    sorted.1.sort_by(f64::total_cmp);
    sorted.2.sort_by(f64::total_cmp);
    let quantiles = [0.025, 0.25, 0.5, 0.75, 0.975]
        .into_iter()
        .map(|q| {
            (
                q,
                BgpStats {
                    p_exceed: sample_quantile(&sorted.0, q),
                    scale: sample_quantile(&sorted.1, q),
                    shape: sample_quantile(&sorted.2, q),
                },
            )
        })
        .collect();

    let frac_above = |t: f64| sh.iter().filter(|&&x| x > t).count() as f64 / m;
    Ok(PosteriorSummary {
        mean: BgpStats {
            p_exceed: mp,
            scale: ms,
            shape: mh,
        },
        sd: BgpStats {
            p_exceed: sd(&pu, mp),
            scale: sd(&sc, ms),
            shape: sd(&sh, mh),
        },
        quantiles,
        prob_shape_positive: frac_above(0.0),
        prob_shape_above_half: frac_above(0.5),
        prob_shape_above_one: frac_above(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::gp_sample;
    use approx::assert_abs_diff_eq;

    #[test]
    fn log_posterior_reduces_to_prior_on_empty_data() {
        let p = GpParams { scale: 1.5, shape: 0.2 };
        let spec = PriorSpec::Mdi;
        assert_abs_diff_eq!(
            log_posterior_gp(&p, &[], &spec),
            log_prior_gp(&p, &spec).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn flat_prior_posterior_minus_prior_is_loglik() {
        let p = GpParams { scale: 1.5, shape: 0.2 };
        let excesses = [0.3, 1.2, 2.5];
        let diff = log_posterior_gp(&p, &excesses, &PriorSpec::Flat)
            - log_prior_gp(&p, &PriorSpec::Flat).unwrap();
        assert_abs_diff_eq!(diff, gp_loglik(&excesses, &p), epsilon = 1e-12);
    }

    #[test]
    fn flat_posterior_mode_approaches_mle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let excesses = gp_sample(10_000, &GpParams { scale: 1.0, shape: 0.0 }, &mut rng);
        let fit = crate::mle::fit_gp_mle(&excesses).unwrap();
        let target = |p: &[f64; 2]| {
            if p[0] <= 0.0 {
                f64::NEG_INFINITY
            } else {
                log_posterior_gp(&GpParams { scale: p[0], shape: p[1] }, &excesses, &PriorSpec::Flat)
            }
        };
        let (mode, _) = rou::find_mode(&target, &[[1.0, 0.0]]).unwrap();
        // flat prior in xi but sigma^{-1} factor: mode within O(1/n) of the MLE
        assert!((mode[0] - fit.estimate.scale).abs() < 0.01);
        assert!((mode[1] - fit.estimate.shape).abs() < 0.01);
    }

    #[test]
    fn pu_posterior_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = sample_pu(10, 3, 100_000, &mut rng);
        let m = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / m;
        // beta(3.5, 7.5): mean 3.5/11, var ab/((a+b)^2(a+b+1))
        let (a, b): (f64, f64) = (3.5, 7.5);
        let true_mean = a / (a + b);
        let true_sd = (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt();
        assert!((mean - true_mean).abs() < 4.0 * true_sd / m.sqrt());
    }

    #[test]
    fn pu_posterior_symmetry() {
        let mut rng_a = ChaCha8Rng::seed_from_u64(4);
        let lo = sample_pu(10, 0, 50_000, &mut rng_a);
        let mut rng_b = ChaCha8Rng::seed_from_u64(4);
        let hi = sample_pu(10, 10, 50_000, &mut rng_b);
        // n_u = n mirrors n_u = 0 under p -> 1-p; compare medians
        let med = |xs: &[f64]| {
            let mut v = xs.to_vec();
            v.sort_by(f64::total_cmp);
            sample_quantile(&v, 0.5)
        };
        assert!((med(&lo) - (1.0 - med(&hi))).abs() < 0.01);
        assert!(lo.iter().all(|&p| p < 0.5 || p >= 0.0));
    }

    #[test]
    fn gp_posterior_large_sample_behaviour() {
        let mut data_rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let excesses = gp_sample(n, &GpParams { scale: 1.0, shape: 0.0 }, &mut data_rng);
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let post = sample_gp_posterior(&excesses, &PriorSpec::Flat, 2_000, &mut rng).unwrap();
        let m = post.draws.len() as f64;
        let mean_shape = post.draws.iter().map(|d| d.shape).sum::<f64>() / m;
        assert!(mean_shape.abs() < 0.05, "posterior mean shape = {mean_shape}");
        let sd_shape = (post
            .draws
            .iter()
            .map(|d| (d.shape - mean_shape).powi(2))
            .sum::<f64>()
            / (m - 1.0))
            .sqrt();
        // asymptotic sd ~ (1+xi) / sqrt(n) = 0.01 at xi = 0
        assert!(sd_shape > 0.005 && sd_shape < 0.02, "posterior sd = {sd_shape}");

        // every draw respects the support constraint xi > -sigma / max(excess)
        let max_exc = excesses.iter().copied().fold(0.0, f64::max);
        for d in &post.draws {
            assert!(d.shape > -d.scale / max_exc);
        }
    }

    #[test]
    fn every_draw_has_finite_log_posterior() {
        let mut data_rng = ChaCha8Rng::seed_from_u64(23);
        let excesses = gp_sample(80, &GpParams { scale: 2.0, shape: 0.2 }, &mut data_rng);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let post = sample_gp_posterior(&excesses, &PriorSpec::Mdi, 1_000, &mut rng).unwrap();
        for d in &post.draws {
            assert!(log_posterior_gp(d, &excesses, &PriorSpec::Mdi).is_finite());
        }
        assert!(post.acceptance_rate > 0.0 && post.acceptance_rate <= 1.0);
    }

    #[test]
    fn acceptance_rate_scale_invariant() {
        let mut data_rng = ChaCha8Rng::seed_from_u64(31);
        let excesses = gp_sample(200, &GpParams { scale: 1.0, shape: 0.1 }, &mut data_rng);
        let scaled: Vec<f64> = excesses.iter().map(|y| 100.0 * y).collect();
        let mut rng_a = ChaCha8Rng::seed_from_u64(32);
        let mut rng_b = ChaCha8Rng::seed_from_u64(32);
        let a = sample_gp_posterior(&excesses, &PriorSpec::Mdi, 2_000, &mut rng_a).unwrap();
        let b = sample_gp_posterior(&scaled, &PriorSpec::Mdi, 2_000, &mut rng_b).unwrap();
        assert!((a.acceptance_rate - b.acceptance_rate).abs() < 0.02);
        // matched seeds: scale draws multiply by c, shape draws unchanged in
        // distribution; compare quantiles
        let q = |draws: &[GpParams], f: &dyn Fn(&GpParams) -> f64, p: f64| {
            let mut v: Vec<f64> = draws.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            sample_quantile(&v, p)
        };
        for p in [0.25, 0.5, 0.75] {
            let ra = q(&a.draws, &|d| d.scale, p);
            let rb = q(&b.draws, &|d| d.scale, p);
            assert!((rb / ra - 100.0).abs() < 2.0, "scale quantile ratio {}", rb / ra);
            let sa = q(&a.draws, &|d| d.shape, p);
            let sb = q(&b.draws, &|d| d.shape, p);
            assert!((sa - sb).abs() < 0.05);
        }
    }

    #[test]
    fn summaries_on_constant_draws() {
        let th = Threshold { level: 0.0, quantile_prob: 0.5, n_exceed: 5 };
        let d = BgpParams { p_exceed: 0.5, gp: GpParams { scale: 1.0, shape: 0.1 } };
        let s = PosteriorSample {
            draws: vec![d; 10],
            mode: d.gp,
            acceptance_rate: 1.0,
            prior: PriorSpec::Mdi,
            threshold: th,
            seed: 0,
            warnings: vec![],
        };
        let summary = posterior_summaries(&s).unwrap();
        assert_abs_diff_eq!(summary.sd.shape, 0.0);
        assert_abs_diff_eq!(summary.mean.shape, 0.1);
        assert_eq!(summary.prob_shape_positive, 1.0);
        assert_eq!(summary.prob_shape_above_half, 0.0);
        let median = summary.quantiles.iter().find(|(q, _)| *q == 0.5).unwrap().1;
        assert!(median.shape >= 0.1 && median.shape <= 0.1);
    }
}
