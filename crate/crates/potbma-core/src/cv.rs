//! Leave-one-out cross-validation predictive densities by importance
//! sampling, the per-threshold performance measure, and threshold weights.
//!
//! For each training threshold the full-data posterior sample serves as the
//! importance proposal for all folds except those that remove a sample
//! maximum; those folds use a separate posterior fitted without the left-out
//! point, because the full-data posterior support does not contain it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{bgp_log_obs_density, implied_at_threshold, BgpParams, Threshold};
use crate::posterior::{sample_bgp_posterior, PosteriorSample};
use crate::prior::PriorSpec;
use crate::quantiles::{log_sum_exp, sample_quantile};
use crate::seed;

/// Folds with importance-sampling effective sample size below this fraction
/// of m are flagged as unreliable.
const ESS_FLOOR_FRAC: f64 = 0.05;

/// Cross-validation configuration: training thresholds as sample-quantile
/// levels (the last doubles as the validation threshold), posterior sample
/// size, prior, and the prior over thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvConfig {
    pub training_quantiles: Vec<f64>,
    pub m: usize,
    pub prior: PriorSpec,
    /// defaults to discrete uniform 1/k
    pub threshold_prior: Option<Vec<f64>>,
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.training_quantiles.is_empty() {
            return Err(Error::InvalidArgument("empty threshold grid".into()));
        }
        if self
            .training_quantiles
            .windows(2)
            .any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidArgument(
                "training quantiles must be strictly increasing".into(),
            ));
        }
        if self
            .training_quantiles
            .iter()
            .any(|q| !(0.0..1.0).contains(q))
        {
            return Err(Error::InvalidArgument(
                "training quantiles must lie in [0,1)".into(),
            ));
        }
        if let Some(p) = &self.threshold_prior {
            if p.len() != self.training_quantiles.len() {
                return Err(Error::InvalidArgument(
                    "threshold prior length must match the grid".into(),
                ));
            }
            if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidArgument(
                    "threshold prior must be a probability vector".into(),
                ));
            }
        }
        self.prior.validate()
    }

    /// The validation quantile: by construction the top of the grid.
    pub fn validation_quantile(&self) -> f64 {
        *self.training_quantiles.last().unwrap()
    }

    pub fn threshold_prior_vec(&self) -> Vec<f64> {
        match &self.threshold_prior {
            Some(p) => p.clone(),
            None => {
                let k = self.training_quantiles.len();
                vec![1.0 / k as f64; k]
            }
        }
    }
}

/// Log validation density log f_v(x | θ) for a BGP model specified at
/// training threshold `u`, re-expressed at validation threshold `v`.
///
/// When the implied p_v is zero the density degenerates to the indicator of
/// x <= v.
pub fn log_f_validation(x: f64, v: f64, th_at_u: &BgpParams, u: f64) -> Result<f64> {
    let at_v = implied_at_threshold(th_at_u, u, v)?;
    if at_v.p_exceed == 0.0 {
        return Ok(if x <= v { 0.0 } else { f64::NEG_INFINITY });
    }
    let vt = Threshold {
        level: v,
        quantile_prob: 0.0,
        n_exceed: 0,
    };
    Ok(bgp_log_obs_density(x, &vt, &at_v))
}

/// One cross-validation fold estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FoldEstimate {
    /// log of the estimated leave-one-out predictive density at v
    pub log_density: f64,
    /// importance-sampling effective sample size (equals m for naive folds)
    pub ess: f64,
    pub used_naive: bool,
    pub low_ess: bool,
}

/// Importance-sampling estimator of the leave-one-out predictive density for
/// fold `r`, using the full-data posterior as proposal. All ratios are
/// accumulated in log space.
pub fn loo_predictive_density_is(
    r: usize,
    data: &[f64],
    u: &Threshold,
    v: f64,
    s: &PosteriorSample,
) -> Result<FoldEstimate> {
    let x_r = data[r];
    let m = s.draws.len();
    let mut log_num = Vec::with_capacity(m);
    let mut log_den = Vec::with_capacity(m);
    for th in &s.draws {
        let lf_u = bgp_log_obs_density(x_r, u, th);
        // full-data posterior support guarantees positive observation density
        debug_assert!(lf_u.is_finite(), "f_u vanished for an in-sample point");
        let lf_v = log_f_validation(x_r, v, th, u.level)?;
        log_num.push(lf_v - lf_u);
        log_den.push(-lf_u);
    }
    let den = log_sum_exp(&log_den);
    if !den.is_finite() {
        return Err(Error::DegenerateWeights { fold: r });
    }
    let num = log_sum_exp(&log_num);
    // ESS of the normalized importance weights
    let log_wsum_sq: Vec<f64> = log_den.iter().map(|&l| 2.0 * (l - den)).collect();
    let ess = (-log_sum_exp(&log_wsum_sq)).exp();
    Ok(FoldEstimate {
        log_density: num - den,
        ess,
        used_naive: false,
        low_ess: ess < ESS_FLOOR_FRAC * m as f64,
    })
}

/// Naive (refit) estimator of the leave-one-out predictive density: averages
/// f_v over a posterior sample conditioned on the data without `x_r`.
pub fn loo_predictive_density_naive(
    r: usize,
    data: &[f64],
    u: &Threshold,
    v: f64,
    prior: &PriorSpec,
    m: usize,
    fold_seed: u64,
) -> Result<FoldEstimate> {
    let x_r = data[r];
    let loo: Vec<f64> = data
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != r)
        .map(|(_, &x)| x)
        .collect();
    let post = refit_posterior(&loo, u, prior, m, fold_seed)?;
    naive_from_sample(x_r, &post, u, v)
}

/// Averaging half of the naive estimator, split out so prepared posteriors
/// can be reused across validation thresholds.
pub fn naive_from_sample(
    x_r: f64,
    post: &PosteriorSample,
    u: &Threshold,
    v: f64,
) -> Result<FoldEstimate> {
    let m = post.draws.len();
    let mut logs = Vec::with_capacity(m);
    for th in &post.draws {
        logs.push(log_f_validation(x_r, v, th, u.level)?);
    }
    Ok(FoldEstimate {
        log_density: log_sum_exp(&logs) - (m as f64).ln(),
        ess: m as f64,
        used_naive: true,
        low_ess: false,
    })
}

fn refit_posterior(
    loo_data: &[f64],
    u: &Threshold,
    prior: &PriorSpec,
    m: usize,
    seed: u64,
) -> Result<PosteriorSample> {
    let loo_threshold = Threshold::from_level(u.level, u.quantile_prob, loo_data);
    let excesses = loo_threshold.excesses(loo_data);
    sample_bgp_posterior(loo_data.len(), &loo_threshold, &excesses, prior, m, seed)
}

/// Everything needed to score one training threshold at any validation
/// threshold: the full-data posterior plus refit posteriors for each fold
/// that removes a sample maximum.
#[derive(Debug, Clone)]
pub struct ThresholdCv {
    pub threshold: Threshold,
    pub posterior: PosteriorSample,
    /// (fold index, refit posterior) for folds whose removal changes the max
    drop_max: Vec<(usize, PosteriorSample)>,
}

/// Prepare the posteriors for a training threshold given sorted data.
/// Deterministic in `seed`.
pub fn prepare_threshold(
    sorted_data: &[f64],
    quantile: f64,
    prior: &PriorSpec,
    m: usize,
    seed: u64,
) -> Result<ThresholdCv> {
    let level = sample_quantile(sorted_data, quantile);
    let threshold = Threshold::from_level(level, quantile, sorted_data);
    let excesses = threshold.excesses(sorted_data);
    let posterior = sample_bgp_posterior(
        sorted_data.len(),
        &threshold,
        &excesses,
        prior,
        m,
        seed::derive(seed, 0),
    )?;

    // every fold that removes an instance of the maximum needs its own refit
    let max_val = *sorted_data.last().expect("non-empty data");
    let mut drop_max = Vec::new();
    for (r, &x) in sorted_data.iter().enumerate() {
        if x == max_val {
            let post = refit_posterior(
                &loo_of(sorted_data, r),
                &threshold,
                prior,
                m,
                seed::derive(seed, 1 + r as u64),
            )?;
            drop_max.push((r, post));
        }
    }
    Ok(ThresholdCv {
        threshold,
        posterior,
        drop_max,
    })
}

fn loo_of(data: &[f64], r: usize) -> Vec<f64> {
    data.iter()
        .enumerate()
        .filter(|&(i, _)| i != r)
        .map(|(_, &x)| x)
        .collect()
}

/// Cross-validation score of one prepared threshold at validation threshold
/// `v`: the sum over folds of log leave-one-out predictive densities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureResult {
    pub t_hat: f64,
    pub folds: Vec<FoldEstimate>,
    pub ess_min: f64,
    pub n_low_ess: usize,
    /// index of the first fold with zero predictive density, if any
    pub neg_inf_fold: Option<usize>,
}

pub fn measure_at_v(tc: &ThresholdCv, sorted_data: &[f64], v: f64) -> Result<MeasureResult> {
    let n = sorted_data.len();
    let mut folds = Vec::with_capacity(n);
    let mut t_hat = 0.0;
    let mut ess_min = f64::INFINITY;
    let mut n_low = 0;
    let mut neg_inf_fold = None;
    for r in 0..n {
        let est = match tc.drop_max.iter().find(|(i, _)| *i == r) {
            Some((_, post)) => naive_from_sample(sorted_data[r], post, &tc.threshold, v)?,
            None => loo_predictive_density_is(r, sorted_data, &tc.threshold, v, &tc.posterior)?,
        };
        if est.log_density == f64::NEG_INFINITY && neg_inf_fold.is_none() {
            neg_inf_fold = Some(r);
        }
        ess_min = ess_min.min(est.ess);
        if est.low_ess {
            n_low += 1;
        }
        t_hat += est.log_density;
        folds.push(est);
    }
    Ok(MeasureResult {
        t_hat,
        folds,
        ess_min,
        n_low_ess: n_low,
        neg_inf_fold,
    })
}

/// Convenience wrapper: prepare a threshold and score it in one call.
pub fn threshold_measure(
    sorted_data: &[f64],
    quantile: f64,
    v: f64,
    prior: &PriorSpec,
    m: usize,
    seed: u64,
) -> Result<MeasureResult> {
    let tc = prepare_threshold(sorted_data, quantile, prior, m, seed)?;
    measure_at_v(&tc, sorted_data, v)
}

/// Normalize exp(T̂_i) P(u_i) into threshold weights, subtracting the max
/// before exponentiation.
pub fn threshold_weights(t_hats: &[f64], prior: &[f64]) -> Result<Vec<f64>> {
    if t_hats.len() != prior.len() || t_hats.is_empty() {
        return Err(Error::InvalidArgument(
            "T-hat and prior vectors must have equal nonzero length".into(),
        ));
    }
    let max = t_hats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InvalidArgument(
            "all threshold measures are -inf; no threshold has positive predictive density".into(),
        ));
    }
    let unnorm: Vec<f64> = t_hats
        .iter()
        .zip(prior)
        .map(|(&t, &p)| (t - max).exp() * p)
        .collect();
    let total: f64 = unnorm.iter().sum();
    Ok(unnorm.into_iter().map(|w| w / total).collect())
}

/// Per-threshold record in a cross-validation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvThresholdRecord {
    pub threshold: Threshold,
    pub t_hat: f64,
    pub weight: f64,
    pub n_exceed: usize,
    pub ess_min: f64,
    pub n_low_ess: usize,
}

/// Cross-validation report over a threshold grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub records: Vec<CvThresholdRecord>,
    /// pairwise pseudo-Bayes factors exp(T̂_i - T̂_j)
    pub pseudo_bayes_factors: Vec<Vec<f64>>,
    pub validation_level: f64,
    pub ess_min: f64,
    pub any_naive_fallback: bool,
}

impl CvReport {
    pub fn weights(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.weight).collect()
    }

    pub fn best_index(&self) -> usize {
        self.records
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.t_hat.total_cmp(&b.1.t_hat))
            .map(|(i, _)| i)
            .unwrap()
    }
}

/// Prepare all thresholds of a grid (in parallel) against sorted data.
pub fn prepare_grid(
    sorted_data: &[f64],
    cfg: &CvConfig,
    seed: u64,
) -> Result<Vec<ThresholdCv>> {
    cfg.validate()?;
    cfg.training_quantiles
        .par_iter()
        .enumerate()
        .map(|(i, &q)| {
            prepare_threshold(sorted_data, q, &cfg.prior, cfg.m, seed::derive(seed, i as u64))
        })
        .collect()
}

/// Score a prepared grid at the validation threshold implied by its top
/// quantile and assemble the report.
pub fn report_from_grid(
    grid: &[ThresholdCv],
    sorted_data: &[f64],
    cfg: &CvConfig,
) -> Result<CvReport> {
    let v = grid.last().expect("non-empty grid").threshold.level;
    let measures: Vec<MeasureResult> = grid
        .par_iter()
        .map(|tc| measure_at_v(tc, sorted_data, v))
        .collect::<Result<_>>()?;
    let t_hats: Vec<f64> = measures.iter().map(|m| m.t_hat).collect();
    let weights = threshold_weights(&t_hats, &cfg.threshold_prior_vec())?;
    let records = grid
        .iter()
        .zip(&measures)
        .zip(&weights)
        .map(|((tc, m), &w)| CvThresholdRecord {
            threshold: tc.threshold,
            t_hat: m.t_hat,
            weight: w,
            n_exceed: tc.threshold.n_exceed,
            ess_min: m.ess_min,
            n_low_ess: m.n_low_ess,
        })
        .collect::<Vec<_>>();
    let k = records.len();
    let pbf = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| (t_hats[i] - t_hats[j]).exp())
                .collect::<Vec<f64>>()
        })
        .collect();
    Ok(CvReport {
        ess_min: records.iter().map(|r| r.ess_min).fold(f64::INFINITY, f64::min),
        any_naive_fallback: measures.iter().any(|m| m.folds.iter().any(|f| f.used_naive)),
        records,
        pseudo_bayes_factors: pbf,
        validation_level: v,
    })
}

/// Full pipeline: sort a copy of the data, prepare the grid, and report.
pub fn cv_report(data: &[f64], cfg: &CvConfig, seed: u64) -> Result<CvReport> {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let grid = prepare_grid(&sorted, cfg, seed)?;
    report_from_grid(&grid, &sorted, cfg)
}
