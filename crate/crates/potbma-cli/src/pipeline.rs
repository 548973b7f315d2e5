//! Pipeline orchestration: stability diagnostics, the full
//! threshold-averaged analysis, and run-directory serialization.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use potbma_core::cv::{
    measure_at_v, prepare_grid, report_from_grid, threshold_weights, CvConfig, CvReport,
    ThresholdCv,
};
use potbma_core::mle::fit_gp_mle;
use potbma_core::posterior::{posterior_summaries, PosteriorSummary};
use potbma_core::predictive::{
    averaged_median_mn, averaged_pred_cdf, averaged_return_level, median_mn, pred_cdf_mn,
    predictive_return_level, tabulate_curve, Horizon, PredictiveCurve,
};
use potbma_core::prior::{propriety_check, Advisory, PriorSpec};
use potbma_core::quantiles::sample_quantile;
use potbma_core::Error as CoreError;

use crate::data::Dataset;
use crate::CliError;

/// Default warning floor on exceedance counts.
pub const DEFAULT_MIN_EXCEED: usize = 50;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub quantiles: Vec<f64>,
    pub prior: PriorSpec,
    pub m: usize,
    pub horizons: Vec<f64>,
    pub seed: u64,
    pub min_exceed_warn: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.m < 10 {
            return Err(CliError::Usage(format!(
                "posterior sample size {} is too small",
                self.m
            )));
        }
        if self.horizons.iter().any(|&n| n <= 1.0) {
            return Err(CliError::Usage("horizons must exceed 1 year".into()));
        }
        self.prior.validate().map_err(CliError::from)?;
        CvConfig {
            training_quantiles: self.quantiles.clone(),
            m: self.m,
            prior: self.prior.clone(),
            threshold_prior: None,
        }
        .validate()
        .map_err(CliError::from)
    }
}

/// One row of threshold-stability diagnostics: the shape MLE with its
/// profile-likelihood interval at a candidate threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityRow {
    pub quantile: f64,
    pub level: f64,
    pub n_exceed: usize,
    pub shape: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub error: Option<String>,
}

/// Fit the tail at each candidate threshold; per-threshold failures are
/// recorded in the row instead of aborting the table.
pub fn stability_table(values: &[f64], quantiles: &[f64]) -> Vec<StabilityRow> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantiles
        .iter()
        .map(|&q| {
            let level = sample_quantile(&sorted, q);
            let excesses: Vec<f64> = sorted
                .iter()
                .filter(|&&x| x > level)
                .map(|&x| x - level)
                .collect();
            let n_exceed = excesses.len();
            match fit_gp_mle(&excesses) {
                Ok(fit) => StabilityRow {
                    quantile: q,
                    level,
                    n_exceed,
                    shape: Some(fit.estimate.shape),
                    ci_lo: fit.shape_ci_lo.is_finite().then_some(fit.shape_ci_lo),
                    ci_hi: fit.shape_ci_hi.is_finite().then_some(fit.shape_ci_hi),
                    error: None,
                },
                Err(e) => StabilityRow {
                    quantile: q,
                    level,
                    n_exceed,
                    shape: None,
                    ci_lo: None,
                    ci_hi: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub dataset: DatasetInfo,
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub label: String,
    pub n: usize,
    pub n_y: f64,
    pub skipped_rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRow {
    pub quantile: f64,
    pub level: f64,
    pub n_exceed: usize,
    pub t_hat: f64,
    pub weight: f64,
    pub ess_min: f64,
    pub acceptance_rate: f64,
    pub summary: PosteriorSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReturnRow {
    pub horizon_years: f64,
    /// threshold quantile label or "averaged"
    pub source: String,
    pub return_level: Option<f64>,
    pub median_mn: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityRow {
    /// quantile of the highest threshold retained in the truncated grid
    pub top_quantile: f64,
    pub threshold_quantile: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisBundle {
    pub manifest: Manifest,
    pub thresholds: Vec<ThresholdRow>,
    pub cv: CvReport,
    pub curves: Vec<PredictiveCurve>,
    pub returns: Vec<ReturnRow>,
    pub sensitivity: Vec<SensitivityRow>,
}

fn source_label(q: f64) -> String {
    format!("q{q:.3}")
}

/// Run the full analysis: per-threshold posteriors, cross-validated
/// threshold weights, predictive curves and return levels (single-threshold
/// and averaged), and the weight-sensitivity sweep over the highest
/// threshold retained.
pub fn run_pipeline(d: &Dataset, cfg: &RunConfig) -> Result<AnalysisBundle, CliError> {
    cfg.validate()?;
    let n_y = d.require_n_y()?;
    let mut warnings = Vec::new();
    if d.skipped > 0 {
        warnings.push(format!("{} rows skipped for missing cells", d.skipped));
    }

    let mut sorted = d.values.clone();
    sorted.sort_by(f64::total_cmp);
    let cv_cfg = CvConfig {
        training_quantiles: cfg.quantiles.clone(),
        m: cfg.m,
        prior: cfg.prior.clone(),
        threshold_prior: None,
    };
    let grid: Vec<ThresholdCv> = prepare_grid(&sorted, &cv_cfg, cfg.seed).map_err(CliError::from)?;
    for tc in &grid {
        if tc.threshold.n_exceed < cfg.min_exceed_warn {
            warnings.push(format!(
                "threshold at quantile {:.3} has only {} exceedances (suggested floor {})",
                tc.threshold.quantile_prob, tc.threshold.n_exceed, cfg.min_exceed_warn
            ));
        }
        if let Advisory::Warning(msg) = propriety_check(&cfg.prior, tc.threshold.n_exceed) {
            warnings.push(format!(
                "quantile {:.3}: {msg}",
                tc.threshold.quantile_prob
            ));
        }
        for w in &tc.posterior.warnings {
            warnings.push(format!("quantile {:.3}: {w}", tc.threshold.quantile_prob));
        }
    }
    let report = report_from_grid(&grid, &sorted, &cv_cfg).map_err(CliError::from)?;

    let thresholds: Vec<ThresholdRow> = grid
        .iter()
        .zip(&report.records)
        .map(|(tc, rec)| {
            Ok(ThresholdRow {
                quantile: tc.threshold.quantile_prob,
                level: tc.threshold.level,
                n_exceed: tc.threshold.n_exceed,
                t_hat: rec.t_hat,
                weight: rec.weight,
                ess_min: rec.ess_min,
                acceptance_rate: tc.posterior.acceptance_rate,
                summary: posterior_summaries(&tc.posterior)?,
            })
        })
        .collect::<Result<_, CoreError>>()
        .map_err(CliError::from)?;

    let weights = report.weights();
    let samples: Vec<_> = grid.iter().map(|tc| tc.posterior.clone()).collect();
    let data_max = *sorted.last().unwrap();

    let mut curves = Vec::new();
    let mut returns = Vec::new();
    for &years in &cfg.horizons {
        let h = Horizon::new(years, n_y).map_err(CliError::from)?;
        for s in &samples {
            let label = source_label(s.threshold.quantile_prob);
            let width = (data_max - s.threshold.level).max(1.0);
            curves.push(
                tabulate_curve(
                    |z| pred_cdf_mn(z, &h, &s.threshold, s),
                    &h,
                    s.threshold.level,
                    width,
                    &label,
                )
                .map_err(CliError::from)?,
            );
            let (rl, med) = solve_or_warn(
                || predictive_return_level(&h, &s.threshold, s),
                || median_mn(&h, &s.threshold, s),
                &label,
                years,
                &mut warnings,
            )?;
            returns.push(ReturnRow {
                horizon_years: years,
                source: label,
                return_level: rl,
                median_mn: med,
            });
        }
        let v = report.validation_level;
        curves.push(
            tabulate_curve(
                |z| averaged_pred_cdf(z, &h, &samples, &weights),
                &h,
                v,
                (data_max - v).max(1.0),
                "averaged",
            )
            .map_err(CliError::from)?,
        );
        let (rl, med) = solve_or_warn(
            || averaged_return_level(&h, &samples, &weights),
            || averaged_median_mn(&h, &samples, &weights),
            "averaged",
            years,
            &mut warnings,
        )?;
        returns.push(ReturnRow {
            horizon_years: years,
            source: "averaged".into(),
            return_level: rl,
            median_mn: med,
        });
    }

    // sensitivity of the weights to the top of the grid: truncate the grid
    // at each candidate highest threshold and re-score at that threshold
    let mut sensitivity = Vec::new();
    for top in 0..grid.len() {
        let v = grid[top].threshold.level;
        let t_hats: Vec<f64> = grid[..=top]
            .iter()
            .map(|tc| measure_at_v(tc, &sorted, v).map(|m| m.t_hat))
            .collect::<Result<_, CoreError>>()
            .map_err(CliError::from)?;
        let prior = vec![1.0 / (top + 1) as f64; top + 1];
        let ws = threshold_weights(&t_hats, &prior).map_err(CliError::from)?;
        for (tc, w) in grid[..=top].iter().zip(ws) {
            sensitivity.push(SensitivityRow {
                top_quantile: grid[top].threshold.quantile_prob,
                threshold_quantile: tc.threshold.quantile_prob,
                weight: w,
            });
        }
    }

    let manifest = Manifest {
        tool: "potbma",
        version: env!("CARGO_PKG_VERSION"),
        dataset: DatasetInfo {
            label: d.label.clone(),
            n: d.n(),
            n_y,
            skipped_rows: d.skipped,
        },
        config: cfg.clone(),
        warnings,
    };
    Ok(AnalysisBundle {
        manifest,
        thresholds,
        cv: report,
        curves,
        returns,
        sensitivity,
    })
}

/// Solve the two root-finding summaries, degrading a heavy-tail plateau to
/// an absent value with a warning instead of failing the run.
fn solve_or_warn(
    rl: impl Fn() -> Result<f64, CoreError>,
    med: impl Fn() -> Result<f64, CoreError>,
    label: &str,
    years: f64,
    warnings: &mut Vec<String>,
) -> Result<(Option<f64>, Option<f64>), CliError> {
    let mut grab = |f: &dyn Fn() -> Result<f64, CoreError>,
                    what: &str|
     -> Result<Option<f64>, CliError> {
        match f() {
            Ok(z) => Ok(Some(z)),
            Err(CoreError::NoFiniteRoot { target, supremum }) => {
                warnings.push(format!(
                    "{label}, N={years}: {what} unattainable (target {target}, supremum {supremum})"
                ));
                Ok(None)
            }
            Err(e) => Err(CliError::from(e)),
        }
    };
    Ok((grab(&rl, "return level")?, grab(&med, "median")?))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Write the run directory: manifest.json, thresholds.csv, weights.csv,
/// curves/<N>.csv, returns.csv, sensitivity.csv.
pub fn write_bundle(bundle: &AnalysisBundle, out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&bundle.manifest)
            .map_err(|e| CliError::Usage(e.to_string()))?
            + "\n",
    )?;

    let mut w = csv::Writer::from_path(out_dir.join("thresholds.csv"))?;
    w.write_record([
        "quantile",
        "level",
        "n_exceed",
        "t_hat",
        "weight",
        "ess_min",
        "acceptance_rate",
        "mean_p_exceed",
        "mean_scale",
        "mean_shape",
        "sd_shape",
        "prob_shape_positive",
    ])?;
    for r in &bundle.thresholds {
        w.write_record([
            r.quantile.to_string(),
            r.level.to_string(),
            r.n_exceed.to_string(),
            r.t_hat.to_string(),
            r.weight.to_string(),
            r.ess_min.to_string(),
            r.acceptance_rate.to_string(),
            r.summary.mean.p_exceed.to_string(),
            r.summary.mean.scale.to_string(),
            r.summary.mean.shape.to_string(),
            r.summary.sd.shape.to_string(),
            r.summary.prob_shape_positive.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("weights.csv"))?;
    w.write_record(["quantile", "level", "n_exceed", "t_hat", "weight"])?;
    for r in &bundle.thresholds {
        w.write_record([
            r.quantile.to_string(),
            r.level.to_string(),
            r.n_exceed.to_string(),
            r.t_hat.to_string(),
            r.weight.to_string(),
        ])?;
    }
    w.flush()?;

    let curve_dir = out_dir.join("curves");
    fs::create_dir_all(&curve_dir)?;
    let mut horizons: Vec<f64> = bundle.curves.iter().map(|c| c.horizon.years).collect();
    horizons.dedup();
    for years in horizons {
        let mut w = csv::Writer::from_path(curve_dir.join(format!("{years}.csv")))?;
        w.write_record(["source", "z", "cdf"])?;
        for c in bundle.curves.iter().filter(|c| c.horizon.years == years) {
            for &(z, p) in &c.grid {
                w.write_record([c.source.clone(), z.to_string(), p.to_string()])?;
            }
        }
        w.flush()?;
    }

    let mut w = csv::Writer::from_path(out_dir.join("returns.csv"))?;
    w.write_record(["horizon_years", "source", "return_level", "median_mn"])?;
    for r in &bundle.returns {
        w.write_record([
            r.horizon_years.to_string(),
            r.source.clone(),
            fmt_opt(r.return_level),
            fmt_opt(r.median_mn),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("sensitivity.csv"))?;
    w.write_record(["top_quantile", "threshold_quantile", "weight"])?;
    for r in &bundle.sensitivity {
        w.write_record([
            r.top_quantile.to_string(),
            r.threshold_quantile.to_string(),
            r.weight.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
