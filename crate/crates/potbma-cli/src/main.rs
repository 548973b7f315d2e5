//! `potbma`: threshold-averaged peaks-over-threshold analysis.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use potbma_cli::data::{load_csv, ColumnSelector, Dataset};
use potbma_cli::pipeline::{run_pipeline, stability_table, write_bundle, RunConfig, DEFAULT_MIN_EXCEED};
use potbma_cli::{parse_horizons, parse_prior, parse_quantile_grid, CliError};
use potbma_core::gp::GpParams;
use potbma_core::prior::{calibrate_cauchy_scale, CalibrationInputs};
use potbma_core::sim::{
    hybrid_model, run_study1, run_study2, SimModel, Study1Arm, Study1Config, Study2Config,
};

#[derive(Parser)]
#[command(name = "potbma", version, about = "Bayesian threshold-averaged extreme value analysis")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    data: PathBuf,
    /// value column: zero-based index or header name
    #[arg(long, default_value = "0")]
    column: ColumnSelector,
    /// optional year column used to derive the per-year rate
    #[arg(long)]
    year_column: Option<ColumnSelector>,
    /// observations per year (overrides the year column)
    #[arg(long)]
    ny: Option<f64>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, CliError> {
        load_csv(
            &self.data,
            &self.column,
            self.year_column.as_ref(),
            self.ny,
        )
    }
}

#[derive(Args)]
struct PriorArgs {
    /// jeffreys | flat | mdi | mdi_a | cauchy
    #[arg(long, default_value = "mdi")]
    prior: String,
    /// tail-decay parameter for --prior mdi_a
    #[arg(long)]
    a: Option<f64>,
    /// scale parameter for --prior cauchy
    #[arg(long = "A")]
    a_scale: Option<f64>,
}

impl PriorArgs {
    fn parse(&self) -> Result<potbma_core::PriorSpec, CliError> {
        parse_prior(&self.prior, self.a, self.a_scale)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate shape MLEs with profile-likelihood intervals over a
    /// threshold grid
    Stability {
        #[command(flatten)]
        data: DataArgs,
        /// grid as start:end:step or a comma list of quantile levels
        #[arg(long, default_value = "0.1:0.9:0.05")]
        quantiles: String,
        /// write CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full analysis: posteriors, cross-validated threshold weights,
    /// predictive curves and return levels
    Analyze {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "0.5:0.9:0.05")]
        quantiles: String,
        #[command(flatten)]
        prior: PriorArgs,
        /// posterior sample size per threshold
        #[arg(long, default_value_t = 5000)]
        m: usize,
        /// comma list of horizon years
        #[arg(long, default_value = "100,1000,10000")]
        horizons: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// output directory for the run bundle
        #[arg(long)]
        out: PathBuf,
    },
    /// Predictive-calibration simulation: U(0,1) decile proportions of
    /// predictive CDF values under a chosen arm
    SimulatePriors {
        /// predictive | mle | control
        #[arg(long, default_value = "predictive")]
        arm: String,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long, default_value_t = 0.1)]
        xi: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.5)]
        pu: f64,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 10.0)]
        ny: f64,
        #[arg(long, default_value = "100")]
        horizons: String,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// write report.json (and deciles.csv) into this directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single- versus averaged-threshold simulation on a chosen data model
    SimulateThresholds {
        /// exponential | normal | hybrid
        #[arg(long, default_value = "exponential")]
        model: String,
        /// tail shape of the hybrid model
        #[arg(long, default_value_t = 0.1)]
        xi_tail: f64,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 500)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate the heavy-tailed shape prior scale from three return-level
    /// judgements
    CalibratePrior {
        /// one-year median (e.g. from median annual maximum)
        #[arg(long)]
        m1: f64,
        /// 100-year prior median judgement
        #[arg(long)]
        m100: f64,
        /// 10000-year prior median judgement
        #[arg(long)]
        m10000: f64,
        /// target P(shape > calibrated point)
        #[arg(long, default_value_t = 0.2)]
        target: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}

fn emit_json<T: serde::Serialize>(
    value: &T,
    out: Option<&PathBuf>,
    name: &str,
) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Usage(e.to_string()))?
        + "\n";
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), json)?;
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Stability {
            data,
            quantiles,
            out,
        } => {
            let d = data.load()?;
            let grid = parse_quantile_grid(&quantiles)?;
            let table = stability_table(&d.values, &grid);
            let mut w: Box<dyn std::io::Write> = match &out {
                Some(p) => Box::new(fs::File::create(p)?),
                None => Box::new(std::io::stdout()),
            };
            let mut csv = csv::Writer::from_writer(&mut w);
            csv.write_record(["quantile", "level", "n_exceed", "shape", "ci_lo", "ci_hi", "error"])
                .map_err(|e| CliError::Usage(e.to_string()))?;
            for r in table {
                let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                csv.write_record([
                    r.quantile.to_string(),
                    r.level.to_string(),
                    r.n_exceed.to_string(),
                    opt(r.shape),
                    opt(r.ci_lo),
                    opt(r.ci_hi),
                    r.error.unwrap_or_default(),
                ])
                .map_err(|e| CliError::Usage(e.to_string()))?;
            }
            csv.flush()?;
            Ok(())
        }
        Cmd::Analyze {
            data,
            quantiles,
            prior,
            m,
            horizons,
            seed,
            out,
        } => {
            let d = data.load()?;
            let cfg = RunConfig {
                quantiles: parse_quantile_grid(&quantiles)?,
                prior: prior.parse()?,
                m,
                horizons: parse_horizons(&horizons)?,
                seed,
                min_exceed_warn: DEFAULT_MIN_EXCEED,
            };
            let bundle = run_pipeline(&d, &cfg)?;
            write_bundle(&bundle, &out)?;
            for w in &bundle.manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("run written to {}", out.display());
            Ok(())
        }
        Cmd::SimulatePriors {
            arm,
            prior,
            xi,
            sigma,
            pu,
            n,
            ny,
            horizons,
            reps,
            m,
            seed,
            out,
        } => {
            let arm = match arm.as_str() {
                "predictive" => Study1Arm::Predictive {
                    prior: prior.parse()?,
                },
                "mle" => Study1Arm::EstimativeMle,
                "control" => Study1Arm::Control,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown arm '{other}' (expected predictive|mle|control)"
                    )))
                }
            };
            let gp = GpParams::new(sigma, xi).map_err(CliError::from)?;
            let cfg = Study1Config {
                arm,
                n,
                n_y: ny,
                p_u: pu,
                gp,
                horizons: parse_horizons(&horizons)?,
                reps,
                m,
                seed,
            };
            let report = run_study1(&cfg).map_err(CliError::from)?;
            emit_json(&report, out.as_ref(), "report.json")?;
            if let Some(dir) = &out {
                let mut w = csv::Writer::from_path(dir.join("deciles.csv"))?;
                w.write_record(["horizon_years", "decile", "proportion", "band_lo", "band_hi", "pass"])
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                for (years, rep) in &report.per_horizon {
                    for (i, (&p, &ok)) in
                        rep.proportions.iter().zip(&rep.pass_flags).enumerate()
                    {
                        w.write_record([
                            years.to_string(),
                            (i + 1).to_string(),
                            p.to_string(),
                            rep.tolerance_band.0.to_string(),
                            rep.tolerance_band.1.to_string(),
                            ok.to_string(),
                        ])
                        .map_err(|e| CliError::Usage(e.to_string()))?;
                    }
                }
                w.flush()?;
            }
            Ok(())
        }
        Cmd::SimulateThresholds {
            model,
            xi_tail,
            prior,
            reps,
            m,
            seed,
            out,
        } => {
            let model = match model.as_str() {
                "exponential" => SimModel::Exponential,
                "normal" => SimModel::Normal,
                "hybrid" => hybrid_model(xi_tail).map_err(CliError::from)?,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown model '{other}' (expected exponential|normal|hybrid)"
                    )))
                }
            };
            let cfg = Study2Config::new(model, reps, prior.parse()?, m, seed);
            let report = run_study2(&cfg).map_err(CliError::from)?;
            emit_json(&report, out.as_ref(), "report.json")?;
            if let Some(dir) = &out {
                let mut w = csv::Writer::from_path(dir.join("weights.csv"))?;
                w.write_record(["quantile", "mean_weight", "best_frequency"])
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                for ((q, mw), bf) in report
                    .quantiles
                    .iter()
                    .zip(&report.mean_weights)
                    .zip(&report.best_frequencies)
                {
                    w.write_record([q.to_string(), mw.to_string(), bf.to_string()])
                        .map_err(|e| CliError::Usage(e.to_string()))?;
                }
                w.flush()?;
            }
            Ok(())
        }
        Cmd::CalibratePrior {
            m1,
            m100,
            m10000,
            target,
        } => {
            let cal = calibrate_cauchy_scale(&CalibrationInputs {
                m1_hat: m1,
                m100_hat: m100,
                m10000_hat: m10000,
                tail_prob_target: target,
            })
            .map_err(CliError::from)?;
            emit_json(&cal, None, "calibration.json")
        }
    }
}
