//! Library half of the CLI: data loading, pipeline orchestration, and the
//! argument-parsing helpers shared with integration tests.

pub mod data;
pub mod pipeline;

use potbma_core::prior::PriorSpec;

/// CLI failure classes, mapped to exit codes: usage errors exit 1,
/// numerical failures exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<potbma_core::Error> for CliError {
    fn from(e: potbma_core::Error) -> Self {
        use potbma_core::Error as E;
        match &e {
            E::InvalidArgument(_) | E::InvalidParameter(_) | E::Data(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Parse a `start:end:step` quantile grid (or a comma-separated list).
pub fn parse_quantile_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let grid: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "quantile grid '{s}' is not start:end:step"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad number '{p}' in grid '{s}'")))
            })
            .collect::<Result<_, _>>()?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if step <= 0.0 || end < start {
            return Err(CliError::Usage(format!(
                "grid '{s}' must have positive step and end >= start"
            )));
        }
        let k = ((end - start) / step + 1.5).floor() as usize;
        (0..k)
            .map(|i| start + step * i as f64)
            .filter(|&q| q <= end + 1e-12)
            .collect()
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad quantile '{p}'")))
            })
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() || grid.iter().any(|&q| !(0.0..1.0).contains(&q)) {
        return Err(CliError::Usage(format!(
            "quantile grid '{s}' must lie in [0, 1)"
        )));
    }
    Ok(grid)
}

/// Parse a comma-separated list of horizon years.
pub fn parse_horizons(s: &str) -> Result<Vec<f64>, CliError> {
    let out: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad horizon '{p}'")))
        })
        .collect::<Result<_, _>>()?;
    if out.is_empty() || out.iter().any(|&n| n <= 1.0) {
        return Err(CliError::Usage("horizons must all exceed 1 year".into()));
    }
    Ok(out)
}

/// Build a prior from the CLI triple (--prior, --a, --A).
pub fn parse_prior(name: &str, a: Option<f64>, a_scale: Option<f64>) -> Result<PriorSpec, CliError> {
    let prior = match name {
        "jeffreys" => PriorSpec::Jeffreys,
        "flat" => PriorSpec::Flat,
        "mdi" => PriorSpec::Mdi,
        "mdi_a" => PriorSpec::MdiA {
            a: a.ok_or_else(|| CliError::Usage("--prior mdi_a requires --a".into()))?,
        },
        "cauchy" => PriorSpec::Cauchy {
            a_scale: a_scale
                .ok_or_else(|| CliError::Usage("--prior cauchy requires --A".into()))?,
        },
        other => {
            return Err(CliError::Usage(format!(
                "unknown prior '{other}' (expected jeffreys|flat|mdi|mdi_a|cauchy)"
            )))
        }
    };
    prior.validate()?;
    Ok(prior)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_grid_forms() {
        let g = parse_quantile_grid("0.5:0.9:0.05").unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[8] - 0.9).abs() < 1e-12);
        assert_eq!(parse_quantile_grid("0.5,0.7,0.9").unwrap().len(), 3);
        assert!(parse_quantile_grid("0.5:0.9").is_err());
        assert!(parse_quantile_grid("0.9:0.5:0.1").is_err());
        assert!(parse_quantile_grid("0.5:1.5:0.5").is_err());
        assert!(parse_quantile_grid("x").is_err());
    }

    #[test]
    fn prior_parsing() {
        assert!(matches!(parse_prior("mdi", None, None), Ok(PriorSpec::Mdi)));
        assert!(matches!(
            parse_prior("mdi_a", Some(0.6), None),
            Ok(PriorSpec::MdiA { .. })
        ));
        assert!(parse_prior("mdi_a", None, None).is_err());
        assert!(parse_prior("cauchy", None, None).is_err());
        assert!(parse_prior("cauchy", None, Some(0.154)).is_ok());
        assert!(parse_prior("banana", None, None).is_err());
    }

    #[test]
    fn error_classes_from_core() {
        let usage: CliError = potbma_core::Error::InvalidArgument("x".into()).into();
        assert!(matches!(usage, CliError::Usage(_)));
        let numeric: CliError = potbma_core::Error::NoFiniteRoot {
            target: 0.9,
            supremum: 0.5,
        }
        .into();
        assert!(matches!(numeric, CliError::Numerical(_)));
    }
}
