//! CSV ingestion and dataset bookkeeping.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use potbma_core::quantiles::sample_quantile;

use crate::CliError;

/// A loaded series of threshold-exceedance candidates (e.g. storm peaks).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub values: Vec<f64>,
    pub label: String,
    /// observations per year: configured value, else derived from a year
    /// column, else absent
    pub n_y: Option<f64>,
    pub years: Option<Vec<i64>>,
    /// rows dropped because of missing cells
    pub skipped: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn require_n_y(&self) -> Result<f64, CliError> {
        self.n_y.ok_or_else(|| {
            CliError::Usage(
                "observations-per-year rate unknown: pass --ny or provide a year column".into(),
            )
        })
    }
}

/// Column selector: zero-based index or header name.
#[derive(Debug, Clone)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnSelector {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        })
    }
}

impl fmt::Display for ColumnSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnSelector::Index(i) => write!(f, "{i}"),
            ColumnSelector::Name(n) => write!(f, "{n}"),
        }
    }
}

impl ColumnSelector {
    fn resolve(&self, headers: &csv::StringRecord) -> Result<usize, CliError> {
        match self {
            ColumnSelector::Index(i) => {
                if *i < headers.len() {
                    Ok(*i)
                } else {
                    Err(CliError::Usage(format!(
                        "column index {i} out of range (file has {} columns)",
                        headers.len()
                    )))
                }
            }
            ColumnSelector::Name(name) => headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| {
                    CliError::Usage(format!(
                        "no column named '{name}' (headers: {})",
                        headers.iter().collect::<Vec<_>>().join(", ")
                    ))
                }),
        }
    }
}

/// Load one numeric column (plus an optional year column) from a headered
/// CSV file. Rows with a missing cell in a selected column are skipped and
/// counted; non-numeric cells are errors.
pub fn load_csv(
    path: &Path,
    value_col: &ColumnSelector,
    year_col: Option<&ColumnSelector>,
    n_y_override: Option<f64>,
) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("bad header row: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(CliError::Usage(format!("{} is empty", path.display())));
    }
    let vi = value_col.resolve(&headers)?;
    let yi = year_col.map(|c| c.resolve(&headers)).transpose()?;

    let mut values = Vec::new();
    let mut years: Vec<i64> = Vec::new();
    let mut skipped = 0usize;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("row {}: {e}", row + 2)))?;
        let raw = rec.get(vi).unwrap_or("");
        if raw.is_empty() {
            skipped += 1;
            continue;
        }
        let v: f64 = raw.parse().map_err(|_| {
            CliError::Usage(format!("row {}: non-numeric value '{raw}'", row + 2))
        })?;
        if !v.is_finite() {
            return Err(CliError::Usage(format!("row {}: non-finite value", row + 2)));
        }
        if let Some(yi) = yi {
            let yraw = rec.get(yi).unwrap_or("");
            if yraw.is_empty() {
                skipped += 1;
                continue;
            }
            let y: i64 = yraw.parse().map_err(|_| {
                CliError::Usage(format!("row {}: non-integer year '{yraw}'", row + 2))
            })?;
            years.push(y);
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: selected column has no usable values",
            path.display()
        )));
    }

    let years = if yi.is_some() { Some(years) } else { None };
    let n_y = match n_y_override {
        Some(ny) if ny > 0.0 => Some(ny),
        Some(ny) => {
            return Err(CliError::Usage(format!(
                "observations per year must be positive, got {ny}"
            )))
        }
        None => years.as_ref().map(|ys| {
            let span = (ys.iter().max().unwrap() - ys.iter().min().unwrap() + 1) as f64;
            values.len() as f64 / span
        }),
    };
    Ok(Dataset {
        values,
        label: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "data".into()),
        n_y,
        years,
        skipped,
    })
}

/// Median of the per-year maxima; requires a year column.
pub fn median_annual_max(d: &Dataset) -> Result<f64, CliError> {
    let years = d.years.as_ref().ok_or_else(|| {
        CliError::Usage(
            "no year column loaded: supply the one-year median directly instead".into(),
        )
    })?;
    let mut max_by_year: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
    for (&y, &v) in years.iter().zip(&d.values) {
        let e = max_by_year.entry(y).or_insert(f64::NEG_INFINITY);
        *e = e.max(v);
    }
    let mut maxima: Vec<f64> = max_by_year.into_values().collect();
    maxima.sort_by(f64::total_cmp);
    Ok(sample_quantile(&maxima, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_by_name_and_index() {
        let f = write_tmp("year,value\n1990,1.5\n1990,2.5\n1991,3.5\n");
        let by_name = load_csv(
            f.path(),
            &ColumnSelector::Name("value".into()),
            None,
            None,
        )
        .unwrap();
        assert_eq!(by_name.values, vec![1.5, 2.5, 3.5]);
        assert!(by_name.n_y.is_none());

        let by_idx = load_csv(
            f.path(),
            &ColumnSelector::Index(1),
            Some(&ColumnSelector::Index(0)),
            None,
        )
        .unwrap();
        assert_eq!(by_idx.n(), 3);
        // two distinct years spanning 2 -> n_y = 3/2
        assert_eq!(by_idx.n_y, Some(1.5));
    }

    #[test]
    fn missing_cell_skipped_with_count() {
        let f = write_tmp("id,value\n1,1.0\n2,\n3,2.0\n");
        let d = load_csv(f.path(), &ColumnSelector::Index(1), None, None).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.skipped, 1);
    }

    #[test]
    fn bad_inputs_error() {
        let empty = write_tmp("");
        assert!(load_csv(empty.path(), &ColumnSelector::Index(0), None, None).is_err());
        let text = write_tmp("value\nabc\n");
        assert!(load_csv(text.path(), &ColumnSelector::Index(0), None, None).is_err());
        let f = write_tmp("value\n1.0\n");
        assert!(load_csv(f.path(), &ColumnSelector::Index(3), None, None).is_err());
        assert!(load_csv(f.path(), &ColumnSelector::Name("nope".into()), None, None).is_err());
        assert!(load_csv(f.path(), &ColumnSelector::Index(0), None, Some(-1.0)).is_err());
    }

    #[test]
    fn annual_max_median() {
        // one observation per year: median of the data itself
        let f = write_tmp("year,value\n1990,1.0\n1991,5.0\n1992,3.0\n");
        let d = load_csv(
            f.path(),
            &ColumnSelector::Name("value".into()),
            Some(&ColumnSelector::Name("year".into())),
            None,
        )
        .unwrap();
        assert_eq!(median_annual_max(&d).unwrap(), 3.0);

        // repeated years: hand-computed per-year maxima 4.0, 2.0, 9.0
        let f2 = write_tmp("year,value\n1990,4.0\n1990,1.0\n1991,2.0\n1992,9.0\n1992,8.0\n");
        let d2 = load_csv(
            f2.path(),
            &ColumnSelector::Name("value".into()),
            Some(&ColumnSelector::Name("year".into())),
            None,
        )
        .unwrap();
        assert_eq!(median_annual_max(&d2).unwrap(), 4.0);

        let no_years = load_csv(f.path(), &ColumnSelector::Name("value".into()), None, None).unwrap();
        assert!(median_annual_max(&no_years).is_err());
    }
}
