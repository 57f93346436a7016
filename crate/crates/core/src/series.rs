//! Univariate time-series container, differencing, estimation/validation
//! splitting and CSV ingestion.

use std::cmp::Ordering;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// An ordered, finite, non-empty sequence of observations.
///
/// Timestamps are carried through untouched. The series is treated as
/// equally spaced regardless of what the labels say.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    timestamps: Option<Vec<String>>,
    name: String,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::SeriesTooShort { needed: 1, got: 0 });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            values,
            timestamps: None,
            name: name.into(),
        })
    }

    /// Attaches timestamp labels. Labels must match the series length and be
    /// strictly increasing (numerically when both parse as numbers,
    /// lexicographically otherwise).
    pub fn with_timestamps(mut self, timestamps: Vec<String>) -> Result<Self> {
        if timestamps.len() != self.values.len() {
            return Err(Error::invalid(format!(
                "{} timestamps for {} values",
                timestamps.len(),
                self.values.len()
            )));
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if compare_labels(&w[0], &w[1]) != Ordering::Less {
                return Err(Error::invalid(format!(
                    "timestamps not strictly increasing at index {}",
                    i + 1
                )));
            }
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Sub-series over `range`. The range must be non-empty.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.values.len() {
            return Err(Error::invalid(format!(
                "slice {:?} out of bounds for length {}",
                range,
                self.values.len()
            )));
        }
        Ok(Self {
            values: self.values[range.clone()].to_vec(),
            timestamps: self.timestamps.as_ref().map(|t| t[range].to_vec()),
            name: self.name.clone(),
        })
    }

    /// Appends `other` to the end of `self`. Timestamps survive only if both
    /// sides carry them.
    pub fn concat(&self, other: &TimeSeries) -> Result<Self> {
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        let out = TimeSeries::new(self.name.clone(), values)?;
        match (&self.timestamps, &other.timestamps) {
            (Some(a), Some(b)) => {
                let mut ts = a.clone();
                ts.extend_from_slice(b);
                out.with_timestamps(ts)
            }
            _ => Ok(out),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn compare_labels(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        _ => a.cmp(b),
    }
}

/// Applies first differences `d` times: `y[i] -> y[i + 1] - y[i]`.
pub fn difference(series: &TimeSeries, d: usize) -> Result<TimeSeries> {
    if d >= series.len() {
        return Err(Error::invalid(format!(
            "cannot difference {} times a series of length {}",
            d,
            series.len()
        )));
    }
    let mut values = series.values.clone();
    for _ in 0..d {
        values = values.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let timestamps = series
        .timestamps
        .as_ref()
        .map(|t| t[d..].to_vec());
    Ok(TimeSeries {
        values,
        timestamps,
        name: series.name.clone(),
    })
}

/// Splits a series into its first `floor(fraction * len)` observations and
/// the remainder.
pub fn estimation_validation_split(
    series: &TimeSeries,
    fraction: f64,
) -> Result<(TimeSeries, TimeSeries)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("fraction {fraction} not in (0, 1)")));
    }
    let t = series.len();
    let cut = (fraction * t as f64).floor() as usize;
    if cut < 1 || cut >= t {
        return Err(Error::DegenerateSplit(format!(
            "fraction {fraction} of {t} observations leaves an empty side"
        )));
    }
    Ok((series.slice(0..cut)?, series.slice(cut..t)?))
}

/// Which CSV column holds the observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Default for Column {
    fn default() -> Self {
        Column::Index(0)
    }
}

impl std::str::FromStr for Column {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

impl std::fmt::Display for Column {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Column::Index(i) => write!(f, "#{i}"),
            Column::Name(n) => f.write_str(n),
        }
    }
}

/// Reads one column of a comma-separated file into a series.
///
/// A single header row is optional: the first row is taken as a header when
/// the selected cell does not parse as a number (or when the column is
/// selected by name). Row numbers in errors are 1-based file rows.
pub fn load_csv(path: impl AsRef<Path>, column: &Column) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut index = match column {
        Column::Index(i) => Some(*i),
        Column::Name(_) => None,
    };
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let row = row + 1;
        if row == 1 {
            if let Column::Name(name) = column {
                let pos = record.iter().position(|h| h == name).ok_or_else(|| {
                    Error::MissingColumn {
                        path: path.to_path_buf(),
                        column: name.clone(),
                    }
                })?;
                index = Some(pos);
                continue;
            }
        }
        let idx = index.expect("column index resolved on the first row");
        let cell = record.get(idx).unwrap_or("");
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ if row == 1 => continue,
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    cell: cell.to_string(),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyColumn {
            path: path.to_path_buf(),
            column: column.to_string(),
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());
    TimeSeries::new(name, values)
}

/// Writes a series as a single `value` column. Values use the shortest
/// representation that parses back to the same double.
pub fn write_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(file, "value").map_err(io_err)?;
    for v in series.values() {
        writeln!(file, "{v}").map_err(io_err)?;
    }
    file.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new("t", v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            TimeSeries::new("x", vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(TimeSeries::new("x", vec![]).is_err());
        assert!(TimeSeries::new("x", vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn timestamps_must_increase() {
        let s = ts(&[1.0, 2.0, 3.0]);
        assert!(s
            .clone()
            .with_timestamps(vec!["1".into(), "2".into(), "10".into()])
            .is_ok());
        assert!(s
            .clone()
            .with_timestamps(vec!["a".into(), "c".into(), "b".into()])
            .is_err());
        assert!(s.with_timestamps(vec!["1".into()]).is_err());
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&ts(&[1.0, 2.0, 4.0]), 1).unwrap().values(), &[1.0, 2.0]);
        assert_eq!(
            difference(&ts(&[5.0, 5.0, 5.0]), 0).unwrap().values(),
            &[5.0, 5.0, 5.0]
        );
        assert_eq!(
            difference(&ts(&[1.0, 2.0, 4.0, 7.0]), 2).unwrap().values(),
            &[1.0, 1.0]
        );
        assert!(difference(&ts(&[1.0, 2.0]), 2).is_err());
    }

    #[test]
    fn split_examples() {
        let s = ts(&(0..10).map(f64::from).collect::<Vec<_>>());
        let (a, b) = estimation_validation_split(&s, 0.7).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        let s = ts(&(0..200).map(f64::from).collect::<Vec<_>>());
        let (a, b) = estimation_validation_split(&s, 0.7).unwrap();
        assert_eq!((a.len(), b.len()), (140, 60));
        assert!(matches!(
            estimation_validation_split(&ts(&[1.0]), 0.7),
            Err(Error::DegenerateSplit(_))
        ));
        assert!(estimation_validation_split(&s, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn double_difference_composes(v in prop::collection::vec(-1e3f64..1e3, 3..40)) {
            let s = ts(&v);
            let twice = difference(&difference(&s, 1).unwrap(), 1).unwrap();
            let direct = difference(&s, 2).unwrap();
            prop_assert_eq!(twice.values(), direct.values());
        }

        #[test]
        fn split_concatenates(v in prop::collection::vec(-1e3f64..1e3, 2..100), f in 0.05f64..0.95) {
            let s = ts(&v);
            if let Ok((a, b)) = estimation_validation_split(&s, f) {
                let joined = a.concat(&b).unwrap();
                prop_assert_eq!(joined.values(), s.values());
            }
        }
    }
}
