//! Right-censored competing-events data with optionally missing event time or
//! event type, plus CSV ingestion.
//!
//! CSV layout: a header row with a `time` column (positive real, or empty when
//! missing), a `status` column (`0` right-censored, `1..=J` event type, empty
//! when the type is missing) and any number of numeric covariate columns.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

pub const INTERCEPT_NAME: &str = "(intercept)";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TimeStatus<T> {
    Observed(T),
    RightCensored(T),
    Missing,
}

/// Event type, numbered from 1 as in the CSV `status` column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventStatus {
    Known(usize),
    Missing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub x: Vec<T>,
    pub time: TimeStatus<T>,
    pub event: EventStatus,
}

impl<T: Real> Observation<T> {
    pub fn new(x: Vec<T>, time: TimeStatus<T>, event: EventStatus) -> Self {
        Self { x, time, event }
    }

    pub fn is_both_missing(&self) -> bool {
        matches!(self.time, TimeStatus::Missing) && matches!(self.event, EventStatus::Missing)
    }

    /// Observed time with a known event type.
    pub fn is_uncensored(&self) -> bool {
        matches!(self.time, TimeStatus::Observed(_)) && matches!(self.event, EventStatus::Known(_))
    }

    pub fn observed_time(&self) -> Option<T> {
        match self.time {
            TimeStatus::Observed(t) => Some(t),
            _ => None,
        }
    }

    /// Lower end of the interval the latent event time is known to exceed:
    /// the censoring time, or zero when the time is missing altogether.
    pub fn time_lower_bound(&self) -> T {
        match self.time {
            TimeStatus::RightCensored(c) => c,
            _ => T::zero(),
        }
    }

    /// Zero-based event index when known.
    pub fn event_index(&self) -> Option<usize> {
        match self.event {
            EventStatus::Known(j) => Some(j - 1),
            EventStatus::Missing => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub observations: Vec<Observation<T>>,
    pub n_risks: usize,
    pub feature_names: Vec<String>,
    pub includes_intercept: bool,
}

impl<T: Real> Dataset<T> {
    /// Validates and assembles a dataset. Covariate vectors must already include
    /// the leading intercept column when `includes_intercept` is set.
    pub fn new(
        observations: Vec<Observation<T>>,
        n_risks: usize,
        feature_names: Vec<String>,
        includes_intercept: bool,
    ) -> Result<Self> {
        if n_risks == 0 {
            return Err(Error::Data("at least one competing risk is required".into()));
        }
        let dim = feature_names.len();
        for (i, obs) in observations.iter().enumerate() {
            if obs.x.len() != dim {
                return Err(Error::Data(format!(
                    "observation {i} has {} covariates, expected {dim}",
                    obs.x.len()
                )));
            }
            if obs.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("observation {i} has a non-finite covariate")));
            }
            match obs.time {
                TimeStatus::Observed(t) | TimeStatus::RightCensored(t)
                    if !(t > T::zero() && t.is_finite()) =>
                {
                    return Err(Error::Data(format!(
                        "observation {i} has non-positive or non-finite time {t}"
                    )));
                }
                _ => {}
            }
            if let EventStatus::Known(j) = obs.event {
                if j == 0 || j > n_risks {
                    return Err(Error::Data(format!(
                        "observation {i} has event {j} outside 1..={n_risks}"
                    )));
                }
            }
            if matches!(obs.time, TimeStatus::RightCensored(_))
                && matches!(obs.event, EventStatus::Known(_))
            {
                return Err(Error::Data(format!(
                    "observation {i} is right-censored but carries an event type"
                )));
            }
        }
        if includes_intercept
            && (feature_names.first().map(String::as_str) != Some(INTERCEPT_NAME)
                || observations.iter().any(|o| o.x[0] != T::one()))
        {
            return Err(Error::Data("intercept column must come first and equal one".into()));
        }
        Ok(Self {
            observations,
            n_risks,
            feature_names,
            includes_intercept,
        })
    }

    /// Builds a dataset from raw covariates, prepending the intercept if asked.
    pub fn from_raw(
        rows: Vec<(Vec<T>, TimeStatus<T>, EventStatus)>,
        n_risks: usize,
        raw_names: Vec<String>,
        includes_intercept: bool,
    ) -> Result<Self> {
        let mut names = raw_names;
        if includes_intercept {
            names.insert(0, INTERCEPT_NAME.to_string());
        }
        let observations = rows
            .into_iter()
            .map(|(mut x, time, event)| {
                if includes_intercept {
                    x.insert(0, T::one());
                }
                Observation { x, time, event }
            })
            .collect();
        Self::new(observations, n_risks, names, includes_intercept)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Covariate dimension including any intercept.
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Covariate names excluding the intercept.
    pub fn raw_feature_names(&self) -> &[String] {
        if self.includes_intercept {
            &self.feature_names[1..]
        } else {
            &self.feature_names
        }
    }

    /// Rejects observations missing both time and type; the MAP likelihood is
    /// undefined for them.
    pub fn check_map_valid(&self) -> Result<()> {
        match self.observations.iter().position(Observation::is_both_missing) {
            Some(i) => Err(Error::Data(format!(
                "observation {i} misses both event time and event type"
            ))),
            None => Ok(()),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            observations: indices.iter().map(|&i| self.observations[i].clone()).collect(),
            n_risks: self.n_risks,
            feature_names: self.feature_names.clone(),
            includes_intercept: self.includes_intercept,
        }
    }

    pub fn censored_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let c = self
            .observations
            .iter()
            .filter(|o| matches!(o.time, TimeStatus::RightCensored(_)))
            .count();
        c as f64 / self.len() as f64
    }

    /// Writes the CSV layout described in the module docs (intercept omitted).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "status".to_string()];
        header.extend(self.raw_feature_names().iter().cloned());
        w.write_record(&header)?;
        let skip = usize::from(self.includes_intercept);
        for obs in &self.observations {
            let (time, status) = match (obs.time, obs.event) {
                (TimeStatus::Observed(t), EventStatus::Known(j)) => (t.to_string(), j.to_string()),
                (TimeStatus::Observed(t), EventStatus::Missing) => (t.to_string(), String::new()),
                (TimeStatus::RightCensored(c), _) => (c.to_string(), "0".to_string()),
                (TimeStatus::Missing, EventStatus::Known(j)) => (String::new(), j.to_string()),
                (TimeStatus::Missing, EventStatus::Missing) => (String::new(), String::new()),
            };
            let mut record = vec![time, status];
            record.extend(obs.x[skip..].iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// How to interpret a CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvSchema {
    pub n_risks: usize,
    pub includes_intercept: bool,
    /// Categorical columns given as `(column, baseline level)`; each is replaced
    /// by 0/1 dummy columns named `column=level`, one per non-baseline level in
    /// sorted order.
    pub categorical: Vec<(String, String)>,
    /// Raw feature names of a fitted model. When set, dummy levels come from
    /// these names instead of the file (so the baseline need not occur, and a
    /// level absent from them is an error) and columns follow their order.
    pub feature_names: Option<Vec<String>>,
}

impl CsvSchema {
    pub fn new(n_risks: usize) -> Self {
        Self {
            n_risks,
            includes_intercept: true,
            categorical: Vec::new(),
            feature_names: None,
        }
    }
}

/// Dummy columns produced by [`one_hot_encode`].
#[derive(Clone, Debug, PartialEq)]
pub struct OneHot<T> {
    /// Non-baseline levels, one per column.
    pub levels: Vec<String>,
    /// `columns[c][row]` is 1 when row has `levels[c]`.
    pub columns: Vec<Vec<T>>,
}

/// Encodes a categorical column as 0/1 dummies, dropping the baseline level.
pub fn one_hot_encode<T: Real, S: AsRef<str>>(column: &[S], baseline: &str) -> Result<OneHot<T>> {
    if !column.iter().any(|v| v.as_ref() == baseline) {
        return Err(Error::Data(format!(
            "baseline level {baseline:?} does not occur in the column"
        )));
    }
    let levels: Vec<String> = column
        .iter()
        .map(|v| v.as_ref())
        .filter(|v| *v != baseline)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    let columns = levels
        .iter()
        .map(|level| {
            column
                .iter()
                .map(|v| if v.as_ref() == level { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    Ok(OneHot { levels, columns })
}

fn parse_cell<T: Real>(cell: &str, row: usize, column: &str) -> Result<T> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("column {column:?}: {cell:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("column {column:?}: {cell:?} is not finite"),
        });
    }
    Ok(T::lit(v))
}

/// Reads a dataset from CSV. Row numbers in errors count data rows from 1.
pub fn read_csv<T: Real, R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                row: 0,
                message: format!("missing required column {name:?}"),
            })
    };
    let time_col = find("time")?;
    let status_col = find("status")?;
    for (name, _) in &schema.categorical {
        find(name)?;
    }
    let is_categorical = |c: usize| schema.categorical.iter().any(|(n, _)| *n == header[c]);
    let numeric_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != time_col && c != status_col && !is_categorical(c))
        .collect();

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        records.push(rec);
    }

    let mut dummies: Vec<(String, Vec<T>)> = Vec::new();
    for (name, baseline) in &schema.categorical {
        let c = header.iter().position(|h| h == name).expect("checked above");
        let column: Vec<&str> = records.iter().map(|r| &r[c]).collect();
        match &schema.feature_names {
            None => {
                let enc = one_hot_encode::<T, _>(&column, baseline)?;
                for (level, values) in enc.levels.into_iter().zip(enc.columns) {
                    dummies.push((format!("{name}={level}"), values));
                }
            }
            Some(expected) => {
                let prefix = format!("{name}=");
                let levels: Vec<&str> = expected
                    .iter()
                    .filter_map(|n| n.strip_prefix(&prefix))
                    .collect();
                if let Some((i, v)) = column
                    .iter()
                    .enumerate()
                    .find(|(_, v)| **v != baseline && !levels.contains(v))
                {
                    return Err(Error::Parse {
                        row: i + 1,
                        message: format!("column {name:?}: level {v:?} was not seen in training"),
                    });
                }
                for level in levels {
                    let values = column
                        .iter()
                        .map(|v| if *v == level { T::one() } else { T::zero() })
                        .collect();
                    dummies.push((format!("{prefix}{level}"), values));
                }
            }
        }
    }

    let mut names: Vec<String> = numeric_cols.iter().map(|&c| header[c].clone()).collect();
    names.extend(dummies.iter().map(|(n, _)| n.clone()));
    // position in `names` of each output column
    let order: Vec<usize> = match &schema.feature_names {
        None => (0..names.len()).collect(),
        Some(expected) => {
            let order = expected
                .iter()
                .map(|e| {
                    names.iter().position(|n| n == e).ok_or_else(|| Error::Parse {
                        row: 0,
                        message: format!("missing feature column {e:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(extra) = names.iter().find(|n| !expected.contains(n)) {
                return Err(Error::Parse {
                    row: 0,
                    message: format!("unexpected feature column {extra:?}"),
                });
            }
            order
        }
    };

    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let row = i + 1;
        let time_cell = rec[time_col].trim();
        let status_cell = rec[status_col].trim();
        let time = if time_cell.is_empty() {
            None
        } else {
            let t: T = parse_cell(time_cell, row, "time")?;
            if !(t > T::zero()) {
                return Err(Error::Parse {
                    row,
                    message: format!("time must be positive, got {time_cell}"),
                });
            }
            Some(t)
        };
        let status = if status_cell.is_empty() {
            None
        } else {
            let s: usize = status_cell.parse().map_err(|_| Error::Parse {
                row,
                message: format!("status {status_cell:?} is not an integer in 0..={}", schema.n_risks),
            })?;
            if s > schema.n_risks {
                return Err(Error::Parse {
                    row,
                    message: format!("status {s} outside 0..={}", schema.n_risks),
                });
            }
            Some(s)
        };
        let (time, event) = match (time, status) {
            (Some(t), Some(0)) => (TimeStatus::RightCensored(t), EventStatus::Missing),
            (Some(t), Some(j)) => (TimeStatus::Observed(t), EventStatus::Known(j)),
            (Some(t), None) => (TimeStatus::Observed(t), EventStatus::Missing),
            (None, Some(0)) | (None, None) => (TimeStatus::Missing, EventStatus::Missing),
            (None, Some(j)) => (TimeStatus::Missing, EventStatus::Known(j)),
        };
        let mut parsed = Vec::with_capacity(names.len());
        for &c in &numeric_cols {
            parsed.push(parse_cell(&rec[c], row, &header[c])?);
        }
        for (_, values) in &dummies {
            parsed.push(values[i]);
        }
        let x = order.iter().map(|&o| parsed[o]).collect();
        rows.push((x, time, event));
    }
    let names = order.iter().map(|&o| names[o].clone()).collect();
    Dataset::from_raw(rows, schema.n_risks, names, schema.includes_intercept)
}

pub fn load_csv<T: Real>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset<T>> {
    let f = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(f), schema)
}

/// Random train/test partition. With `exclude_censored_from_test` the test
/// rows are drawn only from uncensored observations (observed time and type).
/// Both parts keep the original row order.
pub fn train_test_split<T: Real, R: Rng + ?Sized>(
    dataset: &Dataset<T>,
    n_test: usize,
    rng: &mut R,
    exclude_censored_from_test: bool,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let n = dataset.len();
    if n_test >= n {
        return Err(Error::Data(format!(
            "test size {n_test} must be smaller than the dataset ({n} rows)"
        )));
    }
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| !exclude_censored_from_test || dataset.observations[i].is_uncensored())
        .collect();
    if candidates.len() < n_test {
        return Err(Error::Data(format!(
            "only {} uncensored rows available for a test set of {n_test}",
            candidates.len()
        )));
    }
    // partial Fisher-Yates
    for i in 0..n_test {
        let j = rng.random_range(i..candidates.len());
        candidates.swap(i, j);
    }
    let mut in_test = vec![false; n];
    for &i in &candidates[..n_test] {
        in_test[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    let test: Vec<usize> = (0..n).filter(|&i| in_test[i]).collect();
    Ok((dataset.subset(&train), dataset.subset(&test)))
}
