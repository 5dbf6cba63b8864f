//! Price ingestion and log-return panels.
//!
//! A [`PricePanel`] is a date-aligned `T × K` matrix of strictly positive
//! prices. [`compute_log_returns`] turns it into the `(T−1) × K`
//! [`ReturnPanel`] every estimator in this crate consumes.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::ops::Range;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell contents treated as "no observation".
const MISSING_TOKENS: &[&str] = &["", "NA", "N/A", "#N/A", "NaN", "nan", "null", "NULL", "."];

/// How rows with a missing price are handled during alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum MissingPolicy {
    /// Keep only dates on which every selected series trades.
    #[default]
    DropRow,
    /// Carry the last observed price forward for at most `max_gap`
    /// consecutive rows. Rows before a series' first observation are dropped.
    ForwardFill { max_gap: usize },
}

impl MissingPolicy {
    pub const DEFAULT_MAX_GAP: usize = 5;
}

/// Ingestion configuration for [`load_price_panel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSpec {
    pub date_column: String,
    /// `chrono` format string; must describe a calendar date only.
    pub date_format: String,
    /// Price columns to keep, in output order. `None` keeps every column
    /// other than the date column, in header order.
    pub series: Option<Vec<String>>,
    pub missing: MissingPolicy,
    pub delimiter: u8,
}

impl Default for IngestSpec {
    fn default() -> Self {
        IngestSpec {
            date_column: "date".to_string(),
            date_format: "%Y-%m-%d".to_string(),
            series: None,
            missing: MissingPolicy::DropRow,
            delimiter: b',',
        }
    }
}

/// Date-aligned price matrix, one column per series.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    labels: Vec<String>,
    prices: DMatrix<f64>,
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, labels: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        check_shape(&dates, &labels, &prices)?;
        check_dates(&dates)?;
        check_labels(&labels)?;
        for (k, col) in prices.column_iter().enumerate() {
            if col.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return Err(Error::BadPrice {
                    line: 0,
                    series: labels[k].clone(),
                    value: "non-positive or non-finite entry".into(),
                });
            }
        }
        Ok(PricePanel { dates, labels, prices })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `T × K` price matrix.
    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn n_obs(&self) -> usize {
        self.prices.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.prices.ncols()
    }

    /// Writes the panel in the same CSV layout [`load_price_panel`] reads.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, date_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![date_column.to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut record = vec![date.format("%Y-%m-%d").to_string()];
            record.extend(self.prices.row(t).iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Log returns `ln p[t+1] − ln p[t]`, dated at the later observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    labels: Vec<String>,
    returns: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(dates: Vec<NaiveDate>, labels: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        check_shape(&dates, &labels, &returns)?;
        check_dates(&dates)?;
        check_labels(&labels)?;
        for (k, col) in returns.column_iter().enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(labels[k].clone()));
            }
        }
        Ok(ReturnPanel { dates, labels, returns })
    }

    /// Builds a panel with synthetic consecutive calendar dates starting at
    /// 2000-01-01. Handy for simulations and tests where dates carry no meaning.
    pub fn from_matrix(returns: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = start.iter_days().take(returns.nrows()).collect();
        ReturnPanel::new(dates, labels, returns)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `T × K` return matrix.
    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn n_obs(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.returns.ncols()
    }

    pub fn column(&self, k: usize) -> DVector<f64> {
        self.returns.column(k).into_owned()
    }

    /// Consecutive rows `range` as a new panel.
    pub fn slice_rows(&self, range: Range<usize>) -> ReturnPanel {
        assert!(range.end <= self.n_obs(), "row range out of bounds");
        ReturnPanel {
            dates: self.dates[range.clone()].to_vec(),
            labels: self.labels.clone(),
            returns: self.returns.rows(range.start, range.len()).into_owned(),
        }
    }

    /// Subset of series by label, in the requested order.
    pub fn select(&self, labels: &[&str]) -> Result<ReturnPanel> {
        let idx = labels
            .iter()
            .map(|l| self.labels.iter().position(|x| x == l).ok_or_else(|| Error::MissingColumn(l.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let returns = self.returns.select_columns(&idx);
        ReturnPanel::new(self.dates.clone(), labels.iter().map(|s| s.to_string()).collect(), returns)
    }

    /// Stacks panels with identical labels in time order.
    pub fn concat(parts: &[ReturnPanel]) -> Result<ReturnPanel> {
        let first = parts.first().ok_or_else(|| Error::InvalidParameter("nothing to concatenate".into()))?;
        let k = first.n_series();
        let t: usize = parts.iter().map(ReturnPanel::n_obs).sum();
        let mut returns = DMatrix::zeros(t, k);
        let mut dates = Vec::with_capacity(t);
        let mut row = 0;
        for part in parts {
            if part.labels != first.labels {
                return Err(Error::DimensionMismatch("panels to concatenate have different labels".into()));
            }
            returns.rows_mut(row, part.n_obs()).copy_from(&part.returns);
            dates.extend_from_slice(&part.dates);
            row += part.n_obs();
        }
        ReturnPanel::new(dates, first.labels.clone(), returns)
    }
}

fn check_shape(dates: &[NaiveDate], labels: &[String], m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != dates.len() || m.ncols() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}×{} matrix with {} dates and {} labels",
            m.nrows(),
            m.ncols(),
            dates.len(),
            labels.len()
        )));
    }
    Ok(())
}

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] == w[0] {
            return Err(Error::DuplicateDate(w[0]));
        }
        if w[1] < w[0] {
            return Err(Error::UnsortedDates { prev: w[0], next: w[1] });
        }
    }
    Ok(())
}

fn check_labels(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// Reads a price table and aligns the selected series on common dates.
///
/// Rows may appear in any order; the result is sorted by date. Prices must be
/// strictly positive. Cells such as `""`, `NA` or `NaN` count as missing and
/// are resolved by `spec.missing`.
pub fn load_price_panel<R: Read>(source: R, spec: &IngestSpec) -> Result<PricePanel> {
    let mut reader = csv::ReaderBuilder::new().delimiter(spec.delimiter).trim(csv::Trim::All).from_reader(source);
    let header = reader.headers()?.clone();
    let col_of =
        |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let date_col = col_of(&spec.date_column)?;
    let labels: Vec<String> = match &spec.series {
        Some(s) => s.clone(),
        None => header.iter().enumerate().filter(|&(i, _)| i != date_col).map(|(_, h)| h.to_string()).collect(),
    };
    if labels.is_empty() {
        return Err(Error::InvalidParameter("no price columns selected".into()));
    }
    check_labels(&labels)?;
    let cols = labels.iter().map(|l| col_of(l)).collect::<Result<Vec<_>>>()?;

    let mut rows: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_date = record.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, &spec.date_format).map_err(|_| Error::BadDate {
            line,
            value: raw_date.to_string(),
            format: spec.date_format.clone(),
        })?;
        let mut values = Vec::with_capacity(cols.len());
        for (&c, label) in cols.iter().zip(&labels) {
            let cell = record.get(c).unwrap_or("");
            if MISSING_TOKENS.contains(&cell) {
                values.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() && v > 0.0 => values.push(Some(v)),
                _ => return Err(Error::BadPrice { line, series: label.clone(), value: cell.to_string() }),
            }
        }
        if rows.insert(date, values).is_some() {
            return Err(Error::DuplicateDate(date));
        }
    }

    let aligned = align(rows, &labels, spec.missing)?;
    if aligned.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let dates: Vec<NaiveDate> = aligned.iter().map(|(d, _)| *d).collect();
    let k = labels.len();
    let prices = DMatrix::from_fn(dates.len(), k, |t, j| aligned[t].1[j]);
    PricePanel::new(dates, labels, prices)
}

fn align(
    rows: BTreeMap<NaiveDate, Vec<Option<f64>>>,
    labels: &[String],
    policy: MissingPolicy,
) -> Result<Vec<(NaiveDate, Vec<f64>)>> {
    match policy {
        MissingPolicy::DropRow => Ok(rows
            .into_iter()
            .filter_map(|(d, v)| v.into_iter().collect::<Option<Vec<_>>>().map(|v| (d, v)))
            .collect()),
        MissingPolicy::ForwardFill { max_gap } => {
            let k = labels.len();
            let mut last: Vec<Option<f64>> = vec![None; k];
            let mut gap = vec![0usize; k];
            let mut out = Vec::with_capacity(rows.len());
            for (date, values) in rows {
                for j in 0..k {
                    match values[j] {
                        Some(v) => {
                            last[j] = Some(v);
                            gap[j] = 0;
                        }
                        None if last[j].is_some() => {
                            gap[j] += 1;
                            if gap[j] > max_gap {
                                return Err(Error::GapExceeded {
                                    series: labels[j].clone(),
                                    gap: gap[j],
                                    max_gap,
                                    date,
                                });
                            }
                        }
                        None => {}
                    }
                }
                if let Some(filled) = last.iter().copied().collect::<Option<Vec<_>>>() {
                    out.push((date, filled));
                }
            }
            Ok(out)
        }
    }
}

/// Log returns of every series; the first price date is dropped.
pub fn compute_log_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let t = panel.n_obs();
    if t < 2 {
        return Err(Error::InsufficientData { required: 2, actual: t });
    }
    let logs = panel.prices.map(f64::ln);
    let returns = logs.rows(1, t - 1) - logs.rows(0, t - 1);
    ReturnPanel::new(panel.dates[1..].to_vec(), panel.labels.clone(), returns)
}
