//! Connectedness tables and the directional indices derived from them.
//!
//! A [`ConnectednessTable`] is a `K × K` matrix in percent whose `(k, i)`
//! entry is the spillover *from* series `i` *to* series `k`: rows are
//! receivers, columns are sources. Tables produced by the R² engine also
//! carry the contemporaneous/lagged split; GFEVD-based tables only carry the
//! total.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which part of a connectedness table an index or network refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Overall,
    Contemporaneous,
    Lagged,
}

impl SplitKind {
    pub const ALL: [SplitKind; 3] = [SplitKind::Overall, SplitKind::Contemporaneous, SplitKind::Lagged];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Overall => "overall",
            SplitKind::Contemporaneous => "contemporaneous",
            SplitKind::Lagged => "lagged",
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overall" => Ok(SplitKind::Overall),
            "contemporaneous" => Ok(SplitKind::Contemporaneous),
            "lagged" => Ok(SplitKind::Lagged),
            other => Err(Error::InvalidParameter(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrices {
    /// Zero diagonal.
    pub contemporaneous: DMatrix<f64>,
    /// Diagonal holds own-lag contributions.
    pub lagged: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectednessTable {
    labels: Vec<String>,
    total: DMatrix<f64>,
    split: Option<SplitMatrices>,
}

fn check_square(labels: &[String], m: &DMatrix<f64>, what: &str) -> Result<()> {
    let k = labels.len();
    if m.shape() != (k, k) {
        return Err(Error::DimensionMismatch(format!(
            "{what} matrix is {}×{}, expected {k}×{k}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

impl ConnectednessTable {
    /// Table with a contemporaneous/lagged split; `total = C + L`.
    pub fn from_split(labels: Vec<String>, contemporaneous: DMatrix<f64>, lagged: DMatrix<f64>) -> Result<Self> {
        check_square(&labels, &contemporaneous, "contemporaneous")?;
        check_square(&labels, &lagged, "lagged")?;
        if let Some(k) = (0..labels.len()).find(|&k| contemporaneous[(k, k)] != 0.0) {
            return Err(Error::MalformedTable(format!("contemporaneous diagonal for {} must be zero", labels[k])));
        }
        Ok(ConnectednessTable {
            total: &contemporaneous + &lagged,
            labels,
            split: Some(SplitMatrices { contemporaneous, lagged }),
        })
    }

    /// Table without a split (GFEVD engines).
    pub fn from_total(labels: Vec<String>, total: DMatrix<f64>) -> Result<Self> {
        check_square(&labels, &total, "total")?;
        Ok(ConnectednessTable { labels, total, split: None })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_series(&self) -> usize {
        self.labels.len()
    }

    pub fn total(&self) -> &DMatrix<f64> {
        &self.total
    }

    pub fn split(&self) -> Option<&SplitMatrices> {
        self.split.as_ref()
    }

    pub fn matrix(&self, kind: SplitKind) -> Option<&DMatrix<f64>> {
        match kind {
            SplitKind::Overall => Some(&self.total),
            SplitKind::Contemporaneous => self.split.as_ref().map(|s| &s.contemporaneous),
            SplitKind::Lagged => self.split.as_ref().map(|s| &s.lagged),
        }
    }

    /// Splits available for this table, overall first.
    pub fn kinds(&self) -> Vec<SplitKind> {
        if self.split.is_some() {
            SplitKind::ALL.to_vec()
        } else {
            vec![SplitKind::Overall]
        }
    }

    /// Multiplies every entry by `factor` (e.g. `0.01` for raw fractions).
    pub fn scaled(&self, factor: f64) -> Self {
        ConnectednessTable {
            labels: self.labels.clone(),
            total: &self.total * factor,
            split: self
                .split
                .as_ref()
                .map(|s| SplitMatrices { contemporaneous: &s.contemporaneous * factor, lagged: &s.lagged * factor }),
        }
    }

    /// Element-wise mean of tables sharing labels and split structure.
    pub fn mean(tables: &[ConnectednessTable]) -> Result<Self> {
        let first = tables.first().ok_or_else(|| Error::InvalidParameter("no tables to average".into()))?;
        let n = tables.len() as f64;
        let k = first.n_series();
        let mut total = DMatrix::zeros(k, k);
        let mut c = DMatrix::zeros(k, k);
        let mut l = DMatrix::zeros(k, k);
        for t in tables {
            if t.labels != first.labels || t.split.is_some() != first.split.is_some() {
                return Err(Error::DimensionMismatch("tables to average differ in labels or split".into()));
            }
            total += &t.total;
            if let Some(s) = &t.split {
                c += &s.contemporaneous;
                l += &s.lagged;
            }
        }
        if first.split.is_some() {
            let mut out = ConnectednessTable::from_split(first.labels.clone(), c / n, l / n)?;
            // Keep the averaged total rather than re-adding rounded parts.
            out.total = total / n;
            Ok(out)
        } else {
            ConnectednessTable::from_total(first.labels.clone(), total / n)
        }
    }

    /// Reorders series: entry `perm[a]` of the original becomes position `a`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let k = self.n_series();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
        let pm = |m: &DMatrix<f64>| DMatrix::from_fn(k, k, |i, j| m[(perm[i], perm[j])]);
        Ok(ConnectednessTable {
            labels: perm.iter().map(|&p| self.labels[p].clone()).collect(),
            total: pm(&self.total),
            split: self
                .split
                .as_ref()
                .map(|s| SplitMatrices { contemporaneous: pm(&s.contemporaneous), lagged: pm(&s.lagged) }),
        })
    }
}

/// TO/FROM/NET/Inc.Own per series and the TCI for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directional {
    pub to: Vec<f64>,
    pub from: Vec<f64>,
    pub net: Vec<f64>,
    /// TO plus the diagonal entry.
    pub inc_own: Vec<f64>,
    /// Σ TO / K.
    pub tci: f64,
}

impl Directional {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let k = m.nrows();
        let mut to = vec![0.0; k];
        let mut from = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    // m[(i, j)]: from j to i.
                    to[j] += m[(i, j)];
                    from[i] += m[(i, j)];
                }
            }
        }
        let net = to.iter().zip(&from).map(|(t, f)| t - f).collect();
        let inc_own = (0..k).map(|i| to[i] + m[(i, i)]).collect();
        let tci = if k > 0 { to.iter().sum::<f64>() / k as f64 } else { 0.0 };
        Directional { to, from, net, inc_own, tci }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverIndices {
    pub labels: Vec<String>,
    pub overall: Directional,
    pub contemporaneous: Option<Directional>,
    pub lagged: Option<Directional>,
}

impl SpilloverIndices {
    pub fn get(&self, kind: SplitKind) -> Option<&Directional> {
        match kind {
            SplitKind::Overall => Some(&self.overall),
            SplitKind::Contemporaneous => self.contemporaneous.as_ref(),
            SplitKind::Lagged => self.lagged.as_ref(),
        }
    }

    pub fn tci(&self) -> f64 {
        self.overall.tci
    }
}

/// Directional indices for every split of `table`.
///
/// `TO_i` and `FROM_i` exclude the diagonal, so own-lag effects enter only
/// `Inc.Own`, and `TCI = Σ_i TO_i / K`.
pub fn aggregate_indices(table: &ConnectednessTable) -> SpilloverIndices {
    SpilloverIndices {
        labels: table.labels.clone(),
        overall: Directional::from_matrix(&table.total),
        contemporaneous: table.split.as_ref().map(|s| Directional::from_matrix(&s.contemporaneous)),
        lagged: table.split.as_ref().map(|s| Directional::from_matrix(&s.lagged)),
    }
}

/// Net pairwise directional connectedness; `[(i, j)] > 0` means `i` is a net
/// transmitter to `j`. Every matrix is exactly antisymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Npdc {
    pub labels: Vec<String>,
    pub overall: DMatrix<f64>,
    pub contemporaneous: Option<DMatrix<f64>>,
    pub lagged: Option<DMatrix<f64>>,
}

impl Npdc {
    pub fn get(&self, kind: SplitKind) -> Option<&DMatrix<f64>> {
        match kind {
            SplitKind::Overall => Some(&self.overall),
            SplitKind::Contemporaneous => self.contemporaneous.as_ref(),
            SplitKind::Lagged => self.lagged.as_ref(),
        }
    }
}

fn net_pairwise(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows();
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i + 1..k {
            let v = m[(j, i)] - m[(i, j)];
            out[(i, j)] = v;
            out[(j, i)] = -v;
        }
    }
    out
}

pub fn npdc(table: &ConnectednessTable) -> Npdc {
    Npdc {
        labels: table.labels.clone(),
        overall: net_pairwise(&table.total),
        contemporaneous: table.split.as_ref().map(|s| net_pairwise(&s.contemporaneous)),
        lagged: table.split.as_ref().map(|s| net_pairwise(&s.lagged)),
    }
}

// ---------------------------------------------------------------------------
// Appendix-style CSV layout
// ---------------------------------------------------------------------------

fn fmt_num(v: f64, precision: usize) -> String {
    let s = format!("{v:.precision$}");
    // Avoid "-0.00".
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn fmt_pair(a: f64, b: f64, precision: usize) -> String {
    format!("({}, {})", fmt_num(a, precision), fmt_num(b, precision))
}

/// Writes the table in the appendix layout: one row of totals per receiver
/// followed by a row of `(contemporaneous, lagged)` pairs, then TO, Inc.Own
/// and NET rows, with FROM as the last column and TCI in the bottom-right
/// corner. Split cells are empty for tables without a split.
pub fn write_appendix_csv<W: Write>(table: &ConnectednessTable, writer: W, precision: usize) -> Result<()> {
    let idx = aggregate_indices(table);
    let k = table.n_series();
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(writer);
    let num = |v: f64| fmt_num(v, precision);
    let split = table.split.as_ref();
    let pair_row = |first: &str, cells: &dyn Fn(usize) -> (f64, f64), last: String| {
        let mut row = vec![first.to_string()];
        for i in 0..k {
            row.push(match split {
                Some(_) => {
                    let (a, b) = cells(i);
                    fmt_pair(a, b, precision)
                }
                None => String::new(),
            });
        }
        row.push(last);
        row
    };
    let pair_last = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => fmt_pair(a, b, precision),
        _ => String::new(),
    };
    let c = idx.contemporaneous.as_ref();
    let l = idx.lagged.as_ref();

    let mut header = vec![String::new()];
    header.extend(table.labels.iter().cloned());
    header.push("FROM".into());
    w.write_record(&header)?;

    for r in 0..k {
        let mut row = vec![table.labels[r].clone()];
        row.extend(table.total.row(r).iter().map(|&v| num(v)));
        row.push(num(idx.overall.from[r]));
        w.write_record(&row)?;
        let cells = |i: usize| {
            let s = split.expect("split present");
            (s.contemporaneous[(r, i)], s.lagged[(r, i)])
        };
        w.write_record(pair_row("", &cells, pair_last(c.map(|d| d.from[r]), l.map(|d| d.from[r]))))?;
    }

    let sum = |d: &Directional| d.to.iter().sum::<f64>();
    let mut row = vec!["TO".to_string()];
    row.extend(idx.overall.to.iter().map(|&v| num(v)));
    row.push(num(sum(&idx.overall)));
    w.write_record(&row)?;
    w.write_record(pair_row("", &|i| (c.unwrap().to[i], l.unwrap().to[i]), pair_last(c.map(sum), l.map(sum))))?;

    let mut row = vec!["Inc.Own".to_string()];
    row.extend(idx.overall.inc_own.iter().map(|&v| num(v)));
    row.push("TCI".into());
    w.write_record(&row)?;
    w.write_record(pair_row(
        "",
        &|i| (c.unwrap().inc_own[i], l.unwrap().inc_own[i]),
        if split.is_some() { "(TCI^C, TCI^L)".into() } else { String::new() },
    ))?;

    let mut row = vec!["NET".to_string()];
    row.extend(idx.overall.net.iter().map(|&v| num(v)));
    row.push(num(idx.overall.tci));
    w.write_record(&row)?;
    w.write_record(pair_row(
        "",
        &|i| (c.unwrap().net[i], l.unwrap().net[i]),
        pair_last(c.map(|d| d.tci), l.map(|d| d.tci)),
    ))?;
    w.flush()?;
    Ok(())
}

/// A table read back from the appendix layout, together with the index
/// values printed alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixTable {
    /// Built from the `(C, L)` pairs when present, else from the totals.
    pub table: ConnectednessTable,
    /// The per-cell totals exactly as printed.
    pub printed_totals: DMatrix<f64>,
    /// TO/FROM/NET/Inc.Own/TCI exactly as printed.
    pub printed: SpilloverIndices,
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::MalformedTable(format!("expected a number, found {s:?}")))
}

fn parse_pair(s: &str) -> Result<Option<(f64, f64)>> {
    let t = s.trim();
    if t.is_empty() {
        return Ok(None);
    }
    let inner = t
        .strip_prefix('(')
        .and_then(|x| x.strip_suffix(')'))
        .ok_or_else(|| Error::MalformedTable(format!("expected \"(a, b)\", found {s:?}")))?;
    let (a, b) =
        inner.split_once(',').ok_or_else(|| Error::MalformedTable(format!("expected \"(a, b)\", found {s:?}")))?;
    Ok(Some((parse_num(a)?, parse_num(b)?)))
}

/// Parses the layout produced by [`write_appendix_csv`].
pub fn read_appendix_csv<R: Read>(reader: R) -> Result<AppendixTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(false).from_reader(reader);
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let header = rows.first().ok_or_else(|| Error::MalformedTable("empty file".into()))?;
    let k = header.len().saturating_sub(2);
    if k == 0 || rows.len() != 1 + 2 * k + 6 {
        return Err(Error::MalformedTable(format!(
            "expected {} rows for {k} series, found {}",
            1 + 2 * k + 6,
            rows.len()
        )));
    }
    let labels: Vec<String> = header.iter().skip(1).take(k).map(str::to_string).collect();

    let mut totals = DMatrix::zeros(k, k);
    let mut c = DMatrix::zeros(k, k);
    let mut l = DMatrix::zeros(k, k);
    let mut has_split = true;
    let mut from = vec![0.0; k];
    let mut from_c = vec![0.0; k];
    let mut from_l = vec![0.0; k];
    for r in 0..k {
        let main = &rows[1 + 2 * r];
        let pairs = &rows[2 + 2 * r];
        if main.get(0).map(str::trim) != Some(labels[r].as_str()) {
            return Err(Error::MalformedTable(format!("row {} should be labelled {}", 1 + 2 * r, labels[r])));
        }
        for i in 0..k {
            totals[(r, i)] = parse_num(&main[1 + i])?;
            match parse_pair(&pairs[1 + i])? {
                Some((a, b)) => {
                    c[(r, i)] = a;
                    l[(r, i)] = b;
                }
                None => has_split = false,
            }
        }
        from[r] = parse_num(&main[k + 1])?;
        if let Some((a, b)) = parse_pair(&pairs[k + 1])? {
            from_c[r] = a;
            from_l[r] = b;
        }
    }

    let base = 1 + 2 * k;
    let nums = |row: usize| -> Result<Vec<f64>> { (1..=k).map(|i| parse_num(&rows[row][i])).collect() };
    let pairs = |row: usize| -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let mut a = Vec::with_capacity(k);
        let mut b = Vec::with_capacity(k);
        for cell in rows[row].iter().skip(1).take(k) {
            match parse_pair(cell)? {
                Some((x, y)) => {
                    a.push(x);
                    b.push(y);
                }
                None => return Ok(None),
            }
        }
        Ok(Some((a, b)))
    };
    let to = nums(base)?;
    let to_split = pairs(base + 1)?;
    let inc_own = nums(base + 2)?;
    let inc_split = pairs(base + 3)?;
    let net = nums(base + 4)?;
    let net_split = pairs(base + 5)?;
    let tci = parse_num(&rows[base + 4][k + 1])?;
    let tci_split = parse_pair(&rows[base + 5][k + 1])?;

    let printed_overall = Directional { to, from, net, inc_own, tci };
    let (contemporaneous, lagged) = match (has_split, to_split, inc_split, net_split, tci_split) {
        (true, Some(to), Some(inc), Some(net), Some(tci)) => (
            Some(Directional { to: to.0, from: from_c, net: net.0, inc_own: inc.0, tci: tci.0 }),
            Some(Directional { to: to.1, from: from_l, net: net.1, inc_own: inc.1, tci: tci.1 }),
        ),
        _ => (None, None),
    };
    let table = if has_split {
        ConnectednessTable::from_split(labels.clone(), c, l)?
    } else {
        ConnectednessTable::from_total(labels.clone(), totals.clone())?
    };
    Ok(AppendixTable {
        table,
        printed_totals: totals,
        printed: SpilloverIndices { labels, overall: printed_overall, contemporaneous, lagged },
    })
}
