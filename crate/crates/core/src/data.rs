// SPDX-License-Identifier: MIT OR Apache-2.0

//! Ordered datasets, segmentations, and CSV ingestion.
//!
//! Rows are always kept in the order they were supplied; nothing here sorts.

use crate::error::{Error, Result};
use crate::real::Real;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Continuous,
    Binary,
    Count,
    CensoredTime,
}

/// `n` ordered observations: a response, an optional event indicator
/// (censored-time data only), and an `n × p` covariate matrix. The intercept
/// is added by the models and is not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    kind: ResponseKind,
    response: Vec<T>,
    event: Option<Vec<bool>>,
    covariates: Vec<T>,
    p: usize,
    response_name: String,
    covariate_names: Vec<String>,
}

impl<T: Real> Dataset<T> {
    /// Builds a dataset without an event indicator. `covariate_rows` may be
    /// empty (no covariates) or hold one row per observation.
    pub fn new(kind: ResponseKind, response: Vec<T>, covariate_rows: Vec<Vec<T>>) -> Result<Self> {
        if kind == ResponseKind::CensoredTime {
            return Err(Error::invalid(
                "censored-time data needs an event indicator; use Dataset::censored",
            ));
        }
        Self::assemble(kind, response, None, covariate_rows)
    }

    pub fn censored(time: Vec<T>, event: Vec<bool>, covariate_rows: Vec<Vec<T>>) -> Result<Self> {
        Self::assemble(ResponseKind::CensoredTime, time, Some(event), covariate_rows)
    }

    fn assemble(
        kind: ResponseKind,
        response: Vec<T>,
        event: Option<Vec<bool>>,
        covariate_rows: Vec<Vec<T>>,
    ) -> Result<Self> {
        let n = response.len();
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 observations, got {n}")));
        }
        let p = if covariate_rows.is_empty() {
            0
        } else {
            if covariate_rows.len() != n {
                return Err(Error::invalid(format!(
                    "{} covariate rows for {n} responses",
                    covariate_rows.len()
                )));
            }
            covariate_rows[0].len()
        };
        let mut covariates = Vec::with_capacity(n * p);
        for (i, row) in covariate_rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("expected {p} covariates, found {}", row.len()),
                });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("non-finite covariate {v}"),
                });
            }
            covariates.extend_from_slice(row);
        }
        if let Some(ev) = &event {
            if ev.len() != n {
                return Err(Error::invalid(format!("{} event flags for {n} times", ev.len())));
            }
        }
        for (i, &y) in response.iter().enumerate() {
            validate_response(kind, y).map_err(|message| Error::Parse { row: i + 1, message })?;
        }
        let (response_name, covariate_names) = default_names(kind, p);
        Ok(Self {
            kind,
            response,
            event,
            covariates,
            p,
            response_name,
            covariate_names,
        })
    }

    pub fn with_names(mut self, response: impl Into<String>, covariates: Vec<String>) -> Result<Self> {
        if covariates.len() != self.p {
            return Err(Error::invalid(format!(
                "{} covariate names for {} covariates",
                covariates.len(),
                self.p
            )));
        }
        self.response_name = response.into();
        self.covariate_names = covariates;
        Ok(self)
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    /// Number of stored covariates (intercept excluded).
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn y(&self, i: usize) -> T {
        self.response[i]
    }

    pub fn response(&self) -> &[T] {
        &self.response
    }

    /// Event indicator; always `true` for uncensored kinds.
    #[inline]
    pub fn event(&self, i: usize) -> bool {
        self.event.as_ref().is_none_or(|e| e[i])
    }

    pub fn events(&self) -> Option<&[bool]> {
        self.event.as_deref()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.covariates[i * self.p..(i + 1) * self.p]
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Copies the contiguous block `range` into a new dataset.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.n() || range.start >= range.end {
            return Err(Error::invalid(format!("bad slice {range:?} of {} rows", self.n())));
        }
        let order: Vec<usize> = range.collect();
        self.reordered(&order)
    }

    /// New dataset whose row `r` is row `order[r]` of `self`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        if order.len() < 2 {
            return Err(Error::invalid("a dataset needs at least 2 observations"));
        }
        let mut covariates = Vec::with_capacity(order.len() * self.p);
        for &i in order {
            covariates.extend_from_slice(self.row(i));
        }
        Ok(Self {
            kind: self.kind,
            response: order.iter().map(|&i| self.response[i]).collect(),
            event: self.event.as_ref().map(|e| order.iter().map(|&i| e[i]).collect()),
            covariates,
            p: self.p,
            response_name: self.response_name.clone(),
            covariate_names: self.covariate_names.clone(),
        })
    }

    /// Same dataset with covariate column `j` multiplied by `factor`.
    pub fn with_scaled_covariate(&self, j: usize, factor: T) -> Self {
        let mut out = self.clone();
        for i in 0..out.n() {
            out.covariates[i * out.p + j] *= factor;
        }
        out
    }

    /// Same dataset with covariate columns permuted: new column `c` is old
    /// column `perm[c]`.
    pub fn with_permuted_covariates(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for i in 0..out.n() {
            for (c, &src) in perm.iter().enumerate() {
                out.covariates[i * out.p + c] = self.covariates[i * self.p + src];
            }
        }
        out.covariate_names = perm.iter().map(|&s| self.covariate_names[s].clone()).collect();
        out
    }
}

fn default_names(kind: ResponseKind, p: usize) -> (String, Vec<String>) {
    let response = if kind == ResponseKind::CensoredTime { "time" } else { "y" };
    (response.to_string(), (1..=p).map(|j| format!("x{j}")).collect())
}

fn validate_response<T: Real>(kind: ResponseKind, y: T) -> std::result::Result<(), String> {
    if !y.is_finite() {
        return Err(format!("non-finite response {y}"));
    }
    match kind {
        ResponseKind::Continuous => Ok(()),
        ResponseKind::Binary if y == T::zero() || y == T::one() => Ok(()),
        ResponseKind::Binary => Err(format!("binary response must be 0 or 1, found {y}")),
        ResponseKind::Count if y >= T::zero() && y.fract() == T::zero() => Ok(()),
        ResponseKind::Count => Err(format!("count response must be a non-negative integer, found {y}")),
        ResponseKind::CensoredTime if y > T::zero() => Ok(()),
        ResponseKind::CensoredTime => Err(format!("time must be strictly positive, found {y}")),
    }
}

/// Observation subset handed to the models: a contiguous block or an
/// explicit index list.
#[derive(Clone, Debug)]
pub enum Rows<'a> {
    Range(Range<usize>),
    Indices(&'a [usize]),
}

impl<'a> Rows<'a> {
    pub fn len(&self) -> usize {
        match self {
            Rows::Range(r) => r.len(),
            Rows::Indices(ix) => ix.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> RowsIter<'a> {
        match self {
            Rows::Range(r) => RowsIter::Range(r.clone()),
            Rows::Indices(ix) => RowsIter::Indices(ix.iter()),
        }
    }
}

impl From<Range<usize>> for Rows<'_> {
    fn from(r: Range<usize>) -> Self {
        Rows::Range(r)
    }
}

impl<'a> From<&'a [usize]> for Rows<'a> {
    fn from(ix: &'a [usize]) -> Self {
        Rows::Indices(ix)
    }
}

impl<'a> From<&'a Vec<usize>> for Rows<'a> {
    fn from(ix: &'a Vec<usize>) -> Self {
        Rows::Indices(ix)
    }
}

pub enum RowsIter<'a> {
    Range(Range<usize>),
    Indices(std::slice::Iter<'a, usize>),
}

impl Iterator for RowsIter<'_> {
    type Item = usize;
    #[inline]
    fn next(&mut self) -> Option<usize> {
        match self {
            RowsIter::Range(r) => r.next(),
            RowsIter::Indices(it) => it.next().copied(),
        }
    }
}

/// Breakpoints `0 < n_1 < … < n_{K-1} < n`. Breakpoint `n_k` is the number of
/// observations in the first `k` segments, so segment `k` (0-based) is the
/// half-open row range `n_k..n_{k+1}`, i.e. rows `n_k + 1 ..= n_{k+1}` in
/// 1-based numbering.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Segmentation {
    n: usize,
    breakpoints: Vec<usize>,
}

impl Segmentation {
    pub fn new(n: usize, breakpoints: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("segmentation of zero observations"));
        }
        let mut prev = 0;
        for &b in &breakpoints {
            if b <= prev || b >= n {
                return Err(Error::Infeasible(format!(
                    "breakpoints {breakpoints:?} must be strictly increasing in 1..{}",
                    n - 1
                )));
            }
            prev = b;
        }
        Ok(Self { n, breakpoints })
    }

    /// One segment covering everything.
    pub fn single(n: usize) -> Self {
        Self {
            n,
            breakpoints: Vec::new(),
        }
    }

    /// Splits `n` rows into `k` segments of near-equal length.
    pub fn even(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::Infeasible(format!("cannot split {n} rows into {k} segments")));
        }
        Self::new(n, (1..k).map(|j| j * n / k).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_segments(&self) -> usize {
        self.breakpoints.len() + 1
    }

    pub fn breakpoints(&self) -> &[usize] {
        &self.breakpoints
    }

    /// Rows of segment `k` (0-based), as a half-open 0-based range.
    pub fn segment(&self, k: usize) -> Result<Range<usize>> {
        let kk = self.num_segments();
        if k >= kk {
            return Err(Error::invalid(format!("segment {k} out of range 0..{kk}")));
        }
        let start = if k == 0 { 0 } else { self.breakpoints[k - 1] };
        let end = if k + 1 == kk { self.n } else { self.breakpoints[k] };
        Ok(start..end)
    }

    pub fn segments(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.num_segments()).map(move |k| self.segment(k).expect("k in range"))
    }

    /// Segment label of every row.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        for (k, r) in self.segments().enumerate() {
            out.extend(std::iter::repeat_n(k, r.len()));
        }
        out
    }

    /// Inverse of [`labels`](Self::labels). Labels must start at 0 and move
    /// up by exactly one at each change.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() || labels[0] != 0 {
            return Err(Error::Infeasible("labels must start at segment 0".into()));
        }
        let mut bps = Vec::new();
        for i in 1..labels.len() {
            match labels[i].checked_sub(labels[i - 1]) {
                Some(0) => {}
                Some(1) => bps.push(i),
                _ => {
                    return Err(Error::Infeasible(format!(
                        "label step {} -> {} at row {}",
                        labels[i - 1],
                        labels[i],
                        i + 1
                    )))
                }
            }
        }
        Self::new(labels.len(), bps)
    }
}

/// Column layout of a CSV file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvSchema {
    pub kind: ResponseKind,
    /// Response column (the time column for censored data). `None` means the
    /// first column.
    pub response: Option<String>,
    /// Event column for censored data. `None` means the column after the time.
    pub status: Option<String>,
    /// Covariate columns. `None` means every remaining column.
    pub covariates: Option<Vec<String>>,
}

impl CsvSchema {
    /// Response first (`time,status` first for censored data), covariates after.
    pub fn positional(kind: ResponseKind) -> Self {
        Self {
            kind,
            response: None,
            status: None,
            covariates: None,
        }
    }

    pub fn named(kind: ResponseKind, response: &str, covariates: &[&str]) -> Self {
        Self {
            kind,
            response: Some(response.to_string()),
            status: None,
            covariates: Some(covariates.iter().map(|s| s.to_string()).collect()),
        }
    }

    pub fn censored(time: &str, status: &str, covariates: &[&str]) -> Self {
        Self {
            kind: ResponseKind::CensoredTime,
            response: Some(time.to_string()),
            status: Some(status.to_string()),
            covariates: Some(covariates.iter().map(|s| s.to_string()).collect()),
        }
    }
}

pub fn load_csv<T: Real>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset<T>> {
    read_csv(std::fs::File::open(path)?, schema)
}

pub fn read_csv<T: Real, R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let censored = schema.kind == ResponseKind::CensoredTime;
    let y_col = match &schema.response {
        Some(name) => find(name)?,
        None if header.is_empty() => return Err(Error::MissingColumn("response".into())),
        None => 0,
    };
    let status_col = if censored {
        Some(match &schema.status {
            Some(name) => find(name)?,
            None if header.len() > y_col + 1 => y_col + 1,
            None => return Err(Error::MissingColumn("status".into())),
        })
    } else {
        None
    };
    let x_cols: Vec<usize> = match &schema.covariates {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..header.len())
            .filter(|&c| c != y_col && Some(c) != status_col)
            .collect(),
    };

    let mut response = Vec::new();
    let mut events = Vec::new();
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record?;
        let cell = |c: usize| -> Result<T> {
            let raw = record.get(c).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::Parse {
                    row,
                    message: format!("missing value in column '{}'", header[c]),
                });
            }
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                message: format!("non-numeric value '{raw}' in column '{}'", header[c]),
            })?;
            T::from_f64(v).ok_or_else(|| Error::Parse {
                row,
                message: format!("value '{raw}' not representable"),
            })
        };
        let y = cell(y_col)?;
        validate_response(schema.kind, y).map_err(|message| Error::Parse { row, message })?;
        response.push(y);
        if let Some(sc) = status_col {
            let s = cell(sc)?;
            if s == T::one() {
                events.push(true);
            } else if s == T::zero() {
                events.push(false);
            } else {
                return Err(Error::Parse {
                    row,
                    message: format!("status must be 0 or 1, found {s}"),
                });
            }
        }
        rows.push(x_cols.iter().map(|&c| cell(c)).collect::<Result<Vec<T>>>()?);
    }
    if x_cols.is_empty() {
        rows.clear();
    }
    let ds = if censored {
        Dataset::censored(response, events, rows)?
    } else {
        Dataset::new(schema.kind, response, rows)?
    };
    ds.with_names(
        header[y_col].clone(),
        x_cols.iter().map(|&c| header[c].clone()).collect(),
    )
}

/// Writes the dataset with a header row; censored data is written as
/// `time,status,<covariates>`. Values use the shortest representation that
/// parses back to the same float.
pub fn write_csv<T: Real, W: Write>(ds: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![ds.response_name().to_string()];
    if ds.kind() == ResponseKind::CensoredTime {
        header.push("status".into());
    }
    header.extend(ds.covariate_names().iter().cloned());
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec = vec![ds.y(i).to_string()];
        if ds.kind() == ResponseKind::CensoredTime {
            rec.push(if ds.event(i) { "1" } else { "0" }.to_string());
        }
        rec.extend(ds.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv<T: Real>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    write_csv(ds, std::fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_members_follow_definition() {
        let s = Segmentation::new(10, vec![4]).unwrap();
        assert_eq!(s.segment(0).unwrap(), 0..4); // rows 1..=4
        assert_eq!(s.segment(1).unwrap(), 4..10); // rows 5..=10
        let s = Segmentation::new(6, vec![2, 4]).unwrap();
        assert_eq!(s.segment(1).unwrap(), 2..4); // rows 3..=4
        assert!(s.segment(3).is_err());
    }

    #[test]
    fn rejects_unordered_breakpoints() {
        assert!(Segmentation::new(10, vec![4, 4]).is_err());
        assert!(Segmentation::new(10, vec![0]).is_err());
        assert!(Segmentation::new(10, vec![10]).is_err());
        assert!(Segmentation::new(10, vec![6, 3]).is_err());
    }

    #[test]
    fn labels_roundtrip() {
        let s = Segmentation::new(7, vec![1, 5]).unwrap();
        assert_eq!(s.labels(), vec![0, 1, 1, 1, 1, 2, 2]);
        assert_eq!(Segmentation::from_labels(&s.labels()).unwrap(), s);
        assert!(Segmentation::from_labels(&[0, 0, 2]).is_err());
        assert!(Segmentation::from_labels(&[0, 1, 0]).is_err());
        assert!(Segmentation::from_labels(&[1, 1]).is_err());
    }

    #[test]
    fn loads_continuous_csv() {
        let csv = "y,x1\n1.5,0.1\n2.0,0.2\n-3,0.3\n4,0.4\n";
        let ds: Dataset<f64> =
            read_csv(csv.as_bytes(), &CsvSchema::positional(ResponseKind::Continuous)).unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.p(), 1);
        assert_eq!(ds.y(2), -3.0);
        assert_eq!(ds.row(3), &[0.4]);
    }

    #[test]
    fn binary_value_outside_range_names_row() {
        let csv = "y,x\n0,1\n1,2\n2,3\n";
        let err = read_csv::<f64, _>(csv.as_bytes(), &CsvSchema::positional(ResponseKind::Binary))
            .unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn loads_censored_csv() {
        let csv = "time,status,x1,x2\n1.2,1,0.1,0.2\n3.4,0,0.3,0.4\n0.5,1,0.5,0.6\n";
        let ds: Dataset<f64> = read_csv(
            csv.as_bytes(),
            &CsvSchema::censored("time", "status", &["x1", "x2"]),
        )
        .unwrap();
        assert_eq!(ds.events().unwrap(), &[true, false, true]);
        assert_eq!(ds.p(), 2);
    }

    #[test]
    fn rejects_bad_cells() {
        let schema = CsvSchema::positional(ResponseKind::Continuous);
        assert!(matches!(
            read_csv::<f64, _>("y,x\n1,a\n2,3\n".as_bytes(), &schema),
            Err(Error::Parse { row: 1, .. })
        ));
        assert!(matches!(
            read_csv::<f64, _>("y,x\n1,1\n,3\n".as_bytes(), &schema),
            Err(Error::Parse { row: 2, .. })
        ));
        let named = CsvSchema::named(ResponseKind::Continuous, "y", &["z"]);
        assert!(matches!(
            read_csv::<f64, _>("y,x\n1,1\n2,3\n".as_bytes(), &named),
            Err(Error::MissingColumn(c)) if c == "z"
        ));
        let cens = CsvSchema::positional(ResponseKind::CensoredTime);
        assert!(matches!(
            read_csv::<f64, _>("t,s\n1,1\n0,0\n".as_bytes(), &cens),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let ds = Dataset::censored(
            vec![0.1 + 0.2, 1e-300, 7.0],
            vec![true, false, true],
            vec![vec![1.0 / 3.0], vec![-2.5e10], vec![f64::MIN_POSITIVE]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back: Dataset<f64> =
            read_csv(buf.as_slice(), &CsvSchema::positional(ResponseKind::CensoredTime)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn dataset_rejects_non_finite_covariates() {
        assert!(Dataset::new(
            ResponseKind::Continuous,
            vec![1.0, 2.0],
            vec![vec![1.0], vec![f64::NAN]]
        )
        .is_err());
        assert!(Dataset::<f64>::new(ResponseKind::Continuous, vec![1.0], vec![]).is_err());
    }
}
