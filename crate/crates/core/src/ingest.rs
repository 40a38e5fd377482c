//! Multi-stream price loading, alignment, cleaning and log-return transform.
//!
//! Input CSV layout: a header `date,<target>,<name1>,...`, then one row per
//! ISO-8601 date (`YYYY-MM-DD`) with decimal prices. An empty cell is a
//! missing observation. Split-factor files are `date,stream,factor`; every
//! price of `stream` dated strictly before `date` is multiplied by `factor`
//! (a 2-for-1 split therefore has factor 0.5).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fmt_f64;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },

    #[error("column {0:?} not found in header")]
    MissingColumn(String),

    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),

    #[error("no data rows")]
    Empty,

    #[error("stream {stream} has no value on the first date {date}; nothing to fill from")]
    HoleInFirstRow { stream: String, date: NaiveDate },

    #[error("stream {stream} has a missing value on {date}")]
    MissingValue { stream: String, date: NaiveDate },

    #[error("stream {stream} has non-positive price {price} on {date}")]
    NonPositivePrice {
        stream: String,
        date: NaiveDate,
        price: f64,
    },

    #[error("target stream {stream} is missing {fraction:.1}% of dates")]
    TargetTooSparse { stream: String, fraction: f64 },

    #[error("unknown stream {0}")]
    UnknownStream(String),

    #[error("split factor for {stream} on {date} must be positive and finite, got {factor}")]
    BadSplitFactor {
        stream: String,
        date: NaiveDate,
        factor: f64,
    },
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Which columns to take from an input file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub target: String,
    /// Explanatory streams in the desired order; `None` takes every other
    /// column in file order.
    pub explanatory: Option<Vec<String>>,
}

impl CsvSchema {
    pub fn target(name: impl Into<String>) -> Self {
        Self {
            target: name.into(),
            explanatory: None,
        }
    }
}

/// Aligned price panel. Column 0 is the target stream; `NaN` marks a missing
/// observation until the table has been cleaned.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub labels: Vec<String>,
    pub prices: DMatrix<f64>,
}

impl PriceTable {
    pub fn new(dates: Vec<NaiveDate>, labels: Vec<String>, prices: DMatrix<f64>) -> Self {
        assert_eq!(dates.len(), prices.nrows());
        assert_eq!(labels.len(), prices.ncols());
        Self {
            dates,
            labels,
            prices,
        }
    }

    pub fn rows(&self) -> usize {
        self.prices.nrows()
    }

    /// Number of explanatory streams.
    pub fn explanatory_count(&self) -> usize {
        self.prices.ncols().saturating_sub(1)
    }

    pub fn target_prices(&self) -> Vec<f64> {
        self.prices.column(0).iter().copied().collect()
    }

    pub fn has_holes(&self) -> bool {
        self.prices.iter().any(|v| v.is_nan())
    }

    /// Writes the table in the input CSV layout; holes become empty cells.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.labels.iter().cloned());
        wr.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format("%Y-%m-%d").to_string()];
            for j in 0..self.prices.ncols() {
                let v = self.prices[(i, j)];
                rec.push(if v.is_nan() { String::new() } else { fmt_f64(v) });
            }
            wr.write_record(&rec)?;
        }
        wr.flush()
    }
}

/// Log returns of a cleaned [`PriceTable`]; one row fewer than the prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub dates: Vec<NaiveDate>,
    pub labels: Vec<String>,
    /// `a_t`
    pub target: DVector<f64>,
    /// `r_t` as rows, `(T−1) × p`
    pub explanatory: DMatrix<f64>,
}

impl ReturnMatrix {
    pub fn rows(&self) -> usize {
        self.target.len()
    }

    pub fn dim(&self) -> usize {
        self.explanatory.ncols()
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.explanatory.row(t).iter().copied().collect()
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<PriceTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema)
}

/// Parses price CSV from any reader; rows come back sorted by date.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| IngestError::Malformed {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if header.is_empty() {
        return Err(IngestError::Malformed {
            line: 1,
            msg: "empty header".into(),
        });
    }
    let index: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let target_col = *index
        .get(schema.target.as_str())
        .ok_or_else(|| IngestError::MissingColumn(schema.target.clone()))?;
    let expl_names: Vec<String> = match &schema.explanatory {
        Some(names) => names.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != 0 && i != target_col)
            .map(|(_, h)| h.to_string())
            .collect(),
    };
    let mut cols = vec![target_col];
    for name in &expl_names {
        cols.push(
            *index
                .get(name.as_str())
                .ok_or_else(|| IngestError::MissingColumn(name.clone()))?,
        );
    }

    let mut rows: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IngestError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(IngestError::Malformed {
                line,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let date = parse_date(&rec[0]).ok_or_else(|| IngestError::Malformed {
            line,
            msg: format!("invalid date {:?}", &rec[0]),
        })?;
        let mut vals = Vec::with_capacity(cols.len());
        for &c in &cols {
            let cell = &rec[c];
            if cell.is_empty() {
                vals.push(f64::NAN);
            } else {
                let v: f64 = cell.parse().map_err(|_| IngestError::Malformed {
                    line,
                    msg: format!("invalid price {cell:?} in column {}", &header[c]),
                })?;
                if !v.is_finite() {
                    return Err(IngestError::Malformed {
                        line,
                        msg: format!("non-finite price {cell:?} in column {}", &header[c]),
                    });
                }
                vals.push(v);
            }
        }
        if rows.insert(date, vals).is_some() {
            return Err(IngestError::DuplicateDate(date));
        }
    }
    if rows.is_empty() {
        return Err(IngestError::Empty);
    }

    let mut labels = vec![schema.target.clone()];
    labels.extend(expl_names);
    let n = rows.len();
    let mut prices = DMatrix::zeros(n, labels.len());
    let mut dates = Vec::with_capacity(n);
    for (i, (d, vals)) in rows.into_iter().enumerate() {
        dates.push(d);
        for (j, v) in vals.into_iter().enumerate() {
            prices[(i, j)] = v;
        }
    }
    Ok(PriceTable::new(dates, labels, prices))
}

/// Replaces every hole with the latest preceding value of the same stream.
pub fn forward_fill(table: &PriceTable) -> Result<PriceTable> {
    if table.rows() == 0 {
        return Err(IngestError::Empty);
    }
    let mut out = table.clone();
    for j in 0..out.prices.ncols() {
        if out.prices[(0, j)].is_nan() {
            return Err(IngestError::HoleInFirstRow {
                stream: out.labels[j].clone(),
                date: out.dates[0],
            });
        }
        for i in 1..out.rows() {
            if out.prices[(i, j)].is_nan() {
                out.prices[(i, j)] = out.prices[(i - 1, j)];
            }
        }
    }
    Ok(out)
}

/// `r_{it} = log p_{it} − log p_{i(t−1)}` for every stream.
pub fn to_log_returns(table: &PriceTable) -> Result<ReturnMatrix> {
    let (n, m) = table.prices.shape();
    if n < 2 {
        return Err(IngestError::Empty);
    }
    for j in 0..m {
        for i in 0..n {
            let v = table.prices[(i, j)];
            if v.is_nan() {
                return Err(IngestError::MissingValue {
                    stream: table.labels[j].clone(),
                    date: table.dates[i],
                });
            }
            if v <= 0.0 {
                return Err(IngestError::NonPositivePrice {
                    stream: table.labels[j].clone(),
                    date: table.dates[i],
                    price: v,
                });
            }
        }
    }
    let logs = table.prices.map(f64::ln);
    let diff = logs.rows(1, n - 1) - logs.rows(0, n - 1);
    Ok(ReturnMatrix {
        dates: table.dates[1..].to_vec(),
        labels: table.labels.clone(),
        target: diff.column(0).clone_owned(),
        explanatory: diff.columns(1, m - 1).clone_owned(),
    })
}

/// Keeps only dates present in every table. The first table's target stays
/// the target; the other tables contribute all their columns as explanatory
/// streams.
pub fn inner_join(tables: &[PriceTable]) -> Result<PriceTable> {
    let first = tables.first().ok_or(IngestError::Empty)?;
    let mut common: Vec<NaiveDate> = first.dates.clone();
    for t in &tables[1..] {
        let set: HashSet<NaiveDate> = t.dates.iter().copied().collect();
        common.retain(|d| set.contains(d));
    }
    if common.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut labels = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for t in tables {
        let pos: HashMap<NaiveDate, usize> =
            t.dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        for j in 0..t.prices.ncols() {
            labels.push(t.labels[j].clone());
            columns.push(common.iter().map(|d| t.prices[(pos[d], j)]).collect());
        }
    }
    let prices = DMatrix::from_fn(common.len(), labels.len(), |i, j| columns[j][i]);
    Ok(PriceTable::new(common, labels, prices))
}

/// Drops explanatory streams missing more than `max_missing` (a fraction) of
/// the dates and returns the dropped labels. A too-sparse target is an error.
pub fn drop_sparse_streams(
    table: &PriceTable,
    max_missing: f64,
) -> Result<(PriceTable, Vec<String>)> {
    let n = table.rows();
    if n == 0 {
        return Err(IngestError::Empty);
    }
    let missing = |j: usize| {
        table.prices.column(j).iter().filter(|v| v.is_nan()).count() as f64 / n as f64
    };
    let target_missing = missing(0);
    if target_missing > max_missing {
        return Err(IngestError::TargetTooSparse {
            stream: table.labels[0].clone(),
            fraction: 100.0 * target_missing,
        });
    }
    let mut keep = vec![0];
    let mut dropped = Vec::new();
    for j in 1..table.prices.ncols() {
        if missing(j) > max_missing {
            dropped.push(table.labels[j].clone());
        } else {
            keep.push(j);
        }
    }
    let prices = table.prices.select_columns(keep.iter());
    let labels = keep.iter().map(|&j| table.labels[j].clone()).collect();
    Ok((PriceTable::new(table.dates.clone(), labels, prices), dropped))
}

/// One corporate-action adjustment.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEvent {
    pub date: NaiveDate,
    pub stream: String,
    pub factor: f64,
}

pub fn load_split_file(path: impl AsRef<Path>) -> Result<Vec<SplitEvent>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_split_file(file)
}

pub fn read_split_file<R: Read>(reader: R) -> Result<Vec<SplitEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IngestError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(IngestError::Malformed {
                line,
                msg: "expected date,stream,factor".into(),
            });
        }
        let date = parse_date(&rec[0]).ok_or_else(|| IngestError::Malformed {
            line,
            msg: format!("invalid date {:?}", &rec[0]),
        })?;
        let factor: f64 = rec[2].parse().map_err(|_| IngestError::Malformed {
            line,
            msg: format!("invalid factor {:?}", &rec[2]),
        })?;
        out.push(SplitEvent {
            date,
            stream: rec[1].to_string(),
            factor,
        });
    }
    Ok(out)
}

/// Multiplicative back-adjustment: prices before each event date are scaled
/// by the event factor.
pub fn apply_splits(table: &PriceTable, events: &[SplitEvent]) -> Result<PriceTable> {
    let mut out = table.clone();
    for ev in events {
        if !(ev.factor > 0.0 && ev.factor.is_finite()) {
            return Err(IngestError::BadSplitFactor {
                stream: ev.stream.clone(),
                date: ev.date,
                factor: ev.factor,
            });
        }
        let j = out
            .labels
            .iter()
            .position(|l| *l == ev.stream)
            .ok_or_else(|| IngestError::UnknownStream(ev.stream.clone()))?;
        for i in 0..out.rows() {
            if out.dates[i] < ev.date {
                out.prices[(i, j)] *= ev.factor;
            }
        }
    }
    Ok(out)
}

/// Sparse-stream filter followed by forward fill.
pub fn clean(table: &PriceTable, max_missing: f64) -> Result<(PriceTable, Vec<String>)> {
    let (t, dropped) = drop_sparse_streams(table, max_missing)?;
    Ok((forward_fill(&t)?, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        parse_date(s).unwrap()
    }

    const CSV: &str = "date,IDX,A,B\n2020-01-01,100,10,20\n2020-01-02,101,11,21\n2020-01-03,99,12,19\n";

    #[test]
    fn well_formed_file() {
        let t = read_csv(CSV.as_bytes(), &CsvSchema::target("IDX")).unwrap();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.labels, vec!["IDX", "A", "B"]);
        assert_eq!(t.prices[(2, 0)], 99.0);
    }

    #[test]
    fn declared_column_order_and_target_first() {
        let schema = CsvSchema {
            target: "B".into(),
            explanatory: Some(vec!["IDX".into()]),
        };
        let t = read_csv(CSV.as_bytes(), &schema).unwrap();
        assert_eq!(t.labels, vec!["B", "IDX"]);
        assert_eq!(t.prices[(0, 0)], 20.0);
        assert_eq!(t.prices[(0, 1)], 100.0);
    }

    #[test]
    fn shuffled_dates_are_sorted() {
        let shuffled = "date,IDX,A,B\n2020-01-03,99,12,19\n2020-01-01,100,10,20\n2020-01-02,101,11,21\n";
        let a = read_csv(CSV.as_bytes(), &CsvSchema::target("IDX")).unwrap();
        let b = read_csv(shuffled.as_bytes(), &CsvSchema::target("IDX")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_date_named() {
        let dup = "date,IDX\n2020-01-01,1\n2020-01-02,2\n2020-01-01,3\n";
        let err = read_csv(dup.as_bytes(), &CsvSchema::target("IDX")).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateDate(x) if x == d("2020-01-01")));
        assert!(err.to_string().contains("2020-01-01"));
    }

    #[test]
    fn malformed_rows_report_line() {
        let bad = "date,IDX,A\n2020-01-01,1,2\n2020-01-02,abc,2\n";
        match read_csv(bad.as_bytes(), &CsvSchema::target("IDX")).unwrap_err() {
            IngestError::Malformed { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
        let short = "date,IDX,A\n2020-01-01,1\n";
        match read_csv(short.as_bytes(), &CsvSchema::target("IDX")).unwrap_err() {
            IngestError::Malformed { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        let baddate = "date,IDX\n01/02/2020,1\n";
        assert!(matches!(
            read_csv(baddate.as_bytes(), &CsvSchema::target("IDX")),
            Err(IngestError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            read_csv(CSV.as_bytes(), &CsvSchema::target("NOPE")),
            Err(IngestError::MissingColumn(_))
        ));
    }

    #[test]
    fn forward_fill_cases() {
        let raw = "date,X\n2020-01-01,10\n2020-01-02,\n2020-01-03,12\n";
        let t = read_csv(raw.as_bytes(), &CsvSchema::target("X")).unwrap();
        assert!(t.has_holes());
        let f = forward_fill(&t).unwrap();
        assert_eq!(f.prices.column(0).as_slice(), &[10.0, 10.0, 12.0]);
        assert_eq!(forward_fill(&f).unwrap(), f);

        let raw = "date,X\n2020-01-01,\n2020-01-02,11\n";
        let t = read_csv(raw.as_bytes(), &CsvSchema::target("X")).unwrap();
        assert!(matches!(forward_fill(&t), Err(IngestError::HoleInFirstRow { .. })));
    }

    #[test]
    fn log_return_values() {
        let dates = vec![d("2020-01-01"), d("2020-01-02"), d("2020-01-03")];
        let e = std::f64::consts::E;
        let prices = DMatrix::from_row_slice(3, 2, &[100.0, 5.0, 100.0, 5.0, 100.0 * e, 5.0]);
        let t = PriceTable::new(dates, vec!["T".into(), "X".into()], prices);
        let r = to_log_returns(&t).unwrap();
        assert_eq!(r.rows(), 2);
        assert_eq!(r.target[0], 0.0);
        assert!((r.target[1] - 1.0).abs() < 1e-15);
        assert_eq!(r.dates[0], d("2020-01-02"));
        assert_eq!(r.explanatory.shape(), (2, 1));
    }

    #[test]
    fn non_positive_price_named() {
        let t = PriceTable::new(
            vec![d("2020-01-01"), d("2020-01-02")],
            vec!["T".into(), "X".into()],
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]),
        );
        let err = to_log_returns(&t).unwrap_err();
        assert!(matches!(&err, IngestError::NonPositivePrice { stream, .. } if stream == "X"));
        assert!(err.to_string().contains("2020-01-02"));
    }

    #[test]
    fn join_and_sparsity_filter() {
        let a = read_csv(CSV.as_bytes(), &CsvSchema::target("IDX")).unwrap();
        let other = "date,C\n2020-01-02,5\n2020-01-03,6\n2020-01-04,7\n";
        let b = read_csv(other.as_bytes(), &CsvSchema::target("C")).unwrap();
        let j = inner_join(&[a, b]).unwrap();
        assert_eq!(j.dates, vec![d("2020-01-02"), d("2020-01-03")]);
        assert_eq!(j.labels, vec!["IDX", "A", "B", "C"]);
        assert_eq!(j.prices[(1, 3)], 6.0);

        let raw = "date,T,X,Y\n2020-01-01,1,1,1\n2020-01-02,1,,1\n2020-01-03,1,1,1\n";
        let t = read_csv(raw.as_bytes(), &CsvSchema::target("T")).unwrap();
        let (kept, dropped) = drop_sparse_streams(&t, 0.1).unwrap();
        assert_eq!(dropped, vec!["X"]);
        assert_eq!(kept.labels, vec!["T", "Y"]);
        let (kept, dropped) = drop_sparse_streams(&t, 0.5).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(kept.prices.ncols(), 3);
    }

    #[test]
    fn splits_back_adjust() {
        let t = read_csv(CSV.as_bytes(), &CsvSchema::target("IDX")).unwrap();
        let ev = read_split_file("date,stream,factor\n2020-01-03,A,0.5\n".as_bytes()).unwrap();
        let adj = apply_splits(&t, &ev).unwrap();
        assert_eq!(adj.prices.column(1).as_slice(), &[5.0, 5.5, 12.0]);
        assert_eq!(adj.prices.column(0), t.prices.column(0));
        let bad = vec![SplitEvent { date: d("2020-01-02"), stream: "Z".into(), factor: 2.0 }];
        assert!(matches!(apply_splits(&t, &bad), Err(IngestError::UnknownStream(_))));
    }

    #[test]
    fn csv_round_trip_through_writer() {
        let raw = "date,T,X\n2020-01-01,1.5,2\n2020-01-02,,3\n";
        let t = read_csv(raw.as_bytes(), &CsvSchema::target("T")).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &CsvSchema::target("T")).unwrap();
        assert_eq!(back.dates, t.dates);
        assert_eq!(back.prices[(0, 0)], 1.5);
        assert!(back.prices[(1, 0)].is_nan());
    }
}
