//! Price ingestion, log returns and descriptive statistics.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::ljung_box;
use crate::numeric::special::chi2_sf;
use crate::stats;

/// Column layout of a delimited price file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub date_column: String,
    /// Price columns to load; all non-date columns when `None`.
    pub columns: Option<Vec<String>>,
    pub delimiter: char,
}

impl Default for Schema {
    fn default() -> Self {
        Self { date_column: "date".into(), columns: None, delimiter: ',' }
    }
}

/// Prices aligned on common dates, one column per asset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    /// `prices[k][t]` is the price of asset `k` on `dates[t]`.
    pub prices: Vec<Vec<f64>>,
    pub dropped_rows: usize,
}

/// Log returns of one asset on strictly increasing dates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub asset: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(asset: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        let s = Self { asset: asset.into(), dates, values };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dates.len() != self.values.len() {
            return Err(Error::DimensionMismatch { expected: self.dates.len(), got: self.values.len() });
        }
        if self.values.len() < 2 {
            return Err(Error::Data(format!("{}: a return series needs at least 2 values", self.asset)));
        }
        if self.dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!("{}: dates must be strictly increasing", self.asset)));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{}: missing or non-finite return", self.asset)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-series on index range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> ReturnSeries {
        ReturnSeries {
            asset: self.asset.clone(),
            dates: self.dates[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
        }
    }
}

/// Equally weighted sum of several aligned return series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSeries {
    pub components: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl SystemSeries {
    pub fn new(components: &[&ReturnSeries]) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::InvalidInput("system needs at least one component".into()))?;
        check_aligned(components)?;
        let values = (0..first.len()).map(|t| components.iter().map(|s| s.values[t]).sum()).collect();
        Ok(Self {
            components: components.iter().map(|s| s.asset.clone()).collect(),
            dates: first.dates.clone(),
            values,
        })
    }

    /// Identifier such as `Sys:A+B`.
    pub fn name(&self) -> String {
        format!("Sys:{}", self.components.join("+"))
    }

    pub fn to_return_series(&self) -> ReturnSeries {
        ReturnSeries { asset: self.name(), dates: self.dates.clone(), values: self.values.clone() }
    }
}

/// Errors unless every series shares the same dates.
pub fn check_aligned(series: &[&ReturnSeries]) -> Result<()> {
    if let Some(first) = series.first() {
        for s in &series[1..] {
            if s.dates != first.dates {
                return Err(Error::Data(format!("series {} and {} are not aligned on dates", first.asset, s.asset)));
            }
        }
    }
    Ok(())
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .or_else(|| chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").ok().map(|d| d.date()))
        .or_else(|| chrono::DateTime::parse_from_rfc3339(s).ok().map(|d| d.date_naive()))
}

fn is_missing(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "NaN" | "nan" | "null" | "NULL")
}

pub fn load_prices(path: impl AsRef<Path>, schema: &Schema) -> Result<PriceTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_prices(file, schema).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parses a delimited price table. Rows with a missing price in any selected column are
/// dropped; the remaining rows are sorted by date.
pub fn read_prices<R: Read>(reader: R, schema: &Schema) -> Result<PriceTable> {
    let delim = u8::try_from(schema.delimiter)
        .map_err(|_| Error::InvalidInput(format!("delimiter {:?} is not a single byte", schema.delimiter)))?;
    let mut rdr = csv::ReaderBuilder::new().delimiter(delim).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Data("file is empty or has no header row".into()));
    }
    let date_idx = headers
        .iter()
        .position(|h| h == schema.date_column)
        .ok_or_else(|| Error::Data(format!("date column {:?} not found", schema.date_column)))?;
    let assets: Vec<String> = match &schema.columns {
        Some(cols) => cols.clone(),
        None => headers.iter().enumerate().filter(|(i, _)| *i != date_idx).map(|(_, h)| h.to_string()).collect(),
    };
    if assets.is_empty() {
        return Err(Error::Data("no price columns".into()));
    }
    let mut idx = Vec::with_capacity(assets.len());
    for a in &assets {
        let i = headers.iter().position(|h| h == a).ok_or_else(|| Error::Data(format!("price column {a:?} not found")))?;
        idx.push(i);
    }

    let mut rows: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    let mut dropped = 0usize;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line + 2;
        let raw = rec.get(date_idx).unwrap_or("");
        let date = parse_date(raw).ok_or_else(|| Error::Data(format!("line {line}: unparseable date {raw:?}")))?;
        let mut vals = Vec::with_capacity(idx.len());
        let mut missing = false;
        for (&i, a) in idx.iter().zip(&assets) {
            let cell = rec.get(i).unwrap_or("");
            if is_missing(cell) {
                missing = true;
                break;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Data(format!("line {line}: {a}: not a number: {cell:?}")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Data(format!("line {line}: {a}: price must be positive, got {v}")));
            }
            vals.push(v);
        }
        if rows.contains_key(&date) {
            return Err(Error::Data(format!("line {line}: duplicate date {date}")));
        }
        if missing {
            dropped += 1;
            continue;
        }
        rows.insert(date, vals);
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with missing prices");
    }
    if rows.is_empty() {
        return Err(Error::Data("no dates with prices for every asset".into()));
    }
    let dates: Vec<NaiveDate> = rows.keys().copied().collect();
    let prices = (0..assets.len()).map(|k| rows.values().map(|r| r[k]).collect()).collect();
    Ok(PriceTable { dates, assets, prices, dropped_rows: dropped })
}

/// `r_t = ln(p_t / p_{t-1})` for every asset.
pub fn to_log_returns(table: &PriceTable) -> Result<Vec<ReturnSeries>> {
    if table.dates.len() < 3 {
        return Err(Error::Data("need at least 3 price dates for a return series".into()));
    }
    let mut seen = HashSet::new();
    table
        .assets
        .iter()
        .zip(&table.prices)
        .map(|(a, p)| {
            if !seen.insert(a) {
                return Err(Error::Data(format!("duplicate asset {a}")));
            }
            if p.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Data(format!("{a}: prices must be positive")));
            }
            let values = p.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
            ReturnSeries::new(a.clone(), table.dates[1..].to_vec(), values)
        })
        .collect()
}

/// Summary statistics of a return series; kurtosis is raw (3 for a normal law).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub asset: String,
    pub n: usize,
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub sd: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub jarque_bera: f64,
    pub jarque_bera_p: f64,
    pub ljung_box_p: f64,
}

pub fn describe(series: &ReturnSeries) -> Result<Descriptive> {
    let x = &series.values;
    let n = x.len();
    if n < 30 {
        return Err(Error::InvalidInput(format!("{}: describe needs at least 30 values, got {n}", series.asset)));
    }
    let nf = n as f64;
    let mean = stats::mean(x);
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    if !(m2 > 0.0) {
        return Err(Error::InvalidInput(format!("{}: series is constant", series.asset)));
    }
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);
    let jb = nf / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0);
    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    Ok(Descriptive {
        asset: series.asset.clone(),
        n,
        min: sorted[0],
        mean,
        median,
        max: sorted[n - 1],
        sd: stats::variance(x).sqrt(),
        skewness,
        kurtosis,
        jarque_bera: jb,
        jarque_bera_p: chi2_sf(jb, 2.0),
        ljung_box_p: ljung_box(x, 8, 0)?.p_value,
    })
}

/// Pairwise Kendall's τ-b matrix of aligned series.
pub fn kendall_matrix(series: &[&ReturnSeries]) -> Result<Vec<Vec<f64>>> {
    let d = series.len();
    for s in series {
        if s.len() != series[0].len() {
            return Err(Error::DimensionMismatch { expected: series[0].len(), got: s.len() });
        }
    }
    let mut m = vec![vec![1.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let t = stats::kendall_tau(&series[i].values, &series[j].values)?;
            m[i][j] = t;
            m[j][i] = t;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(csv: &str) -> Result<PriceTable> {
        read_prices(csv.as_bytes(), &Schema::default())
    }

    #[test]
    fn three_row_returns() {
        let t = table("date,A\n2020-01-01,100\n2020-01-02,110\n2020-01-03,99\n").unwrap();
        let r = to_log_returns(&t).unwrap();
        assert!((r[0].values[0] - 1.1f64.ln()).abs() < 1e-15);
        assert!((r[0].values[1] - 0.9f64.ln()).abs() < 1e-15);
        assert_eq!(r[0].dates[0], NaiveDate::from_ymd_opt(2020, 1, 2).unwrap());
    }

    #[test]
    fn bad_files() {
        assert!(table("date,A\n2020-01-01,100\n2020-01-01,110\n").is_err());
        assert!(table("date,A\n2020-01-01,0\n2020-01-02,110\n").is_err());
        assert!(table("date,A\nyesterday,1\n").is_err());
        assert!(table("").is_err());
        assert!(table("date,A\n2020-01-01,NA\n").is_err());
    }

    #[test]
    fn missing_rows_dropped_and_sorted() {
        let t = table("date,A,B\n2020-01-03,3,3\n2020-01-01,1,NA\n2020-01-02,2,2\n2020-01-04,4,4\n").unwrap();
        assert_eq!(t.dropped_rows, 1);
        assert_eq!(t.prices[0], vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn column_order_does_not_matter() {
        let a = table("date,A,B\n2020-01-01,1,5\n2020-01-02,2,6\n2020-01-03,3,4\n").unwrap();
        let b = table("date,B,A\n2020-01-01,5,1\n2020-01-02,6,2\n2020-01-03,4,3\n").unwrap();
        let ra = to_log_returns(&a).unwrap();
        let rb = to_log_returns(&b).unwrap();
        assert_eq!(ra[0], rb[1]);
        assert_eq!(ra[1], rb[0]);
    }

    #[test]
    fn doubling_and_roundtrip() {
        let dates: Vec<NaiveDate> = (0..20).map(|i| NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Days::new(i)).collect();
        let p: Vec<f64> = (0..20).map(|i| 2f64.powi(i)).collect();
        let t = PriceTable { dates: dates.clone(), assets: vec!["X".into()], prices: vec![p.clone()], dropped_rows: 0 };
        let r = to_log_returns(&t).unwrap();
        assert!(r[0].values.iter().all(|v| (v - 2f64.ln()).abs() < 1e-15));
        let mut acc = p[0];
        for (k, v) in r[0].values.iter().enumerate() {
            acc *= v.exp();
            assert!((acc - p[k + 1]).abs() < 1e-12 * p[k + 1]);
        }
    }

    #[test]
    fn describe_mirror_and_constant() {
        let dates: Vec<NaiveDate> = (0..50).map(|i| NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Days::new(i)).collect();
        let x: Vec<f64> = (0..50).map(|i| ((i * 7919) % 31) as f64 / 31.0 - 0.3 + if i % 5 == 0 { 0.8 } else { 0.0 }).collect();
        let s = ReturnSeries::new("X", dates.clone(), x.clone()).unwrap();
        let m = ReturnSeries::new("Y", dates.clone(), x.iter().map(|v| -v).collect()).unwrap();
        let a = describe(&s).unwrap();
        let b = describe(&m).unwrap();
        assert_eq!(a.skewness, -b.skewness);
        assert!(describe(&ReturnSeries::new("C", dates, vec![0.0; 50]).unwrap()).is_err());
    }

    #[test]
    fn system_is_sum() {
        let d: Vec<NaiveDate> = (1..4).map(|i| NaiveDate::from_ymd_opt(2021, 1, i).unwrap()).collect();
        let a = ReturnSeries::new("A", d.clone(), vec![0.1, 0.2, 0.3]).unwrap();
        let b = ReturnSeries::new("B", d, vec![1.0, -2.0, 0.5]).unwrap();
        let s = SystemSeries::new(&[&a, &b]).unwrap();
        for t in 0..3 {
            assert_eq!(s.values[t], a.values[t] + b.values[t]);
        }
        assert_eq!(s.name(), "Sys:A+B");
    }
}
