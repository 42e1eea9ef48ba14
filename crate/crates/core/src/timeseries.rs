//! Price/return series ingestion, alignment, descriptive statistics, and
//! residual diagnostics.
//!
//! Conventions fixed here and used everywhere downstream:
//! - returns are `100 * ln(P_t / P_{t-1})` (percent log-returns);
//! - missing dates are handled solely by inner join, never interpolation;
//! - skewness `m3 / m2^{3/2}` and kurtosis `m4 / m2^2` use central moments
//!   averaged by `n`, and kurtosis is reported raw (normal = 3);
//! - a variance of exactly zero raises [`TsError::DegenerateSeries`].

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::special;

#[derive(Debug, Error)]
pub enum TsError {
    #[error("input file not found: {0}")]
    FileMissing(String),
    #[error("row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("row {row}: price must be positive")]
    NonPositivePrice { row: usize },
    #[error("row {row}: duplicate date")]
    DuplicateDate { row: usize },
    #[error("row {row}: dates must be strictly increasing")]
    OutOfOrderDate { row: usize },
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("futures and spot series share no dates")]
    EmptyIntersection,
    #[error("{period} sub-period has {got} observations; at least {needed} required")]
    EmptySubPeriod {
        period: &'static str,
        got: usize,
        needed: usize,
    },
    #[error("series variance is zero; statistic undefined")]
    DegenerateSeries,
    #[error("degrees of freedom non-positive: {fitted} fitted parameters with {lags} lags")]
    DfNonPositive { lags: usize, fitted: usize },
}

/// Which slice of the sample a series or pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodTag {
    Whole,
    Pre,
    Post,
}

impl std::fmt::Display for PeriodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PeriodTag::Whole => write!(f, "whole"),
            PeriodTag::Pre => write!(f, "pre"),
            PeriodTag::Post => write!(f, "post"),
        }
    }
}

/// Date-indexed price observations for one instrument.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceSeries {
    pub instrument_id: String,
    observations: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    /// Builds a series, enforcing strictly increasing dates and positive prices.
    pub fn new(
        instrument_id: impl Into<String>,
        observations: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, TsError> {
        for (i, (date, price)) in observations.iter().enumerate() {
            if !(price.is_finite() && *price > 0.0) {
                return Err(TsError::NonPositivePrice { row: i + 1 });
            }
            if i > 0 {
                match date.cmp(&observations[i - 1].0) {
                    std::cmp::Ordering::Equal => {
                        return Err(TsError::DuplicateDate { row: i + 1 })
                    }
                    std::cmp::Ordering::Less => {
                        return Err(TsError::OutOfOrderDate { row: i + 1 })
                    }
                    std::cmp::Ordering::Greater => {}
                }
            }
        }
        Ok(Self {
            instrument_id: instrument_id.into(),
            observations,
        })
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Date-indexed percent log-returns for one instrument.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub instrument_id: String,
    observations: Vec<(NaiveDate, f64)>,
}

impl ReturnSeries {
    pub fn new(
        instrument_id: impl Into<String>,
        observations: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, TsError> {
        for (i, (date, _)) in observations.iter().enumerate() {
            if i > 0 && *date <= observations[i - 1].0 {
                return Err(TsError::OutOfOrderDate { row: i + 1 });
            }
        }
        Ok(Self {
            instrument_id: instrument_id.into(),
            observations,
        })
    }

    /// Series with synthetic consecutive dates starting at `start`; used by
    /// the simulator and tests.
    pub fn from_values(
        instrument_id: impl Into<String>,
        start: NaiveDate,
        values: &[f64],
    ) -> Self {
        let observations = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (start + chrono::Days::new(i as u64), v))
            .collect();
        Self {
            instrument_id: instrument_id.into(),
            observations,
        }
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.observations.iter().map(|(d, _)| *d)
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|(_, v)| *v).collect()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Futures and spot return series restricted to a shared date vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignedPair {
    pub futures: ReturnSeries,
    pub spot: ReturnSeries,
    pub period: PeriodTag,
}

impl AlignedPair {
    pub fn len(&self) -> usize {
        self.futures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.futures.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.futures.dates().collect()
    }
}

/// Names of the date and price columns in an input CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub date: String,
    pub price: String,
}

/// Loads a price CSV with a header row, ISO-8601 dates, and decimal-point
/// prices. The instrument id is taken from the file stem.
pub fn load_prices(path: &Path, columns: &ColumnSpec) -> Result<PriceSeries, TsError> {
    let file =
        std::fs::File::open(path).map_err(|_| TsError::FileMissing(path.display().to_string()))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());
    read_prices(file, &id, columns)
}

/// Reader-based loader behind [`load_prices`].
pub fn read_prices(
    reader: impl Read,
    instrument_id: &str,
    columns: &ColumnSpec,
) -> Result<PriceSeries, TsError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|e| TsError::ParseError {
            row: 0,
            message: format!("cannot read header: {e}"),
        })?
        .clone();
    let find = |name: &str| -> Result<usize, TsError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TsError::ParseError {
                row: 0,
                message: format!("column {name:?} not found in header"),
            })
    };
    let date_idx = find(&columns.date)?;
    let price_idx = find(&columns.price)?;

    let mut observations = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| TsError::ParseError {
            row,
            message: e.to_string(),
        })?;
        let date_raw = record.get(date_idx).ok_or(TsError::ParseError {
            row,
            message: "missing date field".into(),
        })?;
        let price_raw = record.get(price_idx).ok_or(TsError::ParseError {
            row,
            message: "missing price field".into(),
        })?;
        let date =
            NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|_| TsError::ParseError {
                row,
                message: format!("invalid ISO-8601 date {date_raw:?}"),
            })?;
        let price: f64 = price_raw.parse().map_err(|_| TsError::ParseError {
            row,
            message: format!("invalid decimal price {price_raw:?}"),
        })?;
        if !price.is_finite() {
            return Err(TsError::ParseError {
                row,
                message: format!("non-finite price {price_raw:?}"),
            });
        }
        if price <= 0.0 {
            return Err(TsError::NonPositivePrice { row });
        }
        if let Some((prev, _)) = observations.last() {
            if date == *prev {
                return Err(TsError::DuplicateDate { row });
            }
            if date < *prev {
                return Err(TsError::OutOfOrderDate { row });
            }
        }
        observations.push((date, price));
    }
    PriceSeries::new(instrument_id, observations)
}

/// Percent log-returns `100 ln(P_t / P_{t-1})`, dated at the later day.
pub fn log_returns(prices: &PriceSeries) -> Result<ReturnSeries, TsError> {
    let obs = prices.observations();
    if obs.len() < 2 {
        return Err(TsError::TooShort {
            needed: 2,
            got: obs.len(),
        });
    }
    let observations = obs
        .windows(2)
        .map(|w| (w[1].0, 100.0 * (w[1].1 / w[0].1).ln()))
        .collect();
    ReturnSeries::new(prices.instrument_id.clone(), observations)
}

/// Minimum observations required on each side of the boundary split.
pub const MIN_SUBPERIOD_LEN: usize = 30;

/// Inner-joins the two return series on dates and splits at `boundary`
/// (the boundary date belongs to the post period).
pub fn align_and_split(
    futures: &ReturnSeries,
    spot: &ReturnSeries,
    boundary: NaiveDate,
) -> Result<(AlignedPair, AlignedPair, AlignedPair), TsError> {
    if futures.is_empty() || spot.is_empty() {
        return Err(TsError::TooShort { needed: 1, got: 0 });
    }
    let fut = futures.observations();
    let sp = spot.observations();
    let mut joined: Vec<(NaiveDate, f64, f64)> = Vec::with_capacity(fut.len().min(sp.len()));
    let (mut i, mut j) = (0, 0);
    while i < fut.len() && j < sp.len() {
        match fut[i].0.cmp(&sp[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                joined.push((fut[i].0, fut[i].1, sp[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    if joined.is_empty() {
        return Err(TsError::EmptyIntersection);
    }

    let make_pair = |rows: &[(NaiveDate, f64, f64)], period: PeriodTag| AlignedPair {
        futures: ReturnSeries {
            instrument_id: futures.instrument_id.clone(),
            observations: rows.iter().map(|(d, f, _)| (*d, *f)).collect(),
        },
        spot: ReturnSeries {
            instrument_id: spot.instrument_id.clone(),
            observations: rows.iter().map(|(d, _, s)| (*d, *s)).collect(),
        },
        period,
    };

    let split = joined.partition_point(|(d, _, _)| *d < boundary);
    let (pre_rows, post_rows) = joined.split_at(split);
    if pre_rows.len() < MIN_SUBPERIOD_LEN {
        return Err(TsError::EmptySubPeriod {
            period: "pre",
            got: pre_rows.len(),
            needed: MIN_SUBPERIOD_LEN,
        });
    }
    if post_rows.len() < MIN_SUBPERIOD_LEN {
        return Err(TsError::EmptySubPeriod {
            period: "post",
            got: post_rows.len(),
            needed: MIN_SUBPERIOD_LEN,
        });
    }
    Ok((
        make_pair(&joined, PeriodTag::Whole),
        make_pair(pre_rows, PeriodTag::Pre),
        make_pair(post_rows, PeriodTag::Post),
    ))
}

/// Correlation coefficients between the two legs of an aligned pair, with
/// asymptotic two-sided p-values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Correlations {
    pub pearson: f64,
    pub kendall: f64,
    pub spearman: f64,
    pub p_pearson: f64,
    pub p_kendall: f64,
    pub p_spearman: f64,
}

/// Pearson, Kendall tau-b, and Spearman coefficients for an aligned pair.
///
/// P-values: Pearson by the exact t-test with `n - 2` degrees of freedom,
/// Kendall and Spearman by their standard normal approximations.
pub fn correlations(pair: &AlignedPair) -> Result<Correlations, TsError> {
    let x = pair.futures.values();
    let y = pair.spot.values();
    let n = x.len();
    if n < 3 {
        return Err(TsError::TooShort { needed: 3, got: n });
    }
    let nf = n as f64;

    let pearson = pearson_corr(&x, &y)?;
    let p_pearson = if 1.0 - pearson * pearson <= f64::EPSILON {
        0.0
    } else {
        let t = pearson * ((nf - 2.0) / (1.0 - pearson * pearson)).sqrt();
        2.0 * (1.0 - special::student_t_cdf(t.abs(), nf - 2.0))
    };

    let (kendall, conc_minus_disc) = kendall_tau(&x, &y);
    // Normal approximation without tie correction in the variance.
    let var_cd = nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0;
    let z_k = conc_minus_disc / var_cd.sqrt();
    let p_kendall = 2.0 * (1.0 - special::normal_cdf(z_k.abs()));

    let rx = average_ranks(&x);
    let ry = average_ranks(&y);
    let spearman = pearson_corr(&rx, &ry)?;
    let z_s = spearman * (nf - 1.0).sqrt();
    let p_spearman = 2.0 * (1.0 - special::normal_cdf(z_s.abs()));

    Ok(Correlations {
        pearson,
        kendall,
        spearman,
        p_pearson,
        p_kendall,
        p_spearman,
    })
}

fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64, TsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(TsError::DegenerateSeries);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Kendall tau-b and the raw concordant-minus-discordant count.
fn kendall_tau(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mut concordant_minus_discordant = 0.0;
    let mut tied_x = 0.0;
    let mut tied_y = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i].partial_cmp(&x[j]).unwrap();
            let dy = y[i].partial_cmp(&y[j]).unwrap();
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {
                    tied_x += 1.0;
                    tied_y += 1.0;
                }
                (Equal, _) => tied_x += 1.0,
                (_, Equal) => tied_y += 1.0,
                (a, b) if a == b => concordant_minus_discordant += 1.0,
                _ => concordant_minus_discordant -= 1.0,
            }
        }
    }
    let n0 = (n * (n - 1)) as f64 / 2.0;
    let denom = ((n0 - tied_x) * (n0 - tied_y)).sqrt();
    let tau = if denom == 0.0 {
        0.0
    } else {
        concordant_minus_discordant / denom
    };
    (tau, concordant_minus_discordant)
}

/// Average (midrank) ranks, 1-based.
pub(crate) fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Sample summary: extremes and the first four moment statistics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Descriptive {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Descriptive statistics. Skewness and kurtosis use `n`-averaged central
/// moments; kurtosis is raw (normal = 3); std is the `n - 1` sample estimate.
pub fn describe(values: &[f64]) -> Result<Descriptive, TsError> {
    let n = values.len();
    if n < 4 {
        return Err(TsError::TooShort { needed: 4, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 == 0.0 {
        return Err(TsError::DegenerateSeries);
    }
    Ok(Descriptive {
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        mean,
        std: (m2 * nf / (nf - 1.0)).sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    })
}

/// Jarque-Bera normality statistic `n/6 (S^2 + (K-3)^2 / 4)` with its
/// chi-squared(2) p-value.
pub fn jarque_bera(values: &[f64]) -> Result<(f64, f64), TsError> {
    let n = values.len();
    if n < 8 {
        return Err(TsError::TooShort { needed: 8, got: n });
    }
    let d = describe(values)?;
    let stat = n as f64 / 6.0 * (d.skewness * d.skewness + (d.kurtosis - 3.0).powi(2) / 4.0);
    Ok((stat, special::chi_squared_sf(stat, 2.0)))
}

/// Ljung-Box white-noise statistic on `values` at `lags` autocorrelations.
///
/// `fitted_params` is subtracted from the chi-squared degrees of freedom;
/// pass the series itself for Q and its squares for Q².
pub fn ljung_box(values: &[f64], lags: usize, fitted_params: usize) -> Result<(f64, f64), TsError> {
    let n = values.len();
    if lags == 0 || n < 2 * lags + 1 {
        return Err(TsError::TooShort {
            needed: 2 * lags + 1,
            got: n,
        });
    }
    if fitted_params >= lags {
        return Err(TsError::DfNonPositive {
            lags,
            fitted: fitted_params,
        });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let denom: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(TsError::DegenerateSeries);
    }
    let mut q = 0.0;
    for k in 1..=lags {
        let num: f64 = (k..n)
            .map(|t| (values[t] - mean) * (values[t - k] - mean))
            .sum();
        let rho = num / denom;
        q += rho * rho / (nf - k as f64);
    }
    q *= nf * (nf + 2.0);
    let df = (lags - fitted_params) as f64;
    Ok((q, special::chi_squared_sf(q, df)))
}

/// Engle's ARCH-LM statistic: `n R^2` from regressing the squared series on
/// its own `lags` lags, with a chi-squared(`lags`) p-value.
pub fn arch_lm(values: &[f64], lags: usize) -> Result<(f64, f64), TsError> {
    let n = values.len();
    if lags == 0 || n < 2 * lags + 1 {
        return Err(TsError::TooShort {
            needed: 2 * lags + 1,
            got: n,
        });
    }
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    let rows = n - lags;
    let cols = lags + 1;
    let mut design = DMatrix::zeros(rows, cols);
    let mut response = DVector::zeros(rows);
    for t in 0..rows {
        design[(t, 0)] = 1.0;
        for k in 1..=lags {
            design[(t, k)] = sq[t + lags - k];
        }
        response[t] = sq[t + lags];
    }
    let mean_y = response.sum() / rows as f64;
    let sst: f64 = response.iter().map(|v| (v - mean_y).powi(2)).sum();
    if sst == 0.0 {
        return Err(TsError::DegenerateSeries);
    }
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * &response;
    let beta = gram.lu().solve(&rhs).ok_or(TsError::DegenerateSeries)?;
    let fitted = design * beta;
    let ssr: f64 = (&response - fitted).iter().map(|r| r * r).sum();
    let r_squared = (1.0 - ssr / sst).clamp(0.0, 1.0);
    let stat = rows as f64 * r_squared;
    Ok((stat, special::chi_squared_sf(stat, lags as f64)))
}
