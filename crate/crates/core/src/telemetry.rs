//! Time-series telemetry: an append-only in-memory store, sliding windows
//! and lag datasets for the predictor, the wide CSV exchange format, and a
//! synthetic two-path wireless bandwidth generator.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("series {key}: timestamp {t} is not after the last timestamp {last}")]
    NonMonotone { key: String, last: f64, t: f64 },
    #[error("series {key}: {wanted} points requested, {available} available")]
    InsufficientHistory {
        key: String,
        wanted: usize,
        available: usize,
    },
    #[error("series {0} does not exist")]
    UnknownSeries(String),
    #[error("series of length {len} is too short for {n_lags} lags")]
    TooShort { len: usize, n_lags: usize },
    #[error("non-finite value in series {0}")]
    NonFinite(String),
    #[error("csv line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TelemetryError>;

/// One measurement. Keys look like `path:1:bandwidth` or `link:MIA-SAO:utilization`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub series_key: String,
    pub t: f64,
    pub value: f64,
}

impl TelemetrySample {
    pub fn new(series_key: impl Into<String>, t: f64, value: f64) -> Self {
        TelemetrySample {
            series_key: series_key.into(),
            t,
            value,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.times.last()?, *self.values.last()?))
    }
}

/// In-memory series store. Appends take a write lock, so readers always
/// observe a prefix of each series.
#[derive(Debug, Default)]
pub struct TelemetryStore {
    series: RwLock<BTreeMap<String, Series>>,
    journal: Option<Mutex<csv::Writer<File>>>,
}

impl TelemetryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A store that also appends every sample to a `t,series,value` CSV journal.
    pub fn with_journal(path: impl AsRef<Path>) -> Result<Self> {
        let exists = path.as_ref().exists();
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if !exists {
            writer.write_record(["t", "series", "value"])?;
        }
        Ok(TelemetryStore {
            series: RwLock::default(),
            journal: Some(Mutex::new(writer)),
        })
    }

    pub fn append(&self, sample: TelemetrySample) -> Result<()> {
        if !sample.t.is_finite() || !sample.value.is_finite() {
            return Err(TelemetryError::NonFinite(sample.series_key));
        }
        let mut map = self.series.write().expect("telemetry lock poisoned");
        let series = map.entry(sample.series_key.clone()).or_default();
        if let Some((last, _)) = series.last() {
            if sample.t <= last {
                return Err(TelemetryError::NonMonotone {
                    key: sample.series_key,
                    last,
                    t: sample.t,
                });
            }
        }
        if let Some(journal) = &self.journal {
            let mut w = journal.lock().expect("journal lock poisoned");
            w.write_record([
                sample.t.to_string(),
                sample.series_key.clone(),
                sample.value.to_string(),
            ])?;
            w.flush()?;
        }
        series.times.push(sample.t);
        series.values.push(sample.value);
        Ok(())
    }

    pub fn append_all(&self, samples: impl IntoIterator<Item = TelemetrySample>) -> Result<()> {
        samples.into_iter().try_for_each(|s| self.append(s))
    }

    /// The last `n` values of a series, oldest first.
    pub fn window(&self, key: &str, n: usize) -> Result<Vec<f64>> {
        let map = self.series.read().expect("telemetry lock poisoned");
        let series = map
            .get(key)
            .ok_or_else(|| TelemetryError::UnknownSeries(key.to_string()))?;
        if series.len() < n {
            return Err(TelemetryError::InsufficientHistory {
                key: key.to_string(),
                wanted: n,
                available: series.len(),
            });
        }
        Ok(series.values[series.len() - n..].to_vec())
    }

    /// Up to the last `n` samples of a series (fewer if the series is shorter).
    pub fn tail(&self, key: &str, n: usize) -> Result<Vec<TelemetrySample>> {
        let map = self.series.read().expect("telemetry lock poisoned");
        let series = map
            .get(key)
            .ok_or_else(|| TelemetryError::UnknownSeries(key.to_string()))?;
        let start = series.len().saturating_sub(n);
        Ok(series.times[start..]
            .iter()
            .zip(&series.values[start..])
            .map(|(&t, &value)| TelemetrySample::new(key, t, value))
            .collect())
    }

    pub fn series(&self, key: &str) -> Option<Series> {
        self.series
            .read()
            .expect("telemetry lock poisoned")
            .get(key)
            .cloned()
    }

    pub fn len(&self, key: &str) -> usize {
        self.series
            .read()
            .expect("telemetry lock poisoned")
            .get(key)
            .map_or(0, Series::len)
    }

    pub fn keys(&self) -> Vec<String> {
        self.series
            .read()
            .expect("telemetry lock poisoned")
            .keys()
            .cloned()
            .collect()
    }

    /// Exports the given series as a wide table keyed by timestamp.
    pub fn to_wide(&self, keys: &[String]) -> WideTable {
        let map = self.series.read().expect("telemetry lock poisoned");
        let mut rows: BTreeMap<OrderedTime, Vec<Option<f64>>> = BTreeMap::new();
        for (col, key) in keys.iter().enumerate() {
            let Some(series) = map.get(key) else { continue };
            for (&t, &v) in series.times.iter().zip(&series.values) {
                rows.entry(OrderedTime(t)).or_insert_with(|| vec![None; keys.len()])[col] = Some(v);
            }
        }
        WideTable {
            columns: keys.to_vec(),
            t: rows.keys().map(|k| k.0).collect(),
            values: rows.into_values().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedTime(f64);

impl Eq for OrderedTime {}

impl PartialOrd for OrderedTime {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedTime {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Table in the `t,<series1>,<series2>,...` CSV layout. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct WideTable {
    pub columns: Vec<String>,
    pub t: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl WideTable {
    /// Column `name` with every cell present, or an error naming the first gap.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| TelemetryError::UnknownSeries(name.to_string()))?;
        self.values
            .iter()
            .enumerate()
            .map(|(row, cells)| {
                cells[idx].ok_or_else(|| TelemetryError::Format {
                    line: row + 2,
                    reason: format!("missing value for {name}"),
                })
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (t, cells) in self.t.iter().zip(&self.values) {
            let mut record = vec![format_number(*t)];
            record.extend(cells.iter().map(|c| c.map(format_number).unwrap_or_default()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("t") {
            return Err(TelemetryError::Format {
                line: 1,
                reason: "first column must be `t`".into(),
            });
        }
        let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut table = WideTable {
            columns,
            t: Vec::new(),
            values: Vec::new(),
        };
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let line = i + 2;
            let parse = |s: &str| -> Result<f64> {
                let v: f64 = s.parse().map_err(|_| TelemetryError::Format {
                    line,
                    reason: format!("not a number: {s:?}"),
                })?;
                if !v.is_finite() {
                    return Err(TelemetryError::Format {
                        line,
                        reason: "non-finite value".into(),
                    });
                }
                Ok(v)
            };
            let t = parse(record.get(0).unwrap_or(""))?;
            if let Some(&last) = table.t.last() {
                if t <= last {
                    return Err(TelemetryError::Format {
                        line,
                        reason: format!("t = {t} is not after {last}"),
                    });
                }
            }
            let cells = (1..=table.columns.len())
                .map(|c| match record.get(c).unwrap_or("") {
                    "" => Ok(None),
                    s => parse(s).map(Some),
                })
                .collect::<Result<Vec<_>>>()?;
            table.t.push(t);
            table.values.push(cells);
        }
        Ok(table)
    }
}

/// Shortest decimal that round-trips; integers print without a fraction.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Sliding-window regression data: row `i` holds `values[i..i+n_lags]`
/// and the target is `values[i+n_lags]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDataset {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub n_lags: usize,
}

impl LaggedDataset {
    pub fn rows(&self) -> usize {
        self.y.len()
    }
}

pub fn lagged_dataset(values: &[f64], n_lags: usize) -> Result<LaggedDataset> {
    if n_lags == 0 || values.len() <= n_lags {
        return Err(TelemetryError::TooShort {
            len: values.len(),
            n_lags,
        });
    }
    let rows = values.len() - n_lags;
    Ok(LaggedDataset {
        x: DMatrix::from_fn(rows, n_lags, |i, j| values[i + j]),
        y: values[n_lags..].to_vec(),
        n_lags,
    })
}

/// Regime levels for [`generate_synthetic_wireless_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirelessProfile {
    pub len: usize,
    /// First sample of the indoor-to-outdoor transition.
    pub ramp_start: usize,
    pub ramp_len: usize,
    /// (indoor mean, indoor noise bound, outdoor mean, outdoor noise bound)
    pub path1: (f64, f64, f64, f64),
    pub path2: (f64, f64, f64, f64),
    /// AR(1) coefficient of the noise process.
    pub noise_ar: f64,
}

impl Default for WirelessProfile {
    fn default() -> Self {
        WirelessProfile {
            len: 500,
            ramp_start: 100,
            ramp_len: 50,
            path1: (45.0, 5.0, 10.0, 3.0),
            path2: (5.0, 2.0, 35.0, 5.0),
            noise_ar: 0.5,
        }
    }
}

/// Two bandwidth series (Mbps, one sample per second) with crossing regimes:
/// path 1 starts high and drops, path 2 starts low and rises.
#[derive(Debug, Clone, PartialEq)]
pub struct WirelessDataset {
    pub path1: Vec<f64>,
    pub path2: Vec<f64>,
}

impl WirelessDataset {
    pub const COLUMNS: [&'static str; 2] = ["path1_mbps", "path2_mbps"];

    pub fn to_wide(&self) -> WideTable {
        WideTable {
            columns: Self::COLUMNS.iter().map(|s| s.to_string()).collect(),
            t: (0..self.path1.len()).map(|i| i as f64).collect(),
            values: self
                .path1
                .iter()
                .zip(&self.path2)
                .map(|(&a, &b)| vec![Some(a), Some(b)])
                .collect(),
        }
    }
}

pub fn generate_synthetic_wireless(seed: u64) -> WirelessDataset {
    generate_synthetic_wireless_with(seed, &WirelessProfile::default())
}

pub fn generate_synthetic_wireless_with(seed: u64, profile: &WirelessProfile) -> WirelessDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path1 = regime_series(&mut rng, profile, profile.path1);
    let path2 = regime_series(&mut rng, profile, profile.path2);
    WirelessDataset { path1, path2 }
}

fn regime_series(
    rng: &mut ChaCha8Rng,
    profile: &WirelessProfile,
    (mean_in, bound_in, mean_out, bound_out): (f64, f64, f64, f64),
) -> Vec<f64> {
    let phi = profile.noise_ar.clamp(0.0, 0.99);
    let mut noise = 0.0;
    (0..profile.len)
        .map(|i| {
            let frac = if i < profile.ramp_start {
                0.0
            } else if i >= profile.ramp_start + profile.ramp_len {
                1.0
            } else {
                (i - profile.ramp_start) as f64 / profile.ramp_len as f64
            };
            let mean = mean_in + frac * (mean_out - mean_in);
            let bound = bound_in + frac * (bound_out - bound_in);
            // innovations scaled by (1 - phi) keep |noise| <= 1
            let innovation: f64 = rng.random_range(-1.0..=1.0);
            noise = phi * noise + (1.0 - phi) * innovation;
            (mean + bound * noise).max(0.0)
        })
        .collect()
}
