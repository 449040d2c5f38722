//! Tabular time-series ingestion, resampling, splitting and synthetic data.

mod synth;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::partitioning::TimeSeries;

pub use synth::{
    household_components, synth_coupled_chains, synth_household, synth_spatial_lattice, HouseholdShares,
    SynthKind, SynthSpec,
};

/// Named streams sharing one clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    streams: Vec<TimeSeries>,
    timestamps: Option<Vec<String>>,
    metadata: BTreeMap<String, serde_json::Value>,
}

impl Dataset {
    pub fn new(streams: Vec<TimeSeries>) -> Result<Self> {
        let Some(first) = streams.first() else {
            return Err(invalid("a dataset needs at least one stream"));
        };
        let (len, period) = (first.len(), first.sample_period());
        for s in &streams {
            if s.len() != len {
                return Err(invalid(format!(
                    "stream '{}' has length {} but '{}' has {len}",
                    s.id(),
                    s.len(),
                    first.id()
                )));
            }
            if s.sample_period() != period {
                return Err(invalid(format!(
                    "stream '{}' has sample period {} but '{}' has {period}",
                    s.id(),
                    s.sample_period(),
                    first.id()
                )));
            }
        }
        let mut ids: Vec<&str> = streams.iter().map(TimeSeries::id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate stream '{}'", w[0])));
        }
        Ok(Self {
            streams,
            timestamps: None,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_timestamps(mut self, timestamps: Vec<String>) -> Result<Self> {
        if timestamps.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: timestamps.len(),
            });
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: serde_json::Value) -> Self {
        self.metadata.insert(key.into(), value);
        self
    }

    pub fn streams(&self) -> &[TimeSeries] {
        &self.streams
    }

    pub fn names(&self) -> Vec<&str> {
        self.streams.iter().map(TimeSeries::id).collect()
    }

    pub fn get(&self, name: &str) -> Option<&TimeSeries> {
        self.streams.iter().find(|s| s.id() == name)
    }

    pub fn column(&self, name: &str) -> Result<&TimeSeries> {
        self.get(name).ok_or_else(|| Error::MissingColumn(name.to_owned()))
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    pub fn metadata(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.streams[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_period(&self) -> f64 {
        self.streams[0].sample_period()
    }

    /// Rows `[start, end)` of every stream.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        let streams = self
            .streams
            .iter()
            .map(|s| s.slice(start, end))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Dataset::new(streams)?;
        out.timestamps = self.timestamps.as_ref().map(|t| t[start..end].to_vec());
        out.metadata = self.metadata.clone();
        Ok(out)
    }

    /// Writes the CSV plus a `<path>.meta.json` sidecar.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let mut header: Vec<&str> = Vec::new();
        if self.timestamps.is_some() {
            header.push("timestamp");
        }
        header.extend(self.names());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            if let Some(ts) = &self.timestamps {
                rec.push(ts[k].clone());
            }
            // shortest representation that parses back to the same f64
            rec.extend(self.streams.iter().map(|s| s.values()[k].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;

        let sidecar = Sidecar {
            sample_period: self.sample_period(),
            length: self.len(),
            columns: self.names().into_iter().map(str::to_owned).collect(),
            units: self
                .streams
                .iter()
                .filter_map(|s| s.units().map(|u| (s.id().to_owned(), u.to_owned())))
                .collect(),
            metadata: self.metadata.clone(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    sample_period: f64,
    length: usize,
    columns: Vec<String>,
    #[serde(default)]
    units: BTreeMap<String, String>,
    #[serde(default)]
    metadata: BTreeMap<String, serde_json::Value>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// What to read from a CSV file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvSchema {
    /// Required columns, in output order. `None` loads every value column.
    pub columns: Option<Vec<String>>,
    /// Overrides the sidecar's or timestamps' sample period.
    pub sample_period: Option<f64>,
}

impl CsvSchema {
    pub fn columns<I, S>(columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            columns: Some(columns.into_iter().map(Into::into).collect()),
            sample_period: None,
        }
    }
}

fn is_timestamp_header(name: &str) -> bool {
    matches!(name.to_ascii_lowercase().as_str(), "timestamp" | "time" | "datetime")
}

fn parse_timestamp(s: &str) -> Option<chrono::NaiveDateTime> {
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|d| d.naive_utc())
        .ok()
        .or_else(|| chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f").ok())
        .or_else(|| chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f").ok())
}

/// Reads a header-first, comma-separated file. An optional ISO-8601
/// timestamp may occupy the first column; it must be strictly increasing.
/// Row numbers in errors count data rows from 1.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let has_time = headers.first().is_some_and(|h| is_timestamp_header(h));
    let value_start = usize::from(has_time);

    let wanted: Vec<String> = match &schema.columns {
        Some(cols) => cols.clone(),
        None => headers[value_start..].to_vec(),
    };
    if wanted.is_empty() {
        return Err(invalid(format!("{} has no value columns", path.display())));
    }
    let indices: Vec<usize> = wanted
        .iter()
        .map(|name| {
            headers[value_start..]
                .iter()
                .position(|h| h == name)
                .map(|p| p + value_start)
                .ok_or_else(|| Error::MissingColumn(name.clone()))
        })
        .collect::<Result<_>>()?;

    let csv_err = |row: usize, column: &str, message: String| Error::Csv {
        path: path.to_owned(),
        row,
        column: column.to_owned(),
        message,
    };

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    let mut stamps: Vec<String> = Vec::new();
    let mut parsed_stamps: Vec<chrono::NaiveDateTime> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record?;
        if record.len() != headers.len() {
            return Err(csv_err(
                row,
                "*",
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        if has_time {
            let raw = record[0].trim();
            let t = parse_timestamp(raw)
                .ok_or_else(|| csv_err(row, &headers[0], format!("'{raw}' is not an ISO-8601 timestamp")))?;
            if parsed_stamps.last().is_some_and(|prev| *prev >= t) {
                return Err(csv_err(row, &headers[0], "timestamps must be strictly increasing".into()));
            }
            parsed_stamps.push(t);
            stamps.push(raw.to_owned());
        }
        for (col, &idx) in columns.iter_mut().zip(&indices) {
            let cell = record[idx].trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| csv_err(row, &headers[idx], format!("'{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(csv_err(row, &headers[idx], format!("non-finite value '{cell}'")));
            }
            col.push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(invalid(format!("{} has no data rows", path.display())));
    }

    let sidecar: Option<Sidecar> = std::fs::read_to_string(sidecar_path(path))
        .ok()
        .map(|s| serde_json::from_str(&s))
        .transpose()?;
    let period = schema
        .sample_period
        .or_else(|| sidecar.as_ref().map(|s| s.sample_period))
        .or_else(|| {
            (parsed_stamps.len() >= 2)
                .then(|| (parsed_stamps[1] - parsed_stamps[0]).num_milliseconds() as f64 / 1000.0)
        })
        .unwrap_or(1.0);

    let streams = wanted
        .iter()
        .zip(columns)
        .map(|(name, values)| {
            let ts = TimeSeries::new(name.clone(), values, period)?;
            Ok(match sidecar.as_ref().and_then(|s| s.units.get(name)) {
                Some(u) => ts.with_units(u.clone()),
                None => ts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dataset = Dataset::new(streams)?;
    if has_time {
        dataset = dataset.with_timestamps(stamps)?;
    }
    if let Some(sc) = sidecar {
        dataset.metadata = sc.metadata;
    }
    Ok(dataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleMode {
    #[default]
    Hold,
    Linear,
}

/// Raises the sampling rate by `fold`. `Hold` repeats each sample `fold`
/// times; `Linear` interpolates between consecutive samples and keeps both
/// endpoints.
pub fn upsample(series: &TimeSeries, fold: usize, mode: UpsampleMode) -> Result<TimeSeries> {
    if fold < 1 {
        return Err(invalid("upsampling fold must be at least 1"));
    }
    let v = series.values();
    let values: Vec<f64> = match mode {
        UpsampleMode::Hold => v
            .iter()
            .flat_map(|&x| std::iter::repeat_n(x, fold))
            .collect(),
        UpsampleMode::Linear => {
            let mut out = Vec::with_capacity((v.len() - 1) * fold + 1);
            for w in v.windows(2) {
                for step in 0..fold {
                    let t = step as f64 / fold as f64;
                    out.push(w[0] + (w[1] - w[0]) * t);
                }
            }
            out.push(v[v.len() - 1]);
            out
        }
    };
    let ts = TimeSeries::new(series.id(), values, series.sample_period() / fold as f64)?;
    Ok(match series.units() {
        Some(u) => ts.with_units(u),
        None => ts,
    })
}

/// Contiguous prefix/suffix split at `floor(fraction · len)`.
pub fn split(dataset: &Dataset, train_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let n = dataset.len();
    let cut = (train_fraction * n as f64).floor() as usize;
    if cut == 0 || cut == n {
        return Err(invalid(format!(
            "train fraction {train_fraction} of {n} rows leaves one side empty"
        )));
    }
    Ok((dataset.slice(0, cut)?, dataset.slice(cut, n)?))
}
