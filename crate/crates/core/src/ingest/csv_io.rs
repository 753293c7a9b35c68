//! Long-format CSV files: `sensor_id,timestamp,value`.
//!
//! Timestamps are either integer epoch-hours, real numbers (irregular
//! clocks) or ISO-8601 date-times; the format is detected once per file and
//! must be uniform. Values are decimal literals or the token `NA`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use ndarray::Array2;

use crate::dataset::{datetime_to_hours, hours_to_datetime, EntryState, SensorDataset, TimeFormat};
use crate::error::{Error, Result};
use crate::numfmt::format_f64;

pub const DATA_HEADER: [&str; 3] = ["sensor_id", "timestamp", "value"];
pub const TRUTH_HEADER: [&str; 3] = ["sensor_id", "timestamp", "true_value"];
pub const COORDS_HEADER: [&str; 3] = ["sensor_id", "x", "y"];

/// Options for [`load_csv`].
#[derive(Clone, Debug)]
pub struct CsvSchema {
    pub variable_name: String,
    /// Force a timestamp format instead of auto-detecting it.
    pub time_format: Option<TimeFormat>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            variable_name: "value".into(),
            time_format: None,
        }
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(input)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str; 3]) -> Result<()> {
    let header = rdr.headers().map_err(csv_err)?;
    if header.iter().collect::<Vec<_>>() != expected.as_slice() {
        return Err(Error::Parse {
            line: header.position().map(|p| p.line()).unwrap_or(1),
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

fn parse_iso(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| DateTime::parse_from_rfc3339(s).ok().map(|d| d.naive_utc()))
}

fn detect_format(token: &str) -> Option<TimeFormat> {
    if token.parse::<i64>().is_ok() {
        Some(TimeFormat::EpochHours)
    } else if token.parse::<f64>().is_ok_and(f64::is_finite) {
        Some(TimeFormat::Real)
    } else if parse_iso(token).is_some() {
        Some(TimeFormat::Iso8601)
    } else {
        None
    }
}

fn parse_time(token: &str, format: TimeFormat) -> Option<f64> {
    match format {
        TimeFormat::EpochHours => token.parse::<i64>().ok().map(|h| h as f64),
        TimeFormat::Real => token.parse::<f64>().ok().filter(|v| v.is_finite()),
        TimeFormat::Iso8601 => parse_iso(token).map(datetime_to_hours),
    }
}

pub fn format_time(hours: f64, format: TimeFormat) -> String {
    match format {
        TimeFormat::EpochHours => format!("{}", hours as i64),
        TimeFormat::Real => format_f64(hours),
        TimeFormat::Iso8601 => hours_to_datetime(hours)
            .map(|d| d.format("%Y-%m-%dT%H:%M:%S").to_string())
            .unwrap_or_else(|| format_f64(hours)),
    }
}

struct Row {
    line: u64,
    sensor: String,
    time: String,
    value: Option<f64>,
}

/// Reads a long-format sensor CSV. Timelines of all sensors are aligned on
/// the union of their timestamps; absent cells become `Missing`.
pub fn read_csv<R: Read>(input: R, schema: &CsvSchema) -> Result<SensorDataset> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &DATA_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let value = match &rec[2] {
            "NA" => None,
            tok => Some(tok.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::Parse {
                    line,
                    message: format!("invalid value `{tok}`"),
                }
            })?),
        };
        rows.push(Row {
            line,
            sensor: rec[0].to_string(),
            time: rec[1].to_string(),
            value,
        });
    }

    let format = match schema.time_format {
        Some(f) => f,
        None => {
            let mut detected: Option<TimeFormat> = None;
            for row in &rows {
                let f = detect_format(&row.time).ok_or_else(|| Error::Parse {
                    line: row.line,
                    message: format!("unrecognised timestamp `{}`", row.time),
                })?;
                detected = Some(match (detected, f) {
                    (None, f) => f,
                    (Some(a), b) if a == b => a,
                    // integer tokens are valid real clocks too
                    (Some(TimeFormat::Real), TimeFormat::EpochHours)
                    | (Some(TimeFormat::EpochHours), TimeFormat::Real) => TimeFormat::Real,
                    (Some(_), _) => {
                        return Err(Error::Parse {
                            line: row.line,
                            message: "timestamp formats are mixed within the file".into(),
                        })
                    }
                });
            }
            detected.unwrap_or(TimeFormat::EpochHours)
        }
    };

    let mut sensor_index: HashMap<String, usize> = HashMap::new();
    let mut sensor_ids = Vec::new();
    let mut parsed = Vec::with_capacity(rows.len());
    for row in &rows {
        let t = parse_time(&row.time, format).ok_or_else(|| Error::Parse {
            line: row.line,
            message: format!("invalid timestamp `{}`", row.time),
        })?;
        let s = *sensor_index.entry(row.sensor.clone()).or_insert_with(|| {
            sensor_ids.push(row.sensor.clone());
            sensor_ids.len() - 1
        });
        parsed.push((s, t, row.value, row.line));
    }

    let mut times: Vec<f64> = parsed.iter().map(|p| p.1).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut values = Array2::from_elem((times.len(), sensor_ids.len()), f64::NAN);
    let mut seen = Array2::from_elem((times.len(), sensor_ids.len()), false);
    for (s, t, v, line) in parsed {
        let row = times.binary_search_by(|x| x.total_cmp(&t)).expect("timestamp present");
        if seen[(row, s)] {
            return Err(Error::Data(format!(
                "duplicate cell for sensor `{}` at `{}` (line {line})",
                sensor_ids[s],
                format_time(t, format)
            )));
        }
        seen[(row, s)] = true;
        if let Some(v) = v {
            values[(row, s)] = v;
        }
    }
    SensorDataset::from_matrix(sensor_ids, times, format, values, schema.variable_name.clone())
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SensorDataset> {
    read_csv(File::open(path)?, schema)
}

/// Writes every cell; non-observed cells (Missing and Holdout) as `NA`.
pub fn write_csv<W: Write>(dataset: &SensorDataset, out: W, comment: Option<&str>) -> Result<()> {
    write_matrix(dataset, dataset.values(), out, comment)
}

/// Writes an arbitrary `[timestamps × sensors]` matrix with the dataset's
/// sensor ids and clock; `NaN` cells become `NA`.
pub fn write_matrix<W: Write>(
    dataset: &SensorDataset,
    matrix: &Array2<f64>,
    mut out: W,
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATA_HEADER).map_err(csv_err)?;
    let format = dataset.time_format();
    for (t, &time) in dataset.timestamps().iter().enumerate() {
        let ts = format_time(time, format);
        for (s, id) in dataset.sensor_ids().iter().enumerate() {
            let v = matrix[(t, s)];
            let tok = if v.is_nan() { "NA".to_string() } else { format_f64(v) };
            w.write_record([id.as_str(), ts.as_str(), tok.as_str()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(dataset: &SensorDataset, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
    write_csv(dataset, File::create(path)?, comment)
}

/// Writes the ground truth of every Holdout cell.
pub fn write_truth<W: Write>(dataset: &SensorDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRUTH_HEADER).map_err(csv_err)?;
    let format = dataset.time_format();
    for ((t, s), v) in dataset.ground_truth().iter_values() {
        let ts = format_time(dataset.timestamps()[t], format);
        w.write_record([dataset.sensor_ids()[s].as_str(), ts.as_str(), &format_f64(v)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_truth(dataset: &SensorDataset, path: impl AsRef<Path>) -> Result<()> {
    write_truth(dataset, File::create(path)?)
}

/// Attaches a ground-truth sidecar: every listed cell becomes Holdout.
pub fn read_truth<R: Read>(dataset: &mut SensorDataset, input: R) -> Result<()> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &TRUTH_HEADER)?;
    let format = dataset.time_format();
    let ids: HashMap<String, usize> = dataset
        .sensor_ids()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse { line, message };
        if rec.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", rec.len())));
        }
        let s = *ids
            .get(&rec[0])
            .ok_or_else(|| Error::Data(format!("unknown sensor `{}` (line {line})", &rec[0])))?;
        let time = parse_time(&rec[1], format)
            .ok_or_else(|| parse_err(format!("invalid timestamp `{}`", &rec[1])))?;
        let t = dataset
            .timestamps()
            .binary_search_by(|x| x.total_cmp(&time))
            .map_err(|_| Error::Data(format!("timestamp `{}` not in dataset (line {line})", &rec[1])))?;
        let v: f64 = rec[2]
            .parse()
            .map_err(|_| parse_err(format!("invalid value `{}`", &rec[2])))?;
        if dataset.state(t, s) == EntryState::Holdout {
            return Err(Error::Data(format!("duplicate truth cell (line {line})")));
        }
        dataset.attach_truth(t, s, v)?;
    }
    Ok(())
}

pub fn load_truth(dataset: &mut SensorDataset, path: impl AsRef<Path>) -> Result<()> {
    read_truth(dataset, File::open(path)?)
}

/// Reads a `sensor_id,x,y` sidecar into per-sensor planar coordinates.
pub fn read_coordinates<R: Read>(dataset: &SensorDataset, input: R) -> Result<Vec<Option<(f64, f64)>>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &COORDS_HEADER)?;
    let mut coords = vec![None; dataset.num_sensors()];
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid coordinate `{}`", &rec[i]),
            })
        };
        if let Some(s) = dataset.sensor_ids().iter().position(|id| id == &rec[0]) {
            coords[s] = Some((num(1)?, num(2)?));
        }
    }
    Ok(coords)
}

pub fn load_coordinates(dataset: &SensorDataset, path: impl AsRef<Path>) -> Result<Vec<Option<(f64, f64)>>> {
    read_coordinates(dataset, File::open(path)?)
}
