//! CSV and JSON readers and writers.
//!
//! CSV numbers carry 17 significant digits; JSON numbers use the shortest
//! representation that parses back to the same `f64`. Both round-trip
//! exactly, and writing the same data twice gives identical bytes.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::error::{Error, Result};
use crate::fit::Observation;
use crate::flux::FluxVector;
use crate::spin::SpinEnvironment;
use crate::sweep::{FieldResult, Metadata, SweepOutput};
use crate::units::{convert_units, Unit};

pub const SPECTRUM_HEADER: [&str; 6] = ["field_gauss", "x", "S_parallel", "S_perp", "S_total", "unit"];

pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Long-format spectrum table: one row per (field, x).
pub fn write_spectrum_csv(results: &[&FieldResult], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_error(path);
    w.write_record(SPECTRUM_HEADER).map_err(&err)?;
    for r in results {
        let unit = r.total.unit().to_string();
        for i in 0..r.total.len() {
            w.write_record([
                format_number(r.field_gauss),
                format_number(r.total.grid()[i]),
                format_number(r.parallel.values()[i]),
                format_number(r.perpendicular.values()[i]),
                format_number(r.total.values()[i]),
                unit.clone(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A generic numeric table.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_error(path);
    w.write_record(header).map_err(&err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_number(*v))).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonSpectrum {
    pub temperature_mK: f64,
    pub field_gauss: f64,
    pub reduced_field: f64,
    pub unit: String,
    pub x: Vec<f64>,
    pub S_parallel: Vec<f64>,
    pub S_perp: Vec<f64>,
    pub S_total: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error_parallel: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error_perp: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    metadata: &'a Metadata,
    spectra: Vec<JsonSpectrum>,
}

impl From<&FieldResult> for JsonSpectrum {
    fn from(r: &FieldResult) -> Self {
        Self {
            temperature_mK: r.temperature_mk,
            field_gauss: r.field_gauss,
            reduced_field: r.reduced_field,
            unit: r.total.unit().to_string(),
            x: r.total.grid().to_vec(),
            S_parallel: r.parallel.values().to_vec(),
            S_perp: r.perpendicular.values().to_vec(),
            S_total: r.total.values().to_vec(),
            std_error_parallel: r.std_error_parallel.clone(),
            std_error_perp: r.std_error_perpendicular.clone(),
            warnings: r.warnings.clone(),
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_sweep_json(output: &SweepOutput, path: &Path) -> Result<()> {
    let doc = JsonDocument {
        metadata: &output.metadata,
        spectra: output.results.iter().map(JsonSpectrum::from).collect(),
    };
    write_json(&doc, path)
}

/// Read back the `spectra` array of a sweep JSON document.
pub fn read_sweep_json(path: &Path) -> Result<Vec<JsonSpectrum>> {
    #[derive(Deserialize)]
    struct Doc {
        spectra: Vec<JsonSpectrum>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str::<Doc>(&text)?.spectra)
}

/// Write a sweep as `<stem>.json`, or as `<stem>.csv` (one CSV per
/// temperature, `<stem>_<T>mK.csv`, when several are swept). Returns the
/// written paths.
pub fn write_sweep(output: &SweepOutput, dir: &Path, stem: &str, format: Format) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match format {
        Format::Json => {
            let path = dir.join(format!("{stem}.json"));
            write_sweep_json(output, &path)?;
            Ok(vec![path])
        }
        Format::Csv => {
            let mut temps: Vec<f64> = Vec::new();
            for r in &output.results {
                if !temps.contains(&r.temperature_mk) {
                    temps.push(r.temperature_mk);
                }
            }
            if temps.len() <= 1 {
                let path = dir.join(format!("{stem}.csv"));
                write_spectrum_csv(&output.results.iter().collect::<Vec<_>>(), &path)?;
                return Ok(vec![path]);
            }
            temps
                .iter()
                .map(|t| {
                    let path = dir.join(format!("{stem}_{t}mK.csv"));
                    let rows: Vec<&FieldResult> = output.results.iter().filter(|r| r.temperature_mk == *t).collect();
                    write_spectrum_csv(&rows, &path)?;
                    Ok(path)
                })
                .collect()
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SpectrumRow {
    pub field_gauss: f64,
    pub x: f64,
    pub S_parallel: f64,
    pub S_perp: f64,
    pub S_total: f64,
    pub unit: String,
}

pub fn read_spectrum_csv(path: &Path) -> Result<Vec<SpectrumRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    r.deserialize().map(|row| row.map_err(csv_error(path))).collect()
}

#[allow(non_snake_case)]
#[derive(Deserialize)]
struct FluxRow {
    Fx: f64,
    Fy: f64,
    Fz: f64,
}

/// Flux vectors from a CSV with columns `Fx, Fy, Fz` (Wb).
pub fn read_flux_vectors(path: &Path) -> Result<Vec<FluxVector>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    r.deserialize::<FluxRow>()
        .map(|row| {
            let row = row.map_err(csv_error(path))?;
            FluxVector::new([row.Fx, row.Fy, row.Fz])
        })
        .collect()
}

#[allow(non_snake_case)]
#[derive(Deserialize)]
struct ObservationRow {
    B_gauss: f64,
    #[serde(default)]
    omega_dimensionless: Option<f64>,
    #[serde(default)]
    freq_hz: Option<f64>,
    S_value: f64,
    unit: String,
    #[serde(default)]
    sigma: Option<f64>,
}

/// Observations for a fit. Frequencies in Hz are converted to reduced
/// units; spin noise in seconds is converted to `ħ/(k_B T)`. All rows must
/// share one unit tag.
pub fn read_observations(
    path: &Path,
    temperature: f64,
    curie_weiss_temperature: f64,
    g_factor: f64,
) -> Result<(Vec<Observation>, Unit)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let mut unit: Option<Unit> = None;
    let mut out = Vec::new();
    for row in r.deserialize::<ObservationRow>() {
        let row = row.map_err(csv_error(path))?;
        let u: Unit = row
            .unit
            .parse()
            .map_err(|_| Error::Config(format!("{}: unknown unit tag `{}`", path.display(), row.unit)))?;
        match unit {
            None => unit = Some(u),
            Some(prev) if prev != u => {
                return Err(Error::Config(format!(
                    "{}: mixed unit tags {prev} and {u}",
                    path.display()
                )))
            }
            _ => {}
        }
        let env = SpinEnvironment::from_gauss(temperature, curie_weiss_temperature, g_factor, row.B_gauss)?;
        let x = match (row.omega_dimensionless, row.freq_hz) {
            (Some(x), None) => x,
            (None, Some(f)) => convert_units(f, Unit::Hertz, Unit::ReducedFrequency, &env)?,
            _ => {
                return Err(Error::Config(format!(
                    "{}: each row needs exactly one of omega_dimensionless and freq_hz",
                    path.display()
                )))
            }
        };
        let value = if u == Unit::Seconds {
            convert_units(row.S_value, Unit::Seconds, Unit::ReducedNoise, &env)?
        } else {
            row.S_value
        };
        out.push(Observation {
            env,
            x,
            value,
            sigma: row.sigma,
        });
    }
    let unit = unit.map(|u| if u == Unit::Seconds { Unit::ReducedNoise } else { u });
    Ok((out, unit.unwrap_or(Unit::ReducedNoise)))
}
