//! CSV and JSON result files.
//!
//! CSV columns: `t`, then for each selected method in canonical order
//! `<m>_rho11,<m>_rho01_re,<m>_rho01_im`; the exact method adds
//! `exact_rho11_std,exact_norm_drift`. Floats are written in the shortest
//! form that parses back to the same value.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::{Comparison, ExperimentConfig, Method, RealizationFailure, ResultSet};
use crate::correlations::RateSet;
use crate::model::RealizationSeeds;
use crate::state::DensityMatrix2;
use crate::trajectory::{Record, Trajectory, TrajectoryMeta};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config(format!("unknown output format {other:?}"))),
        }
    }
}

pub fn emit(results: &ResultSet, format: OutputFormat, path: &Path) -> Result<()> {
    match format {
        OutputFormat::Csv => emit_csv(results, path),
        OutputFormat::Json => emit_json(results, path),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        Error::Format { path: path.to_path_buf(), message: e.to_string() }
    }
}

pub fn csv_header(results: &ResultSet) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    for (m, _) in &results.trajectories {
        for col in ["rho11", "rho01_re", "rho01_im"] {
            header.push(format!("{m}_{col}"));
        }
        if *m == Method::Exact {
            header.push("exact_rho11_std".into());
            header.push("exact_norm_drift".into());
        }
    }
    header
}

pub fn emit_csv(results: &ResultSet, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(csv_header(results)).map_err(|e| csv_error(path, e))?;
    for (s, t) in results.times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        for (m, traj) in &results.trajectories {
            let rho = &traj.records[s].rho;
            row.push(rho.rho11().to_string());
            row.push(rho.rho01().re.to_string());
            row.push(rho.rho01().im.to_string());
            if *m == Method::Exact {
                let stats = results.exact_stats.as_ref().expect("exact runs carry statistics");
                row.push(stats.rho11_std[s].to_string());
                row.push(stats.norm_drift[s].to_string());
            }
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct JsonCurve<'a> {
    method: Method,
    rho11: Vec<f64>,
    rho01_re: Vec<f64>,
    rho01_im: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho11_std: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    norm_drift: Option<&'a [f64]>,
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    version: &'a str,
    config: &'a ExperimentConfig,
    rates: &'a RateSet,
    seeds: &'a [RealizationSeeds],
    partial: bool,
    failures: &'a [RealizationFailure],
    times: &'a [f64],
    curves: Vec<JsonCurve<'a>>,
    comparisons: &'a [Comparison],
}

pub fn emit_json(results: &ResultSet, path: &Path) -> Result<()> {
    let stats = results.exact_stats.as_ref();
    let curves = results
        .trajectories
        .iter()
        .map(|(m, traj)| {
            let exact = if *m == Method::Exact { stats } else { None };
            JsonCurve {
                method: *m,
                rho11: traj.records.iter().map(|r| r.rho.rho11()).collect(),
                rho01_re: traj.records.iter().map(|r| r.rho.rho01().re).collect(),
                rho01_im: traj.records.iter().map(|r| r.rho.rho01().im).collect(),
                rho11_std: exact.map(|s| s.rho11_std.as_slice()),
                norm_drift: exact.map(|s| s.norm_drift.as_slice()),
            }
        })
        .collect();
    let doc = JsonDocument {
        version: results.version,
        config: &results.config,
        rates: &results.rates,
        seeds: stats.map_or(&[], |s| s.seeds.as_slice()),
        partial: results.is_partial(),
        failures: &results.failures,
        times: &results.times,
        curves,
        comparisons: &results.comparisons,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &doc)
        .map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// A result CSV read back into columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Methods that have a `<m>_rho11` column, in file order.
    pub fn methods(&self) -> Vec<Method> {
        self.headers
            .iter()
            .filter_map(|h| h.strip_suffix("_rho11"))
            .filter_map(|m| m.parse().ok())
            .collect()
    }

    /// Reduced-state curve of one method.
    pub fn trajectory(&self, method: Method) -> Result<Trajectory> {
        let missing = |c: &str| Error::config(format!("CSV has no column {c}"));
        let times = self.column("t").ok_or_else(|| missing("t"))?;
        let col = |suffix: &str| {
            let name = format!("{method}_{suffix}");
            self.column(&name).ok_or_else(|| missing(&name))
        };
        let (p, re, im) = (col("rho11")?, col("rho01_re")?, col("rho01_im")?);
        let records = (0..times.len())
            .map(|k| Record::reduced(DensityMatrix2::from_population(p[k], C64::new(re[k], im[k]))))
            .collect();
        Trajectory::new(times, records, TrajectoryMeta { method: method.name().into(), ..Default::default() })
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = r.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (n, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| Error::Format {
                    path: path.to_path_buf(),
                    message: format!("row {}: not a number: {field:?}", n + 2),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { headers, rows })
}
