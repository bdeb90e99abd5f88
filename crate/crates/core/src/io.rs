//! CSV and JSON persistence of run records and ensemble summaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::analysis::EnsembleStats;
use crate::error::{Error, Result};
use crate::measurement::Action;
use crate::potential::Well;
use crate::protocol::ErasureRun;

/// 17 significant digits in scientific notation; round-trips every f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub const RUNS_HEADER: [&str; 12] = [
    "run_id",
    "d",
    "sigma_n_nm",
    "init_well",
    "x_tm_nm",
    "m_nm",
    "action",
    "W1_kBT",
    "W2_kBT",
    "W_kBT",
    "x_final_nm",
    "success",
];

pub const SWEEP_HEADER: [&str; 8] = ["d", "sigma_n_nm", "n", "mean_W_kBT", "se_W_kBT", "p_hat", "se_p", "zero_mass"];

/// A type with a fixed CSV layout.
pub trait CsvRecord: Sized {
    fn header() -> &'static [&'static str];
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(fields: &csv::StringRecord) -> std::result::Result<Self, String>;
}

fn field(rec: &csv::StringRecord, i: usize) -> std::result::Result<&str, String> {
    rec.get(i).ok_or_else(|| format!("missing column {i}"))
}

fn parse_f64(rec: &csv::StringRecord, i: usize) -> std::result::Result<f64, String> {
    let s = field(rec, i)?;
    s.parse().map_err(|_| format!("column {i}: '{s}' is not a number"))
}

fn parse_opt(rec: &csv::StringRecord, i: usize) -> std::result::Result<Option<f64>, String> {
    match field(rec, i)? {
        "" => Ok(None),
        _ => parse_f64(rec, i).map(Some),
    }
}

fn parse_usize(rec: &csv::StringRecord, i: usize) -> std::result::Result<usize, String> {
    let s = field(rec, i)?;
    s.parse().map_err(|_| format!("column {i}: '{s}' is not a count"))
}

impl CsvRecord for ErasureRun {
    fn header() -> &'static [&'static str] {
        &RUNS_HEADER
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.run_id.to_string(),
            format_float(self.duty),
            format_opt(self.sigma_n),
            self.initial_well.as_str().to_string(),
            format_float(self.x_at_tm),
            format_opt(self.m),
            self.action.as_str().to_string(),
            format_float(self.w1),
            format_float(self.w2),
            format_float(self.w_total),
            format_float(self.x_final),
            self.success.to_string(),
        ]
    }

    fn from_fields(rec: &csv::StringRecord) -> std::result::Result<Self, String> {
        let initial_well = match field(rec, 3)? {
            "left" => Well::Left,
            "right" => Well::Right,
            other => return Err(format!("unknown well '{other}'")),
        };
        let action = match field(rec, 6)? {
            "act" => Action::Act,
            "no_action" => Action::NoAction,
            other => return Err(format!("unknown action '{other}'")),
        };
        let success = match field(rec, 11)? {
            "true" => true,
            "false" => false,
            other => return Err(format!("success must be true or false, got '{other}'")),
        };
        Ok(ErasureRun {
            run_id: field(rec, 0)?.parse().map_err(|_| "run_id is not an integer".to_string())?,
            duty: parse_f64(rec, 1)?,
            sigma_n: parse_opt(rec, 2)?,
            initial_well,
            x_at_tm: parse_f64(rec, 4)?,
            m: parse_opt(rec, 5)?,
            action,
            w1: parse_f64(rec, 7)?,
            w2: parse_f64(rec, 8)?,
            w_total: parse_f64(rec, 9)?,
            x_final: parse_f64(rec, 10)?,
            success,
        })
    }
}

impl CsvRecord for EnsembleStats {
    fn header() -> &'static [&'static str] {
        &SWEEP_HEADER
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            format_float(self.d),
            format_opt(self.sigma_n),
            self.n_runs.to_string(),
            format_float(self.mean_w),
            format_float(self.se_w),
            format_float(self.p_hat),
            format_float(self.se_p),
            format_float(self.zero_mass),
        ]
    }

    fn from_fields(rec: &csv::StringRecord) -> std::result::Result<Self, String> {
        Ok(EnsembleStats {
            d: parse_f64(rec, 0)?,
            sigma_n: parse_opt(rec, 1)?,
            n_runs: parse_usize(rec, 2)?,
            mean_w: parse_f64(rec, 3)?,
            se_w: parse_f64(rec, 4)?,
            p_hat: parse_f64(rec, 5)?,
            se_p: parse_f64(rec, 6)?,
            zero_mass: parse_f64(rec, 7)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Writes records in order; an empty slice still produces a header (CSV)
/// or an empty array (JSON).
pub fn write_records<R: CsvRecord + Serialize>(records: &[R], path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Csv => write_csv(records, path),
        Format::Json => write_json(&records, path),
    }
}

pub fn write_csv<R: CsvRecord>(records: &[R], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(R::header()).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record(r.to_fields()).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<R: CsvRecord>(path: &Path) -> Result<Vec<R>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if !header.iter().eq(R::header().iter().copied()) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("expected header {}, found {}", R::header().join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parsed = R::from_fields(&rec).map_err(|reason| Error::Format {
            path: path.to_path_buf(),
            reason: format!("record {}: {reason}", line + 1),
        })?;
        out.push(parsed);
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Format { path: path.to_path_buf(), reason: e.to_string() }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut buf, value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    buf.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    buf.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_run(id: u64, sigma: Option<f64>) -> ErasureRun {
        ErasureRun {
            run_id: id,
            duty: 0.75,
            sigma_n: sigma,
            initial_well: Well::Right,
            x_at_tm: 541.123456789,
            m: sigma.map(|_| 812.5),
            action: Action::Act,
            w1: 4.1,
            w2: -0.1 + 0.2,
            w_total: 4.2,
            x_final: -553.0,
            success: true,
        }
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1 + 0.2, -1e-300, 6.02214076e23, 0.0, -0.0, f64::MIN_POSITIVE] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn runs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        let runs = vec![sample_run(0, Some(300.0)), sample_run(1, None)];
        write_records(&runs, &path, Format::Csv).unwrap();
        let back: Vec<ErasureRun> = read_csv(&path).unwrap();
        assert_eq!(back, runs);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&RUNS_HEADER.join(",")));
        // open-loop rows leave sigma_n and m empty
        let second = text.lines().nth(2).unwrap();
        assert_eq!(second.split(',').nth(2), Some(""));
        assert_eq!(second.split(',').nth(5), Some(""));
    }

    #[test]
    fn empty_ensemble_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_records::<ErasureRun>(&[], &path, Format::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{}\n", RUNS_HEADER.join(",")));
        let json = dir.path().join("empty.json");
        write_records::<ErasureRun>(&[], &json, Format::Json).unwrap();
        assert_eq!(std::fs::read_to_string(&json).unwrap(), "[]\n");
    }

    #[test]
    fn sweep_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let stats = vec![EnsembleStats {
            d: 0.8,
            sigma_n: Some(300.0),
            n_runs: 300,
            mean_w: 2.345,
            se_w: 0.1,
            p_hat: 0.87,
            se_p: 0.019,
            zero_mass: 0.45,
        }];
        write_csv(&stats, &path).unwrap();
        assert_eq!(read_csv::<EnsembleStats>(&path).unwrap(), stats);
    }

    #[test]
    fn wrong_header_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_csv::<EnsembleStats>(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let path = Path::new("/nonexistent-dir/x.csv");
        let err = write_csv::<EnsembleStats>(&[], path).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"), "{err}");
    }
}
