use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{CellRecord, ExperimentResult, SummaryRow};
use super::HarnessError;
use crate::decimal::{fmt_f64, parse_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(HarnessError::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

pub const PER_CELL_FILE: &str = "per_cell.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RESULT_FILE: &str = "result.json";
pub const PLOT_FILE: &str = "plot.tsv";

const PER_CELL_HEADER: [&str; 5] = ["n", "replicate", "empirical_value", "reference_value", "abs_error"];
const SUMMARY_HEADER: [&str; 4] = ["n", "mean_error", "std_error", "bound_value"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

/// Writes into directory `dir` (created if missing) and returns the files
/// written: `per_cell.csv` and `summary.csv`, or `result.json`.
pub fn export(result: &ExperimentResult, format: ExportFormat, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    match format {
        ExportFormat::Json => {
            let path = dir.join(RESULT_FILE);
            let mut text = result.to_json()?;
            text.push('\n');
            fs::write(&path, text).map_err(io_err(&path))?;
            Ok(vec![path])
        }
        ExportFormat::Csv => {
            let cells = dir.join(PER_CELL_FILE);
            let rows: Vec<Vec<String>> = result
                .per_cell
                .iter()
                .map(|c| {
                    vec![
                        c.n.to_string(),
                        c.replicate.to_string(),
                        fmt_f64(c.empirical_value),
                        fmt_f64(c.reference_value),
                        fmt_f64(c.abs_error),
                    ]
                })
                .collect();
            write_csv(&cells, &PER_CELL_HEADER, &rows)?;
            let summary = dir.join(SUMMARY_FILE);
            let rows: Vec<Vec<String>> = result
                .summary
                .iter()
                .map(|r| vec![r.n.to_string(), fmt_f64(r.mean_error), fmt_f64(r.std_error), fmt_f64(r.bound_value)])
                .collect();
            write_csv(&summary, &SUMMARY_HEADER, &rows)?;
            Ok(vec![cells, summary])
        }
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found = r.headers().map_err(csv_err(path))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(HarnessError::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected header {found:?}"),
        });
    }
    r.records().collect::<Result<_, _>>().map_err(csv_err(path))
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T, HarnessError> {
    rec.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(|| HarnessError::Parse {
        path: path.to_path_buf(),
        message: format!("bad field {i} in row {rec:?}"),
    })
}

fn float(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<f64, HarnessError> {
    rec.get(i).and_then(parse_f64).ok_or_else(|| HarnessError::Parse {
        path: path.to_path_buf(),
        message: format!("bad number in field {i} of row {rec:?}"),
    })
}

/// Reads back the two tables written by a CSV [`export`].
pub fn import_csv(dir: &Path) -> Result<(Vec<CellRecord>, Vec<SummaryRow>), HarnessError> {
    let path = dir.join(PER_CELL_FILE);
    let cells = read_csv(&path, &PER_CELL_HEADER)?
        .iter()
        .map(|rec| {
            Ok(CellRecord {
                n: field(&path, rec, 0)?,
                replicate: field(&path, rec, 1)?,
                empirical_value: float(&path, rec, 2)?,
                reference_value: float(&path, rec, 3)?,
                abs_error: float(&path, rec, 4)?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let path = dir.join(SUMMARY_FILE);
    let summary = read_csv(&path, &SUMMARY_HEADER)?
        .iter()
        .map(|rec| {
            Ok(SummaryRow {
                n: field(&path, rec, 0)?,
                mean_error: float(&path, rec, 1)?,
                std_error: float(&path, rec, 2)?,
                bound_value: float(&path, rec, 3)?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok((cells, summary))
}

/// Reads back `result.json` from a JSON [`export`].
pub fn import_json(dir: &Path) -> Result<ExperimentResult, HarnessError> {
    let path = dir.join(RESULT_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    ExperimentResult::from_json(&text)
}

/// Tab-separated `n, mean_error, bound` for plotting tools.
pub fn write_plot_tsv(result: &ExperimentResult, path: &Path) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = String::from("n\tmean_error\tbound\n");
    for r in &result.summary {
        body.push_str(&format!("{}\t{}\t{}\n", r.n, fmt_f64(r.mean_error), fmt_f64(r.bound_value)));
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}
