//! CSV datasets, the correlated two-Gaussian generator and report files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{Aggregates, EvalReport, FoldRecord};
use crate::lpm::Assumption;
use crate::rng::Rng;

/// Which column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub has_header: bool,
    pub label_column: LabelColumn,
    pub delimiter: u8,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            has_header: true,
            label_column: LabelColumn::Last,
            delimiter: b',',
        }
    }
}

fn csv_reader(path: &Path, schema: &CsvSchema) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Reads a labeled dataset. Every non-label cell must parse as a finite
/// real; labels are kept as strings. Rows and columns in errors are 1-based
/// positions in the file.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv_reader(path, schema)?;
    let header: Option<Vec<String>> = if schema.has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut label_col = None;
    let mut features = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row: line,
                column: record.len().min(w) + 1,
                message: format!("expected {w} columns, found {}", record.len()),
            });
        }
        let lc = match label_col {
            Some(lc) => lc,
            None => {
                let lc = resolve_label_column(&schema.label_column, w, header.as_deref())?;
                label_col = Some(lc);
                lc
            }
        };
        for (j, cell) in record.iter().enumerate() {
            if j == lc {
                labels.push(cell.to_string());
                continue;
            }
            let v = f64::from_str(cell).map_err(|_| Error::Parse {
                row: line,
                column: j + 1,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: j + 1,
                    message: format!("non-finite value '{cell}'"),
                });
            }
            features.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::invalid(format!("{} has no data rows", path.display())));
    }
    let w = width.expect("width known once a row was read");
    let lc = label_col.expect("label column resolved");
    if w < 2 {
        return Err(Error::invalid("need at least one feature column besides the label"));
    }

    let mut class_names: Vec<String> = Vec::new();
    let label_idx = labels
        .iter()
        .map(|l| match class_names.iter().position(|c| c == l) {
            Some(p) => p,
            None => {
                class_names.push(l.clone());
                class_names.len() - 1
            }
        })
        .collect();
    let feature_names = match &header {
        Some(h) => h.iter().enumerate().filter(|(j, _)| *j != lc).map(|(_, n)| n.clone()).collect(),
        None => (1..w).map(|j| format!("f{j}")).collect(),
    };
    Dataset::new(features, w - 1, label_idx, class_names, feature_names)
}

fn resolve_label_column(col: &LabelColumn, width: usize, header: Option<&[String]>) -> Result<usize> {
    match col {
        LabelColumn::Last => Ok(width - 1),
        LabelColumn::Index(i) if *i < width => Ok(*i),
        LabelColumn::Index(i) => Err(Error::invalid(format!("label column {i} outside {width} columns"))),
        LabelColumn::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::invalid(format!("no column named '{name}'"))),
    }
}

/// Writes a dataset with a header row and the label in the last column.
/// Values use the shortest representation that reads back exactly.
pub fn write_dataset_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push("class");
    w.write_record(&header)?;
    for (i, row) in data.rows().enumerate() {
        let mut record: Vec<String> = row.iter().map(f64::to_string).collect();
        record.push(data.class_names()[data.label(i)].clone());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Two classes with centers (0, 1) and (0, -1), shared covariance
/// `[[2, C], [C, 2]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_per_class: usize,
    pub covariance_c: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_per_class: 100,
            covariance_c: 0.0,
        }
    }
}

pub const SYNTHETIC_CENTERS: [[f64; 2]; 2] = [[0.0, 1.0], [0.0, -1.0]];

/// Draws `n_per_class` points per class as center + L z with L the lower
/// Cholesky factor of the covariance and z standard normal. Classes are
/// named "1" and "2" and appear in that order.
pub fn gen_synthetic(spec: &SyntheticSpec, rng: &mut Rng) -> Result<Dataset> {
    let c = spec.covariance_c;
    if !(c.abs() <= 2.0) {
        return Err(Error::invalid(format!("covariance {c} makes the matrix indefinite (|C| must be <= 2)")));
    }
    if spec.n_per_class == 0 {
        return Err(Error::invalid("need at least one sample per class"));
    }
    let l11 = 2f64.sqrt();
    let l21 = c / l11;
    let l22 = (2.0 - c * c / 2.0).max(0.0).sqrt();
    let mut rows = Vec::with_capacity(2 * spec.n_per_class);
    let mut labels = Vec::with_capacity(2 * spec.n_per_class);
    for (class, center) in SYNTHETIC_CENTERS.iter().enumerate() {
        for _ in 0..spec.n_per_class {
            let z1 = rng.standard_normal();
            let z2 = rng.standard_normal();
            rows.push(vec![center[0] + l11 * z1, center[1] + l21 * z1 + l22 * z2]);
            labels.push(if class == 0 { "1" } else { "2" });
        }
    }
    Dataset::from_rows(&rows, &labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::invalid(format!("unknown format '{s}' (json or csv)"))),
        }
    }
}

pub const REPORT_CSV_HEADER: [&str; 6] = ["repeat", "fold", "acc", "mse", "chosen_k", "chosen_assumption"];

pub fn report_json(report: &EvalReport) -> Result<String> {
    report.validate()?;
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// One row per repeat × fold. `chosen_k` is empty in global mode.
pub fn report_csv(report: &EvalReport) -> Result<String> {
    report.validate()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_CSV_HEADER)?;
    for c in &report.cells {
        w.write_record([
            c.repeat.to_string(),
            c.fold.to_string(),
            c.acc.to_string(),
            c.mse.to_string(),
            c.chosen_k.map(|k| k.to_string()).unwrap_or_default(),
            c.chosen_assumption.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn save_report(report: &EvalReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => report_json(report)?,
        ReportFormat::Csv => report_csv(report)?,
    };
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a JSON report and checks its aggregates against its cells.
pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: EvalReport = serde_json::from_str(&text)?;
    report.validate()?;
    Ok(report)
}

/// Reads the per-fold rows of a CSV report.
pub fn load_report_cells(path: impl AsRef<Path>) -> Result<(Vec<FoldRecord>, Aggregates)> {
    let path = path.as_ref();
    let mut reader = csv_reader(path, &CsvSchema::default())?;
    if reader.headers()?.iter().ne(REPORT_CSV_HEADER) {
        return Err(Error::invalid(format!("{} is not a report CSV", path.display())));
    }
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let field = |j: usize| record.get(j).unwrap_or("");
        let parse_err = |j: usize| Error::Parse {
            row,
            column: j + 1,
            message: format!("bad value '{}'", field(j)),
        };
        cells.push(FoldRecord {
            repeat: field(0).parse().map_err(|_| parse_err(0))?,
            fold: field(1).parse().map_err(|_| parse_err(1))?,
            acc: field(2).parse().map_err(|_| parse_err(2))?,
            mse: field(3).parse().map_err(|_| parse_err(3))?,
            chosen_k: match field(4) {
                "" => None,
                s => Some(s.parse().map_err(|_| parse_err(4))?),
            },
            chosen_assumption: Assumption::from_str(field(5)).map_err(|_| parse_err(5))?,
        });
    }
    let aggregates = Aggregates::from_records(&cells)?;
    Ok((cells, aggregates))
}
