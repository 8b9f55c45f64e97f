//! On-disk formats: JSON for models, partitions, codebooks, schedules and
//! experiment specs; headerless CSV for sample matrices.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::codebook::{DistributedQuantizer, SensorCodebook};
use crate::error::{Error, Result};
use crate::model::Dataset;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| {
        if e.is_io() {
            io_err(path, e.into())
        } else {
            Error::Json {
                path: path.display().to_string(),
                source: e,
            }
        }
    })
}

/// Pretty JSON with a trailing newline. Floats are written in shortest
/// round-trip form, so reading the file back reproduces every value exactly.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)).map_err(|e| io_err(path, e))
}

/// Reads a headerless CSV of decimal floats, one sample per row.
pub fn read_csv_matrix(path: &Path) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(f));
    let csv_err = |message: String| Error::Csv {
        path: path.display().to_string(),
        message,
    };
    let mut cols = None;
    let mut data = Vec::new();
    for (j, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => io_err(path, std::io::Error::other(e.to_string())),
            _ => csv_err(e.to_string()),
        })?;
        let width = *cols.get_or_insert(rec.len());
        if rec.len() != width {
            return Err(csv_err(format!("row {} has {} columns, expected {width}", j + 1, rec.len())));
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| csv_err(format!("row {}: '{field}' is not a number", j + 1)))?;
            data.push(v);
        }
    }
    let cols = cols.ok_or_else(|| csv_err("file has no rows".into()))?;
    Dataset::new(cols, data).map_err(|e| csv_err(e.to_string()))
}

pub fn write_csv_matrix<W: Write>(out: W, data: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(out);
    let write = |w: &mut BufWriter<W>| -> std::io::Result<()> {
        for row in data.iter_rows() {
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    w.write_all(b",")?;
                }
                write!(w, "{v}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::Io {
        path: "csv output".into(),
        source: e,
    })
}

pub fn write_csv_matrix_file(path: &Path, data: &Dataset) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    write_csv_matrix(f, data).map_err(|e| match e {
        Error::Io { source, .. } => io_err(path, source),
        other => other,
    })
}

/// A quantizer on disk. Quantizers produced by rate adaptation also carry the
/// full-rate codebooks they were derived from, so that later adaptations
/// (including back up to the full rate) start from the original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCodebookFile", into = "RawCodebookFile")]
pub struct CodebookFile {
    pub quantizer: DistributedQuantizer,
    pub full_rate: Option<DistributedQuantizer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCodebookFile {
    model: crate::model::LinearModel,
    partition: crate::model::FeaturePartition,
    codebooks: Vec<SensorCodebook>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    full_rate_codebooks: Option<Vec<SensorCodebook>>,
}

impl TryFrom<RawCodebookFile> for CodebookFile {
    type Error = Error;

    fn try_from(r: RawCodebookFile) -> Result<Self> {
        let quantizer = DistributedQuantizer::new(r.model, r.partition, r.codebooks)?;
        let full_rate = r.full_rate_codebooks.map(|cbs| quantizer.with_codebooks(cbs)).transpose()?;
        Ok(CodebookFile { quantizer, full_rate })
    }
}

impl From<CodebookFile> for RawCodebookFile {
    fn from(f: CodebookFile) -> Self {
        RawCodebookFile {
            model: f.quantizer.model().clone(),
            partition: f.quantizer.partition().clone(),
            codebooks: f.quantizer.codebooks().to_vec(),
            full_rate_codebooks: f.full_rate.map(|q| q.codebooks().to_vec()),
        }
    }
}

impl CodebookFile {
    pub fn trained(quantizer: DistributedQuantizer) -> Self {
        CodebookFile {
            quantizer,
            full_rate: None,
        }
    }

    /// The quantizer that rate adaptation starts from.
    pub fn full_rate(&self) -> &DistributedQuantizer {
        self.full_rate.as_ref().unwrap_or(&self.quantizer)
    }

    /// Wraps a quantizer adapted from `full_rate`; when the adaptation gave
    /// back the full-rate quantizer itself the file is a plain trained file.
    pub fn adapted(quantizer: DistributedQuantizer, full_rate: DistributedQuantizer) -> Self {
        if quantizer == full_rate {
            CodebookFile::trained(quantizer)
        } else {
            CodebookFile {
                quantizer,
                full_rate: Some(full_rate),
            }
        }
    }
}
