use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::args::Format;
use crate::CliError;

/// What a command produced, before formatting.
pub struct Report {
    pub command: &'static str,
    pub params: Value,
    pub result: Value,
    /// CSV rows, for commands that have a tabular form.
    pub table: Option<Table>,
    pub check: Check,
    pub default_format: Format,
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Serialize)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: u32,
    command: &'a str,
    params: &'a Value,
    result: &'a Value,
    check: &'a Check,
}

impl Report {
    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Json => {
                let env = Envelope {
                    schema_version: rotor_codes::SCHEMA_VERSION,
                    command: self.command,
                    params: &self.params,
                    result: &self.result,
                    check: &self.check,
                };
                let mut buf = serde_json::to_vec_pretty(&env).map_err(|e| CliError::Io(e.to_string()))?;
                buf.push(b'\n');
                Ok(buf)
            }
            Format::Csv => {
                let table = self
                    .table
                    .as_ref()
                    .ok_or_else(|| CliError::Usage(format!("`{}` has no csv form; use --format json", self.command)))?;
                let mut w = csv::Writer::from_writer(Vec::new());
                let io = |e: csv::Error| CliError::Io(e.to_string());
                w.write_record(&table.header).map_err(io)?;
                for row in &table.rows {
                    w.write_record(row.iter().map(|x| x.to_string())).map_err(io)?;
                }
                w.into_inner().map_err(|e| CliError::Io(e.to_string()))
            }
        }
    }
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialise")
}

/// Writes to `path` through a temporary file in the same directory, or to stdout.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match path {
        None => std::io::stdout().write_all(bytes).map_err(io),
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
            tmp.write_all(bytes).map_err(io)?;
            tmp.persist(p).map_err(|e| io(e.error))?;
            Ok(())
        }
    }
}
