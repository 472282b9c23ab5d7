//! Result envelopes, JSON with fixed-precision floats, and CSV tables.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// Bumped on any breaking change to envelope or CSV layouts.
pub const SCHEMA_VERSION: u32 = 1;

pub const TOOL_NAME: &str = "cyclone-tipping";

/// Formats a float with 17 significant digits; non-finite values become empty fields.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Compact JSON with every float written as `{:.16e}`.
struct FixedFloats;

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value.serialize(&mut ser).map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// One CSV file: header plus already formatted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file_name: &str, header: &[&str]) -> Self {
        Table { file_name: file_name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| Error::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_csv(file_name: &str, text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| Error::Io(e.to_string()))?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Io(e.to_string()))?;
        Ok(Table { file_name: file_name.into(), header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Producer {
    pub name: &'static str,
    pub version: &'static str,
}

pub const PRODUCER: Producer = Producer { name: TOOL_NAME, version: env!("CARGO_PKG_VERSION") };

#[derive(Debug, Clone, Serialize)]
pub struct Envelope<'a> {
    pub schema_version: u32,
    pub command: &'a str,
    pub produced_by: Producer,
    pub config: &'a RunConfig,
    pub tables: Vec<&'a str>,
    pub payload: &'a serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord<'a> {
    pub kind: &'a str,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorEnvelope<'a> {
    pub schema_version: u32,
    pub command: &'a str,
    pub produced_by: Producer,
    pub error: ErrorRecord<'a>,
}

pub fn error_json(command: &str, e: &Error) -> String {
    let env = ErrorEnvelope {
        schema_version: SCHEMA_VERSION,
        command,
        produced_by: PRODUCER,
        error: ErrorRecord { kind: e.kind(), message: e.to_string(), exit_code: e.exit_code() },
    };
    to_json(&env).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}\n", e.kind()))
}
