use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const TOOL: &str = "racovert";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column-oriented result ready for CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Two comment lines (tool, command and seed; resolved config), then
    /// the header row and data.
    pub fn to_csv(&self, command: &str, cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "# {TOOL} {VERSION} command={command} seed={}", cfg.raw("seed"))?;
        writeln!(buf, "# config: {}", cfg.summary())?;
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Probability in scientific notation, exact to round-trip.
pub fn sci(x: f64) -> String {
    format!("{x:e}")
}

pub fn log10(x: f64) -> String {
    if x > 0.0 {
        format!("{}", x.log10())
    } else {
        "-inf".to_string()
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a std::collections::BTreeMap<String, String>,
    report: &'a T,
}

/// Pretty JSON with the resolved config echoed next to the report.
pub fn to_json<T: Serialize>(command: &str, cfg: &RunConfig, report: &T) -> Result<Vec<u8>, CliError> {
    let env = Envelope {
        tool: TOOL,
        version: VERSION,
        command,
        config: cfg.values(),
        report,
    };
    let mut out = serde_json::to_vec_pretty(&env).map_err(|e| CliError::Io(e.into()))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes to `path` through a temporary file in the same directory, or to
/// stdout when no path is given.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    let Some(path) = path else {
        std::io::stdout().write_all(bytes)?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}
