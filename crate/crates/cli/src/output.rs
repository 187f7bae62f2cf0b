use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Output directory; every file is written to a temp file and renamed.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.dir.join(name);
        let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", target.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&target).map_err(|e| io(e.error))?;
        self.written.push(target);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&table.header).map_err(err)?;
        for row in &table.rows {
            w.write_record(row).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Provenance shared by every numeric row: `h, eps_a, eps_d, s_norm`.
#[derive(Clone, Copy, Debug)]
pub struct Provenance {
    pub h: f64,
    pub eps_a: f64,
    pub eps_d: f64,
}

pub const PROVENANCE: [&str; 4] = ["h", "eps_a", "eps_d", "s_norm"];

pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    prov: Provenance,
}

impl Table {
    /// Columns after the provenance block.
    pub fn new(prov: Provenance, columns: &[&str]) -> Self {
        let header = PROVENANCE.iter().chain(columns).map(|s| s.to_string()).collect();
        Self { header, rows: Vec::new(), prov }
    }

    pub fn push(&mut self, s_norm: f64, cells: Vec<String>) {
        let mut row = vec![num(self.prov.h), num(self.prov.eps_a), num(self.prov.eps_d), num(s_norm)];
        row.extend(cells);
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }
}
