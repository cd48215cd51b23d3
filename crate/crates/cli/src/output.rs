use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const SUMMARY: &str = "summary.json";
pub const RESOLVED: &str = "config.resolved";

/// Directory receiving the artifacts of one command.
pub struct RunDir {
    path: PathBuf,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

impl RunDir {
    /// Create `<output_dir>/<stem>-<command>`, dropping artifacts of an
    /// earlier run there.
    pub fn prepare(output_dir: &Path, stem: &str, command: &str) -> CliResult<Self> {
        let path = output_dir.join(format!("{stem}-{command}"));
        fs::create_dir_all(&path).map_err(|e| io_err(&path, e))?;
        let entries = fs::read_dir(&path).map_err(|e| io_err(&path, e))?;
        for entry in entries {
            let p = entry.map_err(|e| io_err(&path, e))?.path();
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if p.is_file() && (name.ends_with(".csv") || name == SUMMARY || name == RESOLVED) {
                fs::remove_file(&p).map_err(|e| io_err(&p, e))?;
            }
        }
        Ok(Self { path })
    }

    #[cfg(test)]
    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Write-then-rename.
    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let target = self.path.join(name);
        let tmp = self.path.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| io_err(&target, e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<String> {
        let text = to_json(value);
        self.write(name, format!("{text}\n").as_bytes())?;
        Ok(text)
    }

    pub fn write_table(&self, name: &str, table: &Table) -> CliResult<()> {
        self.write(name, &table.to_bytes())
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("summary serializes")
}

/// Numeric CSV with 17 significant digits.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Read columns `r` and `u` from a CSV with a header row.
pub fn read_profile(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let bad = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("no `{name}` column")))
    };
    let (ir, iu) = (col("r")?, col("u")?);
    let (mut r, mut u) = (Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| {
            rec.get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("bad number in row {}", row + 1)))
        };
        r.push(num(ir)?);
        u.push(num(iu)?);
    }
    Ok((r, u))
}
