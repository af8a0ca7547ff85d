//! CSV tables and the JSON run-metadata sidecar.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::Value;

/// Round-trippable float: 17 significant digits. Non-finite values become an
/// empty field.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

pub fn fmt_vector(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_float(*x)).collect::<Vec<_>>().join(";")
}

/// Result of one subcommand, not yet written anywhere.
#[derive(Debug, Clone)]
pub struct Output {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Human-readable lines.
    pub summary: Vec<String>,
    pub metadata: Value,
    /// Failed postconditions; when nonempty nothing is written.
    pub violations: Vec<String>,
}

impl Output {
    pub fn write_csv<W: Write>(&self, writer: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the CSV to `out` (plus `<out>.meta.json`) or to stdout.
    /// Returns the sidecar path when one was written.
    pub fn emit(&self, out: Option<&Path>) -> anyhow::Result<Option<PathBuf>> {
        let Some(path) = out else {
            self.write_csv(io::stdout().lock())?;
            return Ok(None);
        };
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        self.write_csv(file)?;
        let meta = sidecar_path(path);
        let text = serde_json::to_string_pretty(&self.metadata)?;
        std::fs::write(&meta, text + "\n").with_context(|| format!("cannot write {}", meta.display()))?;
        Ok(Some(meta))
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}
