//! Output files. Every CSV starts with `#` metadata lines (library version,
//! scenario, config hash, seed); JSON reports carry the same fields under
//! `meta`. Nothing time-dependent is written, so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::HarnessError;

/// Largest problem, in stored floating-point entries, a run may allocate.
pub const ENTRY_LIMIT: f64 = 1e9;

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub command: &'static str,
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Meta {
    fn header(&self) -> String {
        format!(
            "# slepbeam {}\n# command {}\n# scenario {}\n# config_sha256 {}\n# seed {}\n",
            self.version, self.command, self.scenario, self.config_sha256, self.seed
        )
    }
}

/// Rows of preformatted cells under a fixed set of columns.
pub struct Table {
    columns: Vec<&'static str>,
    body: String,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        let mut body = columns.join(",");
        body.push('\n');
        Self { columns: columns.to_vec(), body }
    }

    pub fn push(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    /// CSV text including the column line, without metadata.
    pub fn body(&self) -> &str {
        &self.body
    }
}

/// `{:e}` keeps the shortest round-trip digits in a fixed layout.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_csv(dir: &Path, name: &str, meta: &Meta, table: &Table) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = meta.header();
    text.push_str(table.body());
    std::fs::write(&path, text)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, meta: &Meta, report: &T) -> Result<PathBuf, HarnessError> {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        meta: &'a Meta,
        report: &'a T,
    }
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(&Wrapped { meta, report }).expect("report serializes");
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Aborts runs whose storage estimate exceeds [`ENTRY_LIMIT`].
pub fn guard(entries: f64, what: &str) -> Result<(), HarnessError> {
    if entries > ENTRY_LIMIT {
        let mut msg = String::new();
        let _ = write!(msg, "{what} needs about {entries:.2e} floating-point entries (limit {ENTRY_LIMIT:.0e}); ");
        msg.push_str("reduce the array size, sweep length or snapshot count");
        return Err(HarnessError::config(msg));
    }
    Ok(())
}

/// Strips `#` lines, leaving the data a rerun must reproduce exactly.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).fold(String::new(), |mut s, l| {
        s.push_str(l);
        s.push('\n');
        s
    })
}
