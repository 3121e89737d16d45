//! CSV output with `#` metadata headers, and pole-data files.

use std::fs;
use std::path::Path;

use riemann_stein::targets::{format_pole_data_xyz, parse_pole_data, PoleFormat};

use crate::config::RunConfig;
use crate::error::CliError;

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `# key: value` lines written above the CSV header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    /// Version, command, seed and the full configuration.
    pub fn for_run(cfg: &RunConfig) -> Self {
        let mut m = Metadata::default();
        m.push("generator", concat!("riemann-stein-cli ", env!("CARGO_PKG_VERSION")));
        m.push("command", cfg.experiment.name());
        m.push("seed", cfg.seed.to_string());
        for line in cfg.to_toml().lines().filter(|l| !l.trim().is_empty()) {
            m.push("config", line);
        }
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
    }
}

/// A CSV table with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("missing column `{name}`")))
    }

    /// Values of a column parsed as `f64`.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| r[c].parse::<f64>().map_err(|_| CliError::Data(format!("`{}` in column `{name}` is not a number", r[c]))))
            .collect()
    }
}

pub fn render_table(meta: &Metadata, table: &Table) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Data(e.to_string()))?)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(meta.render() + &body)
}

pub fn write_table(path: &Path, meta: &Metadata, table: &Table) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, render_table(meta, table)?).map_err(CliError::io(path))
}

/// Parsed CSV file: metadata lines (without `# `), header and rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadTable {
    pub meta: Vec<String>,
    pub table: Table,
}

pub fn parse_table(text: &str) -> Result<ReadTable, CliError> {
    let meta = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim_start().to_string())
        .collect();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()?;
    Ok(ReadTable { meta, table: Table { header, rows } })
}

/// Reads a table and checks it has exactly the expected columns.
pub fn read_table(path: &Path, expected: &[&str]) -> Result<ReadTable, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let t = parse_table(&text)?;
    if t.table.header != expected {
        return Err(CliError::Data(format!(
            "{}: columns {:?} do not match the schema {:?}",
            path.display(),
            t.table.header,
            expected
        )));
    }
    Ok(t)
}

/// Guesses the layout of a pole file from its first record.
pub fn detect_pole_format(text: &str) -> PoleFormat {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    match first {
        Some(l) if l.to_ascii_lowercase().starts_with("lat") || l.split(',').count() == 2 => PoleFormat::LatLon,
        _ => PoleFormat::Xyz,
    }
}

pub fn parse_poles(text: &str) -> Result<Vec<[f64; 3]>, CliError> {
    let data = parse_pole_data(text, detect_pole_format(text)).map_err(|e| CliError::Data(e.to_string()))?;
    if data.is_empty() {
        return Err(CliError::Data("pole file contains no observations".into()));
    }
    Ok(data)
}

/// Loads pole observations (`y1,y2,y3` unit vectors or `lat_deg,lon_deg`).
pub fn load_poles(path: &Path) -> Result<Vec<[f64; 3]>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_poles(&text).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_poles(path: &Path, data: &[[f64; 3]]) -> Result<(), CliError> {
    fs::write(path, format_pole_data_xyz(data)).map_err(CliError::io(path))
}
