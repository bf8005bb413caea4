//! One CSV row per configuration and seed, with a fixed header.
//!
//! Floats are written with six significant digits, so reading a file back
//! yields the rows rounded to that precision, and rewriting them reproduces
//! the file byte for byte.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};

pub const HEADER: &str = "system,n,param,direction,estimator,seed,estimate,truth,wall_time_s";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// System label, with any stacking or transform suffix.
    pub system: String,
    pub n: usize,
    /// The swept value: λ, d, or the lag k.
    pub param: f64,
    pub direction: String,
    pub estimator: String,
    pub seed: u64,
    pub estimate: f64,
    pub truth: Option<f64>,
    pub wall_time_s: f64,
}

/// `v` at six significant digits.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    format!("{v:.5e}")
}

pub fn round6(v: f64) -> f64 {
    format_float(v).parse().expect("formatted float parses")
}

fn check_field(s: &str) -> Result<()> {
    if s.contains([',', '\n', '\r', '"']) {
        return Err(Error::InvalidParameter(format!("CSV text field may not contain separators: '{s}'")));
    }
    Ok(())
}

impl ResultRow {
    /// The row as it reads back from a CSV file.
    pub fn rounded(&self) -> Self {
        Self {
            param: round6(self.param),
            estimate: round6(self.estimate),
            truth: self.truth.map(round6),
            wall_time_s: round6(self.wall_time_s),
            ..self.clone()
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        for f in [&self.system, &self.direction, &self.estimator] {
            check_field(f)?;
        }
        Ok(format!(
            "{},{},{},{},{},{},{},{},{}",
            self.system,
            self.n,
            format_float(self.param),
            self.direction,
            self.estimator,
            self.seed,
            format_float(self.estimate),
            self.truth.map(format_float).unwrap_or_default(),
            format_float(self.wall_time_s),
        ))
    }

    pub fn from_csv(line: &str, location: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::parse(location, format!("expected 9 fields, got {}", f.len())));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| Error::parse(location, format!("field {} is not a number: '{}'", i + 1, f[i])))
        };
        let int = |i: usize| -> Result<u64> {
            f[i].parse()
                .map_err(|_| Error::parse(location, format!("field {} is not an integer: '{}'", i + 1, f[i])))
        };
        Ok(Self {
            system: f[0].to_owned(),
            n: int(1)? as usize,
            param: num(2)?,
            direction: f[3].to_owned(),
            estimator: f[4].to_owned(),
            seed: int(5)?,
            estimate: num(6)?,
            truth: if f[7].is_empty() { None } else { Some(num(7)?) },
            wall_time_s: num(8)?,
        })
    }
}

pub fn write_rows<W: Write>(mut w: W, rows: &[ResultRow], with_header: bool) -> Result<()> {
    let mut text = String::new();
    if with_header {
        text.push_str(HEADER);
        text.push('\n');
    }
    for r in rows {
        text.push_str(&r.to_csv()?);
        text.push('\n');
    }
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io("<csv stream>", e))
}

pub fn read_rows<R: BufRead>(r: R, origin: &str) -> Result<Vec<ResultRow>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(origin, "empty file"))?
        .map_err(|e| Error::io(origin, e))?;
    if header.trim_end() != HEADER {
        return Err(Error::parse(format!("{origin}:1"), format!("unexpected header '{header}'")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(ResultRow::from_csv(line.trim_end(), &format!("{origin}:{}", i + 2))?);
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows(BufReader::new(file), &path.display().to_string())
}

/// Appends rows to a CSV file, writing the header only when the file is new
/// or empty and refusing files with a different header.
pub fn append_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let fresh = match std::fs::metadata(path) {
        Ok(m) => m.len() == 0,
        Err(_) => true,
    };
    if !fresh {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut first = String::new();
        BufReader::new(file)
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        if first.trim_end() != HEADER {
            return Err(Error::parse(
                format!("{}:1", path.display()),
                "existing file has a different header",
            ));
        }
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    write_rows(file, rows, fresh).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Serializes appends from concurrent workers onto one file.
#[derive(Debug)]
pub struct CsvSink {
    path: PathBuf,
    lock: Mutex<()>,
}

impl CsvSink {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, rows: &[ResultRow]) -> Result<()> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        append_csv(&self.path, rows)
    }
}
