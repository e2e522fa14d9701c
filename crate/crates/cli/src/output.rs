//! CSV artifacts: number formatting and all-or-nothing writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

/// Significant digits of every serialized number.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `%.12g`-style formatting: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One CSV artifact held in memory until every artifact of a command is
/// ready.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvFile {
    pub name: String,
    header: Vec<String>,
    body: String,
}

impl CsvFile {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), body: String::new() }
    }

    pub fn columns(&self) -> usize {
        self.header.len()
    }

    /// Appends a row of already formatted cells.
    pub fn push_row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let row: Vec<String> = cells.into_iter().map(|c| c.as_ref().to_string()).collect();
        assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.body.push_str(&row.join(","));
        self.body.push('\n');
    }

    pub fn contents(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&self.body);
        s
    }
}

/// Writes every file into `dir` through temporaries and renames them only
/// after all of them were written successfully.
pub fn write_all(dir: &Path, files: &[CsvFile]) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    for f in files {
        let mut tmp = NamedTempFile::new_in(dir)?;
        tmp.write_all(f.contents().as_bytes())?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, dir.join(&f.name)));
    }
    staged
        .into_iter()
        .map(|(tmp, path)| tmp.persist(&path).map(|_| path).map_err(|e| e.error))
        .collect()
}
