//! Locale-independent CSV emission with a provenance comment line.

use std::path::{Path, PathBuf};

use crate::CliError;

/// Fixed-point decimal with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000000000".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (11 - mag).clamp(0, 340) as usize;
    let s = format!("{:.*}", decimals, x);
    // rounding may carry into a new leading digit
    let digits = s.bytes().filter(u8::is_ascii_digit).skip_while(|&b| b == b'0').count();
    if digits > 12 && decimals > 0 {
        format!("{:.*}", decimals - 1, x)
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    name: String,
    text: String,
}

impl Csv {
    pub fn new(name: &str, header: &str, provenance: &str) -> Self {
        Csv { name: name.to_string(), text: format!("{provenance}\n{header}\n") }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

pub fn provenance_line(config_hash: &str) -> String {
    format!("# steklov-cli {} config-sha256={config_hash}", env!("CARGO_PKG_VERSION"))
}

/// Writes every file into `dir`, creating it when needed.
pub fn write_all(dir: &Path, files: &[Csv]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let p = dir.join(&f.name);
        std::fs::write(&p, f.text.as_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_num(2.0), "2.00000000000");
        assert_eq!(fmt_num(-0.000123456789012345), "-0.000123456789012");
        assert_eq!(fmt_num(123456.789), "123456.789000");
        assert_eq!(fmt_num(0.0), "0.00000000000");
        assert_eq!(fmt_num(-0.0), "0.00000000000");
        assert_eq!(fmt_num(9.9999999999999), "10.0000000000");
        assert_eq!(fmt_num(1e-14), "0.0000000000000100000000000");
        assert!(!fmt_num(1e20).contains('e'));
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new("a.csv", "x,y", "# p");
        c.row(&["1".into(), "2".into()]);
        assert_eq!(c.text(), "# p\nx,y\n1,2\n");
    }
}
