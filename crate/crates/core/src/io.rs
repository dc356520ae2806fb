//! Plain-text formats: numeric CSV with 17 significant digits and
//! `key=value` sidecar files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Round-trip exact decimal form of an `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "nan" | "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => t
            .parse()
            .map_err(|_| Error::Parse(format!("not a number: {t:?}"))),
    }
}

/// Renders a numeric table; `header` may be empty for headerless files.
pub fn render_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    if !header.is_empty() {
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parses a numeric table. Returns the header (if `has_header`) and rows;
/// every row must have the same width.
pub fn parse_csv(text: &str, has_header: bool) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header = if has_header {
        match lines.next() {
            Some((_, l)) => l.split(',').map(|s| s.trim().to_string()).collect(),
            None => return Err(Error::Parse("missing CSV header".into())),
        }
    } else {
        Vec::new()
    };
    let mut rows = Vec::new();
    let mut width = if has_header { Some(header.len()) } else { None };
    for (i, line) in lines {
        let row = line
            .split(',')
            .map(parse_f64)
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        match width {
            Some(w) if w != row.len() => {
                return Err(Error::Parse(format!(
                    "line {}: expected {w} columns, found {}",
                    i + 1,
                    row.len()
                )))
            }
            None => width = Some(row.len()),
            _ => {}
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn render_key_values(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    out
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Parse(format!("missing key {key:?}")))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// One point per row, no header.
pub fn write_points(path: &Path, points: &[Vec<f64>]) -> Result<()> {
    write_text(path, &render_csv(&[], points))
}

pub fn read_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(parse_csv(&read_text(path)?, false)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let rows = vec![vec![1.0, f64::NAN], vec![-3.5e-300, 7.0]];
        let text = render_csv(&["a", "b"], &rows);
        let (h, back) = parse_csv(&text, true).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(back[1], rows[1]);
        assert!(back[0][1].is_nan());
        assert!(parse_csv("1,2\n3\n", false).is_err());
        assert!(parse_csv("1,x\n", false).is_err());
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("# c\na = 1\n\nb=x=y\n").unwrap();
        assert_eq!(lookup(&kv, "a").unwrap(), "1");
        assert_eq!(lookup(&kv, "b").unwrap(), "x=y");
        assert!(lookup(&kv, "c").is_err());
        assert!(parse_key_values("novalue\n").is_err());
    }

    proptest! {
        #[test]
        fn formatted_floats_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(parse_f64(&fmt_f64(v)).unwrap().to_bits(), v.to_bits());
        }
    }
}
