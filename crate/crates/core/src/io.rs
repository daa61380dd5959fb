//! Plain-text file formats.
//!
//! Labeled set: a header `#d=<d> k=<k> n=<n>` followed by `n` rows
//! `x_1,...,x_d,y`. Model: a header `#k=<k> d=<d>` followed by `k` rows of
//! `d` comma-separated coordinates. Floats are written in Rust's shortest
//! round-trip form, so write-then-read is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{LabeledPoint, LabeledSet, WeightMatrix};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses `#a=1 b=2` into the values for the requested keys, in order.
fn parse_header(path: &Path, line: &str, keys: &[&str]) -> Result<Vec<usize>> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| parse_err(path, 1, "missing '#' header line"))?;
    let mut found: Vec<Option<usize>> = vec![None; keys.len()];
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(path, 1, format!("malformed header field '{field}'")))?;
        let slot = keys
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| parse_err(path, 1, format!("unknown header key '{key}'")))?;
        let v = value
            .parse()
            .map_err(|_| parse_err(path, 1, format!("header value '{value}' is not an integer")))?;
        found[slot] = Some(v);
    }
    keys.iter()
        .zip(found)
        .map(|(k, v)| v.ok_or_else(|| parse_err(path, 1, format!("header is missing '{k}'"))))
        .collect()
}

fn parse_floats(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(path, line_no, format!("'{tok}' is not a number")))
        })
        .collect()
}

pub fn format_labeled_set(set: &LabeledSet) -> String {
    let mut out = format!("#d={} k={} n={}\n", set.d(), set.k(), set.len());
    for p in set.iter() {
        for v in &p.x {
            write!(out, "{v},").unwrap();
        }
        writeln!(out, "{}", p.y).unwrap();
    }
    out
}

pub fn parse_labeled_set(path: &Path, text: &str) -> Result<LabeledSet> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let dims = parse_header(path, header.trim(), &["d", "k", "n"])?;
    let (d, k, n) = (dims[0], dims[1], dims[2]);
    let mut points = Vec::with_capacity(n);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let (coords, label) = line
            .rsplit_once(',')
            .map_or(("", line), |(a, b)| (a, b));
        let x = if coords.is_empty() {
            Vec::new()
        } else {
            parse_floats(path, line_no, coords)?
        };
        if x.len() != d {
            return Err(parse_err(
                path,
                line_no,
                format!("row has {} coordinates, header says d={d}", x.len()),
            ));
        }
        let y: usize = label
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line_no, format!("label '{label}' is not an integer")))?;
        if y == 0 || y > k {
            return Err(parse_err(path, line_no, format!("label {y} outside 1..={k}")));
        }
        points.push(LabeledPoint::new(x, y));
    }
    if points.len() != n {
        return Err(parse_err(
            path,
            1,
            format!("header says n={n} but file has {} rows", points.len()),
        ));
    }
    LabeledSet::new(d, k, points)
}

pub fn write_labeled_set(path: impl AsRef<Path>, set: &LabeledSet) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_labeled_set(set)).map_err(|e| Error::io(path, e))
}

pub fn read_labeled_set(path: impl AsRef<Path>) -> Result<LabeledSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_set(path, &text)
}

pub fn format_model(w: &WeightMatrix) -> String {
    let mut out = format!("#k={} d={}\n", w.k(), w.d());
    for row in w.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    out
}

pub fn parse_model(path: &Path, text: &str) -> Result<WeightMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let dims = parse_header(path, header.trim(), &["k", "d"])?;
    let (k, d) = (dims[0], dims[1]);
    let mut rows = Vec::with_capacity(k);
    for (idx, line) in lines {
        let row = parse_floats(path, idx + 1, line)?;
        if row.len() != d {
            return Err(parse_err(path, idx + 1, format!("row has {} entries, expected {d}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != k {
        return Err(parse_err(path, 1, format!("header says k={k} but file has {} rows", rows.len())));
    }
    WeightMatrix::from_flat(k, d, rows.into_iter().flatten().collect())
}

pub fn write_model(path: impl AsRef<Path>, w: &WeightMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_model(w)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<WeightMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(path, &text)
}

pub(crate) fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `<path><suffix>`, e.g. `model.txt` + `.report`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
