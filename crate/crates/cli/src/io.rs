//! Plain-text file formats.
//!
//! Points: header `x,y,f`, then one `x,y,f` record per line. Weights: header
//! `lambda`, one value per line. Reals are written with 17 significant digits
//! so every `f64` survives a round trip.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gaussrbf::{Point, PointSet};

pub const POINTS_HEADER: &str = "x,y,f";
pub const WEIGHTS_HEADER: &str = "lambda";

pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse_real(field: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .with_context(|| format!("{}:{line}: bad number {field:?}", path.display()))?;
    if !v.is_finite() {
        bail!("{}:{line}: non-finite value {field:?}", path.display());
    }
    Ok(v)
}

/// Data lines after the header, numbered from 1 as in an editor.
fn records<'a>(text: &'a str, path: &Path, headers: &[&str]) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let header = lines.next().map(|(_, l)| l).unwrap_or("");
    if !headers.contains(&header) {
        bail!(
            "{}: expected header {}, found {header:?}",
            path.display(),
            headers.join(" or ")
        );
    }
    Ok(lines.filter(|(_, l)| !l.is_empty()))
}

pub fn write_points(points: &PointSet) -> String {
    let mut out = String::with_capacity(64 * points.len());
    out.push_str(POINTS_HEADER);
    out.push('\n');
    let values = points.values();
    for (i, p) in points.coords().iter().enumerate() {
        let f = values.map_or(0.0, |v| v[i]);
        let _ = writeln!(out, "{},{},{}", real(p.x), real(p.y), real(f));
    }
    out
}

/// Reads a point file. With `need_values = false` a plain `x,y` file is
/// accepted as well (query sites).
pub fn read_points(path: &Path, need_values: bool) -> Result<(Vec<Point>, Option<Vec<f64>>)> {
    let text = read(path)?;
    let headers: &[&str] = if need_values {
        &[POINTS_HEADER]
    } else {
        &[POINTS_HEADER, "x,y"]
    };
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in records(&text, path, headers)? {
        let fields: Vec<&str> = rec.split(',').collect();
        let with_f = match fields.len() {
            3 => true,
            2 if !need_values => false,
            k => bail!(
                "{}:{line}: expected {} fields, found {k}",
                path.display(),
                if need_values { 3 } else { 2 }
            ),
        };
        coords.push(Point::new(
            parse_real(fields[0], path, line)?,
            parse_real(fields[1], path, line)?,
        ));
        if with_f {
            values.push(parse_real(fields[2], path, line)?);
        }
    }
    if coords.is_empty() {
        bail!("{}: no points", path.display());
    }
    let values = (values.len() == coords.len()).then_some(values);
    Ok((coords, values))
}

pub fn read_point_set(path: &Path) -> Result<PointSet> {
    let (coords, values) = read_points(path, true)?;
    PointSet::with_values(coords, values.expect("values are required"))
        .with_context(|| format!("invalid point set in {}", path.display()))
}

pub fn write_weights(weights: &[f64]) -> String {
    let mut out = String::with_capacity(24 * (weights.len() + 1));
    out.push_str(WEIGHTS_HEADER);
    out.push('\n');
    for w in weights {
        out.push_str(&real(*w));
        out.push('\n');
    }
    out
}

pub fn read_weights(path: &Path) -> Result<Vec<f64>> {
    let text = read(path)?;
    let weights = records(&text, path, &[WEIGHTS_HEADER])?
        .map(|(line, rec)| parse_real(rec, path, line))
        .collect::<Result<Vec<_>>>()?;
    Ok(weights)
}

/// `iter,residual`, starting with the initial residual at iteration 0.
pub fn write_history(history: &[f64]) -> String {
    let mut out = String::from("iter,residual\n");
    for (k, r) in history.iter().enumerate() {
        let _ = writeln!(out, "{k},{}", real(*r));
    }
    out
}

pub fn write_values(queries: &[Point], values: &[f64]) -> String {
    let mut out = String::from("x,y,s\n");
    for (q, s) in queries.iter().zip(values) {
        let _ = writeln!(out, "{},{},{}", real(q.x), real(q.y), real(*s));
    }
    out
}

/// Generator metadata lives next to the point file it describes.
pub fn sidecar(points: &Path) -> PathBuf {
    let mut name = points.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}
