//! File formats and stable number formatting.
//!
//! Every float written by this crate goes through [`format_float`], which
//! prints 17 significant digits in the style of C's `%.17g`, so values
//! survive a write/read cycle bit for bit and repeated writes are
//! byte-identical.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::functionals::HuberParams;
use crate::verification::{ForecastDataset, GridPoint, MurphyCurve, Side};

/// `%.17g` formatting. Non-finite values print as `nan`, `inf`, `-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_json_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serialises")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_json_value(out, item, indent + 2);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&serde_json::to_string(k).expect("key serialises"));
                out.push_str(": ");
                write_json_value(out, item, indent + 2);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Pretty JSON with `%.17g` floats and a trailing newline. Non-finite
/// floats become `null`.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_json_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = File::create(p)?;
            f.write_all(text.as_bytes())?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn parse_float(field: &str, what: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{what}: cannot parse '{field}' as a number")))
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input)
}

/// Reads a dataset CSV: a header row, a column `y` of observations and one
/// column per forecast source.
pub fn read_dataset<R: Read>(input: R) -> Result<ForecastDataset> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers()?.clone();
    let y_col =
        headers.iter().position(|h| h == "y").ok_or_else(|| Error::Parse("dataset header has no 'y' column".into()))?;
    let names: Vec<(usize, String)> =
        headers.iter().enumerate().filter(|(i, _)| *i != y_col).map(|(i, h)| (i, h.to_string())).collect();
    let mut y = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let what = format!("row {}", line + 2);
        y.push(parse_float(rec.get(y_col).unwrap_or(""), &what)?);
        for (k, (i, _)) in names.iter().enumerate() {
            cols[k].push(parse_float(rec.get(*i).unwrap_or(""), &what)?);
        }
    }
    ForecastDataset::new(y, names.into_iter().map(|(_, n)| n).zip(cols).collect())
}

pub fn read_dataset_file(path: &Path) -> Result<ForecastDataset> {
    read_dataset(File::open(path)?)
}

/// Reads numeric rows of one or two columns. A first line that does not
/// parse as numbers is treated as a header.
fn read_numeric_rows<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match fields.iter().map(|f| f.parse::<f64>()).collect::<std::result::Result<Vec<f64>, _>>() {
            Ok(v) => rows.push(v),
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(_) => return Err(Error::Parse(format!("line {}: cannot parse '{line}'", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("no numeric rows".into()));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Parse("rows have differing numbers of columns".into()));
    }
    Ok(rows)
}

/// Reads a distribution from a sample file (one column of values) or a
/// piecewise-linear CDF (two columns `t, F`).
pub fn read_distribution<R: Read>(input: R) -> Result<Distribution> {
    let rows = read_numeric_rows(input)?;
    match rows[0].len() {
        1 => Distribution::empirical(&rows.iter().map(|r| r[0]).collect::<Vec<_>>()),
        2 => Distribution::piecewise_linear(&rows.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>()),
        n => Err(Error::Parse(format!("expected one or two columns, found {n}"))),
    }
}

pub fn read_distribution_file(path: &Path) -> Result<Distribution> {
    read_distribution(File::open(path)?)
}

/// Murphy curve as CSV: `theta,side,<source>...`, one row per grid point.
pub fn murphy_to_csv(curve: &MurphyCurve) -> String {
    let mut out = String::from("theta,side");
    for s in curve.sources() {
        out.push(',');
        out.push_str(s);
    }
    out.push('\n');
    let columns: Vec<&[f64]> = curve.sources().iter().map(|s| curve.values(s).expect("own source")).collect();
    for (k, g) in curve.grid().iter().enumerate() {
        out.push_str(&format_float(g.theta));
        out.push(',');
        out.push_str(g.side.as_str());
        for col in &columns {
            out.push(',');
            out.push_str(&format_float(col[k]));
        }
        out.push('\n');
    }
    out
}

/// Parses the output of [`murphy_to_csv`].
pub fn read_murphy_csv<R: Read>(input: R, params: HuberParams) -> Result<MurphyCurve> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("theta") || headers.get(1) != Some("side") {
        return Err(Error::Parse("Murphy CSV must start with columns theta,side".into()));
    }
    let sources: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut grid = Vec::new();
    let mut values = vec![Vec::new(); sources.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let what = format!("row {}", line + 2);
        let theta = parse_float(rec.get(0).unwrap_or(""), &what)?;
        let side = Side::parse(rec.get(1).unwrap_or(""))?;
        grid.push(GridPoint { theta, side });
        for (k, col) in values.iter_mut().enumerate() {
            col.push(parse_float(rec.get(k + 2).unwrap_or(""), &what)?);
        }
    }
    MurphyCurve::from_parts(params, grid, sources, values)
}
