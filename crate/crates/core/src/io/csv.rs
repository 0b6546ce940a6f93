//! Plain-text curve, report and sample files.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{DynamicRangeReport, SnrCurve};
use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "abscissa,snr_db";
pub const REPORT_HEADER: &str = "floor,ceiling,range_db,threshold_db";

/// 17 significant digits, enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn encode_curve_csv(curve: &SnrCurve) -> String {
    let mut out = String::with_capacity(48 * curve.len());
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for (x, y) in curve.iter() {
        let _ = writeln!(out, "{},{}", num(x), num(y));
    }
    out
}

fn parse_num(tok: &str, line: usize, offset: usize) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| Error::format(offset as u64, format!("line {line}: `{}` is not a number", tok.trim())))
}

/// Lines with their 1-based numbers and byte offsets, skipping blanks.
fn lines(text: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').enumerate().filter_map(move |(i, raw)| {
        let at = offset;
        offset += raw.len();
        let l = raw.trim_end_matches(['\n', '\r']);
        (!l.trim().is_empty()).then_some((i + 1, at, l))
    })
}

pub fn decode_curve_csv(text: &str) -> Result<SnrCurve> {
    let mut it = lines(text);
    match it.next() {
        Some((_, _, h)) if h.trim() == CURVE_HEADER => {}
        Some((_, at, h)) => {
            return Err(Error::format(
                at as u64,
                format!("expected header `{CURVE_HEADER}`, found `{h}`"),
            ));
        }
        None => return Err(Error::format(0, "empty curve file")),
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, at, l) in it {
        let (a, b) = l
            .split_once(',')
            .ok_or_else(|| Error::format(at as u64, format!("line {line}: expected two columns")))?;
        if b.contains(',') {
            return Err(Error::format(at as u64, format!("line {line}: expected two columns")));
        }
        xs.push(parse_num(a, line, at)?);
        ys.push(parse_num(b, line, at)?);
    }
    SnrCurve::new(xs, ys, serde_json::Value::Null).map_err(|e| Error::format(0, e.to_string()))
}

pub fn encode_report_csv(report: &DynamicRangeReport) -> String {
    format!(
        "{REPORT_HEADER}\n{},{},{},{}\n",
        num(report.floor),
        num(report.ceiling),
        num(report.range_db),
        num(report.threshold_db)
    )
}

pub fn decode_report_csv(text: &str) -> Result<DynamicRangeReport> {
    let mut it = lines(text);
    match it.next() {
        Some((_, _, h)) if h.trim() == REPORT_HEADER => {}
        _ => return Err(Error::format(0, format!("expected header `{REPORT_HEADER}`"))),
    }
    let (line, at, l) = it
        .next()
        .ok_or_else(|| Error::format(text.len() as u64, "missing report row"))?;
    let v = l
        .split(',')
        .map(|t| parse_num(t, line, at))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != 4 {
        return Err(Error::format(at as u64, "report row needs 4 fields"));
    }
    Ok(DynamicRangeReport {
        floor: v[0],
        ceiling: v[1],
        range_db: v[2],
        threshold_db: v[3],
    })
}

/// One value per line, first column only. A non-numeric first line is
/// taken as a header.
pub fn decode_samples(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, (line, at, l)) in lines(text).enumerate() {
        let first = l.split(',').next().unwrap_or("");
        match first.trim().parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => {}
            Err(_) => {
                return Err(Error::format(
                    at as u64,
                    format!("line {line}: `{}` is not a number", first.trim()),
                ))
            }
        }
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_curve_csv(path: impl AsRef<Path>, curve: &SnrCurve) -> Result<()> {
    write_text(path.as_ref(), &encode_curve_csv(curve))
}

pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<SnrCurve> {
    decode_curve_csv(&read_text(path.as_ref())?)
}

pub fn write_report_csv(path: impl AsRef<Path>, report: &DynamicRangeReport) -> Result<()> {
    write_text(path.as_ref(), &encode_report_csv(report))
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<DynamicRangeReport> {
    decode_report_csv(&read_text(path.as_ref())?)
}

pub fn write_report_json(path: impl AsRef<Path>, report: &DynamicRangeReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Numerical(e.to_string()))?;
    write_text(path.as_ref(), &(text + "\n"))
}

pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    decode_samples(&read_text(path.as_ref())?)
}

pub fn write_samples(path: impl AsRef<Path>, samples: &[f64]) -> Result<()> {
    let mut out = String::from("sample\n");
    for &s in samples {
        out.push_str(&num(s));
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}
