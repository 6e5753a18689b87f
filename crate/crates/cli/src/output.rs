//! Deterministic artifact writers: matrix CSV, scan CSV, 16-bit PGM
//! quick-looks, and TOML reports. Identical inputs produce byte-identical
//! files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use spdc_core::ScanResult;

/// Fixed float format used in all CSV artifacts.
fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}

pub struct MatrixMeta<'a> {
    pub name: &'a str,
    pub row_axis: &'a str,
    pub col_axis: &'a str,
    pub value_desc: &'a str,
    pub config_sha256: &'a str,
    pub seed: u64,
    /// Row indices flagged as missing (masked) in the matrix.
    pub masked_rows: Option<&'a [usize]>,
}

/// Matrix CSV: two comment header lines (definitions/units/hash, axis
/// summary), then the column axis as the first row and the row axis as the
/// first column.
pub fn write_matrix_csv(
    path: &Path,
    meta: &MatrixMeta,
    axis_rows: &[f64],
    axis_cols: &[f64],
    values: impl Fn(usize, usize) -> f64,
) -> std::io::Result<()> {
    let mut text = String::new();
    let masked = match meta.masked_rows {
        Some(rows) if !rows.is_empty() => format!(
            "; masked_rows={}",
            rows.iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        ),
        _ => String::new(),
    };
    writeln!(
        text,
        "# {}; rows={}; cols={}; values={}; config_sha256={}; seed={}{}",
        meta.name, meta.row_axis, meta.col_axis, meta.value_desc, meta.config_sha256, meta.seed, masked
    )
    .unwrap();
    writeln!(
        text,
        "# axis_rows: {}..{} n={}; axis_cols: {}..{} n={}",
        fmt(axis_rows[0]),
        fmt(axis_rows[axis_rows.len() - 1]),
        axis_rows.len(),
        fmt(axis_cols[0]),
        fmt(axis_cols[axis_cols.len() - 1]),
        axis_cols.len()
    )
    .unwrap();
    // first row: blank corner then the column axis
    text.push_str("");
    for c in axis_cols {
        text.push(',');
        text.push_str(&fmt(*c));
    }
    text.push('\n');
    for (r, row_val) in axis_rows.iter().enumerate() {
        text.push_str(&fmt(*row_val));
        for c in 0..axis_cols.len() {
            text.push(',');
            text.push_str(&fmt(values(r, c)));
        }
        text.push('\n');
    }
    fs::write(path, text)
}

/// Scan CSV with a seed header line and fixed columns.
pub fn write_scan_csv(
    path: &Path,
    scan: &ScanResult,
    config_sha256: &str,
    seed: u64,
) -> std::io::Result<()> {
    let mut text = String::new();
    writeln!(text, "# seed={seed}; config_sha256={config_sha256}").unwrap();
    writeln!(text, "position,raw,accidental,corrected,expected").unwrap();
    let corrected = scan.corrected_counts.as_ref();
    for j in 0..scan.len() {
        let corr = corrected
            .map(|c| fmt(c[j]))
            .unwrap_or_else(|| fmt(scan.raw_counts[j] as f64 - scan.accidental_counts[j] as f64));
        writeln!(
            text,
            "{},{},{},{},{}",
            fmt(scan.positions[j]),
            scan.raw_counts[j],
            scan.accidental_counts[j],
            corr,
            fmt(scan.expected[j]),
        )
        .unwrap();
    }
    fs::write(path, text)
}

/// Binary 16-bit PGM (P5, big-endian) with a linear map of the matrix onto
/// [0, 65535]; the original maximum is recorded in a comment.
pub fn write_pgm(
    path: &Path,
    matrix: &Array2<f64>,
    config_sha256: &str,
    seed: u64,
) -> std::io::Result<()> {
    let (rows, cols) = (matrix.nrows(), matrix.ncols());
    let max = matrix.iter().cloned().fold(0.0f64, f64::max);
    let mut out = Vec::with_capacity(rows * cols * 2 + 256);
    out.extend_from_slice(format!("P5\n# config_sha256={config_sha256} seed={seed}\n").as_bytes());
    out.extend_from_slice(format!("# max={}\n{cols} {rows}\n65535\n", fmt(max)).as_bytes());
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    for r in 0..rows {
        for c in 0..cols {
            let v = (matrix[[r, c]].max(0.0) * scale).round().min(65535.0) as u16;
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)
}

/// Parses a scan CSV produced by [`write_scan_csv`] back into positions and
/// count columns: (positions, raw, accidental, corrected).
pub fn read_scan_csv(text: &str) -> Result<(Vec<f64>, Vec<u64>, Vec<u64>, Vec<f64>), String> {
    let mut positions = Vec::new();
    let mut raw = Vec::new();
    let mut accidental = Vec::new();
    let mut corrected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("position") || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format!(
                "line {}: expected 5 comma-separated fields, got {}",
                lineno + 1,
                fields.len()
            ));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64, String> {
            s.parse::<f64>()
                .map_err(|e| format!("line {}: bad {what} '{s}': {e}", lineno + 1))
        };
        positions.push(parse_f(fields[0], "position")?);
        raw.push(parse_f(fields[1], "raw count")? as u64);
        accidental.push(parse_f(fields[2], "accidental count")? as u64);
        corrected.push(parse_f(fields[3], "corrected count")?);
    }
    if positions.is_empty() {
        return Err("scan file contains no data rows".to_string());
    }
    Ok((positions, raw, accidental, corrected))
}
