//! The `EMB1` embedding interchange format.
//!
//! Text: a header line `EMB1 <rows> <cols>` followed by one row per line
//! of space-separated decimals with 9 significant digits. Binary: the magic
//! `EMB1B`, rows and cols as little-endian `u64`, then row-major
//! little-endian `f64` values. Readers detect the variant from the magic.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, Result};
use crate::fsio;

pub const TEXT_MAGIC: &str = "EMB1";
pub const BINARY_MAGIC: &[u8; 5] = b"EMB1B";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Text,
    Binary,
}

pub fn encode_text(m: &DMatrix<f64>) -> String {
    let mut out = format!("{TEXT_MAGIC} {} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            // `{:.8e}` prints one leading digit and eight decimals
            let _ = write!(out, "{v:.8e}");
        }
        out.push('\n');
    }
    out
}

pub fn encode_binary(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(BINARY_MAGIC.len() + 16 + 8 * m.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for row in m.row_iter() {
        for v in row.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn encode(m: &DMatrix<f64>, encoding: Encoding) -> Vec<u8> {
    match encoding {
        Encoding::Text => encode_text(m).into_bytes(),
        Encoding::Binary => encode_binary(m),
    }
}

fn parse_dim(tok: Option<&str>, what: &str, path: &Path) -> Result<usize> {
    let tok = tok.ok_or_else(|| CliError::parse(path, 1, format!("header is missing {what}")))?;
    tok.parse().map_err(|_| {
        CliError::parse(
            path,
            1,
            format!("{what} `{tok}` is not an unsigned integer"),
        )
    })
}

/// Parses the text variant; `path` only labels errors.
pub fn decode_text(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::parse(path, 1, "empty file"))?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(TEXT_MAGIC) {
        return Err(CliError::parse(
            path,
            1,
            format!("expected `{TEXT_MAGIC} <rows> <cols>` header"),
        ));
    }
    let rows = parse_dim(tokens.next(), "rows", path)?;
    let cols = parse_dim(tokens.next(), "cols", path)?;
    if tokens.next().is_some() {
        return Err(CliError::parse(path, 1, "trailing tokens after header"));
    }
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        if seen == rows {
            return Err(CliError::parse(
                path,
                lineno,
                format!("more than {rows} data rows"),
            ));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| CliError::parse(path, lineno, format!("`{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(CliError::parse(
                    path,
                    lineno,
                    format!("non-finite value `{tok}`"),
                ));
            }
            values.push(v);
        }
        let got = values.len() - before;
        if got != cols {
            return Err(CliError::parse(
                path,
                lineno,
                format!("expected {cols} values, found {got}"),
            ));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(CliError::parse(
            path,
            text.lines().count() + 1,
            format!("expected {rows} data rows, found {seen}"),
        ));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn decode_binary(bytes: &[u8], path: &Path) -> Result<DMatrix<f64>> {
    let bad = |msg: String| CliError::Format {
        path: path.to_path_buf(),
        message: msg,
    };
    if bytes.len() < BINARY_MAGIC.len() + 16 || &bytes[..5] != BINARY_MAGIC {
        return Err(bad("not an EMB1B file".into()));
    }
    let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (u64_at(5) as usize, u64_at(13) as usize);
    let body = &bytes[21..];
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(8));
    if expected != Some(body.len()) {
        return Err(bad(format!(
            "{rows}x{cols} header needs {} payload bytes, found {}",
            rows.saturating_mul(cols).saturating_mul(8),
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(bad(format!(
            "non-finite value at row {}, col {}",
            i / cols.max(1),
            i % cols.max(1)
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<DMatrix<f64>> {
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(bytes, path)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| CliError::parse(path, 1, format!("not UTF-8 text: {e}")))?;
        decode_text(text, path)
    }
}

pub fn read(path: &Path) -> Result<DMatrix<f64>> {
    decode(&fsio::read(path)?, path)
}

/// Writes atomically and returns the bytes written.
pub fn write(path: &Path, m: &DMatrix<f64>, encoding: Encoding) -> Result<Vec<u8>> {
    let bytes = encode(m, encoding);
    fsio::write_atomic(path, &bytes)?;
    Ok(bytes)
}

/// One 0-based video index per line, one line per text query; `#` starts a
/// comment and blank lines are skipped.
pub fn read_mapping(path: &Path, videos: usize) -> Result<Vec<usize>> {
    let text = fsio::read_string(path)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: usize = line.parse().map_err(|_| {
            CliError::parse(path, idx + 1, format!("`{line}` is not a video index"))
        })?;
        if v >= videos {
            return Err(CliError::parse(
                path,
                idx + 1,
                format!(
                    "video index {v} is out of range for {videos} videos (query {})",
                    out.len()
                ),
            ));
        }
        out.push(v);
    }
    Ok(out)
}
