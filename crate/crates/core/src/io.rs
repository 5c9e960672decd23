//! Point file formats: `.fvecs` and whitespace-separated text.
//!
//! fvecs records are a little-endian `i32` dimension followed by that many
//! little-endian `f32` values. Coordinates are widened to `f64` on read.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{input, Error, Result};
use crate::metric::PointSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointFormat {
    Fvecs,
    Text,
}

impl PointFormat {
    /// `.fvecs` selects the binary format; everything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("fvecs") => PointFormat::Fvecs,
            _ => PointFormat::Text,
        }
    }
}

/// Parses fvecs records into raw rows (no validation beyond framing).
pub fn parse_fvecs(mut reader: impl Read) -> Result<Vec<Vec<f64>>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut rows = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let Some(head) = bytes.get(at..at + 4) else {
            return input("truncated fvecs record header");
        };
        let dim = i32::from_le_bytes(head.try_into().unwrap());
        if dim <= 0 {
            return input(format!("fvecs record {} has dimension {dim}", rows.len()));
        }
        at += 4;
        let len = dim as usize * 4;
        let Some(body) = bytes.get(at..at + len) else {
            return input(format!("fvecs record {} is truncated", rows.len()));
        };
        rows.push(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
        );
        at += len;
    }
    Ok(rows)
}

/// Parses one point per non-empty line; `#` starts a comment line.
pub fn parse_text(reader: impl Read) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Input(format!("line {}: bad number '{tok}'", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = fs::File::open(path)?;
    match PointFormat::from_path(path) {
        PointFormat::Fvecs => parse_fvecs(file),
        PointFormat::Text => parse_text(file),
    }
}

/// Reads and validates a point set, picking the format from the extension.
pub fn read_points(path: &Path) -> Result<PointSet> {
    PointSet::from_rows(&read_rows(path)?)
}

pub fn encode_fvecs(points: &PointSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(points.len() * (4 + 4 * points.dim()));
    for (i, p) in points.iter().enumerate() {
        out.extend_from_slice(&(points.dim() as i32).to_le_bytes());
        for &x in p {
            let y = x as f32;
            if !y.is_finite() {
                return input(format!("point {i} does not fit in 32-bit floats; use a text file"));
            }
            out.extend_from_slice(&y.to_le_bytes());
        }
    }
    Ok(out)
}

/// Shortest round-trip decimal rendering, one point per line.
pub fn encode_text(points: &PointSet) -> String {
    let mut out = String::new();
    for p in points.iter() {
        let row: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_points(path: &Path, points: &PointSet) -> Result<()> {
    let bytes = match PointFormat::from_path(path) {
        PointFormat::Fvecs => encode_fvecs(points)?,
        PointFormat::Text => encode_text(points).into_bytes(),
    };
    fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fvecs_layout_is_little_endian() {
        let p = PointSet::new(2, vec![1.0, -2.5, 0.0, 3.0]).unwrap();
        let bytes = encode_fvecs(&p).unwrap();
        assert_eq!(bytes.len(), 2 * (4 + 8));
        assert_eq!(&bytes[0..4], &[2, 0, 0, 0]);
        assert_eq!(&bytes[4..8], &1.0f32.to_le_bytes());
        let rows = parse_fvecs(&bytes[..]).unwrap();
        assert_eq!(rows, vec![vec![1.0, -2.5], vec![0.0, 3.0]]);
    }

    #[test]
    fn fvecs_framing_errors() {
        assert!(parse_fvecs(&[1u8, 0, 0][..]).is_err());
        assert!(parse_fvecs(&[2u8, 0, 0, 0, 0, 0, 0, 0][..]).is_err());
        assert!(parse_fvecs(&0i32.to_le_bytes()[..]).is_err());
        let huge = PointSet::new(1, vec![0.0, 1e300]).unwrap();
        assert!(encode_fvecs(&huge).is_err());
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let p = PointSet::new(3, vec![0.1, 1e-300, -7.0, 2f64.powi(800), 3.5, 1.0 / 3.0]).unwrap();
        let text = encode_text(&p);
        let back = PointSet::from_rows(&parse_text(text.as_bytes()).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn text_skips_comments_and_blanks() {
        let rows = parse_text("# header\n\n1 2\n  3\t4  \n".as_bytes()).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(parse_text("1 x\n".as_bytes()).is_err());
    }
}
