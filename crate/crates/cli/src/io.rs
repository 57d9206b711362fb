//! Point-file formats.
//!
//! CSV holds one point per line with comma-separated coordinates; blank
//! lines are skipped. The binary format is little-endian: the magic
//! `ABXPTS01`, a `u32` dimension, a `u64` point count, then the `f32`
//! coordinates of each point in turn.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub const MAGIC: &[u8; 8] = b"ABXPTS01";
const HEADER_LEN: usize = 8 + 4 + 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Binary,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "binary" | "bin" => Ok(Format::Binary),
            _ => Err(format!("unknown format '{s}' (expected csv or binary)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Binary => "binary",
        })
    }
}

/// Points of a runtime dimension, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub coords: Vec<f32>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        PointCloud {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> &[f32] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Fixed-dimension view; `None` when `D` differs from `self.dim`.
    pub fn to_points<const D: usize>(&self) -> Option<Vec<bvhscan::Point<D>>> {
        if self.dim != D {
            return None;
        }
        Some(
            self.coords
                .chunks_exact(D)
                .map(|c| bvhscan::Point(c.try_into().unwrap()))
                .collect(),
        )
    }

    pub fn from_points<const D: usize>(points: &[bvhscan::Point<D>]) -> Self {
        PointCloud {
            dim: D,
            coords: points.iter().flat_map(|p| p.0).collect(),
        }
    }
}

pub fn load_points(path: &Path, format: Format) -> Result<PointCloud, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let parsed = match format {
        Format::Csv => String::from_utf8(bytes)
            .map_err(|e| format!("byte {}: invalid UTF-8", e.utf8_error().valid_up_to()))
            .and_then(|text| parse_csv(&text)),
        Format::Binary => parse_binary(&bytes),
    };
    parsed.map_err(|message| CliError::Parse {
        path: path.display().to_string(),
        message,
    })
}

pub fn save_points(path: &Path, cloud: &PointCloud, format: Format) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let result = match format {
        Format::Csv => write_csv(&mut w, cloud),
        Format::Binary => write_binary(&mut w, cloud),
    };
    result
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

/// Parses CSV text. Errors name the 1-based line.
pub fn parse_csv(text: &str) -> Result<PointCloud, String> {
    let mut cloud: Option<PointCloud> = None;
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let start = cloud.as_ref().map_or(0, |c| c.coords.len());
        let mut values = Vec::with_capacity(start.min(8));
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| {
                format!("line {lineno}: cannot parse '{}' as a number", field.trim())
            })?;
            if !v.is_finite() {
                return Err(format!(
                    "line {lineno}: non-finite value '{}'",
                    field.trim()
                ));
            }
            values.push(v);
        }
        let cloud = cloud.get_or_insert_with(|| PointCloud::new(values.len()));
        if values.len() != cloud.dim {
            return Err(format!(
                "line {lineno}: expected {} values, found {}",
                cloud.dim,
                values.len()
            ));
        }
        cloud.coords.extend(values);
    }
    Ok(cloud.unwrap_or_else(|| PointCloud::new(0)))
}

/// Parses the binary format. Errors name the byte offset.
pub fn parse_binary(bytes: &[u8]) -> Result<PointCloud, String> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err("byte 0: bad magic (expected ABXPTS01)".into());
    }
    if bytes.len() < HEADER_LEN {
        return Err(format!("byte {}: truncated header", bytes.len()));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if dim == 0 && count > 0 {
        return Err("byte 8: dimension is zero".into());
    }
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(dim))
        .and_then(|v| v.checked_mul(4))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| "byte 12: point count too large".to_string())?;
    if bytes.len() < expected {
        let whole = (bytes.len() - HEADER_LEN) / 4 * 4 + HEADER_LEN;
        return Err(format!(
            "byte {whole}: truncated payload ({} of {expected} bytes)",
            bytes.len()
        ));
    }
    if bytes.len() > expected {
        return Err(format!(
            "byte {expected}: trailing data after {count} points"
        ));
    }
    let mut cloud = PointCloud::new(dim);
    cloud.coords.reserve_exact(expected / 4);
    for (k, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(format!("byte {}: non-finite value", HEADER_LEN + 4 * k));
        }
        cloud.coords.push(v);
    }
    Ok(cloud)
}

fn write_csv(w: &mut impl Write, cloud: &PointCloud) -> std::io::Result<()> {
    for i in 0..cloud.len() {
        let p = cloud.point(i);
        for (k, v) in p.iter().enumerate() {
            if k > 0 {
                w.write_all(b",")?;
            }
            // Display for f32 round-trips exactly
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn write_binary(w: &mut impl Write, cloud: &PointCloud) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(cloud.dim as u32).to_le_bytes())?;
    w.write_all(&(cloud.len() as u64).to_le_bytes())?;
    for v in &cloud.coords {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_basic() {
        let c = parse_csv("0,0,0\n1,1,1\n").unwrap();
        assert_eq!(c.dim, 3);
        assert_eq!(c.len(), 2);
        assert_eq!(c.point(1), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn csv_mixed_dimension_names_line() {
        let err = parse_csv("0,0,0\n1,1\n").unwrap_err();
        assert!(err.starts_with("line 2:"), "{err}");
    }

    #[test]
    fn csv_rejects_garbage_and_non_finite() {
        assert!(parse_csv("1,2\n3,x\n").unwrap_err().starts_with("line 2:"));
        assert!(parse_csv("1,2\n\n3,inf\n")
            .unwrap_err()
            .starts_with("line 3:"));
        assert!(parse_csv("NaN,1\n").unwrap_err().starts_with("line 1:"));
    }

    #[test]
    fn csv_empty_and_whitespace() {
        assert!(parse_csv("").unwrap().is_empty());
        let c = parse_csv(" 1 , 2 \r\n\n3,4").unwrap();
        assert_eq!(c.coords, vec![1.0, 2.0, 3.0, 4.0]);
    }

    fn encoded(cloud: &PointCloud) -> Vec<u8> {
        let mut buf = Vec::new();
        write_binary(&mut buf, cloud).unwrap();
        buf
    }

    #[test]
    fn binary_layout() {
        let cloud = PointCloud {
            dim: 2,
            coords: vec![1.0, -2.5],
        };
        let b = encoded(&cloud);
        assert_eq!(&b[..8], b"ABXPTS01");
        assert_eq!(&b[8..12], &[2, 0, 0, 0]);
        assert_eq!(&b[12..20], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[20..24], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 28);
    }

    #[test]
    fn binary_errors_name_offsets() {
        let cloud = PointCloud {
            dim: 3,
            coords: vec![0.5; 6],
        };
        let mut b = encoded(&cloud);
        assert_eq!(parse_binary(&b).unwrap(), cloud);

        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(parse_binary(&bad).unwrap_err().starts_with("byte 0:"));
        assert!(parse_binary(&b[..30]).unwrap_err().starts_with("byte 28:"));
        assert!(parse_binary(&b[..15]).unwrap_err().starts_with("byte 15:"));

        b[20 + 4 * 4..20 + 4 * 5].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(parse_binary(&b).unwrap_err(), "byte 36: non-finite value");
    }

    #[test]
    fn round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = PointCloud {
            dim: 3,
            coords: vec![0.1, 1e-30, -3.4e38, 7.0, 0.333_333_34, -0.0],
        };
        for format in [Format::Csv, Format::Binary] {
            let path = dir.path().join(format!("pts.{format}"));
            save_points(&path, &cloud, format).unwrap();
            let back = load_points(&path, format).unwrap();
            assert_eq!(back.dim, 3);
            let bits = |c: &PointCloud| c.coords.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back), bits(&cloud));
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_points(Path::new("/nonexistent/points.csv"), Format::Csv).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
