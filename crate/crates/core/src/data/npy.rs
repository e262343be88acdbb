//! Reader and writer for the NPY v1.0 array format.
//!
//! Only the slice of the format this crate needs is supported: little-endian
//! `<f4`/`<f8` elements, C order, rank 1 or 2. Values are widened to `f64` on
//! read. Anything else (Fortran order, other dtypes, other ranks, NPZ
//! archives) is rejected with an error naming the offending header field.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub const MAGIC: [u8; 6] = *b"\x93NUMPY";

/// Element type for writing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NpyDtype {
    F4,
    F8,
}

impl NpyDtype {
    fn descr(self) -> &'static str {
        match self {
            NpyDtype::F4 => "<f4",
            NpyDtype::F8 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            NpyDtype::F4 => 4,
            NpyDtype::F8 => 8,
        }
    }
}

/// A parsed array: rank 1 or rank 2, values widened to `f64`.
#[derive(Clone, Debug)]
pub enum NpyData {
    Vector(Vec<f64>),
    Matrix(Mat),
}

pub fn read_npy(path: &Path) -> Result<NpyData> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_npy(path, &bytes)
}

/// Strict rank-1 read.
pub fn read_npy_vector(path: &Path) -> Result<Vec<f64>> {
    match read_npy(path)? {
        NpyData::Vector(v) => Ok(v),
        NpyData::Matrix(_) => Err(Error::Dimension {
            what: "npy vector rank",
            expected: 1,
            found: 2,
        }),
    }
}

/// Strict rank-2 read.
pub fn read_npy_matrix(path: &Path) -> Result<Mat> {
    match read_npy(path)? {
        NpyData::Matrix(m) => Ok(m),
        NpyData::Vector(_) => Err(Error::Dimension {
            what: "npy matrix rank",
            expected: 2,
            found: 1,
        }),
    }
}

pub fn parse_npy(path: &Path, bytes: &[u8]) -> Result<NpyData> {
    let err_format = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() >= 2 && &bytes[..2] == b"PK" {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            field: "format",
            detail: "npz zip archive; extract the member arrays to bare .npy files first"
                .to_string(),
        });
    }
    if bytes.len() < 10 {
        return Err(err_format("file too short for an npy header"));
    }
    if bytes[..6] != MAGIC {
        return Err(err_format("not an npy file (bad magic)"));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    if (major, minor) != (1, 0) {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            field: "version",
            detail: format!("{major}.{minor} (only 1.0 is supported)"),
        });
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    if bytes.len() < 10 + header_len {
        return Err(err_format("header length exceeds file size"));
    }
    let header = std::str::from_utf8(&bytes[10..10 + header_len])
        .map_err(|_| err_format("header is not ASCII"))?;

    let descr = extract_quoted(header, "descr").ok_or_else(|| err_format("missing 'descr'"))?;
    let dtype = match descr.as_str() {
        "<f4" => NpyDtype::F4,
        "<f8" => NpyDtype::F8,
        other => {
            return Err(Error::Unsupported {
                path: path.to_path_buf(),
                field: "descr",
                detail: format!("'{other}' (only '<f4' and '<f8' are supported)"),
            })
        }
    };

    let fortran = extract_bool(header, "fortran_order")
        .ok_or_else(|| err_format("missing 'fortran_order'"))?;
    if fortran {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            field: "fortran_order",
            detail: "True (only C order is supported)".to_string(),
        });
    }

    let shape = extract_shape(header).ok_or_else(|| err_format("missing or malformed 'shape'"))?;
    if shape.is_empty() || shape.len() > 2 {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            field: "shape",
            detail: format!("rank {} (only rank 1 and 2 are supported)", shape.len()),
        });
    }

    let count: usize = shape.iter().product();
    let payload = &bytes[10 + header_len..];
    let expected = count * dtype.size();
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        });
    }

    let mut values = Vec::with_capacity(count);
    match dtype {
        NpyDtype::F4 => {
            for chunk in payload.chunks_exact(4) {
                values.push(f64::from(f32::from_le_bytes(chunk.try_into().unwrap())));
            }
        }
        NpyDtype::F8 => {
            for chunk in payload.chunks_exact(8) {
                values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
    }

    Ok(match shape.len() {
        1 => NpyData::Vector(values),
        _ => NpyData::Matrix(Mat::from_vec(shape[0], shape[1], values)),
    })
}

fn extract_quoted(header: &str, key: &str) -> Option<String> {
    let start = find_value(header, key)?;
    let rest = &header[start..];
    let open = rest.find('\'')?;
    let rest = &rest[open + 1..];
    let close = rest.find('\'')?;
    Some(rest[..close].to_string())
}

fn extract_bool(header: &str, key: &str) -> Option<bool> {
    let start = find_value(header, key)?;
    let rest = header[start..].trim_start();
    if rest.starts_with("True") {
        Some(true)
    } else if rest.starts_with("False") {
        Some(false)
    } else {
        None
    }
}

fn extract_shape(header: &str) -> Option<Vec<usize>> {
    let start = find_value(header, "shape")?;
    let rest = &header[start..];
    let open = rest.find('(')?;
    let close = rest.find(')')?;
    let inner = &rest[open + 1..close];
    let mut dims = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        dims.push(part.parse::<usize>().ok()?);
    }
    Some(dims)
}

/// Position just after `'key':` in the header dict.
fn find_value(header: &str, key: &str) -> Option<usize> {
    let pattern = format!("'{key}'");
    let at = header.find(&pattern)?;
    let after = &header[at + pattern.len()..];
    let colon = after.find(':')?;
    Some(at + pattern.len() + colon + 1)
}

fn write_npy(path: &Path, shape: &[usize], values: &[f64], dtype: NpyDtype) -> Result<()> {
    let shape_str = match shape {
        [n] => format!("({n},)"),
        [r, c] => format!("({r}, {c})"),
        _ => unreachable!("writer only emits rank 1 or 2"),
    };
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_str
    );
    // Pad with spaces so magic + version + length + header is a multiple of
    // 64 bytes, ending in a newline.
    let unpadded = 10 + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header = format!("{dict}{}\n", " ".repeat(padding));
    let mut out = Vec::with_capacity(10 + header.len() + values.len() * dtype.size());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match dtype {
        NpyDtype::F4 => {
            for &v in values {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        NpyDtype::F8 => {
            for &v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(&out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_npy_vector(path: &Path, values: &[f64], dtype: NpyDtype) -> Result<()> {
    write_npy(path, &[values.len()], values, dtype)
}

pub fn write_npy_matrix(path: &Path, m: &Mat, dtype: NpyDtype) -> Result<()> {
    write_npy(path, &[m.rows(), m.cols()], m.data(), dtype)
}
