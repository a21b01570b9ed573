//! Minimal NPY v1.0 reader and writer.
//!
//! Supports exactly the subset every artifact in this crate uses: C-order,
//! little-endian 32-bit floats, 1 to 4 dimensions. Anything else fails with
//! [`Error::Format`]. Round trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayBase, ArrayD, Data, Dimension, IxDyn};

use crate::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// Writes an f32 array as NPY v1.0, C-order, little-endian.
pub fn write_npy<S, D>(path: impl AsRef<Path>, arr: &ArrayBase<S, D>) -> Result<()>
where
    S: Data<Elem = f32>,
    D: Dimension,
{
    let ndim = arr.ndim();
    if !(1..=4).contains(&ndim) {
        return Err(Error::Format(format!(
            "only 1-4 dimensional arrays are supported, got {ndim}"
        )));
    }

    let shape = arr
        .shape()
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let shape = if ndim == 1 { format!("{shape},") } else { shape };
    let mut dict = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({shape}), }}");

    // Total header (magic + version + length field + dict + newline) must be
    // a multiple of 64 bytes; pad the dict with spaces.
    let prefix = MAGIC.len() + 2 + 2;
    let unpadded = prefix + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    dict.extend(std::iter::repeat(' ').take(padding));
    dict.push('\n');

    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&[1, 0])?;
    out.write_all(&(dict.len() as u16).to_le_bytes())?;
    out.write_all(dict.as_bytes())?;
    for v in arr.as_standard_layout().iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an NPY v1.0 file written in the supported subset.
pub fn read_npy(path: impl AsRef<Path>) -> Result<ArrayD<f32>> {
    let mut input = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 6];
    input.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an NPY file (bad magic)".to_string()));
    }
    let mut version = [0u8; 2];
    input.read_exact(&mut version).map_err(truncated)?;
    if version != [1, 0] {
        return Err(Error::Format(format!(
            "unsupported NPY version {}.{}",
            version[0], version[1]
        )));
    }
    let mut len_bytes = [0u8; 2];
    input.read_exact(&mut len_bytes).map_err(truncated)?;
    let header_len = u16::from_le_bytes(len_bytes) as usize;
    let mut header = vec![0u8; header_len];
    input.read_exact(&mut header).map_err(truncated)?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| Error::Format("header is not valid UTF-8".to_string()))?;

    let descr = dict_value(header, "descr")?;
    if descr != "'<f4'" {
        return Err(Error::Format(format!(
            "unsupported dtype {descr}, expected '<f4'"
        )));
    }
    let order = dict_value(header, "fortran_order")?;
    if order != "False" {
        return Err(Error::Format(
            "fortran-order arrays are not supported".to_string(),
        ));
    }
    let shape = parse_shape(&dict_value(header, "shape")?)?;
    if !(1..=4).contains(&shape.len()) {
        return Err(Error::Format(format!(
            "only 1-4 dimensional arrays are supported, got {}",
            shape.len()
        )));
    }

    let n_elems: usize = shape.iter().product();
    let mut raw = vec![0u8; n_elems * 4];
    input.read_exact(&mut raw).map_err(truncated)?;
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after array data".to_string()));
    }

    let data: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    ArrayD::from_shape_vec(IxDyn(&shape), data)
        .map_err(|e| Error::Format(format!("shape/data mismatch: {e}")))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("file truncated".to_string())
    } else {
        Error::Io(e)
    }
}

/// Extracts the raw value text for one key of the header's Python dict
/// literal (everything between the colon and the next top-level comma).
fn dict_value(header: &str, key: &str) -> Result<String> {
    let needle = format!("'{key}':");
    let start = header
        .find(&needle)
        .ok_or_else(|| Error::Format(format!("header missing key '{key}'")))?
        + needle.len();
    let rest = &header[start..];
    let mut depth = 0usize;
    let mut end = rest.len();
    for (i, ch) in rest.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            ',' | '}' if depth == 0 => {
                end = i;
                break;
            }
            _ => {}
        }
    }
    Ok(rest[..end].trim().to_string())
}

fn parse_shape(text: &str) -> Result<Vec<usize>> {
    let inner = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| Error::Format(format!("malformed shape {text}")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("malformed shape entry {s}")))
        })
        .collect()
}
