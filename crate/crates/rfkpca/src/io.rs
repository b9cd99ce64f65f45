//! Readers for idx image files and delimited numeric tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rfkpca_core::data::Normalization;
use rfkpca_core::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: byte {offset}: {msg}", path.display())]
    Idx {
        path: PathBuf,
        offset: usize,
        msg: String,
    },
    #[error("{}: line {line}: {msg}", path.display())]
    Delimited {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("{}: {source}", path.display())]
    Invalid {
        path: PathBuf,
        #[source]
        source: rfkpca_core::Error,
    },
}

const IMAGE_MAGIC: [u8; 4] = [0x00, 0x00, 0x08, 0x03];
const LABEL_MAGIC: [u8; 4] = [0x00, 0x00, 0x08, 0x01];

fn read_all(path: &Path) -> Result<Vec<u8>, FormatError> {
    fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn idx_err(path: &Path, offset: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Idx {
        path: path.to_path_buf(),
        offset,
        msg: msg.into(),
    }
}

/// Parses the magic number and `ndims` big-endian dimensions, returning the
/// dimensions and the payload offset.
fn idx_header(
    path: &Path,
    bytes: &[u8],
    magic: [u8; 4],
) -> Result<(Vec<usize>, usize), FormatError> {
    if bytes.len() < 4 {
        return Err(idx_err(path, bytes.len(), "truncated magic number"));
    }
    if bytes[..4] != magic {
        return Err(idx_err(
            path,
            0,
            format!("bad magic {:02x?}, expected {:02x?}", &bytes[..4], magic),
        ));
    }
    let ndims = magic[3] as usize;
    let mut dims = Vec::with_capacity(ndims);
    for i in 0..ndims {
        let at = 4 + 4 * i;
        let Some(word) = bytes.get(at..at + 4) else {
            return Err(idx_err(
                path,
                bytes.len(),
                format!("truncated header: dimension {i} missing"),
            ));
        };
        dims.push(u32::from_be_bytes(word.try_into().unwrap()) as usize);
    }
    Ok((dims, 4 + 4 * ndims))
}

/// Reads an idx3 image file as an `n × (rows·cols)` dataset with pixels
/// scaled to `[0, 1]`, and optionally the matching idx1 label file.
pub fn load_idx(
    images: &Path,
    labels: Option<&Path>,
) -> Result<(Dataset, Option<Vec<u8>>), FormatError> {
    let bytes = read_all(images)?;
    let (dims, start) = idx_header(images, &bytes, IMAGE_MAGIC)?;
    let (n, d) = (dims[0], dims[1] * dims[2]);
    let need = n
        .checked_mul(d)
        .and_then(|p| p.checked_add(start))
        .ok_or_else(|| idx_err(images, 4, "dimensions overflow"))?;
    if bytes.len() < need {
        return Err(idx_err(
            images,
            bytes.len(),
            format!("truncated pixel data: {n} images of {d} pixels need {need} bytes"),
        ));
    }
    if n == 0 || d == 0 {
        return Err(idx_err(images, 4, "image file declares no pixels"));
    }
    let points: Vec<f64> = bytes[start..need]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    let name = images
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".to_string());
    let dataset = Dataset::from_rows(name, points, d)
        .map_err(|source| FormatError::Invalid {
            path: images.to_path_buf(),
            source,
        })?
        .with_normalization(Normalization {
            scale: 1.0 / 255.0,
            offset: 0.0,
        });

    let labels = match labels {
        None => None,
        Some(path) => {
            let bytes = read_all(path)?;
            let (dims, start) = idx_header(path, &bytes, LABEL_MAGIC)?;
            if dims[0] != n {
                return Err(idx_err(
                    path,
                    4,
                    format!("{} labels for {n} images", dims[0]),
                ));
            }
            if bytes.len() < start + n {
                return Err(idx_err(
                    path,
                    bytes.len(),
                    format!("truncated label data: expected {n} labels"),
                ));
            }
            Some(bytes[start..start + n].to_vec())
        }
    };
    Ok((dataset, labels))
}

/// Reads a rectangular numeric table.
pub fn load_delimited(
    path: &Path,
    delimiter: u8,
    has_header: bool,
) -> Result<Dataset, FormatError> {
    let err = |line: u64, msg: String| FormatError::Delimited {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => FormatError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => err(1, format!("{other:?}")),
        })?;
    let names = if has_header {
        let h = reader.headers().map_err(|e| err(1, e.to_string()))?;
        Some(h.iter().map(str::to_string).collect::<Vec<_>>())
    } else {
        None
    };
    let mut width = names.as_ref().map(Vec::len);
    let mut points = Vec::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(err(
                    line,
                    format!("expected {w} fields, found {}", record.len()),
                ));
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                err(
                    line,
                    format!("column {}: `{cell}` is not a number", col + 1),
                )
            })?;
            points.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(err(1, "no data rows".to_string()));
    }
    let d = width.unwrap_or(0);
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".to_string());
    let mut dataset =
        Dataset::from_rows(name, points, d).map_err(|source| FormatError::Invalid {
            path: path.to_path_buf(),
            source,
        })?;
    if let Some(names) = names {
        dataset = dataset.with_column_names(names);
    }
    Ok(dataset)
}

/// Writes `dataset` as delimited text with round-trip exact values.
pub fn write_delimited(path: &Path, dataset: &Dataset, delimiter: u8) -> Result<(), FormatError> {
    let io = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    let sep = delimiter as char;
    if let Some(names) = &dataset.column_names {
        writeln!(out, "{}", names.join(&sep.to_string())).map_err(io)?;
    }
    for i in 0..dataset.len() {
        let row: Vec<String> = dataset.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", row.join(&sep.to_string())).map_err(io)?;
    }
    out.flush().map_err(io)
}
