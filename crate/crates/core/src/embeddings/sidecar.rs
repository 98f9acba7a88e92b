use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::embeddings::{EmbeddingMatrix, EMBEDDING_DIM};
use crate::error::{Error, Result};

pub const SIDECAR_EXT: &str = "l3emb";
pub const SIDECAR_CSV_EXT: &str = "l3emb.csv";
const MAGIC: &[u8] = b"L3EMB1\n";

fn sidecar_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Sidecar {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// `<dir>/<sample_id>.l3emb`, falling back to the CSV variant.
pub fn find_sidecar(dir: &Path, sample_id: &str) -> Option<PathBuf> {
    [SIDECAR_EXT, SIDECAR_CSV_EXT]
        .iter()
        .map(|ext| dir.join(format!("{sample_id}.{ext}")))
        .find(|p| p.is_file())
}

/// Reads a binary or CSV sidecar; the sample id is the file name minus its
/// sidecar extension.
pub fn load_precomputed(path: &Path) -> Result<EmbeddingMatrix> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| sidecar_err(path, "file name is not valid UTF-8"))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (sample_id, rows) = if let Some(stem) = name.strip_suffix(&format!(".{SIDECAR_CSV_EXT}")) {
        (stem, parse_csv(path, &bytes)?)
    } else if let Some(stem) = name.strip_suffix(&format!(".{SIDECAR_EXT}")) {
        (stem, parse_binary(path, &bytes)?)
    } else {
        return Err(sidecar_err(path, "expected a .l3emb or .l3emb.csv file"));
    };
    EmbeddingMatrix::new(sample_id, rows).map_err(|e| sidecar_err(path, e.to_string()))
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<Array2<f32>> {
    if !bytes.starts_with(MAGIC) {
        return Err(sidecar_err(path, "bad magic"));
    }
    let mut pos = MAGIC.len();
    let header = loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| sidecar_err(path, "truncated header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| sidecar_err(path, "header is not ASCII"))?;
        pos += end + 1;
        if !line.starts_with('#') {
            break line;
        }
    };

    let (mut rows, mut cols, mut dtype) = (None, None, None);
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("rows", v)) => rows = v.parse::<usize>().ok(),
            Some(("cols", v)) => cols = v.parse::<usize>().ok(),
            Some(("dtype", v)) => dtype = Some(v),
            _ => return Err(sidecar_err(path, format!("unknown header field {field:?}"))),
        }
    }
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) => (r, c),
        _ => return Err(sidecar_err(path, "header needs rows=<n> cols=<n>")),
    };
    if dtype != Some("f32le") {
        return Err(sidecar_err(path, format!("unsupported dtype {dtype:?}")));
    }
    if cols != EMBEDDING_DIM {
        return Err(sidecar_err(path, format!("wrong row width: expected {EMBEDDING_DIM}, got {cols}")));
    }
    let payload = &bytes[pos..];
    if payload.len() != rows * cols * 4 {
        return Err(sidecar_err(
            path,
            format!("payload holds {} bytes, header implies {}", payload.len(), rows * cols * 4),
        ));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| sidecar_err(path, e.to_string()))
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Array2<f32>> {
    let text = std::str::from_utf8(bytes).map_err(|_| sidecar_err(path, "not UTF-8"))?;
    let mut data = Vec::new();
    let mut n = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f32> = line
            .split(',')
            .map(|v| v.trim().parse::<f32>())
            .collect::<Result<_, _>>()
            .map_err(|e| sidecar_err(path, format!("line {}: {e}", lineno + 1)))?;
        if row.len() != EMBEDDING_DIM {
            return Err(sidecar_err(
                path,
                format!("wrong row width: expected {EMBEDDING_DIM}, got {} on line {}", row.len(), lineno + 1),
            ));
        }
        data.extend(row);
        n += 1;
    }
    Array2::from_shape_vec((n, EMBEDDING_DIM), data).map_err(|e| sidecar_err(path, e.to_string()))
}

/// Writes `<dir>/<sample_id>.l3emb`, with optional `#` comment lines.
pub fn write_sidecar(dir: &Path, matrix: &EmbeddingMatrix, comments: &[&str]) -> Result<PathBuf> {
    let path = dir.join(format!("{}.{SIDECAR_EXT}", matrix.sample_id));
    let mut out = MAGIC.to_vec();
    for c in comments {
        writeln!(out, "# {}", c.replace('\n', " ")).unwrap();
    }
    writeln!(out, "rows={} cols={} dtype=f32le", matrix.rows.nrows(), matrix.rows.ncols()).unwrap();
    for v in matrix.rows.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the CSV variant, one window per line.
pub fn write_sidecar_csv(dir: &Path, matrix: &EmbeddingMatrix) -> Result<PathBuf> {
    let path = dir.join(format!("{}.{SIDECAR_CSV_EXT}", matrix.sample_id));
    let mut out = String::new();
    for row in matrix.rows.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
