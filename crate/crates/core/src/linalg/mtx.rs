//! Matrix Market coordinate I/O.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

pub const MM_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// Serializes in coordinate format with 1-based indices, row-major entry order.
pub fn to_matrix_market_string(a: &CsrMatrix) -> String {
    let mut s = String::with_capacity(32 * a.nnz() + 64);
    s.push_str(MM_HEADER);
    s.push('\n');
    let _ = writeln!(s, "{} {} {}", a.nrows(), a.ncols(), a.nnz());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            let _ = writeln!(s, "{} {} {:.17e}", i + 1, c + 1, v);
        }
    }
    s
}

pub fn write_matrix_market(a: &CsrMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, to_matrix_market_string(a)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix_market(&text, path)
}

/// Parses `general` or `symmetric` real coordinate files.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<CsrMatrix> {
    let err = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if h.len() < 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" || h[2] != "coordinate" {
        return Err(err(1, "expected a '%%MatrixMarket matrix coordinate' header"));
    }
    if h[3] != "real" && h[3] != "integer" {
        return Err(err(1, "only real or integer fields are supported"));
    }
    let symmetric = match h[4].as_str() {
        "general" => false,
        "symmetric" => true,
        _ => return Err(err(1, "only general or symmetric storage is supported")),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(err(lineno, "size line must hold rows, columns and entry count"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| err(lineno, "bad size field"));
                size = Some((p(parts[0])?, p(parts[1])?, p(parts[2])?));
            }
            Some((nr, nc, _)) => {
                if parts.len() != 3 {
                    return Err(err(lineno, "entry must be 'row col value'"));
                }
                let r: usize = parts[0].parse().map_err(|_| err(lineno, "bad row index"))?;
                let c: usize = parts[1].parse().map_err(|_| err(lineno, "bad column index"))?;
                let v: f64 = parts[2].parse().map_err(|_| err(lineno, "bad value"))?;
                if r == 0 || c == 0 || r > nr || c > nc {
                    return Err(err(lineno, "index out of range"));
                }
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| err(1, "missing size line"))?;
    let stored = if symmetric {
        triplets.iter().filter(|(r, c, _)| r <= c).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(err(
            text.lines().count(),
            &format!("expected {nnz} entries, found {stored}"),
        ));
    }
    Ok(CsrMatrix::from_triplets(nr, nc, &triplets))
}
