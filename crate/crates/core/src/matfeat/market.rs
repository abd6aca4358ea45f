use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{MatfeatError, Result, SparseMatrix, Symmetry};

/// Parses a Matrix Market coordinate file with real (or integer) values.
///
/// Symmetric files store one triangle; the mirrored entries are added so the
/// result is always in full storage. Indices in the file are 1-based.
pub fn parse_matrix_market(reader: impl BufRead) -> Result<SparseMatrix> {
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or(MatfeatError::MissingHeader)?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(MatfeatError::MissingHeader);
    }
    let [_, object, format, field, symmetry] = tokens.as_slice() else {
        return Err(MatfeatError::BadHeader(header.clone()));
    };
    if object != "matrix" {
        return Err(MatfeatError::Unsupported(format!("object `{object}`")));
    }
    if format != "coordinate" {
        return Err(MatfeatError::Unsupported(format!("format `{format}`")));
    }
    match field.as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(MatfeatError::Unsupported(format!("field `{other}`"))),
    }
    let symmetry = match symmetry.as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(MatfeatError::Unsupported(format!("symmetry `{other}`"))),
    };

    let mut size = None;
    for (idx, line) in lines.by_ref() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let nums: Vec<usize> = t
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| MatfeatError::BadSizeLine { line: idx + 1 }))
            .collect::<Result<_>>()?;
        let [r, c, n] = nums[..] else {
            return Err(MatfeatError::BadSizeLine { line: idx + 1 });
        };
        size = Some((r, c, n));
        break;
    }
    let (n_rows, n_cols, declared) = size.ok_or(MatfeatError::BadSizeLine { line: 2 })?;
    if n_rows == 0 || n_cols == 0 {
        return Err(MatfeatError::EmptyDimensions);
    }

    let mut triplets = Vec::with_capacity(declared * if symmetry == Symmetry::Symmetric { 2 } else { 1 });
    let mut found = 0usize;
    for (idx, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let lineno = idx + 1;
        let mut parts = t.split_whitespace();
        let (Some(ri), Some(ci), Some(vi)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(MatfeatError::BadEntry { line: lineno });
        };
        let index = |tok: &str| {
            tok.parse::<usize>().map_err(|_| MatfeatError::NonNumeric { line: lineno, token: tok.to_string() })
        };
        let (row, col) = (index(ri)?, index(ci)?);
        let value: f64 = vi.parse().map_err(|_| MatfeatError::NonNumeric { line: lineno, token: vi.to_string() })?;
        if row == 0 || col == 0 || row > n_rows || col > n_cols {
            return Err(MatfeatError::IndexOutOfRange { row, col, n_rows, n_cols });
        }
        found += 1;
        triplets.push((row - 1, col - 1, value));
        if symmetry == Symmetry::Symmetric && row != col {
            triplets.push((col - 1, row - 1, value));
        }
    }
    if found != declared {
        return Err(MatfeatError::EntryCount { expected: declared, found });
    }
    Ok(SparseMatrix::from_triplets(n_rows, n_cols, triplets)?.with_symmetry(symmetry))
}

pub fn read_matrix_market_file(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let file = std::fs::File::open(path)?;
    parse_matrix_market(BufReader::new(file))
}

/// Writes a matrix as a general coordinate file.
pub fn write_matrix_market(m: &SparseMatrix, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}
