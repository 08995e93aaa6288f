//! Matrix Market coordinate format (`real`/`integer`, `general`,
//! `symmetric` or `skew-symmetric`).

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::CsrMatrix;

#[derive(Debug, Error)]
pub enum MatrixMarketError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("unsupported matrix market variant: {0}")]
    Unsupported(String),
}

fn format_err(line: usize, msg: impl Into<String>) -> MatrixMarketError {
    MatrixMarketError::Format {
        line,
        msg: msg.into(),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix, MatrixMarketError> {
    let text = fs::read_to_string(path)?;
    read_matrix_market_str(&text)
}

/// Parses Matrix Market text. Symmetric storage is expanded to full storage
/// and duplicate entries are summed.
pub fn read_matrix_market_str(text: &str) -> Result<CsrMatrix, MatrixMarketError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(1, "empty input"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" {
        return Err(format_err(1, "missing %%MatrixMarket header"));
    }
    if fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(MatrixMarketError::Unsupported(format!("{} {}", fields[1], fields[2])));
    }
    match fields[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(MatrixMarketError::Unsupported(format!("field type {other}"))),
    }
    let symmetry = match fields[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(MatrixMarketError::Unsupported(format!("symmetry {other}"))),
    };

    let mut size_line = None;
    for (no, line) in lines.by_ref() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some((no, t));
        break;
    }
    let (no, t) = size_line.ok_or_else(|| format_err(2, "missing size line"))?;
    let dims: Vec<usize> = t
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| format_err(no, format!("bad integer '{s}'"))))
        .collect::<Result<_, _>>()?;
    if dims.len() != 3 {
        return Err(format_err(no, "size line needs rows, cols, entries"));
    }
    let (n_rows, n_cols, n_entries) = (dims[0], dims[1], dims[2]);
    if symmetry != Symmetry::General && n_rows != n_cols {
        return Err(format_err(no, "symmetric storage requires a square matrix"));
    }

    let mut triplets = Vec::with_capacity(if symmetry == Symmetry::General {
        n_entries
    } else {
        2 * n_entries
    });
    let mut read = 0usize;
    for (no, line) in lines {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        if read == n_entries {
            return Err(format_err(no, "more entries than declared"));
        }
        let mut it = t.split_whitespace();
        let mut next_index = |what: &str| -> Result<usize, MatrixMarketError> {
            let s = it
                .next()
                .ok_or_else(|| format_err(no, format!("missing {what}")))?;
            let v: usize = s
                .parse()
                .map_err(|_| format_err(no, format!("bad {what} '{s}'")))?;
            if v == 0 {
                return Err(format_err(no, format!("{what} must be 1-based")));
            }
            Ok(v - 1)
        };
        let r = next_index("row index")?;
        let c = next_index("column index")?;
        let v: f64 = match it.next() {
            Some(s) => s
                .parse()
                .map_err(|_| format_err(no, format!("bad value '{s}'")))?,
            None => return Err(format_err(no, "pattern entries are not supported")),
        };
        if r >= n_rows || c >= n_cols {
            return Err(format_err(no, format!("entry ({}, {}) out of range", r + 1, c + 1)));
        }
        triplets.push((r, c, v));
        if r != c {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => triplets.push((c, r, v)),
                Symmetry::SkewSymmetric => triplets.push((c, r, -v)),
            }
        }
        read += 1;
    }
    if read != n_entries {
        return Err(format_err(
            text.lines().count(),
            format!("expected {n_entries} entries, found {read}"),
        ));
    }
    CsrMatrix::from_triplets(n_rows, n_cols, &triplets).map_err(|e| format_err(0, e.to_string()))
}

/// Writes `a` in `coordinate real general` form with full precision.
pub fn write_matrix_market(a: &CsrMatrix, path: impl AsRef<Path>) -> Result<(), MatrixMarketError> {
    let mut out = String::with_capacity(32 * a.nnz() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz());
    for (i, j, v) in a.iter() {
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_file() {
        let a = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n% comment\n3 3 3\n1 1 1.0\n2 2 1.0\n3 3 1.0\n",
        )
        .unwrap();
        assert_eq!(a, CsrMatrix::identity(3));
    }

    #[test]
    fn symmetric_expansion() {
        let a = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n2 1 5\n2 2 3\n",
        )
        .unwrap();
        assert_eq!(a.get(1, 0), 5.0);
        assert_eq!(a.get(0, 1), 5.0);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn duplicates_are_summed() {
        let a = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 2 1.5\n1 2 2.5\n2 2 1\n",
        )
        .unwrap();
        assert_eq!(a.get(0, 1), 4.0);
    }

    #[test]
    fn pattern_entries_rejected() {
        let err = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n",
        )
        .unwrap_err();
        assert!(matches!(err, MatrixMarketError::Unsupported(_)));
        let err = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2\n",
        )
        .unwrap_err();
        assert!(matches!(err, MatrixMarketError::Format { line: 3, .. }));
    }

    #[test]
    fn parse_error_reports_line() {
        let err = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 x 1.0\n",
        )
        .unwrap_err();
        match err {
            MatrixMarketError::Format { line, .. } => assert_eq!(line, 4),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn out_of_range_entry() {
        assert!(read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn write_then_read_is_identity(
            n in 1usize..20,
            t in proptest::collection::vec((0usize..20, 0usize..20, -1e3f64..1e3), 0..60),
        ) {
            let t: Vec<_> = t.into_iter().map(|(i, j, v)| (i % n, j % n, v)).collect();
            let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("a.mtx");
            write_matrix_market(&a, &path).unwrap();
            prop_assert_eq!(read_matrix_market(&path).unwrap(), a);
        }
    }
}
