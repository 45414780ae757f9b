//! Matrix Market coordinate format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::SparseMatrix;
use crate::error::MtxError;

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix, MtxError> {
    let file = File::open(path.as_ref())?;
    read_matrix_market_from(BufReader::new(file))
}

pub fn read_matrix_market_from<R: Read>(reader: R) -> Result<SparseMatrix, MtxError> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (lno, header) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(MtxError::at(1, "empty file")),
    };
    let (field, symmetry) = parse_header(lno, &header)?;

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut seen = 0usize;
    for (lno, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut tok = t.split_whitespace();
        let Some((nrows, ncols, nnz)) = dims else {
            let mut next = |what: &str| -> Result<usize, MtxError> {
                tok.next()
                    .ok_or_else(|| MtxError::at(lno, format!("missing {what} in size line")))?
                    .parse()
                    .map_err(|_| MtxError::at(lno, format!("bad {what} in size line")))
            };
            let d = (next("nrows")?, next("ncols")?, next("nnz")?);
            if symmetry != Symmetry::General && d.0 != d.1 {
                return Err(MtxError::at(lno, "symmetric storage requires a square matrix"));
            }
            triplets.reserve(if symmetry == Symmetry::General { d.2 } else { 2 * d.2 });
            dims = Some(d);
            continue;
        };
        if seen == nnz {
            return Err(MtxError::at(lno, format!("more than the declared {nnz} entries")));
        }
        let mut index = |what: &str, bound: usize| -> Result<usize, MtxError> {
            let v: usize = tok
                .next()
                .ok_or_else(|| MtxError::at(lno, format!("missing {what} index")))?
                .parse()
                .map_err(|_| MtxError::at(lno, format!("bad {what} index")))?;
            if v == 0 || v > bound {
                return Err(MtxError::at(lno, format!("{what} index {v} out of range 1..={bound}")));
            }
            Ok(v - 1)
        };
        let i = index("row", nrows)?;
        let j = index("column", ncols)?;
        let v = match field {
            Field::Pattern => 1.0,
            Field::Real | Field::Integer => tok
                .next()
                .ok_or_else(|| MtxError::at(lno, "missing value"))?
                .parse::<f64>()
                .map_err(|_| MtxError::at(lno, "bad value"))?,
        };
        match symmetry {
            Symmetry::General => triplets.push((i, j, v)),
            Symmetry::Symmetric => {
                triplets.push((i, j, v));
                if i != j {
                    triplets.push((j, i, v));
                }
            }
            Symmetry::Skew => {
                if i == j {
                    return Err(MtxError::at(lno, "diagonal entry in skew-symmetric matrix"));
                }
                triplets.push((i, j, v));
                triplets.push((j, i, -v));
            }
        }
        seen += 1;
    }
    let Some((nrows, ncols, nnz)) = dims else {
        return Err(MtxError::at(lno, "missing size line"));
    };
    if seen != nnz {
        return Err(MtxError::at(lno, format!("declared {nnz} entries, found {seen}")));
    }
    SparseMatrix::from_triplets(nrows, ncols, &triplets).map_err(|e| MtxError::at(lno, e.to_string()))
}

fn parse_header(lno: usize, header: &str) -> Result<(Field, Symmetry), MtxError> {
    let tok: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if tok.len() != 5 || tok[0] != "%%matrixmarket" {
        return Err(MtxError::at(lno, "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`"));
    }
    if tok[1] != "matrix" {
        return Err(MtxError::at(lno, format!("unsupported object `{}`", tok[1])));
    }
    if tok[2] != "coordinate" {
        return Err(MtxError::at(lno, format!("unsupported format `{}` (only coordinate)", tok[2])));
    }
    let field = match tok[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        "complex" => return Err(MtxError::at(lno, "complex matrices are not supported")),
        other => return Err(MtxError::at(lno, format!("unknown field `{other}`"))),
    };
    let symmetry = match tok[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(MtxError::at(lno, format!("unsupported symmetry `{other}`"))),
    };
    Ok((field, symmetry))
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseMatrix) -> Result<(), MtxError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_matrix_market_to(&mut w, a)?;
    w.flush()?;
    Ok(())
}

/// Writes `a` as `coordinate real general`, entries sorted by (row, col).
/// Values use the shortest representation that parses back to the same f64.
pub fn write_matrix_market_to<W: Write>(w: &mut W, a: &SparseMatrix) -> Result<(), MtxError> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn read(s: &str) -> Result<SparseMatrix, MtxError> {
        read_matrix_market_from(s.as_bytes())
    }

    fn line_of(e: MtxError) -> usize {
        match e {
            MtxError::Parse { line, .. } => line,
            MtxError::Io(_) => panic!("unexpected io error"),
        }
    }

    #[test]
    fn diagonal_file() {
        let a = read("%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 3.0\n2 2 4.0\n").unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 1), 4.0);
    }

    #[test]
    fn symmetric_expansion() {
        let a = read("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 5.0\n").unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.values(), &[5.0, 5.0]);
    }

    #[test]
    fn skew_and_pattern() {
        let a = read("%%MatrixMarket matrix coordinate real skew-symmetric\n3 3 1\n3 1 2.5\n").unwrap();
        assert_eq!(a.get(2, 0), 2.5);
        assert_eq!(a.get(0, 2), -2.5);
        let p = read("%%MatrixMarket matrix coordinate pattern general\n2 3 2\n1 3\n2 1\n").unwrap();
        assert_eq!(p.get(0, 2), 1.0);
        assert_eq!(p.get(1, 0), 1.0);
    }

    #[test]
    fn duplicates_summed_and_zeros_dropped() {
        let a = read("%%MatrixMarket matrix coordinate integer general\n2 2 3\n1 1 1\n1 1 2\n2 2 0\n").unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 0), 3.0);
    }

    #[test]
    fn errors_name_the_line() {
        let e = read("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n").unwrap_err();
        assert_eq!(line_of(e), 1);
        let e = read("%%MatrixMarket matrix array real general\n1 1\n1\n").unwrap_err();
        assert_eq!(line_of(e), 1);
        let e = read("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n3 1 1.0\n").unwrap_err();
        assert_eq!(line_of(e), 4);
        let e = read("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n").unwrap_err();
        assert_eq!(line_of(e), 3);
        let e = read("not a header\n").unwrap_err();
        assert_eq!(line_of(e), 1);
        assert!(read("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n").is_err());
    }

    proptest! {
        #[test]
        fn write_read_round_trip(entries in prop::collection::vec((0usize..8, 0usize..6, -1e6f64..1e6), 0..40)) {
            let a = SparseMatrix::from_triplets(8, 6, &entries).unwrap();
            let mut buf = Vec::new();
            write_matrix_market_to(&mut buf, &a).unwrap();
            let b = read_matrix_market_from(buf.as_slice()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
