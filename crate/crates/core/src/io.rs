//! Plain-text formats: field dumps, center lists and MatrixMarket export.
//!
//! Field dump layout:
//!
//! ```text
//! n L m0 alpha lambda seed index
//! <n rows of n characters '0'/'1'>
//! ```
//!
//! Row `r` of the grid lists the cells `(i, j = r)` for `i = 0..n`, so the dump reads
//! like the picture of the torus with `x2` increasing downwards.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::params::{EnsembleParams, DEFAULT_TOL};
use crate::sparse::SparseOperator;

pub fn write_field_dump<W: Write>(field: &CoefficientField, mut w: W) -> Result<()> {
    let p = field.params();
    let n = field.n();
    writeln!(
        w,
        "{} {} {} {} {} {} {}",
        n,
        p.l,
        p.m0,
        p.alpha,
        p.lambda,
        field.seed(),
        field.index()
    )?;
    let mut line = String::with_capacity(n);
    for j in 0..n {
        line.clear();
        line.extend((0..n).map(|i| if field.is_covered(i, j) { '1' } else { '0' }));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn next_line<R: BufRead>(lines: &mut std::io::Lines<R>, no: &mut usize) -> Result<String> {
    *no += 1;
    match lines.next() {
        Some(l) => Ok(l?),
        None => Err(Error::parse(*no, "unexpected end of input")),
    }
}

fn parse_token<T: std::str::FromStr>(tok: Option<&str>, what: &str, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(line, format!("bad {what}: {tok:?}")))
}

/// Reads a field dump; `centers` (if given) come from [`read_centers_csv`].
///
/// The dump does not store the solver tolerance, so the returned parameters carry
/// the default.
pub fn read_field_dump<R: BufRead>(r: R, centers: Vec<(usize, usize)>) -> Result<CoefficientField> {
    let mut lines = r.lines();
    let mut no = 0;
    let header = next_line(&mut lines, &mut no)?;
    let mut it = header.split_whitespace();
    let n: usize = parse_token(it.next(), "n", no)?;
    let l: usize = parse_token(it.next(), "L", no)?;
    let m0: usize = parse_token(it.next(), "m0", no)?;
    let alpha: f64 = parse_token(it.next(), "alpha", no)?;
    let lambda: f64 = parse_token(it.next(), "lambda", no)?;
    let seed: u64 = parse_token(it.next(), "seed", no)?;
    let index: u64 = parse_token(it.next(), "index", no)?;
    if it.next().is_some() {
        return Err(Error::parse(no, "trailing tokens in header"));
    }
    let params = EnsembleParams::new(l, m0, alpha, lambda, DEFAULT_TOL)?;
    if params.n() != n {
        return Err(Error::parse(1, format!("n = {n} but m0 * L = {}", params.n())));
    }
    let mut cells = vec![false; n * n];
    for j in 0..n {
        let row = next_line(&mut lines, &mut no)?;
        let row = row.trim_end();
        if row.len() != n {
            return Err(Error::parse(no, format!("expected {n} cells, found {}", row.len())));
        }
        for (i, ch) in row.chars().enumerate() {
            cells[i * n + j] = match ch {
                '0' => false,
                '1' => true,
                c => return Err(Error::parse(no, format!("invalid cell character {c:?}"))),
            };
        }
    }
    CoefficientField::from_cells(params, cells, centers, seed, index)
}

/// CSV with header `s,c1,c2` (one-based inclusion number, lattice coordinates).
pub fn write_centers_csv<W: Write>(field: &CoefficientField, mut w: W) -> Result<()> {
    writeln!(w, "s,c1,c2")?;
    for (s, (c1, c2)) in field.centers().iter().enumerate() {
        writeln!(w, "{},{},{}", s + 1, c1, c2)?;
    }
    Ok(())
}

pub fn read_centers_csv<R: BufRead>(r: R) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let no = k + 1;
        if k == 0 {
            if line.trim() != "s,c1,c2" {
                return Err(Error::parse(no, "expected header s,c1,c2"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let _: usize = parse_token(it.next(), "s", no)?;
        let c1 = parse_token(it.next(), "c1", no)?;
        let c2 = parse_token(it.next(), "c2", no)?;
        out.push((c1, c2));
    }
    Ok(out)
}

/// Symmetric coordinate MatrixMarket (lower triangle, one-based).
pub fn write_matrix_market<W: Write>(a: &SparseOperator, mut w: W) -> Result<()> {
    let lower: Vec<_> = a.triplets().filter(|&(r, c, _)| r >= c).collect();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.dim(), a.dim(), lower.len())?;
    for (r, c, v) in lower {
        writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

pub fn read_matrix_market<R: BufRead>(r: R) -> Result<SparseOperator> {
    let mut lines = r.lines();
    let mut no = 0;
    let banner = next_line(&mut lines, &mut no)?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" || words[2] != "coordinate" {
        return Err(Error::parse(no, "not a coordinate MatrixMarket file"));
    }
    if words[3] != "real" {
        return Err(Error::parse(no, format!("unsupported field {:?}", words[3])));
    }
    let symmetric = match words[4].as_str() {
        "symmetric" => true,
        "general" => false,
        s => return Err(Error::parse(no, format!("unsupported symmetry {s:?}"))),
    };
    let size = loop {
        let l = next_line(&mut lines, &mut no)?;
        if !l.starts_with('%') && !l.trim().is_empty() {
            break l;
        }
    };
    let mut it = size.split_whitespace();
    let rows: usize = parse_token(it.next(), "rows", no)?;
    let cols: usize = parse_token(it.next(), "cols", no)?;
    let nnz: usize = parse_token(it.next(), "nnz", no)?;
    if rows != cols {
        return Err(Error::parse(no, "matrix is not square"));
    }
    let mut trip = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    for _ in 0..nnz {
        let l = next_line(&mut lines, &mut no)?;
        let mut it = l.split_whitespace();
        let r: usize = parse_token(it.next(), "row", no)?;
        let c: usize = parse_token(it.next(), "col", no)?;
        let v: f64 = parse_token(it.next(), "value", no)?;
        if r == 0 || c == 0 || r > rows || c > cols {
            return Err(Error::parse(no, format!("index ({r}, {c}) out of range")));
        }
        trip.push((r - 1, c - 1, v));
        if symmetric && r != c {
            trip.push((c - 1, r - 1, v));
        }
    }
    Ok(SparseOperator::from_triplets(rows, trip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_total;
    use crate::field::sample_field;

    #[test]
    fn field_round_trip() {
        let p = EnsembleParams::new(4, 8, 0.25, 0.4, DEFAULT_TOL).unwrap();
        let f = sample_field(&p, 11, 3).unwrap();
        let mut dump = Vec::new();
        write_field_dump(&f, &mut dump).unwrap();
        let mut csv = Vec::new();
        write_centers_csv(&f, &mut csv).unwrap();
        let centers = read_centers_csv(csv.as_slice()).unwrap();
        let back = read_field_dump(dump.as_slice(), centers).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn malformed_dump_reports_line() {
        let text = "4 1 4 0.5 0.4 0 1\n1111\n11x1\n1111\n1111\n";
        match read_field_dump(text.as_bytes(), vec![]) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matrix_market_round_trip() {
        let p = EnsembleParams::new(2, 4, 0.25, 0.3, DEFAULT_TOL).unwrap();
        let f = sample_field(&p, 2, 1).unwrap();
        let a = assemble_total(&f, 0.3).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let b = read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(a, b);
    }
}
