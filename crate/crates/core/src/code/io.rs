//! Parity-check matrix interchange: alist and dense text.
//!
//! Dense text is a header line `n k` followed by one row per line of
//! space-separated bits. alist is the usual sparse format: `n m`, the maximum
//! column and row weights, the per-column and per-row weights, then the
//! 1-based row indices of each column and column indices of each row, padded
//! with zeros.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::matrix::BitMatrix;
use super::word::Word;
use super::Code;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Alist,
    DenseText,
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alist" => Ok(MatrixFormat::Alist),
            "dense" | "dense-text" => Ok(MatrixFormat::DenseText),
            other => Err(Error::InvalidArgument(format!("unknown matrix format {other:?}"))),
        }
    }
}

/// Reads a parity-check matrix and builds the code. `d_min` must be given
/// when k exceeds the enumeration limit.
pub fn load_parity_matrix<R: BufRead>(
    source: R,
    format: MatrixFormat,
    d_min: Option<usize>,
) -> Result<Code> {
    let lines = numbered_lines(source)?;
    let h = match format {
        MatrixFormat::Alist => parse_alist(&lines)?,
        MatrixFormat::DenseText => parse_dense(&lines)?.1,
    };
    Code::from_parity_check(h, d_min)
}

/// Writes `rows` in dense-text form with header `n k`.
pub fn save_dense<W: Write>(mut out: W, n: usize, k: usize, rows: &BitMatrix) -> Result<()> {
    writeln!(out, "{n} {k}")?;
    for row in rows.rows() {
        let bits: Vec<&str> = row.iter().map(|b| if b { "1" } else { "0" }).collect();
        writeln!(out, "{}", bits.join(" "))?;
    }
    Ok(())
}

pub fn save_alist<W: Write>(mut out: W, h: &BitMatrix) -> Result<()> {
    let (m, n) = (h.n_rows(), h.n_cols());
    let cols: Vec<Vec<usize>> = (0..n)
        .map(|c| (0..m).filter(|&r| h.get(r, c)).collect())
        .collect();
    let rows: Vec<Vec<usize>> = h.rows().iter().map(|r| r.ones().collect()).collect();
    let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = rows.iter().map(Vec::len).max().unwrap_or(0);
    writeln!(out, "{n} {m}")?;
    writeln!(out, "{max_col} {max_row}")?;
    writeln!(out, "{}", join(cols.iter().map(Vec::len)))?;
    writeln!(out, "{}", join(rows.iter().map(Vec::len)))?;
    for list in &cols {
        let padded = list.iter().map(|&r| r + 1).chain(std::iter::repeat(0));
        writeln!(out, "{}", join(padded.take(max_col)))?;
    }
    for list in &rows {
        let padded = list.iter().map(|&c| c + 1).chain(std::iter::repeat(0));
        writeln!(out, "{}", join(padded.take(max_row)))?;
    }
    Ok(())
}

fn join(it: impl Iterator<Item = usize>) -> String {
    it.map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn numbered_lines<R: BufRead>(source: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            out.push((i + 1, trimmed.to_string()));
        }
    }
    Ok(out)
}

fn parse_ints(line: usize, text: &str) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<usize>().map_err(|_| Error::Parse {
                line,
                msg: format!("expected a nonnegative integer, found {t:?}"),
            })
        })
        .collect()
}

fn take_line<'a>(lines: &'a [(usize, String)], idx: usize, what: &str) -> Result<&'a (usize, String)> {
    lines.get(idx).ok_or_else(|| Error::Parse {
        line: lines.last().map_or(0, |l| l.0),
        msg: format!("unexpected end of file while reading {what}"),
    })
}

fn parse_dense(lines: &[(usize, String)]) -> Result<(usize, BitMatrix)> {
    let (ln, header) = take_line(lines, 0, "header")?;
    let dims = parse_ints(*ln, header)?;
    let [n, k] = dims[..] else {
        return Err(Error::Parse {
            line: *ln,
            msg: "header must be \"n k\"".into(),
        });
    };
    if k >= n {
        return Err(Error::Parse {
            line: *ln,
            msg: format!("k={k} must be smaller than n={n}"),
        });
    }
    let expected_rows = n - k;
    let mut rows = Vec::with_capacity(expected_rows);
    for i in 0..expected_rows {
        let (ln, text) = take_line(lines, 1 + i, "matrix rows")?;
        let bits = parse_ints(*ln, text)?;
        if bits.len() != n || bits.iter().any(|&b| b > 1) {
            return Err(Error::Parse {
                line: *ln,
                msg: format!("expected {n} bits in {{0,1}}, found {} entries", bits.len()),
            });
        }
        rows.push(bits.iter().map(|&b| b as u8).collect::<Vec<u8>>());
    }
    if let Some((ln, _)) = lines.get(1 + expected_rows) {
        return Err(Error::Parse {
            line: *ln,
            msg: format!("more than n-k={expected_rows} rows"),
        });
    }
    Ok((k, BitMatrix::from_bits(&rows)?))
}

fn parse_alist(lines: &[(usize, String)]) -> Result<BitMatrix> {
    let header = |idx: usize, what: &str, len: usize| -> Result<(usize, Vec<usize>)> {
        let (ln, text) = take_line(lines, idx, what)?;
        let v = parse_ints(*ln, text)?;
        if v.len() != len {
            return Err(Error::Parse {
                line: *ln,
                msg: format!("{what}: expected {len} values, found {}", v.len()),
            });
        }
        Ok((*ln, v))
    };
    let (ln, dims) = header(0, "dimensions", 2)?;
    let (n, m) = (dims[0], dims[1]);
    if n == 0 || m == 0 {
        return Err(Error::Parse {
            line: ln,
            msg: "empty matrix".into(),
        });
    }
    let (ln_max, maxes) = header(1, "maximum weights", 2)?;
    let (_, col_w) = header(2, "column weights", n)?;
    let (_, row_w) = header(3, "row weights", m)?;
    if col_w.iter().max() != Some(&maxes[0]) || row_w.iter().max() != Some(&maxes[1]) {
        return Err(Error::Parse {
            line: ln_max,
            msg: "maximum weights disagree with the weight lists".into(),
        });
    }
    let mut h = BitMatrix::zeros(m, n);
    for c in 0..n {
        let (ln, text) = take_line(lines, 4 + c, "column lists")?;
        let idx = nonzero_indices(*ln, text, m, col_w[c])?;
        for r in idx {
            h.set(r, c, true);
        }
    }
    for r in 0..m {
        let (ln, text) = take_line(lines, 4 + n + r, "row lists")?;
        let idx = nonzero_indices(*ln, text, n, row_w[r])?;
        let row = Word::from_bools((0..n).map(|c| idx.contains(&c)));
        if &row != h.row(r) {
            return Err(Error::Parse {
                line: *ln,
                msg: format!("row {} list disagrees with the column lists", r + 1),
            });
        }
    }
    Ok(h)
}

fn nonzero_indices(line: usize, text: &str, bound: usize, weight: usize) -> Result<Vec<usize>> {
    let idx: Vec<usize> = parse_ints(line, text)?
        .into_iter()
        .filter(|&v| v != 0)
        .map(|v| v - 1)
        .collect();
    if idx.len() != weight {
        return Err(Error::Parse {
            line,
            msg: format!("expected {weight} entries, found {}", idx.len()),
        });
    }
    if let Some(&bad) = idx.iter().find(|&&v| v >= bound) {
        return Err(Error::Parse {
            line,
            msg: format!("index {} out of range 1..={bound}", bad + 1),
        });
    }
    Ok(idx)
}
