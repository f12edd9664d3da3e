//! Matrix CSV: a `rows,cols` header line followed by one comma-separated line
//! per row.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{LvggmError, Result};
use crate::Matrix;

/// `{:.16e}` keeps 17 significant digits, enough to round-trip any finite double.
pub fn format_matrix(m: &Matrix) -> String {
    let mut out = format!("{},{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", m[(i, j)]).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<Matrix> {
    let err = |line: usize, message: String| LvggmError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file, expected a `rows,cols` header".into()))?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    let parse_dim = |s: &str| s.parse::<usize>().ok();
    let (rows, cols) = match dims.as_slice() {
        [r, c] => match (parse_dim(r), parse_dim(c)) {
            (Some(r), Some(c)) => (r, c),
            _ => return Err(err(1, format!("malformed header `{header}`, expected `rows,cols`"))),
        },
        _ => return Err(err(1, format!("malformed header `{header}`, expected `rows,cols`"))),
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        if seen == rows {
            return Err(err(lineno, format!("more than the {rows} rows declared in the header")));
        }
        let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
        if tokens.len() != cols {
            return Err(err(lineno, format!("expected {cols} values, found {}", tokens.len())));
        }
        for t in tokens {
            let v: f64 = t
                .parse()
                .map_err(|_| err(lineno, format!("`{t}` is not a number")))?;
            data.push(v);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(err(text.lines().count() + 1, format!("expected {rows} rows, found {seen}")));
    }
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(&std::fs::read_to_string(path)?, path)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    super::write_atomic(path, format_matrix(m).as_bytes())
}
