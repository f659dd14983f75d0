//! Matrix Market exchange files and plain spectrum files.
//!
//! Reads the array and coordinate variants (real or integer, general or
//! symmetric); comment lines start with '%'. Writes dense matrices in array
//! format. Spectrum files hold one nonnegative, nonincreasing value per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dense::Mat;
use crate::error::{Error, Result};

#[derive(PartialEq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_header(line: &str) -> Result<(Layout, Symmetry)> {
    let lower = line.to_ascii_lowercase();
    let fields: Vec<&str> = lower.split_whitespace().collect();
    if fields.len() < 4 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::Format(format!("bad MatrixMarket header: {line}")));
    }
    let layout = match fields[2] {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(Error::Format(format!("unsupported layout {other}"))),
    };
    match fields[3] {
        "real" | "integer" => {}
        other => return Err(Error::Format(format!("unsupported field type {other}"))),
    }
    let symmetry = match fields.get(4).copied().unwrap_or("general") {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(Error::Format(format!("unsupported symmetry {other}"))),
    };
    Ok((layout, symmetry))
}

/// Read a dense matrix from a Matrix Market file.
pub fn read_dense(path: impl AsRef<Path>) -> Result<Mat> {
    read_dense_from(BufReader::new(File::open(path)?))
}

pub fn read_dense_from(reader: impl BufRead) -> Result<Mat> {
    let mut lines = reader.lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break line;
            }
            None => return Err(Error::Format("empty MatrixMarket file".into())),
        }
    };
    let (layout, symmetry) = parse_header(&header)?;

    let mut tokens: Vec<f64> = Vec::new();
    let mut size_line: Option<Vec<usize>> = None;
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        if size_line.is_none() {
            let dims: std::result::Result<Vec<usize>, _> =
                t.split_whitespace().map(|x| x.parse::<usize>()).collect();
            let dims = dims.map_err(|_| Error::Format(format!("bad size line: {t}")))?;
            size_line = Some(dims);
            continue;
        }
        for tok in t.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Format(format!("bad numeric token: {tok}")))?;
            tokens.push(v);
        }
    }
    let dims = size_line.ok_or_else(|| Error::Format("missing size line".into()))?;

    let m = match layout {
        Layout::Array => {
            if dims.len() != 2 {
                return Err(Error::Format("array size line must be 'rows cols'".into()));
            }
            let (rows, cols) = (dims[0], dims[1]);
            if tokens.len() != rows * cols {
                return Err(Error::Format(format!(
                    "array file has {} entries, expected {}",
                    tokens.len(),
                    rows * cols
                )));
            }
            // Array entries are column-major.
            let mut m = Mat::zeros(rows, cols);
            for (k, v) in tokens.iter().enumerate() {
                m[(k % rows, k / rows)] = *v;
            }
            if symmetry == Symmetry::Symmetric {
                for i in 0..rows {
                    for j in 0..i {
                        m[(j, i)] = m[(i, j)];
                    }
                }
            }
            m
        }
        Layout::Coordinate => {
            if dims.len() != 3 {
                return Err(Error::Format("coordinate size line must be 'rows cols nnz'".into()));
            }
            let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
            if tokens.len() != nnz * 3 {
                return Err(Error::Format(format!(
                    "coordinate file has {} tokens, expected {}",
                    tokens.len(),
                    nnz * 3
                )));
            }
            let mut m = Mat::zeros(rows, cols);
            for e in 0..nnz {
                let i = tokens[3 * e] as usize;
                let j = tokens[3 * e + 1] as usize;
                let v = tokens[3 * e + 2];
                if i < 1 || i > rows || j < 1 || j > cols {
                    return Err(Error::Format(format!("entry ({i}, {j}) out of bounds")));
                }
                m[(i - 1, j - 1)] += v;
                if symmetry == Symmetry::Symmetric && i != j {
                    m[(j - 1, i - 1)] += v;
                }
            }
            m
        }
    };
    crate::dense::ensure_finite(&m, "MatrixMarket data")?;
    Ok(m)
}

/// Write a dense matrix in Matrix Market array format.
pub fn write_dense(path: impl AsRef<Path>, m: &Mat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dense_to(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn write_dense_to(w: &mut impl Write, m: &Mat) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            writeln!(w, "{:e}", m[(i, j)])?;
        }
    }
    Ok(())
}

/// Read a spectrum file: one nonnegative decimal per line, nonincreasing.
pub fn read_spectrum(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_spectrum_from(BufReader::new(File::open(path)?))
}

pub fn read_spectrum_from(reader: impl BufRead) -> Result<Vec<f64>> {
    let mut vals = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Format(format!("bad spectrum value: {t}")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Format(format!("spectrum value must be finite and >= 0, got {t}")));
        }
        if let Some(&prev) = vals.last() {
            if v > prev {
                return Err(Error::Format(format!(
                    "spectrum must be nonincreasing, got {v} after {prev}"
                )));
            }
        }
        vals.push(v);
    }
    if vals.is_empty() {
        return Err(Error::Format("empty spectrum file".into()));
    }
    Ok(vals)
}

pub fn write_spectrum(path: impl AsRef<Path>, vals: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in vals {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}
