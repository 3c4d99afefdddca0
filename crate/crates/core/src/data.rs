//! LIBSVM text format and contiguous dataset sharding.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::linalg::CsrMatrix;
use crate::problem::{CompositeProblem, Regularizer, SmoothTerm};

#[derive(Clone, Debug, PartialEq)]
pub struct LibSvmDataset {
    pub rows: CsrMatrix,
    pub labels: Vec<f64>,
}

impl LibSvmDataset {
    pub fn n_examples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.rows.n_cols()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_label(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("bad label {tok:?}")))?;
    if v == 1.0 {
        Ok(1.0)
    } else if v == -1.0 || v == 0.0 {
        Ok(-1.0)
    } else {
        Err(parse_err(line, format!("label {tok:?} is not -1, 0 or +1")))
    }
}

/// Parses LIBSVM text. Feature indices above `feature_cap` are dropped and
/// the column count becomes the cap.
pub fn parse_libsvm<R: BufRead>(reader: R, feature_cap: Option<usize>) -> Result<LibSvmDataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(first) = tokens.next() else { continue };
        labels.push(parse_label(first, line_no)?);
        let mut row = Vec::new();
        let mut prev = 0;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("malformed token {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad index in {tok:?}")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad value in {tok:?}")))?;
            if idx == 0 {
                return Err(parse_err(line_no, "feature indices start at 1"));
            }
            if idx <= prev {
                return Err(parse_err(line_no, format!("index {idx} does not increase")));
            }
            if !val.is_finite() {
                return Err(parse_err(line_no, format!("non-finite value in {tok:?}")));
            }
            prev = idx;
            if feature_cap.is_some_and(|cap| idx > cap) {
                continue;
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
    }
    let n_cols = feature_cap.unwrap_or(max_index);
    Ok(LibSvmDataset {
        rows: CsrMatrix::from_rows(rows, n_cols),
        labels,
    })
}

pub fn parse_libsvm_str(text: &str, feature_cap: Option<usize>) -> Result<LibSvmDataset> {
    parse_libsvm(text.as_bytes(), feature_cap)
}

pub fn read_libsvm(path: &Path, feature_cap: Option<usize>) -> Result<LibSvmDataset> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open dataset {}: {e}", path.display())))?;
    parse_libsvm(BufReader::new(file), feature_cap)
}

pub fn write_libsvm<W: Write>(data: &LibSvmDataset, mut out: W) -> Result<()> {
    for (i, &label) in data.labels.iter().enumerate() {
        write!(out, "{}", if label > 0.0 { "+1" } else { "-1" })?;
        let (idx, vals) = data.rows.row(i);
        for (j, v) in idx.iter().zip(vals) {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Shard sizes for `n` rows over `m` shards; the remainder goes to the
/// earliest shards.
pub fn shard_sizes(n: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(invalid("need at least one shard"));
    }
    if m > n {
        return Err(invalid(format!("{m} shards for {n} examples")));
    }
    Ok((0..m).map(|i| n / m + usize::from(i < n % m)).collect())
}

/// Contiguous, nearly even split.
pub fn partition(data: &LibSvmDataset, m: usize) -> Result<Vec<LibSvmDataset>> {
    let mut start = 0;
    shard_sizes(data.n_examples(), m)?
        .into_iter()
        .map(|len| {
            let range = start..start + len;
            start += len;
            Ok(LibSvmDataset {
                rows: data.rows.slice_rows(range.clone()),
                labels: data.labels[range].to_vec(),
            })
        })
        .collect()
}

/// One logistic-with-ridge term per shard plus an optional l1 penalty.
pub fn logistic_problem(
    data: &LibSvmDataset,
    m: usize,
    lambda1: f64,
    lambda2: f64,
) -> Result<CompositeProblem> {
    let terms = partition(data, m)?
        .into_iter()
        .map(|s| SmoothTerm::logistic(s.rows, s.labels, lambda2))
        .collect::<Result<Vec<_>>>()?;
    let reg = if lambda1 > 0.0 {
        Regularizer::l1(lambda1)?
    } else if lambda1 == 0.0 {
        Regularizer::Zero
    } else {
        return Err(invalid(format!(
            "lambda1 must be nonnegative, got {lambda1}"
        )));
    };
    CompositeProblem::new(terms, reg)
}
