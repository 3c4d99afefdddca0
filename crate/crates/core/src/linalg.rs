//! Small dense-vector helpers and a compressed sparse row matrix.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

/// Row-major sparse matrix. Column indices are strictly increasing within a row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(column, value)` rows. Panics if a row is not
    /// strictly increasing or references a column `>= n_cols`; callers
    /// validate user input before reaching this point.
    pub fn from_rows<R>(rows: R, n_cols: usize) -> Self
    where
        R: IntoIterator,
        R::Item: AsRef<[(usize, f64)]>,
    {
        let mut m = Self::empty(n_cols);
        for row in rows {
            m.push_row(row.as_ref());
        }
        m
    }

    pub fn push_row(&mut self, row: &[(usize, f64)]) {
        let mut prev: Option<usize> = None;
        for &(j, v) in row {
            assert!(j < self.n_cols, "column {j} out of range {}", self.n_cols);
            assert!(prev.is_none_or(|p| p < j), "row indices must increase");
            prev = Some(j);
            self.indices.push(j);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, v)| v * x[j]).sum()
    }

    /// `out += alpha * row_i`
    pub fn add_row(&self, i: usize, alpha: f64, out: &mut [f64]) {
        let (idx, val) = self.row(i);
        for (&j, v) in idx.iter().zip(val) {
            out[j] += alpha * v;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row_dot(i, x)).collect()
    }

    /// `A^T y`
    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (i, &yi) in y.iter().enumerate() {
            self.add_row(i, yi, &mut out);
        }
        out
    }

    /// Copies a contiguous block of rows.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        let mut m = Self::empty(self.n_cols);
        for i in range {
            let (idx, val) = self.row(i);
            let row: Vec<(usize, f64)> = idx.iter().copied().zip(val.iter().copied()).collect();
            m.push_row(&row);
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows())
            .map(|i| {
                let mut r = vec![0.0; self.n_cols];
                let (idx, val) = self.row(i);
                for (&j, &v) in idx.iter().zip(val) {
                    r[j] = v;
                }
                r
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_products_match_dense() {
        let m = CsrMatrix::from_rows([vec![(0, 1.0), (2, -2.0)], vec![], vec![(1, 3.0)]], 3);
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![-1.0, 0.0, 3.0]);
        assert_eq!(m.tmul_vec(&[1.0, 5.0, 2.0]), vec![1.0, 6.0, -2.0]);
        assert_eq!(
            m.slice_rows(1..3).to_dense(),
            vec![vec![0.0; 3], vec![0.0, 3.0, 0.0]]
        );
    }

    #[test]
    #[should_panic(expected = "increase")]
    fn csr_rejects_unsorted_rows() {
        CsrMatrix::from_rows([vec![(2, 1.0), (1, 1.0)]], 3);
    }
}
