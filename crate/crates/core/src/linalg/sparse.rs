/// Coordinate-format accumulator.
#[derive(Debug, Clone)]
pub struct TripletMatrix {
    pub nrows: usize,
    pub ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self::with_capacity(nrows, ncols, 0)
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.rows.push(i);
        self.cols.push(j);
        self.vals.push(v);
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Compresses to CSC. Duplicates are summed in insertion order and rows
    /// are sorted within each column.
    pub fn to_csc(&self) -> CscMatrix {
        let n = self.ncols;
        let mut count = vec![0usize; n + 1];
        for &j in &self.cols {
            count[j + 1] += 1;
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        // stable bucket by column
        let mut next = count.clone();
        let nnz = self.vals.len();
        let mut bi = vec![0usize; nnz];
        let mut bv = vec![0.0; nnz];
        for k in 0..nnz {
            let j = self.cols[k];
            let dst = next[j];
            bi[dst] = self.rows[k];
            bv[dst] = self.vals[k];
            next[j] += 1;
        }
        // per column: stable sort by row then merge duplicates
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        col_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            scratch.clear();
            scratch.extend((count[j]..count[j + 1]).map(|p| (bi[p], bv[p])));
            scratch.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(i, v) in &scratch {
                if i == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                    last = i;
                }
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix {
            nrows: self.nrows,
            ncols: n,
            col_ptr,
            row_idx,
            values,
        }
    }
}

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * xj;
            }
        }
        y
    }

    /// y = Aᵀ x
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.ncols)
            .map(|j| {
                (self.col_ptr[j]..self.col_ptr[j + 1])
                    .map(|p| self.values[p] * x[self.row_idx[p]])
                    .sum()
            })
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let rows = &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]];
        match rows.binary_search(&i) {
            Ok(k) => self.values[self.col_ptr[j] + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut t = TripletMatrix::with_capacity(self.ncols, self.nrows, self.nnz());
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                t.push(j, self.row_idx[p], self.values[p]);
            }
        }
        t.to_csc()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[(self.row_idx[p], j)] += self.values[p];
            }
        }
        d
    }

    /// Principal submatrix on the rows and columns listed in `idx`.
    pub fn principal(&self, idx: &[usize]) -> CscMatrix {
        let mut new_of = vec![usize::MAX; self.nrows];
        for (k, &i) in idx.iter().enumerate() {
            new_of[i] = k;
        }
        let mut t = TripletMatrix::with_capacity(idx.len(), idx.len(), self.nnz());
        for (kj, &j) in idx.iter().enumerate() {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let ki = new_of[self.row_idx[p]];
                if ki != usize::MAX {
                    t.push(ki, kj, self.values[p]);
                }
            }
        }
        t.to_csc()
    }

    /// Structural fingerprint used to cache orderings.
    pub fn pattern_key(&self) -> (usize, usize, u64) {
        let mut h: u64 = 0xcbf29ce484222325;
        for &x in self.col_ptr.iter().chain(self.row_idx.iter()) {
            h ^= x as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        (self.ncols, self.nnz(), h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletMatrix::new(2, 2);
        t.push(1, 0, 1.0);
        t.push(0, 0, 2.0);
        t.push(1, 0, 3.0);
        t.push(0, 1, -1.0);
        let a = t.to_csc();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.row_idx[..2], [0, 1]);
    }

    #[test]
    fn products_match_dense() {
        let mut t = TripletMatrix::new(3, 2);
        t.push(0, 0, 1.0);
        t.push(2, 0, 2.0);
        t.push(1, 1, 3.0);
        t.push(2, 1, -4.0);
        let a = t.to_csc();
        let d = a.to_dense();
        let x = [0.5, -2.0];
        let y = a.mul_vec(&x);
        let yd = &d * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((y[i] - yd[i]).abs() < 1e-15);
        }
        let z = a.mul_transpose_vec(&[1.0, 2.0, 3.0]);
        assert_eq!(z, vec![7.0, -6.0]);
        assert_eq!(a.transpose().to_dense(), d.transpose());
    }
}
