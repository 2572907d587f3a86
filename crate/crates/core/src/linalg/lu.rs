use super::ordering::fill_reducing_order;
use super::sparse::CscMatrix;
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 0.001;

/// Direct solver that keeps the column ordering of the last pattern it saw.
///
/// Time stepping refactorizes matrices with an unchanged sparsity pattern
/// many times, so the ordering is computed once per pattern.
#[derive(Debug, Default, Clone)]
pub struct SparseLu {
    cached: Option<((usize, usize, u64), Vec<usize>)>,
}

impl SparseLu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factorize(&mut self, a: &CscMatrix) -> Result<LuFactors> {
        if a.nrows != a.ncols {
            return Err(Error::InvalidInput(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows, a.ncols
            )));
        }
        let key = a.pattern_key();
        let q = match &self.cached {
            Some((k, q)) if *k == key => q.clone(),
            _ => {
                let q = fill_reducing_order(a);
                self.cached = Some((key, q.clone()));
                q
            }
        };
        LuFactors::factorize(a, q)
    }

    pub fn solve(&mut self, a: &CscMatrix, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.factorize(a)?.solve(b))
    }
}

/// L U = P A Q with unit lower-triangular L.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    l: CscMatrix,
    u: CscMatrix,
    pinv: Vec<usize>,
    q: Vec<usize>,
}

impl LuFactors {
    /// Left-looking Gilbert–Peierls factorization with threshold partial
    /// pivoting that prefers the diagonal.
    pub fn factorize(a: &CscMatrix, q: Vec<usize>) -> Result<Self> {
        let n = a.ncols;
        let est = 4 * a.nnz() + n;
        let mut lp = vec![0usize; n + 1];
        let mut li: Vec<usize> = Vec::with_capacity(est);
        let mut lx: Vec<f64> = Vec::with_capacity(est);
        let mut up = vec![0usize; n + 1];
        let mut ui: Vec<usize> = Vec::with_capacity(est);
        let mut ux: Vec<f64> = Vec::with_capacity(est);
        let mut pinv = vec![usize::MAX; n];
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut marked = vec![false; n];

        for k in 0..n {
            lp[k] = li.len();
            up[k] = ui.len();
            let col = q[k];

            // reach: nodes of L-graph reachable from the pattern of A(:,col)
            let mut top = n;
            for p in a.col_ptr[col]..a.col_ptr[col + 1] {
                let j0 = a.row_idx[p];
                if marked[j0] {
                    continue;
                }
                let mut head = 0usize;
                stack[0] = j0;
                while head != usize::MAX {
                    let j = stack[head];
                    let jnew = pinv[j];
                    if !marked[j] {
                        marked[j] = true;
                        pstack[head] = if jnew == usize::MAX { 0 } else { lp[jnew] };
                    }
                    let end = if jnew == usize::MAX {
                        0
                    } else if jnew < k {
                        lp[jnew + 1]
                    } else {
                        li.len()
                    };
                    let mut done = true;
                    let mut pp = pstack[head];
                    while pp < end {
                        let i = li[pp];
                        pp += 1;
                        if marked[i] {
                            continue;
                        }
                        pstack[head] = pp;
                        head += 1;
                        stack[head] = i;
                        done = false;
                        break;
                    }
                    if done {
                        if jnew != usize::MAX {
                            pstack[head] = end;
                        }
                        head = head.wrapping_sub(1);
                        top -= 1;
                        xi[top] = j;
                    }
                }
            }
            for &j in &xi[top..n] {
                marked[j] = false;
            }

            // sparse triangular solve x = L \ A(:,col)
            for &j in &xi[top..n] {
                x[j] = 0.0;
            }
            for p in a.col_ptr[col]..a.col_ptr[col + 1] {
                x[a.row_idx[p]] = a.values[p];
            }
            for px in top..n {
                let j = xi[px];
                let jj = pinv[j];
                if jj == usize::MAX {
                    continue;
                }
                let xj = x[j];
                for p in lp[jj] + 1..lp[jj + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }

            // pivot selection
            let mut ipiv = usize::MAX;
            let mut amax = -1.0;
            for &i in &xi[top..n] {
                if pinv[i] == usize::MAX {
                    let t = x[i].abs();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == usize::MAX || !(amax > 0.0) || !amax.is_finite() {
                return Err(Error::Singular {
                    context: "sparse LU".into(),
                    column: col,
                });
            }
            if pinv[col] == usize::MAX && x[col].abs() >= amax * PIVOT_TOL {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == usize::MAX {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        lp[n] = li.len();
        up[n] = ui.len();
        for r in li.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self {
            n,
            l: CscMatrix {
                nrows: n,
                ncols: n,
                col_ptr: lp,
                row_idx: li,
                values: lx,
            },
            u: CscMatrix {
                nrows: n,
                ncols: n,
                col_ptr: up,
                row_idx: ui,
                values: ux,
            },
            pinv,
            q,
        })
    }

    pub fn fill(&self) -> usize {
        self.l.nnz() + self.u.nnz()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.pinv[k]] = b[k];
        }
        let (lp, li, lx) = (&self.l.col_ptr, &self.l.row_idx, &self.l.values);
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in lp[j] + 1..lp[j + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }
        }
        let (up, ui, ux) = (&self.u.col_ptr, &self.u.row_idx, &self.u.values);
        for j in (0..n).rev() {
            x[j] /= ux[up[j + 1] - 1];
            let xj = x[j];
            if xj != 0.0 {
                for p in up[j]..up[j + 1] - 1 {
                    x[ui[p]] -= ux[p] * xj;
                }
            }
        }
        let mut out = vec![0.0; n];
        for k in 0..n {
            out[self.q[k]] = x[k];
        }
        out
    }

    /// Solve followed by steps of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &CscMatrix, b: &[f64], steps: usize) -> Vec<f64> {
        let mut x = self.solve(b);
        for _ in 0..steps {
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let d = self.solve(&r);
            for (xi, di) in x.iter_mut().zip(d) {
                *xi += di;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, density: f64, seed: u64, saddle: bool) -> CscMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = TripletMatrix::new(n, n);
        let nv = if saddle { n * 2 / 3 } else { n };
        for i in 0..nv {
            t.push(i, i, 4.0 + rng.gen::<f64>());
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.gen::<f64>() < density {
                    if saddle && i >= nv && j >= nv {
                        continue;
                    }
                    t.push(i, j, rng.gen_range(-1.0..1.0));
                }
            }
        }
        if saddle {
            for i in nv..n {
                t.push(i, i - nv, 1.0);
                t.push(i - nv, i, 1.0);
            }
        }
        t.to_csc()
    }

    #[test]
    fn matches_dense_solve() {
        for (seed, saddle) in [(1, false), (2, false), (3, true), (4, true)] {
            let a = random_sparse(60, 0.08, seed, saddle);
            let b: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
            let x = SparseLu::new().solve(&a, &b).unwrap();
            let dense = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
            for i in 0..60 {
                assert!((x[i] - dense[i]).abs() < 1e-10, "seed {seed}: {} vs {}", x[i], dense[i]);
            }
        }
    }

    #[test]
    fn zero_diagonal_needs_pivoting() {
        let mut t = TripletMatrix::new(2, 2);
        t.push(0, 1, 2.0);
        t.push(1, 0, 3.0);
        let a = t.to_csc();
        let x = SparseLu::new().solve(&a, &[4.0, 9.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut t = TripletMatrix::new(3, 3);
        t.push(0, 0, 1.0);
        t.push(1, 1, 1.0);
        t.push(2, 0, 1.0);
        assert!(matches!(
            SparseLu::new().factorize(&t.to_csc()),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn ordering_is_reused_for_same_pattern() {
        let a = random_sparse(40, 0.1, 9, false);
        let mut lu = SparseLu::new();
        let x1 = lu.solve(&a, &vec![1.0; 40]).unwrap();
        assert!(lu.cached.is_some());
        let x2 = lu.solve(&a, &vec![1.0; 40]).unwrap();
        assert_eq!(x1, x2);
    }
}
