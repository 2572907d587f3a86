use super::sparse::CscMatrix;

/// Approximate-minimum-degree column ordering of the pattern of A + Aᵀ.
///
/// Columns without a stored nonzero diagonal (the multiplier block of a
/// saddle-point matrix) are moved behind their last neighbour, so their
/// pivots are formed from already eliminated rows instead of forcing
/// off-diagonal pivots that destroy the ordering.
pub fn fill_reducing_order(a: &CscMatrix) -> Vec<usize> {
    let n = a.ncols;
    let order = match amd::order::<usize>(n, &a.col_ptr, &a.row_idx, &amd::Control::default()) {
        Ok((p, _, _)) if p.len() == n => p,
        _ => (0..n).collect(),
    };
    let mut zero_diag = vec![true; n];
    for j in 0..n {
        for k in a.col_ptr[j]..a.col_ptr[j + 1] {
            if a.row_idx[k] == j && a.values[k] != 0.0 {
                zero_diag[j] = false;
            }
        }
    }
    if !zero_diag.iter().any(|&z| z) {
        return order;
    }
    let mut pos = vec![0usize; n];
    for (k, &j) in order.iter().enumerate() {
        pos[j] = k;
    }
    let mut key: Vec<(usize, bool)> = (0..n).map(|j| (pos[j], false)).collect();
    let mut bump = |j: usize, i: usize| {
        if zero_diag[j] && !zero_diag[i] {
            key[j] = (key[j].0.max(pos[i]), true);
        }
    };
    for j in 0..n {
        for k in a.col_ptr[j]..a.col_ptr[j + 1] {
            let i = a.row_idx[k];
            bump(j, i);
            bump(i, j);
        }
    }
    let mut out = order;
    out.sort_by_key(|&j| (key[j].0, key[j].1, pos[j]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletMatrix;

    fn is_permutation(p: &[usize]) -> bool {
        let mut seen = vec![false; p.len()];
        p.iter().all(|&i| i < p.len() && !std::mem::replace(&mut seen[i], true))
    }

    #[test]
    fn arrow_matrix_puts_hub_last() {
        let n = 30;
        let mut t = TripletMatrix::new(n, n);
        for i in 0..n {
            t.push(i, i, 4.0);
            if i > 0 {
                t.push(0, i, 1.0);
                t.push(i, 0, 1.0);
            }
        }
        let p = fill_reducing_order(&t.to_csc());
        assert!(is_permutation(&p));
        assert_eq!(*p.last().unwrap(), 0);
    }

    #[test]
    fn deterministic_on_grid_laplacian() {
        let m = 12;
        let n = m * m;
        let mut t = TripletMatrix::new(n, n);
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                t.push(k, k, 4.0);
                if i + 1 < m {
                    t.push(k, k + m, -1.0);
                    t.push(k + m, k, -1.0);
                }
                if j + 1 < m {
                    t.push(k, k + 1, -1.0);
                    t.push(k + 1, k, -1.0);
                }
            }
        }
        let a = t.to_csc();
        let p = fill_reducing_order(&a);
        assert!(is_permutation(&p));
        assert_eq!(p, fill_reducing_order(&a));
    }
}
