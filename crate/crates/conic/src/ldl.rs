//! Sparse LDLᵀ for symmetric quasi-definite matrices.
//!
//! The KKT matrices of the interior-point method are quasi-definite after
//! static regularization, so a factorization exists for every symmetric
//! permutation and no numerical pivoting is needed. The ordering is a plain
//! minimum-degree elimination, which also yields the pattern of `L`.

use std::collections::BTreeSet;

/// Pattern and ordering, computed once per program.
#[derive(Debug, Clone)]
pub(crate) struct Symbolic {
    n: usize,
    /// `perm[k]` = original index of the k-th pivot.
    perm: Vec<usize>,
    /// Permuted lower-triangular input: column pointers, rows, and the index
    /// of the input entry feeding each slot.
    k_ptr: Vec<usize>,
    k_row: Vec<usize>,
    k_src: Vec<usize>,
    /// Strictly-lower pattern of `L` by column.
    l_ptr: Vec<usize>,
    l_row: Vec<usize>,
    /// For each row `j`: the `(column, slot)` pairs with `L[j, col] ≠ 0`.
    r_ptr: Vec<usize>,
    r_col: Vec<usize>,
    r_pos: Vec<usize>,
    /// Expected sign of each pivot, permuted.
    signs: Vec<f64>,
}

/// Numeric factor `P K Pᵀ = L D Lᵀ`.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    l: Vec<f64>,
    d: Vec<f64>,
    work: Vec<f64>,
    /// Pivots replaced by dynamic regularization in the last factorization.
    pub bumped: usize,
}

impl Symbolic {
    /// `entries` lists the upper-triangle coordinates `(i, j)`, `i ≤ j`, in
    /// original numbering; every diagonal must be present. `signs[i]` is the
    /// sign the i-th pivot must have (+1 primal block, −1 dual block).
    pub fn new(n: usize, entries: &[(usize, usize)], signs: &[f64]) -> Self {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(i, j) in entries {
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }

        // Minimum-degree elimination; ties go to the lowest index.
        let mut eliminated = vec![false; n];
        let mut perm = Vec::with_capacity(n);
        let mut patterns: Vec<Vec<usize>> = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..n)
                .filter(|&v| !eliminated[v])
                .min_by_key(|&v| (adj[v].len(), v))
                .expect("node left");
            eliminated[v] = true;
            let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
            for &a in &nbrs {
                adj[a].remove(&v);
                for &b in &nbrs {
                    if b != a {
                        adj[a].insert(b);
                    }
                }
            }
            perm.push(v);
            patterns.push(nbrs);
        }
        let mut iperm = vec![0; n];
        for (k, &v) in perm.iter().enumerate() {
            iperm[v] = k;
        }

        let mut l_ptr = Vec::with_capacity(n + 1);
        let mut l_row = Vec::new();
        l_ptr.push(0);
        for pat in &patterns {
            let mut rows: Vec<usize> = pat.iter().map(|&v| iperm[v]).collect();
            rows.sort_unstable();
            l_row.extend(rows);
            l_ptr.push(l_row.len());
        }

        let mut row_lists: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for col in 0..n {
            for pos in l_ptr[col]..l_ptr[col + 1] {
                row_lists[l_row[pos]].push((col, pos));
            }
        }
        let mut r_ptr = Vec::with_capacity(n + 1);
        let mut r_col = Vec::new();
        let mut r_pos = Vec::new();
        r_ptr.push(0);
        for list in &row_lists {
            for &(c, p) in list {
                r_col.push(c);
                r_pos.push(p);
            }
            r_ptr.push(r_col.len());
        }

        let mut by_col: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (src, &(i, j)) in entries.iter().enumerate() {
            let (pi, pj) = (iperm[i], iperm[j]);
            let (col, row) = if pi <= pj { (pi, pj) } else { (pj, pi) };
            by_col[col].push((row, src));
        }
        let mut k_ptr = Vec::with_capacity(n + 1);
        let mut k_row = Vec::new();
        let mut k_src = Vec::new();
        k_ptr.push(0);
        for list in &by_col {
            for &(r, s) in list {
                k_row.push(r);
                k_src.push(s);
            }
            k_ptr.push(k_row.len());
        }

        let signs = perm.iter().map(|&v| signs[v]).collect();
        Self {
            n,
            perm,
            k_ptr,
            k_row,
            k_src,
            l_ptr,
            l_row,
            r_ptr,
            r_col,
            r_pos,
            signs,
        }
    }

    #[cfg(test)]
    pub fn nnz_l(&self) -> usize {
        self.l_row.len()
    }

    /// Factors the matrix whose upper-triangle entries (same order as given to
    /// [`Symbolic::new`]) have values `vals`. Pivots with the wrong sign or
    /// magnitude below `eps` are replaced by `±delta`.
    pub fn factor(&self, vals: &[f64], eps: f64, delta: f64, f: &mut Factor) {
        let n = self.n;
        f.l.resize(self.l_row.len(), 0.0);
        f.d.resize(n, 0.0);
        f.work.clear();
        f.work.resize(n, 0.0);
        f.bumped = 0;
        let w = &mut f.work;
        for j in 0..n {
            for e in self.k_ptr[j]..self.k_ptr[j + 1] {
                w[self.k_row[e]] += vals[self.k_src[e]];
            }
            for r in self.r_ptr[j]..self.r_ptr[j + 1] {
                let (k, pos) = (self.r_col[r], self.r_pos[r]);
                let scale = f.l[pos] * f.d[k];
                for p in pos..self.l_ptr[k + 1] {
                    w[self.l_row[p]] -= f.l[p] * scale;
                }
            }
            let mut dj = w[j];
            w[j] = 0.0;
            if self.signs[j] * dj <= eps {
                dj = self.signs[j] * delta;
                f.bumped += 1;
            }
            f.d[j] = dj;
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                let r = self.l_row[p];
                f.l[p] = w[r] / dj;
                w[r] = 0.0;
            }
        }
    }

    /// Solves `K x = b` in place using the factor.
    pub fn solve(&self, f: &Factor, b: &mut [f64]) {
        let n = self.n;
        let y = &mut vec![0.0; n];
        for k in 0..n {
            y[k] = b[self.perm[k]];
        }
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                    y[self.l_row[p]] -= f.l[p] * yj;
                }
            }
        }
        for j in 0..n {
            y[j] /= f.d[j];
        }
        for j in (0..n).rev() {
            let mut acc = y[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                acc -= f.l[p] * y[self.l_row[p]];
            }
            y[j] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = y[k];
        }
    }
}

impl Factor {
    pub fn new() -> Self {
        Self {
            l: Vec::new(),
            d: Vec::new(),
            work: Vec::new(),
            bumped: 0,
        }
    }
}

/// `y = K x` for a symmetric matrix given by its upper-triangle entries.
pub(crate) fn sym_matvec(entries: &[(usize, usize)], vals: &[f64], x: &[f64], y: &mut [f64]) {
    y.fill(0.0);
    for (&(i, j), &v) in entries.iter().zip(vals) {
        y[i] += v * x[j];
        if i != j {
            y[j] += v * x[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_quasi_definite_system() {
        // [[4, 1, 2], [1, 3, 0], [2, 0, -5]] with the last pivot negative.
        let entries = vec![(0, 0), (1, 1), (2, 2), (0, 1), (0, 2)];
        let vals = vec![4.0, 3.0, -5.0, 1.0, 2.0];
        let sym = Symbolic::new(3, &entries, &[1.0, 1.0, -1.0]);
        let mut f = Factor::new();
        sym.factor(&vals, 1e-13, 1e-7, &mut f);
        assert_eq!(f.bumped, 0);
        let x = [1.0, -2.0, 0.5];
        let mut b = vec![0.0; 3];
        sym_matvec(&entries, &vals, &x, &mut b);
        sym.solve(&f, &mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn arrow_matrix_has_no_fill_under_min_degree() {
        // Hub node 0 connected to all others: eliminating leaves first keeps
        // L as sparse as K.
        let n = 8;
        let mut entries: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        for j in 1..n {
            entries.push((0, j));
        }
        let sym = Symbolic::new(n, &entries, &vec![1.0; n]);
        assert_eq!(sym.nnz_l(), n - 1);
    }
}
