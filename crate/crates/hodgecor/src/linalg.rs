//! Dense exact linear algebra over a generic scalar field.
//!
//! Sizes here are small (graded slices of weight-capped spaces), so plain
//! fraction-free-ish Gaussian elimination over exact scalars is enough.

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c));
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out: Mat<S> = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)].clone();
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other[(k, j)].clone();
                    if !b.is_zero() {
                        let cur = out[(i, j)].clone();
                        out[(i, j)] = cur + a.clone() * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = S::zero();
                for j in 0..self.cols {
                    if !self[(i, j)].is_zero() && !v[j].is_zero() {
                        acc = acc + self[(i, j)].clone() * v[j].clone();
                    }
                }
                acc
            })
            .collect()
    }

    /// Row echelon form; returns (reduced matrix, pivot columns).
    /// The reduction is in-place Gauss-Jordan with exact division.
    pub fn rref(&self) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&r| !m[(r, col)].is_zero()) else {
                continue;
            };
            m.swap_rows(row, p);
            let inv = S::one() / m[(row, col)].clone();
            for j in col..m.cols {
                m[(row, j)] = m[(row, j)].clone() * inv.clone();
            }
            for r in 0..m.rows {
                if r != row && !m[(r, col)].is_zero() {
                    let f = m[(r, col)].clone();
                    for j in col..m.cols {
                        let sub = f.clone() * m[(row, j)].clone();
                        m[(r, j)] = m[(r, j)].clone() - sub;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right kernel, one vector per free column.
    pub fn kernel_basis(&self) -> Vec<Vec<S>> {
        let (r, pivots) = self.rref();
        let pivot_set: Vec<Option<usize>> = {
            let mut v = vec![None; self.cols];
            for (i, &c) in pivots.iter().enumerate() {
                v[c] = Some(i);
            }
            v
        };
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivot_set[free].is_some() {
                continue;
            }
            let mut vec = vec![S::zero(); self.cols];
            vec[free] = S::one();
            for (col, &p) in pivot_set.iter().enumerate() {
                if let Some(pi) = p {
                    vec[col] = S::zero() - r[(pi, free)].clone();
                }
            }
            basis.push(vec);
        }
        basis
    }

    /// Solves self * x = b exactly. Returns None when inconsistent;
    /// free variables are set to zero.
    pub fn solve(&self, b: &[S]) -> Option<Vec<S>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = Mat::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, self.cols)] = b[i].clone();
        }
        let (r, pivots) = aug.rref();
        if pivots.contains(&self.cols) {
            return None;
        }
        let mut x = vec![S::zero(); self.cols];
        for (i, &c) in pivots.iter().enumerate() {
            x[c] = r[(i, self.cols)].clone();
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = Mat::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = S::one();
        }
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let mut inv = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = r[(i, n + j)].clone();
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

/// Incrementally maintained row space in reduced echelon form, for rank
/// filtering without re-running full eliminations.
pub struct IncrementalSpan<S> {
    /// (pivot column, reduced row) pairs
    rows: Vec<(usize, Vec<S>)>,
    pub dim_ambient: usize,
}

impl<S: Scalar> IncrementalSpan<S> {
    pub fn new(dim_ambient: usize) -> Self {
        IncrementalSpan { rows: Vec::new(), dim_ambient }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, v: &mut [S]) {
        for (pivot, row) in &self.rows {
            let c = v[*pivot].clone();
            if !c.is_zero() {
                for j in 0..v.len() {
                    let sub = c.clone() * row[j].clone();
                    v[j] = v[j].clone() - sub;
                }
            }
        }
    }

    /// Adds the vector to the span; returns true when it was independent.
    pub fn insert(&mut self, v: &[S]) -> bool {
        assert_eq!(v.len(), self.dim_ambient);
        let mut v = v.to_vec();
        self.reduce(&mut v);
        let Some(pivot) = v.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = S::one() / v[pivot].clone();
        for x in v.iter_mut() {
            *x = x.clone() * inv.clone();
        }
        // keep existing rows reduced against the new pivot
        for (_, row) in self.rows.iter_mut() {
            let c = row[pivot].clone();
            if !c.is_zero() {
                for j in 0..row.len() {
                    let sub = c.clone() * v[j].clone();
                    row[j] = row[j].clone() - sub;
                }
            }
        }
        self.rows.push((pivot, v));
        true
    }

    pub fn contains(&self, v: &[S]) -> bool {
        let mut v = v.to_vec();
        self.reduce(&mut v);
        v.iter().all(|x| x.is_zero())
    }
}

impl<S> std::ops::Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}
