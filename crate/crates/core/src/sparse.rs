//! Compressed-row symmetric matrices and the two SPD solvers used by the
//! scheme: a banded Cholesky factorization for narrow bands and an
//! incomplete-Cholesky preconditioned conjugate gradient for everything else.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Symmetric matrix in compressed-row form. Both triangles are stored and
/// column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    /// The caller is responsible for passing a symmetric set.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            entries[cursor[i]] = (j, v);
            cursor[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for i in 0..n {
            let row = &mut entries[counts[i]..counts[i + 1]];
            row.sort_unstable_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                if cols.len() > row_ptr[i] && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    /// Zero matrix with a given sorted column pattern per row.
    pub fn from_pattern(pattern: Vec<Vec<usize>>) -> Self {
        let n = pattern.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in pattern {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
            cols.extend(row);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self { n, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        let trips: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &trips)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    /// Number of structurally stored entries in row `i` whose value is nonzero.
    pub fn row_nonzeros(&self, i: usize) -> usize {
        self.row(i).1.iter().filter(|v| **v != 0.0).count()
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|p| self.row_ptr[i] + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.vals[p])
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    /// Adds `v` to the stored entry `(i, j)`. Panics if it is not in the pattern.
    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let p = self.position(i, j).expect("entry outside sparsity pattern");
        self.vals[p] += v;
    }

    /// Adds `vals[q]` at `(i, cols[q])`; `cols` must be increasing and inside
    /// the pattern. One pass over the row instead of a search per entry.
    pub(crate) fn add_row_sorted(&mut self, i: usize, cols: &[usize], vals: &[f64]) {
        let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let mut p = start;
        for (&j, &v) in cols.iter().zip(vals) {
            while p < end && self.cols[p] < j {
                p += 1;
            }
            assert!(p < end && self.cols[p] == j, "entry outside sparsity pattern");
            self.vals[p] += v;
        }
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.cols == other.cols
    }

    /// `self + alpha * other` for two matrices sharing one pattern.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        assert!(self.same_pattern(other), "patterns differ");
        let mut out = self.clone();
        for (a, b) in out.vals.iter_mut().zip(&other.vals) {
            *a += alpha * b;
        }
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        self.vals.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `y = |A| |x|` entrywise; bounds the round-off of [`Self::matvec_into`].
    pub fn abs_matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| (v * x[j]).abs()).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        math::dot(x, &self.matvec(x))
    }

    /// Half bandwidth: `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).0.iter().map(move |&j| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(1e-300))
        })
    }

    /// Row-major dense copy; intended for small matrices in checks and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[i * self.n + j] = v;
            }
        }
        d
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }
}

/// Dense-band Cholesky factor `A = L Lᵀ` of an SPD matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// row `i` holds `L[i][i-bw ..= i]`
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &SparseSymMatrix) -> Result<Self> {
        let n = a.dim();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    band[i * w + (j + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = band[i * w + (j + bw - i)];
                for k in k0..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i });
                    }
                    band[i * w + bw] = math::sqrt(s);
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = x[i];
            for j in j0..i {
                s -= self.band[i * w + (j + bw - i)] * x[j];
            }
            x[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            x[i] /= self.band[i * w + bw];
            let xi = x[i];
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                x[j] -= self.band[i * w + (j + bw - i)] * xi;
            }
        }
    }
}

/// Zero-fill incomplete Cholesky factor on the lower-triangular pattern.
#[derive(Debug, Clone)]
struct IncompleteCholesky {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl IncompleteCholesky {
    fn factor(a: &SparseSymMatrix) -> Self {
        let n = a.dim();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut diag_a = vec![0.0; n];
        row_ptr.push(0);
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j <= i {
                    cols.push(j);
                }
                if j == i {
                    diag_a[i] = x;
                }
            }
            row_ptr.push(cols.len());
        }
        // Shift the diagonal until the factorization succeeds.
        let mut shift = 0.0;
        loop {
            let mut vals = vec![0.0; cols.len()];
            let mut ok = true;
            'rows: for i in 0..n {
                let (start, end) = (row_ptr[i], row_ptr[i + 1]);
                for p in start..end {
                    let k = cols[p];
                    let mut s = a.get(i, k);
                    if k == i {
                        s += shift * diag_a[i];
                    }
                    // sparse dot of rows i and k over columns < k
                    let (mut pi, mut pk) = (start, row_ptr[k]);
                    let (ei, ek) = (p, row_ptr[k + 1]);
                    while pi < ei && pk < ek {
                        let (ci, ck) = (cols[pi], cols[pk]);
                        if ck >= k {
                            break;
                        }
                        if ci == ck {
                            s -= vals[pi] * vals[pk];
                            pi += 1;
                            pk += 1;
                        } else if ci < ck {
                            pi += 1;
                        } else {
                            pk += 1;
                        }
                    }
                    if k == i {
                        if !(s > 0.0) {
                            ok = false;
                            break 'rows;
                        }
                        vals[p] = math::sqrt(s);
                    } else {
                        vals[p] = s / vals[row_ptr[k + 1] - 1];
                    }
                }
            }
            if ok {
                return Self { n, row_ptr, cols, vals };
            }
            shift = if shift == 0.0 { 1e-3 } else { shift * 4.0 };
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        for i in 0..self.n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = z[i];
            for p in s..e - 1 {
                acc -= self.vals[p] * z[self.cols[p]];
            }
            z[i] = acc / self.vals[e - 1];
        }
        for i in (0..self.n).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            z[i] /= self.vals[e - 1];
            let zi = z[i];
            for p in s..e - 1 {
                z[self.cols[p]] -= self.vals[p] * zi;
            }
        }
    }
}

/// Preconditioned CG on a fixed SPD matrix.
#[derive(Debug, Clone)]
pub struct Pcg {
    matrix: SparseSymMatrix,
    precond: IncompleteCholesky,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Pcg {
    pub fn new(matrix: SparseSymMatrix, rel_tol: f64) -> Self {
        let precond = IncompleteCholesky::factor(&matrix);
        let max_iter = 20 * matrix.dim().max(50);
        Self { matrix, precond, rel_tol, max_iter }
    }

    /// Solves `A x = b` starting from the contents of `x`; returns the
    /// iteration count.
    pub fn solve_from(&self, b: &[f64], x: &mut [f64]) -> Result<usize> {
        self.solve_from_with_tol(b, x, self.rel_tol)
    }

    /// As [`Pcg::solve_from`] with an explicit relative tolerance.
    pub fn solve_from_with_tol(&self, b: &[f64], x: &mut [f64], rel_tol: f64) -> Result<usize> {
        let n = self.matrix.dim();
        let bnorm = math::norm2(b);
        if bnorm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0);
        }
        let mut r = self.matrix.matvec(x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let mut z = vec![0.0; n];
        self.precond.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = math::dot(&r, &z);
        let mut ap = vec![0.0; n];
        for it in 0..self.max_iter {
            let rnorm = math::norm2(&r);
            if rnorm <= rel_tol * bnorm {
                return Ok(it);
            }
            self.matrix.matvec_into(&p, &mut ap);
            let pap = math::dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::NotPositiveDefinite { row: it });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            self.precond.apply(&r, &mut z);
            let rz_new = math::dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let rnorm = math::norm2(&r);
        if rnorm <= rel_tol * bnorm {
            return Ok(self.max_iter);
        }
        Err(Error::LinearSolver { iterations: self.max_iter, residual: rnorm / bnorm })
    }
}

/// SPD solver chosen by cost: banded Cholesky when `n · bw²` is small,
/// preconditioned CG otherwise. Immutable after construction, so one solver
/// can be shared by concurrent callers.
#[derive(Debug, Clone)]
pub enum SymSolver {
    Banded(BandedCholesky),
    Iterative(Pcg),
}

/// Work limit (`n · bw²`) up to which the direct banded factorization is used.
pub const DIRECT_WORK_LIMIT: f64 = 2.0e7;

/// Relative residual for the iterative branch.
pub const ITERATIVE_TOL: f64 = 1e-12;

impl SymSolver {
    pub fn new(a: &SparseSymMatrix) -> Result<Self> {
        let bw = a.bandwidth() as f64;
        if (a.dim() as f64) * bw * bw <= DIRECT_WORK_LIMIT {
            Ok(Self::Banded(BandedCholesky::factor(a)?))
        } else {
            Ok(Self::Iterative(Pcg::new(a.clone(), ITERATIVE_TOL)))
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Banded(f) => {
                let mut x = b.to_vec();
                f.solve_in_place(&mut x);
                Ok(x)
            }
            Self::Iterative(p) => {
                let mut x = vec![0.0; b.len()];
                p.solve_from(b, &mut x)?;
                Ok(x)
            }
        }
    }

    /// Solve in which the iterative branch may stop at relative residual
    /// `rel_tol` (never tighter than [`ITERATIVE_TOL`]); the direct branch is exact.
    pub fn solve_loose(&self, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
        match self {
            Self::Banded(_) => self.solve(b),
            Self::Iterative(p) => {
                let mut x = vec![0.0; b.len()];
                p.solve_from_with_tol(b, &mut x, rel_tol.max(ITERATIVE_TOL))?;
                Ok(x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SparseSymMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        SparseSymMatrix::from_triplets(n, &t)
    }

    fn laplacian_2d(m: usize) -> SparseSymMatrix {
        let n = m * m;
        let mut t = Vec::new();
        for y in 0..m {
            for x in 0..m {
                let i = x + m * y;
                t.push((i, i, 4.0));
                if x > 0 {
                    t.push((i, i - 1, -1.0));
                }
                if x + 1 < m {
                    t.push((i, i + 1, -1.0));
                }
                if y > 0 {
                    t.push((i, i - m, -1.0));
                }
                if y + 1 < m {
                    t.push((i, i + m, -1.0));
                }
            }
        }
        SparseSymMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_merge_duplicates() {
        let a = SparseSymMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0), (0, 1, 4.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 3);
        assert!(a.is_symmetric(0.0));
        assert_eq!(a.bandwidth(), 1);
    }

    #[test]
    fn banded_cholesky_solves() {
        let a = laplacian_1d(30);
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec(&x);
        let f = BandedCholesky::factor(&a).unwrap();
        let mut y = b.clone();
        f.solve_in_place(&mut y);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_cholesky_rejects_indefinite() {
        let a = SparseSymMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(BandedCholesky::factor(&a), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn pcg_solves_2d_laplacian() {
        let a = laplacian_2d(20);
        let x: Vec<f64> = (0..400).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let b = a.matvec(&x);
        let pcg = Pcg::new(a.clone(), 1e-13);
        let mut y = vec![0.0; 400];
        let its = pcg.solve_from(&b, &mut y).unwrap();
        assert!(its > 0);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-9);
        }
        let direct = SymSolver::new(&a).unwrap().solve(&b).unwrap();
        for (u, v) in x.iter().zip(&direct) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn add_scaled_on_shared_pattern() {
        let a = laplacian_1d(5);
        let b = a.add_scaled(0.5, &a);
        assert_eq!(b.get(2, 2), 3.0);
        assert_eq!(b.get(2, 3), -1.5);
    }
}
