//! Compressed sparse row matrices and a direct SPD solver.
//!
//! The solver orders unknowns by reverse Cuthill-McKee and factors the permuted
//! matrix in envelope (profile) storage. On the structured fine meshes used here
//! the envelope width equals the short side of the region, so factorization and
//! blocked multi right-hand-side solves stay cheap.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default backward error target for SPD solves.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Envelope entries above which `solve_spd` switches to preconditioned CG.
const ENVELOPE_CAP: usize = 150_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        symmetric: bool,
    ) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }

    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
        symmetric: bool,
    ) -> Result<Self> {
        let ok = row_ptr.len() == nrows + 1
            && row_ptr.first() == Some(&0)
            && row_ptr.windows(2).all(|w| w[0] <= w[1])
            && row_ptr[nrows] == col_idx.len()
            && col_idx.len() == values.len()
            && (0..nrows).all(|r| {
                let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
                cols.windows(2).all(|w| w[0] < w[1]) && cols.iter().all(|&c| c < ncols)
            });
        if !ok {
            return Err(Error::InvalidArgument("malformed CSR arrays".into()));
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetric,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        (0..self.nrows)
            .map(|r| x[r] * self.row(r).map(|(c, v)| v * y[c]).sum::<f64>())
            .sum()
    }

    /// `self * dense`, for a column-major dense right factor.
    pub fn mul_dense(&self, dense: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(dense.nrows(), self.ncols);
        let mut out = DMatrix::zeros(self.nrows, dense.ncols());
        for k in 0..dense.ncols() {
            let src = dense.column(k);
            let mut dst = out.column_mut(k);
            for r in 0..self.nrows {
                dst[r] = self.row(r).map(|(c, v)| v * src[c]).sum();
            }
        }
        out
    }

    /// Rows and columns selected by index lists (each ascending).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            map[c] = k;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            let mut entries: Vec<(usize, f64)> = self
                .row(r)
                .filter(|&(c, _)| map[c] != usize::MAX)
                .map(|(c, v)| (map[c], v))
                .collect();
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let symmetric = self.symmetric && rows == cols;
        SparseMatrix {
            nrows: rows.len(),
            ncols: cols.len(),
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        SparseMatrix {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// Entrywise sum of two matrices with identical sparsity pattern.
    pub fn add_same_pattern(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.row_ptr, other.row_ptr);
        assert_eq!(self.col_idx, other.col_idx);
        SparseMatrix {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            symmetric: self.symmetric && other.symmetric,
            ..self.clone()
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows())
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|r| a.row(r).filter(|&(c, _)| c != r).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // (eccentricity, a minimum-degree node of the last level)
        let mut level = vec![usize::MAX; n];
        let mut q = VecDeque::from([start]);
        level[start] = 0;
        let mut last = start;
        while let Some(v) = q.pop_front() {
            for (w, _) in a.row(v) {
                if level[w] == usize::MAX && !visited[w] {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
            let better = level[v] > level[last]
                || (level[v] == level[last] && degree[v] < degree[last]);
            if better {
                last = v;
            }
        }
        (level[last], last)
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(start, &visited);
        loop {
            let (ecc2, far2) = bfs_levels(far, &visited);
            if ecc2 <= ecc {
                break;
            }
            start = far;
            ecc = ecc2;
            far = far2;
        }
        let component_start = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = component_start;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut nbrs: Vec<usize> = a
                .row(v)
                .map(|(w, _)| w)
                .filter(|&w| !visited[w])
                .collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `P A P^T = L L^T` in envelope storage.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    perm: Vec<usize>,
    /// First stored column of each row of `L`.
    first: Vec<usize>,
    /// Offset of each row in `data`; row `i` holds columns `first[i]..=i`.
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn envelope_size(a: &SparseMatrix) -> usize {
        let perm = reverse_cuthill_mckee(a);
        Self::envelope_of(a, &perm).iter().enumerate().map(|(i, &f)| i - f + 1).sum()
    }

    fn envelope_of(a: &SparseMatrix, perm: &[usize]) -> Vec<usize> {
        let n = a.nrows();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        (0..n)
            .map(|i| {
                a.row(perm[i])
                    .map(|(c, _)| inv[c])
                    .filter(|&j| j <= i)
                    .min()
                    .unwrap_or(i)
                    .min(i)
            })
            .collect()
    }

    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "square matrix required");
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let first = Self::envelope_of(a, &perm);
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            offset.push(total);
            total += i - first[i] + 1;
        }
        offset.push(total);
        let mut data = vec![0.0; total];
        for i in 0..n {
            for (c, v) in a.row(perm[i]) {
                let j = inv[c];
                if j <= i {
                    data[offset[i] + j - first[i]] += v;
                }
            }
        }
        let scale = (0..n).map(|i| data[offset[i + 1] - 1].abs()).fold(0.0, f64::max);
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (head, tail) = data.split_at_mut(offset[i]);
                let row_j = &head[offset[j]..offset[j + 1]];
                let row_i = &mut tail[..offset[i + 1] - offset[i]];
                let dot: f64 = row_i[k0 - fi..j - fi]
                    .iter()
                    .zip(&row_j[k0 - fj..j - fj])
                    .map(|(x, y)| x * y)
                    .sum();
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - dot) / ljj;
            }
            let row_i = &mut data[offset[i]..offset[i + 1]];
            let (off, diag) = row_i.split_at_mut(i - fi);
            let d = diag[0] - off.iter().map(|x| x * x).sum::<f64>();
            if !(d > scale * 1e-14) {
                return Err(Error::NotPositiveDefinite {
                    row: perm[i],
                    pivot: d,
                });
            }
            diag[0] = d.sqrt();
        }
        Ok(Self {
            n,
            perm,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn envelope_len(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        self.solve_permuted_block(&mut y, 1);
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solve for every column of `b` (n x m, column-major).
    pub fn solve_many(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        const BLOCK: usize = 32;
        assert_eq!(b.nrows(), self.n);
        let m = b.ncols();
        let mut out = DMatrix::zeros(self.n, m);
        let mut buf = Vec::new();
        for c0 in (0..m).step_by(BLOCK) {
            let w = BLOCK.min(m - c0);
            buf.clear();
            buf.resize(self.n * w, 0.0);
            for k in 0..w {
                let col = b.column(c0 + k);
                for (new, &old) in self.perm.iter().enumerate() {
                    buf[new * w + k] = col[old];
                }
            }
            self.solve_permuted_block(&mut buf, w);
            for k in 0..w {
                let mut col = out.column_mut(c0 + k);
                for (new, &old) in self.perm.iter().enumerate() {
                    col[old] = buf[new * w + k];
                }
            }
        }
        out
    }

    /// In-place forward and backward substitution on a row-major n x w block.
    fn solve_permuted_block(&self, y: &mut [f64], w: usize) {
        let n = self.n;
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let (done, rest) = y.split_at_mut(i * w);
            let yi = &mut rest[..w];
            for j in fi..i {
                let l = row[j - fi];
                if l != 0.0 {
                    let yj = &done[j * w..(j + 1) * w];
                    yi.iter_mut().zip(yj).for_each(|(a, b)| *a -= l * b);
                }
            }
            let d = row[i - fi];
            yi.iter_mut().for_each(|a| *a /= d);
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let (done, rest) = y.split_at_mut(i * w);
            let xi = &mut rest[..w];
            let d = row[i - fi];
            xi.iter_mut().for_each(|a| *a /= d);
            for j in fi..i {
                let l = row[j - fi];
                if l != 0.0 {
                    let yj = &mut done[j * w..(j + 1) * w];
                    yj.iter_mut().zip(xi.iter()).for_each(|(a, b)| *a -= l * b);
                }
            }
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Normwise backward error `|r| / (|A| |x| + |b|)` of an approximate solution.
pub fn backward_error(r_norm: f64, a_norm: f64, x_norm: f64, b_norm: f64) -> f64 {
    let scale = a_norm * x_norm + b_norm;
    if scale > 0.0 {
        r_norm / scale
    } else {
        r_norm
    }
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

/// Factorization plus iterative refinement to a backward error target.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    factor: EnvelopeCholesky,
}

impl SpdSolver {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        Ok(Self {
            factor: EnvelopeCholesky::factor(a)?,
        })
    }

    pub fn factor(&self) -> &EnvelopeCholesky {
        &self.factor
    }

    /// Solve and refine until the normwise backward error is at most `tol`.
    pub fn solve(&self, a: &SparseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let anorm = a.norm_inf();
        let eta = |x: &[f64]| backward_error(norm2(&residual(a, x, b)), anorm, norm2(x), bnorm);
        let mut x = self.factor.solve(b);
        let mut res = eta(&x);
        for _ in 0..4 {
            if res <= tol {
                break;
            }
            let r = residual(a, &x, b);
            let dx = self.factor.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
            res = eta(&x);
        }
        if res > tol {
            return Err(Error::NonConvergence { tol, residual: res });
        }
        Ok(x)
    }
}

/// Solve `A x = b` for SPD `A` to backward error `tol`.
pub fn solve_spd(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if EnvelopeCholesky::envelope_size(a) > ENVELOPE_CAP {
        return pcg(a, b, tol, 20 * a.nrows() + 1000);
    }
    SpdSolver::new(a)?.solve(a, b, tol)
}

/// Jacobi-preconditioned conjugate gradients.
pub fn pcg(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let dinv: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d > 0.0 { 1.0 / d } else { 1.0 }
        })
        .collect();
    let anorm = a.norm_inf();
    let eta = |x: &[f64]| backward_error(norm2(&residual(a, x, b)), anorm, norm2(x), bnorm);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite { row: 0, pivot: pap });
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        if backward_error(norm2(&r), anorm, norm2(&x), bnorm) <= tol && eta(&x) <= tol {
            return Ok(x);
        }
        z.iter_mut().zip(r.iter().zip(&dinv)).for_each(|(zi, (ri, di))| *zi = ri * di);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::NonConvergence { tol, residual: eta(&x) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, t, true)
    }

    fn random_spd(n: usize, rng: &mut StdRng) -> (SparseMatrix, DMatrix<f64>) {
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let dense = &b * b.transpose() + DMatrix::identity(n, n) * n as f64 * 0.1;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push((i, j, dense[(i, j)]));
            }
        }
        (SparseMatrix::from_triplets(n, n, t, true), dense)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0)], true);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn diagonal_solve() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (1, 1, 2.0)], true);
        let x = solve_spd(&a, &[2.0, 4.0], DEFAULT_TOL).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert_eq!(solve_spd(&a, &[0.0, 0.0], DEFAULT_TOL).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = StdRng::seed_from_u64(3);
        let (a, dense) = random_spd(20, &mut rng);
        let b: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = solve_spd(&a, &b, DEFAULT_TOL).unwrap();
        let oracle = dense.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..20 {
            assert!((x[i] - oracle[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn many_rhs_agree_with_single() {
        let a = laplacian_1d(50);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        let b = DMatrix::from_fn(50, 37, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let x = f.solve_many(&b);
        for j in 0..37 {
            let col: Vec<f64> = b.column(j).iter().copied().collect();
            let xs = f.solve(&col);
            for i in 0..50 {
                assert!((x[(i, j)] - xs[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)], true);
        assert!(matches!(solve_spd(&a, &[1.0, 1.0], DEFAULT_TOL), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn rcm_is_a_permutation_and_keeps_band_narrow() {
        // 2D grid Laplacian, 30 x 10, numbered with the long side fastest
        let (nx, ny) = (30, 10);
        let id = |i: usize, j: usize| j * nx + i;
        let mut t = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                t.push((id(i, j), id(i, j), 4.0));
                if i + 1 < nx {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                    t.push((id(i + 1, j), id(i, j), -1.0));
                }
                if j + 1 < ny {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                    t.push((id(i, j + 1), id(i, j), -1.0));
                }
            }
        }
        let a = SparseMatrix::from_triplets(nx * ny, nx * ny, t, true);
        let mut p = reverse_cuthill_mckee(&a);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        assert!(f.envelope_len() <= nx * ny * (ny + 2));
        p.sort_unstable();
        assert_eq!(p, (0..nx * ny).collect::<Vec<_>>());
    }

    #[test]
    fn pcg_agrees_with_direct() {
        let a = laplacian_1d(40);
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let x1 = pcg(&a, &b, 1e-12, 1000).unwrap();
        let x2 = solve_spd(&a, &b, 1e-12).unwrap();
        for i in 0..40 {
            assert!((x1[i] - x2[i]).abs() < 1e-9);
        }
    }
}
