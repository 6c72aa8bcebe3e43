//! Small dense linear algebra: row-major matrices, symmetric indefinite
//! factorization with inertia, LU, Jacobi eigen/SVD and null spaces.
//!
//! Everything here is sized for desk-scale problems (dimensions in the tens).

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::float::{abs, sqrt};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices. All rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.row_mut(i).copy_from_slice(row);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != 0.0 {
                    let (src, dst) = (other.row(k), i);
                    for j in 0..other.cols {
                        out.data[dst * other.cols + j] += a * src[j];
                    }
                }
            }
        }
        out
    }

    /// `self += alpha * u v^T`
    pub fn add_outer(&mut self, alpha: f64, u: &[f64], v: &[f64]) {
        for i in 0..self.rows {
            let a = alpha * u[i];
            if a != 0.0 {
                for j in 0..self.cols {
                    self.data[i * self.cols + j] += a * v[j];
                }
            }
        }
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(abs(*v)))
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max(abs(self[(i, j)] - self[(j, i)]));
            }
        }
        worst
    }

    /// Stacks rows of `other` under `self`.
    pub fn vstack(&self, other: &Matrix) -> Matrix {
        if self.rows == 0 {
            return other.clone();
        }
        if other.rows == 0 {
            return self.clone();
        }
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
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

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(abs(*v)))
}

pub fn norm2(x: &[f64]) -> f64 {
    sqrt(dot(x, x))
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| abs(*v)).sum()
}

/// Counts of positive, negative and zero pivots of a symmetric factorization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

enum Pivot {
    One(f64),
    Two([f64; 3]),
}

/// Bunch–Kaufman factorization `P K P^T = L D L^T` of a symmetric matrix,
/// with D block diagonal (1x1 and 2x2 blocks).
pub struct Ldlt {
    n: usize,
    l: Matrix,
    pivots: Vec<Pivot>,
    perm: Vec<usize>,
    inertia: Inertia,
}

impl Ldlt {
    /// Factors `k` (only symmetry is assumed). Pivots with magnitude below
    /// `zero_tol * max|k|` are counted as zero.
    pub fn factor(k: &Matrix, zero_tol: f64) -> Ldlt {
        assert_eq!(k.rows, k.cols);
        let n = k.rows;
        let alpha = (1.0 + sqrt(17.0)) / 8.0;
        let scale = k.max_abs().max(f64::MIN_POSITIVE);
        let tiny = zero_tol * scale;
        let mut a = k.clone();
        let mut l = Matrix::identity(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::with_capacity(n);
        let mut inertia = Inertia::default();

        let sym_swap = |a: &mut Matrix, l: &mut Matrix, perm: &mut Vec<usize>, i: usize, j: usize, k0: usize| {
            if i == j {
                return;
            }
            a.swap_rows(i, j);
            for r in 0..n {
                a.data.swap(r * n + i, r * n + j);
            }
            for c in 0..k0 {
                l.data.swap(i * n + c, j * n + c);
            }
            perm.swap(i, j);
        };

        let mut kk = 0;
        while kk < n {
            let akk = abs(a[(kk, kk)]);
            let (mut lambda, mut r) = (0.0f64, kk);
            for i in kk + 1..n {
                if abs(a[(i, kk)]) > lambda {
                    lambda = abs(a[(i, kk)]);
                    r = i;
                }
            }
            if akk.max(lambda) <= tiny {
                pivots.push(Pivot::One(0.0));
                inertia.zero += 1;
                for i in kk + 1..n {
                    l[(i, kk)] = 0.0;
                }
                kk += 1;
                continue;
            }
            let mut two = false;
            if akk < alpha * lambda {
                let mut sigma = 0.0f64;
                for j in kk..n {
                    if j != r {
                        sigma = sigma.max(abs(a[(r, j)]));
                    }
                }
                if akk * sigma >= alpha * lambda * lambda {
                    // keep 1x1 at kk
                } else if abs(a[(r, r)]) >= alpha * sigma {
                    sym_swap(&mut a, &mut l, &mut perm, kk, r, kk);
                } else {
                    sym_swap(&mut a, &mut l, &mut perm, kk + 1, r, kk);
                    two = true;
                }
            }
            if !two {
                let d = a[(kk, kk)];
                if abs(d) <= tiny {
                    inertia.zero += 1;
                } else if d > 0.0 {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
                let dinv = if abs(d) <= tiny { 0.0 } else { 1.0 / d };
                for i in kk + 1..n {
                    l[(i, kk)] = a[(i, kk)] * dinv;
                }
                for i in kk + 1..n {
                    let li = l[(i, kk)];
                    if li == 0.0 {
                        continue;
                    }
                    for j in kk + 1..=i {
                        let v = a[(i, j)] - li * a[(j, kk)];
                        a[(i, j)] = v;
                        a[(j, i)] = v;
                    }
                }
                pivots.push(Pivot::One(d));
                kk += 1;
            } else {
                let (e11, e21, e22) = (a[(kk, kk)], a[(kk + 1, kk)], a[(kk + 1, kk + 1)]);
                let det = e11 * e22 - e21 * e21;
                // eigenvalue signs of the 2x2 block
                let tr = e11 + e22;
                let disc = sqrt(((e11 - e22) * 0.5) * ((e11 - e22) * 0.5) + e21 * e21);
                for ev in [tr * 0.5 + disc, tr * 0.5 - disc] {
                    if abs(ev) <= tiny {
                        inertia.zero += 1;
                    } else if ev > 0.0 {
                        inertia.positive += 1;
                    } else {
                        inertia.negative += 1;
                    }
                }
                let (i11, i21, i22) = (e22 / det, -e21 / det, e11 / det);
                for i in kk + 2..n {
                    let (ai1, ai2) = (a[(i, kk)], a[(i, kk + 1)]);
                    l[(i, kk)] = ai1 * i11 + ai2 * i21;
                    l[(i, kk + 1)] = ai1 * i21 + ai2 * i22;
                }
                for i in kk + 2..n {
                    let (li1, li2) = (l[(i, kk)], l[(i, kk + 1)]);
                    for j in kk + 2..=i {
                        let v = a[(i, j)] - li1 * a[(j, kk)] - li2 * a[(j, kk + 1)];
                        a[(i, j)] = v;
                        a[(j, i)] = v;
                    }
                }
                pivots.push(Pivot::Two([e11, e21, e22]));
                kk += 2;
            }
        }
        Ldlt {
            n,
            l,
            pivots,
            perm,
            inertia,
        }
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    /// Solves `K x = b`. Zero pivots contribute a zero component.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for i in j + 1..n {
                    y[i] -= self.l[(i, j)] * yj;
                }
            }
        }
        let mut k = 0;
        for piv in &self.pivots {
            match *piv {
                Pivot::One(d) => {
                    y[k] = if d == 0.0 { 0.0 } else { y[k] / d };
                    k += 1;
                }
                Pivot::Two([e11, e21, e22]) => {
                    let det = e11 * e22 - e21 * e21;
                    let (a, b2) = (y[k], y[k + 1]);
                    y[k] = (e22 * a - e21 * b2) / det;
                    y[k + 1] = (e11 * b2 - e21 * a) / det;
                    k += 2;
                }
            }
        }
        for j in (0..n).rev() {
            let mut s = y[j];
            for i in j + 1..n {
                s -= self.l[(i, j)] * y[i];
            }
            y[j] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

/// Symmetric Ruiz equilibration: returns `d` with `diag(d) K diag(d)` having
/// rows of roughly unit infinity norm.
pub fn ruiz_scaling(k: &Matrix, sweeps: usize) -> Vec<f64> {
    let n = k.rows;
    let mut d = vec![1.0; n];
    let mut a = k.clone();
    for _ in 0..sweeps {
        let r: Vec<f64> = (0..n)
            .map(|i| {
                let m = norm_inf(a.row(i));
                if m > 0.0 {
                    1.0 / sqrt(m)
                } else {
                    1.0
                }
            })
            .collect();
        let done = r.iter().all(|v| abs(v - 1.0) < 1e-3);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] *= r[i] * r[j];
            }
            d[i] *= r[i];
        }
        if done {
            break;
        }
    }
    d
}

/// Equilibrated symmetric indefinite solver with iterative refinement.
pub struct SymmetricSolver {
    k: Matrix,
    d: Vec<f64>,
    ldlt: Ldlt,
}

impl SymmetricSolver {
    pub fn new(k: Matrix, zero_tol: f64) -> Self {
        let d = ruiz_scaling(&k, 20);
        let mut ks = k.clone();
        let n = k.rows;
        for i in 0..n {
            for j in 0..n {
                ks[(i, j)] *= d[i] * d[j];
            }
        }
        let ldlt = Ldlt::factor(&ks, zero_tol);
        Self { k, d, ldlt }
    }

    pub fn inertia(&self) -> Inertia {
        self.ldlt.inertia()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let once = |rhs: &[f64]| -> Vec<f64> {
            let bs: Vec<f64> = rhs.iter().zip(&self.d).map(|(v, d)| v * d).collect();
            let ys = self.ldlt.solve(&bs);
            ys.iter().zip(&self.d).map(|(v, d)| v * d).collect()
        };
        let mut x = once(b);
        for _ in 0..3 {
            let kx = self.k.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&kx).map(|(bi, ki)| bi - ki).collect();
            if norm_inf(&r) <= 1e-16 * norm_inf(b).max(f64::MIN_POSITIVE) {
                break;
            }
            let dx = once(&r);
            if dx.iter().any(|v| !v.is_finite()) {
                break;
            }
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        x
    }
}

/// LU factorization with partial pivoting. Returns `None` for a numerically
/// singular matrix.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if abs(m[(i, k)]) > abs(m[(p, k)]) {
                p = i;
            }
        }
        if abs(m[(p, k)]) <= 1e-14 * scale {
            return None;
        }
        m.swap_rows(k, p);
        x.swap(k, p);
        for i in k + 1..n {
            let f = m[(i, k)] / m[(k, k)];
            if f != 0.0 {
                for j in k..n {
                    m[(i, j)] -= f * m[(k, j)];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= m[(k, j)] * x[j];
        }
        x[k] = s / m[(k, k)];
    }
    Some(x)
}

/// Least squares `min |a x - b|` with `x_j >= 0` for every `j` not marked
/// `free` (Lawson-Hanson active set).
pub fn nnls(a: &Matrix, b: &[f64], free: &[bool]) -> Vec<f64> {
    let n = a.cols;
    assert_eq!(free.len(), n);
    let mut x = vec![0.0; n];
    let mut passive: Vec<bool> = free.to_vec();
    let ls = |passive: &[bool]| -> Vec<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut z = vec![0.0; n];
        if idx.is_empty() {
            return z;
        }
        let k = idx.len();
        let mut ata = Matrix::zeros(k, k);
        let mut atb = vec![0.0; k];
        for (p, &i) in idx.iter().enumerate() {
            for (q, &j) in idx.iter().enumerate() {
                ata[(p, q)] = (0..a.rows).map(|r| a[(r, i)] * a[(r, j)]).sum();
            }
            atb[p] = (0..a.rows).map(|r| a[(r, i)] * b[r]).sum();
        }
        let ridge = 1e-13 * (0..k).map(|p| ata[(p, p)]).fold(f64::MIN_POSITIVE, f64::max);
        for p in 0..k {
            ata[(p, p)] += ridge;
        }
        if let Some(sol) = lu_solve(&ata, &atb) {
            for (p, &i) in idx.iter().enumerate() {
                z[i] = sol[p];
            }
        }
        z
    };
    if passive.iter().any(|&f| f) {
        x = ls(&passive);
    }
    for _ in 0..3 * n + 10 {
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
        let w = a.tr_mul_vec(&r);
        let scale = norm_inf(&w).max(1.0);
        let Some(t) = (0..n)
            .filter(|&j| !passive[j] && w[j] > 1e-14 * scale)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]))
        else {
            break;
        };
        passive[t] = true;
        loop {
            let z = ls(&passive);
            if (0..n).all(|j| !passive[j] || free[j] || z[j] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = 1.0f64;
            for j in 0..n {
                if passive[j] && !free[j] && z[j] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[j]));
                }
            }
            for j in 0..n {
                x[j] += alpha * (z[j] - x[j]);
                if passive[j] && !free[j] && x[j] <= 1e-300 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    x
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are sorted ascending; `vectors` holds them column-wise.
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn symmetric_eigen(a: &Matrix) -> SymmetricEigen {
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        let total: f64 = m.data.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, c)] = v[(r, i)];
        }
    }
    SymmetricEigen { values, vectors }
}

/// Thin result of a one-sided Jacobi SVD: singular values (one per column
/// of the input, descending) and the full right singular basis.
pub struct Svd {
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

pub fn svd(a: &Matrix) -> Svd {
    let (m, n) = (a.rows, a.cols);
    // work on columns: u = a, rotate pairs of columns until orthogonal
    let mut u = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == 0.0 || abs(gamma) <= 1e-15 * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                } else {
                    -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| sqrt((0..m).map(|i| u[(i, j)] * u[(i, j)]).sum()))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let singular_values = order.iter().map(|&i| norms[i]).collect();
    let mut vs = Matrix::zeros(n, n);
    for (c, &j) in order.iter().enumerate() {
        for r in 0..n {
            vs[(r, c)] = v[(r, j)];
        }
    }
    Svd {
        singular_values,
        v: vs,
    }
}

/// Numerical rank with threshold `rel * sigma_max`.
pub fn rank(a: &Matrix, rel: f64) -> usize {
    if a.rows == 0 || a.cols == 0 {
        return 0;
    }
    let s = svd(a);
    let smax = s.singular_values.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.singular_values.iter().filter(|&&x| x > rel * smax).count()
}

/// Orthonormal basis (as columns) of the null space of `a`, plus its rank.
pub fn null_space(a: &Matrix, n: usize, rel: f64) -> (Matrix, usize) {
    if a.rows == 0 {
        return (Matrix::identity(n), 0);
    }
    let s = svd(a);
    let smax = s.singular_values.first().copied().unwrap_or(0.0);
    let r = if smax == 0.0 {
        0
    } else {
        s.singular_values.iter().filter(|&&x| x > rel * smax).count()
    };
    let mut basis = Matrix::zeros(n, n - r);
    for c in r..n {
        for i in 0..n {
            basis[(i, c - r)] = s.v[(i, c)];
        }
    }
    (basis, r)
}
