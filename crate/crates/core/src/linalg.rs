//! Small dense complex linear algebra: row-major matrices, Hermitian
//! eigensolver (Householder + implicit QL), Cholesky factorization, Kronecker and partial-trace helpers.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;

pub type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        debug_assert_eq!(self.rows, self.cols);
        self.rows
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn matmul(&self, b: &CMat) -> CMat {
        assert_eq!(self.cols, b.rows, "matmul shape");
        let mut out = CMat::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &b.data[k * b.cols..(k + 1) * b.cols];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += a * bv;
                }
            }
        }
        out
    }

    /// self · b†
    pub fn matmul_adj(&self, b: &CMat) -> CMat {
        assert_eq!(self.cols, b.cols, "matmul_adj shape");
        let mut out = CMat::zeros(self.rows, b.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            for j in 0..b.rows {
                let brow = b.row(j);
                let mut s = ZERO;
                for (x, y) in arow.iter().zip(brow) {
                    s += x * y.conj();
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, b: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (b.rows, b.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&b.data).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn sub(&self, b: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (b.rows, b.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&b.data).map(|(x, y)| x - y).collect(),
        }
    }

    /// self += s·b
    pub fn axpy(&mut self, s: f64, b: &CMat) {
        assert_eq!((self.rows, self.cols), (b.rows, b.cols));
        for (x, y) in self.data.iter_mut().zip(&b.data) {
            *x += y * s;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Re Tr(A† B), the real Frobenius inner product.
    pub fn inner(&self, b: &CMat) -> f64 {
        self.data.iter().zip(&b.data).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
    }

    pub fn norm_fro(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ½(A + A†)
    pub fn hermitian_part(&self) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                e = e.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        e
    }

    pub fn kron(&self, b: &CMat) -> CMat {
        let (r, c) = (self.rows * b.rows, self.cols * b.cols);
        let mut out = CMat::zeros(r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..b.rows {
                    for l in 0..b.cols {
                        out[(i * b.rows + k, j * b.cols + l)] = a * b[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Tr_B of an operator on A⊗B with dim B = `db`.
    pub fn partial_trace_b(&self, db: usize) -> CMat {
        let da = self.dim() / db;
        assert_eq!(da * db, self.dim());
        CMat::from_fn(da, da, |a, b| (0..db).map(|k| self[(a * db + k, b * db + k)]).sum())
    }

    /// Diagonal block (`i`, `i`) of size `bs`.
    pub fn block(&self, i: usize, j: usize, bs: usize) -> CMat {
        CMat::from_fn(bs, bs, |r, c| self[(i * bs + r, j * bs + c)])
    }

    pub fn sub_matrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |r, c| self[(r0 + r, c0 + c)])
    }
}

/// Spectral decomposition A = V·diag(λ)·V† of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigh {
    /// Ascending.
    pub values: Vec<f64>,
    /// Eigenvectors in columns.
    pub vectors: CMat,
}

impl Eigh {
    /// V·diag(f(λ))·V†
    pub fn apply(&self, mut f: impl FnMut(f64) -> f64) -> CMat {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        let mut out = CMat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = ZERO;
                for k in 0..n {
                    if fv[k] != 0.0 {
                        s += v[(i, k)] * v[(j, k)].conj() * fv[k];
                    }
                }
                out[(i, j)] = s;
                out[(j, i)] = s.conj();
            }
        }
        out
    }
}

/// Eigendecomposition of a Hermitian matrix (only its Hermitian part is
/// used): Householder reduction to a real tridiagonal form, then implicit QL.
pub fn eigh(a: &CMat) -> Eigh {
    let n = a.dim();
    let (d, e, qd) = tridiagonalize(a, true);
    let mut d = d;
    let mut e = e;
    // zt[i*n + k] = Z[k][i]: rows of zt are the tridiagonal eigenvectors.
    let mut zt = vec![0.0; n * n];
    for i in 0..n {
        zt[i * n + i] = 1.0;
    }
    tql(&mut d, &mut e, Some(&mut zt));
    let qd = qd.expect("requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for r in 0..n {
        let qrow = qd.row(r);
        for (c, &oc) in order.iter().enumerate() {
            let z = &zt[oc * n..oc * n + n];
            let mut s = ZERO;
            for k in 0..n {
                s += qrow[k] * z[k];
            }
            vectors[(r, c)] = s;
        }
    }
    Eigh { values, vectors }
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: &CMat) -> Vec<f64> {
    let (mut d, mut e, _) = tridiagonalize(a, false);
    tql(&mut d, &mut e, None);
    d.sort_by(f64::total_cmp);
    d
}

// Returns the diagonal, the (real, nonnegative) off-diagonal with a trailing
// zero, and optionally the unitary U with A = U·T·U†.
fn tridiagonalize(a: &CMat, want_u: bool) -> (Vec<f64>, Vec<f64>, Option<CMat>) {
    let n = a.dim();
    let mut m = a.hermitian_part();
    let mut q = if want_u { Some(CMat::identity(n)) } else { None };
    let mut v = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let mut alpha2 = 0.0;
        for i in lo..n {
            alpha2 += m[(i, k)].norm_sqr();
        }
        let tail: f64 = alpha2 - m[(lo, k)].norm_sqr();
        if tail <= 1e-300 * (1.0 + alpha2) {
            continue;
        }
        let alpha = libm::sqrt(alpha2);
        let x0 = m[(lo, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        for i in lo..n {
            v[i] = m[(i, k)];
        }
        v[lo] += phase * alpha;
        let vnorm2: f64 = (lo..n).map(|i| v[i].norm_sqr()).sum();
        let tau = 2.0 / vnorm2;
        // w = τ·M·v on the trailing block
        for i in lo..n {
            let row = &m.row(i)[lo..n];
            let mut s = ZERO;
            for (j, x) in row.iter().enumerate() {
                s += *x * v[lo + j];
            }
            w[i] = s * tau;
        }
        let mut kk = ZERO;
        for i in lo..n {
            kk += v[i].conj() * w[i];
        }
        let kk = kk * (0.5 * tau);
        for i in lo..n {
            w[i] -= kk * v[i];
        }
        // M ← M − v·w† − w·v†
        for i in lo..n {
            let (vi, wi) = (v[i], w[i]);
            for j in lo..n {
                let x = vi * w[j].conj() + wi * v[j].conj();
                m[(i, j)] -= x;
            }
        }
        // column k below the diagonal becomes −phase·α·e_1
        m[(lo, k)] = -phase * alpha;
        m[(k, lo)] = m[(lo, k)].conj();
        for i in lo + 1..n {
            m[(i, k)] = ZERO;
            m[(k, i)] = ZERO;
        }
        if let Some(q) = q.as_mut() {
            // Q ← Q·H, H = I − τ·v·v†
            for r in 0..n {
                let row = &q.row(r)[lo..n];
                let mut s = ZERO;
                for (j, x) in row.iter().enumerate() {
                    s += *x * v[lo + j];
                }
                let s = s * tau;
                for j in lo..n {
                    let vj = v[j].conj();
                    q[(r, j)] -= s * vj;
                }
            }
        }
    }
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    let mut e = vec![0.0; n];
    let mut delta = vec![ONE; n];
    for k in 0..n.saturating_sub(1) {
        let ek = m[(k + 1, k)];
        let mag = ek.norm();
        e[k] = mag;
        delta[k + 1] = if mag > 0.0 { delta[k] * (ek / mag) } else { delta[k] };
    }
    if let Some(q) = q.as_mut() {
        for r in 0..n {
            for c in 0..n {
                q[(r, c)] *= delta[c];
            }
        }
    }
    (d, e, q)
}

// Implicit QL on a real symmetric tridiagonal matrix (diagonal `d`,
// off-diagonal `e` with e[i] between i and i+1). Rows of `zt` are rotated
// along with the columns of the implied eigenvector matrix.
fn tql(d: &mut [f64], e: &mut [f64], mut zt: Option<&mut [f64]>) {
    let n = d.len();
    if n == 0 {
        return;
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            for _ in 0..100 {
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for x in d.iter_mut().skip(l + 2) {
                    *x -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = zt.as_deref_mut() {
                        let (a, b) = z.split_at_mut((i + 1) * n);
                        let zi = &mut a[i * n..];
                        let zi1 = &mut b[..n];
                        for k in 0..n {
                            let h = zi1[k];
                            zi1[k] = s * zi[k] + c * h;
                            zi[k] = c * zi[k] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    eigh(a).values.first().copied().unwrap_or(0.0)
}

/// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix.
pub fn cholesky(a: &CMat) -> Option<CMat> {
    let n = a.dim();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = libm::sqrt(d);
        l[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Solves L·X = B for lower-triangular L.
pub fn solve_lower(l: &CMat, b: &CMat) -> CMat {
    let n = l.dim();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves L†·X = B for lower-triangular L.
pub fn solve_lower_adj(l: &CMat, b: &CMat) -> CMat {
    let n = l.dim();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].conj();
        }
    }
    x
}

/// Inverse of a Hermitian positive-definite matrix from its Cholesky factor.
pub fn inverse_from_cholesky(l: &CMat) -> CMat {
    let n = l.dim();
    let y = solve_lower(l, &CMat::identity(n));
    solve_lower_adj(l, &y).hermitian_part()
}

/// Real symmetric positive-definite solve via Cholesky; falls back to LU
/// with partial pivoting when the factorization breaks down.
pub fn solve_real_spd(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    let mut ok = true;
    'outer: for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            ok = false;
            break 'outer;
        }
        let d = libm::sqrt(d);
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    if !ok {
        return solve_real_lu(a, n, b);
    }
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    Some(y)
}

pub fn solve_real_lu(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for i in col + 1..n {
            let f = m[i * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[i * n + k] -= f * m[col * n + k];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= m[i * n + k] * x[k];
        }
        x[i] = s / m[i * n + i];
    }
    Some(x)
}
