//! Minimal dense linear algebra: row-major matrices, a cyclic Jacobi
//! eigensolver for symmetric matrices, and a Cholesky solver with diagonal
//! jitter escalation. Everything here is deterministic; there is no pivoting
//! heuristic that depends on memory layout or threading.

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
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
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape does not match data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_assign_at(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// `A x` for a vector `x` of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(self.row(r), x))
            .collect()
    }

    /// `Aᵀ x` for a vector `x` of length `rows`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += xr * a;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(r);
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Gram matrix `AᵀA`, exploiting symmetry.
    pub fn gram(&self) -> Mat {
        let p = self.cols;
        let mut g = Mat::zeros(p, p);
        for r in 0..self.rows {
            let row = self.row(r);
            for j in 0..p {
                let v = row[j];
                if v == 0.0 {
                    continue;
                }
                for k in j..p {
                    g.add_assign_at(j, k, v * row[k]);
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                let v = g.get(k, j);
                g.set(j, k, v);
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            for c in 0..r {
                if (self.get(r, c) - self.get(c, r)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigendecomposition of a symmetric matrix: `a = V diag(values) Vᵀ`,
/// eigenvectors in the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

const JACOBI_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps the strict upper triangle in row-major order, rotating away each
/// off-diagonal entry, until the off-diagonal Frobenius mass drops below
/// `1e-10` relative to the matrix norm. Eigenpairs come back unsorted.
pub fn jacobi_eigh(a: &Mat) -> Result<SymEigen> {
    assert_eq!(a.rows(), a.cols(), "matrix must be square");
    let n = a.rows();
    let mut a = a.clone();
    let mut v = Mat::identity(n);
    if n <= 1 {
        return Ok(SymEigen {
            values: (0..n).map(|i| a.get(i, i)).collect(),
            vectors: v,
        });
    }
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Ok(SymEigen {
            values: vec![0.0; n],
            vectors: v,
        });
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOL * norm {
            return Ok(SymEigen {
                values: (0..n).map(|i| a.get(i, i)).collect(),
                vectors: v,
            });
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if off_diagonal_norm(&a) <= JACOBI_TOL * norm {
        return Ok(SymEigen {
            values: (0..n).map(|i| a.get(i, i)).collect(),
            vectors: v,
        });
    }
    Err(Error::Numeric(format!(
        "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps \
         (off-diagonal residual {:e})",
        off_diagonal_norm(&a)
    )))
}

fn off_diagonal_norm(a: &Mat) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            let v = a.get(p, q);
            s += 2.0 * v * v;
        }
    }
    s.sqrt()
}

fn rotate(a: &mut Mat, v: &mut Mat, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq.abs() < f64::MIN_POSITIVE {
        return;
    }
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();
    for i in 0..n {
        if i == p || i == q {
            continue;
        }
        let aip = a.get(i, p);
        let aiq = a.get(i, q);
        let new_ip = c * aip - s * aiq;
        let new_iq = s * aip + c * aiq;
        a.set(i, p, new_ip);
        a.set(p, i, new_ip);
        a.set(i, q, new_iq);
        a.set(q, i, new_iq);
    }
    a.set(p, p, app - t * apq);
    a.set(q, q, aqq + t * apq);
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for i in 0..n {
        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, c * vip - s * viq);
        v.set(i, q, s * vip + c * viq);
    }
}

impl SymEigen {
    /// Reorder eigenpairs by descending eigenvalue (ties keep the original
    /// index order) and fix signs so each vector's largest-magnitude entry is
    /// positive.
    pub fn sorted_desc_by_value(self) -> SymEigen {
        self.sorted_by(|a, b| b.partial_cmp(a).unwrap())
    }

    /// Reorder eigenpairs by descending `|eigenvalue|`, same conventions.
    pub fn sorted_desc_by_magnitude(self) -> SymEigen {
        self.sorted_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap())
    }

    fn sorted_by(self, cmp: impl Fn(&f64, &f64) -> std::cmp::Ordering) -> SymEigen {
        let n = self.values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| cmp(&self.values[i], &self.values[j]));
        let mut values = Vec::with_capacity(n);
        let mut vectors = Mat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            values.push(self.values[src]);
            let mut col: Vec<f64> = (0..n).map(|i| self.vectors.get(i, src)).collect();
            fix_sign(&mut col);
            for (i, &x) in col.iter().enumerate() {
                vectors.set(i, dst, x);
            }
        }
        SymEigen { values, vectors }
    }

    /// Column `i` as an owned vector.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.vectors.rows())
            .map(|r| self.vectors.get(r, i))
            .collect()
    }
}

/// Flip a vector so its largest-magnitude entry (first one on ties) is
/// positive.
fn fix_sign(v: &mut [f64]) {
    let mut idx = 0;
    let mut best = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// or `None` when a pivot fails.
pub fn cholesky(a: &Mat) -> Option<Mat> {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Solve `L Lᵀ x = b` given the lower Cholesky factor.
pub fn cholesky_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Solve a symmetric positive-definite system, escalating diagonal jitter
/// (`1e-10 * trace / n`, then x10, then x100) when factorization fails.
/// Returns the solution and the jitter that was finally used.
pub fn solve_spd_jitter(a: &Mat, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = a.rows();
    if let Some(l) = cholesky(a) {
        return Ok((cholesky_solve(&l, b), 0.0));
    }
    let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
    let base = 1e-10 * trace.abs().max(f64::MIN_POSITIVE) / n as f64;
    let mut jitter = base;
    for _ in 0..3 {
        let mut aj = a.clone();
        for i in 0..n {
            aj.add_assign_at(i, i, jitter);
        }
        if let Some(l) = cholesky(&aj) {
            return Ok((cholesky_solve(&l, b), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numeric(format!(
        "Cholesky failed after jitter escalation up to {:e}",
        jitter / 10.0
    )))
}

/// Cholesky factor with the same jitter escalation; returns the factor and
/// the jitter used.
pub fn cholesky_jitter(a: &Mat) -> Result<(Mat, f64)> {
    let n = a.rows();
    if let Some(l) = cholesky(a) {
        return Ok((l, 0.0));
    }
    let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
    let base = 1e-10 * trace.abs().max(f64::MIN_POSITIVE) / n as f64;
    let mut jitter = base;
    for _ in 0..3 {
        let mut aj = a.clone();
        for i in 0..n {
            aj.add_assign_at(i, i, jitter);
        }
        if let Some(l) = cholesky(&aj) {
            return Ok((l, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numeric(format!(
        "Cholesky failed after jitter escalation up to {:e}",
        jitter / 10.0
    )))
}

/// One vector from the numerical null space of `a`, found by row-echelon
/// reduction with partial pivoting; `None` when every column carries a pivot.
///
/// The returned vector is scaled to unit Euclidean norm.
pub fn null_space_vector(a: &Mat) -> Option<Vec<f64>> {
    let rows = a.rows();
    let cols = a.cols();
    let mut m = a.clone();
    let scale = m.max_abs();
    if scale == 0.0 {
        // Zero matrix: every basis vector is in the null space.
        let mut u = vec![0.0; cols];
        u[0] = 1.0;
        return if cols > 0 { Some(u) } else { None };
    }
    let tol = rows.max(cols) as f64 * f64::EPSILON * scale;
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut rank = 0usize;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let mut best_row = rank;
        let mut best = m.get(rank, col).abs();
        for r in rank + 1..rows {
            let v = m.get(r, col).abs();
            if v > best {
                best = v;
                best_row = r;
            }
        }
        if best <= tol {
            continue; // free column
        }
        if best_row != rank {
            for c in 0..cols {
                let tmp = m.get(rank, c);
                m.set(rank, c, m.get(best_row, c));
                m.set(best_row, c, tmp);
            }
        }
        let pivot = m.get(rank, col);
        for r in 0..rows {
            if r == rank {
                continue;
            }
            let factor = m.get(r, col) / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..cols {
                let v = m.get(r, c) - factor * m.get(rank, c);
                m.set(r, c, v);
            }
            m.set(r, col, 0.0);
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
    }
    let free_col = (0..cols).find(|&c| pivot_of_col[c].is_none())?;
    let mut u = vec![0.0; cols];
    u[free_col] = 1.0;
    for col in 0..cols {
        if let Some(r) = pivot_of_col[col] {
            // Row r reads: pivot * u[col] + sum over later columns = 0.
            let mut s = 0.0;
            for c in col + 1..cols {
                s += m.get(r, c) * u[c];
            }
            u[col] = -s / m.get(r, col);
        }
    }
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in u.iter_mut() {
        *v /= norm;
    }
    Some(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn jacobi_two_by_two_pair_matrix() {
        // [[0, a], [a, 0]] has eigenvalues {a, -a}.
        let a = Mat::from_vec(2, 2, vec![0.0, 3.0, 3.0, 0.0]);
        let eig = jacobi_eigh(&a).unwrap().sorted_desc_by_value();
        assert!(approx(eig.values[0], 3.0, 1e-12));
        assert!(approx(eig.values[1], -3.0, 1e-12));
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        let mut rng = crate::rng::Rng::from_seed(11);
        let n = 32;
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.next_f64() * 2.0 - 1.0;
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let eig = jacobi_eigh(&a).unwrap();
        let mut recon = Mat::zeros(n, n);
        for k in 0..n {
            let u = eig.vector(k);
            for i in 0..n {
                for j in 0..n {
                    recon.add_assign_at(i, j, eig.values[k] * u[i] * u[j]);
                }
            }
        }
        let mut max_err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                max_err = max_err.max((recon.get(i, j) - a.get(i, j)).abs());
            }
        }
        assert!(max_err <= 1e-8, "reconstruction residual {max_err}");
    }

    #[test]
    fn jacobi_vectors_orthonormal() {
        let a = Mat::from_vec(3, 3, vec![2.0, 1.0, 0.5, 1.0, 3.0, 0.25, 0.5, 0.25, 1.0]);
        let eig = jacobi_eigh(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(&eig.vector(i), &eig.vector(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(approx(d, want, 1e-10));
            }
        }
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Mat::from_vec(2, 2, vec![4.0, 1.0, 1.0, 3.0]);
        let (x, jitter) = solve_spd_jitter(&a, &[1.0, 2.0]).unwrap();
        assert_eq!(jitter, 0.0);
        // Verify A x = b.
        let b = a.matvec(&x);
        assert!(approx(b[0], 1.0, 1e-12) && approx(b[1], 2.0, 1e-12));
    }

    #[test]
    fn cholesky_jitter_rescues_singular_matrix() {
        // Rank-1 matrix; plain Cholesky fails, jitter succeeds.
        let a = Mat::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]);
        let (_, jitter) = solve_spd_jitter(&a, &[1.0, 1.0]).unwrap();
        assert!(jitter > 0.0);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        // 1x3 matrix [1, 2, 3]: null space is 2-dimensional.
        let a = Mat::from_vec(1, 3, vec![1.0, 2.0, 3.0]);
        let u = null_space_vector(&a).unwrap();
        let r = a.matvec(&u)[0];
        assert!(r.abs() <= 1e-12, "residual {r}");
        let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(approx(norm, 1.0, 1e-12));
    }

    #[test]
    fn null_space_absent_for_full_rank() {
        let a = Mat::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(null_space_vector(&a).is_none());
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        // Diagonal matrix: eigenvectors are +/- basis vectors; the sign rule
        // must force them positive.
        let a = Mat::from_vec(2, 2, vec![2.0, 0.0, 0.0, 1.0]);
        let eig = jacobi_eigh(&a).unwrap().sorted_desc_by_value();
        assert!(eig.vector(0)[0] > 0.0);
        assert!(eig.vector(1)[1] > 0.0);
    }
}
