//! Small dense linear algebra: vector helpers, a square matrix type and
//! symmetric eigen-solvers (cyclic Jacobi for the full spectrum, orthogonal
//! iteration for the leading subspace of larger matrices).

use crate::error::{Error, Result};

/// Matrices at or below this dimension are diagonalized densely.
pub const DENSE_EIGEN_MAX_DIM: usize = 64;

const JACOBI_MAX_SWEEPS: usize = 100;
const SUBSPACE_MAX_ITERS: usize = 5000;
const SUBSPACE_REL_TOL: f64 = 1e-10;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t * t
        })
        .sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// `acc += scale * v`
#[inline]
pub fn axpy(acc: &mut [f64], scale: f64, v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += scale * x;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Arithmetic mean of the listed rows. Panics on an empty selection.
pub fn mean_of<'a, I>(rows: I, dim: usize) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = vec![0.0; dim];
    let mut count = 0usize;
    for row in rows {
        axpy(&mut acc, 1.0, row);
        count += 1;
    }
    assert!(count > 0, "mean of an empty set");
    let inv = 1.0 / count as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "row {i} has length {}, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `self += weight * v vᵀ`
    pub fn add_outer(&mut self, weight: f64, v: &[f64]) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            let wi = weight * v[i];
            if wi == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.dim..(i + 1) * self.dim];
            for (r, vj) in row.iter_mut().zip(v) {
                *r += wi * vj;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), v)).collect()
    }

    /// Largest absolute asymmetry `|m_ij - m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }
}

/// Eigenpairs sorted by decreasing eigenvalue. `vectors[i]` pairs with `values[i]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigen(m: &SquareMatrix) -> Eigen {
    let n = m.dim();
    let mut a = m.symmetrized();
    let mut v = SquareMatrix::identity(n);

    let scale: f64 = a.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j) * a.get(i, j))
                .sum();
            if off.sqrt() <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)).then(i.cmp(&j)));
    Eigen {
        values: order.iter().map(|&i| a.get(i, i)).collect(),
        vectors: order
            .iter()
            .map(|&i| (0..n).map(|k| v.get(k, i)).collect())
            .collect(),
    }
}

/// The `r` leading eigenpairs of a symmetric matrix.
///
/// Dense Jacobi up to [`DENSE_EIGEN_MAX_DIM`]; above that, shifted orthogonal
/// iteration with a Rayleigh-Ritz step, stopped once every wanted Ritz
/// residual is below 1e-10 times the matrix scale.
pub fn top_eigen(m: &SquareMatrix, r: usize) -> Eigen {
    let n = m.dim();
    let r = r.min(n);
    if n <= DENSE_EIGEN_MAX_DIM {
        let mut full = symmetric_eigen(m);
        full.values.truncate(r);
        full.vectors.truncate(r);
        return full;
    }
    subspace_iteration(&m.symmetrized(), r)
}

fn orthonormalize(basis: &mut [Vec<f64>]) {
    for i in 0..basis.len() {
        for j in 0..i {
            let (head, tail) = basis.split_at_mut(i);
            let proj = dot(&tail[0], &head[j]);
            axpy(&mut tail[0], -proj, &head[j]);
        }
        let nrm = norm(&basis[i]);
        if nrm > 0.0 {
            basis[i].iter_mut().for_each(|x| *x /= nrm);
        }
    }
}

fn subspace_iteration(m: &SquareMatrix, r: usize) -> Eigen {
    let n = m.dim();
    // Shift by the Gershgorin lower bound so the operator is PSD and its
    // dominant subspace is the algebraically largest one.
    let lower = (0..n)
        .map(|i| {
            let off: f64 = m.row(i).iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.abs()).sum();
            m.get(i, i) - off
        })
        .fold(f64::INFINITY, f64::min);
    let shift = (-lower).max(0.0);
    let scale = (0..n)
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = m.mul_vec(v);
        axpy(&mut out, shift, v);
        out
    };

    // Oversampled block: convergence of the leading r pairs goes with the
    // gap to eigenvalue p + 1 rather than r + 1.
    let p = (2 * r).max(r + 8).min(n);
    let mut basis: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            (0..n)
                .map(|i| if i % p == j { 1.0 } else { 1e-3 * ((i * 7 + j * 13) % 11) as f64 })
                .collect()
        })
        .collect();
    orthonormalize(&mut basis);

    let mut ritz = Eigen {
        values: vec![],
        vectors: vec![],
    };
    for _ in 0..SUBSPACE_MAX_ITERS {
        let mut next: Vec<Vec<f64>> = basis.iter().map(|b| apply(b)).collect();
        orthonormalize(&mut next);
        // Rayleigh-Ritz on span(next).
        let images: Vec<Vec<f64>> = next.iter().map(|b| m.mul_vec(b)).collect();
        let mut small = SquareMatrix::zeros(p);
        for i in 0..p {
            for j in 0..p {
                small.set(i, j, dot(&next[i], &images[j]));
            }
        }
        let inner = symmetric_eigen(&small.symmetrized());
        let combine = |c: &[f64], from: &[Vec<f64>]| {
            let mut v = vec![0.0; n];
            for (coef, b) in c.iter().zip(from) {
                axpy(&mut v, *coef, b);
            }
            v
        };
        let vectors: Vec<Vec<f64>> = inner.vectors.iter().map(|c| combine(c, &next)).collect();
        let converged = (0..r).all(|i| {
            let mv = combine(&inner.vectors[i], &images);
            let res: f64 = mv
                .iter()
                .zip(&vectors[i])
                .map(|(a, b)| (a - inner.values[i] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            res <= SUBSPACE_REL_TOL * scale
        });
        ritz = Eigen {
            values: inner.values,
            vectors,
        };
        basis = ritz.vectors.clone();
        if converged {
            break;
        }
    }
    ritz.values.truncate(r);
    ritz.vectors.truncate(r);
    ritz
}

/// Sum of the `r` largest eigenvalues of a symmetric matrix.
pub fn kyfan_norm(m: &SquareMatrix, r: usize) -> Result<f64> {
    let d = m.dim();
    if r == 0 || r > d {
        return Err(Error::invalid(format!("rank {r} outside 1..={d}")));
    }
    let asym = m.asymmetry();
    if asym > 1e-9 {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (max |m_ij - m_ji| = {asym:e})"
        )));
    }
    Ok(top_eigen(m, r).values.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kyfan_identity_and_diagonal() {
        assert_abs_diff_eq!(kyfan_norm(&SquareMatrix::identity(3), 2).unwrap(), 2.0);
        let m = SquareMatrix::from_diag(&[3.0, 2.0, 1.0]);
        assert_abs_diff_eq!(kyfan_norm(&m, 2).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn kyfan_rejects_asymmetric_and_bad_rank() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(kyfan_norm(&m, 1), Err(Error::InvalidArgument(_))));
        let m = SquareMatrix::identity(2);
        assert!(kyfan_norm(&m, 0).is_err());
        assert!(kyfan_norm(&m, 3).is_err());
    }

    #[test]
    fn jacobi_reconstructs() {
        let m = SquareMatrix::from_rows(&[
            vec![4.0, 1.0, -2.0],
            vec![1.0, 2.0, 0.5],
            vec![-2.0, 0.5, -3.0],
        ])
        .unwrap();
        let e = symmetric_eigen(&m);
        for (val, vec) in e.values.iter().zip(&e.vectors) {
            let mv = m.mul_vec(vec);
            for (a, b) in mv.iter().zip(vec) {
                assert_abs_diff_eq!(*a, val * b, epsilon = 1e-12);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn subspace_iteration_matches_dense() {
        let n = 80;
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = (((i * 31 + j * 17) % 23) as f64 - 11.0) / 7.0;
                m.set(i, j, v);
                m.set(j, i, v);
            }
            m.set(i, i, m.get(i, i) + i as f64 * 0.5);
        }
        let dense = symmetric_eigen(&m);
        let top = top_eigen(&m, 4);
        for (a, b) in top.values.iter().zip(&dense.values) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}
