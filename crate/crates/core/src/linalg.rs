//! Small dense linear algebra for the information matrices.
//!
//! Dimensions here are the feature and arrival-basis dimensions (tens at
//! most), so everything is stored densely and the eigensolver is a cyclic
//! Jacobi sweep.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Relative ridge added to every matrix before a factorization.
pub const RIDGE: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    math::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Euclidean projection of `w` onto the ball `{u : |u - center| <= radius}`.
pub fn project_to_ball(w: &mut [f64], center: &[f64], radius: f64) {
    let dist = distance(w, center);
    if dist > radius {
        let scale = if dist > 0.0 { radius / dist } else { 0.0 };
        for (wi, ci) in w.iter_mut().zip(center) {
            *wi = ci + (*wi - ci) * scale;
        }
    }
}

/// Dense symmetric matrix with full row-major storage.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    /// Builds from row-major data, symmetrizing `(A + A^T) / 2`.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), dim * dim, "row-major data has wrong length");
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = 0.5 * (data[i * dim + j] + data[j * dim + i]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// `self += scale * x x^T`.
    pub fn add_outer(&mut self, scale: f64, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim;
        for i in 0..d {
            let si = scale * x[i];
            if si == 0.0 {
                continue;
            }
            let row = &mut self.data[i * d..(i + 1) * d];
            for (r, xj) in row.iter_mut().zip(x) {
                *r += si * xj;
            }
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, scale: f64, other: &SymMatrix) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| dot(&self.data[i * d..(i + 1) * d], x))
            .collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// Largest entrywise asymmetry `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in (i + 1)..d {
                worst = worst.max(math::abs(self.get(i, j) - self.get(j, i)));
            }
        }
        worst
    }

    /// Copy with `RIDGE * trace / d` added to the diagonal.
    pub fn ridged(&self) -> SymMatrix {
        let mut m = self.clone();
        if self.dim == 0 {
            return m;
        }
        let ridge = RIDGE * self.trace() / self.dim as f64;
        if ridge > 0.0 {
            for i in 0..self.dim {
                m.data[i * self.dim + i] += ridge;
            }
        }
        m
    }

    /// Cholesky factorization `A = L L^T`; `None` unless numerically positive definite.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let d = self.dim;
        let mut l = vec![0.0; d * d];
        for j in 0..d {
            let mut diag = self.get(j, j);
            for k in 0..j {
                diag -= l[j * d + k] * l[j * d + k];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return None;
            }
            let ljj = math::sqrt(diag);
            l[j * d + j] = ljj;
            for i in (j + 1)..d {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = s / ljj;
            }
        }
        Some(Cholesky { dim: d, l })
    }

    /// Eigen-decomposition by cyclic Jacobi rotations.
    pub fn eigen(&self) -> SymEigen {
        jacobi_eigen(self)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().values.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen().values.last().copied().unwrap_or(0.0)
    }
}

/// Lower-triangular Cholesky factor.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut y = b.to_vec();
        for i in 0..d {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * d + k] * y[k];
            }
            y[i] = s / self.l[i * d + i];
        }
        y
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut x = self.forward(b);
        for i in (0..d).rev() {
            let mut s = x[i];
            for k in (i + 1)..d {
                s -= self.l[k * d + i] * x[k];
            }
            x[i] = s / self.l[i * d + i];
        }
        x
    }

    /// `log det A`.
    pub fn log_det(&self) -> f64 {
        (0..self.dim)
            .map(|i| 2.0 * math::ln(self.l[i * self.dim + i]))
            .sum()
    }

    /// `x^T A^{-1} x`.
    pub fn inverse_quad_form(&self, x: &[f64]) -> f64 {
        let y = self.forward(x);
        dot(&y, &y)
    }

    /// `L^{-1} M L^{-T}`, which shares its spectrum with `A^{-1/2} M A^{-1/2}`.
    pub fn congruence(&self, m: &SymMatrix) -> SymMatrix {
        let d = self.dim;
        assert_eq!(m.dim(), d);
        // columns of L^{-1} M
        let mut left = vec![0.0; d * d];
        for j in 0..d {
            let col: Vec<f64> = (0..d).map(|i| m.get(i, j)).collect();
            let y = self.forward(&col);
            for i in 0..d {
                left[i * d + j] = y[i];
            }
        }
        // (L^{-1} (L^{-1} M)^T)^T
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            let row: Vec<f64> = left[i * d..(i + 1) * d].to_vec();
            let y = self.forward(&row);
            for j in 0..d {
                out[i * d + j] = y[j];
            }
        }
        SymMatrix::from_row_major(d, &out)
    }
}

/// Eigenvalues in ascending order with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the eigenvector of `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

fn jacobi_eigen(m: &SymMatrix) -> SymEigen {
    let d = m.dim();
    let mut a = m.as_slice().to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a[i * d + j] * a[i * d + j];
            }
        }
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = math::signum(theta) / (math::abs(theta) + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[i * d + i].total_cmp(&a[j * d + j]));
    SymEigen {
        values: order.iter().map(|&i| a[i * d + i]).collect(),
        vectors: order
            .iter()
            .map(|&i| (0..d).map(|k| v[k * d + i]).collect())
            .collect(),
    }
}

/// Operator norm of `A^{-1/2} M A^{-1/2}` for symmetric `M` and PD `A`
/// given through its Cholesky factor.
pub fn congruence_opnorm(chol: &Cholesky, m: &SymMatrix) -> f64 {
    let c = chol.congruence(m);
    let e = c.eigen();
    e.values
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(math::abs(*v)))
}
