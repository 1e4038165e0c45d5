//! Matrix-vector products with the kernel matrix and the projector onto the
//! orthogonal complement of range(Ψ).

use faer::Mat;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::NodeSet;
use crate::kernels::SurfaceSplineKernel;
use crate::special::legendre_coefficient;

/// Block edge for on-the-fly products.
const TILE: usize = 256;

/// `v ↦ Ã v` with `Ã_ij = Φ(x_i·x_j) − α − β x_i·x_j`, where α and β are the
/// degree-0 and degree-1 Legendre coefficients of Φ. `A − Ã = α𝟙𝟙ᵀ + βXXᵀ`
/// has range in Π, so `P⊥ÃP⊥ = P⊥AP⊥`, but `Ã` lacks the large constant
/// mode of `A` that otherwise dominates rounding in the projected products.
///
/// The product is either taken from a cached dense matrix or evaluated on the
/// fly over symmetric tiles (each pair evaluated once, reduced in a fixed
/// order).
pub struct KernelOperator {
    kernel: SurfaceSplineKernel,
    points: Vec<[f64; 3]>,
    dense: Option<Vec<f64>>,
    alpha: f64,
    beta: f64,
    exec: Execution,
}

impl KernelOperator {
    /// Cache the dense matrix when `N ≤ cache_limit`.
    pub fn new(kernel: SurfaceSplineKernel, x: &NodeSet, cache_limit: usize, exec: Execution) -> Self {
        let alpha = kernel.integral_constant() / (4.0 * std::f64::consts::PI);
        let beta = legendre_coefficient(|t| kernel.eval_unchecked(t), 1).unwrap_or(0.0);
        let mut op = Self { kernel, points: x.arrays(), dense: None, alpha, beta, exec };
        if x.len() <= cache_limit {
            op.dense = Some(op.assemble());
        }
        op
    }

    /// `(α, β)` with `A − Ã = α𝟙𝟙ᵀ + βXXᵀ`.
    pub fn shift(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_cached(&self) -> bool {
        self.dense.is_some()
    }

    #[inline]
    fn entry(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let t = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        self.kernel.eval_unchecked(t) - self.alpha - self.beta * t
    }

    fn diagonal(&self) -> f64 {
        -self.alpha - self.beta
    }

    fn assemble(&self) -> Vec<f64> {
        let n = self.points.len();
        let p = &self.points;
        let mut data = vec![0.0; n * n];
        self.exec.for_each_chunk(&mut data, n.max(1), |i, row| {
            row[i] = self.diagonal();
            for j in i + 1..n {
                row[j] = self.entry(&p[i], &p[j]);
            }
        });
        for i in 0..n {
            for j in 0..i {
                data[i * n + j] = data[j * n + i];
            }
        }
        data
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        match &self.dense {
            Some(a) => {
                let n = self.points.len();
                self.exec.fill(out, |i| a[i * n..(i + 1) * n].iter().zip(v).map(|(x, y)| x * y).sum());
            }
            None => self.apply_tiled(v, out),
        }
    }

    pub fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply(v, &mut out);
        out
    }

    fn apply_tiled(&self, v: &[f64], out: &mut [f64]) {
        let n = self.points.len();
        let nb = n.div_ceil(TILE);
        let pairs: Vec<(usize, usize)> = (0..nb).flat_map(|i| (i..nb).map(move |j| (i, j))).collect();
        let p = &self.points;
        let parts = self.exec.map(pairs.len(), |t| {
            let (bi, bj) = pairs[t];
            let (i0, i1) = (bi * TILE, ((bi + 1) * TILE).min(n));
            let (j0, j1) = (bj * TILE, ((bj + 1) * TILE).min(n));
            let mut yi = vec![0.0; i1 - i0];
            let mut yj = vec![0.0; j1 - j0];
            for i in i0..i1 {
                let a = p[i];
                let jstart = if bi == bj { i + 1 } else { j0 };
                let mut acc = 0.0;
                for j in jstart..j1 {
                    let phi = self.entry(&a, &p[j]);
                    acc += phi * v[j];
                    yj[j - j0] += phi * v[i];
                }
                yi[i - i0] += acc;
            }
            (yi, yj)
        });
        let d = self.diagonal();
        for (o, vi) in out.iter_mut().zip(v) {
            *o = d * vi;
        }
        for (&(bi, bj), (yi, yj)) in pairs.iter().zip(&parts) {
            for (o, y) in out[bi * TILE..].iter_mut().zip(yi) {
                *o += y;
            }
            for (o, y) in out[bj * TILE..].iter_mut().zip(yj) {
                *o += y;
            }
        }
    }
}

/// Orthogonal projector `P⊥ = I − QQᵀ` built from a thin QR of Ψ.
pub struct Projector {
    n: usize,
    /// Columns of Q, each of length N.
    q: Vec<Vec<f64>>,
    /// Upper-triangular R (4×4).
    r: Vec<Vec<f64>>,
}

impl Projector {
    pub fn new(psi: &Mat<f64>) -> Result<Self> {
        let (n, m) = (psi.nrows(), psi.ncols());
        if n < m {
            return Err(Error::NotUnisolvent { rank: n });
        }
        let qr = psi.qr();
        let qm = qr.compute_thin_Q();
        let rm = qr.thin_R();
        let scale = (n as f64).sqrt();
        let rank = (0..m).filter(|&k| rm[(k, k)].abs() > 1e-10 * scale).count();
        if rank < m {
            return Err(Error::NotUnisolvent { rank });
        }
        let q = (0..m).map(|c| (0..n).map(|i| qm[(i, c)]).collect()).collect();
        let r = (0..m).map(|i| (0..m).map(|j| rm[(i, j)]).collect()).collect();
        Ok(Self { n, q, r })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    /// `Qᵀ v`.
    pub fn coords(&self, v: &[f64]) -> Vec<f64> {
        self.q.iter().map(|col| col.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `v − Q(Qᵀv)` in place.
    pub fn project_in_place(&self, v: &mut [f64]) {
        let s = self.coords(v);
        for (col, sk) in self.q.iter().zip(&s) {
            for (vi, qi) in v.iter_mut().zip(col) {
                *vi -= sk * qi;
            }
        }
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut w = v.to_vec();
        self.project_in_place(&mut w);
        w
    }

    /// Minimum-norm solution of `Ψᵀ c = j`, i.e. `Q R⁻ᵀ j`.
    pub fn min_norm_solution(&self, j: &[f64]) -> Vec<f64> {
        let m = self.rank();
        // forward substitution with Rᵀ (lower triangular)
        let mut y = vec![0.0; m];
        for i in 0..m {
            let mut s = j[i];
            for k in 0..i {
                s -= self.r[k][i] * y[k];
            }
            y[i] = s / self.r[i][i];
        }
        let mut c = vec![0.0; self.n];
        for (col, yk) in self.q.iter().zip(&y) {
            for (ci, qi) in c.iter_mut().zip(col) {
                *ci += yk * qi;
            }
        }
        c
    }

    /// Least-squares solution of `Ψ d ≈ v`, i.e. `R⁻¹ Qᵀ v`.
    pub fn least_squares(&self, v: &[f64]) -> Vec<f64> {
        let m = self.rank();
        let mut d = self.coords(v);
        for i in (0..m).rev() {
            let mut s = d[i];
            for k in i + 1..m {
                s -= self.r[i][k] * d[k];
            }
            d[i] = s / self.r[i][i];
        }
        d
    }
}

/// `v − Q(Qᵀv)` for Ψ, as a one-off call.
pub fn project_complement(psi: &Mat<f64>, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != psi.nrows() {
        return Err(Error::LengthMismatch { expected: psi.nrows(), actual: v.len() });
    }
    Ok(Projector::new(psi)?.project(v))
}
