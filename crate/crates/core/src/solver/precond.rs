//! Local-Lagrange preconditioner: for each node, cardinal interpolation on its
//! `p` nearest neighbors.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{NeighborIndex, NodeSet};
use crate::kernels::{PiBasis, SurfaceSplineKernel};

/// Default stencil size `2⌈(ln N)²⌉`, capped at N.
pub fn default_neighbors(n: usize) -> usize {
    if n < 2 {
        return n;
    }
    let l = (n as f64).ln();
    (2 * (l * l).ceil() as usize).min(n)
}

/// Sparse N×N matrix whose column `i` holds the kernel coefficients of the
/// local Lagrange function centered at node `i`.
#[derive(Debug, Clone)]
pub struct LocalLagrangePreconditioner {
    n: usize,
    p: usize,
    /// Column `i` occupies `col_idx[i*p..(i+1)*p]`, nearest first.
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    row_ptr: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
}

impl LocalLagrangePreconditioner {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stencil(&self) -> usize {
        self.p
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_idx[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.col_val[i * self.p..(i + 1) * self.p]
    }

    pub fn nnz(&self) -> usize {
        self.col_val.len()
    }

    /// `out = C v`, accumulated row by row in column order.
    pub fn apply(&self, v: &[f64], out: &mut [f64], exec: Execution) {
        exec.fill(out, |r| {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            self.row_col[s..e].iter().zip(&self.row_val[s..e]).map(|(&c, a)| a * v[c]).sum()
        });
    }
}

/// Solve the local saddle system for each node. Requires `4 < p ≤ N`
/// (or `p = N`).
pub fn build_preconditioner(
    k: &SurfaceSplineKernel,
    x: &NodeSet,
    p: usize,
    exec: Execution,
) -> Result<LocalLagrangePreconditioner> {
    let n = x.len();
    if p > n || (p <= 4 && p != n) {
        return Err(Error::InvalidArgument(format!("stencil size p = {p} must satisfy 4 < p ≤ N = {n}")));
    }
    let index = NeighborIndex::new(x.nodes());
    let pts = x.arrays();
    let cols: Vec<Result<(Vec<usize>, Vec<f64>)>> = exec.map(n, |i| {
        let nb = index.k_nearest(&x.get(i), p)?;
        let a = local_cardinal(k, &pts, &nb, i)?;
        Ok((nb, a))
    });
    let mut col_idx = Vec::with_capacity(n * p);
    let mut col_val = Vec::with_capacity(n * p);
    for c in cols {
        let (nb, a) = c?;
        col_idx.extend(nb);
        col_val.extend(a);
    }

    // transpose to rows with a stable counting sort, so each row lists its
    // columns in increasing order
    let mut row_ptr = vec![0usize; n + 1];
    for &r in &col_idx {
        row_ptr[r + 1] += 1;
    }
    for r in 0..n {
        row_ptr[r + 1] += row_ptr[r];
    }
    let mut fill = row_ptr.clone();
    let mut row_col = vec![0usize; col_idx.len()];
    let mut row_val = vec![0.0; col_idx.len()];
    for (e, (&r, &v)) in col_idx.iter().zip(&col_val).enumerate() {
        let dst = fill[r];
        row_col[dst] = e / p;
        row_val[dst] = v;
        fill[r] += 1;
    }
    Ok(LocalLagrangePreconditioner { n, p, col_idx, col_val, row_ptr, row_col, row_val })
}

fn local_cardinal(k: &SurfaceSplineKernel, pts: &[[f64; 3]], nb: &[usize], center: usize) -> Result<Vec<f64>> {
    let p = nb.len();
    let m = p + PiBasis::DIM;
    let entry = |r: usize, c: usize| -> f64 {
        match (r < p, c < p) {
            (true, true) => {
                if r == c {
                    return 0.0;
                }
                let (a, b) = (pts[nb[r]], pts[nb[c]]);
                k.eval_unchecked(a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
            }
            (true, false) => pi_entry(&pts[nb[r]], c - p),
            (false, true) => pi_entry(&pts[nb[c]], r - p),
            (false, false) => 0.0,
        }
    };
    let sys = Mat::from_fn(m, m, entry);
    let mut rhs = Mat::<f64>::zeros(m, 1);
    let pos = nb.iter().position(|&j| j == center).unwrap_or(0);
    rhs[(pos, 0)] = 1.0;
    sys.lblt(Side::Lower).solve_in_place(&mut rhs);
    let a: Vec<f64> = (0..p).map(|r| rhs[(r, 0)]).collect();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::LocalSingular { node: center });
    }
    Ok(a)
}

fn pi_entry(x: &[f64; 3], c: usize) -> f64 {
    if c == 0 {
        1.0
    } else {
        x[c - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodes::fibonacci_nodes;

    #[test]
    fn stencil_sizes() {
        assert_eq!(default_neighbors(2562), 124);
        assert_eq!(default_neighbors(40962), 226);
        assert_eq!(default_neighbors(4), 4);
    }

    #[test]
    fn columns_satisfy_local_moments() {
        let x = fibonacci_nodes(301).unwrap();
        let k = SurfaceSplineKernel::tps_m2();
        let c = build_preconditioner(&k, &x, 40, Execution::Parallel).unwrap();
        for i in 0..x.len() {
            let nb = c.neighbors(i);
            assert_eq!(nb[0], i);
            let a = c.column(i);
            let mut m = [0.0; 4];
            for (j, &idx) in nb.iter().enumerate() {
                let e = PiBasis::eval(&x.get(idx));
                for q in 0..4 {
                    m[q] += a[j] * e[q];
                }
            }
            for v in m {
                assert!(v.abs() < 1e-10, "moment {v}");
            }
        }
    }

    #[test]
    fn schedule_independent_and_row_apply_matches_columns() {
        let x = fibonacci_nodes(201).unwrap();
        let k = SurfaceSplineKernel::tps_m2();
        let a = build_preconditioner(&k, &x, 30, Execution::Sequential).unwrap();
        let b = build_preconditioner(&k, &x, 30, Execution::Parallel).unwrap();
        assert_eq!(a.col_val, b.col_val);
        let v: Vec<f64> = (0..201).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let mut out = vec![0.0; 201];
        a.apply(&v, &mut out, Execution::Parallel);
        let mut dense = vec![0.0; 201];
        for i in 0..201 {
            for (r, val) in a.neighbors(i).iter().zip(a.column(i)) {
                dense[*r] += val * v[i];
            }
        }
        for (o, d) in out.iter().zip(&dense) {
            assert!((o - d).abs() < 1e-12 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn bad_stencil_rejected() {
        let x = fibonacci_nodes(51).unwrap();
        let k = SurfaceSplineKernel::tps_m2();
        assert!(build_preconditioner(&k, &x, 52, Execution::Sequential).is_err());
        assert!(build_preconditioner(&k, &x, 3, Execution::Sequential).is_err());
    }
}
