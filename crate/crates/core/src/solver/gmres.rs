//! Full (non-restarted) right-preconditioned GMRES.

/// Result of a GMRES run.
#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual estimate after each iteration, starting with 1.
    pub residual_history: Vec<f64>,
    /// `‖b − A x‖ / ‖b‖` recomputed from the returned iterate.
    pub true_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `v ↦ out`, writing a matrix-vector product into `out`.
pub type LinearMap<'a> = &'a dyn Fn(&[f64], &mut [f64]);

/// Solve `A x = b` as `A M y = b`, `x = M y`, with modified Gram–Schmidt
/// Arnoldi and Givens rotations. The initial guess is zero. Stops when the
/// relative residual estimate is at most `tol` or after `max_iter` steps.
pub fn gmres(
    apply_op: LinearMap<'_>,
    b: &[f64],
    apply_precond: Option<LinearMap<'_>>,
    tol: f64,
    max_iter: usize,
) -> GmresOutcome {
    let n = b.len();
    let beta = norm(b);
    if beta == 0.0 || n == 0 {
        return GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual_history: vec![0.0],
            true_residual: 0.0,
            converged: true,
        };
    }
    let max_iter = max_iter.min(n).max(1);
    let mut v: Vec<Vec<f64>> = vec![b.iter().map(|x| x / beta).collect()];
    let mut z: Vec<Vec<f64>> = Vec::new();
    // columns of the Hessenberg matrix, already rotated
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut history = vec![1.0];
    let mut converged = false;
    let mut w = vec![0.0; n];

    for j in 0..max_iter {
        let zj = match apply_precond {
            Some(m) => {
                let mut t = vec![0.0; n];
                m(&v[j], &mut t);
                t
            }
            None => v[j].clone(),
        };
        apply_op(&zj, &mut w);
        z.push(zj);

        let mut col = vec![0.0; j + 2];
        for (i, vi) in v.iter().enumerate() {
            let hij = dot(&w, vi);
            col[i] = hij;
            for (wk, vk) in w.iter_mut().zip(vi) {
                *wk -= hij * vk;
            }
        }
        let hnext = norm(&w);
        col[j + 1] = hnext;

        for i in 0..j {
            let t = cs[i] * col[i] + sn[i] * col[i + 1];
            col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
            col[i] = t;
        }
        let r = col[j].hypot(col[j + 1]);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (col[j] / r, col[j + 1] / r) };
        col[j] = r;
        col[j + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[j]);
        g[j] *= c;
        h.push(col);

        let rel = g[j + 1].abs() / beta;
        history.push(rel);
        let breakdown = hnext <= 1e-14 * beta;
        if rel <= tol || breakdown {
            converged = rel <= tol || breakdown;
            break;
        }
        v.push(w.iter().map(|x| x / hnext).collect());
    }

    let k = h.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for (l, yl) in y.iter().enumerate().skip(i + 1) {
            s -= h[l][i] * yl;
        }
        y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
    }
    let mut x = vec![0.0; n];
    for (zi, yi) in z.iter().zip(&y) {
        for (xk, zk) in x.iter_mut().zip(zi) {
            *xk += yi * zk;
        }
    }
    apply_op(&x, &mut w);
    let res: Vec<f64> = b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect();
    GmresOutcome { x, iterations: k, residual_history: history, true_residual: norm(&res) / beta, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_one_step() {
        let b = vec![1.0, -2.0, 3.0];
        let op = |v: &[f64], o: &mut [f64]| o.copy_from_slice(v);
        let out = gmres(&op, &b, None, 1e-12, 10);
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        for (a, e) in out.x.iter().zip(&b) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_exact_within_dimension() {
        let d = [1.0, 2.0, 3.0, 5.0, 8.0];
        let b = vec![1.0; 5];
        let op = |v: &[f64], o: &mut [f64]| {
            for i in 0..5 {
                o[i] = d[i] * v[i];
            }
        };
        let out = gmres(&op, &b, None, 1e-12, 50);
        assert!(out.iterations <= 5);
        assert!(out.true_residual < 1e-12);
        for i in 0..5 {
            assert!((out.x[i] - 1.0 / d[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_preconditioner_one_step() {
        let d = [1.0, 10.0, 100.0, 1000.0];
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let op = |v: &[f64], o: &mut [f64]| {
            for i in 0..4 {
                o[i] = d[i] * v[i];
            }
        };
        let pc = |v: &[f64], o: &mut [f64]| {
            for i in 0..4 {
                o[i] = v[i] / d[i];
            }
        };
        let out = gmres(&op, &b, Some(&pc), 1e-12, 50);
        assert_eq!(out.iterations, 1);
        assert!(out.true_residual < 1e-14);
    }

    #[test]
    fn nonconvergence_flagged() {
        let n = 40;
        let op = |v: &[f64], o: &mut [f64]| {
            for i in 0..n {
                o[i] = (i as f64 + 1.0) * v[i];
            }
        };
        let b = vec![1.0; n];
        let out = gmres(&op, &b, None, 1e-14, 3);
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
        assert!(out.residual_history.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }
}
