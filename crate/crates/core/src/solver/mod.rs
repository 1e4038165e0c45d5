//! Quadrature weights from the saddle-point system
//!
//! ```text
//! A c + Ψ d = J₀ 𝟙,   Ψᵀ c = J
//! ```
//!
//! solved either by a dense symmetric-indefinite factorization or by GMRES on
//! the projected system `P⊥ A P⊥ c⊥ = −P⊥ A c∥`, where `c∥ = Ψ(ΨᵀΨ)⁻¹J`.
//! Since `1 ∈ Π`, `P⊥ 𝟙 = 0` and `J₀` drops out of the iterative path.

mod gmres;
mod operator;
mod precond;

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

pub use gmres::{gmres, GmresOutcome, LinearMap};
pub use operator::{project_complement, KernelOperator, Projector};
pub use precond::{build_preconditioner, default_neighbors, LocalLagrangePreconditioner};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::NodeSet;
use crate::kernels::{pi_matrix, PiBasis, SurfaceSplineKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    Direct,
    Gmres,
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMethod::Direct => "direct",
            SolverMethod::Gmres => "gmres",
        })
    }
}

impl FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverMethod::Direct),
            "gmres" => Ok(SolverMethod::Gmres),
            other => Err(Error::InvalidArgument(format!("unknown solver `{other}` (expected direct or gmres)"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Relative residual target for GMRES.
    pub tol: f64,
    pub max_iter: usize,
    /// Stencil size; `None` selects [`default_neighbors`].
    pub neighbors: Option<usize>,
    /// Largest N accepted by the direct solver.
    pub dense_limit: usize,
    /// Largest N for which the iterative path stores A densely.
    pub cache_limit: usize,
    pub exec: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Gmres,
            tol: 1e-12,
            max_iter: 200,
            neighbors: None,
            dense_limit: 20000,
            cache_limit: 12000,
            exec: Execution::default(),
        }
    }
}

impl SolverConfig {
    pub fn direct() -> Self {
        Self { method: SolverMethod::Direct, ..Self::default() }
    }

    pub fn gmres() -> Self {
        Self::default()
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} must be positive", self.tol)));
        }
        if let Some(p) = self.neighbors {
            if p > n {
                return Err(Error::InvalidArgument(format!("stencil size {p} exceeds N = {n}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WeightSolution {
    /// Quadrature weights, stored as `c_par + c_perp`.
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub c_par: Vec<f64>,
    pub c_perp: Vec<f64>,
    pub method: SolverMethod,
    pub kernel: SurfaceSplineKernel,
    pub iterations: usize,
    /// `‖A c + Ψ d − J₀𝟙‖ / ‖J₀𝟙‖`.
    pub relative_residual: f64,
    /// `‖Ψᵀ c − J‖∞`.
    pub constraint_residual: f64,
    /// GMRES relative residual estimates (empty for direct solves).
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub neighbors: Option<usize>,
}

impl WeightSolution {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn negative_count(&self) -> usize {
        self.c.iter().filter(|&&v| v < 0.0).count()
    }
}

/// The assembled system for one kernel and node set. Ψ and J may be replaced
/// by `ΨB`, `BᵀJ` for an invertible 4×4 `B` without changing `c`.
pub struct SaddleSystem<'a> {
    kernel: SurfaceSplineKernel,
    nodes: &'a NodeSet,
    psi: Mat<f64>,
    j: Vec<f64>,
    j0: f64,
}

impl<'a> SaddleSystem<'a> {
    pub fn new(kernel: SurfaceSplineKernel, nodes: &'a NodeSet) -> Result<Self> {
        if kernel.m() != 2 {
            return Err(Error::InvalidArgument(format!(
                "weights are implemented for m = 2 only (got m = {})",
                kernel.m()
            )));
        }
        if nodes.len() < PiBasis::DIM {
            return Err(Error::DegenerateNodes(format!("need at least 4 nodes, got {}", nodes.len())));
        }
        let psi = pi_matrix(nodes)?;
        Ok(Self { kernel, nodes, psi, j: PiBasis::integrals().to_vec(), j0: kernel.integral_constant() })
    }

    /// Replace the Π basis by `ΨB` (row-major `b[r][c]`).
    pub fn with_basis_change(mut self, b: [[f64; 4]; 4]) -> Result<Self> {
        let bm = Mat::from_fn(4, 4, |r, c| b[r][c]);
        let psi = &self.psi * &bm;
        let j = (0..4).map(|c| (0..4).map(|r| b[r][c] * self.j[r]).sum()).collect();
        if operator::Projector::new(&psi).is_err() {
            return Err(Error::InvalidArgument("basis change is singular".into()));
        }
        self.psi = psi;
        self.j = j;
        Ok(self)
    }

    pub fn psi(&self) -> &Mat<f64> {
        &self.psi
    }

    pub fn j(&self) -> &[f64] {
        &self.j
    }

    pub fn j0(&self) -> f64 {
        self.j0
    }

    pub fn solve(&self, cfg: &SolverConfig) -> Result<WeightSolution> {
        match cfg.method {
            SolverMethod::Direct => self.solve_direct(cfg),
            SolverMethod::Gmres => self.solve_iterative(cfg),
        }
    }

    pub fn solve_direct(&self, cfg: &SolverConfig) -> Result<WeightSolution> {
        let n = self.nodes.len();
        cfg.validate(n)?;
        if n > cfg.dense_limit {
            return Err(Error::InvalidArgument(format!(
                "N = {n} exceeds the dense limit {}",
                cfg.dense_limit
            )));
        }
        let m = n + PiBasis::DIM;
        let pts = self.nodes.arrays();
        let k = self.kernel;
        let psi = &self.psi;
        let mut data = vec![0.0; m * m];
        cfg.exec.for_each_chunk(&mut data, m, |c, col| {
            if c < n {
                let b = pts[c];
                for (r, v) in col.iter_mut().enumerate().take(n) {
                    if r != c {
                        let a = pts[r];
                        *v = k.eval_unchecked(a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
                    }
                }
                for q in 0..PiBasis::DIM {
                    col[n + q] = psi[(c, q)];
                }
            } else {
                for (r, v) in col.iter_mut().enumerate().take(n) {
                    *v = psi[(r, c - n)];
                }
            }
        });
        let sys = MatRef::from_column_major_slice(&data, m, m);
        let mut rhs = Mat::<f64>::zeros(m, 1);
        for r in 0..n {
            rhs[(r, 0)] = self.j0;
        }
        for q in 0..PiBasis::DIM {
            rhs[(n + q, 0)] = self.j[q];
        }
        sys.lblt(Side::Lower).solve_in_place(&mut rhs);
        let sol: Vec<f64> = (0..m).map(|r| rhs[(r, 0)]).collect();
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(singular());
        }
        let c_raw = &sol[..n];
        let d = sol[n..].to_vec();

        let proj = Projector::new(&self.psi)?;
        let c_par = proj.min_norm_solution(&self.j);
        let c_perp: Vec<f64> = c_raw.iter().zip(&c_par).map(|(a, b)| a - b).collect();
        let c: Vec<f64> = c_par.iter().zip(&c_perp).map(|(a, b)| a + b).collect();

        // residuals straight from the assembled columns
        let ac: Vec<f64> = cfg.exec.map(n, |r| (0..n).map(|col| data[col * m + r] * c[col]).sum());
        let rel = self.saddle_residual(&ac, &c, &d);
        let cons = self.constraint_residual(&c);
        if !(rel < 1e-6) || !(cons < 1e-6) {
            return Err(singular());
        }
        Ok(WeightSolution {
            c,
            d,
            c_par,
            c_perp,
            method: SolverMethod::Direct,
            kernel: self.kernel,
            iterations: 0,
            relative_residual: rel,
            constraint_residual: cons,
            residual_history: Vec::new(),
            converged: true,
            neighbors: None,
        })
    }

    pub fn solve_iterative(&self, cfg: &SolverConfig) -> Result<WeightSolution> {
        let n = self.nodes.len();
        cfg.validate(n)?;
        let exec = cfg.exec;
        let proj = Projector::new(&self.psi)?;
        let c_par = proj.min_norm_solution(&self.j);
        let op = KernelOperator::new(self.kernel, self.nodes, cfg.cache_limit, exec);
        let a_cpar = op.apply_vec(&c_par);
        let mut b: Vec<f64> = a_cpar.iter().map(|v| -v).collect();
        proj.project_in_place(&mut b);
        // with no complement, or a right-hand side at rounding level, c⊥ = 0
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a_norm = a_cpar.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == proj.rank() || b_norm <= 64.0 * f64::EPSILON * a_norm {
            b.iter_mut().for_each(|v| *v = 0.0);
        }

        let p = cfg.neighbors.unwrap_or_else(|| default_neighbors(n));
        let p = if p <= PiBasis::DIM { n } else { p };
        let pc = build_preconditioner(&self.kernel, self.nodes, p, exec)?;

        // the last A(P⊥v) is kept so the final residual check doubles as A c⊥
        let last: RefCell<(Vec<f64>, Vec<f64>)> = RefCell::new((Vec::new(), Vec::new()));
        let apply_op = |v: &[f64], out: &mut [f64]| {
            let pv = proj.project(v);
            op.apply(&pv, out);
            let mut l = last.borrow_mut();
            l.0.clear();
            l.0.extend_from_slice(v);
            l.1.clear();
            l.1.extend_from_slice(out);
            drop(l);
            proj.project_in_place(out);
        };
        let apply_pc = |v: &[f64], out: &mut [f64]| {
            let pv = proj.project(v);
            pc.apply(&pv, out, exec);
            proj.project_in_place(out);
        };
        let g = gmres(&apply_op, &b, Some(&apply_pc), cfg.tol, cfg.max_iter);

        let c_perp = g.x;
        let a_cperp = {
            let l = last.borrow();
            if l.0 == c_perp {
                l.1.clone()
            } else {
                op.apply_vec(&proj.project(&c_perp))
            }
        };
        let c: Vec<f64> = c_par.iter().zip(&c_perp).map(|(a, b)| a + b).collect();
        // A c = Ã c + α(𝟙ᵀc)𝟙 + βX(Xᵀc)
        let (alpha, beta) = op.shift();
        let pts = self.nodes.arrays();
        let mut moments = [0.0; 4];
        for (p, ci) in pts.iter().zip(&c) {
            moments[0] += ci;
            for q in 0..3 {
                moments[q + 1] += ci * p[q];
            }
        }
        let ac: Vec<f64> = a_cpar
            .iter()
            .zip(&a_cperp)
            .zip(&pts)
            .map(|((u, v), p)| {
                u + v + alpha * moments[0] + beta * (p[0] * moments[1] + p[1] * moments[2] + p[2] * moments[3])
            })
            .collect();
        let r: Vec<f64> = ac.iter().map(|v| self.j0 - v).collect();
        let d = proj.least_squares(&r);
        let rel = self.saddle_residual(&ac, &c, &d);
        let cons = self.constraint_residual(&c);
        Ok(WeightSolution {
            c,
            d,
            c_par,
            c_perp,
            method: SolverMethod::Gmres,
            kernel: self.kernel,
            iterations: g.iterations,
            relative_residual: rel,
            constraint_residual: cons,
            residual_history: g.residual_history,
            converged: g.converged,
            neighbors: Some(p),
        })
    }

    fn saddle_residual(&self, ac: &[f64], _c: &[f64], d: &[f64]) -> f64 {
        let n = ac.len();
        let mut s = 0.0;
        for (i, a) in ac.iter().enumerate() {
            let psid: f64 = (0..d.len()).map(|q| self.psi[(i, q)] * d[q]).sum();
            let e = a + psid - self.j0;
            s += e * e;
        }
        s.sqrt() / (self.j0.abs() * (n as f64).sqrt())
    }

    fn constraint_residual(&self, c: &[f64]) -> f64 {
        (0..self.psi.ncols())
            .map(|q| {
                let v: f64 = c.iter().enumerate().map(|(i, ci)| self.psi[(i, q)] * ci).sum();
                (v - self.j[q]).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn singular() -> Error {
    Error::Singular("system singular (duplicate nodes or non-unisolvent Π)".into())
}

pub fn solve_direct(k: &SurfaceSplineKernel, x: &NodeSet, cfg: &SolverConfig) -> Result<WeightSolution> {
    SaddleSystem::new(*k, x)?.solve_direct(cfg)
}

pub fn solve_iterative(k: &SurfaceSplineKernel, x: &NodeSet, cfg: &SolverConfig) -> Result<WeightSolution> {
    SaddleSystem::new(*k, x)?.solve_iterative(cfg)
}

/// Dispatch on `cfg.method`.
pub fn compute_weights(k: &SurfaceSplineKernel, x: &NodeSet, cfg: &SolverConfig) -> Result<WeightSolution> {
    SaddleSystem::new(*k, x)?.solve(cfg)
}
