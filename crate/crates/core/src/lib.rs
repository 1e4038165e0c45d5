//! Kernel-based quadrature on the unit sphere.
//!
//! Quadrature weights are obtained by integrating the restricted thin-plate
//! spline interpolant exactly: the weight vector `c` solves one saddle-point
//! system `A c + Ψ d = J₀ 𝟙`, `Ψᵀ c = J`, either by a dense factorization or
//! by GMRES on the projected system with a local-Lagrange preconditioner.
//!
//! Module map:
//!
//! * [`geometry`] – unit vectors, node sets, geodesic statistics, neighbor search.
//! * [`nodes`] – icosahedral, Fibonacci and Riesz-energy node families.
//! * [`special`] – Legendre polynomials, real spherical harmonics, Gauss rules.
//! * [`kernels`] – the surface-spline kernel, the space Π and test kernels.
//! * [`solver`] – direct and preconditioned-GMRES weight solvers.
//! * [`quadrature`] – applying rules, diagnostics, noise, spheroid transport.
//! * [`experiments`] – Funk–Hecke targets and convergence/stability studies.
//! * [`io`] – node and weight file formats.

pub mod error;
pub mod exec;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod nodes;
pub mod quadrature;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{GeodesicStats, NodeFamily, NodeSet, UnitVector3};
pub use kernels::{KernelVariant, SurfaceSplineKernel, TargetKernel};
pub use quadrature::QuadratureRule;
pub use solver::{SolverConfig, SolverMethod, WeightSolution};
