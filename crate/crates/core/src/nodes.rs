//! Quasi-uniform node families: icosahedral, Fibonacci and Riesz-energy.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{NodeFamily, NodeSet, UnitVector3};

/// 1/φ with φ the golden ratio.
const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Parameters for one member of a node family.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    /// Subdivision level `n ≥ 1`, giving `10n² + 2` nodes.
    Icosahedral { level: usize },
    /// Odd `n ≥ 3`.
    Fibonacci { n: usize },
    MinEnergy(EnergyOptions),
}

impl FamilySpec {
    pub fn family(&self) -> NodeFamily {
        match self {
            FamilySpec::Icosahedral { .. } => NodeFamily::Icosahedral,
            FamilySpec::Fibonacci { .. } => NodeFamily::Fibonacci,
            FamilySpec::MinEnergy(_) => NodeFamily::MinEnergy,
        }
    }

    /// Number of nodes this spec generates.
    pub fn len(&self) -> usize {
        match self {
            FamilySpec::Icosahedral { level } => icosahedral_count(*level),
            FamilySpec::Fibonacci { n } => *n,
            FamilySpec::MinEnergy(o) => o.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Build a spec from a family and its size parameter (the level for
    /// icosahedral nodes, the count otherwise).
    pub fn from_family(family: NodeFamily, size: usize, seed: u64) -> Result<Self> {
        match family {
            NodeFamily::Icosahedral => Ok(FamilySpec::Icosahedral { level: size }),
            NodeFamily::Fibonacci => Ok(FamilySpec::Fibonacci { n: size }),
            NodeFamily::MinEnergy => Ok(FamilySpec::MinEnergy(EnergyOptions {
                n: size,
                seed,
                ..EnergyOptions::default()
            })),
            NodeFamily::Custom => Err(Error::InvalidArgument(
                "custom node sets are read from files, not generated".into(),
            )),
        }
    }

    pub fn generate(&self, exec: Execution) -> Result<NodeSet> {
        Ok(self.generate_with_report(exec)?.0)
    }

    pub fn generate_with_report(&self, exec: Execution) -> Result<(NodeSet, Option<EnergyReport>)> {
        match self {
            FamilySpec::Icosahedral { level } => Ok((icosahedral_nodes(*level)?, None)),
            FamilySpec::Fibonacci { n } => Ok((fibonacci_nodes(*n)?, None)),
            FamilySpec::MinEnergy(o) => {
                let (x, r) = min_energy_nodes(o, exec)?;
                Ok((x, Some(r)))
            }
        }
    }
}

/// Symmetric spherical Fibonacci lattice for odd `n`: index
/// `i ∈ [−(n−1)/2, (n−1)/2]` sits at latitude `asin(2i/n)` and longitude
/// `2π·frac(i/φ)`. The `i = 0` node is `(1, 0, 0)`.
pub fn fibonacci_points(n: usize) -> Vec<UnitVector3> {
    debug_assert!(n % 2 == 1);
    let half = (n as i64 - 1) / 2;
    (-half..=half)
        .map(|i| {
            let lat = (2.0 * i as f64 / n as f64).asin();
            let lon = 2.0 * PI * (i as f64 * INV_GOLDEN).rem_euclid(1.0);
            UnitVector3::from_lon_lat(lon, lat)
        })
        .collect()
}

pub fn fibonacci_nodes(n: usize) -> Result<NodeSet> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "Fibonacci nodes need an odd count ≥ 3, got {n}"
        )));
    }
    NodeSet::new(fibonacci_points(n), NodeFamily::Fibonacci)
}

pub fn icosahedral_count(level: usize) -> usize {
    10 * level * level + 2
}

/// Icosahedron with vertices at ±e_z and two rings of five at z = ±1/√5.
/// Index 0 is the north pole, 1..=5 the upper ring, 6..=10 the lower ring
/// (offset by 36°), 11 the south pole.
pub fn icosahedron() -> ([[f64; 3]; 12], [[usize; 3]; 20]) {
    let z = 1.0 / 5f64.sqrt();
    let r = 2.0 * z;
    let mut v = [[0.0; 3]; 12];
    v[0] = [0.0, 0.0, 1.0];
    v[11] = [0.0, 0.0, -1.0];
    for k in 0..5 {
        let a = 2.0 * PI * k as f64 / 5.0;
        let b = a + PI / 5.0;
        v[1 + k] = [r * a.cos(), r * a.sin(), z];
        v[6 + k] = [r * b.cos(), r * b.sin(), -z];
    }
    let mut f = [[0usize; 3]; 20];
    for k in 0..5 {
        let u0 = 1 + k;
        let u1 = 1 + (k + 1) % 5;
        let l0 = 6 + k;
        let l1 = 6 + (k + 1) % 5;
        f[4 * k] = [0, u0, u1];
        f[4 * k + 1] = [u0, l0, u1];
        f[4 * k + 2] = [u1, l0, l1];
        f[4 * k + 3] = [11, l1, l0];
    }
    (v, f)
}

fn lerp_point(parts: &[(f64, [f64; 3])], n: f64) -> UnitVector3 {
    let mut p = [0.0; 3];
    for (w, v) in parts {
        for d in 0..3 {
            p[d] += w * v[d];
        }
    }
    UnitVector3::new(p[0] / n, p[1] / n, p[2] / n).expect("icosahedral point is nonzero")
}

/// Each face is split into `level²` triangles by `level`-fold edge subdivision
/// in barycentric coordinates and every point is projected radially. Nodes
/// are ordered: 12 vertices, then edge interiors (edges sorted by vertex
/// pair, points running from the lower to the higher vertex index), then
/// face interiors.
pub fn icosahedral_nodes(level: usize) -> Result<NodeSet> {
    if level == 0 {
        return Err(Error::InvalidArgument("icosahedral level must be ≥ 1".into()));
    }
    let (v, faces) = icosahedron();
    let n = level;
    let nf = n as f64;
    let mut out: Vec<UnitVector3> = Vec::with_capacity(icosahedral_count(n));
    out.extend(v.iter().map(|a| UnitVector3::from_array(*a).unwrap()));

    let mut edges: Vec<(usize, usize)> = faces
        .iter()
        .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    debug_assert_eq!(edges.len(), 30);
    for &(a, b) in &edges {
        for t in 1..n {
            let t = t as f64;
            out.push(lerp_point(&[(nf - t, v[a]), (t, v[b])], nf));
        }
    }
    for f in &faces {
        for i in 1..n {
            for j in 1..n - i {
                let k = n - i - j;
                out.push(lerp_point(
                    &[(i as f64, v[f[0]]), (j as f64, v[f[1]]), (k as f64, v[f[2]])],
                    nf,
                ));
            }
        }
    }
    debug_assert_eq!(out.len(), icosahedral_count(n));
    NodeSet::new(out, NodeFamily::Icosahedral)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyOptions {
    pub n: usize,
    pub seed: u64,
    /// Riesz exponent.
    pub riesz_s: f64,
    pub max_iter: usize,
    /// Stop when the max tangential gradient norm drops below `grad_tol · N`.
    pub grad_tol: f64,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self { n: 4, seed: 0, riesz_s: 3.0, max_iter: 300, grad_tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct EnergyReport {
    /// Energy of the start configuration followed by every accepted step.
    pub energies: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_grad_norm: f64,
    pub warning: Option<String>,
}

/// Riesz energy `Σ_{i≠j} ‖xᵢ − xⱼ‖^{−s}` and its Euclidean gradient.
/// Rows are accumulated independently and summed in index order.
pub fn riesz_energy_and_gradient(
    pts: &[[f64; 3]],
    s: f64,
    exec: Execution,
) -> (f64, Vec<[f64; 3]>) {
    let cube = s == 3.0;
    let rows = exec.map(pts.len(), |i| {
        let p = pts[i];
        let mut e = 0.0;
        let mut g = [0.0; 3];
        for (j, q) in pts.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let f = if cube { 1.0 / (r2 * r2.sqrt()) } else { r2.powf(-0.5 * s) };
            e += f;
            // d/dp of r^{-s} is −s·r^{−s−2}·d; pair appears twice in the sum
            let c = -2.0 * s * f / r2;
            g[0] += c * d[0];
            g[1] += c * d[1];
            g[2] += c * d[2];
        }
        (e, g)
    });
    let energy = rows.iter().map(|r| r.0).sum();
    (energy, rows.into_iter().map(|r| r.1).collect())
}

fn tangential(g: &[[f64; 3]], x: &[[f64; 3]]) -> Vec<[f64; 3]> {
    g.iter()
        .zip(x)
        .map(|(g, p)| {
            let r = g[0] * p[0] + g[1] * p[1] + g[2] * p[2];
            [g[0] - r * p[0], g[1] - r * p[1], g[2] - r * p[2]]
        })
        .collect()
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn start_configuration(o: &EnergyOptions) -> Vec<[f64; 3]> {
    let odd = o.n | 1;
    let mut pts: Vec<[f64; 3]> = fibonacci_points(odd.max(3)).iter().map(|p| p.to_array()).collect();
    pts.truncate(o.n);
    // seeded tangential jitter of a few percent of the spacing
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let amp = 0.05 * (4.0 * PI / o.n as f64).sqrt();
    for p in pts.iter_mut() {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let r = v[0] * p[0] + v[1] * p[1] + v[2] * p[2];
        let q = [
            p[0] + amp * (v[0] - r * p[0]),
            p[1] + amp * (v[1] - r * p[1]),
            p[2] + amp * (v[2] - r * p[2]),
        ];
        *p = UnitVector3::from_array(q).unwrap().to_array();
    }
    pts
}

/// Locally minimize Riesz energy by projected steepest descent with an
/// Armijo backtracking line search, starting from a jittered Fibonacci
/// lattice (the odd lattice of size `n | 1`, truncated to `n`). Every
/// accepted step strictly lowers the energy. Hitting `max_iter` is not an
/// error: the last iterate is returned with a warning in the report.
pub fn min_energy_nodes(o: &EnergyOptions, exec: Execution) -> Result<(NodeSet, EnergyReport)> {
    if o.n < 2 {
        return Err(Error::InvalidArgument("min-energy nodes need N ≥ 2".into()));
    }
    if !(o.riesz_s > 0.0) {
        return Err(Error::InvalidArgument("Riesz exponent must be positive".into()));
    }
    let n = o.n;
    let mut x = start_configuration(o);
    let (mut energy, g) = riesz_energy_and_gradient(&x, o.riesz_s, exec);
    let mut gt = tangential(&g, &x);
    let mut energies = vec![energy];
    let tol = o.grad_tol * n as f64;
    let spacing = (4.0 * PI / n as f64).sqrt();
    let gmax = |gt: &[[f64; 3]]| gt.iter().map(norm3).fold(0.0, f64::max);
    let mut alpha = 0.1 * spacing / gmax(&gt).max(f64::MIN_POSITIVE);
    let mut converged = false;
    let mut stalled = false;
    let mut iterations = 0;

    while iterations < o.max_iter {
        let gm = gmax(&gt);
        if gm < tol {
            converged = true;
            break;
        }
        let g2: f64 = gt.iter().map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sum();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<[f64; 3]> = x
                .iter()
                .zip(&gt)
                .map(|(p, d)| {
                    UnitVector3::new(p[0] - alpha * d[0], p[1] - alpha * d[1], p[2] - alpha * d[2])
                        .map(|u| u.to_array())
                        .unwrap_or(*p)
                })
                .collect();
            let (e_trial, g_trial) = riesz_energy_and_gradient(&trial, o.riesz_s, exec);
            if e_trial <= energy - 1e-4 * alpha * g2 && e_trial < energy {
                x = trial;
                energy = e_trial;
                gt = tangential(&g_trial, &x);
                energies.push(energy);
                alpha *= 1.5;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        if !accepted {
            stalled = true;
            break;
        }
    }
    if !converged && gmax(&gt) < tol {
        converged = true;
    }
    let final_grad_norm = gmax(&gt);
    let warning = (!converged).then(|| {
        if stalled {
            format!("line search stalled after {iterations} iterations (max tangential gradient {final_grad_norm:e})")
        } else {
            format!("iteration cap {} reached (max tangential gradient {final_grad_norm:e})", o.max_iter)
        }
    });
    let nodes = x.iter().map(|p| UnitVector3::from_array(*p)).collect::<Result<Vec<_>>>()?;
    let set = NodeSet::new(nodes, NodeFamily::MinEnergy)?;
    Ok((
        set,
        EnergyReport { energies, iterations, converged, final_grad_norm, warning },
    ))
}
