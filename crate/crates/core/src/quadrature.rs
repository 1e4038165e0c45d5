//! Quadrature rules: application, weight diagnostics, noise propagation and
//! transport to surfaces given by a diffeomorphism of S².

use std::f64::consts::PI;
use std::fmt;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::NodeSet;
use crate::io::Header;
use crate::kernels::{pi_matrix, PiBasis, SurfaceSplineKernel};
use crate::solver::{SolverConfig, WeightSolution};
use crate::special::gauss_legendre_rule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Sphere,
    /// `x² + y² + z²/a² = 1`.
    Spheroid { a: f64 },
    Custom,
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Surface::Sphere => f.write_str("sphere"),
            Surface::Spheroid { a } => write!(f, "spheroid(a={a:.16e})"),
            Surface::Custom => f.write_str("custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    surface: Surface,
    provenance: Header,
}

/// Neumaier-compensated sum.
pub fn compensated_sum(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut comp = 0.0f64;
    for v in it {
        let t = s + v;
        if s.abs() >= v.abs() {
            comp += (s - t) + v;
        } else {
            comp += (v - t) + s;
        }
        s = t;
    }
    s + comp
}

impl QuadratureRule {
    /// A rule on S². Weights must be finite and sum to 4π within 1e-9
    /// relative.
    pub fn sphere(x: &NodeSet, weights: Vec<f64>, provenance: Header) -> Result<Self> {
        if weights.len() != x.len() {
            return Err(Error::LengthMismatch { expected: x.len(), actual: weights.len() });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { node: i });
        }
        let s = compensated_sum(weights.iter().copied());
        if ((s - 4.0 * PI) / (4.0 * PI)).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("sphere weights sum to {s}, not 4π")));
        }
        Ok(Self { points: x.arrays(), weights, surface: Surface::Sphere, provenance })
    }

    /// Rule from a solver result, recording kernel and solver in the header.
    pub fn from_solution(x: &NodeSet, sol: &WeightSolution, cfg: &SolverConfig) -> Result<Self> {
        let mut h: Header = vec![
            ("kernel".into(), sol.kernel.name()),
            ("solver".into(), sol.method.to_string()),
            ("tol".into(), format!("{:e}", cfg.tol)),
            ("iterations".into(), sol.iterations.to_string()),
            ("residual".into(), format!("{:.6e}", sol.relative_residual)),
        ];
        if let Some(p) = sol.neighbors {
            h.push(("neighbors".into(), p.to_string()));
        }
        Self::sphere(x, sol.c.clone(), h)
    }

    /// A rule with arbitrary points, used for transported rules.
    pub fn from_parts(points: Vec<[f64; 3]>, weights: Vec<f64>, surface: Surface, provenance: Header) -> Result<Self> {
        if weights.len() != points.len() {
            return Err(Error::LengthMismatch { expected: points.len(), actual: weights.len() });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { node: i });
        }
        Ok(Self { points, weights, surface, provenance })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn surface(&self) -> Surface {
        self.surface
    }

    pub fn provenance(&self) -> &Header {
        &self.provenance
    }

    /// `Σ c_ξ f(ξ)` with compensated summation.
    pub fn apply<F: Fn(&[f64; 3]) -> f64>(&self, f: F) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.len());
        for (i, (p, w)) in self.points.iter().zip(&self.weights).enumerate() {
            let v = f(p);
            if !v.is_finite() {
                return Err(Error::NonFinite { node: i });
            }
            terms.push(w * v);
        }
        Ok(compensated_sum(terms))
    }

    /// `Σ c_i v_i` for sampled values.
    pub fn apply_values(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: v.len() });
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { node: i });
        }
        Ok(compensated_sum(self.weights.iter().zip(v).map(|(w, x)| w * x)))
    }

    /// Surface area the rule is meant to integrate over.
    pub fn area(&self) -> Option<f64> {
        match self.surface {
            Surface::Sphere => Some(4.0 * PI),
            Surface::Spheroid { a } => oblate_spheroid_area(a).ok(),
            Surface::Custom => None,
        }
    }

    pub fn diagnostics(&self) -> WeightDiagnostics {
        let n = self.len();
        let sum = compensated_sum(self.weights.iter().copied());
        let w = &self.weights;
        WeightDiagnostics {
            n,
            sum,
            mean: sum / n as f64,
            expected_mean: self.area().map(|a| a / n as f64),
            min: w.iter().copied().fold(f64::INFINITY, f64::min),
            max: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            l1: compensated_sum(w.iter().map(|v| v.abs())),
            l2: compensated_sum(w.iter().map(|v| v * v)).sqrt(),
            negative: w.iter().filter(|&&v| v < 0.0).count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDiagnostics {
    pub n: usize,
    pub sum: f64,
    pub mean: f64,
    /// Area / N when the surface area is known.
    pub expected_mean: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub l1: f64,
    pub l2: f64,
    pub negative: usize,
}

impl WeightDiagnostics {
    pub fn mean_relative_error(&self) -> Option<f64> {
        self.expected_mean.map(|e| ((self.mean - e) / e).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEstimate {
    pub sampled: f64,
    pub exact: f64,
    pub samples: usize,
}

impl NoiseEstimate {
    pub fn ratio(&self) -> f64 {
        self.sampled / self.exact
    }
}

/// Monte-Carlo standard deviation of `Q(ν)` for i.i.d. `N(0, σ²)` node noise,
/// next to the exact value `σ‖c‖₂`. Sample `s` draws from ChaCha8 seeded with
/// `seed` on stream `s`, so the result does not depend on `exec`.
pub fn noise_stddev(rule: &QuadratureRule, sigma: f64, samples: usize, seed: u64, exec: Execution) -> Result<NoiseEstimate> {
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {samples}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("noise level {sigma} must be positive")));
    }
    let w = rule.weights();
    let q = exec.map(samples, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        compensated_sum(w.iter().map(|c| {
            let z: f64 = StandardNormal.sample(&mut rng);
            c * sigma * z
        }))
    });
    let mean = q.iter().sum::<f64>() / samples as f64;
    let var = q.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (samples - 1) as f64;
    let exact = sigma * compensated_sum(w.iter().map(|c| c * c)).sqrt();
    Ok(NoiseEstimate { sampled: var.sqrt(), exact, samples })
}

/// Surface area of `x² + y² + z²/a² = 1`, `0 < a ≤ 1`.
pub fn oblate_spheroid_area(a: f64) -> Result<f64> {
    check_a(a)?;
    if a == 1.0 {
        return Ok(4.0 * PI);
    }
    let e = (1.0 - a * a).sqrt();
    Ok(2.0 * PI * (1.0 + a * a / e * e.atanh()))
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Domain(format!("spheroid ratio a = {a} outside (0, 1]")));
    }
    Ok(())
}

/// Area scale factor at a spheroid point `(x, y, z_s)`:
/// `√(a² + (a⁻² − 1) z_s²)`.
pub fn spheroid_scale_surface(a: f64, p: &[f64; 3]) -> f64 {
    (a * a + (1.0 / (a * a) - 1.0) * p[2] * p[2]).sqrt()
}

/// The same factor in sphere coordinates, `√(a² + (1 − a²) z²)`.
pub fn spheroid_scale_sphere(a: f64, z: f64) -> f64 {
    (a * a + (1.0 - a * a) * z * z).sqrt()
}

/// Transport a rule by `map`, multiplying each weight by `scale` evaluated
/// at the mapped node.
pub fn diffeo_rule<S, M>(rule: &QuadratureRule, scale: S, map: M, surface: Surface) -> Result<QuadratureRule>
where
    S: Fn(&[f64; 3]) -> f64,
    M: Fn(&[f64; 3]) -> [f64; 3],
{
    let mut pts = Vec::with_capacity(rule.len());
    let mut w = Vec::with_capacity(rule.len());
    for (i, (p, c)) in rule.points().iter().zip(rule.weights()).enumerate() {
        let q = map(p);
        let s = scale(&q);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("scale factor {s} at node {i} is not positive")));
        }
        pts.push(q);
        w.push(s * c);
    }
    let mut h = rule.provenance().clone();
    h.push(("surface".into(), surface.to_string()));
    QuadratureRule::from_parts(pts, w, surface, h)
}

/// Oblate-spheroid rule from a sphere rule.
pub fn spheroid_rule(rule: &QuadratureRule, a: f64) -> Result<QuadratureRule> {
    check_a(a)?;
    if rule.surface() != Surface::Sphere {
        return Err(Error::InvalidArgument("spheroid transport needs a sphere rule".into()));
    }
    let pts: Vec<[f64; 3]> = rule.points().iter().map(|p| [p[0], p[1], a * p[2]]).collect();
    let w = rule.points().iter().zip(rule.weights()).map(|(p, c)| spheroid_scale_sphere(a, p[2]) * c).collect();
    let surface = Surface::Spheroid { a };
    let mut h = rule.provenance().clone();
    h.push(("surface".into(), surface.to_string()));
    QuadratureRule::from_parts(pts, w, surface, h)
}

/// Tensor rule: `n_lat` Gauss–Legendre nodes in z times `n_lon` equispaced
/// longitudes. Exact for spherical polynomials of degree < min(2 n_lat, n_lon).
pub fn product_rule(n_lat: usize, n_lon: usize) -> QuadratureRule {
    let (z, wz) = gauss_legendre_rule(n_lat);
    let dphi = 2.0 * PI / n_lon as f64;
    let mut pts = Vec::with_capacity(n_lat * n_lon);
    let mut w = Vec::with_capacity(n_lat * n_lon);
    for (zi, wi) in z.iter().zip(&wz) {
        let r = (1.0 - zi * zi).max(0.0).sqrt();
        for k in 0..n_lon {
            let phi = (k as f64 + 0.5) * dphi;
            pts.push([r * phi.cos(), r * phi.sin(), *zi]);
            w.push(wi * dphi);
        }
    }
    let h = vec![("rule".into(), format!("product {n_lat}x{n_lon}"))];
    QuadratureRule { points: pts, weights: w, surface: Surface::Sphere, provenance: h }
}

#[derive(Debug, Clone)]
pub struct LagrangeProbe {
    pub node: usize,
    pub weight: f64,
    /// `∫ χ_ξ dμ` from the probe rule.
    pub integral: f64,
    /// `∫ |χ_ξ| dμ` from the probe rule.
    pub l1: f64,
    /// `max_η |χ_ξ(η) − δ_ξη|` over the nodes.
    pub cardinality_error: f64,
}

#[derive(Debug, Clone)]
pub struct LagrangeReport {
    pub probes: Vec<LagrangeProbe>,
    /// `max_x Σ_ξ |χ_ξ(x)|` over probe points, summed over the probed ξ.
    pub lebesgue_sum: f64,
}

/// Global Lagrange functions for a few nodes, evaluated on a probe rule.
pub fn lagrange_diagnostic(
    k: &SurfaceSplineKernel,
    x: &NodeSet,
    weights: &[f64],
    probe_nodes: &[usize],
    probe_rule: &QuadratureRule,
    exec: Execution,
) -> Result<LagrangeReport> {
    let n = x.len();
    if n > 5000 {
        return Err(Error::InvalidArgument(format!("N = {n} too large for the Lagrange diagnostic")));
    }
    if weights.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: weights.len() });
    }
    if let Some(&bad) = probe_nodes.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!("probe node {bad} out of range")));
    }
    let psi = pi_matrix(x)?;
    let pts = x.arrays();
    let m = n + PiBasis::DIM;
    let sys = Mat::from_fn(m, m, |r, c| match (r < n, c < n) {
        (true, true) if r == c => 0.0,
        (true, true) => k.eval_unchecked(dot(&pts[r], &pts[c])),
        (true, false) => psi[(r, c - n)],
        (false, true) => psi[(c, r - n)],
        (false, false) => 0.0,
    });
    let mut rhs = Mat::<f64>::zeros(m, probe_nodes.len());
    for (col, &i) in probe_nodes.iter().enumerate() {
        rhs[(i, col)] = 1.0;
    }
    sys.lblt(Side::Lower).solve_in_place(&mut rhs);
    let coef: Vec<Vec<f64>> = (0..probe_nodes.len()).map(|c| (0..m).map(|r| rhs[(r, c)]).collect()).collect();
    if coef.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Singular("Lagrange system singular".into()));
    }

    let eval = |a: &[f64], y: &[f64; 3]| -> f64 {
        let s: f64 = pts.iter().zip(a).map(|(p, ai)| ai * k.eval_unchecked(dot(p, y))).sum();
        s + a[n] + a[n + 1] * y[0] + a[n + 2] * y[1] + a[n + 3] * y[2]
    };
    let probe_pts = probe_rule.points();
    // values[j][t]: χ for probed node j at probe point t
    let values: Vec<Vec<f64>> = coef.iter().map(|a| exec.map(probe_pts.len(), |t| eval(a, &probe_pts[t]))).collect();

    let mut probes = Vec::new();
    for (j, &i) in probe_nodes.iter().enumerate() {
        let at_nodes = exec.map(n, |e| eval(&coef[j], &pts[e]));
        let card = at_nodes
            .iter()
            .enumerate()
            .map(|(e, v)| (v - if e == i { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        probes.push(LagrangeProbe {
            node: i,
            weight: weights[i],
            integral: probe_rule.apply_values(&values[j])?,
            l1: compensated_sum(values[j].iter().zip(probe_rule.weights()).map(|(v, w)| v.abs() * w)),
            cardinality_error: card,
        });
    }
    let lebesgue_sum = (0..probe_pts.len())
        .map(|t| values.iter().map(|v| v[t].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(LagrangeReport { probes, lebesgue_sum })
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NodeFamily, UnitVector3};

    fn tetra_rule() -> QuadratureRule {
        let v = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        let x = NodeSet::new(v.iter().map(|a| UnitVector3::from_array(*a).unwrap()).collect(), NodeFamily::Custom)
            .unwrap();
        QuadratureRule::sphere(&x, vec![PI; 4], Header::new()).unwrap()
    }

    #[test]
    fn tetrahedron_diagnostics_and_noise() {
        let r = tetra_rule();
        let d = r.diagnostics();
        assert_eq!(d.min, PI);
        assert_eq!(d.max, PI);
        assert!((d.l1 - d.sum).abs() < 1e-15);
        assert!(d.mean_relative_error().unwrap() < 1e-15);
        let nz = noise_stddev(&r, 1.0, 500, 7, Execution::Parallel).unwrap();
        assert!((nz.exact - 2.0 * PI).abs() < 1e-14);
        assert!(nz.ratio() > 0.85 && nz.ratio() < 1.15);
        let seq = noise_stddev(&r, 1.0, 500, 7, Execution::Sequential).unwrap();
        assert_eq!(nz, seq);
        assert!(noise_stddev(&r, 1.0, 50, 7, Execution::Sequential).is_err());
    }

    #[test]
    fn apply_rejects_non_finite() {
        let r = tetra_rule();
        assert!(matches!(r.apply(|p| if p[0] < 0.0 { f64::NAN } else { 1.0 }), Err(Error::NonFinite { node: 2 })));
        assert!(r.apply_values(&[1.0]).is_err());
        assert!((r.apply(|_| 1.0).unwrap() - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn product_rule_exactness() {
        let r = product_rule(10, 21);
        assert!((r.apply(|_| 1.0).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!((r.apply(|p| p[2] * p[2]).unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((r.apply(|p| p[0].powi(4)).unwrap() - 4.0 * PI / 5.0).abs() < 1e-12);
    }

    #[test]
    fn spheroid_paths_agree() {
        let base = product_rule(40, 80);
        let a = 0.5;
        let s = spheroid_rule(&base, a).unwrap();
        let g = diffeo_rule(&base, |q| spheroid_scale_surface(a, q), |p| [p[0], p[1], a * p[2]], Surface::Spheroid { a })
            .unwrap();
        for (u, v) in s.weights().iter().zip(g.weights()) {
            assert!((u - v).abs() <= 1e-14 * u.abs());
        }
        let area = oblate_spheroid_area(a).unwrap();
        assert!((s.apply(|_| 1.0).unwrap() - area).abs() / area < 1e-10);
        let same = spheroid_rule(&base, 1.0).unwrap();
        assert_eq!(same.weights(), base.weights());
        assert!(spheroid_rule(&base, 0.0).is_err());
        assert!(spheroid_rule(&base, 1.5).is_err());
        let doubled = diffeo_rule(&base, |_| 2.0, |p| *p, Surface::Custom).unwrap();
        assert!((doubled.apply(|_| 1.0).unwrap() - 8.0 * PI).abs() < 1e-12);
        assert!(diffeo_rule(&base, |_| -1.0, |p| *p, Surface::Custom).is_err());
    }

    #[test]
    fn spheroid_scale_range() {
        let a = 299.0 / 300.0;
        for z in [-1.0, -0.5, 0.0, 0.3, 1.0] {
            let s = spheroid_scale_sphere(a, z);
            // the lower bound is quoted to five decimals
            let rounded = (s * 1e5).round() / 1e5;
            assert!((0.99667..=1.0).contains(&rounded), "{s}");
            assert!((s - spheroid_scale_surface(a, &[0.0, 0.0, a * z])).abs() < 1e-15);
        }
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
