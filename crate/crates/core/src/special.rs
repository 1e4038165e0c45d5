//! Legendre polynomials, real spherical harmonics and Gauss–Legendre rules.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::UnitVector3;

fn check_unit_interval(t: f64) -> Result<f64> {
    if !t.is_finite() || t.abs() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("argument {t} outside [-1, 1]")));
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// Legendre polynomial `P_l(t)` by the three-term recurrence.
pub fn legendre_p(l: usize, t: f64) -> Result<f64> {
    let t = check_unit_interval(t)?;
    Ok(legendre_p_unchecked(l, t))
}

pub(crate) fn legendre_p_unchecked(l: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `P_0(t), …, P_lmax(t)`.
pub fn legendre_p_all(lmax: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(1.0);
    if lmax >= 1 {
        out.push(t);
    }
    for k in 1..lmax {
        let kf = k as f64;
        out.push(((2.0 * kf + 1.0) * t * out[k] - kf * out[k - 1]) / (kf + 1.0));
    }
    out
}

/// Degree `l` and order index `k ∈ 1..=2l+1`; the signed order is `m = k − l − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphericalHarmonicIndex {
    degree: usize,
    k: usize,
}

impl SphericalHarmonicIndex {
    pub fn new(degree: usize, k: usize) -> Result<Self> {
        if k == 0 || k > 2 * degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "order index {k} outside 1..={} for degree {degree}",
                2 * degree + 1
            )));
        }
        Ok(Self { degree, k })
    }

    pub fn from_order(degree: usize, m: i64) -> Result<Self> {
        Self::new(degree, (m + degree as i64 + 1).max(0) as usize)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn order(&self) -> i64 {
        self.k as i64 - self.degree as i64 - 1
    }
}

/// All `2l+1` real orthonormal harmonics of degree `l` at `x`, indexed by
/// `k − 1 = m + l`. Negative `m` carries `sin(|m|φ)`, positive `m` carries
/// `cos(mφ)`, no Condon–Shortley phase. Degree 1 is `√(3/4π)·(y, z, x)`.
pub fn real_sph_harm_degree(l: usize, x: &UnitVector3) -> Vec<f64> {
    let ct = x.z();
    let st = (x.x() * x.x() + x.y() * x.y()).sqrt();
    let phi = x.lon();
    let mut out = vec![0.0; 2 * l + 1];
    // Q_m^m, normalized
    let mut qmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=l {
        if m > 0 {
            let mf = m as f64;
            qmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * st;
        }
        let mf = m as f64;
        let q = if m == l {
            qmm
        } else {
            let mut q0 = qmm;
            let mut q1 = (2.0 * mf + 3.0).sqrt() * ct * qmm;
            for ll in m + 2..=l {
                let llf = ll as f64;
                let a = ((4.0 * llf * llf - 1.0) / (llf * llf - mf * mf)).sqrt();
                let b = (((llf - 1.0) * (llf - 1.0) - mf * mf)
                    / (4.0 * (llf - 1.0) * (llf - 1.0) - 1.0))
                    .sqrt();
                let q2 = a * (ct * q1 - b * q0);
                q0 = q1;
                q1 = q2;
            }
            q1
        };
        if m == 0 {
            out[l] = q;
        } else {
            let (s, c) = (mf * phi).sin_cos();
            let r = std::f64::consts::SQRT_2 * q;
            out[l + m] = r * c;
            out[l - m] = r * s;
        }
    }
    out
}

pub fn real_sph_harm(idx: SphericalHarmonicIndex, x: &UnitVector3) -> f64 {
    real_sph_harm_degree(idx.degree, x)[idx.k - 1]
}

/// Gauss–Legendre nodes and weights on [−1, 1], nodes ascending.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre rule needs n ≥ 1");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Composite Gauss–Legendre integral over [−1, 1] with panels graded
/// geometrically toward `t = 1` (breakpoints `1 − 2σᵏ`, σ = 0.15), so
/// integrands with an unbounded derivative at `t = 1` still converge fast.
pub fn integrate_graded<F: Fn(f64) -> f64>(f: F, levels: usize, order: usize) -> f64 {
    const SIGMA: f64 = 0.15;
    let (x, w) = gauss_legendre_rule(order);
    let mut breaks = vec![-1.0];
    for k in 1..=levels {
        breaks.push(1.0 - 2.0 * SIGMA.powi(k as i32));
    }
    breaks.push(1.0);
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(mid + half * xi);
        }
        total += half * s;
    }
    total
}

/// Refine [`integrate_graded`] until two successive estimates agree to `tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<f64> {
    const SCHEDULE: [(usize, usize); 6] = [(8, 12), (14, 20), (20, 32), (26, 48), (32, 64), (40, 96)];
    let mut prev = integrate_graded(&f, SCHEDULE[0].0, SCHEDULE[0].1);
    for &(levels, order) in &SCHEDULE[1..] {
        let next = integrate_graded(&f, levels, order);
        if (next - prev).abs() <= tol {
            return Ok(next);
        }
        prev = next;
    }
    let last = integrate_graded(&f, 48, 128);
    if (last - prev).abs() <= tol {
        Ok(last)
    } else {
        Err(Error::NoConvergence { previous: prev, last })
    }
}

/// Legendre coefficient `a_j = (2j+1)/2 · ∫ f P_j dt`, so that
/// `f = Σ a_j P_j`. Converged to 1e-11 absolute in the integral.
pub fn legendre_coefficient<F: Fn(f64) -> f64>(f: F, j: usize) -> Result<f64> {
    let integral = integrate_adaptive(|t| f(t) * legendre_p_unchecked(j, t), 1e-11)?;
    Ok(0.5 * (2.0 * j as f64 + 1.0) * integral)
}

/// `(ln|Γ(x)|, sign Γ(x))`, using reflection for `x ≤ 0`. Poles give
/// `(∞, 0.0)`.
pub fn ln_gamma_signed(x: f64) -> (f64, f64) {
    if x > 0.0 {
        return (statrs::function::gamma::ln_gamma(x), 1.0);
    }
    if x == x.floor() {
        return (f64::INFINITY, 0.0);
    }
    // Γ(x) = π / (sin(πx) Γ(1−x))
    let s = (PI * x).sin();
    let lg = PI.ln() - s.abs().ln() - statrs::function::gamma::ln_gamma(1.0 - x);
    (lg, s.signum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> UnitVector3 {
        let z: f64 = rng.random_range(-1.0..1.0);
        let lon: f64 = rng.random_range(-PI..PI);
        UnitVector3::from_lon_lat(lon, z.asin())
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre_p(0, 0.3).unwrap(), 1.0);
        assert_eq!(legendre_p(1, 0.3).unwrap(), 0.3);
        assert_abs_diff_eq!(legendre_p(2, 0.5).unwrap(), -0.125, epsilon = 1e-16);
        assert!(legendre_p(3, 1.1).is_err());
        assert!(legendre_p(3, 1.0 + 1e-13).is_ok());
    }

    #[test]
    fn legendre_bounds() {
        for l in 0..=64 {
            assert_abs_diff_eq!(legendre_p(l, 1.0).unwrap(), 1.0, epsilon = 1e-13);
            for i in 0..=200 {
                let t = -1.0 + i as f64 / 100.0;
                assert!(legendre_p(l, t).unwrap().abs() <= 1.0 + 1e-12);
            }
        }
        let all = legendre_p_all(10, 0.37);
        for (l, v) in all.iter().enumerate() {
            assert_abs_diff_eq!(*v, legendre_p(l, 0.37).unwrap(), epsilon = 1e-15);
        }
    }

    #[test]
    fn harmonic_low_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        for _ in 0..20 {
            let x = random_unit(&mut rng);
            let y0 = real_sph_harm(SphericalHarmonicIndex::new(0, 1).unwrap(), &x);
            assert_abs_diff_eq!(y0, 0.282_094_791_773_878_1, epsilon = 1e-16);
            let y1 = real_sph_harm_degree(1, &x);
            assert_abs_diff_eq!(y1[0], c1 * x.y(), epsilon = 1e-15);
            assert_abs_diff_eq!(y1[1], c1 * x.z(), epsilon = 1e-15);
            assert_abs_diff_eq!(y1[2], c1 * x.x(), epsilon = 1e-15);
            // degree 2, m = 2: √(15/16π)(x² − y²)
            let y2 = real_sph_harm_degree(2, &x);
            let c = (15.0 / (16.0 * PI)).sqrt();
            assert_abs_diff_eq!(y2[4], c * (x.x() * x.x() - x.y() * x.y()), epsilon = 1e-14);
            assert_abs_diff_eq!(y2[0], 2.0 * c * x.x() * x.y(), epsilon = 1e-14);
        }
        assert!(SphericalHarmonicIndex::new(2, 6).is_err());
        assert!(SphericalHarmonicIndex::new(2, 0).is_err());
        assert_eq!(SphericalHarmonicIndex::new(3, 1).unwrap().order(), -3);
    }

    #[test]
    fn addition_theorem() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for l in [1usize, 5, 20] {
            for _ in 0..10 {
                let x = random_unit(&mut rng);
                let y = random_unit(&mut rng);
                let yx = real_sph_harm_degree(l, &x);
                let yy = real_sph_harm_degree(l, &y);
                let s: f64 = yx.iter().zip(&yy).map(|(a, b)| a * b).sum();
                let expect = (2 * l + 1) as f64 / (4.0 * PI) * legendre_p(l, x.dot(&y)).unwrap();
                assert_abs_diff_eq!(s, expect, epsilon = 1e-11);
                let s2: f64 = yx.iter().map(|a| a * a).sum();
                assert_abs_diff_eq!(s2, (2 * l + 1) as f64 / (4.0 * PI), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn orthonormal_on_product_grid() {
        // Gauss in z times uniform in φ integrates degree ≤ 40 exactly
        let lmax = 20;
        let (zs, wz) = gauss_legendre_rule(24);
        let nphi = 48;
        let mut gram = vec![vec![0.0; (lmax + 1) * (lmax + 1)]; (lmax + 1) * (lmax + 1)];
        for (z, w) in zs.iter().zip(&wz) {
            for j in 0..nphi {
                let phi = 2.0 * PI * j as f64 / nphi as f64;
                let p = UnitVector3::from_lon_lat(phi, z.asin());
                let vals: Vec<f64> = (0..=lmax).flat_map(|l| real_sph_harm_degree(l, &p)).collect();
                let ww = w * 2.0 * PI / nphi as f64;
                for a in 0..vals.len() {
                    for b in a..vals.len() {
                        gram[a][b] += ww * vals[a] * vals[b];
                    }
                }
            }
        }
        for a in 0..gram.len() {
            for b in a..gram.len() {
                let e = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[a][b], e, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gauss_rules() {
        let (x, w) = gauss_legendre_rule(1);
        assert_eq!((x[0], w[0]), (0.0, 2.0));
        let (x, w) = gauss_legendre_rule(2);
        assert_abs_diff_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(x[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
        let (x, w) = gauss_legendre_rule(3);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert_abs_diff_eq!(s, 0.4, epsilon = 1e-15);
        for n in [5, 17, 64, 128] {
            let (x, w) = gauss_legendre_rule(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            let deg = 2 * n - 2;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert_relative_eq!(s, 2.0 / (deg as f64 + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn legendre_coefficients() {
        let a2 = legendre_coefficient(|t| legendre_p_unchecked(2, t), 2).unwrap();
        assert_abs_diff_eq!(a2, 1.0, epsilon = 1e-12);
        // ∫(1−t)log(1−t)P₂ dt = 1/6
        let f = |t: f64| if t >= 1.0 { 0.0 } else { (1.0 - t) * (1.0 - t).ln() };
        assert_abs_diff_eq!(legendre_coefficient(f, 2).unwrap(), 5.0 / 12.0, epsilon = 1e-11);
        // g₁ = −(2−2t)^{1/4}, a₀ = −4√2/5
        let g1 = |t: f64| -(2.0 - 2.0 * t).max(0.0).powf(0.25);
        assert_abs_diff_eq!(
            legendre_coefficient(g1, 0).unwrap(),
            -4.0 * 2f64.sqrt() / 5.0,
            epsilon = 1e-11
        );
    }

    #[test]
    fn coefficients_of_finite_series_recovered() {
        let b = [0.3, -1.2, 0.75, 0.0, 2.5, -0.125, 0.9];
        let f = |t: f64| b.iter().enumerate().map(|(j, bj)| bj * legendre_p_unchecked(j, t)).sum::<f64>();
        for (j, bj) in b.iter().enumerate() {
            assert_abs_diff_eq!(legendre_coefficient(f, j).unwrap(), *bj, epsilon = 1e-11);
        }
        assert_abs_diff_eq!(legendre_coefficient(f, 9).unwrap(), 0.0, epsilon = 1e-11);
    }

    #[test]
    fn ln_gamma_reflection() {
        // Γ(−1/2) = −2√π, Γ(−3/2) = 4√π/3
        let (l, s) = ln_gamma_signed(-0.5);
        assert_eq!(s, -1.0);
        assert_relative_eq!(l.exp(), 2.0 * PI.sqrt(), max_relative = 1e-14);
        let (l, s) = ln_gamma_signed(-1.5);
        assert_eq!(s, 1.0);
        assert_relative_eq!(l.exp(), 4.0 * PI.sqrt() / 3.0, max_relative = 1e-14);
        assert_eq!(ln_gamma_signed(-2.0).1, 0.0);
        let (l, s) = ln_gamma_signed(5.0);
        assert_eq!(s, 1.0);
        assert_relative_eq!(l.exp(), 24.0, max_relative = 1e-14);
    }
}
