//! Restricted surface-spline kernels, the auxiliary space Π, and the zonal
//! kernels used to build test integrands.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use faer::Mat;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{NodeSet, UnitVector3};
use crate::special::{integrate_adaptive, ln_gamma_signed};

/// Which closed form of the m = 2 kernel to use. The two differ by
/// `ln2·(1 − t)`, a member of Π, so they produce the same weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelVariant {
    /// `(−1)^{s+1} (1−t)^s log(1−t)`.
    Log1mt,
    /// `r² log r` with `r² = 2 − 2t`, i.e. `(1−t) log(2−2t)`; m = 2 only.
    R2LogR,
}

/// Restricted surface spline of order `m` on S² (`s = m − 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurfaceSplineKernel {
    m: usize,
    variant: KernelVariant,
}

impl Default for SurfaceSplineKernel {
    fn default() -> Self {
        Self::tps_m2()
    }
}

impl fmt::Display for SurfaceSplineKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl SurfaceSplineKernel {
    pub fn new(m: usize, variant: KernelVariant) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!("surface spline order m = {m} < 2")));
        }
        if variant == KernelVariant::R2LogR && m != 2 {
            return Err(Error::InvalidArgument("r² log r variant exists only for m = 2".into()));
        }
        Ok(Self { m, variant })
    }

    /// The thin-plate spline `r² log r`, the default.
    pub fn tps_m2() -> Self {
        Self { m: 2, variant: KernelVariant::R2LogR }
    }

    pub fn tps_m2_log1mt() -> Self {
        Self { m: 2, variant: KernelVariant::Log1mt }
    }

    /// Parses the CLI names `tps-m2` and `tps-m2-log1mt`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "tps-m2" => Ok(Self::tps_m2()),
            "tps-m2-log1mt" => Ok(Self::tps_m2_log1mt()),
            other => Err(Error::InvalidArgument(format!(
                "unknown kernel `{other}` (expected tps-m2 or tps-m2-log1mt)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match (self.m, self.variant) {
            (2, KernelVariant::R2LogR) => "tps-m2".into(),
            (2, KernelVariant::Log1mt) => "tps-m2-log1mt".into(),
            (m, _) => format!("surface-spline-m{m}"),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> usize {
        self.m - 1
    }

    pub fn variant(&self) -> KernelVariant {
        self.variant
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t.abs() > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("kernel argument {t} outside [-1, 1]")));
        }
        Ok(self.eval_unchecked(t))
    }

    /// Kernel value for `t` already known to lie in [−1, 1] (clamped).
    #[inline]
    pub fn eval_unchecked(&self, t: f64) -> f64 {
        let u = 1.0 - t.clamp(-1.0, 1.0);
        if u <= 1e-15 {
            return 0.0;
        }
        match self.variant {
            KernelVariant::R2LogR => u * (2.0 * u).ln(),
            KernelVariant::Log1mt => {
                let s = self.s() as i32;
                let sign = if s % 2 == 1 { 1.0 } else { -1.0 };
                sign * u.powi(s) * u.ln()
            }
        }
    }

    /// `J₀ = ∫_{S²} Φ(x·y) dμ(x) = 2π ∫₋₁¹ Φ(t) dt`, closed form for m = 2
    /// and numeric otherwise.
    pub fn integral_constant(&self) -> f64 {
        match (self.m, self.variant) {
            (2, KernelVariant::R2LogR) => 2.0 * PI * (4.0 * LN_2 - 1.0),
            (2, KernelVariant::Log1mt) => 2.0 * PI * (2.0 * LN_2 - 1.0),
            _ => self.integral_constant_numeric().expect("smooth enough to integrate"),
        }
    }

    /// `J₀` from graded Gauss–Legendre quadrature.
    pub fn integral_constant_numeric(&self) -> Result<f64> {
        Ok(2.0 * PI * integrate_adaptive(|t| self.eval_unchecked(t), 1e-13)?)
    }

    /// Expansion coefficient `κ̃_j = C_s Γ(j−s)/Γ(j+s+2)` with
    /// `C_s = 2^{s+2} π Γ(s+1)²`, so `Φ(x·y) = Σ_j κ̃_j Σ_k Y_{j,k}(x)Y_{j,k}(y)`
    /// up to terms in Π. For m = 2 this is `8π/((j−1)j(j+1)(j+2))`.
    pub fn legendre_coeff(&self, j: usize) -> Result<f64> {
        let s = self.s();
        if j <= s {
            return Err(Error::InvalidArgument(format!(
                "κ̃_j is arbitrary for j ≤ s = {s} (got j = {j})"
            )));
        }
        let sf = s as f64;
        let jf = j as f64;
        let (lg_s1, _) = ln_gamma_signed(sf + 1.0);
        let (lg_num, _) = ln_gamma_signed(jf - sf);
        let (lg_den, _) = ln_gamma_signed(jf + sf + 2.0);
        let ln_c = (sf + 2.0) * LN_2 + PI.ln() + 2.0 * lg_s1;
        Ok((ln_c + lg_num - lg_den).exp())
    }
}

/// The auxiliary space Π = span{1, x, y, z} with integrals J = (4π, 0, 0, 0).
pub struct PiBasis;

impl PiBasis {
    pub const DIM: usize = 4;

    pub fn eval(p: &UnitVector3) -> [f64; 4] {
        [1.0, p.x(), p.y(), p.z()]
    }

    pub fn integrals() -> [f64; 4] {
        [4.0 * PI, 0.0, 0.0, 0.0]
    }
}

/// Dense symmetric kernel matrix `A_ij = Φ(x_i·x_j)`, stored full.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `y = A x` with per-row accumulation in column order.
    pub fn matvec(&self, x: &[f64], y: &mut [f64], exec: Execution) {
        exec.fill(y, |i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum());
    }
}

/// Assemble `A` row by row. The upper triangle is evaluated and mirrored,
/// the diagonal is exactly zero, and the result does not depend on `exec`.
pub fn kernel_matrix(k: &SurfaceSplineKernel, x: &NodeSet, exec: Execution) -> KernelMatrix {
    let n = x.len();
    let p = x.arrays();
    let mut data = vec![0.0; n * n];
    exec.for_each_chunk(&mut data, n.max(1), |i, row| {
        let a = p[i];
        for j in i + 1..n {
            let b = p[j];
            row[j] = k.eval_unchecked(a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
        }
    });
    for i in 0..n {
        for j in 0..i {
            data[i * n + j] = data[j * n + i];
        }
    }
    KernelMatrix { n, data }
}

/// `Ψ` (N×4) with columns {1, x, y, z}. Fails unless rank 4.
pub fn pi_matrix(x: &NodeSet) -> Result<Mat<f64>> {
    let psi = Mat::from_fn(x.len(), 4, |i, c| PiBasis::eval(&x.get(i))[c]);
    let rank = numerical_rank(&psi);
    if rank < 4 {
        return Err(Error::NotUnisolvent { rank });
    }
    Ok(psi)
}

/// Column rank from the R factor of a thin QR.
pub(crate) fn numerical_rank(m: &Mat<f64>) -> usize {
    if m.nrows() < m.ncols() {
        return numerical_rank_small(m);
    }
    let qr = m.qr();
    let r = qr.thin_R();
    let scale = (m.nrows() as f64).sqrt().max(1.0);
    (0..m.ncols()).filter(|&k| r[(k, k)].abs() > 1e-10 * scale).count()
}

fn numerical_rank_small(m: &Mat<f64>) -> usize {
    let t = m.transpose().to_owned();
    numerical_rank(&t)
}

/// Zonal kernels with closed-form Legendre coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKernel {
    /// `g₁(t) = −(2 − 2t)^{1/4}`.
    PotentialSpline,
    /// `g₂(t) = (1 − ε²)/(1 + ε² − 2εt)^{3/2}`, `0 < ε < 1`.
    Poisson { eps: f64 },
}

impl TargetKernel {
    pub fn poisson(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("Poisson parameter ε = {eps} outside (0, 1)")));
        }
        Ok(TargetKernel::Poisson { eps })
    }

    pub fn smoothness(&self) -> &'static str {
        match self {
            TargetKernel::PotentialSpline => "W2^mu, mu < 5/2",
            TargetKernel::Poisson { .. } => "analytic",
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t.abs() > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("argument {t} outside [-1, 1]")));
        }
        Ok(self.eval_unchecked(t))
    }

    #[inline]
    pub fn eval_unchecked(&self, t: f64) -> f64 {
        let t = t.clamp(-1.0, 1.0);
        match *self {
            TargetKernel::PotentialSpline => -(2.0 - 2.0 * t).sqrt().sqrt(),
            TargetKernel::Poisson { eps } => {
                let d = 1.0 + eps * eps - 2.0 * eps * t;
                (1.0 - eps * eps) / (d * d.sqrt())
            }
        }
    }

    /// Legendre coefficient `a_l` with `g(t) = Σ a_l P_l(t)`.
    pub fn coeff(&self, l: usize) -> f64 {
        let lf = l as f64;
        match *self {
            TargetKernel::PotentialSpline => {
                let (lg54, _) = ln_gamma_signed(1.25);
                let (lg_a, sign_a) = ln_gamma_signed(1.25 - lf);
                let (lg_b, _) = ln_gamma_signed(2.25 + lf);
                let parity = if l.is_multiple_of(2) { -1.0 } else { 1.0 };
                parity
                    * sign_a
                    * std::f64::consts::SQRT_2
                    * (2.0 * lf + 1.0)
                    * (2.0 * lg54 - lg_a - lg_b).exp()
            }
            TargetKernel::Poisson { eps } => (2.0 * lf + 1.0) * eps.powi(l as i32),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NodeFamily;
    use crate::special::legendre_coefficient;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tetrahedron() -> NodeSet {
        let v = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        NodeSet::new(v.iter().map(|a| UnitVector3::from_array(*a).unwrap()).collect(), NodeFamily::Custom).unwrap()
    }

    fn random_set(n: usize, seed: u64) -> NodeSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = (0..n)
            .map(|_| {
                let z: f64 = rng.random_range(-1.0..1.0);
                UnitVector3::from_lon_lat(rng.random_range(-PI..PI), z.asin())
            })
            .collect();
        NodeSet::new(p, NodeFamily::Custom).unwrap()
    }

    #[test]
    fn kernel_values() {
        let k = SurfaceSplineKernel::tps_m2_log1mt();
        assert_abs_diff_eq!(k.eval(-1.0).unwrap(), 2.0 * LN_2, epsilon = 1e-15);
        assert_eq!(k.eval(1.0).unwrap(), 0.0);
        assert_eq!(SurfaceSplineKernel::tps_m2().eval(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(SurfaceSplineKernel::tps_m2().eval(0.0).unwrap(), LN_2, epsilon = 1e-16);
        assert!(k.eval(1.5).is_err());
        assert!(SurfaceSplineKernel::new(3, KernelVariant::R2LogR).is_err());
        assert!(SurfaceSplineKernel::from_name("gauss").is_err());
        assert_eq!(SurfaceSplineKernel::from_name("tps-m2").unwrap().name(), "tps-m2");
    }

    #[test]
    fn antipodal_pair_matrix() {
        let ez = UnitVector3::e_z();
        let x = NodeSet::new(vec![ez, ez.neg()], NodeFamily::Custom).unwrap();
        let a = kernel_matrix(&SurfaceSplineKernel::tps_m2_log1mt(), &x, Execution::Sequential);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_abs_diff_eq!(a.get(0, 1), 2.0 * LN_2, epsilon = 1e-15);
    }

    #[test]
    fn variant_difference_is_in_pi() {
        let x = random_set(40, 3);
        let a = kernel_matrix(&SurfaceSplineKernel::tps_m2_log1mt(), &x, Execution::Sequential);
        let b = kernel_matrix(&SurfaceSplineKernel::tps_m2(), &x, Execution::Parallel);
        for i in 0..40 {
            for j in 0..40 {
                let expect = if i == j { 0.0 } else { LN_2 * (1.0 - x.get(i).dot(&x.get(j))) };
                assert_abs_diff_eq!(b.get(i, j) - a.get(i, j), expect, epsilon = 1e-14);
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn assembly_independent_of_schedule() {
        let x = random_set(300, 9);
        let k = SurfaceSplineKernel::tps_m2();
        let a = kernel_matrix(&k, &x, Execution::Sequential);
        let b = kernel_matrix(&k, &x, Execution::Parallel);
        assert_eq!(a.data, b.data);
    }

    fn constrained_random(psi: &Mat<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
        // project a random vector onto the null space of Ψᵀ
        let n = psi.nrows();
        let q = psi.qr().compute_thin_Q();
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for c in 0..4 {
            let d: f64 = (0..n).map(|i| q[(i, c)] * v[i]).sum();
            for i in 0..n {
                v[i] -= d * q[(i, c)];
            }
        }
        v
    }

    #[test]
    fn conditionally_positive_definite() {
        for (n, trials) in [(20usize, 100usize), (50, 100), (100, 30)] {
            let x = random_set(n, n as u64);
            let psi = pi_matrix(&x).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            for k in [SurfaceSplineKernel::tps_m2(), SurfaceSplineKernel::tps_m2_log1mt()] {
                let a = kernel_matrix(&k, &x, Execution::Parallel);
                for _ in 0..trials {
                    let v = constrained_random(&psi, &mut rng);
                    let mut av = vec![0.0; n];
                    a.matvec(&v, &mut av, Execution::Sequential);
                    let q: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
                    assert!(q > 0.0, "aᵀAa = {q}");
                }
            }
        }
    }

    #[test]
    fn pi_matrix_rank() {
        let t = tetrahedron();
        let psi = pi_matrix(&t).unwrap();
        let sums: Vec<f64> = (0..4).map(|c| (0..4).map(|i| psi[(i, c)]).sum::<f64>() / 4.0).collect();
        assert_abs_diff_eq!(sums[0], 1.0);
        for s in &sums[1..] {
            assert_abs_diff_eq!(*s, 0.0, epsilon = 1e-15);
        }
        let eq: Vec<UnitVector3> = (0..12).map(|k| UnitVector3::from_lon_lat(k as f64 * 0.5, 0.0)).collect();
        let x = NodeSet::new(eq, NodeFamily::Custom).unwrap();
        assert!(matches!(pi_matrix(&x), Err(Error::NotUnisolvent { rank: 3 })));
    }

    #[test]
    fn integral_constants() {
        let r2 = SurfaceSplineKernel::tps_m2();
        let lm = SurfaceSplineKernel::tps_m2_log1mt();
        assert_relative_eq!(r2.integral_constant(), 11.137_503_415_249_23, max_relative = 1e-12);
        assert_abs_diff_eq!(lm.integral_constant(), 2.0 * PI * (2.0 * LN_2 - 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(r2.integral_constant_numeric().unwrap(), r2.integral_constant(), epsilon = 1e-10);
        assert_abs_diff_eq!(lm.integral_constant_numeric().unwrap(), lm.integral_constant(), epsilon = 1e-10);
    }

    #[test]
    fn tps_coefficients() {
        let k = SurfaceSplineKernel::tps_m2_log1mt();
        assert_relative_eq!(k.legendre_coeff(2).unwrap(), PI / 3.0, max_relative = 1e-13);
        assert_relative_eq!(k.legendre_coeff(3).unwrap(), PI / 15.0, max_relative = 1e-13);
        assert!(k.legendre_coeff(1).is_err());
        for j in 2..=10usize {
            let measured = legendre_coefficient(|t| k.eval_unchecked(t), j).unwrap() * 2.0 / (2 * j + 1) as f64;
            assert_abs_diff_eq!(measured, k.legendre_coeff(j).unwrap() / (2.0 * PI), epsilon = 1e-9);
        }
    }

    #[test]
    fn measured_coefficient_decay() {
        let k = SurfaceSplineKernel::tps_m2_log1mt();
        let r: Vec<f64> = (2..=12usize)
            .map(|j| {
                let a = legendre_coefficient(|t| k.eval_unchecked(t), j).unwrap();
                let jf = j as f64;
                a * (jf - 1.0) * jf * (jf + 1.0) * (jf + 2.0) / (2.0 * jf + 1.0)
            })
            .collect();
        for v in &r {
            assert_relative_eq!(*v, r[0], max_relative = 1e-8);
        }
    }

    #[test]
    fn target_kernels() {
        let g2 = TargetKernel::poisson(2.0 / 3.0).unwrap();
        assert_relative_eq!(g2.eval(1.0).unwrap(), 15.0, max_relative = 1e-14);
        assert_eq!(g2.coeff(0), 1.0);
        assert!(TargetKernel::poisson(1.0).is_err());
        assert!(TargetKernel::poisson(0.0).is_err());
        let g1 = TargetKernel::PotentialSpline;
        assert_relative_eq!(g1.coeff(0), -4.0 * 2f64.sqrt() / 5.0, max_relative = 1e-14);
        assert_eq!(g1.eval(1.0).unwrap(), 0.0);
        assert_relative_eq!(
            legendre_coefficient(|t| g1.eval_unchecked(t), 0).unwrap(),
            g1.coeff(0),
            max_relative = 1e-10
        );
    }

    #[test]
    fn potential_spline_coeff_matches_product_recurrence() {
        // a_l/(2l+1) ∝ (−1)^{l+1}/(Γ(5/4−l)Γ(9/4+l)); consecutive ratio is
        // −(1/4 − l)/(9/4 + l)
        let g1 = TargetKernel::PotentialSpline;
        let mut b = g1.coeff(0);
        for l in 0..64usize {
            let lf = l as f64;
            b *= -(0.25 - lf) / (2.25 + lf);
            let a = g1.coeff(l + 1) / (2.0 * lf + 3.0);
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        for l in [1usize, 2, 5, 20] {
            let direct = legendre_coefficient(|t| g1.eval_unchecked(t), l).unwrap();
            assert_abs_diff_eq!(direct, g1.coeff(l), epsilon = 1e-10);
        }
    }
}
