//! Validation experiments: Funk–Hecke target integrands with exact
//! integrals, convergence, iteration-count and noise-stability studies.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{NodeFamily, NodeSet, UnitVector3};
use crate::kernels::{SurfaceSplineKernel, TargetKernel};
use crate::nodes::FamilySpec;
use crate::quadrature::{noise_stddev, spheroid_rule, QuadratureRule};
use crate::solver::{compute_weights, solve_direct, SolverConfig, WeightSolution};
use crate::special::{integrate_graded, real_sph_harm_degree};

/// Published reference value of `∫ f₁`.
pub const REFERENCE_INTEGRAL_F1: f64 = 0.014830900415995;
/// Published reference value of `∫ f₂`.
pub const REFERENCE_INTEGRAL_F2: f64 = 0.032409262543520;
/// Longitude and latitude of the target center.
pub const CENTER_LON: f64 = -2.0281;
pub const CENTER_LAT: f64 = 0.76102;
pub const TARGET_DEGREE: usize = 20;
pub const POISSON_EPS: f64 = 2.0 / 3.0;

/// How the target center is built from (λ, φ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XcConvention {
    /// `(cosλ cosφ, sinλ cosφ, sinφ)`.
    Standard,
    /// `(cosλ sinφ, sinλ cosφ, sinφ)`, then normalized.
    LiteralNormalized,
}

impl XcConvention {
    pub const ALL: [XcConvention; 2] = [XcConvention::Standard, XcConvention::LiteralNormalized];

    pub fn center(self) -> UnitVector3 {
        let (l, p) = (CENTER_LON, CENTER_LAT);
        let v = match self {
            XcConvention::Standard => [l.cos() * p.cos(), l.sin() * p.cos(), p.sin()],
            XcConvention::LiteralNormalized => [l.cos() * p.sin(), l.sin() * p.cos(), p.sin()],
        };
        UnitVector3::from_array(v).expect("nonzero")
    }

    pub fn name(self) -> &'static str {
        match self {
            XcConvention::Standard => "standard",
            XcConvention::LiteralNormalized => "literal-normalized",
        }
    }
}

/// `∫ g(x·x_c) Y_{l,k}(x) dμ(x) = 4π a_l/(2l+1) · Y_{l,k}(x_c)`.
pub fn funk_hecke_value(g: &TargetKernel, l: usize, k: usize, xc: &UnitVector3) -> Result<f64> {
    if k == 0 || k > 2 * l + 1 {
        return Err(Error::InvalidArgument(format!("order index k = {k} outside 1..={}", 2 * l + 1)));
    }
    let y = real_sph_harm_degree(l, xc)[k - 1];
    Ok(4.0 * PI * g.coeff(l) / (2 * l + 1) as f64 * y)
}

/// `f(x) = Σ_k sign(Y_{l,k}(x_c)) Y_{l,k}(x) g(x·x_c)`.
#[derive(Debug, Clone)]
pub struct TargetFunction {
    pub name: String,
    pub kernel: TargetKernel,
    pub center: UnitVector3,
    pub degree: usize,
    signs: Vec<f64>,
    pub exact: f64,
}

impl TargetFunction {
    pub fn new(name: &str, kernel: TargetKernel, center: UnitVector3, degree: usize) -> Self {
        let y = real_sph_harm_degree(degree, &center);
        let signs: Vec<f64> = y.iter().map(|v| if *v > 0.0 { 1.0 } else if *v < 0.0 { -1.0 } else { 0.0 }).collect();
        let abs_sum: f64 = y.iter().map(|v| v.abs()).sum();
        let exact = 4.0 * PI * kernel.coeff(degree) / (2 * degree + 1) as f64 * abs_sum;
        Self { name: name.to_string(), kernel, center, degree, signs, exact }
    }

    pub fn smoothness(&self) -> &'static str {
        self.kernel.smoothness()
    }

    pub fn eval(&self, p: &[f64; 3]) -> f64 {
        let x = match UnitVector3::from_array(*p) {
            Ok(x) => x,
            Err(_) => return f64::NAN,
        };
        let y = real_sph_harm_degree(self.degree, &x);
        let s: f64 = self.signs.iter().zip(&y).map(|(a, b)| a * b).sum();
        s * self.kernel.eval_unchecked(x.dot(&self.center))
    }

    /// Independent check of `exact`: tensor quadrature in a frame with
    /// `x_c` as pole, graded Gauss–Legendre in `t = x·x_c` and equispaced
    /// nodes in the azimuth.
    pub fn brute_force_integral(&self, levels: usize, order: usize, n_azimuth: usize) -> f64 {
        let c = self.center.to_array();
        let helper = if c[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
        let e1 = UnitVector3::from_array(self.center.cross(&UnitVector3::from_array(helper).unwrap())).unwrap();
        let e2 = self.center.cross(&e1);
        let e1 = e1.to_array();
        let dphi = 2.0 * PI / n_azimuth as f64;
        integrate_graded(
            |t| {
                let r = (1.0 - t * t).max(0.0).sqrt();
                let mut s = 0.0;
                for k in 0..n_azimuth {
                    let (sp, cp) = ((k as f64 + 0.5) * dphi).sin_cos();
                    let p = [
                        t * c[0] + r * (cp * e1[0] + sp * e2[0]),
                        t * c[1] + r * (cp * e1[1] + sp * e2[1]),
                        t * c[2] + r * (cp * e1[2] + sp * e2[2]),
                    ];
                    s += self.eval(&p);
                }
                s * dphi
            },
            levels,
            order,
        )
    }
}

/// The rough (`g₁`) and smooth (`g₂`, ε = 2/3) targets.
pub fn make_targets(conv: XcConvention) -> (TargetFunction, TargetFunction) {
    let xc = conv.center();
    (
        TargetFunction::new("f1", TargetKernel::PotentialSpline, xc, TARGET_DEGREE),
        TargetFunction::new("f2", TargetKernel::Poisson { eps: POISSON_EPS }, xc, TARGET_DEGREE),
    )
}

/// Comparison of the computed exact integrals with the reference values.
#[derive(Debug, Clone)]
pub struct ReferenceCheck {
    pub convention: XcConvention,
    pub f1: f64,
    pub f2: f64,
    pub f1_error: f64,
    pub f2_error: f64,
}

impl ReferenceCheck {
    pub fn matches(&self, tol: f64) -> bool {
        self.f1_error <= tol && self.f2_error <= tol
    }
}

/// Both conventions against the reference values, standard first.
pub fn check_reference_integrals() -> Vec<ReferenceCheck> {
    XcConvention::ALL
        .iter()
        .map(|&conv| {
            let (f1, f2) = make_targets(conv);
            ReferenceCheck {
                convention: conv,
                f1: f1.exact,
                f2: f2.exact,
                f1_error: (f1.exact - REFERENCE_INTEGRAL_F1).abs(),
                f2_error: (f2.exact - REFERENCE_INTEGRAL_F2).abs(),
            }
        })
        .collect()
}

/// Least-squares line through `(ln x, ln y)`; returns (slope, intercept).
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points to fit a slope".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive data".into()));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Slope with the first point dropped when it is pre-asymptotic: fit the
/// remaining points, and drop the first when its residual to that fit
/// exceeds three times the largest residual of the others (needs at least
/// 4 points). Returns (slope, first point dropped).
pub fn fit_slope_drop_first(points: &[(f64, f64)]) -> Result<(f64, bool)> {
    let (slope, _) = fit_loglog(points)?;
    if points.len() < 4 {
        return Ok((slope, false));
    }
    let (s_rest, c_rest) = fit_loglog(&points[1..])?;
    let res: Vec<f64> = points.iter().map(|&(x, y)| (y.ln() - (c_rest + s_rest * x.ln())).abs()).collect();
    let rest = res[1..].iter().copied().fold(0.0, f64::max);
    if res[0] > 3.0 * rest {
        Ok((s_rest, true))
    } else {
        Ok((slope, false))
    }
}

/// Generate nodes and solve for weights.
pub fn solve_family(
    spec: &FamilySpec,
    kernel: &SurfaceSplineKernel,
    cfg: &SolverConfig,
) -> Result<(NodeSet, WeightSolution)> {
    let x = spec.generate(cfg.exec)?;
    let w = compute_weights(kernel, &x, cfg)?;
    Ok((x, w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub family: NodeFamily,
    pub target: String,
    /// (N, relative error), N increasing.
    pub cells: Vec<(usize, f64)>,
    pub slope_n: f64,
    /// `−2 · slope_n`, using `h ~ N^{−1/2}`.
    pub slope_h: f64,
    pub dropped_first: bool,
}

impl ConvergenceReport {
    pub fn from_cells(family: NodeFamily, target: &str, cells: Vec<(usize, f64)>) -> Result<Self> {
        if cells.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument("sizes must be strictly increasing".into()));
        }
        let pts: Vec<(f64, f64)> = cells.iter().map(|&(n, e)| (n as f64, e)).collect();
        let (slope_n, dropped_first) = fit_slope_drop_first(&pts)?;
        Ok(Self { family, target: target.to_string(), cells, slope_n, slope_h: -2.0 * slope_n, dropped_first })
    }

    pub fn to_record(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment=convergence");
        let _ = writeln!(s, "family={}", self.family);
        let _ = writeln!(s, "target={}", self.target);
        let _ = writeln!(s, "slope_n={:.16e}", self.slope_n);
        let _ = writeln!(s, "slope_h={:.16e}", self.slope_h);
        let _ = writeln!(s, "dropped_first={}", self.dropped_first);
        for (n, e) in &self.cells {
            let _ = writeln!(s, "cell={n},{e:.16e}");
        }
        s
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let kv = parse_record(text, "convergence")?;
        let mut cells = Vec::new();
        for v in kv.all("cell") {
            let (n, e) = v.split_once(',').ok_or_else(|| bad("cell", v))?;
            cells.push((parse_num(n)?, parse_num(e)?));
        }
        Ok(Self {
            family: kv.one("family")?.parse()?,
            target: kv.one("target")?.to_string(),
            cells,
            slope_n: parse_num(kv.one("slope_n")?)?,
            slope_h: parse_num(kv.one("slope_h")?)?,
            dropped_first: parse_num(kv.one("dropped_first")?)?,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("family,N,value\n");
        for (n, e) in &self.cells {
            let _ = writeln!(s, "{},{n},{e:.16e}", self.family);
        }
        s
    }

    /// `N error` lines for plotting.
    pub fn to_series(&self) -> String {
        let mut s = format!("# {} {} relative error\n", self.family, self.target);
        for (n, e) in &self.cells {
            let _ = writeln!(s, "{n} {e:.16e}");
        }
        s
    }
}

/// Relative errors for several targets over one family. `sizes` are size
/// parameters (levels for icosahedral nodes).
pub fn convergence_study(
    family: NodeFamily,
    sizes: &[usize],
    targets: &[&TargetFunction],
    kernel: &SurfaceSplineKernel,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<Vec<ConvergenceReport>> {
    if sizes.len() < 3 {
        return Err(Error::InvalidArgument("a convergence study needs at least 3 sizes".into()));
    }
    let mut errs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); targets.len()];
    for &s in sizes {
        let spec = FamilySpec::from_family(family, s, seed)?;
        let (x, w) = solve_family(&spec, kernel, cfg)?;
        let rule = QuadratureRule::from_solution(&x, &w, cfg)?;
        for (t, out) in targets.iter().zip(errs.iter_mut()) {
            out.push((x.len(), relative_error(&rule, t)?));
        }
    }
    targets.iter().zip(errs).map(|(t, cells)| ConvergenceReport::from_cells(family, &t.name, cells)).collect()
}

pub fn relative_error(rule: &QuadratureRule, t: &TargetFunction) -> Result<f64> {
    let q = rule.apply(|p| t.eval(p))?;
    Ok(((q - t.exact) / t.exact).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub n: usize,
    pub iterations: usize,
    pub converged: bool,
    /// `max|c_iter − c_direct| / max|c_direct|` when a direct solve was run.
    pub direct_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub family: NodeFamily,
    pub rows: Vec<IterationRow>,
}

impl IterationReport {
    pub fn max_iterations(&self) -> usize {
        self.rows.iter().map(|r| r.iterations).max().unwrap_or(0)
    }

    /// max/min iteration count across sizes.
    pub fn growth_ratio(&self) -> f64 {
        let min = self.rows.iter().map(|r| r.iterations).min().unwrap_or(0);
        if min == 0 {
            return f64::INFINITY;
        }
        self.max_iterations() as f64 / min as f64
    }

    pub fn to_record(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment=iterations");
        let _ = writeln!(s, "family={}", self.family);
        for r in &self.rows {
            let d = r.direct_difference.map(|d| format!("{d:.16e}")).unwrap_or_else(|| "none".into());
            let _ = writeln!(s, "cell={},{},{},{d}", r.n, r.iterations, r.converged);
        }
        s
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let kv = parse_record(text, "iterations")?;
        let mut rows = Vec::new();
        for v in kv.all("cell") {
            let f: Vec<&str> = v.split(',').collect();
            if f.len() != 4 {
                return Err(bad("cell", v));
            }
            rows.push(IterationRow {
                n: parse_num(f[0])?,
                iterations: parse_num(f[1])?,
                converged: parse_num(f[2])?,
                direct_difference: if f[3] == "none" { None } else { Some(parse_num(f[3])?) },
            });
        }
        Ok(Self { family: kv.one("family")?.parse()?, rows })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("family,N,value\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", self.family, r.n, r.iterations);
        }
        s
    }
}

/// GMRES iteration counts, optionally checked against direct solves for
/// `N ≤ direct_limit`.
pub fn iteration_study(
    family: NodeFamily,
    sizes: &[usize],
    kernel: &SurfaceSplineKernel,
    cfg: &SolverConfig,
    seed: u64,
    direct_limit: usize,
) -> Result<IterationReport> {
    let mut rows = Vec::new();
    for &s in sizes {
        let spec = FamilySpec::from_family(family, s, seed)?;
        let x = spec.generate(cfg.exec)?;
        let it_cfg = SolverConfig { method: crate::solver::SolverMethod::Gmres, ..*cfg };
        let w = compute_weights(kernel, &x, &it_cfg)?;
        let direct_difference = if x.len() <= direct_limit {
            let d = solve_direct(kernel, &x, &SolverConfig::direct().with_exec(cfg.exec))?;
            Some(max_relative_difference(&w.c, &d.c))
        } else {
            None
        };
        rows.push(IterationRow { n: x.len(), iterations: w.iterations, converged: w.converged, direct_difference });
    }
    Ok(IterationReport { family, rows })
}

/// `max|a − b| / max|b|`.
pub fn max_relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub n: usize,
    pub sampled: f64,
    pub exact: f64,
    /// Exact σ_Q of the rule transported to the spheroid, when requested.
    pub spheroid_exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub family: NodeFamily,
    pub sigma: f64,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<StabilityRow>,
    /// Slope of exact σ_Q against N.
    pub slope: f64,
}

impl StabilityReport {
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment=stability");
        let _ = writeln!(s, "family={}", self.family);
        let _ = writeln!(s, "sigma={:.16e}", self.sigma);
        let _ = writeln!(s, "samples={}", self.samples);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "slope={:.16e}", self.slope);
        for r in &self.rows {
            let sp = r.spheroid_exact.map(|d| format!("{d:.16e}")).unwrap_or_else(|| "none".into());
            let _ = writeln!(s, "cell={},{:.16e},{:.16e},{sp}", r.n, r.sampled, r.exact);
        }
        s
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let kv = parse_record(text, "stability")?;
        let mut rows = Vec::new();
        for v in kv.all("cell") {
            let f: Vec<&str> = v.split(',').collect();
            if f.len() != 4 {
                return Err(bad("cell", v));
            }
            rows.push(StabilityRow {
                n: parse_num(f[0])?,
                sampled: parse_num(f[1])?,
                exact: parse_num(f[2])?,
                spheroid_exact: if f[3] == "none" { None } else { Some(parse_num(f[3])?) },
            });
        }
        Ok(Self {
            family: kv.one("family")?.parse()?,
            sigma: parse_num(kv.one("sigma")?)?,
            samples: parse_num(kv.one("samples")?)?,
            seed: parse_num(kv.one("seed")?)?,
            rows,
            slope: parse_num(kv.one("slope")?)?,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("family,N,sampled,exact\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.16e},{:.16e}", self.family, r.n, r.sampled, r.exact);
        }
        s
    }
}

/// Noise propagation from already solved rules.
pub fn stability_from_rules(
    family: NodeFamily,
    rules: &[&QuadratureRule],
    sigma: f64,
    samples: usize,
    seed: u64,
    spheroid_a: Option<f64>,
    exec: Execution,
) -> Result<StabilityReport> {
    let mut rows = Vec::new();
    for r in rules {
        let e = noise_stddev(r, sigma, samples, seed, exec)?;
        let spheroid_exact = match spheroid_a {
            Some(a) => Some(noise_stddev(&spheroid_rule(r, a)?, sigma, samples, seed, exec)?.exact),
            None => None,
        };
        rows.push(StabilityRow { n: r.len(), sampled: e.sampled, exact: e.exact, spheroid_exact });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.exact)).collect();
    let (slope, _) = fit_loglog(&pts)?;
    Ok(StabilityReport { family, sigma, samples, seed, rows, slope })
}

/// Generate, solve and measure noise propagation for each size.
#[allow(clippy::too_many_arguments)]
pub fn stability_study(
    family: NodeFamily,
    sizes: &[usize],
    kernel: &SurfaceSplineKernel,
    cfg: &SolverConfig,
    samples: usize,
    seed: u64,
    spheroid_a: Option<f64>,
) -> Result<StabilityReport> {
    let mut rules = Vec::new();
    for &s in sizes {
        let spec = FamilySpec::from_family(family, s, seed)?;
        let (x, w) = solve_family(&spec, kernel, cfg)?;
        rules.push(QuadratureRule::from_solution(&x, &w, cfg)?);
    }
    let refs: Vec<&QuadratureRule> = rules.iter().collect();
    stability_from_rules(family, &refs, 1.0, samples, seed, spheroid_a, cfg.exec)
}

struct Record<'a>(Vec<(&'a str, &'a str)>);

impl<'a> Record<'a> {
    fn one(&self, key: &str) -> Result<&'a str> {
        self.0
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Parse { line: 0, message: format!("missing key `{key}`") })
    }

    fn all<'s>(&'s self, key: &'s str) -> impl Iterator<Item = &'a str> + 's {
        self.0.iter().filter(move |(k, _)| *k == key).map(|(_, v)| *v)
    }
}

fn parse_record<'a>(text: &'a str, kind: &str) -> Result<Record<'a>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key=value, got `{t}`") })?;
        out.push((k, v));
    }
    let rec = Record(out);
    if rec.one("experiment")? != kind {
        return Err(Error::Parse { line: 1, message: format!("not a {kind} record") });
    }
    Ok(rec)
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim().parse().map_err(|e: T::Err| Error::Parse { line: 0, message: format!("`{s}`: {e}") })
}

fn bad(key: &str, v: &str) -> Error {
    Error::Parse { line: 0, message: format!("malformed {key} `{v}`") }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn funk_hecke_constant_harmonic() {
        let g2 = TargetKernel::Poisson { eps: POISSON_EPS };
        let v = funk_hecke_value(&g2, 0, 1, &XcConvention::Standard.center()).unwrap();
        assert!((v - (4.0 * PI).sqrt()).abs() < 1e-14);
        assert!(funk_hecke_value(&g2, 2, 6, &UnitVector3::e_z()).is_err());
        // Y_{1,1} ∝ y vanishes at e_z
        assert_eq!(funk_hecke_value(&g2, 1, 1, &UnitVector3::e_z()).unwrap(), 0.0);
    }

    #[test]
    fn targets_at_center() {
        let (f1, f2) = make_targets(XcConvention::Standard);
        let c = f1.center;
        let s: f64 = real_sph_harm_degree(20, &c).iter().map(|v| v.abs()).sum();
        assert_eq!(f1.eval(&c.to_array()), 0.0);
        assert!((f2.eval(&c.to_array()) - 15.0 * s).abs() < 1e-11 * s * 15.0);
    }

    #[test]
    fn ratio_of_exact_integrals() {
        let (f1, f2) = make_targets(XcConvention::LiteralNormalized);
        let expect = POISSON_EPS.powi(20) * 41.0 / TargetKernel::PotentialSpline.coeff(20);
        assert!((f2.exact / f1.exact - expect).abs() < 1e-12 * expect);
        let printed = REFERENCE_INTEGRAL_F2 / REFERENCE_INTEGRAL_F1;
        assert!((printed - expect).abs() < 1e-11 * expect);
    }

    #[test]
    fn brute_force_matches_funk_hecke() {
        let (f1, f2) = make_targets(XcConvention::Standard);
        let b2 = f2.brute_force_integral(4, 48, 64);
        assert!((b2 - f2.exact).abs() < 1e-9, "{b2} vs {}", f2.exact);
        let b1 = f1.brute_force_integral(12, 32, 64);
        assert!((b1 - f1.exact).abs() < 1e-7, "{b1} vs {}", f1.exact);
    }

    #[test]
    fn slope_fit_and_drop_rule() {
        let pts: Vec<(f64, f64)> = [1e3, 4e3, 9e3, 1.6e4].iter().map(|&n: &f64| (n, 3.0 * n.powf(-1.25))).collect();
        let (s, _) = fit_slope_drop_first(&pts).unwrap();
        assert!((s + 1.25).abs() < 1e-12);
        let mut bent = pts.clone();
        bent[0].1 *= 8.0;
        let (s, d) = fit_slope_drop_first(&bent).unwrap();
        assert!(d && (s + 1.25).abs() < 1e-12);
        // a plateau before the asymptotic regime
        let plateau = [(2501.0, 5.112e-3), (10001.0, 5.549e-3), (22501.0, 1.770e-3), (40001.0, 1.040e-3)];
        let (s, d) = fit_slope_drop_first(&plateau).unwrap();
        assert!(d && (s + 1.221).abs() < 1e-3, "{s}");
        let (s3, d3) = fit_slope_drop_first(&plateau[..3]).unwrap();
        assert!(!d3 && s3 > -0.5);
        assert!(fit_loglog(&pts[..1]).is_err());
    }

    #[test]
    fn records_round_trip() {
        let c = ConvergenceReport::from_cells(
            NodeFamily::Fibonacci,
            "f1",
            vec![(2501, 0.1 / 3.0), (10001, 1e-3 * PI), (22501, 7.77e-5)],
        )
        .unwrap();
        assert_eq!(ConvergenceReport::from_record(&c.to_record()).unwrap(), c);
        let it = IterationReport {
            family: NodeFamily::Icosahedral,
            rows: vec![
                IterationRow { n: 2562, iterations: 8, converged: true, direct_difference: Some(1.0 / 7.0) },
                IterationRow { n: 10242, iterations: 9, converged: true, direct_difference: None },
            ],
        };
        assert_eq!(IterationReport::from_record(&it.to_record()).unwrap(), it);
        let st = StabilityReport {
            family: NodeFamily::MinEnergy,
            sigma: 1.0,
            samples: 500,
            seed: 42,
            rows: vec![StabilityRow { n: 100, sampled: 0.3, exact: 1.0 / 3.0, spheroid_exact: Some(0.2) }],
            slope: -0.5,
        };
        assert_eq!(StabilityReport::from_record(&st.to_record()).unwrap(), st);
        assert!(StabilityReport::from_record(&c.to_record()).is_err());
    }
}
