//! `sphquad`: node generation, weight computation, integration and the
//! validation experiments from the command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure
//! (singular system, GMRES not converged, or a failed rate/accuracy check).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sphquad::experiments::{
    check_reference_integrals, convergence_study, iteration_study, make_targets, stability_study, TargetFunction,
    XcConvention,
};
use sphquad::geometry::{default_resolution, GeodesicStats};
use sphquad::io::{read_nodes, read_values, read_weights, write_nodes, write_rule, write_weights, Header};
use sphquad::nodes::FamilySpec;
use sphquad::quadrature::{
    lagrange_diagnostic, oblate_spheroid_area, product_rule, spheroid_rule, spheroid_scale_sphere,
};
use sphquad::solver::compute_weights;
use sphquad::{Execution, NodeFamily, NodeSet, QuadratureRule, SolverConfig, SolverMethod, SurfaceSplineKernel};

#[derive(Parser)]
#[command(name = "sphquad", version, about = "Kernel quadrature weights on the unit sphere")]
struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for min-energy starts and noise samples.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Suppress summaries on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a node set.
    Nodes {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve for quadrature weights on a node file.
    Weights {
        #[arg(long)]
        nodes: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a weight file to a target or to sampled values.
    Integrate {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, conflicts_with = "values", required_unless_present = "values")]
        target: Option<TargetName>,
        /// One value per node, in node order.
        #[arg(long)]
        values: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Convention::Standard)]
        convention: Convention,
    },
    /// Relative errors for f1/f2 over a sequence of sizes.
    Converge {
        #[arg(long, value_enum)]
        family: FamilyName,
        /// Levels for icosahedral nodes, N otherwise.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, value_enum, default_value_t = TargetChoice::Both)]
        target: TargetChoice,
        #[arg(long, value_enum, default_value_t = Convention::Standard)]
        convention: Convention,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Report the rate checks without failing on them.
        #[arg(long)]
        no_check: bool,
    },
    /// Noise propagation through the weights.
    Stability {
        #[arg(long, value_enum)]
        family: FamilyName,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Also report the rule transported to the spheroid with this a.
        #[arg(long)]
        spheroid_a: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        no_check: bool,
    },
    /// GMRES iteration counts, checked against direct solves.
    Iterations {
        #[arg(long, value_enum)]
        family: FamilyName,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Compare with a direct solve up to this N.
        #[arg(long, default_value_t = 5000)]
        direct_limit: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        no_check: bool,
    },
    /// Transport a sphere rule to the oblate spheroid x² + y² + z²/a² = 1.
    Spheroid {
        #[arg(long)]
        a: f64,
        /// Node file to solve on.
        #[arg(long, conflicts_with = "weights", required_unless_present = "weights")]
        nodes: Option<PathBuf>,
        /// Existing sphere weight file.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_check: bool,
    },
    /// Global Lagrange functions at a few nodes (N ≤ 5000).
    LagrangeDiag {
        #[arg(long)]
        nodes: PathBuf,
        /// Weight file for the same nodes; solved when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Number of probed nodes, spread evenly over the node order.
        #[arg(long, default_value_t = 10)]
        probes: usize,
        /// Gauss–Legendre latitudes of the probe rule (twice as many longitudes).
        #[arg(long, default_value_t = 200)]
        probe_lat: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    Icosahedral,
    Fibonacci,
    MinEnergy,
}

impl FamilyName {
    fn family(self) -> NodeFamily {
        match self {
            FamilyName::Icosahedral => NodeFamily::Icosahedral,
            FamilyName::Fibonacci => NodeFamily::Fibonacci,
            FamilyName::MinEnergy => NodeFamily::MinEnergy,
        }
    }
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: FamilyName,
    /// Subdivision level (icosahedral).
    #[arg(long)]
    level: Option<usize>,
    /// Node count (fibonacci, min-energy).
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "tps-m2")]
    kernel: String,
    #[arg(long, default_value = "gmres")]
    solver: SolverMethod,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Preconditioner stencil size (default 2⌈(ln N)²⌉).
    #[arg(long)]
    neighbors: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetName {
    One,
    F1,
    F2,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum TargetChoice {
    F1,
    F2,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Standard,
    LiteralNormalized,
}

impl Convention {
    fn xc(self) -> XcConvention {
        match self {
            Convention::Standard => XcConvention::Standard,
            Convention::LiteralNormalized => XcConvention::LiteralNormalized,
        }
    }
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<sphquad::Error> for Failure {
    fn from(e: sphquad::Error) -> Self {
        if e.is_numerical() || matches!(e, sphquad::Error::NonFinite { .. }) {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

struct Ctx {
    exec: Execution,
    seed: u64,
    quiet: bool,
}

impl Ctx {
    fn say(&self, s: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", s.as_ref());
        }
    }
}

/// Four significant digits.
fn sig(v: f64) -> String {
    format!("{v:.3e}")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let exec = match setup_threads(cli.threads) {
        Ok(e) => e,
        Err(f) => return report(f),
    };
    let ctx = Ctx { exec, seed: cli.seed, quiet: cli.quiet };
    match run(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Usage(m) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Failure::Numerical(m) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}

fn setup_threads(threads: Option<usize>) -> Result<Execution, Failure> {
    match threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(t) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Sequential),
        None => Ok(Execution::default()),
    }
}

fn run(ctx: &Ctx, cmd: Command) -> CmdResult {
    match cmd {
        Command::Nodes { family, out } => cmd_nodes(ctx, &family, &out),
        Command::Weights { nodes, solver, out } => cmd_weights(ctx, &nodes, &solver, &out),
        Command::Integrate { weights, target, values, convention } => {
            cmd_integrate(ctx, &weights, target, values.as_deref(), convention)
        }
        Command::Converge { family, sizes, target, convention, solver, out_dir, no_check } => {
            cmd_converge(ctx, family, &sizes, target, convention, &solver, out_dir.as_deref(), !no_check)
        }
        Command::Stability { family, sizes, samples, spheroid_a, solver, out_dir, no_check } => {
            cmd_stability(ctx, family, &sizes, samples, spheroid_a, &solver, out_dir.as_deref(), !no_check)
        }
        Command::Iterations { family, sizes, direct_limit, solver, out_dir, no_check } => {
            cmd_iterations(ctx, family, &sizes, direct_limit, &solver, out_dir.as_deref(), !no_check)
        }
        Command::Spheroid { a, nodes, weights, solver, out, no_check } => {
            cmd_spheroid(ctx, a, nodes.as_deref(), weights.as_deref(), &solver, &out, !no_check)
        }
        Command::LagrangeDiag { nodes, weights, probes, probe_lat, solver } => {
            cmd_lagrange(ctx, &nodes, weights.as_deref(), probes, probe_lat, &solver)
        }
    }
}

fn solver_setup(ctx: &Ctx, a: &SolverArgs) -> Result<(SurfaceSplineKernel, SolverConfig), Failure> {
    let kernel = SurfaceSplineKernel::from_name(&a.kernel)?;
    let cfg = SolverConfig {
        method: a.solver,
        tol: a.tol,
        max_iter: a.max_iter,
        neighbors: a.neighbors,
        exec: ctx.exec,
        ..SolverConfig::default()
    };
    Ok((kernel, cfg))
}

fn solver_header(kernel: &SurfaceSplineKernel, cfg: &SolverConfig, seed: u64) -> Header {
    let mut h: Header = vec![
        ("kernel".into(), kernel.name()),
        ("solver".into(), cfg.method.to_string()),
        ("tol".into(), format!("{:e}", cfg.tol)),
        ("seed".into(), seed.to_string()),
    ];
    if let Some(p) = cfg.neighbors {
        h.push(("neighbors".into(), p.to_string()));
    }
    h
}

fn cmd_nodes(ctx: &Ctx, f: &FamilyArgs, out: &Path) -> CmdResult {
    let family = f.family.family();
    let size = match (family, f.level, f.n) {
        (NodeFamily::Icosahedral, Some(l), None) => l,
        (NodeFamily::Icosahedral, _, _) => return Err(Failure::Usage("icosahedral nodes take --level only".into())),
        (_, None, Some(n)) => n,
        (_, _, _) => return Err(Failure::Usage(format!("{family} nodes take --n only"))),
    };
    let spec = FamilySpec::from_family(family, size, ctx.seed)?;
    let (x, energy) = spec.generate_with_report(ctx.exec)?;
    let mut extra: Header = Vec::new();
    if family == NodeFamily::MinEnergy {
        extra.push(("seed".into(), ctx.seed.to_string()));
    }
    if let Some(r) = &energy {
        extra.push(("energy_iterations".into(), r.iterations.to_string()));
        if let Some(w) = &r.warning {
            eprintln!("warning: {w}");
        }
    }
    write_nodes(out, &x, &extra)?;
    let st = GeodesicStats::compute(&x, default_resolution(x.len()), ctx.exec)?;
    ctx.say(format!("N = {}, h ~ {}, q = {}, rho ~ {}", x.len(), sig(st.h), sig(st.q), sig(st.rho)));
    Ok(())
}

fn solve(ctx: &Ctx, x: &NodeSet, a: &SolverArgs) -> Result<QuadratureRule, Failure> {
    let (kernel, cfg) = solver_setup(ctx, a)?;
    let w = compute_weights(&kernel, x, &cfg)?;
    if !w.converged {
        return Err(Failure::Numerical(format!(
            "GMRES did not reach tol {:e} in {} iterations (relative residual {})",
            cfg.tol,
            w.iterations,
            sig(w.residual_history.last().copied().unwrap_or(f64::NAN))
        )));
    }
    ctx.say(format!(
        "N = {}, solver {}, iterations {}, relative residual {}",
        x.len(),
        w.method,
        w.iterations,
        sig(w.relative_residual)
    ));
    if w.negative_count() > 0 {
        eprintln!("warning: {} negative weights", w.negative_count());
    }
    Ok(QuadratureRule::from_solution(x, &w, &cfg)?)
}

fn print_diagnostics(ctx: &Ctx, rule: &QuadratureRule) {
    let d = rule.diagnostics();
    ctx.say(format!(
        "mean {} (area/N {}), min {}, max {}, negative {}",
        sig(d.mean),
        d.expected_mean.map(sig).unwrap_or_else(|| "unknown".into()),
        sig(d.min),
        sig(d.max),
        d.negative
    ));
}

fn cmd_weights(ctx: &Ctx, nodes: &Path, a: &SolverArgs, out: &Path) -> CmdResult {
    let x = read_nodes(nodes)?;
    let rule = solve(ctx, &x, a)?;
    write_weights(out, &x, rule.weights(), rule.provenance())?;
    print_diagnostics(ctx, &rule);
    Ok(())
}

fn target(name: TargetName, conv: Convention) -> Option<TargetFunction> {
    let (f1, f2) = make_targets(conv.xc());
    match name {
        TargetName::One => None,
        TargetName::F1 => Some(f1),
        TargetName::F2 => Some(f2),
    }
}

fn cmd_integrate(ctx: &Ctx, weights: &Path, t: Option<TargetName>, values: Option<&Path>, conv: Convention) -> CmdResult {
    let (x, c, h) = read_weights(weights)?;
    let rule = QuadratureRule::sphere(&x, c, h)?;
    if let Some(v) = values {
        let q = rule.apply_values(&read_values(v)?)?;
        ctx.say(format!("Q = {q:.16e}"));
        return Ok(());
    }
    let name = t.expect("clap requires a target or values");
    let (q, exact) = match target(name, conv) {
        None => (rule.apply(|_| 1.0)?, 4.0 * std::f64::consts::PI),
        Some(f) => (rule.apply(|p| f.eval(p))?, f.exact),
    };
    ctx.say(format!("Q = {q:.16e}, exact {exact:.16e}, relative error {}", sig(((q - exact) / exact).abs())));
    Ok(())
}

fn write_reports(dir: Option<&Path>, stem: &str, header: &Header, files: &[(&str, String)]) -> CmdResult {
    let Some(dir) = dir else { return Ok(()) };
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let mut head = String::new();
    for (k, v) in header {
        let _ = writeln!(head, "# {k}: {v}");
    }
    for (ext, body) in files {
        let p = dir.join(format!("{stem}.{ext}"));
        let text = if *ext == "csv" { body.clone() } else { format!("{head}{body}") };
        fs::write(&p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn sizes_header(h: &mut Header, family: NodeFamily, sizes: &[usize]) {
    h.push(("family".into(), family.to_string()));
    let s: Vec<String> = sizes.iter().map(|v| v.to_string()).collect();
    h.push(("sizes".into(), s.join(",")));
}

fn check(ctx: &Ctx, enabled: bool, results: &[(String, bool)]) -> CmdResult {
    for (what, ok) in results {
        ctx.say(format!("check {}: {what}", if *ok { "ok" } else { "FAILED" }));
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect();
    if enabled && !failed.is_empty() {
        return Err(Failure::Numerical(format!("failed checks: {}", failed.join("; "))));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_converge(
    ctx: &Ctx,
    family: FamilyName,
    sizes: &[usize],
    which: TargetChoice,
    conv: Convention,
    a: &SolverArgs,
    out_dir: Option<&Path>,
    gate: bool,
) -> CmdResult {
    let family = family.family();
    for c in check_reference_integrals() {
        ctx.say(format!(
            "exact integrals ({}): f1 {:.15}, f2 {:.15}; difference from published values {} and {}",
            c.convention.name(),
            c.f1,
            c.f2,
            sig(c.f1_error),
            sig(c.f2_error)
        ));
    }
    let (kernel, cfg) = solver_setup(ctx, a)?;
    let (f1, f2) = make_targets(conv.xc());
    let mut targets = Vec::new();
    if which != TargetChoice::F2 {
        targets.push(&f1);
    }
    if which != TargetChoice::F1 {
        targets.push(&f2);
    }
    let reports = convergence_study(family, sizes, &targets, &kernel, &cfg, ctx.seed)?;
    let mut checks = Vec::new();
    for r in &reports {
        for (n, e) in &r.cells {
            ctx.say(format!("{} {} N={n}: relative error {}", r.family, r.target, sig(*e)));
        }
        ctx.say(format!(
            "{} {}: slope vs N {:.3}, vs h {:.3}{}",
            r.family,
            r.target,
            r.slope_n,
            r.slope_h,
            if r.dropped_first { " (first point dropped)" } else { "" }
        ));
        let (want, tol) = if r.target == "f1" { (-1.25, 0.15) } else { (-2.0, 0.25) };
        checks.push((format!("{} slope {:.3} within {want} +/- {tol}", r.target, r.slope_n), (r.slope_n - want).abs() <= tol));
        let mut h = solver_header(&kernel, &cfg, ctx.seed);
        sizes_header(&mut h, family, sizes);
        h.push(("convention".into(), conv.xc().name().into()));
        write_reports(
            out_dir,
            &format!("convergence_{}_{}", r.family, r.target),
            &h,
            &[("txt", r.to_record()), ("csv", r.to_csv()), ("dat", r.to_series())],
        )?;
    }
    check(ctx, gate, &checks)
}

#[allow(clippy::too_many_arguments)]
fn cmd_stability(
    ctx: &Ctx,
    family: FamilyName,
    sizes: &[usize],
    samples: usize,
    spheroid_a: Option<f64>,
    a: &SolverArgs,
    out_dir: Option<&Path>,
    gate: bool,
) -> CmdResult {
    let family = family.family();
    let (kernel, cfg) = solver_setup(ctx, a)?;
    let r = stability_study(family, sizes, &kernel, &cfg, samples, ctx.seed, spheroid_a)?;
    let mut checks = Vec::new();
    for row in &r.rows {
        let dev = (row.sampled / row.exact - 1.0).abs();
        let sp = row.spheroid_exact.map(|s| format!(", spheroid exact {}", sig(s))).unwrap_or_default();
        ctx.say(format!("N={}: sampled {}, exact {}{sp}", row.n, sig(row.sampled), sig(row.exact)));
        checks.push((format!("N={} sampled within 15% of exact ({:.1}%)", row.n, 100.0 * dev), dev <= 0.15));
    }
    ctx.say(format!("slope of exact sigma_Q vs N: {:.4}", r.slope));
    checks.push((format!("slope {:.4} within -0.5 +/- 0.05", r.slope), (r.slope + 0.5).abs() <= 0.05));
    let mut h = solver_header(&kernel, &cfg, ctx.seed);
    sizes_header(&mut h, family, sizes);
    write_reports(out_dir, &format!("stability_{family}"), &h, &[("txt", r.to_record()), ("csv", r.to_csv())])?;
    check(ctx, gate, &checks)
}

fn cmd_iterations(
    ctx: &Ctx,
    family: FamilyName,
    sizes: &[usize],
    direct_limit: usize,
    a: &SolverArgs,
    out_dir: Option<&Path>,
    gate: bool,
) -> CmdResult {
    let family = family.family();
    let (kernel, cfg) = solver_setup(ctx, a)?;
    let r = iteration_study(family, sizes, &kernel, &cfg, ctx.seed, direct_limit)?;
    let mut checks = Vec::new();
    for row in &r.rows {
        let d = row.direct_difference.map(|d| format!(", direct difference {}", sig(d))).unwrap_or_default();
        ctx.say(format!("N={}: {} iterations{d}", row.n, row.iterations));
        checks.push((format!("N={} converged in <= 30 iterations", row.n), row.converged && row.iterations <= 30));
        if let Some(d) = row.direct_difference {
            checks.push((format!("N={} iterative matches direct to 1e-8", row.n), d <= 1e-8));
        }
    }
    let g = r.growth_ratio();
    checks.push((format!("max/min iterations {g:.2} <= 3"), g <= 3.0));
    let mut h = solver_header(&kernel, &cfg, ctx.seed);
    sizes_header(&mut h, family, sizes);
    write_reports(out_dir, &format!("iterations_{family}"), &h, &[("txt", r.to_record()), ("csv", r.to_csv())])?;
    check(ctx, gate, &checks)
}

fn cmd_spheroid(
    ctx: &Ctx,
    a: f64,
    nodes: Option<&Path>,
    weights: Option<&Path>,
    s: &SolverArgs,
    out: &Path,
    gate: bool,
) -> CmdResult {
    let rule = match (nodes, weights) {
        (Some(n), None) => solve(ctx, &read_nodes(n)?, s)?,
        (None, Some(w)) => {
            let (x, c, h) = read_weights(w)?;
            QuadratureRule::sphere(&x, c, h)?
        }
        _ => return Err(Failure::Usage("give exactly one of --nodes and --weights".into())),
    };
    let t = spheroid_rule(&rule, a)?;
    write_rule(out, t.points(), t.weights(), t.provenance())?;
    let exact = oblate_spheroid_area(a)?;
    let area = t.diagnostics().sum;
    let rel = ((area - exact) / exact).abs();
    let scales: Vec<f64> = rule.points().iter().map(|p| spheroid_scale_sphere(a, p[2])).collect();
    let lo = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ctx.say(format!("a = {a}: area {area:.12} vs exact {exact:.12}, relative error {}", sig(rel)));
    ctx.say(format!("scale factors in [{lo:.6}, {hi:.6}]"));
    check(ctx, gate, &[(format!("area relative error {} <= 1e-6", sig(rel)), rel <= 1e-6)])
}

fn cmd_lagrange(ctx: &Ctx, nodes: &Path, weights: Option<&Path>, probes: usize, probe_lat: usize, s: &SolverArgs) -> CmdResult {
    let x = read_nodes(nodes)?;
    let c = match weights {
        Some(w) => {
            let (y, c, _) = read_weights(w)?;
            if y.len() != x.len() {
                return Err(Failure::Usage(format!("weight file has {} nodes, node file {}", y.len(), x.len())));
            }
            c
        }
        None => solve(ctx, &x, s)?.weights().to_vec(),
    };
    if probes == 0 || probes > x.len() {
        return Err(Failure::Usage(format!("--probes must be in 1..={}", x.len())));
    }
    let idx: Vec<usize> = (0..probes).map(|i| i * x.len() / probes).collect();
    let kernel = SurfaceSplineKernel::from_name(&s.kernel)?;
    let r = lagrange_diagnostic(&kernel, &x, &c, &idx, &product_rule(probe_lat, 2 * probe_lat), ctx.exec)?;
    for p in &r.probes {
        ctx.say(format!(
            "node {}: c {}, int chi {}, |c - int chi| {}, int |chi| {}, cardinality error {}",
            p.node,
            sig(p.weight),
            sig(p.integral),
            sig((p.weight - p.integral).abs()),
            sig(p.l1),
            sig(p.cardinality_error)
        ));
    }
    ctx.say(format!("max over probe points of sum |chi|: {}", sig(r.lebesgue_sum)));
    Ok(())
}
