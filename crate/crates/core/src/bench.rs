//! Benchmark problem catalog, error norms, and sweep/convergence drivers.
//!
//! Every problem is posed as `laplacian u = f + btilde(u, grad u)` with a
//! per-segment boundary rule; where an exact solution exists, all boundary
//! data and right-hand sides are manufactured from it so the discrete
//! solution can be compared nodewise.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use crate::assembly::{
    assemble_global, build_rows, build_stencils, solve_global, AssemblyError, Method, PdeOperator,
    QuadConfig, StencilDiagnostics, DEFAULT_KAPPA,
};
use crate::geometry::{
    halton_nodes, quasi_uniform_for_target, repel_nodes_disk, uniform_nodes, Bc, Domain,
    GeometryError, NodeSet,
};
use crate::rbf_direct::BasisKind;
use crate::solver::SolveReport;
use crate::Point2;

use std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown problem name: {0}")]
    UnknownProblem(String),
    #[error("unknown method label: {0}")]
    UnknownMethod(String),
    #[error("unknown distribution: {0}")]
    UnknownDistribution(String),
    #[error("distribution {0:?} is not available on this domain")]
    DistributionUnavailable(Distribution),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("problem has no exact solution")]
    NoExact,
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type ScalarField = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;
pub type OperatorCoefficients = Arc<dyn Fn(Point2) -> (f64, f64, f64) + Send + Sync>;
pub type BoundaryRule = Arc<dyn Fn(Point2, Point2) -> Option<(Bc, f64)> + Send + Sync>;

/// A fully specified benchmark problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Domain,
    /// Known part of the right-hand side.
    pub f: ScalarField,
    /// Linear solution-dependent part, as pointwise coefficients
    /// `(c_u, c_x, c_y)` multiplying `(u, u_x, u_y)`.
    pub btilde: Option<OperatorCoefficients>,
    pub boundary: BoundaryRule,
    pub exact: Option<ScalarField>,
}

/// Decay parameters of the convection-diffusion benchmark.
pub const CONVDIFF_K_VALUES: [f64; 3] = [40.0, 100.0, 200.0];
/// Peclet numbers of the thermal boundary-layer benchmark.
pub const THERMAL_PE_VALUES: [f64; 3] = [2.5, 50.0, 125.0];
/// Inlet/outlet values of the convection-diffusion benchmark.
pub const CONVDIFF_U0: f64 = 1.0;
pub const CONVDIFF_U1: f64 = 10.0;

fn on_line(v: f64, target: f64) -> bool {
    (v - target).abs() < 1e-9
}

/// Poisson with mixed boundary conditions on the square `[-1/2, 1/2]^2`;
/// exact solution `sin(pi x) cos(pi y / 2)`, Dirichlet on the vertical
/// edges, Neumann on the horizontal ones.
pub fn problem_pep5() -> ProblemSpec {
    let exact = |p: Point2| (PI * p.x).sin() * (PI * p.y / 2.0).cos();
    let grad = |p: Point2| {
        Point2::new(
            PI * (PI * p.x).cos() * (PI * p.y / 2.0).cos(),
            -(PI / 2.0) * (PI * p.x).sin() * (PI * p.y / 2.0).sin(),
        )
    };
    ProblemSpec {
        name: "pep5".into(),
        domain: Domain::rectangle(-0.5, 0.5, -0.5, 0.5),
        f: Arc::new(move |p| -(5.0 * PI * PI / 4.0) * exact(p)),
        btilde: None,
        boundary: Arc::new(move |p, n| {
            if on_line(p.x, -0.5) || on_line(p.x, 0.5) {
                Some((Bc::Dirichlet, exact(p)))
            } else {
                Some((Bc::Neumann, n.dot(&grad(p))))
            }
        }),
        exact: Some(Arc::new(exact)),
    }
}

/// Poisson with Dirichlet data on `[1, 2]^2`; exact solution
/// `sin(pi x/6) sin(7 pi x/4) sin(3 pi y/4) sin(5 pi y/4)`.
pub fn problem_pep7() -> ProblemSpec {
    const A: f64 = PI / 6.0;
    const B: f64 = 7.0 * PI / 4.0;
    const C: f64 = 3.0 * PI / 4.0;
    const D: f64 = 5.0 * PI / 4.0;
    let xf = |x: f64| (A * x).sin() * (B * x).sin();
    let yf = |y: f64| (C * y).sin() * (D * y).sin();
    let exact = move |p: Point2| xf(p.x) * yf(p.y);
    ProblemSpec {
        name: "pep7".into(),
        domain: Domain::rectangle(1.0, 2.0, 1.0, 2.0),
        f: Arc::new(move |p| {
            let xpp = -(A * A + B * B) * xf(p.x) + 2.0 * A * B * (A * p.x).cos() * (B * p.x).cos();
            let ypp = -(C * C + D * D) * yf(p.y) + 2.0 * C * D * (C * p.y).cos() * (D * p.y).cos();
            xpp * yf(p.y) + xf(p.x) * ypp
        }),
        btilde: None,
        boundary: Arc::new(move |p, _| Some((Bc::Dirichlet, exact(p)))),
        exact: Some(Arc::new(exact)),
    }
}

/// Poisson on the unit disk; exact solution `sin(10(x+y))`, Dirichlet data.
pub fn problem_disk() -> ProblemSpec {
    let exact = |p: Point2| (10.0 * (p.x + p.y)).sin();
    ProblemSpec {
        name: "disk".into(),
        domain: Domain::unit_disk(),
        f: Arc::new(move |p| -200.0 * exact(p)),
        btilde: None,
        boundary: Arc::new(move |p, _| Some((Bc::Dirichlet, exact(p)))),
        exact: Some(Arc::new(exact)),
    }
}

/// Convective velocity of the convection-diffusion benchmark.
pub fn convdiff_velocity(k: f64) -> impl Fn(f64) -> f64 + Copy {
    move |x: f64| (CONVDIFF_U1 / CONVDIFF_U0).ln() + k * (x - 0.5)
}

/// One-dimensional steady convection-diffusion with variable velocity,
/// embedded in the strip `[0,1] x [-0.1, 0.1]`:
/// `laplacian u = V(x) u_x + k u`, Dirichlet inlet/outlet, Neumann walls.
pub fn problem_convdiff(k: f64) -> ProblemSpec {
    let v = convdiff_velocity(k);
    let exact = move |p: Point2| {
        CONVDIFF_U0
            * (k / 2.0 * p.x * p.x + ((CONVDIFF_U1 / CONVDIFF_U0).ln() - k / 2.0) * p.x).exp()
    };
    ProblemSpec {
        name: format!("convdiff1d-k{k}"),
        domain: Domain::rectangle(0.0, 1.0, -0.1, 0.1),
        f: Arc::new(|_| 0.0),
        btilde: Some(Arc::new(move |p| (k, v(p.x), 0.0))),
        boundary: Arc::new(move |p, _| {
            if on_line(p.x, 0.0) {
                Some((Bc::Dirichlet, CONVDIFF_U0))
            } else if on_line(p.x, 1.0) {
                Some((Bc::Dirichlet, CONVDIFF_U1))
            } else {
                Some((Bc::Neumann, 0.0))
            }
        }),
        exact: Some(Arc::new(exact)),
    }
}

/// Thermal boundary layer in a channel on the unit square:
/// `laplacian T = Pe 4 y (y - 1) T_x`, hot bottom wall, cold top and inlet,
/// zero-gradient outlet. No exact solution.
pub fn problem_thermal(pe: f64) -> ProblemSpec {
    ProblemSpec {
        name: format!("thermal-pe{pe}"),
        domain: Domain::rectangle(0.0, 1.0, 0.0, 1.0),
        f: Arc::new(|_| 0.0),
        btilde: Some(Arc::new(move |p| (0.0, pe * 4.0 * p.y * (p.y - 1.0), 0.0))),
        boundary: Arc::new(move |p, _| {
            // inlet wins the (0,0) corner; the Dirichlet walls win the
            // outlet corners
            if on_line(p.x, 0.0) {
                Some((Bc::Dirichlet, 0.0))
            } else if on_line(p.y, 0.0) {
                Some((Bc::Dirichlet, 1.0))
            } else if on_line(p.y, 1.0) {
                Some((Bc::Dirichlet, 0.0))
            } else {
                Some((Bc::Neumann, 0.0))
            }
        }),
        exact: None,
    }
}

/// Look up a benchmark by name with its default parameters.
pub fn problem_catalog(name: &str) -> Result<ProblemSpec, BenchError> {
    match name {
        "pep5" => Ok(problem_pep5()),
        "pep7" => Ok(problem_pep7()),
        "disk" => Ok(problem_disk()),
        "convdiff1d" => Ok(problem_convdiff(40.0)),
        "thermal" => Ok(problem_thermal(50.0)),
        other => Err(BenchError::UnknownProblem(other.to_string())),
    }
}

/// Nodal error norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// Absolute maximum error.
    pub linf: f64,
    /// Relative L2 error in percent; `None` when the exact vector has zero
    /// norm, which leaves the normalization undefined.
    pub l2_percent: Option<f64>,
    /// Root mean square error.
    pub rms: f64,
}

pub fn error_norms(exact: &[f64], approx: &[f64]) -> ErrorReport {
    assert_eq!(exact.len(), approx.len());
    assert!(!exact.is_empty());
    let mut linf = 0.0f64;
    let mut se = 0.0;
    let mut sx = 0.0;
    for (&e, &a) in exact.iter().zip(approx) {
        let d = e - a;
        linf = linf.max(d.abs());
        se += d * d;
        sx += e * e;
    }
    ErrorReport {
        linf,
        l2_percent: (sx > 0.0).then(|| 100.0 * (se / sx).sqrt()),
        rms: (se / exact.len() as f64).sqrt(),
    }
}

/// Node distribution families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Uniform,
    Halton,
    QuasiUniform,
    Repel,
}

impl Distribution {
    pub fn label(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Halton => "halton",
            Distribution::QuasiUniform => "quasi-uniform",
            Distribution::Repel => "repel",
        }
    }
}

impl FromStr for Distribution {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "uniform" => Ok(Distribution::Uniform),
            "halton" => Ok(Distribution::Halton),
            "quasi-uniform" => Ok(Distribution::QuasiUniform),
            "repel" => Ok(Distribution::Repel),
            other => Err(BenchError::UnknownDistribution(other.to_string())),
        }
    }
}

/// Interior grid shape for a uniform tensor distribution: the divisor pair
/// of `n` whose aspect ratio best matches the domain.
fn uniform_grid_shape(domain: &Domain, n: usize) -> (usize, usize) {
    let (xmin, xmax, ymin, ymax) = domain.bbox();
    let aspect = (xmax - xmin) / (ymax - ymin);
    let mut best = (n, 1, f64::INFINITY);
    for a in 1..=n {
        if n % a != 0 {
            continue;
        }
        let b = n / a;
        let cost = ((a as f64 / b as f64) / aspect).ln().abs();
        if cost < best.2 {
            best = (a, b, cost);
        }
    }
    (best.0, best.1)
}

/// Boundary node count rule for scattered interior nodes: boundary spacing
/// matching the mean interior spacing.
pub fn scattered_boundary_count(domain: &Domain, n: usize) -> usize {
    (domain.perimeter() / (domain.area() / n as f64).sqrt()).round() as usize
}

/// Generate the node set of a problem for the given distribution and target
/// interior count, with boundary conditions applied.
pub fn generate_nodes(
    spec: &ProblemSpec,
    distribution: Distribution,
    n_target: usize,
    seed: u64,
) -> Result<NodeSet, BenchError> {
    let mut ns = match distribution {
        Distribution::Uniform => {
            let Domain::Rectangle { .. } = spec.domain else {
                return Err(BenchError::DistributionUnavailable(distribution));
            };
            let (a, b) = uniform_grid_shape(&spec.domain, n_target);
            uniform_nodes(&spec.domain, a + 2, b + 2)?
        }
        Distribution::Halton => halton_nodes(
            &spec.domain,
            n_target,
            scattered_boundary_count(&spec.domain, n_target),
        ),
        Distribution::QuasiUniform => quasi_uniform_for_target(&spec.domain, n_target)?,
        Distribution::Repel => {
            let Domain::Disk { radius, .. } = spec.domain else {
                return Err(BenchError::DistributionUnavailable(distribution));
            };
            let h = radius * (PI / n_target as f64).sqrt();
            repel_nodes_disk(h, 6, 40, seed)?
        }
    };
    ns.apply_boundary_data(|p, n| (spec.boundary)(p, n))?;
    Ok(ns)
}

/// Everything but the method-specific shape parameter.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub method: Method,
    pub distribution: Distribution,
    pub n_target: usize,
    pub stencil_n: usize,
    pub quad: QuadConfig,
    pub seed: u64,
    /// Boundary band width in units of the mean node spacing.
    pub band_factor: f64,
}

impl SolveConfig {
    pub fn new(method: Method, distribution: Distribution, n_target: usize, stencil_n: usize) -> Self {
        SolveConfig {
            method,
            distribution,
            n_target,
            stencil_n,
            quad: QuadConfig::default(),
            seed: 0,
            band_factor: 3.0,
        }
    }
}

#[derive(Debug)]
pub struct SolveOutcome {
    pub nodeset: NodeSet,
    pub u: DVector<f64>,
    /// Interior nodal error norms; absent when no exact solution exists.
    pub report: Option<ErrorReport>,
    pub solve: SolveReport,
    pub diagnostics: Vec<StencilDiagnostics>,
    pub wall_seconds: f64,
}

/// End-to-end driver: nodes, stencils, rows, global solve, error norms.
pub fn solve_problem(spec: &ProblemSpec, cfg: &SolveConfig) -> Result<SolveOutcome, BenchError> {
    let start = Instant::now();
    let ns = generate_nodes(spec, cfg.distribution, cfg.n_target, cfg.seed)?;
    let spacing = (spec.domain.area() / ns.interior.len().max(1) as f64).sqrt();
    let stencils = build_stencils(
        &ns,
        &spec.domain,
        cfg.stencil_n,
        cfg.band_factor * spacing,
        DEFAULT_KAPPA,
    )?;
    let op = PdeOperator {
        f: &*spec.f,
        btilde: spec
            .btilde
            .as_ref()
            .map(|b| &**b as &(dyn Fn(Point2) -> (f64, f64, f64) + Sync)),
    };
    let (rows, diagnostics) = build_rows(&stencils, &ns, cfg.method, &op, &cfg.quad)?;
    let system = assemble_global(&rows, ns.interior.len())?;
    let (u, solve) = solve_global(&system)?;
    let report = spec.exact.as_ref().map(|exact| {
        let ex: Vec<f64> = ns.interior.iter().map(|&p| exact(p)).collect();
        let ap: Vec<f64> = u.iter().copied().collect();
        error_norms(&ex, &ap)
    });
    Ok(SolveOutcome {
        nodeset: ns,
        u,
        report,
        solve,
        diagnostics,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Replace the shape parameter of a method (thin-plate splines have none and
/// pass through unchanged).
pub fn method_with_eps(method: Method, eps: f64) -> Method {
    let swap = |kind: BasisKind| match kind {
        BasisKind::Ga { .. } => BasisKind::Ga { eps },
        BasisKind::Mq1 { .. } => BasisKind::Mq1 { eps },
        BasisKind::Mq2 { .. } => BasisKind::Mq2 { eps },
        BasisKind::Tps => BasisKind::Tps,
    };
    match method {
        Method::Lrdrm(k) => Method::Lrdrm(swap(k)),
        Method::Lim(k) => Method::Lim(swap(k)),
        Method::LimRbfQr { .. } => Method::LimRbfQr { eps },
    }
}

/// Shape parameter of a method, if any.
pub fn method_eps(method: &Method) -> Option<f64> {
    match method {
        Method::Lrdrm(k) | Method::Lim(k) => match *k {
            BasisKind::Ga { eps } | BasisKind::Mq1 { eps } | BasisKind::Mq2 { eps } => Some(eps),
            BasisKind::Tps => None,
        },
        Method::LimRbfQr { eps } => Some(*eps),
    }
}

/// CSV label of a method.
pub fn method_label(method: &Method) -> String {
    let basis = |k: &BasisKind| match k {
        BasisKind::Ga { .. } => "ga",
        BasisKind::Mq1 { .. } => "mq1",
        BasisKind::Mq2 { .. } => "mq2",
        BasisKind::Tps => "tps",
    };
    match method {
        Method::Lrdrm(k) => format!("lrdrm-{}", basis(k)),
        Method::Lim(k) => format!("lim-{}", basis(k)),
        Method::LimRbfQr { .. } => "lim-rbfqr".to_string(),
    }
}

/// Inverse of [`method_label`], with the shape parameter supplied.
pub fn parse_method(label: &str, eps: f64) -> Result<Method, BenchError> {
    let basis = |name: &str| -> Result<BasisKind, BenchError> {
        match name {
            "ga" => Ok(BasisKind::Ga { eps }),
            "mq1" => Ok(BasisKind::Mq1 { eps }),
            "mq2" => Ok(BasisKind::Mq2 { eps }),
            "tps" => Ok(BasisKind::Tps),
            other => Err(BenchError::UnknownMethod(other.to_string())),
        }
    };
    if label == "lim-rbfqr" {
        Ok(Method::LimRbfQr { eps })
    } else if let Some(rest) = label.strip_prefix("lrdrm-") {
        Ok(Method::Lrdrm(basis(rest)?))
    } else if label == "lrdrm" {
        Ok(Method::Lrdrm(BasisKind::Ga { eps }))
    } else if let Some(rest) = label.strip_prefix("lim-") {
        Ok(Method::Lim(basis(rest)?))
    } else if label == "lim" {
        Ok(Method::Lim(BasisKind::Ga { eps }))
    } else {
        Err(BenchError::UnknownMethod(label.to_string()))
    }
}

/// One row of a result table.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub problem: String,
    pub method: String,
    pub distribution: String,
    pub n: usize,
    pub stencil_n: usize,
    pub epsilon: f64,
    pub linf: f64,
    pub l2pct: f64,
    pub rms: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
}

impl ResultRecord {
    pub fn from_outcome(
        spec: &ProblemSpec,
        cfg: &SolveConfig,
        method: &Method,
        outcome: &SolveOutcome,
    ) -> Self {
        let report = outcome.report;
        ResultRecord {
            problem: spec.name.clone(),
            method: method_label(method),
            distribution: cfg.distribution.label().to_string(),
            n: outcome.nodeset.interior.len(),
            stencil_n: cfg.stencil_n,
            epsilon: method_eps(method).unwrap_or(0.0),
            linf: report.map_or(f64::NAN, |r| r.linf),
            l2pct: report.map_or(f64::NAN, |r| r.l2_percent.unwrap_or(f64::NAN)),
            rms: report.map_or(f64::NAN, |r| r.rms),
            iterations: outcome.solve.iterations,
            wall_seconds: outcome.wall_seconds,
        }
    }

    /// A flagged record for a failed run: norms are `nan`.
    pub fn failed(spec: &ProblemSpec, cfg: &SolveConfig, method: &Method) -> Self {
        ResultRecord {
            problem: spec.name.clone(),
            method: method_label(method),
            distribution: cfg.distribution.label().to_string(),
            n: cfg.n_target,
            stencil_n: cfg.stencil_n,
            epsilon: method_eps(method).unwrap_or(0.0),
            linf: f64::NAN,
            l2pct: f64::NAN,
            rms: f64::NAN,
            iterations: 0,
            wall_seconds: 0.0,
        }
    }
}

/// Wall time is intentionally absent: identical configurations must emit
/// byte-identical CSV, so timing is reported on stderr instead.
pub const RESULT_CSV_HEADER: &str =
    "problem,method,distribution,N,n,epsilon,linf,l2pct,rms,iterations";

/// One record as a CSV data row (no trailing newline).
pub fn record_csv_row(r: &ResultRecord) -> String {
    format!(
        "{},{},{},{},{},{},{:e},{:e},{:e},{}",
        r.problem,
        r.method,
        r.distribution,
        r.n,
        r.stencil_n,
        r.epsilon,
        r.linf,
        r.l2pct,
        r.rms,
        r.iterations
    )
}

pub fn write_results_csv<W: std::io::Write>(
    records: &[ResultRecord],
    mut w: W,
) -> Result<(), BenchError> {
    writeln!(w, "{RESULT_CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", record_csv_row(r))?;
    }
    Ok(())
}

pub fn read_results_csv<R: std::io::BufRead>(r: R) -> Result<Vec<ResultRecord>, BenchError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| BenchError::Csv("empty file".into()))??;
    if header.trim() != RESULT_CSV_HEADER {
        return Err(BenchError::Csv(format!("unexpected header: {header}")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 10 {
            return Err(BenchError::Csv(format!("bad field count: {line}")));
        }
        out.push(parse_record_fields(&parts)?);
    }
    Ok(out)
}

/// Parse the first ten CSV fields of a data row into a record; wall time is
/// not serialized and reads back as zero.
pub fn parse_record_fields(parts: &[&str]) -> Result<ResultRecord, BenchError> {
    if parts.len() < 10 {
        return Err(BenchError::Csv(format!(
            "bad field count: {}",
            parts.join(",")
        )));
    }
    let num =
        |s: &str| -> Result<f64, BenchError> { s.parse().map_err(|_| BenchError::Csv(s.into())) };
    let int =
        |s: &str| -> Result<usize, BenchError> { s.parse().map_err(|_| BenchError::Csv(s.into())) };
    Ok(ResultRecord {
        problem: parts[0].to_string(),
        method: parts[1].to_string(),
        distribution: parts[2].to_string(),
        n: int(parts[3])?,
        stencil_n: int(parts[4])?,
        epsilon: num(parts[5])?,
        linf: num(parts[6])?,
        l2pct: num(parts[7])?,
        rms: num(parts[8])?,
        iterations: int(parts[9])?,
        wall_seconds: 0.0,
    })
}

/// One sweep row: either the completed run or the failure reason.
#[derive(Debug)]
pub struct SweepRow {
    pub epsilon: f64,
    pub outcome: Result<SweepData, String>,
}

#[derive(Debug)]
pub struct SweepData {
    pub record: ResultRecord,
    pub max_cond_a: f64,
    pub max_cond_b: f64,
}

fn cond_stats(diags: &[StencilDiagnostics]) -> (f64, f64) {
    // Infinity is a meaningful outcome here (a numerically singular local
    // matrix); only NaN is excluded from the running maximum.
    diags.iter().fold((0.0f64, 0.0f64), |(a, b), d| {
        (
            if d.cond_a.is_nan() { a } else { a.max(d.cond_a) },
            if d.cond_b.is_nan() { b } else { b.max(d.cond_b) },
        )
    })
}

/// One full solve per shape parameter; failures flag the row and the sweep
/// continues.
pub fn epsilon_sweep(
    spec: &ProblemSpec,
    cfg: &SolveConfig,
    eps_list: &[f64],
) -> Vec<SweepRow> {
    eps_list
        .iter()
        .map(|&eps| {
            let method = method_with_eps(cfg.method, eps);
            let run_cfg = SolveConfig {
                method,
                ..cfg.clone()
            };
            let outcome = match solve_problem(spec, &run_cfg) {
                Ok(out) => {
                    let (ca, cb) = cond_stats(&out.diagnostics);
                    Ok(SweepData {
                        record: ResultRecord::from_outcome(spec, &run_cfg, &method, &out),
                        max_cond_a: ca,
                        max_cond_b: cb,
                    })
                }
                Err(e) => Err(e.to_string()),
            };
            SweepRow { epsilon: eps, outcome }
        })
        .collect()
}

/// One row of a refinement study.
#[derive(Debug)]
pub struct ConvergenceRow {
    pub n_target: usize,
    pub outcome: Result<ResultRecord, String>,
}

/// One full solve per target node count; failures flag the row and the study
/// continues.
pub fn convergence_study(
    spec: &ProblemSpec,
    cfg: &SolveConfig,
    n_list: &[usize],
) -> Vec<ConvergenceRow> {
    n_list
        .iter()
        .map(|&n_target| {
            let run_cfg = SolveConfig {
                n_target,
                ..cfg.clone()
            };
            let outcome = solve_problem(spec, &run_cfg)
                .map(|out| ResultRecord::from_outcome(spec, &run_cfg, &cfg.method, &out))
                .map_err(|e| e.to_string());
            ConvergenceRow { n_target, outcome }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn catalog_names() {
        for name in ["pep5", "pep7", "disk", "convdiff1d", "thermal"] {
            assert!(problem_catalog(name).is_ok(), "{name} missing");
        }
        assert!(matches!(
            problem_catalog("pep6"),
            Err(BenchError::UnknownProblem(_))
        ));
    }

    #[test]
    fn pep5_exact_midpoint() {
        let spec = problem_pep5();
        let exact = spec.exact.unwrap();
        assert_abs_diff_eq!(exact(Point2::new(0.5, 0.0)), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn disk_rhs_vanishes_at_origin() {
        let spec = problem_disk();
        assert_eq!((spec.f)(Point2::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn boundary_data_agree_with_exact() {
        // Dirichlet values match the exact solution exactly; Neumann values
        // match a centered finite difference of it along the normal
        for name in ["pep5", "pep7", "disk", "convdiff1d"] {
            let spec = problem_catalog(name).unwrap();
            let exact = spec.exact.clone().unwrap();
            let ns = generate_nodes(&spec, default_dist(&spec), 100, 0).unwrap();
            let s = 1e-5;
            for node in &ns.boundary {
                match node.bc {
                    Bc::Dirichlet => {
                        assert_abs_diff_eq!(node.value, exact(node.position), epsilon = 1e-12);
                    }
                    Bc::Neumann => {
                        let fd = (exact(node.position + s * node.normal)
                            - exact(node.position - s * node.normal))
                            / (2.0 * s);
                        assert_abs_diff_eq!(node.value, fd, epsilon = 1e-7);
                    }
                }
            }
        }
    }

    fn default_dist(spec: &ProblemSpec) -> Distribution {
        match spec.domain {
            Domain::Rectangle { .. } => Distribution::Uniform,
            Domain::Disk { .. } => Distribution::QuasiUniform,
        }
    }

    #[test]
    fn convdiff_exact_satisfies_pde() {
        // residual of laplacian u - (c_u u + c_x u_x + c_y u_y) - f with the
        // analytically derived u_x = V u and u_xx = (k + V^2) u
        let k = 40.0;
        let spec = problem_convdiff(k);
        let exact = spec.exact.clone().unwrap();
        let btilde = spec.btilde.clone().unwrap();
        let v = convdiff_velocity(k);
        for i in 0..20 {
            let x = (i as f64 + 0.5) / 20.0;
            let p = Point2::new(x, 0.0);
            let u = exact(p);
            let ux = v(x) * u;
            let uxx = (k + v(x) * v(x)) * u;
            let (cu, cx, cy) = btilde(p);
            let residual = uxx - (cu * u + cx * ux + cy * 0.0) - (spec.f)(p);
            assert!(
                residual.abs() < 1e-9 * (1.0 + uxx.abs()),
                "residual {residual} at x={x}"
            );
        }
    }

    #[test]
    fn thermal_corner_ownership() {
        let spec = problem_thermal(50.0);
        // inlet edge owns (0,0) over the hot bottom wall
        let (bc, v) = (spec.boundary)(Point2::new(0.0, 0.0), Point2::new(-1.0, 0.0)).unwrap();
        assert_eq!(bc, Bc::Dirichlet);
        assert_eq!(v, 0.0);
        // the hot wall wins the outlet corner over the Neumann outlet
        let (bc, v) = (spec.boundary)(Point2::new(1.0, 0.0), Point2::new(1.0, 0.0)).unwrap();
        assert_eq!(bc, Bc::Dirichlet);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn error_norm_examples() {
        let r = error_norms(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!((r.linf, r.l2_percent.unwrap(), r.rms), (0.0, 0.0, 0.0));

        let r = error_norms(&[2.0, 0.0], &[0.0, 0.0]);
        assert_abs_diff_eq!(r.linf, 2.0);
        assert_abs_diff_eq!(r.l2_percent.unwrap(), 100.0);
        assert_abs_diff_eq!(r.rms, 2.0f64.sqrt());

        let r = error_norms(&[3.0], &[0.0]);
        assert_abs_diff_eq!(r.rms, 3.0);

        // zero exact norm: relative error undefined, others still reported
        let r = error_norms(&[0.0, 0.0], &[1.0, 0.0]);
        assert!(r.l2_percent.is_none());
        assert_abs_diff_eq!(r.linf, 1.0);
    }

    #[test]
    fn uniform_counts_match_reference_discretizations() {
        let pep5 = problem_pep5();
        let ns = generate_nodes(&pep5, Distribution::Uniform, 400, 0).unwrap();
        assert_eq!(ns.interior.len(), 400);
        assert_eq!(ns.boundary.len(), 84);

        let cd = problem_convdiff(40.0);
        let ns = generate_nodes(&cd, Distribution::Uniform, 500, 0).unwrap();
        assert_eq!(ns.interior.len(), 500);
        assert_eq!(ns.boundary.len(), 124);
    }

    #[test]
    fn repel_requires_disk() {
        let spec = problem_pep5();
        assert!(matches!(
            generate_nodes(&spec, Distribution::Repel, 100, 0),
            Err(BenchError::DistributionUnavailable(_))
        ));
    }

    fn cheap_cfg() -> SolveConfig {
        SolveConfig::new(
            Method::Lrdrm(BasisKind::Mq1 { eps: 2.0 }),
            Distribution::Uniform,
            64,
            12,
        )
    }

    #[test]
    fn sweep_single_epsilon_equals_single_run() {
        let spec = problem_pep5();
        let cfg = cheap_cfg();
        let rows = epsilon_sweep(&spec, &cfg, &[2.0]);
        assert_eq!(rows.len(), 1);
        let sweep_rms = rows[0].outcome.as_ref().unwrap().record.rms;
        let single = solve_problem(&spec, &cfg).unwrap();
        assert_eq!(sweep_rms, single.report.unwrap().rms);
    }

    #[test]
    fn convergence_single_n_equals_single_run() {
        let spec = problem_pep5();
        let cfg = cheap_cfg();
        let rows = convergence_study(&spec, &cfg, &[64]);
        assert_eq!(rows.len(), 1);
        let study_rms = rows[0].outcome.as_ref().unwrap().rms;
        let single = solve_problem(&spec, &cfg).unwrap();
        assert_eq!(study_rms, single.report.unwrap().rms);
    }

    #[test]
    fn pep5_small_solve_is_accurate() {
        let spec = problem_pep5();
        let mut cfg = cheap_cfg();
        cfg.method = Method::Lim(BasisKind::Tps);
        cfg.n_target = 144;
        let out = solve_problem(&spec, &cfg).unwrap();
        assert!(out.solve.converged);
        let report = out.report.unwrap();
        assert!(report.rms < 5e-3, "rms {}", report.rms);
        assert!(report.linf < 2e-2, "linf {}", report.linf);
    }

    #[test]
    fn results_csv_round_trip() {
        let spec = problem_pep5();
        let cfg = cheap_cfg();
        let out = solve_problem(&spec, &cfg).unwrap();
        let rec = ResultRecord::from_outcome(&spec, &cfg, &cfg.method, &out);
        let mut buf = Vec::new();
        write_results_csv(&[rec.clone()], &mut buf).unwrap();
        let parsed = read_results_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].problem, rec.problem);
        assert_eq!(parsed[0].method, rec.method);
        assert_eq!(parsed[0].n, rec.n);
        assert_eq!(parsed[0].rms, rec.rms);
    }

    #[test]
    fn method_label_round_trip() {
        let methods = [
            Method::Lrdrm(BasisKind::Ga { eps: 1.5 }),
            Method::Lrdrm(BasisKind::Tps),
            Method::Lim(BasisKind::Mq1 { eps: 0.5 }),
            Method::LimRbfQr { eps: 0.8 },
        ];
        for m in methods {
            let label = method_label(&m);
            let eps = method_eps(&m).unwrap_or(0.0);
            let back = parse_method(&label, eps).unwrap();
            assert_eq!(method_label(&back), label);
            assert_eq!(method_eps(&back), method_eps(&m));
        }
    }
}
