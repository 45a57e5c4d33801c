//! `limsolve`: command-line front end for the local integral method solver.
//!
//! Subcommands run single solves, shape-parameter sweeps, node-refinement
//! studies, and stencil-size/shape-parameter isoline grids, emitting CSV
//! tables and static SVG plots. Exit codes: 0 success, 2 usage error,
//! 3 numerical failure, 4 I/O error.

mod svg;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use lim_rbfqr::assembly::{Method, QuadConfig};
use lim_rbfqr::bench::{
    generate_nodes, method_with_eps, parse_method, problem_catalog, record_csv_row, solve_problem,
    BenchError, Distribution, ProblemSpec, ResultRecord, SolveConfig, RESULT_CSV_HEADER,
};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "limsolve",
    about = "Meshless local integral method solver for 2-D elliptic problems",
    version
)]
struct Cli {
    /// Worker threads for grid commands (0 = all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonOpts {
    /// Benchmark problem: pep5, pep7, disk, convdiff1d, thermal.
    #[arg(long)]
    problem: String,
    /// Method label: lrdrm-{ga,mq1,mq2,tps}, lim-{ga,mq1,mq2,tps}, lim-rbfqr.
    #[arg(long, default_value = "lim-rbfqr")]
    method: String,
    /// Node distribution: uniform, halton, quasi-uniform, repel.
    #[arg(long, default_value = "uniform")]
    dist: String,
    /// Target interior node count.
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Stencil size.
    #[arg(long, default_value_t = 25)]
    stencil: usize,
    /// Shape parameter of the local basis.
    #[arg(long, default_value_t = 0.8)]
    epsilon: f64,
    /// Seed for the scattered node generators.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gauss-Legendre order on the subregion circle.
    #[arg(long, default_value_t = QuadConfig::default().boundary_order)]
    boundary_quad: usize,
    /// Radial Gauss-Legendre order of the subregion volume rule.
    #[arg(long, default_value_t = QuadConfig::default().radial_order)]
    radial_quad: usize,
    /// Angular trapezoid points of the subregion volume rule.
    #[arg(long, default_value_t = QuadConfig::default().angular_order)]
    angular_quad: usize,
    /// Output CSV path; `-` streams to standard output.
    #[arg(long, default_value = "results.csv")]
    out: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single solve: one result row, optional nodal solution field.
    Run {
        #[command(flatten)]
        common: CommonOpts,
        /// Also write the solution field as `x,y,u_apx[,u_exact]`.
        #[arg(long)]
        field: Option<String>,
    },
    /// One solve per shape parameter.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated shape parameters.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        /// Error-versus-epsilon SVG (log y).
        #[arg(long)]
        plot: Option<String>,
    },
    /// One solve per target node count.
    Converge {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated interior node targets.
        #[arg(long = "n-list", value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        /// Error-versus-N SVG (log-log).
        #[arg(long)]
        plot: Option<String>,
    },
    /// Stencil-size by shape-parameter error grid at fixed N.
    Isolines {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated stencil sizes (grid rows).
        #[arg(long = "stencil-list", value_delimiter = ',', required = true)]
        stencil_list: Vec<usize>,
        /// Comma-separated shape parameters (grid columns).
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        /// log10-error heatmap SVG.
        #[arg(long)]
        plot: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // a failure here only means a pool already exists (tests); ignore
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let common = match &cli.cmd {
        Cmd::Run { common, .. }
        | Cmd::Sweep { common, .. }
        | Cmd::Converge { common, .. }
        | Cmd::Isolines { common, .. } => common,
    };
    if let Err(msg) = validate(common) {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match &cli.cmd {
        Cmd::Run { common, field } => cmd_run(common, field.as_deref()),
        Cmd::Sweep {
            common,
            epsilons,
            plot,
        } => cmd_sweep(common, epsilons, plot.as_deref()),
        Cmd::Converge {
            common,
            n_list,
            plot,
        } => cmd_converge(common, n_list, plot.as_deref()),
        Cmd::Isolines {
            common,
            stencil_list,
            epsilons,
            plot,
        } => cmd_isolines(common, stencil_list, epsilons, plot.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &BenchError) -> u8 {
    match e {
        BenchError::UnknownProblem(_)
        | BenchError::UnknownMethod(_)
        | BenchError::UnknownDistribution(_)
        | BenchError::DistributionUnavailable(_)
        | BenchError::NoExact => EXIT_USAGE,
        BenchError::Io(_) | BenchError::Csv(_) => EXIT_IO,
        BenchError::Geometry(_) | BenchError::Assembly(_) => EXIT_NUMERICAL,
    }
}

/// Resolved options shared by all subcommands.
struct Setup {
    spec: ProblemSpec,
    cfg: SolveConfig,
}

fn validate(common: &CommonOpts) -> Result<(), String> {
    if common.n == 0 {
        return Err("--n must be positive".into());
    }
    if common.stencil == 0 {
        return Err("--stencil must be positive".into());
    }
    if common.epsilon <= 0.0 && !common.method.ends_with("tps") {
        return Err("--epsilon must be positive".into());
    }
    Ok(())
}

fn resolve(common: &CommonOpts) -> Result<Setup, BenchError> {
    let spec = problem_catalog(&common.problem)?;
    let method = parse_method(&common.method, common.epsilon)?;
    let distribution: Distribution = common.dist.parse()?;
    let mut cfg = SolveConfig::new(method, distribution, common.n, common.stencil);
    cfg.seed = common.seed;
    cfg.quad = QuadConfig {
        boundary_order: common.boundary_quad.max(1),
        radial_order: common.radial_quad.max(1),
        angular_order: common.angular_quad.max(4),
    };
    Ok(Setup { spec, cfg })
}

fn open_out(path: &str) -> Result<Box<dyn Write>, BenchError> {
    if path == "-" {
        Ok(Box::new(std::io::stdout().lock()))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn cmd_run(common: &CommonOpts, field: Option<&str>) -> Result<(), BenchError> {
    let Setup { spec, cfg } = resolve(common)?;
    let outcome = solve_problem(&spec, &cfg)?;
    let record = ResultRecord::from_outcome(&spec, &cfg, &cfg.method, &outcome);
    let mut w = open_out(&common.out)?;
    writeln!(w, "{RESULT_CSV_HEADER}")?;
    writeln!(w, "{}", record_csv_row(&record))?;
    w.flush()?;
    eprintln!(
        "{} {}: N={} rms={:e} iters={} wall={:.2}s",
        record.problem,
        record.method,
        record.n,
        record.rms,
        record.iterations,
        outcome.wall_seconds
    );
    if let Some(path) = field {
        let exact = spec.exact.as_ref();
        let mut w = open_out(path)?;
        if exact.is_some() {
            writeln!(w, "x,y,u_apx,u_exact")?;
        } else {
            writeln!(w, "x,y,u_apx")?;
        }
        for (i, p) in outcome.nodeset.interior.iter().enumerate() {
            match exact {
                Some(ex) => writeln!(w, "{:e},{:e},{:e},{:e}", p.x, p.y, outcome.u[i], ex(*p))?,
                None => writeln!(w, "{:e},{:e},{:e}", p.x, p.y, outcome.u[i])?,
            }
        }
        w.flush()?;
    }
    Ok(())
}

/// Grid CSV schema: the result columns plus a trailing failure-reason column
/// (empty on success, `nan` norms otherwise). Kept in sync with
/// [`RESULT_CSV_HEADER`] by a unit test.
pub const GRID_CSV_HEADER: &str =
    "problem,method,distribution,N,n,epsilon,linf,l2pct,rms,iterations,reason";

/// One grid cell outcome: the record (norms `nan` on failure) and the reason.
pub struct GridCell {
    pub record: ResultRecord,
    pub reason: Option<String>,
}

/// Run one solve per configuration, in parallel, preserving input order.
fn run_cells(spec: &ProblemSpec, configs: &[SolveConfig]) -> Vec<GridCell> {
    configs
        .par_iter()
        .map(|cfg| match solve_problem(spec, cfg) {
            Ok(outcome) => GridCell {
                record: ResultRecord::from_outcome(spec, cfg, &cfg.method, &outcome),
                reason: None,
            },
            Err(e) => GridCell {
                record: ResultRecord::failed(spec, cfg, &cfg.method),
                reason: Some(e.to_string().replace([',', '\n'], ";")),
            },
        })
        .collect()
}

fn write_grid_csv<W: Write>(cells: &[GridCell], mut w: W) -> Result<(), BenchError> {
    writeln!(w, "{GRID_CSV_HEADER}")?;
    for c in cells {
        writeln!(
            w,
            "{},{}",
            record_csv_row(&c.record),
            c.reason.as_deref().unwrap_or("")
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg_attr(not(test), allow(dead_code))] // round-trip reader, exercised in tests
fn read_grid_csv<R: std::io::BufRead>(r: R) -> Result<Vec<GridCell>, BenchError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| BenchError::Csv("empty file".into()))??;
    if header.trim() != GRID_CSV_HEADER {
        return Err(BenchError::Csv(format!("unexpected header: {header}")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 11 {
            return Err(BenchError::Csv(format!("bad field count: {line}")));
        }
        let record = lim_rbfqr::bench::parse_record_fields(&parts[..10])?;
        let reason = if parts[10].is_empty() {
            None
        } else {
            Some(parts[10].to_string())
        };
        out.push(GridCell { record, reason });
    }
    Ok(out)
}

fn finish_grid(
    common: &CommonOpts,
    cells: &[GridCell],
    plot: Option<(&str, String)>,
) -> Result<(), BenchError> {
    let mut w = open_out(&common.out)?;
    write_grid_csv(cells, &mut w)?;
    let failures = cells.iter().filter(|c| c.reason.is_some()).count();
    eprintln!(
        "{} cells, {} failed, total wall {:.2}s",
        cells.len(),
        failures,
        cells.iter().map(|c| c.record.wall_seconds).sum::<f64>()
    );
    if let Some((path, contents)) = plot {
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(contents.as_bytes())?;
        f.flush()?;
    }
    Ok(())
}

/// Error measure used in the plots: RMS when available, else `l2pct`.
fn plot_error(r: &ResultRecord) -> f64 {
    if r.rms.is_finite() {
        r.rms
    } else {
        r.l2pct
    }
}

fn cmd_sweep(common: &CommonOpts, epsilons: &[f64], plot: Option<&str>) -> Result<(), BenchError> {
    let Setup { spec, cfg } = resolve(common)?;
    let configs: Vec<SolveConfig> = epsilons
        .iter()
        .map(|&eps| SolveConfig {
            method: method_with_eps(cfg.method, eps),
            ..cfg.clone()
        })
        .collect();
    let cells = run_cells(&spec, &configs);
    let plot = plot.map(|path| {
        let points: Vec<(f64, f64)> = cells
            .iter()
            .map(|c| (c.record.epsilon, plot_error(&c.record)))
            .collect();
        let series = [svg::Series {
            label: common.method.clone(),
            points,
        }];
        (
            path,
            svg::line_plot(
                &format!("{}: error vs shape parameter", spec.name),
                "epsilon",
                "rms error",
                svg::Scale::Linear,
                svg::Scale::Log10,
                &series,
            ),
        )
    });
    finish_grid(common, &cells, plot)
}

fn cmd_converge(
    common: &CommonOpts,
    n_list: &[usize],
    plot: Option<&str>,
) -> Result<(), BenchError> {
    let Setup { spec, cfg } = resolve(common)?;
    let configs: Vec<SolveConfig> = n_list
        .iter()
        .map(|&n_target| SolveConfig {
            n_target,
            ..cfg.clone()
        })
        .collect();
    let cells = run_cells(&spec, &configs);
    let plot = plot.map(|path| {
        let points: Vec<(f64, f64)> = cells
            .iter()
            .map(|c| (c.record.n as f64, plot_error(&c.record)))
            .collect();
        let series = [svg::Series {
            label: common.method.clone(),
            points,
        }];
        (
            path,
            svg::line_plot(
                &format!("{}: error vs N", spec.name),
                "interior nodes N",
                "rms error",
                svg::Scale::Log10,
                svg::Scale::Log10,
                &series,
            ),
        )
    });
    finish_grid(common, &cells, plot)
}

fn cmd_isolines(
    common: &CommonOpts,
    stencil_list: &[usize],
    epsilons: &[f64],
    plot: Option<&str>,
) -> Result<(), BenchError> {
    let Setup { spec, cfg } = resolve(common)?;
    // verify the node set is generable before paying for the whole grid
    generate_nodes(&spec, cfg.distribution, cfg.n_target, cfg.seed)?;
    let mut configs = Vec::with_capacity(stencil_list.len() * epsilons.len());
    for &stencil_n in stencil_list {
        for &eps in epsilons {
            configs.push(SolveConfig {
                method: method_with_eps(cfg.method, eps),
                stencil_n,
                ..cfg.clone()
            });
        }
    }
    let cells = run_cells(&spec, &configs);
    let plot = plot.map(|path| {
        let values: Vec<Option<f64>> = cells
            .iter()
            .map(|c| {
                let e = plot_error(&c.record);
                (e.is_finite() && e > 0.0).then(|| e.log10())
            })
            .collect();
        let ys: Vec<f64> = stencil_list.iter().map(|&n| n as f64).collect();
        (
            path,
            svg::heatmap(
                &format!("{}: log10 error over stencil size and epsilon", spec.name),
                "epsilon",
                "stencil size n",
                epsilons,
                &ys,
                &values,
            ),
        )
    });
    finish_grid(common, &cells, plot)
}

/// Build a [`Method`] directly; exposed for tests.
#[allow(dead_code)]
fn method_of(label: &str, eps: f64) -> Result<Method, BenchError> {
    parse_method(label, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lim_rbfqr::assembly::Method;
    use lim_rbfqr::rbf_direct::BasisKind;

    fn cheap_common(out: &str) -> CommonOpts {
        CommonOpts {
            problem: "pep5".into(),
            method: "lim-tps".into(),
            dist: "uniform".into(),
            n: 144,
            stencil: 12,
            epsilon: 1.0,
            seed: 0,
            boundary_quad: 12,
            radial_quad: 16,
            angular_quad: 32,
            out: out.into(),
        }
    }

    fn cheap_cells(epsilons: &[f64]) -> Vec<GridCell> {
        let common = cheap_common("-");
        let Setup { spec, cfg } = resolve(&common).unwrap();
        let configs: Vec<SolveConfig> = epsilons
            .iter()
            .map(|&eps| SolveConfig {
                method: method_with_eps(cfg.method, eps),
                ..cfg.clone()
            })
            .collect();
        run_cells(&spec, &configs)
    }

    #[test]
    fn grid_header_extends_result_header() {
        assert_eq!(GRID_CSV_HEADER, format!("{RESULT_CSV_HEADER},reason"));
    }

    fn resolve_err(c: &CommonOpts) -> BenchError {
        match resolve(c) {
            Err(e) => e,
            Ok(_) => panic!("expected a usage error"),
        }
    }

    #[test]
    fn usage_errors_are_exit_two() {
        let mut c = cheap_common("-");
        c.method = "spectral".into();
        assert_eq!(exit_code_for(&resolve_err(&c)), EXIT_USAGE);
        let mut c = cheap_common("-");
        c.problem = "pep6".into();
        assert_eq!(exit_code_for(&resolve_err(&c)), EXIT_USAGE);
        let mut c = cheap_common("-");
        c.dist = "clustered".into();
        assert_eq!(exit_code_for(&resolve_err(&c)), EXIT_USAGE);
        let mut c = cheap_common("-");
        c.n = 0;
        assert!(validate(&c).is_err());
        c = cheap_common("-");
        c.method = "lim-ga".into();
        c.epsilon = 0.0;
        assert!(validate(&c).is_err());
    }

    #[test]
    fn single_cell_sweep_equals_run() {
        let common = cheap_common("-");
        let Setup { spec, cfg } = resolve(&common).unwrap();
        let outcome = solve_problem(&spec, &cfg).unwrap();
        let run_rec = ResultRecord::from_outcome(&spec, &cfg, &cfg.method, &outcome);
        let cells = cheap_cells(&[common.epsilon]);
        assert_eq!(cells.len(), 1);
        assert!(cells[0].reason.is_none());
        assert_eq!(record_csv_row(&cells[0].record), record_csv_row(&run_rec));
    }

    #[test]
    fn grid_csv_round_trip_and_determinism() {
        let cells = cheap_cells(&[1.0, 2.0]);
        let mut buf1 = Vec::new();
        write_grid_csv(&cells, &mut buf1).unwrap();
        let parsed = read_grid_csv(std::io::Cursor::new(buf1.clone())).unwrap();
        assert_eq!(parsed.len(), cells.len());
        for (a, b) in parsed.iter().zip(&cells) {
            assert_eq!(record_csv_row(&a.record), record_csv_row(&b.record));
            assert_eq!(a.reason, b.reason);
        }
        // a second identical run must produce identical bytes
        let cells2 = cheap_cells(&[1.0, 2.0]);
        let mut buf2 = Vec::new();
        write_grid_csv(&cells2, &mut buf2).unwrap();
        assert_eq!(buf1, buf2);
    }

    #[test]
    fn failed_cells_are_flagged_and_do_not_abort() {
        // an impossible stencil size fails assembly for that cell only
        let common = cheap_common("-");
        let Setup { spec, cfg } = resolve(&common).unwrap();
        let configs = vec![
            SolveConfig {
                stencil_n: 5000,
                ..cfg.clone()
            },
            cfg.clone(),
        ];
        let cells = run_cells(&spec, &configs);
        assert!(cells[0].reason.is_some());
        assert!(cells[0].record.rms.is_nan());
        assert!(cells[1].reason.is_none());
        assert!(cells[1].record.rms.is_finite());
        let mut buf = Vec::new();
        write_grid_csv(&cells, &mut buf).unwrap();
        let parsed = read_grid_csv(std::io::Cursor::new(buf)).unwrap();
        assert!(parsed[0].reason.is_some());
    }

    #[test]
    fn isoline_grid_cardinality() {
        let common = cheap_common("-");
        let Setup { spec, cfg } = resolve(&common).unwrap();
        let stencil_list = [9usize, 12];
        let epsilons = [1.0, 2.0, 4.0];
        let mut configs = Vec::new();
        for &stencil_n in &stencil_list {
            for &eps in &epsilons {
                configs.push(SolveConfig {
                    method: method_with_eps(cfg.method, eps),
                    stencil_n,
                    ..cfg.clone()
                });
            }
        }
        let cells = run_cells(&spec, &configs);
        assert_eq!(cells.len(), stencil_list.len() * epsilons.len());
    }

    #[test]
    fn method_parsing_matches_labels() {
        assert!(matches!(
            method_of("lim-rbfqr", 0.5).unwrap(),
            Method::LimRbfQr { .. }
        ));
        assert!(matches!(
            method_of("lrdrm-tps", 0.0).unwrap(),
            Method::Lrdrm(BasisKind::Tps)
        ));
        assert!(method_of("fem", 1.0).is_err());
    }
}
