//! Stencil construction, local-row formation for the three schemes, and
//! global sparse assembly over the interior unknowns.
//!
//! Each interior node gets one stencil (its `n` nearest nodes, drawing
//! boundary nodes only inside a band near the wall) and one circular
//! integration subregion centered at the node. Collocating the disk Green
//! identity on the subregion yields one sparse equation
//! `u_i - sum_j z_ij u_j = f_i + (boundary data terms)` per interior node.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Bc, Domain, NodeSet};
use crate::greenfns::DiskSubregion;
use crate::quadrature::{circle_quadrature_points, disk_quadrature_points};
use crate::rbf_direct::{
    build_interpolation_matrix, build_operator_matrix, condition_number, monomial_jet,
    monomial_particular, particular_solution, rbf_jet, BasisKind, RowKind,
};
use crate::rbfqr::{
    build_rbfqr_basis, evaluate_psi, evaluate_psi_gradient, RbfQrBasis,
};
use crate::solver::{gmres_restarted, Csr, SolveReport, SolverError};
use crate::Point2;

use std::f64::consts::PI;
use std::io::Write;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("stencil {0}: fewer than {1} candidate nodes available")]
    NotEnoughNodes(usize, usize),
    #[error("stencil {stencil}: local factorization failed: {source}")]
    LocalFactorization {
        stencil: usize,
        source: crate::rbf_direct::RbfError,
    },
    #[error("stencil {stencil}: stable basis construction failed: {source}")]
    RbfQrBasisFailure {
        stencil: usize,
        source: crate::rbfqr::RbfQrError,
    },
    #[error("stencil {stencil}: singular local system")]
    LocalSolve { stencil: usize },
    #[error("expected one row per interior node ({expected}), got {got}")]
    RowCount { expected: usize, got: usize },
    #[error("global solve failed: {0}")]
    GlobalSolve(#[from] SolverError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Interpolation neighborhood plus integration subregion of one interior
/// collocation node.
#[derive(Debug, Clone)]
pub struct Stencil {
    /// Index of the collocation node in `nodeset.interior`.
    pub collocation: usize,
    /// Interior member indices (always contains `collocation`).
    pub interior: Vec<usize>,
    /// Boundary member indices; empty away from the wall.
    pub boundary: Vec<usize>,
    pub xi: Point2,
    pub subregion: DiskSubregion,
}

impl Stencil {
    pub fn size(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    /// Stencil member coordinates, interior members first.
    pub fn member_points(&self, ns: &NodeSet) -> Vec<Point2> {
        let mut pts = Vec::with_capacity(self.size());
        pts.extend(self.interior.iter().map(|&i| ns.interior[i]));
        pts.extend(self.boundary.iter().map(|&b| ns.boundary[b].position));
        pts
    }
}

/// Default subregion radius factor.
pub const DEFAULT_KAPPA: f64 = 1.0;

/// Fraction of the wall distance the subregion radius may not exceed, so the
/// integration circle stays strictly inside the domain.
pub const WALL_RADIUS_FRACTION: f64 = 0.95;

/// Integration subregion: centered at the collocation point with radius
/// `kappa * min(nearest-neighbor distance, distance to the wall)`.
pub fn choose_subregion(
    xi: Point2,
    nodeset: &NodeSet,
    domain: &Domain,
    kappa: f64,
) -> DiskSubregion {
    let mut nn = f64::INFINITY;
    for p in &nodeset.interior {
        let d = (xi - p).norm();
        if d > 0.0 {
            nn = nn.min(d);
        }
    }
    for b in &nodeset.boundary {
        let d = (xi - b.position).norm();
        if d > 0.0 {
            nn = nn.min(d);
        }
    }
    let wall = domain.boundary_distance(xi);
    DiskSubregion::new(xi, (kappa * nn).min(WALL_RADIUS_FRACTION * wall))
}

/// Build one stencil per interior node: the `n` nearest nodes, drawn from
/// interior and boundary nodes when the collocation point lies within
/// `band_width` of the wall, interior nodes only otherwise. Ties are broken
/// by index (interior before boundary).
pub fn build_stencils(
    nodeset: &NodeSet,
    domain: &Domain,
    n: usize,
    band_width: f64,
    kappa: f64,
) -> Result<Vec<Stencil>, AssemblyError> {
    let ni = nodeset.interior.len();
    (0..ni)
        .into_par_iter()
        .map(|i| {
            let xi = nodeset.interior[i];
            let near_wall = domain.boundary_distance(xi) <= band_width;
            // (squared distance, group, index); group 0 = interior
            let mut cand: Vec<(f64, u8, usize)> = Vec::with_capacity(
                ni + if near_wall { nodeset.boundary.len() } else { 0 },
            );
            for (j, p) in nodeset.interior.iter().enumerate() {
                cand.push(((xi - p).norm_squared(), 0, j));
            }
            if near_wall {
                for (b, node) in nodeset.boundary.iter().enumerate() {
                    cand.push(((xi - node.position).norm_squared(), 1, b));
                }
            }
            if cand.len() < n {
                return Err(AssemblyError::NotEnoughNodes(i, n));
            }
            cand.sort_by(|a, b| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
            });
            let mut interior = Vec::new();
            let mut boundary = Vec::new();
            for &(_, group, idx) in cand.iter().take(n) {
                if group == 0 {
                    interior.push(idx);
                } else {
                    boundary.push(idx);
                }
            }
            interior.sort_unstable();
            boundary.sort_unstable();
            Ok(Stencil {
                collocation: i,
                interior,
                boundary,
                xi,
                subregion: choose_subregion(xi, nodeset, domain, kappa),
            })
        })
        .collect()
}

/// PDE data as seen by row construction: `laplacian u = f + btilde(u)`, with
/// `btilde(u) = cu u + cx u_x + cy u_y` given pointwise by `btilde`.
pub struct PdeOperator<'a> {
    pub f: &'a (dyn Fn(Point2) -> f64 + Sync),
    pub btilde: Option<&'a (dyn Fn(Point2) -> (f64, f64, f64) + Sync)>,
}

/// Row construction scheme.
#[derive(Debug, Clone, Copy)]
pub enum Method {
    /// Dual reciprocity: volume terms via particular solutions.
    Lrdrm(BasisKind),
    /// Direct Green-function-weighted volume quadrature.
    Lim(BasisKind),
    /// Direct quadrature with the QR-stabilized Gaussian basis.
    LimRbfQr { eps: f64 },
}

/// Quadrature resolution for the subregion integrals.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub boundary_order: usize,
    pub radial_order: usize,
    pub angular_order: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            boundary_order: 12,
            radial_order: 32,
            angular_order: 64,
        }
    }
}

/// One collocated equation: `u_i = rhs + sum_k coeffs[k] * u[columns[k]]`.
#[derive(Debug, Clone)]
pub struct LocalRow {
    /// Global interior indices coupled by this row.
    pub columns: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// Conditioning diagnostics of one stencil.
#[derive(Debug, Clone, Copy)]
pub struct StencilDiagnostics {
    pub stencil_id: usize,
    pub cond_a: f64,
    pub cond_b: f64,
    pub radius: f64,
    pub n_i: usize,
    pub n_b: usize,
}

/// Write the per-stencil diagnostics CSV.
pub fn write_diagnostics_csv<W: Write>(
    diags: &[StencilDiagnostics],
    mut w: W,
) -> Result<(), AssemblyError> {
    writeln!(w, "stencil_id,cond_A,cond_B,radius,n_i,n_b")?;
    for d in diags {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{},{}",
            d.stencil_id, d.cond_a, d.cond_b, d.radius, d.n_i, d.n_b
        )?;
    }
    Ok(())
}

fn collocation_rows(stencil: &Stencil, ns: &NodeSet) -> Vec<RowKind> {
    let mut rows = vec![RowKind::Value; stencil.interior.len()];
    for &b in &stencil.boundary {
        let node = &ns.boundary[b];
        rows.push(match node.bc {
            Bc::Dirichlet => RowKind::Value,
            Bc::Neumann => RowKind::NormalDerivative(node.normal),
        });
    }
    rows
}

/// Boundary data entries of `d`, in stencil member order after the interior
/// block.
fn boundary_data(stencil: &Stencil, ns: &NodeSet) -> Vec<f64> {
    stencil.boundary.iter().map(|&b| ns.boundary[b].value).collect()
}

/// Finalize a row from the solved influence vector `z` (length >= stencil
/// size; any augmentation tail multiplies zero data and is ignored).
fn finalize_row(
    stencil: &Stencil,
    z: &DVector<f64>,
    f_i: f64,
    g_b: &[f64],
) -> LocalRow {
    let n_i = stencil.interior.len();
    let mut rhs = f_i;
    for (k, &g) in g_b.iter().enumerate() {
        rhs += z[n_i + k] * g;
    }
    LocalRow {
        columns: stencil.interior.clone(),
        coeffs: (0..n_i).map(|k| z[k]).collect(),
        rhs,
    }
}

/// LRDRM row: volume terms carried to the subregion boundary through the
/// particular solutions of the interpolation basis.
pub fn local_row_lrdrm(
    stencil: &Stencil,
    ns: &NodeSet,
    kind: BasisKind,
    op: &PdeOperator,
    quad: &QuadConfig,
) -> Result<(LocalRow, StencilDiagnostics), AssemblyError> {
    if matches!(kind, BasisKind::Mq2 { .. }) {
        return Err(AssemblyError::LocalFactorization {
            stencil: stencil.collocation,
            source: crate::rbf_direct::RbfError::UnsupportedParticular,
        });
    }
    let nodes = stencil.member_points(ns);
    let rows = collocation_rows(stencil, ns);
    let li = build_interpolation_matrix(kind, &nodes, &rows).map_err(|source| {
        AssemblyError::LocalFactorization {
            stencil: stencil.collocation,
            source,
        }
    })?;
    let n = nodes.len();
    let p = kind.poly_count();
    let size = n + p;
    let sub = &stencil.subregion;
    let q_const = 1.0 / (2.0 * PI * sub.radius);
    let circle = circle_quadrature_points(sub.center, sub.radius, quad.boundary_order);

    // h_j = integral of Q phi_j over the subregion circle (Q is constant for
    // the centered source); htilde_j = phi~_j(xi) - integral of Q phi~_j
    let mut h = DVector::zeros(size);
    let mut htilde = DVector::zeros(size);
    for j in 0..size {
        let phi = |x: Point2| -> f64 {
            if j < n {
                rbf_jet(kind, x, nodes[j]).value
            } else {
                monomial_jet(j - n, x - li.poly_origin).value
            }
        };
        let phit = |x: Point2| -> f64 {
            if j < n {
                particular_solution(kind, x, nodes[j]).expect("kind supports LRDRM")
            } else {
                monomial_particular(j - n, x - li.poly_origin)
            }
        };
        let mut hj = 0.0;
        let mut htj = 0.0;
        for (pt, _, w) in &circle {
            hj += w * q_const * phi(*pt);
            htj += w * q_const * phit(*pt);
        }
        h[j] = hj;
        htilde[j] = phit(stencil.xi) - htj;
    }

    let f_vec = DVector::from_iterator(
        size,
        (0..size).map(|k| if k < n { (op.f)(nodes[k]) } else { 0.0 }),
    );
    steps_and_finalize(
        stencil, ns, &li.a, &li.a_tilde, &h, &htilde, op, &nodes,
        KnownTerm::Interpolated(&f_vec),
        |coeffs| build_operator_matrix(&li, coeffs),
        li.cond_estimate,
        f64::NAN,
    )
}

/// LIM row: volume terms integrated directly against the Green's function.
pub fn local_row_lim(
    stencil: &Stencil,
    ns: &NodeSet,
    kind: BasisKind,
    op: &PdeOperator,
    quad: &QuadConfig,
) -> Result<(LocalRow, StencilDiagnostics), AssemblyError> {
    let nodes = stencil.member_points(ns);
    let rows = collocation_rows(stencil, ns);
    let li = build_interpolation_matrix(kind, &nodes, &rows).map_err(|source| {
        AssemblyError::LocalFactorization {
            stencil: stencil.collocation,
            source,
        }
    })?;
    let n = nodes.len();
    let size = n + kind.poly_count();
    let sub = &stencil.subregion;
    let q_const = 1.0 / (2.0 * PI * sub.radius);
    let circle = circle_quadrature_points(sub.center, sub.radius, quad.boundary_order);
    let disk = disk_quadrature_points(sub.center, sub.radius, quad.radial_order, quad.angular_order);
    let green = |x: Point2| ((x - sub.center).norm() / sub.radius).ln() / (2.0 * PI);

    let mut h = DVector::zeros(size);
    let mut gtilde = DVector::zeros(size);
    let mut f_i = 0.0;
    for (pt, w) in &disk {
        f_i += w * green(*pt) * (op.f)(*pt);
    }
    for j in 0..size {
        let phi = |x: Point2| -> f64 {
            if j < n {
                rbf_jet(kind, x, nodes[j]).value
            } else {
                monomial_jet(j - n, x - li.poly_origin).value
            }
        };
        h[j] = circle.iter().map(|(pt, _, w)| w * q_const * phi(*pt)).sum();
        gtilde[j] = disk.iter().map(|(pt, w)| w * green(*pt) * phi(*pt)).sum();
    }

    steps_and_finalize(
        stencil, ns, &li.a, &li.a_tilde, &h, &gtilde, op, &nodes,
        KnownTerm::Direct(f_i),
        |coeffs| build_operator_matrix(&li, coeffs),
        li.cond_estimate,
        f64::NAN,
    )
}

/// LIM row in the QR-stabilized Gaussian basis.
pub fn local_row_lim_rbfqr(
    stencil: &Stencil,
    ns: &NodeSet,
    eps: f64,
    op: &PdeOperator,
    quad: &QuadConfig,
) -> Result<(LocalRow, StencilDiagnostics), AssemblyError> {
    let nodes = stencil.member_points(ns);
    let basis = build_rbfqr_basis(&nodes, eps).map_err(|source| {
        AssemblyError::RbfQrBasisFailure {
            stencil: stencil.collocation,
            source,
        }
    })?;
    let n = nodes.len();
    let n_i = stencil.interior.len();

    // collocation matrix with normal-derivative rows at Neumann members
    let values = evaluate_psi(&basis, &nodes);
    let mut b = values.clone();
    let needs_grad: Vec<(usize, Point2)> = stencil
        .boundary
        .iter()
        .enumerate()
        .filter_map(|(k, &bi)| {
            let node = &ns.boundary[bi];
            matches!(node.bc, Bc::Neumann).then_some((n_i + k, node.normal))
        })
        .collect();
    if !needs_grad.is_empty() {
        let pts: Vec<Point2> = needs_grad.iter().map(|&(row, _)| nodes[row]).collect();
        let (gx, gy) = evaluate_psi_gradient(&basis, &pts);
        for (q, &(row, normal)) in needs_grad.iter().enumerate() {
            for k in 0..n {
                b[(row, k)] = normal.x * gx[(q, k)] + normal.y * gy[(q, k)];
            }
        }
    }

    let sub = &stencil.subregion;
    let q_const = 1.0 / (2.0 * PI * sub.radius);
    let circle = circle_quadrature_points(sub.center, sub.radius, quad.boundary_order);
    let disk = disk_quadrature_points(sub.center, sub.radius, quad.radial_order, quad.angular_order);
    let green = |x: Point2| ((x - sub.center).norm() / sub.radius).ln() / (2.0 * PI);

    // batched quadrature evaluations of the whole basis
    let circle_pts: Vec<Point2> = circle.iter().map(|c| c.0).collect();
    let disk_pts: Vec<Point2> = disk.iter().map(|d| d.0).collect();
    let psi_circle = evaluate_psi(&basis, &circle_pts);
    let psi_disk = evaluate_psi(&basis, &disk_pts);
    let mut h = DVector::zeros(n);
    let mut gtilde = DVector::zeros(n);
    for k in 0..n {
        h[k] = circle
            .iter()
            .enumerate()
            .map(|(q, (_, _, w))| w * q_const * psi_circle[(q, k)])
            .sum();
        gtilde[k] = disk
            .iter()
            .enumerate()
            .map(|(q, (pt, w))| w * green(*pt) * psi_disk[(q, k)])
            .sum();
    }
    let f_i = disk.iter().map(|(pt, w)| w * green(*pt) * (op.f)(*pt)).sum();

    let build_bb = |coeffs: &dyn Fn(Point2) -> (f64, f64, f64)| {
        let (gx, gy) = evaluate_psi_gradient(&basis, &nodes);
        let mut bb = DMatrix::zeros(n, n);
        for k in 0..n {
            let (cu, cx, cy) = coeffs(nodes[k]);
            for j in 0..n {
                bb[(k, j)] = cu * values[(k, j)] + cx * gx[(k, j)] + cy * gy[(k, j)];
            }
        }
        bb
    };

    let cond_b = condition_number(&b);
    let cond_a = direct_gaussian_condition(&basis, &nodes);
    steps_and_finalize(
        stencil, ns, &b, &values, &h, &gtilde, op, &nodes,
        KnownTerm::Direct(f_i),
        build_bb,
        cond_a,
        cond_b,
    )
}

/// Condition estimate of the direct Gaussian matrix on the same stencil, for
/// diagnostics comparisons.
fn direct_gaussian_condition(basis: &RbfQrBasis, nodes: &[Point2]) -> f64 {
    let eps = basis.eps;
    let n = nodes.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        rbf_jet(BasisKind::Ga { eps }, nodes[i], nodes[j]).value
    });
    condition_number(&a)
}

enum KnownTerm<'a> {
    /// LRDRM: `f_i = wtilde . f_vec` with `f_vec` the nodal source values.
    Interpolated(&'a DVector<f64>),
    /// LIM: `f_i` integrated directly.
    Direct(f64),
}

/// Steps 1-3 shared by the three schemes, with transpose solves so that
/// nonsymmetric collocation matrices are handled uniformly:
/// 1. solve `A~^T wtilde = htilde`,
/// 2. `w = h + A_b^T wtilde`,
/// 3. solve `A^T z = w`, then fold boundary data into the right-hand side.
#[allow(clippy::too_many_arguments)]
fn steps_and_finalize<'a, F>(
    stencil: &Stencil,
    ns: &NodeSet,
    a: &DMatrix<f64>,
    a_tilde: &DMatrix<f64>,
    h: &DVector<f64>,
    htilde: &DVector<f64>,
    op: &PdeOperator,
    nodes: &[Point2],
    known: KnownTerm<'a>,
    build_operator: F,
    cond_a: f64,
    cond_b: f64,
) -> Result<(LocalRow, StencilDiagnostics), AssemblyError>
where
    F: FnOnce(&dyn Fn(Point2) -> (f64, f64, f64)) -> DMatrix<f64>,
{
    let _ = nodes;
    let id = stencil.collocation;
    let wtilde = a_tilde
        .transpose()
        .lu()
        .solve(htilde)
        .ok_or(AssemblyError::LocalSolve { stencil: id })?;
    let w = match op.btilde {
        Some(coeffs) => {
            let ab = build_operator(&coeffs);
            h + ab.transpose() * &wtilde
        }
        None => h.clone(),
    };
    let z = a
        .transpose()
        .lu()
        .solve(&w)
        .ok_or(AssemblyError::LocalSolve { stencil: id })?;
    let f_i = match known {
        KnownTerm::Interpolated(f_vec) => wtilde.dot(f_vec),
        KnownTerm::Direct(v) => v,
    };
    let g_b = boundary_data(stencil, ns);
    let row = finalize_row(stencil, &z, f_i, &g_b);
    if !row.coeffs.iter().all(|c| c.is_finite()) || !row.rhs.is_finite() {
        return Err(AssemblyError::LocalSolve { stencil: id });
    }
    let diag = StencilDiagnostics {
        stencil_id: id,
        cond_a,
        cond_b,
        radius: stencil.subregion.radius,
        n_i: stencil.interior.len(),
        n_b: stencil.boundary.len(),
    };
    Ok((row, diag))
}

/// One row for every stencil, in parallel.
pub fn build_rows(
    stencils: &[Stencil],
    ns: &NodeSet,
    method: Method,
    op: &PdeOperator,
    quad: &QuadConfig,
) -> Result<(Vec<LocalRow>, Vec<StencilDiagnostics>), AssemblyError> {
    let results: Result<Vec<_>, _> = stencils
        .par_iter()
        .map(|st| match method {
            Method::Lrdrm(kind) => local_row_lrdrm(st, ns, kind, op, quad),
            Method::Lim(kind) => local_row_lim(st, ns, kind, op, quad),
            Method::LimRbfQr { eps } => local_row_lim_rbfqr(st, ns, eps, op, quad),
        })
        .collect();
    Ok(results?.into_iter().unzip())
}

/// Global sparse system over interior unknowns.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub matrix: Csr,
    pub rhs: DVector<f64>,
}

/// Assemble `u_i - sum_j z_ij u_j = rhs_i`, one row per interior node.
pub fn assemble_global(rows: &[LocalRow], n_interior: usize) -> Result<GlobalSystem, AssemblyError> {
    if rows.len() != n_interior {
        return Err(AssemblyError::RowCount {
            expected: n_interior,
            got: rows.len(),
        });
    }
    let mut triplets = Vec::new();
    let mut rhs = DVector::zeros(n_interior);
    for (i, row) in rows.iter().enumerate() {
        triplets.push((i, i, 1.0));
        for (&col, &c) in row.columns.iter().zip(&row.coeffs) {
            triplets.push((i, col, -c));
        }
        rhs[i] = row.rhs;
    }
    Ok(GlobalSystem {
        matrix: Csr::from_triplets(n_interior, &triplets),
        rhs,
    })
}

/// Solve the assembled system with the default restarted GMRES settings.
pub fn solve_global(system: &GlobalSystem) -> Result<(DVector<f64>, SolveReport), AssemblyError> {
    // Convection-dominated systems can plateau with a short restart cycle;
    // retry once with a much larger Krylov space before giving up.
    let attempt = |restart: usize| {
        gmres_restarted(
            &system.matrix,
            &system.rhs,
            restart,
            crate::solver::GMRES_DEFAULT_TOL,
            crate::solver::GMRES_DEFAULT_MAX_OUTER,
        )
    };
    let (x, rep) = match attempt(crate::solver::GMRES_DEFAULT_RESTART) {
        Ok(out) => out,
        Err(SolverError::Stagnated { .. }) | Err(SolverError::MaxOuterExceeded { .. }) => {
            attempt(crate::solver::GMRES_FALLBACK_RESTART)?
        }
        Err(e) => return Err(e.into()),
    };
    Ok((x, rep))
}
