//! Stable evaluation of the Gaussian RBF interpolation space for small shape
//! parameters.
//!
//! The Gaussian translates are expanded in Chebyshev-Fourier expansion
//! functions whose scale factors carry all powers of the shape parameter.
//! QR-factorizing the O(1) coefficient matrix and moving the scale-factor
//! ratios analytically into the correction matrix `R~` yields a new basis for
//! the same space whose collocation matrix stays well conditioned as
//! `eps -> 0`.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::Point2;

#[derive(Debug, Error)]
pub enum RbfQrError {
    #[error("hypergeometric series did not converge (last term {0:.3e})")]
    SeriesDiverged(f64),
    #[error("rank-deficient coefficient matrix (pivot {pivot:.3e} at column {col}); coincident nodes?")]
    RankDeficient { col: usize, pivot: f64 },
    #[error("gradient requested at the polar origin")]
    GradientAtOrigin,
    #[error("empty node set")]
    NoNodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

/// One expansion function index: degree `k`, secondary index `l`, trig kind.
/// The parity `p = k mod 2` is implied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionIndex {
    pub k: u32,
    pub l: u32,
    pub trig: Trig,
}

impl ExpansionIndex {
    pub fn p(&self) -> u32 {
        self.k % 2
    }

    /// Angular frequency `2l + p`.
    pub fn freq(&self) -> u32 {
        2 * self.l + self.p()
    }
}

/// Ordered index list through degree `k_max`: for each degree the cosine
/// entry precedes the sine entry of the same `(k, l)`, sine entries exist
/// only for nonzero angular frequency. Degree `k` contributes `k + 1`
/// entries.
pub fn expansion_indices(k_max: u32) -> Vec<ExpansionIndex> {
    let mut out = Vec::new();
    for k in 0..=k_max {
        for l in 0..=k / 2 {
            let idx = ExpansionIndex { k, l, trig: Trig::Cos };
            out.push(idx);
            if idx.freq() != 0 {
                out.push(ExpansionIndex { k, l, trig: Trig::Sin });
            }
        }
    }
    out
}

const MAX_FACT: usize = 64;

fn ln_factorial(n: usize) -> f64 {
    debug_assert!(n <= MAX_FACT);
    let mut s = 0.0;
    for i in 2..=n {
        s += (i as f64).ln();
    }
    s
}

/// `ln` of the scale factor with the `eps^{2k}` power removed:
/// `d_{k,l} = eps^{2k} * 2^{2l+1-k} / (((k+2l+p)/2)! ((k-2l-p)/2)!)`.
pub fn log_scale_factor_no_eps(idx: ExpansionIndex) -> f64 {
    let (k, l, p) = (idx.k as usize, idx.l as usize, idx.p() as usize);
    (2.0 * l as f64 + 1.0 - k as f64) * LN_2
        - ln_factorial((k + 2 * l + p) / 2)
        - ln_factorial((k - 2 * l - p) / 2)
}

/// Scale factor `d_{k,l}`.
pub fn scale_factor(idx: ExpansionIndex, eps: f64) -> f64 {
    (2.0 * idx.k as f64 * eps.ln() + log_scale_factor_no_eps(idx)).exp()
}

/// Generalized hypergeometric series `1F2(a; b1, b2; z)` by direct summation.
pub fn hypergeometric_1f2(a: f64, b1: f64, b2: f64, z: f64) -> Result<f64, RbfQrError> {
    let mut term = 1.0;
    let mut sum = 1.0;
    if z == 0.0 {
        return Ok(1.0);
    }
    for t in 0..200 {
        let t = t as f64;
        term *= (a + t) * z / ((b1 + t) * (b2 + t) * (t + 1.0));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(RbfQrError::SeriesDiverged(term))
}

/// Expansion coefficient `c_{k,l}(x_j)` (or `s_{k,l}` for the sine kind) at a
/// node with scaled polar coordinates `(r, theta)`.
pub fn expansion_coefficient(
    idx: ExpansionIndex,
    r: f64,
    theta: f64,
    eps: f64,
) -> Result<f64, RbfQrError> {
    let (k, l, p) = (idx.k as f64, idx.l as f64, idx.p() as f64);
    let b = if idx.freq() == 0 { 1.0 } else { 2.0 };
    let t = if idx.k == 2 * idx.l { 0.5 } else { 1.0 };
    let alpha = (k - 2.0 * l + p + 1.0) / 2.0;
    let beta1 = k - 2.0 * l + 1.0;
    let beta2 = (k + 2.0 * l + p + 2.0) / 2.0;
    let hyp = hypergeometric_1f2(alpha, beta1, beta2, eps.powi(4) * r * r)?;
    let ang = idx.freq() as f64 * theta;
    let trig = match idx.trig {
        Trig::Cos => ang.cos(),
        Trig::Sin => ang.sin(),
    };
    Ok(b * t * (-eps * eps * r * r).exp() * r.powi((idx.k) as i32) * trig * hyp)
}

/// Chebyshev polynomial of the first kind with derivative, by recurrence.
pub fn chebyshev_t_with_deriv(m: u32, x: f64) -> (f64, f64) {
    // T by three-term recurrence; T' = m U_{m-1}
    if m == 0 {
        return (1.0, 0.0);
    }
    let (mut t0, mut t1) = (1.0, x);
    let (mut u0, mut u1) = (1.0, 2.0 * x);
    for _ in 2..=m {
        let t2 = 2.0 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
        let u2 = 2.0 * x * u1 - u0;
        u0 = u1;
        u1 = u2;
    }
    (t1, m as f64 * u0)
}

/// Value and gradient of the expansion function
/// `e^{-eps^2 r^2} r^{2l} T_{k-2l}(r) trig((2l+p) theta)` at a point `x` in
/// scaled local coordinates. The gradient is with respect to `x`.
pub fn expansion_function_jet(
    idx: ExpansionIndex,
    x: Point2,
    eps: f64,
) -> (f64, Option<Point2>) {
    let r = x.norm();
    let (k, l) = (idx.k, idx.l);
    let m = k - 2 * l;
    let freq = idx.freq();
    if r == 0.0 {
        // value survives only for l = 0, even k (T_k(0), frequency 0);
        // gradient only for l = 0, odd k where the limit is T'_k(0) along the
        // respective axis
        let value = if l == 0 && freq == 0 {
            let (t, _) = chebyshev_t_with_deriv(m, 0.0);
            t
        } else {
            0.0
        };
        let grad = if l == 0 && k % 2 == 1 {
            let (_, dt) = chebyshev_t_with_deriv(m, 0.0);
            Some(match idx.trig {
                Trig::Cos => Point2::new(dt, 0.0),
                Trig::Sin => Point2::new(0.0, dt),
            })
        } else if freq <= 1 {
            Some(Point2::zeros())
        } else {
            // higher frequencies vanish to second order; gradient is zero
            Some(Point2::zeros())
        };
        return (value, grad);
    }
    let theta = x.y.atan2(x.x);
    let (t, dt) = chebyshev_t_with_deriv(m, r);
    let e = (-eps * eps * r * r).exp();
    let rl = r.powi(2 * l as i32);
    let ang = freq as f64 * theta;
    let (trig, dtrig) = match idx.trig {
        Trig::Cos => (ang.cos(), -(freq as f64) * ang.sin()),
        Trig::Sin => (ang.sin(), freq as f64 * ang.cos()),
    };
    let radial = e * rl * t;
    let value = radial * trig;
    // d/dr of the radial part
    let dradial = e * (rl * dt + (2.0 * l as f64 / r) * rl * t - 2.0 * eps * eps * r * rl * t);
    let (c, s) = (theta.cos(), theta.sin());
    let fr = dradial * trig;
    let ft = radial * dtrig;
    let grad = Point2::new(fr * c - ft * s / r, fr * s + ft * c / r);
    (value, Some(grad))
}

/// QR-stabilized Gaussian basis on one stencil.
#[derive(Debug, Clone)]
pub struct RbfQrBasis {
    /// Shape parameter in the original coordinates.
    pub eps: f64,
    /// Shape parameter after mapping the stencil into the unit disk.
    pub eps_scaled: f64,
    /// Stencil centroid (polar origin).
    pub origin: Point2,
    /// Radius of the polar mapping; local coordinates are `(x-origin)/scale`.
    pub scale: f64,
    pub nodes: Vec<Point2>,
    pub indices: Vec<ExpansionIndex>,
    /// Correction matrix, `n x (m - n)`.
    pub r_tilde: DMatrix<f64>,
}

/// Truncation degree: smallest degree covering `n` columns, extended while
/// the discarded columns' scale-factor ratio to the retained ones is still
/// above `10 * machine epsilon` (capped at degree 40).
fn truncation_degree(n: usize, eps_scaled: f64) -> u32 {
    let mut k0 = 0u32;
    while ((k0 + 1) * (k0 + 2) / 2) < n as u32 {
        k0 += 1;
    }
    let indices = expansion_indices(k0);
    let log_d = |idx: ExpansionIndex| {
        2.0 * idx.k as f64 * eps_scaled.ln() + log_scale_factor_no_eps(idx)
    };
    let min_retained = indices[..n]
        .iter()
        .map(|&i| log_d(i))
        .fold(f64::INFINITY, f64::min);
    let threshold = min_retained + (10.0 * f64::EPSILON).ln();
    let mut k_max = k0;
    for k in k0 + 1..=40 {
        // most significant scale factor of the new degree
        let best = (0..=k / 2)
            .map(|l| log_d(ExpansionIndex { k, l, trig: Trig::Cos }))
            .fold(f64::NEG_INFINITY, f64::max);
        if best > threshold {
            k_max = k;
        } else {
            break;
        }
    }
    k_max
}

/// Build the stabilized basis for the given stencil nodes.
pub fn build_rbfqr_basis(nodes: &[Point2], eps: f64) -> Result<RbfQrBasis, RbfQrError> {
    build_rbfqr_basis_with_degree(nodes, eps, None)
}

/// As [`build_rbfqr_basis`] with an explicit truncation degree (used by the
/// truncation-insensitivity checks).
pub fn build_rbfqr_basis_with_degree(
    nodes: &[Point2],
    eps: f64,
    k_max_override: Option<u32>,
) -> Result<RbfQrBasis, RbfQrError> {
    let n = nodes.len();
    if n == 0 {
        return Err(RbfQrError::NoNodes);
    }
    let origin = nodes.iter().sum::<Point2>() / n as f64;
    let mut scale = nodes
        .iter()
        .map(|p| (p - origin).norm())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        scale = 1.0;
    }
    let eps_scaled = eps * scale;
    let k_max = k_max_override.unwrap_or_else(|| truncation_degree(n, eps_scaled));
    let indices = expansion_indices(k_max);
    let m = indices.len();

    // coefficient matrix in scaled polar coordinates; O(1) entries
    let mut c = DMatrix::zeros(n, m);
    for (j, p) in nodes.iter().enumerate() {
        let local = (p - origin) / scale;
        let r = local.norm();
        let theta = local.y.atan2(local.x);
        for (i, &idx) in indices.iter().enumerate() {
            c[(j, i)] = expansion_coefficient(idx, r, theta, eps_scaled)?;
        }
    }

    // Householder QR with degree-blocked column pivoting: always pick the
    // lowest-degree column whose residual is numerically independent of the
    // columns already selected, breaking ties by largest residual norm. On
    // symmetric node sets (uniform grids) individual low-degree columns can
    // vanish identically at the nodes; pivoting promotes a higher-degree
    // column in their place instead of failing.
    let tol = 1e-12
        * (0..m)
            .map(|col| c.column(col).norm())
            .fold(0.0f64, f64::max)
            .max(1e-300);
    let mut w = c;
    let mut perm: Vec<usize> = (0..m).collect();
    for j in 0..n {
        let mut best: Option<(u32, f64, usize)> = None;
        for col in j..m {
            let nrm = w.view((j, col), (n - j, 1)).norm();
            if nrm < tol {
                continue;
            }
            let k = indices[perm[col]].k;
            let better = match best {
                None => true,
                Some((bk, bn, _)) => k < bk || (k == bk && nrm > bn),
            };
            if better {
                best = Some((k, nrm, col));
            }
        }
        let (_, _, col) = best.ok_or(RbfQrError::RankDeficient { col: j, pivot: 0.0 })?;
        if col != j {
            w.swap_columns(j, col);
            perm.swap(j, col);
        }
        let mut v = w.view((j, j), (n - j, 1)).into_owned();
        let alpha = -v[0].signum() * v.norm();
        v[0] -= alpha;
        let vn2 = v.norm_squared();
        if vn2 > 0.0 {
            for col2 in j..m {
                let mut dot = 0.0;
                for t in 0..n - j {
                    dot += v[t] * w[(j + t, col2)];
                }
                let s = 2.0 * dot / vn2;
                for t in 0..n - j {
                    w[(j + t, col2)] -= s * v[t];
                }
            }
        }
        w[(j, j)] = alpha;
        for t in j + 1..n {
            w[(t, j)] = 0.0;
        }
    }
    let indices: Vec<ExpansionIndex> = perm.iter().map(|&p| indices[p]).collect();
    let r1 = w.view((0, 0), (n, n)).into_owned();
    let r2 = w.view((0, n), (n, m - n)).into_owned();
    let x = r1
        .solve_upper_triangular(&r2)
        .ok_or(RbfQrError::RankDeficient { col: 0, pivot: 0.0 })?;

    // analytic eps-power and factorial scaling, in log space so extreme
    // ratios underflow cleanly to zero instead of overflowing
    let ln_eps = eps_scaled.ln();
    let mut r_tilde = DMatrix::zeros(n, m - n);
    for i in 0..n {
        let li = 2.0 * indices[i].k as f64 * ln_eps + log_scale_factor_no_eps(indices[i]);
        for j in 0..m - n {
            let idx_j = indices[n + j];
            let lj = 2.0 * idx_j.k as f64 * ln_eps + log_scale_factor_no_eps(idx_j);
            r_tilde[(i, j)] = x[(i, j)] * (lj - li).exp();
        }
    }

    Ok(RbfQrBasis {
        eps,
        eps_scaled,
        origin,
        scale,
        nodes: nodes.to_vec(),
        indices,
        r_tilde,
    })
}

impl RbfQrBasis {
    fn local(&self, x: Point2) -> Point2 {
        (x - self.origin) / self.scale
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Row of psi values at one point.
    fn psi_row(&self, x: Point2, out: &mut [f64]) {
        let n = self.n();
        let local = self.local(x);
        let mut v = vec![0.0; self.indices.len()];
        for (i, &idx) in self.indices.iter().enumerate() {
            v[i] = expansion_function_jet(idx, local, self.eps_scaled).0;
        }
        for k in 0..n {
            let mut s = v[k];
            for j in 0..self.indices.len() - n {
                s += self.r_tilde[(k, j)] * v[n + j];
            }
            out[k] = s;
        }
    }

    /// Row of normal derivatives of psi at one point.
    fn psi_normal_row(&self, x: Point2, normal: Point2, out: &mut [f64]) -> Result<(), RbfQrError> {
        let n = self.n();
        let local = self.local(x);
        if local.norm() == 0.0 {
            return Err(RbfQrError::GradientAtOrigin);
        }
        let mut w = vec![0.0; self.indices.len()];
        for (i, &idx) in self.indices.iter().enumerate() {
            let (_, grad) = expansion_function_jet(idx, local, self.eps_scaled);
            // chain factor from the unit-disk mapping
            w[i] = grad.expect("nonzero radius").dot(&normal) / self.scale;
        }
        for k in 0..n {
            let mut s = w[k];
            for j in 0..self.indices.len() - n {
                s += self.r_tilde[(k, j)] * w[n + j];
            }
            out[k] = s;
        }
        Ok(())
    }
}

/// Cartesian gradient rows of the psi basis at the given points. Unlike the
/// boundary-operator path this accepts the polar origin, where the gradient
/// limit is well defined (the expansion functions are smooth in Cartesian
/// coordinates).
pub fn evaluate_psi_gradient(
    basis: &RbfQrBasis,
    points: &[Point2],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = basis.n();
    let m = basis.indices.len();
    let mut gx = DMatrix::zeros(points.len(), n);
    let mut gy = DMatrix::zeros(points.len(), n);
    for (p, x) in points.iter().enumerate() {
        let local = basis.local(*x);
        let mut wx = vec![0.0; m];
        let mut wy = vec![0.0; m];
        for (i, &idx) in basis.indices.iter().enumerate() {
            let (_, grad) = expansion_function_jet(idx, local, basis.eps_scaled);
            let g = grad.expect("gradient defined everywhere") / basis.scale;
            wx[i] = g.x;
            wy[i] = g.y;
        }
        for k in 0..n {
            let (mut sx, mut sy) = (wx[k], wy[k]);
            for j in 0..m - n {
                sx += basis.r_tilde[(k, j)] * wx[n + j];
                sy += basis.r_tilde[(k, j)] * wy[n + j];
            }
            gx[(p, k)] = sx;
            gy[(p, k)] = sy;
        }
    }
    (gx, gy)
}

/// Collocation matrix: rows are evaluation points, columns the psi basis.
pub fn evaluate_psi(basis: &RbfQrBasis, points: &[Point2]) -> DMatrix<f64> {
    let n = basis.n();
    let mut b = DMatrix::zeros(points.len(), n);
    let mut row = vec![0.0; n];
    for (p, x) in points.iter().enumerate() {
        basis.psi_row(*x, &mut row);
        for k in 0..n {
            b[(p, k)] = row[k];
        }
    }
    b
}

/// Boundary operator to apply to the psi basis.
#[derive(Debug, Clone, Copy)]
pub enum BoundaryOp {
    Value,
    NormalDerivative,
}

/// Rows of the boundary operator applied to the basis at the given points.
pub fn apply_boundary_operator_psi(
    basis: &RbfQrBasis,
    points: &[(Point2, Point2)],
    op: BoundaryOp,
) -> Result<DMatrix<f64>, RbfQrError> {
    let n = basis.n();
    let mut b = DMatrix::zeros(points.len(), n);
    let mut row = vec![0.0; n];
    for (p, (x, normal)) in points.iter().enumerate() {
        match op {
            BoundaryOp::Value => basis.psi_row(*x, &mut row),
            BoundaryOp::NormalDerivative => basis.psi_normal_row(*x, *normal, &mut row)?,
        }
        for k in 0..n {
            b[(p, k)] = row[k];
        }
    }
    Ok(b)
}

/// Interpolate `data` given at the stencil nodes and evaluate at `x`.
/// Convenience used by tests and diagnostics.
pub fn interpolate_at(basis: &RbfQrBasis, data: &DVector<f64>, x: Point2) -> Option<f64> {
    let b = evaluate_psi(basis, &basis.nodes);
    let gamma = b.lu().solve(data)?;
    let mut row = vec![0.0; basis.n()];
    basis.psi_row(x, &mut row);
    Some(row.iter().zip(gamma.iter()).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::halton_points;
    use crate::rbf_direct::{
        build_interpolation_matrix, condition_number, BasisKind, RowKind,
    };
    use approx::assert_abs_diff_eq;

    #[test]
    fn index_ordering_and_counts() {
        let idx = expansion_indices(0);
        assert_eq!(idx, vec![ExpansionIndex { k: 0, l: 0, trig: Trig::Cos }]);

        let idx = expansion_indices(2);
        assert_eq!(idx.len(), 6);
        assert_eq!(*idx.last().unwrap(), ExpansionIndex { k: 2, l: 1, trig: Trig::Sin });
        // C00 C10 S10 C20 C21 S21
        assert_eq!(idx[1], ExpansionIndex { k: 1, l: 0, trig: Trig::Cos });
        assert_eq!(idx[2], ExpansionIndex { k: 1, l: 0, trig: Trig::Sin });

        for k_max in 0..12u32 {
            let count = expansion_indices(k_max).len() as u32;
            assert_eq!(count, (k_max + 1) * (k_max + 2) / 2);
            // per-degree count is k+1
            let per: u32 = expansion_indices(k_max)
                .iter()
                .filter(|i| i.k == k_max)
                .count() as u32;
            assert_eq!(per, k_max + 1);
        }
    }

    #[test]
    fn scale_factor_values() {
        let d00 = scale_factor(ExpansionIndex { k: 0, l: 0, trig: Trig::Cos }, 0.3);
        assert_abs_diff_eq!(d00, 2.0, epsilon = 1e-14);
        for eps in [0.3, 1.7] {
            let d10 = scale_factor(ExpansionIndex { k: 1, l: 0, trig: Trig::Cos }, eps);
            assert_abs_diff_eq!(d10, eps * eps, epsilon = 1e-13);
        }
        // d_{k+2,l}/d_{k,l} carries eps^4
        let r = |eps: f64| {
            scale_factor(ExpansionIndex { k: 4, l: 0, trig: Trig::Cos }, eps)
                / scale_factor(ExpansionIndex { k: 2, l: 0, trig: Trig::Cos }, eps)
        };
        assert_abs_diff_eq!(r(2.0) / r(1.0), 16.0, epsilon = 1e-10);
    }

    #[test]
    fn hypergeometric_series() {
        assert_eq!(hypergeometric_1f2(0.5, 1.0, 2.0, 0.0).unwrap(), 1.0);
        // 1F2(1;1,1;z) = sum z^t/(t!)^2, brute-force oracle
        let mut oracle = 0.0;
        let z: f64 = 0.1;
        for t in 0..30 {
            let mut f = 1.0;
            for i in 1..=t {
                f *= i as f64;
            }
            oracle += z.powi(t as i32) / (f * f);
        }
        assert_abs_diff_eq!(
            hypergeometric_1f2(1.0, 1.0, 1.0, z).unwrap(),
            oracle,
            epsilon = 1e-14
        );
        // positive-term series is monotone in z
        let vals: Vec<f64> = [0.0, 0.05, 0.1]
            .iter()
            .map(|&z| hypergeometric_1f2(0.7, 1.3, 2.1, z).unwrap())
            .collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2]);
    }

    #[test]
    fn coefficient_values_and_bound() {
        let c00 = ExpansionIndex { k: 0, l: 0, trig: Trig::Cos };
        assert_abs_diff_eq!(expansion_coefficient(c00, 0.0, 0.3, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        // sine coefficient vanishes where its angle does
        let s10 = ExpansionIndex { k: 1, l: 0, trig: Trig::Sin };
        assert_abs_diff_eq!(expansion_coefficient(s10, 0.7, 0.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        // coefficients stay O(1) over the sweep
        for idx in expansion_indices(6) {
            for r in [0.0, 0.3, 0.7, 1.0] {
                for theta in [0.0, 1.0, 2.5] {
                    let c = expansion_coefficient(idx, r, theta, 1.0).unwrap();
                    assert!(c.abs() <= 6.0, "coefficient {c} out of bound at {idx:?}");
                }
            }
        }
    }

    #[test]
    fn chebyshev_values() {
        assert_eq!(chebyshev_t_with_deriv(3, 0.5).0, -1.0);
        let (t2, dt2) = chebyshev_t_with_deriv(2, 1.0);
        assert_eq!(t2, 1.0);
        assert_eq!(dt2, 4.0);
    }

    #[test]
    fn expansion_function_special_value() {
        // C_{2,0} at r=1, theta=0, eps=0: T_2(1) = 1
        let idx = ExpansionIndex { k: 2, l: 0, trig: Trig::Cos };
        let (v, _) = expansion_function_jet(idx, Point2::new(1.0, 0.0), 0.0);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn expansion_function_gradient_matches_fd() {
        let eps = 0.8;
        let h = 1e-6;
        let pts = [
            Point2::new(0.3, 0.2),
            Point2::new(-0.5, 0.1),
            Point2::new(0.05, -0.6),
            Point2::new(0.7, 0.7),
            Point2::new(-0.2, -0.2),
        ];
        for idx in expansion_indices(4) {
            for x in pts {
                let (_, grad) = expansion_function_jet(idx, x, eps);
                let grad = grad.unwrap();
                let f = |p: Point2| expansion_function_jet(idx, p, eps).0;
                let gx = (f(x + Point2::new(h, 0.0)) - f(x - Point2::new(h, 0.0))) / (2.0 * h);
                let gy = (f(x + Point2::new(0.0, h)) - f(x - Point2::new(0.0, h))) / (2.0 * h);
                assert_abs_diff_eq!(grad.x, gx, epsilon = 1e-7);
                assert_abs_diff_eq!(grad.y, gy, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn single_node_basis() {
        let basis = build_rbfqr_basis(&[Point2::new(0.4, -0.2)], 1.0).unwrap();
        let b = evaluate_psi(&basis, &basis.nodes);
        assert_eq!(b.nrows(), 1);
        assert!(b[(0, 0)].abs() > 1e-12);
        let v = interpolate_at(&basis, &DVector::from_element(1, 3.5), basis.nodes[0]).unwrap();
        assert_abs_diff_eq!(v, 3.5, epsilon = 1e-12);
    }

    fn smooth_data(nodes: &[Point2]) -> DVector<f64> {
        DVector::from_iterator(nodes.len(), nodes.iter().map(|p| (2.0 * p.x - p.y).sin()))
    }

    #[test]
    fn matches_direct_gaussian_when_well_conditioned() {
        // same interpolation space: psi and direct-GA interpolants agree
        let nodes = halton_points(25, 1);
        let probes = halton_points(50, 101);
        for eps in [1.0, 2.0] {
            let basis = build_rbfqr_basis(&nodes, eps).unwrap();
            let rows = vec![RowKind::Value; 25];
            let li = build_interpolation_matrix(BasisKind::Ga { eps }, &nodes, &rows).unwrap();
            let d = smooth_data(&nodes);
            let alpha = li.solve(&d).unwrap();
            for probe in &probes {
                let direct = li.evaluate(&alpha, *probe);
                let stable = interpolate_at(&basis, &d, *probe).unwrap();
                assert_abs_diff_eq!(stable, direct, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn stays_conditioned_in_flat_limit() {
        let nodes = halton_points(25, 1);
        let eps = 0.1;
        let basis = build_rbfqr_basis(&nodes, eps).unwrap();
        let b = evaluate_psi(&basis, &basis.nodes);
        assert!(condition_number(&b) < 1e8, "cond = {:.3e}", condition_number(&b));
        let rows = vec![RowKind::Value; 25];
        let li = build_interpolation_matrix(BasisKind::Ga { eps }, &nodes, &rows).unwrap();
        assert!(li.cond_estimate > 1e14, "direct cond = {:.3e}", li.cond_estimate);
    }

    #[test]
    fn interpolation_round_trip() {
        let nodes = halton_points(25, 1);
        let basis = build_rbfqr_basis(&nodes, 0.5).unwrap();
        let b = evaluate_psi(&basis, &nodes);
        let d = smooth_data(&nodes);
        let gamma = b.clone().lu().solve(&d).unwrap();
        let back = &b * &gamma;
        for k in 0..25 {
            assert_abs_diff_eq!(back[k], d[k], epsilon = 1e-10);
        }
        // constant reproduction at the nodes is the interpolation condition
        let ones = DVector::from_element(25, 4.2);
        let gamma = b.clone().lu().solve(&ones).unwrap();
        let back = &b * &gamma;
        for k in 0..25 {
            assert_abs_diff_eq!(back[k], 4.2, epsilon = 1e-10);
        }
    }

    #[test]
    fn no_breakdown_for_small_eps() {
        // interpolation error varies smoothly over the flat range where the
        // direct method has already broken down
        let nodes = halton_points(25, 1);
        let probes = halton_points(40, 301);
        let f = |p: Point2| (p.x + 0.5 * p.y).cos();
        let d = DVector::from_iterator(25, nodes.iter().map(|p| f(*p)));
        let mut errs = Vec::new();
        for eps in [0.1, 0.2, 0.5, 1.0] {
            let basis = build_rbfqr_basis(&nodes, eps).unwrap();
            let e = probes
                .iter()
                .map(|p| (interpolate_at(&basis, &d, *p).unwrap() - f(*p)).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        let max = errs.iter().cloned().fold(0.0, f64::max);
        let min = errs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 100.0, "errors varied too much: {errs:?}");
    }

    #[test]
    fn correction_matrix_bounded_in_flat_limit() {
        let nodes = halton_points(25, 1);
        let basis = build_rbfqr_basis(&nodes, 1e-3).unwrap();
        let max = basis.r_tilde.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(max.is_finite());
    }

    #[test]
    fn truncation_insensitivity() {
        let nodes = halton_points(25, 1);
        for eps in [0.1, 0.5] {
            let base = build_rbfqr_basis(&nodes, eps).unwrap();
            let k_used = base.indices.last().unwrap().k;
            let more = build_rbfqr_basis_with_degree(&nodes, eps, Some(k_used + 2)).unwrap();
            let b0 = evaluate_psi(&base, &nodes);
            let b1 = evaluate_psi(&more, &nodes);
            let scale = b0.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let diff = (&b0 - &b1).iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            assert!(diff / scale < 1e-12, "eps={eps}: rel change {:.3e}", diff / scale);
        }
    }

    #[test]
    fn boundary_operator_rows() {
        let nodes = halton_points(16, 1);
        let basis = build_rbfqr_basis(&nodes, 0.7).unwrap();
        let pts: Vec<(Point2, Point2)> = vec![
            (Point2::new(1.0, 0.3), Point2::new(1.0, 0.0)),
            (Point2::new(0.2, 1.0), Point2::new(0.0, 1.0)),
        ];
        // value operator reduces to plain evaluation
        let b_val = apply_boundary_operator_psi(&basis, &pts, BoundaryOp::Value).unwrap();
        let plain: Vec<Point2> = pts.iter().map(|p| p.0).collect();
        assert_eq!(b_val, evaluate_psi(&basis, &plain));
        // normal-derivative rows match finite differences
        let b_der =
            apply_boundary_operator_psi(&basis, &pts, BoundaryOp::NormalDerivative).unwrap();
        let h = 1e-6;
        for (row, (x, n)) in pts.iter().enumerate() {
            let fwd = evaluate_psi(&basis, &[x + h * n]);
            let bwd = evaluate_psi(&basis, &[x - h * n]);
            for k in 0..basis.n() {
                let fd = (fwd[(0, k)] - bwd[(0, k)]) / (2.0 * h);
                assert_abs_diff_eq!(b_der[(row, k)], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn psi_gradient_matches_fd_including_centroid() {
        let nodes = halton_points(16, 1);
        let basis = build_rbfqr_basis(&nodes, 0.6).unwrap();
        let h = 1e-6;
        // the centroid is the polar origin; the Cartesian limit must hold
        let pts = vec![Point2::new(0.4, 0.7), basis.origin];
        let (gx, gy) = evaluate_psi_gradient(&basis, &pts);
        for (row, x) in pts.iter().enumerate() {
            let fx = evaluate_psi(&basis, &[x + Point2::new(h, 0.0)]);
            let bx = evaluate_psi(&basis, &[x - Point2::new(h, 0.0)]);
            let fy = evaluate_psi(&basis, &[x + Point2::new(0.0, h)]);
            let by = evaluate_psi(&basis, &[x - Point2::new(0.0, h)]);
            for k in 0..basis.n() {
                assert_abs_diff_eq!(gx[(row, k)], (fx[(0, k)] - bx[(0, k)]) / (2.0 * h), epsilon = 1e-5);
                assert_abs_diff_eq!(gy[(row, k)], (fy[(0, k)] - by[(0, k)]) / (2.0 * h), epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn gradient_at_origin_is_error() {
        // a node sitting exactly at the centroid has polar radius zero
        let nodes = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(-1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.0, -1.0),
        ];
        let basis = build_rbfqr_basis(&nodes, 0.5).unwrap();
        let res = apply_boundary_operator_psi(
            &basis,
            &[(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0))],
            BoundaryOp::NormalDerivative,
        );
        assert!(res.is_err());
    }
}
