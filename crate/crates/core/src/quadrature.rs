//! Gauss-Legendre rules and their mapping to circle boundaries and disk
//! interiors.
//!
//! All integrals of the local integral formulation are evaluated here. Disk
//! integration uses a polar tensor product centered at the subregion center;
//! the polar Jacobian `r` regularizes the logarithmic singularity of the
//! Green's function at the center.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use once_cell::sync::Lazy;
use thiserror::Error;

use crate::Point2;

/// Hard range for cached rules.
pub const MAX_ORDER: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature order {0} outside 1..={MAX_ORDER}")]
    OrderOutOfRange(usize),
}

/// One-dimensional Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        half * sum
    }
}

/// Legendre polynomial value and derivative at `x` by three-term recurrence.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    // derivative from P_n and P_{n-1}
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_rule(order: usize) -> QuadratureRule {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess, then Newton to 1e-15.
        let mut x = -(PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    // order 1: the loop above would divide by zero in the derivative formula
    if n == 1 {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
    QuadratureRule { nodes, weights }
}

static RULE_CACHE: Lazy<RwLock<HashMap<usize, Arc<QuadratureRule>>>> =
    Lazy::new(|| RwLock::new(HashMap::new()));

/// Gauss-Legendre rule of the given order, cached.
pub fn gauss_legendre_rule(order: usize) -> Result<Arc<QuadratureRule>, QuadratureError> {
    if order < 1 || order > MAX_ORDER {
        return Err(QuadratureError::OrderOutOfRange(order));
    }
    if let Some(r) = RULE_CACHE.read().unwrap().get(&order) {
        return Ok(r.clone());
    }
    let rule = Arc::new(compute_rule(order));
    RULE_CACHE
        .write()
        .unwrap()
        .entry(order)
        .or_insert(rule.clone());
    Ok(rule)
}

/// Quadrature points of the circle-boundary rule: `(point, outward normal,
/// weight)` with the arc-length Jacobian folded into the weights, so a plain
/// weighted sum integrates over the circle.
pub fn circle_quadrature_points(
    center: Point2,
    radius: f64,
    order: usize,
) -> Vec<(Point2, Point2, f64)> {
    assert!(radius > 0.0, "circle radius must be positive");
    let rule = gauss_legendre_rule(order).expect("boundary quadrature order");
    let mut out = Vec::with_capacity(4 * order);
    for arc in 0..4 {
        let a = 0.5 * PI * arc as f64;
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            let theta = a + 0.25 * PI * (1.0 + x);
            let n = Point2::new(theta.cos(), theta.sin());
            out.push((center + radius * n, n, w * 0.25 * PI * radius));
        }
    }
    out
}

/// Quadrature points of the polar disk rule: `(point, weight)` with the polar
/// Jacobian folded into the weights.
pub fn disk_quadrature_points(
    center: Point2,
    radius: f64,
    radial_order: usize,
    angular_order: usize,
) -> Vec<(Point2, f64)> {
    assert!(radius > 0.0, "disk radius must be positive");
    let radial = gauss_legendre_rule(radial_order).expect("radial quadrature order");
    let per_arc = angular_order.div_ceil(4).max(1);
    let angular = gauss_legendre_rule(per_arc).expect("angular quadrature order");
    let mut out = Vec::with_capacity(4 * per_arc * radial_order);
    for arc in 0..4 {
        let a = 0.5 * PI * arc as f64;
        for (&xt, &wt) in angular.nodes().iter().zip(angular.weights()) {
            let theta = a + 0.25 * PI * (1.0 + xt);
            let dir = Point2::new(theta.cos(), theta.sin());
            for (&xr, &wr) in radial.nodes().iter().zip(radial.weights()) {
                let r = 0.5 * radius * (1.0 + xr);
                out.push((
                    center + r * dir,
                    wt * 0.25 * PI * wr * 0.5 * radius * r,
                ));
            }
        }
    }
    out
}

/// Integrate `f(x, n)` over the circle of the given center and radius.
///
/// The circle is split into 4 arcs with a Gauss-Legendre rule of `order`
/// points on each; `f` receives the point and the outward unit normal.
pub fn integrate_circle_boundary<F>(center: Point2, radius: f64, mut f: F, order: usize) -> f64
where
    F: FnMut(Point2, Point2) -> f64,
{
    assert!(radius > 0.0, "circle radius must be positive");
    let rule = gauss_legendre_rule(order).expect("boundary quadrature order");
    let mut sum = 0.0;
    for arc in 0..4 {
        let a = 0.5 * PI * arc as f64;
        let b = a + 0.5 * PI;
        sum += rule.integrate(a, b, |theta| {
            let n = Point2::new(theta.cos(), theta.sin());
            f(center + radius * n, n)
        });
    }
    radius * sum
}

/// Integrate `f(x)` over the disk of the given center and radius.
///
/// Polar tensor product: Gauss-Legendre in r on [0, radius] times 4 angular
/// arcs with `angular_order / 4` points each (rounded up). The integrand is
/// evaluated as `f * r`, which regularizes an integrable log singularity at
/// the center.
pub fn integrate_disk<F>(
    center: Point2,
    radius: f64,
    mut f: F,
    radial_order: usize,
    angular_order: usize,
) -> f64
where
    F: FnMut(Point2) -> f64,
{
    assert!(radius > 0.0, "disk radius must be positive");
    let radial = gauss_legendre_rule(radial_order).expect("radial quadrature order");
    let per_arc = angular_order.div_ceil(4).max(1);
    let angular = gauss_legendre_rule(per_arc).expect("angular quadrature order");
    let mut sum = 0.0;
    for arc in 0..4 {
        let a = 0.5 * PI * arc as f64;
        let b = a + 0.5 * PI;
        sum += angular.integrate(a, b, |theta| {
            let dir = Point2::new(theta.cos(), theta.sin());
            radial.integrate(0.0, radius, |r| r * f(center + r * dir))
        });
    }
    sum
}

/// Same points, but the integrand also sees the polar radius (distance to the
/// disk center). Used by kernels that are naturally radial about the center.
pub fn integrate_disk_polar<F>(
    center: Point2,
    radius: f64,
    mut f: F,
    radial_order: usize,
    angular_order: usize,
) -> f64
where
    F: FnMut(Point2, f64) -> f64,
{
    integrate_disk(
        center,
        radius,
        |x| {
            let r = (x - center).norm();
            f(x, r)
        },
        radial_order,
        angular_order,
    )
}
