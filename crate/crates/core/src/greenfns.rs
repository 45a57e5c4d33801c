//! Laplace fundamental solution and the Dirichlet Green's function of a disk.
//!
//! Sign convention: `G` satisfies `laplacian G = delta(x - xi)` with `G = 0`
//! on the circle, so `G <= 0` inside and the Poisson kernel `Q = dG/dn` is
//! nonnegative. With this normalization the reconstruction identity
//! `u(xi) = int_Gamma Q u + int_Omega G (laplacian u)` holds, which is the
//! identity the whole local integral formulation rests on.

use std::f64::consts::PI;

use thiserror::Error;

use crate::Point2;

#[derive(Debug, Error, PartialEq)]
pub enum GreenError {
    #[error("source and evaluation point coincide")]
    CoincidentPoints,
    #[error("evaluation point outside the subregion circle")]
    OutsideCircle,
    #[error("evaluation point not on the subregion circle")]
    NotOnCircle,
    #[error("source point not strictly inside the subregion")]
    SourceOutside,
}

/// Circular integration subregion.
#[derive(Debug, Clone, Copy)]
pub struct DiskSubregion {
    pub center: Point2,
    pub radius: f64,
}

impl DiskSubregion {
    pub fn new(center: Point2, radius: f64) -> Self {
        assert!(radius > 0.0, "subregion radius must be positive");
        DiskSubregion { center, radius }
    }
}

/// Source point inside a [`DiskSubregion`] together with its image point.
#[derive(Debug, Clone, Copy)]
pub struct SourceConfig {
    pub xi: Point2,
    /// Distance from the subregion center to the source.
    pub rho: f64,
    /// Image point, reflected across the circle along the same ray.
    /// `None` for a centered source (the image is at infinity).
    pub image: Option<Point2>,
}

impl SourceConfig {
    pub fn new(xi: Point2, sub: &DiskSubregion) -> Result<Self, GreenError> {
        let offset = xi - sub.center;
        let rho = offset.norm();
        if rho >= sub.radius {
            return Err(GreenError::SourceOutside);
        }
        let image = if rho > 0.0 {
            Some(sub.center + (sub.radius * sub.radius / (rho * rho)) * offset)
        } else {
            None
        };
        Ok(SourceConfig { xi, rho, image })
    }

    /// Centered source: collocation point at the subregion center. This is the
    /// only configuration the assembly path ever uses.
    pub fn centered(sub: &DiskSubregion) -> Self {
        SourceConfig {
            xi: sub.center,
            rho: 0.0,
            image: None,
        }
    }
}

/// Fundamental solution of the 2D Laplace operator, `(1/2pi) ln(1/|x - xi|)`.
pub fn laplace_fundamental(x: Point2, xi: Point2) -> f64 {
    let r = (x - xi).norm();
    assert!(r > 0.0, "fundamental solution at coincident points");
    (1.0 / r).ln() / (2.0 * PI)
}

/// Normal derivative of the fundamental solution at `x` with unit normal `n`.
pub fn laplace_fundamental_normal(x: Point2, n: Point2, xi: Point2) -> f64 {
    let d = x - xi;
    let r2 = d.norm_squared();
    assert!(r2 > 0.0, "fundamental solution at coincident points");
    -d.dot(&n) / (2.0 * PI * r2)
}

/// Disk Dirichlet Green's function, zero on the circle, `G <= 0` inside.
pub fn dgf_disk(x: Point2, cfg: &SourceConfig, sub: &DiskSubregion) -> Result<f64, GreenError> {
    let r_center = (x - sub.center).norm();
    if r_center > sub.radius * (1.0 + 1e-12) {
        return Err(GreenError::OutsideCircle);
    }
    let r_src = (x - cfg.xi).norm();
    if r_src == 0.0 {
        return Err(GreenError::CoincidentPoints);
    }
    match cfg.image {
        None => Ok((r_src / sub.radius).ln() / (2.0 * PI)),
        Some(image) => {
            let r_img = (x - image).norm();
            Ok((sub.radius * r_src / (cfg.rho * r_img)).ln() / (2.0 * PI))
        }
    }
}

/// Poisson kernel `Q = dG/dn` on the circle: `(R^2 - rho^2) / (2 pi R |x - xi|^2)`.
pub fn dgf_disk_normal(
    x_on_circle: Point2,
    cfg: &SourceConfig,
    sub: &DiskSubregion,
) -> Result<f64, GreenError> {
    let r_center = (x_on_circle - sub.center).norm();
    if (r_center - sub.radius).abs() > 1e-10 * sub.radius.max(1.0) {
        return Err(GreenError::NotOnCircle);
    }
    let r_src2 = (x_on_circle - cfg.xi).norm_squared();
    Ok((sub.radius * sub.radius - cfg.rho * cfg.rho) / (2.0 * PI * sub.radius * r_src2))
}
