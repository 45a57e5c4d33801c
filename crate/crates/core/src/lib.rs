//! Meshless local integral method solver for 2D elliptic PDEs.
//!
//! The solver covers the computational domain with heavily overlapping local
//! interpolation stencils. At each interior node an exact integral identity
//! over a small disk (with the disk Dirichlet Green's function as kernel)
//! yields one sparse equation coupling the nodal unknowns of the stencil.
//! Three row-construction schemes are provided:
//!
//! - `Lrdrm` — volume terms converted to boundary integrals through particular
//!   solutions of the interpolation basis (dual reciprocity),
//! - `Lim` — volume terms integrated directly against the Green's function,
//! - `LimRbfQr` — the same direct integration, but the near-flat Gaussian
//!   basis is evaluated through a QR-stabilized change of basis so that small
//!   shape parameters remain usable.
//!
//! Benchmarks (Poisson, convection-diffusion, thermal boundary layer) live in
//! [`bench`]; the command-line front end is a separate crate.

pub mod assembly;
pub mod bench;
pub mod geometry;
pub mod greenfns;
pub mod quadrature;
pub mod rbf_direct;
pub mod rbfqr;
pub mod solver;

/// 2D point / vector, the only coordinate type used throughout.
pub type Point2 = nalgebra::Vector2<f64>;
