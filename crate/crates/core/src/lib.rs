//! Reduced fluid-structure interaction for a rigid or articulated body in an
//! unbounded 2D ideal fluid.
//!
//! The fluid velocity is split as `u = sigma(q, qdot) + xi`, where `sigma` is the
//! potential flow forced by the body motion (a source-panel Neumann solve) and
//! `xi` is a boundary-tangent vortical field carried by regularized point
//! vortices. On top of that split sit the bracket, covariant derivatives and
//! curvature of the connection, the coupled body/vortex equations of motion,
//! and a battery of numerical identity checks.

pub mod algebra;
pub mod bodies;
pub mod cli;
pub mod dynamics;
pub mod fields;
pub mod panels;
pub mod quad;
pub mod verify;
pub mod viscous;

pub use bodies::{BodyChart, BodyCoords, GeneralizedCovector, Mat2, Vec2};

/// Errors shared by every module.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid body chart: {0}")]
    InvalidChart(String),
    #[error("boundary embedding self-intersects")]
    SelfIntersecting,
    #[error("incompatible Neumann data: net flux {flux:.3e} exceeds {limit:.3e}")]
    IncompatibleFlux { flux: f64, limit: f64 },
    #[error("singular influence matrix")]
    Singular,
    #[error("point ({x}, {y}) lies inside the body or on a panel")]
    InsideBody { x: f64, y: f64 },
    #[error("quadrature did not converge: error estimate {estimate:.3e}, tolerance {tolerance:.3e}")]
    Quadrature { estimate: f64, tolerance: f64 },
    #[error("vortex {index} within {distance:.3e} of the body (blob radius {delta:.3e})")]
    Collision { index: usize, distance: f64, delta: f64 },
    #[error("{fraction:.1}% of evaluation points are swept by the perturbed body")]
    Masked { fraction: f64 },
    #[error("no-penetration violated: normal residual {residual:.3e}")]
    NoPenetration { residual: f64 },
    #[error("mass matrix is not positive definite")]
    Indefinite,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
