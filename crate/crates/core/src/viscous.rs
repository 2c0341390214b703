//! Viscous force functionals and the experimental core-spreading step.
//!
//! The functionals are tested against closed forms; time integration with
//! viscosity only spreads blob cores and is not a validated no-slip solver.

use serde::{Deserialize, Serialize};

use crate::bodies::{boundary_velocity, BodyChart, BodyCoords, GeneralizedCovector, Vec2};
use crate::fields::{VelocityField, VortexState};
use crate::panels::PanelBoundary;
use crate::quad::{self, gauss_legendre, Cubature, Patch};
use crate::{Error, Result};

/// Adaptive-cubature tolerances as they appear in scenario files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-12, max_evals: 4_000_000 }
    }
}

impl From<QuadratureSpec> for Cubature {
    fn from(q: QuadratureSpec) -> Self {
        Cubature { abs_tol: q.abs_tol, rel_tol: q.rel_tol, max_evals: q.max_evals, initial: [1, 4] }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscousParams {
    /// Kinematic viscosity.
    pub nu: f64,
    #[serde(default)]
    pub core_spreading: bool,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

impl ViscousParams {
    pub fn new(nu: f64) -> Self {
        Self { nu, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(Error::Invalid(format!("viscosity must be finite and non-negative, got {}", self.nu)));
        }
        Ok(())
    }
}

/// Integration region of the area functionals.
#[derive(Clone, Debug)]
pub enum Domain<'a> {
    /// Fluid around a body, truncated at the usual radius.
    Fluid(&'a PanelBoundary),
    Patches(Vec<Patch>),
}

impl Domain<'_> {
    fn patches(&self) -> Result<Vec<Patch>> {
        match self {
            Domain::Fluid(b) => quad::fluid_patches(b, quad::truncation_radius(b)),
            Domain::Patches(p) => Ok(p.clone()),
        }
    }
}

/// `nu int trace(grad u^T grad v)`.
pub fn viscous_pairing(u: &dyn VelocityField, v: &dyn VelocityField, domain: &Domain, params: &ViscousParams) -> Result<f64> {
    params.validate()?;
    if params.nu == 0.0 {
        return Ok(0.0);
    }
    let f = |p: Vec2| vec![u.gradient(p).component_mul(&v.gradient(p)).sum()];
    let r = quad::integrate(&domain.patches()?, 1, &params.quadrature.into(), &f)?;
    Ok(params.nu * r.value[0])
}

/// `-nu int <lap u, eta>`.
pub fn body_viscous_force(u: &dyn VelocityField, eta: &dyn VelocityField, domain: &Domain, params: &ViscousParams) -> Result<f64> {
    params.validate()?;
    if params.nu == 0.0 {
        return Ok(0.0);
    }
    let f = |p: Vec2| vec![u.laplacian(p).dot(&eta.velocity(p))];
    let r = quad::integrate(&domain.patches()?, 1, &params.quadrature.into(), &f)?;
    Ok(-params.nu * r.value[0])
}

/// `nu ∮ <(grad u) n, v>` along a closed polygon, four Gauss points per
/// edge piece. `n` is the unit normal to the right of the direction of travel.
pub fn boundary_flux_pairing(
    u: &dyn VelocityField,
    v: &dyn VelocityField,
    loop_pts: &[Vec2],
    pieces: usize,
    params: &ViscousParams,
) -> f64 {
    if params.nu == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..loop_pts.len() {
        let (a, b) = (loop_pts[k], loop_pts[(k + 1) % loop_pts.len()]);
        let t = (b - a).normalize();
        let n = Vec2::new(t.y, -t.x);
        s += quad::segment_integral(a, b, pieces, 4, |p| (u.gradient(p) * n).dot(&v.velocity(p)));
    }
    params.nu * s
}

/// `j -> nu ∮ <(grad u) n, delta b_j>` over the body boundary, with `n` the
/// normal pointing into the fluid and `delta b_j` the body velocity of unit
/// motion along coordinate `j`. Gauss points sit on the panels, so `u` must
/// be defined there (kernel or closed-form fields).
pub fn boundary_traction_force(
    chart: &BodyChart,
    coords: &BodyCoords,
    boundary: &PanelBoundary,
    u: &dyn VelocityField,
    params: &ViscousParams,
) -> Result<GeneralizedCovector> {
    chart.check(coords)?;
    params.validate()?;
    let dim = chart.dim();
    let mut f = GeneralizedCovector::zeros(dim);
    if params.nu == 0.0 {
        return Ok(f);
    }
    let (x, w) = gauss_legendre(4);
    for i in 0..boundary.len() {
        let (a, b) = (boundary.endpoints[i], boundary.endpoints[i + 1]);
        let n = boundary.normals[i];
        for (xg, wg) in x.iter().zip(&w) {
            let p = a + (b - a) * (0.5 * (1.0 + xg));
            let dudn = u.gradient(p) * n;
            let ds = 0.5 * wg * boundary.lengths[i];
            for j in 0..dim {
                f[j] += dudn.dot(&chart.basis_velocity(&coords.q, boundary.part[i], j, p)) * ds;
            }
        }
    }
    Ok(params.nu * f)
}

/// Full body velocity at every panel midpoint: the no-slip target.
pub fn no_slip_boundary_data(chart: &BodyChart, coords: &BodyCoords, boundary: &PanelBoundary) -> Result<Vec<Vec2>> {
    boundary_velocity(chart, coords, boundary)
}

/// Largest `|u - bdot|` at the midpoints, evaluated just inside the fluid.
pub fn slip_residual(chart: &BodyChart, coords: &BodyCoords, boundary: &PanelBoundary, u: &dyn VelocityField) -> Result<f64> {
    let target = no_slip_boundary_data(chart, coords, boundary)?;
    let eps = 1e-9 * boundary.perimeter();
    Ok((0..boundary.len())
        .map(|i| (u.velocity(boundary.midpoints[i] + eps * boundary.normals[i]) - target[i]).norm())
        .fold(0.0, f64::max))
}

/// Core spreading: every blob's `delta^2` grows by `4 nu dt`. Positions and
/// strengths are untouched.
pub fn diffuse_step(vortices: &VortexState, params: &ViscousParams, dt: f64) -> VortexState {
    let mut out = vortices.clone();
    if params.core_spreading && params.nu > 0.0 {
        out.delta = (vortices.delta * vortices.delta + 4.0 * params.nu * dt).sqrt();
    }
    out
}
