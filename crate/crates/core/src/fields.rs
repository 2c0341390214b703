//! The vertical variable: regularized point vortices, the panel correction
//! that makes their field tangent to the body, circulation, energy and the
//! splitting of a total velocity into its connection and vertical parts.
//!
//! Stream functions follow `u = (d psi/dy, -d psi/dx)`, so a vortex of
//! positive circulation turns counter-clockwise and `omega = -lap psi`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bodies::{perp, BodyChart, BodyCoords, Mat2, Vec2};
use crate::panels::{NeumannSolver, PanelBoundary, Placement, SigmaField};
use crate::quad::{self, Cubature, Grading};
use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Ein(x) = E1(x) + ln x + gamma`, entire and `~x` near zero.
pub fn ein(x: f64) -> f64 {
    if x <= 1.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 1..60 {
            term *= -x / n as f64;
            let add = -term / n as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        e1(x) + x.ln() + EULER_GAMMA
    }
}

/// Exponential integral `E1(x)` for `x > 0`.
pub fn e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs a positive argument");
    if x <= 1.0 {
        return ein(x) - x.ln() - EULER_GAMMA;
    }
    // Modified Lentz on the even continued fraction.
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..200 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}

/// Vorticity profile of a blob.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlobKernel {
    /// `omega ~ exp(-r^2/delta^2)`.
    #[default]
    Gaussian,
    /// `omega ~ delta^2 / (r^2 + delta^2)^2`.
    Krasny,
}

impl BlobKernel {
    /// `f(r^2)` with velocity `Gamma f (-y, x) / 2pi`.
    #[inline]
    pub fn factor(self, r2: f64, d2: f64) -> f64 {
        match self {
            BlobKernel::Krasny => 1.0 / (r2 + d2),
            BlobKernel::Gaussian => {
                let x = r2 / d2;
                if x < 1e-3 {
                    (1.0 - 0.5 * x + x * x / 6.0 - x * x * x / 24.0) / d2
                } else {
                    -(-x).exp_m1() / r2
                }
            }
        }
    }

    /// `df / d(r^2)`.
    #[inline]
    pub fn factor_slope(self, r2: f64, d2: f64) -> f64 {
        match self {
            BlobKernel::Krasny => -1.0 / ((r2 + d2) * (r2 + d2)),
            BlobKernel::Gaussian => {
                let x = r2 / d2;
                if x < 0.5 {
                    // (1 - e^-x)/x = sum (-x)^n/(n+1)!, differentiated termwise.
                    let mut term = -0.5;
                    let mut s = 0.0;
                    for n in 1..24 {
                        s += n as f64 * term;
                        term *= -x / (n + 2) as f64;
                    }
                    s / (d2 * d2)
                } else {
                    let e = (-x).exp();
                    (x * e - (1.0 - e)) / (x * x * d2 * d2)
                }
            }
        }
    }

    /// Stream function per unit circulation, up to a constant.
    #[inline]
    pub fn stream(self, r2: f64, d2: f64) -> f64 {
        match self {
            BlobKernel::Krasny => -(r2 + d2).ln() / (4.0 * PI),
            BlobKernel::Gaussian => -(d2.ln() - EULER_GAMMA + ein(r2 / d2)) / (4.0 * PI),
        }
    }

    /// Vorticity per unit circulation.
    #[inline]
    pub fn vorticity(self, r2: f64, d2: f64) -> f64 {
        match self {
            BlobKernel::Krasny => d2 / (PI * (r2 + d2) * (r2 + d2)),
            BlobKernel::Gaussian => (-r2 / d2).exp() / (PI * d2),
        }
    }

    /// `d omega / d(r^2)` per unit circulation.
    #[inline]
    fn vorticity_slope(self, r2: f64, d2: f64) -> f64 {
        match self {
            BlobKernel::Krasny => -2.0 * d2 / (PI * (r2 + d2).powi(3)),
            BlobKernel::Gaussian => -(-r2 / d2).exp() / (PI * d2 * d2),
        }
    }

    #[inline]
    pub(crate) fn velocity(self, d: Vec2, d2: f64) -> Vec2 {
        self.factor(d.norm_squared(), d2) / (2.0 * PI) * perp(d)
    }

    #[inline]
    fn gradient(self, d: Vec2, d2: f64) -> Mat2 {
        let r2 = d.norm_squared();
        let g = self.factor(r2, d2) / (2.0 * PI);
        let gs = 2.0 * self.factor_slope(r2, d2) / (2.0 * PI);
        let p = perp(d);
        Mat2::new(gs * p.x * d.x, gs * p.x * d.y - g, gs * p.y * d.x + g, gs * p.y * d.y)
    }

    #[inline]
    fn laplacian(self, d: Vec2, d2: f64) -> Vec2 {
        2.0 * self.vorticity_slope(d.norm_squared(), d2) * perp(d)
    }
}

/// Pointwise velocity, velocity gradient `J[i][k] = du_i/dx_k` and vector
/// Laplacian of a field defined in (part of) the plane.
pub trait VelocityField: Sync {
    fn velocity(&self, p: Vec2) -> Vec2;
    fn gradient(&self, p: Vec2) -> Mat2;
    /// Harmonic unless overridden.
    fn laplacian(&self, _p: Vec2) -> Vec2 {
        Vec2::zeros()
    }
}

impl VelocityField for SigmaField {
    fn velocity(&self, p: Vec2) -> Vec2 {
        SigmaField::velocity(self, p)
    }
    fn gradient(&self, p: Vec2) -> Mat2 {
        SigmaField::gradient(self, p)
    }
}

/// `u(x) = m x + c`.
#[derive(Clone, Copy, Debug)]
pub struct AffineField {
    pub m: Mat2,
    pub c: Vec2,
}

impl VelocityField for AffineField {
    fn velocity(&self, p: Vec2) -> Vec2 {
        self.m * p + self.c
    }
    fn gradient(&self, _p: Vec2) -> Mat2 {
        self.m
    }
}

/// Linear combination of fields.
#[derive(Clone, Default)]
pub struct Combination<'a> {
    pub terms: Vec<(f64, &'a dyn VelocityField)>,
}

impl<'a> Combination<'a> {
    pub fn new(terms: Vec<(f64, &'a dyn VelocityField)>) -> Self {
        Self { terms }
    }
}

impl VelocityField for Combination<'_> {
    fn velocity(&self, p: Vec2) -> Vec2 {
        self.terms.iter().fold(Vec2::zeros(), |acc, (a, f)| acc + *a * f.velocity(p))
    }
    fn gradient(&self, p: Vec2) -> Mat2 {
        self.terms.iter().fold(Mat2::zeros(), |acc, (a, f)| acc + *a * f.gradient(p))
    }
    fn laplacian(&self, p: Vec2) -> Vec2 {
        self.terms.iter().fold(Vec2::zeros(), |acc, (a, f)| acc + *a * f.laplacian(p))
    }
}

/// Free blobs in the fluid plus circulation bound to the body.
#[derive(Clone, Debug, PartialEq)]
pub struct VortexState {
    pub positions: Vec<Vec2>,
    pub strengths: Vec<f64>,
    /// Blob radius.
    pub delta: f64,
    pub bound_circulation: f64,
    pub kernel: BlobKernel,
}

impl VortexState {
    pub fn new(positions: Vec<Vec2>, strengths: Vec<f64>, delta: f64) -> Self {
        Self { positions, strengths, delta, bound_circulation: 0.0, kernel: BlobKernel::Gaussian }
    }

    pub fn empty(delta: f64) -> Self {
        Self::new(Vec::new(), Vec::new(), delta)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_circulation(&self) -> f64 {
        self.strengths.iter().sum::<f64>() + self.bound_circulation
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.strengths.len() {
            return Err(Error::Dimension { expected: self.positions.len(), got: self.strengths.len() });
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Invalid(format!("blob radius must be positive, got {}", self.delta)));
        }
        if self.positions.iter().any(|p| !p.x.is_finite() || !p.y.is_finite())
            || self.strengths.iter().any(|g| !g.is_finite())
            || !self.bound_circulation.is_finite()
        {
            return Err(Error::Invalid("non-finite vortex data".into()));
        }
        Ok(())
    }
}

impl VelocityField for VortexState {
    fn velocity(&self, p: Vec2) -> Vec2 {
        biot_savart(self, p)
    }
    fn gradient(&self, p: Vec2) -> Mat2 {
        let d2 = self.delta * self.delta;
        self.positions.iter().zip(&self.strengths).fold(Mat2::zeros(), |acc, (x, g)| acc + *g * self.kernel.gradient(p - x, d2))
    }
    fn laplacian(&self, p: Vec2) -> Vec2 {
        let d2 = self.delta * self.delta;
        self.positions.iter().zip(&self.strengths).fold(Vec2::zeros(), |acc, (x, g)| acc + *g * self.kernel.laplacian(p - x, d2))
    }
}

/// Free-space velocity of the blobs (bound circulation excluded).
pub fn biot_savart(vortices: &VortexState, p: Vec2) -> Vec2 {
    let d2 = vortices.delta * vortices.delta;
    vortices
        .positions
        .iter()
        .zip(&vortices.strengths)
        .fold(Vec2::zeros(), |acc, (x, g)| acc + *g * vortices.kernel.velocity(p - x, d2))
}

/// A Gaussian blob held at the star centre, carrying the bound circulation.
/// Its core is small enough that its vorticity outside the body is below
/// double precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundVortex {
    pub center: Vec2,
    pub circulation: f64,
    pub delta: f64,
}

/// Blob field made tangent to the body by a source-panel correction.
#[derive(Clone, Debug)]
pub struct CompletedField {
    pub vortices: VortexState,
    pub bound: Option<BoundVortex>,
    /// Potential correction cancelling the free normal flux panel by panel.
    pub correction: Option<SigmaField>,
    /// Panel-averaged normal velocity of the free part.
    pub free_flux: Option<DVector<f64>>,
}

/// Distance from the star centre to the nearest panel.
pub fn inscribed_radius(b: &PanelBoundary) -> f64 {
    b.distance(b.star_center)
}

impl CompletedField {
    pub fn new(vortices: &VortexState, body: Option<(Arc<PanelBoundary>, Arc<NeumannSolver>)>) -> Result<Self> {
        vortices.validate()?;
        let Some((boundary, solver)) = body else {
            return Ok(Self { vortices: vortices.clone(), bound: None, correction: None, free_flux: None });
        };
        for p in &vortices.positions {
            if boundary.contains(*p) {
                return Err(Error::InsideBody { x: p.x, y: p.y });
            }
        }
        let bound = (vortices.bound_circulation != 0.0).then(|| BoundVortex {
            center: boundary.star_center,
            circulation: vortices.bound_circulation,
            delta: 0.15 * inscribed_radius(&boundary),
        });
        let mut f = Self { vortices: vortices.clone(), bound, correction: None, free_flux: None };
        let flux = f.panel_flux(&boundary);
        let strengths = solver.strengths(&(-&flux));
        f.correction = Some(SigmaField { boundary, solver, strengths });
        f.free_flux = Some(flux);
        Ok(f)
    }

    pub fn boundary(&self) -> Option<&Arc<PanelBoundary>> {
        self.correction.as_ref().map(|c| &c.boundary)
    }

    fn bound_velocity(&self, p: Vec2) -> Vec2 {
        match self.bound {
            Some(b) => b.circulation * BlobKernel::Gaussian.velocity(p - b.center, b.delta * b.delta),
            None => Vec2::zeros(),
        }
    }

    /// Blobs plus bound vortex, without the panel correction.
    pub fn free_velocity(&self, p: Vec2) -> Vec2 {
        biot_savart(&self.vortices, p) + self.bound_velocity(p)
    }

    pub fn free_gradient(&self, p: Vec2) -> Mat2 {
        let mut g = self.vortices.gradient(p);
        if let Some(b) = self.bound {
            g += b.circulation * BlobKernel::Gaussian.gradient(p - b.center, b.delta * b.delta);
        }
        g
    }

    /// Stream function of the free part.
    pub fn free_stream(&self, p: Vec2) -> f64 {
        let d2 = self.vortices.delta * self.vortices.delta;
        let mut s = 0.0;
        for (x, g) in self.vortices.positions.iter().zip(&self.vortices.strengths) {
            s += g * self.vortices.kernel.stream((p - x).norm_squared(), d2);
        }
        if let Some(b) = self.bound {
            s += b.circulation * BlobKernel::Gaussian.stream((p - b.center).norm_squared(), b.delta * b.delta);
        }
        s
    }

    /// Exact panel averages of the free normal velocity: the stream function
    /// difference across each panel. Sums to zero around the loop.
    pub fn panel_flux(&self, b: &PanelBoundary) -> DVector<f64> {
        let psi: Vec<f64> = b.endpoints.iter().map(|&p| self.free_stream(p)).collect();
        DVector::from_fn(b.len(), |i, _| (psi[i + 1] - psi[i]) / b.lengths[i])
    }

    /// Fluid-side velocity at every panel midpoint.
    pub fn midpoint_velocity(&self) -> Vec<Vec2> {
        match &self.correction {
            None => Vec::new(),
            Some(c) => c.midpoint_velocity().into_iter().zip(&c.boundary.midpoints).map(|(u, &m)| u + self.free_velocity(m)).collect(),
        }
    }

    /// Largest normal velocity at the midpoints.
    pub fn tangency_residual(&self) -> f64 {
        match &self.correction {
            None => 0.0,
            Some(c) => self
                .midpoint_velocity()
                .iter()
                .zip(&c.boundary.normals)
                .map(|(u, n)| u.dot(n).abs())
                .fold(0.0, f64::max),
        }
    }

    /// `int |free|^2` over the whole plane, pairing blob vorticity with blob
    /// stream functions. With nonzero total circulation this drops the
    /// constant logarithmic far-field term (renormalized energy).
    pub fn free_space_enstrophy_pairing(&self) -> Result<f64> {
        if self.vortices.kernel != BlobKernel::Gaussian && !self.vortices.is_empty() {
            return Err(Error::Invalid("closed-form blob energy needs the Gaussian kernel".into()));
        }
        let mut blobs: Vec<(Vec2, f64, f64)> =
            self.vortices.positions.iter().zip(&self.vortices.strengths).map(|(x, g)| (*x, *g, self.vortices.delta)).collect();
        if let Some(b) = self.bound {
            blobs.push((b.center, b.circulation, b.delta));
        }
        let mut e = 0.0;
        for (j, &(xj, gj, dj)) in blobs.iter().enumerate() {
            for &(xk, gk, dk) in &blobs[j..] {
                let c2 = dj * dj + dk * dk;
                let pair = -(c2.ln() - EULER_GAMMA + ein((xj - xk).norm_squared() / c2)) / (4.0 * PI);
                e += if xj == xk && gj == gk && dj == dk { gj * gk * pair } else { 2.0 * gj * gk * pair };
            }
        }
        Ok(e)
    }

    /// `int |free|^2` over the fluid. Closed form minus the body interior for
    /// Gaussian blobs; area quadrature over the truncated fluid otherwise.
    pub fn free_energy_in_fluid(&self, opts: &Cubature) -> Result<f64> {
        let sq = |p: Vec2| vec![self.free_velocity(p).norm_squared()];
        if self.vortices.kernel == BlobKernel::Gaussian || self.vortices.is_empty() {
            let mut e = self.free_space_enstrophy_pairing()?;
            if let Some(b) = self.boundary() {
                e -= quad::integrate(&quad::interior_patches(b), 1, opts, &sq)?.value[0];
            }
            return Ok(e);
        }
        let patches = match self.boundary() {
            Some(b) => quad::fluid_patches(b, quad::truncation_radius(b))?,
            None => {
                let n = self.vortices.len() as f64;
                let c = self.vortices.positions.iter().fold(Vec2::zeros(), |a, p| a + p) / n;
                let spread = self.vortices.positions.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
                let r = spread + 10.0 * self.vortices.delta;
                quad::annulus_patches(c, 0.0, 50.0 * r, 8, Grading::Exponential(r))
            }
        };
        Ok(quad::integrate(&patches, 1, opts, &sq)?.value[0])
    }

    /// Kinetic energy of `sigma + self` over the fluid:
    /// `-1/2 ∮ Phi dPhi/dn - ∮ Phi free.n + 1/2 int_fluid |free|^2`, where
    /// `Phi` is the total panel potential (connection plus correction).
    pub fn energy_with(&self, sigma: &SigmaField) -> Result<f64> {
        self.energy_with_opts(sigma, &energy_cubature())
    }

    pub fn energy_with_opts(&self, sigma: &SigmaField, opts: &Cubature) -> Result<f64> {
        let free = 0.5 * self.free_energy_in_fluid(opts)?;
        let Some(c) = &self.correction else {
            return Ok(sigma.kinetic_energy() + free);
        };
        let b = &c.boundary;
        let s = &sigma.strengths + &c.strengths;
        let phi = &c.solver.potential * &s;
        let un = &c.solver.normal * &s;
        let flux = self.free_flux.as_ref().expect("flux is set with the correction");
        let mut e = 0.0;
        for i in 0..b.len() {
            e += phi[i] * (-0.5 * un[i] - flux[i]) * b.lengths[i];
        }
        Ok(e + free)
    }
}

/// Tolerances for the body-interior part of the blob energy.
pub fn energy_cubature() -> Cubature {
    Cubature { abs_tol: 1e-13, rel_tol: 1e-11, max_evals: 2_000_000, initial: [1, 2] }
}

impl VelocityField for CompletedField {
    fn velocity(&self, p: Vec2) -> Vec2 {
        let mut u = self.free_velocity(p);
        if let Some(c) = &self.correction {
            u += c.velocity(p);
        }
        u
    }
    fn gradient(&self, p: Vec2) -> Mat2 {
        let mut g = self.free_gradient(p);
        if let Some(c) = &self.correction {
            g += c.gradient(p);
        }
        g
    }
    fn laplacian(&self, p: Vec2) -> Vec2 {
        // Panels and the bound core (outside the body) are harmonic.
        self.vortices.laplacian(p)
    }
}

/// Boundary-corrected field of `vortices` around `boundary`.
pub fn complete_vertical(vortices: &VortexState, boundary: &PanelBoundary) -> Result<CompletedField> {
    let solver = Arc::new(NeumannSolver::new(boundary)?);
    CompletedField::new(vortices, Some((Arc::new(boundary.clone()), solver)))
}

/// Loop integral of `field` along the closed polygon `loop_pts`.
///
/// Each edge is split into pieces no longer than `spacing` and integrated
/// with 16-point Gauss-Legendre. With a body, the loop must stay outside it.
pub fn circulation(field: &dyn VelocityField, loop_pts: &[Vec2], body: Option<&PanelBoundary>, spacing: f64) -> Result<f64> {
    if loop_pts.len() < 3 {
        return Err(Error::Invalid("a loop needs at least three vertices".into()));
    }
    if let Some(b) = body {
        for k in 0..loop_pts.len() {
            let a = loop_pts[k];
            let c = loop_pts[(k + 1) % loop_pts.len()];
            if b.contains(a) || segment_hits_polygon(a, c, b) {
                return Err(Error::InsideBody { x: a.x, y: a.y });
            }
        }
    }
    let mut total = 0.0;
    for k in 0..loop_pts.len() {
        let a = loop_pts[k];
        let c = loop_pts[(k + 1) % loop_pts.len()];
        let len = (c - a).norm();
        if len == 0.0 {
            continue;
        }
        let t = (c - a) / len;
        let pieces = (len / spacing).ceil().max(1.0) as usize;
        total += quad::segment_integral(a, c, pieces, 16, |p| field.velocity(p).dot(&t));
    }
    Ok(total)
}

fn segment_hits_polygon(a: Vec2, c: Vec2, b: &PanelBoundary) -> bool {
    use crate::bodies::cross;
    (0..b.len()).any(|i| {
        let p = b.endpoints[i];
        let q = b.endpoints[i + 1];
        let d1 = cross(c - a, p - a);
        let d2 = cross(c - a, q - a);
        let d3 = cross(q - p, a - p);
        let d4 = cross(q - p, c - p);
        d1 * d2 <= 0.0 && d3 * d4 <= 0.0
    })
}

/// Polygon offset `distance` into the fluid, vertex by vertex along the
/// averaged normals of the two adjacent panels.
pub fn offset_loop(b: &PanelBoundary, distance: f64) -> Vec<Vec2> {
    let n = b.len();
    (0..n)
        .map(|k| {
            let m = b.normals[(k + n - 1) % n] + b.normals[k];
            b.endpoints[k] + distance * m / m.norm()
        })
        .collect()
}

/// Circulation on a loop one and a half panel lengths outside the body.
pub fn boundary_circulation(field: &dyn VelocityField, b: &PanelBoundary) -> Result<f64> {
    let h = b.mean_length();
    circulation(field, &offset_loop(b, 1.5 * h), None, h)
}

/// Reduced state: body chart, body coordinates and vortices at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct LPState {
    pub chart: BodyChart,
    pub coords: BodyCoords,
    pub vortices: VortexState,
    pub time: f64,
}

/// `u - sigma(q, qdot)` for a total field `u` compatible with the body motion.
pub struct Decomposition<'a> {
    pub qdot: DVector<f64>,
    pub sigma: SigmaField,
    pub total: &'a dyn VelocityField,
}

impl VelocityField for Decomposition<'_> {
    fn velocity(&self, p: Vec2) -> Vec2 {
        self.total.velocity(p) - self.sigma.velocity(p)
    }
    fn gradient(&self, p: Vec2) -> Mat2 {
        self.total.gradient(p) - self.sigma.gradient(p)
    }
    fn laplacian(&self, p: Vec2) -> Vec2 {
        self.total.laplacian(p)
    }
}

impl Decomposition<'_> {
    /// Inverse map: `sigma + xi`.
    pub fn recompose(&self, p: Vec2) -> Vec2 {
        self.sigma.velocity(p) + self.velocity(p)
    }

    /// Largest normal component of the vertical part at the midpoints.
    pub fn tangency_residual(&self) -> f64 {
        let b = &self.sigma.boundary;
        let us = self.sigma.midpoint_velocity();
        (0..b.len())
            .map(|i| (b.mean_normal_velocity(i, &|p| self.total.velocity(p)) - us[i].dot(&b.normals[i])).abs())
            .fold(0.0, f64::max)
    }
}

/// Splits `u` into the body velocity `qdot` and the vertical field
/// `u - sigma(q, qdot)`, after checking no-penetration on the fluid side of
/// every midpoint.
pub fn hodge_decompose<'a>(
    chart: &BodyChart,
    coords: &BodyCoords,
    u: &'a dyn VelocityField,
    n_panels: usize,
) -> Result<Decomposition<'a>> {
    chart.check(coords)?;
    let placement = Placement::new(chart, &coords.q, n_panels)?;
    let sigma = placement.sigma(&coords.qdot);
    let b = &placement.boundary;
    let mut residual: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for i in 0..b.len() {
        let body = chart.point_velocity(coords, b.part[i], b.midpoints[i]).dot(&b.normals[i]);
        let fluid = b.mean_normal_velocity(i, &|p| u.velocity(p));
        residual = residual.max((fluid - body).abs());
        scale = scale.max(body.abs());
    }
    if residual > 1e-3 * scale {
        return Err(Error::NoPenetration { residual });
    }
    Ok(Decomposition { qdot: coords.qdot.clone(), sigma, total: u })
}
