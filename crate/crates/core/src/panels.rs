//! Constant-strength source panels and the exterior Neumann solve.
//!
//! A panel of unit strength per length from `a` to `b` induces, at local
//! coordinates `(s, e)` along and to the left of the panel,
//!   `u_s = ln(r_a / r_b) / 2pi`, `u_e = beta / 2pi`,
//! where `beta` is the signed angle subtended by the panel. The normal
//! velocity jumps by the strength across the panel. Boundaries are ordered
//! counter-clockwise, so the fluid lies to the right of every panel and the
//! outward normal (into the fluid) is the right-hand normal.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::bodies::{cross, embed_boundary, BodyChart, BodyCoords, Mat2, Vec2};
use crate::fields::{CompletedField, VelocityField, VortexState};
use crate::quad::{self, Cubature};
use crate::{Error, Result};

const INV_2PI: f64 = 0.5 / PI;

/// Closed polygonal body outline.
#[derive(Clone, Debug)]
pub struct PanelBoundary {
    /// `n + 1` points; the last repeats the first.
    pub endpoints: Vec<Vec2>,
    pub midpoints: Vec<Vec2>,
    /// Unit normals pointing into the fluid.
    pub normals: Vec<Vec2>,
    pub tangents: Vec<Vec2>,
    pub lengths: Vec<f64>,
    /// Arc-length position of each panel midpoint on the reference outline.
    pub material_arc: Vec<f64>,
    /// Rigid part carrying each panel.
    pub part: Vec<usize>,
    pub star_center: Vec2,
    diameter: f64,
}

impl PanelBoundary {
    /// Builds panels from counter-clockwise vertices (not repeated at the end).
    pub fn from_vertices(verts: &[Vec2], part: Vec<usize>, material_arc: Vec<f64>, star_center: Vec2) -> Result<Self> {
        let n = verts.len();
        if n < 3 || part.len() != n || material_arc.len() != n {
            return Err(Error::Invalid("a boundary needs at least three panels".into()));
        }
        let mut endpoints = verts.to_vec();
        endpoints.push(verts[0]);
        let mut midpoints = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let mut tangents = Vec::with_capacity(n);
        let mut lengths = Vec::with_capacity(n);
        for i in 0..n {
            let d = endpoints[i + 1] - endpoints[i];
            let len = d.norm();
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::Invalid(format!("degenerate panel {i}")));
            }
            let t = d / len;
            midpoints.push(0.5 * (endpoints[i] + endpoints[i + 1]));
            tangents.push(t);
            normals.push(Vec2::new(t.y, -t.x));
            lengths.push(len);
        }
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                diameter = diameter.max((verts[i] - verts[j]).norm());
            }
        }
        let b = Self { endpoints, midpoints, normals, tangents, lengths, material_arc, part, star_center, diameter };
        if !(b.area() > 0.0) {
            return Err(Error::Invalid("boundary is not counter-clockwise".into()));
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn mean_length(&self) -> f64 {
        self.perimeter() / self.len() as f64
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let mut a = 0.0;
        for i in 0..self.len() {
            a += cross(self.endpoints[i], self.endpoints[i + 1]);
        }
        0.5 * a
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut inside = false;
        for i in 0..self.len() {
            let a = self.endpoints[i];
            let b = self.endpoints[i + 1];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polygon.
    pub fn distance(&self, p: Vec2) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..self.len() {
            let a = self.endpoints[i];
            let s = ((p - a).dot(&self.tangents[i])).clamp(0.0, self.lengths[i]);
            d = d.min((p - (a + s * self.tangents[i])).norm());
        }
        d
    }

    /// Signed distance: negative inside the body.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        let d = self.distance(p);
        if self.contains(p) {
            -d
        } else {
            d
        }
    }

    pub fn self_intersects(&self) -> bool {
        let n = self.len();
        // Proper crossings only: collinear panels of one straight side give
        // orientation values at roundoff level with arbitrary signs.
        let hit = |a: Vec2, b: Vec2, c: Vec2, d: Vec2| {
            let tol = 1e-10 * (b - a).norm() * (d - c).norm();
            let opposite = |x: f64, y: f64| (x > tol && y < -tol) || (x < -tol && y > tol);
            opposite(cross(b - a, c - a), cross(b - a, d - a)) && opposite(cross(d - c, a - c), cross(d - c, b - c))
        };
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if hit(self.endpoints[i], self.endpoints[i + 1], self.endpoints[j], self.endpoints[j + 1]) {
                    return true;
                }
            }
        }
        false
    }

    /// `(potential, velocity)` at `p` of panel `j` with unit strength.
    #[inline]
    pub fn panel_influence(&self, j: usize, p: Vec2) -> (f64, Vec2) {
        let a = self.endpoints[j];
        let t = self.tangents[j];
        let l = self.lengths[j];
        let d = p - a;
        let s = d.dot(&t);
        let e = cross(t, d);
        let r0 = d.norm_squared();
        let sl = s - l;
        let r1 = sl * sl + e * e;
        let beta = (e * l).atan2(s * sl + e * e);
        let lr0 = 0.5 * r0.ln();
        let lr1 = 0.5 * r1.ln();
        let us = INV_2PI * (lr0 - lr1);
        let ue = INV_2PI * beta;
        let phi = INV_2PI * ((l - s) * lr1 + s * lr0 - l + e * beta);
        (phi, us * t + ue * Vec2::new(-t.y, t.x))
    }

    /// Potential at `p` of panel `j` with unit strength; finite on the panel
    /// and at its ends.
    pub fn panel_potential(&self, j: usize, p: Vec2) -> f64 {
        let a = self.endpoints[j];
        let t = self.tangents[j];
        let l = self.lengths[j];
        let d = p - a;
        let s = d.dot(&t);
        let e = cross(t, d);
        let sl = s - l;
        let r0 = d.norm_squared();
        let r1 = sl * sl + e * e;
        let xlog = |x: f64, r2: f64| if x == 0.0 || r2 == 0.0 { 0.0 } else { 0.5 * x * r2.ln() };
        let beta = if e == 0.0 { 0.0 } else { e * (e * l).atan2(s * sl + e * e) };
        INV_2PI * (xlog(l - s, r1) + xlog(s, r0) - l + beta)
    }

    /// Flux of panel `j` (unit strength) through panel `i` towards the fluid.
    ///
    /// A point source at `y` sends `theta / 2pi` through a segment that
    /// subtends the angle `theta` at `y`, so the flux is the panel integral of
    /// the subtended angle. In the frame of panel `j` the integral of
    /// `atan2(e, s - s')` over `s'` has a closed form; the branch cut of
    /// `atan2` runs backwards along the panel line, and a correction of
    /// `2pi` applies on the part of panel `j` whose cut segment `i` crosses.
    pub fn panel_flux(&self, j: usize, i: usize) -> f64 {
        let l = self.lengths[j];
        if i == j {
            return 0.5 * l;
        }
        let a = self.endpoints[j];
        let t = self.tangents[j];
        let local = |p: Vec2| {
            let d = p - a;
            let e = cross(t, d);
            // +0 keeps points on the panel line on the upper side of the cut
            (d.dot(&t), if e == 0.0 { 0.0 } else { e })
        };
        // Shared vertices are exact copies, so adjacency is detected by bits.
        let snap = |p: Vec2, (s, e): (f64, f64)| {
            if p == self.endpoints[j] {
                (0.0, 0.0)
            } else if p == self.endpoints[j + 1] {
                (l, 0.0)
            } else {
                (s, e)
            }
        };
        let (pa, pb) = (self.endpoints[i], self.endpoints[i + 1]);
        let (sa, ea) = snap(pa, local(pa));
        let (sb, eb) = snap(pb, local(pb));
        let prim = |u: f64, e: f64| {
            let ang = if u == 0.0 { 0.0 } else { u * e.atan2(u) };
            let log = if e == 0.0 { 0.0 } else { 0.5 * e * (u * u + e * e).ln() };
            ang + log
        };
        let integral = |s: f64, e: f64| prim(s, e) - prim(s - l, e);
        let mut f = INV_2PI * (integral(sb, eb) - integral(sa, ea));
        let (upper_a, upper_b) = (ea >= 0.0, eb >= 0.0);
        if upper_a != upper_b {
            let sc = if eb == 0.0 { sb } else if ea == 0.0 { sa } else { sa + (sb - sa) * ea / (ea - eb) };
            let span = (l - sc.max(0.0)).clamp(0.0, l);
            f -= if upper_b { span } else { -span };
        }
        f
    }

    /// Velocity at `p` of panel `j` with unit strength.
    #[inline]
    pub fn panel_velocity(&self, j: usize, p: Vec2) -> Vec2 {
        let a = self.endpoints[j];
        let t = self.tangents[j];
        let l = self.lengths[j];
        let d = p - a;
        let s = d.dot(&t);
        let e = cross(t, d);
        let sl = s - l;
        let r0 = d.norm_squared();
        let r1 = sl * sl + e * e;
        let beta = (e * l).atan2(s * sl + e * e);
        let us = INV_2PI * 0.5 * (r0 / r1).ln();
        let ue = INV_2PI * beta;
        Vec2::new(us * t.x - ue * t.y, us * t.y + ue * t.x)
    }

    /// Velocity gradient `J[i][k] = d u_i / d x_k` at `p` of panel `j`.
    #[inline]
    pub fn panel_gradient(&self, j: usize, p: Vec2) -> Mat2 {
        // Complex velocity derivative: conj(t) (1/(z - a) - 1/(z - b)) / 2pi.
        let a = p - self.endpoints[j];
        let b = p - self.endpoints[j + 1];
        let ia = a / a.norm_squared();
        let ib = b / b.norm_squared();
        // 1/z = conj(z)/|z|^2 -> (x, -y)/|z|^2
        let (dre, dim) = (ia.x - ib.x, -(ia.y - ib.y));
        let t = self.tangents[j];
        let re = INV_2PI * (t.x * dre + t.y * dim);
        let im = INV_2PI * (t.x * dim - t.y * dre);
        Mat2::new(re, -im, -im, -re)
    }

    /// Velocities, and optionally gradients, at `p` of several strength
    /// vectors in a single pass over the panels.
    pub fn eval_multi(&self, strengths: &[&DVector<f64>], p: Vec2, vel: &mut [Vec2], mut grad: Option<&mut [Mat2]>) {
        for v in vel.iter_mut() {
            *v = Vec2::zeros();
        }
        if let Some(g) = grad.as_deref_mut() {
            for m in g.iter_mut() {
                *m = Mat2::zeros();
            }
        }
        for j in 0..self.len() {
            let u = self.panel_velocity(j, p);
            let g = grad.as_ref().map(|_| self.panel_gradient(j, p));
            for (k, s) in strengths.iter().enumerate() {
                let sj = s[j];
                vel[k] += sj * u;
                if let (Some(gr), Some(g)) = (grad.as_deref_mut(), g.as_ref()) {
                    gr[k] += sj * g;
                }
            }
        }
    }

    /// Mean over panel `i` of the fluid-side normal component of `u`.
    /// Flat panels meet the boundary condition in flux; pointwise values
    /// wiggle at O(h) near the vertices.
    pub fn mean_normal_velocity(&self, i: usize, u: &dyn Fn(Vec2) -> Vec2) -> f64 {
        let (gx, gw) = quad::gauss_legendre(8);
        let eps = 1e-9 * self.perimeter();
        let (a, b) = (self.endpoints[i], self.endpoints[i + 1]);
        let n = self.normals[i];
        gx.iter().zip(&gw).map(|(x, w)| 0.5 * w * u(a + 0.5 * (1.0 + x) * (b - a) + eps * n).dot(&n)).sum()
    }

    pub(crate) fn check_outside(&self, p: Vec2) -> Result<()> {
        if self.contains(p) || self.distance(p) <= 1e-6 * self.perimeter() {
            return Err(Error::InsideBody { x: p.x, y: p.y });
        }
        Ok(())
    }
}

/// Influence matrices of a boundary and the bordered factorisation that
/// fixes the zero-net-flux gauge. Matrix entries are invariant under rigid
/// motions of the boundary.
#[derive(Debug)]
pub struct NeumannSolver {
    n: usize,
    /// Mean normal velocity over panel `i` (fluid side) due to panel `j`.
    /// The solve matches these panel fluxes: flat panels collocated at
    /// midpoints miss the curvature part of the self-influence and converge
    /// only at first order, while flux matching is second order.
    pub normal: DMatrix<f64>,
    /// Mean tangential velocity over panel `i` due to panel `j`: the
    /// potential difference across the panel over its length. Pointwise
    /// midpoint values carry an O(h) error from the neighbouring vertices.
    pub tangential: DMatrix<f64>,
    /// Potential at midpoint `i` due to panel `j`.
    pub potential: DMatrix<f64>,
    lengths: DVector<f64>,
    perimeter: f64,
    /// Leading block of the inverse of `[A 1; L^T 0]`.
    inverse: DMatrix<f64>,
    /// Potential at midpoints per unit Neumann data.
    response: OnceLock<DMatrix<f64>>,
}

impl NeumannSolver {
    pub fn new(b: &PanelBoundary) -> Result<Self> {
        let n = b.len();
        let mut normal = DMatrix::zeros(n, n);
        let mut potential = DMatrix::zeros(n, n);
        let mut vertex = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                normal[(i, j)] = b.panel_flux(j, i) / b.lengths[i];
                potential[(i, j)] = b.panel_potential(j, b.midpoints[i]);
                vertex[(i, j)] = b.panel_potential(j, b.endpoints[i]);
            }
        }
        let mut tangential = DMatrix::zeros(n, n);
        for i in 0..n {
            let next = (i + 1) % n;
            for j in 0..n {
                tangential[(i, j)] = (vertex[(next, j)] - vertex[(i, j)]) / b.lengths[i];
            }
        }
        let mut bordered = DMatrix::zeros(n + 1, n + 1);
        bordered.view_mut((0, 0), (n, n)).copy_from(&normal);
        for i in 0..n {
            bordered[(i, n)] = 1.0;
            bordered[(n, i)] = b.lengths[i];
        }
        let lu = bordered.lu();
        let u = lu.u();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..=n {
            lo = lo.min(u[(i, i)].abs());
            hi = hi.max(u[(i, i)].abs());
        }
        if !(lo > 1e-12 * hi) {
            return Err(Error::Singular);
        }
        let inv = lu.try_inverse().ok_or(Error::Singular)?;
        let lengths = DVector::from_column_slice(&b.lengths);
        Ok(Self {
            n,
            normal,
            tangential,
            potential,
            perimeter: lengths.sum(),
            lengths,
            inverse: inv.view((0, 0), (n, n)).into_owned(),
            response: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn check_compatible(&self, data: &DVector<f64>) -> Result<()> {
        self.check_compatible_scaled(data, 0.0)
    }

    /// Compatibility relative to `max(max|data|, scale)`; `scale` is the size
    /// of the full body velocity, whose normal part may vanish to roundoff.
    pub fn check_compatible_scaled(&self, data: &DVector<f64>, scale: f64) -> Result<()> {
        let flux = data.dot(&self.lengths);
        let limit = 1e-8 * self.perimeter * data.amax().max(scale);
        if flux.abs() > limit && limit > 0.0 || (limit == 0.0 && flux != 0.0) {
            return Err(Error::IncompatibleFlux { flux, limit });
        }
        Ok(())
    }

    /// Strengths for panel-mean normal-velocity data.
    pub fn solve(&self, data: &DVector<f64>) -> Result<DVector<f64>> {
        if data.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: data.len() });
        }
        self.check_compatible(data)?;
        Ok(self.strengths(data))
    }

    /// Strengths without the compatibility check.
    pub fn strengths(&self, data: &DVector<f64>) -> DVector<f64> {
        &self.inverse * data
    }

    /// Midpoint potential per unit Neumann data: `P A^-1` in the zero-flux gauge.
    pub fn response(&self) -> &DMatrix<f64> {
        self.response.get_or_init(|| &self.potential * &self.inverse)
    }
}

fn solver_cache() -> &'static Mutex<HashMap<String, Arc<NeumannSolver>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<NeumannSolver>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Solver for the canonical placement of `chart` at `q`. Built
/// deterministically from the canonical boundary, so cache hits and misses
/// give identical results.
pub fn canonical_solver(chart: &BodyChart, q: &DVector<f64>, n_panels: usize) -> Result<Arc<NeumannSolver>> {
    let (canon, _) = chart.canonical(q);
    let bits: Vec<u64> = canon.iter().map(|v| v.to_bits()).collect();
    let key = format!("{chart:?}|{bits:?}|{n_panels}");
    if let Some(s) = solver_cache().lock().unwrap().get(&key) {
        return Ok(s.clone());
    }
    let b = embed_boundary(chart, &canon, n_panels)?;
    let s = Arc::new(NeumannSolver::new(&b)?);
    let mut cache = solver_cache().lock().unwrap();
    if cache.len() > 64 {
        cache.clear();
    }
    cache.insert(key, s.clone());
    Ok(s)
}

/// Body placed at `q` with its solver and the Neumann data and strengths of
/// every chart direction.
#[derive(Clone, Debug)]
pub struct Placement {
    pub chart: BodyChart,
    pub q: DVector<f64>,
    pub boundary: Arc<PanelBoundary>,
    pub solver: Arc<NeumannSolver>,
    /// Normal body velocity at midpoints for unit velocity along each coordinate.
    pub basis_data: Vec<DVector<f64>>,
    pub basis: Vec<DVector<f64>>,
}

impl Placement {
    pub fn new(chart: &BodyChart, q: &DVector<f64>, n_panels: usize) -> Result<Self> {
        let boundary = Arc::new(embed_boundary(chart, q, n_panels)?);
        let solver = canonical_solver(chart, q, n_panels)?;
        let mut basis_data = Vec::with_capacity(chart.dim());
        let mut basis = Vec::with_capacity(chart.dim());
        for j in 0..chart.dim() {
            let mut scale: f64 = 0.0;
            let data = DVector::from_iterator(
                boundary.len(),
                (0..boundary.len()).map(|i| {
                    let v = chart.basis_velocity(q, boundary.part[i], j, boundary.midpoints[i]);
                    scale = scale.max(v.norm());
                    v.dot(&boundary.normals[i])
                }),
            );
            solver.check_compatible_scaled(&data, scale)?;
            basis.push(solver.strengths(&data));
            basis_data.push(data);
        }
        Ok(Self { chart: chart.clone(), q: q.clone(), boundary, solver, basis_data, basis })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Strengths of `sigma(q, qdot)`.
    pub fn sigma_strengths(&self, qdot: &DVector<f64>) -> DVector<f64> {
        let mut s = DVector::zeros(self.boundary.len());
        for (j, b) in self.basis.iter().enumerate() {
            if qdot[j] != 0.0 {
                s.axpy(qdot[j], b, 1.0);
            }
        }
        s
    }

    pub fn sigma(&self, qdot: &DVector<f64>) -> SigmaField {
        self.field(self.sigma_strengths(qdot))
    }

    pub fn field(&self, strengths: DVector<f64>) -> SigmaField {
        SigmaField { boundary: self.boundary.clone(), solver: self.solver.clone(), strengths }
    }

    /// Added mass from the boundary energy pairing `-∮ Phi_k (dPhi_j/dn) ds`.
    pub fn added_mass(&self) -> DMatrix<f64> {
        let d = self.dim();
        let b = &self.boundary;
        let pots: Vec<DVector<f64>> = self.basis.iter().map(|s| &self.solver.potential * s).collect();
        DMatrix::from_fn(d, d, |j, k| {
            -(0..b.len()).map(|i| pots[k][i] * self.basis_data[j][i] * b.lengths[i]).sum::<f64>()
        })
    }

    pub fn inside(&self, p: Vec2) -> bool {
        self.boundary.contains(p)
    }
}

/// Potential flow of a source-panel distribution.
#[derive(Clone, Debug)]
pub struct SigmaField {
    pub boundary: Arc<PanelBoundary>,
    pub solver: Arc<NeumannSolver>,
    pub strengths: DVector<f64>,
}

impl SigmaField {
    pub fn velocity(&self, p: Vec2) -> Vec2 {
        let mut v = Vec2::zeros();
        for j in 0..self.boundary.len() {
            let s = self.strengths[j];
            if s != 0.0 {
                v += s * self.boundary.panel_velocity(j, p);
            }
        }
        v
    }

    pub fn potential(&self, p: Vec2) -> f64 {
        (0..self.boundary.len()).map(|j| self.strengths[j] * self.boundary.panel_influence(j, p).0).sum()
    }

    pub fn gradient(&self, p: Vec2) -> Mat2 {
        let mut g = Mat2::zeros();
        for j in 0..self.boundary.len() {
            let s = self.strengths[j];
            if s != 0.0 {
                g += s * self.boundary.panel_gradient(j, p);
            }
        }
        g
    }

    /// Panel-mean fluid-side velocity, attributed to each midpoint.
    pub fn midpoint_velocity(&self) -> Vec<Vec2> {
        let un = &self.solver.normal * &self.strengths;
        let ut = &self.solver.tangential * &self.strengths;
        (0..self.boundary.len()).map(|i| un[i] * self.boundary.normals[i] + ut[i] * self.boundary.tangents[i]).collect()
    }

    pub fn midpoint_potential(&self) -> DVector<f64> {
        &self.solver.potential * &self.strengths
    }

    /// `½∫|∇Φ|²` over the fluid, as `-½∮ Φ ∂Φ/∂n ds` by the midpoint rule.
    pub fn kinetic_energy(&self) -> f64 {
        let phi = self.midpoint_potential();
        let un = &self.solver.normal * &self.strengths;
        -0.5 * (0..self.boundary.len()).map(|i| phi[i] * un[i] * self.boundary.lengths[i]).sum::<f64>()
    }
}

/// Exterior Neumann solve on an arbitrary boundary.
pub fn solve_neumann(boundary: &PanelBoundary, normal_data: &[f64]) -> Result<SigmaField> {
    let solver = Arc::new(NeumannSolver::new(boundary)?);
    let strengths = solver.solve(&DVector::from_column_slice(normal_data))?;
    Ok(SigmaField { boundary: Arc::new(boundary.clone()), solver, strengths })
}

/// `sigma(q, qdot)`: embed, take the body's normal velocity, solve.
pub fn sigma(chart: &BodyChart, coords: &BodyCoords, n_panels: usize) -> Result<SigmaField> {
    chart.check(coords)?;
    Ok(Placement::new(chart, &coords.q, n_panels)?.sigma(&coords.qdot))
}

/// Velocities at points strictly outside the body.
pub fn eval_velocity(field: &SigmaField, points: &[Vec2]) -> Result<Vec<Vec2>> {
    points
        .iter()
        .map(|&p| {
            field.boundary.check_outside(p)?;
            Ok(field.velocity(p))
        })
        .collect()
}

/// Kinetic energy of `sigma + completed vortex field`.
///
/// The potential part uses the boundary pairing. With vortices the energy
/// is assembled from Green's identities on the boundary plus the closed-form
/// blob interaction energy (Gaussian blobs), or by adaptive area quadrature
/// over the truncated fluid domain when `quadrature` is given.
pub fn fluid_kinetic_energy(
    sigma: &SigmaField,
    vortices: &VortexState,
    quadrature: Option<&Cubature>,
) -> Result<f64> {
    if vortices.is_empty() && vortices.bound_circulation == 0.0 {
        return Ok(sigma.kinetic_energy());
    }
    let completed = CompletedField::new(vortices, Some((sigma.boundary.clone(), sigma.solver.clone())))?;
    match quadrature {
        None => completed.energy_with(sigma),
        Some(opts) => {
            let r_max = quad::truncation_radius(&sigma.boundary);
            let patches = quad::fluid_patches(&sigma.boundary, r_max)?;
            let res = quad::integrate(&patches, 1, opts, &|p: Vec2| {
                let u = sigma.velocity(p) + completed.velocity(p);
                vec![0.5 * u.norm_squared()]
            })?;
            Ok(res.value[0])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc() -> BodyChart {
        BodyChart::RigidDisc { radius: 1.0, mass: None, inertia: None }
    }

    #[test]
    fn single_panel_jump_equals_strength() {
        let verts = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.5, 1.0)];
        let b = PanelBoundary::from_vertices(&verts, vec![0; 3], vec![0.0; 3], Vec2::new(0.5, 0.3)).unwrap();
        let n = b.normals[0];
        let m = b.midpoints[0];
        let eps = 1e-9;
        let jump = (b.panel_velocity(0, m + eps * n) - b.panel_velocity(0, m - eps * n)).dot(&n);
        assert!((jump - 1.0).abs() < 1e-7);
    }

    #[test]
    fn panel_gradient_matches_differences() {
        let verts = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.2), Vec2::new(0.5, 1.0)];
        let b = PanelBoundary::from_vertices(&verts, vec![0; 3], vec![0.0; 3], Vec2::new(0.5, 0.3)).unwrap();
        let p = Vec2::new(0.3, -0.7);
        let h = 1e-6;
        let g = b.panel_gradient(0, p);
        for k in 0..2 {
            let mut e = Vec2::zeros();
            e[k] = h;
            let fd = (b.panel_velocity(0, p + e) - b.panel_velocity(0, p - e)) / (2.0 * h);
            for i in 0..2 {
                assert!((g[(i, k)] - fd[i]).abs() < 1e-8);
            }
            let fdp = (b.panel_influence(0, p + e).0 - b.panel_influence(0, p - e).0) / (2.0 * h);
            assert!((fdp - b.panel_velocity(0, p)[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn disc_translation_dipole() {
        let c = BodyCoords::new(&[0.0; 3], &[0.0, 1.0, 0.0]);
        let f = sigma(&disc(), &c, 256).unwrap();
        let v = eval_velocity(&f, &[Vec2::new(2.0, 0.0), Vec2::new(0.0, 2.0)]).unwrap();
        assert!((v[0] - Vec2::new(0.25, 0.0)).norm() < 2e-3, "{:?}", v[0]);
        assert!((v[1] - Vec2::new(-0.25, 0.0)).norm() < 2e-3, "{:?}", v[1]);
        let ke = f.kinetic_energy();
        assert!((ke - PI / 2.0).abs() / (PI / 2.0) < 1e-2, "{ke}");
        let res = f
            .midpoint_velocity()
            .iter()
            .zip(&f.boundary.normals)
            .map(|(u, n)| (u.dot(n) - n.x).abs())
            .fold(0.0, f64::max);
        assert!(res < 1e-3, "{res}");
    }

    #[test]
    fn zero_data_zero_field() {
        let b = embed_boundary(&disc(), &DVector::zeros(3), 32).unwrap();
        let f = solve_neumann(&b, &[0.0; 32]).unwrap();
        assert!(f.strengths.iter().all(|&s| s == 0.0));
        assert_eq!(f.velocity(Vec2::new(3.0, 1.0)), Vec2::zeros());
    }

    #[test]
    fn incompatible_data_rejected() {
        let b = embed_boundary(&disc(), &DVector::zeros(3), 32).unwrap();
        assert!(matches!(solve_neumann(&b, &[1.0; 32]), Err(Error::IncompatibleFlux { .. })));
    }

    #[test]
    fn points_inside_rejected() {
        let c = BodyCoords::new(&[0.0; 3], &[0.0, 1.0, 0.0]);
        let f = sigma(&disc(), &c, 64).unwrap();
        assert!(eval_velocity(&f, &[Vec2::new(0.2, 0.1)]).is_err());
        assert!(eval_velocity(&f, &[f.boundary.midpoints[3]]).is_err());
    }

    #[test]
    fn disc_added_mass() {
        let p = Placement::new(&disc(), &DVector::from_column_slice(&[0.3, 1.0, -2.0]), 256).unwrap();
        let m = p.added_mass();
        assert!(m[(0, 0)].abs() < 1e-3);
        for (j, k) in [(1, 1), (2, 2)] {
            assert!((m[(j, k)] - PI).abs() / PI < 1e-2);
        }
        assert!(m[(1, 2)].abs() < 1e-6 && (m[(1, 2)] - m[(2, 1)]).abs() < 1e-8);
    }

    #[test]
    fn ellipse_minor_axis_added_mass_larger() {
        let e = BodyChart::RigidEllipse { a: 2.0, b: 1.0, mass: None, inertia: None };
        let m = Placement::new(&e, &DVector::zeros(3), 256).unwrap().added_mass();
        assert!(m[(2, 2)] > m[(1, 1)]);
        assert!((m[(2, 2)] - 4.0 * PI).abs() / (4.0 * PI) < 2e-2);
        assert!((m[(1, 1)] - PI).abs() / PI < 2e-2);
    }
}
