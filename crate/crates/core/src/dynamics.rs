//! Coupled body and vortex dynamics.
//!
//! Vortices are advected by the total field `sigma(q, qdot) + xi` with their
//! strengths frozen. The body obeys its own Euler-Lagrange equation forced by
//! the boundary pressure, which is affine in the body acceleration:
//! `F_p(qddot) = F_free - M_added qddot`. The added mass is moved to the left
//! so each stage is one small linear solve.
//!
//! The curvature route to the same force is kept as an independent check
//! (`force_breakdown`), never as the integrator.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{bracket_values, MaskStats, SigmaFamily, FORCE_STEP};
use crate::bodies::{perp, BodyChart, BodyCoords, GeneralizedCovector, Mat2, Vec2};
use crate::cli::config::ScenarioConfig;
use crate::fields::{boundary_circulation, BlobKernel, CompletedField, LPState, VelocityField, VortexState};
use crate::panels::{Placement, SigmaField};
use crate::quad::{self, Cubature};
use crate::viscous::diffuse_step;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicsOptions {
    pub n_panels: usize,
    /// When false the body moves as if in vacuum; vortices still feel the body.
    pub fluid_coupling: bool,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self { n_panels: 256, fluid_coupling: true }
    }
}

/// Velocity field of a state with everything needed by the force routes.
pub struct Flow {
    pub placement: Option<Arc<Placement>>,
    /// `sigma(q, qdot)`.
    pub sigma: Option<SigmaField>,
    pub vortex: CompletedField,
    /// Total velocity at every blob centre.
    pub vortex_velocity: Vec<Vec2>,
}

impl VelocityField for Flow {
    fn velocity(&self, p: Vec2) -> Vec2 {
        let u = self.vortex.velocity(p);
        match &self.sigma {
            Some(s) => u + s.velocity(p),
            None => u,
        }
    }
    fn gradient(&self, p: Vec2) -> Mat2 {
        let g = self.vortex.gradient(p);
        match &self.sigma {
            Some(s) => g + s.gradient(p),
            None => g,
        }
    }
    fn laplacian(&self, p: Vec2) -> Vec2 {
        self.vortex.laplacian(p)
    }
}

impl Flow {
    /// Strengths of connection plus correction.
    fn panel_strengths(&self) -> Option<DVector<f64>> {
        match (&self.sigma, &self.vortex.correction) {
            (Some(s), Some(c)) => Some(&s.strengths + &c.strengths),
            _ => None,
        }
    }

    /// Fluid-side panel-field velocity at the midpoints (no free blobs).
    fn panel_midpoint_velocity(&self) -> Vec<Vec2> {
        let (Some(p), Some(s)) = (&self.placement, self.panel_strengths()) else {
            return Vec::new();
        };
        p.field(s).midpoint_velocity()
    }

    /// Largest `|(u - body velocity).n|` at the midpoints.
    pub fn bc_residual(&self, chart: &BodyChart, coords: &BodyCoords) -> f64 {
        let Some(p) = &self.placement else { return 0.0 };
        let b = &p.boundary;
        let panel = self.panel_midpoint_velocity();
        (0..b.len())
            .map(|i| {
                let u = panel[i] + self.vortex.free_velocity(b.midpoints[i]);
                (u - chart.point_velocity(coords, b.part[i], b.midpoints[i])).dot(&b.normals[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn check_state(state: &LPState) -> Result<()> {
    state.chart.validate()?;
    state.chart.check(&state.coords)?;
    state.vortices.validate()
}

/// The flow of `state`. A blob closer to the body than its radius is a
/// collision: the inviscid model is no longer meaningful there.
pub fn flow(state: &LPState, n_panels: usize) -> Result<Flow> {
    check_state(state)?;
    let v = &state.vortices;
    if !state.chart.has_body() {
        let vortex = CompletedField::new(v, None)?;
        let vortex_velocity = v.positions.iter().map(|&x| vortex.velocity(x)).collect();
        return Ok(Flow { placement: None, sigma: None, vortex, vortex_velocity });
    }
    let placement = Arc::new(Placement::new(&state.chart, &state.coords.q, n_panels)?);
    for (index, &x) in v.positions.iter().enumerate() {
        let distance = placement.boundary.signed_distance(x);
        if distance < v.delta {
            return Err(Error::Collision { index, distance, delta: v.delta });
        }
    }
    let sigma = placement.sigma(&state.coords.qdot);
    let vortex = CompletedField::new(v, Some((placement.boundary.clone(), placement.solver.clone())))?;
    let vortex_velocity = v.positions.iter().map(|&x| vortex.velocity(x) + sigma.velocity(x)).collect();
    Ok(Flow { placement: Some(placement), sigma: Some(sigma), vortex, vortex_velocity })
}

/// `F_p(qddot) = free - added_mass * qddot`.
#[derive(Clone, Debug)]
pub struct PressureSplit {
    pub free: GeneralizedCovector,
    pub added_mass: DMatrix<f64>,
}

impl PressureSplit {
    pub fn force(&self, qddot: &DVector<f64>) -> GeneralizedCovector {
        &self.free - &self.added_mass * qddot
    }
}

/// How the rate of the boundary potential is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PotentialRate {
    /// Constant response matrix times the rate of the Neumann data; rigid
    /// bodies only.
    Analytic,
    /// Central difference of the boundary potential along the motion.
    Differenced,
}

/// Time step of the differenced potential rate.
const POTENTIAL_RATE_STEP: f64 = 1e-4;

fn rigid(chart: &BodyChart) -> bool {
    matches!(chart, BodyChart::RigidDisc { .. } | BodyChart::RigidEllipse { .. })
}

/// Velocity of the star centre, which carries the bound vortex.
fn star_velocity(chart: &BodyChart, coords: &BodyCoords) -> Vec2 {
    chart.point_velocity(coords, 0, chart.star_center(&coords.q))
}

/// Rate of the free stream function at a point moving with velocity `ydot`.
fn stream_rate(vortex: &CompletedField, vel: &[Vec2], cdot: Vec2, y: Vec2, ydot: Vec2) -> f64 {
    let v = &vortex.vortices;
    let d2 = v.delta * v.delta;
    let mut r = 0.0;
    for ((x, g), xd) in v.positions.iter().zip(&v.strengths).zip(vel) {
        r += g * perp(v.kernel.velocity(y - x, d2)).dot(&(ydot - xd));
    }
    if let Some(b) = vortex.bound {
        r += b.circulation * perp(BlobKernel::Gaussian.velocity(y - b.center, b.delta * b.delta)).dot(&(ydot - cdot));
    }
    r
}

/// Midpoint potential of connection plus correction at a perturbed state.
fn boundary_potential(chart: &BodyChart, q: &DVector<f64>, qdot: &DVector<f64>, v: &VortexState, n: usize) -> Result<DVector<f64>> {
    let p = Placement::new(chart, q, n)?;
    let c = CompletedField::new(v, Some((p.boundary.clone(), p.solver.clone())))?;
    let s = p.sigma_strengths(qdot) + &c.correction.as_ref().expect("body present").strengths;
    Ok(&p.solver.potential * s)
}

fn potential_rate(state: &LPState, flow: &Flow, method: PotentialRate, n: usize) -> Result<DVector<f64>> {
    let chart = &state.chart;
    let coords = &state.coords;
    let p = flow.placement.as_ref().expect("body present");
    let b = &p.boundary;
    match method {
        PotentialRate::Analytic => {
            let w = coords.qdot[0];
            let cdot = star_velocity(chart, coords);
            let psi_rate: Vec<f64> = b
                .endpoints
                .iter()
                .map(|&y| stream_rate(&flow.vortex, &flow.vortex_velocity, cdot, y, chart.point_velocity(coords, 0, y)))
                .collect();
            let data_rate = DVector::from_fn(b.len(), |i, _| {
                let n = b.normals[i];
                w * (-coords.qdot[1] * n.y + coords.qdot[2] * n.x) - (psi_rate[i + 1] - psi_rate[i]) / b.lengths[i]
            });
            Ok(p.solver.response() * data_rate)
        }
        PotentialRate::Differenced => {
            let h = POTENTIAL_RATE_STEP;
            let shifted = |s: f64| -> Result<DVector<f64>> {
                let q = &coords.q + s * &coords.qdot;
                let mut v = state.vortices.clone();
                for (x, u) in v.positions.iter_mut().zip(&flow.vortex_velocity) {
                    *x += s * u;
                }
                boundary_potential(chart, &q, &coords.qdot, &v, n)
            };
            Ok((shifted(h)? - shifted(-h)?) / (2.0 * h))
        }
    }
}

fn pressure_split_with(state: &LPState, flow: &Flow, method: PotentialRate, n: usize) -> Result<PressureSplit> {
    let dim = state.chart.dim();
    let Some(p) = &flow.placement else {
        return Ok(PressureSplit { free: DVector::zeros(dim), added_mass: DMatrix::zeros(dim, dim) });
    };
    let b = &p.boundary;
    let coords = &state.coords;
    let phi_rate = potential_rate(state, flow, method, n)?;
    let panel = flow.panel_midpoint_velocity();
    let v = &state.vortices;
    let d2 = v.delta * v.delta;
    let cdot = star_velocity(&state.chart, coords);
    let mut free = DVector::zeros(dim);
    for i in 0..b.len() {
        let m = b.midpoints[i];
        let u = panel[i] + flow.vortex.free_velocity(m);
        // Fixed-point rate of the blob potentials.
        let mut blob_rate = 0.0;
        for ((x, g), xd) in v.positions.iter().zip(&v.strengths).zip(&flow.vortex_velocity) {
            blob_rate -= g * v.kernel.velocity(m - x, d2).dot(xd);
        }
        if let Some(bv) = flow.vortex.bound {
            blob_rate -= bv.circulation * BlobKernel::Gaussian.velocity(m - bv.center, bv.delta * bv.delta).dot(&cdot);
        }
        let mdot = state.chart.point_velocity(coords, b.part[i], m);
        let dphi_dt = phi_rate[i] - mdot.dot(&panel[i]) + blob_rate;
        let pressure = -(dphi_dt + 0.5 * u.norm_squared());
        for j in 0..dim {
            free[j] -= pressure * p.basis_data[j][i] * b.lengths[i];
        }
    }
    Ok(PressureSplit { free, added_mass: p.added_mass() })
}

/// Pressure force split for `state`, using the analytic potential rate for
/// rigid bodies and the differenced one otherwise.
pub fn pressure_split(state: &LPState, flow: &Flow, n_panels: usize) -> Result<PressureSplit> {
    let method = if rigid(&state.chart) { PotentialRate::Analytic } else { PotentialRate::Differenced };
    pressure_split_with(state, flow, method, n_panels)
}

/// `j -> -∮ p n . delta b_j` with the unsteady Bernoulli pressure, gauged to
/// vanish at infinity.
pub fn pressure_force(
    chart: &BodyChart,
    coords: &BodyCoords,
    qddot: &DVector<f64>,
    vortices: &VortexState,
    n_panels: usize,
) -> Result<GeneralizedCovector> {
    let state = LPState { chart: chart.clone(), coords: coords.clone(), vortices: vortices.clone(), time: 0.0 };
    if qddot.len() != chart.dim() {
        return Err(Error::Dimension { expected: chart.dim(), got: qddot.len() });
    }
    let f = flow(&state, n_panels)?;
    Ok(pressure_split(&state, &f, n_panels)?.force(qddot))
}

/// Body plus added mass, checked symmetric and positive definite.
pub fn assemble_mass_matrix(chart: &BodyChart, coords: &BodyCoords, n_panels: usize) -> Result<DMatrix<f64>> {
    chart.check(coords)?;
    let mut m = chart.mass_matrix(&coords.q);
    if chart.has_body() {
        m += Placement::new(chart, &coords.q, n_panels)?.added_mass();
    }
    let scale = m.norm();
    if (&m - m.transpose()).norm() > 1e-6 * scale {
        return Err(Error::Indefinite);
    }
    if m.nrows() > 0 && nalgebra::Cholesky::new(0.5 * (&m + m.transpose())).is_none() {
        return Err(Error::Indefinite);
    }
    Ok(m)
}

/// Time derivative of the reduced state.
#[derive(Clone, Debug)]
pub struct Rates {
    pub qdot: DVector<f64>,
    pub qddot: DVector<f64>,
    pub vortex_velocity: Vec<Vec2>,
}

/// Body acceleration from `M_body qddot + bias = F_p(qddot)`.
pub fn body_acceleration(state: &LPState, flow: &Flow, opts: &DynamicsOptions) -> Result<DVector<f64>> {
    let chart = &state.chart;
    let dim = chart.dim();
    if dim == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut m = chart.mass_matrix(&state.coords.q);
    let mut rhs = -chart.bias(&state.coords.q, &state.coords.qdot);
    if opts.fluid_coupling {
        let split = pressure_split(state, flow, opts.n_panels)?;
        m += &split.added_mass;
        rhs += &split.free;
    }
    m.lu().solve(&rhs).ok_or(Error::Singular)
}

pub fn rates(state: &LPState, opts: &DynamicsOptions) -> Result<Rates> {
    let f = flow(state, opts.n_panels)?;
    let qddot = body_acceleration(state, &f, opts)?;
    Ok(Rates { qdot: state.coords.qdot.clone(), qddot, vortex_velocity: f.vortex_velocity })
}

fn advance(state: &LPState, r: &Rates, h: f64) -> LPState {
    let mut s = state.clone();
    s.coords.q += h * &r.qdot;
    s.coords.qdot += h * &r.qddot;
    for (x, u) in s.vortices.positions.iter_mut().zip(&r.vortex_velocity) {
        *x += h * u;
    }
    s.time += h;
    s
}

/// One classical RK4 step of the coupled system. Blob strengths and the bound
/// circulation are copied, never recomputed.
pub fn step(state: &LPState, dt: f64, opts: &DynamicsOptions) -> Result<LPState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    let k1 = rates(state, opts)?;
    let k2 = rates(&advance(state, &k1, 0.5 * dt), opts)?;
    let k3 = rates(&advance(state, &k2, 0.5 * dt), opts)?;
    let k4 = rates(&advance(state, &k3, dt), opts)?;
    let mut out = state.clone();
    let w = dt / 6.0;
    out.coords.q += w * (&k1.qdot + 2.0 * &k2.qdot + 2.0 * &k3.qdot + &k4.qdot);
    out.coords.qdot += w * (&k1.qddot + 2.0 * &k2.qddot + 2.0 * &k3.qddot + &k4.qddot);
    for (i, x) in out.vortices.positions.iter_mut().enumerate() {
        *x += w * (k1.vortex_velocity[i] + 2.0 * k2.vortex_velocity[i] + 2.0 * k3.vortex_velocity[i] + k4.vortex_velocity[i]);
    }
    out.time = state.time + dt;
    Ok(out)
}

/// Body kinetic plus potential energy plus fluid kinetic energy.
/// Kinetic plus potential energy of the body alone.
pub fn body_energy(state: &LPState) -> f64 {
    let c = &state.coords;
    0.5 * c.qdot.dot(&(state.chart.mass_matrix(&c.q) * &c.qdot)) + state.chart.potential(&c.q)
}

pub fn total_energy(state: &LPState, flow: &Flow) -> Result<f64> {
    let body = body_energy(state);
    let fluid = match &flow.sigma {
        Some(s) => flow.vortex.energy_with(s)?,
        None => 0.5 * flow.vortex.free_energy_in_fluid(&crate::fields::energy_cubature())?,
    };
    Ok(body + fluid)
}

/// The two routes to the fluid force on the body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceBreakdown {
    pub pressure_route: Vec<f64>,
    pub lp_route: Vec<f64>,
    /// `|lp - pressure| / max(|pressure|, FORCE_FLOOR)`.
    pub discrepancy: f64,
}

/// Force magnitude below which the discrepancy is measured absolutely.
pub const FORCE_FLOOR: f64 = 1e-6;

/// Cubature of the area term of the curvature route.
pub fn force_cubature() -> Cubature {
    Cubature { abs_tol: 1e-9, rel_tol: 1e-5, max_evals: 6_000_000, initial: [1, 4] }
}

/// Fluid force from the reduced horizontal equation:
///
/// `F_j = int <u, D_qdot sigma_j - [sigma(qdot), sigma_j] + [sigma_j, xi]>
///        - 1/2 ∮ |u|^2 n.delta b_j - d/dt (dl/dqdot)_j`
///
/// The area term is the curvature force `<u, C(qdot, e_j)>` plus the base
/// derivative of the fluid Lagrangian; their `D_j sigma(qdot)` parts cancel
/// and are left out. The momentum `dl/dqdot` only sees the connection part,
/// since `xi` is tangent to the body and divergence free.
pub fn lp_force(state: &LPState, qddot: &DVector<f64>, n_panels: usize, opts: &Cubature) -> Result<(GeneralizedCovector, MaskStats)> {
    let chart = &state.chart;
    let dim = chart.dim();
    if !chart.has_body() {
        return Ok((DVector::zeros(dim), MaskStats::default()));
    }
    let fl = flow(state, n_panels)?;
    let q = &state.coords.q;
    let qd = &state.coords.qdot;
    let family = SigmaFamily::new(chart, n_panels);
    let p0 = family.placement(q)?;
    let b = &p0.boundary;

    // Boundary term with the fluid-side speed.
    let panel = fl.panel_midpoint_velocity();
    let mut force = DVector::zeros(dim);
    // Dynamic-pressure force scale; the area term may cancel to nearly zero,
    // so its tolerance is measured against this rather than its own size.
    let mut scale = 0.0;
    for i in 0..b.len() {
        let u2 = (panel[i] + fl.vortex.free_velocity(b.midpoints[i])).norm_squared();
        scale += 0.5 * u2 * b.lengths[i];
        for j in 0..dim {
            force[j] -= 0.5 * u2 * p0.basis_data[j][i] * b.lengths[i];
        }
    }

    // Momentum rate along the second-order curve through (q, qdot, qddot).
    let h = POTENTIAL_RATE_STEP;
    let momentum = |s: f64| -> Result<DVector<f64>> {
        let qs = q + s * qd + 0.5 * s * s * qddot;
        let vs = qd + s * qddot;
        Ok(family.placement(&qs)?.added_mass().transpose() * vs)
    };
    let rate = (momentum(h)? - momentum(-h)?) / (2.0 * h);
    scale += rate.norm();
    force -= rate;

    // Area term.
    let moving = qd.iter().any(|&v| v != 0.0);
    let has_xi = !state.vortices.is_empty() || state.vortices.bound_circulation != 0.0;
    let mut stats = MaskStats::default();
    if moving || has_xi {
        let disp = FORCE_STEP * chart.scale();
        let shifted = if moving {
            let e = family.step_for(q, qd, disp)?;
            Some((e, family.placement(&(q + e * qd))?, family.placement(&(q - e * qd))?))
        } else {
            None
        };
        let s_qd = p0.sigma_strengths(qd);
        let s_c = fl.vortex.correction.as_ref().expect("body present").strengths.clone();
        let mut at_q: Vec<&DVector<f64>> = vec![&s_qd, &s_c];
        at_q.extend(p0.basis.iter());
        let evaluated = AtomicUsize::new(0);
        let masked = AtomicUsize::new(0);
        let margin = 3.0 * disp;
        let integrand = |x: Vec2| -> Vec<f64> {
            evaluated.fetch_add(1, Ordering::Relaxed);
            if b.signed_distance(x) < margin {
                masked.fetch_add(1, Ordering::Relaxed);
                return vec![0.0; dim];
            }
            let mut vel = [Vec2::zeros(); 6];
            let mut grad = [Mat2::zeros(); 6];
            b.eval_multi(&at_q, x, &mut vel[..dim + 2], Some(&mut grad[..dim + 2]));
            let xi = vel[1] + fl.vortex.free_velocity(x);
            let jxi = grad[1] + fl.vortex.free_gradient(x);
            let u = vel[0] + xi;
            let mut dsig = [Vec2::zeros(); 4];
            if let Some((e, pp, pm)) = &shifted {
                let mut vp = [Vec2::zeros(); 4];
                let mut vm = [Vec2::zeros(); 4];
                let plus: Vec<&DVector<f64>> = pp.basis.iter().collect();
                let minus: Vec<&DVector<f64>> = pm.basis.iter().collect();
                pp.boundary.eval_multi(&plus, x, &mut vp[..dim], None);
                pm.boundary.eval_multi(&minus, x, &mut vm[..dim], None);
                for j in 0..dim {
                    dsig[j] = (vp[j] - vm[j]) / (2.0 * e);
                }
            }
            (0..dim)
                .map(|j| {
                    let (sj, gj) = (vel[j + 2], &grad[j + 2]);
                    let c = dsig[j] - bracket_values(vel[0], &grad[0], sj, gj) + bracket_values(sj, gj, xi, &jxi);
                    u.dot(&c)
                })
                .collect()
        };
        let patches = quad::fluid_patches(b, quad::truncation_radius(b))?;
        let cub = Cubature { abs_tol: opts.abs_tol.max(opts.rel_tol * scale), ..*opts };
        let res = quad::integrate(&patches, dim, &cub, &integrand)?;
        force += DVector::from_vec(res.value);
        stats = MaskStats { evaluated: evaluated.load(Ordering::Relaxed), masked: masked.load(Ordering::Relaxed) };
    }
    Ok((force, stats))
}

/// Both force routes at the given body acceleration. Vortices move with the
/// total field.
pub fn force_breakdown(state: &LPState, qddot: &DVector<f64>, n_panels: usize, opts: &Cubature) -> Result<ForceBreakdown> {
    let dim = state.chart.dim();
    if qddot.len() != dim {
        return Err(Error::Dimension { expected: dim, got: qddot.len() });
    }
    let fl = flow(state, n_panels)?;
    let pressure = pressure_split(state, &fl, n_panels)?.force(qddot);
    let (lp, _) = lp_force(state, qddot, n_panels, opts)?;
    let discrepancy = (&lp - &pressure).norm() / pressure.norm().max(FORCE_FLOOR);
    Ok(ForceBreakdown { pressure_route: pressure.iter().copied().collect(), lp_route: lp.iter().copied().collect(), discrepancy })
}

/// One output row.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub positions: Vec<Vec2>,
    pub energy: f64,
    /// Blob strengths plus bound circulation.
    pub circulation: f64,
    /// Circulation measured on a loop just outside the body; NaN without one.
    pub boundary_circulation: f64,
    pub bc_residual: f64,
    /// NaN unless the force check is switched on.
    pub force_discrepancy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub coordinate_names: Vec<String>,
    pub samples: Vec<Sample>,
}

/// A run stopped by a numerical error, with everything recorded before it.
#[derive(Debug)]
pub struct Aborted {
    pub record: TrajectoryRecord,
    pub error: Error,
    pub time: f64,
}

fn sample(state: &LPState, opts: &DynamicsOptions, check_forces: bool) -> Result<Sample> {
    let f = flow(state, opts.n_panels)?;
    // A decoupled body exchanges nothing with the fluid; its own energy is
    // the conserved quantity.
    let energy = if opts.fluid_coupling { total_energy(state, &f)? } else { body_energy(state) };
    let boundary_circulation = match &f.placement {
        Some(p) => boundary_circulation(&f, &p.boundary)?,
        None => f64::NAN,
    };
    let force_discrepancy = if check_forces && state.chart.has_body() {
        let qddot = body_acceleration(state, &f, opts)?;
        force_breakdown(state, &qddot, opts.n_panels, &force_cubature())?.discrepancy
    } else {
        f64::NAN
    };
    Ok(Sample {
        t: state.time,
        q: state.coords.q.iter().copied().collect(),
        qdot: state.coords.qdot.iter().copied().collect(),
        positions: state.vortices.positions.clone(),
        energy,
        circulation: state.vortices.total_circulation(),
        boundary_circulation,
        bc_residual: f.bc_residual(&state.chart, &state.coords),
        force_discrepancy,
    })
}

/// Runs a scenario to its end time, sampling every `output_stride` steps and
/// at the final step.
pub fn simulate(config: &ScenarioConfig) -> std::result::Result<TrajectoryRecord, Box<Aborted>> {
    simulate_with(config, &mut |_, _, _| Ok(()))
}

/// `simulate`, calling `observe(state, sample, row)` after each recorded row.
/// An observer error aborts the run like a solver error.
pub fn simulate_with(
    config: &ScenarioConfig,
    observe: &mut dyn FnMut(&LPState, &Sample, usize) -> Result<()>,
) -> std::result::Result<TrajectoryRecord, Box<Aborted>> {
    let mut record = TrajectoryRecord {
        coordinate_names: config.chart.coordinate_names().iter().map(|s| s.to_string()).collect(),
        samples: Vec::new(),
    };
    let abort = |record: TrajectoryRecord, error: Error, time: f64| Box::new(Aborted { record, error, time });
    let (mut state, steps) = match config.initial_state().and_then(|s| Ok((s, config.steps()?))) {
        Ok(v) => v,
        Err(e) => return Err(abort(record, e, 0.0)),
    };
    let opts = DynamicsOptions { n_panels: config.n_panels, fluid_coupling: config.fluid_coupling };
    let check_forces = config.diagnostics.force_breakdown;
    for k in 0..=steps {
        if k % config.output_stride == 0 || k == steps {
            match sample(&state, &opts, check_forces).and_then(|s| observe(&state, &s, record.samples.len()).map(|_| s)) {
                Ok(s) => record.samples.push(s),
                Err(e) => return Err(abort(record, e, state.time)),
            }
        }
        if k == steps {
            break;
        }
        match step(&state, config.dt, &opts) {
            Ok(mut next) => {
                // Fixed grid in time: no accumulated rounding in t.
                next.time = (k + 1) as f64 * config.dt;
                if let Some(v) = &config.viscous {
                    next.vortices = diffuse_step(&next.vortices, v, config.dt);
                }
                state = next;
            }
            Err(e) => return Err(abort(record, e, state.time)),
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disc() -> BodyChart {
        BodyChart::RigidDisc { radius: 1.0, mass: None, inertia: None }
    }

    fn state(chart: BodyChart, q: &[f64], qdot: &[f64], v: VortexState) -> LPState {
        LPState { chart, coords: BodyCoords::new(q, qdot), vortices: v, time: 0.0 }
    }

    #[test]
    fn rest_has_no_pressure_force() {
        let f = pressure_force(&disc(), &BodyCoords::at_rest(&[0.0; 3]), &DVector::zeros(3), &VortexState::empty(0.1), 64).unwrap();
        assert!(f.norm() < 1e-14);
    }

    #[test]
    fn accelerating_disc_feels_its_added_mass() {
        let qdd = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
        let f = pressure_force(&disc(), &BodyCoords::at_rest(&[0.0; 3]), &qdd, &VortexState::empty(0.1), 256).unwrap();
        assert!((f[1] + PI).abs() < 1e-2 * PI && f[2].abs() < 1e-10 && f[0].abs() < 1e-10, "{f}");
    }

    #[test]
    fn steady_translation_has_no_drag() {
        let c = BodyCoords::new(&[0.0; 3], &[0.0, 1.0, 0.0]);
        let f = pressure_force(&disc(), &c, &DVector::zeros(3), &VortexState::empty(0.1), 256).unwrap();
        assert!(f.norm() < 1e-3, "{f}");
    }

    #[test]
    fn analytic_and_differenced_potential_rates_agree() {
        let chart = BodyChart::RigidEllipse { a: 1.5, b: 0.8, mass: None, inertia: None };
        let mut v = VortexState::new(vec![Vec2::new(2.5, 0.8), Vec2::new(-0.4, -2.2)], vec![1.0, -0.4], 0.15);
        v.bound_circulation = 0.7;
        let s = state(chart, &[0.3, 0.1, -0.2], &[0.4, 0.7, -0.3], v);
        let f = flow(&s, 128).unwrap();
        let a = pressure_split_with(&s, &f, PotentialRate::Analytic, 128).unwrap();
        let d = pressure_split_with(&s, &f, PotentialRate::Differenced, 128).unwrap();
        assert!((&a.free - &d.free).norm() < 1e-6 * a.free.norm(), "{} {}", a.free, d.free);
    }

    #[test]
    fn mass_matrix_of_disc_and_ellipse() {
        let m = assemble_mass_matrix(&disc(), &BodyCoords::at_rest(&[0.0; 3]), 256).unwrap();
        assert!((m[(1, 1)] - 2.0 * PI).abs() < 2e-2 * PI && (m[(2, 2)] - 2.0 * PI).abs() < 2e-2 * PI);
        let ma = Placement::new(&disc(), &DVector::zeros(3), 256).unwrap().added_mass();
        assert!((ma[(1, 1)] - PI).abs() < 1e-2 * PI && ma[(1, 2)].abs() < 1e-10);
        assert!(ma[(0, 0)].abs() < 1e-3);
        let e = BodyChart::RigidEllipse { a: 2.0, b: 1.0, mass: None, inertia: None };
        let me = Placement::new(&e, &DVector::zeros(3), 256).unwrap().added_mass();
        assert!(me[(2, 2)] > me[(1, 1)]);
        assemble_mass_matrix(&e, &BodyCoords::at_rest(&[0.4, 0.0, 0.0]), 256).unwrap();
    }

    #[test]
    fn zero_state_is_fixed() {
        let s = state(BodyChart::Empty, &[], &[], VortexState::empty(0.1));
        let n = step(&s, 0.1, &DynamicsOptions::default()).unwrap();
        assert_eq!(n.coords, s.coords);
        assert_eq!(n.vortices, s.vortices);
    }

    #[test]
    fn disc_at_rest_stays_at_rest() {
        let mut s = state(disc(), &[0.0; 3], &[0.0; 3], VortexState::empty(0.1));
        for _ in 0..5 {
            s = step(&s, 0.01, &DynamicsOptions::default()).unwrap();
        }
        assert!(s.coords.q.iter().chain(s.coords.qdot.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn vortex_pair_translates() {
        let v = VortexState::new(vec![Vec2::new(0.0, 0.5), Vec2::new(0.0, -0.5)], vec![2.0 * PI, -2.0 * PI], 0.05);
        let mut s = state(BodyChart::Empty, &[], &[], v);
        for _ in 0..1000 {
            s = step(&s, 1e-3, &DynamicsOptions::default()).unwrap();
        }
        // Positive circulation on top: the pair moves towards +x.
        let moved = s.vortices.positions[0].x;
        assert!((moved - 1.0).abs() < 1e-4, "{moved}");
        assert!((s.vortices.positions[0].y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn collision_is_an_error() {
        let v = VortexState::new(vec![Vec2::new(1.05, 0.0)], vec![1.0], 0.1);
        let s = state(disc(), &[0.0; 3], &[0.0; 3], v);
        assert!(matches!(flow(&s, 64), Err(Error::Collision { index: 0, .. })));
    }

    #[test]
    fn strengths_are_carried_bit_exactly() {
        let mut v = VortexState::new(vec![Vec2::new(2.0, 0.3), Vec2::new(-1.5, 1.5)], vec![0.1 + 0.2, -1.0 / 3.0], 0.1);
        v.bound_circulation = 0.25;
        let mut s = state(disc(), &[0.0; 3], &[0.1, 0.2, 0.0], v.clone());
        for _ in 0..3 {
            s = step(&s, 1e-2, &DynamicsOptions { n_panels: 64, fluid_coupling: true }).unwrap();
        }
        assert_eq!(s.vortices.strengths, v.strengths);
        assert_eq!(s.vortices.bound_circulation.to_bits(), v.bound_circulation.to_bits());
    }

    #[test]
    fn uncoupled_two_link_follows_body_equation() {
        let chart = BodyChart::TwoLink {
            half_lengths: [1.0, 0.8],
            masses: [1.0, 0.7],
            inertias: [0.4, 0.3],
            spring: 1.0,
            rest_angle: PI,
            half_width: 0.1,
        };
        let s = state(chart.clone(), &[PI + 0.4, 0.0, 0.0, 0.0], &[0.3, -0.2, 0.1, 0.0], VortexState::empty(0.1));
        let opts = DynamicsOptions { n_panels: 64, fluid_coupling: false };
        let r = rates(&s, &opts).unwrap();
        let lhs = chart.mass_matrix(&s.coords.q) * &r.qddot + chart.bias(&s.coords.q, &s.coords.qdot);
        assert!(lhs.norm() < 1e-12);
    }
}
