//! Numerical certificates for the structural identities of the reduced
//! model: covariant variations under vertical and horizontal deformations,
//! the splitting of differentials on `TB`, the torsion-free form of the
//! exterior derivative, and the two defining properties of the connection.
//!
//! Vertical deformations act on vortex material labels. The full fluid
//! diffeomorphism is never stored, so its equivariance is certified only
//! through the consequences listed here.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{bracket, covariant_derivative_vertical, curvature_in, flow, SigmaFamily, VerticalCurve};
use crate::bodies::{BodyChart, BodyCoords, Vec2};
use crate::fields::{hodge_decompose, Combination, CompletedField, VelocityField, VortexState};
use crate::panels::SigmaField;
use crate::{Error, Result};

/// Central-difference step in time along the base curve.
pub const TIME_STEP: f64 = 1e-4;
/// RK4 steps of every deformation flow.
pub const FLOW_STEPS: usize = 4;
/// Displacement of the differences that push velocities forward.
pub const SPACE_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub slope_min: f64,
    pub slope_max: f64,
    /// `max |C(v, w) + C(w, v)|`.
    pub antisymmetry: f64,
    /// `max |C(v, v)|`.
    pub alternating: f64,
    /// Smallest residual ratio per halving of a second-order step.
    pub halving_ratio: f64,
    /// Agreement with hand-differentiated closed forms.
    pub closed_form: f64,
    /// Recovery of known parts by the splitting.
    pub connection: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            slope_min: 0.8,
            slope_max: 1.3,
            antisymmetry: 1e-8,
            alternating: 1e-12,
            halving_ratio: 3.5,
            closed_form: 1e-6,
            connection: 1e-8,
        }
    }
}

/// Outcome of one check. Every measured quantity is listed next to the
/// threshold it was held to.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    /// Steps of the convergence study (epsilon or h), largest first.
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Least-squares slope of `ln residual` against `ln step`.
    pub slope: Option<f64>,
    pub measures: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub failures: Vec<String>,
    pub passed: bool,
}

impl CheckReport {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            parameters: BTreeMap::new(),
            steps: Vec::new(),
            residuals: Vec::new(),
            slope: None,
            measures: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            failures: Vec::new(),
            passed: false,
        }
    }

    /// A check that could not be evaluated.
    pub fn errored(name: &str, err: &Error) -> Self {
        let mut r = Self::new(name);
        r.failures.push(format!("evaluation failed: {err}"));
        r
    }

    fn param(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    fn at_most(&mut self, key: &str, value: f64, limit: f64) {
        self.measures.insert(key.to_string(), value);
        self.thresholds.insert(key.to_string(), limit);
        if !(value <= limit) {
            self.failures.push(format!("{key} = {value:.3e} exceeds {limit:.3e}"));
        }
    }

    fn study(&mut self, steps: &[f64], residuals: Vec<f64>) {
        self.steps = steps.to_vec();
        self.slope = log_slope(steps, &residuals);
        self.residuals = residuals;
    }

    fn slope_within(&mut self, lo: f64, hi: f64) {
        self.thresholds.insert("slope_min".into(), lo);
        self.thresholds.insert("slope_max".into(), hi);
        match self.slope {
            Some(s) if s >= lo && s <= hi => {}
            Some(s) => self.failures.push(format!("slope {s:.3} outside [{lo}, {hi}]")),
            None => self.failures.push("slope undefined (zero or non-finite residual)".into()),
        }
    }

    /// Every consecutive residual ratio at least `ratio`; steps must halve.
    fn halving(&mut self, ratio: f64) {
        self.thresholds.insert("halving_ratio_min".into(), ratio);
        let worst = self.residuals.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);
        self.measures.insert("halving_ratio".into(), worst);
        if !(worst >= ratio) {
            self.failures.push(format!("residual shrinks only {worst:.3}x per halving"));
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.failures.is_empty();
        self
    }
}

/// Least-squares slope of `ln r` against `ln s`; `None` if any value is
/// zero or not finite.
pub fn log_slope(steps: &[f64], residuals: &[f64]) -> Option<f64> {
    if steps.len() < 2 || steps.len() != residuals.len() {
        return None;
    }
    let pts: Vec<(f64, f64)> = steps.iter().zip(residuals).map(|(s, r)| (s.ln(), r.ln())).collect();
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Blobs whose centres drift at a constant velocity. Completed against the
/// body along a base curve, they give a boundary-tangent field `eta(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftingBlobs {
    pub vortices: VortexState,
    pub drift: Vec2,
}

impl DriftingBlobs {
    pub fn at(&self, t: f64) -> VortexState {
        let mut v = self.vortices.clone();
        for p in &mut v.positions {
            *p += t * self.drift;
        }
        v
    }
}

/// A base point, its vertical field, and where both sides are compared.
/// The base curve is `q(t) = q + t qdot` through `t = 0`.
#[derive(Clone, Debug)]
pub struct VariationSetup {
    pub chart: BodyChart,
    pub coords: BodyCoords,
    pub xi: VortexState,
    pub points: Vec<Vec2>,
    pub n_panels: usize,
}

impl VariationSetup {
    fn curve(&self, t: f64) -> BodyCoords {
        BodyCoords { q: &self.coords.q + t * &self.coords.qdot, qdot: self.coords.qdot.clone() }
    }
}

fn completed(family: &SigmaFamily, q: &DVector<f64>, v: &VortexState) -> Result<CompletedField> {
    if !family.chart.has_body() {
        return CompletedField::new(v, None);
    }
    let p = family.placement(q)?;
    CompletedField::new(v, Some((p.boundary.clone(), p.solver.clone())))
}

fn sigma_at(family: &SigmaFamily, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<Option<SigmaField>> {
    if !family.chart.has_body() {
        return Ok(None);
    }
    family.sigma(q, qdot).map(Some)
}

fn outside(family: &SigmaFamily, q: &DVector<f64>, p: Vec2) -> Result<()> {
    if family.chart.has_body() {
        family.placement(q)?.boundary.check_outside(p)?;
    }
    Ok(())
}

/// Eulerian velocity at `x` of the deformed motion `Psi_t o phi_t`, where
/// `Psi_t` is the flow over `[0, eps]` of the field `gen(t, lambda, .)` and
/// `u` is the velocity of `phi_t` at `t = 0`:
/// `dPsi/dt o Psi^-1 + Psi_* u`.
fn deformed_velocity<G>(gen: &G, u: &dyn VelocityField, x: Vec2, eps: f64) -> Result<Vec2>
where
    G: Fn(f64, f64, Vec2) -> Result<Vec2>,
{
    // Displacements `Psi(y) - y` keep roundoff relative to the deformation.
    let disp = |t: f64, y: Vec2, l0: f64, l1: f64| flow(|l, z| gen(t, l, y + z), Vec2::zeros(), l0, l1, FLOW_STEPS);
    let y = x + disp(0.0, x, eps, 0.0)?;
    let h = TIME_STEP;
    let dpsi = (disp(h, y, 0.0, eps)? - disp(-h, y, 0.0, eps)?) / (2.0 * h);
    let uy = u.velocity(y);
    let speed = uy.norm();
    let push = if speed > 0.0 {
        let d = uy * (SPACE_STEP / speed);
        uy + (disp(0.0, y + d, 0.0, eps)? - disp(0.0, y - d, 0.0, eps)?) * (speed / (2.0 * SPACE_STEP))
    } else {
        Vec2::zeros()
    };
    Ok(dpsi + push)
}

fn max_gap(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Both sides of the vertical variation identity
/// `delta xi = D eta/Dt - [xi, eta]` for the relabeling of the vortex
/// material by the flow of `eta` over `eps`.
pub struct VerticalSides {
    /// `(xi_eps - xi) / eps` from the relabeled configuration, per `eps`.
    pub relabeled: Vec<Vec<Vec2>>,
    /// `D eta/Dt - [xi, eta]` from the algebra operators.
    pub algebraic: Vec<Vec2>,
}

pub fn vertical_sides(setup: &VariationSetup, eta: &DriftingBlobs, eps: &[f64]) -> Result<VerticalSides> {
    let family = SigmaFamily::new(&setup.chart, setup.n_panels);
    let h = TIME_STEP;
    let etas: Vec<(f64, CompletedField)> =
        [-h, 0.0, h].iter().map(|&t| Ok((t, completed(&family, &setup.curve(t).q, &eta.at(t))?))).collect::<Result<_>>()?;
    let gen = |t: f64, _l: f64, z: Vec2| -> Result<Vec2> {
        let (_, f) = etas.iter().find(|(s, _)| *s == t).expect("deformation times are fixed");
        outside(&family, &setup.curve(t).q, z)?;
        Ok(f.velocity(z))
    };
    let xi = completed(&family, &setup.coords.q, &setup.xi)?;
    let sigma = sigma_at(&family, &setup.coords.q, &setup.coords.qdot)?;
    let mut terms: Vec<(f64, &dyn VelocityField)> = vec![(1.0, &xi)];
    if let Some(s) = &sigma {
        terms.push((1.0, s));
    }
    let u = Combination::new(terms);
    let mut relabeled = Vec::with_capacity(eps.len());
    for &e in eps {
        let vals = setup
            .points
            .iter()
            .map(|&x| Ok((deformed_velocity(&gen, &u, x, e)? - u.velocity(x)) / e))
            .collect::<Result<Vec<_>>>()?;
        relabeled.push(vals);
    }
    let trajectory: &VerticalCurve<'_> = &|t: f64| {
        let c = setup.curve(t);
        let f = completed(&family, &c.q, &eta.at(t))?;
        Ok((c, Box::new(f) as Box<dyn VelocityField>))
    };
    let d_eta = covariant_derivative_vertical(&family, trajectory, 0.0, h, &setup.points)?;
    let eta0 = &etas[1].1;
    let br = bracket(&xi, eta0, &setup.points);
    let algebraic = d_eta.iter().zip(&br).map(|(a, b)| a - b).collect();
    Ok(VerticalSides { relabeled, algebraic })
}

/// First-order agreement in `eps` of the relabeled variation with
/// `D eta/Dt - [xi, eta]`.
pub fn check_vertical_variation(setup: &VariationSetup, eta: &DriftingBlobs, eps: &[f64], th: &Thresholds) -> Result<CheckReport> {
    let sides = vertical_sides(setup, eta, eps)?;
    let residuals: Vec<f64> = sides.relabeled.iter().map(|r| max_gap(r, &sides.algebraic)).collect();
    let scale = sides.algebraic.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut r = CheckReport::new("vertical_variation")
        .param("n_panels", setup.n_panels as f64)
        .param("time_step", TIME_STEP)
        .param("points", setup.points.len() as f64);
    r.measures.insert("rhs_max_norm".into(), scale);
    r.study(eps, residuals);
    r.slope_within(th.slope_min, th.slope_max);
    Ok(r.finish())
}

/// Both sides of the horizontal variation identity
/// `delta xi = C(qdot, w)`, the vortex material being carried by the flow of
/// `sigma(q + t qdot + lambda w, w)` over `lambda in [0, eps]`.
pub struct HorizontalSides {
    pub transported: Vec<Vec<Vec2>>,
    pub curvature: Vec<Vec2>,
    pub antisymmetry: f64,
    pub alternating: f64,
}

pub fn horizontal_sides(setup: &VariationSetup, w: &DVector<f64>, eps: &[f64]) -> Result<HorizontalSides> {
    let chart = &setup.chart;
    if w.len() != chart.dim() || setup.coords.q.len() != chart.dim() {
        return Err(Error::Dimension { expected: chart.dim(), got: w.len() });
    }
    if !chart.has_body() {
        return Err(Error::Invalid("horizontal variations need a body".into()));
    }
    let family = SigmaFamily::new(chart, setup.n_panels);
    let qdot = &setup.coords.qdot;
    let base = |t: f64, l: f64| &setup.curve(t).q + l * w;
    let memo: Mutex<HashMap<(u64, u64), std::sync::Arc<SigmaField>>> = Mutex::new(HashMap::new());
    let sigma_w = |t: f64, l: f64| -> Result<std::sync::Arc<SigmaField>> {
        let key = (t.to_bits(), l.to_bits());
        if let Some(s) = memo.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let s = std::sync::Arc::new(family.sigma(&base(t, l), w)?);
        memo.lock().unwrap().insert(key, s.clone());
        Ok(s)
    };
    let gen = |t: f64, l: f64, z: Vec2| -> Result<Vec2> {
        outside(&family, &base(t, l), z)?;
        Ok(sigma_w(t, l)?.velocity(z))
    };
    let q = &setup.coords.q;
    let xi = completed(&family, q, &setup.xi)?;
    let sigma = family.sigma(q, qdot)?;
    let u = Combination::new(vec![(1.0, &sigma), (1.0, &xi)]);
    let sw0 = sigma_w(0.0, 0.0)?;
    let br = bracket(sw0.as_ref(), &xi, &setup.points);
    let mut transported = Vec::with_capacity(eps.len());
    for &e in eps {
        let moved = family.sigma(&base(0.0, e), qdot)?;
        let vals = setup
            .points
            .iter()
            .zip(&br)
            .map(|(&x, b)| {
                let xi_e = deformed_velocity(&gen, &u, x, e)? - moved.velocity(x);
                Ok((xi_e - xi.velocity(x)) / e - b)
            })
            .collect::<Result<Vec<_>>>()?;
        transported.push(vals);
    }
    let c = curvature_in(&family, q, qdot, w, None, &setup.points)?;
    let c_rev = curvature_in(&family, q, w, qdot, None, &setup.points)?;
    let c_diag = curvature_in(&family, q, w, w, None, &setup.points)?;
    let antisymmetry = c.values.iter().zip(&c_rev.values).map(|(a, b)| (a + b).norm()).fold(0.0, f64::max);
    let alternating = c_diag.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(HorizontalSides { transported, curvature: c.values, antisymmetry, alternating })
}

/// First-order agreement in `eps` of the transported variation with the
/// curvature, plus its antisymmetry and `C(w, w) = 0`.
pub fn check_horizontal_variation(setup: &VariationSetup, w: &DVector<f64>, eps: &[f64], th: &Thresholds) -> Result<CheckReport> {
    let sides = horizontal_sides(setup, w, eps)?;
    let residuals: Vec<f64> = sides.transported.iter().map(|r| max_gap(r, &sides.curvature)).collect();
    let scale = sides.curvature.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut r = CheckReport::new("horizontal_variation")
        .param("n_panels", setup.n_panels as f64)
        .param("time_step", TIME_STEP)
        .param("points", setup.points.len() as f64);
    r.measures.insert("rhs_max_norm".into(), scale);
    r.study(eps, residuals);
    r.slope_within(th.slope_min, th.slope_max);
    r.at_most("antisymmetry", sides.antisymmetry, th.antisymmetry);
    r.at_most("alternating", sides.alternating, th.alternating);
    Ok(r.finish())
}

/// Scalar function on `TB`, given base point and fiber vector.
pub type TbFunction<'a> = dyn Fn(&DVector<f64>, &DVector<f64>) -> Result<f64> + Sync + 'a;

/// Fluid kinetic energy of the potential flow forced by the body (`xi = 0`).
pub fn fluid_lagrangian(chart: &BodyChart, n_panels: usize) -> impl Fn(&DVector<f64>, &DVector<f64>) -> Result<f64> + Sync {
    let family = SigmaFamily::new(chart, n_panels);
    move |q, e| Ok(family.sigma(q, e)?.kinetic_energy())
}

/// Residual of `df(e)[de] = df/dm [dm] + df/de [De/Dt]` at step `h`, every
/// derivative a central difference and the chart connection flat.
pub fn df_splitting_residual(f: &TbFunction<'_>, at: &BodyCoords, dm: &DVector<f64>, de: &DVector<f64>, h: f64) -> Result<f64> {
    let (m, e) = (&at.q, &at.qdot);
    let total = (f(&(m + h * dm), &(e + h * de))? - f(&(m - h * dm), &(e - h * de))?) / (2.0 * h);
    let base = (f(&(m + h * dm), e)? - f(&(m - h * dm), e)?) / (2.0 * h);
    let fiber = (f(m, &(e + h * de))? - f(m, &(e - h * de))?) / (2.0 * h);
    Ok((total - base - fiber).abs())
}

/// Second-order shrinkage of the splitting residual over halving steps.
pub fn check_df_splitting(
    f: &TbFunction<'_>,
    at: &BodyCoords,
    dm: &DVector<f64>,
    de: &DVector<f64>,
    steps: &[f64],
    th: &Thresholds,
) -> Result<CheckReport> {
    let residuals = steps.iter().map(|&h| df_splitting_residual(f, at, dm, de, h)).collect::<Result<Vec<_>>>()?;
    let mut r = CheckReport::new("df_splitting");
    r.study(steps, residuals);
    r.halving(th.halving_ratio);
    Ok(r.finish())
}

/// One-forms on a chart with hand-differentiated exterior derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneForm {
    /// `x_i dx_j`.
    Coordinate { i: usize, j: usize },
    /// `d sin(a . x)` with `a_k = 1 / (k + 1)`; closed.
    Exact,
    /// `alpha_k = sin(x_{k+1}) exp(0.3 x_k)`, indices cyclic; not closed.
    Wavy,
}

impl OneForm {
    fn check_dim(&self, d: usize) -> Result<()> {
        let ok = match *self {
            OneForm::Coordinate { i, j } => i < d && j < d,
            OneForm::Exact => d >= 1,
            OneForm::Wavy => d >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("{self:?} is not defined in dimension {d}")))
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = x.len();
        match *self {
            OneForm::Coordinate { i, j } => {
                let mut a = DVector::zeros(d);
                a[j] = x[i];
                a
            }
            OneForm::Exact => {
                let a = exact_weights(d);
                let s = a.dot(x);
                a * s.cos()
            }
            OneForm::Wavy => DVector::from_fn(d, |k, _| x[(k + 1) % d].sin() * (0.3 * x[k]).exp()),
        }
    }

    /// `J[k][m] = d alpha_k / d x_m`.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = x.len();
        let mut j = DMatrix::zeros(d, d);
        match *self {
            OneForm::Coordinate { i, j: c } => j[(c, i)] = 1.0,
            OneForm::Exact => {
                let a = exact_weights(d);
                j = -(a.dot(x)).sin() * &a * a.transpose();
            }
            OneForm::Wavy => {
                for k in 0..d {
                    let n = (k + 1) % d;
                    let g = (0.3 * x[k]).exp();
                    j[(k, n)] += x[n].cos() * g;
                    j[(k, k)] += 0.3 * x[n].sin() * g;
                }
            }
        }
        j
    }

    /// `d alpha(v, w) = <D alpha[v], w> - <D alpha[w], v>`.
    pub fn exterior_derivative(&self, x: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let j = self.jacobian(x);
        (&j * v).dot(w) - (&j * w).dot(v)
    }

    /// The same expression with `D alpha` by central differences.
    pub fn exterior_derivative_fd(&self, x: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>, h: f64) -> f64 {
        let dv = (self.eval(&(x + h * v)) - self.eval(&(x - h * v))) / (2.0 * h);
        let dw = (self.eval(&(x + h * w)) - self.eval(&(x - h * w))) / (2.0 * h);
        dv.dot(w) - dw.dot(v)
    }
}

fn exact_weights(d: usize) -> DVector<f64> {
    DVector::from_fn(d, |k, _| 1.0 / (k as f64 + 1.0))
}

/// Difference-side exterior derivative against the closed form. Forms whose
/// differences are exact (at most quadratic) are held to `closed_form`;
/// the others must shrink at second order.
pub fn check_torsion_free_identity(
    alpha: OneForm,
    x: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    steps: &[f64],
    th: &Thresholds,
) -> Result<CheckReport> {
    alpha.check_dim(x.len())?;
    for d in [v, w] {
        if d.len() != x.len() {
            return Err(Error::Dimension { expected: x.len(), got: d.len() });
        }
    }
    let name = match alpha {
        OneForm::Coordinate { .. } => "torsion_free_coordinate",
        OneForm::Exact => "torsion_free_exact",
        OneForm::Wavy => "torsion_free_wavy",
    };
    let exact = alpha.exterior_derivative(x, v, w);
    let mut r = CheckReport::new(name);
    r.measures.insert("closed_form_value".into(), exact);
    let fd: Vec<f64> = steps.iter().map(|&h| alpha.exterior_derivative_fd(x, v, w, h)).collect();
    let swap = steps.iter().map(|&h| alpha.exterior_derivative_fd(x, w, v, h)).zip(&fd).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    r.study(steps, fd.iter().map(|f| (f - exact).abs()).collect());
    r.at_most("fd_antisymmetry", swap, 0.0);
    match alpha {
        OneForm::Coordinate { .. } => {
            let worst = r.residuals.iter().cloned().fold(0.0, f64::max);
            r.at_most("closed_form_error", worst, th.closed_form);
        }
        _ => r.halving(th.halving_ratio),
    }
    Ok(r.finish())
}

/// The two defining properties of the connection, seen through the
/// splitting `u -> (qdot, u - sigma(q, qdot))`: a pure relabeling velocity
/// (body frozen) is returned unchanged with no body part, and `sigma(q, qdot)`
/// itself has no vertical part. A mixed input must give back both parts.
pub fn check_connection_form_properties(setup: &VariationSetup, th: &Thresholds) -> Result<CheckReport> {
    let chart = &setup.chart;
    if !chart.has_body() {
        return Err(Error::Invalid("the connection needs a body".into()));
    }
    let family = SigmaFamily::new(chart, setup.n_panels);
    let coords = &setup.coords;
    let xi = completed(&family, &coords.q, &setup.xi)?;
    let sigma = family.sigma(&coords.q, &coords.qdot)?;
    let pts = &setup.points;
    let gap = |a: &dyn Fn(Vec2) -> Vec2, b: &dyn Fn(Vec2) -> Vec2| pts.iter().map(|&p| (a(p) - b(p)).norm()).fold(0.0, f64::max);

    let frozen = BodyCoords { q: coords.q.clone(), qdot: DVector::zeros(chart.dim()) };
    let vertical = hodge_decompose(chart, &frozen, &xi, setup.n_panels)?;
    let kernel = hodge_decompose(chart, coords, &sigma, setup.n_panels)?;
    let total = Combination::new(vec![(1.0, &sigma), (1.0, &xi)]);
    let mixed = hodge_decompose(chart, coords, &total, setup.n_panels)?;

    let mut r = CheckReport::new("connection_form").param("n_panels", setup.n_panels as f64);
    r.at_most("vertical_body_part", vertical.qdot.amax(), 0.0);
    r.at_most("vertical_recovery", gap(&|p| vertical.velocity(p), &|p| xi.velocity(p)), th.connection);
    r.at_most("horizontal_kernel", gap(&|p| kernel.velocity(p), &|_| Vec2::zeros()), th.connection);
    r.at_most("mixed_body_part", (&mixed.qdot - &coords.qdot).amax(), th.connection);
    r.at_most("mixed_vertical", gap(&|p| mixed.velocity(p), &|p| xi.velocity(p)), th.connection);
    Ok(r.finish())
}

/// Inputs of the battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub thresholds: Thresholds,
    pub n_panels: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { thresholds: Thresholds::default(), n_panels: 128 }
    }
}

pub const VARIATION_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
pub const HALVING_STEPS: [f64; 4] = [0.08, 0.04, 0.02, 0.01];

/// A disc with two blobs, moving and spinning, sampled on a ring of points
/// clear of the body and of the blob cores.
pub fn generic_disc_setup(n_panels: usize) -> VariationSetup {
    let chart = BodyChart::RigidDisc { radius: 1.0, mass: None, inertia: None };
    let coords = BodyCoords::new(&[0.2, 0.1, -0.3], &[0.4, -0.7, 0.25]);
    let xi = VortexState::new(vec![Vec2::new(2.0, 1.0), Vec2::new(-1.5, -1.8)], vec![1.0, -0.6], 0.2);
    let points = (0..8)
        .map(|k| {
            let a = 0.3 + k as f64 * std::f64::consts::PI / 4.0;
            let r = 1.9 + 0.15 * (k % 3) as f64;
            Vec2::new(0.1, -0.3) + r * Vec2::new(a.cos(), a.sin())
        })
        .collect();
    VariationSetup { chart, coords, xi, points, n_panels }
}

pub fn generic_eta() -> DriftingBlobs {
    DriftingBlobs { vortices: VortexState::new(vec![Vec2::new(1.8, -1.2)], vec![0.8], 0.25), drift: Vec2::new(0.3, 0.2) }
}

pub fn generic_direction() -> DVector<f64> {
    DVector::from_vec(vec![0.6, -0.3, 0.5])
}

type Check<'a> = (&'static str, Box<dyn Fn() -> Result<CheckReport> + Sync + Send + 'a>);

/// Every check on its default case, run concurrently; reports are ordered
/// by name.
pub fn run_all(config: &VerifyConfig) -> Vec<CheckReport> {
    let th = config.thresholds.clone();
    let n = config.n_panels;
    let setup = generic_disc_setup(n);
    let ellipse = BodyChart::RigidEllipse { a: 1.0, b: 0.5, mass: None, inertia: None };
    let x = DVector::from_vec(vec![0.4, -0.7, 1.1]);
    let (ex, ey) = (DVector::from_vec(vec![0.0, 1.0, 0.0]), DVector::from_vec(vec![0.0, 0.0, 1.0]));
    let (v, w) = (DVector::from_vec(vec![0.3, -0.5, 0.8]), DVector::from_vec(vec![-0.6, 0.2, 0.4]));
    let checks: Vec<Check<'_>> = vec![
        ("vertical_variation", Box::new(|| check_vertical_variation(&setup, &generic_eta(), &VARIATION_EPS, &th))),
        ("horizontal_variation", Box::new(|| check_horizontal_variation(&setup, &generic_direction(), &VARIATION_EPS, &th))),
        (
            "df_splitting",
            Box::new(|| {
                let f = fluid_lagrangian(&ellipse, n);
                let at = BodyCoords::new(&[0.3, 0.1, -0.2], &[0.7, -0.4, 0.9]);
                let dm = DVector::from_vec(vec![1.0, 0.2, -0.3]);
                let de = DVector::from_vec(vec![-0.5, 0.8, 0.3]);
                check_df_splitting(&f, &at, &dm, &de, &HALVING_STEPS, &th)
            }),
        ),
        ("torsion_free_coordinate", Box::new(|| check_torsion_free_identity(OneForm::Coordinate { i: 1, j: 2 }, &x, &ex, &ey, &HALVING_STEPS, &th))),
        ("torsion_free_exact", Box::new(|| check_torsion_free_identity(OneForm::Exact, &x, &v, &w, &HALVING_STEPS, &th))),
        ("torsion_free_wavy", Box::new(|| check_torsion_free_identity(OneForm::Wavy, &x, &v, &w, &HALVING_STEPS, &th))),
        ("connection_form", Box::new(|| check_connection_form_properties(&setup, &th))),
    ];
    let mut reports: Vec<CheckReport> =
        checks.par_iter().map(|(name, f)| f().unwrap_or_else(|e| CheckReport::errored(name, &e))).collect();
    reports.sort_by(|a, b| a.name.cmp(&b.name));
    reports
}
