//! Bracket, covariant derivative and curvature of the Neumann connection.
//!
//! The bracket is the negative Jacobi-Lie bracket, `[u, v] = -(u.grad v - v.grad u)`.
//! Derivatives of the connection along the base are central differences in
//! chart coordinates; fields at neighbouring base points are compared at
//! common spatial points, and points the body sweeps over are masked.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::DVector;

use crate::bodies::{BodyChart, BodyCoords, GeneralizedCovector, Mat2, Vec2};
use crate::panels::{Placement, SigmaField};
use crate::quad::{self, Cubature};
use crate::{Error, Result};

pub use crate::fields::VelocityField;

/// `[u, v]` from values and gradients at one point.
#[inline]
pub fn bracket_values(u: Vec2, ju: &Mat2, v: Vec2, jv: &Mat2) -> Vec2 {
    ju * v - jv * u
}

pub fn bracket_at(u: &dyn VelocityField, v: &dyn VelocityField, p: Vec2) -> Vec2 {
    bracket_values(u.velocity(p), &u.gradient(p), v.velocity(p), &v.gradient(p))
}

pub fn bracket(u: &dyn VelocityField, v: &dyn VelocityField, points: &[Vec2]) -> Vec<Vec2> {
    points.iter().map(|&p| bracket_at(u, v, p)).collect()
}

/// Placements of one chart at many base points, memoized by exact `q`.
pub struct SigmaFamily {
    pub chart: BodyChart,
    pub n_panels: usize,
    cache: Mutex<HashMap<Vec<u64>, Arc<Placement>>>,
}

impl SigmaFamily {
    pub fn new(chart: &BodyChart, n_panels: usize) -> Self {
        Self { chart: chart.clone(), n_panels, cache: Mutex::new(HashMap::new()) }
    }

    pub fn placement(&self, q: &DVector<f64>) -> Result<Arc<Placement>> {
        let key: Vec<u64> = q.iter().map(|v| v.to_bits()).collect();
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(Placement::new(&self.chart, q, self.n_panels)?);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() > 4096 {
            cache.clear();
        }
        cache.insert(key, p.clone());
        Ok(p)
    }

    pub fn sigma(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<SigmaField> {
        Ok(self.placement(q)?.sigma(qdot))
    }

    /// Largest boundary speed for chart velocity `dir` at `q`.
    pub fn boundary_speed(&self, q: &DVector<f64>, dir: &DVector<f64>) -> Result<f64> {
        let p = self.placement(q)?;
        let b = &p.boundary;
        let coords = BodyCoords { q: q.clone(), qdot: dir.clone() };
        Ok((0..b.len()).map(|i| self.chart.point_velocity(&coords, b.part[i], b.midpoints[i]).norm()).fold(0.0, f64::max))
    }

    /// Chart step along `dir` that moves the boundary by at most `displacement`.
    pub fn step_for(&self, q: &DVector<f64>, dir: &DVector<f64>, displacement: f64) -> Result<f64> {
        let s = self.boundary_speed(q, dir)?;
        Ok(if s > 0.0 { displacement / s } else { displacement })
    }
}

/// RK4 flow of a time-dependent field from `t0` to `t1` in `steps` steps.
pub fn flow<F>(field: F, x0: Vec2, t0: f64, t1: f64, steps: usize) -> Result<Vec2>
where
    F: Fn(f64, Vec2) -> Result<Vec2>,
{
    let h = (t1 - t0) / steps as f64;
    let mut x = x0;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = field(t, x)?;
        let k2 = field(t + 0.5 * h, x + 0.5 * h * k1)?;
        let k3 = field(t + 0.5 * h, x + 0.5 * h * k2)?;
        let k4 = field(t + h, x + h * k3)?;
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(x)
}

/// A vertical field along a base curve: `t -> (coords(t), xi(t))`.
pub type VerticalCurve<'a> = dyn Fn(f64) -> Result<(BodyCoords, Box<dyn VelocityField + 'a>)> + Sync + 'a;

/// `D xi/Dt = dxi/dt - [sigma(b, bdot), xi]` at `t0`, sampled at `points`.
/// `dxi/dt` is the central difference of the fields at fixed points.
pub fn covariant_derivative_vertical(
    family: &SigmaFamily,
    trajectory: &VerticalCurve<'_>,
    t0: f64,
    h: f64,
    points: &[Vec2],
) -> Result<Vec<Vec2>> {
    let (c0, xi0) = trajectory(t0)?;
    let (cp, xip) = trajectory(t0 + h)?;
    let (cm, xim) = trajectory(t0 - h)?;
    let has_body = family.chart.has_body();
    if has_body {
        for c in [&c0, &cp, &cm] {
            let b = family.placement(&c.q)?;
            if let Some(p) = points.iter().find(|&&p| b.boundary.contains(p)) {
                return Err(Error::InsideBody { x: p.x, y: p.y });
            }
        }
    }
    let sigma = if has_body { Some(family.sigma(&c0.q, &c0.qdot)?) } else { None };
    Ok(points
        .iter()
        .map(|&p| {
            let dxi = (xip.velocity(p) - xim.velocity(p)) / (2.0 * h);
            match &sigma {
                Some(s) => dxi - bracket_values(s.velocity(p), &s.gradient(p), xi0.velocity(p), &xi0.gradient(p)),
                None => dxi,
            }
        })
        .collect())
}

/// Curvature `C(v, w)` sampled at points.
#[derive(Clone, Debug)]
pub struct CurvatureSample {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
    pub points: Vec<Vec2>,
    pub values: Vec<Vec2>,
    /// Points within reach of the perturbed bodies; their values are zero.
    pub masked: Vec<bool>,
}

/// Default boundary displacement of the curvature differences, relative to
/// the chart length scale.
pub const CURVATURE_STEP: f64 = 1e-4;

/// `D_v sigma(w) + J_{sigma(w)} sigma(v)` at `p`, the half of `C(v, w)` whose
/// antisymmetrization is the curvature.
fn curvature_half(
    family: &SigmaFamily,
    q: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    ev: f64,
    points: &[Vec2],
) -> Result<Vec<Vec2>> {
    let p0 = family.placement(q)?;
    let pp = family.placement(&(q + ev * v))?;
    let pm = family.placement(&(q - ev * v))?;
    let (wp, wm) = (pp.sigma_strengths(w), pm.sigma_strengths(w));
    let (s_v, s_w) = (p0.sigma_strengths(v), p0.sigma_strengths(w));
    Ok(points
        .iter()
        .map(|&x| {
            let mut a = [Vec2::zeros(); 1];
            let mut b = [Vec2::zeros(); 1];
            pp.boundary.eval_multi(&[&wp], x, &mut a, None);
            pm.boundary.eval_multi(&[&wm], x, &mut b, None);
            let mut vel = [Vec2::zeros(); 2];
            let mut grad = [Mat2::zeros(); 2];
            p0.boundary.eval_multi(&[&s_v, &s_w], x, &mut vel, Some(&mut grad));
            (a[0] - b[0]) / (2.0 * ev) + grad[1] * vel[0]
        })
        .collect())
}

/// `C(v, w) = d sigma(v, w) - [sigma(v), sigma(w)]` at `points`, with
/// `d sigma(v, w) = D_v sigma(w) - D_w sigma(v)`.
///
/// `step` is the largest boundary displacement of the differences (default
/// `CURVATURE_STEP` times the chart scale). Points closer to the body than
/// three steps are masked; more than 10% masked is an error.
pub fn curvature(
    chart: &BodyChart,
    q: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    step: Option<f64>,
    points: &[Vec2],
    n_panels: usize,
) -> Result<CurvatureSample> {
    let family = SigmaFamily::new(chart, n_panels);
    curvature_in(&family, q, v, w, step, points)
}

pub fn curvature_in(
    family: &SigmaFamily,
    q: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    step: Option<f64>,
    points: &[Vec2],
) -> Result<CurvatureSample> {
    let chart = &family.chart;
    for d in [v, w] {
        if d.len() != chart.dim() {
            return Err(Error::Dimension { expected: chart.dim(), got: d.len() });
        }
    }
    let disp = step.unwrap_or(CURVATURE_STEP * chart.scale());
    let p0 = family.placement(q)?;
    let masked: Vec<bool> = points.iter().map(|&x| p0.boundary.signed_distance(x) < 3.0 * disp).collect();
    let n_masked = masked.iter().filter(|&&m| m).count();
    if n_masked * 10 > points.len() {
        return Err(Error::Masked { fraction: 100.0 * n_masked as f64 / points.len() as f64 });
    }
    let live: Vec<Vec2> = points.iter().zip(&masked).filter(|(_, &m)| !m).map(|(p, _)| *p).collect();
    let ev = family.step_for(q, v, disp)?;
    let ew = family.step_for(q, w, disp)?;
    let a = curvature_half(family, q, v, w, ev, &live)?;
    let b = curvature_half(family, q, w, v, ew, &live)?;
    let mut it = a.iter().zip(&b).map(|(x, y)| x - y);
    let values = masked.iter().map(|&m| if m { Vec2::zeros() } else { it.next().unwrap() }).collect();
    Ok(CurvatureSample { q: q.clone(), v: v.clone(), w: w.clone(), points: points.to_vec(), values, masked })
}

/// Boundary displacement of the differences inside curvature-force integrands.
pub const FORCE_STEP: f64 = 1e-6;

/// Masked fraction of quadrature points.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MaskStats {
    pub evaluated: usize,
    pub masked: usize,
}

impl MaskStats {
    pub fn fraction(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.masked as f64 / self.evaluated as f64
        }
    }
}

/// `j -> int <u, C(qdot, e_j)>` over the truncated fluid domain.
pub fn curvature_force(
    chart: &BodyChart,
    coords: &BodyCoords,
    u: &dyn VelocityField,
    n_panels: usize,
    opts: &Cubature,
) -> Result<(GeneralizedCovector, MaskStats)> {
    chart.check(coords)?;
    let dim = chart.dim();
    if coords.qdot.iter().all(|&v| v == 0.0) || dim == 0 {
        return Ok((DVector::zeros(dim), MaskStats::default()));
    }
    let family = SigmaFamily::new(chart, n_panels);
    let q = &coords.q;
    let qd = &coords.qdot;
    let disp = FORCE_STEP * chart.scale();
    let p0 = family.placement(q)?;
    let e_qd = family.step_for(q, qd, disp)?;
    let pp = family.placement(&(q + e_qd * qd))?;
    let pm = family.placement(&(q - e_qd * qd))?;
    let mut per_dir = Vec::with_capacity(dim);
    for j in 0..dim {
        let e = DVector::from_fn(dim, |i, _| if i == j { 1.0 } else { 0.0 });
        let ej = family.step_for(q, &e, disp)?;
        let a = family.placement(&(q + ej * &e))?;
        let b = family.placement(&(q - ej * &e))?;
        let (sa, sb) = (a.sigma_strengths(qd), b.sigma_strengths(qd));
        per_dir.push((ej, a, b, sa, sb));
    }
    let s_qd = p0.sigma_strengths(qd);
    let mut at_q: Vec<&DVector<f64>> = vec![&s_qd];
    at_q.extend(p0.basis.iter());
    let plus: Vec<&DVector<f64>> = pp.basis.iter().collect();
    let minus: Vec<&DVector<f64>> = pm.basis.iter().collect();
    let evaluated = AtomicUsize::new(0);
    let masked = AtomicUsize::new(0);
    let margin = 3.0 * disp;
    let integrand = |x: Vec2| -> Vec<f64> {
        evaluated.fetch_add(1, Ordering::Relaxed);
        if p0.boundary.signed_distance(x) < margin {
            masked.fetch_add(1, Ordering::Relaxed);
            return vec![0.0; dim];
        }
        let mut vel = [Vec2::zeros(); 5];
        let mut grad = [Mat2::zeros(); 5];
        p0.boundary.eval_multi(&at_q, x, &mut vel[..=dim], Some(&mut grad[..=dim]));
        let mut vp = [Vec2::zeros(); 4];
        let mut vm = [Vec2::zeros(); 4];
        pp.boundary.eval_multi(&plus, x, &mut vp[..dim], None);
        pm.boundary.eval_multi(&minus, x, &mut vm[..dim], None);
        let ux = u.velocity(x);
        (0..dim)
            .map(|j| {
                let (ej, a, b, sa, sb) = &per_dir[j];
                let mut wa = [Vec2::zeros(); 1];
                let mut wb = [Vec2::zeros(); 1];
                a.boundary.eval_multi(&[sa], x, &mut wa, None);
                b.boundary.eval_multi(&[sb], x, &mut wb, None);
                let c = (vp[j] - vm[j]) / (2.0 * e_qd) - (wa[0] - wb[0]) / (2.0 * ej)
                    - bracket_values(vel[0], &grad[0], vel[j + 1], &grad[j + 1]);
                ux.dot(&c)
            })
            .collect()
    };
    let patches = quad::fluid_patches(&p0.boundary, quad::truncation_radius(&p0.boundary))?;
    let res = quad::integrate(&patches, dim, opts, &integrand)?;
    let stats = MaskStats { evaluated: evaluated.load(Ordering::Relaxed), masked: masked.load(Ordering::Relaxed) };
    Ok((DVector::from_vec(res.value), stats))
}
