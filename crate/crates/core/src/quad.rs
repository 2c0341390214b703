//! Line and area quadrature.
//!
//! Area integrals over the fluid use polar patches about a point from which
//! the body is star-shaped: one patch per panel between the panel and a
//! circle, then an annulus out to the truncation radius. Each patch is mapped
//! to the unit square and integrated by a globally adaptive degree-7 rule
//! with an embedded degree-5 error estimate.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::bodies::{cross, Vec2};
use crate::panels::PanelBoundary;
use crate::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Radial bound of a polar patch as a function of the polar angle.
#[derive(Clone, Copy, Debug)]
pub enum RadialBound {
    Const(f64),
    /// The straight line through `point` with unit normal `normal`.
    Line { point: Vec2, normal: Vec2 },
}

impl RadialBound {
    fn radius(&self, center: Vec2, dir: Vec2) -> f64 {
        match *self {
            RadialBound::Const(r) => r,
            RadialBound::Line { point, normal } => (point - center).dot(&normal) / dir.dot(&normal),
        }
    }
}

/// Radial parametrisation of a patch.
#[derive(Clone, Copy, Debug)]
pub enum Grading {
    Linear,
    /// Distance from the inner bound is `h (e^tau - 1)`: uniform resolution
    /// `h` near the inner bound, logarithmic far from it.
    Exponential(f64),
}

/// `{center + r (cos t, sin t) : t in [t0, t1], inner(t) <= r <= outer(t)}`.
#[derive(Clone, Copy, Debug)]
pub struct Patch {
    pub center: Vec2,
    pub t0: f64,
    pub t1: f64,
    pub inner: RadialBound,
    pub outer: RadialBound,
    pub grading: Grading,
}

impl Patch {
    /// Point and area element for unit-square coordinates `(s, t)`.
    fn map(&self, s: f64, t: f64) -> (Vec2, f64) {
        let th = self.t0 + s * (self.t1 - self.t0);
        let dir = Vec2::new(th.cos(), th.sin());
        let r0 = self.inner.radius(self.center, dir);
        let r1 = self.outer.radius(self.center, dir);
        let (r, dr) = match self.grading {
            Grading::Linear => (r0 + t * (r1 - r0), r1 - r0),
            Grading::Exponential(h) => {
                let tau_max = (1.0 + (r1 - r0) / h).ln();
                let e = (t * tau_max).exp();
                (r0 + h * (e - 1.0), h * e * tau_max)
            }
        };
        (self.center + r * dir, r * dr * (self.t1 - self.t0))
    }
}

/// Tolerances and budget for adaptive cubature.
#[derive(Clone, Copy, Debug)]
pub struct Cubature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
    /// Initial cells per patch along the angular and radial directions.
    pub initial: [usize; 2],
}

impl Default for Cubature {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-6, max_evals: 2_000_000, initial: [1, 4] }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Vec<f64>,
    pub error: f64,
    pub evals: usize,
}

struct Cell {
    patch: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    value: Vec<f64>,
    error: f64,
    axis: usize,
}

const L2: f64 = 0.358_568_582_800_318_1; // sqrt(9/70)
const L4: f64 = 0.948_683_298_050_513_8; // sqrt(9/10)
const L5: f64 = 0.688_247_201_611_685_3; // sqrt(9/19)
const W7: [f64; 5] = [-3816.0 / 19683.0, 980.0 / 6561.0, 1020.0 / 19683.0, 200.0 / 19683.0, 6859.0 / 78732.0];
const W5: [f64; 4] = [-971.0 / 729.0, 245.0 / 486.0, 65.0 / 1458.0, 25.0 / 729.0];

fn eval_cell<F>(patch: &Patch, lo: [f64; 2], hi: [f64; 2], k: usize, f: &F) -> (Vec<f64>, f64, usize)
where
    F: Fn(Vec2) -> Vec<f64> + Sync,
{
    let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let h = [0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1])];
    let vol = 4.0 * h[0] * h[1];
    let g = |a: f64, b: f64| -> Vec<f64> {
        let (p, jac) = patch.map(c[0] + a * h[0], c[1] + b * h[1]);
        let mut v = f(p);
        for x in v.iter_mut() {
            *x *= jac;
        }
        v
    };
    let f0 = g(0.0, 0.0);
    let mut s = [vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    let mut diff = [0.0f64; 2];
    for axis in 0..2 {
        let e = |l: f64| if axis == 0 { (l, 0.0) } else { (0.0, l) };
        let (a, b) = e(L2);
        let p2 = g(a, b);
        let m2 = g(-a, -b);
        let (a, b) = e(L4);
        let p3 = g(a, b);
        let m3 = g(-a, -b);
        let mut d = 0.0f64;
        for i in 0..k {
            s[1][i] += p2[i] + m2[i];
            s[2][i] += p3[i] + m3[i];
            let fourth = (p2[i] + m2[i] - 2.0 * f0[i]) - (L2 * L2 / (L4 * L4)) * (p3[i] + m3[i] - 2.0 * f0[i]);
            d = d.max(fourth.abs());
        }
        diff[axis] = d;
    }
    for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let v4 = g(sa * L4, sb * L4);
        let v5 = g(sa * L5, sb * L5);
        for i in 0..k {
            s[3][i] += v4[i];
            s[4][i] += v5[i];
        }
    }
    let mut value = vec![0.0; k];
    let mut err = 0.0f64;
    for i in 0..k {
        let i7 = W7[0] * f0[i] + W7[1] * s[1][i] + W7[2] * s[2][i] + W7[3] * s[3][i] + W7[4] * s[4][i];
        let i5 = W5[0] * f0[i] + W5[1] * s[1][i] + W5[2] * s[2][i] + W5[3] * s[3][i];
        value[i] = vol * i7;
        err = err.max((vol * (i7 - i5)).abs());
    }
    let axis = if (diff[0] - diff[1]).abs() <= 1e-14 * diff[0].max(diff[1]) {
        if h[0] >= h[1] { 0 } else { 1 }
    } else if diff[0] > diff[1] {
        0
    } else {
        1
    };
    (value, err, axis)
}

/// Globally adaptive integration of a `k`-component integrand over patches.
/// The result is independent of thread count: cells are refined in a fixed
/// order and summed in a fixed order.
pub fn integrate<F>(patches: &[Patch], k: usize, opts: &Cubature, f: &F) -> Result<QuadResult>
where
    F: Fn(Vec2) -> Vec<f64> + Sync,
{
    const PER_CELL: usize = 17;
    let mut seeds = Vec::new();
    for (pi, _) in patches.iter().enumerate() {
        let [na, nr] = opts.initial;
        for a in 0..na {
            for r in 0..nr {
                seeds.push((
                    pi,
                    [a as f64 / na as f64, r as f64 / nr as f64],
                    [(a + 1) as f64 / na as f64, (r + 1) as f64 / nr as f64],
                ));
            }
        }
    }
    let make = |&(pi, lo, hi): &(usize, [f64; 2], [f64; 2])| {
        let (value, error, axis) = eval_cell(&patches[pi], lo, hi, k, f);
        Cell { patch: pi, lo, hi, value, error, axis }
    };
    let mut cells: Vec<Cell> = seeds.par_iter().map(make).collect();
    let mut evals = cells.len() * PER_CELL;
    loop {
        let mut total = vec![0.0; k];
        let mut err = 0.0;
        for c in &cells {
            for i in 0..k {
                total[i] += c.value[i];
            }
            err += c.error;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = opts.abs_tol.max(opts.rel_tol * scale);
        if err <= tol {
            return Ok(QuadResult { value: total, error: err, evals });
        }
        if evals >= opts.max_evals {
            return Err(Error::Quadrature { estimate: err, tolerance: tol });
        }
        // Split the worst cells carrying half of the excess error.
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| cells[b].error.partial_cmp(&cells[a].error).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut picked = Vec::new();
        let mut acc = 0.0;
        for &i in &order {
            picked.push(i);
            acc += cells[i].error;
            if acc >= 0.5 * (err - 0.5 * tol) || picked.len() * 2 * PER_CELL + evals >= opts.max_evals {
                break;
            }
        }
        picked.sort_unstable();
        let mut jobs = Vec::with_capacity(2 * picked.len());
        for &i in &picked {
            let c = &cells[i];
            let mid = 0.5 * (c.lo[c.axis] + c.hi[c.axis]);
            let mut hi_a = c.hi;
            hi_a[c.axis] = mid;
            let mut lo_b = c.lo;
            lo_b[c.axis] = mid;
            jobs.push((c.patch, c.lo, hi_a));
            jobs.push((c.patch, lo_b, c.hi));
        }
        let children: Vec<Cell> = jobs.par_iter().map(make).collect();
        evals += children.len() * PER_CELL;
        let mut next = Vec::with_capacity(cells.len() + picked.len());
        let mut pi = 0;
        for (i, c) in cells.into_iter().enumerate() {
            if pi < picked.len() && picked[pi] == i {
                pi += 1;
            } else {
                next.push(c);
            }
        }
        next.extend(children);
        cells = next;
    }
}

/// Truncation radius for fluid integrals: fifty body diameters.
pub fn truncation_radius(boundary: &PanelBoundary) -> f64 {
    50.0 * boundary.diameter()
}

/// Patches covering the fluid between the body and the circle of radius
/// `r_max` about the star centre of the boundary.
pub fn fluid_patches(boundary: &PanelBoundary, r_max: f64) -> Result<Vec<Patch>> {
    let c = boundary.star_center;
    let mut r_body: f64 = 0.0;
    for p in &boundary.endpoints {
        r_body = r_body.max((p - c).norm());
    }
    let r_near = 1.5 * r_body;
    if r_max <= r_near {
        return Err(Error::Invalid("truncation radius inside the near zone".into()));
    }
    let h = boundary.mean_length();
    let mut patches = Vec::with_capacity(boundary.len() + 16);
    for i in 0..boundary.len() {
        let a = boundary.endpoints[i] - c;
        let b = boundary.endpoints[i + 1] - c;
        if cross(a, b) <= 0.0 || a.dot(&boundary.normals[i]) <= 0.0 {
            return Err(Error::Invalid("body is not star-shaped about its centre".into()));
        }
        let t0 = a.y.atan2(a.x);
        let mut t1 = b.y.atan2(b.x);
        while t1 <= t0 {
            t1 += 2.0 * PI;
        }
        patches.push(Patch {
            center: c,
            t0,
            t1,
            inner: RadialBound::Line { point: boundary.endpoints[i], normal: boundary.normals[i] },
            outer: RadialBound::Const(r_near),
            grading: Grading::Exponential(h),
        });
    }
    patches.extend(annulus_patches(c, r_near, r_max, 16, Grading::Exponential(r_near)));
    Ok(patches)
}

/// Patches covering the body interior, fanned from the star centre.
pub fn interior_patches(boundary: &PanelBoundary) -> Vec<Patch> {
    let c = boundary.star_center;
    (0..boundary.len())
        .map(|i| {
            let a = boundary.endpoints[i] - c;
            let b = boundary.endpoints[i + 1] - c;
            let t0 = a.y.atan2(a.x);
            let mut t1 = b.y.atan2(b.x);
            while t1 <= t0 {
                t1 += 2.0 * PI;
            }
            Patch {
                center: c,
                t0,
                t1,
                inner: RadialBound::Const(0.0),
                outer: RadialBound::Line { point: boundary.endpoints[i], normal: boundary.normals[i] },
                grading: Grading::Linear,
            }
        })
        .collect()
}

pub fn annulus_patches(center: Vec2, r_in: f64, r_out: f64, sectors: usize, grading: Grading) -> Vec<Patch> {
    (0..sectors)
        .map(|k| Patch {
            center,
            t0: 2.0 * PI * k as f64 / sectors as f64,
            t1: 2.0 * PI * (k + 1) as f64 / sectors as f64,
            inner: RadialBound::Const(r_in),
            outer: RadialBound::Const(r_out),
            grading,
        })
        .collect()
}

/// Composite Gauss-Legendre integral of `f` along the segment `a -> b`
/// (with respect to arc length), using `pieces` subintervals of order `n`.
pub fn segment_integral<F>(a: Vec2, b: Vec2, pieces: usize, n: usize, f: F) -> f64
where
    F: Fn(Vec2) -> f64,
{
    let (x, w) = gauss_legendre(n);
    let len = (b - a).norm();
    let mut sum = 0.0;
    for p in 0..pieces {
        let s0 = p as f64 / pieces as f64;
        let hs = 0.5 / pieces as f64;
        for j in 0..n {
            let s = s0 + hs * (1.0 + x[j]);
            sum += w[j] * hs * f(a + (b - a) * s);
        }
    }
    sum * len
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(5);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((int - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn annulus_area_and_moment() {
        let p = annulus_patches(Vec2::zeros(), 1.0, 2.0, 4, Grading::Linear);
        let r = integrate(&p, 2, &Cubature::default(), &|x: Vec2| vec![1.0, x.norm_squared()]).unwrap();
        assert!((r.value[0] - 3.0 * PI).abs() < 1e-12);
        assert!((r.value[1] - 0.5 * PI * 15.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_resolves_a_narrow_gaussian() {
        let p = annulus_patches(Vec2::zeros(), 0.5, 20.0, 8, Grading::Exponential(0.5));
        let c = Vec2::new(2.0, 1.0);
        let d = 0.05;
        let opts = Cubature { abs_tol: 1e-9, rel_tol: 1e-9, ..Default::default() };
        let r = integrate(&p, 1, &opts, &|x: Vec2| vec![(-(x - c).norm_squared() / (d * d)).exp() / (PI * d * d)]).unwrap();
        assert!((r.value[0] - 1.0).abs() < 1e-8, "{}", r.value[0]);
    }
}
