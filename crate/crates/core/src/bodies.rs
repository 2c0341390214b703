//! Body configuration charts, body Lagrangians and boundary embeddings.
//!
//! Rigid charts use `q = (theta, x, y)`. The two-link chart uses
//! `q = (phi1, phi2, x, y)` with `(x, y)` the hinge and `phi_i` the angle of
//! link `i` to the x axis. Angles are stored unwrapped.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::panels::PanelBoundary;
use crate::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;
/// Pairs with chart velocities; holds forces and momenta.
pub type GeneralizedCovector = DVector<f64>;

/// Rotation by +90 degrees.
#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[inline]
pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2::new(c, -s, s, c)
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn default_half_width() -> f64 {
    0.1
}

/// A finite-dimensional family of body placements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyChart {
    /// No body at all; the fluid fills the plane.
    Empty,
    RigidDisc {
        radius: f64,
        /// Defaults to the displaced fluid mass `pi r^2` (unit density).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<f64>,
        /// Defaults to `mass r^2 / 2`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inertia: Option<f64>,
    },
    RigidEllipse {
        /// Semi-major axis, along the body x axis.
        a: f64,
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inertia: Option<f64>,
    },
    /// Two rigid links joined by a torsion spring at a hinge. Link `i` runs
    /// from the hinge to `hinge + 2 L_i (cos phi_i, sin phi_i)`; its centre of
    /// mass sits at the middle of the link.
    TwoLink {
        half_lengths: [f64; 2],
        masses: [f64; 2],
        inertias: [f64; 2],
        #[serde(default)]
        spring: f64,
        #[serde(default)]
        rest_angle: f64,
        /// Half thickness of the capsule around each link.
        #[serde(default = "default_half_width")]
        half_width: f64,
    },
}

/// Chart position and velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyCoords {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl BodyCoords {
    pub fn new(q: &[f64], qdot: &[f64]) -> Self {
        Self { q: DVector::from_column_slice(q), qdot: DVector::from_column_slice(qdot) }
    }

    pub fn at_rest(q: &[f64]) -> Self {
        Self { q: DVector::from_column_slice(q), qdot: DVector::zeros(q.len()) }
    }
}

/// Proper rigid motion `x -> R(angle) x + shift`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub angle: f64,
    pub shift: Vec2,
}

impl Frame {
    pub fn apply(&self, p: Vec2) -> Vec2 {
        rotation(self.angle) * p + self.shift
    }
}

impl BodyChart {
    pub fn dim(&self) -> usize {
        match self {
            BodyChart::Empty => 0,
            BodyChart::RigidDisc { .. } | BodyChart::RigidEllipse { .. } => 3,
            BodyChart::TwoLink { .. } => 4,
        }
    }

    pub fn has_body(&self) -> bool {
        !matches!(self, BodyChart::Empty)
    }

    pub fn coordinate_names(&self) -> &'static [&'static str] {
        match self {
            BodyChart::Empty => &[],
            BodyChart::RigidDisc { .. } | BodyChart::RigidEllipse { .. } => &["theta", "x", "y"],
            BodyChart::TwoLink { .. } => &["phi1", "phi2", "x", "y"],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidChart(m.to_string()));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            BodyChart::Empty => Ok(()),
            BodyChart::RigidDisc { radius, mass, inertia } => {
                if !pos(radius) {
                    return bad("radius must be positive");
                }
                if !mass.is_none_or(pos) || !inertia.is_none_or(pos) {
                    return bad("mass and inertia must be positive");
                }
                Ok(())
            }
            BodyChart::RigidEllipse { a, b, mass, inertia } => {
                if !(pos(b) && a.is_finite() && a >= b) {
                    return bad("ellipse needs a >= b > 0");
                }
                if !mass.is_none_or(pos) || !inertia.is_none_or(pos) {
                    return bad("mass and inertia must be positive");
                }
                Ok(())
            }
            BodyChart::TwoLink { half_lengths, masses, inertias, spring, rest_angle, half_width } => {
                if !half_lengths.iter().chain(&masses).chain(&inertias).all(|&v| pos(v)) {
                    return bad("link half-lengths, masses and inertias must be positive");
                }
                if !(spring.is_finite() && spring >= 0.0) || !rest_angle.is_finite() {
                    return bad("spring constant must be non-negative");
                }
                if !pos(half_width) || half_width >= half_lengths[0].min(half_lengths[1]) {
                    return bad("half width must be positive and smaller than both half-lengths");
                }
                Ok(())
            }
        }
    }

    /// Largest extent of the body; sets finite-difference and domain scales.
    pub fn scale(&self) -> f64 {
        match *self {
            BodyChart::Empty => 1.0,
            BodyChart::RigidDisc { radius, .. } => 2.0 * radius,
            BodyChart::RigidEllipse { a, .. } => 2.0 * a,
            BodyChart::TwoLink { half_lengths, half_width, .. } => {
                2.0 * (half_lengths[0] + half_lengths[1]) + 2.0 * half_width
            }
        }
    }

    pub fn check(&self, coords: &BodyCoords) -> Result<()> {
        let d = self.dim();
        for len in [coords.q.len(), coords.qdot.len()] {
            if len != d {
                return Err(Error::Dimension { expected: d, got: len });
            }
        }
        if coords.q.iter().chain(coords.qdot.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite chart coordinates".into()));
        }
        Ok(())
    }

    fn check_q(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: q.len() });
        }
        Ok(())
    }

    fn rigid_mass(&self) -> (f64, f64) {
        match *self {
            BodyChart::RigidDisc { radius, mass, inertia } => {
                let m = mass.unwrap_or(PI * radius * radius);
                (m, inertia.unwrap_or(0.5 * m * radius * radius))
            }
            BodyChart::RigidEllipse { a, b, mass, inertia } => {
                let m = mass.unwrap_or(PI * a * b);
                (m, inertia.unwrap_or(0.25 * m * (a * a + b * b)))
            }
            _ => unreachable!("rigid_mass on a non-rigid chart"),
        }
    }

    /// Body mass matrix: kinetic energy is `qdot^T M(q) qdot / 2`.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match *self {
            BodyChart::Empty => DMatrix::zeros(0, 0),
            BodyChart::RigidDisc { .. } | BodyChart::RigidEllipse { .. } => {
                let (m, i) = self.rigid_mass();
                DMatrix::from_diagonal(&DVector::from_column_slice(&[i, m, m]))
            }
            BodyChart::TwoLink { half_lengths, masses, inertias, .. } => {
                let mut mm = DMatrix::zeros(4, 4);
                for k in 0..2 {
                    let (s, c) = q[k].sin_cos();
                    let l = half_lengths[k];
                    // Jacobian of the link centre velocity w.r.t. (phi_k, x, y).
                    let cols = [(k, Vec2::new(-l * s, l * c)), (2, Vec2::new(1.0, 0.0)), (3, Vec2::new(0.0, 1.0))];
                    for &(a, ja) in &cols {
                        for &(b, jb) in &cols {
                            mm[(a, b)] += masses[k] * ja.dot(&jb);
                        }
                    }
                    mm[(k, k)] += inertias[k];
                }
                mm
            }
        }
    }

    pub fn potential(&self, q: &DVector<f64>) -> f64 {
        match *self {
            BodyChart::TwoLink { spring, rest_angle, .. } => {
                let e = q[0] - q[1] - rest_angle;
                0.5 * spring * e * e
            }
            _ => 0.0,
        }
    }

    pub fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        if let BodyChart::TwoLink { spring, rest_angle, .. } = *self {
            let f = spring * (q[0] - q[1] - rest_angle);
            g[0] = f;
            g[1] = -f;
        }
        g
    }

    /// Velocity-dependent and conservative terms of the body equation:
    /// `d/dt(dL/dqdot) - dL/dq = M(q) qddot + bias(q, qdot)`.
    pub fn bias(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> DVector<f64> {
        let mut h = self.potential_gradient(q);
        if let BodyChart::TwoLink { half_lengths, masses, .. } = *self {
            for k in 0..2 {
                let (s, c) = q[k].sin_cos();
                let w2 = qdot[k] * qdot[k];
                // Centripetal acceleration of the link centre projected on x and y;
                // its projection on phi_k vanishes identically.
                h[2] -= masses[k] * half_lengths[k] * w2 * c;
                h[3] -= masses[k] * half_lengths[k] * w2 * s;
            }
        }
        h
    }

    /// Pure rigid motion carrying the canonical placement onto `q`, plus the
    /// canonical coordinates. Boundary-integral operators are invariant under
    /// rigid motions, so solvers are built once per canonical shape.
    pub fn canonical(&self, q: &DVector<f64>) -> (DVector<f64>, Frame) {
        match self {
            BodyChart::Empty => (DVector::zeros(0), Frame { angle: 0.0, shift: Vec2::zeros() }),
            BodyChart::RigidDisc { .. } | BodyChart::RigidEllipse { .. } => {
                (DVector::zeros(3), Frame { angle: q[0], shift: Vec2::new(q[1], q[2]) })
            }
            BodyChart::TwoLink { .. } => (
                DVector::from_column_slice(&[q[0] - q[1], 0.0, 0.0, 0.0]),
                Frame { angle: q[1], shift: Vec2::new(q[2], q[3]) },
            ),
        }
    }

    /// Point about which the body is star-shaped: the centre of a rigid body,
    /// the hinge of the two-link body.
    pub fn star_center(&self, q: &DVector<f64>) -> Vec2 {
        match self {
            BodyChart::Empty => Vec2::zeros(),
            BodyChart::RigidDisc { .. } | BodyChart::RigidEllipse { .. } => Vec2::new(q[1], q[2]),
            BodyChart::TwoLink { .. } => Vec2::new(q[2], q[3]),
        }
    }

    /// Velocity of the material point currently at `x` on rigid part `part`
    /// when the chart moves with unit velocity along coordinate `j`.
    pub fn basis_velocity(&self, q: &DVector<f64>, part: usize, j: usize, x: Vec2) -> Vec2 {
        let c = self.star_center(q);
        match self {
            BodyChart::Empty => Vec2::zeros(),
            BodyChart::RigidDisc { .. } | BodyChart::RigidEllipse { .. } => match j {
                0 => perp(x - c),
                1 => Vec2::new(1.0, 0.0),
                _ => Vec2::new(0.0, 1.0),
            },
            BodyChart::TwoLink { .. } => match j {
                0 | 1 if j == part => perp(x - c),
                0 | 1 => Vec2::zeros(),
                2 => Vec2::new(1.0, 0.0),
                _ => Vec2::new(0.0, 1.0),
            },
        }
    }

    pub fn point_velocity(&self, coords: &BodyCoords, part: usize, x: Vec2) -> Vec2 {
        let mut v = Vec2::zeros();
        for j in 0..self.dim() {
            if coords.qdot[j] != 0.0 {
                v += coords.qdot[j] * self.basis_velocity(&coords.q, part, j, x);
            }
        }
        v
    }

    fn canonical_vertices(&self, canon: &DVector<f64>, n: usize) -> Result<(Vec<Vec2>, Vec<usize>)> {
        match *self {
            BodyChart::Empty => Err(Error::InvalidChart("empty chart has no boundary".into())),
            BodyChart::RigidDisc { radius, .. } => Ok((
                (0..n)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / n as f64;
                        Vec2::new(radius * t.cos(), radius * t.sin())
                    })
                    .collect(),
                vec![0; n],
            )),
            BodyChart::RigidEllipse { a, b, .. } => Ok((
                (0..n)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / n as f64;
                        Vec2::new(a * t.cos(), b * t.sin())
                    })
                    .collect(),
                vec![0; n],
            )),
            BodyChart::TwoLink { half_lengths, half_width, .. } => {
                two_link_vertices(half_lengths, half_width, canon[0], 0.0, n)
            }
        }
    }
}

/// Panels per boundary piece of the two-link capsule, fixed by the straight
/// reference configuration so that panel labels never change with `q`.
fn two_link_counts(l: [f64; 2], w: f64, n: usize) -> [usize; 6] {
    let lens = [2.0 * l[0], PI * w, 2.0 * l[0], 2.0 * l[1], PI * w, 2.0 * l[1]];
    let total: f64 = lens.iter().sum();
    let mut counts = [0usize; 6];
    let mut rema = [0.0; 6];
    for k in 0..6 {
        let exact = n as f64 * lens[k] / total;
        counts[k] = (exact.floor() as usize).max(2);
        rema[k] = exact - exact.floor();
    }
    let mut sum: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| rema[j].partial_cmp(&rema[i]).unwrap().then(i.cmp(&j)));
    let mut k = 0;
    while sum < n {
        counts[order[k % 6]] += 1;
        sum += 1;
        k += 1;
    }
    while sum > n {
        let i = (0..6).max_by_key(|&i| (counts[i], 6 - i)).unwrap();
        counts[i] -= 1;
        sum -= 1;
    }
    counts
}

/// Mitered capsule outline, counter-clockwise: right side of link 1, tip 1,
/// left side of link 1, right side of link 2, tip 2, left side of link 2.
/// The two strips meet on the bisector through the hinge, so the enclosed
/// area is the same for every hinge angle.
fn two_link_vertices(l: [f64; 2], w: f64, phi1: f64, phi2: f64, n: usize) -> Result<(Vec<Vec2>, Vec<usize>)> {
    let counts = two_link_counts(l, w, n);
    let ang = [phi1, phi2];
    let d = [Vec2::new(phi1.cos(), phi1.sin()), Vec2::new(phi2.cos(), phi2.sin())];
    let nl = [perp(d[0]), perp(d[1])];
    let denom = 1.0 - nl[0].dot(&nl[1]);
    if denom < 1e-12 {
        return Err(Error::SelfIntersecting);
    }
    // ja is on the left of link 1 and the right of link 2; jb mirrors it.
    let ja = w * (nl[0] - nl[1]) / denom;
    let jb = -ja;
    for (k, j) in [(0, jb), (0, ja), (1, ja), (1, jb)] {
        if j.dot(&d[k]) >= 2.0 * l[k] - 1e-9 {
            return Err(Error::SelfIntersecting);
        }
    }
    let tip = [2.0 * l[0] * d[0], 2.0 * l[1] * d[1]];
    let mut pts = Vec::with_capacity(n);
    let mut parts = Vec::with_capacity(n);
    let mut side = |from: Vec2, to: Vec2, m: usize, part: usize, pts: &mut Vec<Vec2>| {
        for i in 0..m {
            pts.push(from + (to - from) * (i as f64 / m as f64));
            parts.push(part);
        }
    };
    let cap = |k: usize, m: usize, pts: &mut Vec<Vec2>| {
        for i in 0..m {
            let t = ang[k] - PI / 2.0 + PI * i as f64 / m as f64;
            pts.push(tip[k] + w * Vec2::new(t.cos(), t.sin()));
        }
    };
    side(jb, tip[0] - w * nl[0], counts[0], 0, &mut pts);
    cap(0, counts[1], &mut pts);
    side(tip[0] + w * nl[0], ja, counts[2], 0, &mut pts);
    side(ja, tip[1] - w * nl[1], counts[3], 1, &mut pts);
    cap(1, counts[4], &mut pts);
    side(tip[1] + w * nl[1], jb, counts[5], 1, &mut pts);
    let mut part = Vec::with_capacity(n);
    for (k, &c) in counts.iter().enumerate() {
        part.extend(std::iter::repeat_n(if k < 3 { 0 } else { 1 }, c));
    }
    Ok((pts, part))
}

/// Kinetic minus potential energy of the body alone.
pub fn body_lagrangian(chart: &BodyChart, coords: &BodyCoords) -> Result<f64> {
    chart.check(coords)?;
    let m = chart.mass_matrix(&coords.q);
    Ok(0.5 * coords.qdot.dot(&(&m * &coords.qdot)) - chart.potential(&coords.q))
}

/// Analytic `(dL/dq, dL/dqdot)`.
pub fn body_lagrangian_derivatives(
    chart: &BodyChart,
    coords: &BodyCoords,
) -> Result<(GeneralizedCovector, GeneralizedCovector)> {
    chart.check(coords)?;
    let q = &coords.q;
    let qd = &coords.qdot;
    let p = chart.mass_matrix(q) * qd;
    let mut dq = -chart.potential_gradient(q);
    if let BodyChart::TwoLink { half_lengths, masses, .. } = *chart {
        for k in 0..2 {
            let (s, c) = q[k].sin_cos();
            let l = half_lengths[k];
            let v = Vec2::new(qd[2] - l * s * qd[k], qd[3] + l * c * qd[k]);
            let dv = Vec2::new(-l * c * qd[k], -l * s * qd[k]);
            dq[k] += masses[k] * v.dot(&dv);
        }
    }
    Ok((dq, p))
}

/// Closed panel outline of the body at `q`.
pub fn embed_boundary(chart: &BodyChart, q: &DVector<f64>, n_panels: usize) -> Result<PanelBoundary> {
    chart.check_q(q)?;
    if n_panels < 16 {
        return Err(Error::Invalid(format!("at least 16 panels required, got {n_panels}")));
    }
    let (canon, frame) = chart.canonical(q);
    let (verts, parts) = chart.canonical_vertices(&canon, n_panels)?;
    let (ref_verts, _) = match chart {
        BodyChart::TwoLink { .. } => chart.canonical_vertices(&DVector::from_column_slice(&[PI, 0.0, 0.0, 0.0]), n_panels)?,
        _ => (verts.clone(), parts.clone()),
    };
    let mut labels = Vec::with_capacity(n_panels);
    let mut s = 0.0;
    for i in 0..n_panels {
        let len = (ref_verts[(i + 1) % n_panels] - ref_verts[i]).norm();
        labels.push(s + 0.5 * len);
        s += len;
    }
    let placed: Vec<Vec2> = verts.iter().map(|&p| frame.apply(p)).collect();
    let b = PanelBoundary::from_vertices(&placed, parts, labels, chart.star_center(q))?;
    if matches!(chart, BodyChart::TwoLink { .. }) && b.self_intersects() {
        return Err(Error::SelfIntersecting);
    }
    Ok(b)
}

/// Body velocity at every panel midpoint.
pub fn boundary_velocity(chart: &BodyChart, coords: &BodyCoords, boundary: &PanelBoundary) -> Result<Vec<Vec2>> {
    chart.check(coords)?;
    Ok((0..boundary.len()).map(|i| chart.point_velocity(coords, boundary.part[i], boundary.midpoints[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_links(k: f64) -> BodyChart {
        BodyChart::TwoLink {
            half_lengths: [1.0, 1.0],
            masses: [1.0, 1.0],
            inertias: [1.0, 1.0],
            spring: k,
            rest_angle: 0.0,
            half_width: 0.1,
        }
    }

    #[test]
    fn two_link_energies() {
        let c = unit_links(0.0);
        let l = body_lagrangian(&c, &BodyCoords::new(&[0.0; 4], &[0.0, 0.0, 1.0, 0.0])).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        let l = body_lagrangian(&c, &BodyCoords::new(&[0.0; 4], &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        let l = body_lagrangian(&unit_links(1.0), &BodyCoords::at_rest(&[0.7, 0.7, 3.0, -2.0])).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn two_link_derivatives() {
        let (dq, _) = body_lagrangian_derivatives(&unit_links(1.0), &BodyCoords::at_rest(&[0.3, 0.1, 0.0, 0.0])).unwrap();
        let want = [-0.2, 0.2, 0.0, 0.0];
        for k in 0..4 {
            assert!((dq[k] - want[k]).abs() < 1e-12);
        }
        let (_, dp) = body_lagrangian_derivatives(&unit_links(0.0), &BodyCoords::new(&[0.0; 4], &[0.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!(dp.as_slice(), &[0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let c = BodyChart::RigidDisc { radius: 1.0, mass: None, inertia: None };
        assert!(matches!(body_lagrangian(&c, &BodyCoords::at_rest(&[0.0; 4])), Err(Error::Dimension { .. })));
    }

    #[test]
    fn disc_perimeter_and_ellipse_area() {
        let disc = BodyChart::RigidDisc { radius: 1.0, mass: None, inertia: None };
        let b = embed_boundary(&disc, &DVector::zeros(3), 64).unwrap();
        let want = 2.0 * 64.0 * (PI / 64.0).sin();
        assert!((b.perimeter() - want).abs() < 1e-12);
        assert!((b.perimeter() - 2.0 * PI).abs() / (2.0 * PI) < 2e-3);
        let e = BodyChart::RigidEllipse { a: 2.0, b: 1.0, mass: None, inertia: None };
        let b = embed_boundary(&e, &DVector::zeros(3), 256).unwrap();
        assert!((b.area() - 2.0 * PI).abs() / (2.0 * PI) < 1e-3);
    }

    #[test]
    fn disc_rotation_permutes_nothing_but_angle() {
        let disc = BodyChart::RigidDisc { radius: 1.0, mass: None, inertia: None };
        let b0 = embed_boundary(&disc, &DVector::zeros(3), 32).unwrap();
        let th = 0.37;
        let b1 = embed_boundary(&disc, &DVector::from_column_slice(&[th, 0.0, 0.0]), 32).unwrap();
        let r = rotation(th);
        for i in 0..32 {
            assert!((r * b0.endpoints[i] - b1.endpoints[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn disc_boundary_velocity_examples() {
        let disc = BodyChart::RigidDisc { radius: 1.0, mass: None, inertia: None };
        let b = embed_boundary(&disc, &DVector::zeros(3), 64).unwrap();
        let v = boundary_velocity(&disc, &BodyCoords::new(&[0.0; 3], &[0.0, 1.0, 0.0]), &b).unwrap();
        assert!(v.iter().all(|v| *v == Vec2::new(1.0, 0.0)));
        let c = BodyCoords::new(&[0.0; 3], &[1.0, 0.0, 0.0]);
        // rigid rotation at the material point (1, 0)
        let v = disc.point_velocity(&c, 0, Vec2::new(1.0, 0.0));
        assert_eq!(v, Vec2::new(0.0, 1.0));
        let v = boundary_velocity(&disc, &BodyCoords::at_rest(&[0.0; 3]), &b).unwrap();
        assert!(v.iter().all(|v| *v == Vec2::zeros()));
    }

    #[test]
    fn two_link_area_is_constant() {
        let c = unit_links(0.0);
        let a0 = embed_boundary(&c, &DVector::from_column_slice(&[0.0, PI, 0.0, 0.0]), 200).unwrap().area();
        for alpha in [0.9, 1.7, 2.5, 3.9, 5.1] {
            let q = DVector::from_column_slice(&[alpha + 0.2, 0.2, 0.5, -0.3]);
            let b = embed_boundary(&c, &q, 200).unwrap();
            assert!((b.area() - a0).abs() < 1e-12 * a0, "alpha {alpha}: {} vs {a0}", b.area());
            assert_eq!(b.len(), 200);
        }
    }

    #[test]
    fn folded_two_link_rejected() {
        let c = unit_links(0.0);
        let q = DVector::from_column_slice(&[0.05, 0.0, 0.0, 0.0]);
        assert!(matches!(embed_boundary(&c, &q, 128), Err(Error::SelfIntersecting)));
    }

    #[test]
    fn two_link_labels_stable() {
        let c = unit_links(0.0);
        let b0 = embed_boundary(&c, &DVector::from_column_slice(&[1.0, 3.0, 0.0, 0.0]), 128).unwrap();
        let b1 = embed_boundary(&c, &DVector::from_column_slice(&[0.2, 2.5, 1.0, 0.0]), 128).unwrap();
        assert_eq!(b0.material_arc, b1.material_arc);
        assert_eq!(b0.part, b1.part);
    }
}
