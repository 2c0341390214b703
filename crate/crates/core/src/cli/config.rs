//! Scenario files.
//!
//! One JSON document per run. Unknown keys are rejected so that a typo never
//! silently falls back to a default.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bodies::{BodyChart, BodyCoords, Vec2};
use crate::fields::{BlobKernel, LPState, VortexState};
use crate::viscous::ViscousParams;
use crate::{Error, Result};

fn default_panels() -> usize {
    256
}

fn default_stride() -> usize {
    1
}

fn default_delta() -> f64 {
    0.1
}

fn yes() -> bool {
    true
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// Blobs scattered uniformly in an annulus about the origin, with strengths
/// uniform in `[-max_strength, max_strength]`. Needs `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBlobs {
    pub count: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub max_strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexConfig {
    #[serde(default)]
    pub positions: Vec<[f64; 2]>,
    #[serde(default)]
    pub strengths: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub bound_circulation: f64,
    #[serde(default)]
    pub kernel: BlobKernel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomBlobs>,
}

impl Default for VortexConfig {
    fn default() -> Self {
        Self {
            positions: Vec::new(),
            strengths: Vec::new(),
            delta: default_delta(),
            bound_circulation: 0.0,
            kernel: BlobKernel::Gaussian,
            random: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    /// Compare the pressure and curvature force routes at every output step.
    /// Costs an area quadrature per row.
    #[serde(default)]
    pub force_breakdown: bool,
}

/// Rectangular grid of velocity samples written every `every`-th output row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldGrid {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_stride")]
    pub every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub chart: BodyChart,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    #[serde(default)]
    pub vortices: VortexConfig,
    #[serde(default = "default_panels")]
    pub n_panels: usize,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viscous: Option<ViscousParams>,
    #[serde(default = "yes")]
    pub fluid_coupling: bool,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<FieldGrid>,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("{field}: {msg}"))
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.chart.validate().map_err(|e| invalid("chart", e))?;
        let d = self.chart.dim();
        if self.q.len() != d {
            return Err(invalid("q", format!("expected {d} entries, got {}", self.q.len())));
        }
        if self.qdot.len() != d {
            return Err(invalid("qdot", format!("expected {d} entries, got {}", self.qdot.len())));
        }
        if self.q.iter().chain(&self.qdot).any(|v| !v.is_finite()) {
            return Err(invalid("q", "non-finite entry"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", "must be positive"));
        }
        self.steps()?;
        if self.output_stride == 0 {
            return Err(invalid("output_stride", "must be at least 1"));
        }
        if self.n_panels < 16 {
            return Err(invalid("n_panels", "at least 16 panels"));
        }
        let v = &self.vortices;
        if v.positions.len() != v.strengths.len() {
            return Err(invalid("vortices", format!("{} positions but {} strengths", v.positions.len(), v.strengths.len())));
        }
        if !(v.delta > 0.0 && v.delta.is_finite()) {
            return Err(invalid("vortices.delta", "must be positive"));
        }
        if let Some(r) = &v.random {
            if self.seed.is_none() {
                return Err(invalid("vortices.random", "needs a seed"));
            }
            if !(r.r_min >= 0.0 && r.r_max > r.r_min && r.max_strength >= 0.0) {
                return Err(invalid("vortices.random", "need 0 <= r_min < r_max and max_strength >= 0"));
            }
        }
        if let Some(p) = &self.viscous {
            p.validate().map_err(|e| invalid("viscous", e))?;
        }
        if let Some(g) = &self.fields {
            if g.nx == 0 || g.ny == 0 || g.every == 0 || !(g.x[1] > g.x[0]) || !(g.y[1] > g.y[0]) {
                return Err(invalid("fields", "need nx, ny, every >= 1 and increasing ranges"));
            }
        }
        Ok(())
    }

    /// Number of steps; `t_end` must be a whole number of steps.
    pub fn steps(&self) -> Result<usize> {
        let n = (self.t_end / self.dt).round();
        if n < 1.0 || (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(invalid("t_end", format!("{} is not a whole number of steps of {}", self.t_end, self.dt)));
        }
        Ok(n as usize)
    }

    pub fn vortex_state(&self) -> VortexState {
        let v = &self.vortices;
        let mut positions: Vec<Vec2> = v.positions.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        let mut strengths = v.strengths.clone();
        if let (Some(r), Some(seed)) = (&v.random, self.seed) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..r.count {
                // Uniform in area.
                let rad = (r.r_min * r.r_min + rng.gen::<f64>() * (r.r_max * r.r_max - r.r_min * r.r_min)).sqrt();
                let t = rng.gen::<f64>() * std::f64::consts::TAU;
                positions.push(rad * Vec2::new(t.cos(), t.sin()));
                strengths.push(r.max_strength * (2.0 * rng.gen::<f64>() - 1.0));
            }
        }
        VortexState { positions, strengths, delta: v.delta, bound_circulation: v.bound_circulation, kernel: v.kernel }
    }

    pub fn initial_state(&self) -> Result<LPState> {
        self.validate()?;
        Ok(LPState {
            chart: self.chart.clone(),
            coords: BodyCoords { q: DVector::from_column_slice(&self.q), qdot: DVector::from_column_slice(&self.qdot) },
            vortices: self.vortex_state(),
            time: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISC: &str = r#"{
        "chart": {"kind": "rigid_disc", "radius": 1.0},
        "q": [0, 0, 0], "qdot": [0, 0.5, 0],
        "vortices": {"positions": [[3, 1]], "strengths": [1.0], "delta": 0.1},
        "dt": 0.01, "t_end": 1.0
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ScenarioConfig::from_json(DISC).unwrap();
        assert_eq!(c.n_panels, 256);
        assert_eq!(c.steps().unwrap(), 100);
        assert!(c.fluid_coupling && !c.diagnostics.force_breakdown);
    }

    #[test]
    fn rejects_bad_input_with_location() {
        let typo = DISC.replace("\"dt\"", "\"dtt\"");
        let e = ScenarioConfig::from_json(&typo).unwrap_err().to_string();
        assert!(e.contains("line") && e.contains("dtt"), "{e}");
        let short = DISC.replace("[0, 0.5, 0]", "[0, 0.5]");
        assert!(ScenarioConfig::from_json(&short).unwrap_err().to_string().contains("qdot"));
        let ragged = DISC.replace("\"t_end\": 1.0", "\"t_end\": 1.005");
        assert!(ScenarioConfig::from_json(&ragged).is_err());
    }

    #[test]
    fn seeded_blobs_are_reproducible() {
        let text = DISC.replace(
            "\"delta\": 0.1}",
            "\"delta\": 0.1, \"random\": {\"count\": 4, \"r_min\": 2, \"r_max\": 4, \"max_strength\": 1}}, \"seed\": 7",
        );
        let c = ScenarioConfig::from_json(&text).unwrap();
        let (a, b) = (c.vortex_state(), c.vortex_state());
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.positions[1..].iter().all(|p| (2.0..=4.0).contains(&p.norm())));
        let unseeded = text.replace(", \"seed\": 7", "");
        assert!(ScenarioConfig::from_json(&unseeded).is_err());
    }
}
