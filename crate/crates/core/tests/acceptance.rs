//! End-to-end acceptance criteria, one test per criterion. Each writes a
//! `criterion N ...: PASS|FAIL` line with the measured numbers before
//! asserting. Timed sections run one at a time behind a lock so that the
//! wall-clock budgets are not skewed by sibling tests.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use lpfsi::cli::config::ScenarioConfig;
use lpfsi::cli::output::trajectory_csv;
use lpfsi::dynamics::{body_acceleration, flow, force_breakdown, force_cubature, simulate, simulate_with, DynamicsOptions};
use lpfsi::fields::{LPState, VortexState};
use lpfsi::quad::{annulus_patches, Grading};
use lpfsi::verify::{check_torsion_free_identity, run_all, CheckReport, OneForm, Thresholds, VerifyConfig, HALVING_STEPS};
use lpfsi::viscous::{body_viscous_force, boundary_flux_pairing, viscous_pairing, Domain, ViscousParams};
use lpfsi::{BodyChart, BodyCoords, Mat2, Vec2};
use nalgebra::{DMatrix, DVector};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict line and returns whether every part passed.
fn verdict(n: u32, name: &str, parts: &[(&str, bool, String)]) -> bool {
    let ok = parts.iter().all(|p| p.1);
    let detail: Vec<String> = parts.iter().map(|(k, pass, v)| format!("{k}={v}{}", if *pass { "" } else { " (FAIL)" })).collect();
    let line = format!("criterion {n} {name}: {} [{}]\n", if ok { "PASS" } else { "FAIL" }, detail.join(", "));
    // Straight to the stream: the harness captures print! but not this, so
    // the verdicts show up in a plain `cargo test` log.
    let _ = std::io::stderr().write_all(line.as_bytes());
    ok
}

fn disc() -> BodyChart {
    BodyChart::RigidDisc { radius: 1.0, mass: None, inertia: None }
}

fn scenario(name: &str) -> ScenarioConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", &format!("{name}.json")].iter().collect();
    ScenarioConfig::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn criterion_1_disc_translation() {
    let _g = serial();
    let start = Instant::now();
    let state = LPState { chart: disc(), coords: BodyCoords::new(&[0.0; 3], &[0.0, 1.0, 0.0]), vortices: VortexState::empty(0.1), time: 0.0 };
    let f = flow(&state, 256).unwrap();
    let bc = f.bc_residual(&state.chart, &state.coords);
    let ke = f.sigma.as_ref().unwrap().kinetic_energy();
    let elapsed = start.elapsed().as_secs_f64();
    // Unit disc at unit speed: the added mass is the displaced mass pi.
    let rel = (ke - PI / 2.0).abs() / (PI / 2.0);
    let ok = verdict(
        1,
        "disc translation, 256 panels",
        &[
            ("bc_residual", bc < 1e-3, format!("{bc:.2e}")),
            ("ke_rel_error", rel < 1e-2, format!("{rel:.2e}")),
            ("seconds", elapsed < 2.0, format!("{elapsed:.2}")),
        ],
    );
    assert!(ok);
}

fn breakdown_case(n: u32, name: &str, state: LPState, qddot: Option<DVector<f64>>) {
    let _g = serial();
    let start = Instant::now();
    let qddot = qddot.unwrap_or_else(|| {
        let f = flow(&state, 256).unwrap();
        body_acceleration(&state, &f, &DynamicsOptions::default()).unwrap()
    });
    let b = force_breakdown(&state, &qddot, 256, &force_cubature()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = verdict(
        n,
        name,
        &[
            ("discrepancy", b.discrepancy < 2e-2, format!("{:.2e}", b.discrepancy)),
            ("seconds", elapsed < 30.0, format!("{elapsed:.1}")),
        ],
    );
    assert!(ok, "pressure {:?} lp {:?}", b.pressure_route, b.lp_route);
}

#[test]
fn criterion_2a_force_routes_accelerating_disc() {
    let state = LPState { chart: disc(), coords: BodyCoords::new(&[0.0; 3], &[0.0, 1.0, 0.0]), vortices: VortexState::empty(0.1), time: 0.0 };
    breakdown_case(2, "force routes, accelerating disc", state, Some(DVector::from_vec(vec![0.0, 0.5, -0.3])));
}

#[test]
fn criterion_2b_force_routes_disc_and_vortex() {
    let v = VortexState::new(vec![Vec2::new(2.0, 0.8)], vec![1.5], 0.1);
    let state = LPState { chart: disc(), coords: BodyCoords::new(&[0.0; 3], &[0.0, 0.5, 0.0]), vortices: v, time: 0.0 };
    breakdown_case(2, "force routes, disc and one vortex", state, None);
}

#[test]
fn criterion_3_conservation_disc_two_vortices() {
    let _g = serial();
    let config = ScenarioConfig::from_json(
        r#"{
            "chart": {"kind": "rigid_disc", "radius": 1.0},
            "q": [0, 0, 0], "qdot": [0, 0, 0],
            "vortices": {"positions": [[-3, 1], [-3, -1]], "strengths": [2, -2], "delta": 0.1},
            "n_panels": 256, "dt": 0.001, "t_end": 10.0, "output_stride": 100
        }"#,
    )
    .unwrap();
    let strengths = config.vortex_state().strengths;
    let mut strengths_kept = true;
    let mut observe = |s: &LPState, _: &lpfsi::dynamics::Sample, _: usize| -> lpfsi::Result<()> {
        // Bitwise: strengths are copied, never recomputed.
        strengths_kept &= s.vortices.strengths.iter().zip(&strengths).all(|(a, b)| a.to_bits() == b.to_bits());
        Ok(())
    };
    let record = simulate_with(&config, &mut observe).map_err(|a| a.error).unwrap();
    let e0 = record.samples[0].energy;
    let drift = record.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max) / e0.abs();
    let c0 = record.samples[0].boundary_circulation;
    let circ = record.samples.iter().map(|s| (s.boundary_circulation - c0).abs()).fold(0.0, f64::max);
    let ok = verdict(
        3,
        "disc and two vortices, RK4 dt=1e-3, 10 time units",
        &[
            ("energy_drift", drift < 1e-6, format!("{drift:.2e}")),
            ("strengths_bit_identical", strengths_kept, strengths_kept.to_string()),
            ("boundary_circulation_change", circ < 1e-8, format!("{circ:.2e}")),
        ],
    );
    assert!(ok);
}

fn battery() -> (Vec<CheckReport>, f64) {
    let start = Instant::now();
    let r = run_all(&VerifyConfig::default());
    (r, start.elapsed().as_secs_f64())
}

fn report<'a>(reports: &'a [CheckReport], name: &str) -> &'a CheckReport {
    reports.iter().find(|r| r.name == name).unwrap()
}

#[test]
fn criterion_4_variation_checks() {
    let _g = serial();
    let (reports, elapsed) = battery();
    let v = report(&reports, "vertical_variation");
    let h = report(&reports, "horizontal_variation");
    let in_band = |s: Option<f64>| s.is_some_and(|s| (0.8..=1.3).contains(&s));
    let anti = h.measures["antisymmetry"];
    let alt = h.measures["alternating"];
    let ok = verdict(
        4,
        "vertical and horizontal variations",
        &[
            ("vertical_slope", in_band(v.slope), format!("{:?}", v.slope)),
            ("horizontal_slope", in_band(h.slope), format!("{:?}", h.slope)),
            ("curvature_antisymmetry", anti < 1e-8, format!("{anti:.2e}")),
            ("curvature_alternating", alt < 1e-12, format!("{alt:.2e}")),
            ("battery_seconds", elapsed < 60.0, format!("{elapsed:.2}")),
            ("battery_all_passed", reports.iter().all(|r| r.passed), reports.iter().filter(|r| !r.passed).count().to_string()),
        ],
    );
    assert!(ok);
}

#[test]
fn criterion_5_splitting_and_torsion_free() {
    let _g = serial();
    let (reports, _) = battery();
    let ratio = |name: &str| report(&reports, name).measures.get("halving_ratio").copied().unwrap_or(f64::NAN);
    let split = ratio("df_splitting");
    let exact = ratio("torsion_free_exact");
    let wavy = ratio("torsion_free_wavy");
    // alpha = x dy on coordinates (theta, x, y), paired with e_x and e_y.
    let x = DVector::from_vec(vec![0.4, -0.7, 1.1]);
    let (ex, ey) = (DVector::from_vec(vec![0.0, 1.0, 0.0]), DVector::from_vec(vec![0.0, 0.0, 1.0]));
    let alpha = OneForm::Coordinate { i: 1, j: 2 };
    let fd = alpha.exterior_derivative_fd(&x, &ex, &ey, 1e-3);
    let coord = check_torsion_free_identity(alpha, &x, &ex, &ey, &HALVING_STEPS, &Thresholds::default()).unwrap();
    let ok = verdict(
        5,
        "df splitting and torsion-free identity",
        &[
            ("df_splitting_halving_ratio", split >= 3.5, format!("{split:.3}")),
            ("torsion_free_exact_halving_ratio", exact >= 3.5, format!("{exact:.3}")),
            ("torsion_free_wavy_halving_ratio", wavy >= 3.5, format!("{wavy:.3}")),
            ("x_dy_value", (fd - 1.0).abs() < 1e-6, format!("{fd:.12}")),
            ("x_dy_check_passed", coord.passed, coord.passed.to_string()),
        ],
    );
    assert!(ok);
}

#[test]
fn criterion_6_viscous_functionals() {
    let _g = serial();
    let nu = 0.01;
    let params = ViscousParams::new(nu);
    let annulus = |r0: f64, r1: f64| Domain::Patches(annulus_patches(Vec2::zeros(), r0, r1, 8, Grading::Linear));
    let shear = lpfsi::fields::AffineField { m: Mat2::new(0.0, 1.0, 0.0, 0.0), c: Vec2::zeros() };
    // |grad u|^2 = 1 over the annulus 1 < r < 2 of area 3 pi.
    let pairing = viscous_pairing(&shear, &shear, &annulus(1.0, 2.0), &params).unwrap();
    let shear_err = (pairing - 3.0 * PI * nu).abs();

    let u = VortexState::new(vec![Vec2::new(0.3, 0.2), Vec2::new(-1.8, 0.4)], vec![1.0, -0.6], 0.5);
    let v = VortexState::new(vec![Vec2::new(-0.2, 0.1), Vec2::new(1.5, -1.5)], vec![0.8, 0.5], 0.7);
    let circle = |r: f64, ccw: bool| {
        let mut pts: Vec<Vec2> = (0..256).map(|k| r * Vec2::new((2.0 * PI * k as f64 / 256.0).cos(), (2.0 * PI * k as f64 / 256.0).sin())).collect();
        if !ccw {
            pts.reverse();
        }
        pts
    };
    let d = annulus(1.0, 3.0);
    let lhs = viscous_pairing(&u, &v, &d, &params).unwrap();
    let rhs = body_viscous_force(&u, &v, &d, &params).unwrap()
        + boundary_flux_pairing(&u, &v, &circle(3.0, true), 1, &params)
        + boundary_flux_pairing(&u, &v, &circle(1.0, false), 1, &params);
    let ibp = (lhs - rhs).abs() / lhs.abs();

    let record = simulate(&scenario("core_spreading")).map_err(|a| a.error).unwrap();
    let rises = record.samples.windows(2).filter(|w| w[1].energy > w[0].energy).count();
    let ok = verdict(
        6,
        "viscous functionals",
        &[
            ("shear_pairing_error", shear_err < 1e-6, format!("{shear_err:.2e}")),
            ("integration_by_parts_residual", ibp < 1e-2, format!("{ibp:.2e}")),
            ("core_spreading_energy_rises", rises == 0, rises.to_string()),
        ],
    );
    assert!(ok);
}

/// Standalone two-link rigid dynamics, written out from the kinetic energy
/// `sum_k m_k |c_k'|^2 / 2 + I_k phi_k'^2 / 2` with link centres
/// `c_k = (x, y) + l_k (cos phi_k, sin phi_k)` and the spring on `phi1 - phi2`.
struct TwoLinkOracle {
    l: [f64; 2],
    m: [f64; 2],
    i: [f64; 2],
    k: f64,
    rest: f64,
}

impl TwoLinkOracle {
    fn rates(&self, y: &[f64; 8]) -> [f64; 8] {
        let (q, v) = (&y[..4], &y[4..]);
        let mut mm = DMatrix::zeros(4, 4);
        let mut rhs = DVector::zeros(4);
        let total = self.m[0] + self.m[1];
        mm[(2, 2)] = total;
        mm[(3, 3)] = total;
        for k in 0..2 {
            let (s, c) = q[k].sin_cos();
            let ml = self.m[k] * self.l[k];
            mm[(k, k)] = ml * self.l[k] + self.i[k];
            mm[(k, 2)] = -ml * s;
            mm[(2, k)] = -ml * s;
            mm[(k, 3)] = ml * c;
            mm[(3, k)] = ml * c;
            rhs[2] += ml * c * v[k] * v[k];
            rhs[3] += ml * s * v[k] * v[k];
        }
        let spring = self.k * (q[0] - q[1] - self.rest);
        rhs[0] -= spring;
        rhs[1] += spring;
        let a = mm.lu().solve(&rhs).unwrap();
        [v[0], v[1], v[2], v[3], a[0], a[1], a[2], a[3]]
    }

    fn rk4(&self, y: [f64; 8], h: f64) -> [f64; 8] {
        let add = |y: &[f64; 8], k: &[f64; 8], s: f64| std::array::from_fn::<f64, 8, _>(|i| y[i] + s * k[i]);
        let k1 = self.rates(&y);
        let k2 = self.rates(&add(&y, &k1, 0.5 * h));
        let k3 = self.rates(&add(&y, &k2, 0.5 * h));
        let k4 = self.rates(&add(&y, &k3, h));
        std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }
}

#[test]
fn criterion_7_limits() {
    let _g = serial();
    let config = scenario("two_link_dry");
    assert!(!config.fluid_coupling && (config.t_end - 5.0).abs() < 1e-12);
    let BodyChart::TwoLink { half_lengths, masses, inertias, spring, rest_angle, .. } = config.chart else { unreachable!() };
    let oracle = TwoLinkOracle { l: half_lengths, m: masses, i: inertias, k: spring, rest: rest_angle };
    let record = simulate(&config).map_err(|a| a.error).unwrap();
    let mut y: [f64; 8] = std::array::from_fn(|i| if i < 4 { config.q[i] } else { config.qdot[i - 4] });
    let mut worst: f64 = 0.0;
    let mut rows = record.samples.iter();
    for k in 0..=config.steps().unwrap() {
        if k % config.output_stride == 0 {
            let s = rows.next().unwrap();
            for i in 0..4 {
                worst = worst.max((s.q[i] - y[i]).abs()).max((s.qdot[i] - y[4 + i]).abs());
            }
        }
        y = oracle.rk4(y, config.dt);
    }

    let mut inviscid = scenario("core_spreading");
    inviscid.viscous = None;
    let mut zero = inviscid.clone();
    zero.viscous = Some(ViscousParams { nu: 0.0, core_spreading: true, ..ViscousParams::default() });
    let n = inviscid.vortex_state().len();
    let a = trajectory_csv(&simulate(&inviscid).map_err(|a| a.error).unwrap(), n).unwrap();
    let b = trajectory_csv(&simulate(&zero).map_err(|a| a.error).unwrap(), n).unwrap();
    let ok = verdict(
        7,
        "limits",
        &[
            ("decoupled_vs_rigid_oracle", worst < 1e-8, format!("{worst:.2e}")),
            ("nu_zero_bit_exact", a == b, (a == b).to_string()),
        ],
    );
    assert!(ok);
}

#[test]
fn criterion_8_determinism() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("seeded.json");
    std::fs::write(
        &cfg,
        r#"{
            "chart": {"kind": "rigid_ellipse", "a": 1.0, "b": 0.6},
            "q": [0.2, 0, 0], "qdot": [0.1, 0.3, -0.2],
            "vortices": {"delta": 0.15, "random": {"count": 4, "r_min": 2.0, "r_max": 3.0, "max_strength": 1.0}},
            "seed": 11, "n_panels": 64, "dt": 0.01, "t_end": 0.3, "output_stride": 3
        }"#,
    )
    .unwrap();
    let run = |out: &str| {
        let o = dir.path().join(out);
        let code = lpfsi::cli::main_with_args(["lpfsi", "run", cfg.to_str().unwrap(), "-o", o.to_str().unwrap()]);
        assert_eq!(code, 0);
        std::fs::read(o.join("trajectory.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let ok = verdict(8, "determinism", &[("byte_identical_trajectory", a == b, format!("{} bytes", a.len()))]);
    assert!(ok);
}

#[test]
fn shipped_disc_impulse_conserves_energy() {
    let _g = serial();
    let record = simulate(&scenario("disc_impulse")).map_err(|a| a.error).unwrap();
    let e0 = record.samples[0].energy;
    let drift = record.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max) / e0.abs();
    let _ = writeln!(std::io::stderr(), "disc_impulse energy drift {drift:.2e}");
    assert!(drift < 1e-6, "{drift}");
}
