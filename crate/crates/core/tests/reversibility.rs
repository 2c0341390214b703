//! Ideal flow is reversible: flipping every velocity (body rates, blob and
//! bound circulations) and integrating for the same time returns to the
//! start. RK4 is not a symmetric scheme, so the return error is its
//! fourth-order truncation error and must fall about 16x per halving of dt.

use lpfsi::dynamics::{step, DynamicsOptions};
use lpfsi::fields::{LPState, VortexState};
use lpfsi::{BodyChart, BodyCoords, Vec2};

fn start() -> LPState {
    let mut v = VortexState::new(vec![Vec2::new(-2.2, 0.9), Vec2::new(1.8, -1.4)], vec![1.2, -0.7], 0.15);
    v.bound_circulation = 0.4;
    LPState {
        chart: BodyChart::RigidEllipse { a: 1.0, b: 0.6, mass: Some(2.0), inertia: None },
        coords: BodyCoords::new(&[0.3, 0.0, 0.1], &[0.4, 0.6, -0.3]),
        vortices: v,
        time: 0.0,
    }
}

fn reversed(mut s: LPState) -> LPState {
    s.coords.qdot = -s.coords.qdot;
    for g in &mut s.vortices.strengths {
        *g = -*g;
    }
    s.vortices.bound_circulation = -s.vortices.bound_circulation;
    s
}

fn return_error(dt: f64, steps: usize) -> f64 {
    let opts = DynamicsOptions { n_panels: 64, fluid_coupling: true };
    let s0 = start();
    let mut s = s0.clone();
    for _ in 0..steps {
        s = step(&s, dt, &opts).unwrap();
    }
    let mut s = reversed(s);
    for _ in 0..steps {
        s = step(&s, dt, &opts).unwrap();
    }
    let back = reversed(s);
    let mut err = (&back.coords.q - &s0.coords.q).amax().max((&back.coords.qdot - &s0.coords.qdot).amax());
    for (a, b) in back.vortices.positions.iter().zip(&s0.vortices.positions) {
        err = err.max((a - b).amax());
    }
    assert_eq!(back.vortices.strengths, s0.vortices.strengths);
    err
}

#[test]
fn reversed_run_returns_to_start() {
    let coarse = return_error(0.04, 20);
    let fine = return_error(0.02, 40);
    println!("return error {coarse:.3e} at dt=0.04, {fine:.3e} at dt=0.02");
    assert!(fine < 1e-6, "{fine}");
    assert!(coarse / fine > 10.0, "{coarse} {fine}");
}
