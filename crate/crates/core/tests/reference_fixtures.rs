//! Checks against values produced outside this crate by
//! `tests/fixtures/generate.py` (scipy DOP853 and a numpy forward pass).

use std::path::PathBuf;

use kdde::dictionary::MlpWeights;
use kdde::dynamics::PendulumParams;
use kdde::Dictionary;
use serde_json::Value;

fn fixture(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn one_step_map_matches_adaptive_integrator() {
    let flow = fixture("pendulum_flow.json");
    let p = PendulumParams::default();
    assert_eq!(flow["dt"].as_f64().unwrap(), p.dt);
    for case in flow["cases"].as_array().unwrap() {
        let x = floats(&case["x"]);
        let want = floats(&case["flow"]);
        let got = p.step([x[0], x[1]]);
        // the wall moment is only C¹ at ±π/4, which costs fixed-step RK4 some order
        let crosses_wall = x[0].abs().max(want[0].abs()) >= p.wall_angle;
        let tol = if crosses_wall { 1e-5 } else { 1e-8 };
        for d in 0..2 {
            assert!((got[d] - want[d]).abs() < tol, "x={x:?}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn acceleration_at_free_swing_point() {
    // θ = 0.5 is inside the walls, so only gravity and damping act
    let a = PendulumParams::default().acceleration(0.5, 1.0);
    assert!((a - (-(0.5f64).sin() - 1.0)).abs() < 1e-15);
    assert!((a + 1.4794).abs() < 1e-4);
}

#[test]
fn exported_network_matches_trainer_forward_pass() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let (weights, include_state) = MlpWeights::from_json_file(dir.join("mlp_weights.json")).unwrap();
    assert!(include_state);
    let dict = Dictionary::from_mlp(weights.clone(), include_state).unwrap();
    assert_eq!(dict.output_dim(), 42);

    let io = fixture("mlp_forward.json");
    let inputs = io["inputs"].as_array().unwrap();
    let outputs = io["outputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1000);
    let mut worst = 0.0f64;
    for (x, y) in inputs.iter().zip(outputs) {
        let x = floats(x);
        let y = floats(y);
        let z = dict.lift(&x).unwrap();
        assert_eq!(&z[..2], x.as_slice());
        for (a, b) in z[2..].iter().zip(&y) {
            worst = worst.max((a - b).abs());
        }
        let direct = weights.forward(&x);
        assert_eq!(direct.as_slice(), &z[2..]);
    }
    assert!(worst <= 1e-6, "max deviation {worst}");
}
