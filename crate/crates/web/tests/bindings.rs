use pendula_web::{lambda1_sweep, simulate_front, solve_profile};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn profile_is_downsampled_and_monotone() {
    let v = parse(solve_profile("phi4", 0.0, 0.05, 20.0, 50));
    let u = floats(&v["u"]);
    assert!(u.len() <= 401 && u.len() == floats(&v["z"]).len());
    assert!(u.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(v["b"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn lambda1_grows_with_coupling() {
    let v = parse(lambda1_sweep("sine_gordon", 0.5, 0.2, 3, 15.0, 20));
    let l = floats(&v["lambda1"]);
    assert_eq!(l.len(), 3);
    assert!(l[2].abs() > l[1].abs() && l[1].abs() > l[0].abs());
    assert!(lambda1_sweep("phi4", 0.0, 0.1, 1, 15.0, 20).is_err());
}

#[test]
fn short_run_moves_at_the_chosen_speed() {
    let v = parse(simulate_front("phi4", 0.0, 0.05, 1.0, 2.0, 0.01));
    assert_eq!(v["status"], "ok");
    assert!((v["speed"].as_f64().unwrap() - 1.0).abs() < 0.05);
    assert!(simulate_front("pendulum", 0.0, 0.05, 1.0, 2.0, 0.01).is_err());
}
