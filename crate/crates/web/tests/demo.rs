use segdp_web::demo;
use serde_json::Value;

#[test]
fn curve_is_decreasing_and_starts_at_total_variation() {
    let v: Value = serde_json::from_str(&demo::divergence_curve(0.5, 17, 1000, 1.0, 2.0, 21).unwrap()).unwrap();
    let delta: Vec<f64> = v["delta"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(delta.len(), 21);
    assert!(delta.windows(2).all(|w| w[1] <= w[0]));
    assert!(delta[0] > 0.0 && delta[0] <= 1.0);
}

#[test]
fn profile_rates_rise_with_m() {
    let text = demo::rate_profile(3000, 17, 2, "0.5,1,2", "0.25,0.5,0.25", 0.1, 4.0, 6).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 6);
    let first: Vec<f64> = pts.iter().map(|p| p["rates"][0].as_f64().unwrap()).collect();
    assert!(first.windows(2).all(|w| w[0] <= w[1]), "{first:?}");
}

#[test]
fn simulation_has_one_estimate_per_item() {
    let text = demo::simulate(1000, 12, 2, "1,2", "0.5,0.5", 1.0, 3).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["estimates"].as_array().unwrap().len(), 12);
    assert_eq!(v["m"].as_f64(), Some(1.0));
    let truth_sum: f64 = v["truth"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((truth_sum - 2.0).abs() < 1e-9);
    assert_eq!(text, demo::simulate(1000, 12, 2, "1,2", "0.5,0.5", 1.0, 3).unwrap());
}

#[test]
fn bad_input_is_reported() {
    assert!(demo::divergence_curve(0.5, 17, 100, 1.0, 2.0, 1).is_err());
    assert!(demo::rate_profile(100, 17, 2, "1,x", "0.5,0.5", 0.1, 1.0, 4).is_err());
    assert!(demo::simulate(100, 4, 5, "1", "1", 1.0, 0).is_err());
}
