use rwrp_wasm::{describe, free_energy, rate_table};

fn parse(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn describe_simple_walk() {
    let v = parse(&describe("1,0; -1,0; 0,1; 0,-1").unwrap());
    assert_eq!(v["origin_in_relative_interior"], true);
    assert_eq!(v["extreme_points"].as_array().unwrap().len(), 4);
    assert!(describe("").is_err());
}

#[test]
fn free_energy_series_rows() {
    let v = parse(&free_energy("0,1; 1,1", "bernoulli", 0.5, 1, "10, 20, 40", "").unwrap());
    let rows = v["table"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(v["table"]["headers"][1], "logZ");
    let p = parse(&free_energy("0,1; 1,1", "gaussian", 0.5, 1, "10,20", "1/2,1").unwrap());
    assert!(p["metrics"]["target"].as_str().unwrap().starts_with("point"));
    assert!(free_energy("0,1; 1,1", "cauchy", 0.5, 1, "10", "").is_err());
}

#[test]
fn rate_table_is_nonnegative() {
    let v = parse(&rate_table("1; 2", "3", "0, 1, -0.5", 1.0, 8).unwrap());
    let rows = v["table"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    for r in rows {
        assert!(r[2].as_f64().unwrap() > -1e-9);
    }
}
