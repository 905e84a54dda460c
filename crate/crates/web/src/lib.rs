//! Browser bindings: kernel profiles, entropy curves and single checks on a
//! scenario given as JSON. Results come back as JSON strings.

use ricci_entropy::entropy::{kernel_field, EntropyCurve};
use ricci_entropy::verify::{find, run_check};
use ricci_entropy::ScenarioConfig;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn scenario(config: &str) -> Result<ScenarioConfig, JsError> {
    let sc: ScenarioConfig = serde_json::from_str(config)?;
    sc.validate()?;
    Ok(sc)
}

#[wasm_bindgen]
pub fn version() -> String {
    ricci_entropy::VERSION.to_string()
}

/// Kernel values on the slice `base_time - tau`, by first coordinate.
///
/// Returns `{time, method, q, h, valid, mass}`.
#[wasm_bindgen(js_name = kernelProfile)]
pub fn kernel_profile(config: &str, tau: f64) -> Result<String, JsError> {
    let sc = scenario(config)?;
    if !(tau > 0.0) {
        return Err(JsError::new("tau must be positive"));
    }
    let s = sc.base_time - tau;
    let field = kernel_field(&sc.flow, &sc.base(), sc.base_time, &[s], &sc.field_options())?;
    let sl = field.slice(s)?;
    let mut order: Vec<usize> = (0..sl.len()).collect();
    order.sort_by(|&a, &b| sl.coords[a][0].total_cmp(&sl.coords[b][0]));
    Ok(json!({
        "time": s,
        "method": field.meta.method,
        "q": order.iter().map(|&i| sl.coords[i][0]).collect::<Vec<_>>(),
        "h": order.iter().map(|&i| sl.h[i]).collect::<Vec<_>>(),
        "valid": order.iter().map(|&i| sl.valid[i]).collect::<Vec<_>>(),
        "mass": sl.mass(),
    })
    .to_string())
}

/// `W` and `N` on the scenario's schedule at its first base point, with
/// limits when at least three samples are requested.
#[wasm_bindgen(js_name = entropyCurve)]
pub fn entropy_curve(config: &str) -> Result<String, JsError> {
    let sc = scenario(config)?;
    let times = sc.times();
    let field = kernel_field(&sc.flow, &sc.base(), sc.base_time, &times, &sc.field_options())?;
    let mut curve = EntropyCurve::from_field(&field, &times)?;
    if curve.samples.len() >= 3 {
        curve.extrapolate(&sc.tolerances.limit)?;
    }
    Ok(json!({
        "samples": curve.samples,
        "w_limit": curve.w_limit,
        "n_limit": curve.n_limit,
    })
    .to_string())
}

/// One catalog check on the scenario; the report without CSV bodies.
#[wasm_bindgen(js_name = runCheck)]
pub fn run_check_json(id: &str, config: &str) -> Result<String, JsError> {
    let sc = scenario(config)?;
    let report = run_check(find(id)?, &sc)?;
    Ok(serde_json::to_string(&report)?)
}

/// Check ids applicable to the scenario's flow.
#[wasm_bindgen(js_name = checkIds)]
pub fn check_ids(config: &str) -> Result<String, JsError> {
    let sc = scenario(config)?;
    let ids: Vec<&str> = ricci_entropy::verify::catalog()
        .iter()
        .filter(|c| c.applies_to(sc.kind()))
        .map(|c| c.id)
        .collect();
    Ok(serde_json::to_string(&ids)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"{"name": "s", "flow": {"kind": "shrinking_sphere", "dim": 2, "t_sing": 1.0}, "schedule": {"depth": 6}}"#;

    fn parse(s: Result<String, JsError>) -> serde_json::Value {
        serde_json::from_str(&s.ok().expect("call succeeds")).unwrap()
    }

    #[test]
    fn profile_is_sorted_and_normalized() {
        let v = parse(kernel_profile(SPHERE, 0.5));
        let q: Vec<f64> = serde_json::from_value(v["q"].clone()).unwrap();
        assert!(q.windows(2).all(|p| p[0] <= p[1]));
        assert!((v["mass"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sphere_curve_has_limits() {
        let v = parse(entropy_curve(SPHERE));
        assert_eq!(v["samples"].as_array().unwrap().len(), 7);
        assert!(v["n_limit"]["estimate"].as_f64().unwrap() < 0.0);
    }

    #[test]
    fn checks_run_and_list() {
        let ids: Vec<String> = serde_json::from_str(&check_ids(SPHERE).ok().unwrap()).unwrap();
        assert!(ids.iter().any(|i| i == "nash-time-average"));
        let v = parse(run_check_json("w-below-nash-below-zero", SPHERE));
        assert_eq!(v["outcome"], "pass");
    }
}
