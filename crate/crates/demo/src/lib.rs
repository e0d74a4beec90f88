//! WebAssembly bindings for the static demo page in `www/`.

use delaybound::inequalities::{gap_sweep, FunctionalSpec, VectorFunction};
use delaybound::lmi::{nodv, HierarchyParams};
use delaybound::polynomials::rodrigues_poly;
use delaybound::search::{max_delay, SearchOptions};
use delaybound::system::{bundled, SystemFile};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn to_js(e: delaybound::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Upper delay bound for a bundled system name or a JSON system document.
/// Returns a JSON string with `tau_upper`, `nodv` and `probes`.
#[wasm_bindgen]
pub fn delay_bound(system: &str, big_m: usize, m: usize) -> Result<String, JsValue> {
    delay_bound_json(system, big_m, m).map_err(to_js)
}

pub fn delay_bound_json(system: &str, big_m: usize, m: usize) -> delaybound::Result<String> {
    let file = if system.trim_start().starts_with('{') {
        SystemFile::from_json(system)?
    } else {
        bundled(system)?
    };
    let sys = file.to_system()?;
    let params = HierarchyParams::new(big_m, m)?;
    let opts = SearchOptions {
        tol: 1e-4,
        ..Default::default()
    };
    let r = max_delay(&sys, params, &opts)?;
    Ok(json!({
        "system": file.display_name(),
        "M": big_m,
        "m": m,
        "tau_upper": r.bound,
        "unbounded": r.infeasible_side.is_none(),
        "nodv": nodv(&params, sys.n_x()),
        "probes": r.probes.len(),
    })
    .to_string())
}

/// `count` samples of `P_{m,n}` on `[0, 1]`.
#[wasm_bindgen]
pub fn polynomial_samples(m: usize, n: usize, count: usize) -> Vec<f64> {
    let p = rodrigues_poly(m, n);
    let count = count.max(2);
    (0..count).map(|i| p.eval_f64(i as f64 / (count - 1) as f64)).collect()
}

/// Bound and true value of the weighted functional of `sin(freq * s + phase)` on `[0, 1]`
/// for `nu = 0..=M-1-m`, flattened as `[bound_0, value_0, bound_1, value_1, ...]`.
#[wasm_bindgen]
pub fn bound_gap(m: usize, big_m: usize, freq: f64, phase: f64) -> Result<Vec<f64>, JsValue> {
    bound_gap_rows(m, big_m, freq, phase).map_err(to_js)
}

pub fn bound_gap_rows(m: usize, big_m: usize, freq: f64, phase: f64) -> delaybound::Result<Vec<f64>> {
    let spec = FunctionalSpec::scalar(m, 0.0, 1.0);
    let f = VectorFunction::new(1, move |s| vec![(freq * s + phase).sin()])
        .with_derivative(move |s| vec![freq * (freq * s + phase).cos()]);
    let rows = gap_sweep(&spec, &f, big_m)?;
    Ok(rows.iter().flat_map(|r| [r.bound, r.value]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_bound() {
        let v: serde_json::Value = serde_json::from_str(&delay_bound_json("example1", 1, 1).unwrap()).unwrap();
        assert!((v["tau_upper"].as_f64().unwrap() - 6.0593).abs() < 1e-2);
        assert_eq!(v["nodv"], 22);
    }

    #[test]
    fn samples_hit_endpoint_one() {
        let s = polynomial_samples(2, 3, 11);
        assert_eq!(s.len(), 11);
        assert!((s[10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_rows_are_sound() {
        let rows = bound_gap_rows(1, 4, 3.0, 0.4).unwrap();
        for pair in rows.chunks(2) {
            assert!(pair[0] <= pair[1] + 1e-10);
        }
    }
}
