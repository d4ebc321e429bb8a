//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every function takes the `params` object of a run configuration as JSON and returns JSON:
//! either `{"value": {"re", "im"}, "branch": …}` or the diagnostic `{"schema", "error"}`.

use sewkernel::cli::{diagnostic, evaluate, Params};
use sewkernel::error::SewError;
use wasm_bindgen::prelude::*;

fn run(target: &str, params: &str) -> String {
    let out = serde_json::from_str::<Params>(params)
        .map_err(|e| SewError::Validation(format!("params: {e}")))
        .and_then(|p| evaluate(target, &p));
    match out {
        Ok(v) => serde_json::to_string(&v).expect("evaluation serializes"),
        Err(e) => diagnostic(&e).to_string(),
    }
}

/// Genus-one twisted two-point function `Z^(1)`.
#[wasm_bindgen]
pub fn genus_one_partition(params: &str) -> String {
    run("z1_twisted_2pt", params)
}

/// Genus-two Szegő kernel at `params.x`, `params.y`.
#[wasm_bindgen]
pub fn genus_two_kernel(params: &str) -> String {
    run("s2", params)
}

/// Genus-two fermionic partition function.
#[wasm_bindgen]
pub fn genus_two_partition(params: &str) -> String {
    run("z2_fermionic", params)
}
