//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every operation returns a JSON string so the page needs no glue types.
//! The plain functions are usable (and tested) natively; the exported
//! wrappers turn errors into JavaScript exceptions.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use miscale::analysis::{classify, fit, FitResult, ScalingCurve, ScalingModel};
use miscale::data::{make_partition, Family, Geometry, GridShape};
use miscale::knn::{knn_mi, KnnConfig};
use miscale::synthetic::{exact_gaussian_curve, exact_gaussian_mi, expected_pair_mi_curve, sample_gaussian, GaussianSpec, RandomPairSpec};

fn curve_json(c: &ScalingCurve) -> Value {
    json!({
        "family": c.family,
        "lmax": c.lmax,
        "method": c.method,
        "l": c.ls(),
        "mi": c.values(),
    })
}

fn ranking_json(fits: &[FitResult]) -> Value {
    fits.iter()
        .map(|f| {
            json!({
                "model": f.model,
                "residual_rms": f.residual_rms,
                "params": f.params.iter().map(|p| (p.name.clone(), json!(p.value))).collect::<serde_json::Map<_, _>>(),
            })
        })
        .collect()
}

/// Expected random-pair MI curve and its power-law exponent on `[4, sites/8]`.
pub fn pair_curve_json(alpha: f64, sites: usize, seeds: usize, seed: u64) -> miscale::Result<String> {
    let ls: Vec<usize> = (0..=sites).collect();
    let curve = expected_pair_mi_curve(&RandomPairSpec::power_law(sites, alpha, 2), &ls, seeds, seed)?;
    let window = (4, (sites / 8).max(8));
    let power = fit(&curve, ScalingModel::Power, window)?;
    Ok(json!({
        "curve": curve_json(&curve),
        "window": window,
        "nu": power.value("nu"),
        "amplitude": power.value("amplitude"),
        "asymptotic_nu": 2.0 - alpha,
    })
    .to_string())
}

/// kNN estimate on a sampled bivariate Gaussian next to the exact value.
pub fn gaussian_knn_json(rho: f64, samples: usize, k: usize, seed: u64) -> miscale::Result<String> {
    let spec = GaussianSpec::bivariate(rho)?;
    let partition = make_partition(Family::LeftRight, 1, &Geometry::Sequence { seq_len: 2, embed_dim: 1 })?;
    let data = sample_gaussian(&spec, samples, seed)?;
    let est = knn_mi(&data, &partition, &KnnConfig { k, seed, ..KnnConfig::default() })?;
    Ok(json!({
        "rho": rho,
        "exact": exact_gaussian_mi(&spec, &partition)?,
        "estimate": est.value,
        "sigma": est.sigma,
        "samples": samples,
        "k": k,
    })
    .to_string())
}

/// Exact centre/surround and top/bottom curves of a nearest-neighbour
/// Gaussian field on a `size × size` grid, each with its model ranking.
pub fn mrf_curves_json(size: usize, coupling: f64) -> miscale::Result<String> {
    let spec = GaussianSpec::grid_mrf(size, size, coupling)?;
    let geometry = Geometry::Grid(GridShape::new(size, size, 1));
    let ls: Vec<usize> = (0..=size).collect();
    let mut out = serde_json::Map::new();
    for family in [Family::CenterSurround, Family::TopBottom] {
        let curve = exact_gaussian_curve(&spec, &geometry, family, &ls)?;
        let ranking = classify(&curve, 0.1)?;
        out.insert(
            family.as_str().to_string(),
            json!({ "curve": curve_json(&curve), "ranking": ranking_json(&ranking) }),
        );
    }
    Ok(Value::Object(out).to_string())
}

fn js(r: miscale::Result<String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = pairCurve)]
pub fn pair_curve(alpha: f64, sites: usize, seeds: usize, seed: u32) -> Result<String, JsError> {
    js(pair_curve_json(alpha, sites, seeds, u64::from(seed)))
}

#[wasm_bindgen(js_name = gaussianKnn)]
pub fn gaussian_knn(rho: f64, samples: usize, k: usize, seed: u32) -> Result<String, JsError> {
    js(gaussian_knn_json(rho, samples, k, u64::from(seed)))
}

#[wasm_bindgen(js_name = mrfCurves)]
pub fn mrf_curves(size: usize, coupling: f64) -> Result<String, JsError> {
    js(mrf_curves_json(size, coupling))
}
