//! Browser bindings for the demo page in `www/`.
//!
//! Every function returns a flat `Float64Array`; the layout is documented
//! per function.

use wasm_bindgen::prelude::*;

use sdppp::branching::DEFAULT_POPULATION_CAP;
use sdppp::martingale::{ShiftSampler, DEFAULT_MIN_GENERATIONS};
use sdppp::reproduction::ReproductionLaw;
use sdppp::rng::{replicate, StreamKey};
use sdppp::sdppp::{max_cdf_curve, sample_sdppp, DecorationLaw, MixtureSpec};
use sdppp::Error;

/// Demo populations are kept far below the library cap.
const DEMO_POPULATION_CAP: usize = DEFAULT_POPULATION_CAP / 100;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn parse_law(json: &str) -> Result<ReproductionLaw, JsError> {
    let law: ReproductionLaw = serde_json::from_str(json).map_err(|e| JsError::new(&format!("law: {e}")))?;
    law.validate().map_err(js)?;
    Ok(law)
}

fn martingale_shift(law: ReproductionLaw, alpha: f64) -> Result<ShiftSampler, JsError> {
    ShiftSampler::martingale(law, alpha, DEFAULT_MIN_GENERATIONS, DEFAULT_MIN_GENERATIONS).map_err(js)
}

/// Critical exponent of a law, or an error if there is none.
#[wasm_bindgen]
pub fn critical_alpha(law_json: &str) -> Result<f64, JsError> {
    parse_law(law_json)?.solve_critical_alpha().map_err(js)
}

/// One branching random walk up to `generations`, as `(generation,
/// position)` pairs: `[g0, x0, g1, x1, ...]`.
#[wasm_bindgen]
pub fn brw_cloud(law_json: &str, generations: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    let law = parse_law(law_json)?;
    let mut rng = StreamKey::new(u64::from(seed)).derive("brw").stream(0);
    let mut current = vec![0.0];
    let mut out = vec![0.0, 0.0];
    for g in 1..=generations {
        let mut next = Vec::new();
        for &x in &current {
            next.extend(law.sample_offspring(&mut rng).translate(x).atoms());
        }
        if next.len() > DEMO_POPULATION_CAP {
            return Err(JsError::new(&format!(
                "population {} at generation {g} is too large",
                next.len()
            )));
        }
        out.extend(next.iter().flat_map(|&x| [f64::from(g), x]));
        current = next;
    }
    Ok(out)
}

/// One SDPPP draw above `floor` with the martingale shift of `law` and a
/// mixture decoration (empty string for a single atom at 0). Returns the
/// atoms in decreasing order.
#[wasm_bindgen]
pub fn sdppp_points(law_json: &str, decoration_json: &str, c: f64, floor: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    let law = parse_law(law_json)?;
    let alpha = law.solve_critical_alpha().map_err(js)?;
    let decoration = if decoration_json.trim().is_empty() {
        DecorationLaw::dirac()
    } else {
        let spec: MixtureSpec =
            serde_json::from_str(decoration_json).map_err(|e| JsError::new(&format!("decoration: {e}")))?;
        DecorationLaw::from_spec(&spec).map_err(js)?
    };
    if c.is_nan() || c <= 0.0 {
        return Err(JsError::new("c must be positive"));
    }
    let shift = martingale_shift(law, alpha)?.scaled(c);
    let mut rng = StreamKey::new(u64::from(seed)).derive("sdppp").stream(0);
    let d = sample_sdppp(&shift, alpha, &decoration, floor, &mut rng).map_err(js)?;
    Ok(d.into_atoms())
}

/// Empirical and semi-analytic CDF of the maximum of the Cox process with
/// intensity `S e^{-alpha x} dx`, on `[-3, 7]`: `[x, empirical,
/// semi_analytic]` triples.
#[wasm_bindgen]
pub fn max_law_curve(law_json: &str, reps: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    let law = parse_law(law_json)?;
    let alpha = law.solve_critical_alpha().map_err(js)?;
    let shift = martingale_shift(law, alpha)?;
    let reps = reps.max(1000) as usize;
    let key = StreamKey::new(u64::from(seed)).derive("max-law");
    let shifts = shift.sample_batch(reps, key.derive("shift")).map_err(js)?.values;
    let floor = -3.0;
    let mut maxima = replicate(key.derive("draws"), reps, |_, rng| {
        sample_sdppp(&shift, alpha, &DecorationLaw::dirac(), floor, rng).map(|d| d.max_atom())
    })
    .into_iter()
    .collect::<Result<Vec<f64>, Error>>()
    .map_err(js)?;
    maxima.sort_by(f64::total_cmp);
    let xs: Vec<f64> = (0..=200).map(|i| floor + 0.05 * f64::from(i)).collect();
    let semi = max_cdf_curve(1.0, &shifts, alpha, &xs).map_err(js)?;
    Ok(xs
        .iter()
        .zip(&semi)
        .flat_map(|(&x, e)| {
            let emp = maxima.partition_point(|&m| m <= x) as f64 / reps as f64;
            [x, emp, e.mean]
        })
        .collect())
}
