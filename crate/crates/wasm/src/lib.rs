//! Browser bindings for the interactive demo page.
//!
//! Three operations, each taking the estimable quantities as plain numbers
//! and returning a ready-to-inject SVG document or a JSON report. All the
//! actual work happens in the core crate; the exported wrappers only move
//! strings across the wasm boundary, so the logic stays testable on native
//! targets.

use wasm_bindgen::prelude::*;

use minni::contour::{emit, isobol_surface, minni_curves};
use minni::index::{minni_difference, minni_ratio, BiasBudget, Scale};
use minni::summary::{synthesize_summary, ObservedSummary};

/// Equal-bias isobols of E[Y] - E[Y|G=1] in the (gamma1, beta1) plane with
/// pi0 fixed, over exp-parameter ranges [1/range_hi, range_hi]. Levels are
/// -k*SE for each k in `levels_se` (comma separated).
#[wasm_bindgen]
pub fn bias_isobols_svg(
    mu_obs: f64,
    frac_missing: f64,
    n_observed: u32,
    pi0: f64,
    range_hi: f64,
    levels_se: &str,
    grid: u32,
) -> Result<String, JsValue> {
    bias_isobols_impl(
        mu_obs,
        frac_missing,
        n_observed,
        pi0,
        range_hi,
        levels_se,
        grid,
    )
    .map_err(|e| JsValue::from_str(&e))
}

/// Index boundary curves with their MinNI points: scale is "difference" or
/// "ratio", levels are bias budgets in SE units.
#[wasm_bindgen]
pub fn minni_curves_svg(
    mu_obs: f64,
    frac_missing: f64,
    n_observed: u32,
    scale: &str,
    levels_se: &str,
) -> Result<String, JsValue> {
    minni_curves_impl(mu_obs, frac_missing, n_observed, scale, levels_se)
        .map_err(|e| JsValue::from_str(&e))
}

/// Both MinNI indices at a single SE-unit budget, as a JSON object with the
/// summary quantities echoed back.
#[wasm_bindgen]
pub fn minni_report(
    mu_obs: f64,
    frac_missing: f64,
    n_observed: u32,
    k_se: f64,
) -> Result<String, JsValue> {
    minni_report_impl(mu_obs, frac_missing, n_observed, k_se).map_err(|e| JsValue::from_str(&e))
}

fn summary_from(
    mu_obs: f64,
    frac_missing: f64,
    n_observed: u32,
) -> Result<ObservedSummary, String> {
    synthesize_summary(mu_obs, frac_missing, n_observed as usize).map_err(|e| e.to_string())
}

fn bias_isobols_impl(
    mu_obs: f64,
    frac_missing: f64,
    n_observed: u32,
    pi0: f64,
    range_hi: f64,
    levels_se: &str,
    grid: u32,
) -> Result<String, String> {
    let summary = summary_from(mu_obs, frac_missing, n_observed)?;
    let ks = parse_levels(levels_se)?;
    let levels: Vec<f64> = ks.iter().map(|k| -k * summary.se_obs).collect();
    if range_hi.is_nan() || range_hi <= 1.0 {
        return Err("range must exceed 1".to_string());
    }
    let hi = range_hi.ln();
    let set = isobol_surface(
        &summary,
        pi0,
        (-hi, hi),
        (-hi, hi),
        &levels,
        grid.max(32) as usize,
    )
    .map_err(|e| e.to_string())?;
    emit(&set, "svg").map_err(|e| e.to_string())
}

fn minni_curves_impl(
    mu_obs: f64,
    frac_missing: f64,
    n_observed: u32,
    scale: &str,
    levels_se: &str,
) -> Result<String, String> {
    let summary = summary_from(mu_obs, frac_missing, n_observed)?;
    let scale: Scale = scale.parse()?;
    let ks = parse_levels(levels_se)?;
    let set = minni_curves(&summary, scale, &ks, 256, Some(4.0)).map_err(|e| e.to_string())?;
    emit(&set, "svg").map_err(|e| e.to_string())
}

fn minni_report_impl(
    mu_obs: f64,
    frac_missing: f64,
    n_observed: u32,
    k_se: f64,
) -> Result<String, String> {
    let summary = summary_from(mu_obs, frac_missing, n_observed)?;
    let err = |e: minni::Error| e.to_string();
    let k_sigma = BiasBudget::SeUnits(k_se)
        .difference_budget(&summary)
        .map_err(err)?;
    let difference = minni_difference(&summary, k_sigma, 2, summary.outcome_kind).map_err(err)?;
    let k_cv = BiasBudget::SeUnits(k_se)
        .ratio_budget(&summary)
        .map_err(err)?;
    let ratio = minni_ratio(&summary, k_cv).map_err(err)?;
    Ok(format!(
        "{{\"summary\":{},\"difference\":{},\"ratio\":{}}}",
        summary.to_json(),
        difference.to_json(),
        ratio.to_json()
    ))
}

fn parse_levels(text: &str) -> Result<Vec<f64>, String> {
    let ks: Result<Vec<f64>, _> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse::<f64>)
        .collect();
    match ks {
        Ok(ks) if !ks.is_empty() => Ok(ks),
        _ => Err("levels must be a comma-separated list of numbers".to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_contains_both_scales() {
        let json = minni_report_impl(0.7320, 0.376, 3828, 1.0).unwrap();
        assert!(json.contains("\"difference\""));
        assert!(json.contains("\"ratio\""));
        assert!(json.contains("\"index\":[0.13"), "got {json}");
    }

    #[test]
    fn svg_outputs_are_svg() {
        let svg = minni_curves_impl(0.7320, 0.376, 3828, "difference", "0.5,1,2").unwrap();
        assert!(svg.starts_with("<?xml"));
        let svg = bias_isobols_impl(0.7320, 0.376, 3828, 0.5, 4.0, "1,2", 64).unwrap();
        assert!(svg.contains("<path"));
    }

    #[test]
    fn bad_inputs_surface_as_errors() {
        assert!(minni_report_impl(1.5, 0.376, 3828, 1.0).is_err());
        assert!(minni_curves_impl(0.7, 0.3, 100, "nonsense", "1").is_err());
        assert!(bias_isobols_impl(0.7, 0.3, 100, 0.5, 4.0, "", 64).is_err());
    }
}
