//! Variance-gap evaluation and covariate-stratified analyses for discrete,
//! completely measured covariates.

use crate::error::{Error, Result};
use crate::fmt;
use crate::fmt::json_string;
use crate::index::{minni_difference, BiasBudget, MinNIResult};
use crate::summary::ObservedSummary;

/// Ingredients of the variance-gap decomposition for a binary confounder.
///
/// `vd_yu = Var[Y|U=0] - Var[Y|U=1]`, `vd_ug = Var[U|G=0] - Var[U|G=1]`
/// where `Var[U|G=g] = p(1-p)` with `p = Pr[U=1|G=g]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceInputs {
    pub vd_yu: f64,
    pub vd_ug: f64,
    pub ed_yu: f64,
    pub rd_ug: f64,
    pub pr_g1: f64,
}

/// `Var[Y] - Var[Y|G=1]` implied by the decomposition:
///
/// ```text
///   {VD_YU RD_UG + ED^2 VD_UG + ED^2 RD^2 Pr[G=1]} Pr[G=0]
/// ```
///
/// Zero mean-bias does not imply zero variance gap: `ED_YU = 0` leaves the
/// `VD_YU RD_UG` term standing.
pub fn variance_gap(v: &VarianceInputs) -> f64 {
    let ed2 = v.ed_yu * v.ed_yu;
    (v.vd_yu * v.rd_ug + ed2 * v.vd_ug + ed2 * v.rd_ug * v.rd_ug * v.pr_g1) * (1.0 - v.pr_g1)
}

/// One stratum of a measured covariate: its label, observed summary, and
/// full-sample weight `Pr[X = x]`.
#[derive(Debug, Clone)]
pub struct StratumSummary {
    pub stratum: String,
    pub summary: ObservedSummary,
    pub weight: f64,
}

fn check_weights(strata: &[StratumSummary]) -> Result<()> {
    if strata.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = strata.iter().map(|s| s.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BadWeights(total));
    }
    Ok(())
}

/// Per-stratum and aggregate bias from per-stratum sensitivity parameters.
#[derive(Debug, Clone)]
pub struct StratifiedBias {
    /// Signed per-stratum bias `E[Y|X] - E[Y|X,G=1] = -ED RD Pr[G=0|X]`.
    pub per_stratum: Vec<(String, f64)>,
    /// Weight-sum of the per-stratum biases.
    pub aggregate: f64,
}

pub fn stratified_bias(
    strata: &[StratumSummary],
    ed_by_stratum: &[f64],
    rd_by_stratum: &[f64],
) -> Result<StratifiedBias> {
    check_weights(strata)?;
    if ed_by_stratum.len() != strata.len() {
        return Err(Error::LengthMismatch(strata.len(), ed_by_stratum.len()));
    }
    if rd_by_stratum.len() != strata.len() {
        return Err(Error::LengthMismatch(strata.len(), rd_by_stratum.len()));
    }
    let mut per_stratum = Vec::with_capacity(strata.len());
    let mut aggregate = 0.0;
    for (i, s) in strata.iter().enumerate() {
        if s.summary.frac_missing >= 1.0 {
            return Err(Error::AllMissing("stratum has no observed outcomes"));
        }
        let bias = -ed_by_stratum[i] * rd_by_stratum[i] * s.summary.frac_missing;
        aggregate += s.weight * bias;
        per_stratum.push((s.stratum.clone(), bias));
    }
    Ok(StratifiedBias {
        per_stratum,
        aggregate,
    })
}

/// Difference-scale MinNI within each stratum, using that stratum's own
/// standard deviation and missing fraction. Failures (for example a stratum
/// with nothing missing) are reported per stratum without aborting the rest.
/// Weights play no role here; they only matter when aggregating.
pub fn stratified_minni(
    strata: &[StratumSummary],
    budget: BiasBudget,
    m: usize,
) -> Result<Vec<(String, Result<MinNIResult>)>> {
    if strata.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(strata
        .iter()
        .map(|s| {
            let result = budget
                .difference_budget(&s.summary)
                .and_then(|k| minni_difference(&s.summary, k, m, s.summary.outcome_kind));
            (s.stratum.clone(), result)
        })
        .collect())
}

/// One row of the stratified report emitted by the CLI.
#[derive(Debug, Clone)]
pub struct StratumRow {
    pub stratum: String,
    pub weight: f64,
    pub bias: Option<f64>,
    pub minni: Option<(f64, f64)>,
    pub feasible: Option<bool>,
    pub note: Option<String>,
}

/// CSV with columns `stratum,weight,bias,minni_ed,minni_rd,feasible`;
/// unavailable entries carry `NA`.
pub fn strata_csv(rows: &[StratumRow]) -> String {
    let mut out = String::from("stratum,weight,bias,minni_ed,minni_rd,feasible\n");
    for r in rows {
        let bias = r.bias.map_or("NA".into(), |b| fmt::sig(b, 10));
        let (ed, rd) = match r.minni {
            Some((a, b)) => (fmt::sig(a, 10), fmt::sig(b, 10)),
            None => ("NA".into(), "NA".into()),
        };
        let feasible = r.feasible.map_or("NA".into(), |f| f.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.stratum,
            fmt::sig(r.weight, 10),
            bias,
            ed,
            rd,
            feasible
        ));
    }
    out
}

pub fn strata_json(rows: &[StratumRow]) -> String {
    let items: Vec<String> = rows
        .iter()
        .map(|r| {
            let bias = r.bias.map_or("null".into(), |b| fmt::sig(b, 10));
            let minni = match r.minni {
                Some((a, b)) => format!("[{},{}]", fmt::sig(a, 10), fmt::sig(b, 10)),
                None => "null".into(),
            };
            let feasible = r.feasible.map_or("null".into(), |f| f.to_string());
            let note = r.note.as_deref().map_or("null".into(), json_string);
            format!(
                "{{\"stratum\":{},\"weight\":{},\"bias\":{},\"minni\":{},\"feasible\":{},\"note\":{}}}",
                json_string(&r.stratum),
                fmt::sig(r.weight, 10),
                bias,
                minni,
                feasible,
                note
            )
        })
        .collect();
    format!("[{}]", items.join(","))
}
