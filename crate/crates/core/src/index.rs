//! Minimum nonignorability indices and the bounds behind them.
//!
//! The bias of the observed mean decomposes exactly (binary confounder U) as
//!
//! ```text
//!   E[Y] - E[Y|G=1] = -ED_YU * RD_UG * Pr[G=0]
//! ```
//!
//! with `ED_YU = E[Y|U=1] - E[Y|U=0]` and
//! `RD_UG = Pr[U=1|G=1] - Pr[U=1|G=0]`. Capping |bias| at a budget
//! `k*sigma` therefore carves an indifference region
//! `|ED*RD| <= k*sigma / Pr[G=0]` in the (ED, RD) plane; the MinNI is the
//! boundary point closest to the no-confounding origin. The ratio scale
//! plays the same game with `ER_YU = E[Y|U=1]/E[Y|U=0]`,
//! `RR_UG = Pr[U=1|G=1]/Pr[U=1|G=0]`, origin (1, 1), and budget `k*CV`.
//! Both optimizations have closed forms; a small index means mild
//! confounding already moves the estimate by the full budget.
//!
//! A confounder with m > 2 levels yields bounding inequalities instead of
//! identities, with the max-min spread parameters taking the place of the
//! binary differences/ratios.

use crate::error::{Error, Result};
use crate::fmt;
use crate::summary::{ObservedSummary, OutcomeKind};

/// Which comparison scale an index lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Difference,
    Ratio,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Difference => "difference",
            Scale::Ratio => "ratio",
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "difference" => Ok(Scale::Difference),
            "ratio" => Ok(Scale::Ratio),
            other => Err(format!(
                "unknown scale {other:?}, expected difference or ratio"
            )),
        }
    }
}

/// How the maximum negligible bias is specified.
///
/// The budget enters every formula as an absolute quantity (`k*sigma` on the
/// difference scale, `k*CV` on the ratio scale); these variants are the
/// conversion conventions from user-facing units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasBudget {
    /// Multiples of the standard error of the observed mean.
    SeUnits(f64),
    /// Multiples of the observed standard deviation (the raw `k`).
    SigmaUnits(f64),
    /// An absolute bias (difference scale) or relative bias (ratio scale).
    Absolute(f64),
}

impl BiasBudget {
    fn k(self) -> f64 {
        match self {
            BiasBudget::SeUnits(k) | BiasBudget::SigmaUnits(k) | BiasBudget::Absolute(k) => k,
        }
    }

    fn validate(self) -> Result<()> {
        let k = self.k();
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::BadArgument {
                name: "bias budget",
                value: k,
                reason: "must be a finite nonnegative real",
            });
        }
        Ok(())
    }

    /// Absolute difference-scale budget `k*sigma`.
    pub fn difference_budget(self, summary: &ObservedSummary) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            BiasBudget::SeUnits(k) => k * summary.se_obs,
            BiasBudget::SigmaUnits(k) => k * summary.sd_obs,
            BiasBudget::Absolute(b) => b,
        })
    }

    /// Relative ratio-scale budget `k*CV`.
    pub fn ratio_budget(self, summary: &ObservedSummary) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            BiasBudget::SeUnits(k) => {
                if summary.mu_obs == 0.0 {
                    return Err(Error::BadArgument {
                        name: "mu_obs",
                        value: 0.0,
                        reason: "ratio-scale budget undefined when the observed mean is zero",
                    });
                }
                k * summary.se_obs / summary.mu_obs
            }
            BiasBudget::SigmaUnits(k) => {
                let cv = summary.cv_obs.ok_or(Error::BadArgument {
                    name: "cv_obs",
                    value: f64::NAN,
                    reason: "coefficient of variation undefined when the observed mean is zero",
                })?;
                k * cv
            }
            BiasBudget::Absolute(b) => b,
        })
    }
}

/// A computed minimum nonignorability index.
///
/// `threshold` is the right-hand side of the indifference-region inequality
/// (`k*sigma / ((m-1) Pr[G=0])` or `k*CV / Pr[G=0]`). `index` is `None` when
/// no parameter pair inside the domain can produce the budgeted bias
/// (`feasible = false`); infeasibility is a result state, not an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinNIResult {
    pub scale: Scale,
    pub threshold: f64,
    pub index: Option<(f64, f64)>,
    /// The absolute bias budget used (`k*sigma` or `k*CV`).
    pub budget: f64,
    pub m_levels: usize,
    pub feasible: bool,
}

impl MinNIResult {
    /// Index rounded for presentation; full precision stays in `index`.
    pub fn rounded_index(&self, decimals: u32) -> Option<(f64, f64)> {
        let p = 10f64.powi(decimals as i32);
        self.index
            .map(|(a, b)| ((a * p).round() / p, (b * p).round() / p))
    }

    pub fn to_json(&self) -> String {
        let index = match self.index {
            Some((a, b)) => format!("[{},{}]", fmt::sig(a, 10), fmt::sig(b, 10)),
            None => "null".to_string(),
        };
        format!(
            "{{\"scale\":\"{}\",\"threshold\":{},\"index\":{},\"budget\":{},\"m_levels\":{},\"feasible\":{}}}",
            self.scale.as_str(),
            fmt::sig(self.threshold, 10),
            index,
            fmt::sig(self.budget, 10),
            self.m_levels,
            self.feasible,
        )
    }
}

fn check_missing_fraction(summary: &ObservedSummary) -> Result<f64> {
    let p = summary.frac_missing;
    if p == 0.0 {
        return Err(Error::NoMissingData);
    }
    if p >= 1.0 {
        return Err(Error::AllMissing(
            "the observed-side moments are not estimable",
        ));
    }
    Ok(p)
}

/// Difference-scale MinNI for a confounder with `m` levels.
///
/// `k_sigma` is the absolute bias budget. The threshold is
/// `T = k_sigma / ((m-1) Pr[G=0])`; the closest boundary point is
/// `(sqrt(T), sqrt(T))` when it fits the domain, with the continuous-outcome
/// domain letting the mean-difference coordinate run past 1.
pub fn minni_difference(
    summary: &ObservedSummary,
    k_sigma: f64,
    m: usize,
    kind: OutcomeKind,
) -> Result<MinNIResult> {
    let pr_g0 = check_missing_fraction(summary)?;
    BiasBudget::Absolute(k_sigma).validate()?;
    if m < 2 {
        return Err(Error::TooFewLevels(m));
    }
    let threshold = k_sigma / ((m - 1) as f64 * pr_g0);
    let root = threshold.sqrt();
    let (feasible, index) = match kind {
        OutcomeKind::Binary => {
            if threshold <= 1.0 {
                (true, Some((root, root)))
            } else {
                (false, None)
            }
        }
        OutcomeKind::Continuous => (true, Some((threshold.max(root), root.min(1.0)))),
    };
    Ok(MinNIResult {
        scale: Scale::Difference,
        threshold,
        index,
        budget: k_sigma,
        m_levels: m,
        feasible,
    })
}

/// Ratio-scale MinNI. `k_cv` is the relative bias budget; the categorical
/// case reduces to the same closed form, so no level count is taken.
pub fn minni_ratio(summary: &ObservedSummary, k_cv: f64) -> Result<MinNIResult> {
    let pr_g0 = check_missing_fraction(summary)?;
    BiasBudget::Absolute(k_cv).validate()?;
    let threshold = k_cv / pr_g0;
    let (feasible, index) = if threshold < 1.0 {
        let v = 1.0 / (1.0 - threshold.sqrt());
        (true, Some((v, v)))
    } else {
        (false, None)
    };
    Ok(MinNIResult {
        scale: Scale::Ratio,
        threshold,
        index,
        budget: k_cv,
        m_levels: 2,
        feasible,
    })
}

/// Difference-scale bias bound for an m-level confounder:
/// `(m-1) |MD_YU * MD_UG| Pr[G=0]`.
pub fn bound_difference_categorical(m: usize, md_yu: f64, md_ug: f64, pr_g0: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::TooFewLevels(m));
    }
    if !(pr_g0 > 0.0 && pr_g0 < 1.0) {
        return Err(Error::BadProbability {
            name: "pr_g0",
            value: pr_g0,
            range: "(0, 1)",
        });
    }
    Ok((m - 1) as f64 * (md_yu * md_ug).abs() * pr_g0)
}

/// Binary-confounder ratio-scale bias bound:
/// `|(ER-1)(RR-1)/(ER RR)| Pr[G=0]`.
pub fn bound_ratio(er_yu: f64, rr_ug: f64, pr_g0: f64) -> Result<f64> {
    if er_yu == 0.0 {
        return Err(Error::BadArgument {
            name: "er_yu",
            value: er_yu,
            reason: "must be nonzero",
        });
    }
    if rr_ug <= 0.0 {
        return Err(Error::BadArgument {
            name: "rr_ug",
            value: rr_ug,
            reason: "must be positive",
        });
    }
    if !(0.0..=1.0).contains(&pr_g0) {
        return Err(Error::BadProbability {
            name: "pr_g0",
            value: pr_g0,
            range: "[0, 1]",
        });
    }
    Ok(((er_yu - 1.0) * (rr_ug - 1.0) / (er_yu * rr_ug)).abs() * pr_g0)
}

/// Categorical max-ratio bias bound `(MR_YU-1)(MR_UG-1)/(MR_YU MR_UG)`.
///
/// Valid only when every non-minimal level's relative ratios exceed 1, which
/// the max-ratio parametrization presumes; mixed-sign configurations are
/// rejected rather than bounded.
pub fn bound_ratio_categorical(mr_yu: f64, mr_ug: f64) -> Result<f64> {
    if mr_yu <= 1.0 || mr_ug <= 1.0 {
        return Err(Error::MixedSignRatios(format!(
            "max-ratio bound needs MR_YU > 1 and MR_UG > 1, got ({mr_yu}, {mr_ug})"
        )));
    }
    Ok((mr_yu - 1.0) * (mr_ug - 1.0) / (mr_yu * mr_ug))
}

/// Whether a sensitivity-parameter pair lies inside the indifference region
/// for the given budget.
pub fn indifference_region_check(
    scale: Scale,
    first: f64,
    second: f64,
    summary: &ObservedSummary,
    budget: f64,
) -> Result<bool> {
    let pr_g0 = check_missing_fraction(summary)?;
    BiasBudget::Absolute(budget).validate()?;
    match scale {
        Scale::Difference => {
            let (ed, rd) = (first, second);
            if !(rd.abs() > 0.0 && rd.abs() < 1.0) {
                return Err(Error::BadArgument {
                    name: "rd_ug",
                    value: rd,
                    reason: "|RD| must lie in (0, 1)",
                });
            }
            if ed == 0.0 || !ed.is_finite() {
                return Err(Error::BadArgument {
                    name: "ed_yu",
                    value: ed,
                    reason: "ED must be finite and nonzero",
                });
            }
            Ok((ed * rd).abs() <= budget / pr_g0)
        }
        Scale::Ratio => {
            let (er, rr) = (first, second);
            if rr <= 0.0 || !rr.is_finite() {
                return Err(Error::BadArgument {
                    name: "rr_ug",
                    value: rr,
                    reason: "RR must lie in (0, infinity)",
                });
            }
            if er == 0.0 || !er.is_finite() {
                return Err(Error::BadArgument {
                    name: "er_yu",
                    value: er,
                    reason: "ER must be finite and nonzero",
                });
            }
            let lhs = ((er - 1.0) * (rr - 1.0) / (er * rr)).abs();
            Ok(lhs <= budget / pr_g0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::synthesize_summary;

    fn survey() -> ObservedSummary {
        synthesize_summary(0.7320, 0.376, 3828).unwrap()
    }

    #[test]
    fn survey_difference_index() {
        let r = minni_difference(&survey(), 0.0072, 2, OutcomeKind::Binary).unwrap();
        let (ed, rd) = r.index.unwrap();
        assert!((ed - 0.1384).abs() < 5e-5, "ed = {ed}");
        assert_eq!(r.rounded_index(2).unwrap(), (0.14, 0.14));
        assert!(r.feasible);
        assert_eq!(rd, ed);
        // Boundary identity: |ED*RD| equals the threshold exactly.
        assert!((ed * rd - r.threshold).abs() < 1e-12);
    }

    #[test]
    fn difference_index_shrinks_with_more_missingness() {
        let mut last = f64::INFINITY;
        for frac in [0.1, 0.2, 0.376, 0.6, 0.9] {
            let s = synthesize_summary(0.7320, frac, 3828).unwrap();
            let r = minni_difference(&s, 0.0072, 2, OutcomeKind::Binary).unwrap();
            let (ed, _) = r.index.unwrap();
            assert!(ed < last, "index should decrease, got {ed} after {last}");
            last = ed;
        }
    }

    #[test]
    fn table_values_for_smaller_missing_fractions() {
        let s = synthesize_summary(0.7320, 0.1, 3828).unwrap();
        let r = minni_difference(&s, 0.0072, 2, OutcomeKind::Binary).unwrap();
        assert_eq!(r.rounded_index(2).unwrap(), (0.27, 0.27));
    }

    #[test]
    fn continuous_outcome_clamps_rd_at_one() {
        let s = synthesize_summary(0.5, 0.5, 100).unwrap();
        // Threshold = budget / Pr[G=0] = 2 / 0.5 = 4.
        let r = minni_difference(&s, 2.0, 2, OutcomeKind::Continuous).unwrap();
        assert_eq!(r.index.unwrap(), (4.0, 1.0));
        assert!(r.feasible);
    }

    #[test]
    fn categorical_levels_shrink_the_index() {
        let r = minni_difference(&survey(), 0.0072, 3, OutcomeKind::Binary).unwrap();
        let (md, _) = r.index.unwrap();
        // sqrt(0.0072 / (2 * 0.376)), cross-checked by the numeric oracle.
        assert!((md - 0.0978490).abs() < 1e-6, "md = {md}");
        let numeric = crate::oracle::numeric_minni(
            r.threshold,
            Scale::Difference,
            crate::oracle::NumericDomain {
                x_max: 1.0,
                y_max: 1.0,
            },
            500,
        );
        let (nx, _) = numeric.point.unwrap();
        assert!((nx - md).abs() < 1e-6);
    }

    #[test]
    fn m2_categorical_reduces_to_binary_exactly() {
        let r = minni_difference(&survey(), 0.0072, 2, OutcomeKind::Binary).unwrap();
        let binary_form = (0.0072f64 / 0.376).sqrt();
        assert_eq!(r.index.unwrap(), (binary_form, binary_form));
        assert_eq!(
            bound_difference_categorical(2, 0.3, 0.2, 0.4).unwrap(),
            (0.3f64 * 0.2 * 0.4).abs()
        );
    }

    #[test]
    fn infeasible_binary_budget_is_flagged_not_fabricated() {
        let s = synthesize_summary(0.5, 0.1, 100).unwrap();
        let r = minni_difference(&s, 0.2, 2, OutcomeKind::Binary).unwrap();
        assert!(!r.feasible);
        assert!(r.index.is_none());
        assert!((r.threshold - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_missing_data_is_an_error() {
        let s = synthesize_summary(0.5, 0.0, 100).unwrap();
        assert!(matches!(
            minni_difference(&s, 0.01, 2, OutcomeKind::Binary),
            Err(Error::NoMissingData)
        ));
    }

    #[test]
    fn survey_ratio_index() {
        let r = minni_ratio(&survey(), 0.0072 / 0.7320).unwrap();
        let (er, rr) = r.index.unwrap();
        assert!((er - 1.193).abs() < 1e-3, "er = {er}");
        assert_eq!(r.rounded_index(2).unwrap(), (1.19, 1.19));
        // Boundary identity is exact.
        assert!(((er - 1.0) * (rr - 1.0) / (er * rr) - r.threshold).abs() < 1e-12);
    }

    #[test]
    fn ratio_index_at_smaller_missing_fraction() {
        let s = synthesize_summary(0.7320, 0.2, 3828).unwrap();
        let r = minni_ratio(&s, 0.0072 / 0.7320).unwrap();
        assert_eq!(r.rounded_index(2).unwrap(), (1.28, 1.28));
    }

    #[test]
    fn quarter_threshold_doubles() {
        let s = synthesize_summary(0.5, 0.4, 100).unwrap();
        // k_cv chosen so threshold = 0.25.
        let r = minni_ratio(&s, 0.1).unwrap();
        assert!((r.threshold - 0.25).abs() < 1e-15);
        let (er, rr) = r.index.unwrap();
        assert!((er - 2.0).abs() < 1e-12 && (rr - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_budget_at_or_past_missing_fraction_is_infeasible() {
        let s = synthesize_summary(0.5, 0.3, 100).unwrap();
        let r = minni_ratio(&s, 0.3).unwrap();
        assert!(!r.feasible);
        assert!(r.index.is_none());
    }

    #[test]
    fn budget_conversions() {
        let s = survey();
        let d = BiasBudget::SeUnits(1.0).difference_budget(&s).unwrap();
        assert!((d - s.se_obs).abs() < 1e-15);
        let r = BiasBudget::SeUnits(1.0).ratio_budget(&s).unwrap();
        assert!((r - s.se_obs / s.mu_obs).abs() < 1e-15);
        let raw = BiasBudget::SigmaUnits(0.0162558)
            .difference_budget(&s)
            .unwrap();
        assert!((raw - 0.0072).abs() < 1e-5);
        assert!(BiasBudget::SeUnits(-1.0).difference_budget(&s).is_err());
    }

    #[test]
    fn categorical_bound_direct_values() {
        assert!((bound_difference_categorical(3, 0.5, 0.2, 0.5).unwrap() - 0.1).abs() < 1e-15);
        assert!(bound_difference_categorical(1, 0.5, 0.2, 0.5).is_err());
    }

    #[test]
    fn ratio_bound_direct_values() {
        assert!((bound_ratio(2.0, 2.0, 0.5).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(bound_ratio(1.0, 7.0, 0.5).unwrap(), 0.0);
        assert!(bound_ratio(0.0, 1.0, 0.5).is_err());
        assert!(bound_ratio_categorical(2.0, 0.9).is_err());
        assert!((bound_ratio_categorical(2.0, 2.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn indifference_checks_around_the_survey_boundary() {
        let s = survey();
        assert!(indifference_region_check(Scale::Difference, 0.10, 0.10, &s, 0.0072).unwrap());
        assert!(!indifference_region_check(Scale::Difference, 0.14, 0.14, &s, 0.0072).unwrap());
        assert!(indifference_region_check(Scale::Ratio, 1.0, 42.0, &s, 0.001).unwrap());
        assert!(indifference_region_check(Scale::Difference, 0.5, 1.5, &s, 0.0072).is_err());
    }

    #[test]
    fn json_shape() {
        let r = minni_difference(&survey(), 0.0072, 2, OutcomeKind::Binary).unwrap();
        let json = r.to_json();
        assert!(json.contains("\"scale\":\"difference\""));
        assert!(json.contains("\"feasible\":true"));
        let infeasible = minni_ratio(&survey(), 10.0).unwrap();
        assert!(infeasible.to_json().contains("\"index\":null"));
    }
}
