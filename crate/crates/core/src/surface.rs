//! Response-surface sensitivity analysis under a binary unmeasured confounder.
//!
//! The model partially specifies the joint law of (Y, G, U):
//!
//! ```text
//!   Pr[U=0]        = pi0
//!   Pr[G=1 | U=u]  = expit(gamma0 + gamma1 u)
//!   E[Y | U=u]     = q(beta0 + beta1 u)        (q = expit for binary Y)
//! ```
//!
//! `pi0`, `gamma1` and `beta1` are the sensitivity parameters; they are not
//! identifiable because U is never observed. For fixed sensitivity
//! parameters, the two estimable quantities `Pr[G=1]` and `E[Y|G=1]` pin
//! down `gamma0` and `beta0`: each solve reduces to a quadratic in
//! `exp(gamma0)` (resp. `exp(beta0)`) with exactly one positive root. The
//! calibrated model then yields the marginal mean `E[Y]` and the bias
//! `E[Y] - E[Y|G=1]`.
//!
//! Internally the solver works with the missing fraction `Pr[G=0]` and the
//! observed zero-fraction `Pr[Y=0|G=1]`, which puts both calibrations in the
//! same algebraic form; the public API speaks only in terms of
//! `mu_obs = E[Y|G=1]`.

use crate::error::{Error, Result};
use crate::fmt;
use crate::summary::{ObservedSummary, OutcomeKind};

/// Inverse logit.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Link for the outcome regression `E[Y|U=u] = q(beta0 + beta1 u)`.
///
/// The missingness link is always logistic. `Identity` turns the outcome
/// calibration into a linear solve and is intended for continuous outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutcomeLink {
    #[default]
    Logistic,
    Identity,
}

/// Fixed nonignorability parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceParams {
    /// Pr[U=0].
    pub pi0: f64,
    /// Log-odds shift of observation for U=1 relative to U=0.
    pub gamma1: f64,
    /// Shift of the outcome linear predictor for U=1 relative to U=0.
    pub beta1: f64,
    pub link: OutcomeLink,
}

impl SurfaceParams {
    pub fn new(pi0: f64, gamma1: f64, beta1: f64) -> Self {
        SurfaceParams {
            pi0,
            gamma1,
            beta1,
            link: OutcomeLink::Logistic,
        }
    }

    /// Convenience constructor taking odds ratios instead of log odds.
    pub fn from_exp(pi0: f64, exp_gamma1: f64, exp_beta1: f64) -> Self {
        Self::new(pi0, exp_gamma1.ln(), exp_beta1.ln())
    }

    fn validate(&self) -> Result<()> {
        if !(self.pi0 > 0.0 && self.pi0 < 1.0) {
            return Err(Error::BadProbability {
                name: "pi0",
                value: self.pi0,
                range: "(0, 1)",
            });
        }
        for (name, v) in [("gamma1", self.gamma1), ("beta1", self.beta1)] {
            if !v.is_finite() {
                return Err(Error::BadArgument {
                    name,
                    value: v,
                    reason: "must be finite",
                });
            }
        }
        Ok(())
    }
}

/// Calibrated intercepts and the implied means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSolution {
    pub gamma0_hat: f64,
    pub beta0_hat: f64,
    /// E[Y] under the calibrated model.
    pub marginal_mean: f64,
    /// E[Y|G=1], which the calibration reproduces by construction.
    pub conditional_mean: f64,
    /// marginal_mean - conditional_mean.
    pub bias: f64,
}

/// Solve `t = pi/(1+a) + (1-pi)/(1+a*c)` for the unique positive root `a`.
///
/// Both intercept calibrations reduce to this form. The quadratic is
/// `(t*c) a^2 + B a - (1-t) = 0` with `B = (t-pi)c + t + pi - 1`; the root
/// product is negative so exactly one root is positive. The expansion used
/// depends on the sign of B to avoid cancellation.
fn positive_quadratic_root(t: f64, pi: f64, c: f64) -> Result<f64> {
    let b = (t - pi) * c + t + pi - 1.0;
    let disc = b * b + 4.0 * c * t * (1.0 - t);
    if disc < 0.0 {
        return Err(Error::Internal(format!(
            "negative discriminant {disc} in intercept calibration (t={t}, pi={pi}, c={c})"
        )));
    }
    let sqrt_disc = disc.sqrt();
    let root = if b >= 0.0 {
        2.0 * (1.0 - t) / (b + sqrt_disc)
    } else {
        (sqrt_disc - b) / (2.0 * c * t)
    };
    if root.is_nan() || root <= 0.0 {
        return Err(Error::Internal(format!(
            "calibrated intercept root {root} is not positive (t={t}, pi={pi}, c={c})"
        )));
    }
    Ok(root)
}

/// `Pr[G=1]` implied by the missingness model at the given intercept.
pub fn pr_observed(pi0: f64, gamma0: f64, gamma1: f64) -> f64 {
    expit(gamma0 + gamma1) * (1.0 - pi0) + expit(gamma0) * pi0
}

/// `Pr[U=0|G=1]` implied by the calibrated missingness model.
pub fn pr_u0_given_observed(pi0: f64, gamma0: f64, gamma1: f64) -> f64 {
    let a = gamma0.exp();
    let c = gamma1.exp();
    pi0 / (pi0 + (1.0 - pi0) * c * (1.0 + a) / (1.0 + a * c))
}

/// Marginal mean `E[Y]` under logistic outcome link.
pub fn marginal_mean(pi0: f64, beta0: f64, beta1: f64) -> f64 {
    expit(beta0 + beta1) * (1.0 - pi0) + expit(beta0) * pi0
}

/// `E[Y|G=1]` under logistic outcome link, given `w = Pr[U=0|G=1]`.
pub fn conditional_mean_observed(w: f64, beta0: f64, beta1: f64) -> f64 {
    expit(beta0 + beta1) * (1.0 - w) + expit(beta0) * w
}

/// Calibrate the intercepts to an observed summary for fixed sensitivity
/// parameters, and evaluate the implied marginal mean and bias.
pub fn calibrate(summary: &ObservedSummary, params: &SurfaceParams) -> Result<SurfaceSolution> {
    params.validate()?;
    let p_miss = summary.frac_missing;
    if p_miss == 0.0 {
        return Err(Error::NoMissingData);
    }
    if p_miss >= 1.0 {
        return Err(Error::AllMissing("calibration undefined"));
    }

    // Missingness intercept: Pr[G=0] = pi0/(1+e^g0) + (1-pi0)/(1+e^(g0+g1)).
    let exp_gamma1 = params.gamma1.exp();
    let exp_gamma0 = positive_quadratic_root(p_miss, params.pi0, exp_gamma1)?;
    let gamma0 = exp_gamma0.ln();
    let w = pr_u0_given_observed(params.pi0, gamma0, params.gamma1);

    let (beta0, marginal) = match params.link {
        OutcomeLink::Logistic => {
            if summary.outcome_kind != OutcomeKind::Binary {
                return Err(Error::BadArgument {
                    name: "outcome_kind",
                    value: f64::NAN,
                    reason: "logistic outcome link requires a binary summary",
                });
            }
            if !(summary.mu_obs > 0.0 && summary.mu_obs < 1.0) {
                return Err(Error::DegenerateMean(summary.mu_obs));
            }
            // Outcome intercept via Pr[Y=0|G=1] = w/(1+e^b0) + (1-w)/(1+e^(b0+b1)).
            let mu_zero = 1.0 - summary.mu_obs;
            let exp_beta1 = params.beta1.exp();
            let exp_beta0 = positive_quadratic_root(mu_zero, w, exp_beta1)?;
            let beta0 = exp_beta0.ln();
            (beta0, marginal_mean(params.pi0, beta0, params.beta1))
        }
        OutcomeLink::Identity => {
            // mu_obs = beta0 + beta1 (1 - w), linear in beta0.
            let beta0 = summary.mu_obs - params.beta1 * (1.0 - w);
            (beta0, beta0 + params.beta1 * (1.0 - params.pi0))
        }
    };

    Ok(SurfaceSolution {
        gamma0_hat: gamma0,
        beta0_hat: beta0,
        marginal_mean: marginal,
        conditional_mean: summary.mu_obs,
        bias: marginal - summary.mu_obs,
    })
}

/// One cell of a bias grid. `bias` carries a per-cell error message instead
/// of aborting the whole grid.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub pi0: f64,
    pub exp_beta1: f64,
    pub exp_gamma1: f64,
    pub bias: std::result::Result<f64, String>,
}

/// Bias over the Cartesian product of sensitivity-parameter values,
/// row-major with `pi0` outermost.
#[derive(Debug, Clone)]
pub struct BiasGrid {
    pub cells: Vec<GridCell>,
}

pub fn bias_grid(
    summary: &ObservedSummary,
    pi0_values: &[f64],
    exp_beta1_values: &[f64],
    exp_gamma1_values: &[f64],
) -> BiasGrid {
    let mut cells =
        Vec::with_capacity(pi0_values.len() * exp_beta1_values.len() * exp_gamma1_values.len());
    for &pi0 in pi0_values {
        for &eb in exp_beta1_values {
            for &eg in exp_gamma1_values {
                let params = SurfaceParams::from_exp(pi0, eg, eb);
                let bias = calibrate(summary, &params)
                    .map(|s| s.bias)
                    .map_err(|e| e.to_string());
                cells.push(GridCell {
                    pi0,
                    exp_beta1: eb,
                    exp_gamma1: eg,
                    bias,
                });
            }
        }
    }
    BiasGrid { cells }
}

impl BiasGrid {
    /// CSV with 6 decimal places; failed cells carry `NA` in the bias column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pi0,exp_beta1,exp_gamma1,bias\n");
        for c in &self.cells {
            let bias = match &c.bias {
                Ok(b) => format!("{b:.6}"),
                Err(_) => "NA".to_string(),
            };
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{}\n",
                c.pi0, c.exp_beta1, c.exp_gamma1, bias
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<String> = self
            .cells
            .iter()
            .map(|c| {
                let bias = match &c.bias {
                    Ok(b) => format!("\"bias\":{}", fmt::sig(*b, 10)),
                    Err(e) => format!("\"bias\":null,\"error\":{}", fmt::json_string(e)),
                };
                format!(
                    "{{\"pi0\":{},\"exp_beta1\":{},\"exp_gamma1\":{},{}}}",
                    fmt::sig(c.pi0, 10),
                    fmt::sig(c.exp_beta1, 10),
                    fmt::sig(c.exp_gamma1, 10),
                    bias
                )
            })
            .collect();
        format!("[{}]", rows.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::synthesize_summary;
    use proptest::prelude::*;

    fn survey_summary() -> ObservedSummary {
        synthesize_summary(0.7320, 0.376, 3828).unwrap()
    }

    #[test]
    fn marginal_mean_spot_values() {
        assert!((marginal_mean(0.5, 0.0, 0.0) - 0.5).abs() < 1e-15);
        // Independent route: the same mixture assembled from expits directly.
        let m = marginal_mean(0.5, 1.89794f64.ln(), 2f64.ln());
        let direct = 0.5 * (3.79588 / 4.79588) + 0.5 * (1.89794 / 2.89794);
        assert!((m - direct).abs() < 1e-12, "got {m}, direct {direct}");
        assert!((m - 0.723206).abs() < 2e-6, "got {m}");
        let dominated = marginal_mean(0.999, 0.0, 10.0);
        assert!((dominated - 0.5005).abs() < 1e-4, "got {dominated}");
    }

    #[test]
    fn calibrated_intercept_matches_hand_solution() {
        // pi0 = 0.5, exp(gamma1) = 2 against the survey summary.
        let s = survey_summary();
        let params = SurfaceParams::from_exp(0.5, 2.0, 2.0);
        let sol = calibrate(&s, &params).unwrap();
        assert!(
            (sol.gamma0_hat.exp() - 1.19125).abs() < 1e-5,
            "exp(g0) = {}",
            sol.gamma0_hat.exp()
        );
        let w = pr_u0_given_observed(0.5, sol.gamma0_hat, params.gamma1);
        assert!((w - 0.43561).abs() < 1e-5, "w = {w}");
    }

    #[test]
    fn survey_bias_cells() {
        let s = survey_summary();
        let sol = calibrate(&s, &SurfaceParams::from_exp(0.5, 2.0, 2.0)).unwrap();
        assert!((sol.bias - -0.0088).abs() < 1e-4, "bias = {}", sol.bias);
        let sol = calibrate(&s, &SurfaceParams::from_exp(0.5, 3.0, 3.0)).unwrap();
        assert!((sol.bias - -0.0218).abs() < 1e-4, "bias = {}", sol.bias);
    }

    #[test]
    fn zero_gamma1_gives_zero_bias() {
        let s = survey_summary();
        for beta1 in [-2.0, -0.5, 0.7, 3.0] {
            let sol = calibrate(&s, &SurfaceParams::new(0.3, 0.0, beta1)).unwrap();
            assert!(sol.bias.abs() < 1e-14, "bias = {}", sol.bias);
        }
    }

    #[test]
    fn zero_beta1_gives_zero_bias() {
        let s = survey_summary();
        for gamma1 in [-2.0, 1.0, 3.0] {
            let sol = calibrate(&s, &SurfaceParams::new(0.7, gamma1, 0.0)).unwrap();
            assert!(sol.bias.abs() < 1e-14, "bias = {}", sol.bias);
        }
    }

    #[test]
    fn calibration_rejects_degenerate_summaries() {
        let no_missing = synthesize_summary(0.5, 0.0, 100).unwrap();
        assert!(matches!(
            calibrate(&no_missing, &SurfaceParams::new(0.5, 1.0, 1.0)),
            Err(Error::NoMissingData)
        ));
        let sure_thing = synthesize_summary(1.0, 0.2, 100).unwrap();
        assert!(matches!(
            calibrate(&sure_thing, &SurfaceParams::new(0.5, 1.0, 1.0)),
            Err(Error::DegenerateMean(_))
        ));
    }

    #[test]
    fn identity_link_calibration_is_linear() {
        let s = crate::summary::synthesize_summary_continuous(10.0, 2.0, 0.25, 50).unwrap();
        let params = SurfaceParams {
            link: OutcomeLink::Identity,
            ..SurfaceParams::new(0.5, 1.0, 3.0)
        };
        let sol = calibrate(&s, &params).unwrap();
        let w = pr_u0_given_observed(0.5, sol.gamma0_hat, 1.0);
        assert!((sol.beta0_hat - (10.0 - 3.0 * (1.0 - w))).abs() < 1e-12);
        assert!((sol.bias - 3.0 * (w - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn grid_is_row_major_with_pi0_outermost() {
        let s = survey_summary();
        let grid = bias_grid(&s, &[0.1, 0.5], &[2.0, 3.0], &[2.0, 3.0]);
        assert_eq!(grid.cells.len(), 8);
        assert_eq!(grid.cells[0].pi0, 0.1);
        assert_eq!(grid.cells[3].pi0, 0.1);
        assert_eq!(grid.cells[3].exp_beta1, 3.0);
        assert_eq!(grid.cells[3].exp_gamma1, 3.0);
        assert_eq!(grid.cells[4].pi0, 0.5);
    }

    #[test]
    fn grid_marks_failed_cells_without_aborting() {
        let no_missing = synthesize_summary(0.5, 0.0, 100).unwrap();
        let grid = bias_grid(&no_missing, &[0.5], &[2.0], &[2.0, 3.0]);
        assert!(grid.cells.iter().all(|c| c.bias.is_err()));
        let csv = grid.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().ends_with("NA"));
    }

    #[test]
    fn grid_gamma1_of_one_is_zero_bias_row() {
        let s = survey_summary();
        let grid = bias_grid(&s, &[0.5], &[2.0, 3.0], &[1.0]);
        for cell in &grid.cells {
            assert!(cell.bias.as_ref().unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn pi0_half_maximizes_bias_on_table_grid() {
        // The grid itself confirms the choice of pi0 = 0.5 as worst case.
        let s = survey_summary();
        let grid = bias_grid(&s, &[0.1, 0.5, 0.9], &[2.0, 3.0], &[2.0, 3.0]);
        for eb in [2.0, 3.0] {
            for eg in [2.0, 3.0] {
                let at = |pi0: f64| {
                    grid.cells
                        .iter()
                        .find(|c| c.pi0 == pi0 && c.exp_beta1 == eb && c.exp_gamma1 == eg)
                        .unwrap()
                        .bias
                        .clone()
                        .unwrap()
                };
                assert!(at(0.5).abs() > at(0.1).abs());
                assert!(at(0.5).abs() > at(0.9).abs());
            }
        }
    }

    proptest! {
        #[test]
        fn back_substitution_recovers_inputs(
            mu in 0.05f64..0.95,
            frac in 0.05f64..0.95,
            pi0 in 0.05f64..0.95,
            gamma1 in -1.8f64..1.8,
            beta1 in -1.8f64..1.8,
        ) {
            let s = synthesize_summary(mu, frac, 500).unwrap();
            let params = SurfaceParams::new(pi0, gamma1, beta1);
            let sol = calibrate(&s, &params).unwrap();
            let pr_g1 = pr_observed(pi0, sol.gamma0_hat, gamma1);
            prop_assert!((pr_g1 - (1.0 - frac)).abs() < 1e-12);
            let w = pr_u0_given_observed(pi0, sol.gamma0_hat, gamma1);
            let cond = conditional_mean_observed(w, sol.beta0_hat, beta1);
            prop_assert!((cond - mu).abs() < 1e-12);
        }

        #[test]
        fn bias_negative_under_positive_shifts(
            mu in 0.1f64..0.9,
            frac in 0.05f64..0.9,
            pi0 in 0.1f64..0.9,
            gamma1 in 0.05f64..1.8,
            beta1 in 0.05f64..1.8,
        ) {
            let s = synthesize_summary(mu, frac, 500).unwrap();
            let sol = calibrate(&s, &SurfaceParams::new(pi0, gamma1, beta1)).unwrap();
            prop_assert!(sol.bias < 0.0, "bias = {}", sol.bias);
        }

        #[test]
        fn confounder_relabel_symmetry(
            mu in 0.1f64..0.9,
            frac in 0.05f64..0.9,
            pi0 in 0.1f64..0.9,
            gamma1 in -1.5f64..1.5,
            beta1 in -1.5f64..1.5,
        ) {
            let s = synthesize_summary(mu, frac, 500).unwrap();
            let a = calibrate(&s, &SurfaceParams::new(pi0, gamma1, beta1)).unwrap();
            let b = calibrate(&s, &SurfaceParams::new(1.0 - pi0, -gamma1, -beta1)).unwrap();
            prop_assert!((a.bias - b.bias).abs() < 1e-12);
        }
    }
}
