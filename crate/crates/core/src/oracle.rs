//! Exact enumeration over small discrete joints of (U, Y, G).
//!
//! A [`JointDistribution`] stores the factorized law
//! `f(u, y, g) = f(u) f(y|u) f(g|u)`, which builds the conditional
//! independence `Y ⟂ G | U` in by construction. Every mean/variance identity
//! and bounding inequality used elsewhere in the crate can then be verified
//! against brute-force summation over the finite table, and the closed-form
//! index optimizations against a grid-plus-refinement numeric minimizer.
//! Nothing in this module reuses the closed forms it is checking.

use crate::error::{Error, Result};
use crate::fmt;
use crate::fmt::json_string;
use crate::index::Scale;
use crate::strata::{variance_gap, VarianceInputs};

/// SplitMix64: a tiny deterministic generator for reproducible sweeps.
///
/// Hand-rolled so that sweep streams never change underneath us; the seed is
/// recorded in every report.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn range_usize(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + (self.next_u64() % (hi_inclusive - lo + 1) as u64) as usize
    }
}

/// Exact joint law of (U, Y, G) factorized as `f(u) f(y|u) f(g|u)`.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    /// Pr[U = u_i]; sums to 1.
    pi: Vec<f64>,
    /// Pr[G = 1 | U = u_i].
    pg_given_u: Vec<f64>,
    /// Shared finite outcome support.
    y_support: Vec<f64>,
    /// Row i: distribution of Y over `y_support` given U = u_i.
    py_given_u: Vec<Vec<f64>>,
}

/// Binary-outcome constructor: `py_given_u[i] = Pr[Y=1 | U=u_i]`.
pub fn build_joint(
    pi: &[f64],
    pg_given_u: &[f64],
    py_given_u: &[f64],
) -> Result<JointDistribution> {
    let rows: Vec<Vec<f64>> = py_given_u.iter().map(|&p| vec![1.0 - p, p]).collect();
    build_joint_with_support(pi, pg_given_u, &[0.0, 1.0], &rows)
}

/// General finite-support constructor.
pub fn build_joint_with_support(
    pi: &[f64],
    pg_given_u: &[f64],
    y_support: &[f64],
    py_given_u: &[Vec<f64>],
) -> Result<JointDistribution> {
    let m = pi.len();
    if m < 2 {
        return Err(Error::TooFewLevels(m));
    }
    if pg_given_u.len() != m {
        return Err(Error::LengthMismatch(m, pg_given_u.len()));
    }
    if py_given_u.len() != m {
        return Err(Error::LengthMismatch(m, py_given_u.len()));
    }
    for &p in pi {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BadProbability {
                name: "pi",
                value: p,
                range: "[0, 1]",
            });
        }
    }
    let total: f64 = pi.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::BadArgument {
            name: "pi",
            value: total,
            reason: "must have positive total mass",
        });
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BadArgument {
            name: "pi",
            value: total,
            reason: "must sum to 1 within 1e-9",
        });
    }
    for &p in pg_given_u {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BadProbability {
                name: "pg_given_u",
                value: p,
                range: "[0, 1]",
            });
        }
    }
    for row in py_given_u {
        if row.len() != y_support.len() {
            return Err(Error::LengthMismatch(y_support.len(), row.len()));
        }
        let mut sum = 0.0;
        for &p in row {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::BadProbability {
                    name: "py_given_u",
                    value: p,
                    range: "[0, 1]",
                });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadArgument {
                name: "py_given_u row",
                value: sum,
                reason: "must sum to 1 within 1e-9",
            });
        }
    }
    // Normalize away the tolerated rounding so downstream sums are exact-ish.
    let pi = pi.iter().map(|p| p / total).collect();
    Ok(JointDistribution {
        pi,
        pg_given_u: pg_given_u.to_vec(),
        y_support: y_support.to_vec(),
        py_given_u: py_given_u.to_vec(),
    })
}

/// Moments obtained by direct summation over the table.
///
/// Conditional fields are `None` when the conditioning event has zero
/// probability.
#[derive(Debug, Clone)]
pub struct ExactMoments {
    pub e_y: f64,
    pub e_y_given_g1: Option<f64>,
    pub e_y_given_g0: Option<f64>,
    pub pr_g0: f64,
    /// `pr_u_given_g[g][i] = Pr[U=u_i | G=g]` for g in {0, 1}.
    pub pr_u_given_g: [Option<Vec<f64>>; 2],
    pub var_y: f64,
    pub var_y_given_g1: Option<f64>,
}

impl JointDistribution {
    pub fn m(&self) -> usize {
        self.pi.len()
    }

    pub fn pr_g1(&self) -> f64 {
        self.pi
            .iter()
            .zip(&self.pg_given_u)
            .map(|(p, g)| p * g)
            .sum()
    }

    /// E[Y | U = u_i].
    pub fn level_mean(&self, i: usize) -> f64 {
        self.y_support
            .iter()
            .zip(&self.py_given_u[i])
            .map(|(y, p)| y * p)
            .sum()
    }

    fn level_moment2(&self, i: usize) -> f64 {
        self.y_support
            .iter()
            .zip(&self.py_given_u[i])
            .map(|(y, p)| y * y * p)
            .sum()
    }

    /// Var[Y | U = u_i].
    pub fn level_var(&self, i: usize) -> f64 {
        let m = self.level_mean(i);
        self.level_moment2(i) - m * m
    }
}

/// All moments by direct summation over the finite table.
pub fn exact_moments(joint: &JointDistribution) -> ExactMoments {
    let m = joint.m();
    let pr_g1 = joint.pr_g1();
    let pr_g0 = 1.0 - pr_g1;

    let mut e_y = 0.0;
    let mut e_y2 = 0.0;
    let mut e_y_g1 = 0.0;
    let mut e_y2_g1 = 0.0;
    let mut e_y_g0 = 0.0;
    for i in 0..m {
        let mu_i = joint.level_mean(i);
        let m2_i = joint.level_moment2(i);
        e_y += joint.pi[i] * mu_i;
        e_y2 += joint.pi[i] * m2_i;
        e_y_g1 += joint.pi[i] * joint.pg_given_u[i] * mu_i;
        e_y2_g1 += joint.pi[i] * joint.pg_given_u[i] * m2_i;
        e_y_g0 += joint.pi[i] * (1.0 - joint.pg_given_u[i]) * mu_i;
    }

    let cond = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
    let u_given = |g1: bool| -> Option<Vec<f64>> {
        let den = if g1 { pr_g1 } else { pr_g0 };
        if den <= 0.0 {
            return None;
        }
        Some(
            (0..m)
                .map(|i| {
                    let pg = if g1 {
                        joint.pg_given_u[i]
                    } else {
                        1.0 - joint.pg_given_u[i]
                    };
                    joint.pi[i] * pg / den
                })
                .collect(),
        )
    };

    let e_y_given_g1 = cond(e_y_g1, pr_g1);
    let var_y_given_g1 = e_y_given_g1.map(|mu| e_y2_g1 / pr_g1 - mu * mu);

    ExactMoments {
        e_y,
        e_y_given_g1,
        e_y_given_g0: cond(e_y_g0, pr_g0),
        pr_g0,
        pr_u_given_g: [u_given(false), u_given(true)],
        var_y: e_y2 - e_y * e_y,
        var_y_given_g1,
    }
}

/// Result of checking one bounding inequality against enumerated truth.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub actual: f64,
    pub bound: f64,
    pub satisfied: bool,
}

impl BoundCheck {
    fn new(actual: f64, bound: f64) -> Self {
        // Tiny slack absorbs floating-point rounding in the enumerated side.
        BoundCheck {
            actual,
            bound,
            satisfied: actual <= bound + 1e-12,
        }
    }
}

/// Residuals of the exact identities and satisfaction of the bounds, with
/// inapplicable sub-checks skipped and the reason recorded.
#[derive(Debug, Clone, Default)]
pub struct IdentityReport {
    /// Mean decomposition (binary U): `E[Y]-E[Y|G=1] = -ED*RD*Pr[G=0]`.
    pub mean_residual: Option<f64>,
    /// Ratio decomposition (binary U) in terms of ER, RR and Pr[U=1|G=0].
    pub ratio_residual: Option<f64>,
    /// Variance-gap formula (binary U) vs enumerated `Var[Y]-Var[Y|G=1]`.
    pub variance_residual: Option<f64>,
    /// Categorical difference-scale bound.
    pub difference_bound: Option<BoundCheck>,
    /// Categorical max-ratio bound (only when all relative ratios line up).
    pub ratio_bound: Option<BoundCheck>,
    /// Binary ratio-scale bound with the Pr[G=0] factor.
    pub binary_ratio_bound: Option<BoundCheck>,
    pub skipped: Vec<String>,
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Check every identity and bound that applies to this joint.
pub fn check_identities(joint: &JointDistribution) -> IdentityReport {
    let mut report = IdentityReport::default();
    let mo = exact_moments(joint);
    let m = joint.m();

    let (Some(e_y_g1), Some(u_g0), Some(u_g1)) = (
        mo.e_y_given_g1,
        mo.pr_u_given_g[0].as_ref(),
        mo.pr_u_given_g[1].as_ref(),
    ) else {
        report
            .skipped
            .push("degenerate Pr[G]: conditional moments undefined".to_string());
        return report;
    };

    let means: Vec<f64> = (0..m).map(|i| joint.level_mean(i)).collect();
    let true_bias = mo.e_y - e_y_g1;

    if m == 2 {
        let ed = means[1] - means[0];
        let rd = u_g1[1] - u_g0[1];

        report.mean_residual = Some((true_bias - (-ed * rd * mo.pr_g0)).abs());

        // Ratio decomposition needs nonzero reference-level mean and
        // positive missing-side mass at U=1.
        if means[0] != 0.0 && u_g0[1] > 0.0 && e_y_g1 != 0.0 {
            let er = means[1] / means[0];
            let rr = u_g1[1] / u_g0[1];
            let inv_q0 = 1.0 / u_g0[1];
            let rhs = (er - 1.0 + inv_q0) / ((er - 1.0) * rr + inv_q0);
            let lhs = mo.e_y_given_g0.expect("pr_g0 > 0 here") / e_y_g1;
            report.ratio_residual = Some((lhs - rhs).abs());

            // Binary ratio bound: |E[Y]/E[Y|G=1] - 1| <= |(ER-1)(RR-1)/(ER RR)| Pr[G=0].
            if means[0] > 0.0 && means[1] > 0.0 {
                let actual = (mo.e_y / e_y_g1 - 1.0).abs();
                let bound = ((er - 1.0) * (rr - 1.0) / (er * rr)).abs() * mo.pr_g0;
                report.binary_ratio_bound = Some(BoundCheck::new(actual, bound));
            } else {
                report
                    .skipped
                    .push("binary ratio bound: level mean not positive".to_string());
            }
        } else {
            report
                .skipped
                .push("ratio decomposition: zero reference mean or Pr[U=1|G=0]".to_string());
        }

        // Variance gap, with Var[U|G=g] = p(1-p) for binary U.
        if let Some(var_y_g1) = mo.var_y_given_g1 {
            let vd_yu = joint.level_var(0) - joint.level_var(1);
            let vd_ug = u_g0[1] * (1.0 - u_g0[1]) - u_g1[1] * (1.0 - u_g1[1]);
            let formula = variance_gap(&VarianceInputs {
                vd_yu,
                vd_ug,
                ed_yu: ed,
                rd_ug: rd,
                pr_g1: 1.0 - mo.pr_g0,
            });
            report.variance_residual = Some(((mo.var_y - var_y_g1) - formula).abs());
        }
    } else {
        report
            .skipped
            .push(format!("binary-only identities skipped for m = {m}"));
    }

    // Difference-scale bound holds for any m.
    let max_mean = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_level = argmin(&means);
    let md_yu = max_mean - means[min_level];
    let md_ug = (0..m)
        .map(|i| u_g1[i] - u_g0[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let bound = (m - 1) as f64 * (md_yu * md_ug).abs() * mo.pr_g0;
    report.difference_bound = Some(BoundCheck::new(true_bias.abs(), bound));

    // Max-ratio bound: applicable when ratios are defined and every level
    // with an above-minimum mean is over-represented among the observed.
    if means[min_level] > 0.0 && u_g0.iter().all(|&q| q > 0.0) && e_y_g1 != 0.0 {
        let er: Vec<f64> = means.iter().map(|mu| mu / means[min_level]).collect();
        let rr: Vec<f64> = (0..m).map(|i| u_g1[i] / u_g0[i]).collect();
        let aligned = (0..m).all(|i| er[i] <= 1.0 + 1e-12 || rr[i] >= 1.0 - 1e-12);
        let mr_yu = er.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mr_ug = rr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if aligned && mr_yu > 1.0 && mr_ug > 1.0 {
            let actual = (mo.e_y / e_y_g1 - 1.0).abs();
            let bound = (mr_yu - 1.0) * (mr_ug - 1.0) / (mr_yu * mr_ug);
            report.ratio_bound = Some(BoundCheck::new(actual, bound));
        } else {
            report
                .skipped
                .push("max-ratio bound: mixed-sign relative ratios".to_string());
        }
    } else {
        report
            .skipped
            .push("max-ratio bound: ratios undefined for this joint".to_string());
    }

    report
}

/// Domain box for the numeric minimizer; lower edges are the scale's origin
/// (0 for differences, 1 for ratios).
#[derive(Debug, Clone, Copy)]
pub struct NumericDomain {
    pub x_max: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NumericMinNI {
    pub feasible: bool,
    pub point: Option<(f64, f64)>,
}

/// Independent check of the closed-form indices: coarse 2-D grid search over
/// the domain box followed by a 1-D refinement along the active constraint.
///
/// The refinement scans the boundary curve at `grid_n` points and polishes
/// the best bracket by ternary search, so agreement with the closed forms to
/// 1e-6 does not depend on the grid resolution alone.
pub fn numeric_minni(
    threshold: f64,
    scale: Scale,
    domain: NumericDomain,
    grid_n: usize,
) -> NumericMinNI {
    assert!(grid_n >= 2);
    match scale {
        Scale::Difference => numeric_difference(threshold, domain, grid_n),
        Scale::Ratio => numeric_ratio(threshold, domain, grid_n),
    }
}

fn numeric_difference(t: f64, domain: NumericDomain, n: usize) -> NumericMinNI {
    if t == 0.0 {
        return NumericMinNI {
            feasible: true,
            point: Some((0.0, 0.0)),
        };
    }
    if t > domain.x_max * domain.y_max {
        return NumericMinNI {
            feasible: false,
            point: None,
        };
    }
    // Stage 1: grid scan of the feasible side x*y >= t. For fixed x the
    // objective grows with y, so each column's best cell is its first
    // feasible one; this visits the full n x n grid's minimum exactly.
    let mut grid_best = (f64::INFINITY, 0.0, 0.0);
    for i in 1..=n {
        let x = domain.x_max * i as f64 / n as f64;
        let y_min = t / x;
        if y_min > domain.y_max {
            continue;
        }
        let j = (y_min / domain.y_max * n as f64).ceil().max(1.0) as usize;
        for jj in j..=n {
            let y = domain.y_max * jj as f64 / n as f64;
            if x * y >= t {
                let obj = x * x + y * y;
                if obj < grid_best.0 {
                    grid_best = (obj, x, y);
                }
                break;
            }
        }
    }
    // Stage 2: refine along the active boundary x*y = t.
    let y_lo = (t / domain.x_max).max(f64::MIN_POSITIVE);
    let y_hi = domain.y_max;
    let obj = |y: f64| {
        let x = t / y;
        x * x + y * y
    };
    let y_star = scan_and_polish(&obj, y_lo, y_hi, n);
    let refined = (obj(y_star), t / y_star, y_star);
    let best = if refined.0 <= grid_best.0 {
        refined
    } else {
        grid_best
    };
    NumericMinNI {
        feasible: true,
        point: Some((best.1, best.2)),
    }
}

fn numeric_ratio(s: f64, domain: NumericDomain, n: usize) -> NumericMinNI {
    if s == 0.0 {
        return NumericMinNI {
            feasible: true,
            point: Some((1.0, 1.0)),
        };
    }
    let reach = (1.0 - 1.0 / domain.x_max) * (1.0 - 1.0 / domain.y_max);
    if s >= 1.0 || s > reach {
        return NumericMinNI {
            feasible: false,
            point: None,
        };
    }
    // Stage 1: grid scan of (1-1/x)(1-1/y) >= s; first feasible y per
    // column is that column's best, as in the difference scale.
    let mut grid_best = (f64::INFINITY, 1.0, 1.0);
    for i in 1..=n {
        let x = 1.0 + (domain.x_max - 1.0) * i as f64 / n as f64;
        let u = 1.0 - 1.0 / x;
        if u <= s {
            continue;
        }
        for j in 1..=n {
            let y = 1.0 + (domain.y_max - 1.0) * j as f64 / n as f64;
            if u * (1.0 - 1.0 / y) >= s {
                let obj = (x - 1.0) * (x - 1.0) + (y - 1.0) * (y - 1.0);
                if obj < grid_best.0 {
                    grid_best = (obj, x, y);
                }
                break;
            }
        }
    }
    // Stage 2: walk the boundary. For y on the curve, x = 1/(1 - s/(1-1/y)).
    let v_hi = 1.0 - 1.0 / domain.y_max;
    let v_lo = s / (1.0 - 1.0 / domain.x_max);
    let y_lo = 1.0 / (1.0 - v_lo);
    let y_hi = 1.0 / (1.0 - v_hi);
    let obj = |y: f64| {
        let v = 1.0 - 1.0 / y;
        let u = s / v;
        let x = 1.0 / (1.0 - u);
        (x - 1.0) * (x - 1.0) + (y - 1.0) * (y - 1.0)
    };
    let y_star = scan_and_polish(&obj, y_lo, y_hi, n);
    let v = 1.0 - 1.0 / y_star;
    let x_star = 1.0 / (1.0 - s / v);
    let refined = (obj(y_star), x_star, y_star);
    let best = if refined.0 <= grid_best.0 {
        refined
    } else {
        grid_best
    };
    NumericMinNI {
        feasible: true,
        point: Some((best.1, best.2)),
    }
}

/// Scan [lo, hi] at n+1 points, then ternary-search the bracket around the
/// best sample.
fn scan_and_polish<F: Fn(f64) -> f64>(obj: &F, lo: f64, hi: f64, n: usize) -> f64 {
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return lo;
    }
    let step = (hi - lo) / n as f64;
    let mut best_i = 0usize;
    let mut best_v = f64::INFINITY;
    for i in 0..=n {
        let y = lo + step * i as f64;
        let v = obj(y);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if obj(m1) <= obj(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    0.5 * (a + b)
}

/// Aggregate outcome of a randomized identity sweep.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub seed: u64,
    pub binary_joints: usize,
    pub categorical_joints: usize,
    pub max_mean_residual: f64,
    pub max_ratio_residual: f64,
    pub max_variance_residual: f64,
    pub max_ignorable_gap: f64,
    pub difference_bound_checked: usize,
    pub difference_bound_violations: usize,
    pub binary_ratio_bound_checked: usize,
    pub binary_ratio_bound_violations: usize,
    pub ratio_bound_checked: usize,
    pub ratio_bound_violations: usize,
    pub monotonicity_violations: usize,
    pub pass: bool,
}

pub const TOL_MEAN_RESIDUAL: f64 = 1e-14;
pub const TOL_RATIO_RESIDUAL: f64 = 1e-12;
pub const TOL_VARIANCE_RESIDUAL: f64 = 1e-12;
pub const TOL_IGNORABLE_GAP: f64 = 1e-14;

impl SweepReport {
    pub fn to_json(&self) -> String {
        let checks = [
            (
                "mean_decomposition",
                self.max_mean_residual,
                TOL_MEAN_RESIDUAL,
            ),
            (
                "ratio_decomposition",
                self.max_ratio_residual,
                TOL_RATIO_RESIDUAL,
            ),
            (
                "variance_gap",
                self.max_variance_residual,
                TOL_VARIANCE_RESIDUAL,
            ),
            ("ignorability", self.max_ignorable_gap, TOL_IGNORABLE_GAP),
        ];
        let residuals: Vec<String> = checks
            .iter()
            .map(|(name, max, tol)| {
                format!(
                    "{}:{{\"max_residual\":{},\"tolerance\":{},\"pass\":{}}}",
                    json_string(name),
                    fmt::sig(*max, 10),
                    fmt::sig(*tol, 10),
                    max <= tol
                )
            })
            .collect();
        let bounds = [
            (
                "difference_bound",
                self.difference_bound_checked,
                self.difference_bound_violations,
            ),
            (
                "binary_ratio_bound",
                self.binary_ratio_bound_checked,
                self.binary_ratio_bound_violations,
            ),
            (
                "max_ratio_bound",
                self.ratio_bound_checked,
                self.ratio_bound_violations,
            ),
        ];
        let bound_rows: Vec<String> = bounds
            .iter()
            .map(|(name, checked, violations)| {
                format!(
                    "{}:{{\"checked\":{checked},\"violations\":{violations},\"pass\":{}}}",
                    json_string(name),
                    *violations == 0
                )
            })
            .collect();
        format!(
            "{{\"seed\":{},\"binary_joints\":{},\"categorical_joints\":{},\"identities\":{{{}}},\"bounds\":{{{}}},\"monotonicity_violations\":{},\"pass\":{}}}",
            self.seed,
            self.binary_joints,
            self.categorical_joints,
            residuals.join(","),
            bound_rows.join(","),
            self.monotonicity_violations,
            self.pass
        )
    }
}

fn random_simplex(rng: &mut SplitMix64, m: usize) -> Vec<f64> {
    // Floor keeps conditioning events comfortably non-degenerate.
    let raw: Vec<f64> = (0..m).map(|_| rng.range(0.05, 1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn random_binary_joint(rng: &mut SplitMix64) -> JointDistribution {
    let pi = random_simplex(rng, 2);
    let pg = vec![rng.range(0.02, 0.98), rng.range(0.02, 0.98)];
    let py = vec![rng.range(0.02, 0.98), rng.range(0.02, 0.98)];
    build_joint(&pi, &pg, &py).expect("generated joints are valid")
}

fn random_categorical_joint(
    rng: &mut SplitMix64,
    m: usize,
    three_point: bool,
) -> JointDistribution {
    let pi = random_simplex(rng, m);
    let pg: Vec<f64> = (0..m).map(|_| rng.range(0.05, 0.95)).collect();
    if three_point {
        let support = [0.0, 0.5, 1.0];
        let rows: Vec<Vec<f64>> = (0..m).map(|_| random_simplex(rng, 3)).collect();
        build_joint_with_support(&pi, &pg, &support, &rows).expect("valid")
    } else {
        let py: Vec<f64> = (0..m).map(|_| rng.range(0.02, 0.98)).collect();
        build_joint(&pi, &pg, &py).expect("valid")
    }
}

/// Joint engineered to satisfy the max-ratio bound's alignment hypothesis:
/// the minimum-mean level is the only one with a depressed observation
/// probability, so every other level has RR > 1.
fn aligned_categorical_joint(rng: &mut SplitMix64, m: usize) -> JointDistribution {
    let pi = random_simplex(rng, m);
    let low_g = rng.range(0.05, 0.4);
    let high_g = rng.range(0.55, 0.95);
    let mut pg = vec![high_g; m];
    pg[0] = low_g;
    let mut py: Vec<f64> = (0..m).map(|_| rng.range(0.35, 0.98)).collect();
    py[0] = rng.range(0.02, 0.3);
    build_joint(&pi, &pg, &py).expect("valid")
}

/// Run the full randomized identity sweep with a fixed seed.
pub fn run_identity_sweep(n_binary: usize, n_categorical: usize, seed: u64) -> SweepReport {
    let mut rng = SplitMix64::new(seed);
    let mut report = SweepReport {
        seed,
        binary_joints: n_binary,
        categorical_joints: n_categorical,
        max_mean_residual: 0.0,
        max_ratio_residual: 0.0,
        max_variance_residual: 0.0,
        max_ignorable_gap: 0.0,
        difference_bound_checked: 0,
        difference_bound_violations: 0,
        binary_ratio_bound_checked: 0,
        binary_ratio_bound_violations: 0,
        ratio_bound_checked: 0,
        ratio_bound_violations: 0,
        monotonicity_violations: 0,
        pass: false,
    };

    let tally = |report: &mut SweepReport, idr: &IdentityReport| {
        if let Some(r) = idr.mean_residual {
            report.max_mean_residual = report.max_mean_residual.max(r);
        }
        if let Some(r) = idr.ratio_residual {
            report.max_ratio_residual = report.max_ratio_residual.max(r);
        }
        if let Some(r) = idr.variance_residual {
            report.max_variance_residual = report.max_variance_residual.max(r);
        }
        if let Some(b) = idr.difference_bound {
            report.difference_bound_checked += 1;
            if !b.satisfied {
                report.difference_bound_violations += 1;
            }
        }
        if let Some(b) = idr.binary_ratio_bound {
            report.binary_ratio_bound_checked += 1;
            if !b.satisfied {
                report.binary_ratio_bound_violations += 1;
            }
        }
        if let Some(b) = idr.ratio_bound {
            report.ratio_bound_checked += 1;
            if !b.satisfied {
                report.ratio_bound_violations += 1;
            }
        }
    };

    for _ in 0..n_binary {
        let joint = random_binary_joint(&mut rng);
        let idr = check_identities(&joint);
        tally(&mut report, &idr);

        // Ignorability constructions: flatten pg or py and the conditional law
        // must coincide with the marginal law exactly.
        let flat_g = rng.range(0.05, 0.95);
        let ignorable_g = build_joint(
            &joint.pi,
            &[flat_g, flat_g],
            &joint.py_given_u.iter().map(|r| r[1]).collect::<Vec<_>>(),
        )
        .expect("valid");
        let mg = exact_moments(&ignorable_g);
        if let Some(c) = mg.e_y_given_g1 {
            report.max_ignorable_gap = report.max_ignorable_gap.max((c - mg.e_y).abs());
        }
        let flat_y = rng.range(0.05, 0.95);
        let ignorable_y =
            build_joint(&joint.pi, &joint.pg_given_u, &[flat_y, flat_y]).expect("valid");
        let my = exact_moments(&ignorable_y);
        if let Some(c) = my.e_y_given_g1 {
            report.max_ignorable_gap = report.max_ignorable_gap.max((c - my.e_y).abs());
        }

        // Monotonicity of the ratio decomposition in 1/Pr[U=1|G=0].
        if monotonicity_violated(&mut rng) {
            report.monotonicity_violations += 1;
        }
    }

    for k in 0..n_categorical {
        let m = rng.range_usize(2, 6);
        let joint = if k % 2 == 0 {
            aligned_categorical_joint(&mut rng, m)
        } else {
            random_categorical_joint(&mut rng, m, k % 4 == 1)
        };
        let idr = check_identities(&joint);
        tally(&mut report, &idr);
    }

    report.pass = report.max_mean_residual <= TOL_MEAN_RESIDUAL
        && report.max_ratio_residual <= TOL_RATIO_RESIDUAL
        && report.max_variance_residual <= TOL_VARIANCE_RESIDUAL
        && report.max_ignorable_gap <= TOL_IGNORABLE_GAP
        && report.difference_bound_violations == 0
        && report.binary_ratio_bound_violations == 0
        && report.ratio_bound_violations == 0
        && report.monotonicity_violations == 0
        && report.ratio_bound_checked > 0;
    report
}

/// Sample the ratio decomposition along 1/Pr[U=1|G=0] in (RR, inf) and
/// confirm it is monotone and stays inside the binary ratio bound.
fn monotonicity_violated(rng: &mut SplitMix64) -> bool {
    let er = rng.range(0.1, 10.0);
    let rr = rng.range(0.1, 10.0);
    if (er - 1.0).abs() < 1e-6 || (rr - 1.0).abs() < 1e-6 {
        return false;
    }
    let bound = ((er - 1.0) * (rr - 1.0) / (er * rr)).abs();
    let mut prev: Option<f64> = None;
    let mut direction: Option<bool> = None;
    for step in 1..=64 {
        // t = 1/Pr[U=1|G=0] sweeping (RR, RR + 50].
        let t = rr + 50.0 * step as f64 / 64.0;
        let r = (er - 1.0 + t) / ((er - 1.0) * rr + t);
        if (r - 1.0).abs() > bound + 1e-12 {
            return true;
        }
        if let Some(p) = prev {
            let up = r >= p - 1e-15;
            match direction {
                None => direction = Some(up),
                Some(d) if d != up && (r - p).abs() > 1e-13 => return true,
                _ => {}
            }
        }
        prev = Some(r);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn confounded() -> JointDistribution {
        build_joint(&[0.5, 0.5], &[0.4, 0.8], &[0.3, 0.7]).unwrap()
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        assert!(build_joint(&[1.0], &[0.5], &[0.5]).is_err());
        assert!(build_joint(&[0.5, 0.5], &[0.5], &[0.5, 0.5]).is_err());
        assert!(build_joint(&[0.5, 0.5], &[1.5, 0.5], &[0.5, 0.5]).is_err());
        assert!(build_joint(&[0.9, 0.3], &[0.5, 0.5], &[0.5, 0.5]).is_err());
        assert!(build_joint(&[0.3, 0.3, 0.4], &[0.2, 0.5, 0.9], &[0.1, 0.5, 0.9]).is_ok());
    }

    #[test]
    fn hand_enumerated_moments() {
        let mo = exact_moments(&confounded());
        assert!((mo.e_y - 0.5).abs() < 1e-15);
        assert!((mo.pr_g0 - 0.4).abs() < 1e-15);
        assert!((mo.e_y_given_g1.unwrap() - 0.34 / 0.6).abs() < 1e-15);
    }

    #[test]
    fn independence_makes_conditional_equal_marginal() {
        let j = build_joint(&[0.5, 0.5], &[0.5, 0.5], &[0.3, 0.7]).unwrap();
        let mo = exact_moments(&j);
        assert_eq!(mo.e_y_given_g1.unwrap(), mo.e_y);

        let j = build_joint(&[0.3, 0.7], &[0.2, 0.9], &[0.6, 0.6]).unwrap();
        let mo = exact_moments(&j);
        assert!((mo.e_y_given_g1.unwrap() - mo.e_y).abs() < 1e-16);
    }

    #[test]
    fn identities_on_the_hand_joint() {
        let report = check_identities(&confounded());
        assert!(report.mean_residual.unwrap() < 1e-14);
        assert!(report.ratio_residual.unwrap() < 1e-14);
        assert!(report.variance_residual.unwrap() < 1e-14);
        assert!(report.difference_bound.unwrap().satisfied);
        assert!(report.binary_ratio_bound.unwrap().satisfied);
        // Level 1 has the higher mean and the higher observation rate, so
        // the alignment hypothesis holds and the max-ratio bound applies.
        assert!(report.ratio_bound.unwrap().satisfied);

        let mo = exact_moments(&confounded());
        assert!((mo.e_y - mo.e_y_given_g1.unwrap() + 0.06667).abs() < 1e-4);
    }

    #[test]
    fn flat_pg_zeroes_the_participation_difference() {
        let j = build_joint(&[0.4, 0.6], &[0.7, 0.7], &[0.2, 0.9]).unwrap();
        let report = check_identities(&j);
        assert!(report.mean_residual.unwrap() < 1e-14);
        let mo = exact_moments(&j);
        let rd = mo.pr_u_given_g[1].as_ref().unwrap()[1] - mo.pr_u_given_g[0].as_ref().unwrap()[1];
        assert!(rd.abs() < 1e-14);
    }

    #[test]
    fn numeric_difference_matches_closed_form() {
        let t = 0.019148936170212767;
        let domain = NumericDomain {
            x_max: 1.0,
            y_max: 1.0,
        };
        let r = numeric_minni(t, Scale::Difference, domain, 800);
        let (x, y) = r.point.unwrap();
        let expect = t.sqrt();
        assert!((x - expect).abs() < 1e-6, "x = {x}, expect {expect}");
        assert!((y - expect).abs() < 1e-6);
    }

    #[test]
    fn numeric_difference_clamps_continuous_domain() {
        let domain = NumericDomain {
            x_max: 10.0,
            y_max: 1.0,
        };
        let r = numeric_minni(4.0, Scale::Difference, domain, 800);
        let (x, y) = r.point.unwrap();
        assert!(
            (x - 4.0).abs() < 1e-6 && (y - 1.0).abs() < 1e-6,
            "({x}, {y})"
        );
    }

    #[test]
    fn numeric_ratio_matches_closed_form() {
        let s = 0.026159f64;
        let domain = NumericDomain {
            x_max: 10.0,
            y_max: 10.0,
        };
        let r = numeric_minni(s, Scale::Ratio, domain, 800);
        let (x, y) = r.point.unwrap();
        let expect = 1.0 / (1.0 - s.sqrt());
        assert!((x - expect).abs() < 1e-6, "x = {x}, expect {expect}");
        assert!((y - expect).abs() < 1e-6);
        assert!((expect - 1.1930).abs() < 1e-4);
    }

    #[test]
    fn infeasible_thresholds_are_reported() {
        let unit = NumericDomain {
            x_max: 1.0,
            y_max: 1.0,
        };
        assert!(!numeric_minni(1.5, Scale::Difference, unit, 100).feasible);
        let ratio = NumericDomain {
            x_max: 50.0,
            y_max: 50.0,
        };
        assert!(!numeric_minni(1.0, Scale::Ratio, ratio, 100).feasible);
    }

    #[test]
    fn sweep_is_deterministic_and_clean() {
        let a = run_identity_sweep(300, 300, 20240814);
        let b = run_identity_sweep(300, 300, 20240814);
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.pass, "report: {}", a.to_json());
        assert!(a.ratio_bound_checked > 50);
    }

    #[test]
    fn splitmix_reference_stream() {
        let mut rng = SplitMix64::new(0);
        let first = rng.next_u64();
        assert_eq!(first, 0xe220a8397b1dcdaf);
    }
}
