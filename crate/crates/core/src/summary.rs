//! Observed-data summaries: the estimable quantities every analysis consumes.
//!
//! Raw records carry an optional outcome (absent = missing) and an optional
//! stratum label. [`summarize`] reduces a validated [`DataSet`] to an
//! [`ObservedSummary`]; [`synthesize_summary`] builds one directly from a
//! hypothetical observed mean and missingness fraction, which is how
//! what-if analyses vary the missing fraction while holding the observed
//! mean fixed.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fmt;

/// Whether observed outcomes are 0/1 indicators or arbitrary reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Binary,
    Continuous,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Binary => "binary",
            OutcomeKind::Continuous => "continuous",
        }
    }
}

/// Denominator convention for the observed standard deviation.
///
/// `Population` divides by the number of observed outcomes, which makes the
/// binary identity `sd^2 = mu(1-mu)` exact. `Sample` divides by n-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SdConvention {
    #[default]
    Population,
    Sample,
}

/// One unit: an outcome that may be missing, and an optional stratum label.
///
/// The outcome is `None` exactly when the unit's missingness indicator is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub outcome: Option<f64>,
    pub group: Option<String>,
}

impl Record {
    pub fn observed(outcome: f64) -> Self {
        Record {
            outcome: Some(outcome),
            group: None,
        }
    }

    pub fn missing() -> Self {
        Record {
            outcome: None,
            group: None,
        }
    }

    pub fn with_group(mut self, group: &str) -> Self {
        self.group = Some(group.to_string());
        self
    }
}

/// A validated set of records with a resolved outcome kind.
#[derive(Debug, Clone)]
pub struct DataSet {
    records: Vec<Record>,
    outcome_kind: OutcomeKind,
    n_missing: usize,
}

impl DataSet {
    pub fn n_total(&self) -> usize {
        self.records.len()
    }

    pub fn n_missing(&self) -> usize {
        self.n_missing
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome_kind
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// Split into per-stratum datasets keyed by group label, with full-sample
    /// weights `Pr[X = x]`. Records without a label fall under `"(none)"`.
    pub fn by_stratum(&self) -> Vec<(String, DataSet, f64)> {
        let mut groups: BTreeMap<String, Vec<Record>> = BTreeMap::new();
        for r in &self.records {
            let key = r.group.clone().unwrap_or_else(|| "(none)".to_string());
            groups.entry(key).or_default().push(r.clone());
        }
        let n = self.records.len() as f64;
        groups
            .into_iter()
            .map(|(label, records)| {
                let weight = records.len() as f64 / n;
                let n_missing = records.iter().filter(|r| r.outcome.is_none()).count();
                let ds = DataSet {
                    records,
                    outcome_kind: self.outcome_kind,
                    n_missing,
                };
                (label, ds, weight)
            })
            .collect()
    }
}

/// The estimable quantities: counts, missing fraction, observed mean, SD,
/// CV, and the standard error of the observed mean.
///
/// `cv_obs` is `None` when `mu_obs = 0` (the coefficient of variation is
/// undefined there).
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ObservedSummary {
    pub n_total: usize,
    pub n_missing: usize,
    pub frac_missing: f64,
    pub mu_obs: f64,
    pub sd_obs: f64,
    pub cv_obs: Option<f64>,
    pub se_obs: f64,
    pub outcome_kind: OutcomeKind,
}

impl ObservedSummary {
    pub fn n_observed(&self) -> usize {
        self.n_total - self.n_missing
    }

    /// `Pr[G=0]`, the probability a unit is missing.
    pub fn pr_missing(&self) -> f64 {
        self.frac_missing
    }

    /// Serialize with field names fixed and numbers at 10 significant digits.
    pub fn to_json(&self) -> String {
        let cv = match self.cv_obs {
            Some(v) => fmt::sig(v, 10),
            None => "null".to_string(),
        };
        format!(
            "{{\"n_total\":{},\"n_missing\":{},\"frac_missing\":{},\"mu_obs\":{},\"sd_obs\":{},\"cv_obs\":{},\"se_obs\":{},\"outcome_kind\":\"{}\"}}",
            self.n_total,
            self.n_missing,
            fmt::sig(self.frac_missing, 10),
            fmt::sig(self.mu_obs, 10),
            fmt::sig(self.sd_obs, 10),
            cv,
            fmt::sig(self.se_obs, 10),
            self.outcome_kind.as_str(),
        )
    }

    /// Parse a summary previously written by [`ObservedSummary::to_json`],
    /// revalidating every invariant.
    pub fn from_json(text: &str) -> Result<Self> {
        let summary: ObservedSummary = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "observed summary JSON",
            detail: e.to_string(),
        })?;
        summary.validate()?;
        Ok(summary)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.frac_missing) {
            return Err(Error::BadProbability {
                name: "frac_missing",
                value: self.frac_missing,
                range: "[0, 1]",
            });
        }
        if self.n_missing > self.n_total {
            return Err(Error::Internal(format!(
                "n_missing {} exceeds n_total {}",
                self.n_missing, self.n_total
            )));
        }
        if self.sd_obs < 0.0 || !self.sd_obs.is_finite() {
            return Err(Error::BadArgument {
                name: "sd_obs",
                value: self.sd_obs,
                reason: "must be a finite nonnegative real",
            });
        }
        if self.outcome_kind == OutcomeKind::Binary {
            if !(0.0..=1.0).contains(&self.mu_obs) {
                return Err(Error::BadProbability {
                    name: "mu_obs",
                    value: self.mu_obs,
                    range: "[0, 1] for binary outcomes",
                });
            }
            let tol = 1.0 / self.n_total.max(1) as f64;
            let identity = self.mu_obs * (1.0 - self.mu_obs);
            if (self.sd_obs * self.sd_obs - identity).abs() > tol {
                return Err(Error::Internal(format!(
                    "binary summary has sd_obs^2 = {} but mu_obs(1-mu_obs) = {}",
                    self.sd_obs * self.sd_obs,
                    identity
                )));
            }
        }
        if let Some(cv) = self.cv_obs {
            if self.mu_obs != 0.0 {
                let expect = self.sd_obs / self.mu_obs;
                if (cv - expect).abs() > 1e-6 * (1.0 + expect.abs()) {
                    return Err(Error::Internal(format!(
                        "cv_obs = {cv} inconsistent with sd_obs/mu_obs = {expect}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Validate records and classify the outcome kind: binary iff every present
/// outcome is exactly 0 or 1.
pub fn ingest_records(rows: Vec<Record>) -> Result<DataSet> {
    ingest(rows, None)
}

/// Like [`ingest_records`] but with the outcome kind fixed by the caller,
/// for datasets where 0/1 values should still be treated as continuous.
pub fn ingest_records_as(rows: Vec<Record>, kind: OutcomeKind) -> Result<DataSet> {
    ingest(rows, Some(kind))
}

fn ingest(rows: Vec<Record>, kind: Option<OutcomeKind>) -> Result<DataSet> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut all_binary = true;
    for r in &rows {
        if let Some(y) = r.outcome {
            if !y.is_finite() {
                return Err(Error::BadArgument {
                    name: "outcome",
                    value: y,
                    reason: "must be finite",
                });
            }
            if y != 0.0 && y != 1.0 {
                if kind == Some(OutcomeKind::Binary) {
                    return Err(Error::NotBinary(y));
                }
                all_binary = false;
            }
        }
    }
    let outcome_kind = kind.unwrap_or(if all_binary {
        OutcomeKind::Binary
    } else {
        OutcomeKind::Continuous
    });
    let n_missing = rows.iter().filter(|r| r.outcome.is_none()).count();
    Ok(DataSet {
        records: rows,
        outcome_kind,
        n_missing,
    })
}

/// Reduce a dataset to its observed summary using the population SD
/// convention.
pub fn summarize(data: &DataSet) -> Result<ObservedSummary> {
    summarize_with(data, SdConvention::Population)
}

/// Reduce a dataset to its observed summary with an explicit SD convention.
pub fn summarize_with(data: &DataSet, sd: SdConvention) -> Result<ObservedSummary> {
    let observed: Vec<f64> = data.records.iter().filter_map(|r| r.outcome).collect();
    if observed.is_empty() {
        return Err(Error::NoObservedOutcomes);
    }
    let n_obs = observed.len();
    let mu = observed.iter().sum::<f64>() / n_obs as f64;
    let var_pop = match data.outcome_kind {
        // For 0/1 data the population variance is exactly mu(1-mu).
        OutcomeKind::Binary => mu * (1.0 - mu),
        OutcomeKind::Continuous => {
            observed.iter().map(|y| (y - mu) * (y - mu)).sum::<f64>() / n_obs as f64
        }
    };
    let var = match sd {
        SdConvention::Population => var_pop,
        SdConvention::Sample => {
            if n_obs < 2 {
                return Err(Error::BadArgument {
                    name: "n_observed",
                    value: n_obs as f64,
                    reason: "sample SD convention needs at least 2 observed outcomes",
                });
            }
            var_pop * n_obs as f64 / (n_obs - 1) as f64
        }
    };
    let sd_obs = var.max(0.0).sqrt();
    Ok(ObservedSummary {
        n_total: data.n_total(),
        n_missing: data.n_missing,
        frac_missing: data.n_missing as f64 / data.n_total() as f64,
        mu_obs: mu,
        sd_obs,
        cv_obs: (mu != 0.0).then(|| sd_obs / mu),
        se_obs: sd_obs / (n_obs as f64).sqrt(),
        outcome_kind: data.outcome_kind,
    })
}

/// Build a binary-outcome summary from a hypothetical observed mean and
/// missing fraction, recomputing `sd_obs` and `se_obs` from `mu_obs` and
/// `n_observed`.
///
/// `frac_missing` and `mu_obs` are stored exactly as given; the missing
/// count is the nearest integer consistent with them.
pub fn synthesize_summary(
    mu_obs: f64,
    frac_missing: f64,
    n_observed: usize,
) -> Result<ObservedSummary> {
    if !(0.0..=1.0).contains(&mu_obs) {
        return Err(Error::BadProbability {
            name: "mu_obs",
            value: mu_obs,
            range: "[0, 1] for binary outcomes",
        });
    }
    let sd = (mu_obs * (1.0 - mu_obs)).sqrt();
    synthesize(mu_obs, sd, frac_missing, n_observed, OutcomeKind::Binary)
}

/// Continuous-outcome variant of [`synthesize_summary`] with an explicit SD.
pub fn synthesize_summary_continuous(
    mu_obs: f64,
    sd_obs: f64,
    frac_missing: f64,
    n_observed: usize,
) -> Result<ObservedSummary> {
    if sd_obs < 0.0 || !sd_obs.is_finite() {
        return Err(Error::BadArgument {
            name: "sd_obs",
            value: sd_obs,
            reason: "must be a finite nonnegative real",
        });
    }
    synthesize(
        mu_obs,
        sd_obs,
        frac_missing,
        n_observed,
        OutcomeKind::Continuous,
    )
}

fn synthesize(
    mu_obs: f64,
    sd_obs: f64,
    frac_missing: f64,
    n_observed: usize,
    kind: OutcomeKind,
) -> Result<ObservedSummary> {
    if !(0.0..1.0).contains(&frac_missing) {
        return Err(Error::BadProbability {
            name: "frac_missing",
            value: frac_missing,
            range: "[0, 1)",
        });
    }
    if n_observed == 0 {
        return Err(Error::BadArgument {
            name: "n_observed",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let n_missing = (n_observed as f64 * frac_missing / (1.0 - frac_missing)).round() as usize;
    Ok(ObservedSummary {
        n_total: n_observed + n_missing,
        n_missing,
        frac_missing,
        mu_obs,
        sd_obs,
        cv_obs: (mu_obs != 0.0).then(|| sd_obs / mu_obs),
        se_obs: sd_obs / (n_observed as f64).sqrt(),
        outcome_kind: kind,
    })
}

/// Read records from CSV with header `outcome[,stratum]`.
///
/// An empty outcome field or the literal `NA` means missing; anything else
/// must parse as a number. Parsed by hand so that an entirely blank line in
/// a single-column file still counts as one missing record.
pub fn read_records_csv<R: Read>(mut reader: R) -> Result<Vec<Record>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_records_csv(&text)
}

pub fn parse_records_csv(text: &str) -> Result<Vec<Record>> {
    let mut lines: Vec<&str> = text.split('\n').map(|l| l.trim_end_matches('\r')).collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    let mut iter = lines.into_iter();
    let header = iter.next().unwrap_or("").trim();
    let has_stratum = match header {
        "outcome" => false,
        _ if header.split(',').map(str::trim).collect::<Vec<_>>() == ["outcome", "stratum"] => true,
        other => {
            return Err(Error::Parse {
                what: "CSV header",
                detail: format!("expected `outcome` or `outcome,stratum`, got {other:?}"),
            })
        }
    };
    let mut rows = Vec::new();
    for (i, line) in iter.enumerate() {
        let (outcome_field, stratum_field) = match line.split_once(',') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (line.trim(), None),
        };
        let outcome = if outcome_field.is_empty() || outcome_field == "NA" {
            None
        } else {
            Some(
                outcome_field
                    .parse::<f64>()
                    .map_err(|_| Error::BadOutcomeField {
                        row: i + 1,
                        value: outcome_field.to_string(),
                    })?,
            )
        };
        let group = if has_stratum {
            stratum_field.filter(|s| !s.is_empty()).map(str::to_string)
        } else {
            None
        };
        rows.push(Record { outcome, group });
    }
    Ok(rows)
}
