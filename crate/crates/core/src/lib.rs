//! Sensitivity analysis for incomplete-data inference when the missingness
//! may be nonignorable.
//!
//! The model treats nonignorability as unmeasured confounding: a latent
//! variable U renders the outcome Y and the observation indicator G
//! conditionally independent, and the strength of U's associations with Y
//! and with G governs how far the observed-case mean `E[Y|G=1]` can drift
//! from the marginal mean `E[Y]`. Everything estimable lives in an
//! [`summary::ObservedSummary`]; everything unidentifiable is an explicit
//! sensitivity parameter.
//!
//! The crate offers four complementary views of the same question:
//!
//! - [`surface`] calibrates a logistic-link model at fixed sensitivity
//!   parameters and maps the implied bias (response-surface analysis).
//! - [`index`] computes minimum nonignorability indices: the smallest
//!   confounding, on a difference or ratio scale, that moves the estimate
//!   by a designated budget. Closed forms, plus categorical-confounder
//!   bounds.
//! - [`strata`] extends the bias identity to variances and to analyses
//!   stratified on a discrete measured covariate.
//! - [`contour`] turns the bias surface and index boundaries into level
//!   curves for plotting.
//!
//! [`oracle`] is the in-crate referee: exact enumeration over small
//! discrete joints validates every identity, bound, and closed form against
//! brute force.

pub mod contour;
pub mod error;
pub mod fmt;
pub mod index;
pub mod oracle;
pub mod strata;
pub mod summary;
pub mod surface;

pub use error::{Error, Result};
pub use index::{BiasBudget, MinNIResult, Scale};
pub use summary::{DataSet, ObservedSummary, OutcomeKind, Record};
pub use surface::{SurfaceParams, SurfaceSolution};
