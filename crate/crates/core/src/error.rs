use thiserror::Error;

/// Errors produced by summary construction, calibration, and index computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: at least one record is required")]
    EmptyInput,

    #[error("no observed outcomes: every record is missing, nothing is estimable")]
    NoObservedOutcomes,

    #[error("record {row}: outcome field {value:?} is not a number, empty, or NA")]
    BadOutcomeField { row: usize, value: String },

    #[error("binary outcome required but value {0} is outside {{0, 1}}")]
    NotBinary(f64),

    #[error("no missing data (frac_missing = 0): no sensitivity analysis needed")]
    NoMissingData,

    #[error("all data missing (frac_missing = 1): {0}")]
    AllMissing(&'static str),

    #[error("degenerate observed mean {0}: outcome link calibration requires mu_obs in (0, 1)")]
    DegenerateMean(f64),

    #[error("invalid probability {name} = {value}: must lie in {range}")]
    BadProbability {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid argument {name} = {value}: {reason}")]
    BadArgument {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("confounder must have at least 2 levels, got {0}")]
    TooFewLevels(usize),

    #[error("probability vectors must have equal length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("stratum weights sum to {0}, expected 1 within 1e-9")]
    BadWeights(f64),

    #[error("ratio-scale parameters must all exceed 1 (mixed-sign relative ratios are not supported): {0}")]
    MixedSignRatios(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("unsupported format {0:?}: expected \"csv\" or \"svg\"")]
    UnsupportedFormat(String),

    #[error("failed to parse {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
