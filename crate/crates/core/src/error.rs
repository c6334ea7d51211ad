use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Too few observations for the requested computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The design matrix does not have full column rank.
    #[error("rank-deficient design: columns {columns:?} are collinear with earlier columns")]
    RankDeficient {
        /// Zero-based indices of the offending design columns.
        columns: Vec<usize>,
    },

    /// State indicator columns that are never active in the estimation window.
    #[error("state columns never active in the estimation window: states {states:?}")]
    DeadStates {
        /// One-based state labels.
        states: Vec<usize>,
    },

    /// A parameter lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input without variation where variation is required.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Mismatched lengths or dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Generic invalid argument.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// No candidate event factor could be tested or none was significant.
    #[error("{0}; define demand uplift states manually")]
    NoSignificantFactor(String),

    /// The series is still nonstationary after the allowed differencing.
    #[error("series still nonstationary after {differences} difference(s) (KPSS statistic {statistic:.4}); treat the series manually")]
    Nonstationary { differences: usize, statistic: f64 },

    /// Generating process with AR roots on or inside the unit circle.
    #[error("nonstationary autoregressive specification: lag-polynomial root moduli {moduli:?}")]
    NonstationarySpec { moduli: Vec<f64> },

    /// An event combination that is not indexed by the state map.
    #[error("week {week}: combination {combination} is not indexed by the state map")]
    UnindexedCombination { week: String, combination: String },

    /// A failing step of the demand uplift states procedure.
    #[error("DUS step {step}: {source}")]
    DusStep { step: u8, source: Box<Error> },

    /// A failing stage of the evaluation pipeline.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },

    /// Malformed input file.
    #[error("{}:{line}:{column}: {message}", path.display())]
    Schema {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    /// Malformed configuration.
    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: u8) -> Self {
        Error::DusStep {
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for malformed input (files, config, arguments) as opposed to a
    /// failure of a statistical stage.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Schema { .. }
            | Error::Config(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::UnindexedCombination { .. } => true,
            Error::DusStep { source, .. } | Error::Stage { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
