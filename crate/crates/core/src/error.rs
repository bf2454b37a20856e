use thiserror::Error;

pub type Result<T, E = DrcfsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DrcfsError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value generated at node {node} (row {row})")]
    NonFinite { node: String, row: usize },

    #[error("non-finite entry in input at row {row}, column {column}")]
    NonFiniteInput { row: usize, column: usize },

    #[error("singular normal equations; offending columns {columns:?}")]
    IllConditioned { columns: Vec<usize> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("score conventions differ between the two score vectors")]
    ConventionMismatch,

    #[error("joint support has {cells} cells, above the enumeration cap of {cap}")]
    SupportTooLarge { cells: u128, cap: u128 },

    #[error("conditioning event has zero probability")]
    ZeroProbability,

    #[error("invalid discrete SCM: {0}")]
    InvalidScm(String),

    #[error("oracle identity violated: {0}")]
    IdentityViolation(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<DrcfsError>,
    },

    #[error("feature {feature}: {source}")]
    Feature {
        feature: String,
        #[source]
        source: Box<DrcfsError>,
    },
}

impl DrcfsError {
    pub(crate) fn in_fold(self, fold: usize) -> Self {
        DrcfsError::Fold {
            fold,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_feature(self, feature: impl Into<String>) -> Self {
        DrcfsError::Feature {
            feature: feature.into(),
            source: Box::new(self),
        }
    }
}
