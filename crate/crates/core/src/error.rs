use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric covariate at row {row}, column `{column}`: {value:?}")]
    NonNumericCovariate {
        row: usize,
        column: String,
        value: String,
    },
    #[error("duplicate household id `{0}`")]
    DuplicateHouseholdId(String),
    #[error("ranks of ranker `{ranker}` in community `{community}` are not a permutation of 1..{n}")]
    NotAPermutation {
        community: String,
        ranker: String,
        n: usize,
    },
    #[error("unknown household `{0}`")]
    UnknownHousehold(String),
    #[error("household `{household}` belongs to community `{expected}`, not `{found}`")]
    CommunityMismatch {
        household: String,
        expected: String,
        found: String,
    },
    #[error("column `{0}` has zero variance")]
    ZeroVarianceColumn(String),
    #[error("empty truncation interval ({lower}, {upper})")]
    EmptyInterval { lower: f64, upper: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("matrix is not positive definite (collinear covariates?): {0}")]
    NotPositiveDefinite(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("chain diverged: non-finite draw in block `{0}`")]
    DivergentChain(String),
    #[error("insufficient posterior samples: {0}")]
    InsufficientSamples(String),
    #[error("invalid quota {quota} for community `{community}` of size {size}")]
    InvalidQuota {
        community: String,
        quota: usize,
        size: usize,
    },
    #[error("all outcomes are identical; probit likelihood has no maximum")]
    AllSameOutcome,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("not enough communities: requested {requested}, available {available}")]
    NotEnoughCommunities { requested: usize, available: usize },
    #[error("all coefficients are zero")]
    AllZero,
    #[error("rankings cover different household sets")]
    SetMismatch,
    #[error("unknown community `{0}`")]
    UnknownCommunity(String),
    #[error("{method} with {n_communities} communities, replication {replication}: {source}")]
    Replication {
        method: &'static str,
        n_communities: usize,
        replication: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: impl AsRef<std::path::Path>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
