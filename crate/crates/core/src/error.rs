use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A flow cell that could not be log-transformed.
#[derive(Debug, Clone, PartialEq)]
pub struct BadCell {
    pub dest: String,
    pub origin: String,
    pub value: f64,
}

impl std::fmt::Display for BadCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(dest={}, origin={}, value={})", self.dest, self.origin, self.value)
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-positive flow values cannot be logged: {}", join(.0))]
    NonPositiveFlow(Vec<BadCell>),

    #[error("negative flow value at {0}")]
    NegativeFlow(BadCell),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: String,
        found: String,
    },

    #[error("covariate table `{table}` has axis {found}, expected {expected}")]
    AxisMismatch {
        table: String,
        expected: String,
        found: String,
    },

    #[error("id mismatch in {what}; ids present on only one side: {}", .ids.join(", "))]
    IdMismatch { what: String, ids: Vec<String> },

    #[error("duplicate id `{id}` in {what}")]
    DuplicateId { what: String, id: String },

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("column `{0}` varies only by origin and cannot receive a destination lag")]
    OriginLag(String),

    #[error("column `{column}` requires strictly positive values for log transform (row {row}, value {value})")]
    LogDomain {
        column: String,
        row: usize,
        value: f64,
    },

    #[error("dummy column `{column}` contains non 0/1 value {value}")]
    NotADummy { column: String, value: f64 },

    #[error("regressor matrix is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("design has {k} regressors but only {n} observations")]
    TooFewObservations { n: usize, k: usize },

    #[error("degenerate fit: residual variance is zero")]
    DegenerateFit,

    #[error("lambda {lambda} outside feasible interval ({lower}, {upper})")]
    LambdaInfeasible { lambda: f64, lower: f64, upper: f64 },

    #[error("boundary solution: lambda estimate {0} sits at the edge of the feasible interval")]
    BoundarySolution(f64),

    #[error("optimizer did not converge: {0}")]
    NotConverged(String),

    #[error("information matrix not PD")]
    NotPositiveDefinite,

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("isolated destination units with no neighbor inside the cutoff: {}", .0.join(", "))]
    IsolatedUnits(Vec<String>),

    #[error("negative LR statistic {0}: models are not nested")]
    NegativeLrStatistic(f64),

    #[error("no models specified")]
    NoModels,

    #[error("model {index} ({name}): {source}")]
    Model {
        index: usize,
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable kind, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::NonPositiveFlow(_) => "non_positive_flow",
            Error::NegativeFlow(_) => "negative_flow",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::AxisMismatch { .. } => "axis_mismatch",
            Error::IdMismatch { .. } => "id_mismatch",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::DuplicateColumn(_) => "duplicate_column",
            Error::UnknownColumn(_) => "unknown_column",
            Error::OriginLag(_) => "origin_lag",
            Error::LogDomain { .. } => "log_domain",
            Error::NotADummy { .. } => "not_a_dummy",
            Error::RankDeficient(_) => "rank_deficient",
            Error::TooFewObservations { .. } => "too_few_observations",
            Error::DegenerateFit => "degenerate_fit",
            Error::LambdaInfeasible { .. } => "lambda_infeasible",
            Error::BoundarySolution(_) => "boundary_solution",
            Error::NotConverged(_) => "not_converged",
            Error::NotPositiveDefinite => "information_not_pd",
            Error::Eigen(_) => "eigensolver",
            Error::IsolatedUnits(_) => "isolated_units",
            Error::NegativeLrStatistic(_) => "negative_lr",
            Error::NoModels => "no_models",
            Error::Model { source, .. } => source.kind(),
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// True for errors caused by bad input data rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Model { source, .. } => source.is_validation(),
            Error::RankDeficient(_)
            | Error::DegenerateFit
            | Error::BoundarySolution(_)
            | Error::NotPositiveDefinite
            | Error::NotConverged(_)
            | Error::Eigen(_)
            | Error::Io(_) => false,
            _ => true,
        }
    }
}
