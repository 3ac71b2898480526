use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("page must have at least one line")]
    EmptyPage,
    #[error("adlim must be at least 1")]
    ZeroAdlim,
    #[error("loc has {got} entries, expected {expected}")]
    LocLength { expected: usize, got: usize },
    #[error("loc[{line}] = {value} is not a nonnegative finite number")]
    BadLoc { line: usize, value: f64 },
    #[error("duplicate candidate id `{0}`")]
    DuplicateId(String),
    #[error("candidate `{id}`: {reason}")]
    BadCandidate { id: String, reason: String },
    #[error("advertiser `{advertiser}` has conflicting bids {first} and {second}")]
    BidMismatch {
        advertiser: String,
        first: f64,
        second: f64,
    },
    #[error("candidate `{id}` of height {height} cannot start at line {start} on a {lines}-line page")]
    PlacementInfeasible {
        id: String,
        height: usize,
        start: usize,
        lines: usize,
    },
    #[error("slate is infeasible: {0}")]
    InfeasibleSlate(String),
    #[error("unknown advertiser `{0}`")]
    UnknownAdvertiser(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance has {candidates} candidates, oracle limit is {limit}")]
    TooLarge { candidates: usize, limit: usize },
    #[error("advertiser `{0}` wins no clicks, per-click price is undefined")]
    ZeroClicks(String),
    #[error("allocation of `{advertiser}` drops from {from} to {to} near bid {bid}")]
    NonMonotone {
        advertiser: String,
        bid: f64,
        from: f64,
        to: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve of `{advertiser}` is inconsistent with the chosen slate at bid {bid}: {detail}")]
    Inconsistent {
        advertiser: String,
        bid: f64,
        detail: String,
    },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown pricing scheme `{0}` (expected first, gsp, vcg, roi or alpha)")]
    UnknownScheme(String),
    #[error("invalid generator config: {0}")]
    Generator(String),
    #[error("alpha must be a nonnegative finite number, got {0}")]
    BadAlpha(f64),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("instance {index}{}: {source}", .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Invalid {
        index: usize,
        line: Option<usize>,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("worker pool: {0}")]
    Pool(String),
}
