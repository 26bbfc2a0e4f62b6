use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain an operation supports.
    #[error("domain error: {0}")]
    Domain(String),

    /// A factor `1 - h(p)` of an Euler-type product is not positive.
    #[error("degenerate product: h({prime}) = {value} is not below 1")]
    DegenerateProduct { prime: u64, value: f64 },

    /// A stated hypothesis of an evaluator fails on a concrete input.
    #[error("hypothesis violated: {condition} (witness {witness})")]
    Hypothesis { condition: String, witness: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
