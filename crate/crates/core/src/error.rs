use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible action: {0}")]
    Infeasible(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("state space too large: {product} = {entries} entries needs {bytes} bytes, budget is {budget} bytes")]
    Sizing {
        product: String,
        entries: u128,
        bytes: u128,
        budget: u128,
    },

    #[error("no policy entry for epoch {epoch}, location {location}, remaining {remaining:?}")]
    Lookup {
        epoch: usize,
        location: usize,
        remaining: Vec<u32>,
    },

    #[error("slot {epoch}: {source}")]
    Slot {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("policy file: {0}")]
    PolicyFormat(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
