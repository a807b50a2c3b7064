use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("curve is not invertible on the configured box: {0}")]
    Invertibility(String),
    #[error("resolution limit: {0}")]
    Resolution(String),
    #[error("curvature condition not detected: {0}")]
    Curvature(String),
    #[error("trajectory left the domain box near {0:?}")]
    DomainExit(Vec<f64>),
    #[error("points are not connected for any scale up to {0}")]
    Disconnected(f64),
    #[error("fields do not span the tangent space at {0:?}")]
    Span(Vec<f64>),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("kernel error: {0}")]
    Kernel(String),
    #[error("sparse selection failed: {0}")]
    Selection(String),
    #[error("no admissible Whitney constant: {0}")]
    ConstantInfeasible(String),
    #[error("domination failure: {0}")]
    Domination(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Contract(msg()))
    }
}
