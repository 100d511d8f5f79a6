use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("cone violation: spectrum not in Gamma_{k}^+ at node {node} (margin {margin:e})")]
    ConeViolation { k: usize, node: usize, margin: f64 },

    #[error("flow stalled at t = {t}: dt fell below {dt_min:e} (worst node {node}, margin {margin:e})")]
    Stall { t: f64, dt_min: f64, node: usize, margin: f64 },

    #[error("max time {max_time} reached with residual {residual:e}")]
    MaxTime { max_time: f64, residual: f64 },

    #[error("degenerate shear: 2*alpha - alpha^2 = {0:e} at the requested radius")]
    DegenerateShear(f64),

    #[error("construction infeasible: {0}")]
    Infeasible(String),

    #[error("gluing failure: sigma_{k} = {value:e} at r = {r:e}")]
    Gluing { k: usize, r: f64, value: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
