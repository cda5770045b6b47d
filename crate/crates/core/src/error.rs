use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no sign change of dH/dp - v within the bracket expansion cap (v = {velocity})")]
    BracketExhausted { velocity: f64 },

    #[error("orbit left the compact window at t = {t} (|p| = {p}, |u| = {u})")]
    Diverged { t: f64, p: f64, u: f64 },

    #[error("grid evolution exceeded the sup-norm cap at t = {t} (sup = {sup})")]
    GridDiverged { t: f64, sup: f64 },

    #[error("no characteristic from the base point lands within one cell of the target")]
    NoShotLands,

    #[error("every grid node is a kink or violates the graph tolerance")]
    EmptyGraph,

    #[error("Mañé filter is empty after relaxing dist_tol to {dist_tol}")]
    EmptyAfterRelaxation { dist_tol: f64 },

    #[error("forward iteration did not settle within T_max = {t_max} (last change {last_change})")]
    NonConvergence { t_max: f64, last_change: f64 },

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
