use thiserror::Error;

use crate::crystal::IonCrystal;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no magic RF frequency: differential polarisability {0:e} is not negative")]
    NoMagicFrequency(f64),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("ions {0} and {1} coincide")]
    Singularity(usize, usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("compensation beam sign: {0}")]
    Sign(String),
    #[error("annealing did not converge after {steps} steps (residual {residual:e})")]
    Convergence {
        steps: usize,
        residual: f64,
        best: Box<IonCrystal>,
    },
    #[error("out of range: {0}")]
    Range(String),
    #[error("numerical instability: {0}")]
    Instability(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
