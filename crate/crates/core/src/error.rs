use thiserror::Error;

/// Failures raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid frequency mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular linear system at row {0}")]
    Singular(usize),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("resonance Newton iteration failed after {iterations} steps (residual {residual:.3e})")]
    ResonanceDiverged { iterations: usize, residual: f64 },

    #[error("resonance lost between time steps (mode overlap {overlap:.3e})")]
    ResonanceJump { overlap: f64 },

    #[error("Poisson Newton iteration did not converge (residual {residual:.3e})")]
    PoissonDiverged { residual: f64 },

    #[error("Gummel iteration did not converge in {iterations} iterations (last error {last_error:.3e})")]
    GummelDiverged {
        iterations: usize,
        last_error: f64,
        trace: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_len(values_len: usize, expected: usize, what: &'static str) -> Result<()> {
    if values_len == expected {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            got: values_len,
            expected,
        })
    }
}
