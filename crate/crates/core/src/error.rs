use thiserror::Error;

/// Errors raised by the library. Every fallible public function returns this
/// type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A mixed state whose Bloch vector is (numerically) zero has no
    /// direction, so its polar/azimuthal angles are undefined.
    #[error("degenerate state: Bloch vector length {0:e} is too small to define a direction")]
    DegenerateState(f64),

    #[error("invalid rotation angle {0}: arccos of theta/(4 pi) is undefined")]
    InvalidTheta(f64),

    /// A threshold mask was requested against a grid whose reference
    /// fidelity is zero.
    #[error("reference fidelity is zero; ratios are undefined")]
    ZeroReference,

    #[error("query point (f={f}, g={g}) lies outside the grid")]
    OutOfBounds { f: f64, g: f64 },

    /// The fitted fringe contrast is consistent with zero so the azimuth is
    /// not identifiable. `theta_m` carries the best polar-angle estimate
    /// (close to 0 or pi).
    #[error("fringe contrast is consistent with zero (theta_m ~ {theta_m}); phi_m is unidentifiable")]
    FitDegenerate { theta_m: f64 },

    #[error("fit did not converge after {0} iterations")]
    NonConvergence(usize),

    /// The line search could not improve on the initial controls.
    #[error("line search failed to improve the initial pulse")]
    NoImprovement,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
