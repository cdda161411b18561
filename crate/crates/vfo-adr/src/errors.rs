//! Error types shared across the library.

use thiserror::Error;

/// Errors raised by kinematic, geometric and controller operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// |cos θ| fell below the configured singularity margin of the angular
    /// velocity transform.
    #[error("attitude singular: |cos theta| = {cos_theta_abs:.3e} below margin {margin:.3e}")]
    SingularAttitude { cos_theta_abs: f64, margin: f64 },

    /// A state or input vector contains NaN or infinity.
    #[error("non-finite state encountered in {context}")]
    NonFiniteState { context: &'static str },

    /// A level-surface gradient norm left the admissible band (Assumption-5
    /// style bound).
    #[error("degenerate gradient of surface {surface}: |grad| = {norm:.3e} outside ({lower:.3e}, {upper:.3e})")]
    DegenerateGradient {
        surface: usize,
        norm: f64,
        lower: f64,
        upper: f64,
    },

    /// The two level-surface gradients are (numerically) collinear.
    #[error("collinear level-surface gradients: |grad1 x grad2| = {cross_norm:.3e} below floor {floor:.3e}")]
    CollinearGradients { cross_norm: f64, floor: f64 },

    /// The planar projection of the path tangent vanished; the desired yaw is
    /// undefined there.
    #[error("planar tangent degenerate: |(v_x, v_y)| = {norm:.3e}")]
    PlanarTangentDegenerate { norm: f64 },

    /// The auxiliary-orientation indeterminacy freeze triggered on the very
    /// first evaluation, so there is no previous value to hold.
    #[error("auxiliary orientation indeterminate on first evaluation (h_x^2 + h_y^2 = {magnitude_sq:.3e})")]
    NoPriorState { magnitude_sq: f64 },

    /// The modified convergence field is below the indeterminacy threshold;
    /// the caller must reuse the previously computed derivative.
    #[error("auxiliary orientation derivative frozen (h_x^2 + h_y^2 = {magnitude_sq:.3e} below {threshold:.3e})")]
    FrozenState { magnitude_sq: f64, threshold: f64 },

    /// A metric window selects no samples.
    #[error("empty metric window [{start}, {end}]")]
    EmptyWindow { start: f64, end: f64 },

    /// A constructor or configuration invariant was violated.
    #[error("invalid parameter: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
