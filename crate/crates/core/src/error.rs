//! Error types shared by the simulation modules.

use core::fmt;

/// Failures of the exact 2x2 machinery in [`crate::linalg2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinalgError {
    /// `a^2 + bc >= 0`: the matrix has a real eigenvalue, so the rotation
    /// closed forms do not apply. The degenerate case `a^2 + bc = 0` is
    /// rejected rather than clamped.
    SpectralCondition,
    /// A zero matrix was passed where a direction is required.
    ZeroMatrix,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::SpectralCondition => {
                write!(f, "spectral condition violated: a^2 + bc must be strictly negative")
            }
            LinalgError::ZeroMatrix => write!(f, "zero matrix has no direction"),
        }
    }
}

impl core::error::Error for LinalgError {}

/// Failures while driving a switched trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimError {
    /// Switching rate (or thinning bound) is not strictly positive.
    NonpositiveRate,
    /// The requested horizon is negative or not finite.
    InvalidHorizon,
    /// Output grid times must be nondecreasing and lie within `[0, horizon]`.
    GridOutOfRange,
    /// Replicate averaging needs `horizon > burn_in >= 0` and at least two
    /// replicates.
    InvalidEstimatorSetup,
    /// A state-dependent rate left `(0, bound]` at a visited state; the
    /// thinning contract is broken and the sample cannot be trusted.
    RateOutOfBounds { rate: f64, bound: f64 },
    /// The conservative integrator could not meet its drift budget even at
    /// the minimal step size; the state is too extreme for the requested
    /// tolerance.
    StepUnderflow { time: f64, dt: f64 },
    /// The matrices of a linear system do not satisfy the spectral condition.
    Spectral(LinalgError),
    /// Initial densities must be strictly positive and finite.
    InvalidState,
    /// A Lotka-Volterra coefficient is not strictly positive; carries the
    /// field name.
    InvalidRegime { field: &'static str },
    /// The operation needs the two regimes to share their equilibrium.
    NoCommonEquilibrium,
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::NonpositiveRate => write!(f, "switching rate must be strictly positive"),
            SimError::InvalidHorizon => write!(f, "horizon must be a finite nonnegative time"),
            SimError::GridOutOfRange => {
                write!(f, "output grid must be nondecreasing and contained in [0, horizon]")
            }
            SimError::InvalidEstimatorSetup => {
                write!(f, "estimator needs horizon > burn_in >= 0 and at least 2 replicates")
            }
            SimError::RateOutOfBounds { rate, bound } => {
                write!(f, "state-dependent rate {rate} outside (0, {bound}]")
            }
            SimError::StepUnderflow { time, dt } => {
                write!(f, "step underflow at t = {time} (dt = {dt}): state too extreme for tolerance")
            }
            SimError::Spectral(e) => write!(f, "{e}"),
            SimError::InvalidState => write!(f, "state densities must be strictly positive and finite"),
            SimError::InvalidRegime { field } => {
                write!(f, "regime coefficient `{field}` must be strictly positive and finite")
            }
            SimError::NoCommonEquilibrium => {
                write!(f, "the two regimes do not share a common equilibrium")
            }
        }
    }
}

impl core::error::Error for SimError {}

impl From<LinalgError> for SimError {
    fn from(e: LinalgError) -> Self {
        SimError::Spectral(e)
    }
}

/// Failures of the stationary-density quadrature route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureError {
    /// Angular velocity vanishes somewhere on the grid, so the transport
    /// system degenerates; this happens exactly when the spectral condition
    /// fails.
    VanishingAngularVelocity,
    /// The discretized transport system could not be solved to tolerance.
    SingularSystem,
    /// Grid is too coarse (fewer than 64 nodes) for the discretization.
    GridTooSmall,
    /// Switching rates must be strictly positive.
    NonpositiveRate,
}

impl fmt::Display for QuadratureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadratureError::VanishingAngularVelocity => {
                write!(f, "angular velocity vanishes on the grid (spectral condition violated)")
            }
            QuadratureError::SingularSystem => {
                write!(f, "singular discretized transport system")
            }
            QuadratureError::GridTooSmall => {
                write!(f, "angular grid needs an even node count of at least 64")
            }
            QuadratureError::NonpositiveRate => {
                write!(f, "switching rate must be strictly positive")
            }
        }
    }
}

impl core::error::Error for QuadratureError {}

/// Failures of the Monte Carlo experiment drivers.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentError {
    /// A trajectory failed; carries the trajectory index.
    Trajectory { index: u32, source: SimError },
    /// The experiment preconditions are not met (wrong system class,
    /// start distance outside the ball, empty inputs, ...).
    Precondition(&'static str),
    /// Not enough occupation time or samples to produce the requested
    /// statistic.
    InsufficientData,
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Trajectory { index, source } => {
                write!(f, "trajectory {index} failed: {source}")
            }
            ExperimentError::Precondition(msg) => write!(f, "{msg}"),
            ExperimentError::InsufficientData => write!(f, "insufficient data"),
        }
    }
}

impl core::error::Error for ExperimentError {}
