use thiserror::Error;

/// Errors raised by the grid, transform and field layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("mode count must be even and at least 8, got {0}")]
    InvalidModeCount(usize),
    #[error("auxiliary map parameter must lie in (0, 1], got {0}")]
    InvalidMapParameter(f64),
    #[error("Floquet parameter must lie in [0, 1), got {0}")]
    InvalidFloquet(f64),
    #[error("field has {got} samples, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("fields live on different grids ({0} vs {1} modes)")]
    GridMismatch(usize, usize),
    #[error("refusing to truncate: discarded tail holds {0:e} of the spectral energy")]
    LossyTruncation(f64),
}

/// Errors raised by the iterative solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrylovError {
    #[error("invalid solver argument: {0}")]
    InvalidArgument(String),
    #[error("preconditioner must be strictly positive")]
    NonPositivePreconditioner,
    #[error("inner solve failed after {iterations} iterations (relative residual {residual:e})")]
    InnerSolve { iterations: usize, residual: f64 },
}

/// Errors raised while computing or continuing Stokes waves.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StokesError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error("steepness {0} is not below the limiting value 0.14106348398")]
    BeyondLimitingSteepness(f64),
    #[error("steepness must be non-negative, got {0}")]
    NegativeSteepness(f64),
    #[error("Newton failed to converge in {steps} steps (relative residual {residual:e})")]
    NewtonDiverged { steps: usize, residual: f64 },
    #[error("continuation stalled at s = {reached} (step fell below {min_step:e})")]
    ContinuationStalled { reached: f64, min_step: f64 },
    #[error("wave file: {0}")]
    Format(String),
    #[error("wave file checksum mismatch")]
    Checksum,
    #[error("unsupported wave file version {0}")]
    Version(u32),
    #[error("io: {0}")]
    Io(String),
}

/// Errors raised by the linearized Babenko eigen solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error("eigen solve did not converge (residual {0:e})")]
    NotConverged(f64),
    #[error("tracked eigenvalue does not change sign on [{lo}, {hi}] ({xi_lo:e}, {xi_hi:e})")]
    NoSignChange { lo: f64, hi: f64, xi_lo: f64, xi_hi: f64 },
    #[error("eigenvalue branch jumped at s = {0} (overlap {1:.3})")]
    BranchJump(f64, f64),
    #[error("{0}")]
    InvalidInput(String),
}

/// Errors raised by the stability operators and sweeps.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error("|z_u|^2 drops to {0:e}; wave too close to the limiting wave for this resolution")]
    NearLimiting(f64),
    #[error("zero-mode violation at mu = 0: mean of the operand is {0:e}")]
    ZeroMode(f64),
    #[error("{0}")]
    InvalidInput(String),
}
