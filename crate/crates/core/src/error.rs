use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not a sum of two squares")]
    NotRepresentable(u64),
    #[error("level with {count} lattice points exceeds the cap of {cap}")]
    LevelTooLarge { count: usize, cap: usize },
    #[error("curvature vanishes or changes sign (min |kappa| = {min_abs:.3e})")]
    CurvatureVanishes { min_abs: f64 },
    #[error("curve leaves the fundamental domain [0,1)^2")]
    CurveExceedsDomain,
    #[error("invalid curve geometry: {0}")]
    InvalidCurve(String),
    #[error("fourth Fourier coefficient {0} is outside [-1, 1]")]
    FourthCoefficientOutOfRange(f64),
    #[error("static-regime formula requested for a non-static curve (|I| = {abs_i:.3e})")]
    RegimeMismatch { abs_i: f64 },
    #[error("unresolved tangency in {0} interval(s)")]
    UnresolvedTangency(usize),
    #[error("tangency flag rate {rate:.4} exceeds {limit:.4}")]
    FlagRateExceeded { rate: f64, limit: f64 },
    #[error("|r| = {0} too close to 1 for the exact two-point formula")]
    NearDiagonal(f64),
    #[error("non-positive conditional variance in the two-point formula")]
    NonPositiveDiscriminant,
    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),
    #[error("fourth-chaos routes disagree by {delta:.3e} (tolerance {tol:.3e})")]
    RouteDisagreement { delta: f64, tol: f64 },
    #[error("degenerate limit-law denominator 16A - L^2 = {0:.3e}")]
    DegenerateDenominator(f64),
    #[error("kernel has eigenvalue {0:.3e} below the clipping threshold")]
    KernelNotPsd(f64),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
