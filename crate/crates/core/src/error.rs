use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the numerical pipeline.
///
/// Every variant has a stable machine-readable name, see [`Error::code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("CCR matrix is not antisymmetric (relative defect {defect:.3e})")]
    NotAntisymmetric { defect: f64 },
    #[error("CCR matrix is singular (reciprocal condition {rcond:.3e})")]
    SingularTheta { rcond: f64 },
    #[error("drift matrix is not Hurwitz (spectral abscissa {abscissa:.3e})")]
    NotHurwitz { abscissa: f64 },
    #[error("BJB^T is singular (reciprocal condition {rcond:.3e})")]
    SingularMho { rcond: f64 },
    #[error("coupling matrix does not have full column rank (rank {rank} < {n})")]
    RankDeficientCoupling { rank: usize, n: usize },
    #[error("Lyapunov solve failed: {0}")]
    LyapunovSolveFailed(String),
    #[error("transformation matrix is singular (reciprocal condition {rcond:.3e})")]
    SingularS { rcond: f64 },
    #[error("non-finite entries in matrix argument")]
    NonFinite,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("frequency must be positive, got {0}")]
    NonpositiveOmega(f64),
    #[error("det G(T) law violated (relative error {rel_err:.3e})")]
    DeterminantIdentityViolated { rel_err: f64 },
    #[error("G(T) is numerically singular")]
    SingularG,
    #[error("no eigenfrequencies in [{omega_min:.4e}, {omega_max:.4e}]")]
    NoRootsFound { omega_min: f64, omega_max: f64 },
    #[error("root refinement stalled near omega = {omega:.6e} (normalized sigma_min {rho:.3e})")]
    RefinementStalled { omega: f64, rho: f64 },
    #[error("E(omega) has trivial kernel at omega = {omega:.6e}")]
    EmptyKernel { omega: f64 },
    #[error("Gram-Schmidt rank collapse within a degenerate eigenspace")]
    RankCollapse,
    #[error("captured {captured:.6} of the Hilbert-Schmidt norm, target {target:.6}")]
    CaptureUnreachable { captured: f64, target: f64 },
    #[error("spectral basis failed validation: {0}")]
    BasisInconsistent(String),
    #[error("Gaussian state data unavailable: {0}")]
    StateUnavailable(String),
    #[error("risk parameter exceeds the critical value {theta_critical:.6e}")]
    ThetaSupercritical { theta_critical: f64 },
    #[error("discretized covariance is not PSD (min eigenvalue {min_eig:.3e})")]
    CovarianceNotPsd { min_eig: f64 },
    #[error("operator discretization produced a negative eigenvalue {value:.3e}")]
    NegativeSpectrum { value: f64 },
    #[error("{fraction:.3} of Monte-Carlo samples overflowed")]
    OverflowDominated { fraction: f64 },
    #[error("Gauss-Hermite quadrature under-resolved (change {change:.3e} between orders)")]
    QuadratureUnderresolved { change: f64 },
}

impl Error {
    /// Stable identifier used in machine-readable error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NotAntisymmetric { .. } => "NotAntisymmetric",
            Error::SingularTheta { .. } => "SingularTheta",
            Error::NotHurwitz { .. } => "NotHurwitz",
            Error::SingularMho { .. } => "SingularMho",
            Error::RankDeficientCoupling { .. } => "RankDeficientCoupling",
            Error::LyapunovSolveFailed(_) => "LyapunovSolveFailed",
            Error::SingularS { .. } => "SingularS",
            Error::NonFinite => "NonFinite",
            Error::GridMismatch(_) => "GridMismatch",
            Error::NonpositiveOmega(_) => "NonpositiveOmega",
            Error::DeterminantIdentityViolated { .. } => "DeterminantIdentityViolated",
            Error::SingularG => "SingularG",
            Error::NoRootsFound { .. } => "NoRootsFound",
            Error::RefinementStalled { .. } => "RefinementStalled",
            Error::EmptyKernel { .. } => "EmptyKernel",
            Error::RankCollapse => "RankCollapse",
            Error::CaptureUnreachable { .. } => "CaptureUnreachable",
            Error::BasisInconsistent(_) => "BasisInconsistent",
            Error::StateUnavailable(_) => "StateUnavailable",
            Error::ThetaSupercritical { .. } => "ThetaSupercritical",
            Error::CovarianceNotPsd { .. } => "CovarianceNotPSD",
            Error::NegativeSpectrum { .. } => "NegativeSpectrum",
            Error::OverflowDominated { .. } => "OverflowDominated",
            Error::QuadratureUnderresolved { .. } => "QuadratureUnderresolved",
        }
    }
}
