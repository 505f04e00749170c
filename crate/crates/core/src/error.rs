use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("model validation failed: {0}")]
    Validation(String),

    #[error("no pulse regime: u_minus = {u_minus} must lie strictly inside (g(beta), g*) = ({lower}, {upper})")]
    NoPulseRegime { u_minus: f64, lower: f64, upper: f64 },

    #[error("could not bracket the root of g(v) = {target} to the right of beta")]
    BracketFailure { target: f64 },

    #[error("phi^-1({value}) is outside the range of phi")]
    OutOfRange { value: f64 },

    #[error("manifold singularity: |chi*phi(W) - s| = {gap:e} at W = {w}")]
    ManifoldSingularity { w: f64, gap: f64 },

    #[error("degenerate equilibrium at v = {v}: |g'(v)| = {g_prime:e} below hyperbolicity tolerance")]
    DegenerateEquilibrium { v: f64, g_prime: f64 },

    #[error("quadrature did not converge on [{a}, {b}]")]
    QuadratureNonConvergence { a: f64, b: f64 },

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("empty speed window: upper {upper} <= lower {lower}")]
    EmptyWindow { lower: f64, upper: f64 },

    #[error("trap constants infeasible: {0}")]
    ConstantsInfeasible(String),

    #[error("trap geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("unsupported speed branch: {0}")]
    UnsupportedBranch(String),

    #[error("step size underflow at xi = {xi}")]
    StepUnderflow { xi: f64 },

    #[error("orbit escaped the trapping region at xi = {xi}, state ({v}, {w})")]
    Escape { xi: f64, v: f64, w: f64 },

    #[error("orbit not captured within integration length {length}")]
    NoCapture { length: f64 },

    #[error("resolvent domain too short: kernel length {kernel_length} exceeds a quarter of span {span}")]
    DomainTooShort { kernel_length: f64, span: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pulse seed rejected: {0}")]
    SeedRejected(String),

    #[error("pulse peak lost at t = {t}")]
    PeakLost { t: f64 },

    #[error("no linear growth window: {0}")]
    NoLinearWindow(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
