use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("game exceeds enumeration bound ({players} players, {max_actions} actions max; limit 3 players, 4 actions)")]
    SizeBound { players: usize, max_actions: usize },

    #[error("regularizer supports at most {max} actions per player, got {actions}")]
    TooManyActions { actions: usize, max: usize },

    #[error("gradient of a steep regularizer evaluated on the boundary (coordinate {action} = {value:e})")]
    BoundaryGradient { action: usize, value: f64 },

    #[error("restricted Hessian is singular (condition number {condition:e})")]
    SingularHessian { condition: f64 },

    #[error("KKT solve did not converge; best residual {best_residual:e} on support {best_support:?}")]
    NoConvergence {
        best_residual: f64,
        best_support: Vec<usize>,
    },

    #[error("integrator failed at t = {t}: step size {step:e} below minimum")]
    StepFailure { t: f64, step: f64 },

    #[error("game is not generic: {0}")]
    NonGenericGame(String),

    #[error("operation requires a non-steep regularizer")]
    SteepRegularizer,

    #[error("operation requires a steep regularizer")]
    NonSteepRegularizer,

    #[error("payoff gap is not positive on the probe ball (c = {gap}); shrink the radius")]
    NonPositiveGap { gap: f64 },

    #[error("operation requires a two-player zero-sum game")]
    NotZeroSum,

    #[error("equilibrium is not an interior Nash equilibrium")]
    NonInteriorEquilibrium,

    #[error("equilibrium is not quasi-strict")]
    NotQuasiStrict,

    #[error("invalid regularizer '{0}' (expected negentropy, euclidean or tsallis:q=<float> with 0 < q < 1)")]
    InvalidRegularizer(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("unknown builtin game '{0}'")]
    UnknownBuiltin(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
