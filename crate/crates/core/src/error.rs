use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integration did not converge: step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("integration produced a non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("integration exceeded {steps} steps, last time t = {t}")]
    TooManySteps { steps: usize, t: f64 },
    #[error("no recurrence to the section within time {max_time}")]
    NoRecurrence { max_time: f64 },
    #[error("newton iteration did not converge after {iters} iterations (residual {residual:e})")]
    Nonconvergent { iters: usize, residual: f64 },
    #[error("section degenerate: residual Jacobian is singular")]
    SectionDegenerate,
    #[error("Jacobian near-singular (smallest/largest singular value {ratio:e})")]
    JacobianNearSingular { ratio: f64 },
    #[error("eigenvalue computation failed")]
    EigenFailure,
    #[error("no periodic adjoint solution: eigenvalue-1 eigenspace empty within tolerance")]
    NoPeriodicAdjoint,
    #[error("cycle is not simple (unit multiplier multiplicity {multiplicity})")]
    NotSimple { multiplicity: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("phase formula inapplicable: M_cos = 0")]
    PhaseFormulaInapplicable,
    #[error("degree undefined at boundary: value {value:e} at {at}")]
    DegreeUndefinedAtBoundary { at: f64, value: f64 },
    #[error("field degenerate on boundary at sample {index} (|F| = {norm:e})")]
    FieldDegenerate { index: usize, norm: f64 },
    #[error("singular Jacobian at zero #{index}")]
    SingularZero { index: usize },
    #[error("boundary point fails P0(xi) = xi (residual {residual:e})")]
    NotFixedPoint { residual: f64 },
    #[error("perturbation does not have the required form: {0}")]
    FormMismatch(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("certificate does not apply: {0}")]
    CertificateInapplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
