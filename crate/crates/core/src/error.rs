use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension {0} outside 1..=3")]
    Dimension(usize),
    #[error("resolution {got} below the minimum {min}")]
    Resolution { got: usize, min: usize },
    #[error("degree {k} out of range 0..={max}")]
    DegreeRange { k: usize, max: usize },
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("integer overflow during Smith reduction")]
    Overflow,
    #[error("right-hand side has harmonic component of size {0:e}")]
    HarmonicComponent(f64),
    #[error("linear solver did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("period matrix is singular")]
    SingularPeriods,
    #[error("cochain is not closed (residual {0:e})")]
    NotClosed(f64),
    #[error("chain is not a cycle")]
    NotCycle,
    #[error("class is not integral: period {period} is {gap} away from an integer")]
    NonIntegral { period: f64, gap: f64 },
    #[error("intersection {0} failed its contractibility certificate")]
    NonContractible(String),
    #[error("lift of the cocycle is not integral (deviation {0:e})")]
    BrokenCocycle(f64),
    #[error("characteristic class is nonzero: {0:?}")]
    NonzeroClass(Vec<i64>),
    #[error("connection is not flat (|G| = {0:e})")]
    NotFlat(f64),
    #[error("holonomy is nonzero: {0:?}")]
    NonzeroHolonomy(Vec<f64>),
    #[error("holonomy constants deviate by {0:e} from a constant")]
    NonConstant(f64),
    #[error("cell assignment is not subordinate to the cover: {0}")]
    Assignment(String),
    #[error("trivializations belong to different cocycles (deviation {0:e})")]
    DifferentCocycles(f64),
    #[error("divisor degrees differ: {0} vs {1}")]
    DivisorDegree(i64, i64),
    #[error("Hodge decomposition residual {0:e}")]
    Decomposition(f64),
    #[error("convexity violated at {} nodes", .0.len())]
    Convexity(Vec<usize>),
    #[error("Newton iteration failed: {0}")]
    Newton(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
