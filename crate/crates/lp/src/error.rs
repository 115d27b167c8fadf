use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("problem has no variables")]
    NoVariables,
    #[error("MPS parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown variable names in solution file: {}", .0.join(", "))]
    UnknownVariables(Vec<String>),
    #[error("singular basis matrix")]
    SingularBasis,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
