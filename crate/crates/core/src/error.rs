use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum TspnError {
    #[error("{file}:{line}:{col}: {msg}")]
    Parse {
        file: String,
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("instance is empty")]
    Empty,
    #[error("wrong preprocessing stage: expected {expected}, found {found}")]
    Stage { expected: Stage, found: Stage },
    #[error("B = 0: every segment collapses to one column, nothing to scale")]
    DegenerateScale,
    #[error("vertical leg between tour points {0} and {1}; perturb the instance first")]
    VerticalLeg(usize, usize),
    #[error("size limit exceeded: {0}")]
    TooLarge(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TspnError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Raw,
    Snapped,
    Scaled,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Raw => "raw",
            Stage::Snapped => "snapped",
            Stage::Scaled => "scaled",
        };
        f.write_str(s)
    }
}
