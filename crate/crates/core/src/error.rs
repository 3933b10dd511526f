use std::fmt;

use thiserror::Error;

/// Pipeline stage a failure originated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Preprocess,
    Preliminary,
    Regression,
    Tree,
    Expert,
    Compare,
    Density,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::Preprocess => "preprocess",
            Stage::Preliminary => "preliminary scoring",
            Stage::Regression => "regression",
            Stage::Tree => "decision tree",
            Stage::Expert => "expert categories",
            Stage::Compare => "comparison",
            Stage::Density => "density estimation",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid input (ragged rows, non-finite values, bad indices).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("design matrix is rank deficient; collinear columns: {}", .0.join(", "))]
    Singular(Vec<String>),

    /// Solver reached a state that the model guarantees cannot happen.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, with any stage tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures caused by the caller's data rather than by numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self.root(),
            Error::Input(_) | Error::MissingColumn(_) | Error::Domain(_) | Error::Io(_) | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
