use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid case: {0}")]
    Validation(String),

    #[error("converter side {side}: y_t + y_c = 0, series combination is undefined")]
    DegenerateSeries { side: u8 },

    #[error("measurement configuration: {0}")]
    Config(String),

    #[error("system is unobservable: {0}")]
    Unobservable(String),

    #[error("no admissible target point: {0}")]
    InfeasibleTarget(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
