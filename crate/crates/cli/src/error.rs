use author2vec_core::author2vec::A2vError;
use author2vec_core::baselines::BaselineError;
use author2vec_core::corpus::CorpusError;
use author2vec_core::embedstore::EmbedError;
use author2vec_core::evalharness::EvalError;
use author2vec_core::nnkernel::NnError;
use author2vec_core::viz::VizError;
use thiserror::Error;

/// Every failure a command can report. The variant decides the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing upstream artifact: {0}")]
    MissingArtifact(String),
    #[error("stale upstream artifact: {0}")]
    StaleArtifact(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingArtifact(_) => 2,
            CliError::StaleArtifact(_) | CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(io) => io.into(),
            CorpusError::InvalidPolicy(_) | CorpusError::InvalidSplit(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Io(io) => io.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFiniteGradient { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<A2vError> for CliError {
    fn from(e: A2vError) -> Self {
        match e {
            A2vError::Nn(n) => n.into(),
            A2vError::Embed(m) => m.into(),
            A2vError::Io(io) => io.into(),
            A2vError::InvalidConfig(_) => CliError::Config(e.to_string()),
            A2vError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Io(io) => io.into(),
            BaselineError::InvalidConfig(_) | BaselineError::RankTooLarge { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(io) => io.into(),
            EvalError::InvalidPlan(_)
            | EvalError::InvalidProbe(_)
            | EvalError::TopKTooLarge { .. } => CliError::Config(e.to_string()),
            EvalError::NonFinite => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<VizError> for CliError {
    fn from(e: VizError) -> Self {
        match e {
            VizError::Io(io) => io.into(),
            VizError::InvalidConfig(_) | VizError::PerplexityTooLarge { .. } => {
                CliError::Config(e.to_string())
            }
            VizError::NonFinite => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_map_to_distinct_codes() {
        let cases = [
            (CliError::from(CorpusError::InvalidPolicy("x".into())), 2),
            (CliError::from(EmbedError::TruncatedHeader), 3),
            (CliError::from(EvalError::NonFinite), 4),
            (CliError::from(std::io::Error::other("disk")), 5),
            (CliError::MissingArtifact("ingest/corpus.jsonl".into()), 2),
            (CliError::StaleArtifact("x".into()), 3),
        ];
        for (err, code) in cases {
            assert_eq!(err.exit_code(), code, "{err}");
        }
    }

    #[test]
    fn nested_io_errors_keep_the_io_family() {
        let e = CliError::from(A2vError::Embed(EmbedError::Io(std::io::Error::other(
            "gone",
        ))));
        assert_eq!(e.exit_code(), 5);
    }
}
