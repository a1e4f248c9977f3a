use std::path::PathBuf;

use mintox_core::model::ModelError;
use mintox_core::{MetricsError, PipelineError, ToxicityWordlist, VocabError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Vocab { path: PathBuf, source: VocabError },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: ModelError },
    #[error("{}: {source}", path.display())]
    Wordlist { path: PathBuf, source: mintox_core::toxicity::ToxicityError },
    #[error("{}: line {line}: {msg}", path.display())]
    Corpus { path: PathBuf, line: usize, msg: String },
    #[error("MINTOX_THREADS must be a positive integer, got {0:?}")]
    Threads(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("stdout: {0}")]
    Stdout(std::io::Error),
}

impl CliError {
    /// 2 for bad input, 1 for failures writing results.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Write { .. } | CliError::Stdout(_) => 1,
            _ => 2,
        }
    }
}

pub fn read_to_string(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

/// Language tag taken from the file stem when not given.
pub fn load_wordlist(path: &std::path::Path, language: Option<&str>) -> Result<ToxicityWordlist, CliError> {
    let text = read_to_string(path)?;
    let lang = language
        .map(str::to_string)
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();
    ToxicityWordlist::load_from(text.lines(), &lang, &path.display().to_string())
        .map_err(|source| CliError::Wordlist { path: path.to_path_buf(), source })
}
