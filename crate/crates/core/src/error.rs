//! Crate-wide error type with a stable mapping onto CLI exit codes.

use std::path::PathBuf;

use crate::pipeline::ItemResponse;

/// Exit code for usage errors: bad flags, unreadable inputs, malformed data files.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for backend failures: unreachable server, unknown model, timeouts.
pub const EXIT_BACKEND: i32 = 3;
/// Exit code for parse and extraction failures.
pub const EXIT_PARSE: i32 = 4;
/// Exit code for evaluation-data mismatches.
pub const EXIT_EVAL: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- text ingest ---
    #[error("unsupported document format: {path}")]
    UnsupportedFormat { path: PathBuf },
    #[error("document is empty after extraction: {path}")]
    EmptyDocument { path: PathBuf },
    #[error("failed to extract text from {path}: {detail}")]
    ExtractionFailed { path: PathBuf, detail: String },
    #[error("invalid window parameters: window_size={window_size}, overlap={overlap}")]
    InvalidWindowParams { window_size: usize, overlap: usize },

    // --- checklist parsing ---
    #[error("no checklist items found in \"{name}\"")]
    NoItemsFound { name: String },
    #[error("duplicate item id \"{id}\" in section \"{section}\"")]
    DuplicateItemId { id: String, section: String },
    #[error("unknown checklist template \"{name}\"")]
    TemplateNotFound { name: String },

    // --- inference ---
    #[error("backend unavailable: {detail}")]
    BackendUnavailable { detail: String },
    #[error("backend does not know model \"{model}\"")]
    ModelNotFound { model: String },
    #[error("generation timed out after {seconds}s")]
    GenerationTimeout { seconds: u64 },
    #[error("scripted backend has no entry for prompt starting {prompt_head:?}")]
    UnscriptedPrompt { prompt_head: String },
    #[error("scripted backend has {} prefix entries matching prompt starting {prompt_head:?}", keys.len())]
    AmbiguousScript { prompt_head: String, keys: Vec<String> },
    #[error("invalid generation request: {detail}")]
    InvalidRequest { detail: String },

    // --- pipeline ---
    #[error("candidate checklist list is empty")]
    EmptyCandidates,
    #[error("model output {output:?} matched {} candidate checklist names", matches.len())]
    UnrecognizedChecklistName { output: String, matches: Vec<String> },
    #[error("manuscript text is empty")]
    EmptyManuscript,
    #[error("pipeline aborted at {context}: {source}")]
    Aborted {
        context: String,
        /// Item responses completed before the failure, for diagnostics.
        partial: Vec<ItemResponse>,
        source: Box<Error>,
    },

    // --- report ---
    #[error("completed checklist does not match template: {detail}")]
    TemplateMismatch { detail: String },
    #[error("report rendering failed: {detail}")]
    RenderFailed { detail: String },

    // --- evaluation ---
    #[error("missing predictions for: {}", ids.join(", "))]
    MissingPrediction { ids: Vec<String> },
    #[error("no records to evaluate")]
    NoData,
    #[error("malformed record on line {line}: {detail}")]
    MalformedRecord { line: usize, detail: String },

    // --- cli / config ---
    #[error("configuration error: {detail}")]
    Config { detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{detail}")]
    Usage { detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Every error maps to exactly one process exit code.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            UnsupportedFormat { .. }
            | InvalidWindowParams { .. }
            | TemplateNotFound { .. }
            | InvalidRequest { .. }
            | EmptyCandidates
            | NoData
            | MalformedRecord { .. }
            | Config { .. }
            | Io { .. }
            | Usage { .. } => EXIT_USAGE,
            BackendUnavailable { .. }
            | ModelNotFound { .. }
            | GenerationTimeout { .. }
            | UnscriptedPrompt { .. }
            | AmbiguousScript { .. } => EXIT_BACKEND,
            EmptyDocument { .. }
            | ExtractionFailed { .. }
            | NoItemsFound { .. }
            | DuplicateItemId { .. }
            | UnrecognizedChecklistName { .. }
            | EmptyManuscript
            | TemplateMismatch { .. }
            | RenderFailed { .. } => EXIT_PARSE,
            MissingPrediction { .. } => EXIT_EVAL,
            Aborted { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
