//! Language-model backend abstraction: a generation contract with an HTTP
//! implementation for a local model server and a scripted replay
//! implementation for deterministic tests.

mod http;
mod scripted;

pub use http::{HttpBackend, DEFAULT_BASE_URL};
pub use scripted::ScriptedBackend;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default excerpt budget for the recommendation stage, in chars.
pub const RECOMMEND_EXCERPT_CHARS: usize = 2_000;
/// Default extraction window size, in chars.
pub const EXTRACT_WINDOW_CHARS: usize = 5_000;
/// Default minimum length for a section extract to count as sufficient.
pub const MIN_EXTRACT_CHARS: usize = 50;
/// Default budget for the additional context passed to item completion.
pub const ITEM_CONTEXT_CHARS: usize = 1_000;
/// Default generation timeout, per call.
pub const DEFAULT_TIMEOUT_SECS: u64 = 120;
/// Seed sent to backends that support seeding.
pub const DEFAULT_SEED: i64 = 0;

/// The four pipeline stages, each with its own inference parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Recommend,
    Guidance,
    Extract,
    ItemAnswer,
}

/// Per-stage inference parameters.
///
/// `context_limit_chars` bounds the manuscript-derived content a single
/// prompt of this stage may carry. Guidance prompts carry none, so their
/// limit is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageConfig {
    pub stage: Stage,
    pub temperature: f64,
    pub context_limit_chars: usize,
    pub stop: Vec<String>,
    /// Extract stage only: outputs shorter than this trigger a retry on the
    /// next window.
    pub min_extract_chars: Option<usize>,
}

/// The stage defaults: temperatures 0.2 / 0.7 / 0.3 / 0.5, a 2,000-char
/// recommendation excerpt, 5,000-char extraction windows, and a 1,000-char
/// item-context budget.
pub fn default_stage_configs() -> BTreeMap<Stage, StageConfig> {
    let mut configs = BTreeMap::new();
    configs.insert(
        Stage::Recommend,
        StageConfig {
            stage: Stage::Recommend,
            temperature: 0.2,
            context_limit_chars: RECOMMEND_EXCERPT_CHARS,
            stop: Vec::new(),
            min_extract_chars: None,
        },
    );
    configs.insert(
        Stage::Guidance,
        StageConfig {
            stage: Stage::Guidance,
            temperature: 0.7,
            context_limit_chars: 0,
            stop: Vec::new(),
            min_extract_chars: None,
        },
    );
    configs.insert(
        Stage::Extract,
        StageConfig {
            stage: Stage::Extract,
            temperature: 0.3,
            context_limit_chars: EXTRACT_WINDOW_CHARS,
            stop: Vec::new(),
            min_extract_chars: Some(MIN_EXTRACT_CHARS),
        },
    );
    configs.insert(
        Stage::ItemAnswer,
        StageConfig {
            stage: Stage::ItemAnswer,
            temperature: 0.5,
            context_limit_chars: ITEM_CONTEXT_CHARS,
            stop: vec!["\n\n\n".to_string(), "Checklist item:".to_string()],
            min_extract_chars: None,
        },
    );
    configs
}

/// One complete, non-streamed generation call.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub stop: Vec<String>,
    pub seed: Option<i64>,
    pub max_tokens: Option<u32>,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<()> {
        if self.prompt.is_empty() {
            return Err(Error::InvalidRequest {
                detail: "prompt is empty".into(),
            });
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::InvalidRequest {
                detail: format!("temperature {} outside [0, 2]", self.temperature),
            });
        }
        if self.stop.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidRequest {
                detail: "stop strings must be non-empty".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResponse {
    pub text: String,
    pub latency_ms: u64,
    /// True when this client cut the text at the first stop-string match.
    pub truncated_by_stop: bool,
}

/// A generation backend. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    /// Run one complete generation. The request has been validated.
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse>;

    /// Short description for provenance records, e.g. "scripted" or a URL.
    fn descriptor(&self) -> String;

    /// True when responses are a pure function of the prompt, which also
    /// makes pipeline provenance (timestamps included) reproducible.
    fn deterministic(&self) -> bool {
        false
    }
}

/// Validate a request and run it against a backend.
pub fn generate(backend: &dyn Backend, request: &GenerationRequest) -> Result<GenerationResponse> {
    request.validate()?;
    backend.generate(request)
}

/// Cut `text` at the earliest occurrence of any stop string. Returns the
/// (possibly truncated) text and whether a cut happened.
pub(crate) fn apply_stop(text: &str, stop: &[String]) -> (String, bool) {
    let earliest = stop
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min();
    match earliest {
        Some(pos) => (text[..pos].to_string(), true),
        None => (text.to_string(), false),
    }
}

/// First characters of a prompt, for error messages.
pub(crate) fn prompt_head(prompt: &str) -> String {
    const HEAD: usize = 60;
    if prompt.chars().count() <= HEAD {
        prompt.to_string()
    } else {
        let cut: String = prompt.chars().take(HEAD).collect();
        format!("{cut}…")
    }
}
