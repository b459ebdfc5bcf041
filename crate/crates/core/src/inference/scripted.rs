//! Deterministic replay backend keyed by prompt text. Lookup is by exact
//! prompt first, then by a unique key that is a prefix of the prompt.

use std::collections::BTreeMap;
use std::path::Path;

use super::{apply_stop, prompt_head, Backend, GenerationRequest, GenerationResponse};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    script: BTreeMap<String, String>,
}

impl ScriptedBackend {
    pub fn new(script: BTreeMap<String, String>) -> Result<Self> {
        if script.keys().any(|k| k.is_empty()) {
            return Err(Error::Usage {
                detail: "scripted backend keys must be non-empty".into(),
            });
        }
        Ok(ScriptedBackend { script })
    }

    /// Parse a script from a JSON object mapping prompt keys to responses.
    pub fn from_json(json: &str) -> Result<Self> {
        let script: BTreeMap<String, String> =
            serde_json::from_str(json).map_err(|e| Error::Config {
                detail: format!("invalid script JSON: {e}"),
            })?;
        Self::new(script)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }

    fn lookup(&self, prompt: &str) -> Result<&str> {
        if let Some(text) = self.script.get(prompt) {
            return Ok(text);
        }
        let matches: Vec<&String> = self
            .script
            .keys()
            .filter(|key| prompt.starts_with(key.as_str()))
            .collect();
        match matches.as_slice() {
            [] => Err(Error::UnscriptedPrompt {
                prompt_head: prompt_head(prompt),
            }),
            [key] => Ok(&self.script[key.as_str()]),
            keys => Err(Error::AmbiguousScript {
                prompt_head: prompt_head(prompt),
                keys: keys.iter().map(|k| prompt_head(k)).collect(),
            }),
        }
    }
}

impl Backend for ScriptedBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse> {
        let canned = self.lookup(&request.prompt)?;
        let (text, truncated_by_stop) = apply_stop(canned, &request.stop);
        Ok(GenerationResponse {
            text,
            latency_ms: 0,
            truncated_by_stop,
        })
    }

    fn descriptor(&self) -> String {
        "scripted".to_string()
    }

    fn deterministic(&self) -> bool {
        true
    }
}
