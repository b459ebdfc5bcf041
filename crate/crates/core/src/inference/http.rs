//! Ollama-compatible HTTP backend: POST /api/generate with streaming
//! disabled, so every call returns one complete response.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{apply_stop, Backend, GenerationRequest, GenerationResponse, DEFAULT_TIMEOUT_SECS};
use crate::error::{Error, Result};

pub const DEFAULT_BASE_URL: &str = "http://localhost:11434";

pub struct HttpBackend {
    base_url: String,
    timeout: Duration,
    agent: ureq::Agent,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self::with_timeout(base_url, Duration::from_secs(DEFAULT_TIMEOUT_SECS))
    }

    pub fn with_timeout(base_url: impl Into<String>, timeout: Duration) -> Self {
        let base_url = base_url.into();
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        HttpBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            timeout,
            agent,
            gate: Gate::new(1),
        }
    }

    /// Maximum concurrent requests to the server. Defaults to 1, matching a
    /// single local model server.
    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.gate = Gate::new(max.max(1));
        self
    }

    fn send_once(&self, request: &GenerationRequest) -> Result<String> {
        let body = GenerateBody {
            model: &request.model,
            prompt: &request.prompt,
            stream: false,
            options: GenerateOptions {
                temperature: request.temperature,
                stop: &request.stop,
                seed: request.seed,
                num_predict: request.max_tokens,
            },
        };
        let url = format!("{}/api/generate", self.base_url);
        match self.agent.post(&url).send_json(&body) {
            Ok(response) => {
                let reply: GenerateReply =
                    response.into_json().map_err(|e| Error::BackendUnavailable {
                        detail: format!("invalid response body: {e}"),
                    })?;
                Ok(reply.response)
            }
            Err(ureq::Error::Status(code, response)) => {
                let detail = response.into_string().unwrap_or_default();
                if code == 404 && detail.contains("model") {
                    Err(Error::ModelNotFound {
                        model: request.model.clone(),
                    })
                } else {
                    Err(Error::BackendUnavailable {
                        detail: format!("server returned {code}: {}", detail.trim()),
                    })
                }
            }
            Err(ureq::Error::Transport(transport)) => {
                let detail = transport.to_string();
                let lower = detail.to_lowercase();
                if lower.contains("timed out") || lower.contains("timeout") {
                    Err(Error::GenerationTimeout {
                        seconds: self.timeout.as_secs(),
                    })
                } else {
                    Err(Error::BackendUnavailable { detail })
                }
            }
        }
    }
}

impl Backend for HttpBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse> {
        let _permit = self.gate.acquire();
        let start = Instant::now();
        let raw = match self.send_once(request) {
            // One retry on transport errors; server errors and timeouts are
            // final.
            Err(Error::BackendUnavailable { .. }) => self.send_once(request)?,
            other => other?,
        };
        let (text, truncated_by_stop) = apply_stop(&raw, &request.stop);
        Ok(GenerationResponse {
            text,
            latency_ms: start.elapsed().as_millis() as u64,
            truncated_by_stop,
        })
    }

    fn descriptor(&self) -> String {
        self.base_url.clone()
    }
}

#[derive(Serialize)]
struct GenerateBody<'a> {
    model: &'a str,
    prompt: &'a str,
    stream: bool,
    options: GenerateOptions<'a>,
}

#[derive(Serialize)]
struct GenerateOptions<'a> {
    temperature: f64,
    stop: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    num_predict: Option<u32>,
}

#[derive(Deserialize)]
struct GenerateReply {
    response: String,
}

/// Counting gate bounding in-flight requests.
struct Gate {
    state: Mutex<usize>,
    available: Condvar,
    max: usize,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(max: usize) -> Self {
        Gate {
            state: Mutex::new(0),
            available: Condvar::new(),
            max,
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut in_flight = self.state.lock().unwrap();
        while *in_flight >= self.max {
            in_flight = self.available.wait(in_flight).unwrap();
        }
        *in_flight += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut in_flight = self.0.state.lock().unwrap();
        *in_flight -= 1;
        self.0.available.notify_one();
    }
}
