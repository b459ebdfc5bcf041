//! Shared test support: a rule-driven backend with canned, prompt-derived
//! responses, and a recorder that turns one pipeline run against it into a
//! replay script for the scripted backend and the CLI.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use checksupport::checklist::{load_builtin, ChecklistTemplate};
use checksupport::inference::{Backend, GenerationRequest, GenerationResponse, ScriptedBackend};
use checksupport::pipeline::{ChecklistPipeline, CompletedChecklist, PipelineOptions};
use checksupport::text_ingest::{extract_path, NormalizedText};
use checksupport::Result;

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture_manuscript() -> NormalizedText {
    extract_path(fixture_path("manuscript.txt")).expect("fixture manuscript loads")
}

pub fn fixture_template() -> ChecklistTemplate {
    load_builtin("CONSORT-mini").expect("builtin template loads")
}

/// Candidate list the CLI builds from the builtin templates.
pub fn builtin_candidates() -> Vec<String> {
    checksupport::checklist::builtin_names()
        .iter()
        .map(|n| n.to_string())
        .collect()
}

/// Canned reply for any pipeline prompt, derived from markers in the prompt
/// text itself. Recommendation always picks CONSORT-mini; extraction for
/// METHODS is too short on window 0 and succeeds on window 1 (exercising the
/// retry path); item 3 is a null response.
pub fn rule_response(prompt: &str) -> String {
    if prompt.starts_with("Task: choose the most appropriate reporting checklist") {
        return "CONSORT-mini".to_string();
    }
    if prompt.starts_with("Task: describe, for each section") {
        return "Each section calls for specific methodological disclosures; look for design, \
                allocation, and participant details."
            .to_string();
    }
    if prompt.starts_with("Task: for the checklist section") {
        let title = quoted(prompt);
        return format!(
            "For {title}: scan the opening pages and the methods; watch for words like \
             randomised, allocation, and eligibility."
        );
    }
    if prompt.starts_with("Task: copy the passages") {
        let title = quoted(prompt);
        let window = window_index(prompt);
        return match (title.as_str(), window) {
            ("TITLE AND ABSTRACT", 0) => {
                "Effect of a Structured Walking Programme on Recovery After Knee Replacement: \
                 a Randomised Controlled Trial. Background: Recovery of mobility after total \
                 knee replacement varies widely between patients."
                    .to_string()
            }
            ("METHODS", 0) => "Too short.".to_string(),
            ("METHODS", 1) => {
                "Participants were randomly assigned in a 1:1 ratio to a twelve-week structured \
                 walking programme plus usual care or to usual care alone. Adults aged 50 to 85 \
                 years scheduled for elective unilateral total knee replacement were eligible."
                    .to_string()
            }
            _ => String::new(),
        };
    }
    if prompt.starts_with("Task: complete one checklist item") {
        let id = item_id(prompt);
        return match id.as_str() {
            "1a" => "The title identifies the study as a randomised controlled trial.".to_string(),
            "1b" => "The abstract summarises the design, methods, results, and conclusions of \
                     the trial."
                .to_string(),
            "2" => "A pragmatic, parallel-group, assessor-blinded randomised controlled trial \
                    with a 1:1 allocation ratio."
                .to_string(),
            "3" => "NOT REPORTED".to_string(),
            other => format!("Scripted answer for item {other}."),
        };
    }
    let head: String = prompt.chars().take(60).collect();
    panic!("rule backend saw an unexpected prompt: {head:?}");
}

fn quoted(prompt: &str) -> String {
    let start = prompt.find('"').expect("prompt has a quoted title") + 1;
    let end = prompt[start..].find('"').expect("closing quote") + start;
    prompt[start..end].to_string()
}

fn window_index(prompt: &str) -> usize {
    let marker = "Manuscript window ";
    let start = prompt.find(marker).expect("extract prompt names its window") + marker.len();
    prompt[start..]
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect::<String>()
        .parse()
        .expect("window index parses")
}

fn item_id(prompt: &str) -> String {
    let marker = "Checklist item ";
    let start = prompt.find(marker).expect("item prompt names its item") + marker.len();
    prompt[start..]
        .chars()
        .take_while(|c| *c != ':')
        .collect()
}

/// Backend that answers via `rule_response` and records every exchange.
pub struct RuleBackend {
    log: Mutex<BTreeMap<String, String>>,
}

impl RuleBackend {
    pub fn new() -> Self {
        RuleBackend {
            log: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn transcript(&self) -> BTreeMap<String, String> {
        self.log.lock().unwrap().clone()
    }
}

impl Backend for RuleBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse> {
        let text = rule_response(&request.prompt);
        self.log
            .lock()
            .unwrap()
            .insert(request.prompt.clone(), text.clone());
        Ok(GenerationResponse {
            text,
            latency_ms: 0,
            truncated_by_stop: false,
        })
    }

    fn descriptor(&self) -> String {
        "scripted".to_string()
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Record the complete script for the fixture manuscript and template: the
/// recommendation exchange plus a full checklist completion.
pub fn record_fixture_script() -> BTreeMap<String, String> {
    let manuscript = fixture_manuscript();
    let template = fixture_template();
    let backend = RuleBackend::new();
    let pipeline = ChecklistPipeline::new(&backend, PipelineOptions::default());
    pipeline
        .recommend(&manuscript, &builtin_candidates())
        .expect("recommendation records");
    pipeline
        .complete_checklist(&manuscript, &template)
        .expect("completion records");
    backend.transcript()
}

/// Scripted backend replaying the recorded fixture script.
pub fn fixture_backend() -> ScriptedBackend {
    ScriptedBackend::new(record_fixture_script()).expect("script is valid")
}

/// Run the full pipeline for the fixture pair against the scripted backend.
pub fn fixture_completed() -> CompletedChecklist {
    let backend = fixture_backend();
    let pipeline = ChecklistPipeline::new(&backend, PipelineOptions::default());
    pipeline
        .complete_checklist(&fixture_manuscript(), &fixture_template())
        .expect("fixture completion succeeds")
}

/// Compare `content` against the committed file, or rewrite it when
/// CHECKSUPPORT_REGEN_FIXTURES=1. Returns true when the file matched.
pub fn check_or_regen(path: &Path, content: &[u8]) -> bool {
    if std::env::var_os("CHECKSUPPORT_REGEN_FIXTURES").is_some_and(|v| v == "1") {
        std::fs::write(path, content).expect("fixture regeneration writes");
        return true;
    }
    match std::fs::read(path) {
        Ok(existing) => existing == content,
        Err(_) => false,
    }
}
