//! The four-stage inference pipeline: checklist recommendation, guidance
//! generation, section-level extraction, and item-level completion.
//!
//! Stages run as separate, bounded model calls. Earlier outputs condition
//! later prompts; manuscript content entering any prompt is capped by the
//! stage's context limit. Item completions are independent of one another,
//! so any execution order assembles the same completed checklist. With a
//! deterministic backend the whole pipeline, provenance included, is a pure
//! function of manuscript, template, and script.

pub mod prompts;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::checklist::{ChecklistItem, ChecklistSection, ChecklistTemplate};
use crate::error::{Error, Result};
use crate::inference::{
    default_stage_configs, generate, Backend, GenerationRequest, Stage, StageConfig, DEFAULT_SEED,
};
use crate::text_ingest::{head_excerpt, windows, NormalizedText};

/// Reply token marking absent information, detected by prefix match.
pub const NULL_SENTINEL: &str = "NOT REPORTED";

/// Default window overlap for section extraction, in chars (10% of the
/// 5,000-char window, so sentences split at a boundary stay recoverable).
pub const WINDOW_OVERLAP_CHARS: usize = 500;

/// Timestamp used when the backend is deterministic, keeping reports
/// byte-reproducible.
const EPOCH_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

/// Result of the recommendation stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    /// The matched candidate name.
    pub chosen: String,
    /// Raw model output before normalization.
    pub raw_output: String,
    /// Length of the excerpt shown to the model, in chars.
    pub excerpt_chars: usize,
}

/// Outputs of the two guidance passes. Internal conditioning material only:
/// never rendered into user-facing reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuidanceSet {
    pub general: String,
    pub per_section: BTreeMap<usize, String>,
}

/// Manuscript content extracted for one checklist section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionExtract {
    pub section_index: usize,
    pub text: String,
    /// Number of windows prompted; equals `windows_tried.len()`.
    pub attempts: usize,
    pub windows_tried: Vec<usize>,
    /// True iff `text` reached the stage's minimum extract length.
    pub sufficient: bool,
    /// Char offset just past the window the text came from; the item stage
    /// reads its additional context from here.
    pub source_window_end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Answered,
    NotReported,
}

/// Answer to a single checklist item.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemResponse {
    pub item_id: String,
    pub status: ResponseStatus,
    /// Empty exactly when `status` is `NotReported`.
    pub answer: String,
    pub section_index: usize,
    /// Verbatim model output, kept for auditing.
    pub raw_output: String,
}

/// Run metadata attached to every completed checklist.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub model: String,
    pub backend: String,
    pub seed: Option<i64>,
    pub stage_configs: Vec<StageConfig>,
    pub prompt_versions: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
    pub duration_ms: u64,
    /// File name of the manuscript, when it came from disk.
    pub source_file: Option<String>,
}

/// A fully populated checklist: one response per template item, in template
/// order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletedChecklist {
    pub template_name: String,
    pub responses: Vec<ItemResponse>,
    pub provenance: Provenance,
}

/// Knobs for a pipeline run. `Default` gives the stock stage configs, seed
/// 0, and the standard window overlap.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub model: String,
    pub seed: Option<i64>,
    pub configs: BTreeMap<Stage, StageConfig>,
    pub window_overlap: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            model: "llama3.1".to_string(),
            seed: Some(DEFAULT_SEED),
            configs: default_stage_configs(),
            window_overlap: WINDOW_OVERLAP_CHARS,
        }
    }
}

/// Orchestrates the staged pipeline against one backend.
pub struct ChecklistPipeline<'a> {
    backend: &'a dyn Backend,
    options: PipelineOptions,
}

impl<'a> ChecklistPipeline<'a> {
    pub fn new(backend: &'a dyn Backend, options: PipelineOptions) -> Self {
        ChecklistPipeline { backend, options }
    }

    pub fn options(&self) -> &PipelineOptions {
        &self.options
    }

    fn config(&self, stage: Stage) -> &StageConfig {
        self.options
            .configs
            .get(&stage)
            .expect("stage config map must cover every stage")
    }

    fn request(&self, stage: Stage, prompt: String) -> GenerationRequest {
        let cfg = self.config(stage);
        GenerationRequest {
            model: self.options.model.clone(),
            prompt,
            temperature: cfg.temperature,
            stop: cfg.stop.clone(),
            seed: self.options.seed,
            max_tokens: None,
        }
    }

    /// Single-label classification of the manuscript onto one candidate
    /// checklist name.
    pub fn recommend(
        &self,
        manuscript: &NormalizedText,
        candidates: &[String],
    ) -> Result<Recommendation> {
        let cfg = self.config(Stage::Recommend);
        let excerpt = head_excerpt(manuscript, cfg.context_limit_chars);
        let excerpt_chars = excerpt.chars().count();
        assert!(
            excerpt_chars <= cfg.context_limit_chars,
            "recommendation excerpt exceeds its context limit"
        );
        let prompt = prompts::build_recommendation_prompt(excerpt, candidates)?;
        let response = generate(self.backend, &self.request(Stage::Recommend, prompt))?;
        let chosen = match_candidate(&response.text, candidates)?;
        Ok(Recommendation {
            chosen,
            raw_output: response.text,
            excerpt_chars,
        })
    }

    /// Two-pass guidance generation: one call over all section titles, then
    /// one call per section. Exactly `1 + sections` backend calls.
    pub fn generate_guidance(&self, template: &ChecklistTemplate) -> Result<GuidanceSet> {
        let general_prompt = prompts::guidance_general_prompt(template);
        let general = generate(self.backend, &self.request(Stage::Guidance, general_prompt))
            .map_err(|e| abort("guidance pass 1", e))?
            .text;
        let mut per_section = BTreeMap::new();
        for section in template.sections() {
            let prompt = prompts::guidance_section_prompt(section, &general);
            let text = generate(self.backend, &self.request(Stage::Guidance, prompt))
                .map_err(|e| abort(format!("guidance for section {}", section.index), e))?
                .text;
            per_section.insert(section.index, text);
        }
        Ok(GuidanceSet {
            general,
            per_section,
        })
    }

    /// Prompt successive manuscript windows until one yields an extract of
    /// at least the minimum length; keep the longest output otherwise.
    pub fn extract_section(
        &self,
        manuscript: &NormalizedText,
        section: &ChecklistSection,
        guidance: &str,
    ) -> Result<SectionExtract> {
        if manuscript.is_empty() {
            return Err(Error::EmptyManuscript);
        }
        let cfg = self.config(Stage::Extract);
        let min_chars = cfg
            .min_extract_chars
            .unwrap_or(crate::inference::MIN_EXTRACT_CHARS);
        let window_list = windows(
            manuscript,
            cfg.context_limit_chars,
            self.options.window_overlap,
        )?;
        let mut windows_tried = Vec::new();
        let mut best: Option<(String, usize)> = None;
        for window in &window_list {
            assert!(
                window.content.chars().count() <= cfg.context_limit_chars,
                "extraction window exceeds its context limit"
            );
            let prompt =
                prompts::extract_prompt(&section.title, guidance, window.index, &window.content);
            let response = generate(self.backend, &self.request(Stage::Extract, prompt))
                .map_err(|e| {
                    abort(
                        format!(
                            "extraction for section {} window {}",
                            section.index, window.index
                        ),
                        e,
                    )
                })?;
            windows_tried.push(window.index);
            let text = response.text.trim().to_string();
            if text.chars().count() >= min_chars {
                return Ok(SectionExtract {
                    section_index: section.index,
                    text,
                    attempts: windows_tried.len(),
                    windows_tried,
                    sufficient: true,
                    source_window_end: window.end,
                });
            }
            let longer = best
                .as_ref()
                .map_or(true, |(b, _)| text.chars().count() > b.chars().count());
            if longer {
                best = Some((text, window.end));
            }
        }
        let (text, source_window_end) = best.expect("non-empty manuscript has windows");
        Ok(SectionExtract {
            section_index: section.index,
            text,
            attempts: windows_tried.len(),
            windows_tried,
            sufficient: false,
            source_window_end,
        })
    }

    /// Answer one checklist item from its section extract plus a bounded
    /// tail of additional context. `NOT REPORTED` replies (by prefix) and
    /// empty outputs become explicit null responses.
    pub fn complete_item(
        &self,
        item: &ChecklistItem,
        section_index: usize,
        extract: &SectionExtract,
        context_tail: &str,
    ) -> Result<ItemResponse> {
        let cfg = self.config(Stage::ItemAnswer);
        assert!(
            context_tail.chars().count() <= cfg.context_limit_chars,
            "item context tail exceeds its limit"
        );
        let prompt = prompts::item_prompt(item, &extract.text, context_tail);
        let response = generate(self.backend, &self.request(Stage::ItemAnswer, prompt))
            .map_err(|e| abort(format!("item {}", item.id), e))?;
        let trimmed = response.text.trim();
        let (status, answer) = if trimmed.is_empty() || trimmed.starts_with(NULL_SENTINEL) {
            (ResponseStatus::NotReported, String::new())
        } else {
            (ResponseStatus::Answered, trimmed.to_string())
        };
        Ok(ItemResponse {
            item_id: item.id.clone(),
            status,
            answer,
            section_index,
            raw_output: response.text,
        })
    }

    /// Run guidance, per-section extraction, and per-item completion,
    /// assembling one response per template item in template order.
    pub fn complete_checklist(
        &self,
        manuscript: &NormalizedText,
        template: &ChecklistTemplate,
    ) -> Result<CompletedChecklist> {
        let order: Vec<usize> = (0..template.item_count()).collect();
        self.complete_checklist_ordered(manuscript, template, &order)
    }

    /// `complete_checklist` with an explicit item execution order, given as
    /// a permutation of flattened item positions. Items share no state, so
    /// every order assembles the identical checklist; exposed so audits can
    /// verify that claim.
    pub fn complete_checklist_ordered(
        &self,
        manuscript: &NormalizedText,
        template: &ChecklistTemplate,
        order: &[usize],
    ) -> Result<CompletedChecklist> {
        let item_count = template.item_count();
        validate_order(order, item_count)?;
        if manuscript.is_empty() {
            return Err(Error::EmptyManuscript);
        }

        let deterministic = self.backend.deterministic();
        let started = std::time::Instant::now();
        let started_at = timestamp(deterministic);

        let guidance = self.generate_guidance(template)?;

        let mut extracts = Vec::with_capacity(template.sections().len());
        for section in template.sections() {
            let section_guidance = &guidance.per_section[&section.index];
            extracts.push(self.extract_section(manuscript, section, section_guidance)?);
        }

        let tail_limit = self.config(Stage::ItemAnswer).context_limit_chars;
        let flat: Vec<(usize, &ChecklistItem)> = template
            .flat_items()
            .map(|(section, item)| (section.index, item))
            .collect();
        let mut slots: Vec<Option<ItemResponse>> = vec![None; item_count];
        for &position in order {
            let (section_index, item) = flat[position];
            let extract = &extracts[section_index];
            let tail = char_slice(manuscript, extract.source_window_end, tail_limit);
            match self.complete_item(item, section_index, extract, &tail) {
                Ok(response) => slots[position] = Some(response),
                Err(e) => {
                    let partial: Vec<ItemResponse> =
                        slots.iter().flatten().cloned().collect();
                    return Err(attach_partial(e, partial));
                }
            }
        }
        let responses: Vec<ItemResponse> = slots
            .into_iter()
            .map(|slot| slot.expect("order is a permutation, every slot filled"))
            .collect();

        let finished_at = timestamp(deterministic);
        let duration_ms = if deterministic {
            0
        } else {
            started.elapsed().as_millis() as u64
        };
        Ok(CompletedChecklist {
            template_name: template.name().to_string(),
            responses,
            provenance: Provenance {
                model: self.options.model.clone(),
                backend: self.backend.descriptor(),
                seed: self.options.seed,
                stage_configs: self.options.configs.values().cloned().collect(),
                prompt_versions: prompts::prompt_versions(),
                started_at,
                finished_at,
                duration_ms,
                source_file: manuscript
                    .source()
                    .and_then(|s| s.path.file_name())
                    .map(|n| n.to_string_lossy().into_owned()),
            },
        })
    }
}

fn validate_order(order: &[usize], item_count: usize) -> Result<()> {
    let mut seen = vec![false; item_count];
    let valid = order.len() == item_count
        && order.iter().all(|&i| {
            if i >= item_count || seen[i] {
                false
            } else {
                seen[i] = true;
                true
            }
        });
    if valid {
        Ok(())
    } else {
        Err(Error::Usage {
            detail: format!("item order must be a permutation of 0..{item_count}"),
        })
    }
}

/// `max_len` chars of content starting at char offset `start`.
fn char_slice(text: &NormalizedText, start: usize, max_len: usize) -> String {
    text.content().chars().skip(start).take(max_len).collect()
}

fn timestamp(deterministic: bool) -> String {
    if deterministic {
        EPOCH_TIMESTAMP.to_string()
    } else {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}

fn abort(context: impl Into<String>, source: Error) -> Error {
    match source {
        Error::Aborted { .. } => source,
        other => Error::Aborted {
            context: context.into(),
            partial: Vec::new(),
            source: Box::new(other),
        },
    }
}

/// Replace an empty diagnostic payload with the responses completed so far.
fn attach_partial(e: Error, partial: Vec<ItemResponse>) -> Error {
    match e {
        Error::Aborted {
            context,
            partial: existing,
            source,
        } if existing.is_empty() => Error::Aborted {
            context,
            partial,
            source,
        },
        other => other,
    }
}

/// Normalize a recommendation reply and match it to exactly one candidate:
/// trim, strip surrounding quotes and terminal punctuation, compare
/// case-insensitively; fall back to a unique substring match.
fn match_candidate(output: &str, candidates: &[String]) -> Result<String> {
    let normalized = normalize_choice(output);
    let exact: Vec<&String> = candidates
        .iter()
        .filter(|c| c.to_lowercase() == normalized)
        .collect();
    if let [single] = exact.as_slice() {
        return Ok((*single).clone());
    }
    let output_lower = output.to_lowercase();
    let substring: Vec<&String> = candidates
        .iter()
        .filter(|c| {
            let candidate_lower = c.to_lowercase();
            output_lower.contains(&candidate_lower)
                || (!normalized.is_empty() && candidate_lower.contains(&normalized))
        })
        .collect();
    match substring.as_slice() {
        [single] => Ok((*single).clone()),
        matched => Err(Error::UnrecognizedChecklistName {
            output: output.to_string(),
            matches: matched.iter().map(|c| (*c).clone()).collect(),
        }),
    }
}

fn normalize_choice(output: &str) -> String {
    let trimmed = output.trim();
    let unquoted = trimmed
        .trim_matches(|c| c == '"' || c == '\'' || c == '`')
        .trim();
    unquoted
        .trim_end_matches(['.', ',', ';', ':', '!', '?'])
        .trim()
        .to_lowercase()
}
