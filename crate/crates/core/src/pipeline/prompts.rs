//! The fixed prompt templates, one per stage. These are versioned constants:
//! changing any template text is a breaking change to the golden tests and
//! must bump the matching version tag. The same texts are published in
//! docs/prompts.md.

use std::collections::BTreeMap;

use crate::checklist::{ChecklistItem, ChecklistSection, ChecklistTemplate};
use crate::error::{Error, Result};

pub const RECOMMEND_PROMPT_VERSION: &str = "recommend/v1";
pub const GUIDANCE_PROMPT_VERSION: &str = "guidance/v1";
pub const EXTRACT_PROMPT_VERSION: &str = "extract/v1";
pub const ITEM_PROMPT_VERSION: &str = "item/v1";

/// Stage name to prompt version tag, recorded in run provenance.
pub fn prompt_versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("recommend".into(), RECOMMEND_PROMPT_VERSION.into()),
        ("guidance".into(), GUIDANCE_PROMPT_VERSION.into()),
        ("extract".into(), EXTRACT_PROMPT_VERSION.into()),
        ("item".into(), ITEM_PROMPT_VERSION.into()),
    ])
}

pub const RECOMMEND_TEMPLATE: &str = "Task: choose the most appropriate reporting checklist for the manuscript excerpt below.

Candidate checklists:
{candidates}
Manuscript excerpt:
<<<
{excerpt}
>>>

Reply with exactly one checklist name from the candidate list and nothing else.
";

pub const GUIDANCE_GENERAL_TEMPLATE: &str = "Task: describe, for each section of the reporting checklist \"{name}\", the kinds of information a completed manuscript is expected to provide.

Checklist sections:
{sections}
Give brief guidance for every section, in order.
";

pub const GUIDANCE_SECTION_TEMPLATE: &str = "Task: for the checklist section \"{title}\", describe where the relevant information typically appears in a scientific manuscript and which indicative phrases or concepts signal it.
{hint_block}
General guidance from the previous pass:
{general}

Keep the advice specific to this section.
";

pub const EXTRACT_TEMPLATE: &str = "Task: copy the passages relevant to the checklist section \"{title}\" from the manuscript window below.

Section guidance:
{guidance}

Manuscript window {window_index}:
<<<
{window}
>>>

Return only text copied or closely paraphrased from this window. Return an empty response if nothing is relevant.
";

pub const ITEM_TEMPLATE: &str = "Task: complete one checklist item using only the material provided below.

Checklist item {id}: {text}
{instructions_block}Section extract:
<<<
{extract}
>>>

Additional manuscript context:
<<<
{tail}
>>>

Answer concisely using only the material above. If the required information is absent, reply with exactly NOT REPORTED.
";

/// Numbered-list prompt asking for exactly one candidate name. The excerpt
/// must already be within the recommendation budget.
pub fn build_recommendation_prompt(excerpt: &str, candidates: &[String]) -> Result<String> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut list = String::new();
    for (i, name) in candidates.iter().enumerate() {
        list.push_str(&format!("{}. {name}\n", i + 1));
    }
    Ok(RECOMMEND_TEMPLATE
        .replace("{candidates}", &list)
        .replace("{excerpt}", excerpt))
}

pub fn guidance_general_prompt(template: &ChecklistTemplate) -> String {
    let mut list = String::new();
    for section in template.sections() {
        list.push_str(&format!("{}. {}\n", section.index + 1, section.title));
    }
    GUIDANCE_GENERAL_TEMPLATE
        .replace("{name}", template.name())
        .replace("{sections}", &list)
}

pub fn guidance_section_prompt(section: &ChecklistSection, general: &str) -> String {
    let hint_block = match &section.guidance_hint {
        Some(hint) => format!("\nSource checklist guidance:\n{hint}\n"),
        None => String::new(),
    };
    GUIDANCE_SECTION_TEMPLATE
        .replace("{title}", &section.title)
        .replace("{hint_block}", &hint_block)
        .replace("{general}", general)
}

pub fn extract_prompt(section_title: &str, guidance: &str, window_index: usize, window: &str) -> String {
    EXTRACT_TEMPLATE
        .replace("{title}", section_title)
        .replace("{guidance}", guidance)
        .replace("{window_index}", &window_index.to_string())
        .replace("{window}", window)
}

pub fn item_prompt(item: &ChecklistItem, extract: &str, tail: &str) -> String {
    let instructions_block = match &item.instructions {
        Some(instructions) => format!("Item instructions: {instructions}\n"),
        None => String::new(),
    };
    ITEM_TEMPLATE
        .replace("{id}", &item.id)
        .replace("{text}", &item.text)
        .replace("{instructions_block}", &instructions_block)
        .replace("{extract}", extract)
        .replace("{tail}", tail)
}
