//! Hierarchical checklist representation and a parser for loosely formatted
//! checklist documents.
//!
//! Section boundaries are lines (at column 0) that are markdown headings,
//! ALL-CAPS lines of three or more characters, or lines of the form
//! "Section <number>:" / "Section <number>.". Item lines start with a
//! numbering token: digits, an optional single lowercase letter, then "." or
//! ")". Prose after an item becomes that item's instructions; prose between a
//! heading and the first item becomes the section's guidance hint. Indented
//! lines are always prose. Items appearing before any heading fall into an
//! implicit "General" section.

use crate::error::{Error, Result};
use crate::text_ingest::NormalizedText;

/// A single required disclosure, e.g. item "2a" of a reporting guideline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChecklistItem {
    /// Display label such as "1" or "2a". Unique within a section; across
    /// sections the (section index, id) pair is the unique key.
    pub id: String,
    pub text: String,
    /// Item-specific guidance carried over from the source checklist.
    pub instructions: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChecklistSection {
    pub title: String,
    /// 0-based position within the template.
    pub index: usize,
    pub items: Vec<ChecklistItem>,
    /// Prose found between the section heading and its first item.
    pub guidance_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChecklistTemplate {
    name: String,
    version: Option<String>,
    sections: Vec<ChecklistSection>,
}

impl ChecklistTemplate {
    /// Validating constructor. Rejects empty names, empty section lists,
    /// empty items, out-of-place section indexes, and duplicate item ids
    /// within a section.
    pub fn new(
        name: impl Into<String>,
        version: Option<String>,
        sections: Vec<ChecklistSection>,
    ) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::Usage {
                detail: "template name must be non-empty".into(),
            });
        }
        if sections.is_empty() {
            return Err(Error::NoItemsFound { name });
        }
        for (pos, section) in sections.iter().enumerate() {
            if section.index != pos {
                return Err(Error::Usage {
                    detail: format!(
                        "section \"{}\" has index {} at position {}",
                        section.title, section.index, pos
                    ),
                });
            }
            if section.items.is_empty() {
                return Err(Error::NoItemsFound { name });
            }
            let mut seen = std::collections::BTreeSet::new();
            for item in &section.items {
                if item.id.is_empty() || item.text.is_empty() {
                    return Err(Error::Usage {
                        detail: format!(
                            "item in section \"{}\" has an empty id or text",
                            section.title
                        ),
                    });
                }
                if !seen.insert(item.id.as_str()) {
                    return Err(Error::DuplicateItemId {
                        id: item.id.clone(),
                        section: section.title.clone(),
                    });
                }
            }
        }
        Ok(ChecklistTemplate {
            name,
            version,
            sections,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> Option<&str> {
        self.version.as_deref()
    }

    pub fn sections(&self) -> &[ChecklistSection] {
        &self.sections
    }

    /// Items flattened in template order, with their section.
    pub fn flat_items(&self) -> impl Iterator<Item = (&ChecklistSection, &ChecklistItem)> {
        self.sections
            .iter()
            .flat_map(|s| s.items.iter().map(move |i| (s, i)))
    }

    pub fn item_count(&self) -> usize {
        self.sections.iter().map(|s| s.items.len()).sum()
    }

    /// Structural identity: section titles, item ids, and item texts, in
    /// order. Guidance and instructions are carried best-effort and excluded.
    pub fn structure_eq(&self, other: &Self) -> bool {
        self.name == other.name && self.structure() == other.structure()
    }

    fn structure(&self) -> Vec<(&str, Vec<(&str, &str)>)> {
        self.sections
            .iter()
            .map(|s| {
                (
                    s.title.as_str(),
                    s.items
                        .iter()
                        .map(|i| (i.id.as_str(), i.text.as_str()))
                        .collect(),
                )
            })
            .collect()
    }
}

/// Title of the implicit section holding items that precede any heading.
pub const IMPLICIT_SECTION_TITLE: &str = "General";

/// Parse a checklist from normalized text. See the module docs for the line
/// classification rules.
pub fn parse_checklist(text: &NormalizedText, name: &str) -> Result<ChecklistTemplate> {
    struct ItemDraft {
        id: String,
        text: String,
        instructions: Vec<String>,
    }
    struct SectionDraft {
        title: String,
        guidance: Vec<String>,
        items: Vec<ItemDraft>,
    }

    let mut drafts: Vec<SectionDraft> = Vec::new();
    let mut pending_prose: Vec<String> = Vec::new();

    for line in text.content().lines() {
        let indented = line.starts_with(' ');
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !indented {
            if let Some((id, item_text)) = match_item_line(trimmed) {
                if drafts.is_empty() {
                    drafts.push(SectionDraft {
                        title: IMPLICIT_SECTION_TITLE.to_string(),
                        guidance: std::mem::take(&mut pending_prose),
                        items: Vec::new(),
                    });
                }
                drafts.last_mut().unwrap().items.push(ItemDraft {
                    id: id.to_string(),
                    text: item_text.to_string(),
                    instructions: Vec::new(),
                });
                continue;
            }
            if let Some(title) = match_heading_line(trimmed) {
                pending_prose.clear();
                drafts.push(SectionDraft {
                    title,
                    guidance: Vec::new(),
                    items: Vec::new(),
                });
                continue;
            }
        }
        // Prose: instructions once the section has items, guidance before.
        match drafts.last_mut() {
            None => pending_prose.push(trimmed.to_string()),
            Some(section) => match section.items.last_mut() {
                Some(item) => item.instructions.push(trimmed.to_string()),
                None => section.guidance.push(trimmed.to_string()),
            },
        }
    }

    // Headings without items carry no checklist content.
    drafts.retain(|d| !d.items.is_empty());
    if drafts.is_empty() {
        return Err(Error::NoItemsFound { name: name.into() });
    }

    let sections = drafts
        .into_iter()
        .enumerate()
        .map(|(index, d)| ChecklistSection {
            title: d.title,
            index,
            items: d
                .items
                .into_iter()
                .map(|i| ChecklistItem {
                    id: i.id,
                    text: i.text,
                    instructions: join_prose(i.instructions),
                })
                .collect(),
            guidance_hint: join_prose(d.guidance),
        })
        .collect();
    ChecklistTemplate::new(name, None, sections)
}

fn join_prose(lines: Vec<String>) -> Option<String> {
    if lines.is_empty() {
        None
    } else {
        Some(lines.join("\n"))
    }
}

/// "3. text", "2a) text" — digits, optional single lowercase letter, "." or
/// ")", then non-empty text.
fn match_item_line(line: &str) -> Option<(&str, &str)> {
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == 0 {
        return None;
    }
    let mut j = i;
    if j < bytes.len() && bytes[j].is_ascii_lowercase() {
        j += 1;
    }
    if j >= bytes.len() || (bytes[j] != b'.' && bytes[j] != b')') {
        return None;
    }
    let rest = line[j + 1..].trim();
    if rest.is_empty() {
        return None;
    }
    Some((&line[..j], rest))
}

fn match_heading_line(line: &str) -> Option<String> {
    if let Some(stripped) = line.strip_prefix('#') {
        let title = stripped.trim_start_matches('#').trim();
        if title.is_empty() {
            return None;
        }
        return Some(title.to_string());
    }
    if is_section_number_line(line) || is_all_caps_line(line) {
        return Some(line.to_string());
    }
    None
}

/// "Section <number>:" or "Section <number>." with anything after.
fn is_section_number_line(line: &str) -> bool {
    let lower = line.to_ascii_lowercase();
    let Some(rest) = lower.strip_prefix("section") else {
        return false;
    };
    let rest = rest.trim_start();
    let digits = rest.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 || rest.len() == digits {
        return false;
    }
    matches!(rest.as_bytes()[digits], b':' | b'.')
}

fn is_all_caps_line(line: &str) -> bool {
    line.chars().count() >= 3
        && line.chars().any(|c| c.is_uppercase())
        && !line.chars().any(|c| c.is_lowercase())
}

const BUILTIN_VERSION: &str = "mini-1";

static BUILTINS: &[(&str, &str)] = &[
    ("CONSORT-mini", include_str!("../templates/CONSORT-mini.txt")),
    ("DEAL-mini", include_str!("../templates/DEAL-mini.txt")),
    ("PRISMA-mini", include_str!("../templates/PRISMA-mini.txt")),
];

/// Names of the templates shipped with the tool, lexicographically sorted.
/// The builtins are simplified stand-ins, not the official guideline texts.
pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(name, _)| *name).collect()
}

/// Load and parse a builtin template by name.
pub fn load_builtin(name: &str) -> Result<ChecklistTemplate> {
    let (_, source) = BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::TemplateNotFound { name: name.into() })?;
    let text = NormalizedText::from_raw(source);
    let parsed = parse_checklist(&text, name)?;
    ChecklistTemplate::new(name, Some(BUILTIN_VERSION.into()), parsed.sections)
}

/// Deterministic textual form: "#" headings, "id. text" item lines, guidance
/// and instruction lines indented two spaces. Parsing the output reproduces
/// the template's structure exactly.
pub fn canonical_serialize(template: &ChecklistTemplate) -> String {
    let mut out = String::new();
    for section in template.sections() {
        if section.index > 0 {
            out.push('\n');
        }
        out.push_str("# ");
        out.push_str(&section.title);
        out.push('\n');
        if let Some(hint) = &section.guidance_hint {
            for line in hint.lines() {
                out.push_str("  ");
                out.push_str(line);
                out.push('\n');
            }
        }
        for item in &section.items {
            out.push_str(&item.id);
            out.push_str(". ");
            out.push_str(&item.text);
            out.push('\n');
            if let Some(instructions) = &item.instructions {
                for line in instructions.lines() {
                    out.push_str("  ");
                    out.push_str(line);
                    out.push('\n');
                }
            }
        }
    }
    out
}
