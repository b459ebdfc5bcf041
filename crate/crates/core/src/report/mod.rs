//! Render a completed checklist as Markdown (canonical), HTML (derived from
//! the Markdown), or PDF (generated from the HTML). Markdown output is
//! byte-deterministic for a given completed checklist, which is what the
//! golden tests pin down; PDF content is checked by extracted text, not
//! bytes.

mod pdf;

use std::str::FromStr;

use pulldown_cmark::{html, Options, Parser};

use crate::checklist::ChecklistTemplate;
use crate::error::{Error, Result};
use crate::pipeline::{CompletedChecklist, Recommendation, ResponseStatus};

/// Literal marker rendered for every item whose information was absent.
pub const NOT_REPORTED_MARKER: &str = "NOT REPORTED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Html,
    Pdf,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Html => "html",
            ReportFormat::Pdf => "pdf",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "html" => Ok(ReportFormat::Html),
            "pdf" => Ok(ReportFormat::Pdf),
            other => Err(Error::Usage {
                detail: format!("unknown report format \"{other}\" (expected md, html, or pdf)"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub item_id: String,
    pub item_text: String,
    pub status: ResponseStatus,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSection {
    pub title: String,
    pub rows: Vec<ReportRow>,
}

/// The report model every output format renders: a title, a provenance
/// metadata block, and one table of rows per section, in template order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportDocument {
    pub title: String,
    pub metadata: Vec<(String, String)>,
    pub sections: Vec<ReportSection>,
}

impl ReportDocument {
    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.sections.iter().flat_map(|s| s.rows.iter())
    }
}

/// Pair a completed checklist with its template, checking that they
/// correspond (same template name, same item ids in the same order).
pub fn build_document(
    completed: &CompletedChecklist,
    template: &ChecklistTemplate,
) -> Result<ReportDocument> {
    if completed.template_name != template.name() {
        return Err(Error::TemplateMismatch {
            detail: format!(
                "checklist was completed for \"{}\" but template is \"{}\"",
                completed.template_name,
                template.name()
            ),
        });
    }
    if completed.responses.len() != template.item_count() {
        return Err(Error::TemplateMismatch {
            detail: format!(
                "{} responses for {} template items",
                completed.responses.len(),
                template.item_count()
            ),
        });
    }
    let mut responses = completed.responses.iter();
    let mut sections = Vec::with_capacity(template.sections().len());
    for section in template.sections() {
        let mut rows = Vec::with_capacity(section.items.len());
        for item in &section.items {
            let response = responses.next().expect("length checked above");
            if response.item_id != item.id || response.section_index != section.index {
                return Err(Error::TemplateMismatch {
                    detail: format!(
                        "response for item \"{}\" does not match template item \"{}\" in section {}",
                        response.item_id, item.id, section.index
                    ),
                });
            }
            rows.push(ReportRow {
                item_id: item.id.clone(),
                item_text: item.text.clone(),
                status: response.status,
                answer: response.answer.clone(),
            });
        }
        sections.push(ReportSection {
            title: section.title.clone(),
            rows,
        });
    }

    let provenance = &completed.provenance;
    let mut metadata = vec![("Template".to_string(), completed.template_name.clone())];
    if let Some(version) = template.version() {
        metadata.push(("Template version".to_string(), version.to_string()));
    }
    if let Some(source) = &provenance.source_file {
        metadata.push(("Source".to_string(), source.clone()));
    }
    metadata.push(("Model".to_string(), provenance.model.clone()));
    metadata.push(("Backend".to_string(), provenance.backend.clone()));
    metadata.push((
        "Seed".to_string(),
        provenance
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string()),
    ));
    metadata.push((
        "Prompt versions".to_string(),
        provenance
            .prompt_versions
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", "),
    ));
    metadata.push(("Started".to_string(), provenance.started_at.clone()));
    metadata.push(("Finished".to_string(), provenance.finished_at.clone()));
    metadata.push((
        "Duration".to_string(),
        format!("{} ms", provenance.duration_ms),
    ));

    Ok(ReportDocument {
        title: format!("Checklist report: {}", completed.template_name),
        metadata,
        sections,
    })
}

/// Render a completed checklist in the requested format.
pub fn render(
    completed: &CompletedChecklist,
    template: &ChecklistTemplate,
    format: ReportFormat,
) -> Result<Vec<u8>> {
    let document = build_document(completed, template)?;
    match format {
        ReportFormat::Markdown => Ok(render_markdown(&document).into_bytes()),
        ReportFormat::Html => Ok(render_html(&document).into_bytes()),
        ReportFormat::Pdf => pdf::html_to_pdf(&render_html(&document)),
    }
}

/// Canonical Markdown: a title, a metadata list, and one table per section
/// with columns Item, Checklist text, Response, Status.
pub fn render_markdown(document: &ReportDocument) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {}\n", document.title));
    out.push('\n');
    for (key, value) in &document.metadata {
        out.push_str(&format!("- {key}: {value}\n"));
    }
    for section in &document.sections {
        out.push('\n');
        out.push_str(&format!("## {}\n", section.title));
        out.push('\n');
        out.push_str("| Item | Checklist text | Response | Status |\n");
        out.push_str("| --- | --- | --- | --- |\n");
        for row in &section.rows {
            let status = match row.status {
                ResponseStatus::Answered => "Answered",
                ResponseStatus::NotReported => NOT_REPORTED_MARKER,
            };
            out.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                cell(&row.item_id),
                cell(&row.item_text),
                cell(&row.answer),
                status
            ));
        }
    }
    out
}

/// Table cells must stay single-line and pipe-free.
fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace('\n', " ")
}

/// Deterministic Markdown-to-HTML transform with a minimal page wrapper.
pub fn render_html(document: &ReportDocument) -> String {
    let markdown = render_markdown(document);
    let parser = Parser::new_ext(&markdown, Options::ENABLE_TABLES);
    let mut body = String::new();
    html::push_html(&mut body, parser);
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>\nbody {{ font-family: sans-serif; margin: 2em; }}\ntable {{ border-collapse: collapse; }}\nth, td {{ border: 1px solid #999; padding: 4px 8px; text-align: left; }}\n</style>\n</head>\n<body>\n{}</body>\n</html>\n",
        escape_html(&document.title),
        body
    )
}

fn escape_html(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Exactly one newline-terminated line holding the chosen template name, so
/// the output is machine-parseable.
pub fn emit_recommendation(recommendation: &Recommendation) -> String {
    format!("{}\n", recommendation.chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checklist::parse_checklist;
    use crate::pipeline::{ItemResponse, Provenance};
    use crate::text_ingest::NormalizedText;
    use std::collections::BTreeMap;

    fn template() -> ChecklistTemplate {
        parse_checklist(
            &NormalizedText::from_raw("ALPHA\n1. first item\nBETA\n2. second item\n"),
            "T",
        )
        .unwrap()
    }

    fn provenance() -> Provenance {
        Provenance {
            model: "m".into(),
            backend: "scripted".into(),
            seed: Some(0),
            stage_configs: Vec::new(),
            prompt_versions: BTreeMap::from([("item".to_string(), "item/v1".to_string())]),
            started_at: "1970-01-01T00:00:00Z".into(),
            finished_at: "1970-01-01T00:00:00Z".into(),
            duration_ms: 0,
            source_file: Some("manuscript.txt".into()),
        }
    }

    fn completed() -> CompletedChecklist {
        CompletedChecklist {
            template_name: "T".into(),
            responses: vec![
                ItemResponse {
                    item_id: "1".into(),
                    status: ResponseStatus::Answered,
                    answer: "An answer with a | pipe.".into(),
                    section_index: 0,
                    raw_output: "An answer with a | pipe.".into(),
                },
                ItemResponse {
                    item_id: "2".into(),
                    status: ResponseStatus::NotReported,
                    answer: String::new(),
                    section_index: 1,
                    raw_output: "NOT REPORTED".into(),
                },
            ],
            provenance: provenance(),
        }
    }

    #[test]
    fn markdown_is_deterministic_and_complete() {
        let t = template();
        let c = completed();
        let first = render(&c, &t, ReportFormat::Markdown).unwrap();
        let second = render(&c, &t, ReportFormat::Markdown).unwrap();
        assert_eq!(first, second);
        let text = String::from_utf8(first).unwrap();
        assert!(text.contains("## ALPHA"));
        assert!(text.contains("## BETA"));
        assert!(text.contains("| 1 | first item | An answer with a \\| pipe. | Answered |"));
        assert!(text.contains("- Source: manuscript.txt"));
    }

    #[test]
    fn not_reported_row_has_marker_and_empty_response_cell() {
        let text = String::from_utf8(
            render(&completed(), &template(), ReportFormat::Markdown).unwrap(),
        )
        .unwrap();
        assert!(text.contains("| 2 | second item |  | NOT REPORTED |"));
    }

    #[test]
    fn row_count_equals_template_item_count() {
        let document = build_document(&completed(), &template()).unwrap();
        assert_eq!(document.rows().count(), template().item_count());
    }

    #[test]
    fn mismatched_template_is_rejected() {
        let mut wrong_name = completed();
        wrong_name.template_name = "OTHER".into();
        assert!(matches!(
            build_document(&wrong_name, &template()),
            Err(Error::TemplateMismatch { .. })
        ));

        let mut wrong_id = completed();
        wrong_id.responses[0].item_id = "9".into();
        assert!(matches!(
            build_document(&wrong_id, &template()),
            Err(Error::TemplateMismatch { .. })
        ));

        let mut short = completed();
        short.responses.pop();
        assert!(matches!(
            build_document(&short, &template()),
            Err(Error::TemplateMismatch { .. })
        ));
    }

    /// Pull the text content of every <td> cell out of rendered HTML.
    fn html_cells(html: &str) -> Vec<String> {
        let mut cells = Vec::new();
        let mut rest = html;
        while let Some(start) = rest.find("<td>") {
            let after = &rest[start + 4..];
            let end = after.find("</td>").expect("closed cell");
            cells.push(unescape(&after[..end]));
            rest = &after[end..];
        }
        cells
    }

    fn unescape(s: &str) -> String {
        s.replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">")
            .replace("&quot;", "\"")
            .replace("&#39;", "'")
    }

    #[test]
    fn html_preserves_row_content() {
        let t = template();
        let c = completed();
        let document = build_document(&c, &t).unwrap();
        let html = render_html(&document);
        let cells = html_cells(&html);
        let mut expected = Vec::new();
        for row in document.rows() {
            expected.push(row.item_id.clone());
            expected.push(row.item_text.clone());
            expected.push(row.answer.clone());
            expected.push(match row.status {
                ResponseStatus::Answered => "Answered".to_string(),
                ResponseStatus::NotReported => NOT_REPORTED_MARKER.to_string(),
            });
        }
        assert_eq!(cells, expected);
    }

    #[test]
    fn pdf_contains_every_item_id() {
        let bytes = render(&completed(), &template(), ReportFormat::Pdf).unwrap();
        assert!(bytes.starts_with(b"%PDF-1.7"));
        let extracted = pdf_extract::extract_text_from_mem(&bytes).unwrap();
        let squashed: String = extracted.split_whitespace().collect::<Vec<_>>().join(" ");
        for row in build_document(&completed(), &template()).unwrap().rows() {
            assert!(
                squashed.contains(&format!("Item {}:", row.item_id)),
                "missing item {} in PDF text: {squashed}",
                row.item_id
            );
        }
        assert!(squashed.contains("NOT REPORTED"));
    }

    #[test]
    fn recommendation_is_one_line() {
        let recommendation = Recommendation {
            chosen: "PRISMA-mini".into(),
            raw_output: "prisma-mini.".into(),
            excerpt_chars: 10,
        };
        assert_eq!(emit_recommendation(&recommendation), "PRISMA-mini\n");
        let spaced = Recommendation {
            chosen: "Not applicable".into(),
            raw_output: "x".into(),
            excerpt_chars: 1,
        };
        assert_eq!(emit_recommendation(&spaced), "Not applicable\n");
    }
}
