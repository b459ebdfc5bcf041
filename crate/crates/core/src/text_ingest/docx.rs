//! DOCX paragraph extraction. Reads `word/document.xml` from the archive and
//! flattens body content in reading order: one line per paragraph, tables
//! row-wise with cells joined by " | ".

use std::io::Read;
use std::path::Path;

use roxmltree::Node;

use crate::error::{Error, Result};

pub fn extract(path: &Path) -> Result<String> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut archive = zip::ZipArchive::new(file).map_err(|e| fail(path, e))?;
    let mut xml = String::new();
    archive
        .by_name("word/document.xml")
        .map_err(|e| fail(path, e))?
        .read_to_string(&mut xml)
        .map_err(|e| fail(path, e))?;
    let doc = roxmltree::Document::parse(&xml).map_err(|e| fail(path, e))?;

    let body = doc
        .root_element()
        .children()
        .find(|n| n.is_element() && n.tag_name().name() == "body")
        .ok_or_else(|| fail(path, "document.xml has no body element"))?;

    let mut lines = Vec::new();
    for node in body.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "p" => lines.push(text_of(node)),
            "tbl" => flatten_table(node, &mut lines),
            _ => {}
        }
    }
    Ok(lines.join("\n"))
}

fn fail(path: &Path, detail: impl ToString) -> Error {
    Error::ExtractionFailed {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    }
}

/// Concatenated text runs of a node.
fn text_of(node: Node) -> String {
    let mut out = String::new();
    for t in node
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "t")
    {
        if let Some(text) = t.text() {
            out.push_str(text);
        }
    }
    out
}

/// One line per table row, cells joined by " | ". Nested tables flatten into
/// their containing cell.
fn flatten_table(table: Node, lines: &mut Vec<String>) {
    for row in table
        .children()
        .filter(|n| n.is_element() && n.tag_name().name() == "tr")
    {
        let cells: Vec<String> = row
            .children()
            .filter(|n| n.is_element() && n.tag_name().name() == "tc")
            .map(text_of)
            .collect();
        lines.push(cells.join(" | "));
    }
}
