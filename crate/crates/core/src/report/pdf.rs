//! PDF 1.7 output, produced from the rendered HTML. The HTML is our own
//! deterministic output, so a small tag walker suffices: headings, metadata
//! bullets, and table rows become laid-out text lines with selectable text
//! (built-in Type1 fonts, uncompressed content streams).

use lopdf::{dictionary, Document, Object, Stream};

use crate::error::{Error, Result};

const PAGE_WIDTH: f64 = 595.0;
const PAGE_HEIGHT: f64 = 842.0;
const MARGIN: f64 = 50.0;
const BODY_SIZE: f64 = 10.0;
const H1_SIZE: f64 = 16.0;
const H2_SIZE: f64 = 13.0;
const BODY_WRAP: usize = 92;

#[derive(Debug, Clone, PartialEq)]
enum Line {
    H1(String),
    H2(String),
    Bullet(String),
    /// "Item {id}: {text}" row header.
    ItemHead(String),
    /// Indented row detail (answer or status marker).
    Detail(String),
    Blank,
}

pub(crate) fn html_to_pdf(html: &str) -> Result<Vec<u8>> {
    let lines = html_to_lines(html);
    write_pdf(&lines)
}

/// Flatten our report HTML into display lines. Table rows follow the fixed
/// column layout [Item, Checklist text, Response, Status]; anything else
/// falls back to a pipe-joined row.
fn html_to_lines(html: &str) -> Vec<Line> {
    let mut lines = Vec::new();
    let mut rest = html;
    while let Some(open) = rest.find('<') {
        rest = &rest[open..];
        if let Some(inner) = tag_block(&mut rest, "h1") {
            lines.push(Line::H1(inner));
            lines.push(Line::Blank);
        } else if let Some(inner) = tag_block(&mut rest, "h2") {
            lines.push(Line::Blank);
            lines.push(Line::H2(inner));
            lines.push(Line::Blank);
        } else if let Some(inner) = tag_block(&mut rest, "li") {
            lines.push(Line::Bullet(inner));
        } else if let Some(row) = row_block(&mut rest) {
            match row {
                RowKind::Header => {}
                RowKind::Data(cells) => {
                    if cells.len() == 4 {
                        lines.push(Line::ItemHead(format!("Item {}: {}", cells[0], cells[1])));
                        let detail = match (cells[2].is_empty(), cells[3].as_str()) {
                            (true, status) => status.to_string(),
                            (false, status) => format!("{status}: {}", cells[2]),
                        };
                        lines.push(Line::Detail(detail));
                    } else {
                        lines.push(Line::Detail(cells.join(" | ")));
                    }
                }
            }
        } else {
            rest = &rest[1..];
        }
    }
    lines
}

/// If `rest` starts with `<tag>`, consume through `</tag>` and return the
/// unescaped inner text.
fn tag_block(rest: &mut &str, tag: &str) -> Option<String> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let stripped = rest.strip_prefix(open.as_str())?;
    let end = stripped.find(close.as_str())?;
    let inner = unescape_entities(&stripped[..end]);
    *rest = &stripped[end + close.len()..];
    Some(inner)
}

enum RowKind {
    Header,
    Data(Vec<String>),
}

/// If `rest` starts with `<tr>`, consume the row and collect its cells.
fn row_block(rest: &mut &str) -> Option<RowKind> {
    let stripped = rest.strip_prefix("<tr>")?;
    let end = stripped.find("</tr>")?;
    let mut row = &stripped[..end];
    let mut cells = Vec::new();
    let mut header = false;
    loop {
        let th = row.find("<th>");
        let td = row.find("<td>");
        let (pos, tag) = match (th, td) {
            (Some(a), Some(b)) if a < b => (a, "th"),
            (Some(a), None) => (a, "th"),
            (_, Some(b)) => (b, "td"),
            (None, None) => break,
        };
        header |= tag == "th";
        let after = &row[pos + 4..];
        let close = format!("</{tag}>");
        let cell_end = after.find(close.as_str())?;
        cells.push(unescape_entities(&after[..cell_end]));
        row = &after[cell_end + close.len()..];
    }
    *rest = &stripped[end + "</tr>".len()..];
    Some(if header {
        RowKind::Header
    } else {
        RowKind::Data(cells)
    })
}

fn unescape_entities(text: &str) -> String {
    text.replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
}

/// Greedy word wrap on spaces; unbroken runs longer than `width` are cut.
fn wrap(text: &str, width: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for word in text.split(' ') {
        let mut word = word;
        while word.chars().count() > width {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            let cut = word.char_indices().nth(width).map(|(b, _)| b).unwrap();
            out.push(word[..cut].to_string());
            word = &word[cut..];
        }
        let needed = word.chars().count() + if current.is_empty() { 0 } else { 1 };
        if current.chars().count() + needed > width && !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(word);
    }
    if !current.is_empty() {
        out.push(current);
    }
    if out.is_empty() {
        out.push(String::new());
    }
    out
}

struct PageBuilder {
    content: String,
    y: f64,
    pages: Vec<String>,
}

impl PageBuilder {
    fn new() -> Self {
        PageBuilder {
            content: String::new(),
            y: PAGE_HEIGHT - MARGIN,
            pages: Vec::new(),
        }
    }

    fn advance(&mut self, leading: f64) {
        if self.y - leading < MARGIN {
            self.pages.push(std::mem::take(&mut self.content));
            self.y = PAGE_HEIGHT - MARGIN;
        }
        self.y -= leading;
    }

    fn text(&mut self, text: &str, font: &str, size: f64, indent: f64) {
        self.advance(size * 1.3);
        self.content.push_str(&format!(
            "BT /{font} {size} Tf 1 0 0 1 {x} {y:.1} Tm (",
            x = MARGIN + indent,
            y = self.y
        ));
        self.content.push_str(&pdf_escape(text));
        self.content.push_str(") Tj ET\n");
    }

    fn finish(mut self) -> Vec<String> {
        if !self.content.is_empty() || self.pages.is_empty() {
            self.pages.push(self.content);
        }
        self.pages
    }
}

/// Escape a line for a PDF literal string (WinAnsi encoding). Characters
/// outside Latin-1 degrade to '?'.
fn pdf_escape(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        match c {
            '(' | ')' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 => out.push(' '),
            c if (c as u32) < 0x7F => out.push(c),
            c if (0xA0..=0xFF).contains(&(c as u32)) => {
                out.push_str(&format!("\\{:03o}", c as u32));
            }
            _ => out.push('?'),
        }
    }
    out
}

fn write_pdf(lines: &[Line]) -> Result<Vec<u8>> {
    let mut builder = PageBuilder::new();
    for line in lines {
        match line {
            Line::H1(text) => builder.text(text, "F2", H1_SIZE, 0.0),
            Line::H2(text) => builder.text(text, "F2", H2_SIZE, 0.0),
            Line::Bullet(text) => {
                for (i, piece) in wrap(text, BODY_WRAP - 2).iter().enumerate() {
                    let prefix = if i == 0 { "- " } else { "  " };
                    builder.text(&format!("{prefix}{piece}"), "F1", BODY_SIZE, 0.0);
                }
            }
            Line::ItemHead(text) => {
                builder.advance(4.0);
                for piece in wrap(text, BODY_WRAP) {
                    builder.text(&piece, "F2", BODY_SIZE, 0.0);
                }
            }
            Line::Detail(text) => {
                for piece in wrap(text, BODY_WRAP - 2) {
                    builder.text(&piece, "F1", BODY_SIZE, 12.0);
                }
            }
            Line::Blank => builder.advance(BODY_SIZE),
        }
    }
    let pages = builder.finish();

    let mut doc = Document::with_version("1.7");
    let pages_id = doc.new_object_id();
    let body_font = doc.add_object(dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => "Helvetica",
        "Encoding" => "WinAnsiEncoding",
    });
    let bold_font = doc.add_object(dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => "Helvetica-Bold",
        "Encoding" => "WinAnsiEncoding",
    });
    let resources_id = doc.add_object(dictionary! {
        "Font" => dictionary! {
            "F1" => body_font,
            "F2" => bold_font,
        },
    });
    let kids: Vec<Object> = pages
        .iter()
        .map(|content| {
            let stream_id = doc.add_object(Stream::new(
                dictionary! {},
                content.clone().into_bytes(),
            ));
            doc.add_object(dictionary! {
                "Type" => "Page",
                "Parent" => pages_id,
                "Contents" => stream_id,
            })
            .into()
        })
        .collect();
    let count = kids.len() as i64;
    doc.objects.insert(
        pages_id,
        Object::Dictionary(dictionary! {
            "Type" => "Pages",
            "Kids" => kids,
            "Count" => count,
            "Resources" => resources_id,
            "MediaBox" => vec![0.into(), 0.into(), PAGE_WIDTH.into(), PAGE_HEIGHT.into()],
        }),
    );
    let catalog_id = doc.add_object(dictionary! {
        "Type" => "Catalog",
        "Pages" => pages_id,
    });
    doc.trailer.set("Root", catalog_id);

    let mut bytes = Vec::new();
    doc.save_to(&mut bytes).map_err(|e| Error::RenderFailed {
        detail: e.to_string(),
    })?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_respects_width() {
        let wrapped = wrap("one two three four five six seven eight", 10);
        assert!(wrapped.iter().all(|l| l.chars().count() <= 10));
        assert_eq!(wrapped.join(" "), "one two three four five six seven eight");
    }

    #[test]
    fn wrap_cuts_unbroken_runs() {
        let wrapped = wrap(&"x".repeat(25), 10);
        assert_eq!(wrapped, vec!["x".repeat(10), "x".repeat(10), "x".repeat(5)]);
    }

    #[test]
    fn html_walker_extracts_rows() {
        let html = "<h1>Title</h1><ul><li>Key: value</li></ul><h2>SEC</h2>\
                    <table><thead><tr><th>Item</th><th>Checklist text</th><th>Response</th><th>Status</th></tr></thead>\
                    <tbody><tr><td>1a</td><td>text here</td><td>an answer</td><td>Answered</td></tr>\
                    <tr><td>2</td><td>other</td><td></td><td>NOT REPORTED</td></tr></tbody></table>";
        let lines = html_to_lines(html);
        assert!(lines.contains(&Line::H1("Title".into())));
        assert!(lines.contains(&Line::Bullet("Key: value".into())));
        assert!(lines.contains(&Line::ItemHead("Item 1a: text here".into())));
        assert!(lines.contains(&Line::Detail("Answered: an answer".into())));
        assert!(lines.contains(&Line::Detail("NOT REPORTED".into())));
    }

    #[test]
    fn pdf_escape_handles_specials() {
        assert_eq!(pdf_escape("a(b)c\\d"), "a\\(b\\)c\\\\d");
        assert_eq!(pdf_escape("café"), "caf\\351");
        assert_eq!(pdf_escape("π"), "?");
    }
}
