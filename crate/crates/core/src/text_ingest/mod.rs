//! Manuscript ingestion: format detection, text extraction, normalization,
//! truncation, and fixed-size windowing.
//!
//! All operations are pure given immutable inputs. The normalized form is the
//! canonical representation every later stage works on: LF newlines only, no
//! control characters besides newline, single spaces, at most two consecutive
//! newlines, trimmed ends. Offsets and lengths throughout this module count
//! Unicode scalar values (chars), not bytes.

mod docx;
mod pdf;

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Supported manuscript source formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocFormat {
    Pdf,
    Docx,
    Plain,
}

impl DocFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            DocFormat::Pdf => "pdf",
            DocFormat::Docx => "docx",
            DocFormat::Plain => "plain",
        }
    }
}

/// A document on disk, with its detected format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDocument {
    pub path: PathBuf,
    pub format: DocFormat,
    pub size_bytes: u64,
}

impl SourceDocument {
    /// Stat the file and detect its format from the extension.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let format = detect_format(path)?;
        let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
        Ok(SourceDocument {
            path: path.to_path_buf(),
            format,
            size_bytes: meta.len(),
        })
    }
}

/// Map a file extension (case-insensitive) to a format.
///
/// `.pdf` is PDF, `.docx` is DOCX, `.txt`/`.text` are plain text. Anything
/// else is `UnsupportedFormat`.
pub fn detect_format(path: impl AsRef<Path>) -> Result<DocFormat> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "pdf" => Ok(DocFormat::Pdf),
        "docx" => Ok(DocFormat::Docx),
        "txt" | "text" => Ok(DocFormat::Plain),
        _ => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
        }),
    }
}

/// Cleaned manuscript text plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedText {
    content: String,
    char_count: usize,
    source: Option<SourceDocument>,
}

impl NormalizedText {
    /// Normalize a raw string with no file provenance.
    pub fn from_raw(raw: &str) -> Self {
        let content = normalize(raw);
        let char_count = content.chars().count();
        NormalizedText {
            content,
            char_count,
            source: None,
        }
    }

    fn with_source(raw: &str, source: SourceDocument) -> Self {
        let mut text = Self::from_raw(raw);
        text.source = Some(source);
        text
    }

    pub fn content(&self) -> &str {
        &self.content
    }

    /// Length of `content` in chars.
    pub fn char_count(&self) -> usize {
        self.char_count
    }

    pub fn source(&self) -> Option<&SourceDocument> {
        self.source.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.char_count == 0
    }
}

/// Extract and normalize the text of a document.
///
/// Plain text is read verbatim and normalized; PDF and DOCX go through a
/// format-specific extractor first. Empty results are a hard error so a
/// pipeline run can never silently process nothing.
pub fn extract_text(doc: &SourceDocument) -> Result<NormalizedText> {
    if doc.size_bytes == 0 {
        return Err(Error::EmptyDocument {
            path: doc.path.clone(),
        });
    }
    let raw = match doc.format {
        DocFormat::Plain => {
            let bytes = fs::read(&doc.path).map_err(|e| Error::io(&doc.path, e))?;
            String::from_utf8_lossy(&bytes).into_owned()
        }
        DocFormat::Pdf => pdf::extract(&doc.path)?,
        DocFormat::Docx => docx::extract(&doc.path)?,
    };
    let text = NormalizedText::with_source(&raw, doc.clone());
    if text.is_empty() {
        return Err(Error::EmptyDocument {
            path: doc.path.clone(),
        });
    }
    Ok(text)
}

/// Convenience: `SourceDocument::open` followed by `extract_text`.
pub fn extract_path(path: impl AsRef<Path>) -> Result<NormalizedText> {
    let doc = SourceDocument::open(path)?;
    extract_text(&doc)
}

/// Normalize raw text.
///
/// CRLF and lone CR become LF, tabs become spaces, runs of spaces collapse to
/// one, runs of three or more newlines collapse to two, non-newline control
/// characters are dropped, and the ends are trimmed. Idempotent.
pub fn normalize(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        let c = match c {
            '\r' => {
                if chars.peek() == Some(&'\n') {
                    chars.next();
                }
                '\n'
            }
            '\t' => ' ',
            other => other,
        };
        match c {
            ' ' => {
                if !out.ends_with(' ') {
                    out.push(' ');
                }
            }
            '\n' => {
                if !out.ends_with("\n\n") {
                    out.push('\n');
                }
            }
            c if c.is_control() => {}
            c => out.push(c),
        }
    }
    out.trim().to_string()
}

/// Longest prefix of at most `limit` chars that ends at a whitespace
/// boundary; falls back to a hard cut when the prefix holds no whitespace.
pub fn head_excerpt(text: &NormalizedText, limit: usize) -> &str {
    head_excerpt_str(&text.content, text.char_count, limit)
}

fn head_excerpt_str(content: &str, char_count: usize, limit: usize) -> &str {
    if limit == 0 {
        return "";
    }
    if char_count <= limit {
        return content;
    }
    let mut last_ws_byte = None;
    let mut limit_byte = content.len();
    for (char_idx, (byte_idx, ch)) in content.char_indices().enumerate() {
        if char_idx == limit {
            if ch.is_whitespace() {
                // The cut already falls on a word boundary.
                return content[..byte_idx].trim_end();
            }
            limit_byte = byte_idx;
            break;
        }
        if ch.is_whitespace() {
            last_ws_byte = Some(byte_idx);
        }
    }
    match last_ws_byte {
        Some(b) => content[..b].trim_end(),
        None => &content[..limit_byte],
    }
}

/// One fixed-size slice of a manuscript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextWindow {
    /// 0-based ordinal.
    pub index: usize,
    /// Start char offset, inclusive.
    pub start: usize,
    /// End char offset, exclusive.
    pub end: usize,
    pub content: String,
}

/// Split text into overlapping windows of `window_size` chars.
///
/// Window k starts at `k * (window_size - overlap)`; the last window ends at
/// `char_count`. Empty text yields no windows.
pub fn windows(
    text: &NormalizedText,
    window_size: usize,
    overlap: usize,
) -> Result<Vec<TextWindow>> {
    if window_size == 0 || overlap >= window_size {
        return Err(Error::InvalidWindowParams {
            window_size,
            overlap,
        });
    }
    let total = text.char_count;
    let mut out = Vec::new();
    if total == 0 {
        return Ok(out);
    }
    let byte_offsets: Vec<usize> = text.content.char_indices().map(|(b, _)| b).collect();
    let byte_at = |char_idx: usize| {
        if char_idx >= total {
            text.content.len()
        } else {
            byte_offsets[char_idx]
        }
    };
    let stride = window_size - overlap;
    let mut start = 0;
    let mut index = 0;
    loop {
        let end = (start + window_size).min(total);
        out.push(TextWindow {
            index,
            start,
            end,
            content: text.content[byte_at(start)..byte_at(end)].to_string(),
        });
        if end == total {
            break;
        }
        start += stride;
        index += 1;
    }
    Ok(out)
}

/// Reassemble the source text from its windows by dropping each window's
/// overlap with its predecessor. Used by tests to check coverage.
pub fn reconstruct_from_windows(windows: &[TextWindow]) -> String {
    let mut out = String::new();
    let mut covered_to = 0usize;
    for w in windows {
        let skip = covered_to.saturating_sub(w.start);
        out.extend(w.content.chars().skip(skip));
        covered_to = w.end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn detect_format_by_extension() {
        assert_eq!(detect_format("paper.PDF").unwrap(), DocFormat::Pdf);
        assert_eq!(detect_format("draft.docx").unwrap(), DocFormat::Docx);
        assert_eq!(detect_format("a/b/notes.TXT").unwrap(), DocFormat::Plain);
        assert_eq!(detect_format("notes.text").unwrap(), DocFormat::Plain);
        assert!(matches!(
            detect_format("notes.md"),
            Err(Error::UnsupportedFormat { .. })
        ));
        assert!(matches!(
            detect_format("no_extension"),
            Err(Error::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn normalize_line_endings() {
        assert_eq!(normalize("a\r\nb"), "a\nb");
        assert_eq!(normalize("a\rb"), "a\nb");
    }

    #[test]
    fn normalize_whitespace_collapse() {
        assert_eq!(normalize("a  \t b"), "a b");
        assert_eq!(normalize("a\n\n\n\nb"), "a\n\nb");
        assert_eq!(normalize("  padded  "), "padded");
    }

    #[test]
    fn normalize_drops_control_chars() {
        assert_eq!(normalize("a\u{0}b\u{7}c"), "abc");
    }

    #[test]
    fn head_excerpt_under_limit_is_unchanged() {
        let t = NormalizedText::from_raw("short text");
        assert_eq!(head_excerpt(&t, 2000), "short text");
    }

    #[test]
    fn head_excerpt_backs_off_to_whitespace() {
        let t = NormalizedText::from_raw("alpha beta gamma");
        assert_eq!(t.char_count(), 16);
        assert_eq!(head_excerpt(&t, 11), "alpha beta");
    }

    #[test]
    fn head_excerpt_zero_limit() {
        let t = NormalizedText::from_raw("anything");
        assert_eq!(head_excerpt(&t, 0), "");
    }

    #[test]
    fn head_excerpt_hard_cut_without_whitespace() {
        let t = NormalizedText::from_raw("abcdefghij");
        assert_eq!(head_excerpt(&t, 4), "abcd");
    }

    #[test]
    fn windows_match_stride_arithmetic() {
        let t = NormalizedText::from_raw(&"x".repeat(12_000));
        let ws = windows(&t, 5_000, 500).unwrap();
        let starts: Vec<usize> = ws.iter().map(|w| w.start).collect();
        let ends: Vec<usize> = ws.iter().map(|w| w.end).collect();
        assert_eq!(starts, vec![0, 4_500, 9_000]);
        assert_eq!(ends, vec![5_000, 9_500, 12_000]);
    }

    #[test]
    fn windows_single_short_window() {
        let t = NormalizedText::from_raw(&"y".repeat(3_000));
        let ws = windows(&t, 5_000, 500).unwrap();
        assert_eq!(ws.len(), 1);
        assert_eq!((ws[0].start, ws[0].end), (0, 3_000));
    }

    #[test]
    fn windows_empty_text() {
        let t = NormalizedText::from_raw("");
        assert!(windows(&t, 5_000, 500).unwrap().is_empty());
    }

    #[test]
    fn windows_reject_bad_params() {
        let t = NormalizedText::from_raw("abc");
        assert!(matches!(
            windows(&t, 0, 0),
            Err(Error::InvalidWindowParams { .. })
        ));
        assert!(matches!(
            windows(&t, 10, 10),
            Err(Error::InvalidWindowParams { .. })
        ));
    }

    #[test]
    fn window_content_matches_slice() {
        let t = NormalizedText::from_raw("hello wide world of windows");
        for w in windows(&t, 10, 3).unwrap() {
            let expect: String = t
                .content()
                .chars()
                .skip(w.start)
                .take(w.end - w.start)
                .collect();
            assert_eq!(w.content, expect);
            assert!(w.end - w.start <= 10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn normalize_is_idempotent(raw in ".{0,400}") {
            let once = normalize(&raw);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn normalize_never_grows(raw in ".{0,400}") {
            let out = normalize(&raw);
            prop_assert!(out.chars().count() <= raw.chars().count());
        }

        #[test]
        fn normalized_invariants_hold(raw in ".{0,400}") {
            let out = normalize(&raw);
            prop_assert!(!out.contains('\r'));
            prop_assert!(!out.contains("  "));
            prop_assert!(!out.contains("\n\n\n"));
            prop_assert!(out.chars().all(|c| c == '\n' || !c.is_control()));
            prop_assert_eq!(out.trim(), &out);
        }

        #[test]
        fn windows_reconstruct_source(
            raw in "[a-z \n]{0,300}",
            window_size in 1usize..40,
            overlap_frac in 0.0f64..1.0,
        ) {
            let overlap = ((window_size as f64) * overlap_frac) as usize;
            prop_assume!(overlap < window_size);
            let t = NormalizedText::from_raw(&raw);
            let ws = windows(&t, window_size, overlap).unwrap();
            prop_assert_eq!(reconstruct_from_windows(&ws), t.content());
            for w in &ws {
                prop_assert!(w.end - w.start <= window_size);
            }
            for pair in ws.windows(2) {
                prop_assert_eq!(pair[1].start, pair[0].start + (window_size - overlap));
            }
            if let Some(last) = ws.last() {
                prop_assert_eq!(last.end, t.char_count());
            }
        }

        #[test]
        fn head_excerpt_is_bounded_prefix(raw in "[a-z ]{0,120}", limit in 0usize..140) {
            let t = NormalizedText::from_raw(&raw);
            let head = head_excerpt(&t, limit);
            prop_assert!(t.content().starts_with(head));
            prop_assert!(head.chars().count() <= limit);
        }
    }
}
