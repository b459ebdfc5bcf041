//! checksupport: recommend the right reporting checklist for a scientific
//! manuscript and complete it with evidence-grounded, item-level answers.
//!
//! The work happens in four bounded inference stages against a pluggable
//! local language-model backend (an Ollama-compatible HTTP server, or a
//! scripted replay backend for deterministic runs):
//!
//! 1. recommendation — pick one checklist name from a candidate list, given
//!    a short manuscript excerpt;
//! 2. guidance — generate per-section extraction guidance (internal only);
//! 3. extraction — pull section-relevant passages from fixed-size
//!    manuscript windows;
//! 4. item completion — answer each checklist item from its section
//!    extract, or reply with an explicit `NOT REPORTED`.
//!
//! Supporting modules handle manuscript ingestion (PDF/DOCX/plain text),
//! checklist parsing, report rendering (Markdown/HTML/PDF), and the
//! evaluation metrics.

pub mod checklist;
pub mod cli;
pub mod error;
pub mod evaluate;
pub mod inference;
pub mod pipeline;
pub mod report;
pub mod text_ingest;

pub use error::{Error, Result};
