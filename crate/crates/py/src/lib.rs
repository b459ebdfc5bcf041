//! Python bindings for checksupport: text ingestion, checklist templates,
//! backends, the staged pipeline, report rendering, and evaluation metrics.
//!
//! Build with `cargo build -p checksupport-py`, then import the produced
//! cdylib as `_checksupport` (see python/smoke_test.py).

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::exceptions::{PyConnectionError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList};

use checksupport::checklist;
use checksupport::error::{EXIT_BACKEND, EXIT_EVAL};
use checksupport::evaluate;
use checksupport::inference::{self, Backend as BackendTrait};
use checksupport::pipeline::{ChecklistPipeline, PipelineOptions, ResponseStatus};
use checksupport::report::{self, ReportFormat};
use checksupport::text_ingest;

fn to_py_err(e: checksupport::Error) -> PyErr {
    match e.exit_code() {
        EXIT_BACKEND => PyConnectionError::new_err(e.to_string()),
        EXIT_EVAL => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Normalize raw text: LF newlines, single spaces, at most two consecutive
/// newlines, trimmed ends.
#[pyfunction]
fn normalize(raw: &str) -> String {
    text_ingest::normalize(raw)
}

/// Longest prefix of at most `limit` chars ending at a whitespace boundary.
#[pyfunction]
fn head_excerpt(text: &str, limit: usize) -> String {
    let normalized = text_ingest::NormalizedText::from_raw(text);
    text_ingest::head_excerpt(&normalized, limit).to_string()
}

/// Fixed-size windows over the normalized text, as
/// (index, start, end, content) tuples.
#[pyfunction]
fn windows(
    text: &str,
    window_size: usize,
    overlap: usize,
) -> PyResult<Vec<(usize, usize, usize, String)>> {
    let normalized = text_ingest::NormalizedText::from_raw(text);
    let list = text_ingest::windows(&normalized, window_size, overlap).map_err(to_py_err)?;
    Ok(list
        .into_iter()
        .map(|w| (w.index, w.start, w.end, w.content))
        .collect())
}

/// Extract and normalize the text of a pdf, docx, or txt file.
#[pyfunction]
fn extract_text(path: &str) -> PyResult<String> {
    let text = text_ingest::extract_path(path).map_err(to_py_err)?;
    Ok(text.content().to_string())
}

/// "pdf", "docx", or "plain" for a supported path.
#[pyfunction]
fn detect_format(path: &str) -> PyResult<String> {
    let format = text_ingest::detect_format(path).map_err(to_py_err)?;
    Ok(format.as_str().to_string())
}

/// Names of the builtin checklist templates, sorted.
#[pyfunction]
fn builtin_names() -> Vec<String> {
    checklist::builtin_names()
        .iter()
        .map(|n| n.to_string())
        .collect()
}

/// The default per-stage inference parameters.
#[pyfunction]
fn default_stage_configs(py: Python<'_>) -> PyResult<Py<PyDict>> {
    let out = PyDict::new(py);
    for (stage, config) in inference::default_stage_configs() {
        let entry = PyDict::new(py);
        entry.set_item("temperature", config.temperature)?;
        entry.set_item("context_limit_chars", config.context_limit_chars)?;
        entry.set_item("stop", config.stop.clone())?;
        entry.set_item("min_extract_chars", config.min_extract_chars)?;
        let name = match stage {
            inference::Stage::Recommend => "recommend",
            inference::Stage::Guidance => "guidance",
            inference::Stage::Extract => "extract",
            inference::Stage::ItemAnswer => "item_answer",
        };
        out.set_item(name, entry)?;
    }
    Ok(out.into())
}

/// A checklist template: builtin, parsed from text, or loaded from a file.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct ChecklistTemplate {
    inner: checklist::ChecklistTemplate,
}

#[pymethods]
impl ChecklistTemplate {
    #[staticmethod]
    fn load_builtin(name: &str) -> PyResult<Self> {
        Ok(ChecklistTemplate {
            inner: checklist::load_builtin(name).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str, name: &str) -> PyResult<Self> {
        let normalized = text_ingest::NormalizedText::from_raw(text);
        Ok(ChecklistTemplate {
            inner: checklist::parse_checklist(&normalized, name).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = text_ingest::extract_path(path).map_err(to_py_err)?;
        let name = std::path::Path::new(path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("checklist")
            .to_string();
        Ok(ChecklistTemplate {
            inner: checklist::parse_checklist(&text, &name).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn version(&self) -> Option<String> {
        self.inner.version().map(|v| v.to_string())
    }

    fn section_titles(&self) -> Vec<String> {
        self.inner
            .sections()
            .iter()
            .map(|s| s.title.clone())
            .collect()
    }

    fn item_ids(&self) -> Vec<String> {
        self.inner
            .flat_items()
            .map(|(_, item)| item.id.clone())
            .collect()
    }

    fn item_count(&self) -> usize {
        self.inner.item_count()
    }

    /// Sections as dicts: {"title", "index", "guidance_hint", "items":
    /// [{"id", "text", "instructions"}]}.
    fn sections(&self, py: Python<'_>) -> PyResult<Py<PyList>> {
        let out = PyList::empty(py);
        for section in self.inner.sections() {
            let entry = PyDict::new(py);
            entry.set_item("title", &section.title)?;
            entry.set_item("index", section.index)?;
            entry.set_item("guidance_hint", &section.guidance_hint)?;
            let items = PyList::empty(py);
            for item in &section.items {
                let item_entry = PyDict::new(py);
                item_entry.set_item("id", &item.id)?;
                item_entry.set_item("text", &item.text)?;
                item_entry.set_item("instructions", &item.instructions)?;
                items.append(item_entry)?;
            }
            entry.set_item("items", items)?;
            out.append(entry)?;
        }
        Ok(out.into())
    }

    /// Deterministic canonical text form; parsing it back reproduces the
    /// structure.
    fn serialize(&self) -> String {
        checklist::canonical_serialize(&self.inner)
    }
}

/// A generation backend: HTTP (Ollama-compatible) or scripted replay.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Backend {
    inner: Arc<dyn BackendTrait>,
}

#[pymethods]
impl Backend {
    #[staticmethod]
    fn http(base_url: &str) -> Self {
        Backend {
            inner: Arc::new(inference::HttpBackend::new(base_url)),
        }
    }

    #[staticmethod]
    fn scripted(script: BTreeMap<String, String>) -> PyResult<Self> {
        Ok(Backend {
            inner: Arc::new(inference::ScriptedBackend::new(script).map_err(to_py_err)?),
        })
    }

    #[staticmethod]
    fn scripted_from_file(path: &str) -> PyResult<Self> {
        Ok(Backend {
            inner: Arc::new(inference::ScriptedBackend::from_json_file(path).map_err(to_py_err)?),
        })
    }

    #[getter]
    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }

    /// One raw generation call.
    #[pyo3(signature = (model, prompt, temperature=0.2, stop=None, seed=0))]
    fn generate(
        &self,
        model: &str,
        prompt: &str,
        temperature: f64,
        stop: Option<Vec<String>>,
        seed: Option<i64>,
    ) -> PyResult<String> {
        let request = inference::GenerationRequest {
            model: model.to_string(),
            prompt: prompt.to_string(),
            temperature,
            stop: stop.unwrap_or_default(),
            seed,
            max_tokens: None,
        };
        let response = inference::generate(self.inner.as_ref(), &request).map_err(to_py_err)?;
        Ok(response.text)
    }
}

fn make_options(model: Option<String>, seed: Option<i64>) -> PipelineOptions {
    let mut options = PipelineOptions::default();
    if let Some(model) = model {
        options.model = model;
    }
    if let Some(seed) = seed {
        options.seed = Some(seed);
    }
    options
}

/// Recommend one checklist name from `candidates` for the manuscript text.
/// Returns {"chosen", "raw_output", "excerpt_chars"}.
#[pyfunction]
#[pyo3(signature = (manuscript, candidates, backend, model=None, seed=None))]
fn recommend(
    py: Python<'_>,
    manuscript: &str,
    candidates: Vec<String>,
    backend: &Backend,
    model: Option<String>,
    seed: Option<i64>,
) -> PyResult<Py<PyDict>> {
    let text = text_ingest::NormalizedText::from_raw(manuscript);
    let pipeline = ChecklistPipeline::new(backend.inner.as_ref(), make_options(model, seed));
    let recommendation = pipeline.recommend(&text, &candidates).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("chosen", recommendation.chosen)?;
    out.set_item("raw_output", recommendation.raw_output)?;
    out.set_item("excerpt_chars", recommendation.excerpt_chars)?;
    Ok(out.into())
}

/// A completed checklist paired with its template, ready to render.
#[pyclass]
struct CompletedChecklist {
    inner: checksupport::pipeline::CompletedChecklist,
    template: checklist::ChecklistTemplate,
}

#[pymethods]
impl CompletedChecklist {
    #[getter]
    fn template_name(&self) -> String {
        self.inner.template_name.clone()
    }

    /// Responses as dicts: {"item_id", "status", "answer", "section_index"}.
    fn responses(&self, py: Python<'_>) -> PyResult<Py<PyList>> {
        let out = PyList::empty(py);
        for response in &self.inner.responses {
            let entry = PyDict::new(py);
            entry.set_item("item_id", &response.item_id)?;
            entry.set_item(
                "status",
                match response.status {
                    ResponseStatus::Answered => "answered",
                    ResponseStatus::NotReported => "not_reported",
                },
            )?;
            entry.set_item("answer", &response.answer)?;
            entry.set_item("section_index", response.section_index)?;
            out.append(entry)?;
        }
        Ok(out.into())
    }

    /// Full run record (responses plus provenance) as a JSON string.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Render as "md", "html", or "pdf"; returns bytes.
    fn render(&self, py: Python<'_>, format: &str) -> PyResult<Py<PyBytes>> {
        let format = format.parse::<ReportFormat>().map_err(to_py_err)?;
        let bytes = report::render(&self.inner, &self.template, format).map_err(to_py_err)?;
        Ok(PyBytes::new(py, &bytes).into())
    }

    fn render_markdown(&self) -> PyResult<String> {
        let bytes =
            report::render(&self.inner, &self.template, ReportFormat::Markdown).map_err(to_py_err)?;
        Ok(String::from_utf8(bytes).expect("markdown is utf-8"))
    }
}

/// Run the full guidance/extraction/completion pipeline for one manuscript
/// and template.
#[pyfunction]
#[pyo3(signature = (manuscript, template, backend, model=None, seed=None))]
fn complete_checklist(
    manuscript: &str,
    template: &ChecklistTemplate,
    backend: &Backend,
    model: Option<String>,
    seed: Option<i64>,
) -> PyResult<CompletedChecklist> {
    let text = text_ingest::NormalizedText::from_raw(manuscript);
    let pipeline = ChecklistPipeline::new(backend.inner.as_ref(), make_options(model, seed));
    let completed = pipeline
        .complete_checklist(&text, &template.inner)
        .map_err(to_py_err)?;
    Ok(CompletedChecklist {
        inner: completed,
        template: template.inner.clone(),
    })
}

fn metrics_to_py(py: Python<'_>, report: &evaluate::MetricsReport) -> PyResult<Py<PyDict>> {
    let out = PyDict::new(py);
    out.set_item("overall_accuracy", report.overall_accuracy)?;
    out.set_item("n", report.n)?;
    let categories = PyDict::new(py);
    for (label, metrics) in &report.per_category {
        let entry = PyDict::new(py);
        entry.set_item("correct", metrics.correct)?;
        entry.set_item("total", metrics.total)?;
        entry.set_item("accuracy", metrics.accuracy)?;
        categories.set_item(label, entry)?;
    }
    out.set_item("per_category", categories)?;
    Ok(out.into())
}

/// Manuscript-level accuracy. `predictions` maps manuscript id to predicted
/// category; `truths` is a list of (manuscript_id, true_category) pairs.
#[pyfunction]
fn manuscript_accuracy(
    py: Python<'_>,
    predictions: BTreeMap<String, String>,
    truths: Vec<(String, String)>,
) -> PyResult<Py<PyDict>> {
    let annotations: Vec<evaluate::ManuscriptAnnotation> = truths
        .into_iter()
        .map(|(manuscript_id, true_category)| evaluate::ManuscriptAnnotation {
            manuscript_id,
            true_category,
        })
        .collect();
    let report = evaluate::manuscript_accuracy(&predictions, &annotations).map_err(to_py_err)?;
    metrics_to_py(py, &report)
}

fn parse_status(status: &str) -> PyResult<ResponseStatus> {
    match status {
        "answered" => Ok(ResponseStatus::Answered),
        "not_reported" => Ok(ResponseStatus::NotReported),
        other => Err(PyValueError::new_err(format!(
            "status must be \"answered\" or \"not_reported\", got {other:?}"
        ))),
    }
}

/// Item-level accuracy. `predictions` is a list of (manuscript_id, item_id,
/// status, answer); `truths` of (manuscript_id, item_id, expected_status,
/// expected_content_or_None); `categories` maps manuscript id to category.
#[pyfunction]
#[pyo3(signature = (predictions, truths, categories=None, lenient=false))]
fn item_accuracy(
    py: Python<'_>,
    predictions: Vec<(String, String, String, String)>,
    truths: Vec<(String, String, String, Option<String>)>,
    categories: Option<BTreeMap<String, String>>,
    lenient: bool,
) -> PyResult<Py<PyDict>> {
    let predictions: Vec<evaluate::ItemPrediction> = predictions
        .into_iter()
        .map(|(manuscript_id, item_id, status, answer)| {
            Ok(evaluate::ItemPrediction {
                manuscript_id,
                item_id,
                status: parse_status(&status)?,
                answer,
            })
        })
        .collect::<PyResult<_>>()?;
    let truths: Vec<evaluate::ItemAnnotation> = truths
        .into_iter()
        .map(|(manuscript_id, item_id, status, content)| {
            Ok(evaluate::ItemAnnotation {
                manuscript_id,
                item_id,
                expected_status: parse_status(&status)?,
                expected_content: content,
            })
        })
        .collect::<PyResult<_>>()?;
    let policy = if lenient {
        evaluate::NullPolicy::Lenient
    } else {
        evaluate::NullPolicy::Strict
    };
    let report = evaluate::item_accuracy(
        &predictions,
        &truths,
        &categories.unwrap_or_default(),
        policy,
        evaluate::normalized_equality,
    )
    .map_err(to_py_err)?;
    metrics_to_py(py, &report)
}

#[pymodule]
fn _checksupport(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(head_excerpt, m)?)?;
    m.add_function(wrap_pyfunction!(windows, m)?)?;
    m.add_function(wrap_pyfunction!(extract_text, m)?)?;
    m.add_function(wrap_pyfunction!(detect_format, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_names, m)?)?;
    m.add_function(wrap_pyfunction!(default_stage_configs, m)?)?;
    m.add_function(wrap_pyfunction!(recommend, m)?)?;
    m.add_function(wrap_pyfunction!(complete_checklist, m)?)?;
    m.add_function(wrap_pyfunction!(manuscript_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(item_accuracy, m)?)?;
    m.add_class::<ChecklistTemplate>()?;
    m.add_class::<Backend>()?;
    m.add_class::<CompletedChecklist>()?;
    Ok(())
}
