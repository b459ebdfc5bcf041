//! Command-line frontend: `recommend`, `complete`, `templates list`, and
//! `eval`.
//!
//! Configuration precedence is flags, then environment variables, then the
//! optional TOML config at `~/.checksupport.toml`, then built-in defaults.
//! Exit codes: 0 ok, 2 usage, 3 backend, 4 parse/extraction, 5
//! evaluation-data mismatch.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::checklist::{self, ChecklistTemplate};
use crate::error::{Error, Result};
use crate::evaluate::{self, NullPolicy};
use crate::inference::{Backend, HttpBackend, ScriptedBackend, Stage, DEFAULT_BASE_URL};
use crate::pipeline::{ChecklistPipeline, PipelineOptions};
use crate::report::{self, ReportFormat};
use crate::text_ingest;

/// Candidate entry offered when `--allow-na` is set.
pub const NOT_APPLICABLE: &str = "Not applicable";

#[derive(Debug, Parser)]
#[command(
    name = "checksupport",
    version,
    about = "Recommend and complete reporting checklists for scientific manuscripts"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Backend URL, or "scripted:<file.json>" for a replay backend.
    #[arg(long, global = true, env = "CHECKSUPPORT_BACKEND_URL", value_name = "URL")]
    backend: Option<String>,

    /// Model identifier sent to the backend.
    #[arg(long, global = true, env = "CHECKSUPPORT_MODEL", value_name = "NAME")]
    model: Option<String>,

    /// Generation seed forwarded to backends that support seeding.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<i64>,

    /// Directory of user checklist templates (pdf, docx, or txt files).
    #[arg(long, global = true, value_name = "PATH")]
    templates_dir: Option<PathBuf>,

    /// Progress and provenance details on standard error.
    #[arg(long, global = true)]
    verbose: bool,

    /// Recommendation-stage temperature override.
    #[arg(long, global = true, value_name = "T")]
    temp_recommend: Option<f64>,

    /// Guidance-stage temperature override.
    #[arg(long, global = true, value_name = "T")]
    temp_guidance: Option<f64>,

    /// Extraction-stage temperature override.
    #[arg(long, global = true, value_name = "T")]
    temp_extract: Option<f64>,

    /// Item-stage temperature override.
    #[arg(long, global = true, value_name = "T")]
    temp_item: Option<f64>,

    /// Recommendation excerpt budget override, in characters.
    #[arg(long, global = true, value_name = "CHARS")]
    excerpt_limit: Option<usize>,

    /// Extraction window size override, in characters.
    #[arg(long, global = true, value_name = "CHARS")]
    window_size: Option<usize>,

    /// Extraction window overlap override, in characters.
    #[arg(long, global = true, value_name = "CHARS")]
    window_overlap: Option<usize>,

    /// Minimum extract length override, in characters.
    #[arg(long, global = true, value_name = "CHARS")]
    min_extract_chars: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recommend the most appropriate checklist for a manuscript.
    Recommend {
        /// Manuscript file (pdf, docx, or txt).
        manuscript: PathBuf,

        /// Offer "Not applicable" as an additional candidate.
        #[arg(long)]
        allow_na: bool,
    },

    /// Complete a checklist against a manuscript and write the report.
    Complete {
        /// Manuscript file (pdf, docx, or txt).
        manuscript: PathBuf,

        /// Builtin template name, template file path, or "auto" to
        /// recommend first.
        #[arg(long, value_name = "NAME|PATH|auto")]
        checklist: String,

        /// Report output path; defaults to
        /// <manuscript-stem>.<template-name>.report.<ext> next to the
        /// manuscript.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,

        /// Report format: md, html, or pdf.
        #[arg(long, default_value = "md", value_name = "FORMAT")]
        format: String,
    },

    /// Inspect available checklist templates.
    Templates {
        #[command(subcommand)]
        action: TemplatesAction,
    },

    /// Score predictions against expert annotations.
    Eval {
        /// Newline-delimited JSON predictions.
        #[arg(long, value_name = "FILE")]
        predictions: PathBuf,

        /// Newline-delimited JSON truth records.
        #[arg(long, value_name = "FILE")]
        truth: PathBuf,

        /// Evaluation task: manuscript or item.
        #[arg(long, value_parser = ["manuscript", "item"])]
        mode: String,

        /// Manuscript category map (newline-delimited JSON annotations),
        /// used for the per-category breakdown in item mode.
        #[arg(long, value_name = "FILE")]
        categories: Option<PathBuf>,

        /// Count matching null responses as correct.
        #[arg(long)]
        lenient: bool,
    },
}

#[derive(Debug, Subcommand)]
enum TemplatesAction {
    /// Print available template names, one per line, sorted.
    List,
}

/// Optional config file at ~/.checksupport.toml.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    backend_url: Option<String>,
    model: Option<String>,
    seed: Option<i64>,
    templates_dir: Option<PathBuf>,
    #[serde(default)]
    stages: StageOverrides,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageOverrides {
    temp_recommend: Option<f64>,
    temp_guidance: Option<f64>,
    temp_extract: Option<f64>,
    temp_item: Option<f64>,
    excerpt_limit: Option<usize>,
    window_size: Option<usize>,
    window_overlap: Option<usize>,
    min_extract_chars: Option<usize>,
}

fn load_file_config() -> Result<FileConfig> {
    let Some(home) = std::env::var_os("HOME") else {
        return Ok(FileConfig::default());
    };
    let path = Path::new(&home).join(".checksupport.toml");
    if !path.exists() {
        return Ok(FileConfig::default());
    }
    let content = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    toml::from_str(&content).map_err(|e| Error::Config {
        detail: format!("{}: {e}", path.display()),
    })
}

/// Flag/env/config/default resolution result.
struct Effective {
    backend_spec: String,
    templates_dir: Option<PathBuf>,
    options: PipelineOptions,
    verbose: bool,
}

fn resolve(global: &GlobalArgs) -> Result<Effective> {
    let file = load_file_config()?;

    let backend_spec = global
        .backend
        .clone()
        .or(file.backend_url)
        .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
    let templates_dir = global.templates_dir.clone().or(file.templates_dir);

    let mut options = PipelineOptions::default();
    if let Some(model) = global.model.clone().or(file.model) {
        options.model = model;
    }
    if let Some(seed) = global.seed.or(file.seed) {
        options.seed = Some(seed);
    }

    let pick = |flag: Option<f64>, file_value: Option<f64>| flag.or(file_value);
    let temps = [
        (Stage::Recommend, pick(global.temp_recommend, file.stages.temp_recommend)),
        (Stage::Guidance, pick(global.temp_guidance, file.stages.temp_guidance)),
        (Stage::Extract, pick(global.temp_extract, file.stages.temp_extract)),
        (Stage::ItemAnswer, pick(global.temp_item, file.stages.temp_item)),
    ];
    for (stage, temp) in temps {
        if let Some(t) = temp {
            if !(0.0..=2.0).contains(&t) {
                return Err(Error::Config {
                    detail: format!("temperature {t} for {stage:?} outside [0, 2]"),
                });
            }
            options.configs.get_mut(&stage).unwrap().temperature = t;
        }
    }
    if let Some(limit) = global.excerpt_limit.or(file.stages.excerpt_limit) {
        options
            .configs
            .get_mut(&Stage::Recommend)
            .unwrap()
            .context_limit_chars = limit;
    }
    if let Some(size) = global.window_size.or(file.stages.window_size) {
        if size == 0 {
            return Err(Error::Config {
                detail: "window size must be positive".into(),
            });
        }
        options
            .configs
            .get_mut(&Stage::Extract)
            .unwrap()
            .context_limit_chars = size;
    }
    if let Some(overlap) = global.window_overlap.or(file.stages.window_overlap) {
        options.window_overlap = overlap;
    }
    if let Some(min) = global.min_extract_chars.or(file.stages.min_extract_chars) {
        if min == 0 {
            return Err(Error::Config {
                detail: "minimum extract length must be positive".into(),
            });
        }
        options.configs.get_mut(&Stage::Extract).unwrap().min_extract_chars = Some(min);
    }
    let window = options.configs[&Stage::Extract].context_limit_chars;
    if options.window_overlap >= window {
        return Err(Error::Config {
            detail: format!(
                "window overlap {} must be smaller than window size {window}",
                options.window_overlap
            ),
        });
    }

    Ok(Effective {
        backend_spec,
        templates_dir,
        options,
        verbose: global.verbose,
    })
}

fn make_backend(spec: &str) -> Result<Box<dyn Backend>> {
    if let Some(script_path) = spec.strip_prefix("scripted:") {
        Ok(Box::new(ScriptedBackend::from_json_file(script_path)?))
    } else {
        Ok(Box::new(HttpBackend::new(spec)))
    }
}

/// User template files (by stem) in a directory, sorted by name.
fn user_templates(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut found = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if text_ingest::detect_format(&path).is_err() {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            found.insert(stem.to_string(), path);
        }
    }
    Ok(found)
}

/// Builtin names plus user template names, sorted and deduplicated.
fn candidate_names(templates_dir: Option<&Path>) -> Result<Vec<String>> {
    let mut names: Vec<String> = checklist::builtin_names()
        .iter()
        .map(|n| n.to_string())
        .collect();
    if let Some(dir) = templates_dir {
        for name in user_templates(dir)?.keys() {
            names.push(name.clone());
        }
    }
    names.sort_unstable();
    names.dedup();
    Ok(names)
}

/// Resolve a checklist argument: builtin name, user template name, or file
/// path.
fn resolve_template(spec: &str, templates_dir: Option<&Path>) -> Result<ChecklistTemplate> {
    if checklist::builtin_names().contains(&spec) {
        return checklist::load_builtin(spec);
    }
    if let Some(dir) = templates_dir {
        if let Some(path) = user_templates(dir)?.get(spec) {
            return load_template_file(path);
        }
    }
    let path = Path::new(spec);
    if path.exists() {
        return load_template_file(path);
    }
    Err(Error::TemplateNotFound { name: spec.into() })
}

fn load_template_file(path: &Path) -> Result<ChecklistTemplate> {
    let text = text_ingest::extract_path(path)?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("checklist");
    checklist::parse_checklist(&text, name)
}

/// Parse args and run; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("checksupport: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let effective = resolve(&cli.global)?;
    match cli.command {
        Command::Recommend {
            manuscript,
            allow_na,
        } => cmd_recommend(&manuscript, allow_na, &effective),
        Command::Complete {
            manuscript,
            checklist,
            out,
            format,
        } => cmd_complete(&manuscript, &checklist, out.as_deref(), &format, &effective),
        Command::Templates {
            action: TemplatesAction::List,
        } => cmd_templates_list(&effective),
        Command::Eval {
            predictions,
            truth,
            mode,
            categories,
            lenient,
        } => cmd_eval(
            &predictions,
            &truth,
            &mode,
            categories.as_deref(),
            lenient,
        ),
    }
}

fn cmd_recommend(manuscript_path: &Path, allow_na: bool, effective: &Effective) -> Result<()> {
    let manuscript = text_ingest::extract_path(manuscript_path)?;
    let mut candidates = candidate_names(effective.templates_dir.as_deref())?;
    if allow_na {
        candidates.push(NOT_APPLICABLE.to_string());
    }
    let backend = make_backend(&effective.backend_spec)?;
    let pipeline = ChecklistPipeline::new(backend.as_ref(), effective.options.clone());
    let recommendation = pipeline.recommend(&manuscript, &candidates)?;
    if effective.verbose {
        eprintln!(
            "recommendation: excerpt {} chars, raw output {:?}",
            recommendation.excerpt_chars, recommendation.raw_output
        );
    }
    // Standard output carries nothing but the name line.
    print!("{}", report::emit_recommendation(&recommendation));
    Ok(())
}

fn cmd_complete(
    manuscript_path: &Path,
    checklist_spec: &str,
    out: Option<&Path>,
    format: &str,
    effective: &Effective,
) -> Result<()> {
    let format = ReportFormat::from_str(format)?;
    let manuscript = text_ingest::extract_path(manuscript_path)?;
    let backend = make_backend(&effective.backend_spec)?;
    let pipeline = ChecklistPipeline::new(backend.as_ref(), effective.options.clone());

    let template = if checklist_spec == "auto" {
        let candidates = candidate_names(effective.templates_dir.as_deref())?;
        let recommendation = pipeline.recommend(&manuscript, &candidates)?;
        if effective.verbose {
            eprintln!("auto-selected checklist: {}", recommendation.chosen);
        }
        resolve_template(&recommendation.chosen, effective.templates_dir.as_deref())?
    } else {
        resolve_template(checklist_spec, effective.templates_dir.as_deref())?
    };

    let completed = pipeline.complete_checklist(&manuscript, &template)?;
    if effective.verbose {
        eprintln!(
            "completed {} items in {} ms",
            completed.responses.len(),
            completed.provenance.duration_ms
        );
    }
    let rendered = report::render(&completed, &template, format)?;

    let out_path = match out {
        Some(path) => path.to_path_buf(),
        None => {
            let stem = manuscript_path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("manuscript");
            manuscript_path.with_file_name(format!(
                "{stem}.{}.report.{}",
                template.name(),
                format.extension()
            ))
        }
    };
    std::fs::write(&out_path, rendered).map_err(|e| Error::io(&out_path, e))?;
    println!("{}", out_path.display());
    Ok(())
}

fn cmd_templates_list(effective: &Effective) -> Result<()> {
    for name in candidate_names(effective.templates_dir.as_deref())? {
        println!("{name}");
    }
    Ok(())
}

fn cmd_eval(
    predictions_path: &Path,
    truth_path: &Path,
    mode: &str,
    categories_path: Option<&Path>,
    lenient: bool,
) -> Result<()> {
    let predictions_text = std::fs::read_to_string(predictions_path)
        .map_err(|e| Error::io(predictions_path, e))?;
    let truth_text =
        std::fs::read_to_string(truth_path).map_err(|e| Error::io(truth_path, e))?;

    let metrics = match mode {
        "manuscript" => {
            let prediction_records: Vec<evaluate::ManuscriptPrediction> =
                evaluate::read_ndjson(&predictions_text)?;
            let truths: Vec<evaluate::ManuscriptAnnotation> =
                evaluate::read_ndjson(&truth_text)?;
            let predictions: BTreeMap<String, String> = prediction_records
                .into_iter()
                .map(|p| (p.manuscript_id, p.predicted_category))
                .collect();
            evaluate::manuscript_accuracy(&predictions, &truths)?
        }
        "item" => {
            let predictions: Vec<evaluate::ItemPrediction> =
                evaluate::read_ndjson(&predictions_text)?;
            let truths: Vec<evaluate::ItemAnnotation> = evaluate::read_ndjson(&truth_text)?;
            let categories = match categories_path {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    let annotations: Vec<evaluate::ManuscriptAnnotation> =
                        evaluate::read_ndjson(&text)?;
                    annotations
                        .into_iter()
                        .map(|a| (a.manuscript_id, a.true_category))
                        .collect()
                }
                None => BTreeMap::new(),
            };
            let policy = if lenient {
                NullPolicy::Lenient
            } else {
                NullPolicy::Strict
            };
            evaluate::item_accuracy(
                &predictions,
                &truths,
                &categories,
                policy,
                evaluate::normalized_equality,
            )?
        }
        other => {
            return Err(Error::Usage {
                detail: format!("unknown eval mode \"{other}\""),
            })
        }
    };

    print!("{}", evaluate::render_metrics_table(&metrics));
    let json = serde_json::to_string(&metrics).expect("metrics serialize");
    println!("{json}");
    Ok(())
}
