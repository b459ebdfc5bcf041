//! Evaluation metrics: manuscript-level recommendation accuracy, item-level
//! completion accuracy with per-category breakdowns, failure-mode tallies,
//! and runtime statistics. Truth and prediction sets travel as
//! newline-delimited JSON.

use std::collections::{BTreeMap, BTreeSet};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::ResponseStatus;

/// Expert-assigned category for one manuscript (e.g. "A", "B", "NA").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManuscriptAnnotation {
    pub manuscript_id: String,
    pub true_category: String,
}

/// Predicted category for one manuscript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManuscriptPrediction {
    pub manuscript_id: String,
    pub predicted_category: String,
}

/// Expert annotation for one checklist item of one manuscript.
/// `expected_content` is present exactly when the item was answerable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemAnnotation {
    pub manuscript_id: String,
    pub item_id: String,
    pub expected_status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_content: Option<String>,
}

/// System response for one checklist item of one manuscript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemPrediction {
    pub manuscript_id: String,
    pub item_id: String,
    pub status: ResponseStatus,
    #[serde(default)]
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryMetrics {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Accuracy report with per-category breakdown. The overall accuracy equals
/// both total correct over total count and the count-weighted mean of the
/// per-category accuracies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub overall_accuracy: f64,
    pub per_category: BTreeMap<String, CategoryMetrics>,
    pub n: usize,
}

impl MetricsReport {
    fn from_counts(counts: BTreeMap<String, (usize, usize)>) -> Result<Self> {
        let total: usize = counts.values().map(|(_, t)| t).sum();
        if total == 0 {
            return Err(Error::NoData);
        }
        let correct: usize = counts.values().map(|(c, _)| c).sum();
        let per_category = counts
            .into_iter()
            .map(|(label, (c, t))| {
                (
                    label,
                    CategoryMetrics {
                        correct: c,
                        total: t,
                        accuracy: c as f64 / t as f64,
                    },
                )
            })
            .collect();
        Ok(MetricsReport {
            overall_accuracy: correct as f64 / total as f64,
            per_category,
            n: total,
        })
    }
}

/// How a null prediction paired with a null annotation is scored. `Strict`
/// counts such pairs as errors; `Lenient` counts them correct regardless of
/// content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NullPolicy {
    #[default]
    Strict,
    Lenient,
}

/// Category bucket used when no category mapping is supplied for a
/// manuscript.
pub const UNCATEGORIZED: &str = "uncategorized";

/// Manuscript-level recommendation accuracy against expert categories.
pub fn manuscript_accuracy(
    predictions: &BTreeMap<String, String>,
    truths: &[ManuscriptAnnotation],
) -> Result<MetricsReport> {
    if truths.is_empty() {
        return Err(Error::NoData);
    }
    let mut seen = BTreeSet::new();
    for truth in truths {
        if !seen.insert(truth.manuscript_id.as_str()) {
            return Err(Error::Usage {
                detail: format!("duplicate manuscript_id \"{}\" in truth set", truth.manuscript_id),
            });
        }
    }
    let missing: Vec<String> = truths
        .iter()
        .filter(|t| !predictions.contains_key(&t.manuscript_id))
        .map(|t| t.manuscript_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPrediction { ids: missing });
    }
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for truth in truths {
        let entry = counts.entry(truth.true_category.clone()).or_default();
        entry.1 += 1;
        if predictions[&truth.manuscript_id] == truth.true_category {
            entry.0 += 1;
        }
    }
    MetricsReport::from_counts(counts)
}

/// Item-level completion accuracy. An item is correct when the status
/// matches and, for answered pairs, `comparator` accepts the contents;
/// null-null pairs follow `policy`. The per-category breakdown uses
/// `categories` (manuscript id to category label).
pub fn item_accuracy(
    predictions: &[ItemPrediction],
    truths: &[ItemAnnotation],
    categories: &BTreeMap<String, String>,
    policy: NullPolicy,
    comparator: impl Fn(&str, &str) -> bool,
) -> Result<MetricsReport> {
    if truths.is_empty() {
        return Err(Error::NoData);
    }
    let mut indexed: BTreeMap<(&str, &str), &ItemPrediction> = BTreeMap::new();
    for p in predictions {
        if indexed
            .insert((p.manuscript_id.as_str(), p.item_id.as_str()), p)
            .is_some()
        {
            return Err(Error::Usage {
                detail: format!(
                    "duplicate prediction for ({}, {})",
                    p.manuscript_id, p.item_id
                ),
            });
        }
    }
    let mut seen = BTreeSet::new();
    let mut missing = Vec::new();
    for truth in truths {
        let key = (truth.manuscript_id.as_str(), truth.item_id.as_str());
        if !seen.insert(key) {
            return Err(Error::Usage {
                detail: format!(
                    "duplicate annotation for ({}, {})",
                    truth.manuscript_id, truth.item_id
                ),
            });
        }
        if truth.expected_content.is_some() != (truth.expected_status == ResponseStatus::Answered)
        {
            return Err(Error::Usage {
                detail: format!(
                    "annotation ({}, {}) must carry expected_content exactly when answered",
                    truth.manuscript_id, truth.item_id
                ),
            });
        }
        if !indexed.contains_key(&key) {
            missing.push(format!("{}/{}", truth.manuscript_id, truth.item_id));
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingPrediction { ids: missing });
    }

    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for truth in truths {
        let prediction = indexed[&(truth.manuscript_id.as_str(), truth.item_id.as_str())];
        let correct = match (prediction.status, truth.expected_status) {
            (ResponseStatus::Answered, ResponseStatus::Answered) => comparator(
                &prediction.answer,
                truth.expected_content.as_deref().unwrap_or(""),
            ),
            (ResponseStatus::NotReported, ResponseStatus::NotReported) => {
                policy == NullPolicy::Lenient
            }
            _ => false,
        };
        let label = categories
            .get(&truth.manuscript_id)
            .cloned()
            .unwrap_or_else(|| UNCATEGORIZED.to_string());
        let entry = counts.entry(label).or_default();
        entry.1 += 1;
        if correct {
            entry.0 += 1;
        }
    }
    MetricsReport::from_counts(counts)
}

/// Default content comparator: equality after lowercasing, stripping
/// punctuation, and collapsing whitespace. Stricter than an expert judgment
/// of "correctly summarized".
pub fn normalized_equality(a: &str, b: &str) -> bool {
    normalize_for_match(a) == normalize_for_match(b)
}

fn normalize_for_match(s: &str) -> String {
    let lowered = s.to_lowercase();
    let kept: String = lowered
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c
            } else {
                ' '
            }
        })
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The three failure modes distinguished during error review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    AmbiguousLanguage,
    IncompleteReporting,
    WindowMiss,
}

impl FailureMode {
    pub const ALL: [FailureMode; 3] = [
        FailureMode::AmbiguousLanguage,
        FailureMode::IncompleteReporting,
        FailureMode::WindowMiss,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub manuscript_id: String,
    pub item_id: String,
    pub mode: FailureMode,
    #[serde(default)]
    pub note: String,
}

/// Count records per failure mode. Modes without occurrences appear with
/// count zero.
pub fn tally_failures(records: &[FailureRecord]) -> BTreeMap<FailureMode, usize> {
    let mut tally: BTreeMap<FailureMode, usize> =
        FailureMode::ALL.iter().map(|m| (*m, 0)).collect();
    for record in records {
        *tally.get_mut(&record.mode).unwrap() += 1;
    }
    tally
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeStats {
    pub per_manuscript_ms: Vec<u64>,
    pub mean_ms: f64,
}

/// Arithmetic mean of end-to-end per-manuscript durations.
pub fn runtime_stats(samples: &[u64]) -> Result<RuntimeStats> {
    if samples.is_empty() {
        return Err(Error::NoData);
    }
    let mean_ms = samples.iter().sum::<u64>() as f64 / samples.len() as f64;
    Ok(RuntimeStats {
        per_manuscript_ms: samples.to_vec(),
        mean_ms,
    })
}

/// Parse newline-delimited JSON records, reporting the 1-based line number
/// of the first malformed line. Blank lines are skipped.
pub fn read_ndjson<T: DeserializeOwned>(content: &str) -> Result<Vec<T>> {
    content
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

/// Fixed-width table for human consumption, one row per category plus an
/// overall row.
pub fn render_metrics_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>8} {:>8} {:>10}\n",
        "category", "correct", "total", "accuracy"
    ));
    for (label, metrics) in &report.per_category {
        out.push_str(&format!(
            "{:<16} {:>8} {:>8} {:>10.3}\n",
            label, metrics.correct, metrics.total, metrics.accuracy
        ));
    }
    let correct: usize = report.per_category.values().map(|m| m.correct).sum();
    out.push_str(&format!(
        "{:<16} {:>8} {:>8} {:>10.3}\n",
        "overall", correct, report.n, report.overall_accuracy
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 5e-4;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < TOL
    }

    /// Synthetic truth/prediction sets with exact per-category counts.
    fn synthetic_manuscripts(
        spec: &[(&str, usize, usize)],
    ) -> (BTreeMap<String, String>, Vec<ManuscriptAnnotation>) {
        let mut predictions = BTreeMap::new();
        let mut truths = Vec::new();
        for (label, total, correct) in spec {
            for k in 0..*total {
                let id = format!("m-{label}-{k:03}");
                truths.push(ManuscriptAnnotation {
                    manuscript_id: id.clone(),
                    true_category: label.to_string(),
                });
                let predicted = if k < *correct {
                    label.to_string()
                } else {
                    format!("wrong-{label}")
                };
                predictions.insert(id, predicted);
            }
        }
        (predictions, truths)
    }

    #[test]
    fn manuscript_accuracy_reconstruction() {
        // 30 A with 26 correct, 40 B with 40, 30 NA with 24:
        // overall 90/100, A 26/30, B 40/40, NA 24/30.
        let (predictions, truths) =
            synthetic_manuscripts(&[("A", 30, 26), ("B", 40, 40), ("NA", 30, 24)]);
        let report = manuscript_accuracy(&predictions, &truths).unwrap();
        assert_eq!(report.n, 100);
        assert!(close(report.overall_accuracy, 0.900));
        assert!(close(report.per_category["A"].accuracy, 0.867));
        assert!(close(report.per_category["B"].accuracy, 1.000));
        assert!(close(report.per_category["NA"].accuracy, 0.800));
    }

    #[test]
    fn perfect_predictions_score_one() {
        let (predictions, truths) = synthetic_manuscripts(&[("A", 5, 5), ("B", 3, 3)]);
        let report = manuscript_accuracy(&predictions, &truths).unwrap();
        assert_eq!(report.overall_accuracy, 1.0);
    }

    #[test]
    fn empty_truth_set_is_no_data() {
        assert!(matches!(
            manuscript_accuracy(&BTreeMap::new(), &[]),
            Err(Error::NoData)
        ));
        assert!(matches!(runtime_stats(&[]), Err(Error::NoData)));
    }

    #[test]
    fn missing_predictions_are_listed() {
        let (mut predictions, truths) = synthetic_manuscripts(&[("A", 3, 3)]);
        predictions.remove("m-A-001");
        match manuscript_accuracy(&predictions, &truths) {
            Err(Error::MissingPrediction { ids }) => assert_eq!(ids, ["m-A-001"]),
            other => panic!("expected MissingPrediction, got {other:?}"),
        }
    }

    fn synthetic_items(
        spec: &[(&str, usize, usize)],
    ) -> (
        Vec<ItemPrediction>,
        Vec<ItemAnnotation>,
        BTreeMap<String, String>,
    ) {
        let mut predictions = Vec::new();
        let mut truths = Vec::new();
        let mut categories = BTreeMap::new();
        for (label, total, correct) in spec {
            let manuscript = format!("m-{label}");
            categories.insert(manuscript.clone(), label.to_string());
            for k in 0..*total {
                let item = format!("i{k:02}");
                truths.push(ItemAnnotation {
                    manuscript_id: manuscript.clone(),
                    item_id: item.clone(),
                    expected_status: ResponseStatus::Answered,
                    expected_content: Some(format!("fact {k} for {label}")),
                });
                let answer = if k < *correct {
                    format!("Fact {k} for {label}.")
                } else {
                    "something unrelated".to_string()
                };
                predictions.push(ItemPrediction {
                    manuscript_id: manuscript.clone(),
                    item_id: item,
                    status: ResponseStatus::Answered,
                    answer,
                });
            }
        }
        (predictions, truths, categories)
    }

    #[test]
    fn item_accuracy_reconstruction() {
        // 30 category-A items with 24 correct, 45 B with 42:
        // overall 66/75 = 0.880, A 0.800, B 0.933.
        let (predictions, truths, categories) = synthetic_items(&[("A", 30, 24), ("B", 45, 42)]);
        let report = item_accuracy(
            &predictions,
            &truths,
            &categories,
            NullPolicy::Strict,
            normalized_equality,
        )
        .unwrap();
        assert_eq!(report.n, 75);
        assert!(close(report.overall_accuracy, 0.880));
        assert!(close(report.per_category["A"].accuracy, 0.800));
        assert!(close(report.per_category["B"].accuracy, 0.933));
    }

    #[test]
    fn status_mismatch_is_always_incorrect() {
        let truths = vec![ItemAnnotation {
            manuscript_id: "m".into(),
            item_id: "1".into(),
            expected_status: ResponseStatus::Answered,
            expected_content: Some("the content".into()),
        }];
        let predictions = vec![ItemPrediction {
            manuscript_id: "m".into(),
            item_id: "1".into(),
            status: ResponseStatus::NotReported,
            answer: String::new(),
        }];
        for policy in [NullPolicy::Strict, NullPolicy::Lenient] {
            let report = item_accuracy(
                &predictions,
                &truths,
                &BTreeMap::new(),
                policy,
                normalized_equality,
            )
            .unwrap();
            assert_eq!(report.overall_accuracy, 0.0);
        }
    }

    #[test]
    fn null_policy_differs_only_on_null_pairs() {
        let truths = vec![ItemAnnotation {
            manuscript_id: "m".into(),
            item_id: "1".into(),
            expected_status: ResponseStatus::NotReported,
            expected_content: None,
        }];
        let predictions = vec![ItemPrediction {
            manuscript_id: "m".into(),
            item_id: "1".into(),
            status: ResponseStatus::NotReported,
            answer: String::new(),
        }];
        let strict = item_accuracy(
            &predictions,
            &truths,
            &BTreeMap::new(),
            NullPolicy::Strict,
            normalized_equality,
        )
        .unwrap();
        assert_eq!(strict.overall_accuracy, 0.0);
        let lenient = item_accuracy(
            &predictions,
            &truths,
            &BTreeMap::new(),
            NullPolicy::Lenient,
            normalized_equality,
        )
        .unwrap();
        assert_eq!(lenient.overall_accuracy, 1.0);
    }

    #[test]
    fn identical_answered_sets_score_one() {
        let (mut predictions, truths, categories) = synthetic_items(&[("A", 4, 4)]);
        for (p, t) in predictions.iter_mut().zip(&truths) {
            p.answer = t.expected_content.clone().unwrap();
        }
        let report = item_accuracy(
            &predictions,
            &truths,
            &categories,
            NullPolicy::Strict,
            normalized_equality,
        )
        .unwrap();
        assert_eq!(report.overall_accuracy, 1.0);
    }

    #[test]
    fn comparator_normalizes_case_punctuation_whitespace() {
        assert!(normalized_equality(
            "The  sample size was 120!",
            "the sample size was 120"
        ));
        assert!(!normalized_equality("120 patients", "125 patients"));
    }

    #[test]
    fn failure_tally_counts_all_modes() {
        assert_eq!(
            tally_failures(&[]),
            BTreeMap::from([
                (FailureMode::AmbiguousLanguage, 0),
                (FailureMode::IncompleteReporting, 0),
                (FailureMode::WindowMiss, 0),
            ])
        );
        let records = vec![
            FailureRecord {
                manuscript_id: "m1".into(),
                item_id: "1".into(),
                mode: FailureMode::WindowMiss,
                note: String::new(),
            },
            FailureRecord {
                manuscript_id: "m1".into(),
                item_id: "2".into(),
                mode: FailureMode::WindowMiss,
                note: String::new(),
            },
            FailureRecord {
                manuscript_id: "m2".into(),
                item_id: "1".into(),
                mode: FailureMode::AmbiguousLanguage,
                note: "indirect phrasing".into(),
            },
        ];
        let tally = tally_failures(&records);
        assert_eq!(tally[&FailureMode::WindowMiss], 2);
        assert_eq!(tally[&FailureMode::AmbiguousLanguage], 1);
        assert_eq!(tally[&FailureMode::IncompleteReporting], 0);
        assert_eq!(tally.values().sum::<usize>(), records.len());
    }

    #[test]
    fn runtime_mean_matches_arithmetic() {
        let stats = runtime_stats(&[10_000, 15_000]).unwrap();
        assert_eq!(stats.mean_ms, 12_500.0);
        let single = runtime_stats(&[42]).unwrap();
        assert_eq!(single.mean_ms, 42.0);
    }

    #[test]
    fn ndjson_reports_line_numbers() {
        let good = "{\"manuscript_id\":\"m1\",\"true_category\":\"A\"}\n\n{\"manuscript_id\":\"m2\",\"true_category\":\"B\"}\n";
        let parsed: Vec<ManuscriptAnnotation> = read_ndjson(good).unwrap();
        assert_eq!(parsed.len(), 2);
        let bad = "{\"manuscript_id\":\"m1\",\"true_category\":\"A\"}\nnot json\n";
        match read_ndjson::<ManuscriptAnnotation>(bad) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected MalformedRecord, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// overall == sum_c (n_c / N) * acc_c for random confusion tables.
        #[test]
        fn weighted_mean_identity(table in proptest::collection::vec((1usize..40, 0.0f64..=1.0), 1..6)) {
            let spec: Vec<(String, usize, usize)> = table
                .iter()
                .enumerate()
                .map(|(i, (total, frac))| {
                    (format!("c{i}"), *total, (*total as f64 * frac) as usize)
                })
                .collect();
            let borrowed: Vec<(&str, usize, usize)> =
                spec.iter().map(|(l, t, c)| (l.as_str(), *t, *c)).collect();
            let (predictions, truths) = synthetic_manuscripts(&borrowed);
            let report = manuscript_accuracy(&predictions, &truths).unwrap();
            let weighted: f64 = report
                .per_category
                .values()
                .map(|m| (m.total as f64 / report.n as f64) * m.accuracy)
                .sum();
            prop_assert!((report.overall_accuracy - weighted).abs() < 1e-12);
        }

        /// Record order never changes the report.
        #[test]
        fn accuracy_is_permutation_invariant(
            table in proptest::collection::vec((1usize..20, 0.0f64..=1.0), 1..4),
            seed in 0u64..1000,
        ) {
            let spec: Vec<(String, usize, usize)> = table
                .iter()
                .enumerate()
                .map(|(i, (total, frac))| {
                    (format!("c{i}"), *total, (*total as f64 * frac) as usize)
                })
                .collect();
            let borrowed: Vec<(&str, usize, usize)> =
                spec.iter().map(|(l, t, c)| (l.as_str(), *t, *c)).collect();
            let (predictions, mut truths) = synthetic_manuscripts(&borrowed);
            let baseline = manuscript_accuracy(&predictions, &truths).unwrap();
            // Simple deterministic shuffle.
            let mut state = seed.wrapping_add(1);
            for i in (1..truths.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state % (i as u64 + 1)) as usize;
                truths.swap(i, j);
            }
            let shuffled = manuscript_accuracy(&predictions, &truths).unwrap();
            prop_assert_eq!(baseline, shuffled);
        }

        /// Adding a correct record never lowers overall accuracy; adding an
        /// incorrect one never raises it.
        #[test]
        fn accuracy_is_monotone_in_records(
            total in 1usize..30,
            frac in 0.0f64..=1.0,
        ) {
            let correct = (total as f64 * frac) as usize;
            let (mut predictions, mut truths) = synthetic_manuscripts(&[("A", total, correct)]);
            let baseline = manuscript_accuracy(&predictions, &truths).unwrap().overall_accuracy;

            predictions.insert("extra-correct".into(), "A".into());
            truths.push(ManuscriptAnnotation {
                manuscript_id: "extra-correct".into(),
                true_category: "A".into(),
            });
            let plus_correct = manuscript_accuracy(&predictions, &truths).unwrap().overall_accuracy;
            prop_assert!(plus_correct >= baseline - 1e-12);

            predictions.insert("extra-wrong".into(), "B".into());
            truths.push(ManuscriptAnnotation {
                manuscript_id: "extra-wrong".into(),
                true_category: "A".into(),
            });
            let plus_wrong = manuscript_accuracy(&predictions, &truths).unwrap().overall_accuracy;
            prop_assert!(plus_wrong <= plus_correct + 1e-12);
        }
    }
}
