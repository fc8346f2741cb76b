use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{classification_metrics, LabeledPair, MetricsTable};
use crate::error::Result;
use crate::extraction::{DeonticModality, Obligation};
use crate::fixture::{Fixture, GoldLabel};
use crate::gap::{GapClass, GapFinding, Pipeline, PipelineOptions, PolicyClause};
use crate::retrieval::Index;
use crate::rkg::{GraphConfig, RegulatoryGraph};

type Key<'a> = (&'a str, DeonticModality);

fn key(o: &Obligation) -> Key<'_> {
    (o.source_provision.as_str(), o.modality)
}

fn label_map(labels: &[GoldLabel]) -> BTreeMap<&str, GapClass> {
    labels.iter().map(|l| (l.obligation_id.as_str(), l.label)).collect()
}

/// Gold label against the class of the finding whose obligation shares the
/// gold obligation's `(source_provision, modality)` key. A gold obligation
/// nothing was extracted for counts as not flagged (Compliant).
pub fn gap_pairs(gold: &[Obligation], labels: &[GoldLabel], findings: &[GapFinding]) -> Vec<LabeledPair> {
    let labels = label_map(labels);
    let mut by_key: BTreeMap<Key<'_>, GapClass> = BTreeMap::new();
    for f in findings {
        by_key.entry(key(&f.obligation)).or_insert(f.gap_class);
    }
    gold.iter()
        .filter_map(|o| {
            let g = *labels.get(o.obligation_id.as_str())?;
            let p = by_key.get(&key(o)).copied().unwrap_or(GapClass::Compliant);
            Some(LabeledPair::new(o.obligation_id.clone(), g, p))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    /// Obligations from the rule-based extractor.
    Rules,
    /// The fixture's gold obligations, bypassing extraction.
    Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationToggles {
    pub kg_rerank: bool,
    pub extraction: ExtractionMode,
    pub grounding: bool,
}

impl AblationToggles {
    pub const ALL_OFF: Self = Self {
        kg_rerank: false,
        extraction: ExtractionMode::Rules,
        grounding: false,
    };

    pub const ALL_ON: Self = Self {
        kg_rerank: true,
        extraction: ExtractionMode::Gold,
        grounding: true,
    };

    /// Every combination, kg_rerank varying slowest.
    pub fn grid() -> Vec<Self> {
        let mut out = Vec::new();
        for kg_rerank in [false, true] {
            for extraction in [ExtractionMode::Rules, ExtractionMode::Gold] {
                for grounding in [false, true] {
                    out.push(Self {
                        kg_rerank,
                        extraction,
                        grounding,
                    });
                }
            }
        }
        out
    }

    /// Base configuration, then one component added per row.
    pub fn additive() -> Vec<Self> {
        let base = Self::ALL_OFF;
        let kg = Self {
            kg_rerank: true,
            ..base
        };
        let grounded = Self { grounding: true, ..kg };
        vec![base, kg, grounded, Self::ALL_ON]
    }

    pub fn label(&self) -> String {
        format!(
            "kg={} extraction={} grounding={}",
            if self.kg_rerank { "on" } else { "off" },
            match self.extraction {
                ExtractionMode::Rules => "rules",
                ExtractionMode::Gold => "gold",
            },
            if self.grounding { "on" } else { "off" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub toggles: AblationToggles,
    pub metrics: MetricsTable,
    pub gap_f1: f64,
    pub flagged: usize,
    pub review_flags: usize,
    /// Gap F1 change against the previous row.
    pub marginal: f64,
    /// Gap F1 change against the first row.
    pub delta_vs_base: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, t: &AblationToggles) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.toggles == *t)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<44} {:>7} {:>9} {:>8} {:>8} {:>7}",
            "configuration", "gap_f1", "marginal", "vs_base", "flagged", "review"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<44} {:>7.1} {:>+9.1} {:>+8.1} {:>8} {:>7}",
                r.toggles.label(),
                100.0 * r.gap_f1,
                100.0 * r.marginal,
                100.0 * r.delta_vs_base,
                r.flagged,
                r.review_flags
            );
        }
        s
    }
}

fn variant(base: &Pipeline, options: PipelineOptions) -> Result<Pipeline> {
    Ok(Pipeline::new(
        base.embedder,
        base.retrieval,
        base.extractor().config().clone(),
        base.gap.clone(),
    )?
    .with_options(options)
    .with_execution(base.exec))
}

/// Run the pipeline on `fixture` once per toggle setting, in the given order.
pub fn ablation_matrix(fixture: &Fixture, base: &Pipeline, toggles: &[AblationToggles]) -> Result<AblationTable> {
    let g = fixture.build_graph(GraphConfig::default(), &base.embedder)?;
    let policies = fixture.prepared_policies(&base.embedder);
    let index = Index::from_documents(&fixture.documents, &base.retrieval, &base.embedder)?;
    let mut rows: Vec<AblationRow> = Vec::new();
    for t in toggles {
        let p = variant(
            base,
            PipelineOptions {
                kg_rerank: t.kg_rerank,
                grounding: t.grounding,
            },
        )?;
        let obligations = match t.extraction {
            ExtractionMode::Gold => fixture.gold_obligations.clone(),
            ExtractionMode::Rules => p.extract(&fixture.documents, &g)?,
        };
        let report = p.analyze(&obligations, &policies, &g, &index)?;
        let pairs = gap_pairs(&fixture.gold_obligations, &fixture.gold_labels, &report.findings);
        let metrics = classification_metrics(&pairs)?;
        let gap_f1 = metrics.macro_f1;
        let first = rows.first().map_or(gap_f1, |r| r.gap_f1);
        let prev = rows.last().map_or(gap_f1, |r| r.gap_f1);
        rows.push(AblationRow {
            toggles: *t,
            gap_f1,
            flagged: report.flagged().len(),
            review_flags: report.review_flags,
            marginal: gap_f1 - prev,
            delta_vs_base: gap_f1 - first,
            metrics,
        });
    }
    Ok(AblationTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    MissingObligation,
    WrongSpan,
    WrongModality,
    UnresolvedCrossref,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        ErrorCategory::MissingObligation,
        ErrorCategory::WrongSpan,
        ErrorCategory::WrongModality,
        ErrorCategory::UnresolvedCrossref,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub category: ErrorCategory,
    /// Gold obligations whose extraction falls in this category.
    pub errors: usize,
    /// Of those, how many changed predicted gap class.
    pub changed_labels: usize,
    /// Gap F1 lost when only this category's items take their
    /// predicted-input labels.
    pub f1_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPropagation {
    pub gold_input: MetricsTable,
    pub predicted_input: MetricsTable,
    /// Gold-input gap F1 minus predicted-input gap F1.
    pub delta_f1: f64,
    pub attribution: Vec<Attribution>,
}

fn categorize(o: &Obligation, predicted: &[Obligation]) -> Option<ErrorCategory> {
    let same_provision: Vec<&Obligation> = predicted
        .iter()
        .filter(|p| p.source_provision == o.source_provision)
        .collect();
    if same_provision.is_empty() {
        return Some(ErrorCategory::MissingObligation);
    }
    let Some(p) = same_provision.iter().find(|p| p.modality == o.modality) else {
        return Some(ErrorCategory::WrongModality);
    };
    if p.entity != o.entity || p.action != o.action || p.condition != o.condition {
        return Some(ErrorCategory::WrongSpan);
    }
    if p.resolved_targets().collect::<Vec<_>>() != o.resolved_targets().collect::<Vec<_>>() {
        return Some(ErrorCategory::UnresolvedCrossref);
    }
    None
}

/// Gap metrics from gold obligations and from extracted ones, with the
/// difference attributed to extraction error categories.
pub fn error_propagation_report(
    gold: &[Obligation],
    predicted: &[Obligation],
    labels: &[GoldLabel],
    policies: &[PolicyClause],
    g: &RegulatoryGraph,
    index: &Index,
    pipeline: &Pipeline,
) -> Result<ErrorPropagation> {
    let gold_report = pipeline.analyze(gold, policies, g, index)?;
    let pred_report = pipeline.analyze(predicted, policies, g, index)?;
    let gold_pairs = gap_pairs(gold, labels, &gold_report.findings);
    let pred_pairs = gap_pairs(gold, labels, &pred_report.findings);
    let gold_input = classification_metrics(&gold_pairs)?;
    let predicted_input = classification_metrics(&pred_pairs)?;

    let categories: BTreeMap<&str, ErrorCategory> = gold
        .iter()
        .filter_map(|o| categorize(o, predicted).map(|c| (o.obligation_id.as_str(), c)))
        .collect();
    let mut attribution = Vec::new();
    for cat in ErrorCategory::ALL {
        let mut mixed = gold_pairs.clone();
        let (mut errors, mut changed) = (0, 0);
        for (m, p) in mixed.iter_mut().zip(&pred_pairs) {
            if categories.get(m.item_id.as_str()) == Some(&cat) {
                errors += 1;
                if m.predicted != p.predicted {
                    changed += 1;
                }
                m.predicted = p.predicted;
            }
        }
        attribution.push(Attribution {
            category: cat,
            errors,
            changed_labels: changed,
            f1_delta: gold_input.macro_f1 - classification_metrics(&mixed)?.macro_f1,
        });
    }
    Ok(ErrorPropagation {
        delta_f1: gold_input.macro_f1 - predicted_input.macro_f1,
        gold_input,
        predicted_input,
        attribution,
    })
}

impl ErrorPropagation {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "gap F1 gold input {:.1}, predicted input {:.1}, delta {:.1}",
            100.0 * self.gold_input.macro_f1,
            100.0 * self.predicted_input.macro_f1,
            100.0 * self.delta_f1
        );
        let _ = writeln!(
            s,
            "{:<20} {:>7} {:>8} {:>9}",
            "category", "errors", "changed", "f1_delta"
        );
        for a in &self.attribution {
            let name = serde_json::to_value(a.category)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{:<20} {:>7} {:>8} {:>9.1}",
                name,
                a.errors,
                a.changed_labels,
                100.0 * a.f1_delta
            );
        }
        s
    }
}
