use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{GapClass, GroundingResult, Severity};
use crate::extraction::{DeonticModality, Obligation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFinding {
    pub obligation: Obligation,
    pub best_clause: Option<String>,
    pub best_section: Option<String>,
    pub alignment: f64,
    pub gap_class: GapClass,
    pub severity: Option<Severity>,
    pub description: String,
    pub recommendation: String,
    pub grounding: GroundingResult,
    pub citations: Vec<String>,
    /// Retrieved context passages, in final rank order.
    pub context: Vec<String>,
    /// Linked context provisions no policy clause covers.
    pub uncovered_context: Vec<String>,
}

fn modal_verb(m: DeonticModality) -> &'static str {
    match m {
        DeonticModality::Prohibition => "shall not",
        DeonticModality::Permission => "may",
        DeonticModality::Recommendation => "should",
        DeonticModality::Obligation => "shall",
    }
}

impl GapFinding {
    /// Plain restatement of the obligation, the claim checked for grounding.
    pub fn restatement(o: &Obligation) -> String {
        let verb = modal_verb(o.modality);
        match &o.condition {
            Some(c) => format!("{}, the {} {} {}.", c, o.entity, verb, o.action),
            None => format!("The {} {} {}.", o.entity, verb, o.action),
        }
    }

    /// Fill `description` and `recommendation` from the templates.
    pub fn render_text(&mut self) {
        let o = &self.obligation;
        let duty = format!("the {} {} {}", o.entity, modal_verb(o.modality), o.action);
        let clause = match (&self.best_clause, &self.best_section) {
            (Some(c), Some(s)) => format!("{c} ({s})"),
            (Some(c), None) => c.clone(),
            _ => "no policy clause".to_string(),
        };
        let cites = self.citations.join(", ");
        let linked = if self.uncovered_context.is_empty() {
            String::new()
        } else {
            format!(
                " Linked provisions not addressed by any clause: {}.",
                self.uncovered_context.join(", ")
            )
        };
        let section = self.best_section.clone().or_else(|| self.best_clause.clone());
        match self.gap_class {
            GapClass::Compliant => {
                self.description = format!(
                    "Policy {clause} covers the requirement that {duty} ({}; alignment {:.2}). Sources: {cites}.",
                    o.source_provision, self.alignment
                );
                self.recommendation = "No action required.".into();
            }
            GapClass::PartialGap => {
                self.description = format!(
                    "Policy {clause} only partially covers the requirement that {duty} ({}; alignment {:.2}).{linked} Sources: {cites}.",
                    o.source_provision, self.alignment
                );
                self.recommendation = match section {
                    Some(s) => format!("Update {s} to address {cites}."),
                    None => format!("Extend policy coverage to {cites}."),
                };
            }
            GapClass::FullGap => {
                self.description = format!(
                    "No policy addresses the requirement that {duty} ({}); best match {clause} with alignment {:.2}.{linked} Sources: {cites}.",
                    o.source_provision, self.alignment
                );
                self.recommendation = format!("Adopt a policy clause implementing {cites}.");
            }
        }
    }

    /// Text block with one labelled field per line.
    pub fn render_block(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Obligation: {} [{}]",
            self.obligation.obligation_id, self.obligation.source_provision
        );
        let _ = writeln!(
            s,
            "Classification: {} (alignment score: {:.2})",
            self.gap_class, self.alignment
        );
        let _ = writeln!(
            s,
            "Severity: {}",
            self.severity.map_or_else(|| "N/A".to_string(), |v| v.to_string())
        );
        let matched = match (&self.best_clause, &self.best_section) {
            (Some(c), Some(sec)) => format!("{c} \"{sec}\""),
            (Some(c), None) => c.clone(),
            _ => "none".into(),
        };
        let _ = writeln!(s, "Matched policy: {matched}");
        let _ = writeln!(s, "Gap description: {}", self.description);
        let _ = writeln!(s, "Recommended action: {}", self.recommendation);
        let g = &self.grounding;
        let _ = writeln!(
            s,
            "Grounding: {}/{} sentences verified (score {:.2}){}",
            g.grounded_count(),
            g.sentences.len(),
            g.mean_score(),
            if g.needs_review() {
                ", flagged for analyst review"
            } else {
                ""
            }
        );
        let _ = writeln!(s, "Citations: {}", self.citations.join(", "));
        s
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub compliant: usize,
    pub partial_gap: usize,
    pub full_gap: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityCounts {
    pub critical: usize,
    pub major: usize,
    pub moderate: usize,
    pub minor: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub findings: Vec<GapFinding>,
    pub classes: ClassCounts,
    pub severities: SeverityCounts,
    pub review_flags: usize,
}

impl GapReport {
    /// Obligation ids classified as anything but Compliant.
    pub fn flagged(&self) -> Vec<&str> {
        self.findings
            .iter()
            .filter(|f| f.gap_class != GapClass::Compliant)
            .map(|f| f.obligation.obligation_id.as_str())
            .collect()
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let c = &self.classes;
        let v = &self.severities;
        let _ = writeln!(
            s,
            "Findings: {} (compliant {}, partial gap {}, full gap {})",
            self.findings.len(),
            c.compliant,
            c.partial_gap,
            c.full_gap
        );
        let _ = writeln!(
            s,
            "Severity: critical {}, major {}, moderate {}, minor {}; review flags {}",
            v.critical, v.major, v.moderate, v.minor, self.review_flags
        );
        for f in &self.findings {
            s.push('\n');
            s.push_str(&f.render_block());
        }
        s
    }
}

/// Sort by severity (most severe first, compliant last), then alignment
/// ascending, then obligation id, and tally the summary counts.
pub fn compile_report(mut findings: Vec<GapFinding>) -> GapReport {
    findings.sort_by(|a, b| {
        b.severity
            .cmp(&a.severity)
            .then(a.alignment.total_cmp(&b.alignment))
            .then_with(|| a.obligation.obligation_id.cmp(&b.obligation.obligation_id))
    });
    let mut classes = ClassCounts::default();
    let mut severities = SeverityCounts::default();
    let mut review_flags = 0;
    for f in &findings {
        match f.gap_class {
            GapClass::Compliant => classes.compliant += 1,
            GapClass::PartialGap => classes.partial_gap += 1,
            GapClass::FullGap => classes.full_gap += 1,
        }
        match f.severity {
            Some(Severity::Critical) => severities.critical += 1,
            Some(Severity::Major) => severities.major += 1,
            Some(Severity::Moderate) => severities.moderate += 1,
            Some(Severity::Minor) => severities.minor += 1,
            None => {}
        }
        if f.grounding.needs_review() {
            review_flags += 1;
        }
    }
    GapReport {
        findings,
        classes,
        severities,
        review_flags,
    }
}
