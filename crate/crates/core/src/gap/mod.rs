//! Obligation to policy alignment, gap classification and severity.
//!
//! An obligation's coverage is the best alignment over all policy clauses,
//! where alignment is dense text similarity scaled by a fuzzy entity-type
//! match. Two cut points split coverage into Compliant, Partial Gap and
//! Full Gap; non-compliant findings get an additive severity score driven by
//! modality, quantitative entities and nearby enforcement history.

mod grounding;
mod pipeline;
mod report;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use grounding::{
    content_tokens, verify_grounding, ClaimVerifier, GroundingResult, LexicalVerifier, SentenceGrounding,
};
pub use pipeline::{run_pipeline, Pipeline, PipelineOptions};
pub use report::{compile_report, ClassCounts, GapFinding, GapReport, SeverityCounts};

use crate::corpus::{cosine_sim, tokenize, Embed, Embedding};
use crate::error::{Error, Result};
use crate::extraction::{DeonticModality, EntityType, Obligation};
use crate::rkg::{NodeKind, RegulatoryGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyClause {
    pub clause_id: String,
    pub section: String,
    pub text: String,
    #[serde(default)]
    pub entity_tags: Vec<String>,
    #[serde(skip)]
    pub embedding: Embedding,
}

impl PolicyClause {
    pub fn new(clause_id: &str, section: &str, text: &str, tags: &[&str]) -> Self {
        Self {
            clause_id: clause_id.into(),
            section: section.into(),
            text: text.into(),
            entity_tags: tags.iter().map(|t| t.to_string()).collect(),
            embedding: Embedding::default(),
        }
    }
}

/// Embed every clause in place.
pub fn prepare_policies<E: Embed + ?Sized>(policies: &mut [PolicyClause], embedder: &E) {
    for p in policies {
        p.embedding = embedder.embed(&p.text);
    }
}

/// Parse a JSON array of clauses, check id uniqueness and embed them.
pub fn load_policies<E: Embed + ?Sized>(json: &str, embedder: &E) -> Result<Vec<PolicyClause>> {
    let mut policies: Vec<PolicyClause> = serde_json::from_str(json)?;
    let mut seen = std::collections::BTreeSet::new();
    for p in &policies {
        if !seen.insert(p.clause_id.as_str()) {
            return Err(Error::DuplicateId(p.clause_id.clone()));
        }
    }
    prepare_policies(&mut policies, embedder);
    Ok(policies)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynonymEntry {
    pub a: String,
    pub b: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GapConfig {
    pub delta: f64,
    /// Recall-oriented threshold used in deployment.
    pub deploy_delta: f64,
    pub delta_full: f64,
    pub tau: f64,
    pub synonym_map: Vec<SynonymEntry>,
    pub type_floor: f64,
    /// Downgrade a Compliant obligation when a cross-referenced provision in
    /// its retrieved context is not covered by any clause.
    pub context_coverage: bool,
    /// Cross-reference count at which grounded output still goes to review.
    pub review_crossrefs: usize,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            delta: 0.6,
            deploy_delta: 0.45,
            delta_full: 0.35,
            tau: 0.85,
            synonym_map: vec![SynonymEntry {
                a: "credit institution".into(),
                b: "bank".into(),
                score: 0.9,
            }],
            type_floor: 0.2,
            context_coverage: true,
            review_crossrefs: 3,
        }
    }
}

impl GapConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(0.0 <= self.delta_full && self.delta_full < self.delta && self.delta <= 1.0) {
            return bad("thresholds must satisfy 0 <= delta_full < delta <= 1");
        }
        if !(self.delta_full < self.deploy_delta && self.deploy_delta <= 1.0) {
            return bad("deploy_delta must lie in (delta_full, 1]");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.type_floor) {
            return bad("type_floor must lie in [0, 1]");
        }
        if self
            .synonym_map
            .iter()
            .any(|s| !(self.type_floor..=1.0).contains(&s.score))
        {
            return bad("synonym scores must lie in [type_floor, 1]");
        }
        Ok(())
    }

    /// Same configuration at a different evaluation threshold.
    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GapClass {
    Compliant,
    PartialGap,
    FullGap,
}

impl GapClass {
    pub const ALL: [GapClass; 3] = [GapClass::Compliant, GapClass::PartialGap, GapClass::FullGap];

    pub fn label(self) -> &'static str {
        match self {
            GapClass::Compliant => "Compliant",
            GapClass::PartialGap => "Partial Gap",
            GapClass::FullGap => "Full Gap",
        }
    }
}

impl fmt::Display for GapClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Ordered from least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Minor,
    Moderate,
    Major,
    Critical,
}

impl Severity {
    pub fn from_score(score: u32) -> Self {
        match score {
            0 | 1 => Severity::Minor,
            2 => Severity::Moderate,
            3 => Severity::Major,
            _ => Severity::Critical,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Minor => "Minor",
            Severity::Moderate => "Moderate",
            Severity::Major => "Major",
            Severity::Critical => "Critical",
        })
    }
}

fn norm_term(s: &str) -> String {
    let mut toks = tokenize(s);
    if let Some(last) = toks.last_mut() {
        if last.len() > 3 && last.ends_with('s') && !last.ends_with("ss") {
            last.pop();
        }
    }
    toks.join(" ")
}

/// Fuzzy entity match against a clause's tags: 1 on an exact surface or type
/// name match, the synonym score on a configured pair, the floor otherwise.
pub fn type_match_score(entity: &str, etype: EntityType, clause_tags: &[String], cfg: &GapConfig) -> f64 {
    let surface = norm_term(entity);
    let mut best = cfg.type_floor;
    for tag in clause_tags {
        let t = norm_term(tag);
        if t == surface || tag.eq_ignore_ascii_case(etype.name()) {
            return 1.0;
        }
        for syn in &cfg.synonym_map {
            let (a, b) = (norm_term(&syn.a), norm_term(&syn.b));
            if (a == surface && b == t) || (b == surface && a == t) {
                best = best.max(syn.score);
            }
        }
    }
    best
}

/// Alignment from a precomputed requirement embedding.
pub fn alignment_from_embedding(
    requirement: &Embedding,
    o: &Obligation,
    p: &PolicyClause,
    cfg: &GapConfig,
) -> Result<f64> {
    let sim = cosine_sim(requirement, &p.embedding)?.max(0.0);
    Ok(sim * type_match_score(&o.entity, o.entity_type, &p.entity_tags, cfg))
}

pub fn alignment_score<E: Embed + ?Sized>(
    o: &Obligation,
    p: &PolicyClause,
    cfg: &GapConfig,
    embedder: &E,
) -> Result<f64> {
    alignment_from_embedding(&embedder.embed(&o.requirement_text()), o, p, cfg)
}

/// Best clause by alignment; ties go to the smaller clause id.
pub fn best_alignment<E: Embed + ?Sized>(
    o: &Obligation,
    policies: &[PolicyClause],
    cfg: &GapConfig,
    embedder: &E,
) -> Result<Option<(String, f64)>> {
    let req = embedder.embed(&o.requirement_text());
    let mut best: Option<(&str, f64)> = None;
    for p in policies {
        let a = alignment_from_embedding(&req, o, p, cfg)?;
        let better = match best {
            None => true,
            Some((id, b)) => a > b || (a == b && p.clause_id.as_str() < id),
        };
        if better {
            best = Some((&p.clause_id, a));
        }
    }
    Ok(best.map(|(id, a)| (id.to_string(), a)))
}

pub fn classify_gap(max_alignment: f64, cfg: &GapConfig) -> GapClass {
    if max_alignment >= cfg.delta {
        GapClass::Compliant
    } else if max_alignment < cfg.delta_full {
        GapClass::FullGap
    } else {
        GapClass::PartialGap
    }
}

/// Does the obligation involve a quantitative requirement, either through a
/// mention or a threshold node implemented by its provision?
pub fn carries_threshold(o: &Obligation, g: &RegulatoryGraph) -> bool {
    o.carries_type(EntityType::ThresholdValue)
        || o.carries_type(EntityType::CapitalRequirement)
        || g.neighbors(&o.source_provision)
            .any(|n| g.node(n).is_some_and(|n| n.kind == NodeKind::Threshold))
}

pub fn enforcement_nearby(source_provision: &str, g: &RegulatoryGraph, hops: usize) -> Result<bool> {
    Ok(g.ball(source_provision, hops, false)?
        .keys()
        .any(|id| g.node(id).is_some_and(|n| n.kind == NodeKind::Enforcement)))
}

/// Rubric points for a non-compliant obligation.
pub fn severity_score(o: &Obligation, class: GapClass, g: &RegulatoryGraph) -> Result<u32> {
    if class == GapClass::Compliant {
        return Err(Error::CompliantSeverity);
    }
    let mut score = 1;
    if o.modality == DeonticModality::Prohibition || carries_threshold(o, g) {
        score += 1;
    }
    if enforcement_nearby(&o.source_provision, g, 2)? {
        score += 1;
    }
    if class == GapClass::FullGap {
        score += 1;
    }
    Ok(score)
}

pub fn score_severity(finding: &GapFinding, g: &RegulatoryGraph) -> Result<Severity> {
    severity_score(&finding.obligation, finding.gap_class, g).map(Severity::from_score)
}
