use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::GapConfig;
use crate::corpus::tokenize;
use crate::rkg::RegulatoryGraph;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "any", "are", "as", "at", "be", "by", "each", "for", "from", "has", "have", "in", "is", "it",
    "its", "of", "on", "or", "such", "that", "the", "their", "this", "to", "under", "which", "with",
];

/// Lowercased tokens with stopwords removed.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Scores how well a claim is supported by evidence texts, in [0, 1].
pub trait ClaimVerifier: Sync {
    fn support(&self, claim: &str, evidence: &[&str]) -> f64;
}

/// Fraction of the claim's distinct content tokens found in the evidence.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalVerifier;

impl ClaimVerifier for LexicalVerifier {
    fn support(&self, claim: &str, evidence: &[&str]) -> f64 {
        let claim: BTreeSet<String> = content_tokens(claim).into_iter().collect();
        if claim.is_empty() {
            return 0.0;
        }
        let pool: BTreeSet<String> = evidence.iter().flat_map(|e| tokenize(e)).collect();
        claim.iter().filter(|t| pool.contains(*t)).count() as f64 / claim.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceGrounding {
    pub sentence: String,
    pub score: f64,
    pub grounded: bool,
    pub flagged_for_review: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub sentences: Vec<SentenceGrounding>,
    pub cited_provisions: Vec<String>,
}

impl GroundingResult {
    pub fn grounded_count(&self) -> usize {
        self.sentences.iter().filter(|s| s.grounded).count()
    }

    pub fn needs_review(&self) -> bool {
        self.sentences.iter().any(|s| s.flagged_for_review)
    }

    pub fn mean_score(&self) -> f64 {
        if self.sentences.is_empty() {
            return 0.0;
        }
        self.sentences.iter().map(|s| s.score).sum::<f64>() / self.sentences.len() as f64
    }
}

/// Check every claim against the union of the cited provisions' texts.
pub fn verify_grounding<V: ClaimVerifier + ?Sized>(
    claims: &[String],
    cited: &[String],
    g: &RegulatoryGraph,
    cfg: &GapConfig,
    crossref_count: usize,
    verifier: &V,
) -> GroundingResult {
    let all_exist = cited.iter().all(|id| g.contains(id));
    let evidence: Vec<&str> = cited
        .iter()
        .filter_map(|id| g.node(id))
        .map(|n| n.text.as_str())
        .collect();
    let many_refs = crossref_count >= cfg.review_crossrefs;
    let sentences = claims
        .iter()
        .map(|c| {
            let score = verifier.support(c, &evidence);
            let grounded = all_exist && score >= cfg.tau;
            SentenceGrounding {
                sentence: c.clone(),
                score,
                grounded,
                flagged_for_review: !grounded || many_refs,
            }
        })
        .collect();
    GroundingResult {
        sentences,
        cited_provisions: cited.to_vec(),
    }
}
