//! Rule-based obligation extraction.
//!
//! Three heads share one sentence representation: a gazetteer and pattern
//! tagger for entities, a cue-based deontic classifier, and a citation
//! detector whose spans are linked to graph provisions by a bilinear scorer.
//! [`ObligationExtractor`] is the seam for a learned replacement.

mod config;
mod sentence;
mod types;

use std::collections::BTreeSet;

use regex::Regex;

pub use config::{ExtractionConfig, LinkerWeights, DEFAULT_CITATION_PATTERNS};
pub use sentence::{split_sentences, Sentence};
pub use types::{CitationSpan, CrossRef, DeonticModality, EntityMention, EntityType, Obligation, Span};

use crate::corpus::{Document, Embedding};
use crate::error::{Error, Result};
use crate::rkg::{NodeKind, RegulatoryGraph};

const GAZETTEER_CONFIDENCE: f64 = 1.0;
const PATTERN_CONFIDENCE: f64 = 0.8;
const SUBJECT_CONFIDENCE: f64 = 0.5;
const MAIN_CLAUSE_CONFIDENCE: f64 = 0.95;
const SUBORDINATE_CONFIDENCE: f64 = 0.6;

const MONTHS: &str = "January|February|March|April|May|June|July|August|September|October|November|December";
const DETERMINERS: &[&str] = &["the", "a", "an", "each", "every", "any", "all"];

/// Anything that turns a document into obligation records.
pub trait ObligationExtractor: Sync {
    fn extract(&self, doc: &Document, g: &RegulatoryGraph) -> Result<Vec<Obligation>>;
}

/// Located deontic cue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeonticCue {
    pub modality: DeonticModality,
    pub confidence: f64,
    pub span: Span,
}

pub struct Extractor {
    cfg: ExtractionConfig,
    gazetteer: Vec<(Vec<String>, EntityType)>,
    cues: Vec<(Vec<String>, DeonticModality)>,
    citations: Vec<Regex>,
    percent: Regex,
    currency: Regex,
    date: Regex,
}

fn phrase_tokens(p: &str) -> Vec<String> {
    crate::corpus::tokenize(p)
}

fn compile(pattern: &str) -> Result<Regex> {
    Regex::new(pattern).map_err(|source| Error::Pattern {
        pattern: pattern.to_string(),
        source,
    })
}

impl Extractor {
    pub fn new(cfg: ExtractionConfig) -> Result<Self> {
        cfg.validate()?;
        let mut gazetteer = Vec::new();
        for (etype, phrases) in &cfg.gazetteer {
            for p in phrases {
                let toks = phrase_tokens(p);
                if !toks.is_empty() {
                    gazetteer.push((toks, *etype));
                }
            }
        }
        let mut cues = Vec::new();
        for (list, m) in [
            (&cfg.prohibition_cues, DeonticModality::Prohibition),
            (&cfg.obligation_cues, DeonticModality::Obligation),
            (&cfg.permission_cues, DeonticModality::Permission),
            (&cfg.recommendation_cues, DeonticModality::Recommendation),
        ] {
            for c in list {
                cues.push((phrase_tokens(c), m));
            }
        }
        let citations = cfg
            .citation_patterns
            .iter()
            .map(|p| compile(p))
            .collect::<Result<_>>()?;
        Ok(Self {
            gazetteer,
            cues,
            citations,
            percent: compile(r"(?i)\d+(?:\.\d+)?\s?(?:%|percent\b|per\s+cent\b)")?,
            currency: compile(
                r"(?i)(?:[$€£]\s?\d[\d,]*(?:\.\d+)?(?:\s?(?:million|billion|thousand|mn|bn))?|\b(?:USD|EUR|GBP)\s?\d[\d,]*(?:\.\d+)?(?:\s?(?:million|billion))?|\b\d[\d,]*(?:\.\d+)?\s?(?:million\s+|billion\s+)?(?:USD|EUR|GBP|dollars|euros)\b)",
            )?,
            date: compile(&format!(
                r"(?i)\b(?:(?:{MONTHS})\s+\d{{1,2}},?\s+\d{{4}}|\d{{1,2}}\s+(?:{MONTHS})\s+\d{{4}}|\d{{4}}-\d{{2}}-\d{{2}})\b"
            ))?,
            cfg,
        })
    }

    pub fn config(&self) -> &ExtractionConfig {
        &self.cfg
    }

    fn byte_span(s: &Sentence, start: usize, end: usize) -> Option<Span> {
        let first = s.tokens.iter().position(|t| t.start >= start)?;
        let last = s.tokens.iter().rposition(|t| t.end <= end)?;
        (first <= last).then_some(Span {
            start: first,
            end: last + 1,
        })
    }

    /// Longest-match gazetteer plus currency, percent, date and citation
    /// patterns. Overlaps resolve longest-first, then leftmost.
    pub fn extract_entities(&self, s: &Sentence) -> Vec<EntityMention> {
        let words = s.words();
        let mut cands: Vec<EntityMention> = Vec::new();
        for i in 0..words.len() {
            for (phrase, etype) in &self.gazetteer {
                let end = i + phrase.len();
                if end <= words.len() && words[i..end].iter().zip(phrase).all(|(w, p)| *w == p) {
                    cands.push(EntityMention {
                        span: Span { start: i, end },
                        etype: *etype,
                        surface: s.surface(i, end).to_string(),
                        confidence: GAZETTEER_CONFIDENCE,
                    });
                }
            }
        }
        let penalty = words.iter().any(|w| self.cfg.penalty_context.iter().any(|p| p == w));
        let currency_type = if penalty {
            EntityType::PenaltyAmount
        } else {
            EntityType::ThresholdValue
        };
        let patterns = [
            (&self.percent, EntityType::ThresholdValue),
            (&self.currency, currency_type),
            (&self.date, EntityType::EffectiveDate),
        ];
        for (re, etype) in patterns {
            for m in re.find_iter(&s.text) {
                if let Some(span) = Self::byte_span(s, m.start(), m.end()) {
                    cands.push(EntityMention {
                        span,
                        etype,
                        surface: m.as_str().trim().to_string(),
                        confidence: PATTERN_CONFIDENCE,
                    });
                }
            }
        }
        for c in self.detect_citations(s) {
            cands.push(EntityMention {
                span: c.span,
                etype: EntityType::LegalReference,
                surface: c.text,
                confidence: PATTERN_CONFIDENCE,
            });
        }
        cands.sort_by(|a, b| {
            b.span
                .len()
                .cmp(&a.span.len())
                .then(a.span.start.cmp(&b.span.start))
                .then(b.confidence.total_cmp(&a.confidence))
        });
        let mut kept: Vec<EntityMention> = Vec::new();
        for c in cands {
            if !kept.iter().any(|k| k.span.overlaps(&c.span)) {
                kept.push(c);
            }
        }
        kept.sort_by_key(|m| m.span.start);
        kept
    }

    fn is_subordinate(&self, s: &Sentence, token: usize) -> bool {
        (0..token).any(|j| {
            self.cfg.subordinators.iter().any(|w| *w == s.tokens[j].text)
                && !s.text[s.tokens[j].end..s.tokens[token].start].contains([',', ';'])
        })
    }

    /// Locate the governing deontic cue. Negated modals take precedence over
    /// plain ones, then obligation, permission, recommendation.
    pub fn deontic_cue(&self, s: &Sentence) -> Option<DeonticCue> {
        let words = s.words();
        let mut hits: Vec<(Span, DeonticModality)> = Vec::new();
        for (phrase, modality) in &self.cues {
            if phrase.is_empty() {
                continue;
            }
            for i in 0..words.len().saturating_sub(phrase.len() - 1) {
                if words[i..i + phrase.len()].iter().zip(phrase).all(|(w, p)| *w == p) {
                    let span = Span {
                        start: i,
                        end: i + phrase.len(),
                    };
                    if !hits.iter().any(|(h, _)| h.overlaps(&span)) {
                        hits.push((span, *modality));
                    }
                }
            }
        }
        let best = [
            DeonticModality::Prohibition,
            DeonticModality::Obligation,
            DeonticModality::Permission,
            DeonticModality::Recommendation,
        ]
        .into_iter()
        .find(|m| hits.iter().any(|(_, hm)| hm == m))?;
        let mut occurrences: Vec<Span> = hits.iter().filter(|(_, m)| *m == best).map(|(s, _)| *s).collect();
        occurrences.sort_by_key(|s| s.start);
        let main = occurrences.iter().find(|sp| !self.is_subordinate(s, sp.start));
        Some(match main {
            Some(sp) => DeonticCue {
                modality: best,
                confidence: MAIN_CLAUSE_CONFIDENCE,
                span: *sp,
            },
            None => DeonticCue {
                modality: best,
                confidence: SUBORDINATE_CONFIDENCE,
                span: occurrences[0],
            },
        })
    }

    pub fn classify_deontic(&self, s: &Sentence) -> Option<(DeonticModality, f64)> {
        self.deontic_cue(s).map(|c| (c.modality, c.confidence))
    }

    /// Citation spans in textual order; overlapping matches keep the longest.
    pub fn detect_citations(&self, s: &Sentence) -> Vec<CitationSpan> {
        let mut found: Vec<(usize, usize)> = Vec::new();
        for re in &self.citations {
            found.extend(re.find_iter(&s.text).map(|m| (m.start(), m.end())));
        }
        found.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
        let mut kept: Vec<(usize, usize)> = Vec::new();
        for f in found {
            if !kept.iter().any(|k| f.0 < k.1 && k.0 < f.1) {
                kept.push(f);
            }
        }
        kept.sort();
        kept.into_iter()
            .filter_map(|(b0, b1)| {
                Self::byte_span(s, b0, b1).map(|span| CitationSpan {
                    text: s.text[b0..b1].to_string(),
                    byte_start: b0,
                    byte_end: b1,
                    span,
                })
            })
            .collect()
    }

    /// Link each citation to the best-scoring provision whose id or text
    /// contains the normalized citation. Targets below the link threshold
    /// are left unresolved with the best score recorded.
    pub fn resolve_crossrefs(
        &self,
        s: &Sentence,
        source_provision: &str,
        g: &RegulatoryGraph,
    ) -> Result<Vec<CrossRef>> {
        let mut out = Vec::new();
        for cite in self.detect_citations(s) {
            let key = citation_key(&cite.text);
            if key.is_empty() {
                continue;
            }
            let mut best: Option<(&str, f64)> = None;
            for node in g.nodes() {
                if node.kind != NodeKind::Provision || node.node_id == source_provision {
                    continue;
                }
                if !(contains_run(&citation_pieces(&node.node_id), &key)
                    || contains_run(&citation_pieces(&node.text), &key))
                {
                    continue;
                }
                let src = match g.node(source_provision) {
                    Some(n) if !n.embedding.values.is_empty() => n.embedding.clone(),
                    _ => Embedding::zeros(node.embedding.dim()),
                };
                let score = bilinear_link_score(&src, &node.embedding, &self.cfg.linker)?;
                if best.is_none_or(|(_, b)| score > b) {
                    best = Some((node.node_id.as_str(), score));
                }
            }
            let (target, link_confidence) = match best {
                Some((id, score)) if score >= self.cfg.link_threshold => (Some(id.to_string()), score),
                Some((_, score)) => (None, score),
                None => (None, 0.0),
            };
            out.push(CrossRef {
                source_span: cite.span,
                citation_text: cite.text,
                target,
                link_confidence,
            });
        }
        Ok(out)
    }

    fn condition_span(&self, s: &Sentence, cue: &Span) -> Option<(usize, usize)> {
        let words = s.words();
        let content_end = s.content_end();
        for (i, _) in words.iter().enumerate() {
            let marker_len = self.cfg.condition_markers.iter().find_map(|m| {
                let mt = phrase_tokens(m);
                (i + mt.len() <= words.len() && words[i..i + mt.len()].iter().zip(&mt).all(|(w, p)| *w == p))
                    .then_some(mt.len())
            });
            if marker_len.is_none() {
                continue;
            }
            let b0 = s.tokens[i].start;
            let b1 = s.text[b0..content_end]
                .find([',', ';'])
                .map_or(content_end, |off| b0 + off);
            let cue_b = s.tokens[cue.start].start;
            if (b0..b1).contains(&cue_b) {
                return None;
            }
            return Some((b0, b1));
        }
        None
    }

    /// Assemble an obligation record from one sentence, or `None` when the
    /// sentence carries no obligation or prohibition cue.
    pub fn obligation_from_sentence(
        &self,
        s: &Sentence,
        obligation_id: String,
        source_provision: &str,
        g: &RegulatoryGraph,
    ) -> Result<Option<Obligation>> {
        let Some(cue) = self.deontic_cue(s) else {
            return Ok(None);
        };
        if !cue.modality.is_gap_relevant() {
            return Ok(None);
        }
        let condition = self.condition_span(s, &cue.span);
        let cue_end = s.tokens[cue.span.end - 1].end;
        let content_end = s.content_end().max(cue_end);
        let mut action = String::new();
        match condition {
            Some((c0, c1)) if c0 >= cue_end => {
                action.push_str(&s.text[cue_end..c0]);
                action.push(' ');
                action.push_str(&s.text[c1.min(content_end)..content_end]);
            }
            _ => action.push_str(&s.text[cue_end..content_end]),
        }
        let action = tidy(&action);
        let condition_text = condition.map(|(c0, c1)| tidy(&s.text[c0..c1]));

        let mentions = self.extract_entities(s);
        let preferred = mentions
            .iter()
            .filter(|m| matches!(m.etype, EntityType::RegulatedEntity | EntityType::ReportingEntity))
            .fold(None::<&EntityMention>, |best, m| match best {
                Some(b) if b.confidence >= m.confidence => Some(b),
                _ => Some(m),
            });
        let (entity, entity_type, entity_conf) = match preferred.or(mentions.first()) {
            Some(m) => (m.surface.clone(), m.etype, m.confidence),
            None => {
                let start_byte = match condition {
                    Some((c0, c1)) if c0 < s.tokens[cue.span.start].start => c1,
                    _ => 0,
                };
                let mut first = s
                    .tokens
                    .iter()
                    .position(|t| t.start >= start_byte)
                    .unwrap_or(cue.span.start);
                while first < cue.span.start && DETERMINERS.contains(&s.tokens[first].text.as_str()) {
                    first += 1;
                }
                (
                    s.surface(first, cue.span.start).to_string(),
                    EntityType::RegulatedEntity,
                    SUBJECT_CONFIDENCE,
                )
            }
        };
        let crossrefs = self.resolve_crossrefs(s, source_provision, g)?;
        Ok(Some(Obligation {
            obligation_id,
            entity,
            entity_type,
            action,
            modality: cue.modality,
            condition: condition_text,
            source_provision: source_provision.to_string(),
            crossrefs,
            confidence: cue.confidence.min(entity_conf),
            mentions,
        }))
    }

    /// One record per obligation or prohibition sentence, in document order.
    /// Ids are `<provision_id>#<sentence index>`.
    pub fn extract_obligations(&self, doc: &Document, g: &RegulatoryGraph) -> Result<Vec<Obligation>> {
        let mut out = Vec::new();
        for prov in &doc.provisions {
            for (i, s) in split_sentences(&prov.text).iter().enumerate() {
                let id = format!("{}#{}", prov.provision_id, i);
                if let Some(o) = self.obligation_from_sentence(s, id, &prov.provision_id, g)? {
                    out.push(o);
                }
            }
        }
        Ok(out)
    }
}

impl ObligationExtractor for Extractor {
    fn extract(&self, doc: &Document, g: &RegulatoryGraph) -> Result<Vec<Obligation>> {
        self.extract_obligations(doc, g)
    }
}

fn tidy(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_matches(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .to_string()
}

/// Lowercased alphanumeric pieces split at letter/digit boundaries, with
/// `¶` read as `para` and `article` folded to `art`.
pub fn citation_pieces(text: &str) -> Vec<String> {
    let spaced = text.replace('¶', " para ").replace('§', " ");
    let mut pieces = Vec::new();
    for run in spaced.split(|c: char| !c.is_alphanumeric()).filter(|r| !r.is_empty()) {
        let mut cur = String::new();
        let mut cur_digit = None;
        for c in run.chars() {
            let d = c.is_ascii_digit();
            if cur_digit.is_some_and(|cd| cd != d) {
                pieces.push(std::mem::take(&mut cur));
            }
            cur.extend(c.to_lowercase());
            cur_digit = Some(d);
        }
        pieces.push(cur);
    }
    for p in &mut pieces {
        match p.as_str() {
            "article" | "articles" => *p = "art".into(),
            "paragraph" | "paragraphs" => *p = "para".into(),
            _ => {}
        }
    }
    pieces
}

/// Normalized citation: the pieces of the citation up to any `of <act>`
/// qualifier.
pub fn citation_key(citation: &str) -> Vec<String> {
    let lower = citation.to_lowercase();
    let head = lower.find(" of ").map_or(citation, |i| &citation[..i]);
    citation_pieces(head)
}

fn contains_run(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `logistic(src^T W tgt)`.
pub fn bilinear_link_score(src: &Embedding, tgt: &Embedding, w: &LinkerWeights) -> Result<f64> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch {
            left: src.dim(),
            right: tgt.dim(),
        });
    }
    let x = match w {
        LinkerWeights::Identity => src.values.iter().zip(&tgt.values).map(|(a, b)| a * b).sum(),
        LinkerWeights::Dense { dim, values } => {
            if *dim != src.dim() {
                return Err(Error::DimensionMismatch {
                    left: *dim,
                    right: src.dim(),
                });
            }
            let mut acc = 0.0;
            for (i, si) in src.values.iter().enumerate() {
                let row = &values[i * dim..(i + 1) * dim];
                acc += si * row.iter().zip(&tgt.values).map(|(wij, tj)| wij * tj).sum::<f64>();
            }
            acc
        }
    };
    Ok(logistic(x))
}

/// Weighted sum of the three head losses.
pub fn multitask_loss(l_ner: f64, l_deontic: f64, l_xref: f64, cfg: &ExtractionConfig) -> Result<f64> {
    for l in [l_ner, l_deontic, l_xref] {
        if l < 0.0 {
            return Err(Error::NegativeLoss(l));
        }
    }
    Ok(cfg.lambda1 * l_ner + cfg.lambda2 * l_deontic + cfg.lambda3 * l_xref)
}

/// Provision ids cited by any resolved cross-reference, in first-seen order.
pub fn resolved_targets(obligations: &[Obligation]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    obligations
        .iter()
        .flat_map(|o| o.resolved_targets())
        .filter(|t| seen.insert(t.to_string()))
        .map(str::to_string)
        .collect()
}
