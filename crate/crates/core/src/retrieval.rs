//! Sparse BM25, dense cosine and their convex combination, plus knowledge
//! graph re-ranking with the pending-validation fallback.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{chunk_document, cosine_sim, tokenize, Chunk, Document, Embed, Embedding};
use crate::error::{Error, Result};
use crate::rkg::{proximity_from_ball, RegulatoryGraph};
use crate::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Dense weight in the hybrid score.
    pub alpha: f64,
    /// KG proximity weight in the re-ranked score.
    pub beta: f64,
    pub k: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    /// Number of hybrid candidates handed to the KG re-ranker before the
    /// final cut to `k`.
    pub rerank_pool: usize,
    pub chunk_max_tokens: usize,
    pub chunk_overlap: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            beta: 0.3,
            k: 5,
            bm25_k1: 1.2,
            bm25_b: 0.75,
            rerank_pool: 20,
            chunk_max_tokens: 128,
            chunk_overlap: 16,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig("alpha and beta must lie in [0, 1]".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.chunk_max_tokens <= self.chunk_overlap {
            return Err(Error::InvalidWindow {
                max_tokens: self.chunk_max_tokens,
                overlap: self.chunk_overlap,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub chunk_id: String,
    pub dense: f64,
    pub sparse_norm: f64,
    pub hybrid: f64,
    pub kg: f64,
    #[serde(rename = "final")]
    pub final_score: f64,
    pub linked_provisions: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct IndexedChunk {
    pub chunk: Chunk,
    pub term_freqs: HashMap<String, u32>,
    pub length: usize,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusStats {
    pub n_chunks: usize,
    pub avg_len: f64,
    pub doc_freq: HashMap<String, usize>,
}

impl CorpusStats {
    /// Okapi IDF with plus-one smoothing, never negative.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.n_chunks as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Index {
    chunks: Vec<IndexedChunk>,
    stats: CorpusStats,
}

impl Index {
    pub fn build<E: Embed + ?Sized>(chunks: Vec<Chunk>, embedder: &E, exec: Execution) -> Self {
        let chunks: Vec<IndexedChunk> = exec.map(&chunks, |c| {
            let toks = tokenize(&c.text);
            let mut term_freqs = HashMap::new();
            for t in &toks {
                *term_freqs.entry(t.clone()).or_insert(0) += 1;
            }
            IndexedChunk {
                chunk: c.clone(),
                term_freqs,
                length: toks.len(),
                embedding: embedder.embed(&c.text),
            }
        });
        let mut doc_freq = HashMap::new();
        for c in &chunks {
            for term in c.term_freqs.keys() {
                *doc_freq.entry(term.clone()).or_insert(0) += 1;
            }
        }
        let total: usize = chunks.iter().map(|c| c.length).sum();
        let stats = CorpusStats {
            n_chunks: chunks.len(),
            avg_len: if chunks.is_empty() {
                0.0
            } else {
                total as f64 / chunks.len() as f64
            },
            doc_freq,
        };
        Self { chunks, stats }
    }

    pub fn from_documents<E: Embed + ?Sized>(docs: &[Document], cfg: &RetrievalConfig, embedder: &E) -> Result<Self> {
        let mut chunks = Vec::new();
        for d in docs {
            chunks.extend(chunk_document(d, cfg.chunk_max_tokens, cfg.chunk_overlap)?);
        }
        Ok(Self::build(chunks, embedder, Execution::default()))
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn chunks(&self) -> &[IndexedChunk] {
        &self.chunks
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&IndexedChunk> {
        self.chunks.iter().find(|c| c.chunk.chunk_id == chunk_id)
    }

    /// Score every chunk and return the best `limit` by hybrid score.
    pub fn retrieve_pool<E: Embed + ?Sized>(
        &self,
        query: &str,
        cfg: &RetrievalConfig,
        embedder: &E,
        limit: usize,
        exec: Execution,
    ) -> Result<Vec<Candidate>> {
        if self.chunks.is_empty() {
            return Ok(Vec::new());
        }
        let q_tokens = tokenize(query);
        let q_emb = embedder.embed(query);
        let raw: Vec<Result<(f64, f64)>> = exec.map(&self.chunks, |c| {
            let dense = cosine_sim(&q_emb, &c.embedding)?;
            let sparse = bm25_score(&q_tokens, c, &self.stats, cfg.bm25_k1, cfg.bm25_b);
            Ok((dense, sparse))
        });
        let raw: Vec<(f64, f64)> = raw.into_iter().collect::<Result<_>>()?;
        let sparse = normalize_sparse(&raw.iter().map(|r| r.1).collect::<Vec<_>>());
        let mut out: Vec<Candidate> = self
            .chunks
            .iter()
            .zip(raw.iter().zip(sparse))
            .map(|(c, (&(dense, _), sparse_norm))| {
                let hybrid = hybrid_score(dense, sparse_norm, cfg.alpha);
                Candidate {
                    chunk_id: c.chunk.chunk_id.clone(),
                    dense,
                    sparse_norm,
                    hybrid,
                    kg: 0.0,
                    final_score: hybrid,
                    linked_provisions: BTreeSet::from([c.chunk.provision_id.clone()]),
                }
            })
            .collect();
        out.sort_by(|a, b| by_score_desc(a.hybrid, b.hybrid).then_with(|| a.chunk_id.cmp(&b.chunk_id)));
        out.truncate(limit);
        Ok(out)
    }

    /// Top-k by hybrid score, ties broken by chunk id.
    pub fn retrieve_topk<E: Embed + ?Sized>(
        &self,
        query: &str,
        cfg: &RetrievalConfig,
        embedder: &E,
    ) -> Result<Vec<Candidate>> {
        self.retrieve_pool(query, cfg, embedder, cfg.k, Execution::default())
    }
}

fn by_score_desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Okapi BM25 over the distinct query terms.
pub fn bm25_score(query_tokens: &[String], chunk: &IndexedChunk, stats: &CorpusStats, k1: f64, b: f64) -> f64 {
    if stats.n_chunks == 0 {
        return 0.0;
    }
    let terms: BTreeSet<&String> = query_tokens.iter().collect();
    let len_norm = if stats.avg_len > 0.0 {
        1.0 - b + b * chunk.length as f64 / stats.avg_len
    } else {
        1.0
    };
    terms
        .into_iter()
        .filter_map(|t| chunk.term_freqs.get(t).map(|&tf| (t, f64::from(tf))))
        .map(|(t, tf)| stats.idf(t) * tf * (k1 + 1.0) / (tf + k1 * len_norm))
        .sum()
}

/// Min-max scaling into [0, 1]; a degenerate range maps everything to 1.
pub fn normalize_sparse(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    scores
        .iter()
        .map(|s| if range > 0.0 { (s - min) / range } else { 1.0 })
        .collect()
}

pub fn hybrid_score(dense: f64, sparse_norm: f64, alpha: f64) -> f64 {
    alpha * dense + (1.0 - alpha) * sparse_norm
}

/// Blend KG proximity into the hybrid score and re-sort.
///
/// Provisions flagged `pending_validation` are invisible to the traversal:
/// they neither count as targets nor relay paths. A flagged query provision
/// zeroes the KG term for every candidate.
pub fn kg_rerank(
    mut candidates: Vec<Candidate>,
    query_provision: &str,
    g: &RegulatoryGraph,
    cfg: &RetrievalConfig,
) -> Result<Vec<Candidate>> {
    let query = g
        .node(query_provision)
        .ok_or_else(|| Error::UnknownNode(query_provision.to_string()))?;
    let ball = if query.pending_validation {
        BTreeMap::new()
    } else {
        g.ball(query_provision, g.max_traversal_depth(), true)?
    };
    for c in &mut candidates {
        c.kg = proximity_from_ball(&ball, &c.linked_provisions);
        c.final_score = cfg.beta * c.kg + (1.0 - cfg.beta) * c.hybrid;
    }
    candidates.sort_by(|a, b| {
        by_score_desc(a.final_score, b.final_score)
            .then_with(|| by_score_desc(a.hybrid, b.hybrid))
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
    Ok(candidates)
}
