use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    best_alignment, classify_gap, compile_report, score_severity, verify_grounding, GapClass, GapConfig, GapFinding,
    GapReport, GroundingResult, LexicalVerifier, PolicyClause,
};
use crate::corpus::{cosine_sim, Document, EmbedderConfig};
use crate::error::Result;
use crate::extraction::split_sentences;
use crate::extraction::{ExtractionConfig, Extractor, Obligation};
use crate::parallel::Execution;
use crate::retrieval::{kg_rerank, Index, RetrievalConfig};
use crate::rkg::{EdgeKind, GraphConfig, GraphSnapshot, KgEdge, KgNode, NodeKind, RegulatoryGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub kg_rerank: bool,
    pub grounding: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            kg_rerank: true,
            grounding: true,
        }
    }
}

/// Extraction, retrieval and gap analysis wired together.
pub struct Pipeline {
    pub embedder: EmbedderConfig,
    pub retrieval: RetrievalConfig,
    pub gap: GapConfig,
    pub options: PipelineOptions,
    pub exec: Execution,
    extractor: Extractor,
}

impl Pipeline {
    pub fn new(
        embedder: EmbedderConfig,
        retrieval: RetrievalConfig,
        extraction: ExtractionConfig,
        gap: GapConfig,
    ) -> Result<Self> {
        embedder.validate()?;
        retrieval.validate()?;
        gap.validate()?;
        Ok(Self {
            embedder,
            retrieval,
            gap,
            options: PipelineOptions::default(),
            exec: Execution::default(),
            extractor: Extractor::new(extraction)?,
        })
    }

    pub fn with_options(mut self, options: PipelineOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn extractor(&self) -> &Extractor {
        &self.extractor
    }

    /// Retrieval context for one obligation: top-k passages, re-ranked by
    /// graph proximity when enabled.
    fn context(&self, o: &Obligation, g: &RegulatoryGraph, index: &Index) -> Result<Vec<crate::retrieval::Candidate>> {
        let query = o.requirement_text();
        let k = self.retrieval.k;
        if self.options.kg_rerank {
            let pool = index.retrieve_pool(
                &query,
                &self.retrieval,
                &self.embedder,
                self.retrieval.rerank_pool.max(k),
                Execution::Sequential,
            )?;
            let mut ranked = kg_rerank(pool, &o.source_provision, g, &self.retrieval)?;
            ranked.truncate(k);
            Ok(ranked)
        } else {
            index.retrieve_pool(&query, &self.retrieval, &self.embedder, k, Execution::Sequential)
        }
    }

    pub fn analyze_obligation(
        &self,
        o: &Obligation,
        policies: &[PolicyClause],
        g: &RegulatoryGraph,
        index: &Index,
    ) -> Result<GapFinding> {
        let context = self.context(o, g, index)?;
        let (best_clause, alignment) = match best_alignment(o, policies, &self.gap, &self.embedder)? {
            Some((id, a)) => (Some(id), a),
            None => (None, 0.0),
        };
        let mut gap_class = classify_gap(alignment, &self.gap);

        // Context passages tied to the source through provision links carry
        // requirements of their own; each must be covered by some clause.
        let linked = g.provision_ball(&o.source_provision, g.max_traversal_depth())?;
        let mut context_provisions: Vec<String> = Vec::new();
        let mut uncovered: Vec<String> = Vec::new();
        for c in &context {
            let Some(chunk) = index.chunk(&c.chunk_id) else {
                continue;
            };
            for p in &c.linked_provisions {
                if *p == o.source_provision || !linked.contains_key(p) || context_provisions.contains(p) {
                    continue;
                }
                context_provisions.push(p.clone());
                let mut coverage = 0.0f64;
                for clause in policies {
                    coverage = coverage.max(cosine_sim(&chunk.embedding, &clause.embedding)?);
                }
                if coverage < self.gap.delta {
                    uncovered.push(p.clone());
                }
            }
        }
        if self.gap.context_coverage && gap_class == GapClass::Compliant && !uncovered.is_empty() {
            gap_class = GapClass::PartialGap;
        }

        let mut citations: Vec<String> = Vec::new();
        let sources = std::iter::once(o.source_provision.as_str())
            .chain(o.resolved_targets())
            .chain(context_provisions.iter().map(String::as_str));
        let mut seen = BTreeSet::new();
        for id in sources {
            if g.contains(id) && seen.insert(id) {
                citations.push(id.to_string());
            }
        }

        let grounding = if self.options.grounding {
            verify_grounding(
                &[GapFinding::restatement(o)],
                &citations,
                g,
                &self.gap,
                o.crossrefs.len(),
                &LexicalVerifier,
            )
        } else {
            GroundingResult::default()
        };

        let best_section = best_clause
            .as_ref()
            .and_then(|id| policies.iter().find(|p| &p.clause_id == id))
            .map(|p| p.section.clone());
        let mut finding = GapFinding {
            obligation: o.clone(),
            best_clause,
            best_section,
            alignment,
            gap_class,
            severity: None,
            description: String::new(),
            recommendation: String::new(),
            grounding,
            citations,
            context: context.into_iter().map(|c| c.chunk_id).collect(),
            uncovered_context: if self.gap.context_coverage {
                uncovered
            } else {
                Vec::new()
            },
        };
        if gap_class != GapClass::Compliant {
            finding.severity = Some(score_severity(&finding, g)?);
        }
        finding.render_text();
        Ok(finding)
    }

    /// Gap analysis over already extracted obligations.
    pub fn analyze(
        &self,
        obligations: &[Obligation],
        policies: &[PolicyClause],
        g: &RegulatoryGraph,
        index: &Index,
    ) -> Result<GapReport> {
        let findings = self
            .exec
            .map(obligations, |o| self.analyze_obligation(o, policies, g, index))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(compile_report(findings))
    }

    pub fn extract(&self, docs: &[Document], g: &RegulatoryGraph) -> Result<Vec<Obligation>> {
        let mut out = Vec::new();
        for d in docs {
            out.extend(self.extractor.extract_obligations(d, g)?);
        }
        Ok(out)
    }

    /// Provision graph for a document set: one node per provision and a
    /// cross-reference edge for every citation that resolves.
    pub fn build_graph(&self, docs: &[Document], config: GraphConfig) -> Result<RegulatoryGraph> {
        let nodes = docs
            .iter()
            .flat_map(|d| {
                d.provisions
                    .iter()
                    .map(|p| KgNode::new(&p.provision_id, NodeKind::Provision, d.framework, &p.text))
            })
            .collect();
        let snapshot = GraphSnapshot {
            nodes,
            edges: Vec::new(),
        };
        let mut g = RegulatoryGraph::from_snapshot(snapshot, config, &self.embedder)?;
        let mut links = BTreeSet::new();
        for p in docs.iter().flat_map(|d| &d.provisions) {
            for s in split_sentences(&p.text) {
                for x in self.extractor.resolve_crossrefs(&s, &p.provision_id, &g)? {
                    if let Some(t) = x.target {
                        links.insert((p.provision_id.clone(), t));
                    }
                }
            }
        }
        for (src, tgt) in links {
            g.add_edge(KgEdge::new(
                format!("xref:{src}->{tgt}"),
                EdgeKind::CrossReferences,
                src,
                tgt,
            ))?;
        }
        g.refresh_embeddings(&self.embedder);
        Ok(g)
    }

    /// Extract from every document, then analyze the pooled obligations.
    pub fn run(
        &self,
        docs: &[Document],
        policies: &[PolicyClause],
        g: &RegulatoryGraph,
        index: &Index,
    ) -> Result<GapReport> {
        let obligations = self.extract(docs, g)?;
        self.analyze(&obligations, policies, g, index)
    }
}

/// Single-document entry point.
pub fn run_pipeline(
    doc: &Document,
    policies: &[PolicyClause],
    g: &RegulatoryGraph,
    index: &Index,
    pipeline: &Pipeline,
) -> Result<GapReport> {
    pipeline.run(std::slice::from_ref(doc), policies, g, index)
}
