//! Regulatory knowledge graph.
//!
//! Typed multigraph over provisions, entities, obligations, thresholds and
//! enforcement actions. Traversal ignores edge direction. Node embeddings are
//! the node's own text embedding smoothed with the mean of its 1-hop
//! neighbours, so a change to one node can move embeddings at most one hop
//! away; incremental ingestion recomputes the 2-hop ball around every touched
//! node, which covers that dependency with room to spare.
//!
//! Nodes inserted incrementally carry `pending_validation` until the next
//! [`RegulatoryGraph::nightly_rebuild`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::corpus::{Embed, Embedding, Framework};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Provision,
    Entity,
    Obligation,
    Threshold,
    Enforcement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    Amends,
    Supersedes,
    CrossReferences,
    Implements,
    AppliesTo,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 5] = [
        EdgeKind::Amends,
        EdgeKind::Supersedes,
        EdgeKind::CrossReferences,
        EdgeKind::Implements,
        EdgeKind::AppliesTo,
    ];

    /// Endpoint schema. Provision links are provision to provision;
    /// `Implements` attaches obligations and quantitative thresholds to their
    /// provision; `AppliesTo` binds obligations to entities and enforcement
    /// actions to the provision or entity they sanctioned.
    pub fn allows(self, source: NodeKind, target: NodeKind) -> bool {
        use NodeKind::*;
        match self {
            EdgeKind::Amends | EdgeKind::Supersedes | EdgeKind::CrossReferences => {
                source == Provision && target == Provision
            }
            EdgeKind::Implements => source == Provision && matches!(target, Obligation | Threshold),
            EdgeKind::AppliesTo => matches!(
                (source, target),
                (Obligation, Entity) | (Enforcement, Provision) | (Enforcement, Entity)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgNode {
    pub node_id: String,
    pub kind: NodeKind,
    pub text: String,
    pub framework: Framework,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default)]
    pub pending_validation: bool,
    /// Derived state; recomputed on load and rebuild.
    #[serde(skip)]
    pub embedding: Embedding,
}

impl KgNode {
    pub fn new(id: impl Into<String>, kind: NodeKind, framework: Framework, text: impl Into<String>) -> Self {
        Self {
            node_id: id.into(),
            kind,
            text: text.into(),
            framework,
            attributes: BTreeMap::new(),
            pending_validation: false,
            embedding: Embedding::default(),
        }
    }

    pub fn with_attr(mut self, key: &str, value: &str) -> Self {
        self.attributes.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgEdge {
    pub edge_id: String,
    pub kind: EdgeKind,
    pub source: String,
    pub target: String,
    pub confidence: f64,
}

impl KgEdge {
    pub fn new(id: impl Into<String>, kind: EdgeKind, source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            edge_id: id.into(),
            kind,
            source: source.into(),
            target: target.into(),
            confidence: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    pub max_traversal_depth: usize,
    /// Weight of the neighbour mean in node embeddings.
    pub neighbor_smoothing: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            max_traversal_depth: 5,
            neighbor_smoothing: 0.25,
        }
    }
}

/// On-disk form: nodes and edges sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub nodes: Vec<KgNode>,
    pub edges: Vec<KgEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub nodes_by_kind: BTreeMap<NodeKind, usize>,
    pub edges_by_kind: BTreeMap<EdgeKind, usize>,
    pub pending_validation: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RegulatoryGraph {
    nodes: BTreeMap<String, KgNode>,
    edges: Vec<KgEdge>,
    adjacency: BTreeMap<String, BTreeSet<String>>,
    config: GraphConfig,
}

impl RegulatoryGraph {
    pub fn new(config: GraphConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    pub fn max_traversal_depth(&self) -> usize {
        self.config.max_traversal_depth
    }

    pub fn node(&self, id: &str) -> Option<&KgNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &KgNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> &[KgEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, id: &str) -> impl Iterator<Item = &str> {
        self.adjacency.get(id).into_iter().flatten().map(String::as_str)
    }

    fn require(&self, id: &str) -> Result<&KgNode> {
        self.nodes.get(id).ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    /// Insert or replace a node. Replacing a node with a different kind is
    /// rejected while edges still reference it.
    pub fn upsert_node(&mut self, node: KgNode) -> Result<()> {
        if let Some(old) = self.nodes.get(&node.node_id) {
            if old.kind != node.kind && self.adjacency.get(&node.node_id).is_some_and(|n| !n.is_empty()) {
                for e in self
                    .edges
                    .iter()
                    .filter(|e| e.source == node.node_id || e.target == node.node_id)
                {
                    let (s, t) = if e.source == node.node_id {
                        (node.kind, self.nodes[&e.target].kind)
                    } else {
                        (self.nodes[&e.source].kind, node.kind)
                    };
                    if !e.kind.allows(s, t) {
                        return Err(Error::SchemaViolation {
                            edge_id: e.edge_id.clone(),
                            kind: e.kind,
                            source_kind: s,
                            target_kind: t,
                        });
                    }
                }
            }
        }
        self.adjacency.entry(node.node_id.clone()).or_default();
        self.nodes.insert(node.node_id.clone(), node);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: KgEdge) -> Result<()> {
        let source = self.require(&edge.source)?.kind;
        let target = self.require(&edge.target)?.kind;
        if !edge.kind.allows(source, target) {
            return Err(Error::SchemaViolation {
                edge_id: edge.edge_id,
                kind: edge.kind,
                source_kind: source,
                target_kind: target,
            });
        }
        if self.edges.iter().any(|e| e.edge_id == edge.edge_id) {
            return Err(Error::DuplicateId(edge.edge_id));
        }
        if edge.source != edge.target {
            self.adjacency
                .entry(edge.source.clone())
                .or_default()
                .insert(edge.target.clone());
            self.adjacency
                .entry(edge.target.clone())
                .or_default()
                .insert(edge.source.clone());
        }
        self.edges.push(edge);
        Ok(())
    }

    /// Breadth-first hop distances from `start` up to `radius`. With
    /// `skip_pending`, flagged nodes are neither reported nor traversed
    /// (the start node is always reported).
    pub fn ball(&self, start: &str, radius: usize, skip_pending: bool) -> Result<BTreeMap<String, usize>> {
        self.ball_where(start, radius, |n| !(skip_pending && n.pending_validation))
    }

    /// Hop distances over validated provisions only, i.e. along amendment,
    /// supersession and cross-reference links.
    pub fn provision_ball(&self, start: &str, radius: usize) -> Result<BTreeMap<String, usize>> {
        self.ball_where(start, radius, |n| {
            n.kind == NodeKind::Provision && !n.pending_validation
        })
    }

    fn ball_where<F: Fn(&KgNode) -> bool>(
        &self,
        start: &str,
        radius: usize,
        keep: F,
    ) -> Result<BTreeMap<String, usize>> {
        self.require(start)?;
        let mut dist = BTreeMap::new();
        dist.insert(start.to_string(), 0usize);
        let mut queue = VecDeque::from([(start, 0usize)]);
        while let Some((id, d)) = queue.pop_front() {
            if d == radius {
                continue;
            }
            for nb in self.neighbors(id) {
                if dist.contains_key(nb) || !keep(&self.nodes[nb]) {
                    continue;
                }
                dist.insert(nb.to_string(), d + 1);
                queue.push_back((nb, d + 1));
            }
        }
        Ok(dist)
    }

    /// Minimum hop count between `a` and `b`, or `None` beyond `max_depth`.
    pub fn graph_distance(&self, a: &str, b: &str, max_depth: usize) -> Result<Option<usize>> {
        self.require(b)?;
        if a == b {
            self.require(a)?;
            return Ok(Some(0));
        }
        Ok(self.ball(a, max_depth, false)?.get(b).copied())
    }

    /// `1 / (1 + d_min)` over the passage-linked provisions reachable within
    /// the traversal depth cap; 0 when none is reachable.
    pub fn kg_proximity(&self, query: &str, passage_provisions: &BTreeSet<String>) -> Result<f64> {
        let ball = self.ball(query, self.config.max_traversal_depth, false)?;
        Ok(proximity_from_ball(&ball, passage_provisions))
    }

    /// Smoothed embedding of one node, computed from current node texts.
    pub fn node_embedding<E: Embed + ?Sized>(&self, id: &str, embedder: &E, mu: f64) -> Result<Embedding> {
        let node = self.require(id)?;
        let own = embedder.embed(&node.text);
        let neighbors: Vec<Embedding> = self
            .neighbors(id)
            .map(|n| embedder.embed(&self.nodes[n].text))
            .collect();
        Ok(smooth(own, &neighbors, mu))
    }

    fn recompute_embeddings<E: Embed + ?Sized>(&mut self, ids: &BTreeSet<String>, embedder: &E) {
        let mu = self.config.neighbor_smoothing;
        let mut needed: BTreeSet<&str> = BTreeSet::new();
        for id in ids {
            needed.insert(id);
            needed.extend(self.neighbors(id));
        }
        let needed: Vec<&str> = needed.into_iter().collect();
        let base: BTreeMap<&str, Embedding> = crate::Execution::default()
            .map(&needed, |id| (*id, embedder.embed(&self.nodes[*id].text)))
            .into_iter()
            .collect();
        let targets: Vec<&String> = ids.iter().collect();
        let fresh = crate::Execution::default().map(&targets, |id| {
            let nbrs: Vec<Embedding> = self.neighbors(id).map(|n| base[n].clone()).collect();
            smooth(base[id.as_str()].clone(), &nbrs, mu)
        });
        for (id, emb) in ids.iter().zip(fresh) {
            if let Some(node) = self.nodes.get_mut(id) {
                node.embedding = emb;
            }
        }
    }

    /// Insert a batch atomically. New nodes are flagged `pending_validation`;
    /// the returned set is the 2-hop ball around every inserted node and
    /// every new edge endpoint, whose embeddings have been recomputed.
    pub fn incremental_ingest<E: Embed + ?Sized>(
        &mut self,
        new_nodes: Vec<KgNode>,
        new_edges: Vec<KgEdge>,
        embedder: &E,
    ) -> Result<BTreeSet<String>> {
        if new_nodes.is_empty() && new_edges.is_empty() {
            return Ok(BTreeSet::new());
        }
        let mut staged = self.clone();
        let mut seeds: BTreeSet<String> = BTreeSet::new();
        let mut batch_ids = BTreeSet::new();
        for mut node in new_nodes {
            if !batch_ids.insert(node.node_id.clone()) {
                return Err(Error::DuplicateId(node.node_id));
            }
            node.pending_validation = true;
            seeds.insert(node.node_id.clone());
            staged.upsert_node(node)?;
        }
        for edge in new_edges {
            seeds.insert(edge.source.clone());
            seeds.insert(edge.target.clone());
            staged.add_edge(edge)?;
        }
        let mut recompute = BTreeSet::new();
        for seed in &seeds {
            recompute.extend(staged.ball(seed, 2, false)?.into_keys());
        }
        staged.recompute_embeddings(&recompute, embedder);
        *self = staged;
        Ok(recompute)
    }

    /// Recompute every embedding from scratch and clear all flags.
    pub fn nightly_rebuild<E: Embed + ?Sized>(&mut self, embedder: &E) {
        let all: BTreeSet<String> = self.nodes.keys().cloned().collect();
        self.recompute_embeddings(&all, embedder);
        for node in self.nodes.values_mut() {
            node.pending_validation = false;
        }
    }

    /// Recompute embeddings without touching validation flags (used on load).
    pub fn refresh_embeddings<E: Embed + ?Sized>(&mut self, embedder: &E) {
        let all: BTreeSet<String> = self.nodes.keys().cloned().collect();
        self.recompute_embeddings(&all, embedder);
    }

    pub fn pending_count(&self) -> usize {
        self.nodes.values().filter(|n| n.pending_validation).count()
    }

    pub fn stats(&self) -> GraphStats {
        let mut nodes_by_kind = BTreeMap::new();
        for n in self.nodes.values() {
            *nodes_by_kind.entry(n.kind).or_default() += 1;
        }
        let mut edges_by_kind = BTreeMap::new();
        for e in &self.edges {
            *edges_by_kind.entry(e.kind).or_default() += 1;
        }
        GraphStats {
            nodes_by_kind,
            edges_by_kind,
            pending_validation: self.pending_count(),
        }
    }

    pub fn to_snapshot(&self) -> GraphSnapshot {
        let mut edges = self.edges.clone();
        edges.sort_by(|a, b| a.edge_id.cmp(&b.edge_id));
        GraphSnapshot {
            nodes: self.nodes.values().cloned().collect(),
            edges,
        }
    }

    /// Rebuild a graph from a snapshot, validating the schema and computing
    /// embeddings. Validation flags are preserved.
    pub fn from_snapshot<E: Embed + ?Sized>(
        snapshot: GraphSnapshot,
        config: GraphConfig,
        embedder: &E,
    ) -> Result<Self> {
        let mut g = RegulatoryGraph::new(config);
        for node in snapshot.nodes {
            if g.contains(&node.node_id) {
                return Err(Error::DuplicateId(node.node_id));
            }
            g.upsert_node(node)?;
        }
        for edge in snapshot.edges {
            g.add_edge(edge)?;
        }
        g.refresh_embeddings(embedder);
        Ok(g)
    }
}

pub(crate) fn proximity_from_ball(ball: &BTreeMap<String, usize>, linked: &BTreeSet<String>) -> f64 {
    linked
        .iter()
        .filter_map(|p| ball.get(p))
        .min()
        .map_or(0.0, |&d| 1.0 / (1.0 + d as f64))
}

fn smooth(own: Embedding, neighbors: &[Embedding], mu: f64) -> Embedding {
    if neighbors.is_empty() || mu == 0.0 {
        return own;
    }
    let mut values = own.values;
    let count = neighbors.len() as f64;
    for (i, v) in values.iter_mut().enumerate() {
        let sum: f64 = neighbors.iter().map(|n| n.values[i]).sum();
        *v += mu * (sum / count);
    }
    Embedding::from_values(values).normalized()
}

/// Indices whose value falls more than two rolling standard deviations below
/// the mean of the preceding `window` values. The first `window` values never
/// trigger; with zero spread any strict drop triggers.
pub fn detect_anomaly(stream: &[f64], window: usize) -> Result<Vec<usize>> {
    if window < 2 {
        return Err(Error::InvalidConfig(format!("anomaly window {window} < 2")));
    }
    let mut triggers = Vec::new();
    for i in window..stream.len() {
        let prev = &stream[i - window..i];
        let mean = prev.iter().sum::<f64>() / window as f64;
        let var = prev.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / window as f64;
        if stream[i] < mean - 2.0 * var.sqrt() {
            triggers.push(i);
        }
    }
    Ok(triggers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{embed_text, EmbedderConfig};

    fn prov(id: &str, text: &str) -> KgNode {
        KgNode::new(id, NodeKind::Provision, Framework::Basel3, text)
    }

    fn xref(id: &str, s: &str, t: &str) -> KgEdge {
        KgEdge::new(id, EdgeKind::CrossReferences, s, t)
    }

    #[test]
    fn upsert_semantics() {
        let mut g = RegulatoryGraph::new(GraphConfig::default());
        g.upsert_node(prov("a", "one")).unwrap();
        assert_eq!(g.node_count(), 1);
        g.upsert_node(prov("a", "two")).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.node("a").unwrap().text, "two");
        g.upsert_node(prov("b", "")).unwrap();
        g.upsert_node(prov("c", "")).unwrap();
        assert_eq!(g.node_count(), 3);
    }

    #[test]
    fn edge_schema() {
        let mut g = RegulatoryGraph::new(GraphConfig::default());
        g.upsert_node(prov("p1", "")).unwrap();
        g.upsert_node(prov("p2", "")).unwrap();
        g.upsert_node(KgNode::new("o1", NodeKind::Obligation, Framework::Basel3, ""))
            .unwrap();
        g.upsert_node(KgNode::new("e1", NodeKind::Entity, Framework::Basel3, "bank"))
            .unwrap();
        g.add_edge(xref("x1", "p1", "p2")).unwrap();
        g.add_edge(KgEdge::new("i1", EdgeKind::Implements, "p1", "o1")).unwrap();
        let err = g
            .add_edge(KgEdge::new("a1", EdgeKind::AppliesTo, "p1", "e1"))
            .unwrap_err();
        assert!(matches!(err, Error::SchemaViolation { .. }));
        let err = g.add_edge(xref("x2", "p1", "missing")).unwrap_err();
        assert!(matches!(err, Error::UnknownNode(_)));
        assert!(matches!(g.add_edge(xref("x1", "p2", "p1")), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn distances_and_proximity() {
        let mut g = RegulatoryGraph::new(GraphConfig::default());
        for id in ["d424-para50", "d295-para28", "crr-art412-1", "far"] {
            g.upsert_node(prov(id, "")).unwrap();
        }
        g.add_edge(xref("e1", "d424-para50", "d295-para28")).unwrap();
        g.add_edge(xref("e2", "d295-para28", "crr-art412-1")).unwrap();
        assert_eq!(g.graph_distance("far", "far", 5).unwrap(), Some(0));
        assert_eq!(g.graph_distance("d424-para50", "d295-para28", 5).unwrap(), Some(1));
        assert_eq!(g.graph_distance("crr-art412-1", "d295-para28", 5).unwrap(), Some(1));
        assert_eq!(g.graph_distance("d424-para50", "crr-art412-1", 5).unwrap(), Some(2));
        assert_eq!(g.graph_distance("d424-para50", "crr-art412-1", 1).unwrap(), None);
        assert_eq!(g.graph_distance("d424-para50", "far", 5).unwrap(), None);
        assert!(g.graph_distance("nope", "far", 5).is_err());

        let set = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(g.kg_proximity("d424-para50", &set(&["d424-para50"])).unwrap(), 1.0);
        assert_eq!(g.kg_proximity("d424-para50", &set(&["d295-para28"])).unwrap(), 0.5);
        assert_eq!(g.kg_proximity("d424-para50", &set(&["far"])).unwrap(), 0.0);
        assert_eq!(g.kg_proximity("d424-para50", &set(&[])).unwrap(), 0.0);
    }

    #[test]
    fn depth_cap_limits_proximity() {
        let mut g = RegulatoryGraph::new(GraphConfig::default());
        for i in 0..8 {
            g.upsert_node(prov(&format!("n{i}"), "")).unwrap();
        }
        for i in 0..7 {
            g.add_edge(xref(&format!("e{i}"), &format!("n{i}"), &format!("n{}", i + 1)))
                .unwrap();
        }
        let far: BTreeSet<String> = ["n6".to_string()].into();
        assert_eq!(g.kg_proximity("n0", &far).unwrap(), 0.0);
        let edge: BTreeSet<String> = ["n5".to_string()].into();
        assert!((g.kg_proximity("n0", &edge).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn node_embedding_cases() {
        let cfg = EmbedderConfig::default();
        let mut g = RegulatoryGraph::new(GraphConfig::default());
        g.upsert_node(prov("c", "liquidity coverage ratio")).unwrap();
        g.upsert_node(prov("l1", "central bank reserves")).unwrap();
        g.upsert_node(prov("l2", "central bank reserves")).unwrap();
        g.upsert_node(prov("iso", "isolated provision text")).unwrap();
        g.add_edge(xref("e1", "c", "l1")).unwrap();
        g.add_edge(xref("e2", "c", "l2")).unwrap();

        assert_eq!(
            g.node_embedding("iso", &cfg, 0.25).unwrap(),
            embed_text("isolated provision text", &cfg)
        );
        for id in ["c", "l1", "l2", "iso"] {
            let text = g.node(id).unwrap().text.clone();
            assert_eq!(g.node_embedding(id, &cfg, 0.0).unwrap(), embed_text(&text, &cfg));
        }

        // Scalar oracle: both leaves share one text, so the mean equals that
        // leaf's vector and the mix is own + 0.25 * leaf, renormalized.
        let own = embed_text("liquidity coverage ratio", &cfg).values;
        let leaf = embed_text("central bank reserves", &cfg).values;
        let mixed: Vec<f64> = own.iter().zip(&leaf).map(|(o, l)| o + 0.25 * l).collect();
        let norm = mixed.iter().map(|m| m * m).sum::<f64>().sqrt();
        let got = g.node_embedding("c", &cfg, 0.25).unwrap();
        for (g, m) in got.values.iter().zip(&mixed) {
            assert!((g - m / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn incremental_recompute_sets() {
        let cfg = EmbedderConfig::default();
        let mut g = RegulatoryGraph::new(GraphConfig::default());
        assert!(g.incremental_ingest(vec![], vec![], &cfg).unwrap().is_empty());

        let set = g.incremental_ingest(vec![prov("solo", "alone")], vec![], &cfg).unwrap();
        assert_eq!(set, BTreeSet::from(["solo".to_string()]));
        assert!(g.node("solo").unwrap().pending_validation);

        // hub with three spokes, one spoke has a tail
        let mut base = RegulatoryGraph::new(GraphConfig::default());
        for id in ["hub", "s1", "s2", "s3", "tail", "other"] {
            base.upsert_node(prov(id, id)).unwrap();
        }
        for (i, s) in ["s1", "s2", "s3"].iter().enumerate() {
            base.add_edge(xref(&format!("h{i}"), "hub", s)).unwrap();
        }
        base.add_edge(xref("t", "s1", "tail")).unwrap();
        base.nightly_rebuild(&cfg);
        let set = base
            .incremental_ingest(vec![prov("new", "new text")], vec![xref("n", "new", "hub")], &cfg)
            .unwrap();
        // BFS oracle on the fixture: new -> hub (1) -> s1,s2,s3 (2); hub's
        // ball adds tail via s1 at distance 2.
        let expected: BTreeSet<String> = ["new", "hub", "s1", "s2", "s3", "tail"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(set, expected);
        assert!(!set.contains("other"));
    }

    #[test]
    fn incremental_batch_is_atomic() {
        let cfg = EmbedderConfig::default();
        let mut g = RegulatoryGraph::new(GraphConfig::default());
        g.upsert_node(prov("p", "x")).unwrap();
        let before = g.to_snapshot();
        let bad = KgEdge::new("bad", EdgeKind::AppliesTo, "q", "p");
        assert!(g.incremental_ingest(vec![prov("q", "y")], vec![bad], &cfg).is_err());
        assert_eq!(g.to_snapshot(), before);
    }

    #[test]
    fn rebuild_clears_flags_and_is_deterministic() {
        let cfg = EmbedderConfig::default();
        let mut g = RegulatoryGraph::new(GraphConfig::default());
        g.incremental_ingest(vec![prov("a", "x"), prov("b", "y"), prov("c", "z")], vec![], &cfg)
            .unwrap();
        assert_eq!(g.pending_count(), 3);
        g.nightly_rebuild(&cfg);
        assert_eq!(g.pending_count(), 0);
        let first: Vec<Embedding> = g.nodes().map(|n| n.embedding.clone()).collect();
        g.nightly_rebuild(&cfg);
        let second: Vec<Embedding> = g.nodes().map(|n| n.embedding.clone()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn snapshot_roundtrip_is_sorted() {
        let cfg = EmbedderConfig::default();
        let mut g = RegulatoryGraph::new(GraphConfig::default());
        g.upsert_node(prov("z", "zz")).unwrap();
        g.upsert_node(prov("a", "aa")).unwrap();
        g.add_edge(xref("e2", "z", "a")).unwrap();
        g.add_edge(xref("e1", "a", "z")).unwrap();
        g.nightly_rebuild(&cfg);
        let snap = g.to_snapshot();
        assert_eq!(snap.nodes[0].node_id, "a");
        assert_eq!(snap.edges[0].edge_id, "e1");
        let json = serde_json::to_string(&snap).unwrap();
        let back =
            RegulatoryGraph::from_snapshot(serde_json::from_str(&json).unwrap(), GraphConfig::default(), &cfg).unwrap();
        assert_eq!(back.to_snapshot(), snap);
        assert_eq!(back.node("a").unwrap().embedding, g.node("a").unwrap().embedding);
    }

    #[test]
    fn anomaly_examples() {
        assert!(detect_anomaly(&[0.8; 20], 5).unwrap().is_empty());
        let inc: Vec<f64> = (0..30).map(|i| i as f64 / 30.0).collect();
        assert!(detect_anomaly(&inc, 5).unwrap().is_empty());
        assert!(detect_anomaly(&[1.0], 1).is_err());

        // Rolling window [0.83, 0.85, 0.84, 0.83, 0.85] before index 8:
        // mean 0.84, population sd 0.008944, threshold 0.82211; 0.62 triggers.
        let stream = [0.84, 0.85, 0.83, 0.83, 0.85, 0.84, 0.83, 0.85, 0.62];
        assert_eq!(detect_anomaly(&stream, 5).unwrap(), vec![8]);
        let steady = [0.84, 0.84, 0.84, 0.84, 0.83];
        assert_eq!(detect_anomaly(&steady, 4).unwrap(), vec![4]);
    }
}
