//! Synthetic corpora with ground truth planted at construction time.
//!
//! Every obligation sentence is built from fresh pseudo-words, so lexical
//! overlap between unrelated items is limited to a few template words. Policy
//! clauses are then assembled from a chosen share of the obligation's own
//! tokens plus filler until the real alignment score lands inside the band of
//! the planted gap class. A fixture is only returned once every planted
//! label has been re-checked against the actual scoring code; otherwise the
//! generator retries from a derived seed and finally reports the request as
//! infeasible.

mod scenarios;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use scenarios::{
    scenario_documents, scenario_graph, scenario_policies, scenarios, Scenarios, BASEL_LCR_RESERVES, MIFID_SUITABILITY,
    SEC_PAY_VERSUS_PERFORMANCE,
};

use crate::corpus::{tokenize, Document, Embed, EmbedderConfig, Framework, Provision};
use crate::error::{Error, Result};
use crate::extraction::{
    bilinear_link_score, CrossRef, DeonticModality, EntityMention, EntityType, LinkerWeights, Obligation, Sentence,
    Span,
};
use crate::gap::{
    alignment_from_embedding, best_alignment, classify_gap, prepare_policies, GapClass, GapConfig, PolicyClause,
};
use crate::parallel::Execution;
use crate::retrieval::{kg_rerank, Index, RetrievalConfig};
use crate::rkg::{EdgeKind, GraphConfig, GraphSnapshot, KgEdge, KgNode, NodeKind, RegulatoryGraph};

const MAX_ATTEMPTS: u64 = 8;
const CLAUSE_TRIES: usize = 80;
const LINK_MARGIN: f64 = 0.02;
const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const VERBS: &[&str] = &[
    "maintain", "record", "report", "retain", "review", "document", "notify", "publish",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapMix {
    pub compliant: usize,
    pub partial_gap: usize,
    pub full_gap: usize,
}

impl GapMix {
    pub fn total(&self) -> usize {
        self.compliant + self.partial_gap + self.full_gap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub n_docs: usize,
    pub n_obligations: usize,
    pub gap_mix: GapMix,
    pub frameworks: Vec<Framework>,
    /// Share of obligations phrased without a modal verb ("is required
    /// to"), which the rule extractor does not recognise.
    pub implicit_fraction: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            n_docs: 12,
            n_obligations: 423,
            gap_mix: GapMix {
                compliant: 210,
                partial_gap: 128,
                full_gap: 85,
            },
            frameworks: vec![Framework::Sec, Framework::Mifid2, Framework::Basel3],
            implicit_fraction: 0.0,
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gap_mix.total() != self.n_obligations {
            return Err(Error::Infeasible(format!(
                "gap mix sums to {} but {} obligations were requested",
                self.gap_mix.total(),
                self.n_obligations
            )));
        }
        if self.n_obligations > 0 && (self.n_docs == 0 || self.frameworks.is_empty()) {
            return Err(Error::Infeasible(
                "obligations need at least one document and framework".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.implicit_fraction) {
            return Err(Error::Infeasible("implicit_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub obligation_id: String,
    pub label: GapClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub seed: u64,
    pub documents: Vec<Document>,
    pub policies: Vec<PolicyClause>,
    pub graph: GraphSnapshot,
    pub gold_obligations: Vec<Obligation>,
    pub gold_labels: Vec<GoldLabel>,
}

#[derive(Serialize, Deserialize)]
struct FixtureMeta {
    seed: u64,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

impl Fixture {
    pub fn build_graph<E: Embed + ?Sized>(&self, config: GraphConfig, embedder: &E) -> Result<RegulatoryGraph> {
        RegulatoryGraph::from_snapshot(self.graph.clone(), config, embedder)
    }

    pub fn prepared_policies<E: Embed + ?Sized>(&self, embedder: &E) -> Vec<PolicyClause> {
        let mut p = self.policies.clone();
        prepare_policies(&mut p, embedder);
        p
    }

    pub fn label_of(&self, obligation_id: &str) -> Option<GapClass> {
        self.gold_labels
            .iter()
            .find(|l| l.obligation_id == obligation_id)
            .map(|l| l.label)
    }

    /// Write `documents.json`, `policies.json`, `graph.json`,
    /// `gold_obligations.jsonl`, `gold_labels.json` and `meta.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(
            &dir.join("documents.json"),
            &serde_json::to_string_pretty(&self.documents)?,
        )?;
        write(
            &dir.join("policies.json"),
            &serde_json::to_string_pretty(&self.policies)?,
        )?;
        write(&dir.join("graph.json"), &serde_json::to_string_pretty(&self.graph)?)?;
        let mut lines = String::new();
        for o in &self.gold_obligations {
            lines.push_str(&serde_json::to_string(o)?);
            lines.push('\n');
        }
        write(&dir.join("gold_obligations.jsonl"), &lines)?;
        write(
            &dir.join("gold_labels.json"),
            &serde_json::to_string_pretty(&self.gold_labels)?,
        )?;
        write(
            &dir.join("meta.json"),
            &serde_json::to_string_pretty(&FixtureMeta { seed: self.seed })?,
        )?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let meta: FixtureMeta = serde_json::from_str(&read(&dir.join("meta.json"))?)?;
        let documents = crate::corpus::load_documents(&read(&dir.join("documents.json"))?)?;
        let policies = serde_json::from_str(&read(&dir.join("policies.json"))?)?;
        let graph = serde_json::from_str(&read(&dir.join("graph.json"))?)?;
        let gold_obligations = read_jsonl(&read(&dir.join("gold_obligations.jsonl"))?)?;
        let gold_labels = serde_json::from_str(&read(&dir.join("gold_labels.json"))?)?;
        Ok(Self {
            seed: meta.seed,
            documents,
            policies,
            graph,
            gold_obligations,
            gold_labels,
        })
    }
}

/// Parse JSON lines, skipping blank lines.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(body: &str) -> Result<Vec<T>> {
    body.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

struct Lexicon {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Lexicon {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            used: HashSet::new(),
        }
    }

    fn word(&mut self) -> String {
        loop {
            let syllables = if self.rng.gen_bool(0.3) { 4 } else { 3 };
            let mut w = String::with_capacity(syllables * 2);
            for _ in 0..syllables {
                w.push(*CONSONANTS.choose(&mut self.rng).unwrap() as char);
                w.push(*VOWELS.choose(&mut self.rng).unwrap() as char);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn words(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word()).collect()
    }

    fn verb(&mut self) -> &'static str {
        VERBS.choose(&mut self.rng).unwrap()
    }
}

fn entity_for(fw: Framework) -> (&'static str, EntityType) {
    match fw {
        Framework::Sec => ("registrant", EntityType::ReportingEntity),
        Framework::Mifid2 => ("investment firm", EntityType::RegulatedEntity),
        Framework::Basel3 => ("bank", EntityType::RegulatedEntity),
        Framework::Other => ("institution", EntityType::RegulatedEntity),
    }
}

fn token_span(s: &Sentence, byte_start: usize, byte_end: usize) -> Span {
    let start = s
        .tokens
        .iter()
        .position(|t| t.start >= byte_start)
        .unwrap_or(s.tokens.len());
    let end = s
        .tokens
        .iter()
        .rposition(|t| t.end <= byte_end)
        .map_or(start, |i| i + 1);
    Span { start, end }
}

fn mention(s: &Sentence, text: &str, needle: &str, etype: EntityType) -> Option<EntityMention> {
    let at = text.find(needle)?;
    Some(EntityMention {
        span: token_span(s, at, at + needle.len()),
        etype,
        surface: needle.to_string(),
        confidence: 1.0,
    })
}

struct Plan<'a> {
    provision_id: &'a str,
    framework: Framework,
    prohibition: bool,
    threshold: Option<u32>,
    citation: Option<(String, String)>,
    implicit: bool,
}

struct Planted {
    sentence: String,
    obligation: Obligation,
    /// Pseudo-words of the action, reused for linked texts.
    action_words: Vec<String>,
    verb: &'static str,
}

fn plant(lex: &mut Lexicon, plan: &Plan) -> Planted {
    let (entity, etype) = entity_for(plan.framework);
    let condition = format!("When {}", lex.words(3).join(" "));
    let verb = lex.verb();
    let action_words = lex.words(5);
    let mut action = format!("{verb} {}", action_words.join(" "));
    if let Some(x) = plan.threshold {
        action.push_str(&format!(" above {x}%"));
    }
    if let Some((cite, _)) = &plan.citation {
        action.push_str(&format!(" under {cite}"));
    }
    let modal = match (plan.implicit, plan.prohibition) {
        (true, _) => "is required to",
        (false, true) => "shall not",
        (false, false) => "shall",
    };
    let sentence = format!("{condition}, the {entity} {modal} {action}.");
    let s = Sentence::new(sentence.clone());
    let mut mentions: Vec<EntityMention> = Vec::new();
    let entity_at = condition.len() + ", the ".len();
    mentions.push(EntityMention {
        span: token_span(&s, entity_at, entity_at + entity.len()),
        etype,
        surface: entity.to_string(),
        confidence: 1.0,
    });
    if let Some(x) = plan.threshold {
        mentions.extend(mention(&s, &sentence, &format!("{x}%"), EntityType::ThresholdValue));
    }
    let mut crossrefs = Vec::new();
    if let Some((cite, target)) = &plan.citation {
        if let Some(m) = mention(&s, &sentence, cite, EntityType::LegalReference) {
            crossrefs.push(CrossRef {
                source_span: m.span,
                citation_text: cite.clone(),
                target: Some(target.clone()),
                link_confidence: 1.0,
            });
            mentions.push(m);
        }
    }
    mentions.sort_by_key(|m| m.span.start);
    Planted {
        sentence,
        obligation: Obligation {
            obligation_id: format!("{}#0", plan.provision_id),
            entity: entity.to_string(),
            entity_type: etype,
            action,
            modality: if plan.prohibition {
                DeonticModality::Prohibition
            } else {
                DeonticModality::Obligation
            },
            condition: Some(condition),
            source_provision: plan.provision_id.to_string(),
            crossrefs,
            confidence: 1.0,
            mentions,
        },
        action_words,
        verb,
    }
}

/// Alignment band `[lo, hi]` and a target inside it for a planted class.
fn band(class: GapClass, gap: &GapConfig, rng: &mut ChaCha8Rng) -> Band {
    match class {
        GapClass::Compliant => {
            let lo = gap.delta + 0.03;
            (lo, 1.0, rng.gen_range(lo.max(0.66)..0.8f64.max(lo + 0.01)))
        }
        GapClass::PartialGap => {
            let (lo, hi) = (gap.delta_full + 0.02, gap.delta - 0.02);
            (lo, hi, rng.gen_range(lo..=hi))
        }
        GapClass::FullGap => {
            let hi = (gap.delta_full - 0.03).max(0.0);
            (0.0, hi, rng.gen_range(0.0..=hi * 0.8))
        }
    }
}

/// Assemble a clause from `s` of the requirement's tokens plus `f` fillers,
/// choosing `(s, f)` so the bag-of-words cosine estimate meets the target,
/// then keep the first draw whose real alignment falls inside the band.
#[allow(clippy::too_many_arguments)]
fn build_clause<E: Embed + ?Sized>(
    lex: &mut Lexicon,
    o: &Obligation,
    clause_id: &str,
    section: &str,
    (lo, hi, target): Band,
    gap: &GapConfig,
    embedder: &E,
) -> Option<PolicyClause> {
    let req_emb = embedder.embed(&o.requirement_text());
    let mut toks: Vec<String> = Vec::new();
    for t in tokenize(&o.requirement_text()) {
        if !toks.contains(&t) {
            toks.push(t);
        }
    }
    let n = toks.len() as f64;
    let fixed = tokenize(&o.entity).len() + 1;
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for s in 0..=toks.len() {
        for f in 0..=40 {
            let m = (s + f + fixed) as f64;
            pairs.push((s, f, (s as f64 / (n * m).sqrt() - target).abs()));
        }
    }
    pairs.sort_by(|a, b| a.2.total_cmp(&b.2));
    for attempt in 0..CLAUSE_TRIES {
        let (s, f, _) = pairs[(attempt / 10).min(pairs.len() - 1)];
        // Pseudo-words first so template words only enter high-coverage
        // clauses, keeping cross-obligation similarity low.
        toks.shuffle(&mut lex.rng);
        toks.sort_by_key(|t| !lex.used.contains(t));
        let mut parts = vec![format!("The {}", o.entity)];
        parts.extend(toks[..s].iter().cloned());
        parts.extend(lex.words(f));
        let text = format!("{}.", parts.join(" "));
        let mut clause = PolicyClause::new(clause_id, section, &text, &[o.entity.as_str()]);
        clause.embedding = embedder.embed(&text);
        let a = alignment_from_embedding(&req_emb, o, &clause, gap).ok()?;
        if (lo..=hi).contains(&a) {
            return Some(clause);
        }
    }
    None
}

fn derive_seed(seed: u64, attempt: u64) -> u64 {
    seed ^ attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Standard fixture with default embedder and thresholds.
pub fn generate_fixture(spec: &FixtureSpec, seed: u64) -> Result<Fixture> {
    generate_fixture_with(spec, seed, &EmbedderConfig::default(), &GapConfig::default())
}

pub fn generate_fixture_with(
    spec: &FixtureSpec,
    seed: u64,
    embedder: &EmbedderConfig,
    gap: &GapConfig,
) -> Result<Fixture> {
    spec.validate()?;
    gap.validate()?;
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        match try_standard(spec, seed, derive_seed(seed, attempt), embedder, gap)? {
            Ok(f) => return Ok(f),
            Err(why) => last = why,
        }
    }
    Err(Error::Infeasible(format!(
        "no consistent fixture after {MAX_ATTEMPTS} attempts: {last}"
    )))
}

struct Draft {
    documents: Vec<Document>,
    policies: Vec<PolicyClause>,
    nodes: Vec<KgNode>,
    edges: Vec<KgEdge>,
    gold: Vec<Obligation>,
    labels: Vec<GoldLabel>,
    /// Class each obligation must receive from its own best alignment.
    want: Vec<GapClass>,
    /// Per clause: owning obligation and its band, when redrawable.
    owners: Vec<Option<(usize, Band)>>,
}

type Band = (f64, f64, f64);

const REPAIR_ROUNDS: usize = 25;

impl Draft {
    fn new() -> Self {
        Self {
            documents: Vec::new(),
            policies: Vec::new(),
            nodes: Vec::new(),
            edges: Vec::new(),
            gold: Vec::new(),
            labels: Vec::new(),
            want: Vec::new(),
            owners: Vec::new(),
        }
    }

    fn add_clause(&mut self, clause: PolicyClause, owner: Option<(usize, Band)>) {
        self.policies.push(clause);
        self.owners.push(owner);
    }

    fn edge(&mut self, kind: EdgeKind, s: &str, t: &str) {
        let id = format!("E{:05}", self.edges.len());
        self.edges.push(KgEdge::new(id, kind, s, t));
    }

    fn provision(&mut self, doc: usize, id: &str, text: String) {
        self.documents[doc].provisions.push(Provision {
            provision_id: id.to_string(),
            text,
        });
    }

    fn graph<E: Embed + ?Sized>(&self, embedder: &E) -> Result<RegulatoryGraph> {
        let snapshot = GraphSnapshot {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        };
        let mut g = RegulatoryGraph::from_snapshot(snapshot, GraphConfig::default(), embedder)?;
        g.nightly_rebuild(embedder);
        Ok(g)
    }

    /// Redraw clauses that, through chance hash collisions, pull a foreign
    /// obligation out of its planted band, until every obligation's best
    /// alignment classifies as planted.
    fn settle_alignment<E: Embed + ?Sized>(
        &mut self,
        lex: &mut Lexicon,
        gap: &GapConfig,
        embedder: &E,
    ) -> Result<std::result::Result<(), String>> {
        for _ in 0..REPAIR_ROUNDS {
            let mut redraw: Vec<usize> = Vec::new();
            for (i, o) in self.gold.iter().enumerate() {
                let Some((id, a)) = best_alignment(o, &self.policies, gap, embedder)? else {
                    continue;
                };
                if classify_gap(a, gap) == self.want[i] {
                    continue;
                }
                let k = self.policies.iter().position(|p| p.clause_id == id).expect("clause");
                match self.owners[k] {
                    Some((owner, _)) if owner != i => redraw.push(k),
                    _ => return Ok(Err(format!("{} aligns at {a:.3} with {id}", o.obligation_id))),
                }
            }
            if redraw.is_empty() {
                return Ok(Ok(()));
            }
            redraw.sort_unstable();
            redraw.dedup();
            for k in redraw {
                let (owner, (lo, hi, target)) = self.owners[k].expect("owned");
                // Aim low in the band so fewer shared template words remain.
                let b = (lo, hi, (lo + 0.02).min(target));
                self.owners[k] = Some((owner, b));
                let p = &self.policies[k];
                let (id, section) = (p.clause_id.clone(), p.section.clone());
                let Some(c) = build_clause(lex, &self.gold[owner], &id, &section, b, gap, embedder) else {
                    return Ok(Err(format!("cannot redraw {id}")));
                };
                self.policies[k] = c;
            }
        }
        Ok(Err(format!("alignment bands unsettled after {REPAIR_ROUNDS} rounds")))
    }

    fn finish(mut self, seed: u64) -> Fixture {
        for p in &mut self.policies {
            p.embedding = Default::default();
        }
        Fixture {
            seed,
            documents: self
                .documents
                .into_iter()
                .filter(|d| !d.provisions.is_empty())
                .collect(),
            policies: self.policies,
            graph: GraphSnapshot {
                nodes: self.nodes,
                edges: self.edges,
            },
            gold_obligations: self.gold,
            gold_labels: self.labels,
        }
    }
}

fn try_standard(
    spec: &FixtureSpec,
    seed: u64,
    attempt_seed: u64,
    embedder: &EmbedderConfig,
    gap: &GapConfig,
) -> Result<std::result::Result<Fixture, String>> {
    let mut lex = Lexicon::new(attempt_seed);
    let mut classes: Vec<GapClass> = Vec::with_capacity(spec.n_obligations);
    classes.extend(std::iter::repeat_n(GapClass::Compliant, spec.gap_mix.compliant));
    classes.extend(std::iter::repeat_n(GapClass::PartialGap, spec.gap_mix.partial_gap));
    classes.extend(std::iter::repeat_n(GapClass::FullGap, spec.gap_mix.full_gap));
    classes.shuffle(&mut lex.rng);

    let mut d = Draft::new();
    for i in 0..spec.n_docs {
        let fw = spec.frameworks[i % spec.frameworks.len().max(1)];
        d.documents.push(Document {
            doc_id: format!("{fw}-D{i:02}"),
            framework: fw,
            title: format!("{fw} synthetic rulebook {i}"),
            provisions: Vec::new(),
        });
    }
    let mut entity_nodes: Vec<String> = Vec::new();

    for (j, &class) in classes.iter().enumerate() {
        let doc = j % spec.n_docs;
        let fw = d.documents[doc].framework;
        let pid = format!("{}-P{j:04}", d.documents[doc].doc_id);
        let implicit = lex.rng.gen_bool(spec.implicit_fraction);
        let citation = (j % 4 == 1).then(|| {
            let (n, m) = (100 + j, 1 + j % 4);
            (format!("Article {n}({m})"), format!("REF-{fw}-Art{n}-{m}"))
        });
        let plan = Plan {
            provision_id: &pid,
            framework: fw,
            prohibition: j % 7 == 3,
            threshold: (j % 5 == 2).then_some(3 + (j % 9) as u32),
            citation: citation.clone(),
            implicit,
        };
        let planted = plant(&mut lex, &plan);
        d.provision(doc, &pid, planted.sentence.clone());
        d.nodes
            .push(KgNode::new(&pid, NodeKind::Provision, fw, &planted.sentence));

        let (entity, _) = entity_for(fw);
        let ent_id = format!("ENT-{}", entity.replace(' ', "-"));
        if !entity_nodes.contains(&ent_id) {
            d.nodes.push(KgNode::new(&ent_id, NodeKind::Entity, fw, entity));
            entity_nodes.push(ent_id.clone());
        }
        let obl_id = format!("OBL-{pid}");
        d.nodes.push(KgNode::new(
            &obl_id,
            NodeKind::Obligation,
            fw,
            planted.obligation.requirement_text(),
        ));
        d.edge(EdgeKind::Implements, &pid, &obl_id);
        d.edge(EdgeKind::AppliesTo, &obl_id, &ent_id);
        if let Some((_, target)) = &citation {
            let text = format!("Detailed rules to {} {}.", planted.verb, planted.action_words.join(" "));
            d.nodes.push(KgNode::new(target, NodeKind::Provision, fw, text));
            d.edge(EdgeKind::CrossReferences, &pid, target);
        }
        if j % 3 == 0 {
            let enf = format!("ENF-{j:04}");
            let text = format!(
                "Sanction imposed on a {entity} for failing to {} {}.",
                planted.verb, planted.action_words[0]
            );
            d.nodes.push(KgNode::new(&enf, NodeKind::Enforcement, fw, text));
            d.edge(EdgeKind::AppliesTo, &enf, &pid);
        }
        if let Some(x) = plan.threshold {
            let thr = format!("THR-{j:04}");
            d.nodes.push(KgNode::new(
                &thr,
                NodeKind::Threshold,
                fw,
                format!("Minimum of {x} percent."),
            ));
            d.edge(EdgeKind::Implements, &pid, &thr);
        }

        let b = band(class, gap, &mut lex.rng);
        let clause_id = format!("POL-{j:04}");
        let section = format!("Section {}.{}", 1 + j / 20, 1 + j % 20);
        let Some(clause) = build_clause(&mut lex, &planted.obligation, &clause_id, &section, b, gap, embedder) else {
            return Ok(Err(format!("no clause for {pid} in band {:.2}..{:.2}", b.0, b.1)));
        };
        d.add_clause(clause, Some((d.gold.len(), b)));
        d.want.push(class);
        d.labels.push(GoldLabel {
            obligation_id: planted.obligation.obligation_id.clone(),
            label: class,
        });
        d.gold.push(planted.obligation);
    }

    if let Err(why) = d.settle_alignment(&mut lex, gap, embedder)? {
        return Ok(Err(why));
    }
    let g = d.graph(embedder)?;
    let threshold = crate::extraction::ExtractionConfig::default().link_threshold + LINK_MARGIN;
    for o in &d.gold {
        for target in o.resolved_targets() {
            let src = &g.node(&o.source_provision).expect("planted").embedding;
            let tgt = &g.node(target).expect("planted").embedding;
            let score = bilinear_link_score(src, tgt, &LinkerWeights::Identity)?;
            if score < threshold {
                return Ok(Err(format!(
                    "link {} -> {target} scores {score:.3}",
                    o.source_provision
                )));
            }
        }
    }
    Ok(Ok(d.finish(seed)))
}

/// Fixture in which half of the obligations are only recognisable as gaps
/// through a cross-referenced provision that plain hybrid retrieval ranks
/// outside the top k and graph re-ranking promotes into it.
pub fn generate_kg_fixture(n_pairs: usize, seed: u64) -> Result<Fixture> {
    generate_kg_fixture_with(
        n_pairs,
        seed,
        &EmbedderConfig::default(),
        &RetrievalConfig::default(),
        &GapConfig::default(),
    )
}

pub fn generate_kg_fixture_with(
    n_pairs: usize,
    seed: u64,
    embedder: &EmbedderConfig,
    retrieval: &RetrievalConfig,
    gap: &GapConfig,
) -> Result<Fixture> {
    retrieval.validate()?;
    gap.validate()?;
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        match try_kg(n_pairs, seed, derive_seed(seed, attempt), embedder, retrieval, gap)? {
            Ok(f) => return Ok(f),
            Err(why) => last = why,
        }
    }
    Err(Error::Infeasible(format!(
        "no consistent KG fixture after {MAX_ATTEMPTS} attempts: {last}"
    )))
}

const KG_DOCS: usize = 4;
const KG_DISTRACTORS: usize = 5;

fn try_kg(
    n_pairs: usize,
    seed: u64,
    attempt_seed: u64,
    embedder: &EmbedderConfig,
    retrieval: &RetrievalConfig,
    gap: &GapConfig,
) -> Result<std::result::Result<Fixture, String>> {
    let mut lex = Lexicon::new(attempt_seed);
    let fw = Framework::Mifid2;
    let mut d = Draft::new();
    for i in 0..KG_DOCS {
        d.documents.push(Document {
            doc_id: format!("KG-D{i:02}"),
            framework: fw,
            title: format!("Linked rulebook {i}"),
            provisions: Vec::new(),
        });
    }
    // (source provision, linked provision, covered)
    let mut pairs: Vec<(String, String, bool)> = Vec::new();

    for i in 0..n_pairs {
        let doc = i % KG_DOCS;
        let doc_id = d.documents[doc].doc_id.clone();
        let sid = format!("{doc_id}-S{i:03}");
        let (n, m) = (200 + i, 1 + i % 3);
        let tid = format!("{doc_id}-Art{n}-{m}");
        let plan = Plan {
            provision_id: &sid,
            framework: fw,
            prohibition: false,
            threshold: None,
            citation: None,
            implicit: false,
        };
        let planted = plant(&mut lex, &plan);
        let text = format!(
            "{} Article {n}({m}) sets out the detailed requirements.",
            planted.sentence
        );
        d.provision(doc, &sid, text.clone());
        d.nodes.push(KgNode::new(&sid, NodeKind::Provision, fw, text));

        let a = &planted.action_words;
        let t_text = format!(
            "Requirements for {} {} {} cover {}.",
            a[0],
            a[1],
            lex.words(3).join(" "),
            lex.words(2).join(" ")
        );
        d.provision(doc, &tid, t_text.clone());
        d.nodes.push(KgNode::new(&tid, NodeKind::Provision, fw, t_text.clone()));
        d.edge(EdgeKind::CrossReferences, &sid, &tid);
        for k in 0..KG_DISTRACTORS {
            let xid = format!("{doc_id}-X{i:03}{k}");
            let x_text = format!(
                "Requirements for {} {} {} {} cover {}.",
                a[0],
                a[1],
                a[2],
                lex.words(2).join(" "),
                lex.words(2).join(" ")
            );
            d.provision((doc + 1 + k) % KG_DOCS, &xid, x_text.clone());
            d.nodes.push(KgNode::new(&xid, NodeKind::Provision, fw, x_text));
        }

        let b = band(GapClass::Compliant, gap, &mut lex.rng);
        let Some(clause) = build_clause(
            &mut lex,
            &planted.obligation,
            &format!("POL-S{i:03}"),
            &format!("Section {}", i + 1),
            b,
            gap,
            embedder,
        ) else {
            return Ok(Err(format!("no clause for {sid}")));
        };
        d.add_clause(clause, Some((d.gold.len(), b)));
        d.want.push(GapClass::Compliant);
        let covered = i % 2 == 1;
        if covered {
            let mut c = PolicyClause::new(
                &format!("POL-T{i:03}"),
                &format!("Section {}.1", i + 1),
                &t_text,
                &["investment firm"],
            );
            c.embedding = embedder.embed(&t_text);
            d.add_clause(c, None);
        }
        let label = if covered {
            GapClass::Compliant
        } else {
            GapClass::PartialGap
        };
        d.labels.push(GoldLabel {
            obligation_id: planted.obligation.obligation_id.clone(),
            label,
        });
        d.gold.push(planted.obligation);
        pairs.push((sid, tid, covered));
    }

    // Unlinked obligations with their own partial and full coverage.
    let extra = n_pairs / 4;
    for (j, class) in std::iter::repeat_n(GapClass::PartialGap, extra)
        .chain(std::iter::repeat_n(GapClass::FullGap, extra))
        .enumerate()
    {
        let doc = j % KG_DOCS;
        let pid = format!("{}-Q{j:03}", d.documents[doc].doc_id);
        let plan = Plan {
            provision_id: &pid,
            framework: fw,
            prohibition: false,
            threshold: None,
            citation: None,
            implicit: false,
        };
        let planted = plant(&mut lex, &plan);
        d.provision(doc, &pid, planted.sentence.clone());
        d.nodes
            .push(KgNode::new(&pid, NodeKind::Provision, fw, &planted.sentence));
        let b = band(class, gap, &mut lex.rng);
        let Some(clause) = build_clause(
            &mut lex,
            &planted.obligation,
            &format!("POL-Q{j:03}"),
            &format!("Section Q{}", j + 1),
            b,
            gap,
            embedder,
        ) else {
            return Ok(Err(format!("no clause for {pid}")));
        };
        d.add_clause(clause, Some((d.gold.len(), b)));
        d.want.push(class);
        d.labels.push(GoldLabel {
            obligation_id: planted.obligation.obligation_id.clone(),
            label: class,
        });
        d.gold.push(planted.obligation);
    }

    if let Err(why) = d.settle_alignment(&mut lex, gap, embedder)? {
        return Ok(Err(why));
    }

    let g = d.graph(embedder)?;
    let docs: Vec<Document> = d
        .documents
        .iter()
        .filter(|x| !x.provisions.is_empty())
        .cloned()
        .collect();
    let index = Index::from_documents(&docs, retrieval, embedder)?;
    for (o, (sid, tid, covered)) in d.gold.iter().zip(&pairs) {
        let query = o.requirement_text();
        let links = |cands: &[crate::retrieval::Candidate]| cands.iter().any(|c| c.linked_provisions.contains(tid));
        let plain = index.retrieve_pool(&query, retrieval, embedder, retrieval.k, Execution::Sequential)?;
        if links(&plain) {
            return Ok(Err(format!("{tid} already in plain top-k for {sid}")));
        }
        let pool = index.retrieve_pool(
            &query,
            retrieval,
            embedder,
            retrieval.rerank_pool,
            Execution::Sequential,
        )?;
        let mut ranked = kg_rerank(pool, sid, &g, retrieval)?;
        ranked.truncate(retrieval.k);
        if !links(&ranked) {
            return Ok(Err(format!("{tid} not promoted into top-k for {sid}")));
        }
        let chunk = index
            .chunks()
            .iter()
            .find(|c| &c.chunk.provision_id == tid)
            .expect("indexed");
        let mut coverage = 0.0f64;
        for p in &d.policies {
            coverage = coverage.max(crate::corpus::cosine_sim(&chunk.embedding, &p.embedding)?);
        }
        if (coverage >= gap.delta) != *covered {
            return Ok(Err(format!("coverage of {tid} is {coverage:.3}")));
        }
    }
    Ok(Ok(d.finish(seed)))
}
