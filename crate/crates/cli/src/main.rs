use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use compliance_nlp::config::PipelineConfig;
use compliance_nlp::corpus::{chunk_document, load_documents, Document};
use compliance_nlp::eval::{
    ablation_matrix, classification_metrics, error_propagation_report, gap_pairs, paired_bootstrap, threshold_sweep,
    AblationToggles, ScoredItem,
};
use compliance_nlp::extraction::Obligation;
use compliance_nlp::fixture::{generate_fixture_with, generate_kg_fixture_with, read_jsonl, Fixture, FixtureSpec};
use compliance_nlp::gap::{load_policies, GapReport, Pipeline};
use compliance_nlp::retrieval::{kg_rerank, Index};
use compliance_nlp::rkg::{detect_anomaly, GraphSnapshot, KgEdge, KgNode, RegulatoryGraph};
use compliance_nlp::specdec::{compare_corpora, dialect_corpus, parse_corpus, render_corpus};
use compliance_nlp::Execution;

#[derive(Parser)]
#[command(
    name = "compliance-nlp",
    version,
    about = "Regulatory obligation extraction and policy gap analysis"
)]
struct Cli {
    /// JSON config file; omitted sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration.
    Config,
    /// Chunk documents and build the provision graph.
    Ingest {
        #[arg(long)]
        documents: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Knowledge graph maintenance.
    Kg {
        #[command(subcommand)]
        action: KgAction,
    },
    /// Hybrid retrieval, optionally re-ranked against a provision.
    Retrieve {
        #[arg(long)]
        documents: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Provision the query originates from; enables KG re-ranking.
        #[arg(long, requires = "graph")]
        provision: Option<String>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Extract obligations as JSON lines.
    Extract {
        #[arg(long)]
        documents: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gap analysis against internal policies.
    Gap {
        #[command(flatten)]
        input: GapInput,
        /// Evaluation threshold; overrides the config.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Acceptance simulation on two token corpora (one sentence per line).
    Specdec {
        #[arg(long)]
        low: PathBuf,
        #[arg(long)]
        high: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a gap report against fixture gold labels.
    Eval {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Second report for a paired bootstrap on per-item correctness.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        /// Also compare gold-input and rule-extracted gap metrics.
        #[arg(long)]
        propagation: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Gap metrics across evaluation thresholds.
    Sweep {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70])]
        deltas: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Component ablation on a fixture.
    Ablate {
        #[arg(long)]
        fixture: PathBuf,
        /// Every toggle combination instead of the additive rows.
        #[arg(long)]
        grid: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Write a synthetic fixture and two token corpora.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FixtureKind::Standard)]
        kind: FixtureKind,
        /// Fixture spec as JSON; standard kind only.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Planted cross-reference pairs; kg kind only.
        #[arg(long, default_value_t = 12)]
        pairs: usize,
    },
}

#[derive(Subcommand)]
enum KgAction {
    Stats {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Recompute every embedding and clear validation flags.
    Rebuild {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Insert a `{"nodes": [...], "edges": [...]}` batch.
    IngestIncremental {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        batch: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flag drops in a JSON array of quality scores.
    AnomalyCheck {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long, default_value_t = 7)]
        window: usize,
    },
}

#[derive(Args)]
struct GapInput {
    /// Fixture directory; supplies documents, policies, graph and gold obligations.
    #[arg(long, conflicts_with_all = ["documents", "policies"])]
    fixture: Option<PathBuf>,
    #[arg(long, requires = "policies")]
    documents: Option<PathBuf>,
    #[arg(long, requires = "documents")]
    policies: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Obligations as JSON lines, e.g. from `extract`, instead of extracting.
    #[arg(long, conflicts_with = "gold")]
    obligations: Option<PathBuf>,
    /// Analyze the fixture's gold obligations instead of extracted ones.
    #[arg(long, requires = "fixture")]
    gold: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    Standard,
    Kg,
}

#[derive(Deserialize)]
struct Batch {
    #[serde(default)]
    nodes: Vec<KgNode>,
    #[serde(default)]
    edges: Vec<KgEdge>,
}

struct Ctx {
    cfg: PipelineConfig,
    exec: Execution,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("malformed JSON in {}", path.display()))
}

fn emit(body: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{body}");
            if !body.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn documents(path: &Path) -> Result<Vec<Document>> {
    load_documents(&read(path)?).with_context(|| format!("invalid documents in {}", path.display()))
}

fn load_fixture(dir: &Path) -> Result<Fixture> {
    Fixture::read_dir(dir).with_context(|| format!("cannot load fixture {}", dir.display()))
}

impl Ctx {
    fn pipeline(&self) -> Result<Pipeline> {
        Ok(self.cfg.pipeline(self.exec)?)
    }

    fn graph(&self, path: &Path) -> Result<RegulatoryGraph> {
        let snap: GraphSnapshot = parse(path)?;
        RegulatoryGraph::from_snapshot(snap, self.cfg.graph, &self.cfg.embedder)
            .with_context(|| format!("invalid graph in {}", path.display()))
    }

    fn graph_or_built(&self, path: Option<&Path>, docs: &[Document], p: &Pipeline) -> Result<RegulatoryGraph> {
        match path {
            Some(path) => self.graph(path),
            None => Ok(p.build_graph(docs, self.cfg.graph)?),
        }
    }

    fn gap_report(&self, input: &GapInput, p: &Pipeline) -> Result<GapReport> {
        if let Some(dir) = &input.fixture {
            let f = load_fixture(dir)?;
            let g = match &input.graph {
                Some(path) => self.graph(path)?,
                None => f.build_graph(self.cfg.graph, &self.cfg.embedder)?,
            };
            let policies = f.prepared_policies(&self.cfg.embedder);
            let index = Index::from_documents(&f.documents, &p.retrieval, &self.cfg.embedder)?;
            let obligations = match (&input.obligations, input.gold) {
                (Some(path), _) => read_obligations(path)?,
                (None, true) => f.gold_obligations.clone(),
                (None, false) => p.extract(&f.documents, &g)?,
            };
            return Ok(p.analyze(&obligations, &policies, &g, &index)?);
        }
        let (Some(dpath), Some(ppath)) = (&input.documents, &input.policies) else {
            bail!("gap needs either --fixture or both --documents and --policies");
        };
        let docs = documents(dpath)?;
        let policies = load_policies(&read(ppath)?, &self.cfg.embedder)
            .with_context(|| format!("invalid policies in {}", ppath.display()))?;
        let g = self.graph_or_built(input.graph.as_deref(), &docs, p)?;
        let index = Index::from_documents(&docs, &p.retrieval, &self.cfg.embedder)?;
        let obligations = match &input.obligations {
            Some(path) => read_obligations(path)?,
            None => p.extract(&docs, &g)?,
        };
        Ok(p.analyze(&obligations, &policies, &g, &index)?)
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let mut ctx = Ctx { cfg, exec };

    match cli.command {
        Command::Config => emit(&ctx.cfg.to_json()?, None),
        Command::Ingest { documents: dpath, out } => {
            let docs = documents(&dpath)?;
            let p = ctx.pipeline()?;
            let g = p.build_graph(&docs, ctx.cfg.graph)?;
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            let mut chunks = String::new();
            for d in &docs {
                for c in chunk_document(d, ctx.cfg.retrieval.chunk_max_tokens, ctx.cfg.retrieval.chunk_overlap)? {
                    chunks.push_str(&serde_json::to_string(&c)?);
                    chunks.push('\n');
                }
            }
            emit(&chunks, Some(&out.join("chunks.jsonl")))?;
            emit(&json(&g.to_snapshot())?, Some(&out.join("graph.json")))?;
            emit(&json(&g.stats())?, None)
        }
        Command::Kg { action } => match action {
            KgAction::Stats { graph } => emit(&json(&ctx.graph(&graph)?.stats())?, None),
            KgAction::Rebuild { graph, out } => {
                let mut g = ctx.graph(&graph)?;
                g.nightly_rebuild(&ctx.cfg.embedder);
                emit(&json(&g.to_snapshot())?, Some(out.as_deref().unwrap_or(&graph)))?;
                emit(&json(&g.stats())?, None)
            }
            KgAction::IngestIncremental { graph, batch, out } => {
                let mut g = ctx.graph(&graph)?;
                let b: Batch = parse(&batch)?;
                let touched = g
                    .incremental_ingest(b.nodes, b.edges, &ctx.cfg.embedder)
                    .with_context(|| format!("batch {} rejected", batch.display()))?;
                emit(&json(&g.to_snapshot())?, Some(out.as_deref().unwrap_or(&graph)))?;
                emit(&json(&touched)?, None)
            }
            KgAction::AnomalyCheck { stream, window } => {
                let values: Vec<f64> = parse(&stream)?;
                emit(&json(&detect_anomaly(&values, window)?)?, None)
            }
        },
        Command::Retrieve {
            documents: dpath,
            query,
            graph,
            provision,
            k,
        } => {
            if let Some(k) = k {
                ctx.cfg.retrieval.k = k;
            }
            let docs = documents(&dpath)?;
            let r = &ctx.cfg.retrieval;
            let index = Index::from_documents(&docs, r, &ctx.cfg.embedder)?;
            let hits = match (graph, provision) {
                (Some(path), Some(prov)) => {
                    let g = ctx.graph(&path)?;
                    let pool = index.retrieve_pool(&query, r, &ctx.cfg.embedder, r.rerank_pool.max(r.k), exec)?;
                    let mut ranked = kg_rerank(pool, &prov, &g, r)?;
                    ranked.truncate(r.k);
                    ranked
                }
                _ => index.retrieve_pool(&query, r, &ctx.cfg.embedder, r.k, exec)?,
            };
            emit(&json(&hits)?, None)
        }
        Command::Extract {
            documents: dpath,
            graph,
            out,
        } => {
            let docs = documents(&dpath)?;
            let p = ctx.pipeline()?;
            let g = ctx.graph_or_built(graph.as_deref(), &docs, &p)?;
            let mut lines = String::new();
            for o in p.extract(&docs, &g)? {
                lines.push_str(&serde_json::to_string(&o)?);
                lines.push('\n');
            }
            emit(&lines, out.as_deref())
        }
        Command::Gap {
            input,
            delta,
            format,
            out,
        } => {
            if let Some(d) = delta {
                ctx.cfg.gap = ctx.cfg.gap.with_delta(d);
                ctx.cfg.gap.validate()?;
            }
            let report = ctx.gap_report(&input, &ctx.pipeline()?)?;
            let body = match format {
                Format::Json => json(&report)?,
                Format::Text => report.render_text(),
            };
            emit(&body, out.as_deref())
        }
        Command::Specdec { low, high, out } => {
            let lo = parse_corpus(&read(&low)?);
            let hi = parse_corpus(&read(&high)?);
            let cmp = compare_corpora(&lo, &hi, &ctx.cfg.specdec, ctx.cfg.seed, exec)?;
            emit(&json(&cmp)?, out.as_deref())
        }
        Command::Eval {
            fixture,
            report,
            baseline,
            resamples,
            propagation,
            format,
        } => {
            let f = load_fixture(&fixture)?;
            let rep: GapReport = parse(&report)?;
            let pairs = gap_pairs(&f.gold_obligations, &f.gold_labels, &rep.findings);
            let metrics = classification_metrics(&pairs)?;
            let mut out = serde_json::json!({ "metrics": metrics });
            let mut text = metrics.render();
            if let Some(bpath) = baseline {
                let base: GapReport = parse(&bpath)?;
                let bpairs = gap_pairs(&f.gold_obligations, &f.gold_labels, &base.findings);
                let correct = |ps: &[compliance_nlp::eval::LabeledPair]| -> Vec<f64> {
                    ps.iter().map(|p| f64::from(u8::from(p.gold == p.predicted))).collect()
                };
                let b = paired_bootstrap(&correct(&pairs), &correct(&bpairs), resamples, ctx.cfg.seed, exec)?;
                text.push_str(&format!(
                    "\npaired bootstrap: delta {:+.4}, p = {:.4} ({} resamples)\n",
                    b.delta_observed, b.p_value, b.n_resamples
                ));
                out["bootstrap"] = serde_json::to_value(b)?;
            }
            if propagation {
                let p = ctx.pipeline()?;
                let g = f.build_graph(ctx.cfg.graph, &ctx.cfg.embedder)?;
                let policies = f.prepared_policies(&ctx.cfg.embedder);
                let index = Index::from_documents(&f.documents, &p.retrieval, &ctx.cfg.embedder)?;
                let predicted: Vec<Obligation> = p.extract(&f.documents, &g)?;
                let e = error_propagation_report(
                    &f.gold_obligations,
                    &predicted,
                    &f.gold_labels,
                    &policies,
                    &g,
                    &index,
                    &p,
                )?;
                text.push('\n');
                text.push_str(&e.render());
                out["error_propagation"] = serde_json::to_value(e)?;
            }
            match format {
                Format::Json => emit(&json(&out)?, None),
                Format::Text => emit(&text, None),
            }
        }
        Command::Sweep {
            fixture,
            deltas,
            format,
        } => {
            let f = load_fixture(&fixture)?;
            let input = GapInput {
                fixture: Some(fixture),
                documents: None,
                policies: None,
                graph: None,
                obligations: None,
                gold: true,
            };
            let report = ctx.gap_report(&input, &ctx.pipeline()?)?;
            let items: Vec<ScoredItem> = report
                .findings
                .iter()
                .filter_map(|x| {
                    Some(ScoredItem {
                        item_id: x.obligation.obligation_id.clone(),
                        alignment: x.alignment,
                        gold: f.label_of(&x.obligation.obligation_id)?,
                    })
                })
                .collect();
            let rows = threshold_sweep(&items, &deltas, &ctx.cfg.gap)?;
            match format {
                Format::Json => emit(&json(&rows)?, None),
                Format::Text => emit(&compliance_nlp::eval::render_sweep(&rows), None),
            }
        }
        Command::Ablate { fixture, grid, format } => {
            let f = load_fixture(&fixture)?;
            let toggles = if grid {
                AblationToggles::grid()
            } else {
                AblationToggles::additive()
            };
            let table = ablation_matrix(&f, &ctx.pipeline()?, &toggles)?;
            match format {
                Format::Json => emit(&json(&table)?, None),
                Format::Text => emit(&table.render(), None),
            }
        }
        Command::Fixture { out, kind, spec, pairs } => {
            let c = &ctx.cfg;
            let f = match kind {
                FixtureKind::Standard => {
                    let spec: FixtureSpec = match &spec {
                        Some(path) => parse(path)?,
                        None => FixtureSpec::default(),
                    };
                    generate_fixture_with(&spec, c.seed, &c.embedder, &c.gap)?
                }
                FixtureKind::Kg => generate_kg_fixture_with(pairs, c.seed, &c.embedder, &c.retrieval, &c.gap)?,
            };
            f.write_dir(&out)?;
            let corpora = out.join("corpora");
            fs::create_dir_all(&corpora).with_context(|| format!("cannot create {}", corpora.display()))?;
            emit(
                &render_corpus(&dialect_corpus(4, 32, 1.0, 3000, 60, c.seed)),
                Some(&corpora.join("low.txt")),
            )?;
            emit(
                &render_corpus(&dialect_corpus(4, 32, 5.0, 3000, 60, c.seed)),
                Some(&corpora.join("high.txt")),
            )?;
            emit(
                &json(&serde_json::json!({
                    "documents": f.documents.len(),
                    "policies": f.policies.len(),
                    "gold_obligations": f.gold_obligations.len(),
                    "out": out,
                }))?,
                None,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read_obligations(path: &Path) -> Result<Vec<Obligation>> {
    read_jsonl(&read(path)?).with_context(|| format!("malformed JSON lines in {}", path.display()))
}
