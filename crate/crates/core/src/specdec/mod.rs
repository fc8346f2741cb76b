//! Speculative-decoding acceptance simulator.
//!
//! A greedy n-gram verifier stands in for the generator and `M` draft heads
//! propose the next `M` tokens from progressively shorter contexts. Each step
//! accepts the longest run of proposals the verifier agrees with and always
//! emits one verifier token on top, so a step yields between 1 and `M + 1`
//! tokens. Latency is modelled as steps times a per-step cost inflated by the
//! head overhead `step_overhead`.

mod corpora;

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use corpora::{
    dialect_corpus, entropy_ladder, markov_corpus, parse_corpus, render_corpus, uniform_corpus, ENTROPY_LADDER,
};

use crate::error::{Error, Result};
use crate::Execution;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

/// Token id that matches nothing in any vocabulary.
const NO_TOKEN: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecDecConfig {
    pub m: usize,
    pub step_overhead: f64,
    pub base_token_cost: f64,
    pub prompt_count: usize,
    pub gen_length: usize,
    pub order: usize,
    pub smoothing_k: f64,
    pub prompt_len: usize,
}

impl Default for SpecDecConfig {
    fn default() -> Self {
        Self {
            m: 3,
            step_overhead: 0.15,
            base_token_cost: 1.0,
            prompt_count: 512,
            gen_length: 8,
            order: 4,
            smoothing_k: 0.01,
            prompt_len: 4,
        }
    }
}

impl SpecDecConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.m == 0 {
            return bad("at least one draft head is required");
        }
        if self.step_overhead.is_nan() || self.step_overhead < 0.0 {
            return bad("step_overhead must be non-negative");
        }
        if self.base_token_cost.is_nan() || self.base_token_cost <= 0.0 {
            return bad("base_token_cost must be positive");
        }
        if self.order == 0 {
            return bad("n-gram order must be at least 1");
        }
        if self.smoothing_k.is_nan() || self.smoothing_k <= 0.0 {
            return bad("smoothing_k must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Counts {
    total: u64,
    by_token: BTreeMap<u32, u64>,
    best: u32,
}

/// Context to next-token counts for one `(context length, offset)` pair.
#[derive(Debug, Clone, PartialEq)]
struct Table {
    ctx_len: usize,
    offset: usize,
    counts: HashMap<Vec<u32>, Counts>,
}

impl Table {
    fn train(seqs: &[Vec<u32>], ctx_len: usize, offset: usize, bos: u32) -> Self {
        let mut counts: HashMap<Vec<u32>, Counts> = HashMap::new();
        for seq in seqs {
            // Targets are every real token and the closing EOS.
            for j in 0..seq.len() {
                if seq[j] == bos {
                    continue;
                }
                let Some(last) = (j + 1).checked_sub(offset) else {
                    continue;
                };
                let Some(first) = last.checked_sub(ctx_len) else {
                    continue;
                };
                let key = &seq[first..last];
                if !counts.contains_key(key) {
                    counts.insert(key.to_vec(), Counts::default());
                }
                let c = counts.get_mut(key).expect("inserted");
                c.total += 1;
                *c.by_token.entry(seq[j]).or_default() += 1;
            }
        }
        for c in counts.values_mut() {
            // Highest count, lowest id on ties; ids follow lexicographic order.
            c.best = c
                .by_token
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(t, _)| *t)
                .unwrap_or(0);
        }
        Self {
            ctx_len,
            offset,
            counts,
        }
    }

    fn context<'a>(&self, hist: &'a [u32]) -> &'a [u32] {
        &hist[hist.len().saturating_sub(self.ctx_len)..]
    }

    fn argmax(&self, hist: &[u32]) -> u32 {
        self.counts.get(self.context(hist)).map_or(0, |c| c.best)
    }
}

/// Add-k smoothed n-gram model with sentence-boundary padding.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    pub order: usize,
    pub smoothing_k: f64,
    /// Sorted predictable vocabulary, EOS included, BOS excluded.
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    table: Table,
}

fn build_vocab(corpus: &[Vec<String>]) -> Vec<String> {
    let mut v: Vec<String> = corpus.iter().flatten().filter(|t| *t != BOS).cloned().collect();
    v.push(EOS.to_string());
    v.sort();
    v.dedup();
    v
}

fn encode(corpus: &[Vec<String>], index: &HashMap<String, u32>, pad: usize, bos: u32) -> Vec<Vec<u32>> {
    corpus
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let mut seq = vec![bos; pad];
            seq.extend(s.iter().map(|t| index.get(t).copied().unwrap_or(NO_TOKEN)));
            seq.push(index[EOS]);
            seq
        })
        .collect()
}

/// Count n-grams of `order` over sentences padded with `order - 1` BOS
/// markers and closed by EOS.
pub fn train_ngram(corpus: &[Vec<String>], order: usize, smoothing_k: f64) -> Result<NgramModel> {
    if order == 0 {
        return Err(Error::InvalidConfig("n-gram order must be at least 1".into()));
    }
    if smoothing_k.is_nan() || smoothing_k <= 0.0 {
        return Err(Error::InvalidConfig("smoothing_k must be positive".into()));
    }
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptyInput("training corpus"));
    }
    let vocab = build_vocab(corpus);
    let index: HashMap<String, u32> = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    let bos = vocab.len() as u32;
    let seqs = encode(corpus, &index, order - 1, bos);
    Ok(NgramModel {
        order,
        smoothing_k,
        table: Table::train(&seqs, order - 1, 1, bos),
        vocab,
        index,
    })
}

impl NgramModel {
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn bos(&self) -> u32 {
        self.vocab.len() as u32
    }

    fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(NO_TOKEN)
    }

    fn prob_id(&self, ctx: &[u32], w: u32) -> f64 {
        let v = self.vocab.len() as f64;
        let k = self.smoothing_k;
        match self.table.counts.get(self.table.context(ctx)) {
            Some(c) => (c.by_token.get(&w).copied().unwrap_or(0) as f64 + k) / (c.total as f64 + k * v),
            None => 1.0 / v,
        }
    }

    /// Smoothed `P(token | context)`; the context is padded with BOS.
    pub fn prob(&self, context: &[&str], token: &str) -> f64 {
        let mut ctx = vec![self.bos(); self.order - 1];
        ctx.extend(context.iter().map(|t| self.id(t)));
        self.prob_id(&ctx, self.id(token))
    }

    /// Greedy next token after `context`.
    pub fn predict(&self, context: &[&str]) -> &str {
        let mut ctx = vec![self.bos(); self.order - 1];
        ctx.extend(context.iter().map(|t| self.id(t)));
        &self.vocab[self.table.argmax(&ctx) as usize]
    }

    fn encode(&self, corpus: &[Vec<String>]) -> Vec<Vec<u32>> {
        encode(corpus, &self.index, self.order - 1, self.bos())
    }

    /// Append `tok` to a decoding history; EOS restarts the sentence.
    fn push(&self, hist: &mut Vec<u32>, tok: u32) {
        hist.push(tok);
        if tok == self.index[EOS] {
            hist.extend(std::iter::repeat_n(self.bos(), self.order - 1));
        }
    }
}

/// Mean bits per token of `corpus` under `model`, over every real token
/// position (EOS excluded).
pub fn corpus_entropy(model: &NgramModel, corpus: &[Vec<String>]) -> f64 {
    let eos = model.index[EOS];
    let mut bits = 0.0;
    let mut n = 0usize;
    for seq in model.encode(corpus) {
        for j in model.order - 1..seq.len() {
            if seq[j] == eos {
                continue;
            }
            bits -= model.prob_id(&seq[..j], seq[j]).log2();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        bits / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Head {
    /// Predicts the token `offset` positions ahead from the last tokens.
    Skip(Table),
    /// Greedy roll-out of a full model; a perfect draft of that model.
    Rollout(NgramModel),
    Constant(u32),
}

/// `M` draft heads; head `i` proposes position `t + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSet {
    pub m: usize,
    heads: Vec<Head>,
    vocab: Vec<String>,
}

impl HeadSet {
    /// Head `i` is trained to predict offset `i` from a context of
    /// `order - i` tokens (empty once `i >= order`).
    pub fn train(corpus: &[Vec<String>], order: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfig("at least one draft head is required".into()));
        }
        let base = train_ngram(corpus, order.max(1), 1.0)?;
        let seqs = base.encode(corpus);
        let heads = (1..=m)
            .map(|i| Head::Skip(Table::train(&seqs, order.saturating_sub(i), i, base.bos())))
            .collect();
        Ok(Self {
            m,
            heads,
            vocab: base.vocab,
        })
    }

    /// Heads that replay the verifier's own greedy continuation.
    pub fn from_verifier(verifier: &NgramModel, m: usize) -> Self {
        Self {
            m,
            heads: (0..m).map(|_| Head::Rollout(verifier.clone())).collect(),
            vocab: verifier.vocab.clone(),
        }
    }

    /// Heads that always propose `token`, whatever the context.
    pub fn constant(token: &str, verifier: &NgramModel, m: usize) -> Self {
        let id = verifier.id(token);
        Self {
            m,
            heads: (0..m).map(|_| Head::Constant(id)).collect(),
            vocab: verifier.vocab.clone(),
        }
    }

    fn propose(&self, hist: &[u32]) -> Vec<u32> {
        let mut rollout: Option<Vec<u32>> = None;
        self.heads
            .iter()
            .enumerate()
            .map(|(i, h)| match h {
                Head::Skip(t) => t.argmax(hist),
                Head::Constant(id) => *id,
                Head::Rollout(model) => {
                    let seq = rollout.get_or_insert_with(|| {
                        let mut h = hist.to_vec();
                        let mut out = Vec::new();
                        for _ in 0..self.m {
                            let t = model.table.argmax(&h);
                            model.push(&mut h, t);
                            out.push(t);
                        }
                        out
                    });
                    seq[i]
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub proposed: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub tokens_per_step: f64,
    pub speedup: f64,
    /// One modelled latency per prompt.
    pub latency_samples: Vec<f64>,
    pub p50: f64,
    pub p99: f64,
}

struct PromptRun {
    proposed: u64,
    accepted: u64,
    emitted: u64,
    steps: u64,
}

fn decode_prompt(verifier: &NgramModel, heads: &HeadSet, prompt: &[String], gen_length: usize) -> PromptRun {
    let mut hist = vec![verifier.bos(); verifier.order - 1];
    for t in prompt {
        verifier.push(&mut hist, verifier.id(t));
    }
    let m = heads.m as u64;
    let mut run = PromptRun {
        proposed: 0,
        accepted: 0,
        emitted: 0,
        steps: 0,
    };
    while run.emitted < gen_length as u64 {
        let proposals = heads.propose(&hist);
        let mut a = 0u64;
        for p in &proposals {
            let v = verifier.table.argmax(&hist);
            verifier.push(&mut hist, v);
            if *p != v {
                break;
            }
            a += 1;
        }
        if a == m {
            let v = verifier.table.argmax(&hist);
            verifier.push(&mut hist, v);
        }
        run.proposed += m;
        run.accepted += a;
        run.emitted += a + 1;
        run.steps += 1;
    }
    run
}

/// Speculative decoding of `gen_length` tokens after every prompt.
pub fn simulate_decoding(
    verifier: &NgramModel,
    heads: &HeadSet,
    prompts: &[Vec<String>],
    cfg: &SpecDecConfig,
    exec: Execution,
) -> Result<SimResult> {
    cfg.validate()?;
    if heads.vocab != verifier.vocab {
        return Err(Error::InvalidConfig(
            "draft heads and verifier must share a vocabulary".into(),
        ));
    }
    if prompts.is_empty() {
        return Err(Error::EmptyInput("prompts"));
    }
    let runs = exec.map(prompts, |p| decode_prompt(verifier, heads, p, cfg.gen_length));
    let (mut proposed, mut accepted, mut emitted, mut steps) = (0, 0, 0, 0);
    let mut latency_samples = Vec::with_capacity(runs.len());
    for r in &runs {
        proposed += r.proposed;
        accepted += r.accepted;
        emitted += r.emitted;
        steps += r.steps;
        latency_samples.push(r.steps as f64 * cfg.base_token_cost * (1.0 + cfg.step_overhead));
    }
    let tokens_per_step = if steps == 0 { 1.0 } else { emitted as f64 / steps as f64 };
    let (p50, p99) = latency_percentiles(&latency_samples)?;
    Ok(SimResult {
        proposed,
        accepted,
        acceptance_rate: if proposed == 0 {
            0.0
        } else {
            accepted as f64 / proposed as f64
        },
        tokens_per_step,
        speedup: speedup(tokens_per_step, cfg.step_overhead),
        latency_samples,
        p50,
        p99,
    })
}

/// Tokens per verification step discounted by the per-step overhead.
pub fn speedup(tokens_per_step: f64, step_overhead: f64) -> f64 {
    tokens_per_step / (1.0 + step_overhead)
}

pub fn speedup_estimate(result: &SimResult, cfg: &SpecDecConfig) -> f64 {
    speedup(result.tokens_per_step, cfg.step_overhead)
}

/// Nearest-rank percentile `p` in (0, 100].
pub fn percentile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("latency samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

pub fn latency_percentiles(samples: &[f64]) -> Result<(f64, f64)> {
    Ok((percentile(samples, 50.0)?, percentile(samples, 99.0)?))
}

/// `count` prompts of `len` tokens cut from random sentences of `corpus`.
pub fn sample_prompts(corpus: &[Vec<String>], count: usize, len: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    let usable: Vec<&Vec<String>> = corpus.iter().filter(|s| !s.is_empty()).collect();
    if usable.is_empty() {
        return Err(Error::EmptyInput("prompt corpus"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let s = usable[rng.gen_range(0..usable.len())];
            let take = len.min(s.len());
            let start = rng.gen_range(0..=s.len() - take);
            s[start..start + take].to_vec()
        })
        .collect())
}

/// Entropy and simulated acceptance for one corpus, with verifier and heads
/// trained on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRun {
    pub entropy: f64,
    pub result: SimResult,
}

pub fn run_corpus(corpus: &[Vec<String>], cfg: &SpecDecConfig, seed: u64, exec: Execution) -> Result<CorpusRun> {
    cfg.validate()?;
    let verifier = train_ngram(corpus, cfg.order, cfg.smoothing_k)?;
    let heads = HeadSet::train(corpus, cfg.order, cfg.m)?;
    let prompts = sample_prompts(corpus, cfg.prompt_count, cfg.prompt_len, seed)?;
    Ok(CorpusRun {
        entropy: corpus_entropy(&verifier, corpus),
        result: simulate_decoding(&verifier, &heads, &prompts, cfg, exec)?,
    })
}

/// Side-by-side record for a low- and a high-entropy corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyComparison {
    pub entropy_low: f64,
    pub entropy_high: f64,
    pub acceptance_low: f64,
    pub acceptance_high: f64,
    pub speedup_low: f64,
    pub speedup_high: f64,
}

pub fn compare_corpora(
    low: &[Vec<String>],
    high: &[Vec<String>],
    cfg: &SpecDecConfig,
    seed: u64,
    exec: Execution,
) -> Result<EntropyComparison> {
    let a = run_corpus(low, cfg, seed, exec)?;
    let b = run_corpus(high, cfg, seed, exec)?;
    Ok(EntropyComparison {
        entropy_low: a.entropy,
        entropy_high: b.entropy,
        acceptance_low: a.result.acceptance_rate,
        acceptance_high: b.result.acceptance_rate,
        speedup_low: a.result.speedup,
        speedup_high: b.result.speedup,
    })
}
