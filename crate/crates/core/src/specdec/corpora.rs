//! Synthetic token corpora with controllable entropy, and a plain text
//! format (one sentence per line, whitespace separated tokens).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn symbol(i: usize) -> String {
    format!("t{i:03}")
}

fn dialect_symbol(d: usize, i: usize) -> String {
    format!("d{d}t{i:03}")
}

/// I.i.d. uniform tokens over `vocab_size` symbols.
pub fn uniform_corpus(vocab_size: usize, n_sentences: usize, sentence_len: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sentences)
        .map(|_| {
            (0..sentence_len)
                .map(|_| symbol(rng.gen_range(0..vocab_size)))
                .collect()
        })
        .collect()
}

/// First-order Markov text: each symbol ranks the vocabulary in its own
/// random order and draws the successor at rank `r` with weight
/// `exp(-r / temperature)`. Low temperatures give nearly deterministic
/// chains, high ones approach uniform noise.
pub fn markov_corpus(
    vocab_size: usize,
    temperature: f64,
    n_sentences: usize,
    sentence_len: usize,
    seed: u64,
) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    markov_sentences(&mut rng, vocab_size, temperature, n_sentences, sentence_len, symbol)
}

/// Interleaved sentences from `dialects` independent Markov sources over
/// disjoint vocabularies. Contexts never mix dialects, so the corpus
/// behaves like several independent draws of the same source family.
pub fn dialect_corpus(
    dialects: usize,
    vocab_size: usize,
    temperature: f64,
    sentences_per_dialect: usize,
    sentence_len: usize,
    seed: u64,
) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<Vec<Vec<String>>> = (0..dialects)
        .map(|d| {
            markov_sentences(
                &mut rng,
                vocab_size,
                temperature,
                sentences_per_dialect,
                sentence_len,
                |i| dialect_symbol(d, i),
            )
        })
        .collect();
    (0..sentences_per_dialect)
        .flat_map(|i| parts.iter().map(move |p| p[i].clone()))
        .collect()
}

fn markov_sentences(
    rng: &mut ChaCha8Rng,
    vocab_size: usize,
    temperature: f64,
    n_sentences: usize,
    sentence_len: usize,
    name: impl Fn(usize) -> String,
) -> Vec<Vec<String>> {
    let weights: Vec<f64> = (0..vocab_size).map(|r| (-(r as f64) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let ranks: Vec<Vec<usize>> = (0..vocab_size)
        .map(|_| {
            let mut v: Vec<usize> = (0..vocab_size).collect();
            v.shuffle(rng);
            v
        })
        .collect();
    let draw = |rng: &mut ChaCha8Rng, from: usize| {
        let mut u = rng.gen::<f64>() * total;
        for (r, w) in weights.iter().enumerate() {
            if u < *w {
                return ranks[from][r];
            }
            u -= w;
        }
        ranks[from][vocab_size - 1]
    };
    (0..n_sentences)
        .map(|_| {
            let mut cur = rng.gen_range(0..vocab_size);
            let mut s = Vec::with_capacity(sentence_len);
            for _ in 0..sentence_len {
                s.push(name(cur));
                cur = draw(rng, cur);
            }
            s
        })
        .collect()
}

/// Source temperatures of the controlled-entropy family, lowest first.
pub const ENTROPY_LADDER: [f64; 6] = [1.0, 1.5, 2.0, 2.7, 3.6, 5.0];

/// One corpus per ladder temperature: four 32-symbol dialects, all from
/// `seed`, so only the temperature changes along the ladder.
pub fn entropy_ladder(seed: u64) -> Vec<Vec<Vec<String>>> {
    ENTROPY_LADDER
        .iter()
        .map(|t| dialect_corpus(4, 32, *t, 3000, 60, seed))
        .collect()
}

pub fn parse_corpus(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn render_corpus(corpus: &[Vec<String>]) -> String {
    let mut out = String::new();
    for s in corpus {
        out.push_str(&s.join(" "));
        out.push('\n');
    }
    out
}
