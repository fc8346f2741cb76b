//! Document model, tokenization, chunking and the hashed text embedder.
//!
//! The embedder is a deterministic feature-hashing bag-of-tokens model. It is
//! reached through the [`Embed`] trait so a learned encoder can replace it
//! without touching retrieval, graph or gap code.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Framework {
    #[serde(rename = "SEC")]
    Sec,
    #[serde(rename = "MIFID2")]
    Mifid2,
    #[serde(rename = "BASEL3")]
    Basel3,
    #[serde(rename = "OTHER")]
    Other,
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Framework::Sec => "SEC",
            Framework::Mifid2 => "MIFID2",
            Framework::Basel3 => "BASEL3",
            Framework::Other => "OTHER",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provision {
    pub provision_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub framework: Framework,
    pub title: String,
    pub provisions: Vec<Provision>,
}

impl Document {
    pub fn validate(&self) -> Result<()> {
        if self.doc_id.is_empty() {
            return Err(Error::InvalidConfig("document with empty doc_id".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.provisions {
            if !seen.insert(p.provision_id.as_str()) {
                return Err(Error::DuplicateId(p.provision_id.clone()));
            }
        }
        Ok(())
    }
}

/// Parse a JSON array of documents and check id uniqueness.
pub fn load_documents(json: &str) -> Result<Vec<Document>> {
    let docs: Vec<Document> = serde_json::from_str(json)?;
    let mut ids = std::collections::HashSet::new();
    for d in &docs {
        d.validate()?;
        if !ids.insert(d.doc_id.as_str()) {
            return Err(Error::DuplicateId(d.doc_id.clone()));
        }
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub provision_id: String,
    pub text: String,
    pub token_count: usize,
}

/// A token with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Lowercase alphanumeric tokens. A period survives only between two digits,
/// so `229.402` and `4.5` stay whole while `25(2)` splits into `25`, `2`.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_spans(text).into_iter().map(|t| t.text).collect()
}

pub fn tokenize_spans(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    for (i, &(pos, c)) in chars.iter().enumerate() {
        let keep = if c.is_alphanumeric() {
            true
        } else if c == '.' && !current.is_empty() {
            let prev_digit = i > 0 && chars[i - 1].1.is_ascii_digit();
            let next_digit = chars.get(i + 1).is_some_and(|&(_, n)| n.is_ascii_digit());
            prev_digit && next_digit
        } else {
            false
        };
        if keep {
            if current.is_empty() {
                start = pos;
            }
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(Token {
                text: std::mem::take(&mut current),
                start,
                end: pos,
            });
        }
    }
    if !current.is_empty() {
        tokens.push(Token {
            text: current,
            start,
            end: text.len(),
        });
    }
    tokens
}

/// Split every provision into overlapping token windows. Chunks never cross
/// provision boundaries; the stride is `max_tokens - overlap`.
pub fn chunk_document(doc: &Document, max_tokens: usize, overlap: usize) -> Result<Vec<Chunk>> {
    if max_tokens <= overlap {
        return Err(Error::InvalidWindow { max_tokens, overlap });
    }
    let stride = max_tokens - overlap;
    let mut chunks = Vec::new();
    for prov in &doc.provisions {
        let tokens = tokenize(&prov.text);
        let n = tokens.len();
        let mut start = 0;
        let mut idx = 0;
        while start < n {
            let end = (start + max_tokens).min(n);
            let window = &tokens[start..end];
            chunks.push(Chunk {
                chunk_id: format!("{}::{}::{:03}", doc.doc_id, prov.provision_id, idx),
                doc_id: doc.doc_id.clone(),
                provision_id: prov.provision_id.clone(),
                text: window.join(" "),
                token_count: window.len(),
            });
            if end == n {
                break;
            }
            start += stride;
            idx += 1;
        }
    }
    Ok(chunks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub dim: usize,
    pub hash_seed: u64,
    /// Carried for config compatibility; the hashing embedder weights by
    /// term frequency only.
    pub idf_smoothing: f64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            dim: 256,
            hash_seed: 0x5EED_C0DE_2024_0001,
            idf_smoothing: 1.0,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 8 {
            return Err(Error::InvalidConfig(format!("embedding dim {} < 8", self.dim)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub norm: f64,
}

impl Embedding {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            norm: 0.0,
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        let norm = l2(&values);
        Self { values, norm }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Scale to unit length; the zero vector stays zero.
    pub fn normalized(mut self) -> Self {
        let norm = l2(&self.values);
        if norm > 0.0 {
            for v in &mut self.values {
                *v /= norm;
            }
        }
        self.norm = l2(&self.values);
        self
    }
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Anything that maps text to a fixed-dimension embedding.
pub trait Embed: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Embedding;
}

impl Embed for EmbedderConfig {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Embedding {
        embed_text(text, self)
    }
}

fn hash_token(token: &str, seed: u64) -> u64 {
    // FNV-1a over the bytes, seeded, then a splitmix64 finalizer.
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Coordinate and sign a token hashes to under `cfg`.
pub fn token_slot(token: &str, cfg: &EmbedderConfig) -> (usize, f64) {
    let idx = (hash_token(token, cfg.hash_seed) % cfg.dim as u64) as usize;
    let sign_bit = hash_token(token, cfg.hash_seed ^ 0x9e37_79b9_7f4a_7c15) & 1;
    (idx, if sign_bit == 0 { 1.0 } else { -1.0 })
}

/// Feature-hashed bag of tokens with `ln(1 + tf)` weights, L2-normalized.
pub fn embed_text(text: &str, cfg: &EmbedderConfig) -> Embedding {
    let mut tf: BTreeMap<String, u32> = BTreeMap::new();
    for tok in tokenize(text) {
        *tf.entry(tok).or_default() += 1;
    }
    let mut values = vec![0.0; cfg.dim];
    for (tok, count) in &tf {
        let (idx, sign) = token_slot(tok, cfg);
        values[idx] += sign * (1.0 + f64::from(*count)).ln();
    }
    Embedding::from_values(values).normalized()
}

/// Cosine similarity, clamped to [-1, 1]; zero when either vector is zero.
pub fn cosine_sim(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let na = l2(&a.values);
    let nb = l2(&b.values);
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc_with(texts: &[&str]) -> Document {
        Document {
            doc_id: "D1".into(),
            framework: Framework::Mifid2,
            title: "t".into(),
            provisions: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Provision {
                    provision_id: format!("P{i}"),
                    text: t.to_string(),
                })
                .collect(),
        }
    }

    fn numbered(n: usize) -> String {
        (1..=n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("The firm shall report."), ["the", "firm", "shall", "report"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Article 25(2) applies"), ["article", "25", "2", "applies"]);
        assert_eq!(tokenize("17 CFR §229.402."), ["17", "cfr", "229.402"]);
        assert_eq!(tokenize("CET1 ≥ 4.5%"), ["cet1", "4.5"]);
    }

    #[test]
    fn token_spans_point_into_source() {
        let text = "Déjà vu, Art. 54–56";
        for t in tokenize_spans(text) {
            assert_eq!(text[t.start..t.end].to_lowercase(), t.text);
        }
    }

    #[test]
    fn chunking_examples() {
        let d = doc_with(&[&numbered(10)]);
        assert_eq!(chunk_document(&d, 10, 0).unwrap().len(), 1);

        let d = doc_with(&[&numbered(15)]);
        let chunks = chunk_document(&d, 10, 5).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].text, numbered(10));
        assert_eq!(
            chunks[1].text,
            (6..=15).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
        );

        let d = doc_with(&[""]);
        assert!(chunk_document(&d, 10, 5).unwrap().is_empty());

        assert!(matches!(chunk_document(&d, 5, 5), Err(Error::InvalidWindow { .. })));
    }

    #[test]
    fn embedding_edge_cases() {
        let cfg = EmbedderConfig::default();
        let e = embed_text("", &cfg);
        assert_eq!(e.norm, 0.0);
        assert!(e.values.iter().all(|v| *v == 0.0));

        let a = embed_text("the investment firm shall report", &cfg);
        let b = embed_text("the investment firm shall report", &cfg);
        assert_eq!(a, b);
        assert!((a.norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_uncollided_texts_are_orthogonal() {
        let cfg = EmbedderConfig::default();
        let left = ["capital", "buffer", "liquidity"];
        let right = ["client", "suitability", "report"];
        let slots = |ws: &[&str]| ws.iter().map(|w| token_slot(w, &cfg).0).collect::<Vec<_>>();
        let (ls, rs) = (slots(&left), slots(&right));
        assert!(ls.iter().all(|i| !rs.contains(i)), "fixture words collide");
        let a = embed_text(&left.join(" "), &cfg);
        let b = embed_text(&right.join(" "), &cfg);
        assert_eq!(cosine_sim(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn cosine_examples() {
        let v = Embedding::from_values(vec![3.0, 4.0]);
        assert!((cosine_sim(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        let x = Embedding::from_values(vec![1.0, 0.0]);
        let y = Embedding::from_values(vec![0.0, 1.0]);
        assert_eq!(cosine_sim(&x, &y).unwrap(), 0.0);
        assert_eq!(cosine_sim(&v, &Embedding::zeros(2)).unwrap(), 0.0);
        assert!(matches!(
            cosine_sim(&v, &Embedding::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn chunks_reconstruct_provision(n in 0usize..80, max in 1usize..20, ov in 0usize..19) {
            prop_assume!(max > ov);
            let d = doc_with(&[&numbered(n)]);
            let chunks = chunk_document(&d, max, ov).unwrap();
            let mut rebuilt: Vec<String> = Vec::new();
            for (i, c) in chunks.iter().enumerate() {
                let toks = tokenize(&c.text);
                prop_assert_eq!(toks.len(), c.token_count);
                let skip = if i == 0 { 0 } else { ov };
                rebuilt.extend(toks.into_iter().skip(skip));
            }
            prop_assert_eq!(rebuilt, tokenize(&d.provisions[0].text));
        }

        #[test]
        fn cosine_symmetric_and_bounded(a in "[a-z ]{0,40}", b in "[a-z ]{0,40}") {
            let cfg = EmbedderConfig::default();
            let (ea, eb) = (embed_text(&a, &cfg), embed_text(&b, &cfg));
            let ab = cosine_sim(&ea, &eb).unwrap();
            let ba = cosine_sim(&eb, &ea).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
