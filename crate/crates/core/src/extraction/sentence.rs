use crate::corpus::{tokenize_spans, Token};

const ABBREVIATIONS: &[&str] = &[
    "art", "arts", "no", "nos", "para", "paras", "sec", "reg", "e.g", "i.e", "eg", "ie", "vs", "cf", "inc", "ltd",
    "co", "u.s", "s", "pp", "para", "et", "al",
];

/// A sentence with its tokens; token offsets index into `text`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize_spans(&text);
        Self { text, tokens }
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Raw text covered by a token range.
    pub fn surface(&self, start: usize, end: usize) -> &str {
        if start >= end || end > self.tokens.len() {
            return "";
        }
        &self.text[self.tokens[start].start..self.tokens[end - 1].end]
    }

    /// Byte offset where the sentence content ends, before closing punctuation.
    pub fn content_end(&self) -> usize {
        self.text
            .trim_end_matches(|c: char| c.is_whitespace() || matches!(c, '.' | '!' | '?' | ';'))
            .len()
    }
}

/// Split on `.`, `!` or `?` followed by whitespace or end of text, except
/// after common citation abbreviations such as `Art.`.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (i, &(pos, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let at_break = chars.get(i + 1).is_none_or(|&(_, n)| n.is_whitespace());
        if !at_break {
            continue;
        }
        if c == '.' {
            let before = &text[start..pos];
            let last_word = before
                .rsplit(|ch: char| ch.is_whitespace() || ch == '(')
                .next()
                .unwrap_or("")
                .to_lowercase();
            if ABBREVIATIONS.contains(&last_word.as_str()) {
                continue;
            }
        }
        let end = pos + c.len_utf8();
        push_sentence(&mut out, &text[start..end]);
        start = end;
    }
    push_sentence(&mut out, &text[start..]);
    out
}

fn push_sentence(out: &mut Vec<Sentence>, raw: &str) {
    let trimmed = raw.trim();
    if !trimmed.is_empty() && trimmed.chars().any(char::is_alphanumeric) {
        out.push(Sentence::new(trimmed));
    }
}
