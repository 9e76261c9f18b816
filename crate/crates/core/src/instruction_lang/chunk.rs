use serde::{Deserialize, Serialize};

use super::lexicon::{Lexicon, Tag};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NounChunk {
    pub start: usize,
    pub end: usize,
    pub tokens: Vec<String>,
}

impl NounChunk {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

const MAX_CHUNK: usize = 8;

/// Whether `toks` matches `DET? ADJ* NOUN+`. A token that can also be
/// something other than a noun counts as a noun only when it is not the
/// first token of the chunk.
fn matches(toks: &[String], lex: &Lexicon) -> bool {
    let has = |i: usize, t: Tag| lex.has(&toks[i], t);
    let pure_noun = |i: usize| lex.tags(&toks[i]) == [Tag::Noun];
    let n = toks.len();
    let starts: &[usize] = if has(0, Tag::Det) { &[1, 0] } else { &[0] };
    for &d in starts {
        // a = number of adjectives; everything after is nouns.
        for a in 0..n.saturating_sub(d) {
            let nouns = d + a..n;
            if nouns.is_empty() || !(d..d + a).all(|i| has(i, Tag::Adj)) {
                continue;
            }
            let ok = nouns.clone().all(|i| has(i, Tag::Noun) && (pure_noun(i) || i > 0));
            if ok {
                return true;
            }
        }
    }
    false
}

/// Maximal left-to-right noun chunks; pronouns form single-token chunks.
pub fn chunk(tokens: &[String], lex: &Lexicon) -> Vec<NounChunk> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = (i + 1..=tokens.len().min(i + MAX_CHUNK))
            .rev()
            .find(|&e| matches(&tokens[i..e], lex));
        let end = match longest {
            Some(e) => Some(e),
            None if lex.has(&tokens[i], Tag::Pron) => Some(i + 1),
            None => None,
        };
        match end {
            Some(e) => {
                out.push(NounChunk {
                    start: i,
                    end: e,
                    tokens: tokens[i..e].to_vec(),
                });
                i = e;
            }
            None => i += 1,
        }
    }
    out
}
