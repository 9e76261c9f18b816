//! Instruction processing: tokenization, noun-chunking, object-reference
//! classification, anonymization and windowed context encoding.

mod chunk;
mod encode;
mod lexicon;
mod objref;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use chunk::{chunk, NounChunk};
pub use encode::{anonymize, encode_context, ContextEncoding, ReferenceSet, OBJ_REF, WINDOW};
pub use lexicon::{Lexicon, Tag};
pub use objref::{
    classify_reference, load_labeled_chunks, save_labeled_chunks, train_objref, LabeledChunk, ObjRefClassifier,
    ObjRefConfig, ObjRefReport, LAMBDA_R1, T_R2,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Instruction {
    pub fn parse(raw: &str) -> Result<Self> {
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            return Err(Error::Empty("instruction"));
        }
        Ok(Instruction {
            raw: raw.to_string(),
            tokens,
        })
    }
}

/// Lowercase and split on whitespace and punctuation; apostrophes and
/// hyphens inside words are kept.
pub fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = s.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let inner = (c == '\'' || c == '-')
            && i > 0
            && chars[i - 1].is_alphanumeric()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || c == '_' || inner {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}
