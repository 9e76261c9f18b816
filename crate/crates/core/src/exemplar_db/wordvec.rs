use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::util::{read_to_string, write_bytes};
use crate::{Error, Result};

/// Pretrained word vectors: token to `D`-dimensional vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> Self {
        WordVectorTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn from_pairs<I, S>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut t = Self::new(dim);
        for (tok, v) in pairs {
            t.insert(tok, v)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(Error::invalid(
                format!("word vector for {token:?}"),
                format!("dimension {} != {}", vector.len(), self.dim),
            ));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("word vector for {token:?}"), "non-finite value"));
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Vector for `token`, or the zero vector and `false` if unknown.
    pub fn lookup(&self, token: &str) -> (Vec<f64>, bool) {
        match self.vectors.get(token) {
            Some(v) => (v.clone(), true),
            None => (vec![0.0; self.dim], false),
        }
    }

    /// Parse the whitespace-separated text format: `token v1 ... vD` per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: Option<WordVectorTable> = None;
        for (lineno, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(tok) = parts.next() else { continue };
            let vals = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid(format!("word vectors line {}", lineno + 1), e.to_string()))?;
            let t = table.get_or_insert_with(|| WordVectorTable::new(vals.len()));
            if vals.len() != t.dim {
                return Err(Error::invalid(
                    format!("word vectors line {}", lineno + 1),
                    format!("dimension {} != {}", vals.len(), t.dim),
                ));
            }
            t.insert(tok, vals)?;
        }
        table.ok_or(Error::Empty("word vector file"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?)
    }

    /// Text format with tokens sorted, so output is deterministic.
    pub fn to_text(&self) -> String {
        let mut toks: Vec<&String> = self.vectors.keys().collect();
        toks.sort();
        let mut out = String::new();
        for t in toks {
            out.push_str(t);
            for v in &self.vectors[t] {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_bytes(path, self.to_text().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseEmbedding {
    pub vector: Vec<f64>,
    /// Number of tokens missing from the table (they contribute zero vectors).
    pub unknown_tokens: usize,
}

impl PhraseEmbedding {
    pub fn has_unknown(&self) -> bool {
        self.unknown_tokens > 0
    }
}

/// Mean of per-token word vectors. Unknown tokens count in the denominator.
pub fn phrase_embedding<S: AsRef<str>>(phrase: &[S], table: &WordVectorTable) -> Result<PhraseEmbedding> {
    if phrase.is_empty() {
        return Err(Error::Empty("phrase"));
    }
    let mut acc = vec![0.0; table.dim()];
    let mut unknown = 0;
    for tok in phrase {
        match table.get(tok.as_ref()) {
            Some(v) => acc.iter_mut().zip(v).for_each(|(a, b)| *a += b),
            None => unknown += 1,
        }
    }
    let n = phrase.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(PhraseEmbedding {
        vector: acc,
        unknown_tokens: unknown,
    })
}
