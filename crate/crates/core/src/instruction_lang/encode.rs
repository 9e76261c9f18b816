use serde::{Deserialize, Serialize};

use super::chunk::NounChunk;
use crate::exemplar_db::WordVectorTable;
use crate::{Error, Result};

pub const OBJ_REF: &str = "OBJ_REF";
/// Tokens on each side of a position that feed its encoding.
pub const WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub refs: Vec<NounChunk>,
    pub anonymized: Vec<String>,
    /// Index in `anonymized` of each reference's placeholder, in order.
    pub placeholders: Vec<usize>,
}

/// Replace each reference span with a single `OBJ_REF` token.
pub fn anonymize(tokens: &[String], refs: &[NounChunk]) -> Result<ReferenceSet> {
    let mut sorted = refs.to_vec();
    sorted.sort_by_key(|c| c.start);
    for (k, c) in sorted.iter().enumerate() {
        if c.start >= c.end || c.end > tokens.len() {
            return Err(Error::invalid("reference span", format!("[{}, {}) outside {} tokens", c.start, c.end, tokens.len())));
        }
        if k > 0 && sorted[k - 1].end > c.start {
            return Err(Error::invalid(
                "reference span",
                format!("[{}, {}) overlaps [{}, {})", c.start, c.end, sorted[k - 1].start, sorted[k - 1].end),
            ));
        }
    }
    let mut anonymized = Vec::with_capacity(tokens.len());
    let mut placeholders = Vec::with_capacity(sorted.len());
    let mut i = 0;
    for c in &sorted {
        anonymized.extend_from_slice(&tokens[i..c.start]);
        placeholders.push(anonymized.len());
        anonymized.push(OBJ_REF.to_string());
        i = c.end;
    }
    anonymized.extend_from_slice(&tokens[i..]);
    Ok(ReferenceSet {
        refs: sorted,
        anonymized,
        placeholders,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEncoding {
    /// One vector per reference, `2 * dim` long.
    pub psi: Vec<Vec<f64>>,
    /// Mean of the per-position encodings.
    pub h_bar: Vec<f64>,
}

fn window_mean(tokens: &[String], table: &WordVectorTable, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if tokens.is_empty() {
        return;
    }
    for t in tokens {
        if t == OBJ_REF {
            continue;
        }
        if let Some(v) = table.get(t) {
            out.iter_mut().zip(v).for_each(|(o, x)| *o += x);
        }
    }
    let n = tokens.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
}

/// Position `i` is encoded as `[mean of the WINDOW tokens before i ; mean of
/// the WINDOW tokens after i]`. Placeholders and unknown tokens contribute
/// zero vectors; an empty window gives zeros.
pub fn position_encodings(tokens: &[String], table: &WordVectorTable) -> Vec<Vec<f64>> {
    let d = table.dim();
    (0..tokens.len())
        .map(|i| {
            let mut h = vec![0.0; 2 * d];
            let (l, r) = h.split_at_mut(d);
            window_mean(&tokens[i.saturating_sub(WINDOW)..i], table, l);
            window_mean(&tokens[(i + 1).min(tokens.len())..(i + 1 + WINDOW).min(tokens.len())], table, r);
            h
        })
        .collect()
}

pub fn encode_context(refs: &ReferenceSet, table: &WordVectorTable) -> Result<ContextEncoding> {
    if refs.anonymized.is_empty() {
        return Err(Error::Empty("anonymized instruction"));
    }
    let hs = position_encodings(&refs.anonymized, table);
    let mut h_bar = vec![0.0; 2 * table.dim()];
    for h in &hs {
        h_bar.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }
    let n = hs.len() as f64;
    h_bar.iter_mut().for_each(|v| *v /= n);
    Ok(ContextEncoding {
        psi: refs.placeholders.iter().map(|&p| hs[p].clone()).collect(),
        h_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruction_lang::{chunk, tokenize, Lexicon};

    fn table() -> WordVectorTable {
        WordVectorTable::from_pairs(
            2,
            [
                ("pass", vec![1.0, 0.0]),
                ("on", vec![0.0, 3.0]),
                ("the", vec![0.5, 0.5]),
                ("left", vec![-2.0, 1.0]),
                ("go", vec![4.0, 4.0]),
                ("to", vec![1.0, -1.0]),
            ],
        )
        .unwrap()
    }

    fn refset(s: &str) -> ReferenceSet {
        let toks = tokenize(s);
        let cs = chunk(&toks, &Lexicon::builtin());
        anonymize(&toks, &cs).unwrap()
    }

    #[test]
    fn single_substitution() {
        let r = refset("go to the blue box");
        assert_eq!(r.anonymized, vec!["go", "to", OBJ_REF]);
        assert_eq!(r.placeholders, vec![2]);
    }

    #[test]
    fn no_refs_is_identity() {
        let toks = tokenize("turn left");
        let r = anonymize(&toks, &[]).unwrap();
        assert_eq!(r.anonymized, toks);
    }

    #[test]
    fn two_placeholders_in_order() {
        let r = refset("pass the planter then the globe");
        assert_eq!(r.anonymized, vec!["pass", OBJ_REF, "then", OBJ_REF]);
        assert_eq!(r.placeholders, vec![1, 3]);
        assert_eq!(r.refs[1].text(), "the globe");
    }

    #[test]
    fn overlap_rejected() {
        let toks = tokenize("a b c d");
        let c = |s, e| NounChunk {
            start: s,
            end: e,
            tokens: vec![],
        };
        assert!(anonymize(&toks, &[c(0, 2), c(1, 3)]).is_err());
        assert!(anonymize(&toks, &[c(3, 5)]).is_err());
    }

    #[test]
    fn lone_placeholder_is_zero() {
        let r = ReferenceSet {
            refs: vec![],
            anonymized: vec![OBJ_REF.into()],
            placeholders: vec![0],
        };
        let e = encode_context(&r, &table()).unwrap();
        assert_eq!(e.psi[0], vec![0.0; 4]);
    }

    #[test]
    fn window_means_by_hand() {
        let r = ReferenceSet {
            refs: vec![],
            anonymized: ["pass", OBJ_REF, "on", "the", "left"].map(String::from).to_vec(),
            placeholders: vec![1],
        };
        let e = encode_context(&r, &table()).unwrap();
        // left: v(pass); right: (v(on) + v(the) + v(left)) / 3
        let want = [1.0, 0.0, (0.0 + 0.5 - 2.0) / 3.0, (3.0 + 0.5 + 1.0) / 3.0];
        for (a, b) in e.psi[0].iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_blind() {
        let a = encode_context(&refset("go to the red barrel"), &table()).unwrap();
        let b = encode_context(&refset("go to the big green planter"), &table()).unwrap();
        assert_eq!(a, b);
    }
}
