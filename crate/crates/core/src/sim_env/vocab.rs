use rand_distr::{Distribution, Normal};

use super::catalog::ShapeKind;
use crate::exemplar_db::WordVectorTable;
use crate::instruction_lang::{Lexicon, Tag};
use crate::util::{derive_seed, rng};

pub const WORD_DIM: usize = 50;
const CONTENT_NORM: f64 = 3.0;
const FUNCTION_NORM: f64 = 0.5;
const SYNONYM_NOISE: f64 = 0.6;

fn gaussian(seed: u64, norm: f64) -> Vec<f64> {
    let n = Normal::new(0.0, norm / (WORD_DIM as f64).sqrt()).expect("positive std");
    let mut r = rng(seed);
    (0..WORD_DIM).map(|_| n.sample(&mut r)).collect()
}

/// Deterministic stand-in for pretrained word vectors over the lexicon:
/// content words get independent vectors of norm about 3, function words
/// about 0.5, and shape synonyms share a base vector plus small noise.
pub fn synthetic_word_vectors(lexicon: &Lexicon, seed: u64) -> WordVectorTable {
    let mut table = WordVectorTable::new(WORD_DIM);
    let function = [Tag::Det, Tag::Adp, Tag::Conj, Tag::Part, Tag::Pron];
    for (k, tok) in lexicon.tokens().into_iter().enumerate() {
        let tags = lexicon.tags(tok);
        let norm = if tags.iter().all(|t| function.contains(t)) {
            FUNCTION_NORM
        } else {
            CONTENT_NORM
        };
        table.insert(tok, gaussian(derive_seed(seed, k as u64), norm)).expect("finite");
    }
    for (g, shape) in ShapeKind::ALL.into_iter().enumerate() {
        let base = gaussian(derive_seed(seed, (1 << 40) + g as u64), CONTENT_NORM);
        for (j, noun) in shape.nouns().into_iter().enumerate() {
            let noise = gaussian(derive_seed(seed, (2 << 40) + (g * 8 + j) as u64), SYNONYM_NOISE);
            table.insert(noun, base.iter().zip(&noise).map(|(a, b)| a + b).collect()).expect("finite");
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim_env::catalog::catalog;
    use crate::util::squared_distance;

    #[test]
    fn covers_catalog_and_groups_synonyms() {
        let t = synthetic_word_vectors(&Lexicon::builtin(), 0);
        for ty in catalog() {
            assert!(t.contains(&ty.color_name));
            assert!(ty.nouns().iter().all(|n| t.contains(n)));
        }
        let d = |a: &str, b: &str| squared_distance(t.get(a).unwrap(), t.get(b).unwrap());
        assert!(d("barrel", "drum") < d("barrel", "box"));
        assert!(d("crate", "cube") < d("crate", "cone"));
        assert!(t.get("the").unwrap().iter().map(|v| v * v).sum::<f64>() < 1.0);
        assert_eq!(t, synthetic_word_vectors(&Lexicon::builtin(), 0));
    }
}
