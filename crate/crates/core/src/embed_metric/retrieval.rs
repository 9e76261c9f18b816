use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};

use super::net::EmbeddingNet;
use crate::exemplar_db::ImagePatch;
use crate::util::{rng, squared_distance};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPatch {
    pub label: String,
    pub patch: ImagePatch,
}

const SET_SIZE: usize = 5;

fn set_distance(a: &[&Vec<f64>], b: &[&Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for x in a {
        for y in b {
            best = best.min(squared_distance(x, y));
        }
    }
    best
}

/// N-way few-shot identification accuracy.
///
/// Each trial draws `n` distinct labels; the first is the query object. The
/// query set is 5 images of it, and each of the `n` candidates contributes 5
/// images (the query object's candidate images are disjoint from the query
/// images). The prediction is the candidate with the smallest set-to-set
/// distance (minimum over image pairs); candidate order is shuffled and ties
/// go to the earlier candidate.
pub fn nway_retrieval_eval(net: &EmbeddingNet, pool: &[LabeledPatch], n: usize, trials: usize, seed: u64) -> Result<f64> {
    if n < 2 || trials == 0 {
        return Err(Error::invalid("n-way evaluation", format!("need n >= 2 and trials > 0, got n={n}, trials={trials}")));
    }
    let mut by_label: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for lp in pool {
        by_label.entry(lp.label.as_str()).or_default().push(net.embed(&lp.patch)?);
    }
    let labels: Vec<&str> = by_label
        .iter()
        .filter(|(_, v)| v.len() >= 2 * SET_SIZE)
        .map(|(k, _)| *k)
        .collect();
    if labels.len() < n {
        return Err(Error::invalid(
            "n-way pool",
            format!("{} labels have >= {} patches, need {n}", labels.len(), 2 * SET_SIZE),
        ));
    }
    let mut r = rng(seed);
    let mut correct = 0usize;
    for _ in 0..trials {
        let chosen: Vec<&str> = labels.choose_multiple(&mut r, n).copied().collect();
        let query_items = &by_label[chosen[0]];
        let picks: Vec<&Vec<f64>> = query_items.choose_multiple(&mut r, 2 * SET_SIZE).collect();
        let (query, own) = picks.split_at(SET_SIZE);
        let mut candidates: Vec<(bool, Vec<&Vec<f64>>)> = vec![(true, own.to_vec())];
        for l in &chosen[1..] {
            candidates.push((false, by_label[l].choose_multiple(&mut r, SET_SIZE).collect()));
        }
        candidates.shuffle(&mut r);
        let mut best = (f64::INFINITY, false);
        for (is_target, set) in &candidates {
            let d = set_distance(query, set);
            if d < best.0 {
                best = (d, *is_target);
            }
        }
        if best.1 {
            correct += 1;
        }
    }
    Ok(correct as f64 / trials as f64)
}
