use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const NULL_OBJECT: &str = "NULL";
pub const DEFAULT_DELTA: f64 = 0.1;
pub const NULL_PRIOR_FLOOR: f64 = 0.1;

/// One instruction reduced to its noun chunks and its candidate objects
/// (the null object is implicit).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentInstance {
    pub chunks: Vec<Vec<String>>,
    pub candidates: Vec<String>,
}

/// Unigram token distributions per object, including the null object, and
/// a fixed object prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentModel {
    pub vocab: Vec<String>,
    /// Sorted; contains [`NULL_OBJECT`].
    pub objects: Vec<String>,
    /// `token_probs[o][v]`.
    pub token_probs: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    pub delta: f64,
    #[serde(skip)]
    vocab_index: BTreeMap<String, usize>,
}

impl AlignmentModel {
    pub fn new(vocab: Vec<String>, objects: Vec<String>, token_probs: Vec<Vec<f64>>, prior: Vec<f64>, delta: f64) -> Result<Self> {
        if objects.len() != token_probs.len() || objects.len() != prior.len() {
            return Err(Error::dims(objects.len(), token_probs.len().min(prior.len())));
        }
        if !objects.iter().any(|o| o == NULL_OBJECT) {
            return Err(Error::invalid("alignment model", "missing the null object"));
        }
        if token_probs.iter().any(|p| p.len() != vocab.len()) {
            return Err(Error::invalid("alignment model", "token distribution length differs from vocabulary"));
        }
        let vocab_index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(AlignmentModel {
            vocab,
            objects,
            token_probs,
            prior,
            delta,
            vocab_index,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: AlignmentModel = serde_json::from_str(s)?;
        Self::new(m.vocab, m.objects, m.token_probs, m.prior, m.delta)
    }

    fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.binary_search_by(|o| o.as_str().cmp(id)).ok()
    }

    pub fn token_prob(&self, token: &str, object: &str) -> Option<f64> {
        Some(self.token_probs[self.object_index(object)?][*self.vocab_index.get(token)?])
    }

    pub fn prior_of(&self, object: &str) -> f64 {
        match self.object_index(object) {
            Some(i) => self.prior[i],
            None => self.unseen_prior(),
        }
    }

    fn unseen_prior(&self) -> f64 {
        self.prior.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `log p(chunk | o)`; tokens outside the vocabulary are skipped, so they
    /// weigh all objects equally. Unseen objects use the uniform distribution.
    pub fn log_chunk_prob(&self, chunk: &[String], object: &str) -> f64 {
        let oi = self.object_index(object);
        let uniform = -(self.vocab.len().max(1) as f64).ln();
        chunk
            .iter()
            .filter_map(|t| self.vocab_index.get(t))
            .map(|&v| oi.map_or(uniform, |o| self.token_probs[o][v].ln()))
            .sum()
    }

    fn knows_any(&self, chunk: &[String]) -> bool {
        chunk.iter().any(|t| self.vocab_index.contains_key(t))
    }
}

/// `argmax_o p(chunk|o) p(o)` over the candidates plus the null object, with
/// the object prior restricted to the candidate set (the null object keeps its
/// share). Ties go to the lexicographically smallest id. A chunk with no known
/// token resolves to the null object.
pub fn resolve(model: &AlignmentModel, chunk: &[String], candidates: &[String]) -> String {
    if !model.knows_any(chunk) {
        return NULL_OBJECT.to_string();
    }
    let mut ids: Vec<&str> = candidates.iter().map(String::as_str).chain([NULL_OBJECT]).collect();
    ids.sort_unstable();
    ids.dedup();
    let priors: Vec<f64> = ids.iter().map(|id| model.prior_of(id)).collect();
    let weights = restricted_prior(&ids.iter().map(|id| *id == NULL_OBJECT).collect::<Vec<_>>(), &priors);
    let mut best: Option<(&str, f64)> = None;
    for (id, w) in ids.into_iter().zip(weights) {
        let s = model.log_chunk_prob(chunk, id) + w.ln();
        if best.is_none_or(|(_, b)| s > b + 1e-12) {
            best = Some((id, s));
        }
    }
    best.map(|(id, _)| id.to_string()).unwrap_or_else(|| NULL_OBJECT.to_string())
}

/// Null keeps its global prior; the objects share the rest in proportion to
/// their priors. With no objects the null object takes everything.
fn restricted_prior(is_null: &[bool], prior: &[f64]) -> Vec<f64> {
    let null: f64 = is_null.iter().zip(prior).filter(|(n, _)| **n).map(|(_, p)| p).sum();
    let objects: f64 = is_null.iter().zip(prior).filter(|(n, _)| !**n).map(|(_, p)| p).sum();
    is_null
        .iter()
        .zip(prior)
        .map(|(&n, &p)| match (n, objects > 0.0) {
            (true, true) => null,
            (true, false) => 1.0,
            (false, true) => (1.0 - null) * p / objects,
            (false, false) => 0.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub iters: usize,
    pub delta: f64,
    pub null_prior_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            iters: 10,
            delta: DEFAULT_DELTA,
            null_prior_floor: NULL_PRIOR_FLOOR,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmReport {
    pub model: AlignmentModel,
    /// Corpus log-likelihood of the model before each M-step and after the last.
    pub log_likelihood: Vec<f64>,
    /// Log-likelihood plus the smoothing log-prior, the quantity EM maximizes.
    pub objective: Vec<f64>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Starting prior: the null object gets the fraction of instructions with more
/// chunks than candidates (at least `floor`); the rest is shared by object
/// frequency among candidate sets.
fn estimate_prior(instances: &[AlignmentInstance], objects: &[String], floor: f64) -> Vec<f64> {
    let excess = instances.iter().filter(|i| i.chunks.len() > i.candidates.len()).count();
    let null = (excess as f64 / instances.len() as f64).max(floor).min(1.0 - 1e-6);
    let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
    for inst in instances {
        for c in inst.candidates.iter().collect::<BTreeSet<_>>() {
            *counts.entry(c.as_str()).or_default() += 1.0;
        }
    }
    let total: f64 = counts.values().sum();
    objects
        .iter()
        .map(|o| {
            if o == NULL_OBJECT {
                if total > 0.0 {
                    null
                } else {
                    1.0
                }
            } else {
                (1.0 - null) * counts.get(o.as_str()).copied().unwrap_or(0.0) / total
            }
        })
        .collect()
}

struct Indexed {
    chunks: Vec<Vec<usize>>,
    candidates: Vec<usize>,
}

/// IBM-Model-1-style EM from a uniform start. Each chunk picks the null
/// object with probability `prior[NULL]`, otherwise one of the instance's
/// candidates in proportion to their frequency prior. The null share is
/// re-estimated each iteration (never below the floor); the object
/// frequency ratios stay fixed.
pub fn em_train(instances: &[AlignmentInstance], cfg: &EmConfig) -> Result<EmReport> {
    if instances.is_empty() {
        return Err(Error::Empty("alignment corpus"));
    }
    if !(cfg.delta > 0.0) {
        return Err(Error::invalid("smoothing delta", "must be positive"));
    }
    let vocab: Vec<String> = instances
        .iter()
        .flat_map(|i| i.chunks.iter().flatten().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let objects: Vec<String> = instances
        .iter()
        .flat_map(|i| i.candidates.iter().cloned())
        .chain([NULL_OBJECT.to_string()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let prior = estimate_prior(instances, &objects, cfg.null_prior_floor);
    let (nv, no) = (vocab.len(), objects.len());
    let mut model = AlignmentModel::new(vocab, objects, vec![vec![1.0 / nv as f64; nv]; no], prior, cfg.delta)?;
    let null_idx = model.object_index(NULL_OBJECT).expect("null present");
    let data: Vec<Indexed> = instances
        .iter()
        .map(|i| {
            let mut cands: Vec<usize> = i.candidates.iter().filter_map(|c| model.object_index(c)).collect();
            cands.push(null_idx);
            cands.sort_unstable();
            cands.dedup();
            Indexed {
                chunks: i
                    .chunks
                    .iter()
                    .map(|c| c.iter().map(|t| model.vocab_index[t]).collect())
                    .collect(),
                candidates: cands,
            }
        })
        .collect();
    let is_null: Vec<Vec<bool>> = data.iter().map(|d| d.candidates.iter().map(|&o| o == null_idx).collect()).collect();

    // Returns (log-likelihood, expected token counts, null responsibility
    // summed over chunks that had an object to compete with, and that chunk count).
    let e_step = |m: &AlignmentModel| -> (f64, Vec<Vec<f64>>, f64, f64) {
        let logp: Vec<Vec<f64>> = m.token_probs.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect();
        let mut counts = vec![vec![0.0; nv]; no];
        let (mut ll, mut null_mass, mut contested) = (0.0, 0.0, 0.0);
        let mut scores = Vec::new();
        for (d, nulls) in data.iter().zip(&is_null) {
            let priors: Vec<f64> = d.candidates.iter().map(|&o| m.prior[o]).collect();
            let log_w: Vec<f64> = restricted_prior(nulls, &priors).iter().map(|w| w.ln()).collect();
            for c in &d.chunks {
                scores.clear();
                scores.extend(d.candidates.iter().zip(&log_w).map(|(&o, lw)| lw + c.iter().map(|&v| logp[o][v]).sum::<f64>()));
                let z = log_sum_exp(&scores);
                ll += z;
                for (&o, s) in d.candidates.iter().zip(&scores) {
                    let q = (s - z).exp();
                    for &v in c {
                        counts[o][v] += q;
                    }
                    if o == null_idx && d.candidates.len() > 1 {
                        null_mass += q;
                        contested += 1.0;
                    }
                }
            }
        }
        (ll, counts, null_mass, contested)
    };
    let log_dirichlet = |m: &AlignmentModel| -> f64 { cfg.delta * m.token_probs.iter().flatten().map(|p| p.ln()).sum::<f64>() };

    let mut log_likelihood = Vec::with_capacity(cfg.iters + 1);
    let mut objective = Vec::with_capacity(cfg.iters + 1);
    for _ in 0..cfg.iters {
        let (ll, counts, null_mass, contested) = e_step(&model);
        log_likelihood.push(ll);
        objective.push(ll + log_dirichlet(&model));
        for (o, row) in counts.iter().enumerate() {
            let z: f64 = row.iter().sum::<f64>() + cfg.delta * nv as f64;
            model.token_probs[o] = row.iter().map(|c| (c + cfg.delta) / z).collect();
        }
        if contested > 0.0 {
            let old = model.prior[null_idx];
            let null = (null_mass / contested).clamp(cfg.null_prior_floor.min(1.0 - 1e-6), 1.0 - 1e-6);
            for (o, p) in model.prior.iter_mut().enumerate() {
                *p = if o == null_idx { null } else { *p * (1.0 - null) / (1.0 - old) };
            }
        }
    }
    let (ll, ..) = e_step(&model);
    log_likelihood.push(ll);
    objective.push(ll + log_dirichlet(&model));
    Ok(EmReport {
        model,
        log_likelihood,
        objective,
    })
}
