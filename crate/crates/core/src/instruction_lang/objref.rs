use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embed_metric::{EmbeddingNet, NetCheckpoint};
use crate::exemplar_db::{phrase_embedding, ObjectDatabase, WordVectorTable};
use crate::util::{canonical_json, read_to_string, squared_distance, sub_rng, write_bytes};
use crate::{Error, Result};

pub const LAMBDA_R1: f64 = 0.5;
pub const T_R2: f64 = 0.03;

/// A noun chunk labeled 1 if it denotes a physical object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledChunk {
    pub tokens: Vec<String>,
    pub label: u8,
}

pub fn load_labeled_chunks(path: &Path) -> Result<Vec<LabeledChunk>> {
    read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let c: LabeledChunk = serde_json::from_str(l)?;
            if c.label > 1 {
                return Err(Error::invalid("labeled chunk", format!("label {} is not 0 or 1", c.label)));
            }
            Ok(c)
        })
        .collect()
}

pub fn save_labeled_chunks(chunks: &[LabeledChunk], path: &Path) -> Result<()> {
    let mut s = String::new();
    for c in chunks {
        s.push_str(&canonical_json(c)?);
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}

/// Perceptron over the mean word vector of a chunk. Its output is a logit
/// for "not an object reference": lower means more object-like.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjRefClassifier {
    pub net: EmbeddingNet,
    pub lambda: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjRefDecision {
    pub nn: f64,
    pub min_phrase_dist2: f64,
    pub score: f64,
    pub is_reference: bool,
}

#[derive(Serialize, Deserialize)]
struct ClassifierRecord {
    net: NetCheckpoint,
    lambda: f64,
    threshold: f64,
}

impl ObjRefClassifier {
    /// A classifier whose network outputs `bias` everywhere.
    pub fn constant(dim: usize, hidden: usize, bias: f64) -> Self {
        ObjRefClassifier {
            net: EmbeddingNet::constant(dim, hidden, &[bias]),
            lambda: LAMBDA_R1,
            threshold: T_R2,
        }
    }

    pub fn nn_score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.net.embed_slice(x)?[0])
    }

    /// `nn + lambda * min_phrase_dist2 < threshold`.
    pub fn decide(&self, nn: f64, min_phrase_dist2: f64) -> ObjRefDecision {
        let score = nn + self.lambda * min_phrase_dist2;
        ObjRefDecision {
            nn,
            min_phrase_dist2,
            score,
            is_reference: score < self.threshold,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        canonical_json(&ClassifierRecord {
            net: self.net.to_checkpoint(None, serde_json::Value::Null),
            lambda: self.lambda,
            threshold: self.threshold,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: ClassifierRecord = serde_json::from_str(s)?;
        Ok(ObjRefClassifier {
            net: EmbeddingNet::from_checkpoint(&r.net)?,
            lambda: r.lambda,
            threshold: r.threshold,
        })
    }
}

/// Smallest squared distance from `x` to any phrase embedding in the database.
pub fn min_phrase_distance(x: &[f64], db: &ObjectDatabase, table: &WordVectorTable) -> Result<f64> {
    let mut best = f64::INFINITY;
    for e in db.entries() {
        for p in &e.phrases {
            best = best.min(squared_distance(x, &phrase_embedding(p, table)?.vector));
        }
    }
    Ok(best)
}

pub fn classify_reference(
    chunk: &[String],
    clf: &ObjRefClassifier,
    db: &ObjectDatabase,
    table: &WordVectorTable,
) -> Result<ObjRefDecision> {
    let x = phrase_embedding(chunk, table)?.vector;
    let d = if clf.lambda == 0.0 { 0.0 } else { min_phrase_distance(&x, db, table)? };
    Ok(clf.decide(clf.nn_score(&x)?, d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjRefConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub lambda: f64,
    pub threshold: f64,
}

impl Default for ObjRefConfig {
    fn default() -> Self {
        ObjRefConfig {
            hidden: 16,
            learning_rate: 0.05,
            epochs: 40,
            seed: 0,
            lambda: LAMBDA_R1,
            threshold: T_R2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObjRefReport {
    pub classifier: ObjRefClassifier,
    /// Mean cross-entropy before training, then after each epoch.
    pub losses: Vec<f64>,
    /// Accuracy of the network sign alone (`nn < 0` means reference).
    pub train_accuracy: f64,
    pub warnings: Vec<String>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of logit `z` against target `t`, computed stably.
fn bce(z: f64, t: f64) -> f64 {
    z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
}

fn stats(net: &EmbeddingNet, xs: &[Vec<f64>], targets: &[f64]) -> Result<(f64, f64)> {
    let (mut loss, mut correct) = (0.0, 0usize);
    for (x, &t) in xs.iter().zip(targets) {
        let z = net.embed_slice(x)?[0];
        loss += bce(z, t);
        correct += usize::from((z >= 0.0) == (t == 1.0));
    }
    let n = xs.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// SGD on binary cross-entropy; the network's target is `1 - label`.
pub fn train_objref(data: &[LabeledChunk], table: &WordVectorTable, cfg: &ObjRefConfig) -> Result<ObjRefReport> {
    if data.is_empty() {
        return Err(Error::Empty("labeled chunks"));
    }
    let xs = data
        .iter()
        .map(|c| phrase_embedding(&c.tokens, table).map(|e| e.vector))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = data.iter().map(|c| 1.0 - f64::from(c.label.min(1))).collect();
    let positives = data.iter().filter(|c| c.label == 1).count();
    let mut warnings = Vec::new();
    if positives == 0 || positives == data.len() {
        let rate = targets[0];
        warnings.push(format!("all {} chunks carry label {}; returning a constant classifier", data.len(), 1.0 - rate));
        let bias = if rate > 0.5 { 6.0 } else { -6.0 };
        let mut clf = ObjRefClassifier::constant(table.dim(), cfg.hidden, bias);
        clf.lambda = cfg.lambda;
        clf.threshold = cfg.threshold;
        let (l, acc) = stats(&clf.net, &xs, &targets)?;
        return Ok(ObjRefReport {
            classifier: clf,
            losses: vec![l],
            train_accuracy: acc,
            warnings,
        });
    }
    let mut net = EmbeddingNet::random(table.dim(), cfg.hidden, 1, cfg.seed);
    let mut losses = vec![stats(&net, &xs, &targets)?.0];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut r = sub_rng(cfg.seed, 1);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut r);
        for &i in &order {
            let t = targets[i];
            let (_, g) = net.value_and_grad(&xs[i], |out| (bce(out[0], t), vec![sigmoid(out[0]) - t]))?;
            net.params_mut().iter_mut().zip(&g).for_each(|(p, g)| *p -= cfg.learning_rate * g);
        }
        let (l, _) = stats(&net, &xs, &targets)?;
        if !l.is_finite() {
            return Err(Error::Numerical("object-reference training diverged".into()));
        }
        losses.push(l);
    }
    let (_, acc) = stats(&net, &xs, &targets)?;
    Ok(ObjRefReport {
        classifier: ObjRefClassifier {
            net,
            lambda: cfg.lambda,
            threshold: cfg.threshold,
        },
        losses,
        train_accuracy: acc,
        warnings,
    })
}
