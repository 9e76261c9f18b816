use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{EmbeddingNet, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN};
use super::triplet::{triplet_loss, triplet_loss_and_grad, Margins, TripletBatch};
use crate::exemplar_db::ImagePatch;
use crate::util::sub_rng;
use crate::{Error, Result};

/// A triplet as indices into a patch pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletIndices {
    pub anchor: usize,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub embed_dim: usize,
    pub margins: Margins,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-4,
            epochs: 10,
            seed: 0,
            hidden: DEFAULT_HIDDEN,
            embed_dim: DEFAULT_EMBED_DIM,
            margins: Margins::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub net: EmbeddingNet,
    /// Mean loss over the triplets before any update.
    pub initial_loss: f64,
    /// Mean pre-update loss per epoch.
    pub epoch_losses: Vec<f64>,
}

fn batch<'a>(pool: &'a [ImagePatch], t: &TripletIndices, margins: Margins) -> TripletBatch<'a> {
    TripletBatch {
        anchor: &pool[t.anchor],
        positives: t.positives.iter().map(|&i| &pool[i]).collect(),
        negatives: t.negatives.iter().map(|&i| &pool[i]).collect(),
        margins,
    }
}

pub fn mean_triplet_loss(
    net: &EmbeddingNet,
    pool: &[ImagePatch],
    triplets: &[TripletIndices],
    margins: Margins,
) -> Result<f64> {
    if triplets.is_empty() {
        return Err(Error::Empty("triplets"));
    }
    let mut total = 0.0;
    for t in triplets {
        total += triplet_loss(net, &batch(pool, t, margins))?;
    }
    Ok(total / triplets.len() as f64)
}

/// Plain SGD over shuffled triplets, one update per triplet.
///
/// With `init = None` the network is He-initialized from `cfg.seed`.
pub fn train_embedder(
    pool: &[ImagePatch],
    triplets: &[TripletIndices],
    cfg: &TrainConfig,
    init: Option<EmbeddingNet>,
) -> Result<TrainReport> {
    if triplets.is_empty() {
        return Err(Error::Empty("triplets"));
    }
    if let Some(bad) = triplets
        .iter()
        .flat_map(|t| std::iter::once(t.anchor).chain(t.positives.iter().copied()).chain(t.negatives.iter().copied()))
        .find(|&i| i >= pool.len())
    {
        return Err(Error::invalid("triplet", format!("index {bad} outside pool of {}", pool.len())));
    }
    let input_dim = pool[triplets[0].anchor].data.len();
    let mut net = init.unwrap_or_else(|| EmbeddingNet::random(input_dim, cfg.hidden, cfg.embed_dim, cfg.seed));
    let initial_loss = mean_triplet_loss(&net, pool, triplets, cfg.margins)?;
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut rng = sub_rng(cfg.seed, 1);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &k in &order {
            let (loss, grad) = triplet_loss_and_grad(&net, &batch(pool, &triplets[k], cfg.margins))?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("loss {loss} at epoch {epoch}, triplet {k}")));
            }
            total += loss;
            if cfg.learning_rate != 0.0 && loss > 0.0 {
                for (p, g) in net.params_mut().iter_mut().zip(&grad) {
                    *p -= cfg.learning_rate * g;
                }
            }
        }
        let mean = total / triplets.len() as f64;
        if !mean.is_finite() || net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!("training diverged at epoch {epoch}")));
        }
        epoch_losses.push(mean);
    }
    Ok(TrainReport {
        net,
        initial_loss,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_pool() -> (Vec<ImagePatch>, Vec<TripletIndices>) {
        let mk = |v: f64, j: f64| ImagePatch::new(2, 2, 3, (0..12).map(|i| (v + j * (i as f64 * 0.13).sin()).clamp(0.0, 1.0)).collect()).unwrap();
        let mut pool = Vec::new();
        for k in 0..6 {
            pool.push(mk(0.2, 0.02 * k as f64));
            pool.push(mk(0.3, 0.02 * k as f64));
        }
        let triplets = (0..6)
            .map(|k| TripletIndices {
                anchor: 2 * k,
                positives: vec![2 * ((k + 1) % 6)],
                negatives: vec![2 * k + 1],
            })
            .collect();
        (pool, triplets)
    }

    #[test]
    fn zero_epochs_returns_init() {
        let (pool, tr) = toy_pool();
        let init = EmbeddingNet::random(12, 4, 2, 3);
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let rep = train_embedder(&pool, &tr, &cfg, Some(init.clone())).unwrap();
        assert_eq!(rep.net, init);
        assert!(rep.epoch_losses.is_empty());
    }

    #[test]
    fn zero_learning_rate_keeps_loss() {
        let (pool, tr) = toy_pool();
        let cfg = TrainConfig { epochs: 3, learning_rate: 0.0, hidden: 4, embed_dim: 2, ..Default::default() };
        let rep = train_embedder(&pool, &tr, &cfg, None).unwrap();
        for l in &rep.epoch_losses {
            assert!((l - rep.initial_loss).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (pool, tr) = toy_pool();
        let cfg = TrainConfig { epochs: 5, learning_rate: 0.05, hidden: 4, embed_dim: 2, seed: 9, ..Default::default() };
        let a = train_embedder(&pool, &tr, &cfg, None).unwrap();
        let b = train_embedder(&pool, &tr, &cfg, None).unwrap();
        assert_eq!(a.net, b.net);
    }

    #[test]
    fn out_of_range_index_rejected() {
        let (pool, _) = toy_pool();
        let tr = vec![TripletIndices { anchor: 0, positives: vec![99], negatives: vec![1] }];
        assert!(train_embedder(&pool, &tr, &TrainConfig::default(), None).is_err());
    }
}
