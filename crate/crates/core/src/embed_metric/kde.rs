use std::f64::consts::PI;

use super::net::EmbeddingNet;
use crate::exemplar_db::{phrase_embedding, ObjectDatabase, WordVectorTable};
use crate::util::squared_distance;
use crate::{Error, Result};

pub const IMAGE_SIGMA: f64 = 2.0;
pub const TEXT_SIGMA: f64 = 0.5;

/// Posteriors whose largest unnormalized density is below this fall back to the prior.
const UNDERFLOW_PDF: f64 = 1e-300;

/// Gaussian kernel density model over per-object exemplar embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    sigma: f64,
    /// Include the `(2 pi sigma^2)^(E/2)` normalizer. It cancels in posteriors.
    normalized: bool,
    objects: Vec<(String, Vec<Vec<f64>>)>,
}

impl KdeModel {
    pub fn new(sigma: f64, objects: Vec<(String, Vec<Vec<f64>>)>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("kde sigma", format!("{sigma} is not positive")));
        }
        let dim = objects.first().and_then(|(_, e)| e.first()).map(Vec::len);
        for (id, ex) in &objects {
            if ex.is_empty() {
                return Err(Error::invalid("kde model", format!("object {id:?} has no exemplars")));
            }
            if ex.iter().any(|e| Some(e.len()) != dim) {
                return Err(Error::invalid("kde model", format!("object {id:?} has ragged exemplar dims")));
            }
        }
        Ok(KdeModel {
            sigma,
            normalized: true,
            objects,
        })
    }

    /// Image-side model: embed every exemplar image with `net`.
    pub fn from_images(db: &ObjectDatabase, net: &EmbeddingNet, sigma: f64) -> Result<Self> {
        let objects = db
            .entries()
            .iter()
            .map(|e| {
                let ex = e.images.iter().map(|p| net.embed(p)).collect::<Result<Vec<_>>>()?;
                Ok((e.id.clone(), ex))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sigma, objects)
    }

    /// Text-side model: mean word vector of every exemplar phrase.
    pub fn from_phrases(db: &ObjectDatabase, table: &WordVectorTable, sigma: f64) -> Result<Self> {
        let objects = db
            .entries()
            .iter()
            .map(|e| {
                let ex = e
                    .phrases
                    .iter()
                    .map(|p| phrase_embedding(p, table).map(|x| x.vector))
                    .collect::<Result<Vec<_>>>()?;
                Ok((e.id.clone(), ex))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sigma, objects)
    }

    pub fn with_normalization(mut self, on: bool) -> Self {
        self.normalized = on;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn exemplars(&self, id: &str) -> Option<&[Vec<f64>]> {
        self.objects.iter().find(|(o, _)| o == id).map(|(_, e)| e.as_slice())
    }

    fn log_pdf(&self, exemplars: &[Vec<f64>], query: &[f64]) -> Result<f64> {
        let dim = exemplars[0].len();
        if query.len() != dim {
            return Err(Error::dims(dim, query.len()));
        }
        let two_var = 2.0 * self.sigma * self.sigma;
        let logs: Vec<f64> = exemplars.iter().map(|e| -squared_distance(query, e) / two_var).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        let mut lp = lse - (exemplars.len() as f64).ln();
        if self.normalized {
            lp -= 0.5 * dim as f64 * (PI * two_var).ln();
        }
        Ok(lp)
    }

    pub fn log_pdf_of(&self, id: &str, query: &[f64]) -> Result<f64> {
        let ex = self.exemplars(id).ok_or_else(|| Error::UnknownObject(id.to_string()))?;
        self.log_pdf(ex, query)
    }
}

/// `pdf(query | object)`: mean of Gaussian kernels at the object's exemplars.
pub fn kde_pdf(model: &KdeModel, object_id: &str, query: &[f64]) -> Result<f64> {
    Ok(model.log_pdf_of(object_id, query)?.exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// One probability per database entry, in database order.
    pub probs: Vec<f64>,
    /// Every density was numerically zero; `probs` is the prior.
    pub underflow: bool,
}

/// Bayes-normalized object posterior for one query embedding.
pub fn kde_posterior(model: &KdeModel, db: &ObjectDatabase, query: &[f64]) -> Result<Posterior> {
    let logs = db
        .ids()
        .map(|id| model.log_pdf_of(id, query))
        .collect::<Result<Vec<_>>>()?;
    let max_log = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_log < UNDERFLOW_PDF.ln() {
        return Ok(Posterior {
            probs: db.prior().to_vec(),
            underflow: true,
        });
    }
    let weighted: Vec<f64> = logs.iter().zip(db.prior()).map(|(l, p)| l + p.ln()).collect();
    let m = weighted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = weighted.iter().map(|w| (w - m).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    Ok(Posterior {
        probs: unnorm.iter().map(|u| u / z).collect(),
        underflow: false,
    })
}
