use serde::{Deserialize, Serialize};

use super::proposals::Proposal;
use crate::embed_metric::{kde_posterior, EmbeddingNet, KdeModel};
use crate::exemplar_db::{phrase_embedding, ObjectDatabase, WordVectorTable, PATCH_SIZE};
use crate::image::Image;
use crate::{Error, Result};

/// How box objectness scales into the box prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectnessScale {
    /// `P(b) = objectness * min_o P(o)`, which keeps every score in `[0, 1]`.
    #[default]
    PriorBounded,
    /// `P(b) = objectness`.
    Raw,
}

impl ObjectnessScale {
    pub fn box_prior(self, objectness: f64, prior: &[f64]) -> f64 {
        match self {
            ObjectnessScale::Raw => objectness,
            ObjectnessScale::PriorBounded => objectness * prior.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTable {
    /// `align[b][r]`.
    pub align: Vec<Vec<f64>>,
    /// `p_o_b[b][o]`.
    pub p_o_b: Vec<Vec<f64>>,
    /// `p_o_r[r][o]`.
    pub p_o_r: Vec<Vec<f64>>,
    pub box_prior: Vec<f64>,
    pub box_underflow: Vec<bool>,
    pub ref_underflow: Vec<bool>,
}

impl AlignmentTable {
    pub fn column(&self, r: usize) -> Vec<f64> {
        self.align.iter().map(|row| row[r]).collect()
    }

    /// Highest-scoring proposal for reference `r`; ties go to the first.
    pub fn best_box(&self, r: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (b, row) in self.align.iter().enumerate() {
            if best.is_none_or(|(_, v)| row[r] > v) {
                best = Some((b, row[r]));
            }
        }
        best.map(|(b, _)| b)
    }
}

/// `Align(b, r) = sum_o P(o|b) P(b) P(o|r) / P(o)`.
pub fn combine(box_prior: &[f64], p_o_b: &[Vec<f64>], p_o_r: &[Vec<f64>], prior: &[f64]) -> Result<Vec<Vec<f64>>> {
    if box_prior.len() != p_o_b.len() {
        return Err(Error::dims(p_o_b.len(), box_prior.len()));
    }
    for row in p_o_b.iter().chain(p_o_r) {
        if row.len() != prior.len() {
            return Err(Error::dims(prior.len(), row.len()));
        }
    }
    if prior.iter().any(|&p| p <= 0.0) {
        return Err(Error::invalid("object prior", "must be positive"));
    }
    Ok(p_o_b
        .iter()
        .zip(box_prior)
        .map(|(pb, &b)| {
            p_o_r
                .iter()
                .map(|pr| b * pb.iter().zip(pr).zip(prior).map(|((x, y), p)| x * y / p).sum::<f64>())
                .collect()
        })
        .collect())
}

/// Score every proposal against every reference.
#[allow(clippy::too_many_arguments)]
pub fn align_score(
    image: &Image,
    proposals: &[Proposal],
    references: &[Vec<String>],
    db: &ObjectDatabase,
    net: &EmbeddingNet,
    kde_img: &KdeModel,
    kde_txt: &KdeModel,
    table: &WordVectorTable,
    scale: ObjectnessScale,
) -> Result<AlignmentTable> {
    if proposals.is_empty() {
        return Err(Error::Empty("proposals"));
    }
    if references.is_empty() {
        return Err(Error::Empty("references"));
    }
    let mut p_o_b = Vec::with_capacity(proposals.len());
    let mut box_underflow = Vec::with_capacity(proposals.len());
    for p in proposals {
        let e = net.embed(&image.crop(&p.bbox, PATCH_SIZE))?;
        let post = kde_posterior(kde_img, db, &e)?;
        p_o_b.push(post.probs);
        box_underflow.push(post.underflow);
    }
    let mut p_o_r = Vec::with_capacity(references.len());
    let mut ref_underflow = Vec::with_capacity(references.len());
    for r in references {
        let e = phrase_embedding(r, table)?;
        let post = kde_posterior(kde_txt, db, &e.vector)?;
        p_o_r.push(post.probs);
        ref_underflow.push(post.underflow);
    }
    let box_prior: Vec<f64> = proposals.iter().map(|p| scale.box_prior(p.objectness, db.prior())).collect();
    let align = combine(&box_prior, &p_o_b, &p_o_r, db.prior())?;
    Ok(AlignmentTable {
        align,
        p_o_b,
        p_o_r,
        box_prior,
        box_underflow,
        ref_underflow,
    })
}
