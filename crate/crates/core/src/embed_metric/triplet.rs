use serde::{Deserialize, Serialize};

use super::net::EmbeddingNet;
use crate::exemplar_db::ImagePatch;
use crate::util::squared_distance;
use crate::{Error, Result};

/// Margin constants of the triplet loss (`m1 < m2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub m1: f64,
    pub m2: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Margins { m1: 1.0, m2: 2.0 }
    }
}

impl Margins {
    fn validate(&self) -> Result<()> {
        if !(self.m2 > self.m1 && self.m1 > 0.0) {
            return Err(Error::invalid("margins", format!("need m2 > m1 > 0, got {self:?}")));
        }
        Ok(())
    }
}

/// An anchor image, images of the same object, and images of another object.
#[derive(Debug, Clone)]
pub struct TripletBatch<'a> {
    pub anchor: &'a ImagePatch,
    pub positives: Vec<&'a ImagePatch>,
    pub negatives: Vec<&'a ImagePatch>,
    pub margins: Margins,
}

/// The three hinge terms for set distances `s_a` (positives) and `s_b` (negatives).
pub fn triplet_terms(s_a: f64, s_b: f64, m: Margins) -> [f64; 3] {
    [
        (s_a - m.m2).max(0.0),
        (m.m2 - s_b).max(0.0),
        (s_a - s_b + m.m1).max(0.0),
    ]
}

fn nearest(anchor: &[f64], others: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, e) in others.iter().enumerate() {
        let d = squared_distance(anchor, e);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub fn triplet_loss(net: &EmbeddingNet, batch: &TripletBatch<'_>) -> Result<f64> {
    Ok(eval(net, batch, false)?.0)
}

/// Loss and its gradient with respect to every network parameter.
pub fn triplet_loss_and_grad(net: &EmbeddingNet, batch: &TripletBatch<'_>) -> Result<(f64, Vec<f64>)> {
    let (loss, grad) = eval(net, batch, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

fn eval(net: &EmbeddingNet, batch: &TripletBatch<'_>, want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
    if batch.positives.is_empty() {
        return Err(Error::Empty("triplet positives"));
    }
    if batch.negatives.is_empty() {
        return Err(Error::Empty("triplet negatives"));
    }
    batch.margins.validate()?;
    let check = |p: &ImagePatch| {
        if p.data.len() != net.input_dim() {
            Err(Error::dims(net.input_dim(), p.data.len()))
        } else {
            Ok(())
        }
    };
    check(batch.anchor)?;
    batch.positives.iter().chain(&batch.negatives).try_for_each(|p| check(p))?;

    let a = net.forward_full(batch.anchor.as_slice());
    let pos: Vec<_> = batch.positives.iter().map(|p| net.forward_full(p.as_slice())).collect();
    let neg: Vec<_> = batch.negatives.iter().map(|p| net.forward_full(p.as_slice())).collect();
    let pos_out: Vec<Vec<f64>> = pos.iter().map(|x| x.out.clone()).collect();
    let neg_out: Vec<Vec<f64>> = neg.iter().map(|x| x.out.clone()).collect();
    let (jp, s_a) = nearest(&a.out, &pos_out);
    let (jn, s_b) = nearest(&a.out, &neg_out);
    let m = batch.margins;
    let loss: f64 = triplet_terms(s_a, s_b, m).iter().sum();
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("triplet loss is {loss} (s_a={s_a}, s_b={s_b})")));
    }
    if !want_grad {
        return Ok((loss, None));
    }

    // Strict inequalities: the subgradient at a hinge kink is zero.
    let third = s_a - s_b + m.m1 > 0.0;
    let g_sa = f64::from(u8::from(s_a - m.m2 > 0.0)) + f64::from(u8::from(third));
    let g_sb = -f64::from(u8::from(m.m2 - s_b > 0.0)) - f64::from(u8::from(third));

    let mut grad = vec![0.0; net.num_params()];
    let dim = net.output_dim();
    let mut d_anchor = vec![0.0; dim];
    let mut d_pos = vec![0.0; dim];
    let mut d_neg = vec![0.0; dim];
    for k in 0..dim {
        let dp = a.out[k] - pos_out[jp][k];
        let dn = a.out[k] - neg_out[jn][k];
        d_anchor[k] = 2.0 * (g_sa * dp + g_sb * dn);
        d_pos[k] = -2.0 * g_sa * dp;
        d_neg[k] = -2.0 * g_sb * dn;
    }
    net.backward(batch.anchor.as_slice(), &a, &d_anchor, &mut grad);
    net.backward(batch.positives[jp].as_slice(), &pos[jp], &d_pos, &mut grad);
    net.backward(batch.negatives[jn].as_slice(), &neg[jn], &d_neg, &mut grad);
    Ok((loss, Some(grad)))
}
