use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::image::BBox;
use crate::sim_env::RenderedScene;
use crate::util::rng;

/// A candidate box with its objectness probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub bbox: BBox,
    pub objectness: f64,
    /// Layout index of the object the box was drawn around; `None` for distractors.
    pub source: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalConfig {
    /// Each box edge moves by up to this many pixels.
    pub jitter: f64,
    pub distractors: usize,
    /// Half-width of the uniform noise added to the IoU objectness.
    pub objectness_noise: f64,
    pub distractor_objectness: (f64, f64),
    /// Side length range of distractor boxes, pixels.
    pub distractor_size: (f64, f64),
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            jitter: 2.0,
            distractors: 1,
            objectness_noise: 0.05,
            distractor_objectness: (0.05, 0.3),
            distractor_size: (8.0, 40.0),
        }
    }
}

impl ProposalConfig {
    /// Ground-truth boxes with objectness 1 and no distractors.
    pub fn noiseless() -> Self {
        ProposalConfig {
            jitter: 0.0,
            distractors: 0,
            objectness_noise: 0.0,
            ..Self::default()
        }
    }
}

/// Stand-in region proposer over the renderer's ground truth: one jittered
/// box per annotated object, then distractor boxes with low objectness.
pub fn propose_regions(scene: &RenderedScene, cfg: &ProposalConfig, seed: u64) -> Vec<Proposal> {
    let (w, h) = (scene.image.width, scene.image.height);
    let mut r = rng(seed);
    let mut u = |a: f64| if a > 0.0 { r.random_range(-a..=a) } else { 0.0 };
    let mut out = Vec::with_capacity(scene.annotations.len() + cfg.distractors);
    for a in &scene.annotations {
        let t = a.bbox;
        let mut b = BBox::new(t.x0 + u(cfg.jitter), t.y0 + u(cfg.jitter), t.x1 + u(cfg.jitter), t.y1 + u(cfg.jitter))
            .clipped(w, h);
        if b.x1 - b.x0 < 1.0 {
            b = BBox::new(t.x0, b.y0, t.x1, b.y1);
        }
        if b.y1 - b.y0 < 1.0 {
            b = BBox::new(b.x0, t.y0, b.x1, t.y1);
        }
        let objectness = (b.iou(&t) + u(cfg.objectness_noise)).clamp(0.0, 1.0);
        out.push(Proposal {
            bbox: b,
            objectness,
            source: Some(a.object_index),
        });
    }
    for _ in 0..cfg.distractors {
        let bw = r.random_range(cfg.distractor_size.0..=cfg.distractor_size.1).min(w as f64);
        let bh = r.random_range(cfg.distractor_size.0..=cfg.distractor_size.1).min(h as f64);
        let x0 = r.random_range(0.0..=(w as f64 - bw));
        let y0 = r.random_range(0.0..=(h as f64 - bh));
        out.push(Proposal {
            bbox: BBox::new(x0, y0, x0 + bw, y0 + bh),
            objectness: r.random_range(cfg.distractor_objectness.0..=cfg.distractor_objectness.1),
            source: None,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_mapping::Pose;
    use crate::sim_env::{catalog, render, Layout, PlacedObject, RenderConfig};

    fn two_object_scene() -> RenderedScene {
        let pool = catalog();
        let l = Layout {
            edge: 4.7,
            objects: vec![
                PlacedObject::new(&pool[0], 3.0, 2.0, 0.2, 0.3, 0.0),
                PlacedObject::new(&pool[4], 3.0, 2.8, 0.2, 0.3, 0.0),
            ],
        };
        render(&l, &Pose::ground(1.0, 2.4, 0.0), &RenderConfig::default(), 0)
    }

    #[test]
    fn noiseless_returns_true_boxes() {
        let s = two_object_scene();
        assert_eq!(s.annotations.len(), 2);
        let p = propose_regions(&s, &ProposalConfig::noiseless(), 0);
        assert_eq!(p.len(), 2);
        for (q, a) in p.iter().zip(&s.annotations) {
            assert_eq!(q.bbox, a.bbox);
            assert_eq!(q.objectness, 1.0);
        }
    }

    #[test]
    fn empty_scene_gets_one_distractor() {
        let s = render(&Layout::empty(), &Pose::ground(1.0, 1.0, 0.0), &RenderConfig::default(), 0);
        let p = propose_regions(&s, &ProposalConfig::default(), 4);
        assert_eq!(p.len(), 1);
        assert!((0.05..=0.3).contains(&p[0].objectness) && p[0].source.is_none());
    }

    #[test]
    fn jittered_32px_boxes_keep_iou() {
        let truth = BBox::new(40.0, 20.0, 72.0, 52.0);
        let mut scene = two_object_scene();
        scene.annotations.truncate(1);
        scene.annotations[0].bbox = truth;
        for seed in 0..500 {
            let p = propose_regions(&scene, &ProposalConfig::default(), seed);
            // Area oracle for the worst case is (28/36)^2 > 0.5; check the sample.
            assert!(p[0].bbox.iou(&truth) >= 0.5);
        }
    }
}
