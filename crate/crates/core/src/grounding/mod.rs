//! Few-shot grounding of object references in a first-person frame:
//! proposals, alignment scores, and per-reference segmentation masks.

mod align;
mod masks;
mod proposals;

use serde::{Deserialize, Serialize};

use crate::embed_metric::{EmbeddingNet, KdeModel, IMAGE_SIGMA, TEXT_SIGMA};
use crate::exemplar_db::{ObjectDatabase, WordVectorTable};
use crate::grid::Grid;
use crate::sim_env::RenderedScene;
use crate::Result;

pub use align::{align_score, combine, AlignmentTable, ObjectnessScale};
pub use masks::{refine_box, segment_all, segment_reference, FOREGROUND_THRESHOLD};
pub use proposals::{propose_regions, Proposal, ProposalConfig};

/// Everything needed to ground references against one object database.
#[derive(Debug, Clone)]
pub struct Grounder {
    pub db: ObjectDatabase,
    pub table: WordVectorTable,
    pub net: EmbeddingNet,
    pub kde_img: KdeModel,
    pub kde_txt: KdeModel,
    pub scale: ObjectnessScale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grounding {
    pub proposals: Vec<Proposal>,
    /// `None` when there are no proposals or no references.
    pub table: Option<AlignmentTable>,
    pub box_masks: Vec<Grid>,
    pub reference_masks: Vec<Grid>,
    pub all_objects: Grid,
}

impl Grounder {
    pub fn new(db: ObjectDatabase, table: WordVectorTable, net: EmbeddingNet) -> Result<Self> {
        let kde_img = KdeModel::from_images(&db, &net, IMAGE_SIGMA)?;
        let kde_txt = KdeModel::from_phrases(&db, &table, TEXT_SIGMA)?;
        Ok(Grounder {
            db,
            table,
            net,
            kde_img,
            kde_txt,
            scale: ObjectnessScale::default(),
        })
    }

    pub fn ground(&self, scene: &RenderedScene, proposals: Vec<Proposal>, references: &[Vec<String>]) -> Result<Grounding> {
        let (w, h) = (scene.image.width, scene.image.height);
        let box_masks = proposals
            .iter()
            .map(|p| refine_box(&scene.foreground, w, h, &p.bbox, FOREGROUND_THRESHOLD))
            .collect::<Result<Vec<_>>>()?;
        let all_objects = segment_all(&box_masks, w, h)?;
        if proposals.is_empty() || references.is_empty() {
            return Ok(Grounding {
                proposals,
                table: None,
                reference_masks: vec![Grid::zeros(w, h); references.len()],
                box_masks,
                all_objects,
            });
        }
        let table = align_score(
            &scene.image,
            &proposals,
            references,
            &self.db,
            &self.net,
            &self.kde_img,
            &self.kde_txt,
            &self.table,
            self.scale,
        )?;
        let reference_masks = (0..references.len())
            .map(|r| segment_reference(&table.column(r), &box_masks))
            .collect::<Result<Vec<_>>>()?;
        Ok(Grounding {
            proposals,
            table: Some(table),
            box_masks,
            reference_masks,
            all_objects,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSummary {
    pub reference: String,
    pub max: f64,
    /// Value-weighted centroid in pixels; `None` for an empty mask.
    pub centroid: Option<[f64; 2]>,
}

/// One line of the grounding trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub frame: usize,
    pub proposals: Vec<Proposal>,
    pub align: Vec<Vec<f64>>,
    pub masks: Vec<MaskSummary>,
}

pub fn mask_summary(reference: &str, m: &Grid) -> MaskSummary {
    let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
    for y in 0..m.height() {
        for x in 0..m.width() {
            let v = m.get(x, y);
            sx += v * (x as f64 + 0.5);
            sy += v * (y as f64 + 0.5);
            s += v;
        }
    }
    MaskSummary {
        reference: reference.to_string(),
        max: m.max_value(),
        centroid: (s > 0.0).then(|| [sx / s, sy / s]),
    }
}

impl TraceRecord {
    pub fn new(frame: usize, g: &Grounding, references: &[Vec<String>]) -> Self {
        TraceRecord {
            frame,
            proposals: g.proposals.clone(),
            align: g.table.as_ref().map(|t| t.align.clone()).unwrap_or_default(),
            masks: references
                .iter()
                .zip(&g.reference_masks)
                .map(|(r, m)| mask_summary(&r.join(" "), m))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_mapping::Pose;
    use crate::instruction_lang::Lexicon;
    use crate::sim_env::{
        build_exemplar_db, held_out_pool, render, synthetic_word_vectors, DatasetConfig, Layout, PlacedObject, RenderConfig,
    };

    #[test]
    fn grounds_reference_to_its_object() {
        let pool = held_out_pool();
        let db = build_exemplar_db(&pool, 5, 3, &DatasetConfig::default()).unwrap();
        let table = synthetic_word_vectors(&Lexicon::builtin(), 0);
        let net = EmbeddingNet::random(32 * 32 * 3, 64, 16, 0);
        let g = Grounder::new(db, table, net).unwrap();
        let l = Layout {
            edge: 4.7,
            objects: vec![
                PlacedObject::new(&pool[0], 3.0, 2.0, 0.2, 0.3, 0.0),
                PlacedObject::new(&pool[1], 3.0, 2.8, 0.2, 0.3, 0.0),
            ],
        };
        let scene = render(&l, &Pose::ground(1.0, 2.4, 0.0), &RenderConfig::default(), 1);
        let props = propose_regions(&scene, &ProposalConfig::noiseless(), 0);
        let refs = vec![pool[1].phrases()[0].clone(), pool[0].phrases()[0].clone()];
        let out = g.ground(&scene, props, &refs).unwrap();
        let t = out.table.as_ref().unwrap();
        assert_eq!(out.proposals[t.best_box(0).unwrap()].source, Some(1));
        assert_eq!(out.proposals[t.best_box(1).unwrap()].source, Some(0));
        for (m, r) in out.reference_masks.iter().zip(0..) {
            assert!(m.data().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(out.all_objects.data().iter().zip(m.data()).all(|(a, b)| a >= b), "ref {r}");
        }
        let rec = TraceRecord::new(0, &out, &refs);
        assert_eq!(rec.masks.len(), 2);
        assert!(rec.masks[0].centroid.is_some());
    }
}
